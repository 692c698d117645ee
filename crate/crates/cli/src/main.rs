//! `tecert`: certify test elements and almost primitive elements from the
//! command line.

use std::fmt::Write as _;
use std::io::Read as _;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use tecert::arrangement::{certify_arrangement, parse_arrangement, random_arrangement, Catalog};
use tecert::demushkin::{
    build_relator, certify_demushkin, certify_nonorientable, certify_surface, check_demushkin_test,
    check_demushkin_test_2, presentation, relator_text, DemushkinCase, DemushkinError, DemushkinInvariants,
    HypothesisCheck,
};
use tecert::engine::{certify, densify_discrete, densify_pro_p, EngineConfig};
use tecert::finite::{build_group, run_checks, CheckStatus, GroupSpec, CHECKS, DEFAULT_BUDGET};
use tecert::frattini::is_almost_primitive_with;
use tecert::replay::replay;
use tecert::{parse_word, Certificate, GeneratorSet, GroupContext, Witness, Word};

const EXIT_USAGE: u8 = 64;
const EXIT_FAILURE: u8 = 2;
const DEFAULT_SEED: u64 = 0x7e57;

#[derive(Parser, Debug)]
#[command(
    name = "tecert",
    version,
    about = "Certify test elements in free, Demushkin and surface groups"
)]
struct Cli {
    /// Emit JSON on stdout instead of the human-readable report.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Decide whether a word is a test element.
    Certify(CertifyArgs),
    /// Decide whether a word is almost primitive in a free pro-p group.
    AlmostPrimitive(ProPArgs),
    /// Parse, expand, certify or sample arrangements.
    #[command(subcommand)]
    Arrange(ArrangeCmd),
    /// Demushkin relators and hypothesis checks.
    #[command(subcommand)]
    Demushkin(DemushkinCmd),
    /// Orientable surface groups.
    #[command(subcommand)]
    Surface(SurfaceCmd),
    /// Non-orientable surface groups.
    #[command(subcommand)]
    Nonorientable(NonorientableCmd),
    /// Find a test element with prescribed exponent sums modulo M or p^S.
    Densify(DensifyArgs),
    /// Run exhaustive checks on an explicit finite p-group.
    Oracle(OracleArgs),
    /// Re-verify a certificate produced with --json (`-` reads stdin).
    Replay { file: String },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Group {
    FreeProP,
    FreeDiscrete,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long, value_enum)]
    group: Group,
    #[arg(long)]
    rank: usize,
    #[arg(short = 'p')]
    p: Option<u64>,
    word: String,
}

#[derive(Args, Debug)]
struct ProPArgs {
    #[arg(long)]
    rank: usize,
    #[arg(short = 'p')]
    p: u64,
    word: String,
}

#[derive(Subcommand, Debug)]
enum ArrangeCmd {
    /// Parse an arrangement and print its canonical form.
    Parse { text: String },
    /// Print the word an arrangement expands to.
    Expand { text: String },
    /// Certify the expansion as a test element of the free pro-p group.
    Certify {
        #[arg(short = 'p')]
        p: u64,
        text: String,
    },
    /// Sample random admissible arrangements and certify each.
    Random {
        #[arg(short = 'p')]
        p: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 6)]
        weight: usize,
    },
}

#[derive(Args, Debug)]
struct InvariantArgs {
    #[arg(short = 'p')]
    p: u64,
    /// Number of generators d.
    #[arg(long)]
    rank: usize,
    #[arg(long)]
    q: u64,
    /// I, II, III-a or III-b.
    #[arg(long)]
    case: DemushkinCase,
    /// Omit for f = infinity.
    #[arg(long)]
    f: Option<u32>,
}

impl InvariantArgs {
    fn invariants(&self) -> DemushkinInvariants {
        DemushkinInvariants {
            p: self.p,
            d: self.rank,
            q: self.q,
            case: self.case,
            f: self.f,
        }
    }
}

#[derive(Subcommand, Debug)]
enum DemushkinCmd {
    /// Print the one-relator presentation for the given invariants.
    Relator(InvariantArgs),
    /// Check the counting hypotheses for w(x1^a1, .., xk^ak), k = number of exponents.
    Check {
        #[arg(long)]
        rank: usize,
        #[arg(short = 'p')]
        p: u64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        alphas: Vec<i64>,
    },
    /// Check the pro-2 hypotheses (3 <= d <= 4, all exponents even).
    Check2 {
        #[arg(long)]
        rank: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        alphas: Vec<i64>,
    },
    /// Certify w(x1^a1, .., xk^ak) in the Demushkin group.
    Certify {
        #[command(flatten)]
        inv: InvariantArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        alphas: Vec<i64>,
        word: String,
    },
}

#[derive(Subcommand, Debug)]
enum SurfaceCmd {
    /// Certify w(a1^s1, .., ak^sk) in the surface group of genus n.
    Certify {
        #[arg(long)]
        genus: usize,
        #[arg(short = 'p')]
        p: u64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        exponents: Vec<i64>,
        word: String,
    },
}

#[derive(Subcommand, Debug)]
enum NonorientableCmd {
    /// Certify w(x_i1, .., x_i(n-1)) in the non-orientable surface group of genus n.
    Certify {
        #[arg(long)]
        genus: usize,
        #[arg(short = 'p')]
        p: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        letters: Vec<u32>,
        word: String,
    },
}

#[derive(Args, Debug)]
struct DensifyArgs {
    #[arg(long, value_enum)]
    group: Group,
    #[arg(long)]
    rank: usize,
    #[arg(short = 'p')]
    p: Option<u64>,
    /// Modulus M for the free discrete group.
    #[arg(long)]
    modulus: Option<i64>,
    /// Level S (match modulo p^S) for the free pro-p group.
    #[arg(long)]
    level: Option<u32>,
    word: String,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// `ea:p,n`, `cp:p,k1.k2` or `heis:p`.
    #[arg(long)]
    catalog: String,
    /// Check to run; repeatable. Defaults to all checks.
    #[arg(long)]
    check: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Failed(String),
    Rejected(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Failed(_) => EXIT_FAILURE,
            Failure::Rejected(_) => 1,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn failed(e: impl std::fmt::Display) -> Failure {
    Failure::Failed(e.to_string())
}

fn demushkin_failure(e: DemushkinError) -> Failure {
    match e {
        DemushkinError::Rejected(_) | DemushkinError::NotTestWord { .. } => Failure::Rejected(e.to_string()),
        DemushkinError::Word(_) => usage(e),
        _ => failed(e),
    }
}

const WORD_HINT: &str = "words look like `x1^2*x2^-3`, `[x1,x2]*[x3,x4]` or `1`; factors are joined by `*`";
const ARRANGEMENT_HINT: &str =
    "arrangements look like `comm(gen(3),pp(3,3,gen(1),comm()))`; parameters come before children";

fn word(text: &str, rank: usize) -> Result<Word, Failure> {
    let gens = GeneratorSet::new(rank).map_err(usage)?;
    parse_word(text, &gens).map_err(|e| Failure::Usage(format!("{e}\nhint: {WORD_HINT}")))
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

fn describe_context(c: &GroupContext) -> String {
    let kind = serde_json::to_value(c.kind).expect("kind serializes");
    let mut s = format!("{}, rank {}", kind.as_str().unwrap_or("?"), c.rank);
    if let Some(p) = c.p {
        let _ = write!(s, ", p = {p}");
    }
    s
}

fn render_certificate(c: &Certificate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "verdict: {}", c.verdict);
    let _ = writeln!(s, "input:   {}", c.input);
    let _ = writeln!(s, "group:   {}", describe_context(&c.context));
    if !c.reasons.is_empty() {
        let _ = writeln!(s, "reasons:");
    }
    for (i, r) in c.reasons.iter().enumerate() {
        let _ = writeln!(s, "  {}. {}: {}", i + 1, r.rule, r.statement);
        for (k, v) in &r.details {
            let _ = writeln!(s, "       {k} = {v}");
        }
    }
    match &c.witness {
        Some(Witness::Retraction(r)) => {
            let _ = writeln!(s, "witness: retraction");
            for (i, im) in r.images.iter().enumerate() {
                let _ = writeln!(s, "  x{} -> {}", i + 1, im);
            }
            if let (Some(t), Some(l)) = (&r.target, &r.exponents) {
                let _ = writeln!(s, "  onto <{t}> with exponents {l:?}");
            }
        }
        Some(Witness::MaximalSubgroup { index, lambda }) => {
            let _ = writeln!(
                s,
                "witness: maximal subgroup #{index}, kernel of lambda = {lambda:?}"
            );
        }
        Some(Witness::PrimitiveRoot { root, sigma }) => {
            let _ = writeln!(s, "witness: primitive root {root}, exponent sums {sigma:?}");
        }
        None => {}
    }
    if !c.attempted.is_empty() {
        let tried: Vec<String> = c.attempted.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(s, "attempted: {}", tried.join(", "));
    }
    s
}

/// Prints a certificate and returns the verdict's exit code.
fn emit_certificate(c: &Certificate, json: bool) -> u8 {
    if json {
        println!("{}", c.to_json());
    } else {
        print!("{}", render_certificate(c));
    }
    c.verdict.exit_code() as u8
}

fn emit_check(check: &HypothesisCheck, json: bool) -> u8 {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(check).expect("check serializes")
        );
    } else {
        println!("{}", check.decision);
        println!("divisible: {} (threshold {})", check.divisible, check.threshold);
    }
    if check.decision.accepted() {
        0
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let json = cli.json;
    let cfg = EngineConfig::default();
    match cli.cmd {
        Cmd::Certify(a) => {
            let w = word(&a.word, a.rank)?;
            let ctx = match (a.group, a.p) {
                (Group::FreeProP, Some(p)) => GroupContext::free_pro_p(a.rank, p),
                (Group::FreeProP, None) => return Err(usage("free-pro-p requires -p P")),
                (Group::FreeDiscrete, None) => GroupContext::free_discrete(a.rank),
                (Group::FreeDiscrete, Some(_)) => return Err(usage("free-discrete takes no -p")),
            };
            let c = certify(&w, &ctx, &cfg).map_err(failed)?;
            Ok(emit_certificate(&c, json))
        }
        Cmd::AlmostPrimitive(a) => {
            let w = word(&a.word, a.rank)?;
            let c = is_almost_primitive_with(&w, a.rank, a.p, cfg.scan).map_err(failed)?;
            Ok(emit_certificate(&c, json))
        }
        Cmd::Arrange(cmd) => arrange(cmd, json),
        Cmd::Demushkin(cmd) => demushkin(cmd, json, &cfg),
        Cmd::Surface(SurfaceCmd::Certify {
            genus,
            p,
            exponents,
            word: text,
        }) => {
            let w = word(&text, exponents.len())?;
            let c = certify_surface(genus, p, &exponents, &w, &cfg).map_err(demushkin_failure)?;
            Ok(emit_certificate(&c, json))
        }
        Cmd::Nonorientable(NonorientableCmd::Certify {
            genus,
            p,
            letters,
            word: text,
        }) => {
            let w = word(&text, letters.len())?;
            let c = certify_nonorientable(genus, p, &letters, &w, &cfg).map_err(demushkin_failure)?;
            Ok(emit_certificate(&c, json))
        }
        Cmd::Densify(a) => {
            let w = word(&a.word, a.rank)?;
            let d = match a.group {
                Group::FreeDiscrete => {
                    let m = a
                        .modulus
                        .ok_or_else(|| usage("free-discrete requires --modulus M"))?;
                    densify_discrete(&w, a.rank, m, &cfg)
                }
                Group::FreeProP => {
                    let p = a.p.ok_or_else(|| usage("free-pro-p requires -p P"))?;
                    let s = a.level.ok_or_else(|| usage("free-pro-p requires --level S"))?;
                    densify_pro_p(&w, a.rank, p, s, &cfg)
                }
            }
            .map_err(failed)?;
            if json {
                let v = json!({
                    "word": d.word,
                    "prime": d.prime,
                    "candidates": d.candidates,
                    "certificate": d.certificate,
                });
                println!("{}", pretty(&v));
            } else {
                println!("densified: {}", d.word);
                println!("prime: {}, candidates examined: {}", d.prime, d.candidates);
                print!("{}", render_certificate(&d.certificate));
            }
            Ok(d.certificate.verdict.exit_code() as u8)
        }
        Cmd::Oracle(a) => oracle(a, json),
        Cmd::Replay { file } => {
            let text = if file == "-" {
                let mut s = String::new();
                std::io::stdin().read_to_string(&mut s).map_err(failed)?;
                s
            } else {
                std::fs::read_to_string(&file).map_err(|e| failed(format!("{file}: {e}")))?
            };
            let cert =
                Certificate::from_json(&text).map_err(|e| failed(format!("malformed certificate: {e}")))?;
            let verdict =
                replay(&cert, &Catalog::builtin()).map_err(|e| failed(format!("replay failed: {e}")))?;
            if json {
                let v = json!({ "replayed": true, "verdict": verdict, "reasons": cert.reasons.len() });
                println!("{}", pretty(&v));
            } else {
                println!("replay ok: {verdict} ({} reasons verified)", cert.reasons.len());
            }
            Ok(verdict.exit_code() as u8)
        }
    }
}

fn arrange(cmd: ArrangeCmd, json: bool) -> Result<u8, Failure> {
    let catalog = Catalog::builtin();
    let parse = |text: &str| {
        parse_arrangement(text, &catalog)
            .map_err(|e| Failure::Usage(format!("{e}\nhint: {ARRANGEMENT_HINT}")))
    };
    match cmd {
        ArrangeCmd::Parse { text } => {
            let a = parse(&text)?;
            if json {
                let v = json!({ "arrangement": a.to_string(), "weight": a.weight(), "depth": a.depth() });
                println!("{}", pretty(&v));
            } else {
                println!("{a}");
                println!("weight {}, depth {}", a.weight(), a.depth());
            }
            Ok(0)
        }
        ArrangeCmd::Expand { text } => {
            let a = parse(&text)?;
            let w = a.expand();
            if json {
                println!("{}", pretty(&json!({ "arrangement": a.to_string(), "word": w })));
            } else {
                println!("{w}");
            }
            Ok(0)
        }
        ArrangeCmd::Certify { p, text } => {
            let a = parse(&text)?;
            let c = certify_arrangement(&a, p, &catalog).map_err(failed)?;
            Ok(emit_certificate(&c, json))
        }
        ArrangeCmd::Random {
            p,
            seed,
            count,
            depth,
            weight,
        } => {
            if depth == 0 || weight == 0 {
                return Err(usage("--depth and --weight must be positive"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(count);
            let mut code = 0;
            for _ in 0..count {
                let a = random_arrangement(&mut rng, &catalog, p, depth, weight);
                let c = certify_arrangement(&a, p, &catalog).map_err(failed)?;
                let verdict =
                    replay(&c, &catalog).map_err(|e| failed(format!("replay failed for {a}: {e}")))?;
                code = code.max(verdict.exit_code() as u8);
                out.push((a, c));
            }
            if json {
                let v: Vec<_> = out
                    .iter()
                    .map(|(a, c)| json!({ "arrangement": a.to_string(), "certificate": c }))
                    .collect();
                println!("{}", pretty(&json!({ "seed": seed, "arrangements": v })));
            } else {
                println!("seed {seed}");
                for (a, c) in &out {
                    println!("{}  {a}  =>  {}", c.verdict, c.input);
                }
            }
            Ok(code)
        }
    }
}

fn demushkin(cmd: DemushkinCmd, json: bool, cfg: &EngineConfig) -> Result<u8, Failure> {
    match cmd {
        DemushkinCmd::Relator(a) => {
            let inv = a.invariants();
            let text = relator_text(&inv).map_err(failed)?;
            let rel = build_relator(&inv).map_err(failed)?;
            let pres = presentation(inv.d, &text);
            if json {
                let v =
                    json!({ "invariants": inv, "relator": rel, "relator_text": text, "presentation": pres });
                println!("{}", pretty(&v));
            } else {
                println!("{pres}");
            }
            Ok(0)
        }
        DemushkinCmd::Check { rank, p, alphas } => {
            let check = check_demushkin_test(rank, p, alphas.len(), &alphas).map_err(failed)?;
            Ok(emit_check(&check, json))
        }
        DemushkinCmd::Check2 { rank, alphas } => {
            let check = check_demushkin_test_2(rank, &alphas).map_err(failed)?;
            Ok(emit_check(&check, json))
        }
        DemushkinCmd::Certify {
            inv,
            alphas,
            word: text,
        } => {
            let w = word(&text, alphas.len())?;
            let c = certify_demushkin(&inv.invariants(), &alphas, &w, cfg).map_err(demushkin_failure)?;
            Ok(emit_certificate(&c, json))
        }
    }
}

fn oracle(a: OracleArgs, json: bool) -> Result<u8, Failure> {
    let spec: GroupSpec = a.catalog.parse().map_err(usage)?;
    let names: Vec<&str> = if a.check.is_empty() {
        CHECKS.to_vec()
    } else {
        for c in &a.check {
            if !CHECKS.contains(&c.as_str()) {
                return Err(usage(format!(
                    "unknown check {c:?}; expected one of {}",
                    CHECKS.join(", ")
                )));
            }
        }
        a.check.iter().map(String::as_str).collect()
    };
    let g = build_group(&spec).map_err(failed)?;
    let report = run_checks(&g, &names, a.budget).map_err(failed)?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        println!("group {} (order {})", report.group, g.order());
        for c in &report.checks {
            let counts: Vec<String> = c.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
            println!(
                "  {:<24} {:<15} {}",
                c.name,
                c.status.to_string(),
                counts.join(" ")
            );
        }
        println!("overall: {}", report.status());
    }
    Ok(match report.status() {
        CheckStatus::Fail => EXIT_FAILURE,
        CheckStatus::Pass | CheckStatus::NotApplicable => 0,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            match &f {
                Failure::Rejected(m) => println!("REJECT: {m}"),
                Failure::Usage(m) => eprintln!("usage error: {m}"),
                Failure::Failed(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
