//! Certification of test elements and almost primitive elements in free pro-p
//! groups, free discrete groups, Demushkin groups and surface groups, plus an
//! exhaustive oracle on explicit finite p-groups.

pub mod arith;
pub mod arrangement;
pub mod certificate;
pub mod demushkin;
pub mod engine;
pub mod finite;
pub mod frattini;
pub mod replay;
pub mod word;

pub use certificate::{
    Certificate, GroupContext, GroupKind, Reason, RetractWitness, RuleId, Verdict, Witness,
};
pub use word::{parse_word, GeneratorSet, RootDecomposition, Word, WordError};
