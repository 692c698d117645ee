//! Small integer helpers: primality, p-adic valuation, Bézout coefficients.

use num_integer::Integer;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Exact p-adic valuation of a nonzero integer; `None` for zero.
pub fn valuation(k: i64, p: u64) -> Option<u32> {
    if k == 0 {
        return None;
    }
    let mut k = k.unsigned_abs();
    let mut v = 0;
    while k.is_multiple_of(p) {
        k /= p;
        v += 1;
    }
    Some(v)
}

pub fn divisible(k: i64, p: u64) -> bool {
    k.unsigned_abs().is_multiple_of(p)
}

pub fn residue(k: i64, p: u64) -> u64 {
    k.rem_euclid(p as i64) as u64
}

/// Nonnegative gcd of a slice; gcd of the empty slice is 0.
pub fn gcd_all(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |acc, &x| acc.gcd(&x))
}

/// Coefficients `l` with `sum(v[i] * l[i]) == gcd_all(v)`.
pub fn bezout(v: &[i64]) -> (i64, Vec<i64>) {
    let mut g = 0i64;
    let mut coeffs: Vec<i64> = Vec::with_capacity(v.len());
    for &x in v {
        if g == 0 && x == 0 {
            coeffs.push(0);
            continue;
        }
        let e = g.extended_gcd(&x);
        // e.gcd == e.x * g + e.y * x
        let (mut d, mut a, mut b) = (e.gcd, e.x, e.y);
        if d < 0 {
            d = -d;
            a = -a;
            b = -b;
        }
        for c in coeffs.iter_mut() {
            *c *= a;
        }
        coeffs.push(b);
        g = d;
    }
    (g, coeffs)
}

/// Distinct prime divisors in increasing order (empty for 0 and ±1).
pub fn prime_factors(n: i64) -> Vec<u64> {
    let mut n = n.unsigned_abs();
    let mut out = Vec::new();
    let mut d = 2u64;
    while n > 1 && d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

pub fn mod_inverse(a: u64, p: u64) -> u64 {
    let e = (a as i64).extended_gcd(&(p as i64));
    debug_assert_eq!(e.gcd, 1);
    e.x.rem_euclid(p as i64) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes() {
        let ps: Vec<u64> = (0..30).filter(|&n| is_prime(n)).collect();
        assert_eq!(ps, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }

    #[test]
    fn valuations() {
        assert_eq!(valuation(12, 2), Some(2));
        assert_eq!(valuation(-27, 3), Some(3));
        assert_eq!(valuation(5, 3), Some(0));
        assert_eq!(valuation(0, 3), None);
    }

    #[test]
    fn bezout_identity() {
        let (g, l) = bezout(&[2, 3]);
        assert_eq!((g, l.clone()), (1, vec![-1, 1]));
        for v in [vec![6, 10, 15], vec![-4, 6], vec![0, 5], vec![0, 0], vec![7]] {
            let (g, l) = bezout(&v);
            assert_eq!(g, gcd_all(&v));
            assert_eq!(v.iter().zip(&l).map(|(a, b)| a * b).sum::<i64>(), g);
        }
    }

    #[test]
    fn factors() {
        assert_eq!(prime_factors(360), vec![2, 3, 5]);
        assert_eq!(prime_factors(-49), vec![7]);
        assert!(prime_factors(1).is_empty());
        assert!(prime_factors(0).is_empty());
    }

    #[test]
    fn inverses() {
        for p in [2u64, 3, 5, 7, 13] {
            for a in 1..p {
                assert_eq!(a * mod_inverse(a, p) % p, 1);
            }
        }
    }
}
