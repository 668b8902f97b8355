//! Number-theoretic kernel: factorization, Kronecker symbols, classical
//! multiplicative functions and Dirichlet convolution on prime powers.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::exact::ExactValue;

/// Default bound for the smallest-prime-factor sieve.
pub const DEFAULT_SIEVE_BOUND: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArithError {
    #[error("cannot factor {0}: input must be a positive integer")]
    NotPositive(i128),
}

static SPF_BOUND: OnceLock<u64> = OnceLock::new();
static SPF: OnceLock<Vec<u32>> = OnceLock::new();

/// Sets the smallest-prime-factor sieve bound. Only effective before the
/// sieve is first used; returns whether the requested bound is in force.
pub fn set_sieve_bound(bound: u64) -> bool {
    let bound = bound.max(2);
    *SPF_BOUND.get_or_init(|| bound) == bound
}

pub fn sieve_bound() -> u64 {
    *SPF_BOUND.get_or_init(|| DEFAULT_SIEVE_BOUND)
}

fn spf_table() -> &'static [u32] {
    SPF.get_or_init(|| {
        let n = sieve_bound() as usize;
        let mut spf = vec![0u32; n + 1];
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                if i <= n / i {
                    let mut j = i * i;
                    while j <= n {
                        if spf[j] == 0 {
                            spf[j] = i as u32;
                        }
                        j += i;
                    }
                }
            }
        }
        spf
    })
}

/// A positive integer together with its prime factorization.
#[derive(Clone, PartialEq, Eq, Hash, Serialize)]
pub struct FactoredInt {
    value: u64,
    factors: Vec<(u64, u32)>,
}

impl fmt::Debug for FactoredInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)?;
        if !self.factors.is_empty() {
            let parts: Vec<String> = self
                .factors
                .iter()
                .map(|&(p, e)| if e == 1 { p.to_string() } else { format!("{p}^{e}") })
                .collect();
            write!(f, " = {}", parts.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Display for FactoredInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl FactoredInt {
    pub fn one() -> Self {
        FactoredInt { value: 1, factors: Vec::new() }
    }

    /// Builds from (prime, exponent) pairs. Zero exponents are dropped; the
    /// pairs are sorted. Primality of the bases is the caller's contract.
    pub fn from_factors(mut factors: Vec<(u64, u32)>) -> Self {
        factors.retain(|&(_, e)| e > 0);
        factors.sort_unstable();
        let value = factors.iter().fold(1u64, |acc, &(p, e)| acc * p.pow(e));
        FactoredInt { value, factors }
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    pub fn is_one(&self) -> bool {
        self.value == 1
    }

    pub fn is_prime(&self) -> bool {
        self.factors.len() == 1 && self.factors[0].1 == 1
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    pub fn is_cubefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e <= 2)
    }

    pub fn is_square(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e % 2 == 0)
    }

    /// Exponent of `p` in the value.
    pub fn v_p(&self, p: u64) -> u32 {
        self.factors.iter().find(|&&(q, _)| q == p).map_or(0, |&(_, e)| e)
    }

    pub fn divides(&self, n: u64) -> bool {
        n % self.value == 0
    }

    pub fn is_coprime_to(&self, n: u64) -> bool {
        num_integer::gcd(self.value, n) == 1
    }

    pub fn mul(&self, other: &FactoredInt) -> FactoredInt {
        let mut out: Vec<(u64, u32)> = Vec::with_capacity(self.factors.len() + other.factors.len());
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() || j < other.factors.len() {
            match (self.factors.get(i), other.factors.get(j)) {
                (Some(&(p, a)), Some(&(q, b))) if p == q => {
                    out.push((p, a + b));
                    i += 1;
                    j += 1;
                }
                (Some(&(p, a)), Some(&(q, _))) if p < q => {
                    out.push((p, a));
                    i += 1;
                }
                (Some(_), Some(&(q, b))) => {
                    out.push((q, b));
                    j += 1;
                }
                (Some(&f), None) => {
                    out.push(f);
                    i += 1;
                }
                (None, Some(&f)) => {
                    out.push(f);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        FactoredInt { value: self.value * other.value, factors: out }
    }

    /// `self / d` for a divisor `d`. Panics if `d` does not divide.
    pub fn div_exact(&self, d: &FactoredInt) -> FactoredInt {
        let factors = self
            .factors
            .iter()
            .map(|&(p, e)| {
                let f = d.v_p(p);
                assert!(f <= e, "{} does not divide {}", d.value, self.value);
                (p, e - f)
            })
            .collect();
        assert!(d.factors.iter().all(|&(p, _)| self.v_p(p) > 0), "{} does not divide {}", d.value, self.value);
        FactoredInt::from_factors(factors)
    }

    /// Splits off the power of two: returns `(e, odd part)`.
    pub fn split_two(&self) -> (u32, FactoredInt) {
        let e = self.v_p(2);
        let odd = FactoredInt::from_factors(self.factors.iter().copied().filter(|&(p, _)| p != 2).collect());
        (e, odd)
    }

    /// The part of the factorization supported on primes satisfying `keep`.
    pub fn restrict(&self, keep: impl Fn(u64) -> bool) -> FactoredInt {
        FactoredInt::from_factors(self.factors.iter().copied().filter(|&(p, _)| keep(p)).collect())
    }

    /// All divisors, each with its factorization. Ordered by the mixed-radix
    /// enumeration of exponents, which is deterministic.
    pub fn divisors(&self) -> Vec<FactoredInt> {
        let mut out = vec![FactoredInt::one()];
        for &(p, e) in &self.factors {
            let mut next = Vec::with_capacity(out.len() * (e as usize + 1));
            for d in &out {
                let mut pk = 1u64;
                for j in 0..=e {
                    let mut factors = d.factors.clone();
                    if j > 0 {
                        factors.push((p, j));
                    }
                    next.push(FactoredInt { value: d.value * pk, factors });
                    pk *= p;
                }
            }
            out = next;
        }
        out
    }

    pub fn mobius(&self) -> i64 {
        if self.is_squarefree() {
            if self.factors.len() % 2 == 0 { 1 } else { -1 }
        } else {
            0
        }
    }

    /// Sum of divisors.
    pub fn sigma(&self) -> u64 {
        self.factors.iter().map(|&(p, e)| (p.pow(e + 1) - 1) / (p - 1)).product()
    }

    /// Number of divisors.
    pub fn sigma0(&self) -> u64 {
        self.factors.iter().map(|&(_, e)| e as u64 + 1).product()
    }

    /// Euler's totient.
    pub fn phi(&self) -> u64 {
        self.factors.iter().map(|&(p, e)| p.pow(e - 1) * (p - 1)).product()
    }

    /// Number of distinct prime divisors.
    pub fn omega(&self) -> u32 {
        self.factors.len() as u32
    }

    /// Number of primes dividing exactly once.
    pub fn omega1(&self) -> u32 {
        self.factors.iter().filter(|&&(_, e)| e == 1).count() as u32
    }

    /// Number of `p` with `p^2 || self` and `(n | p) = 1`.
    pub fn omega2(&self, n: i64) -> u32 {
        self.factors.iter().filter(|&&(p, e)| e == 2 && kronecker(n, p as i64) == 1).count() as u32
    }

    /// The greatest `Q` with `Q^2 | self`.
    pub fn square_part(&self) -> u64 {
        self.factors.iter().map(|&(p, e)| p.pow(e / 2)).product()
    }
}

/// Factors a positive integer. Uses the smallest-prime-factor sieve below
/// its bound and trial division above it.
pub fn factor(n: i128) -> Result<FactoredInt, ArithError> {
    if n <= 0 || n > u64::MAX as i128 {
        return Err(ArithError::NotPositive(n));
    }
    Ok(factor_u64(n as u64))
}

/// Factors a positive `u64`. Panics on zero.
pub fn factor_u64(n: u64) -> FactoredInt {
    assert!(n > 0, "cannot factor 0");
    let mut factors: Vec<(u64, u32)> = Vec::new();
    let mut push = |p: u64| match factors.last_mut() {
        Some((q, e)) if *q == p => *e += 1,
        _ => factors.push((p, 1)),
    };
    let mut m = n;
    if m <= sieve_bound() {
        let spf = spf_table();
        while m > 1 {
            let p = spf[m as usize] as u64;
            push(p);
            m /= p;
        }
    } else {
        while m % 2 == 0 {
            push(2);
            m /= 2;
        }
        let mut p = 3u64;
        while p.saturating_mul(p) <= m {
            while m % p == 0 {
                push(p);
                m /= p;
            }
            p += 2;
            if m <= sieve_bound() && m > 1 {
                let spf = spf_table();
                while m > 1 {
                    let p = spf[m as usize] as u64;
                    push(p);
                    m /= p;
                }
                break;
            }
        }
        if m > 1 {
            push(m);
        }
    }
    FactoredInt { value: n, factors }
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && factor_u64(n).is_prime()
}

/// Primes in `[lo, hi]`, increasing.
pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    (lo.max(2)..=hi).filter(|&n| is_prime(n)).collect()
}

/// The Kronecker symbol `(a | n)`, defined for all integers.
pub fn kronecker(a: i64, n: i64) -> i32 {
    let (mut a, mut n) = (a as i128, n as i128);
    if n == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    let mut result = 1;
    if n < 0 {
        n = -n;
        if a < 0 {
            result = -result;
        }
    }
    let v = n.trailing_zeros();
    n >>= v;
    if v > 0 {
        if a % 2 == 0 {
            return 0;
        }
        if v % 2 == 1 {
            let r = a.rem_euclid(8);
            if r == 3 || r == 5 {
                result = -result;
            }
        }
    }
    // n is now odd and positive; finish with the Jacobi symbol.
    a = a.rem_euclid(n);
    while a != 0 {
        let t = a.trailing_zeros();
        a >>= t;
        if t % 2 == 1 && (n % 8 == 3 || n % 8 == 5) {
            result = -result;
        }
        if a % 4 == 3 && n % 4 == 3 {
            result = -result;
        }
        std::mem::swap(&mut a, &mut n);
        a %= n;
    }
    if n == 1 { result } else { 0 }
}

/// A multiplicative function, given by its values on prime powers.
#[derive(Clone)]
pub struct MultiplicativeFn {
    rule: Arc<dyn Fn(u64, u32) -> ExactValue + Send + Sync>,
}

impl fmt::Debug for MultiplicativeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MultiplicativeFn")
    }
}

impl MultiplicativeFn {
    /// `rule(p, m)` is only consulted for `m >= 1`.
    pub fn new(rule: impl Fn(u64, u32) -> ExactValue + Send + Sync + 'static) -> Self {
        MultiplicativeFn { rule: Arc::new(rule) }
    }

    pub fn at_prime_power(&self, p: u64, m: u32) -> ExactValue {
        if m == 0 { ExactValue::ONE } else { (self.rule)(p, m) }
    }

    pub fn eval(&self, n: &FactoredInt) -> ExactValue {
        n.factors().iter().fold(ExactValue::ONE, |acc, &(p, m)| acc * (self.rule)(p, m))
    }

    /// The constant function 1.
    pub fn one() -> Self {
        Self::new(|_, _| ExactValue::ONE)
    }

    pub fn mobius() -> Self {
        Self::new(|_, m| if m == 1 { ExactValue::from(-1) } else { ExactValue::ZERO })
    }

    pub fn abs_mobius() -> Self {
        Self::new(|_, m| if m == 1 { ExactValue::ONE } else { ExactValue::ZERO })
    }

    pub fn identity() -> Self {
        Self::new(|p, m| ExactValue::from_int((p as i128).pow(m)))
    }

    pub fn sigma0() -> Self {
        Self::new(|_, m| ExactValue::from_int(m as i128 + 1))
    }

    pub fn sigma() -> Self {
        Self::new(|p, m| {
            let p = p as i128;
            ExactValue::from_int((p.pow(m + 1) - 1) / (p - 1))
        })
    }

    /// The Dirichlet inverse of the divisor-counting function.
    pub fn mu_mu() -> Self {
        Self::new(|_, m| match m {
            1 => ExactValue::from(-2),
            2 => ExactValue::ONE,
            _ => ExactValue::ZERO,
        })
    }
}

/// `(f * g)(p^m) = sum_{j=0..m} f(p^j) g(p^{m-j})`.
pub fn dirichlet_convolve(f: &MultiplicativeFn, g: &MultiplicativeFn) -> MultiplicativeFn {
    let (f, g) = (f.clone(), g.clone());
    MultiplicativeFn::new(move |p, m| (0..=m).map(|j| f.at_prime_power(p, j) * g.at_prime_power(p, m - j)).sum())
}

/// `(mu*mu)` evaluated at a factored integer.
pub fn mu_mu(n: &FactoredInt) -> i64 {
    n.factors()
        .iter()
        .map(|&(_, m)| match m {
            1 => -2,
            2 => 1,
            _ => 0,
        })
        .product()
}

/// `sum_{d | M} (mu*mu)(d) f(M/d)`: the transform taking full-space
/// quantities to newspace quantities.
pub fn mobius_squared_transform(f: impl Fn(&FactoredInt) -> ExactValue, m: &FactoredInt) -> ExactValue {
    m.divisors()
        .iter()
        .filter_map(|d| {
            let w = mu_mu(d);
            (w != 0).then(|| f(&m.div_exact(d)).scale(w as i128))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn legendre_brute(a: i64, p: i64) -> i32 {
        let a = a.rem_euclid(p);
        if a == 0 {
            return 0;
        }
        if (1..p).any(|x| (x * x) % p == a) { 1 } else { -1 }
    }

    #[test]
    fn factor_examples() {
        assert!(factor(1).unwrap().factors().is_empty());
        assert_eq!(factor(12).unwrap().factors(), &[(2, 2), (3, 1)]);
        assert_eq!(factor(2310).unwrap().factors(), &[(2, 1), (3, 1), (5, 1), (7, 1), (11, 1)]);
        assert_eq!(factor(0), Err(ArithError::NotPositive(0)));
        assert_eq!(factor(-4), Err(ArithError::NotPositive(-4)));
    }

    #[test]
    fn factor_above_sieve_bound() {
        let n = 1_000_000_007u64 * 6;
        assert_eq!(factor_u64(n).factors(), &[(2, 1), (3, 1), (1_000_000_007, 1)]);
        let m = (10_000_019u64) * (10_000_079u64);
        assert_eq!(factor_u64(m).factors(), &[(10_000_019, 1), (10_000_079, 1)]);
    }

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker(5, 1), 1);
        assert_eq!(kronecker(-11, 2), -1);
        // -5 = 1 mod 3, and 1 is a square mod 3.
        assert_eq!(legendre_brute(-5, 3), 1);
        assert_eq!(kronecker(-5, 3), 1);
        assert_eq!(kronecker(-4, 2), 0);
        assert_eq!(kronecker(-3, -1), -1);
        assert_eq!(kronecker(7, 0), 0);
        assert_eq!(kronecker(-1, 0), 1);
    }

    #[test]
    fn kronecker_two_is_eight_periodic() {
        for a in -200i64..200 {
            let expected = match a.rem_euclid(8) {
                1 | 7 => 1,
                3 | 5 => -1,
                _ => 0,
            };
            assert_eq!(kronecker(a, 2), expected, "a = {a}");
        }
    }

    #[test]
    fn kronecker_matches_brute_force_legendre() {
        for p in primes_in(3, 997) {
            for a in -60i64..60 {
                assert_eq!(kronecker(a, p as i64), legendre_brute(a, p as i64), "({a}|{p})");
            }
        }
    }

    #[test]
    fn small_functions() {
        let n12 = factor_u64(12);
        assert_eq!(n12.square_part(), 2);
        let n18 = factor_u64(18);
        assert_eq!(n18.omega1(), 1);
        assert_eq!(n18.omega(), 2);
        assert_eq!(n12.sigma(), 28);
        assert_eq!(n12.sigma0(), 6);
        assert_eq!(n12.phi(), 4);
        assert_eq!(n12.mobius(), 0);
        assert_eq!(factor_u64(30).mobius(), -1);
        assert_eq!(factor_u64(360).v_p(2), 3);
    }

    #[test]
    fn omega2_on_nine() {
        // (-5|3) = 1 and (-11|3) = 1 by the brute-force residue check.
        assert_eq!(legendre_brute(-5, 3), 1);
        assert_eq!(legendre_brute(-11, 3), 1);
        let nine = factor_u64(9);
        assert_eq!(nine.omega2(-5), 1);
        assert_eq!(nine.omega2(-11), 1);
        assert_eq!(nine.omega2(-1), 0);
    }

    #[test]
    fn convolution_examples() {
        let mm = dirichlet_convolve(&MultiplicativeFn::mobius(), &MultiplicativeFn::mobius());
        assert_eq!(mm.at_prime_power(7, 1), ExactValue::from(-2));
        assert_eq!(mm.at_prime_power(7, 2), ExactValue::ONE);
        assert_eq!(mm.at_prime_power(7, 3), ExactValue::ZERO);
        let oo = dirichlet_convolve(&MultiplicativeFn::one(), &MultiplicativeFn::one());
        assert_eq!(oo.at_prime_power(5, 2), ExactValue::from(3));
        let ms = dirichlet_convolve(&MultiplicativeFn::mobius(), &MultiplicativeFn::sigma0());
        for m in 0..=4 {
            assert_eq!(ms.at_prime_power(3, m), ExactValue::ONE);
        }
    }

    #[test]
    fn transform_examples() {
        let p = factor_u64(7);
        assert_eq!(mobius_squared_transform(|_| ExactValue::ONE, &p), ExactValue::from(-1));
        assert_eq!(mobius_squared_transform(|_| ExactValue::ONE, &FactoredInt::one()), ExactValue::ONE);
        let p2 = factor_u64(49);
        let s0 = |n: &FactoredInt| ExactValue::from(n.sigma0() as i64);
        assert_eq!(mobius_squared_transform(s0, &p2), ExactValue::ZERO);
    }

    #[test]
    fn divisors_are_complete() {
        let n = factor_u64(360);
        let mut ds: Vec<u64> = n.divisors().iter().map(|d| d.value()).collect();
        ds.sort_unstable();
        let brute: Vec<u64> = (1..=360).filter(|d| 360 % d == 0).collect();
        assert_eq!(ds, brute);
        for d in n.divisors() {
            assert_eq!(factor_u64(d.value()), d);
        }
    }
}
