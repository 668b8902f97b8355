//! Quadratic twists and Atkin–Lehner signs at a prime `q`.
//!
//! A newform of level `q^r M` has a local representation `pi_q` of conductor
//! `r`; twisting by a quadratic character multiplies its `W_q`-eigenvalue by a
//! sign `kappa(pi_q, chi)` that depends only on `pi_q` and `chi`.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::arith::{factor_u64, is_prime, kronecker};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TwistError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("conductor exponent must be at least 1")]
    ZeroExponent,
    #[error("{chi} is ramified at q = {q}")]
    RamifiedAtQ { q: u64, chi: TwistCharacter },
    #[error("twisting at q needs q odd and r >= 3 (got q = {q}, r = {r})")]
    OutOfRange { q: u64, r: u32 },
    #[error("{ty} does not occur with conductor {q}^{r}")]
    Inadmissible { q: u64, r: u32, ty: LocalRepType },
    #[error("a ramified supercuspidal needs its inducing field")]
    MissingField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalRepType {
    UnramifiedTwistOfSteinberg,
    RamifiedPrincipalSeries,
    RamifiedTwistOfSteinberg,
    UnramifiedSupercuspidal,
    RamifiedSupercuspidal,
    ExceptionalSupercuspidal,
}

impl LocalRepType {
    pub fn as_str(&self) -> &'static str {
        match self {
            LocalRepType::UnramifiedTwistOfSteinberg => "unramified-twist-of-Steinberg",
            LocalRepType::RamifiedPrincipalSeries => "ramified-principal-series",
            LocalRepType::RamifiedTwistOfSteinberg => "ramified-twist-of-Steinberg",
            LocalRepType::UnramifiedSupercuspidal => "unramified-supercuspidal",
            LocalRepType::RamifiedSupercuspidal => "ramified-supercuspidal",
            LocalRepType::ExceptionalSupercuspidal => "exceptional-supercuspidal",
        }
    }
}

impl fmt::Display for LocalRepType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A primitive quadratic character ramified at a single prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TwistCharacter {
    /// `chi_p(n) = (p* | n)` with `p* = (-1|p) p`, conductor `p`.
    Odd(u64),
    /// Character of `Q(sqrt -1)`, conductor 4.
    MinusOne,
    /// Character of `Q(sqrt 2)`, conductor 8.
    Two,
    /// Character of `Q(sqrt -2)`, conductor 8.
    MinusTwo,
}

impl TwistCharacter {
    /// The fundamental discriminant `D` with `chi(n) = (D | n)`.
    pub fn discriminant(&self) -> i64 {
        match *self {
            TwistCharacter::Odd(p) => kronecker(-1, p as i64) as i64 * p as i64,
            TwistCharacter::MinusOne => -4,
            TwistCharacter::Two => 8,
            TwistCharacter::MinusTwo => -8,
        }
    }

    pub fn conductor(&self) -> u64 {
        self.discriminant().unsigned_abs()
    }

    pub fn ramified_prime(&self) -> u64 {
        match *self {
            TwistCharacter::Odd(p) => p,
            _ => 2,
        }
    }

    pub fn eval(&self, n: i64) -> i32 {
        kronecker(self.discriminant(), n)
    }
}

impl fmt::Display for TwistCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TwistCharacter::Odd(p) => write!(f, "chi_{p}"),
            TwistCharacter::MinusOne => f.write_str("chi_-1"),
            TwistCharacter::Two => f.write_str("chi_2"),
            TwistCharacter::MinusTwo => f.write_str("chi_-2"),
        }
    }
}

fn check(q: u64, r: u32) -> Result<(), TwistError> {
    if !is_prime(q) {
        return Err(TwistError::NotPrime(q));
    }
    if r == 0 {
        return Err(TwistError::ZeroExponent);
    }
    Ok(())
}

/// The representation types of conductor `q^r`.
pub fn classify_local_types(q: u64, r: u32) -> Result<BTreeSet<LocalRepType>, TwistError> {
    use LocalRepType::*;
    check(q, r)?;
    let mut out = BTreeSet::new();
    match r {
        1 => {
            out.insert(UnramifiedTwistOfSteinberg);
        }
        2 => {
            out.extend([RamifiedPrincipalSeries, RamifiedTwistOfSteinberg, UnramifiedSupercuspidal]);
        }
        _ if r % 2 == 1 => {
            out.insert(RamifiedSupercuspidal);
            if q == 2 && matches!(r, 3 | 7) {
                out.insert(ExceptionalSupercuspidal);
            }
        }
        _ => {
            out.extend([RamifiedPrincipalSeries, UnramifiedSupercuspidal]);
            if q == 2 && matches!(r, 4 | 6) {
                out.insert(ExceptionalSupercuspidal);
            }
        }
    }
    Ok(out)
}

/// `kappa(pi_q, chi)` for `chi` unramified at `q`; the same for every `pi_q` of conductor `q^r`.
pub fn kappa_away(q: u64, r: u32, chi: TwistCharacter) -> Result<i32, TwistError> {
    check(q, r)?;
    if chi.ramified_prime() == q {
        return Err(TwistError::RamifiedAtQ { q, chi });
    }
    let base = match chi {
        TwistCharacter::Odd(p) => kronecker(q as i64, p as i64),
        _ => chi.eval(q as i64),
    };
    Ok(if r % 2 == 0 { 1 } else { base })
}

/// Which ramified quadratic extension of `Q_q` induces a ramified supercuspidal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RamifiedField {
    /// `Q_q(sqrt q*)`.
    QStar,
    /// `Q_q(sqrt -q*)`.
    MinusQStar,
}

/// `kappa(pi_q, chi_q)` for odd `q` and conductor `q^r`, `r >= 3`.
pub fn kappa_at_q(q: u64, r: u32, ty: LocalRepType, field: Option<RamifiedField>) -> Result<i32, TwistError> {
    check(q, r)?;
    if q == 2 || r < 3 {
        return Err(TwistError::OutOfRange { q, r });
    }
    if !classify_local_types(q, r)?.contains(&ty) {
        return Err(TwistError::Inadmissible { q, r, ty });
    }
    let minus_one_q = kronecker(-1, q as i64);
    match ty {
        LocalRepType::RamifiedPrincipalSeries => Ok(minus_one_q),
        LocalRepType::UnramifiedSupercuspidal => Ok(-minus_one_q),
        LocalRepType::RamifiedSupercuspidal => match field {
            Some(RamifiedField::QStar) => Ok(1),
            Some(RamifiedField::MinusQStar) => Ok(-1),
            None => Err(TwistError::MissingField),
        },
        _ => Err(TwistError::Inadmissible { q, r, ty }),
    }
}

/// All values `kappa(pi_q, chi_q)` can take over representations of conductor `q^r`.
pub fn kappa_at_q_values(q: u64, r: u32) -> Result<BTreeSet<i32>, TwistError> {
    let mut out = BTreeSet::new();
    for ty in classify_local_types(q, r)? {
        let fields: &[Option<RamifiedField>] = if ty == LocalRepType::RamifiedSupercuspidal {
            &[Some(RamifiedField::QStar), Some(RamifiedField::MinusQStar)]
        } else {
            &[None]
        };
        for &field in fields {
            out.insert(kappa_at_q(q, r, ty, field)?);
        }
    }
    Ok(out)
}

/// Whether twisting by `chi_q` flips the `W_q`-sign of every representation of conductor `q^r`.
pub fn twist_at_q_flips_all(q: u64, r: u32) -> Result<bool, TwistError> {
    Ok(kappa_at_q_values(q, r)?.iter().all(|&v| v == -1))
}

/// A character whose twist swaps the two `W_q`-eigenspaces of `S_k^new(q^r M)`, if one
/// is forced by the level alone. Needs `r` odd.
pub fn quadtwist_bijection(q: u64, r: u32, m: u64) -> Result<Option<TwistCharacter>, TwistError> {
    check(q, r)?;
    if r % 2 == 0 || m == 0 || m % q == 0 {
        return Ok(None);
    }
    let mf = factor_u64(m);
    for &(p, e) in mf.factors() {
        if p != 2 && e >= 3 && kronecker(q as i64, p as i64) == -1 {
            return Ok(Some(TwistCharacter::Odd(p)));
        }
    }
    let e = mf.v_p(2);
    if e >= 5 && q % 4 == 3 {
        return Ok(Some(TwistCharacter::MinusOne));
    }
    if e >= 7 && q % 8 == 5 {
        return Ok(Some(TwistCharacter::Two));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use LocalRepType::*;

    #[test]
    fn classification() {
        assert_eq!(
            classify_local_types(5, 2).unwrap(),
            [RamifiedPrincipalSeries, RamifiedTwistOfSteinberg, UnramifiedSupercuspidal].into()
        );
        assert_eq!(classify_local_types(7, 1).unwrap(), [UnramifiedTwistOfSteinberg].into());
        assert!(classify_local_types(2, 3).unwrap().contains(&ExceptionalSupercuspidal));
        for r in [3, 4, 6, 7] {
            assert!(classify_local_types(2, r).unwrap().contains(&ExceptionalSupercuspidal));
            assert!(!classify_local_types(3, r).unwrap().contains(&ExceptionalSupercuspidal));
        }
        for r in [5, 8, 9] {
            assert!(!classify_local_types(2, r).unwrap().contains(&ExceptionalSupercuspidal));
        }
        assert!(classify_local_types(4, 1).is_err());
    }

    #[test]
    fn characters() {
        assert_eq!(TwistCharacter::Odd(3).discriminant(), -3);
        assert_eq!(TwistCharacter::Odd(5).discriminant(), 5);
        assert_eq!(TwistCharacter::MinusOne.conductor(), 4);
        assert_eq!(TwistCharacter::Two.conductor(), 8);
        assert_eq!(TwistCharacter::MinusTwo.conductor(), 8);
        assert_eq!(TwistCharacter::MinusOne.eval(3), -1);
        assert_eq!(TwistCharacter::Two.eval(5), -1);
        assert_eq!(TwistCharacter::MinusTwo.eval(5), -1);
    }

    #[test]
    fn kappa_away_examples() {
        assert_eq!(kappa_away(3, 1, TwistCharacter::Odd(5)).unwrap(), -1);
        for q in [3u64, 7, 11, 19] {
            assert_eq!(kappa_away(q, 3, TwistCharacter::MinusOne).unwrap(), -1);
        }
        for q in [5u64, 13, 29] {
            assert_eq!(kappa_away(q, 1, TwistCharacter::Two).unwrap(), -1);
            assert_eq!(kappa_away(q, 1, TwistCharacter::MinusTwo).unwrap(), -1);
        }
        assert_eq!(kappa_away(7, 4, TwistCharacter::Odd(5)).unwrap(), 1);
        assert!(kappa_away(5, 1, TwistCharacter::Odd(5)).is_err());
        assert!(kappa_away(2, 1, TwistCharacter::MinusOne).is_err());
    }

    #[test]
    fn kappa_at_q_examples() {
        assert_eq!(kappa_at_q(5, 4, RamifiedPrincipalSeries, None).unwrap(), 1);
        assert_eq!(kappa_at_q(7, 4, UnramifiedSupercuspidal, None).unwrap(), 1);
        assert_eq!(kappa_at_q(7, 3, RamifiedSupercuspidal, Some(RamifiedField::QStar)).unwrap(), 1);
        assert_eq!(kappa_at_q(7, 3, RamifiedSupercuspidal, None), Err(TwistError::MissingField));
        assert!(kappa_at_q(7, 3, RamifiedPrincipalSeries, None).is_err());
        assert!(kappa_at_q(7, 2, RamifiedPrincipalSeries, None).is_err());
        assert!(kappa_at_q(2, 4, RamifiedPrincipalSeries, None).is_err());
    }

    #[test]
    fn twisting_at_q_never_flips_everything() {
        for q in crate::arith::primes_in(3, 100) {
            for r in 3..=12 {
                assert!(!twist_at_q_flips_all(q, r).unwrap(), "q={q} r={r}");
            }
        }
    }

    #[test]
    fn bijection_cases() {
        assert_eq!(kronecker(3, 5), -1);
        assert_eq!(quadtwist_bijection(3, 1, 125).unwrap(), Some(TwistCharacter::Odd(5)));
        assert_eq!(quadtwist_bijection(7, 1, 32).unwrap(), Some(TwistCharacter::MinusOne));
        assert_eq!(quadtwist_bijection(7, 1, 16).unwrap(), None);
        assert_eq!(quadtwist_bijection(5, 3, 128).unwrap(), Some(TwistCharacter::Two));
        assert_eq!(quadtwist_bijection(5, 2, 128).unwrap(), None);
    }
}
