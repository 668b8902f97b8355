//! Closed forms for `Delta_k(q^r, M) = tr W_q` on `S_k^new(q^r M)`,
//! Atkin–Lehner eigenspace dimensions, and the predicates that decide when
//! `Delta_k` vanishes and which sign it has.
//!
//! The closed forms use only class numbers, multiplicative functions and the
//! special values of `p_k`, never the trace formula itself, so comparing them
//! with `trace::TraceQuery::t_new` at `l = 1` is a two-path check.

use serde::Serialize;

use crate::arith::{factor_u64, is_prime, kronecker, FactoredInt};
use crate::classnum::hurwitz_or_zero;
use crate::exact::ExactValue;
use crate::trace::{p_k_one, p_k_sqrt2, p_k_sqrt3};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignsError {
    #[error("weight must be even and at least 2, got {0}")]
    BadWeight(u32),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("exponent r must be at least 1")]
    ZeroExponent,
    #[error("M = {m} must be positive and coprime to q = {q}")]
    NotCoprime { q: u64, m: u64 },
    #[error("hypotheses not met: {0}")]
    Hypotheses(String),
}

fn validate(k: u32, q: u64, r: u32, m: u64) -> Result<FactoredInt, SignsError> {
    if k < 2 || k % 2 == 1 {
        return Err(SignsError::BadWeight(k));
    }
    if !is_prime(q) {
        return Err(SignsError::NotPrime(q));
    }
    if r == 0 {
        return Err(SignsError::ZeroExponent);
    }
    if m == 0 || m % q == 0 {
        return Err(SignsError::NotCoprime { q, m });
    }
    Ok(factor_u64(m))
}

fn pm1(k: u32) -> i128 {
    if (k / 2) % 2 == 0 { 1 } else { -1 }
}

/// `kappa_Delta(M) = ((mu*mu) * ((Delta|.) * |mu|))(M)`.
pub fn kappa(delta: i64, m: &FactoredInt) -> i128 {
    m.factors()
        .iter()
        .map(|&(p, e)| {
            let chi = kronecker(delta, p as i64) as i128;
            let divides = delta % p as i64 == 0;
            match (e, divides) {
                (1, _) => chi - 1,
                (2, false) => -chi,
                (2, true) => -1,
                (3, true) => 1,
                _ => 0,
            }
        })
        .product()
}

/// `kappa_infty(M) = ((mu*mu) * (id * |mu|))(M)`.
pub fn kappa_infty(m: &FactoredInt) -> i128 {
    m.factors()
        .iter()
        .map(|&(p, e)| {
            let p = p as i128;
            match e {
                1 => p - 1,
                2 => p * p - p - 1,
                _ => p.pow(e - 3) * (p - 1) * (p - 1) * (p + 1),
            }
        })
        .product()
}

/// `alpha_2(M) = ((mu*mu) * (Q * |mu|))(M)` with `Q(n)^2` the largest square dividing `n`.
pub fn alpha2(m: &FactoredInt) -> i128 {
    m.factors()
        .iter()
        .map(|&(p, e)| {
            let p = p as i128;
            match e {
                _ if e % 2 == 1 => 0,
                2 => p - 2,
                _ => p.pow((e - 4) / 2) * (p - 1) * (p - 1),
            }
        })
        .product()
}

/// Sign pattern of `alpha_1(-q^r; e)` read off the case table, without class
/// numbers (which are positive). Returns -1, 0 or 1.
pub fn alpha1_sign(q: u64, r: u32, e: u32) -> i32 {
    if q == 2 {
        return if e == 0 { 1 } else { 0 };
    }
    let qr_mod4 = if r % 2 == 0 || q % 4 == 1 { 1 } else { 3 };
    if qr_mod4 == 1 {
        match e {
            0 | 3 => 1,
            1 | 2 => -1,
            _ => 0,
        }
    } else {
        let chi = kronecker(-(q as i64), 2);
        let v = match e {
            0 => 3 - chi,
            1 | 2 => chi - 1,
            3 => 3 * (chi - 1),
            4 => 2 * (1 - 2 * chi),
            _ => 0,
        };
        v.signum()
    }
}

/// `alpha_1(-q^r; e)` by the case table in `q^r mod 4`.
pub fn alpha1_table(q: u64, r: u32, e: u32) -> ExactValue {
    let qr = q.pow(r) as i64;
    if q == 2 {
        return if e == 0 { hurwitz_or_zero(-4 * qr) } else { ExactValue::ZERO };
    }
    if qr % 4 == 1 {
        let h = hurwitz_or_zero(-4 * qr);
        match e {
            0 | 3 => h,
            1 | 2 => -h,
            _ => ExactValue::ZERO,
        }
    } else {
        let h = hurwitz_or_zero(-qr);
        let chi = kronecker(-(q as i64), 2) as i128;
        match e {
            0 => h.scale(3 - chi),
            1 | 2 => h.scale(chi - 1),
            3 => h.scale(3 * (chi - 1)),
            4 => h.scale(2 * (1 - 2 * chi)),
            _ => ExactValue::ZERO,
        }
    }
}

/// `alpha_1(-1; e)`: `H(-4) = 1/2` up to the 2-adic sign pattern.
fn alpha1_minus_one(e: u32) -> ExactValue {
    match e {
        0 | 3 => ExactValue::new(1, 2),
        1 | 2 => ExactValue::new(-1, 2),
        _ => ExactValue::ZERO,
    }
}

/// Why a covered `Delta_k` vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroReason {
    NotCubefree,
    SplitPrime,
    TwoAdicCase,
    ExceptionalSmallLevel,
}

impl ZeroReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            ZeroReason::NotCubefree => "not-cubefree",
            ZeroReason::SplitPrime => "split-prime",
            ZeroReason::TwoAdicCase => "two-adic-case",
            ZeroReason::ExceptionalSmallLevel => "exceptional-small-level",
        }
    }
}

/// Verdict of the vanishing and sign predicates for one `(k, q, r, M)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Zero { reason: ZeroReason, case: &'static str },
    /// `sign` is `None` where only the vanishing criterion is available.
    Nonzero { sign: Option<i32>, case: &'static str },
    NotCovered { reason: String },
}

impl Verdict {
    pub fn case(&self) -> Option<&'static str> {
        match self {
            Verdict::Zero { case, .. } | Verdict::Nonzero { case, .. } => Some(case),
            Verdict::NotCovered { .. } => None,
        }
    }

    /// Predicted sign: `Some(0)` for zero, `Some(+-1)` for a signed nonzero
    /// verdict, `None` otherwise.
    pub fn predicted_sign(&self) -> Option<i32> {
        match self {
            Verdict::Zero { .. } => Some(0),
            Verdict::Nonzero { sign, .. } => *sign,
            Verdict::NotCovered { .. } => None,
        }
    }

    /// Whether `value` is consistent with the verdict. Not-covered verdicts
    /// are consistent with everything.
    pub fn agrees_with(&self, value: &ExactValue) -> bool {
        match self {
            Verdict::Zero { .. } => value.is_zero(),
            Verdict::Nonzero { sign: Some(s), .. } => value.signum() == *s,
            Verdict::Nonzero { sign: None, .. } => !value.is_zero(),
            Verdict::NotCovered { .. } => true,
        }
    }
}

/// `Delta_k(q^r, M)` together with the predicate verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeltaResult {
    pub k: u32,
    pub q: u64,
    pub r: u32,
    pub m: u64,
    pub value: ExactValue,
    pub zero_reason: Option<ZeroReason>,
    pub predicted_sign: Option<i32>,
    pub verdict: Verdict,
}

/// The closed form for `Delta_k(q^r, M)`.
pub fn delta_value(k: u32, q: u64, r: u32, m: &FactoredInt) -> ExactValue {
    let s = pm1(k);
    let (e, m_odd) = m.split_two();
    let half = ExactValue::new(1, 2);
    let third = ExactValue::new(1, 3);
    let twelfth = ExactValue::new(1, 12);
    let int = ExactValue::from_int;
    let mobius_term = if k == 2 { int(m.mobius() as i128) } else { ExactValue::ZERO };
    let qi = q as i64;
    let value = if r == 1 {
        match q {
            2 => half * int(s * kappa(-2, m) - p_k_sqrt2(k) * kappa(-1, m)) + mobius_term,
            3 => {
                half * alpha1_table(3, 1, e).scale(s * kappa(-3, &m_odd)) - third.scale(p_k_sqrt3(k) * kappa(-3, m))
                    + mobius_term
            }
            _ => half * alpha1_table(q, 1, e).scale(s * kappa(-qi, &m_odd)) + mobius_term,
        }
    } else if r % 2 == 1 {
        match q.pow(r) {
            8 => half * int(s * kappa(-2, m) + p_k_sqrt2(k) * kappa(-1, m)),
            27 => {
                let two_part = FactoredInt::from_factors(vec![(2, e)]);
                let c = half * (alpha1_table(3, 3, e) - alpha1_table(3, 1, e).scale(2)).scale(s)
                    + third.scale(p_k_sqrt3(k) * kappa(-3, &two_part));
                c.scale(kappa(-3, &m_odd))
            }
            _ => {
                let mut aleph = alpha1_table(q, r, e) - alpha1_table(q, r - 2, e).scale(2);
                if r >= 5 {
                    aleph += alpha1_table(q, r - 4, e);
                }
                half * aleph.scale(s * kappa(-qi, &m_odd))
            }
        }
    } else if r == 2 {
        if q == 2 {
            twelfth * int(3 * s * kappa(-1, m) + 4 * p_k_one(k) * kappa(-3, m) - (k as i128 - 1) * kappa_infty(m))
        } else {
            half * alpha1_table(q, 2, e).scale(s * kappa(-1, &m_odd))
                - twelfth * int(3 * s * kappa(-4, m) - 4 * p_k_one(k) * kappa(-3, m) + (k as i128 - 1) * kappa_infty(m))
                - half * alpha1_minus_one(e).scale(s * kappa(-1, &m_odd))
                + half * int(alpha2(m))
        }
    } else if q.pow(r) == 16 {
        half * int(s * kappa(-1, m) + alpha2(m))
    } else {
        half * aleph_even(q, r, e).scale(s * kappa(-1, &m_odd))
    };
    assert!(value.is_integer(), "non-integral Delta_{k}({q}^{r}, {}) = {value}", m.value());
    value
}

/// `alpha_1(-q^r) - 2 alpha_1(-q^{r-2}) + alpha_1(-q^{r-4})` for even `r >= 4`.
fn aleph_even(q: u64, r: u32, e: u32) -> ExactValue {
    if q == 2 {
        return ExactValue::from_int(1i128 << ((r - 4) / 2));
    }
    if e >= 4 {
        return ExactValue::ZERO;
    }
    let qi = q as i128;
    let mag = ExactValue::new(qi.pow((r - 4) / 2) * (qi - 1) * (qi - kronecker(-1, q as i64) as i128), 2);
    if matches!(e, 0 | 3) { mag } else { -mag }
}

/// `Delta_k(q^r, M)` with its predicate verdict.
pub fn delta(k: u32, q: u64, r: u32, m: u64) -> Result<DeltaResult, SignsError> {
    let mf = validate(k, q, r, m)?;
    let value = delta_value(k, q, r, &mf);
    let verdict = verdict_for(k, q, r, &mf);
    let zero_reason = match &verdict {
        Verdict::Zero { reason, .. } => Some(*reason),
        _ => None,
    };
    Ok(DeltaResult { k, q, r, m, value, zero_reason, predicted_sign: verdict.predicted_sign(), verdict })
}

/// The vanishing and sign predicates, evaluated without computing `Delta`.
pub fn equidistribution_predicate(k: u32, q: u64, r: u32, m: u64) -> Result<Verdict, SignsError> {
    let mf = validate(k, q, r, m)?;
    Ok(verdict_for(k, q, r, &mf))
}

fn parity_sign(n: u32) -> i32 {
    if n % 2 == 0 { 1 } else { -1 }
}

/// Odd part of `M` fails cubefreeness or has a split prime `p || M'` for `delta_sym`.
fn odd_part_zero(m_odd: &FactoredInt, delta_sym: i64) -> Option<ZeroReason> {
    if !m_odd.is_cubefree() {
        return Some(ZeroReason::NotCubefree);
    }
    if m_odd.factors().iter().any(|&(p, e)| e == 1 && kronecker(delta_sym, p as i64) == 1) {
        return Some(ZeroReason::SplitPrime);
    }
    None
}

fn verdict_for(k: u32, q: u64, r: u32, m: &FactoredInt) -> Verdict {
    let (e, m_odd) = m.split_two();
    let qi = q as i64;
    let half_k = k / 2;
    if r % 2 == 1 {
        match (q, r) {
            (2, 1) => return verdict_q2_r1(k, m),
            (3, 1) => return verdict_q3_r1(k, m),
            (2, 3) | (3, 3) => {
                return Verdict::NotCovered { reason: format!("q^r = {} is a special small level", q.pow(r)) }
            }
            _ => {}
        }
        let weight2_sqf = r == 1 && k == 2 && m.is_squarefree();
        let zero = odd_part_zero(&m_odd, -qi).or_else(|| (alpha1_sign(q, r, e) == 0).then_some(ZeroReason::TwoAdicCase));
        if weight2_sqf {
            return verdict_weight2_squarefree(q, m, zero.is_some());
        }
        if let Some(reason) = zero {
            return Verdict::Zero { reason, case: "odd-exponent" };
        }
        // (-q^r | p) = (-q | p) for odd r.
        let sign = parity_sign(half_k + m_odd.omega1() + m_odd.omega2(-qi)) * alpha1_sign(q, r, e);
        return Verdict::Nonzero { sign: Some(sign), case: "odd-exponent" };
    }
    if r == 2 {
        return Verdict::NotCovered { reason: "r = 2 has only asymptotic statements".into() };
    }
    if q.pow(r) == 16 {
        return Verdict::NotCovered { reason: "q^r = 16 is a special small level".into() };
    }
    let zero = odd_part_zero(&m_odd, -1).or_else(|| (e >= 4).then_some(ZeroReason::TwoAdicCase));
    if let Some(reason) = zero {
        return Verdict::Zero { reason, case: "even-exponent" };
    }
    let b = if matches!(e, 0 | 3) { 1 } else { -1 };
    Verdict::Nonzero { sign: Some(parity_sign(half_k + m_odd.omega1() + m_odd.omega2(-1)) * b), case: "even-exponent" }
}

/// `r = 1`, `k = 2`, `M` squarefree, `q >= 5`.
fn verdict_weight2_squarefree(q: u64, m: &FactoredInt, main_term_vanishes: bool) -> Verdict {
    const CASE: &str = "odd-exponent-weight2-squarefree";
    let exceptional = match m.value() {
        1 => hurwitz_or_zero(-4 * q as i64) == ExactValue::from(2),
        2 => hurwitz_or_zero(-4 * q as i64) == hurwitz_or_zero(-(q as i64)).scale(2) + ExactValue::from(2),
        _ => false,
    };
    if exceptional {
        return Verdict::Zero { reason: ZeroReason::ExceptionalSmallLevel, case: CASE };
    }
    if main_term_vanishes {
        // Only the Mobius term survives.
        return Verdict::Nonzero { sign: Some(m.mobius() as i32), case: CASE };
    }
    let (e, m_odd) = m.split_two();
    // With M squarefree the odd part has no p^2 || M' terms.
    let sign = parity_sign(1 + m_odd.omega1()) * alpha1_sign(q, 1, e);
    Verdict::Nonzero { sign: Some(sign), case: CASE }
}

/// `q = 2`, `r = 1`: zero-iff only.
fn verdict_q2_r1(k: u32, m: &FactoredInt) -> Verdict {
    const CASE: &str = "q2-exponent1";
    if !m.is_cubefree() {
        return Verdict::Zero { reason: ZeroReason::NotCubefree, case: CASE };
    }
    if k == 2 && m.is_squarefree() {
        let v = m.value();
        let zero = v == 1 || (m.is_prime() && matches!(v % 8, 3 | 5));
        return if zero {
            Verdict::Zero { reason: ZeroReason::ExceptionalSmallLevel, case: CASE }
        } else {
            Verdict::Nonzero { sign: None, case: CASE }
        };
    }
    let sharp: Vec<u64> = m.factors().iter().filter(|&&(_, e)| e == 1).map(|&(p, _)| p).collect();
    let kappa_m2_zero = sharp.iter().any(|&p| kronecker(-2, p as i64) == 1);
    let kappa_m1_zero = sharp.iter().any(|&p| kronecker(-1, p as i64) == 1);
    if kappa_m2_zero && kappa_m1_zero {
        return Verdict::Zero { reason: ZeroReason::SplitPrime, case: CASE };
    }
    if !kappa_m2_zero && !kappa_m1_zero {
        let prod: i32 = m.factors().iter().filter(|&&(_, e)| e == 2).map(|&(p, _)| kronecker(2, p as i64)).product();
        let target = if matches!(k % 8, 0 | 2) { -1 } else { 1 };
        if prod == target {
            return Verdict::Zero { reason: ZeroReason::ExceptionalSmallLevel, case: CASE };
        }
    }
    Verdict::Nonzero { sign: None, case: CASE }
}

/// The literal four-clause statement for `q = 2`, `r = 1`, kept for reporting
/// where it disagrees with [`verdict_q2_r1`].
pub fn literal_q2_r1_zero(k: u32, m: u64) -> bool {
    let mf = factor_u64(m);
    if !mf.is_cubefree() {
        return true;
    }
    let prod: i32 = mf.factors().iter().filter(|&&(_, e)| e == 2).map(|&(p, _)| kronecker(2, p as i64)).product();
    let target = if matches!(k % 8, 0 | 2) { -1 } else { 1 };
    if prod == target {
        return true;
    }
    k == 2 && (m == 1 || (mf.is_prime() && matches!(m % 8, 3 | 5)))
}

/// `q = 3`, `r = 1`: zero-iff only.
fn verdict_q3_r1(k: u32, m: &FactoredInt) -> Verdict {
    const CASE: &str = "q3-exponent1";
    if k == 2 && m.is_squarefree() {
        return if m.value() <= 2 {
            Verdict::Zero { reason: ZeroReason::ExceptionalSmallLevel, case: CASE }
        } else {
            Verdict::Nonzero { sign: None, case: CASE }
        };
    }
    let (e, m_odd) = m.split_two();
    if let Some(reason) = odd_part_zero(&m_odd, -3) {
        return Verdict::Zero { reason, case: CASE };
    }
    let k_special = matches!(k % 12, 4 | 10);
    if e >= 5 || (e == 0 && k_special) || (e == 2 && !k_special) {
        let reason = if e >= 5 { ZeroReason::TwoAdicCase } else { ZeroReason::ExceptionalSmallLevel };
        return Verdict::Zero { reason, case: CASE };
    }
    Verdict::Nonzero { sign: None, case: CASE }
}

/// Which limit an asymptotic leading term describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum R2Regime {
    /// `q` fixed, `k + M -> infinity`.
    WeightAndLevel,
    /// `k, M` fixed, `q -> infinity`.
    LargeQ,
}

/// Leading term of `Delta_k(q^2, M)` in the given regime.
pub fn delta_r2_asymptotics(k: u32, q: u64, m: u64, regime: R2Regime) -> Result<ExactValue, SignsError> {
    let mf = validate(k, q, 2, m)?;
    match regime {
        R2Regime::WeightAndLevel => Ok(ExactValue::new((1 - k as i128) * kappa_infty(&mf), 12)),
        R2Regime::LargeQ => {
            let (e, m_odd) = mf.split_two();
            let m_half_ok = mf.is_cubefree() || (m % 2 == 0 && factor_u64(m / 2).is_cubefree());
            if !m_half_ok {
                return Err(SignsError::Hypotheses("M or M/2 must be cubefree".into()));
            }
            if mf.factors().iter().any(|&(p, e)| e == 1 && p % 4 == 1) {
                return Err(SignsError::Hypotheses("some p || M is 1 mod 4".into()));
            }
            let b = b_2e(e) as i128;
            Ok(ExactValue::new(pm1(k) * b * kappa(-1, &m_odd) * q as i128, 4))
        }
    }
}

/// `b_{2,e}`: 1 for `e = 0, 3`, -1 for `e = 1, 2`, 0 for `e >= 4`.
pub fn b_2e(e: u32) -> i32 {
    match e {
        0 | 3 => 1,
        1 | 2 => -1,
        _ => 0,
    }
}

/// `dim S_k(Gamma_0(N))`.
pub fn cusp_dim(k: u32, n: &FactoredInt) -> i128 {
    assert!(k >= 2 && k % 2 == 0);
    let k = k as i128;
    // mu_0 as an integer; the rest in twelfths.
    let mu0: i128 = n.factors().iter().map(|&(p, e)| (p as i128).pow(e - 1) * (p as i128 + 1)).product();
    let nu2: i128 =
        if n.v_p(2) >= 2 { 0 } else { n.primes().map(|p| 1 + kronecker(-4, p as i64) as i128).product() };
    let nu3: i128 =
        if n.v_p(3) >= 2 { 0 } else { n.primes().map(|p| 1 + kronecker(-3, p as i64) as i128).product() };
    let cusps: i128 = n
        .divisors()
        .iter()
        .map(|d| factor_u64(num_integer::gcd(d.value(), n.value() / d.value())).phi() as i128)
        .sum();
    let twelfths = (k - 1) * mu0 + (12 * (k / 4) - 3 * (k - 1)) * nu2 + (12 * (k / 3) - 4 * (k - 1)) * nu3 - 6 * cusps
        + if k == 2 { 12 } else { 0 };
    assert!(twelfths % 12 == 0, "non-integral dimension");
    twelfths / 12
}

/// `dim S_k^new(Gamma_0(N)) = sum_{d | N} (mu*mu)(N/d) dim S_k(d)`.
pub fn newspace_dim(k: u32, n: &FactoredInt) -> i128 {
    n.divisors()
        .iter()
        .map(|d| {
            let w = crate::arith::mu_mu(&n.div_exact(d)) as i128;
            if w == 0 { 0 } else { w * cusp_dim(k, d) }
        })
        .sum()
}

/// Dimensions of the `W_q = +1` and `W_q = -1` parts of `S_k^new(q^r M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EigenspaceDims {
    pub plus: i128,
    pub minus: i128,
}

pub fn eigenspace_dims(k: u32, q: u64, r: u32, m: u64) -> Result<EigenspaceDims, SignsError> {
    let mf = validate(k, q, r, m)?;
    let level = mf.mul(&FactoredInt::from_factors(vec![(q, r)]));
    let total = newspace_dim(k, &level);
    let d = delta_value(k, q, r, &mf).to_integer().expect("integral Delta");
    assert!((total + d) % 2 == 0, "dimension and Delta have different parity");
    Ok(EigenspaceDims { plus: (total + d) / 2, minus: (total - d) / 2 })
}

/// Predictions for `tr T_l W_q` on `S_k^new(qM)` with `l < q/4` prime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SmallEllPrediction {
    /// Whether the trace is predicted to vanish.
    pub trace_zero: bool,
    /// When nonzero, the trace should have the sign of `Delta_k(q, M)`.
    pub delta_sign: i32,
}

/// Vanishing and sign predictions for `tr T_l W_q`, from congruence data
/// only. Weight 2 is refused: its extra hypothesis `4 | M` cannot hold for
/// the admissible `M`.
pub fn small_ell_predict(k: u32, q: u64, m: u64, ell: u64) -> Result<SmallEllPrediction, SignsError> {
    let mf = validate(k, q, 1, m)?;
    if k == 2 {
        return Err(SignsError::Hypotheses("weight 2 is not covered".into()));
    }
    if !is_prime(ell) || 4 * ell >= q {
        return Err(SignsError::Hypotheses(format!("l = {ell} must be a prime below q/4")));
    }
    if m % ell == 0 {
        return Err(SignsError::Hypotheses("M must be coprime to l".into()));
    }
    let (e, m_odd) = mf.split_two();
    if e > 1 || !m_odd.is_squarefree() {
        return Err(SignsError::Hypotheses("M must be squarefree or twice a squarefree number".into()));
    }
    let d = delta_value(k, q, 1, &mf);
    if d.is_zero() {
        return Err(SignsError::Hypotheses("Delta_k(q, M) = 0".into()));
    }
    let ql = (q * ell) as i64;
    let split = m_odd.primes().any(|p| kronecker(-ql, p as i64) == 1);
    let two_adic = e > 0 && ql % 8 == 7;
    Ok(SmallEllPrediction { trace_zero: split || two_adic, delta_sign: d.signum() })
}

/// [`small_ell_predict`] next to the traces it is about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SmallEllChecks {
    pub prediction: SmallEllPrediction,
    pub delta: ExactValue,
    /// `tr T_l W_q` on `S_k^new(qM)`.
    pub trace_wq: ExactValue,
    /// `tr T_l` on `S_k^new(qM)`.
    pub trace: ExactValue,
    /// Zero-iff prediction matches `trace_wq`.
    pub zero_ok: bool,
    /// `trace_wq` is zero or has the sign of `delta`.
    pub sign_ok: bool,
    /// Traces on the `W_q = +1` and `W_q = -1` parts have signs `+sign(delta)` and `-sign(delta)`.
    pub eigenspace_ok: bool,
}

impl SmallEllChecks {
    pub fn eigenspace_traces(&self) -> (ExactValue, ExactValue) {
        let half = ExactValue::new(1, 2);
        (half * (self.trace + self.trace_wq), half * (self.trace - self.trace_wq))
    }
}

pub fn small_ell_checks(k: u32, q: u64, m: u64, ell: u64) -> Result<SmallEllChecks, SignsError> {
    let prediction = small_ell_predict(k, q, m, ell)?;
    let trace_err = |e: crate::trace::TraceError| SignsError::Hypotheses(e.to_string());
    let delta = delta_value(k, q, 1, &factor_u64(m));
    let trace_wq = crate::trace::TraceQuery::new(k, q, 1, m, ell).map_err(trace_err)?.t_new();
    let trace = crate::trace::hecke_trace_new(k, q * m, ell).map_err(trace_err)?;
    let zero_ok = prediction.trace_zero == trace_wq.is_zero();
    let sign_ok = trace_wq.is_zero() || trace_wq.signum() == prediction.delta_sign;
    let mut out = SmallEllChecks { prediction, delta, trace_wq, trace, zero_ok, sign_ok, eigenspace_ok: false };
    let (plus, minus) = out.eigenspace_traces();
    out.eigenspace_ok = plus.signum() == out.prediction.delta_sign && minus.signum() == -out.prediction.delta_sign;
    Ok(out)
}
