//! Traces of `T_l W_q` on `S_k(q^r M)` and on its newspace, traces of
//! `T_l W_Q` on squarefree levels, and the full-space Fricke trace.
//!
//! The full-space trace is assembled from the `A_{1,e}`, `A_2`, `A_3`
//! pieces of the Eichler–Selberg formula with the Atkin–Lehner twist, and
//! the newspace trace is obtained from it by the `(mu*mu)` inversion in `M`
//! together with the `r -> r - 2` difference in the power of `q`.

use serde::Serialize;

use crate::arith::{factor_u64, is_prime, kronecker, mu_mu, FactoredInt};
use crate::classnum::{hurwitz_or_zero, hurwitz_t_unchecked, Discriminant};
use crate::exact::ExactValue;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("weight must be even and at least 2, got {0}")]
    BadWeight(u32),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("l must be positive")]
    ZeroEll,
    #[error("{what} must be pairwise coprime")]
    NotCoprime { what: &'static str },
    #[error("{name} = {value} is not squarefree")]
    NotSquarefree { name: &'static str, value: u64 },
    #[error("with Q = 1 the squarefree formula needs l = 1 or l prime, got l = {0}")]
    CompositeEll(u64),
    #[error("the Fricke formula needs 4n < N, got n = {n}, N = {level}")]
    FrickeRange { n: u64, level: u64 },
}

fn check_weight(k: u32) -> Result<(), TraceError> {
    if k < 2 || k % 2 == 1 {
        Err(TraceError::BadWeight(k))
    } else {
        Ok(())
    }
}

fn checked(v: Option<i128>, what: &str) -> i128 {
    v.unwrap_or_else(|| panic!("integer overflow in {what}"))
}

/// `p_k(s, l)` as a function of `S = s^2`, by the even-index recurrence
/// `p_{j+2} = (S - 2l) p_j - l^2 p_{j-2}` with `p_2 = 1`, `p_4 = S - l`.
/// This is exact in all cases, including `S = 4l`.
pub fn p_k(k: u32, s_sq: i128, ell: i128) -> i128 {
    assert!(k >= 2 && k % 2 == 0, "p_k needs even k >= 2");
    let (mut prev, mut cur) = (1i128, s_sq - ell);
    if k == 2 {
        return prev;
    }
    let a = s_sq - 2 * ell;
    let l2 = checked(ell.checked_mul(ell), "p_k");
    for _ in (6..=k).step_by(2) {
        let next = checked(a.checked_mul(cur).and_then(|x| x.checked_sub(checked(l2.checked_mul(prev), "p_k"))), "p_k");
        prev = cur;
        cur = next;
    }
    cur
}

/// `p_k(+-1, 1)`: -1, 1, 0 for `k = 0, 2, 4 mod 6`.
pub fn p_k_one(k: u32) -> i128 {
    match k % 6 {
        0 => -1,
        2 => 1,
        _ => 0,
    }
}

/// `p_k(+-2, 1) = k - 1`.
pub fn p_k_two(k: u32) -> i128 {
    k as i128 - 1
}

/// `p_k(+-sqrt 2, 1)`: -1 for `k = 0, 6 mod 8`, else 1.
pub fn p_k_sqrt2(k: u32) -> i128 {
    match k % 8 {
        0 | 6 => -1,
        _ => 1,
    }
}

/// `p_k(+-sqrt 3, 1)` by `k mod 12`.
pub fn p_k_sqrt3(k: u32) -> i128 {
    match k % 12 {
        0 | 8 => -1,
        2 | 6 => 1,
        4 => 2,
        _ => -2,
    }
}

/// Divisors `t | M` with `M / t` squarefree.
fn t_divisors(m: &FactoredInt) -> Vec<u64> {
    let mut out = vec![1u64];
    for &(p, e) in m.factors() {
        let lo = p.pow(e - 1);
        let hi = lo * p;
        out = out.iter().flat_map(|&t| [t * lo, t * hi]).collect();
    }
    out
}

/// `alpha_1(-D; e)` for `D = q^r l > 0`, the 2-adic factor of the small-`l`
/// contribution.
pub fn alpha1(d: u64, e: u32) -> ExactValue {
    let d = d as i64;
    let h4 = hurwitz_or_zero(-4 * d);
    let h1 = hurwitz_or_zero(-d);
    let chi = kronecker(-d, 2) as i128;
    match e {
        0 => h4,
        1 | 2 => h1.scale(2) - h4,
        3 => h1.scale(4 * chi - 6) + h4,
        4 => h1.scale(2 - 4 * chi),
        _ => ExactValue::ZERO,
    }
}

/// The fixed data `(k, q, l)` of a family of traces of `T_l W_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HeckeAl {
    pub k: u32,
    pub q: u64,
    pub ell: u64,
}

impl HeckeAl {
    pub fn new(k: u32, q: u64, ell: u64) -> Result<Self, TraceError> {
        check_weight(k)?;
        if !is_prime(q) {
            return Err(TraceError::NotPrime(q));
        }
        if ell == 0 {
            return Err(TraceError::ZeroEll);
        }
        if ell % q == 0 {
            return Err(TraceError::NotCoprime { what: "q, l and M" });
        }
        Ok(HeckeAl { k, q, ell })
    }

    fn check_m(&self, m: &FactoredInt) -> Result<(), TraceError> {
        if m.v_p(self.q) > 0 || !m.is_coprime_to(self.ell) {
            return Err(TraceError::NotCoprime { what: "q, l and M" });
        }
        Ok(())
    }

    /// `A_{1,eps}(r; M)`.
    pub fn a1(&self, r: i64, eps: u32, m: &FactoredInt) -> ExactValue {
        if r < 0 {
            return ExactValue::ZERO;
        }
        let q = self.q as i128;
        let ell = self.ell as i128;
        let qr = checked(q.checked_pow(r as u32), "q^r");
        let step = checked(q.checked_pow(r as u32 + eps), "q^r");
        let bound = checked(qr.checked_mul(4 * ell), "4 q^r l");
        let ts = t_divisors(m);
        let mut total = ExactValue::ZERO;
        let mut s = 0i128;
        while s * s <= bound {
            let s_sq = s * s;
            let pk = p_k(self.k, s_sq / qr, ell);
            if pk != 0 {
                let delta = i64::try_from(s_sq - bound).expect("discriminant fits in i64");
                let inner: ExactValue = ts.iter().map(|&t| hurwitz_t_unchecked(t, delta)).sum();
                let mult = if s == 0 { 1 } else { 2 };
                total += inner.scale(pk * mult);
            }
            s += step;
        }
        total * ExactValue::new(-1, 2)
    }

    /// `A_2(r; M)`.
    pub fn a2(&self, r: i64, m: &FactoredInt) -> ExactValue {
        if r < 0 || r % 2 == 1 {
            return ExactValue::ZERO;
        }
        let half = self.q.pow((r / 2) as u32);
        let phi = if r == 0 { 1 } else { half / self.q * (self.q - 1) };
        let ts = t_divisors(m);
        let mut total = ExactValue::ZERO;
        for d in factor_u64(self.ell).divisors() {
            let (a, b) = (d.value(), self.ell / d.value());
            if (a + b) % half != 0 {
                continue;
            }
            let w = checked((a.min(b) as i128).checked_pow(self.k - 1), "min(l', l/l')^(k-1)");
            let diff = a.abs_diff(b);
            let inner: u64 = ts.iter().map(|&t| num_integer::gcd(factor_u64(t).square_part(), diff)).sum();
            total += ExactValue::from_int(checked(w.checked_mul(inner as i128), "A_2"));
        }
        total * ExactValue::new(-(phi as i128), 2)
    }

    /// `A_3 = delta_{k=2} sigma(l)`.
    pub fn a3(&self) -> ExactValue {
        if self.k == 2 {
            ExactValue::from_int(factor_u64(self.ell).sigma() as i128)
        } else {
            ExactValue::ZERO
        }
    }

    /// Trace of `T_l W_q` on `S_k(q^r M)`; zero for `r < 0`.
    pub fn t_full(&self, r: i64, m: &FactoredInt) -> ExactValue {
        if r < 0 {
            return ExactValue::ZERO;
        }
        let mut t = self.a1(r, 0, m) + self.a2(r, m) + self.a3();
        if r >= 2 {
            t -= self.a1(r - 2, 1, m);
        }
        t
    }

    /// Trace of `T_l W_q` on the newspace of level `q^r M`.
    pub fn t_new(&self, r: i64, m: &FactoredInt) -> ExactValue {
        if r < 0 {
            return ExactValue::ZERO;
        }
        m.divisors()
            .iter()
            .filter_map(|d| {
                let w = mu_mu(d);
                (w != 0).then(|| {
                    let md = m.div_exact(d);
                    (self.t_full(r, &md) - self.t_full(r - 2, &md)).scale(w as i128)
                })
            })
            .sum()
    }
}

/// A single trace evaluation `tr T_l W_q` at level `q^r M`, weight `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceQuery {
    pub op: HeckeAl,
    pub r: u32,
    pub m: FactoredInt,
}

impl TraceQuery {
    pub fn new(k: u32, q: u64, r: u32, m: u64, ell: u64) -> Result<Self, TraceError> {
        if m == 0 {
            return Err(TraceError::NotCoprime { what: "q, l and M (M must be positive)" });
        }
        let op = HeckeAl::new(k, q, ell)?;
        let m = factor_u64(m);
        op.check_m(&m)?;
        Ok(TraceQuery { op, r, m })
    }

    pub fn level(&self) -> u64 {
        self.op.q.pow(self.r) * self.m.value()
    }

    pub fn t_full(&self) -> ExactValue {
        self.op.t_full(self.r as i64, &self.m)
    }

    pub fn t_new(&self) -> ExactValue {
        self.op.t_new(self.r as i64, &self.m)
    }
}

/// Trace of `T_l` alone on `S_k^new(N)`, for `(l, N) = 1`. Evaluated as the
/// `r = 0` case of `T_l W_q` with an auxiliary prime `q` not dividing `lN`.
pub fn hecke_trace_new(k: u32, level: u64, ell: u64) -> Result<ExactValue, TraceError> {
    if level == 0 {
        return Err(TraceError::NotCoprime { what: "l and N (N must be positive)" });
    }
    let q = (2u64..).find(|&p| is_prime(p) && level % p != 0 && ell % p != 0).unwrap();
    Ok(TraceQuery::new(k, q, 0, level, ell)?.t_new())
}

/// `xi_Delta(p)`: the local factor of `sum_{d|M} (-2)^{omega(d)} sum_{t|M/d} H_t(Delta) / H(Delta)`
/// for squarefree `M`.
pub fn xi_prime(delta: i64, p: u64) -> ExactValue {
    if delta == 0 {
        return ExactValue::from_int(p as i128 - 1);
    }
    let pi = p as i64;
    if delta % (pi * pi) != 0 {
        return ExactValue::from_int(kronecker(delta, pi) as i128 - 1);
    }
    let d = Discriminant::new(delta).expect("xi needs a discriminant");
    let d0 = d.fundamental();
    let e = factor_u64(d.conductor()).v_p(p);
    let chi = kronecker(d0, pi) as i128;
    let p = p as i128;
    let num = (p - 1) * (chi - 1);
    let den = (p.pow(e + 1) - 1) - chi * (p.pow(e) - 1);
    ExactValue::new(num, den)
}

/// `xi_Delta(M)` for squarefree `M`.
pub fn xi(delta: i64, m: &FactoredInt) -> ExactValue {
    m.primes().map(|p| xi_prime(delta, p)).fold(ExactValue::ONE, |a, b| a * b)
}

/// Trace of `T_l W_Q` on `S_k^new(QM)` for squarefree `QM`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SquarefreeTraceQuery {
    pub k: u32,
    pub big_q: FactoredInt,
    pub m: FactoredInt,
    pub ell: u64,
}

impl SquarefreeTraceQuery {
    pub fn new(k: u32, big_q: u64, m: u64, ell: u64) -> Result<Self, TraceError> {
        check_weight(k)?;
        if ell == 0 {
            return Err(TraceError::ZeroEll);
        }
        let (qf, mf) = (factor_u64(big_q), factor_u64(m));
        if !qf.is_squarefree() {
            return Err(TraceError::NotSquarefree { name: "Q", value: big_q });
        }
        if !mf.is_squarefree() {
            return Err(TraceError::NotSquarefree { name: "M", value: m });
        }
        if num_integer::gcd(big_q, m) != 1 || num_integer::gcd(big_q, ell) != 1 || num_integer::gcd(m, ell) != 1 {
            return Err(TraceError::NotCoprime { what: "Q, M and l" });
        }
        if big_q == 1 && ell != 1 && !is_prime(ell) {
            return Err(TraceError::CompositeEll(ell));
        }
        Ok(SquarefreeTraceQuery { k, big_q: qf, m: mf, ell })
    }

    pub fn level(&self) -> u64 {
        self.big_q.value() * self.m.value()
    }

    /// Evaluates the trace. The Chebyshev factor
    /// `l^{k/2-1} U_{k-2}(s sqrt(Q/l) / 2)` is `p_k(s sqrt Q, l)`.
    pub fn trace(&self) -> ExactValue {
        let q = self.big_q.value() as i128;
        let ell = self.ell as i128;
        let mut total = ExactValue::ZERO;
        let mut s = 0i128;
        while s * s * q <= 4 * ell {
            let pk = p_k(self.k, s * s * q, ell);
            if pk != 0 {
                let delta = i64::try_from(s * s * q * q - 4 * q * ell).expect("discriminant fits in i64");
                let term = xi(delta, &self.m) * hurwitz_or_zero(delta);
                total += term.scale(pk * if s == 0 { 1 } else { 2 });
            }
            s += 1;
        }
        let mut t = total * ExactValue::new(-1, 2);
        if self.level() == 1 {
            // (1/2) sum_{l' | l} min(l', l/l')^{k-1} is 1 for l prime and 1/2 for l = 1.
            t -= if self.ell == 1 { ExactValue::new(1, 2) } else { ExactValue::ONE };
        }
        if self.k == 2 {
            t += ExactValue::from_int(self.m.mobius() as i128 * factor_u64(self.ell).sigma() as i128);
        }
        t
    }
}

/// `tr_{S_k(N)} T_n W_N = -1/2 (-n)^{(k-2)/2} H(-4nN) + delta_{k,2} sigma(n)` for
/// squarefree `N`, `(n, N) = 1` and `4n < N`.
pub fn t_full_fricke(k: u32, level: u64, n: u64) -> Result<ExactValue, TraceError> {
    check_weight(k)?;
    if n == 0 {
        return Err(TraceError::ZeroEll);
    }
    if !factor_u64(level).is_squarefree() {
        return Err(TraceError::NotSquarefree { name: "N", value: level });
    }
    if num_integer::gcd(n, level) != 1 {
        return Err(TraceError::NotCoprime { what: "n and N" });
    }
    if 4 * n >= level {
        return Err(TraceError::FrickeRange { n, level });
    }
    let pow = checked((-(n as i128)).checked_pow(k / 2 - 1), "(-n)^((k-2)/2)");
    let h = hurwitz_or_zero(-4 * (n as i64) * level as i64);
    let mut t = h.scale(pow) * ExactValue::new(-1, 2);
    if k == 2 {
        t += ExactValue::from_int(factor_u64(n).sigma() as i128);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(n: i128) -> ExactValue {
        ExactValue::from_int(n)
    }

    #[test]
    fn p_k_examples() {
        assert_eq!(p_k(2, 49, 3), 1);
        assert_eq!(p_k(4, 0, 2), -2);
        assert_eq!(p_k(6, 4, 1), 5);
        for ell in 1..6i128 {
            for k in (2..30).step_by(2) {
                assert_eq!(p_k(k, 0, ell), (-ell).pow(k / 2 - 1));
                // s^2 = 4l with s = 2 sqrt(l): (k-1) (s/2)^{k-2} = (k-1) l^{(k-2)/2}
                assert_eq!(p_k(k, 4 * ell, ell), (k as i128 - 1) * ell.pow(k / 2 - 1));
            }
        }
    }

    #[test]
    fn p_k_matches_root_power_definition() {
        // u_n = (rho^n - rhobar^n) / (rho - rhobar) satisfies u_{n+1} = s u_n - l u_{n-1},
        // u_0 = 0, u_1 = 1, and p_k = u_{k-1}.
        for s in -6i128..=6 {
            for ell in 1i128..=10 {
                let (mut a, mut b) = (0i128, 1i128);
                for n in 2..=21u32 {
                    let c = s * b - ell * a;
                    a = b;
                    b = c;
                    if (n + 1) % 2 == 0 {
                        assert_eq!(p_k(n + 1, s * s, ell), b, "k={} s={s} l={ell}", n + 1);
                    }
                }
            }
        }
    }

    #[test]
    fn special_tables_match_recurrence() {
        for k in (2..=60).step_by(2) {
            assert_eq!(p_k_one(k), p_k(k, 1, 1), "k = {k}");
            assert_eq!(p_k_two(k), p_k(k, 4, 1));
            assert_eq!(p_k_sqrt2(k), p_k(k, 2, 1));
            assert_eq!(p_k_sqrt3(k), p_k(k, 3, 1));
        }
    }

    #[test]
    fn a2_a3_examples() {
        let op = HeckeAl::new(4, 5, 1).unwrap();
        assert_eq!(op.a2(1, &factor_u64(9)), ExactValue::ZERO);
        assert_eq!(HeckeAl::new(4, 5, 6).unwrap().a3(), ExactValue::ZERO);
        assert_eq!(HeckeAl::new(2, 5, 6).unwrap().a3(), int(12));
        // Q = 1 with l prime: A_2(0; N) = -sigma_0(N).
        let op = HeckeAl::new(4, 2, 7).unwrap();
        let n = factor_u64(3 * 5 * 11);
        assert_eq!(op.a2(0, &n), int(-(n.sigma0() as i128)));
    }

    #[test]
    fn full_trace_dimensions() {
        assert_eq!(TraceQuery::new(12, 2, 0, 1, 1).unwrap().t_full(), int(1));
        assert_eq!(TraceQuery::new(2, 2, 0, 11, 1).unwrap().t_full(), int(1));
        assert_eq!(TraceQuery::new(2, 11, 1, 1, 1).unwrap().t_full(), int(-1));
        assert_eq!(TraceQuery::new(2, 11, 1, 1, 1).unwrap().op.t_full(-1, &FactoredInt::one()), ExactValue::ZERO);
        // dim S_k(1) for small k: 0 for k < 12 and k = 14.
        for (k, d) in [(2, 0), (4, 0), (10, 0), (12, 1), (14, 0), (24, 2)] {
            assert_eq!(TraceQuery::new(k, 2, 0, 1, 1).unwrap().t_full(), int(d), "k = {k}");
        }
    }

    #[test]
    fn newspace_examples() {
        assert_eq!(TraceQuery::new(2, 11, 1, 1, 1).unwrap().t_new(), int(-1));
        assert_eq!(TraceQuery::new(2, 11, 1, 1, 2).unwrap().t_new(), int(2));
        for k in (2..=14).step_by(2) {
            assert_eq!(TraceQuery::new(k, 5, 1, 27, 1).unwrap().t_new(), ExactValue::ZERO, "k = {k}");
        }
    }

    #[test]
    fn ramanujan_tau_two() {
        // Coefficients of q prod (1 - q^n)^24 up to q^3.
        let mut series = [0i128; 4];
        series[0] = 1;
        for n in 1..4usize {
            for _ in 0..24 {
                for i in (n..4).rev() {
                    series[i] -= series[i - n];
                }
            }
        }
        let tau2 = series[1];
        assert_eq!(tau2, -24);
        let sq = SquarefreeTraceQuery::new(12, 1, 1, 2).unwrap();
        assert_eq!(sq.trace(), int(tau2));
        assert_eq!(TraceQuery::new(12, 3, 0, 1, 2).unwrap().t_new(), int(tau2));
    }

    #[test]
    fn squarefree_examples() {
        assert_eq!(SquarefreeTraceQuery::new(2, 11, 1, 2).unwrap().trace(), int(2));
        assert_eq!(SquarefreeTraceQuery::new(12, 1, 1, 1).unwrap().trace(), int(1));
        assert_eq!(SquarefreeTraceQuery::new(4, 1, 1, 6), Err(TraceError::CompositeEll(6)));
        assert!(SquarefreeTraceQuery::new(4, 4, 1, 1).is_err());
        assert!(SquarefreeTraceQuery::new(4, 3, 5, 3).is_err());
    }

    #[test]
    fn fricke_examples() {
        assert_eq!(crate::classnum::hurwitz(-88).unwrap(), int(2));
        assert_eq!(crate::classnum::hurwitz(-44).unwrap(), int(4));
        assert_eq!(t_full_fricke(2, 11, 2).unwrap(), int(2));
        assert_eq!(t_full_fricke(4, 11, 1).unwrap(), int(2));
        assert_eq!(t_full_fricke(2, 11, 1).unwrap(), int(-1));
        assert_eq!(t_full_fricke(2, 11, 3), Err(TraceError::FrickeRange { n: 3, level: 11 }));
    }

    #[test]
    fn query_validation() {
        assert_eq!(TraceQuery::new(3, 5, 1, 1, 1).unwrap_err(), TraceError::BadWeight(3));
        assert_eq!(TraceQuery::new(4, 6, 1, 1, 1).unwrap_err(), TraceError::NotPrime(6));
        assert!(TraceQuery::new(4, 5, 1, 10, 1).is_err());
        assert!(TraceQuery::new(4, 5, 1, 3, 3).is_err());
    }
}
