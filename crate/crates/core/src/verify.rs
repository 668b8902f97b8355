//! The acceptance checks, each producing a one-line [`CriterionReport`].
//!
//! Shared by the `acceptance` integration test and `localsign selftest`.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arith::{factor_u64, is_prime, kronecker, primes_in};
use crate::classnum::{ensure_table, hurwitz_by_conductor, hurwitz_oracle, installed_table, is_negative_discriminant};
use crate::exact::ExactValue;
use crate::murmur::{self, Beta, FamilySpec};
use crate::par::Exec;
use crate::signs::{self, R2Regime, Verdict};
use crate::trace::{t_full_fricke, SquarefreeTraceQuery, TraceQuery};
use crate::twist::{quadtwist_bijection, TwistCharacter};

pub const DEFAULT_SEED: u64 = 0x6c6f_6361_6c73;

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub exec: Exec,
    pub seed: u64,
    /// Bound for the Hurwitz class number table used by the murmuration checks.
    pub table_bound: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { exec: Exec::Parallel, seed: DEFAULT_SEED, table_bound: crate::classnum::DEFAULT_HURWITZ_BOUND }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{:>2}] {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn report(id: u32, name: &'static str, start: Instant, passed: bool, detail: String) -> CriterionReport {
    CriterionReport { id, name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Prime powers `q^r <= bound` as `(q, r)`.
fn prime_powers(bound: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    for q in primes_in(2, bound) {
        let mut r = 1;
        while q.pow(r) <= bound {
            out.push((q, r));
            r += 1;
        }
    }
    out
}

/// Grid points `(k, q, r, M)` with `q^r <= qr_max`, `M <= m_max` coprime to `q`
/// and `k` even in `k_lo..=k_hi`.
pub fn delta_grid(k_lo: u32, k_hi: u32, qr_max: u64, m_max: u64) -> Vec<(u32, u64, u32, u64)> {
    let k_lo = k_lo.max(2) + k_lo % 2;
    let mut out = Vec::new();
    for (q, r) in prime_powers(qr_max) {
        for m in (1..=m_max).filter(|m| m % q != 0) {
            for k in (k_lo..=k_hi).step_by(2) {
                out.push((k, q, r, m));
            }
        }
    }
    out
}

/// Outcome of comparing closed forms, trace formula and predicates on a grid.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SweepSummary {
    pub points: usize,
    /// Points where the predicate makes a claim.
    pub covered: usize,
    /// `(k, q, r, M)` where the closed form and the trace formula differ.
    pub value_mismatches: Vec<(u32, u64, u32, u64)>,
    /// `(k, q, r, M)` where the predicate contradicts the value.
    pub predicate_mismatches: Vec<(u32, u64, u32, u64)>,
    /// `q = 2, r = 1` points outside weight 2 with squarefree `M`, and how many
    /// of them the literal vanishing statement gets wrong.
    pub q2_points: usize,
    pub q2_literal_wrong: usize,
}

impl SweepSummary {
    pub fn clean(&self) -> bool {
        self.value_mismatches.is_empty() && self.predicate_mismatches.is_empty()
    }
}

pub fn equidist_sweep(grid: &[(u32, u64, u32, u64)], exec: Exec) -> SweepSummary {
    let rows = exec.map(grid, |&(k, q, r, m)| {
        let d = signs::delta(k, q, r, m).expect("valid grid point");
        let same = d.value == TraceQuery::new(k, q, r, m, 1).expect("valid").t_new();
        let covered = !matches!(d.verdict, Verdict::NotCovered { .. });
        let literal_q2 = (q == 2 && r == 1 && !(k == 2 && factor_u64(m).is_squarefree()))
            .then(|| signs::literal_q2_r1_zero(k, m) == d.value.is_zero());
        (same, covered, d.verdict.agrees_with(&d.value), literal_q2)
    });
    let mut out = SweepSummary { points: grid.len(), ..Default::default() };
    for (&pt, (same, covered, agrees, q2)) in grid.iter().zip(rows) {
        if !same {
            out.value_mismatches.push(pt);
        }
        if !agrees {
            out.predicate_mismatches.push(pt);
        }
        out.covered += covered as usize;
        if let Some(ok) = q2 {
            out.q2_points += 1;
            out.q2_literal_wrong += !ok as usize;
        }
    }
    out
}

fn acceptance_grid() -> Vec<(u32, u64, u32, u64)> {
    delta_grid(2, 14, 200, 300)
}

/// Hurwitz class numbers against the reduced-form oracle.
pub fn criterion_1(_opts: &VerifyOptions) -> CriterionReport {
    let start = Instant::now();
    let mut checked = 0;
    let mut bad = Vec::new();
    for n in 1..=20_000i64 {
        let delta = -n;
        if !is_negative_discriminant(delta) {
            continue;
        }
        let oracle = hurwitz_oracle(delta).expect("discriminant");
        let formula = hurwitz_by_conductor(delta).expect("discriminant");
        let table = installed_table().and_then(|t| t.get(n as u64)).unwrap_or(formula);
        if oracle != formula || oracle != table {
            bad.push(delta);
        }
        checked += 1;
    }
    let fast = start.elapsed() < Duration::from_secs(60);
    report(
        1,
        "class numbers vs form oracle",
        start,
        bad.is_empty() && fast,
        format!("{checked} discriminants, {} mismatches{}", bad.len(), if fast { "" } else { ", over 60 s" }),
    )
}

/// Closed forms for `Delta` against the trace formula.
pub fn criterion_2(opts: &VerifyOptions) -> CriterionReport {
    let start = Instant::now();
    let sweep = equidist_sweep(&acceptance_grid(), opts.exec);
    let bad = sweep.value_mismatches.len();
    let fast = start.elapsed() < Duration::from_secs(300);
    report(
        2,
        "closed form = trace formula",
        start,
        bad == 0 && fast,
        format!("{} points (q^r <= 200, M <= 300, k <= 14), {bad} mismatches", sweep.points),
    )
}

/// Primes `q` in `[5, 200]` with `Delta_2(q, m) = 0`.
pub fn weight_two_zero_primes(m: u64) -> Vec<u64> {
    primes_in(5, 200).into_iter().filter(|&q| signs::delta_value(2, q, 1, &factor_u64(m)).is_zero()).collect()
}

/// Vanishing and sign predicates against computed values, and the weight-2 lists.
pub fn criterion_3(opts: &VerifyOptions) -> CriterionReport {
    let start = Instant::now();
    let sweep = equidist_sweep(&acceptance_grid(), opts.exec);
    let (covered, bad) = (sweep.covered, sweep.predicate_mismatches.len());
    let (q2_total, q2_literal_bad) = (sweep.q2_points, sweep.q2_literal_wrong);
    let stated_m1 = vec![5, 7, 13, 17];
    let stated_m2 = vec![5, 11, 13, 19, 37, 43, 67, 163];
    let (got_m1, got_m2) = (weight_two_zero_primes(1), weight_two_zero_primes(2));
    let lists_ok = got_m1 == stated_m1 && got_m2 == stated_m2;
    report(
        3,
        "vanishing and sign predicates",
        start,
        bad == 0 && lists_ok,
        format!(
            "{covered} covered points, {bad} predicate mismatches; weight-2 zero primes M=1 {got_m1:?} (stated {stated_m1:?}), M=2 {got_m2:?} (stated {stated_m2:?}); literal q=2 criterion wrong on {q2_literal_bad}/{q2_total} points"
        ),
    )
}

/// Squarefree trace formula against the general one, and against the Fricke formula.
pub fn criterion_4(opts: &VerifyOptions) -> CriterionReport {
    let start = Instant::now();
    let mut cases = Vec::new();
    for n in (2..=300u64).filter(|&n| factor_u64(n).is_squarefree()) {
        for q in factor_u64(n).primes() {
            for ell in [1u64, 2, 3, 5, 7].into_iter().filter(|&l| n % l != 0) {
                for k in [2u32, 4, 6, 8] {
                    cases.push((k, q, n / q, ell));
                }
            }
        }
    }
    let bad1 = opts
        .exec
        .map(&cases, |&(k, q, m, ell)| {
            SquarefreeTraceQuery::new(k, q, m, ell).unwrap().trace() == TraceQuery::new(k, q, 1, m, ell).unwrap().t_new()
        })
        .into_iter()
        .filter(|ok| !ok)
        .count();
    let mut fricke = Vec::new();
    for n in (2..=500u64).filter(|&n| factor_u64(n).is_squarefree()) {
        for ell in [1u64, 2, 3, 5, 7, 11, 13].into_iter().filter(|&l| n % l != 0 && 4 * l < n) {
            for k in [2u32, 4, 6, 8] {
                fricke.push((k, n, ell));
            }
        }
    }
    let bad2 = opts
        .exec
        .map(&fricke, |&(k, n, ell)| t_full_fricke(k, n, ell).unwrap() == SquarefreeTraceQuery::new(k, n, 1, ell).unwrap().trace())
        .into_iter()
        .filter(|ok| !ok)
        .count();
    report(
        4,
        "squarefree trace consistency",
        start,
        bad1 == 0 && bad2 == 0,
        format!("{} (Q = q) cases with {bad1} mismatches; {} Fricke cases with {bad2} mismatches", cases.len(), fricke.len()),
    )
}

/// Vanishing and sign of `tr T_l W_q` for small `l`.
pub fn criterion_5(opts: &VerifyOptions) -> CriterionReport {
    let start = Instant::now();
    let mut cases = Vec::new();
    for m in [1u64, 3, 6] {
        for q in primes_in(2, 500).into_iter().filter(|&q| m % q != 0) {
            for ell in primes_in(2, q).into_iter().filter(|&l| 4 * l < q && m % l != 0) {
                cases.push((q, m, ell));
            }
        }
    }
    let results = opts.exec.map(&cases, |&(q, m, ell)| signs::small_ell_checks(4, q, m, ell).ok().map(|c| c.zero_ok && c.sign_ok));
    let tested = results.iter().flatten().count();
    let bad = results.iter().flatten().filter(|ok| !**ok).count();
    let zeros = cases
        .iter()
        .zip(&results)
        .filter(|(_, r)| r.is_some())
        .filter(|((q, m, ell), _)| signs::small_ell_predict(4, *q, *m, *ell).map(|p| p.trace_zero).unwrap_or(false))
        .count();
    report(
        5,
        "small-l trace vanishing and sign",
        start,
        bad == 0 && tested > 0,
        format!("{tested} (q, M, l) with Delta != 0 ({zeros} predicted zero), {bad} exceptions"),
    )
}

/// Result of the eigenspace sign scan behind criterion 6.
#[derive(Debug, Clone, Serialize)]
pub struct EigenSignScan {
    pub tested: usize,
    pub failures: Vec<u64>,
    /// Smallest `q` from which the signs hold for every later `q` in range.
    pub persistent_from: Option<u64>,
}

pub fn eigen_sign_scan(k: u32, ell: u64, lo: u64, hi: u64, exec: Exec) -> EigenSignScan {
    let qs = primes_in(lo, hi + 1);
    let rows = exec.map(&qs, |&q| {
        let delta = signs::delta_value(k, q, 1, &factor_u64(1));
        let plain = SquarefreeTraceQuery::new(k, 1, q, ell).unwrap().trace();
        let twisted = SquarefreeTraceQuery::new(k, q, 1, ell).unwrap().trace();
        if delta.is_zero() || twisted.is_zero() {
            return None;
        }
        let half = ExactValue::new(1, 2);
        let (plus, minus) = (half * (plain + twisted), half * (plain - twisted));
        Some(plus.signum() == delta.signum() && minus.signum() == -delta.signum())
    });
    let tested = rows.iter().flatten().count();
    let failures: Vec<u64> = qs.iter().zip(&rows).filter(|(_, r)| **r == Some(false)).map(|(q, _)| *q).collect();
    let persistent_from = match failures.last() {
        None => qs.first().copied(),
        Some(&last) => qs.iter().copied().find(|&q| q > last),
    };
    EigenSignScan { tested, failures, persistent_from }
}

pub fn criterion_6(opts: &VerifyOptions) -> CriterionReport {
    let start = Instant::now();
    let scan = eigen_sign_scan(4, 2, 200, 2000, opts.exec);
    let low = eigen_sign_scan(4, 2, 11, 199, opts.exec);
    let first = low.persistent_from.filter(|_| scan.failures.is_empty()).unwrap_or(scan.persistent_from.unwrap_or(0));
    report(
        6,
        "eigenspace trace signs for large q",
        start,
        scan.failures.is_empty() && scan.tested > 0,
        format!(
            "k=4, l=2, M=1: {} primes q in [200, 2000], failures {:?}; signs hold for every prime q >= {first} (from 11)",
            scan.tested, scan.failures
        ),
    )
}

/// Sample points for the weight-and-level limit at `q^2 = 25`.
pub fn r2_sample(seed: u64, n: usize) -> Vec<(u32, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let k = 2 * rng.gen_range(1..=500u32);
        let m = rng.gen_range(1..=1000u64);
        if m % 5 != 0 && k as u64 + m >= 300 {
            out.push((k, m));
        }
    }
    out
}

pub fn criterion_7(opts: &VerifyOptions) -> CriterionReport {
    let start = Instant::now();
    let ratio = |v: ExactValue, lead: ExactValue| v.to_f64() / lead.to_f64();
    let sample = r2_sample(opts.seed, 50);
    let ratios: Vec<(u32, u64, f64)> = sample
        .iter()
        .map(|&(k, m)| {
            let v = signs::delta_value(k, 5, 2, &factor_u64(m));
            (k, m, ratio(v, signs::delta_r2_asymptotics(k, 5, m, R2Regime::WeightAndLevel).unwrap()))
        })
        .collect();
    let out1: Vec<&(u32, u64, f64)> = ratios.iter().filter(|r| !(0.9..=1.1).contains(&r.2)).collect();
    let q = (10_000u64..).find(|&q| is_prime(q)).unwrap();
    let mut large_q = Vec::new();
    for k in [2u32, 4, 6] {
        for m in [1u64, 2, 3, 6] {
            let v = signs::delta_value(k, q, 2, &factor_u64(m));
            large_q.push((k, m, ratio(v, signs::delta_r2_asymptotics(k, q, m, R2Regime::LargeQ).unwrap())));
        }
    }
    let out2: Vec<&(u32, u64, f64)> = large_q.iter().filter(|r| !(0.9..=1.1).contains(&r.2)).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.2), b.max(r.2)));
    let (lo2, hi2) = large_q.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.2), b.max(r.2)));
    let show = |v: &[&(u32, u64, f64)]| v.iter().take(6).map(|(k, m, r)| format!("(k={k}, M={m}): {r:.3}")).collect::<Vec<_>>().join(", ");
    report(
        7,
        "r = 2 asymptotic ratios",
        start,
        out1.is_empty() && out2.is_empty(),
        format!(
            "q=5: 50 samples, ratios in [{lo:.3}, {hi:.3}], {} outside [0.9, 1.1]{}; q={q}: 12 cases, ratios in [{lo2:.4}, {hi2:.4}], {} outside{}",
            out1.len(),
            if out1.is_empty() { String::new() } else { format!(" e.g. {}", show(&out1)) },
            out2.len(),
            if out2.is_empty() { String::new() } else { format!(" e.g. {}", show(&out2)) },
        ),
    )
}

/// Checks that the forced twist kills `Delta` and `tr T_l W_q` for `chi(l) = 1`.
fn twist_case_vanishes(q: u64, m: u64, chis: &[TwistCharacter]) -> bool {
    let Ok(Some(chi)) = quadtwist_bijection(q, 1, m) else { return false };
    if !chis.contains(&chi) {
        return false;
    }
    [2u32, 4].iter().all(|&k| {
        signs::delta_value(k, q, 1, &factor_u64(m)).is_zero()
            && chis.iter().all(|c| {
                (2..=50u64)
                    .filter(|&l| is_prime(l) && (q * m) % l != 0 && c.eval(l as i64) == 1)
                    .all(|l| TraceQuery::new(k, q, 1, m, l).unwrap().t_new().is_zero())
            })
    })
}

pub fn criterion_8(opts: &VerifyOptions) -> CriterionReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pairs = Vec::new();
    while pairs.len() < 20 {
        let q = rng.gen_range(3..=200u64);
        let p = rng.gen_range(3..=13u64);
        if is_prime(q) && is_prime(p) && p != q && kronecker(q as i64, p as i64) == -1 && !pairs.contains(&(q, p)) {
            pairs.push((q, p));
        }
    }
    let odd = opts.exec.map(&pairs, |&(q, p)| twist_case_vanishes(q, p.pow(3), &[TwistCharacter::Odd(p)]));
    let q3: Vec<u64> = primes_in(3, 400).into_iter().filter(|q| q % 4 == 3).take(20).collect();
    let minus_one = opts.exec.map(&q3, |&q| twist_case_vanishes(q, 32, &[TwistCharacter::MinusOne]));
    let q5: Vec<u64> = primes_in(3, 800).into_iter().filter(|q| q % 8 == 5).take(20).collect();
    let two = opts.exec.map(&q5, |&q| twist_case_vanishes(q, 128, &[TwistCharacter::Two, TwistCharacter::MinusTwo]));
    let count = |v: &[bool]| v.iter().filter(|b| **b).count();
    report(
        8,
        "twist-forced vanishing",
        start,
        odd.iter().chain(&minus_one).chain(&two).all(|b| *b),
        format!(
            "p^3 with (q|p) = -1: {}/20; 2^5, q = 3 mod 4: {}/20; 2^7, q = 5 mod 8 (chi_2 and chi_-2): {}/20",
            count(&odd),
            count(&minus_one),
            count(&two)
        ),
    )
}

/// The Type I fits, the root-number cancellation and the eigenspace inversion.
pub fn criterion_9(opts: &VerifyOptions) -> CriterionReport {
    let start = Instant::now();
    let _ = ensure_table(opts.table_bound, opts.exec);
    let x = 500u64;
    let mut parts = Vec::new();
    let mut ok = true;
    for m in [1u64, 5] {
        for k in [2u32, 4] {
            let x_max = 1.0 / (4.0 * m as f64) - 0.02;
            let spec = FamilySpec::TypeI { m, omega: None };
            let summary = |x: u64| -> Result<(murmur::SqrtFit, Option<murmur::SqrtFit>), murmur::MurmurError> {
                let ells = primes_in(2, (x_max * x as f64).ceil() as u64 + 1);
                let series = murmur::scan_wq(&spec, k, &ells, x, Beta::TWO, opts.exec)?;
                let fit = murmur::sqrt_fit(&series.points, k, x_max)?;
                let lin = if k == 2 { Some(murmur::sqrt_linear_fit(&series.points, x_max)?) } else { None };
                Ok((fit, lin))
            };
            let show = |(f, lin): (murmur::SqrtFit, Option<murmur::SqrtFit>)| {
                let extra = lin.map(|l| format!(" (c sqrt(x) + d x: {:.3})", l.relative_rms())).unwrap_or_default();
                format!("{} pts, rms/range {:.3}{extra}", f.n_points, f.relative_rms())
            };
            match summary(x) {
                Ok(res) => {
                    ok &= res.0.relative_rms() < 0.1;
                    parts.push(format!("M={m} k={k}: {}", show(res)));
                }
                Err(e) => {
                    ok = false;
                    // Same fit on a longer window, for comparison only.
                    let x_big = 4000;
                    let alt = summary(x_big).map(show).unwrap_or_else(|e| e.to_string());
                    parts.push(format!("M={m} k={k}: {e} (at X={x_big}: {alt})"));
                }
            }
        }
    }
    let cancel = murmur::cancellation_diag(2, x, Beta::TWO, opts.exec);
    match &cancel {
        Ok(c) => {
            ok &= c.max_sum < 0.5 * c.max_diff;
            parts.push(format!("max|A+ + A-| / max|A+ - A-| = {:.3}", c.ratio()));
        }
        Err(e) => {
            ok = false;
            parts.push(format!("cancellation: {e}"));
        }
    }
    let mut windows = 0;
    let mut inversion_ok = true;
    for (spec, k, x3) in [("III:r=2,fixed=2,idx=2", 2u32, 400u64), ("III:r=2,fixed=,idx=1", 4, 300), ("III:r=3,fixed=,idx=1,2", 2, 300)] {
        let spec: FamilySpec = spec.parse().expect("valid spec");
        let ells = primes_in(2, 200);
        match murmur::eigenspace_windows(&spec, k, &ells, x3, Beta::TWO, opts.exec) {
            Ok(ws) => {
                windows += ws.len();
                inversion_ok &= ws.iter().all(|w| w.inversion_holds());
            }
            Err(_) => inversion_ok = false,
        }
    }
    ok &= inversion_ok;
    parts.push(format!("eigenspace inversion {} on {windows} windows", if inversion_ok { "exact" } else { "FAILED" }));
    report(9, "murmuration properties", start, ok, parts.join("; "))
}

pub fn criterion_10(_opts: &VerifyOptions) -> CriterionReport {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for r in [1u32, 3] {
        let mut values: Vec<i128> =
            (2..=100).step_by(2).map(|k| signs::delta_value(k, 5, r, &factor_u64(6)).to_integer().unwrap()).collect();
        values.sort();
        values.dedup();
        ok &= values.len() <= 2;
        parts.push(format!("r={r}: values {values:?}"));
    }
    report(10, "boundedness in k (q=5, M=6)", start, ok, parts.join("; "))
}

pub type CriterionFn = fn(&VerifyOptions) -> CriterionReport;

pub const CRITERIA: [CriterionFn; 10] = [
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
];

pub fn run_all(opts: &VerifyOptions) -> Vec<CriterionReport> {
    CRITERIA.iter().map(|c| c(opts)).collect()
}
