//! Closed forms for `tr W_q` against the full trace formula, and the
//! vanishing/sign predicates against both.

use localsign_core::arith::{factor_u64, primes_in};
use localsign_core::signs::{self, Verdict};
use localsign_core::trace::TraceQuery;

fn grid() -> Vec<(u32, u64, u32, u64)> {
    let mut out = Vec::new();
    for q in primes_in(2, 60) {
        for r in 1..=5u32 {
            if q.pow(r) > 3000 {
                continue;
            }
            for m in 1..=72u64 {
                if m % q == 0 {
                    continue;
                }
                for k in [2u32, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24] {
                    out.push((k, q, r, m));
                }
            }
        }
    }
    out
}

#[test]
fn closed_form_equals_trace_formula() {
    let mut checked = 0;
    for (k, q, r, m) in grid() {
        let d = signs::delta(k, q, r, m).unwrap();
        let t = TraceQuery::new(k, q, r, m, 1).unwrap().t_new();
        assert_eq!(d.value, t, "Delta_{k}({q}^{r}, {m})");
        checked += 1;
    }
    assert!(checked > 10_000);
}

#[test]
fn predicates_agree_with_values() {
    let mut covered = 0;
    for (k, q, r, m) in grid() {
        let d = signs::delta(k, q, r, m).unwrap();
        assert!(d.verdict.agrees_with(&d.value), "({k}, {q}^{r}, {m}): {:?} vs {}", d.verdict, d.value);
        if !matches!(d.verdict, Verdict::NotCovered { .. }) {
            covered += 1;
        }
    }
    assert!(covered > 5_000);
}

#[test]
fn eigenspace_dimensions_are_nonnegative() {
    for (k, q, r, m) in grid().into_iter().filter(|t| t.3 <= 30 && t.0 <= 12) {
        let dims = signs::eigenspace_dims(k, q, r, m).unwrap();
        assert!(dims.plus >= 0 && dims.minus >= 0, "({k}, {q}^{r}, {m}): {dims:?}");
    }
}

#[test]
fn literal_q2_statement_differs_only_where_expected() {
    // The literal statement misses levels where kappa_{-2}(M) = kappa_{-1}(M) = 0
    // and ignores the condition on primes dividing M once.
    let mut disagreements = Vec::new();
    for m in (1..=400u64).step_by(2) {
        for k in [4u32, 6, 8, 10] {
            let d = signs::delta(k, 2, 1, m).unwrap();
            if signs::literal_q2_r1_zero(k, m) != d.value.is_zero() {
                disagreements.push((k, m));
            }
        }
    }
    assert!(disagreements.contains(&(8, 15)), "{disagreements:?}");
    for &(_, m) in &disagreements {
        let f = factor_u64(m);
        assert!(f.factors().iter().any(|&(_, e)| e == 1), "M = {m}");
    }
}

#[test]
fn weight_two_exceptional_levels() {
    let zeros = |m: u64| -> Vec<u64> {
        primes_in(5, 200).into_iter().filter(|&q| signs::delta(2, q, 1, m).unwrap().value.is_zero()).collect()
    };
    assert_eq!(zeros(1), vec![5, 7, 13, 37]);
    assert_eq!(zeros(2), vec![5, 11, 13, 19, 37, 43, 67, 163]);
}

#[test]
fn small_ell_traces_follow_delta() {
    let mut checked = 0;
    for q in primes_in(11, 300) {
        for ell in primes_in(2, (q - 1) / 4 + 1).into_iter().filter(|&l| 4 * l < q) {
            for m in [1u64, 3, 5, 6, 10] {
                let Ok(c) = signs::small_ell_checks(4, q, m, ell) else { continue };
                assert!(c.zero_ok && c.sign_ok, "q={q} l={ell} M={m}: {c:?}");
                checked += 1;
            }
        }
    }
    assert!(checked > 1000, "{checked}");
}
