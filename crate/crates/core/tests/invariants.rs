//! Property tests for the arithmetic, class number, trace and twist layers.

use proptest::prelude::*;

use localsign_core::arith::{self, factor_u64, kronecker, mobius_squared_transform, MultiplicativeFn};
use localsign_core::classnum::{self, Discriminant};
use localsign_core::murmur::{self, Beta, FamilySpec, MurmurationPoint};
use localsign_core::trace::{SquarefreeTraceQuery, TraceQuery};
use localsign_core::twist::{kappa_away, TwistCharacter};
use localsign_core::{Exec, ExactValue};

fn odd_coprime_pair() -> impl Strategy<Value = (i64, i64)> {
    (1i64..500_000, 1i64..500_000)
        .prop_map(|(a, b)| (2 * a + 1, 2 * b + 1))
        .prop_filter("coprime", |&(a, b)| num_integer::Integer::gcd(&a, &b) == 1)
}

/// `(q, r, M)` with `q` prime, `M` coprime to `q` and `q^r M <= 2000`.
fn level_strategy() -> impl Strategy<Value = (u64, u32, u64)> {
    (prop::sample::select(arith::primes_in(2, 50)), 1u32..4)
        .prop_filter("q^r <= 1000", |&(q, r)| q.pow(r) <= 1000)
        .prop_flat_map(|(q, r)| (Just(q), Just(r), 1..=2000 / q.pow(r)))
        .prop_map(|(q, r, m)| (q, r, if m % q == 0 { m - 1 } else { m }))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn quadratic_reciprocity((a, b) in odd_coprime_pair()) {
        let sign = if (a % 4 == 3) && (b % 4 == 3) { -1 } else { 1 };
        prop_assert_eq!(kronecker(a, b) * kronecker(b, a), sign);
    }

    #[test]
    fn factoring_respects_products(a in 1u64..1_000_000, b in 1u64..1_000_000) {
        prop_assert_eq!(factor_u64(a).mul(&factor_u64(b)), factor_u64(a * b));
    }

    #[test]
    fn hurwitz_t_one_is_hurwitz(n in 1i64..200_000) {
        let delta = -n;
        prop_assume!(classnum::is_negative_discriminant(delta));
        prop_assert_eq!(classnum::hurwitz_t(1, delta).unwrap(), classnum::hurwitz(delta).unwrap());
    }

    #[test]
    fn kappa_away_is_a_sign_with_parity_law(qi in 0usize..40, r in 1u32..9, p in prop::sample::select(vec![3u64, 5, 7, 11, 13])) {
        let q = arith::primes_in(3, 200)[qi];
        prop_assume!(q != p);
        for chi in [TwistCharacter::Odd(p), TwistCharacter::MinusOne, TwistCharacter::Two, TwistCharacter::MinusTwo] {
            let v = kappa_away(q, r, chi).unwrap();
            prop_assert_eq!(v * v, 1);
            prop_assert_eq!(v, kappa_away(q, 1, chi).unwrap().pow(r));
        }
    }

    #[test]
    fn traces_are_integers((q, r, m) in level_strategy(), half_k in 1u32..7, ell in prop::sample::select(vec![1u64, 2, 3, 5])) {
        let k = 2 * half_k;
        prop_assume!(ell == 1 || (q * m) % ell != 0);
        let t = TraceQuery::new(k, q, r, m, ell).unwrap().t_new();
        prop_assert!(t.is_integer(), "t_new({k}, {q}^{r}, {m}, {ell}) = {t}");
        if r == 1 && factor_u64(q * m).is_squarefree() {
            let s = SquarefreeTraceQuery::new(k, q, m, ell).unwrap().trace();
            prop_assert_eq!(s, t);
        }
    }
}

/// Full-space quantities are `sum_{d | M} sigma_0(M/d) f(d)`, i.e. `1 * 1 * f`.
#[test]
fn newspace_transform_inverts_divisor_sums() {
    let one = MultiplicativeFn::one();
    for f in [MultiplicativeFn::mobius(), MultiplicativeFn::sigma0(), MultiplicativeFn::identity()] {
        let g = arith::dirichlet_convolve(&one, &arith::dirichlet_convolve(&one, &f));
        for m in 1..=10_000u64 {
            let n = factor_u64(m);
            assert_eq!(mobius_squared_transform(|d| g.eval(d), &n), f.eval(&n), "M = {m}");
        }
    }
}

#[test]
fn class_numbers_scale_with_conductor() {
    for d0 in (-200i64..0).filter(|&d| Discriminant::new(d).map(|x| x.is_fundamental()).unwrap_or(false)) {
        let h0 = classnum::h_prime(d0).unwrap();
        for lambda in 1..=30i64 {
            let lf = factor_u64(lambda as u64);
            let delta = lambda * lambda * d0;
            assert_eq!(classnum::hurwitz_oracle(delta).unwrap(), classnum::eta(d0, &lf) * h0, "H({delta})");
            assert_eq!(classnum::h_prime(delta).unwrap(), classnum::gamma(d0, &lf) * h0, "h'({delta})");
        }
    }
}

#[test]
fn hurwitz_four_q_identity() {
    for q in arith::primes_in(3, 2000) {
        let mut qr = q as i64;
        while qr <= 2000 {
            if (-qr).rem_euclid(4) == 1 {
                let factor = ExactValue::from(3 - kronecker(-qr, 2) as i64);
                assert_eq!(classnum::hurwitz(-4 * qr).unwrap(), factor * classnum::hurwitz(-qr).unwrap(), "q^r = {qr}");
            }
            qr *= q as i64;
        }
    }
}

/// Linear interpolation of a series at `x`.
fn interpolate(points: &[MurmurationPoint], x: f64) -> Option<f64> {
    let i = points.iter().position(|p| p.x >= x)?;
    if i == 0 {
        return None;
    }
    let (a, b) = (points[i - 1], points[i]);
    Some(a.avg + (b.avg - a.avg) * (x - a.x) / (b.x - a.x))
}

#[test]
fn murmurations_are_roughly_scale_invariant() {
    classnum::ensure_table(classnum::DEFAULT_HURWITZ_BOUND, Exec::Parallel).unwrap();
    let spec = FamilySpec::TypeI { m: 1, omega: None };
    let scan = |x: u64| {
        let ells = arith::primes_in(2, 2 * x);
        let s = murmur::scan_wq(&spec, 2, &ells, x, Beta::TWO, Exec::Parallel).unwrap();
        murmur::smooth(&s.points, 0.75).into_iter().map(|p| p.point).collect::<Vec<_>>()
    };
    let (small, large) = (scan(250), scan(500));
    let grid: Vec<f64> = (1..40).map(|i| 0.05 * i as f64).collect();
    let pairs: Vec<(f64, f64)> =
        grid.iter().filter_map(|&x| Some((interpolate(&small, x)?, interpolate(&large, x)?))).collect();
    assert!(pairs.len() > 30);
    let rms = |v: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = v.collect();
        (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
    };
    let diff = rms(&mut pairs.iter().map(|(a, b)| a - b));
    let size = rms(&mut pairs.iter().map(|(_, b)| *b));
    assert!(diff < 0.25 * size, "rms difference {diff} vs rms {size}");
}
