//! Forced twist bijections against computed traces.

use localsign_core::arith::{is_prime, kronecker, primes_in};
use localsign_core::signs;
use localsign_core::trace::TraceQuery;
use localsign_core::twist::{quadtwist_bijection, TwistCharacter};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_vanishing(q: u64, r: u32, m: u64, chis: &[TwistCharacter]) {
    let chi = quadtwist_bijection(q, r, m).unwrap().unwrap_or_else(|| panic!("no twist for q={q} r={r} M={m}"));
    assert!(chis.contains(&chi));
    for k in [2u32, 4, 6] {
        assert!(signs::delta(k, q, r, m).unwrap().value.is_zero(), "Delta_{k}({q}^{r}, {m})");
        for &chi in chis {
            for ell in (2..=50u64).filter(|&l| is_prime(l) && (q * m) % l != 0 && chi.eval(l as i64) == 1) {
                let t = TraceQuery::new(k, q, r, m, ell).unwrap().t_new();
                assert!(t.is_zero(), "tr T_{ell} W_{q} on S_{k}^new({q}^{r} {m}) = {t} ({chi})");
            }
        }
    }
}

#[test]
fn odd_prime_cube() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut pairs: Vec<(u64, u64)> = Vec::new();
    for q in primes_in(3, 60) {
        for p in primes_in(3, 12) {
            if p != q && kronecker(q as i64, p as i64) == -1 {
                pairs.push((q, p));
            }
        }
    }
    pairs.shuffle(&mut rng);
    for &(q, p) in pairs.iter().take(20) {
        check_vanishing(q, 1, p.pow(3), &[TwistCharacter::Odd(p)]);
    }
}

#[test]
fn two_adic_cases() {
    let q3: Vec<u64> = primes_in(3, 200).into_iter().filter(|q| q % 4 == 3).take(20).collect();
    for q in q3 {
        check_vanishing(q, 1, 32, &[TwistCharacter::MinusOne]);
    }
    let q5: Vec<u64> = primes_in(3, 400).into_iter().filter(|q| q % 8 == 5).take(20).collect();
    for q in q5 {
        check_vanishing(q, 1, 128, &[TwistCharacter::Two, TwistCharacter::MinusTwo]);
    }
}
