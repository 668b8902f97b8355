//! Weighted, Hurwitz and generalized class numbers of negative
//! discriminants, with a reduced-form oracle and a batch sieve.
//!
//! `hurwitz` goes through the multiplicative decomposition
//! `H(l^2 D0) = eta_{D0}(l) h'(D0)`, where only `h(D0)` is obtained by
//! counting forms. `hurwitz_oracle` counts every reduced form of the given
//! discriminant directly. The sieve counts all reduced forms up to a bound in
//! one pass and stores `12 H(-n)` as integers.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::arith::{factor_u64, kronecker, FactoredInt};
use crate::exact::ExactValue;
use crate::par::Exec;

/// Default bound of the batch sieve.
pub const DEFAULT_HURWITZ_BOUND: u64 = 4_000_000;

/// Largest `|delta|` accepted by the brute-force oracle.
pub const ORACLE_BOUND: u64 = DEFAULT_HURWITZ_BOUND;

/// Hard cap on sieve bounds; the table holds one `u32` per integer.
pub const MAX_SIEVE_BOUND: u64 = 1 << 31;

const CACHE_MAGIC: &[u8; 8] = b"LSHURW\0\x01";
const CACHE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ClassNumError {
    #[error("{0} is not a discriminant (must be <= 0 and congruent to 0 or 1 mod 4)")]
    NotDiscriminant(i64),
    #[error("discriminant must be negative, got {0}")]
    NotNegative(i64),
    #[error("|{delta}| exceeds the oracle bound {bound}")]
    OutOfRange { delta: i64, bound: u64 },
    #[error("t must be positive")]
    ZeroT,
    #[error("sieve bound {0} outside the supported range [4, {MAX_SIEVE_BOUND}]")]
    BadBound(u64),
    #[error("cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },
    #[error("cache {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// A discriminant `delta <= 0` with its split `delta = lambda^2 * D0`.
/// For `delta = 0` both the fundamental part and the conductor are 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Discriminant {
    delta: i64,
    fundamental: i64,
    conductor: u64,
}

impl Discriminant {
    pub fn new(delta: i64) -> Result<Self, ClassNumError> {
        if delta > 0 || !matches!(delta.rem_euclid(4), 0 | 1) {
            return Err(ClassNumError::NotDiscriminant(delta));
        }
        if delta == 0 {
            return Ok(Discriminant { delta, fundamental: 0, conductor: 0 });
        }
        let n = factor_u64(delta.unsigned_abs());
        let f = n.square_part();
        let m = (delta.unsigned_abs() / (f * f)) as i64;
        let (fundamental, conductor) = if (-m).rem_euclid(4) == 1 { (-m, f) } else { (-4 * m, f / 2) };
        Ok(Discriminant { delta, fundamental, conductor })
    }

    pub fn delta(&self) -> i64 {
        self.delta
    }

    pub fn fundamental(&self) -> i64 {
        self.fundamental
    }

    pub fn conductor(&self) -> u64 {
        self.conductor
    }

    pub fn is_fundamental(&self) -> bool {
        self.delta < 0 && self.conductor == 1
    }
}

/// True when `delta` is a negative discriminant.
pub fn is_negative_discriminant(delta: i64) -> bool {
    delta < 0 && matches!(delta.rem_euclid(4), 0 | 1)
}

/// `gamma_{D0}(lambda) = prod p^{m-1} (p - (D0|p))`.
pub fn gamma(d0: i64, lambda: &FactoredInt) -> ExactValue {
    lambda
        .factors()
        .iter()
        .map(|&(p, m)| {
            let p_i = p as i128;
            ExactValue::from_int(p_i.pow(m - 1) * (p_i - kronecker(d0, p as i64) as i128))
        })
        .fold(ExactValue::ONE, |a, b| a * b)
}

/// `eta_{D0}(lambda) = prod sigma(p^m) - (D0|p) sigma(p^{m-1})`.
pub fn eta(d0: i64, lambda: &FactoredInt) -> ExactValue {
    lambda
        .factors()
        .iter()
        .map(|&(p, m)| {
            let p_i = p as i128;
            let sigma = |j: u32| (p_i.pow(j + 1) - 1) / (p_i - 1);
            ExactValue::from_int(sigma(m) - kronecker(d0, p as i64) as i128 * sigma(m - 1))
        })
        .fold(ExactValue::ONE, |a, b| a * b)
}

/// Number of reduced primitive forms of a negative discriminant.
fn primitive_form_count(d: i64) -> u64 {
    let n = d.unsigned_abs();
    let mut count = 0u64;
    let mut a = 1u64;
    while 3 * a * a <= n {
        // b has the parity of d, -a < b <= a.
        let mut b = (n % 2) as i64;
        while b <= a as i64 {
            let num = b as u64 * b as u64 + n;
            if num % (4 * a) == 0 {
                let c = num / (4 * a);
                if c >= a && num_integer::gcd(num_integer::gcd(a, b as u64), c) == 1 {
                    let both_signs = b != 0 && b as u64 != a && c != a;
                    count += if both_signs { 2 } else { 1 };
                }
            }
            b += 2;
        }
        a += 1;
    }
    count
}

fn h_prime_fundamental(d0: i64) -> ExactValue {
    match d0 {
        -3 => ExactValue::new(1, 3),
        -4 => ExactValue::new(1, 2),
        _ => ExactValue::from_int(primitive_form_count(d0) as i128),
    }
}

/// The weighted class number of primitive forms, `h'(delta)`.
pub fn h_prime(delta: i64) -> Result<ExactValue, ClassNumError> {
    let d = Discriminant::new(delta)?;
    if delta == 0 {
        return Err(ClassNumError::NotNegative(delta));
    }
    Ok(gamma(d.fundamental, &factor_u64(d.conductor)) * h_prime_fundamental(d.fundamental))
}

/// The Hurwitz class number `H(delta)`, with `H(0) = -1/12`.
pub fn hurwitz(delta: i64) -> Result<ExactValue, ClassNumError> {
    Discriminant::new(delta)?;
    if delta == 0 {
        return Ok(ExactValue::new(-1, 12));
    }
    if let Some(v) = installed_table().and_then(|t| t.get(delta.unsigned_abs())) {
        return Ok(v);
    }
    hurwitz_by_conductor(delta)
}

/// `H(delta) = eta(lambda) h'(delta_0)`, never consulting the sieve table.
pub fn hurwitz_by_conductor(delta: i64) -> Result<ExactValue, ClassNumError> {
    let d = Discriminant::new(delta)?;
    if delta == 0 {
        return Ok(ExactValue::new(-1, 12));
    }
    Ok(eta(d.fundamental, &factor_u64(d.conductor)) * h_prime_fundamental(d.fundamental))
}

/// `H(delta)` extended by zero to integers that are not discriminants
/// (including positive ones).
pub fn hurwitz_or_zero(delta: i64) -> ExactValue {
    if delta == 0 || is_negative_discriminant(delta) {
        hurwitz(delta).expect("valid discriminant")
    } else {
        ExactValue::ZERO
    }
}

/// The generalized class number `H_t(delta)`.
pub fn hurwitz_t(t: u64, delta: i64) -> Result<ExactValue, ClassNumError> {
    if t == 0 {
        return Err(ClassNumError::ZeroT);
    }
    Discriminant::new(delta)?;
    Ok(hurwitz_t_unchecked(t, delta))
}

/// `H_t` for callers that already know `delta` is a discriminant or zero.
pub(crate) fn hurwitz_t_unchecked(t: u64, delta: i64) -> ExactValue {
    if t == 1 {
        return hurwitz_or_zero(delta);
    }
    if delta == 0 {
        return ExactValue::new(-(t as i128), 12);
    }
    let g = num_integer::gcd(t, delta.unsigned_abs());
    let gf = factor_u64(g);
    let b: u64 = gf.factors().iter().filter(|&&(_, e)| e % 2 == 1).map(|&(p, _)| p).product();
    let delta_p = delta / g as i64;
    if delta_p % b as i64 != 0 {
        return ExactValue::ZERO;
    }
    let d = delta_p / b as i64;
    let t_p = t / g;
    let chi = kronecker(d, t_p as i64);
    if chi == 0 {
        return ExactValue::ZERO;
    }
    hurwitz_or_zero(d).scale(g as i128 * chi as i128)
}

/// Brute-force Hurwitz class number: counts every reduced form of
/// discriminant `delta`, weighting multiples of `x^2+y^2` by 1/2 and of
/// `x^2+xy+y^2` by 1/3.
pub fn hurwitz_oracle(delta: i64) -> Result<ExactValue, ClassNumError> {
    if delta >= 0 {
        return Err(ClassNumError::NotNegative(delta));
    }
    if delta.unsigned_abs() > ORACLE_BOUND {
        return Err(ClassNumError::OutOfRange { delta, bound: ORACLE_BOUND });
    }
    Discriminant::new(delta)?;
    let n = delta.unsigned_abs();
    let mut twelfths = 0i128;
    let mut a = 1u64;
    while 3 * a * a <= n {
        for b in 0..=a {
            let num = b * b + n;
            if num % (4 * a) != 0 {
                continue;
            }
            let c = num / (4 * a);
            if c < a {
                continue;
            }
            twelfths += form_weight_twelfths(a, b, c) as i128;
        }
        a += 1;
    }
    Ok(ExactValue::new(twelfths, 12))
}

/// Weight, in twelfths, of the reduced forms `(a, +-b, c)` with `b >= 0`.
fn form_weight_twelfths(a: u64, b: u64, c: u64) -> u32 {
    match (b == 0, b == a, a == c) {
        (true, _, true) => 6,
        (_, true, true) => 4,
        (true, _, false) | (_, true, false) => 12,
        (false, false, true) => 12,
        (false, false, false) => 24,
    }
}

/// `12 H(-n)` for all `0 <= n <= bound`, stored as integers. Entries with
/// `n` not congruent to 0 or 3 mod 4 are zero; entry 0 is unused.
#[derive(Clone, PartialEq, Eq)]
pub struct HurwitzTable {
    bound: u64,
    twelve_h: Vec<u32>,
}

impl std::fmt::Debug for HurwitzTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HurwitzTable").field("bound", &self.bound).finish()
    }
}

impl HurwitzTable {
    /// One pass over all reduced forms with `|disc| <= bound`. The a-range
    /// is split into chunks with private tables that are summed afterwards.
    pub fn build(bound: u64, exec: Exec) -> Result<Self, ClassNumError> {
        if !(4..=MAX_SIEVE_BOUND).contains(&bound) {
            return Err(ClassNumError::BadBound(bound));
        }
        let a_max = ((bound / 3) as f64).sqrt() as u64 + 1;
        let ranges = split_by_work(a_max, bound, exec.chunks());
        let partials = exec.map(&ranges, |&(lo, hi)| {
            let mut table = vec![0u32; bound as usize + 1];
            for a in lo..hi {
                sieve_row(a, bound, &mut table);
            }
            table
        });
        let mut partials = partials.into_iter();
        let mut twelve_h = partials.next().unwrap_or_else(|| vec![0u32; bound as usize + 1]);
        for part in partials {
            for (x, y) in twelve_h.iter_mut().zip(part) {
                *x += y;
            }
        }
        Ok(HurwitzTable { bound, twelve_h })
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    /// `H(-n)` for `1 <= n <= bound`.
    pub fn get(&self, n: u64) -> Option<ExactValue> {
        (n >= 1 && n <= self.bound).then(|| ExactValue::new(self.twelve_h[n as usize] as i128, 12))
    }

    /// Pairs `(n, H(-n))` for the discriminants in range.
    pub fn entries(&self) -> impl Iterator<Item = (u64, ExactValue)> + '_ {
        (1..=self.bound).filter(|n| n % 4 == 0 || n % 4 == 3).map(|n| (n, self.get(n).unwrap()))
    }

    fn payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.twelve_h.len() * 4);
        for v in &self.twelve_h {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Writes the cache file: magic, version, bound, SHA-256 of the payload,
    /// then the payload of little-endian `u32` values indexed by `n`.
    pub fn save(&self, path: &Path) -> Result<(), ClassNumError> {
        let io_err = |source| ClassNumError::Io { path: path.to_path_buf(), source };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err)?;
        }
        let payload = self.payload();
        let digest = Sha256::digest(&payload);
        let mut file = io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
        file.write_all(CACHE_MAGIC).map_err(io_err)?;
        file.write_all(&CACHE_VERSION.to_le_bytes()).map_err(io_err)?;
        file.write_all(&self.bound.to_le_bytes()).map_err(io_err)?;
        file.write_all(digest.as_slice()).map_err(io_err)?;
        file.write_all(&payload).map_err(io_err)?;
        file.flush().map_err(io_err)
    }

    /// Reads and validates a cache file. With `expected_bound`, a file built
    /// for a different bound is rejected.
    pub fn load(path: &Path, expected_bound: Option<u64>) -> Result<Self, ClassNumError> {
        let bytes = fs::read(path).map_err(|source| ClassNumError::Io { path: path.to_path_buf(), source })?;
        let bad = |reason: &str| ClassNumError::Cache { path: path.to_path_buf(), reason: reason.to_string() };
        let header = 8 + 4 + 8 + 32;
        if bytes.len() < header || &bytes[..8] != CACHE_MAGIC {
            return Err(bad("not a class number cache"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let bound = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        if let Some(b) = expected_bound {
            if b != bound {
                return Err(bad(&format!("built for bound {bound}, expected {b}")));
            }
        }
        if !(4..=MAX_SIEVE_BOUND).contains(&bound) {
            return Err(bad(&format!("bound {bound} out of range")));
        }
        let payload = &bytes[header..];
        if payload.len() as u64 != (bound + 1) * 4 {
            return Err(bad("truncated payload"));
        }
        if Sha256::digest(payload).as_slice() != &bytes[20..52] {
            return Err(bad("checksum mismatch"));
        }
        let twelve_h = payload.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(HurwitzTable { bound, twelve_h })
    }

    /// Loads the cache when it is valid for `bound`, otherwise builds the
    /// table and rewrites the cache.
    pub fn load_or_build(path: &Path, bound: u64, exec: Exec) -> Result<Self, ClassNumError> {
        match Self::load(path, Some(bound)) {
            Ok(t) => Ok(t),
            Err(_) => {
                let t = Self::build(bound, exec)?;
                t.save(path)?;
                Ok(t)
            }
        }
    }
}

fn sieve_row(a: u64, bound: u64, table: &mut [u32]) {
    for b in 0..=a {
        let mut c = a;
        loop {
            let n = 4 * a * c - b * b;
            if n > bound {
                break;
            }
            if n > 0 {
                table[n as usize] += form_weight_twelfths(a, b, c);
            }
            c += 1;
        }
    }
}

/// Splits `1..=a_max` into contiguous ranges of roughly equal sieve work.
/// The work of row `a` is about `a * (bound / 4a) = bound / 4`, so rows are
/// uniform and equal-length ranges suffice.
fn split_by_work(a_max: u64, _bound: u64, chunks: usize) -> Vec<(u64, u64)> {
    let chunks = (chunks as u64).clamp(1, a_max.max(1));
    let step = a_max.div_ceil(chunks);
    (0..chunks)
        .map(|i| (1 + i * step, (1 + (i + 1) * step).min(a_max + 1)))
        .filter(|(lo, hi)| lo < hi)
        .collect()
}

static TABLE: OnceLock<HurwitzTable> = OnceLock::new();

/// Makes a table the process-wide source for `hurwitz`. Only the first
/// installation takes effect; returns whether this one did.
pub fn install_table(table: HurwitzTable) -> bool {
    TABLE.set(table).is_ok()
}

pub fn installed_table() -> Option<&'static HurwitzTable> {
    TABLE.get()
}

/// Ensures a table of at least `bound` is installed, building it if needed.
pub fn ensure_table(bound: u64, exec: Exec) -> Result<&'static HurwitzTable, ClassNumError> {
    if let Some(t) = TABLE.get() {
        return Ok(t);
    }
    let t = HurwitzTable::build(bound, exec)?;
    let _ = TABLE.set(t);
    Ok(TABLE.get().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(n: i128, d: i128) -> ExactValue {
        ExactValue::new(n, d)
    }

    #[test]
    fn discriminant_split() {
        let d = Discriminant::new(-36).unwrap();
        assert_eq!((d.fundamental(), d.conductor()), (-4, 3));
        let d = Discriminant::new(-44).unwrap();
        assert_eq!((d.fundamental(), d.conductor()), (-11, 2));
        let d = Discriminant::new(-8 * 9).unwrap();
        assert_eq!((d.fundamental(), d.conductor()), (-8, 3));
        assert!(Discriminant::new(-23).unwrap().is_fundamental());
        assert!(Discriminant::new(-5).is_err());
        assert!(Discriminant::new(4).is_err());
    }

    #[test]
    fn h_prime_examples() {
        assert_eq!(h_prime(-3).unwrap(), ev(1, 3));
        assert_eq!(h_prime(-4).unwrap(), ev(1, 2));
        assert_eq!(h_prime(-36).unwrap(), ev(2, 1));
        assert!(h_prime(0).is_err());
        assert!(h_prime(-2).is_err());
    }

    #[test]
    fn hurwitz_examples() {
        assert_eq!(hurwitz(-7).unwrap(), ev(1, 1));
        assert_eq!(hurwitz(-20).unwrap(), ev(2, 1));
        assert_eq!(hurwitz(-427).unwrap(), ev(2, 1));
        assert_eq!(hurwitz(-12).unwrap(), ev(4, 3));
        assert_eq!(hurwitz(0).unwrap(), ev(-1, 12));
        assert!(hurwitz(-6).is_err());
        for d in [-7, -8, -11, -19, -43, -67, -163] {
            assert_eq!(hurwitz(d).unwrap(), ExactValue::ONE, "H({d})");
        }
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(hurwitz_oracle(-3).unwrap(), ev(1, 3));
        assert_eq!(hurwitz_oracle(-4).unwrap(), ev(1, 2));
        assert_eq!(hurwitz_oracle(-23).unwrap(), ev(3, 1));
        assert_eq!(hurwitz_oracle(-20).unwrap(), ev(2, 1));
        assert_eq!(hurwitz_oracle(-36).unwrap(), hurwitz(-36).unwrap());
        assert!(hurwitz_oracle(0).is_err());
        assert!(hurwitz_oracle(-(ORACLE_BOUND as i64) - 4).is_err());
    }

    #[test]
    fn hurwitz_t_cases() {
        assert_eq!(hurwitz_t(5, 0).unwrap(), ev(-5, 12));
        // (1/2)(-2(k-1)) H_t(0) = (k-1) t / 12 for every k.
        for k in [2i128, 4, 12] {
            let lhs = ev(1, 2) * ExactValue::from_int(-2 * (k - 1)) * hurwitz_t(5, 0).unwrap();
            assert_eq!(lhs, ev((k - 1) * 5, 12));
        }
        // t odd and coprime to delta = -4 q^r l.
        let (qrl, t) = (11i64, 3u64);
        assert_eq!(hurwitz_t(t, -4 * qrl).unwrap(), hurwitz(-4 * qrl).unwrap().scale(kronecker(-qrl, 3) as i128));
        // t = 2 mod 4.
        let t = 6u64;
        assert_eq!(hurwitz_t(t, -4 * qrl).unwrap(), hurwitz(-qrl).unwrap().scale(2 * kronecker(-qrl, 3) as i128));
        assert_eq!(hurwitz_t(1, -23).unwrap(), hurwitz(-23).unwrap());
        assert!(hurwitz_t(0, -3).is_err());
    }

    #[test]
    fn sieve_small_bounds() {
        let t = HurwitzTable::build(8, Exec::Sequential).unwrap();
        let got: Vec<(u64, ExactValue)> = t.entries().collect();
        assert_eq!(got, vec![(3, ev(1, 3)), (4, ev(1, 2)), (7, ev(1, 1)), (8, ev(1, 1))]);
        let t = HurwitzTable::build(4, Exec::Sequential).unwrap();
        assert_eq!(t.entries().collect::<Vec<_>>(), vec![(3, ev(1, 3)), (4, ev(1, 2))]);
        assert!(HurwitzTable::build(3, Exec::Sequential).is_err());
    }

    #[test]
    fn sieve_matches_pointwise_and_modes_agree() {
        let seq = HurwitzTable::build(3000, Exec::Sequential).unwrap();
        let par = HurwitzTable::build(3000, Exec::Parallel).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq.get(427), Some(ev(2, 1)));
        for (n, h) in seq.entries() {
            assert_eq!(h, hurwitz_oracle(-(n as i64)).unwrap(), "n = {n}");
        }
    }

    #[test]
    fn cache_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.bin");
        let t = HurwitzTable::build(500, Exec::Sequential).unwrap();
        t.save(&path).unwrap();
        assert_eq!(HurwitzTable::load(&path, Some(500)).unwrap(), t);
        assert!(HurwitzTable::load(&path, Some(400)).is_err());
        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        fs::write(&path, &bytes).unwrap();
        let err = HurwitzTable::load(&path, None).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
        let rebuilt = HurwitzTable::load_or_build(&path, 500, Exec::Sequential).unwrap();
        assert_eq!(rebuilt, t);
        assert!(HurwitzTable::load(&path, Some(500)).is_ok());
    }
}
