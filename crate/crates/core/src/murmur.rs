//! Murmuration averages of `l^{1-k/2} a_l(f)` over families of levels.
//!
//! A family is a sequence of pairs `(N, Q)` with `Q | N` (see [`FamilySpec`]);
//! for a window `X <= N <= beta X` the average is
//!
//! ```text
//! A(l, X) = sum'_N sqrt(N/Q) l^{1-k/2} tr_{S_k^new(N)} T_l W_Q / sum'_N dim S_k^new(N)
//! ```
//!
//! where the primed sums run over levels coprime to `l`. Traces and dimensions
//! are exact; floating point enters only through `sqrt(N/Q)` and the final
//! division.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arith::{factor_u64, is_prime, primes_in, FactoredInt};
use crate::exact::ExactValue;
use crate::par::Exec;
use crate::signs::newspace_dim;
use crate::trace::{hecke_trace_new, SquarefreeTraceQuery, TraceQuery};

#[derive(Debug, thiserror::Error)]
pub enum MurmurError {
    #[error("invalid family spec: {0}")]
    InvalidSpec(String),
    #[error("invalid beta {0:?}: expected a rational number > 1 such as 2 or 3/2")]
    InvalidBeta(String),
    #[error("invalid sign vector {0:?}: expected a string of + and -")]
    InvalidSigns(String),
    #[error("window [{lo}, {hi}] contains no levels of the family")]
    EmptyWindow { lo: u64, hi: u64 },
    #[error("every requested l divides all levels in the window, or no primes requested")]
    NoPoints,
    #[error("need at least 8 points for a fit, got {0}")]
    TooFewPoints(usize),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {reason}")]
    Csv { path: String, reason: String },
}

/// The ratio `beta > 1` bounding a window `[X, beta X]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Beta {
    num: u64,
    den: u64,
}

impl Beta {
    pub const TWO: Beta = Beta { num: 2, den: 1 };

    pub fn new(num: u64, den: u64) -> Option<Beta> {
        if den == 0 || num <= den {
            return None;
        }
        let g = num_integer::gcd(num, den);
        Some(Beta { num: num / g, den: den / g })
    }

    /// `floor(beta x)`.
    pub fn upper(&self, x: u64) -> u64 {
        (x as u128 * self.num as u128 / self.den as u128) as u64
    }
}

impl Default for Beta {
    fn default() -> Self {
        Beta::TWO
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Beta {
    type Err = MurmurError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MurmurError::InvalidBeta(s.to_string());
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
            None => (s.trim().parse().map_err(|_| bad())?, 1),
        };
        Beta::new(n, d).ok_or_else(bad)
    }
}

impl TryFrom<String> for Beta {
    type Error = MurmurError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Beta> for String {
    fn from(b: Beta) -> String {
        b.to_string()
    }
}

/// Which `M` a type II family runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LevelSet {
    All,
    Squarefree,
    /// Squarefree with exactly this many prime factors.
    SquarefreeOmega(u32),
}

impl LevelSet {
    fn contains(&self, m: &FactoredInt) -> bool {
        match *self {
            LevelSet::All => true,
            LevelSet::Squarefree => m.is_squarefree(),
            LevelSet::SquarefreeOmega(r) => m.is_squarefree() && m.omega() == r,
        }
    }
}

/// An arithmetically compatible family of pairs `(N, Q)`.
///
/// String form:
/// * `I:M=<m>[,omega=<r>]`: `N = QM`, `Q` squarefree coprime to `M` (with `omega(Q) = r`).
/// * `II:Q=<q>,M=<all|sqf|sqf<r>>`: `N = QM`, `M` coprime to `Q`.
/// * `III:r=<r>,fixed=<p1,...>,idx=<i1,...>`: `N = p_1 ... p_r` squarefree with
///   `p_1 < ... < p_r`, the first primes fixed, and `Q` the product of the `p_i`
///   at the listed (1-based) indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum FamilySpec {
    TypeI { m: u64, omega: Option<u32> },
    TypeII { q: u64, m_set: LevelSet },
    TypeIII { r: u32, fixed: Vec<u64>, idx: Vec<usize> },
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[String]| v.join(",");
        match self {
            FamilySpec::TypeI { m, omega: None } => write!(f, "I:M={m}"),
            FamilySpec::TypeI { m, omega: Some(r) } => write!(f, "I:M={m},omega={r}"),
            FamilySpec::TypeII { q, m_set } => {
                let set = match m_set {
                    LevelSet::All => "all".to_string(),
                    LevelSet::Squarefree => "sqf".to_string(),
                    LevelSet::SquarefreeOmega(r) => format!("sqf{r}"),
                };
                write!(f, "II:Q={q},M={set}")
            }
            FamilySpec::TypeIII { r, fixed, idx } => write!(
                f,
                "III:r={r},fixed={},idx={}",
                join(&fixed.iter().map(u64::to_string).collect::<Vec<_>>()),
                join(&idx.iter().map(usize::to_string).collect::<Vec<_>>())
            ),
        }
    }
}

impl FromStr for FamilySpec {
    type Err = MurmurError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| MurmurError::InvalidSpec(format!("{s:?}: {why}"));
        let (kind, rest) = s.split_once(':').ok_or_else(|| bad("missing type prefix"))?;
        // key=value pairs; bare tokens continue the previous key's list.
        let mut fields: Vec<(String, Vec<String>)> = Vec::new();
        for tok in rest.split(',') {
            let tok = tok.trim();
            match tok.split_once('=') {
                Some((key, val)) => {
                    let vals = if val.is_empty() { vec![] } else { vec![val.to_string()] };
                    fields.push((key.trim().to_string(), vals));
                }
                None if tok.is_empty() => {}
                None => fields.last_mut().ok_or_else(|| bad("value before any key"))?.1.push(tok.to_string()),
            }
        }
        let get = |key: &str| fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
        let one = |key: &str| -> Result<Option<u64>, MurmurError> {
            match get(key) {
                None => Ok(None),
                Some(v) if v.len() == 1 => v[0].parse().map(Some).map_err(|_| bad(&format!("{key} is not a number"))),
                Some(_) => Err(bad(&format!("{key} takes one value"))),
            }
        };
        let known: &[&str] = match kind {
            "I" => &["M", "omega"],
            "II" => &["Q", "M"],
            "III" => &["r", "fixed", "idx"],
            _ => return Err(bad("type must be I, II or III")),
        };
        if let Some((k, _)) = fields.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            return Err(bad(&format!("unknown key {k}")));
        }
        let spec = match kind {
            "I" => FamilySpec::TypeI {
                m: one("M")?.ok_or_else(|| bad("missing M"))?,
                omega: one("omega")?.map(|r| r as u32),
            },
            "II" => {
                let set = get("M").ok_or_else(|| bad("missing M"))?;
                let m_set = match set.as_slice() {
                    [s] if s == "all" => LevelSet::All,
                    [s] if s == "sqf" => LevelSet::Squarefree,
                    [s] if s.starts_with("sqf") => {
                        LevelSet::SquarefreeOmega(s[3..].trim_start_matches('_').parse().map_err(|_| bad("bad M set"))?)
                    }
                    _ => return Err(bad("M must be all, sqf or sqf<r>")),
                };
                FamilySpec::TypeII { q: one("Q")?.ok_or_else(|| bad("missing Q"))?, m_set }
            }
            _ => {
                let list = |key: &str| -> Result<Vec<u64>, MurmurError> {
                    get(key)
                        .unwrap_or_default()
                        .iter()
                        .map(|v| v.parse().map_err(|_| bad(&format!("{key} entries must be numbers"))))
                        .collect()
                };
                FamilySpec::TypeIII {
                    r: one("r")?.ok_or_else(|| bad("missing r"))? as u32,
                    fixed: list("fixed")?,
                    idx: list("idx")?.into_iter().map(|i| i as usize).collect(),
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// One level of a family: `N = QM`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Level {
    pub n: FactoredInt,
    pub q: FactoredInt,
    pub m: FactoredInt,
}

impl Level {
    /// `tr T_l W_Q` on `S_k^new(N)`; `l = 1` gives `tr W_Q`.
    pub fn trace(&self, k: u32, ell: u64) -> ExactValue {
        level_trace(k, &self.q, &self.m, ell)
    }
}

fn level_trace(k: u32, q: &FactoredInt, m: &FactoredInt, ell: u64) -> ExactValue {
    if q.mul(m).is_squarefree() {
        return SquarefreeTraceQuery::new(k, q.value(), m.value(), ell).expect("valid squarefree query").trace();
    }
    match q.factors() {
        [] => hecke_trace_new(k, m.value(), ell).expect("valid query"),
        [(p, 1)] => TraceQuery::new(k, *p, 1, m.value(), ell).expect("valid query").t_new(),
        _ => unreachable!("validated family"),
    }
}

impl FamilySpec {
    pub fn validate(&self) -> Result<(), MurmurError> {
        let bad = |why: String| Err(MurmurError::InvalidSpec(format!("{self}: {why}")));
        match self {
            FamilySpec::TypeI { m, omega } => {
                if *m == 0 || !factor_u64(*m).is_squarefree() {
                    return bad("M must be squarefree".into());
                }
                if *omega == Some(0) && *m == 1 {
                    return bad("omega = 0 with M = 1 gives only N = 1".into());
                }
            }
            FamilySpec::TypeII { q, m_set } => {
                let qf = factor_u64(*q);
                if *q == 0 || !qf.is_squarefree() {
                    return bad("Q must be squarefree".into());
                }
                if *m_set == LevelSet::All && qf.omega() > 1 {
                    return bad("M = all needs Q = 1 or Q prime".into());
                }
            }
            FamilySpec::TypeIII { r, fixed, idx } => {
                if *r < 2 {
                    return bad("r must be at least 2".into());
                }
                if fixed.len() >= *r as usize {
                    return bad("fewer than r primes may be fixed".into());
                }
                if fixed.iter().any(|&p| !is_prime(p)) || fixed.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("fixed primes must be increasing primes".into());
                }
                if idx.len() >= *r as usize {
                    return bad("Q must use fewer than r of the primes".into());
                }
                if idx.iter().any(|&i| i == 0 || i > *r as usize) || idx.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("idx must be increasing indices in 1..=r".into());
                }
            }
        }
        Ok(())
    }

    pub fn r(&self) -> Option<u32> {
        match self {
            FamilySpec::TypeIII { r, .. } => Some(*r),
            _ => None,
        }
    }

    /// Levels of the family with `lo <= N <= hi`, by increasing `N`.
    pub fn levels(&self, lo: u64, hi: u64) -> Vec<Level> {
        let lo = lo.max(1);
        let mut out = Vec::new();
        match self {
            FamilySpec::TypeI { m, omega } => {
                let mf = factor_u64(*m);
                for q in lo.div_ceil(*m)..=hi / m {
                    let qf = factor_u64(q);
                    if qf.is_squarefree() && mf.is_coprime_to(q) && omega.is_none_or(|r| qf.omega() == r) {
                        out.push(Level { n: qf.mul(&mf), q: qf, m: mf.clone() });
                    }
                }
            }
            FamilySpec::TypeII { q, m_set } => {
                let qf = factor_u64(*q);
                for m in lo.div_ceil(*q)..=hi / q {
                    let mf = factor_u64(m);
                    if m_set.contains(&mf) && qf.is_coprime_to(m) {
                        out.push(Level { n: qf.mul(&mf), q: qf.clone(), m: mf });
                    }
                }
            }
            FamilySpec::TypeIII { r, fixed, idx } => {
                for n in lo..=hi {
                    let nf = factor_u64(n);
                    if !nf.is_squarefree() || nf.omega() != *r {
                        continue;
                    }
                    let primes: Vec<u64> = nf.primes().collect();
                    if primes[..fixed.len()] != fixed[..] {
                        continue;
                    }
                    let q = FactoredInt::from_factors(idx.iter().map(|&i| (primes[i - 1], 1)).collect());
                    let m = nf.div_exact(&q);
                    out.push(Level { n: nf, q, m });
                }
            }
        }
        out
    }
}

/// One average at a prime `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MurmurationPoint {
    pub ell: u64,
    /// `l / X`.
    pub x: f64,
    pub avg: f64,
    /// Number of newforms averaged over (levels coprime to `l`).
    pub count: u64,
}

/// A list of points for one family, weight and window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MurmurationSeries {
    /// Family encoding, with `;eps=...` appended for eigenspace averages.
    pub family: String,
    pub k: u32,
    pub beta: Beta,
    pub x_start: u64,
    pub points: Vec<MurmurationPoint>,
}

fn ell_power(ell: u64, k: u32) -> f64 {
    (ell as f64).powi(1 - (k as i32) / 2)
}

/// Precomputed window data for [`scan_wq`].
struct WqLevel {
    level: Level,
    dim: i128,
}

fn window(spec: &FamilySpec, x_start: u64, beta: Beta) -> Result<Vec<Level>, MurmurError> {
    spec.validate()?;
    let hi = beta.upper(x_start);
    let levels = spec.levels(x_start, hi);
    if levels.is_empty() {
        return Err(MurmurError::EmptyWindow { lo: x_start, hi });
    }
    Ok(levels)
}

/// Exact per-`M` sums of `tr T_l W_Q` over the levels coprime to `l`, with the newform count.
fn wq_sums(levels: &[WqLevel], k: u32, ell: u64) -> (BTreeMap<u64, ExactValue>, i128) {
    let mut sums: BTreeMap<u64, ExactValue> = BTreeMap::new();
    let mut count = 0i128;
    for lv in levels.iter().filter(|lv| lv.level.n.is_coprime_to(ell)) {
        *sums.entry(lv.level.m.value()).or_insert(ExactValue::ZERO) += lv.level.trace(k, ell);
        count += lv.dim;
    }
    (sums, count)
}

/// Weighted `W_Q` averages (`sqrt(N/Q)` weights) for each prime in `ells`.
/// Primes dividing every level of the window are skipped.
pub fn scan_wq(
    spec: &FamilySpec,
    k: u32,
    ells: &[u64],
    x_start: u64,
    beta: Beta,
    exec: Exec,
) -> Result<MurmurationSeries, MurmurError> {
    let levels: Vec<WqLevel> = window(spec, x_start, beta)?
        .into_iter()
        .map(|level| WqLevel { dim: newspace_dim(k, &level.n), level })
        .collect();
    let points: Vec<Option<MurmurationPoint>> = exec.map(ells, |&ell| {
        let (sums, count) = wq_sums(&levels, k, ell);
        if count <= 0 {
            return None;
        }
        let num: f64 = sums.iter().map(|(&m, s)| (m as f64).sqrt() * s.to_f64()).sum();
        Some(MurmurationPoint {
            ell,
            x: ell as f64 / x_start as f64,
            avg: num * ell_power(ell, k) / count as f64,
            count: count as u64,
        })
    });
    let points: Vec<MurmurationPoint> = points.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(MurmurError::NoPoints);
    }
    Ok(MurmurationSeries { family: spec.to_string(), k, beta, x_start, points })
}

/// Atkin–Lehner signs `(eps_1, ..., eps_r)` at the primes `p_1 < ... < p_r` of `N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignVector(pub Vec<i8>);

impl SignVector {
    /// Bit `i` set when `eps_{i+1} = -1`.
    pub fn mask(&self) -> usize {
        self.0.iter().enumerate().filter(|(_, &e)| e < 0).map(|(i, _)| 1 << i).sum()
    }

    pub fn from_mask(r: u32, mask: usize) -> SignVector {
        SignVector((0..r).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect())
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &e in &self.0 {
            f.write_str(if e > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for SignVector {
    type Err = MurmurError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                _ => Err(MurmurError::InvalidSigns(s.to_string())),
            })
            .collect::<Result<Vec<i8>, _>>()
            .and_then(|v| if v.is_empty() { Err(MurmurError::InvalidSigns(s.to_string())) } else { Ok(SignVector(v)) })
    }
}

fn parity(x: usize) -> i128 {
    if x.count_ones() % 2 == 0 { 1 } else { -1 }
}

/// Exact eigenspace data for one prime `l` and one window of a type III family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EigenWindow {
    pub r: u32,
    pub ell: u64,
    /// Indexed by a subset `J` of the primes (bit mask): `sum_N tr T_l W_{Q_J}`.
    pub subset_sums: Vec<ExactValue>,
    /// Indexed by sign mask: `sum_N tr T_l` on the `eps` eigenspace.
    pub eps_sums: Vec<ExactValue>,
    /// Indexed by sign mask: `sum_N dim S_k^new(N)^eps`.
    pub eps_dims: Vec<i128>,
    /// `sum_N dim S_k^new(N)` from the dimension formula.
    pub total_dim: i128,
}

impl EigenWindow {
    /// Checks the decomposition: signed eigenspace sums give back every
    /// `W_Q` sum, eigenspace dimensions are nonnegative and add up to the
    /// dimension formula's total.
    pub fn inversion_holds(&self) -> bool {
        let size = 1usize << self.r;
        let back = (0..size).all(|j| {
            let s: ExactValue = (0..size).map(|e| self.eps_sums[e].scale(parity(j & e))).sum();
            s == self.subset_sums[j]
        });
        back && self.eps_dims.iter().all(|&d| d >= 0) && self.eps_dims.iter().sum::<i128>() == self.total_dim
    }
}

struct EigenLevel {
    n: FactoredInt,
    primes: Vec<u64>,
    /// `dim S^eps` for each sign mask.
    eps_dims: Vec<i128>,
    dim: i128,
}

fn subset_q(primes: &[u64], j: usize) -> FactoredInt {
    FactoredInt::from_factors(primes.iter().enumerate().filter(|(i, _)| j >> i & 1 == 1).map(|(_, &p)| (p, 1)).collect())
}

/// `2^{-r} sum_J eps(Q_J) t_J` for every sign mask.
fn eps_combine(r: u32, traces: &[ExactValue]) -> Vec<ExactValue> {
    let size = 1usize << r;
    let scale = ExactValue::new(1, size as i128);
    (0..size).map(|e| (0..size).map(|j| traces[j].scale(parity(j & e))).sum::<ExactValue>() * scale).collect()
}

fn eigen_levels(spec: &FamilySpec, k: u32, x_start: u64, beta: Beta) -> Result<(u32, Vec<EigenLevel>), MurmurError> {
    let r = spec.r().ok_or_else(|| MurmurError::InvalidSpec(format!("{spec}: eigenspaces need a type III family")))?;
    let levels = window(spec, x_start, beta)?;
    let out = levels
        .into_iter()
        .map(|lv| {
            let primes: Vec<u64> = lv.n.primes().collect();
            let traces: Vec<ExactValue> = (0..1usize << r)
                .map(|j| {
                    let q = subset_q(&primes, j);
                    level_trace(k, &q, &lv.n.div_exact(&q), 1)
                })
                .collect();
            let eps_dims = eps_combine(r, &traces).iter().map(|d| d.to_integer().expect("integral dimension")).collect();
            EigenLevel { dim: newspace_dim(k, &lv.n), n: lv.n, primes, eps_dims }
        })
        .collect();
    Ok((r, out))
}

fn eigen_window(r: u32, levels: &[EigenLevel], k: u32, ell: u64) -> EigenWindow {
    let size = 1usize << r;
    let mut subset_sums = vec![ExactValue::ZERO; size];
    let mut eps_sums = vec![ExactValue::ZERO; size];
    let mut eps_dims = vec![0i128; size];
    let mut total_dim = 0;
    for lv in levels.iter().filter(|lv| lv.n.is_coprime_to(ell)) {
        let traces: Vec<ExactValue> = (0..size)
            .map(|j| {
                let q = subset_q(&lv.primes, j);
                level_trace(k, &q, &lv.n.div_exact(&q), ell)
            })
            .collect();
        for (e, t) in eps_combine(r, &traces).into_iter().enumerate() {
            eps_sums[e] += t;
            eps_dims[e] += lv.eps_dims[e];
        }
        for (j, t) in traces.into_iter().enumerate() {
            subset_sums[j] += t;
        }
        total_dim += lv.dim;
    }
    EigenWindow { r, ell, subset_sums, eps_sums, eps_dims, total_dim }
}

/// Exact eigenspace windows for each prime in `ells`.
pub fn eigenspace_windows(
    spec: &FamilySpec,
    k: u32,
    ells: &[u64],
    x_start: u64,
    beta: Beta,
    exec: Exec,
) -> Result<Vec<EigenWindow>, MurmurError> {
    let (r, levels) = eigen_levels(spec, k, x_start, beta)?;
    Ok(exec.map(ells, |&ell| eigen_window(r, &levels, k, ell)))
}

/// Averages of `l^{1-k/2} a_l` over the forms with Atkin–Lehner signs `eps`,
/// one series per requested sign vector. Points with an empty eigenspace are skipped.
pub fn scan_eigenspace(
    spec: &FamilySpec,
    eps: &[SignVector],
    k: u32,
    ells: &[u64],
    x_start: u64,
    beta: Beta,
    exec: Exec,
) -> Result<Vec<MurmurationSeries>, MurmurError> {
    let r = spec.r().unwrap_or(0);
    if let Some(bad) = eps.iter().find(|e| e.0.len() != r as usize) {
        return Err(MurmurError::InvalidSigns(format!("{bad} (need {r} signs)")));
    }
    let windows = eigenspace_windows(spec, k, ells, x_start, beta, exec)?;
    let series = eps
        .iter()
        .map(|e| {
            let mask = e.mask();
            let points = windows
                .iter()
                .filter(|w| w.eps_dims[mask] > 0)
                .map(|w| MurmurationPoint {
                    ell: w.ell,
                    x: w.ell as f64 / x_start as f64,
                    avg: w.eps_sums[mask].to_f64() * ell_power(w.ell, k) / w.eps_dims[mask] as f64,
                    count: w.eps_dims[mask] as u64,
                })
                .collect();
            MurmurationSeries { family: format!("{spec};eps={e}"), k, beta, x_start, points }
        })
        .collect();
    Ok(series)
}

/// A smoothed point and the number of primes its window averaged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothedPoint {
    pub point: MurmurationPoint,
    pub window: usize,
    /// The window `[l, l + l^delta)` runs past the last point of the series.
    pub truncated: bool,
}

/// `delta`-smoothing: each average is replaced by the mean of the averages at
/// the primes `l <= l' < l + l^delta` present in the series.
pub fn smooth(points: &[MurmurationPoint], delta: f64) -> Vec<SmoothedPoint> {
    let last = points.last().map_or(0, |p| p.ell);
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let end = p.ell as f64 + (p.ell as f64).powf(delta);
            let window: Vec<&MurmurationPoint> = points[i..].iter().take_while(|q| (q.ell as f64) < end).collect();
            let avg = window.iter().map(|q| q.avg).sum::<f64>() / window.len() as f64;
            SmoothedPoint { point: MurmurationPoint { avg, ..*p }, window: window.len(), truncated: end > (last + 1) as f64 }
        })
        .collect()
}

/// Least squares fit of `avg` against `c sqrt(x)` plus an optional second term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqrtFit {
    pub c: f64,
    /// Coefficient of the second basis function; 0 when there is none.
    pub d: f64,
    pub rms: f64,
    /// `max avg - min avg` over the fitted points.
    pub range: f64,
    pub n_points: usize,
}

impl SqrtFit {
    pub fn relative_rms(&self) -> f64 {
        if self.range == 0.0 { 0.0 } else { self.rms / self.range }
    }
}

/// Least squares fit of `y` against `c f(x) + d g(x)`, or `c f(x)` without `g`.
fn fit_basis(pts: &[(f64, f64)], f: impl Fn(f64) -> f64, g: Option<&dyn Fn(f64) -> f64>) -> SqrtFit {
    let n = pts.len() as f64;
    let (c, d) = match g {
        Some(g) => {
            let (mut aff, mut afg, mut agg, mut bf, mut bg) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for &(x, y) in pts {
                let (u, v) = (f(x), g(x));
                aff += u * u;
                afg += u * v;
                agg += v * v;
                bf += u * y;
                bg += v * y;
            }
            let det = aff * agg - afg * afg;
            ((bf * agg - afg * bg) / det, (aff * bg - afg * bf) / det)
        }
        None => {
            let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + f(x) * y, b + f(x) * f(x)));
            (num / den, 0.0)
        }
    };
    let model = |x: f64| c * f(x) + g.map_or(0.0, |g| d * g(x));
    let rms = (pts.iter().map(|&(x, y)| (y - model(x)).powi(2)).sum::<f64>() / n).sqrt();
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| (lo.min(y), hi.max(y)));
    SqrtFit { c, d, rms, range: hi - lo, n_points: pts.len() }
}

fn fit_points(points: &[MurmurationPoint], x_max: f64) -> Result<Vec<(f64, f64)>, MurmurError> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.x < x_max).map(|p| (p.x, p.avg)).collect();
    if pts.len() < 8 {
        return Err(MurmurError::TooFewPoints(pts.len()));
    }
    Ok(pts)
}

/// Fits the points with `x < x_max`, with an intercept only for `k = 2`.
pub fn sqrt_fit(points: &[MurmurationPoint], k: u32, x_max: f64) -> Result<SqrtFit, MurmurError> {
    let pts = fit_points(points, x_max)?;
    let one = |_: f64| 1.0;
    Ok(fit_basis(&pts, f64::sqrt, (k == 2).then_some(&one as &dyn Fn(f64) -> f64)))
}

/// Fits `c sqrt(x) + d x` on `x < x_max`. In weight 2 the `mu(M) sigma(l)`
/// term of the trace formula grows like `l / X`, so this is the shape the
/// weight-2 averages actually take.
pub fn sqrt_linear_fit(points: &[MurmurationPoint], x_max: f64) -> Result<SqrtFit, MurmurError> {
    let pts = fit_points(points, x_max)?;
    Ok(fit_basis(&pts, f64::sqrt, Some(&|x| x)))
}

/// Root-number averages `A^+` and `A^-` over all squarefree levels at one prime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootNumberPair {
    pub ell: u64,
    pub plus: f64,
    pub minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CancellationReport {
    pub k: u32,
    pub x_start: u64,
    pub beta: Beta,
    /// `max |A^+ + A^-|` over the sampled primes.
    pub max_sum: f64,
    /// `max |A^+ - A^-|` over the sampled primes.
    pub max_diff: f64,
    pub pairs: Vec<RootNumberPair>,
}

impl CancellationReport {
    pub fn ratio(&self) -> f64 {
        self.max_sum / self.max_diff
    }
}

/// Compares `A^+ + A^-` with `A^+ - A^-` for the squarefree-level family at
/// every prime in `[X/2, 2X]`. Here `A^+-` are unweighted averages of
/// `l^{1-k/2} a_l` over forms with global root number `+-1`.
pub fn cancellation_diag(k: u32, x_start: u64, beta: Beta, exec: Exec) -> Result<CancellationReport, MurmurError> {
    let spec = FamilySpec::TypeII { q: 1, m_set: LevelSet::Squarefree };
    let levels: Vec<(FactoredInt, i128, i128)> = window(&spec, x_start, beta)?
        .into_iter()
        .map(|lv| {
            let dim = newspace_dim(k, &lv.n);
            let fricke = level_trace(k, &lv.n, &FactoredInt::one(), 1).to_integer().expect("integral trace");
            (lv.n, (dim + fricke) / 2, (dim - fricke) / 2)
        })
        .collect();
    let ells = primes_in(x_start / 2, 2 * x_start);
    let pairs: Vec<RootNumberPair> = exec.map(&ells, |&ell| {
        let (mut plus, mut minus) = (ExactValue::ZERO, ExactValue::ZERO);
        let (mut dp, mut dm) = (0i128, 0i128);
        for (n, d_plus, d_minus) in levels.iter().filter(|(n, _, _)| n.is_coprime_to(ell)) {
            let t = level_trace(k, &FactoredInt::one(), n, ell);
            let tw = level_trace(k, n, &FactoredInt::one(), ell);
            plus += t + tw;
            minus += t - tw;
            dp += d_plus;
            dm += d_minus;
        }
        let w = ell_power(ell, k) / 2.0;
        RootNumberPair { ell, plus: plus.to_f64() * w / dp as f64, minus: minus.to_f64() * w / dm as f64 }
    });
    let max_sum = pairs.iter().map(|p| (p.plus + p.minus).abs()).fold(0.0, f64::max);
    let max_diff = pairs.iter().map(|p| (p.plus - p.minus).abs()).fold(0.0, f64::max);
    Ok(CancellationReport { k, x_start, beta, max_sum, max_diff, pairs })
}

/// Formats `v` with 12 significant digits.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{v:.11e}");
    }
    let decimals = (11 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub family: String,
    pub k: u32,
    pub beta: Beta,
    #[serde(rename = "X")]
    pub x_start: u64,
    pub ell: u64,
    pub x: String,
    pub avg: String,
    pub count: u64,
}

impl CsvRow {
    pub fn x_value(&self) -> f64 {
        self.x.parse().unwrap_or(f64::NAN)
    }

    pub fn avg_value(&self) -> f64 {
        self.avg.parse().unwrap_or(f64::NAN)
    }
}

pub const CSV_HEADER: [&str; 8] = ["family", "k", "beta", "X", "ell", "x", "avg", "count"];

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> MurmurError + '_ {
    move |source| MurmurError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> MurmurError + '_ {
    move |e| MurmurError::Csv { path: path.display().to_string(), reason: e.to_string() }
}

pub fn rows(series: &[MurmurationSeries]) -> Vec<CsvRow> {
    series
        .iter()
        .flat_map(|s| {
            s.points.iter().map(|p| CsvRow {
                family: s.family.clone(),
                k: s.k,
                beta: s.beta,
                x_start: s.x_start,
                ell: p.ell,
                x: format_sig12(p.x),
                avg: format_sig12(p.avg),
                count: p.count,
            })
        })
        .collect()
}

/// Writes the series as CSV (header always present).
pub fn write_csv(series: &[MurmurationSeries], path: &Path) -> Result<(), MurmurError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(CSV_HEADER).map_err(csv_err(path))?;
    for row in rows(series) {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>, MurmurError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(MurmurError::Csv { path: path.display().to_string(), reason: format!("unexpected header {header:?}") });
    }
    r.deserialize().collect::<Result<Vec<CsvRow>, _>>().map_err(csv_err(path))
}

const PALETTE: [&str; 8] = ["#1f60c4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Renders a scatter plot of `avg` against `x = l/X`, one colour per series.
pub fn render_svg(series: &[MurmurationSeries], title: &str) -> String {
    let (w, h, ml, mr, mt, mb) = (900.0, 540.0, 70.0, 170.0, 40.0, 50.0);
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (0.0f64, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x1 = x1.max(p.x);
        y0 = y0.min(p.avg);
        y1 = y1.max(p.avg);
    }
    if !x1.is_finite() {
        (x1, y0, y1) = (1.0, -1.0, 1.0);
    }
    if y0 == y1 {
        (y0, y1) = (y0 - 1.0, y1 + 1.0);
    }
    y0 = y0.min(0.0);
    y1 = y1.max(0.0);
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    x0 = 0.0;
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| mt + (y1 - y) / (y1 - y0) * (h - mt - mb);
    let mut out = String::new();
    out += &format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    out += &format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n");
    out += &format!("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n", (ml + w - mr) / 2.0, escape(title));
    // Axes: horizontal at avg = 0, vertical at x = 0.
    out += &format!("<line x1=\"{}\" y1=\"{:.2}\" x2=\"{}\" y2=\"{:.2}\" stroke=\"#444\"/>\n", ml, sy(0.0), w - mr, sy(0.0));
    out += &format!("<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"#444\"/>\n", h - mb);
    for i in 0..=8 {
        let x = x0 + (x1 - x0) * i as f64 / 8.0;
        out += &format!(
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            sx(x),
            h - mb + 18.0,
            trim_float(x)
        );
        let y = y0 + (y1 - y0) * i as f64 / 8.0;
        out += &format!("<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n", ml - 6.0, sy(y) + 4.0, trim_float(y));
    }
    out += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">l / X</text>\n", (ml + w - mr) / 2.0, h - 10.0);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        out += &format!("<g class=\"series\" fill=\"{color}\">\n");
        for p in &s.points {
            out += &format!("<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.2\"/>\n", sx(p.x), sy(p.avg));
        }
        out += "</g>\n";
        let ly = mt + 18.0 * i as f64;
        out += &format!("<circle cx=\"{}\" cy=\"{ly}\" r=\"4\" fill=\"{color}\"/>\n", w - mr + 14.0);
        out += &format!("<text x=\"{}\" y=\"{}\">{}</text>\n", w - mr + 24.0, ly + 4.0, escape(&s.family));
    }
    out += "</svg>\n";
    out
}

fn trim_float(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_svg(series: &[MurmurationSeries], title: &str, path: &Path) -> Result<(), MurmurError> {
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(render_svg(series, title).as_bytes()).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trip() {
        for s in ["I:M=1", "I:M=5,omega=2", "II:Q=1,M=sqf", "II:Q=3,M=all", "II:Q=6,M=sqf2", "III:r=2,fixed=2,idx=2", "III:r=3,fixed=,idx=1,3"] {
            let spec: FamilySpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        for s in ["I:M=4", "II:Q=6,M=all", "III:r=2,fixed=2,3,idx=", "III:r=2,fixed=,idx=1,2", "IV:M=1", "I:Q=1", "I:M=x"] {
            assert!(s.parse::<FamilySpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn beta_parsing() {
        assert_eq!("2".parse::<Beta>().unwrap(), Beta::TWO);
        assert_eq!("3/2".parse::<Beta>().unwrap().upper(100), 150);
        assert_eq!("6/4".parse::<Beta>().unwrap().to_string(), "3/2");
        assert!("1".parse::<Beta>().is_err());
        assert!("1/2".parse::<Beta>().is_err());
    }

    #[test]
    fn family_levels() {
        let lv = "I:M=5".parse::<FamilySpec>().unwrap().levels(100, 130);
        assert!(lv.iter().all(|l| l.n.value() % 5 == 0 && l.q.is_squarefree() && l.q.is_coprime_to(5)));
        assert_eq!(lv.iter().map(|l| l.n.value()).collect::<Vec<_>>(), vec![105, 110, 115, 130]);
        let lv = "III:r=2,fixed=2,idx=2".parse::<FamilySpec>().unwrap().levels(20, 30);
        assert_eq!(lv.iter().map(|l| (l.n.value(), l.q.value())).collect::<Vec<_>>(), vec![(22, 11), (26, 13)]);
        let lv = "II:Q=1,M=all".parse::<FamilySpec>().unwrap().levels(1, 10);
        assert_eq!(lv.len(), 10);
    }

    #[test]
    fn dims_from_trace_formula() {
        // tr T_1 on the newspace via the squarefree trace formula.
        for n in (1..200u64).filter(|&n| factor_u64(n).is_squarefree()) {
            for k in [2u32, 4, 6] {
                let t = level_trace(k, &FactoredInt::one(), &factor_u64(n), 1);
                assert_eq!(t, ExactValue::from_int(newspace_dim(k, &factor_u64(n))), "k={k} N={n}");
            }
        }
    }

    #[test]
    fn smoothing() {
        let pts: Vec<MurmurationPoint> =
            primes_in(2, 100).into_iter().map(|ell| MurmurationPoint { ell, x: ell as f64, avg: 3.0, count: 1 }).collect();
        assert!(smooth(&pts, 0.75).iter().all(|s| s.point.avg == 3.0));
        let tiny = smooth(&pts, 0.0);
        assert!(tiny.iter().zip(&pts).all(|(s, p)| s.window == 1 && s.point.avg == p.avg));
    }

    #[test]
    fn fit_recovers_synthetic_data() {
        let pts: Vec<MurmurationPoint> =
            (1..=20).map(|i| MurmurationPoint { ell: i, x: i as f64 / 100.0, avg: 2.5 * (i as f64 / 100.0).sqrt() + 0.5, count: 1 }).collect();
        let fit = sqrt_fit(&pts, 2, 1.0).unwrap();
        assert!((fit.c - 2.5).abs() < 1e-9 && (fit.d - 0.5).abs() < 1e-9 && fit.rms < 1e-9);
        let fit4 = sqrt_fit(&pts, 4, 1.0).unwrap();
        assert_eq!(fit4.d, 0.0);
        assert!(matches!(sqrt_fit(&pts[..7], 2, 1.0), Err(MurmurError::TooFewPoints(7))));
        let lin: Vec<MurmurationPoint> = pts.iter().map(|p| MurmurationPoint { avg: -6.0 * p.x.sqrt() + 11.0 * p.x, ..*p }).collect();
        let fit = sqrt_linear_fit(&lin, 1.0).unwrap();
        assert!((fit.c + 6.0).abs() < 1e-9 && (fit.d - 11.0).abs() < 1e-9 && fit.rms < 1e-9);
    }

    #[test]
    fn sig_digits() {
        assert_eq!(format_sig12(0.5), "0.500000000000");
        assert_eq!(format_sig12(-12.25), "-12.2500000000");
        assert_eq!(format_sig12(1234.0), "1234.00000000");
        assert_eq!(format_sig12(0.0), "0");
    }
}
