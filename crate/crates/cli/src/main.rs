use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use localsign_core::arith::{factor_u64, is_prime, primes_in};
use localsign_core::classnum::{self, HurwitzTable};
use localsign_core::murmur::{self, Beta, FamilySpec, MurmurationSeries, SignVector};
use localsign_core::signs;
use localsign_core::trace::{t_full_fricke, SquarefreeTraceQuery, TraceQuery};
use localsign_core::twist::{self, LocalRepType, RamifiedField, TwistCharacter};
use localsign_core::verify::{self, VerifyOptions};
use localsign_core::{par, Exec, ExactValue};

/// Atkin-Lehner traces, local sign statistics and murmuration scans.
#[derive(Parser, Debug)]
#[command(name = "localsign", version)]
struct Cli {
    #[command(flatten)]
    config: Config,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Config {
    /// Largest |Delta| held in the Hurwitz class number table.
    #[arg(long, global = true, default_value_t = classnum::DEFAULT_HURWITZ_BOUND)]
    sieve_bound: u64,
    /// Binary cache for the class number table.
    #[arg(long = "cache", global = true, env = "LOCALSIGN_CACHE")]
    cache_path: Option<PathBuf>,
    /// Worker threads (1 runs everything sequentially).
    #[arg(long, global = true, default_value_t = default_workers())]
    workers: usize,
    /// Directory for CSV and SVG output.
    #[arg(long, global = true, default_value = "out")]
    output_dir: PathBuf,
    /// Seed for randomized spot checks.
    #[arg(long, global = true, default_value_t = verify::DEFAULT_SEED)]
    seed: u64,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl Config {
    fn validate(&self) -> Result<()> {
        if self.sieve_bound < 4 {
            bail!("--sieve-bound must be at least 4");
        }
        if self.workers == 0 {
            bail!("--workers must be at least 1");
        }
        Ok(())
    }

    fn exec(&self) -> Exec {
        if self.workers == 1 { Exec::Sequential } else { Exec::Parallel }
    }

    /// Installs the class number table, going through the cache when one is configured.
    fn install_table(&self) -> Result<()> {
        if classnum::installed_table().is_some() {
            return Ok(());
        }
        match &self.cache_path {
            Some(path) => {
                let table = HurwitzTable::load_or_build(path, self.sieve_bound, self.exec())
                    .with_context(|| format!("class number cache {}", path.display()))?;
                classnum::install_table(table);
            }
            None => {
                classnum::ensure_table(self.sieve_bound, self.exec())?;
            }
        }
        Ok(())
    }
}

const FAMILY_HELP: &str = "Family of (N, Q) pairs:
  I:M=<m>[,omega=<r>]            N = QM, Q squarefree coprime to M
  II:Q=<q>,M=<all|sqf|sqf<r>>    N = QM with Q fixed
  III:r=<r>,fixed=<p1,..>,idx=<i1,..>
                                 N = p_1...p_r, first primes fixed, Q = product of p_i at idx";

#[derive(Subcommand, Debug)]
enum Command {
    /// h'(Delta), H(Delta) and the reduced-form oracle.
    Classnum {
        #[arg(allow_hyphen_values = true)]
        delta: i64,
    },
    /// tr T_l W_{q^r} on S_k(q^r M) and S_k^new(q^r M) along every available path.
    Trace {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        q: u64,
        #[arg(long, default_value_t = 1)]
        r: u32,
        #[arg(long = "M", default_value_t = 1)]
        m: u64,
        #[arg(long, default_value_t = 1)]
        ell: u64,
        /// Also evaluate the squarefree-level formula for W_Q with this Q | N.
        #[arg(long = "squarefree-Q")]
        squarefree_q: Option<u64>,
    },
    /// Delta_k(q^r, M) = tr W_{q^r}, eigenspace dimensions and the predicate verdict.
    Delta {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        q: u64,
        #[arg(long, default_value_t = 1)]
        r: u32,
        #[arg(long = "M", default_value_t = 1)]
        m: u64,
    },
    /// Closed forms vs trace formula vs predicates on a grid; exits 1 on any mismatch.
    EquidistSweep {
        /// Even weights, as `lo..hi` or a single value.
        #[arg(long, default_value = "2..14")]
        k_range: String,
        #[arg(long, default_value_t = 200)]
        qr_max: u64,
        #[arg(long = "M-max", default_value_t = 300)]
        m_max: u64,
    },
    /// Murmuration scan; writes CSV and SVG into the output directory.
    Murmur {
        #[arg(long, help = FAMILY_HELP)]
        family: FamilySpec,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long = "X")]
        x: u64,
        #[arg(long, default_value = "2")]
        beta: Beta,
        #[arg(long)]
        ell_max: u64,
        /// Replace each average by the mean over primes in [l, l + l^delta).
        #[arg(long)]
        smooth: Option<f64>,
        /// Atkin-Lehner sign vectors such as `+-`, comma separated (type III only).
        #[arg(long, value_delimiter = ',')]
        eigenspace: Vec<SignVector>,
        /// Fit c sqrt(x) (+ d in weight 2) on x < 1/(4M) - 0.02 (type I only).
        #[arg(long)]
        fit: bool,
    },
    /// Local types at q, twisting signs and the forced quadratic twist.
    Twist {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        q: u64,
        #[arg(long)]
        r: u32,
        #[arg(long = "M", default_value_t = 1)]
        m: u64,
    },
    /// Runs every acceptance check.
    Selftest,
}

/// Text and JSON renderings of one result.
struct Output {
    lines: Vec<String>,
    json: Value,
    ok: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("serializable"));
            } else {
                for line in &out.lines {
                    println!("{line}");
                }
            }
            if out.ok { ExitCode::SUCCESS } else { ExitCode::FAILURE }
        }
        Err(e) => {
            if cli.json {
                println!("{}", json!({ "error": format!("{e:#}") }));
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<Output> {
    let cfg = &cli.config;
    cfg.validate()?;
    par::configure_workers(cfg.workers);
    match &cli.command {
        Command::Classnum { delta } => cmd_classnum(*delta),
        Command::Trace { k, q, r, m, ell, squarefree_q } => cmd_trace(*k, *q, *r, *m, *ell, *squarefree_q),
        Command::Delta { k, q, r, m } => cmd_delta(*k, *q, *r, *m),
        Command::EquidistSweep { k_range, qr_max, m_max } => cmd_sweep(cfg, k_range, *qr_max, *m_max),
        Command::Murmur { family, k, x, beta, ell_max, smooth, eigenspace, fit } => {
            cmd_murmur(cfg, family, *k, *x, *beta, *ell_max, *smooth, eigenspace, *fit)
        }
        Command::Twist { k, q, r, m } => cmd_twist(*k, *q, *r, *m),
        Command::Selftest => cmd_selftest(cfg),
    }
}

fn cmd_classnum(delta: i64) -> Result<Output> {
    let h_prime = classnum::h_prime(delta)?;
    let h = classnum::hurwitz(delta)?;
    let oracle = classnum::hurwitz_oracle(delta)?;
    let ok = h == oracle;
    Ok(Output {
        lines: vec![
            format!("Delta: {delta}"),
            format!("h': {h_prime}"),
            format!("H: {h}"),
            format!("oracle: {oracle}"),
            format!("agree: {ok}"),
        ],
        json: json!({ "delta": delta, "h_prime": h_prime, "hurwitz": h, "oracle": oracle, "agree": ok }),
        ok,
    })
}

fn cmd_trace(k: u32, q: u64, r: u32, m: u64, ell: u64, squarefree_q: Option<u64>) -> Result<Output> {
    let query = TraceQuery::new(k, q, r, m, ell)?;
    let level = query.level();
    let (t_full, t_new) = (query.t_full(), query.t_new());
    let mut lines = vec![format!("N: {level}"), format!("t_full: {t_full}"), format!("t_new: {t_new}")];
    let mut json = json!({ "k": k, "q": q, "r": r, "M": m, "ell": ell, "N": level, "t_full": t_full, "t_new": t_new });
    let mut ok = true;

    let big_q = match squarefree_q {
        Some(bq) => {
            if bq == 0 || level % bq != 0 {
                bail!("--squarefree-Q {bq} must divide N = {level}");
            }
            Some(bq)
        }
        None => (r == 1).then_some(q),
    };
    if let Some(bq) = big_q.filter(|_| factor_u64(level).is_squarefree()) {
        let sqf = SquarefreeTraceQuery::new(k, bq, level / bq, ell)?.trace();
        lines.push(format!("t_new_squarefree (Q = {bq}): {sqf}"));
        json["Q"] = json!(bq);
        json["t_new_squarefree"] = json!(sqf);
        if bq == q.pow(r) {
            let same = sqf == t_new;
            ok &= same;
            json["squarefree_agrees"] = json!(same);
            if !same {
                lines.push("MISMATCH: t_new_squarefree != t_new".into());
            }
        }
    } else if squarefree_q.is_some() {
        bail!("--squarefree-Q needs a squarefree level, N = {level}");
    }
    let fricke = (m == 1 && r == 1).then(|| t_full_fricke(k, level, ell).ok()).flatten();
    if let Some(fricke) = fricke {
        let same = fricke == t_full;
        ok &= same;
        lines.push(format!("t_full_fricke: {fricke}"));
        json["t_full_fricke"] = json!(fricke);
        json["fricke_agrees"] = json!(same);
        if !same {
            lines.push("MISMATCH: t_full_fricke != t_full".into());
        }
    }
    json["ok"] = json!(ok);
    Ok(Output { lines, json, ok })
}

fn verdict_text(v: &signs::Verdict) -> String {
    match v {
        signs::Verdict::Zero { reason, case } => format!("zero ({}) [{case}]", reason.as_str()),
        signs::Verdict::Nonzero { sign: Some(s), case } => format!("nonzero, sign {s:+} [{case}]"),
        signs::Verdict::Nonzero { sign: None, case } => format!("nonzero [{case}]"),
        signs::Verdict::NotCovered { reason } => format!("not covered ({reason})"),
    }
}

fn cmd_delta(k: u32, q: u64, r: u32, m: u64) -> Result<Output> {
    let d = signs::delta(k, q, r, m)?;
    let dims = signs::eigenspace_dims(k, q, r, m)?;
    let ok = d.verdict.agrees_with(&d.value);
    let mut lines = vec![
        format!("Delta: {}", d.value),
        format!("dim W=+1: {}", dims.plus),
        format!("dim W=-1: {}", dims.minus),
        format!("verdict: {}", verdict_text(&d.verdict)),
    ];
    if !ok {
        lines.push("MISMATCH: verdict contradicts Delta".into());
    }
    Ok(Output {
        lines,
        json: json!({
            "k": k, "q": q, "r": r, "M": m,
            "delta": d.value,
            "dim_plus": dims.plus,
            "dim_minus": dims.minus,
            "verdict": d.verdict,
            "case": d.verdict.case(),
            "agrees": ok,
        }),
        ok,
    })
}

fn parse_k_range(s: &str) -> Result<(u32, u32)> {
    let parse = |t: &str| t.trim().parse::<u32>().with_context(|| format!("bad weight {t:?} in --k-range"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => (parse(s)?, parse(s)?),
    };
    if lo < 2 || lo > hi {
        bail!("--k-range {s:?} must be lo..hi with 2 <= lo <= hi");
    }
    Ok((lo, hi))
}

fn cmd_sweep(cfg: &Config, k_range: &str, qr_max: u64, m_max: u64) -> Result<Output> {
    let (k_lo, k_hi) = parse_k_range(k_range)?;
    if qr_max < 2 || m_max < 1 {
        bail!("--qr-max must be at least 2 and --M-max at least 1");
    }
    let grid = verify::delta_grid(k_lo, k_hi, qr_max, m_max);
    let s = verify::equidist_sweep(&grid, cfg.exec());
    let mut lines = vec![
        format!("points: {}", s.points),
        format!("covered by predicate: {}", s.covered),
        format!("closed form vs trace formula mismatches: {}", s.value_mismatches.len()),
        format!("predicate mismatches: {}", s.predicate_mismatches.len()),
        format!("literal q=2 statement wrong: {}/{}", s.q2_literal_wrong, s.q2_points),
    ];
    for (k, q, r, m) in s.value_mismatches.iter().chain(&s.predicate_mismatches).take(20) {
        lines.push(format!("  mismatch at k={k} q={q} r={r} M={m}"));
    }
    Ok(Output { lines, json: serde_json::to_value(&s)?, ok: s.clean() })
}

#[allow(clippy::too_many_arguments)]
fn cmd_murmur(
    cfg: &Config,
    family: &FamilySpec,
    k: u32,
    x: u64,
    beta: Beta,
    ell_max: u64,
    smooth: Option<f64>,
    eigenspace: &[SignVector],
    fit: bool,
) -> Result<Output> {
    family.validate()?;
    if k < 2 || k % 2 == 1 {
        bail!("--k must be even and at least 2");
    }
    if x == 0 {
        bail!("--X must be positive");
    }
    if !eigenspace.is_empty() && !matches!(family, FamilySpec::TypeIII { .. }) {
        bail!("--eigenspace needs a type III family");
    }
    let fit_m = match (fit, family) {
        (false, _) => None,
        (true, FamilySpec::TypeI { m, .. }) => Some(*m),
        (true, _) => bail!("--fit needs a type I family"),
    };
    if let Some(d) = smooth {
        if !(0.0..1.0).contains(&d) {
            bail!("--smooth must lie in [0, 1)");
        }
    }
    cfg.install_table()?;
    let ells: Vec<u64> = primes_in(2, ell_max + 1);
    let mut series: Vec<MurmurationSeries> = if eigenspace.is_empty() {
        vec![murmur::scan_wq(family, k, &ells, x, beta, cfg.exec())?]
    } else {
        murmur::scan_eigenspace(family, eigenspace, k, &ells, x, beta, cfg.exec())?
    };
    let mut lines = Vec::new();
    let mut json = json!({ "family": family.to_string(), "k": k, "X": x, "beta": beta.to_string(), "ell_max": ell_max });
    if let Some(m) = fit_m {
        let x_max = 1.0 / (4.0 * m as f64) - 0.02;
        let f = murmur::sqrt_fit(&series[0].points, k, x_max)?;
        lines.push(format!(
            "fit on x < {x_max:.4}: c = {}, d = {}, rms = {}, range = {}, rms/range = {}, points = {}",
            murmur::format_sig12(f.c),
            murmur::format_sig12(f.d),
            murmur::format_sig12(f.rms),
            murmur::format_sig12(f.range),
            murmur::format_sig12(f.relative_rms()),
            f.n_points
        ));
        json["fit"] = serde_json::to_value(f)?;
        if k == 2 {
            let lin = murmur::sqrt_linear_fit(&series[0].points, x_max)?;
            lines.push(format!(
                "fit c sqrt(x) + d x: c = {}, d = {}, rms/range = {}",
                murmur::format_sig12(lin.c),
                murmur::format_sig12(lin.d),
                murmur::format_sig12(lin.relative_rms())
            ));
            json["fit_sqrt_linear"] = serde_json::to_value(lin)?;
        }
        json["fit_x_max"] = json!(x_max);
    }
    if let Some(d) = smooth {
        for s in &mut series {
            s.points = murmur::smooth(&s.points, d).into_iter().map(|p| p.point).collect();
            s.family = format!("{};smooth={d}", s.family);
        }
    }
    std::fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let stem = file_stem(family, k, x, &eigenspace_label(eigenspace), smooth);
    let csv_path = cfg.output_dir.join(format!("{stem}.csv"));
    let svg_path = cfg.output_dir.join(format!("{stem}.svg"));
    murmur::write_csv(&series, &csv_path)?;
    let title = format!("{family}, k = {k}, X = {x}, beta = {beta}");
    murmur::write_svg(&series, &title, &svg_path)?;
    for s in &series {
        lines.push(format!("{}: {} points", s.family, s.points.len()));
    }
    lines.push(format!("wrote {}", csv_path.display()));
    lines.push(format!("wrote {}", svg_path.display()));
    json["series"] = serde_json::to_value(&series)?;
    json["csv"] = json!(csv_path);
    json["svg"] = json!(svg_path);
    Ok(Output { lines, json, ok: true })
}

fn eigenspace_label(eps: &[SignVector]) -> String {
    eps.iter().map(|e| e.to_string().replace('+', "p").replace('-', "m")).collect::<Vec<_>>().join("_")
}

fn file_stem(family: &FamilySpec, k: u32, x: u64, eps: &str, smooth: Option<f64>) -> String {
    let fam: String = family.to_string().chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    let mut stem = format!("murmur_{fam}_k{k}_X{x}");
    if !eps.is_empty() {
        stem.push_str(&format!("_eps{eps}"));
    }
    if let Some(d) = smooth {
        stem.push_str(&format!("_smooth{d}"));
    }
    stem
}

fn characters_away(q: u64, m: u64) -> Vec<TwistCharacter> {
    let mut chis: Vec<TwistCharacter> =
        factor_u64(m).primes().filter(|&p| p != 2 && p != q).map(TwistCharacter::Odd).collect();
    if q != 2 {
        chis.extend([TwistCharacter::MinusOne, TwistCharacter::Two, TwistCharacter::MinusTwo]);
    }
    chis
}

fn cmd_twist(k: u32, q: u64, r: u32, m: u64) -> Result<Output> {
    if !is_prime(q) || r == 0 {
        bail!("--q must be prime and --r at least 1");
    }
    let types = twist::classify_local_types(q, r)?;
    let mut lines = vec![format!(
        "local types at {q}^{r}: {}",
        types.iter().map(LocalRepType::as_str).collect::<Vec<_>>().join(", ")
    )];

    let mut away = Vec::new();
    for chi in characters_away(q, m) {
        let v = twist::kappa_away(q, r, chi)?;
        lines.push(format!("kappa(pi_q, {chi}) = {v:+}"));
        away.push(json!({ "character": chi.to_string(), "kappa": v }));
    }

    let mut at_q = Vec::new();
    if q != 2 && r >= 3 {
        for &ty in &types {
            let fields: &[Option<RamifiedField>] = if ty == LocalRepType::RamifiedSupercuspidal {
                &[Some(RamifiedField::QStar), Some(RamifiedField::MinusQStar)]
            } else {
                &[None]
            };
            for &field in fields {
                let label = match field {
                    Some(RamifiedField::QStar) => format!("{ty} (field Q_q(sqrt q*))"),
                    Some(RamifiedField::MinusQStar) => format!("{ty} (field Q_q(sqrt -q*))"),
                    None => ty.to_string(),
                };
                match twist::kappa_at_q(q, r, ty, field) {
                    Ok(v) => {
                        lines.push(format!("kappa({label}, chi_{q}) = {v:+}"));
                        at_q.push(json!({ "type": ty, "field": field, "kappa": v }));
                    }
                    Err(e) => {
                        lines.push(format!("kappa({label}, chi_{q}): {e}"));
                        at_q.push(json!({ "type": ty, "field": field, "error": e.to_string() }));
                    }
                }
            }
        }
        let flips = twist::twist_at_q_flips_all(q, r)?;
        lines.push(format!("twist by chi_{q} flips every type: {flips}"));
    }

    let forced = twist::quadtwist_bijection(q, r, m)?;
    let delta: Option<ExactValue> = (k >= 2 && k % 2 == 0 && m % q != 0).then(|| signs::delta_value(k, q, r, &factor_u64(m)));
    match forced {
        Some(chi) => lines.push(format!("twist by {chi} swaps the W_q eigenspaces of S_k^new({q}^{r} M)")),
        None => lines.push("no quadratic twist forces the signs to balance".into()),
    }
    if let Some(d) = delta {
        lines.push(format!("Delta_{k}({q}^{r}, {m}) = {d}"));
    }
    let ok = match (forced, delta) {
        (Some(_), Some(d)) => d.is_zero(),
        _ => true,
    };
    if !ok {
        lines.push("MISMATCH: forced twist but Delta != 0".into());
    }
    Ok(Output {
        lines,
        json: json!({
            "k": k, "q": q, "r": r, "M": m,
            "local_types": types,
            "kappa_away": away,
            "kappa_at_q": at_q,
            "forced_twist": forced.map(|c| c.to_string()),
            "delta": delta,
            "ok": ok,
        }),
        ok,
    })
}

fn cmd_selftest(cfg: &Config) -> Result<Output> {
    if cfg.cache_path.is_some() {
        cfg.install_table()?;
    }
    let opts = VerifyOptions { exec: cfg.exec(), seed: cfg.seed, table_bound: cfg.sieve_bound };
    let mut lines = Vec::new();
    let mut reports = Vec::new();
    for c in verify::CRITERIA {
        let r = c(&opts);
        eprintln!("{r}");
        lines.push(r.to_string());
        reports.push(r);
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    lines.push(format!("{passed} of {} checks passed", reports.len()));
    Ok(Output { lines, json: json!({ "passed": passed, "criteria": reports }), ok: passed == reports.len() })
}
