use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_bigint::BigUint;
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind, MRule, OutputFormat};
use super::table::{fit_exponent, median, ResultRow, ResultTable};
use crate::circle::{default_bits, orbit, precision_warning, AngleSampler, FixedPointAngle, GapReport, Orbit};
use crate::dstat::{d_mean_exact, d_statistic_points};
use crate::energy::additive_energy;
use crate::error::{Error, Result};
use crate::sequences::IntegerSequence;
use crate::window::WindowSpec;

/// Upper limit on `N_max × samples` orbit points per run.
pub const MAX_SCAN_POINTS: usize = 500_000_000;
/// Theorem 2 needs `E(𝒜,N) ≪ N^{2+o(1)}`; runs whose measured exponent
/// reaches this value are flagged.
pub const ENERGY_EXPONENT_GUARD: f64 = 2.7;
/// Largest N at which the energy guard is measured.
pub const ENERGY_GUARD_N: usize = 2048;
/// The prime floor `δ_min > N^{−(2+η)}` uses this `η` for `N ≥` [`PRIME_FLOOR_MIN_N`].
pub const PRIME_FLOOR_ETA: f64 = 0.1;
pub const PRIME_FLOOR_MIN_N: usize = 1024;

/// What to compute for each row besides the gap report.
#[derive(Clone, Debug)]
pub struct RowOptions {
    pub eta: Option<f64>,
    pub m_rule: Option<MRule>,
    pub window: WindowSpec,
    /// `ε` for the normalized prime column.
    pub normalize_epsilon: Option<f64>,
}

impl RowOptions {
    pub fn plain() -> Self {
        RowOptions {
            eta: None,
            m_rule: None,
            window: WindowSpec::triangle(),
            normalize_epsilon: None,
        }
    }
}

/// Rows for each prefix length of one orbit, in the order of `ns`.
pub fn rows_for_orbit(alpha_id: u64, o: &Orbit, ns: &[usize], opts: &RowOptions) -> Result<Vec<ResultRow>> {
    let bits = o.bits();
    let alpha_hex = o.alpha().map(|a| a.to_hex()).unwrap_or_default();
    ns.iter()
        .map(|&n| {
            let points = o
                .mantissas()
                .get(..n)
                .ok_or_else(|| Error::argument(format!("orbit has {} points, N = {n}", o.len())))?;
            let gap = GapReport::from_mantissas(points, bits)?;
            let log2n = (n as f64).log2();
            let log2d = gap.delta_min.log2();
            let (d_value, m) = match &opts.m_rule {
                Some(rule) => {
                    let m = rule.m(n, opts.eta.unwrap_or(0.0))?;
                    (Some(d_statistic_points(points, bits, m, &opts.window).0), Some(m))
                }
                None => (None, None),
            };
            let normalized = match opts.normalize_epsilon {
                Some(eps) if !gap.collision => {
                    let ln = (n as f64).ln();
                    Some((log2d + log2n).exp2() * ln.powf(2.0 + eps))
                }
                _ => None,
            };
            Ok(ResultRow {
                n,
                alpha_id,
                alpha_hex: alpha_hex.clone(),
                delta_min_hex: gap.delta_min.to_hex(),
                delta_min: gap.delta_min.to_decimal(),
                scaled: (log2d + 2.0 * log2n).exp2(),
                d_value,
                m,
                collision: gap.collision,
                lower_violation: opts.eta.map(|eta| log2d <= -(2.0 + eta) * log2n),
                upper_satisfied: opts.eta.map(|eta| log2d < -(2.0 - eta) * log2n),
                distinct_gaps: gap.distinct_gap_count,
                normalized,
                delta: gap.delta_min,
            })
        })
        .collect()
}

/// Rows for every (N, α), ordered by N and then by α index.
pub fn gap_rows(
    seq: &IntegerSequence,
    ns: &[usize],
    alphas: &[FixedPointAngle],
    opts: &RowOptions,
) -> Result<Vec<ResultRow>> {
    let n_max = *ns.last().ok_or_else(|| Error::argument("empty N grid"))?;
    let per_alpha: Vec<Vec<ResultRow>> = alphas
        .par_iter()
        .enumerate()
        .map(|(i, alpha)| rows_for_orbit(i as u64, &orbit(alpha, seq, n_max)?, ns, opts))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(ns.len() * alphas.len());
    for j in 0..ns.len() {
        rows.extend(per_alpha.iter().map(|r| r[j].clone()));
    }
    Ok(rows)
}

/// Mean of `D` across α at one N against `N(N−1)/M`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DDiagnostic {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: u64,
    pub d_mean: f64,
    pub d_expected: f64,
    /// Fraction of α with `D > 0`.
    pub d_positive: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: ExperimentKind,
    pub sequence: String,
    pub bits: u32,
    pub samples: usize,
    pub cells: usize,
    pub collisions: usize,
    /// Rows breaking `δ_min ≤ 1/N`, monotonicity in N, or the ordering of
    /// the two threshold events.
    pub invariant_failures: usize,
    pub max_distinct_gaps: usize,
    pub violation_fraction: Option<f64>,
    pub satisfaction_fraction: Option<f64>,
    /// Rows with `δ_min ≤ 1/(4M)` and `D < 1`.
    pub implication_failures: Option<usize>,
    pub d_diagnostics: Vec<DDiagnostic>,
    pub median_slope: Option<f64>,
    pub normalized_min: Option<f64>,
    pub normalized_median: Option<f64>,
    pub floor_violations: Option<usize>,
    pub energy_n: Option<usize>,
    pub energy_exponent: Option<f64>,
    pub hypothesis_ok: Option<bool>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub table: ResultTable,
    pub summary: Summary,
}

struct Prepared {
    seq: IntegerSequence,
    ns: Vec<usize>,
    bits: u32,
    alphas: Vec<FixedPointAngle>,
    warnings: Vec<String>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let ns = cfg.grid()?;
    let n_max = *ns.last().expect("validated grid is nonempty");
    if n_max.saturating_mul(cfg.alphas.samples) > MAX_SCAN_POINTS {
        return Err(Error::resource(
            "scan-size",
            format!(
                "N_max·samples = {n_max}·{} exceeds {MAX_SCAN_POINTS}",
                cfg.alphas.samples
            ),
        ));
    }
    let seq = cfg.sequence.generate(n_max)?;
    let bits = cfg.alphas.bits.unwrap_or_else(|| default_bits(&seq, n_max));
    let mut warnings = Vec::new();
    if let Some(w) = precision_warning(&seq, n_max, bits) {
        log::warn!("{w}");
        warnings.push(w);
    }
    let sampler = AngleSampler::new(cfg.alphas.seed);
    let alphas = (0..cfg.alphas.samples as u64)
        .map(|i| sampler.angle(i, bits))
        .collect();
    Ok(Prepared {
        seq,
        ns,
        bits,
        alphas,
        warnings,
    })
}

fn row_options(cfg: &ExperimentConfig) -> RowOptions {
    RowOptions {
        eta: cfg.eta,
        m_rule: cfg.effective_m_rule(),
        window: WindowSpec::new(cfg.window),
        normalize_epsilon: (cfg.experiment == ExperimentKind::Primes).then_some(cfg.epsilon),
    }
}

fn count_invariant_failures(table: &ResultTable) -> usize {
    let mut failures = 0;
    for row in &table.rows {
        if !row.delta.le_ratio(&BigUint::one(), &BigUint::from(row.n)) {
            failures += 1;
        }
        if row.lower_violation == Some(true) && row.upper_satisfied == Some(false) {
            failures += 1;
        }
    }
    for rows in table.by_alpha().values() {
        failures += rows.windows(2).filter(|w| w[1].delta > w[0].delta).count();
    }
    failures
}

fn fraction(table: &ResultTable, pick: impl Fn(&ResultRow) -> Option<bool>) -> Option<f64> {
    let flags: Vec<bool> = table.rows.iter().filter_map(pick).collect();
    (!flags.is_empty()).then(|| flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64)
}

fn d_diagnostics(table: &ResultTable, ns: &[usize]) -> Vec<DDiagnostic> {
    ns.iter()
        .filter_map(|&n| {
            let cells: Vec<(f64, u64)> = table
                .rows
                .iter()
                .filter(|r| r.n == n)
                .filter_map(|r| r.d_value.zip(r.m))
                .collect();
            let m = cells.first()?.1;
            let count = cells.len() as f64;
            Some(DDiagnostic {
                n,
                m,
                d_mean: cells.iter().map(|c| c.0).sum::<f64>() / count,
                d_expected: d_mean_exact(n, m),
                d_positive: cells.iter().filter(|c| c.0 > 0.0).count() as f64 / count,
            })
        })
        .collect()
}

fn base_summary(cfg: &ExperimentConfig, p: &Prepared, table: &ResultTable) -> Summary {
    Summary {
        experiment: cfg.experiment,
        sequence: cfg.sequence.to_string(),
        bits: p.bits,
        samples: p.alphas.len(),
        cells: table.len(),
        collisions: table.rows.iter().filter(|r| r.collision).count(),
        invariant_failures: count_invariant_failures(table),
        max_distinct_gaps: table.rows.iter().map(|r| r.distinct_gaps).max().unwrap_or(0),
        violation_fraction: fraction(table, |r| r.lower_violation),
        satisfaction_fraction: fraction(table, |r| r.upper_satisfied),
        implication_failures: None,
        d_diagnostics: d_diagnostics(table, &p.ns),
        median_slope: None,
        normalized_min: None,
        normalized_median: None,
        floor_violations: None,
        energy_n: None,
        energy_exponent: None,
        hypothesis_ok: None,
        warnings: p.warnings.clone(),
        passed: false,
    }
}

fn build(cfg: &ExperimentConfig) -> Result<(Prepared, ResultTable)> {
    let p = prepare(cfg)?;
    let rows = gap_rows(&p.seq, &p.ns, &p.alphas, &row_options(cfg))?;
    Ok((p, ResultTable::new(rows)))
}

/// δ_min (and D, when an M rule is set) for every grid N and sampled α.
pub fn scan_minimal_gap(cfg: &ExperimentConfig) -> Result<ResultTable> {
    Ok(build(cfg)?.1)
}

fn scan_outcome(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (p, table) = build(cfg)?;
    let mut s = base_summary(cfg, &p, &table);
    let t = &cfg.thresholds;
    let mut slope_ok = true;
    match fit_exponent(&table) {
        Ok(fit) => {
            s.median_slope = Some(fit.median_slope);
            slope_ok = t.slope_min.is_none_or(|lo| fit.median_slope >= lo)
                && t.slope_max.is_none_or(|hi| fit.median_slope <= hi);
        }
        Err(_) if t.slope_min.is_none() && t.slope_max.is_none() => {}
        Err(e) => return Err(e),
    }
    s.passed = s.invariant_failures == 0 && slope_ok;
    Ok(Outcome { table, summary: s })
}

/// Fraction of cells with `δ_min ≤ N^{−(2+η)}`, plus the mean of
/// `D(N, N^{2+η}/8)` against `N(N−1)/M`.
pub fn verify_theorem1(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (p, table) = build(cfg)?;
    let mut s = base_summary(cfg, &p, &table);
    let v = s.violation_fraction.unwrap_or(0.0);
    s.passed = s.invariant_failures == 0 && v <= cfg.thresholds.max_violation;
    Ok(Outcome { table, summary: s })
}

/// Fraction of cells with `δ_min < N^{−(2−η)}`, with the D-based check at
/// `M = ½·N^{2−η}` and the additive-energy hypothesis guard.
pub fn verify_theorem2(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (p, table) = build(cfg)?;
    let mut s = base_summary(cfg, &p, &table);

    let n_e = (*p.ns.last().expect("nonempty")).min(ENERGY_GUARD_N);
    let exponent = additive_energy(&p.seq, n_e)?.exponent();
    s.energy_n = Some(n_e);
    s.energy_exponent = Some(exponent);
    s.hypothesis_ok = Some(exponent < ENERGY_EXPONENT_GUARD);
    if exponent >= ENERGY_EXPONENT_GUARD {
        let w = format!(
            "energy exponent {exponent:.3} at N = {n_e} is not below {ENERGY_EXPONENT_GUARD}; the small-energy hypothesis looks unmet"
        );
        log::warn!("{w}");
        s.warnings.push(w);
    }

    let failures = table
        .rows
        .iter()
        .filter(|r| match (r.d_value, r.m) {
            (Some(d), Some(m)) => r.delta.le_ratio(&BigUint::one(), &BigUint::from(4 * m)) && d < 1.0,
            _ => false,
        })
        .count();
    s.implication_failures = Some(failures);
    let sat = s.satisfaction_fraction.unwrap_or(0.0);
    s.passed = s.invariant_failures == 0 && failures == 0 && sat >= cfg.thresholds.min_satisfaction;
    Ok(Outcome { table, summary: s })
}

/// Naturals only: every cell has at most three distinct gaps.
pub fn verify_three_gap(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (p, table) = build(cfg)?;
    let mut s = base_summary(cfg, &p, &table);
    s.passed = s.invariant_failures == 0 && s.max_distinct_gaps <= 3;
    Ok(Outcome { table, summary: s })
}

/// Primes: `δ_min·N·(log N)^{2+ε}` per cell with min and median over
/// collision-free rows; asserts only `δ_min > N^{−2.1}` for `N ≥ 1024`.
pub fn prime_gap_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (p, table) = build(cfg)?;
    let mut s = base_summary(cfg, &p, &table);
    let normalized: Vec<f64> = table.rows.iter().filter_map(|r| r.normalized).collect();
    if !normalized.is_empty() {
        s.normalized_min = normalized.iter().copied().reduce(f64::min);
        s.normalized_median = Some(median(&normalized));
    }
    let floor = table
        .rows
        .iter()
        .filter(|r| r.n >= PRIME_FLOOR_MIN_N)
        .filter(|r| r.log2_delta() <= -(2.0 + PRIME_FLOOR_ETA) * (r.n as f64).log2())
        .count();
    s.floor_violations = Some(floor);
    s.passed = s.invariant_failures == 0 && floor == 0;
    Ok(Outcome { table, summary: s })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.experiment {
        ExperimentKind::Scan => scan_outcome(cfg),
        ExperimentKind::Theorem1 => verify_theorem1(cfg),
        ExperimentKind::Theorem2 => verify_theorem2(cfg),
        ExperimentKind::Threegap => verify_three_gap(cfg),
        ExperimentKind::Primes => prime_gap_experiment(cfg),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub version: String,
    /// Unix time in seconds.
    pub started: u64,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub outcome: Outcome,
    pub manifest: Manifest,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    /// 0 when the run passed, 4 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.outcome.summary.passed {
            0
        } else {
            4
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    path.with_file_name(format!("{stem}.{suffix}.json"))
}

pub fn write_table(table: &ResultTable, path: &Path, format: OutputFormat) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let out = BufWriter::new(File::create(path)?);
    match format {
        OutputFormat::Csv => table.write_csv(out),
        OutputFormat::Json => table.write_json(out),
    }
}

/// Runs `cfg`. With an output path, writes the table there plus
/// `<stem>.summary.json` and `<stem>.manifest.json` beside it.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let outcome = run_experiment(cfg)?;
    let manifest = Manifest {
        config: cfg.clone(),
        seed: cfg.alphas.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        elapsed_s: clock.elapsed().as_secs_f64(),
    };
    let mut artifacts = Vec::new();
    if let Some(out) = &cfg.output {
        write_table(&outcome.table, &out.path, out.format)?;
        artifacts.push(out.path.clone());
        let summary_path = sibling(&out.path, "summary");
        serde_json::to_writer_pretty(BufWriter::new(File::create(&summary_path)?), &outcome.summary)?;
        artifacts.push(summary_path);
        let manifest_path = sibling(&out.path, "manifest");
        serde_json::to_writer_pretty(BufWriter::new(File::create(&manifest_path)?), &manifest)?;
        artifacts.push(manifest_path);
    }
    Ok(RunReport {
        outcome,
        manifest,
        artifacts,
    })
}

/// Loads a TOML config and runs it.
pub fn run_config(path: impl AsRef<Path>) -> Result<RunReport> {
    run(&ExperimentConfig::load(path)?)
}
