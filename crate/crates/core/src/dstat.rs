//! The smoothed pair count
//!
//! ```text
//! D(N,M)(α) = Σ_{m≠n≤N} F_M(α a(n) − α a(m))
//! ```
//!
//! evaluated exactly on its support, plus its Monte-Carlo mean and variance,
//! the Fourier-side variance formula over the difference histogram, GCD sums
//! and the GCD kernel estimate.

use std::f64::consts::PI;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;

use crate::circle::{default_bits, dyadic_to_f64, orbit, AngleSampler, FixedPointAngle};
use crate::energy::{additive_energy, difference_histogram, DifferenceHistogram};
use crate::error::{Error, Result};
use crate::sequences::IntegerSequence;
use crate::window::{WindowKind, WindowSpec};

pub const MAX_FOURIER_N: usize = 64;
pub const MAX_GCD_SUM_KEYS: usize = 50_000;
/// Default Fourier truncation is `K_max = 200·M`.
pub const DEFAULT_K_FACTOR: u64 = 200;
/// Default `ε` in the reported bound `(1/M) N^ε E(𝒜,N)`.
pub const DEFAULT_EPSILON: f64 = 0.1;

const COEFF_TABLE_LIMIT: u64 = 4_000_000;

#[derive(Clone, Debug, Serialize)]
pub struct DStatResult {
    pub value: f64,
    pub n: usize,
    pub m: u64,
    pub alpha: FixedPointAngle,
    pub window: WindowKind,
    /// Ordered pairs at circle distance `< 1/(2M)`, the open support of `F_M`.
    pub contributing_pairs: u64,
}

/// `D` and its contributing pair count for raw points at precision `bits`.
///
/// Sorts the points and sweeps forward around the circle from each one
/// until the cyclic distance reaches `1/(2M)`. Terms are accumulated in
/// `(max index, min index)` order, so for a fixed angle the float value is
/// exactly monotone in `N`.
pub fn d_statistic_points(points: &[BigUint], bits: u32, m: u64, w: &WindowSpec) -> (f64, u64) {
    let n = points.len();
    let full = BigUint::one() << bits;
    // d < 2^B/(2M) ⇔ d < ⌈2^B/(2M)⌉ for integer d
    let threshold = Integer::div_ceil(&full, &BigUint::from(2 * m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| points[i].cmp(&points[j]).then(i.cmp(&j)));

    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        for step in 1..n {
            let k_pos = pos + step;
            let diff = if k_pos < n {
                &points[order[k_pos]] - &points[i]
            } else {
                &points[order[k_pos - n]] + &full - &points[i]
            };
            if diff >= threshold {
                break;
            }
            let k = order[k_pos % n];
            let term = w.eval_at_distance(m, dyadic_to_f64(&diff, bits));
            pairs.push((i.max(k), i.min(k), term));
        }
    }
    pairs.sort_unstable_by_key(|p| (p.0, p.1));
    let sum: f64 = pairs.iter().map(|p| p.2).sum();
    (2.0 * sum, 2 * pairs.len() as u64)
}

pub fn d_statistic(
    seq: &IntegerSequence,
    n: usize,
    m: u64,
    alpha: &FixedPointAngle,
    w: &WindowSpec,
) -> Result<DStatResult> {
    check_nm(n, m)?;
    let o = orbit(alpha, seq, n)?;
    let (value, contributing_pairs) = d_statistic_points(o.mantissas(), o.bits(), m, w);
    Ok(DStatResult {
        value,
        n,
        m,
        alpha: alpha.clone(),
        window: w.kind(),
        contributing_pairs,
    })
}

fn check_nm(n: usize, m: u64) -> Result<()> {
    if n < 2 {
        return Err(Error::argument(format!("N must be ≥ 2, got {n}")));
    }
    if m < 1 {
        return Err(Error::argument("M must be ≥ 1"));
    }
    Ok(())
}

/// Pair correlation `D(N,N)(α)/N`.
pub fn pair_correlation(
    seq: &IntegerSequence,
    n: usize,
    alpha: &FixedPointAngle,
    w: &WindowSpec,
) -> Result<f64> {
    Ok(d_statistic(seq, n, n as u64, alpha, w)?.value / n as f64)
}

/// Angle sampling for Monte-Carlo runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sampling {
    pub samples: usize,
    pub seed: u64,
    /// Angle precision; `None` picks [`default_bits`].
    pub bits: Option<u32>,
}

impl Sampling {
    pub fn new(samples: usize, seed: u64) -> Self {
        Sampling {
            samples,
            seed,
            bits: None,
        }
    }
}

/// `D(N,M)(α_i)` for `i = 0..samples`, in sample order.
pub fn d_samples(
    seq: &IntegerSequence,
    n: usize,
    m: u64,
    w: &WindowSpec,
    sampling: Sampling,
) -> Result<Vec<f64>> {
    check_nm(n, m)?;
    seq.prefix(n)?;
    let bits = sampling.bits.unwrap_or_else(|| default_bits(seq, n));
    let sampler = AngleSampler::new(sampling.seed);
    (0..sampling.samples as u64)
        .into_par_iter()
        .map(|i| {
            let alpha = sampler.angle(i, bits);
            let o = orbit(&alpha, seq, n)?;
            Ok(d_statistic_points(o.mantissas(), bits, m, w).0)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct VarianceReport {
    pub n: usize,
    pub m: u64,
    pub window: WindowKind,
    pub samples: usize,
    pub seed: u64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub mc_variance: f64,
    /// Standard error of `mc_variance` from batch variances.
    pub mc_variance_stderr: f64,
    pub fourier_variance: Option<f64>,
    pub truncation_k: Option<u64>,
    pub fourier_tail: Option<f64>,
    /// `(1/M) N^ε E(𝒜,N)` with constant 1; reported, never asserted.
    pub bound_rhs: f64,
    pub epsilon: f64,
    pub warnings: Vec<String>,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn batched_variance_stderr(xs: &[f64]) -> f64 {
    let batches = if xs.len() >= 2000 { 20 } else { 10 };
    let size = xs.len() / batches;
    if size < 2 {
        return f64::NAN;
    }
    let vars: Vec<f64> = xs.chunks(size).take(batches).map(|c| mean_var(c).1).collect();
    let (_, v) = mean_var(&vars);
    (v / batches as f64).sqrt()
}

fn report_from_samples(
    seq: &IntegerSequence,
    n: usize,
    m: u64,
    w: &WindowSpec,
    sampling: Sampling,
    xs: &[f64],
    epsilon: f64,
) -> Result<VarianceReport> {
    let (mean, var) = mean_var(xs);
    let energy = additive_energy(seq, n)?;
    let bound_rhs = (n as f64).powf(epsilon) * energy.energy.to_f64().unwrap_or(f64::INFINITY)
        / m as f64;
    Ok(VarianceReport {
        n,
        m,
        window: w.kind(),
        samples: xs.len(),
        seed: sampling.seed,
        mc_mean: mean,
        mc_stderr: (var / xs.len() as f64).sqrt(),
        mc_variance: var,
        mc_variance_stderr: batched_variance_stderr(xs),
        fourier_variance: None,
        truncation_k: None,
        fourier_tail: None,
        bound_rhs,
        epsilon,
        warnings: Vec::new(),
    })
}

/// Monte-Carlo mean of `D` over sampled angles; compare with `N(N−1)/M`.
pub fn d_mean_mc(
    seq: &IntegerSequence,
    n: usize,
    m: u64,
    w: &WindowSpec,
    sampling: Sampling,
) -> Result<VarianceReport> {
    if sampling.samples < 2 {
        return Err(Error::argument("the mean estimate needs at least 2 samples"));
    }
    let xs = d_samples(seq, n, m, w, sampling)?;
    report_from_samples(seq, n, m, w, sampling, &xs, DEFAULT_EPSILON)
}

/// Monte-Carlo mean and unbiased variance of `D`.
pub fn d_variance_mc(
    seq: &IntegerSequence,
    n: usize,
    m: u64,
    w: &WindowSpec,
    sampling: Sampling,
    epsilon: f64,
) -> Result<VarianceReport> {
    if sampling.samples < 100 {
        return Err(Error::argument("the variance estimate needs at least 100 samples"));
    }
    let xs = d_samples(seq, n, m, w, sampling)?;
    report_from_samples(seq, n, m, w, sampling, &xs, epsilon)
}

/// Expected value `∫₀¹ D(N,M)(α) dα = N(N−1)/M`.
pub fn d_mean_exact(n: usize, m: u64) -> f64 {
    (n as f64) * (n as f64 - 1.0) / m as f64
}

/// `c(k) = f̂(k/M)/M`, tabulated up to `K_max` when that is affordable.
struct Coefficients<'a> {
    w: &'a WindowSpec,
    m: u64,
    table: Option<Vec<f64>>,
    zero_beyond: Option<u64>,
}

impl<'a> Coefficients<'a> {
    fn new(w: &'a WindowSpec, m: u64, k_max: u64) -> Self {
        let zero_beyond = w.fourier_cutoff().map(|c| (c * m as f64).ceil() as u64);
        let top = zero_beyond.map_or(k_max, |z| z.min(k_max));
        let table = (top <= COEFF_TABLE_LIMIT).then(|| w.coefficient_table(m, top));
        Coefficients {
            w,
            m,
            table,
            zero_beyond,
        }
    }

    fn get(&self, k: u64) -> f64 {
        if self.zero_beyond.is_some_and(|z| k > z) {
            return 0.0;
        }
        match &self.table {
            Some(t) => t[k as usize],
            None => self.w.coefficient(k as i64, self.m),
        }
    }
}

/// `Σ_{ℓ≥1, ℓ·max(q₁,q₂) ≤ K} c(ℓq₁)c(ℓq₂)`, and a bound on the omitted tail.
fn kernel_half_sum(coeffs: &Coefficients<'_>, q1: u64, q2: u64, k_max: u64) -> (f64, f64) {
    let q_max = q1.max(q2);
    let last = k_max / q_max;
    let mut sum = 0.0;
    for l in 1..=last {
        sum += coeffs.get(l * q1) * coeffs.get(l * q2);
    }
    (sum, kernel_tail_bound(coeffs, q1, q2, last))
}

/// Bound on `Σ_{ℓ>L} |c(ℓq₁)c(ℓq₂)|` from `|f̂(y)| ≤ κ/y²`, `κ = ∫|f''|/4π²`.
fn kernel_tail_bound(coeffs: &Coefficients<'_>, q1: u64, q2: u64, last: u64) -> f64 {
    let m = coeffs.m as f64;
    if let Some(z) = coeffs.zero_beyond {
        if (last + 1) * q1.min(q2) > z {
            return 0.0;
        }
    }
    let kappa = coeffs.w.second_variation() / (4.0 * PI * PI);
    let zeta_tail = if last == 0 {
        PI.powi(4) / 90.0
    } else {
        1.0 / (3.0 * (last as f64).powi(3))
    };
    kappa * kappa * m * m / ((q1 as f64).powi(2) * (q2 as f64).powi(2)) * zeta_tail
}

#[derive(Clone, Debug, Serialize)]
pub struct FourierVariance {
    pub value: f64,
    pub k_max: u64,
    /// Upper bound on the mass dropped by truncating at `K_max`.
    pub tail_bound: f64,
    pub warning: Option<String>,
}

/// Reduced quotients `(|v₁|/g, |v₂|/g)` when both fit in `u64`.
fn reduced(u1: &BigUint, u2: &BigUint) -> (BigUint, Option<(u64, u64)>) {
    let g = u1.gcd(u2);
    let q = (u1 / &g).to_u64().zip((u2 / &g).to_u64());
    (g, q)
}

/// The truncated variance
/// `Σ_{v₁,v₂≠0} R(v₁)R(v₂) Σ_{k₁,k₂≠0, |kᵢ|≤K} c(k₁)c(k₂) δ(k₁v₁ = k₂v₂)`.
///
/// The solutions of `k₁v₁ = k₂v₂` are `(k₁,k₂) = ℓ(v₂/g, v₁/g)`, `ℓ ≠ 0`;
/// both signs of `ℓ` and of each `v` give the same product because `c` is
/// even, which yields the factor `4·2` over positive `v` and `ℓ`.
pub fn d_variance_fourier(
    seq: &IntegerSequence,
    n: usize,
    m: u64,
    w: &WindowSpec,
    k_max: u64,
) -> Result<FourierVariance> {
    check_nm(n, m)?;
    if n > MAX_FOURIER_N {
        return Err(Error::resource(
            "fourier-variance",
            format!("N = {n} exceeds {MAX_FOURIER_N} for the exact Fourier double sum"),
        ));
    }
    if k_max < 16 * m {
        return Err(Error::argument(format!(
            "K_max = {k_max} is below 16·M = {}",
            16 * m
        )));
    }
    let hist = difference_histogram(seq, n)?;
    Ok(fourier_variance_from_histogram(&hist, m, w, k_max))
}

pub fn fourier_variance_from_histogram(
    hist: &DifferenceHistogram,
    m: u64,
    w: &WindowSpec,
    k_max: u64,
) -> FourierVariance {
    let coeffs = Coefficients::new(w, m, k_max);
    let entries = hist.positive_entries();
    let rows: Vec<(f64, f64)> = (0..entries.len())
        .into_par_iter()
        .map(|i| {
            let (u1, r1) = &entries[i];
            let mut sum = 0.0;
            let mut tail = 0.0;
            for (j, (u2, r2)) in entries.iter().enumerate().skip(i) {
                let weight = (*r1 as f64) * (*r2 as f64) * if j == i { 1.0 } else { 2.0 };
                let (_, q) = reduced(u1, u2);
                match q {
                    Some((q1, q2)) if q1.max(q2) <= k_max => {
                        let (s, t) = kernel_half_sum(&coeffs, q1, q2, k_max);
                        sum += weight * s;
                        tail += weight * t;
                    }
                    Some((q1, q2)) => tail += weight * kernel_tail_bound(&coeffs, q1, q2, 0),
                    None => {}
                }
            }
            (sum, tail)
        })
        .collect();
    let (sum, tail) = rows
        .iter()
        .fold((0.0, 0.0), |(s, t), (rs, rt)| (s + rs, t + rt));
    let value = 8.0 * sum;
    let tail_bound = 8.0 * tail;
    let warning = (tail_bound > 0.01 * value.abs()).then(|| {
        format!(
            "K_max = {k_max} may be too small: estimated tail {tail_bound:.3e} exceeds 1% of {value:.3e}"
        )
    });
    FourierVariance {
        value,
        k_max,
        tail_bound,
        warning,
    }
}

/// `Σ_{v₁,v₂≠0} R(v₁)R(v₂) gcd(v₁,v₂)/√|v₁v₂|`.
pub fn gcd_sum(hist: &DifferenceHistogram) -> Result<f64> {
    let entries = hist.positive_entries();
    if entries.len() > MAX_GCD_SUM_KEYS {
        return Err(Error::resource(
            "gcd-sum",
            format!(
                "{} distinct differences exceed {MAX_GCD_SUM_KEYS} for the O(V²) sum",
                entries.len()
            ),
        ));
    }
    let small: Option<Vec<(u64, u64)>> = entries
        .iter()
        .map(|(u, r)| u.to_u64().map(|u| (u, *r)))
        .collect();
    // |v₁| = |v₂| terms equal R² exactly and are kept out of the float sum.
    let diag: f64 = entries.iter().map(|(_, r)| (*r as f64) * (*r as f64)).sum();
    let rows: Vec<f64> = match &small {
        Some(vals) => (0..vals.len())
            .into_par_iter()
            .map(|i| {
                let (u1, r1) = vals[i];
                let s1 = (u1 as f64).sqrt();
                vals[i + 1..]
                    .iter()
                    .map(|&(u2, r2)| {
                        let g = u1.gcd(&u2) as f64;
                        (r1 as f64) * (r2 as f64) * g / (s1 * (u2 as f64).sqrt())
                    })
                    .sum()
            })
            .collect(),
        None => (0..entries.len())
            .into_par_iter()
            .map(|i| {
                let (u1, r1) = &entries[i];
                entries[i + 1..]
                    .iter()
                    .map(|(u2, r2)| {
                        let g = u1.gcd(u2);
                        let ratio = (big_sqrt_ratio(&g, u1)) * (big_sqrt_ratio(&g, u2));
                        (*r1 as f64) * (*r2 as f64) * ratio
                    })
                    .sum()
            })
            .collect(),
    };
    let off: f64 = rows.iter().sum();
    // 4 sign patterns; off-diagonal pairs appear in both orders
    Ok(4.0 * (diag + 2.0 * off))
}

/// `√(g/u)` for big integers `g | u`.
fn big_sqrt_ratio(g: &BigUint, u: &BigUint) -> f64 {
    let q = u / g;
    match q.to_f64() {
        Some(x) if x.is_finite() => 1.0 / x.sqrt(),
        _ => 0.0,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GcdSumReport {
    pub n: usize,
    pub gcd_sum: f64,
    /// `Σ_{v≠0} R(v)²`.
    pub diag_sum: f64,
    /// `exp(10 log N / log log N)`.
    pub growth_factor: f64,
    /// `gcd_sum / (growth_factor · diag_sum)`; reported, not asserted.
    pub ratio: f64,
}

pub fn gcd_sum_report(hist: &DifferenceHistogram) -> Result<GcdSumReport> {
    let s = gcd_sum(hist)?;
    let diag = hist.diag_sum().to_f64().unwrap_or(f64::INFINITY);
    let ln = (hist.n() as f64).ln();
    let growth_factor = (10.0 * ln / ln.ln()).exp();
    Ok(GcdSumReport {
        n: hist.n(),
        gcd_sum: s,
        diag_sum: diag,
        growth_factor,
        ratio: s / (growth_factor * diag),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelCheck {
    /// Truncated `Σ_{k₁,k₂≠0} c(k₁)c(k₂) δ(k₁v₁ = k₂v₂)`.
    pub lhs: f64,
    /// `(1/M) gcd(v₁,v₂)/√|v₁v₂|`.
    pub rhs: f64,
    pub tail_bound: f64,
}

/// Precomputed coefficients for repeated kernel checks at one `(M, K_max)`.
pub struct KernelTable<'a> {
    coeffs: Coefficients<'a>,
    k_max: u64,
}

impl<'a> KernelTable<'a> {
    pub fn new(w: &'a WindowSpec, m: u64, k_max: u64) -> Result<Self> {
        if m < 1 {
            return Err(Error::argument("M must be ≥ 1"));
        }
        Ok(KernelTable {
            coeffs: Coefficients::new(w, m, k_max),
            k_max,
        })
    }

    pub fn check(&self, v1: i64, v2: i64) -> Result<KernelCheck> {
        if v1 == 0 || v2 == 0 {
            return Err(Error::argument("v₁ and v₂ must be nonzero"));
        }
        let (u1, u2) = (v1.unsigned_abs(), v2.unsigned_abs());
        let g = u1.gcd(&u2);
        let (q1, q2) = (u1 / g, u2 / g);
        let (half, tail) = if q1.max(q2) <= self.k_max {
            kernel_half_sum(&self.coeffs, q1, q2, self.k_max)
        } else {
            (0.0, kernel_tail_bound(&self.coeffs, q1, q2, 0))
        };
        let rhs = g as f64 / (self.coeffs.m as f64 * ((u1 as f64) * (u2 as f64)).sqrt());
        Ok(KernelCheck {
            lhs: 2.0 * half,
            rhs,
            tail_bound: 2.0 * tail,
        })
    }
}

pub fn gcd_kernel_check(v1: i64, v2: i64, m: u64, w: &WindowSpec, k_max: u64) -> Result<KernelCheck> {
    KernelTable::new(w, m, k_max)?.check(v1, v2)
}
