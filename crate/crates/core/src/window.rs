//! Window functions `f ≥ 0` of unit mass supported in `[−1/2, 1/2]`, their
//! periodizations `F_M(x) = Σ_j f(M(x + j))` and Fourier transforms
//! `f̂(y) = ∫ f(x) e^{−2πixy} dx`.

pub mod quad;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// `f(x) = 2·max(0, 1 − 2|x|)`.
    #[default]
    Triangle,
    /// `f(x) = c·exp(−1/(1 − (2x)²))` on `|x| < 1/2`.
    Bump,
}

impl WindowKind {
    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Triangle => "triangle",
            WindowKind::Bump => "bump",
        }
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangle" => Ok(WindowKind::Triangle),
            "bump" => Ok(WindowKind::Bump),
            _ => Err(Error::config(format!(
                "unknown window {s:?} (expected triangle or bump)"
            ))),
        }
    }
}

/// Frozen constants `C_w` with `Σ_{ℓ≠0} f̂(aℓ)² ≤ C_w / a²` for `a ≥ 8`.
/// Measured by a sweep over `a ∈ [8, 64]` (see the window tests).
pub const TRIANGLE_DECAY_CONSTANT: f64 = 5.0e-3;
pub const BUMP_DECAY_CONSTANT: f64 = 1.5e-3;

/// Frozen constants `C_w` with
/// `Σ_{k₁v₁=k₂v₂} c(k₁)c(k₂) ≤ C_w · (1/M) gcd(v₁,v₂)/√|v₁v₂|`.
///
/// By Cauchy–Schwarz it suffices that `Σ_{ℓ≠0} f̂(aℓ)² ≤ C_w/a` for all
/// `a > 0`, which holds with `C_w = max(∫f², 2ζ(4)(∫|f''|/4π²)²)`.
pub const TRIANGLE_KERNEL_CONSTANT: f64 = 4.0 / 3.0;
pub const BUMP_KERNEL_CONSTANT: f64 = 1.36;

const BUMP_PANELS: usize = 256;
const BUMP_FOURIER_CUTOFF: f64 = 600.0;
const ROTATION_BLOCK: usize = 256;

/// An immutable window with its precomputed constants.
#[derive(Clone, Debug)]
pub struct WindowSpec {
    kind: WindowKind,
    normalization: f64,
    threshold_ok: bool,
    l2_norm_sq: f64,
    second_variation: f64,
    // (x, 2·w·f(x)) on [0, 1/2]; bump only
    fourier_nodes: Option<Arc<Vec<(f64, f64)>>>,
}

fn bump_profile(u: f64) -> f64 {
    let t = 1.0 - u * u;
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Second derivative of `exp(−1/(1−u²))`.
fn bump_profile_dd(u: f64) -> f64 {
    let t = 1.0 - u * u;
    if t <= 1.5e-3 {
        return 0.0;
    }
    let g1 = -2.0 * u / (t * t);
    let g2 = -2.0 * (1.0 + 3.0 * u * u) / (t * t * t);
    bump_profile(u) * (g1 * g1 + g2)
}

impl WindowSpec {
    pub fn new(kind: WindowKind) -> Self {
        match kind {
            WindowKind::Triangle => WindowSpec::triangle(),
            WindowKind::Bump => WindowSpec::bump(),
        }
    }

    pub fn triangle() -> Self {
        let w = WindowSpec {
            kind: WindowKind::Triangle,
            normalization: 2.0,
            threshold_ok: false,
            l2_norm_sq: 4.0 / 3.0,
            // f'' = 4δ(x+1/2) − 8δ(x) + 4δ(x−1/2)
            second_variation: 16.0,
            fourier_nodes: None,
        };
        w.validated()
    }

    /// The bump window; its constants are computed once per process.
    pub fn bump() -> Self {
        static BUMP: OnceLock<WindowSpec> = OnceLock::new();
        BUMP.get_or_init(|| {
            let tol = 1e-15;
            let mass = 2.0 * quad::integrate(|x| bump_profile(2.0 * x), 0.0, 0.5, tol);
            let c = 1.0 / mass;
            let l2 = 2.0 * c * c * quad::integrate(|x| bump_profile(2.0 * x).powi(2), 0.0, 0.5, tol);
            let var = 2.0 * 4.0 * c * quad::integrate(|x| bump_profile_dd(2.0 * x).abs(), 0.0, 0.5, 1e-13);
            let step = 0.5 / BUMP_PANELS as f64;
            let nodes = (0..BUMP_PANELS)
                .flat_map(|p| quad::kronrod15_nodes(p as f64 * step, (p + 1) as f64 * step))
                .map(|(x, w)| (x, 2.0 * w * c * bump_profile(2.0 * x)))
                .collect();
            WindowSpec {
                kind: WindowKind::Bump,
                normalization: c,
                threshold_ok: false,
                l2_norm_sq: l2,
                second_variation: var,
                fourier_nodes: Some(Arc::new(nodes)),
            }
            .validated()
        })
        .clone()
    }

    fn validated(mut self) -> Self {
        let mass = 2.0 * quad::integrate(|x| self.eval(x), 0.0, 0.5, 1e-15);
        assert!(
            (mass - 1.0).abs() <= 1e-12,
            "{} window has mass {mass}",
            self.kind
        );
        // f is even and nonincreasing in |x|, so f(1/4) ≥ 1 decides the
        // threshold property; the grid guards against a mis-specified shape.
        self.threshold_ok = (0..=256).all(|i| self.eval(0.25 * i as f64 / 256.0) >= 1.0);
        self
    }

    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    /// Peak-scale constant: 2 for the triangle, `c` for the bump.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// True iff `f(x) ≥ 1` for all `|x| ≤ 1/4`.
    pub fn threshold_ok(&self) -> bool {
        self.threshold_ok
    }

    /// `∫ f²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_norm_sq
    }

    /// `∫ |f''|` (as a measure for the triangle).
    pub fn second_variation(&self) -> f64 {
        self.second_variation
    }

    pub fn decay_constant(&self) -> f64 {
        match self.kind {
            WindowKind::Triangle => TRIANGLE_DECAY_CONSTANT,
            WindowKind::Bump => BUMP_DECAY_CONSTANT,
        }
    }

    pub fn kernel_constant(&self) -> f64 {
        match self.kind {
            WindowKind::Triangle => TRIANGLE_KERNEL_CONSTANT,
            WindowKind::Bump => BUMP_KERNEL_CONSTANT,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax >= 0.5 {
            return 0.0;
        }
        match self.kind {
            WindowKind::Triangle => 2.0 * (1.0 - 2.0 * ax),
            WindowKind::Bump => self.normalization * bump_profile(2.0 * x),
        }
    }

    /// `F_M(x)`; only `j ∈ {−1, 0}` can contribute once `x` is reduced to `[0, 1)`.
    pub fn eval_periodized(&self, m: u64, x: f64) -> f64 {
        let r = x.rem_euclid(1.0);
        let mf = m as f64;
        self.eval(mf * r) + self.eval(mf * (r - 1.0))
    }

    /// `F_M` at a point whose circle distance to 0 is `d ∈ [0, 1/2]`.
    pub fn eval_at_distance(&self, m: u64, d: f64) -> f64 {
        self.eval(m as f64 * d)
    }

    pub fn fourier(&self, y: f64) -> f64 {
        match self.kind {
            WindowKind::Triangle => {
                let t = 0.5 * PI * y;
                if t.abs() < 1e-8 {
                    1.0 - t * t / 3.0
                } else {
                    let s = t.sin() / t;
                    s * s
                }
            }
            WindowKind::Bump => {
                if y.abs() > BUMP_FOURIER_CUTOFF {
                    return 0.0;
                }
                let nodes = self.fourier_nodes.as_ref().expect("bump table");
                let w = 2.0 * PI * y;
                nodes.iter().map(|&(x, wf)| wf * (w * x).cos()).sum()
            }
        }
    }

    /// `|f̂(y)| ≤ min(1, ∫|f''| / (4π²y²))`.
    pub fn fourier_envelope(&self, y: f64) -> f64 {
        if y == 0.0 {
            return 1.0;
        }
        (self.second_variation / (4.0 * PI * PI * y * y)).min(1.0)
    }

    /// Frequency beyond which `f̂` is numerically zero (`|f̂| < 10⁻¹⁸`), if
    /// the window decays faster than any power. The triangle has no cutoff.
    pub fn fourier_cutoff(&self) -> Option<f64> {
        match self.kind {
            WindowKind::Triangle => None,
            WindowKind::Bump => Some(BUMP_FOURIER_CUTOFF),
        }
    }

    /// Fourier coefficient `c(k) = f̂(k/M) / M` of `F_M`.
    pub fn coefficient(&self, k: i64, m: u64) -> f64 {
        let mf = m as f64;
        self.fourier(k as f64 / mf) / mf
    }

    /// `c(k)` for `k = 0..=k_max`. The bump uses phase rotation along `k`,
    /// re-anchored every [`ROTATION_BLOCK`] steps, instead of one cosine per
    /// node and frequency.
    pub fn coefficient_table(&self, m: u64, k_max: u64) -> Vec<f64> {
        let mf = m as f64;
        let len = k_max as usize + 1;
        let Some(nodes) = &self.fourier_nodes else {
            return (0..len)
                .into_par_iter()
                .map(|k| self.coefficient(k as i64, m))
                .collect();
        };
        let top = self
            .fourier_cutoff()
            .map_or(len, |c| ((c * mf).ceil() as usize + 1).min(len));
        let mut out = vec![0.0; len];
        out[..top]
            .par_chunks_mut(ROTATION_BLOCK)
            .enumerate()
            .for_each(|(b, chunk)| {
                let k0 = (b * ROTATION_BLOCK) as f64;
                for &(x, wf) in nodes.iter() {
                    let step = 2.0 * PI * x / mf;
                    let (mut s, mut c) = (step * k0).sin_cos();
                    let (ds, dc) = step.sin_cos();
                    for v in chunk.iter_mut() {
                        *v += wf * c;
                        (s, c) = (s * dc + c * ds, c * dc - s * ds);
                    }
                }
                for v in chunk.iter_mut() {
                    *v /= mf;
                }
            });
        out
    }

    /// `Σ_{ℓ≠0} f̂(aℓ)²`, summed until the envelope tail drops below `tol`.
    pub fn lattice_square_sum(&self, a: f64, tol: f64) -> f64 {
        assert!(a > 0.0);
        let k = self.second_variation / (4.0 * PI * PI);
        let mut sum = 0.0;
        let mut l = 1u64;
        loop {
            let y = a * l as f64;
            let v = self.fourier(y);
            sum += 2.0 * v * v;
            // Σ_{j>l} (k/(a j)²)² ≤ k²/(3 a⁴ l³)
            let tail = 2.0 * k * k / (3.0 * a.powi(4) * (l as f64).powi(3));
            if (y > 1.0 && tail < tol) || self.fourier_cutoff().is_some_and(|c| y > c) {
                return sum;
            }
            l += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fourier_by_quadrature(w: &WindowSpec, y: f64) -> f64 {
        let panels = (4.0 * y.abs()).ceil().max(1.0) as usize;
        let h = 0.5 / panels as f64;
        (0..panels)
            .map(|p| {
                2.0 * quad::integrate(
                    |x| w.eval(x) * (2.0 * PI * x * y).cos(),
                    p as f64 * h,
                    (p + 1) as f64 * h,
                    1e-15,
                )
            })
            .sum()
    }

    #[test]
    fn triangle_examples() {
        let w = WindowSpec::triangle();
        assert_eq!(w.eval(0.0), 2.0);
        assert_eq!(w.eval(0.25), 1.0);
        assert_eq!(w.eval(-0.25), 1.0);
        assert_eq!(w.eval(0.5), 0.0);
        assert_eq!(w.eval(0.7), 0.0);
        assert!(w.threshold_ok());
        assert_eq!(w.eval_periodized(10, 0.0), 2.0);
        assert_eq!(w.eval_periodized(10, 0.5), 0.0);
        assert!((w.eval_periodized(10, 0.99) - 1.6).abs() < 1e-12);
        assert!((w.eval_periodized(10, 1.01) - 1.6).abs() < 1e-12);
        assert_eq!(w.fourier(0.0), 1.0);
        assert!(w.fourier(2.0).abs() < 1e-30);
    }

    #[test]
    fn bump_examples() {
        let w = WindowSpec::bump();
        assert!(w.threshold_ok());
        let v = w.eval(0.25);
        assert!(v >= 1.0 && (v - 1.19).abs() < 0.01, "f(1/4) = {v}");
        assert!((w.fourier(0.0) - 1.0).abs() < 1e-12);
        // ∫ exp(−1/(1−u²)) du over (−1, 1)
        assert!((2.0 / w.normalization() - 0.443_993_816_168_079_4).abs() < 1e-12);
        assert_eq!(w.eval(0.5), 0.0);
        assert!(w.eval(0.499_999) >= 0.0);
    }

    #[test]
    fn triangle_closed_form_matches_quadrature() {
        let w = WindowSpec::triangle();
        for i in 0..1000 {
            let y = -25.0 + 50.0 * i as f64 / 999.0;
            let q = fourier_by_quadrature(&w, y);
            assert!((w.fourier(y) - q).abs() < 1e-11, "y = {y}");
        }
    }

    #[test]
    fn coefficient_table_matches_direct_evaluation() {
        for w in [WindowSpec::triangle(), WindowSpec::bump()] {
            for m in [1u64, 7, 100] {
                let table = w.coefficient_table(m, 3000);
                assert_eq!(table.len(), 3001);
                for (k, &c) in table.iter().enumerate() {
                    let direct = w.coefficient(k as i64, m);
                    assert!((c - direct).abs() < 1e-13 / m as f64, "{} M={m} k={k}", w.kind());
                }
            }
        }
        // past the cutoff the bump table is exactly zero
        let t = WindowSpec::bump().coefficient_table(2, 1500);
        assert!(t[1201..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn bump_table_matches_adaptive_quadrature() {
        let w = WindowSpec::bump();
        for &y in &[0.0, 0.3, 1.0, 2.5, 7.0, 13.3, 40.0, 120.0, 400.0] {
            let q = fourier_by_quadrature(&w, y);
            assert!((w.fourier(y) - q).abs() < 1e-12, "y = {y}: {} vs {q}", w.fourier(y));
        }
    }

    #[test]
    fn fourier_is_even_and_bounded() {
        for w in [WindowSpec::triangle(), WindowSpec::bump()] {
            for i in 0..400 {
                let y = i as f64 * 0.173;
                let v = w.fourier(y);
                assert!((v - w.fourier(-y)).abs() < 1e-15);
                assert!(v.abs() <= 1.0 + 1e-12);
                assert!(v.abs() <= w.fourier_envelope(y) + 1e-12, "{} at {y}", w.kind());
            }
        }
    }

    #[test]
    fn triangle_decay_envelope() {
        let w = WindowSpec::triangle();
        for i in 1..200 {
            let y = 3.0 + i as f64 * 0.77;
            let env = (2.0 / (PI * y / 2.0)).powi(2) / 4.0;
            assert!(w.fourier(y) <= env + 1e-15);
        }
    }

    #[test]
    fn unit_mass_and_l2() {
        for w in [WindowSpec::triangle(), WindowSpec::bump()] {
            let mass = quad::integrate(|x| w.eval(x), -0.5, 0.5, 1e-14);
            assert!((mass - 1.0).abs() < 1e-12);
            let l2 = quad::integrate(|x| w.eval(x).powi(2), -0.5, 0.5, 1e-14);
            assert!((l2 - w.l2_norm_sq()).abs() < 1e-10);
        }
    }

    #[test]
    fn periodization_integrates_to_one_over_m() {
        for w in [WindowSpec::triangle(), WindowSpec::bump()] {
            for m in [1u64, 10, 1000] {
                let edge = 0.5 / m as f64;
                let f = |x: f64| w.eval_periodized(m, x);
                let mut total = quad::integrate(f, 0.0, edge, 1e-14)
                    + quad::integrate(f, 1.0 - edge, 1.0, 1e-14);
                if edge < 0.5 {
                    total += quad::integrate(f, edge, 1.0 - edge, 1e-14);
                }
                assert!((total - 1.0 / m as f64).abs() < 1e-9, "{} M={m}: {total}", w.kind());
            }
        }
    }

    #[test]
    fn riemann_sum_regime() {
        // Poisson summation gives a·Σ_{ℓ∈ℤ} f̂(aℓ)² = ∫f² for a ≤ 1, so the
        // ℓ ≠ 0 sum is exactly (∫f² − a)/a.
        for w in [WindowSpec::triangle(), WindowSpec::bump()] {
            let l2 = w.l2_norm_sq();
            for &a in &[0.125, 0.1, 0.0625, 0.03, 0.01] {
                let s = a * w.lattice_square_sum(a, 1e-13);
                assert!((s - (l2 - a)).abs() < 1e-8, "{} a={a}: {s}", w.kind());
                if a <= 0.0625 {
                    assert!((s - l2).abs() <= 0.05 * l2);
                }
            }
        }
    }

    #[test]
    fn decay_regime() {
        for w in [WindowSpec::triangle(), WindowSpec::bump()] {
            let mut worst: f64 = 0.0;
            for i in 0..=560 {
                let a = 8.0 + i as f64 * 0.1;
                let s = w.lattice_square_sum(a, 1e-20);
                worst = worst.max(a * a * s);
                assert!(s <= w.decay_constant() / (a * a), "{} a={a}", w.kind());
            }
            assert!(worst > 0.0);
        }
    }

    #[test]
    fn bump_is_negligible_past_cutoff() {
        let w = WindowSpec::bump();
        let cut = w.fourier_cutoff().unwrap();
        assert!(fourier_by_quadrature(&w, 300.0).abs() < 1e-14);
        for &y in &[cut, cut * 1.5, cut * 3.0] {
            assert!(w.fourier(y).abs() < 1e-14, "y = {y}: {}", w.fourier(y));
        }
    }

    #[test]
    fn kernel_constants_dominate_both_regimes() {
        let zeta4 = PI.powi(4) / 90.0;
        for w in [WindowSpec::triangle(), WindowSpec::bump()] {
            let k = w.second_variation() / (4.0 * PI * PI);
            let needed = w.l2_norm_sq().max(2.0 * zeta4 * k * k);
            assert!(w.kernel_constant() >= needed, "{}: {needed}", w.kind());
            for &a in &[0.01, 0.2, 0.9, 1.0, 1.3, 2.0, 5.5, 9.0] {
                assert!(w.lattice_square_sum(a, 1e-14) <= w.kernel_constant() / a);
            }
        }
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("bump".parse::<WindowKind>().unwrap(), WindowKind::Bump);
        assert_eq!("triangle".parse::<WindowKind>().unwrap(), WindowKind::Triangle);
        assert!("gauss".parse::<WindowKind>().is_err());
    }
}
