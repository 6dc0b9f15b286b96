//! Exact arithmetic on the circle `ℝ/ℤ` using `B`-bit dyadic points.
//!
//! An angle is `mantissa / 2^B` turns. Orbit points `α·a(n) mod 1` are
//! computed by one big-integer multiply and a reduction mod `2^B`, so every
//! gap statistic downstream is exact at resolution `2^-B`.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::sequences::{Family, IntegerSequence};

/// Precision floor for experiment runs. Library constructors accept any
/// `B ≥ 1` so small hand-checkable cases stay expressible.
pub const MIN_EXPERIMENT_BITS: u32 = 64;

/// Default precision for the dense and polynomial families.
pub const DEFAULT_BITS: u32 = 128;

fn pow2(bits: u32) -> BigUint {
    BigUint::one() << bits
}

fn low_bits(x: BigUint, bits: u32) -> BigUint {
    if x.bits() <= bits as u64 {
        x
    } else {
        x & (pow2(bits) - 1u32)
    }
}

/// `x · 2^exp` without intermediate overflow or underflow.
fn ldexp(mut x: f64, mut exp: i64) -> f64 {
    while exp > 1000 {
        x *= 2f64.powi(1000);
        exp -= 1000;
    }
    while exp < -1000 {
        x *= 2f64.powi(-1000);
        exp += 1000;
    }
    x * 2f64.powi(exp as i32)
}

/// `mantissa / 2^bits` rounded to the nearest `f64`.
pub fn dyadic_to_f64(mantissa: &BigUint, bits: u32) -> f64 {
    let len = mantissa.bits();
    if len == 0 {
        return 0.0;
    }
    let shift = len.saturating_sub(64);
    let top = (mantissa >> shift).to_u64().expect("at most 64 bits");
    ldexp(top as f64, shift as i64 - bits as i64)
}

/// Exact non-negative dyadic rational `mantissa / 2^bits`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dyadic {
    pub mantissa: BigUint,
    pub bits: u32,
}

impl Dyadic {
    pub fn new(mantissa: BigUint, bits: u32) -> Self {
        Dyadic { mantissa, bits }
    }

    pub fn zero(bits: u32) -> Self {
        Dyadic::new(BigUint::zero(), bits)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        dyadic_to_f64(&self.mantissa, self.bits)
    }

    /// Lowercase hex mantissa and decimal bit count, e.g. `8000:16`.
    pub fn to_hex(&self) -> String {
        format!("{:x}:{}", self.mantissa, self.bits)
    }

    /// 17 significant digits, enough to round-trip the `f64` value. Values
    /// below the `f64` range fall back to a `log₂`-based mantissa.
    pub fn to_decimal(&self) -> String {
        let x = self.to_f64();
        if x != 0.0 || self.is_zero() {
            return format!("{x:.16e}");
        }
        let log10 = self.log2() * std::f64::consts::LOG10_2;
        let exp = log10.floor();
        format!("{:.16}e{}", 10f64.powf(log10 - exp), exp as i64)
    }

    /// `log₂` of the value, `-∞` for zero; correct to about one ulp even
    /// when the value underflows `f64`.
    pub fn log2(&self) -> f64 {
        let len = self.mantissa.bits();
        if len == 0 {
            return f64::NEG_INFINITY;
        }
        let shift = len.saturating_sub(64);
        let top = (&self.mantissa >> shift).to_u64().expect("at most 64 bits");
        (top as f64).log2() + shift as f64 - self.bits as f64
    }

    /// Exact test `self ≤ num/den` for a positive rational.
    pub fn le_ratio(&self, num: &BigUint, den: &BigUint) -> bool {
        &self.mantissa * den <= num << self.bits
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// A point of `ℝ/ℤ` stored as `mantissa / 2^bits` with `mantissa < 2^bits`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FixedPointAngle {
    mantissa: BigUint,
    bits: u32,
}

impl FixedPointAngle {
    pub fn new(mantissa: BigUint, bits: u32) -> Result<Self> {
        if bits == 0 {
            return Err(Error::argument("angle precision must be at least 1 bit"));
        }
        if mantissa.bits() > bits as u64 {
            return Err(Error::argument(format!(
                "mantissa does not fit in {bits} bits"
            )));
        }
        Ok(FixedPointAngle { mantissa, bits })
    }

    pub fn zero(bits: u32) -> Self {
        FixedPointAngle {
            mantissa: BigUint::zero(),
            bits,
        }
    }

    /// `floor((p mod q) · 2^B / q) / 2^B`, within `2^-B` of `p/q mod 1`.
    pub fn from_rational(p: &BigInt, q: &BigInt, bits: u32) -> Result<Self> {
        if q.is_zero() {
            return Err(Error::argument("denominator must be nonzero"));
        }
        if bits == 0 {
            return Err(Error::argument("angle precision must be at least 1 bit"));
        }
        // p/q = (-p)/(-q), so normalise to a positive denominator.
        let (p, q) = if q.sign() == Sign::Minus {
            (-p, -q)
        } else {
            (p.clone(), q.clone())
        };
        let r = p.mod_floor(&q);
        let m = (r << bits) / &q;
        let mantissa = m.to_biguint().expect("non-negative");
        FixedPointAngle::new(mantissa, bits)
    }

    pub fn from_ratio_i64(p: i64, q: i64, bits: u32) -> Result<Self> {
        FixedPointAngle::from_rational(&BigInt::from(p), &BigInt::from(q), bits)
    }

    pub fn mantissa(&self) -> &BigUint {
        &self.mantissa
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn to_f64(&self) -> f64 {
        dyadic_to_f64(&self.mantissa, self.bits)
    }

    pub fn as_dyadic(&self) -> Dyadic {
        Dyadic::new(self.mantissa.clone(), self.bits)
    }

    pub fn to_hex(&self) -> String {
        format!("{:x}:{}", self.mantissa, self.bits)
    }

    /// The same angle at a higher precision (zero-extended mantissa).
    pub fn extend_bits(&self, bits: u32) -> Result<Self> {
        if bits < self.bits {
            return Err(Error::argument(format!(
                "cannot extend a {}-bit angle to {bits} bits",
                self.bits
            )));
        }
        Ok(FixedPointAngle {
            mantissa: &self.mantissa << (bits - self.bits),
            bits,
        })
    }

    /// Top `bits` bits of this angle (truncation towards zero).
    pub fn truncate_bits(&self, bits: u32) -> Result<Self> {
        if bits > self.bits || bits == 0 {
            return Err(Error::argument(format!(
                "cannot truncate a {}-bit angle to {bits} bits",
                self.bits
            )));
        }
        Ok(FixedPointAngle {
            mantissa: &self.mantissa >> (self.bits - bits),
            bits,
        })
    }

    /// `1 − α mod 1`.
    pub fn reflect(&self) -> Self {
        let mantissa = if self.mantissa.is_zero() {
            BigUint::zero()
        } else {
            pow2(self.bits) - &self.mantissa
        };
        FixedPointAngle {
            mantissa,
            bits: self.bits,
        }
    }

    /// `c·α mod 1` for any integer `c`.
    pub fn scale(&self, c: &BigInt) -> Self {
        FixedPointAngle {
            mantissa: mul_mod_pow2(&self.mantissa, c, self.bits),
            bits: self.bits,
        }
    }
}

impl fmt::Display for FixedPointAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for FixedPointAngle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (hex, bits) = s
            .split_once(':')
            .ok_or_else(|| Error::argument(format!("angle {s:?} is not of the form HEX:BITS")))?;
        let bits: u32 = bits
            .parse()
            .map_err(|_| Error::argument(format!("angle {s:?}: bad bit count")))?;
        let mantissa = BigUint::parse_bytes(hex.as_bytes(), 16)
            .ok_or_else(|| Error::argument(format!("angle {s:?}: bad hex mantissa")))?;
        FixedPointAngle::new(mantissa, bits)
    }
}

impl Serialize for FixedPointAngle {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

/// `(m · c) mod 2^bits`, reducing negative products into `[0, 2^bits)`.
fn mul_mod_pow2(m: &BigUint, c: &BigInt, bits: u32) -> BigUint {
    let r = low_bits(m * c.magnitude(), bits);
    if c.sign() == Sign::Minus && !r.is_zero() {
        pow2(bits) - r
    } else {
        r
    }
}

/// Uniform `B`-bit angle drawn from `rng`.
pub fn sample_angle<R: RngCore + ?Sized>(rng: &mut R, bits: u32) -> FixedPointAngle {
    let words = bits.div_ceil(32) as usize;
    let digits: Vec<u32> = (0..words).map(|_| rng.next_u32()).collect();
    let mantissa = low_bits(BigUint::new(digits), bits);
    FixedPointAngle { mantissa, bits }
}

/// Seeded source of angles: sample `i` comes from ChaCha stream `i`, so the
/// angle depends only on `(seed, i)` and never on scheduling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AngleSampler {
    seed: u64,
}

impl AngleSampler {
    pub fn new(seed: u64) -> Self {
        AngleSampler { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    pub fn angle(&self, index: u64, bits: u32) -> FixedPointAngle {
        sample_angle(&mut self.stream(index), bits)
    }
}

/// The points `α·a(n) mod 1` for `n = 1..N`.
#[derive(Clone, Debug)]
pub struct Orbit {
    mantissas: Vec<BigUint>,
    bits: u32,
    source: String,
    alpha: Option<FixedPointAngle>,
}

impl Orbit {
    /// An orbit built directly from points, for synthetic configurations.
    pub fn from_points(source: impl Into<String>, points: &[FixedPointAngle]) -> Result<Self> {
        let bits = points
            .first()
            .map(|p| p.bits)
            .ok_or_else(|| Error::argument("an orbit needs at least one point"))?;
        if points.iter().any(|p| p.bits != bits) {
            return Err(Error::argument("all orbit points must share one precision"));
        }
        Ok(Orbit {
            mantissas: points.iter().map(|p| p.mantissa.clone()).collect(),
            bits,
            source: source.into(),
            alpha: None,
        })
    }

    pub fn len(&self) -> usize {
        self.mantissas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mantissas.is_empty()
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn alpha(&self) -> Option<&FixedPointAngle> {
        self.alpha.as_ref()
    }

    pub fn mantissas(&self) -> &[BigUint] {
        &self.mantissas
    }

    /// Point `x_n` for `1 ≤ n ≤ N`.
    pub fn point(&self, n: usize) -> FixedPointAngle {
        FixedPointAngle {
            mantissa: self.mantissas[n - 1].clone(),
            bits: self.bits,
        }
    }

    pub fn points(&self) -> impl Iterator<Item = FixedPointAngle> + '_ {
        self.mantissas.iter().map(|m| FixedPointAngle {
            mantissa: m.clone(),
            bits: self.bits,
        })
    }

    /// The first `n` points as a new orbit.
    pub fn prefix(&self, n: usize) -> Result<Orbit> {
        if n > self.len() {
            return Err(Error::argument(format!(
                "prefix length {n} exceeds orbit length {}",
                self.len()
            )));
        }
        Ok(Orbit {
            mantissas: self.mantissas[..n].to_vec(),
            bits: self.bits,
            source: self.source.clone(),
            alpha: self.alpha.clone(),
        })
    }
}

/// Computes `α·a(n) mod 1` exactly for `n = 1..N`.
pub fn orbit(alpha: &FixedPointAngle, seq: &IntegerSequence, n: usize) -> Result<Orbit> {
    let terms = seq.prefix(n)?;
    let bits = alpha.bits;
    let m = &alpha.mantissa;
    let mantissas = if n >= 4096 {
        terms
            .par_iter()
            .map(|a| mul_mod_pow2(m, a, bits))
            .collect()
    } else {
        terms.iter().map(|a| mul_mod_pow2(m, a, bits)).collect()
    };
    Ok(Orbit {
        mantissas,
        bits,
        source: seq.label().to_string(),
        alpha: Some(alpha.clone()),
    })
}

/// `B ≥ bitlength(max|a(n)|) + 2·log2(N) + 40`: truncating `α` to `B` bits
/// then moves each point by less than `2^-(2 log2 N + 40)`.
pub fn recommended_bits(seq: &IntegerSequence, n: usize) -> u32 {
    let log2n = (usize::BITS - n.max(1).leading_zeros()) as u64;
    (seq.max_bits(n) + 2 * log2n + 40) as u32
}

/// Default precision: 128 bits for the polynomial and dense families (raised
/// to the recommended floor when needed), `bitlength(a(N)) + 128` otherwise.
pub fn default_bits(seq: &IntegerSequence, n: usize) -> u32 {
    match seq.family() {
        Family::Lacunary { .. } | Family::Custom => seq.max_bits(n) as u32 + 128,
        _ => DEFAULT_BITS.max(recommended_bits(seq, n)),
    }
}

/// A warning message when `bits` is below [`recommended_bits`].
pub fn precision_warning(seq: &IntegerSequence, n: usize, bits: u32) -> Option<String> {
    let want = recommended_bits(seq, n);
    (bits < want).then(|| {
        format!(
            "precision {bits} bits is below the recommended {want} bits for {} at N = {n}",
            seq.label()
        )
    })
}

/// `‖x − y‖`, the distance to the nearest integer, exactly.
pub fn circle_distance(x: &FixedPointAngle, y: &FixedPointAngle) -> Result<Dyadic> {
    if x.bits != y.bits {
        return Err(Error::argument(format!(
            "precision mismatch: {} vs {} bits",
            x.bits, y.bits
        )));
    }
    Ok(Dyadic::new(
        circle_distance_mantissa(&x.mantissa, &y.mantissa, x.bits),
        x.bits,
    ))
}

pub(crate) fn circle_distance_mantissa(x: &BigUint, y: &BigUint, bits: u32) -> BigUint {
    let d = if x >= y { x - y } else { y - x };
    let complement = pow2(bits) - &d;
    d.min(complement)
}

/// The consecutive circular gaps of an orbit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapReport {
    pub n: usize,
    pub bits: u32,
    pub delta_min: Dyadic,
    /// Gap mantissas in ascending order; there are exactly `n` of them.
    pub gaps: Vec<BigUint>,
    pub distinct_gap_count: usize,
    pub collision: bool,
}

impl GapReport {
    /// Gap report for raw mantissas at precision `bits`.
    pub fn from_mantissas(points: &[BigUint], bits: u32) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::argument(format!(
                "minimal gap needs N ≥ 2 points, got {n}"
            )));
        }
        let mut sorted: Vec<&BigUint> = points.iter().collect();
        sorted.sort_unstable();
        let mut gaps: Vec<BigUint> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.push(pow2(bits) - sorted[n - 1] + sorted[0]);
        gaps.sort_unstable();
        debug_assert_eq!(gaps.iter().sum::<BigUint>(), pow2(bits));
        let mut distinct = 1;
        for w in gaps.windows(2) {
            if w[0] != w[1] {
                distinct += 1;
            }
        }
        let delta_min = Dyadic::new(gaps[0].clone(), bits);
        Ok(GapReport {
            n,
            bits,
            collision: delta_min.is_zero(),
            delta_min,
            gaps,
            distinct_gap_count: distinct,
        })
    }

    pub fn gap(&self, i: usize) -> Dyadic {
        Dyadic::new(self.gaps[i].clone(), self.bits)
    }

    /// `Σ gaps`, which is exactly one full turn.
    pub fn total(&self) -> Dyadic {
        Dyadic::new(self.gaps.iter().sum(), self.bits)
    }
}

/// Sorts the points and takes circular neighbour differences, including
/// the wraparound gap from the largest point back to the smallest.
pub fn minimal_gap(orbit: &Orbit) -> Result<GapReport> {
    GapReport::from_mantissas(&orbit.mantissas, orbit.bits)
}

pub fn distinct_gap_count(orbit: &Orbit) -> Result<usize> {
    Ok(minimal_gap(orbit)?.distinct_gap_count)
}
