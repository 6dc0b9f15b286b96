//! Difference histograms `R(v)` and additive energy `E(𝒜,N)`.
//!
//! `E` is read off the histogram as `N² + Σ_{v≠0} R(v)²`: the `N²` accounts
//! for the zero difference (`R'(0) = N`), and every other representation
//! `a(n₁) − a(n₃) = a(n₄) − a(n₂) = v` is one ordered pair counted by `R(v)`
//! on each side.

use std::io::Write;

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sequences::IntegerSequence;

pub const MAX_HISTOGRAM_N: usize = 100_000;
pub const MAX_BRUTEFORCE_N: usize = 40;

/// `v ↦ R(v) = #{m ≠ n ≤ N : a(m) − a(n) = v}`.
///
/// Only `v > 0` is stored; `R(−v) = R(v)` always.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferenceHistogram {
    n: usize,
    positive: Vec<(BigUint, u64)>,
}

impl DifferenceHistogram {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `N(N−1)`, the number of ordered pairs.
    pub fn total_pairs(&self) -> u64 {
        (self.n as u64) * (self.n as u64 - 1)
    }

    /// `(|v|, R(v))` for each positive difference, ascending in `v`.
    pub fn positive_entries(&self) -> &[(BigUint, u64)] {
        &self.positive
    }

    /// Number of distinct positive differences.
    pub fn distinct_abs(&self) -> usize {
        self.positive.len()
    }

    pub fn get(&self, v: &BigInt) -> u64 {
        if v.is_zero() {
            return 0;
        }
        let key = v.magnitude();
        self.positive
            .binary_search_by(|(k, _)| k.cmp(key))
            .map(|i| self.positive[i].1)
            .unwrap_or(0)
    }

    /// Every `(v, R(v))` with `v ≠ 0`, negative keys first.
    pub fn signed_entries(&self) -> impl Iterator<Item = (BigInt, u64)> + '_ {
        let neg = self
            .positive
            .iter()
            .rev()
            .map(|(k, c)| (-BigInt::from(k.clone()), *c));
        let pos = self.positive.iter().map(|(k, c)| (BigInt::from(k.clone()), *c));
        neg.chain(pos)
    }

    /// `Σ_{v≠0} R(v)²`.
    pub fn diag_sum(&self) -> BigUint {
        let half: BigUint = self
            .positive
            .iter()
            .map(|(_, c)| BigUint::from(*c) * BigUint::from(*c))
            .sum();
        half * 2u32
    }
}

fn guard_histogram(seq: &IntegerSequence, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::argument(format!("N must be ≥ 2, got {n}")));
    }
    seq.prefix(n)?;
    if n > MAX_HISTOGRAM_N {
        return Err(Error::resource(
            "difference-histogram",
            format!("N = {n} exceeds {MAX_HISTOGRAM_N}; the O(N²) pass needs a smaller N"),
        ));
    }
    Ok(())
}

fn run_lengths<K: PartialEq + Clone>(sorted: &[K]) -> Vec<(K, u64)> {
    let mut out: Vec<(K, u64)> = Vec::new();
    for k in sorted {
        match out.last_mut() {
            Some((last, c)) if last == k => *c += 1,
            _ => out.push((k.clone(), 1)),
        }
    }
    out
}

/// Sorts the `N(N−1)/2` absolute differences and run-length encodes them.
/// Sequences whose terms fit in 62 bits use a machine-word fast path.
pub fn difference_histogram(seq: &IntegerSequence, n: usize) -> Result<DifferenceHistogram> {
    guard_histogram(seq, n)?;
    let terms = seq.prefix(n)?;
    let small: Option<Vec<i64>> = terms
        .iter()
        .map(|v| v.to_i64().filter(|x| x.unsigned_abs() < 1 << 62))
        .collect();
    let positive = match small {
        Some(vals) => {
            let mut diffs: Vec<u64> = (0..n)
                .into_par_iter()
                .flat_map_iter(|i| {
                    let vals = &vals;
                    (i + 1..n).map(move |j| (vals[i] - vals[j]).unsigned_abs())
                })
                .collect();
            diffs.par_sort_unstable();
            run_lengths(&diffs)
                .into_iter()
                .map(|(k, c)| (BigUint::from(k), c))
                .collect()
        }
        None => {
            let mut diffs: Vec<BigUint> = (0..n)
                .into_par_iter()
                .flat_map_iter(|i| {
                    (i + 1..n).map(move |j| (&terms[i] - &terms[j]).abs().magnitude().clone())
                })
                .collect();
            diffs.par_sort_unstable();
            run_lengths(&diffs)
        }
    };
    Ok(DifferenceHistogram { n, positive })
}

/// `E(𝒜,N)` together with its histogram decomposition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EnergyReport {
    pub n: usize,
    #[serde(serialize_with = "ser_display")]
    pub energy: BigUint,
    #[serde(serialize_with = "ser_display")]
    pub diag_sum: BigUint,
    /// `2N² − N`, the count of trivial solutions.
    #[serde(serialize_with = "ser_display")]
    pub trivial_count: BigUint,
}

fn ser_display<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl EnergyReport {
    fn from_histogram(hist: &DifferenceHistogram) -> Self {
        let n = BigUint::from(hist.n());
        let n2 = &n * &n;
        let diag_sum = hist.diag_sum();
        let energy = &n2 + &diag_sum;
        let trivial_count = &n2 * 2u32 - &n;
        assert!(
            trivial_count <= energy && energy <= &n2 * &n,
            "energy {energy} outside [2N²−N, N³] for N = {n}"
        );
        EnergyReport {
            n: hist.n(),
            energy,
            diag_sum,
            trivial_count,
        }
    }

    pub fn is_sidon(&self) -> bool {
        self.energy == self.trivial_count
    }

    /// `log E / log N`.
    pub fn exponent(&self) -> f64 {
        big_ln(&self.energy) / (self.n as f64).ln()
    }
}

pub(crate) fn big_ln(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn additive_energy(seq: &IntegerSequence, n: usize) -> Result<EnergyReport> {
    let hist = difference_histogram(seq, n)?;
    Ok(EnergyReport::from_histogram(&hist))
}

pub fn additive_energy_from_histogram(hist: &DifferenceHistogram) -> EnergyReport {
    EnergyReport::from_histogram(hist)
}

/// Literal count of `(n₁,n₂,n₃,n₄) ∈ [1,N]⁴` with `a(n₁)+a(n₂) = a(n₃)+a(n₄)`.
pub fn additive_energy_bruteforce(seq: &IntegerSequence, n: usize) -> Result<u64> {
    if n > MAX_BRUTEFORCE_N {
        return Err(Error::resource(
            "energy-bruteforce",
            format!("N = {n} exceeds {MAX_BRUTEFORCE_N} for the O(N⁴) count"),
        ));
    }
    let a = seq.prefix(n)?;
    let sums: Vec<BigInt> = (0..n * n).map(|k| &a[k / n] + &a[k % n]).collect();
    let mut count = 0u64;
    for lhs in &sums {
        for rhs in &sums {
            if lhs == rhs {
                count += 1;
            }
        }
    }
    Ok(count)
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyRow {
    pub family: String,
    pub params: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub energy: String,
    pub diag_sum: String,
    pub exponent: f64,
}

/// One exact energy per requested `N`.
pub fn energy_scan(seq: &IntegerSequence, ns: &[usize]) -> Result<Vec<EnergyRow>> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::argument("N values must be strictly ascending"));
    }
    ns.iter()
        .map(|&n| {
            let r = additive_energy(seq, n)?;
            Ok(EnergyRow {
                family: seq.family().name().to_string(),
                params: seq.family().params(),
                n,
                energy: r.energy.to_string(),
                diag_sum: r.diag_sum.to_string(),
                exponent: r.exponent(),
            })
        })
        .collect()
}

/// CSV with header `family,params,N,energy,diag_sum,exponent`.
pub fn write_energy_csv(rows: &[EnergyRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::{
        generate_lacunary, generate_monomial, generate_naturals, Family,
    };
    use proptest::prelude::*;

    fn custom(values: &[i64]) -> IntegerSequence {
        IntegerSequence::new(
            "t",
            Family::Custom,
            values.iter().map(|&v| BigInt::from(v)).collect(),
        )
        .unwrap()
    }

    fn ap_energy(n: u64) -> BigUint {
        BigUint::from((2 * n * n * n + n) / 3)
    }

    #[test]
    fn histogram_of_one_two_three() {
        let h = difference_histogram(&custom(&[1, 2, 3]), 3).unwrap();
        assert_eq!(h.get(&BigInt::from(1)), 2);
        assert_eq!(h.get(&BigInt::from(-1)), 2);
        assert_eq!(h.get(&BigInt::from(2)), 1);
        assert_eq!(h.get(&BigInt::from(-2)), 1);
        assert_eq!(h.get(&BigInt::from(3)), 0);
        assert_eq!(h.signed_entries().map(|(_, c)| c).sum::<u64>(), 6);
        let keys: Vec<i64> = h.signed_entries().map(|(k, _)| k.to_i64().unwrap()).collect();
        assert_eq!(keys, [-2, -1, 1, 2]);
    }

    #[test]
    fn powers_of_two_are_sidon() {
        let seq = generate_lacunary(2, 4).unwrap();
        let h = difference_histogram(&seq, 4).unwrap();
        assert_eq!(h.signed_entries().count(), 12);
        assert!(h.signed_entries().all(|(_, c)| c == 1));
        let e = additive_energy(&seq, 4).unwrap();
        assert_eq!(e.energy, BigUint::from(28u32));
        assert!(e.is_sidon());
    }

    #[test]
    fn energy_examples() {
        assert_eq!(additive_energy(&custom(&[1, 2, 3]), 3).unwrap().energy, BigUint::from(19u32));
        assert_eq!(additive_energy_bruteforce(&custom(&[1, 2, 3]), 3).unwrap(), 19);
        assert_eq!(additive_energy_bruteforce(&custom(&[1, 2]), 2).unwrap(), 6);
        assert_eq!(additive_energy_bruteforce(&custom(&[-7, 40]), 2).unwrap(), 6);
        let nat = generate_naturals(10).unwrap();
        assert_eq!(additive_energy(&nat, 10).unwrap().energy, BigUint::from(670u32));
    }

    #[test]
    fn ap_closed_form_matches_oracle() {
        let nat = generate_naturals(10).unwrap();
        for n in 3..=10 {
            let brute = additive_energy_bruteforce(&nat, n).unwrap();
            assert_eq!(BigUint::from(brute), ap_energy(n as u64));
            assert_eq!(additive_energy(&nat, n).unwrap().energy, ap_energy(n as u64));
        }
    }

    #[test]
    fn guards() {
        let nat = generate_naturals(41).unwrap();
        assert!(matches!(
            additive_energy_bruteforce(&nat, 41),
            Err(Error::Resource { .. })
        ));
        assert!(matches!(additive_energy(&nat, 42), Err(Error::Argument(_))));
        assert!(matches!(additive_energy(&nat, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn scan_examples() {
        let sq = generate_monomial(2, 256).unwrap();
        let rows = energy_scan(&sq, &[64, 128, 256]).unwrap();
        for r in &rows {
            assert!(r.exponent > 2.0 && r.exponent < 2.6, "{r:?}");
        }
        assert!(rows[0].exponent > rows[2].exponent);

        let lac = generate_lacunary(2, 50).unwrap();
        for r in energy_scan(&lac, &[4, 10, 50]).unwrap() {
            let n = r.n as u64;
            assert_eq!(r.energy, (2 * n * n - n).to_string());
        }
        for n in 2..=10 {
            assert_eq!(
                additive_energy_bruteforce(&lac, n).unwrap(),
                (2 * n * n - n) as u64
            );
        }

        let nat = generate_naturals(100).unwrap();
        let rows = energy_scan(&nat, &[10, 100]).unwrap();
        assert_eq!(rows[1].energy, ap_energy(100).to_string());
        assert!(rows[1].exponent > rows[0].exponent);
        assert!(energy_scan(&nat, &[100, 10]).is_err());

        let mut buf = Vec::new();
        write_energy_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("family,params,N,energy,diag_sum,exponent\n"));
        assert!(text.contains("naturals,,100,666700,"));
    }

    #[test]
    fn big_integer_path_agrees_with_oracle() {
        let lac = generate_lacunary(3, 80).unwrap();
        let e = additive_energy(&lac, 80).unwrap();
        assert!(e.is_sidon());
        let seq = generate_lacunary(2, 40).unwrap();
        assert_eq!(
            BigUint::from(additive_energy_bruteforce(&seq, 40).unwrap()),
            additive_energy(&seq, 40).unwrap().energy
        );
    }

    fn distinct_values() -> impl Strategy<Value = Vec<i64>> {
        proptest::collection::btree_set(-500i64..500, 2..18)
            .prop_map(|s| s.into_iter().collect::<Vec<_>>())
            .prop_shuffle()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn histogram_invariants(v in distinct_values()) {
            let n = v.len();
            let h = difference_histogram(&custom(&v), n).unwrap();
            let total: u64 = h.signed_entries().map(|(_, c)| c).sum();
            prop_assert_eq!(total, h.total_pairs());
            for (k, c) in h.signed_entries() {
                prop_assert!(c >= 1 && c < n as u64);
                prop_assert_eq!(h.get(&-k), c);
            }
            let e = additive_energy(&custom(&v), n).unwrap();
            prop_assert_eq!(BigUint::from(additive_energy_bruteforce(&custom(&v), n).unwrap()), e.energy.clone());
            prop_assert_eq!(&e.energy, &(BigUint::from(n * n) + e.diag_sum.clone()));
        }

        #[test]
        fn energy_is_affine_invariant(v in distinct_values(), t in -10_000i64..10_000, c in 1i64..50, neg in any::<bool>()) {
            let n = v.len();
            let base = additive_energy(&custom(&v), n).unwrap().energy;
            let c = if neg { -c } else { c };
            let moved: Vec<i64> = v.iter().map(|x| c * x + t).collect();
            prop_assert_eq!(additive_energy(&custom(&moved), n).unwrap().energy, base.clone());
            let reflected: Vec<i64> = v.iter().map(|x| -x).collect();
            prop_assert_eq!(additive_energy(&custom(&reflected), n).unwrap().energy, base);
        }
    }
}
