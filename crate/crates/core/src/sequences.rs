//! Integer sequences `a(1), a(2), …` whose fractional-part orbits are studied.
//!
//! Every sequence is materialized eagerly as arbitrary-precision integers and
//! checked for pairwise distinctness on construction.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Pow};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_MONOMIAL_DEGREE: u32 = 16;
pub const MAX_LACUNARY_LEN: usize = 4096;
pub const MAX_DENSE_LEN: usize = 10_000_000;

/// Which generator produced a sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Family {
    Monomial { d: u32 },
    Lacunary { q: u64 },
    Primes,
    Squarefree,
    Naturals,
    Custom,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Monomial { .. } => "monomial",
            Family::Lacunary { .. } => "lacunary",
            Family::Primes => "primes",
            Family::Squarefree => "squarefree",
            Family::Naturals => "naturals",
            Family::Custom => "custom",
        }
    }

    /// Parameter string as used in CSV `params` columns, e.g. `d=2`.
    pub fn params(&self) -> String {
        match self {
            Family::Monomial { d } => format!("d={d}"),
            Family::Lacunary { q } => format!("q={q}"),
            _ => String::new(),
        }
    }
}

/// A labeled finite sequence of pairwise-distinct integers, 1-indexed in the
/// mathematical sense (`values[0]` is `a(1)`).
#[derive(Clone, Debug)]
pub struct IntegerSequence {
    label: String,
    family: Family,
    values: Vec<BigInt>,
}

impl IntegerSequence {
    pub fn new(label: impl Into<String>, family: Family, values: Vec<BigInt>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::argument(format!(
                "a sequence needs at least 2 terms, got {}",
                values.len()
            )));
        }
        if let Some((idx, value)) = first_duplicate(&values) {
            return Err(Error::Duplicate {
                value: value.to_string(),
                line: idx + 1,
            });
        }
        Ok(IntegerSequence {
            label: label.into(),
            family,
            values,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn values(&self) -> &[BigInt] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `a(n)` for `1 ≤ n ≤ len`.
    pub fn term(&self, n: usize) -> &BigInt {
        &self.values[n - 1]
    }

    /// The first `n` terms, or an argument error when the sequence is shorter.
    pub fn prefix(&self, n: usize) -> Result<&[BigInt]> {
        if n > self.values.len() {
            return Err(Error::argument(format!(
                "N = {n} exceeds sequence length {}",
                self.values.len()
            )));
        }
        Ok(&self.values[..n])
    }

    /// Largest bit length of `|a(n)|` over the first `n` terms.
    pub fn max_bits(&self, n: usize) -> u64 {
        self.values[..n.min(self.values.len())]
            .iter()
            .map(|v| v.bits())
            .max()
            .unwrap_or(0)
    }

    /// Returns a copy with every term multiplied by `c`.
    pub fn scaled(&self, c: &BigInt) -> Result<Self> {
        let values = self.values.iter().map(|v| v * c).collect();
        IntegerSequence::new(format!("{}*{}", self.label, c), Family::Custom, values)
    }
}

/// Sort-and-scan distinctness check. Returns the position (0-based) and
/// value of the earliest term equal to some previous term.
pub fn first_duplicate(values: &[BigInt]) -> Option<(usize, &BigInt)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].cmp(&values[j]).then(i.cmp(&j)));
    // Within a run of equal values the second index is where the repeat
    // first shows up; take the smallest such index over all runs.
    let mut best: Option<usize> = None;
    for w in order.windows(2) {
        let (i, j) = (w[0], w[1]);
        if values[i] == values[j] && best.is_none_or(|b| j < b) {
            best = Some(j);
        }
    }
    best.map(|j| (j, &values[j]))
}

pub fn generate_monomial(d: u32, n: usize) -> Result<IntegerSequence> {
    if d == 0 || d > MAX_MONOMIAL_DEGREE {
        return Err(Error::config(format!(
            "monomial degree must be in 1..={MAX_MONOMIAL_DEGREE}, got {d}"
        )));
    }
    check_len(n, MAX_DENSE_LEN)?;
    let values = (1..=n as u64)
        .map(|k| Pow::pow(BigInt::from(k), d))
        .collect();
    IntegerSequence::new(format!("monomial:d={d}"), Family::Monomial { d }, values)
}

pub fn generate_lacunary(q: u64, n: usize) -> Result<IntegerSequence> {
    if q < 2 {
        return Err(Error::config(format!("lacunary ratio must be ≥ 2, got {q}")));
    }
    check_len(n, MAX_LACUNARY_LEN)?;
    let base = BigInt::from(q);
    let mut values = Vec::with_capacity(n);
    let mut cur = BigInt::one();
    for _ in 0..n {
        cur *= &base;
        values.push(cur.clone());
    }
    IntegerSequence::new(format!("lacunary:q={q}"), Family::Lacunary { q }, values)
}

pub fn generate_naturals(n: usize) -> Result<IntegerSequence> {
    check_len(n, MAX_DENSE_LEN)?;
    let values = (1..=n as u64).map(BigInt::from).collect();
    IntegerSequence::new("naturals", Family::Naturals, values)
}

/// The first `n` primes.
pub fn generate_primes(n: usize) -> Result<IntegerSequence> {
    check_len(n, MAX_DENSE_LEN)?;
    let values = first_primes(n).into_iter().map(BigInt::from).collect();
    IntegerSequence::new("primes", Family::Primes, values)
}

/// The first `n` squarefree positive integers (1 included).
pub fn generate_squarefree(n: usize) -> Result<IntegerSequence> {
    check_len(n, MAX_DENSE_LEN)?;
    let values = first_squarefree(n).into_iter().map(BigInt::from).collect();
    IntegerSequence::new("squarefree", Family::Squarefree, values)
}

fn check_len(n: usize, max: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::config(format!("N must be ≥ 2, got {n}")));
    }
    if n > max {
        return Err(Error::resource(
            "sequence-length",
            format!("N = {n} exceeds the generator limit {max}"),
        ));
    }
    Ok(())
}

/// Upper estimate for the `n`-th prime: `n (ln n + ln ln n)` holds for n ≥ 6.
fn prime_bound(n: usize) -> usize {
    if n < 6 {
        return 15;
    }
    let x = n as f64;
    let est = x * (x.ln() + x.ln().ln());
    (est * 1.02) as usize + 16
}

pub fn first_primes(n: usize) -> Vec<u64> {
    let mut limit = prime_bound(n);
    loop {
        let primes = primes_up_to(limit);
        if primes.len() >= n {
            return primes[..n].to_vec();
        }
        limit += limit / 2;
    }
}

/// Sieve of Eratosthenes over odd numbers only.
pub fn primes_up_to(limit: usize) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    // index i represents 2i + 1
    let half = limit / 2 + 1;
    let mut composite = vec![false; half];
    composite[0] = true;
    let mut i = 1;
    while (2 * i + 1) * (2 * i + 1) <= limit {
        if !composite[i] {
            let p = 2 * i + 1;
            let mut j = (p * p) / 2;
            while j < half {
                composite[j] = true;
                j += p;
            }
        }
        i += 1;
    }
    let mut out = vec![2u64];
    out.extend(
        composite
            .iter()
            .enumerate()
            .filter(|&(i, &c)| !c && 2 * i < limit)
            .map(|(i, _)| (2 * i + 1) as u64),
    );
    out
}

pub fn first_squarefree(n: usize) -> Vec<u64> {
    // density of squarefree integers is 6/π² ≈ 0.608
    let mut limit = (n as f64 * 1.66) as usize + 32;
    loop {
        let mut square_free = vec![true; limit + 1];
        square_free[0] = false;
        let mut p = 2usize;
        while p * p <= limit {
            let sq = p * p;
            let mut j = sq;
            while j <= limit {
                square_free[j] = false;
                j += sq;
            }
            p += 1;
        }
        let found: Vec<u64> = square_free
            .iter()
            .enumerate()
            .filter(|&(_, &s)| s)
            .map(|(i, _)| i as u64)
            .take(n)
            .collect();
        if found.len() == n {
            return found;
        }
        limit += limit / 2;
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller–Rabin for all 64-bit inputs.
pub fn is_prime_u64(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Reads one decimal integer per line. Blank lines and lines starting with
/// `#` are skipped; line numbers in errors refer to the file.
pub fn load_sequence(path: impl AsRef<Path>) -> Result<IntegerSequence> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let label = format!("file:{}", path.display());
    parse_sequence(&text, label)
}

pub fn parse_sequence(text: &str, label: impl Into<String>) -> Result<IntegerSequence> {
    let mut values = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value: BigInt = line.parse().map_err(|_| Error::Parse {
            line: idx + 1,
            message: format!("expected a decimal integer, found {line:?}"),
        })?;
        if !seen.insert(value.clone()) {
            return Err(Error::Duplicate {
                value: value.to_string(),
                line: idx + 1,
            });
        }
        values.push(value);
    }
    IntegerSequence::new(label, Family::Custom, values)
}

/// Writes `seq` in the format accepted by [`load_sequence`].
pub fn write_sequence(seq: &IntegerSequence, n: usize, out: &mut impl std::io::Write) -> Result<()> {
    writeln!(out, "# {} N={}", seq.label(), n)?;
    for v in seq.prefix(n)? {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

/// A sequence description as accepted on the command line and in config
/// files: `monomial:d=2`, `lacunary:q=2`, `primes`, `squarefree`,
/// `naturals` or `file:PATH`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SequenceSpec {
    Monomial(u32),
    Lacunary(u64),
    Primes,
    Squarefree,
    Naturals,
    File(PathBuf),
}

impl SequenceSpec {
    pub fn generate(&self, n: usize) -> Result<IntegerSequence> {
        match self {
            SequenceSpec::Monomial(d) => generate_monomial(*d, n),
            SequenceSpec::Lacunary(q) => generate_lacunary(*q, n),
            SequenceSpec::Primes => generate_primes(n),
            SequenceSpec::Squarefree => generate_squarefree(n),
            SequenceSpec::Naturals => generate_naturals(n),
            SequenceSpec::File(path) => {
                let seq = load_sequence(path)?;
                seq.prefix(n)?;
                Ok(seq)
            }
        }
    }

    pub fn family(&self) -> Family {
        match self {
            SequenceSpec::Monomial(d) => Family::Monomial { d: *d },
            SequenceSpec::Lacunary(q) => Family::Lacunary { q: *q },
            SequenceSpec::Primes => Family::Primes,
            SequenceSpec::Squarefree => Family::Squarefree,
            SequenceSpec::Naturals => Family::Naturals,
            SequenceSpec::File(_) => Family::Custom,
        }
    }
}

impl fmt::Display for SequenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceSpec::Monomial(d) => write!(f, "monomial:d={d}"),
            SequenceSpec::Lacunary(q) => write!(f, "lacunary:q={q}"),
            SequenceSpec::Primes => f.write_str("primes"),
            SequenceSpec::Squarefree => f.write_str("squarefree"),
            SequenceSpec::Naturals => f.write_str("naturals"),
            SequenceSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl Serialize for SequenceSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SequenceSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

fn parse_param<T: FromStr>(rest: Option<&str>, key: &str, s: &str) -> Result<T> {
    let rest = rest.ok_or_else(|| Error::config(format!("sequence {s:?} needs `{key}=…`")))?;
    let value = rest
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::config(format!("sequence {s:?}: expected `{key}=…`")))?;
    value
        .parse()
        .map_err(|_| Error::config(format!("sequence {s:?}: bad value for `{key}`")))
}

impl FromStr for SequenceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let spec = match head {
            "monomial" => SequenceSpec::Monomial(parse_param(rest, "d", s)?),
            "lacunary" => SequenceSpec::Lacunary(parse_param(rest, "q", s)?),
            "primes" => SequenceSpec::Primes,
            "squarefree" => SequenceSpec::Squarefree,
            "naturals" => SequenceSpec::Naturals,
            "file" => SequenceSpec::File(PathBuf::from(
                rest.filter(|r| !r.is_empty())
                    .ok_or_else(|| Error::config("file: needs a path"))?,
            )),
            _ => return Err(Error::config(format!("unknown sequence family {s:?}"))),
        };
        match (&spec, rest) {
            (SequenceSpec::Primes | SequenceSpec::Squarefree | SequenceSpec::Naturals, Some(_)) => {
                Err(Error::config(format!("sequence {head:?} takes no parameters")))
            }
            _ => Ok(spec),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn monomial_examples() {
        assert_eq!(generate_monomial(2, 5).unwrap().values(), ints(&[1, 4, 9, 16, 25]));
        assert_eq!(generate_monomial(1, 3).unwrap().values(), ints(&[1, 2, 3]));
        assert_eq!(generate_monomial(3, 2).unwrap().values(), ints(&[1, 8]));
        assert!(matches!(generate_monomial(17, 5), Err(Error::Config(_))));
        assert!(matches!(generate_monomial(0, 5), Err(Error::Config(_))));
        assert!(generate_monomial(2, 1).is_err());
    }

    #[test]
    fn lacunary_examples() {
        assert_eq!(generate_lacunary(2, 4).unwrap().values(), ints(&[2, 4, 8, 16]));
        assert_eq!(generate_lacunary(3, 3).unwrap().values(), ints(&[3, 9, 27]));
        let big = generate_lacunary(2, 64).unwrap();
        assert_eq!(big.term(64).bits(), 65);
        assert!(matches!(
            generate_lacunary(2, MAX_LACUNARY_LEN + 1),
            Err(Error::Resource { .. })
        ));
    }

    fn trial_division_primes(count: usize) -> Vec<u64> {
        let mut out = Vec::new();
        let mut k = 2u64;
        while out.len() < count {
            if (2..k).take_while(|d| d * d <= k).all(|d| !k.is_multiple_of(d)) {
                out.push(k);
            }
            k += 1;
        }
        out
    }

    #[test]
    fn prime_examples() {
        assert_eq!(generate_primes(5).unwrap().values(), ints(&[2, 3, 5, 7, 11]));
        assert_eq!(generate_primes(2).unwrap().values(), ints(&[2, 3]));
        let oracle = trial_division_primes(1000);
        assert_eq!(oracle[999], 7919);
        let seq = generate_primes(1000).unwrap();
        assert_eq!(seq.term(1000), &BigInt::from(7919));
        assert_eq!(seq.values(), ints(&oracle.iter().map(|&p| p as i64).collect::<Vec<_>>()));
    }

    #[test]
    fn small_prime_counts_regrow() {
        for n in 2..60 {
            let p = first_primes(n);
            assert_eq!(p, trial_division_primes(n));
        }
    }

    #[test]
    fn emitted_primes_pass_miller_rabin() {
        assert!(first_primes(20_000).into_iter().all(is_prime_u64));
        assert!(is_prime_u64(18_446_744_073_709_551_557));
        assert!(!is_prime_u64(3_215_031_751)); // strong pseudoprime to bases 2,3,5,7
        assert!(!is_prime_u64(1));
    }

    fn is_squarefree_oracle(k: u64) -> bool {
        (2..).take_while(|d| d * d <= k).all(|d| !k.is_multiple_of(d * d))
    }

    #[test]
    fn squarefree_examples() {
        assert_eq!(generate_squarefree(5).unwrap().values(), ints(&[1, 2, 3, 5, 6]));
        assert_eq!(
            generate_squarefree(8).unwrap().values(),
            ints(&[1, 2, 3, 5, 6, 7, 10, 11])
        );
        let oracle: Vec<u64> = (1..).filter(|&k| is_squarefree_oracle(k)).take(100).collect();
        assert_eq!(oracle[99], 163);
        assert_eq!(generate_squarefree(100).unwrap().term(100), &BigInt::from(163));
    }

    #[test]
    fn parse_examples() {
        let s = parse_sequence("1\n4\n9\n", "t").unwrap();
        assert_eq!(s.values(), ints(&[1, 4, 9]));
        assert_eq!(s.family(), &Family::Custom);

        match parse_sequence("5\n5\n", "t") {
            Err(Error::Duplicate { line, value }) => {
                assert_eq!(line, 2);
                assert_eq!(value, "5");
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
        match parse_sequence("abc\n", "t") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_accepts_comments_and_signs() {
        let s = parse_sequence("# header\n-3\n\n+7\n0\n", "t").unwrap();
        assert_eq!(s.values(), ints(&[-3, 7, 0]));
        match parse_sequence("# c\n1\nx\n", "t") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn first_duplicate_reports_earliest_repeat() {
        let v = ints(&[7, 3, 9, 3, 7]);
        assert_eq!(first_duplicate(&v), Some((3, &BigInt::from(3))));
        assert_eq!(first_duplicate(&ints(&[1, 2, 3])), None);
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["monomial:d=2", "lacunary:q=3", "primes", "squarefree", "naturals", "file:/tmp/x"] {
            let spec: SequenceSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("monomial".parse::<SequenceSpec>().is_err());
        assert!("monomial:q=2".parse::<SequenceSpec>().is_err());
        assert!("primes:d=2".parse::<SequenceSpec>().is_err());
        assert!("fibonacci".parse::<SequenceSpec>().is_err());
    }

    #[test]
    fn load_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.txt");
        let seq = generate_monomial(2, 6).unwrap();
        let mut buf = Vec::new();
        write_sequence(&seq, 6, &mut buf).unwrap();
        std::fs::write(&path, buf).unwrap();
        let loaded = load_sequence(&path).unwrap();
        assert_eq!(loaded.values(), seq.values());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn generators_are_prefix_stable(n in 2usize..300, extra in 0usize..300) {
                let m = n + extra;
                let pairs: Vec<(IntegerSequence, IntegerSequence)> = vec![
                    (generate_primes(n).unwrap(), generate_primes(m).unwrap()),
                    (generate_squarefree(n).unwrap(), generate_squarefree(m).unwrap()),
                    (generate_monomial(3, n).unwrap(), generate_monomial(3, m).unwrap()),
                    (generate_naturals(n).unwrap(), generate_naturals(m).unwrap()),
                ];
                for (short, long) in pairs {
                    prop_assert_eq!(short.values(), &long.values()[..n]);
                    prop_assert!(first_duplicate(long.values()).is_none());
                }
            }

            #[test]
            fn distinctness_check_agrees_with_hashing(v in proptest::collection::vec(-20i64..20, 2..30)) {
                let vals: Vec<BigInt> = v.iter().map(|&x| BigInt::from(x)).collect();
                let mut seen = std::collections::HashSet::new();
                let expected = v.iter().position(|x| !seen.insert(*x));
                prop_assert_eq!(first_duplicate(&vals).map(|(i, _)| i), expected);
            }
        }
    }
}
