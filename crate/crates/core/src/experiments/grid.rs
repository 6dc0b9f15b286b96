//! N grids: explicit lists, geometric ranges and the sparse Borel–Cantelli
//! subsequences.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest N any grid may contain; larger entries are dropped with a warning.
pub const MAX_GRID_N: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    /// `N_k = k^{2/η}`.
    Theorem1,
    /// `N_k = ⌊k^{4/η}⌋`.
    Corollary,
}

impl fmt::Display for GridKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridKind::Theorem1 => "theorem1",
            GridKind::Corollary => "corollary",
        })
    }
}

impl FromStr for GridKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theorem1" => Ok(GridKind::Theorem1),
            "corollary" => Ok(GridKind::Corollary),
            _ => Err(Error::config(format!(
                "unknown grid kind {s:?} (expected theorem1 or corollary)"
            ))),
        }
    }
}

/// Experiment configs restrict `η` to `(0,2)`; the grid itself accepts any `η > 0`.
fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("eta must be positive, got {eta}")))
    }
}

/// `⌊k^e⌋`, exact when `e` is an integer; `None` past [`MAX_GRID_N`].
fn floor_power(k: u64, e: f64) -> Option<u64> {
    let rounded = e.round();
    let value = if (e - rounded).abs() < 1e-12 {
        k.checked_pow(rounded as u32)?
    } else {
        let x = (k as f64).powf(e);
        if !x.is_finite() || x > MAX_GRID_N as f64 {
            return None;
        }
        x.floor() as u64
    };
    (value <= MAX_GRID_N as u64).then_some(value)
}

/// The grid `N_k` for `k = 1..=k_max`, keeping `N ≥ 2`, deduplicated and
/// ascending. The power is floored as a whole.
pub fn borel_cantelli_grid(kind: GridKind, eta: f64, k_max: u64) -> Result<Vec<usize>> {
    check_eta(eta)?;
    if k_max < 2 {
        return Err(Error::argument(format!("k_max must be ≥ 2, got {k_max}")));
    }
    let e = match kind {
        GridKind::Theorem1 => 2.0 / eta,
        GridKind::Corollary => 4.0 / eta,
    };
    let mut out: Vec<usize> = Vec::new();
    for k in 1..=k_max {
        match floor_power(k, e) {
            Some(n) if n >= 2 && out.last() != Some(&(n as usize)) => out.push(n as usize),
            Some(_) => {}
            None => {
                log::warn!("{kind} grid truncated at k = {k}: N_k exceeds {MAX_GRID_N}");
                break;
            }
        }
    }
    Ok(out)
}

/// `start, start·f, start·f², …` up to `stop`, rounded to integers.
pub fn geometric_grid(start: usize, stop: usize, factor: f64) -> Result<Vec<usize>> {
    if start < 2 || stop < start {
        return Err(Error::config(format!(
            "geometric grid needs 2 ≤ start ≤ stop, got {start}..{stop}"
        )));
    }
    if factor.is_nan() || factor <= 1.0 || !factor.is_finite() {
        return Err(Error::config(format!("grid factor must be > 1, got {factor}")));
    }
    let stop = if stop > MAX_GRID_N {
        log::warn!("geometric grid truncated at {MAX_GRID_N}");
        MAX_GRID_N
    } else {
        stop
    };
    let mut out: Vec<usize> = Vec::new();
    let integral = factor.fract() == 0.0;
    let mut i = 0;
    loop {
        let n = if integral {
            match (factor as usize)
                .checked_pow(i)
                .and_then(|p| p.checked_mul(start))
            {
                Some(n) => n,
                None => break,
            }
        } else {
            (start as f64 * factor.powi(i as i32)).round() as usize
        };
        if n > stop {
            break;
        }
        if out.last() != Some(&n) {
            out.push(n);
        }
        i += 1;
    }
    Ok(out)
}

/// How a configuration names its N values.
#[derive(Clone, Debug, PartialEq)]
pub enum GridSpec {
    List(Vec<usize>),
    Geometric { start: usize, stop: usize, factor: f64 },
    BorelCantelli { kind: GridKind, k_max: u64 },
}

impl GridSpec {
    /// Expands the grid; the Borel–Cantelli form needs `eta`.
    pub fn expand(&self, eta: Option<f64>) -> Result<Vec<usize>> {
        let ns = match self {
            GridSpec::List(ns) => {
                let mut ns = ns.clone();
                if ns.iter().any(|&n| n > MAX_GRID_N) {
                    log::warn!("grid entries above {MAX_GRID_N} dropped");
                    ns.retain(|&n| n <= MAX_GRID_N);
                }
                ns
            }
            GridSpec::Geometric {
                start,
                stop,
                factor,
            } => geometric_grid(*start, *stop, *factor)?,
            GridSpec::BorelCantelli { kind, k_max } => {
                let eta = eta.ok_or_else(|| {
                    Error::config("a Borel–Cantelli grid needs `eta`")
                })?;
                borel_cantelli_grid(*kind, eta, *k_max)?
            }
        };
        if ns.is_empty() {
            return Err(Error::config("N grid is empty"));
        }
        if ns[0] < 2 {
            return Err(Error::config(format!("every N must be ≥ 2, got {}", ns[0])));
        }
        if ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("N grid must be strictly ascending"));
        }
        Ok(ns)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::List(ns) => {
                let parts: Vec<String> = ns.iter().map(|n| n.to_string()).collect();
                f.write_str(&parts.join(","))
            }
            GridSpec::Geometric {
                start,
                stop,
                factor,
            } => write!(f, "geom:{start}:{stop}:{factor}"),
            GridSpec::BorelCantelli { kind, k_max } => write!(f, "bc:{kind}:{k_max}"),
        }
    }
}

fn parse_field<T: FromStr>(s: &str, what: &str, whole: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::config(format!("grid {whole:?}: bad {what} {s:?}")))
}

impl FromStr for GridSpec {
    type Err = Error;

    /// `a,b,c`, `geom:start:stop:factor` or `bc:theorem1|corollary:k_max`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["geom", start, stop, factor] => Ok(GridSpec::Geometric {
                start: parse_field(start, "start", s)?,
                stop: parse_field(stop, "stop", s)?,
                factor: parse_field(factor, "factor", s)?,
            }),
            ["bc", kind, k_max] => Ok(GridSpec::BorelCantelli {
                kind: kind.parse()?,
                k_max: parse_field(k_max, "k_max", s)?,
            }),
            [list] => list
                .split(',')
                .map(|x| parse_field(x, "N", s))
                .collect::<Result<Vec<usize>>>()
                .map(GridSpec::List),
            _ => Err(Error::config(format!(
                "cannot parse grid {s:?}; expected a,b,c or geom:start:stop:factor or bc:kind:k_max"
            ))),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GridRaw {
    List(Vec<usize>),
    Text(String),
}

impl Serialize for GridSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GridSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match GridRaw::deserialize(d)? {
            GridRaw::List(ns) => Ok(GridSpec::List(ns)),
            GridRaw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        assert_eq!(
            borel_cantelli_grid(GridKind::Corollary, 2.0, 4).unwrap(),
            vec![4, 9, 16]
        );
        assert_eq!(
            borel_cantelli_grid(GridKind::Theorem1, 1.0, 3).unwrap(),
            vec![4, 9]
        );
        assert_eq!(
            borel_cantelli_grid(GridKind::Corollary, 4.0, 5).unwrap(),
            vec![2, 3, 4, 5]
        );
        assert!(borel_cantelli_grid(GridKind::Corollary, 0.0, 5).is_err());
        assert!(borel_cantelli_grid(GridKind::Corollary, 1.0, 1).is_err());
    }

    #[test]
    fn grid_power_one_and_two() {
        // η = 1 on the corollary grid gives k⁴; η = 4/3 gives k³
        assert_eq!(
            borel_cantelli_grid(GridKind::Corollary, 1.0, 4).unwrap(),
            vec![16, 81, 256]
        );
        assert_eq!(
            borel_cantelli_grid(GridKind::Theorem1, 0.5, 4).unwrap(),
            vec![16, 81, 256]
        );
    }

    #[test]
    fn fractional_exponent_floors_whole_power() {
        // 2/0.3 = 6.67: k = 2 gives ⌊101.6⌋
        let g = borel_cantelli_grid(GridKind::Theorem1, 0.3, 3).unwrap();
        assert_eq!(g, vec![101, 1516]);
        for (k, n) in [(2u64, 101usize), (3, 1516)] {
            let x = (k as f64).powf(2.0 / 0.3);
            assert!(n as f64 <= x && x < n as f64 + 1.0);
        }
    }

    #[test]
    fn large_grids_truncate() {
        // k^40 passes 10^7 at k = 2
        let g = borel_cantelli_grid(GridKind::Corollary, 0.1, 1000);
        assert!(g.unwrap().is_empty());
        let g = borel_cantelli_grid(GridKind::Theorem1, 0.5, 1000).unwrap();
        assert_eq!(g.len(), 55);
        assert_eq!(*g.last().unwrap(), 56usize.pow(4));
    }

    #[test]
    fn geometric_grids() {
        assert_eq!(
            geometric_grid(256, 8192, 2.0).unwrap(),
            vec![256, 512, 1024, 2048, 4096, 8192]
        );
        assert_eq!(geometric_grid(10, 100, 1.5).unwrap(), vec![10, 15, 23, 34, 51, 76]);
        assert!(geometric_grid(1, 10, 2.0).is_err());
        assert!(geometric_grid(4, 10, 1.0).is_err());
    }

    #[test]
    fn parse_and_display() {
        for text in ["4,9,16", "geom:256:8192:2", "bc:theorem1:10", "bc:corollary:3"] {
            let g: GridSpec = text.parse().unwrap();
            assert_eq!(g.to_string(), text);
        }
        assert!("geom:1:2".parse::<GridSpec>().is_err());
        assert!("a,b".parse::<GridSpec>().is_err());
        let g: GridSpec = "9,4".parse().unwrap();
        assert!(g.expand(None).is_err());
        let g: GridSpec = "bc:theorem1:3".parse().unwrap();
        assert!(g.expand(None).is_err());
        assert_eq!(g.expand(Some(1.0)).unwrap(), vec![4, 9]);
    }
}
