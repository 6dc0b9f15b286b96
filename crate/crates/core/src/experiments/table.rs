use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::circle::Dyadic;
use crate::error::{Error, Result};

/// One (N, α) cell of a scan. Serialized columns follow the declaration order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha_id: u64,
    pub alpha_hex: String,
    /// Exact `δ_min` as `hexmantissa:bits`.
    pub delta_min_hex: String,
    pub delta_min: String,
    /// `N²·δ_min`.
    pub scaled: f64,
    pub d_value: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<u64>,
    pub collision: bool,
    /// `δ_min ≤ N^{−(2+η)}`.
    pub lower_violation: Option<bool>,
    /// `δ_min < N^{−(2−η)}`.
    pub upper_satisfied: Option<bool>,
    pub distinct_gaps: usize,
    /// `δ_min·N·(log N)^{2+ε}`, prime scans only.
    pub normalized: Option<f64>,
    #[serde(skip)]
    pub delta: Dyadic,
}

impl ResultRow {
    pub fn log2_delta(&self) -> f64 {
        self.delta.log2()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(rows: Vec<ResultRow>) -> Self {
        ResultTable { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record(CSV_HEADER)?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, mut out: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Rows grouped by `alpha_id`, each group in table order.
    pub fn by_alpha(&self) -> BTreeMap<u64, Vec<&ResultRow>> {
        let mut map: BTreeMap<u64, Vec<&ResultRow>> = BTreeMap::new();
        for row in &self.rows {
            map.entry(row.alpha_id).or_default().push(row);
        }
        map
    }
}

pub const CSV_HEADER: [&str; 13] = [
    "N",
    "alpha_id",
    "alpha_hex",
    "delta_min_hex",
    "delta_min",
    "scaled",
    "d_value",
    "M",
    "collision",
    "lower_violation",
    "upper_satisfied",
    "distinct_gaps",
    "normalized",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaSlope {
    pub alpha_id: u64,
    pub slope: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub per_alpha: Vec<AlphaSlope>,
    pub median_slope: f64,
    /// Alphas left out for having fewer than three collision-free N.
    pub skipped: Vec<u64>,
}

/// Least-squares slope of `y` against `x`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

/// Per-α slope of `log δ_min` against `log N`, so `δ_min ~ N^slope`.
/// Collision rows are excluded.
pub fn fit_exponent(table: &ResultTable) -> Result<ExponentFit> {
    let mut per_alpha = Vec::new();
    let mut skipped = Vec::new();
    for (alpha_id, rows) in table.by_alpha() {
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| !r.collision)
            .map(|r| ((r.n as f64).log2(), r.log2_delta()))
            .collect();
        pts.dedup_by(|a, b| a.0 == b.0);
        if pts.len() < 3 {
            skipped.push(alpha_id);
            continue;
        }
        per_alpha.push(AlphaSlope {
            alpha_id,
            slope: least_squares_slope(&pts),
            points: pts.len(),
        });
    }
    if per_alpha.is_empty() {
        return Err(Error::argument(
            "exponent fit needs at least 3 distinct collision-free N for some alpha",
        ));
    }
    let slopes: Vec<f64> = per_alpha.iter().map(|s| s.slope).collect();
    Ok(ExponentFit {
        median_slope: median(&slopes),
        per_alpha,
        skipped,
    })
}
