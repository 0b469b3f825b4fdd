//! Actual-vs-predicted binning and per-range error curves.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{check_pair, EvalError};

pub const BIN_CYCLES: f64 = 20.0;
pub const DEFAULT_CAP: f64 = 1000.0;

/// Counts of `(actual, predicted)` pairs in half-open square bins
/// `[k * bin, (k + 1) * bin)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    pub bin: f64,
    pub cap: f64,
    /// `(actual bin, predicted bin) -> count`
    pub cells: BTreeMap<(u64, u64), usize>,
    /// Pairs with either coordinate outside `[0, cap)`.
    pub out_of_cap: usize,
}

impl HeatmapGrid {
    pub fn total(&self) -> usize {
        self.cells.values().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("xbin,ybin,count\n");
        for (&(x, y), &c) in &self.cells {
            writeln!(s, "{x},{y},{c}").unwrap();
        }
        s
    }
}

fn in_cap(v: f64, cap: f64) -> bool {
    (0.0..cap).contains(&v)
}

pub fn bin_heatmap(preds: &[f64], actuals: &[f64], cap: f64) -> Result<HeatmapGrid, EvalError> {
    check_pair(preds, actuals)?;
    let mut grid = HeatmapGrid { bin: BIN_CYCLES, cap, cells: BTreeMap::new(), out_of_cap: 0 };
    for (&p, &a) in preds.iter().zip(actuals) {
        if in_cap(a, cap) && in_cap(p, cap) {
            let key = ((a / BIN_CYCLES).floor() as u64, (p / BIN_CYCLES).floor() as u64);
            *grid.cells.entry(key).or_insert(0) += 1;
        } else {
            grid.out_of_cap += 1;
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    /// Index of the actual-throughput bin.
    pub bin: u64,
    pub mean_error: f64,
    pub count: usize,
}

/// Mean normalized error grouped by actual-throughput bin. Samples whose
/// label is at or above `cap` are left out; empty bins are omitted.
pub fn error_curve(preds: &[f64], actuals: &[f64], bin: f64, cap: f64) -> Result<Vec<CurveRow>, EvalError> {
    check_pair(preds, actuals)?;
    let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for (&p, &a) in preds.iter().zip(actuals) {
        if !(a > 0.0) {
            return Err(EvalError::NonPositiveLabel(a));
        }
        if a >= cap {
            continue;
        }
        let e = acc.entry((a / bin).floor() as u64).or_insert((0.0, 0));
        e.0 += (p - a).abs() / a;
        e.1 += 1;
    }
    Ok(acc.into_iter().map(|(bin, (sum, count))| CurveRow { bin, mean_error: sum / count as f64, count }).collect())
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from("bin,mean_error,count\n");
    for r in rows {
        writeln!(s, "{},{},{}", r.bin, r.mean_error, r.count).unwrap();
    }
    s
}

/// Heatmap picture: x is actual, y is predicted (growing upward), shade
/// is linear in `ln(count + 1)`.
pub fn heatmap_svg(grid: &HeatmapGrid) -> String {
    const CELL: u64 = 8;
    let bins = (grid.cap / grid.bin).ceil() as u64;
    let side = bins * CELL;
    let top = grid.cells.values().copied().max().unwrap_or(0);
    let denom = ((top + 1) as f64).ln().max(f64::MIN_POSITIVE);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}" height="{side}" viewBox="0 0 {side} {side}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{side}" height="{side}" fill="white"/>"#).unwrap();
    for (&(x, y), &c) in &grid.cells {
        if x >= bins || y >= bins {
            continue;
        }
        let t = ((c + 1) as f64).ln() / denom;
        let shade = |lo: f64, hi: f64| (hi + (lo - hi) * t).round() as u8;
        let (r, g, b) = (shade(8.0, 255.0), shade(48.0, 255.0), shade(107.0, 255.0));
        writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="#{r:02x}{g:02x}{b:02x}"><title>{c}</title></rect>"##,
            x * CELL,
            side - (y + 1) * CELL
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}
