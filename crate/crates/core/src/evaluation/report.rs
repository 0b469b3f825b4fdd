//! Per-tool summary table and the best-predictor share.

use std::fmt::Write;

use super::{avg_error, check_pair, pearson, spearman, EvalError};

#[derive(Debug, Clone, PartialEq)]
pub struct ToolRow {
    pub tool: String,
    pub error: f64,
    /// `None` when the series is degenerate (constant).
    pub spearman: Option<f64>,
    pub pearson: Option<f64>,
    /// Present when at least two tools are compared.
    pub best_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub samples: usize,
    pub rows: Vec<ToolRow>,
}

impl EvalReport {
    pub fn row(&self, tool: &str) -> Option<&ToolRow> {
        self.rows.iter().find(|r| r.tool == tool)
    }

    /// Tab-separated `Method, Error, Spearman, Pearson` table, three decimals,
    /// followed by the best-predictor shares when there are several tools.
    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
        let mut s = String::from("Method\tError\tSpearman\tPearson\n");
        for r in &self.rows {
            writeln!(s, "{}\t{:.3}\t{}\t{}", r.tool, r.error, fmt(r.spearman), fmt(r.pearson)).unwrap();
        }
        if self.rows.iter().any(|r| r.best_share.is_some()) {
            s.push_str("\nMethod\tBestShare\n");
            for r in &self.rows {
                writeln!(s, "{}\t{}", r.tool, fmt(r.best_share)).unwrap();
            }
        }
        writeln!(s, "\nSamples\t{}", self.samples).unwrap();
        s
    }
}

/// Fraction of blocks on which each tool has the smallest absolute error.
/// A block won by `k` tools at once credits each of them `1/k`.
pub fn best_predictor_share(preds: &[&[f64]], actuals: &[f64]) -> Result<Vec<f64>, EvalError> {
    if preds.len() < 2 {
        return Err(EvalError::TooFew { what: "tools", needed: 2, got: preds.len() });
    }
    for p in preds {
        check_pair(p, actuals)?;
    }
    if actuals.is_empty() {
        return Err(EvalError::TooFew { what: "samples", needed: 1, got: 0 });
    }
    let mut wins = vec![0.0; preds.len()];
    for (i, &a) in actuals.iter().enumerate() {
        let errs: Vec<f64> = preds.iter().map(|p| (p[i] - a).abs()).collect();
        let best = errs.iter().copied().fold(f64::INFINITY, f64::min);
        let k = errs.iter().filter(|&&e| e == best).count() as f64;
        for (w, &e) in wins.iter_mut().zip(&errs) {
            if e == best {
                *w += 1.0 / k;
            }
        }
    }
    let n = actuals.len() as f64;
    Ok(wins.into_iter().map(|w| w / n).collect())
}

/// One row per `(tool, predictions)` pair, in input order.
pub fn build_report(tools: &[(String, Vec<f64>)], actuals: &[f64]) -> Result<EvalReport, EvalError> {
    let shares = if tools.len() >= 2 {
        let refs: Vec<&[f64]> = tools.iter().map(|(_, p)| p.as_slice()).collect();
        Some(best_predictor_share(&refs, actuals)?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(tools.len());
    for (i, (tool, p)) in tools.iter().enumerate() {
        rows.push(ToolRow {
            tool: tool.clone(),
            error: avg_error(p, actuals)?,
            spearman: degenerate_as_none(spearman(p, actuals))?,
            pearson: degenerate_as_none(pearson(p, actuals))?,
            best_share: shares.as_ref().map(|s| s[i]),
        });
    }
    Ok(EvalReport { samples: actuals.len(), rows })
}

fn degenerate_as_none(r: Result<f64, EvalError>) -> Result<Option<f64>, EvalError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(EvalError::DegenerateInput(_) | EvalError::TooFew { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}
