//! Metrics for comparing throughput predictors against measured labels.

mod heatmap;
mod report;
mod speed;

pub use heatmap::{bin_heatmap, curve_csv, error_curve, heatmap_svg, CurveRow, HeatmapGrid, BIN_CYCLES, DEFAULT_CAP};
pub use report::{best_predictor_share, build_report, EvalReport, ToolRow};
pub use speed::{estimator_speed, SpeedReport, MIN_SPEED_BLOCKS};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("length mismatch: {preds} predictions for {actuals} labels")]
    LengthMismatch { preds: usize, actuals: usize },
    #[error("label must be positive, got {0}")]
    NonPositiveLabel(f64),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("need at least {needed} {what}, got {got}")]
    TooFew { what: &'static str, needed: usize, got: usize },
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
}

fn check_pair(preds: &[f64], actuals: &[f64]) -> Result<(), EvalError> {
    if preds.len() != actuals.len() {
        return Err(EvalError::LengthMismatch { preds: preds.len(), actuals: actuals.len() });
    }
    Ok(())
}

/// Mean of `|p - a| / a`.
pub fn avg_error(preds: &[f64], actuals: &[f64]) -> Result<f64, EvalError> {
    check_pair(preds, actuals)?;
    if preds.is_empty() {
        return Err(EvalError::TooFew { what: "samples", needed: 1, got: 0 });
    }
    let mut total = 0.0;
    for (&p, &a) in preds.iter().zip(actuals) {
        if !(a > 0.0) {
            return Err(EvalError::NonPositiveLabel(a));
        }
        total += (p - a).abs() / a;
    }
    Ok(total / preds.len() as f64)
}

/// Product-moment correlation. Fails on a constant series.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    check_pair(xs, ys)?;
    if xs.len() < 2 {
        return Err(EvalError::TooFew { what: "samples", needed: 2, got: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::DegenerateInput("series has zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Rank correlation: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    check_pair(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Two-pass textbook formula written independently of `pearson`.
    fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx: f64 = x.iter().sum::<f64>() / n;
        let my: f64 = y.iter().sum::<f64>() / n;
        let cov: f64 = (0..x.len()).map(|i| (x[i] - mx) * (y[i] - my)).sum::<f64>() / (n - 1.0);
        let sx = (x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let sy = (y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        cov / (sx * sy)
    }

    // Rank by counting: rank(v) = #less + (#equal + 1) / 2.
    fn brute_ranks(x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|&v| {
                let less = x.iter().filter(|&&w| w < v).count() as f64;
                let eq = x.iter().filter(|&&w| w == v).count() as f64;
                less + (eq + 1.0) / 2.0
            })
            .collect()
    }

    #[test]
    fn avg_error_examples() {
        let a = [100.0, 250.0, 7.0];
        assert_eq!(avg_error(&a, &a).unwrap(), 0.0);
        let p: Vec<f64> = a.iter().map(|v| v * 1.1).collect();
        assert!((avg_error(&p, &a).unwrap() - 0.1).abs() < 1e-12);
        assert!((avg_error(&[90.0, 110.0], &[100.0, 100.0]).unwrap() - 0.1).abs() < 1e-12);
        assert!(matches!(avg_error(&[1.0], &[0.0]), Err(EvalError::NonPositiveLabel(_))));
        assert!(matches!(avg_error(&[1.0, 2.0], &[1.0]), Err(EvalError::LengthMismatch { .. })));
    }

    #[test]
    fn avg_error_matches_training_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<f64> = (0..50).map(|_| rng.random_range(1.0..500.0)).collect();
        let p: Vec<f64> = (0..50).map(|_| rng.random_range(-10.0..600.0)).collect();
        let mean = p.iter().zip(&a).map(|(&p, &a)| crate::training::loss(p, a).unwrap()).sum::<f64>() / 50.0;
        assert!((avg_error(&p, &a).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn spearman_examples() {
        let up = [1.0, 2.0, 5.0, 9.0];
        assert!((spearman(&up, &[3.0, 4.0, 10.0, 11.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&up, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        let x = [1.0, 2.0, 2.0, 3.0];
        let y = [1.0, 3.0, 2.0, 4.0];
        let want = pearson_oracle(&brute_ranks(&x), &brute_ranks(&y));
        assert!((spearman(&x, &y).unwrap() - want).abs() < 1e-12);
        assert!(matches!(spearman(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]), Err(EvalError::DegenerateInput(_))));
    }

    #[test]
    fn pearson_examples() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.7).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..1000.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v + rng.random_range(-300.0..300.0)).collect();
        assert!((pearson(&a, &b).unwrap() - pearson_oracle(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn ranks_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x: Vec<f64> = (0..30).map(|_| rng.random_range(0..8) as f64).collect();
            assert_eq!(average_ranks(&x), brute_ranks(&x));
        }
    }

    proptest! {
        #[test]
        fn spearman_monotone_invariant(
            pairs in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 3..40)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            if let Ok(r) = spearman(&x, &y) {
                let tx: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
                let ty: Vec<f64> = y.iter().map(|v| (v + 1.0).ln()).collect();
                prop_assert!((spearman(&tx, &ty).unwrap() - r).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }

        #[test]
        fn pearson_affine_invariant(
            pairs in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 3..40),
            s in 0.1f64..10.0,
            t in -50.0f64..50.0,
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            if let Ok(r) = pearson(&x, &y) {
                let tx: Vec<f64> = x.iter().map(|v| s * v + t).collect();
                prop_assert!((pearson(&tx, &y).unwrap() - r).abs() < 1e-9);
            }
        }
    }
}
