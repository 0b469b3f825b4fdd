//! Slice-level vector helpers shared by the layers.

use rand::Rng;

/// Dot product with eight independent accumulators. Summation order is fixed,
/// so results are bitwise reproducible.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out = bias + W x` for a row-major `W` with `x.len()` columns.
pub fn matvec_add(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += W^T v`
pub fn matvec_t_add(w: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (&vi, row) in v.iter().zip(w.chunks_exact(cols)) {
        if vi != 0.0 {
            axpy(vi, row, out);
        }
    }
}

/// `W += u v^T`
pub fn outer_add(u: &[f64], v: &[f64], w: &mut [f64]) {
    let cols = v.len();
    for (&ui, row) in u.iter().zip(w.chunks_exact_mut(cols)) {
        if ui != 0.0 {
            axpy(ui, v, row);
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

/// Fills `xs` uniformly from `[-bound, bound]`.
pub fn fill_uniform<R: Rng + ?Sized>(rng: &mut R, xs: &mut [f64], bound: f64) {
    for x in xs {
        *x = rng.random_range(-bound..=bound);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dot_small() {
        assert_eq!(dot(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), 32.0);
        let a: Vec<f64> = (0..19).map(f64::from).collect();
        let naive: f64 = a.iter().map(|x| x * x).sum();
        assert_eq!(dot(&a, &a), naive);
    }

    #[test]
    fn transposed_matvec() {
        // W = [[1,2],[3,4],[5,6]]
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut out = [0.0; 3];
        matvec_add(&w, &[1.0, 1.0], &mut out);
        assert_eq!(out, [3.0, 7.0, 11.0]);
        let mut back = [0.0; 2];
        matvec_t_add(&w, &[1.0, 0.0, 1.0], &mut back);
        assert_eq!(back, [6.0, 8.0]);
        let mut g = [0.0; 6];
        outer_add(&[1.0, 2.0, 0.0], &[3.0, 4.0], &mut g);
        assert_eq!(g, [3.0, 4.0, 6.0, 8.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn sigmoid_in_unit_interval(x in -700.0f64..700.0) {
            let s = sigmoid(x);
            prop_assert!((0.0..=1.0).contains(&s));
            if x.abs() <= 30.0 {
                prop_assert!(s > 0.0 && s < 1.0);
            }
            prop_assert!((sigmoid(-x) - (1.0 - s)).abs() < 1e-15);
        }

        #[test]
        fn tanh_bounded(x in -1e3f64..1e3) {
            prop_assert!(x.tanh().abs() <= 1.0);
        }
    }
}
