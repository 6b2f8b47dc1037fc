//! Chebyshev–Gauss–Lobatto nodes and barycentric spectral differentiation
//! on an arbitrary interval, used as the independent collocation oracle
//! for the derivative hierarchy.

use nalgebra::DMatrix;

use crate::scalar::{real, real_usize, Real};

/// `n` Gauss–Lobatto nodes on `[a, b]`, ascending, with the interior
/// symmetry enforced bit-exactly (the midpoint is exact for odd `n`).
pub fn cgl_nodes<T: Real>(n: usize, a: T, b: T) -> Vec<T> {
    assert!(n >= 2, "need at least two nodes");
    let big_n = n - 1;
    let half = real::<T>(0.5);
    let center = half * (a + b);
    let radius = half * (b - a);
    let mut ref_nodes = vec![T::zero(); n];
    for k in 0..n / 2 {
        let theta = T::pi() * real_usize::<T>(k) / real_usize::<T>(big_n);
        let theta_m = T::pi() * real_usize::<T>(big_n - k) / real_usize::<T>(big_n);
        let r = half * (theta_m.cos() - theta.cos());
        ref_nodes[k] = r;
        ref_nodes[big_n - k] = -r;
    }
    ref_nodes.iter().map(|&r| center + radius * r).collect()
}

/// Barycentric differentiation matrix on the [`cgl_nodes`] of `[a, b]`.
/// Row sums vanish exactly (negative-sum diagonal), so constants map to
/// zero.
pub fn diff_matrix<T: Real>(n: usize, a: T, b: T) -> DMatrix<T> {
    let nodes = cgl_nodes(n, a, b);
    let mut w = vec![T::one(); n];
    for (k, wk) in w.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { T::one() } else { -T::one() };
        let edge = if k == 0 || k == n - 1 {
            real::<T>(0.5)
        } else {
            T::one()
        };
        *wk = sign * edge;
    }
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = T::zero();
        for j in 0..n {
            if i != j {
                let val = w[j] / w[i] / (nodes[i] - nodes[j]);
                d[(i, j)] = val;
                diag -= val;
            }
        }
        d[(i, i)] = diag;
    }
    d
}
