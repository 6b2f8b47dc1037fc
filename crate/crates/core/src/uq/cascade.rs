//! Scalar cascade recursions controlling the derivative hierarchy, and the
//! exact solution of the equality cascade through the Jordan decomposition
//! of the strictly upper-triangular all-ones matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Pascal triangle of real-valued binomial coefficients, exact in double
/// precision well past the order guard.
pub(crate) fn binomial_table<T: Real>(max_n: usize) -> Vec<Vec<T>> {
    let mut table: Vec<Vec<T>> = Vec::with_capacity(max_n + 1);
    for n in 0..=max_n {
        let mut row = vec![T::one(); n + 1];
        for k in 1..n {
            row[k] = table[n - 1][k - 1] + table[n - 1][k];
        }
        table.push(row);
    }
    table
}

pub(crate) fn factorials<T: Real>(max_n: usize) -> Vec<T> {
    let mut f = vec![T::one(); max_n + 1];
    for n in 1..=max_n {
        f[n] = f[n - 1] * real::<T>(n as f64);
    }
    f
}

/// Maximum cascade order: binomials stay exactly representable in doubles.
pub const MAX_CASCADE_ORDER: usize = 20;

/// Closed-form bound of the entropy-root cascade
/// `h_l' ≤ -λ_z h_l + C̃₁ l h_{l-1}`:
/// `h_l(t) ≤ e^{-λ_z t} Σ_k C(l,k) (C̃₁ t)^k h_{l-k}(0)`.
pub fn cascade_hl_bound<T: Real>(t: T, l: usize, c1_tilde: T, lambda_z: T, h0: &[T]) -> Result<T> {
    if h0.len() < l + 1 {
        return Err(Error::InvalidParameter {
            name: "h0",
            reason: format!("need {} initial values, got {}", l + 1, h0.len()),
        });
    }
    if h0.iter().any(|&h| h < T::zero()) {
        return Err(Error::InvalidParameter {
            name: "h0",
            reason: "initial values must be nonnegative".into(),
        });
    }
    let binom = binomial_table::<T>(l);
    let mut sum = T::zero();
    let mut power = T::one();
    for k in 0..=l {
        sum += binom[l][k] * power * h0[l - k];
        power *= c1_tilde * t;
    }
    Ok((-lambda_z * t).exp() * sum)
}

/// Jordan data of the strictly upper-triangular all-ones matrix `A` on
/// vectors ordered `[η_l, ..., η_0]`: a single nilpotent block `J` with
/// `A·S = S·J`.
pub struct JordanCascade<T: Real> {
    pub a: DMatrix<T>,
    pub s: DMatrix<T>,
    pub s_inv: DMatrix<T>,
    pub j: DMatrix<T>,
}

/// Build the Jordan basis for order `l`. The generalized-eigenvector chain
/// has the explicit entries `S_{mn} = (-1)^{n-m} C(n-2, n-m)` and
/// `S⁻¹_{mn} = C(n-2, n-m)` for `n ≥ m ≥ 2` (1-based indices).
pub fn jordan_cascade<T: Real>(l: usize) -> Result<JordanCascade<T>> {
    if l > MAX_CASCADE_ORDER {
        return Err(Error::OrderGuard {
            got: l,
            max: MAX_CASCADE_ORDER,
        });
    }
    let n = l + 1;
    let binom = binomial_table::<T>(n);
    let a = DMatrix::from_fn(n, n, |r, c| if c > r { T::one() } else { T::zero() });
    let j = DMatrix::from_fn(n, n, |r, c| if c == r + 1 { T::one() } else { T::zero() });
    let mut s = DMatrix::zeros(n, n);
    let mut s_inv = DMatrix::zeros(n, n);
    s[(0, 0)] = T::one();
    s_inv[(0, 0)] = T::one();
    for m in 2..=n {
        for nn in m..=n {
            let coeff = binom[nn - 2][nn - m];
            let sign = if (nn - m) % 2 == 0 {
                T::one()
            } else {
                -T::one()
            };
            s[(m - 1, nn - 1)] = sign * coeff;
            s_inv[(m - 1, nn - 1)] = coeff;
        }
    }
    // Internal consistency of the chain construction.
    let residual = &a * &s - &s * &j;
    let max_res = residual.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
    assert!(
        max_res <= real::<T>(1e-9),
        "Jordan chain construction failed: |A·S - S·J| = {:?}",
        max_res
    );
    Ok(JordanCascade { a, s, s_inv, j })
}

/// Exact solution of the equality cascade `η' = C̃₂ A η` at time `t`.
///
/// `eta0` and the returned vector are in ascending order `[η_0, ..., η_l]`.
pub fn cascade_eta_exact<T: Real>(t: T, l: usize, c2_tilde: T, eta0: &[T]) -> Result<Vec<T>> {
    if eta0.len() < l + 1 {
        return Err(Error::InvalidParameter {
            name: "eta0",
            reason: format!("need {} initial values, got {}", l + 1, eta0.len()),
        });
    }
    let jordan = jordan_cascade::<T>(l)?;
    let n = l + 1;
    let fact = factorials::<T>(n);
    // exp(C̃₂ t J) for the single nilpotent block: upper-triangular Toeplitz
    // with (C̃₂ t)^k / k! on the k-th superdiagonal.
    let ct = c2_tilde * t;
    let mut powers = vec![T::one(); n];
    for k in 1..n {
        powers[k] = powers[k - 1] * ct;
    }
    let expj = DMatrix::from_fn(n, n, |r, c| {
        if c >= r {
            powers[c - r] / fact[c - r]
        } else {
            T::zero()
        }
    });
    // Descending-order vector [η_l, ..., η_0].
    let v0 = nalgebra::DVector::from_fn(n, |r, _| eta0[l - r]);
    let v_t = &jordan.s * (expj * (&jordan.s_inv * v0));
    Ok((0..n).map(|k| v_t[l - k]).collect())
}

/// The three closed-form bounds of the normalized cascade with initial
/// data `η_l(0) ≤ H^l/l!`.
#[derive(Debug, Clone, Copy)]
pub struct EtaBounds<T> {
    /// `H^l/l! + (1+H)^{l+1} Σ_{k=1}^l (C̃₂t)^k/(k!(k-1)!)·(l-1)!/(l-k)!`
    pub sharp: T,
    /// `H^l/l! + (1+H)^{l+1}(1 + C̃₂t)^l`
    pub relaxed_poly: T,
    /// `H^l/l! + (1+H)^{l+1} e^{C̃₂t} 2^{l-1}`
    pub relaxed_exp: T,
}

pub fn cascade_eta_bound<T: Real>(t: T, l: usize, c2_tilde: T, h: T) -> Result<EtaBounds<T>> {
    if h < T::zero() {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: "must be nonnegative".into(),
        });
    }
    let fact = factorials::<T>(l.max(1));
    let ct = c2_tilde * t;
    let head = int_pow(h, l) / fact[l];
    let growth = int_pow(T::one() + h, l + 1);

    let mut sum = T::zero();
    let mut ct_pow = T::one();
    for k in 1..=l {
        ct_pow *= ct;
        // (l-1)!/(l-k)! = falling factorial (l-1)(l-2)···(l-k+1)
        let mut falling = T::one();
        for m in 0..k.saturating_sub(1) {
            falling *= real::<T>((l - 1 - m) as f64);
        }
        sum += ct_pow / (fact[k] * fact[k - 1]) * falling;
    }
    let sharp = head + growth * sum;
    let relaxed_poly = head + growth * int_pow(T::one() + ct, l);
    let two = real::<T>(2.0);
    let relaxed_exp = head + growth * ct.exp() * two.powi(l as i32 - 1);
    Ok(EtaBounds {
        sharp,
        relaxed_poly,
        relaxed_exp,
    })
}

/// `x^k` with the `0^0 = 1` convention.
pub(crate) fn int_pow<T: Real>(x: T, k: usize) -> T {
    if k == 0 {
        T::one()
    } else {
        x.powi(k as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Fixed-step RK4 for a small linear ODE system.
    fn rk4<F: Fn(&[f64]) -> Vec<f64>>(rhs: F, y0: &[f64], t_end: f64, steps: usize) -> Vec<f64> {
        let h = t_end / steps as f64;
        let mut y = y0.to_vec();
        for _ in 0..steps {
            let k1 = rhs(&y);
            let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
            let k2 = rhs(&y2);
            let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
            let k3 = rhs(&y3);
            let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
            let k4 = rhs(&y4);
            for i in 0..y.len() {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        y
    }

    #[test]
    fn hl_bound_low_orders() {
        let (lam, c1t) = (0.7, 1.3);
        let h0 = vec![2.0, 0.5, 0.25];
        let t = 1.7;
        let b0 = cascade_hl_bound(t, 0, c1t, lam, &h0).unwrap();
        assert_relative_eq!(b0, (-lam * t as f64).exp() * h0[0], epsilon = 1e-14);
        let b1 = cascade_hl_bound(t, 1, c1t, lam, &h0).unwrap();
        assert_relative_eq!(
            b1,
            (-lam * t).exp() * (h0[1] + c1t * t * h0[0]),
            epsilon = 1e-14
        );
    }

    #[test]
    fn hl_bound_matches_rk4_on_the_equality_cascade() {
        // d/dt h_l = -λ h_l + C̃₁ l h_{l-1}, solved as a coupled system.
        let (lam, c1t) = (0.9, 0.8);
        let lmax = 8;
        let h0: Vec<f64> = (0..=lmax).map(|l| 1.0 / (1.0 + l as f64)).collect();
        for &t in &[0.5, 2.0, 5.0] {
            let rhs = |y: &[f64]| {
                let mut dy = vec![0.0; y.len()];
                for l in 0..y.len() {
                    dy[l] = -lam * y[l]
                        + if l > 0 { c1t * l as f64 * y[l - 1] } else { 0.0 };
                }
                dy
            };
            let y = rk4(rhs, &h0, t, 20_000);
            for l in 0..=lmax {
                let bound = cascade_hl_bound(t, l, c1t, lam, &h0).unwrap();
                assert!(
                    (y[l] - bound).abs() <= 1e-10 * (1.0 + bound.abs()),
                    "l={l} t={t}: rk4 {} vs formula {bound}",
                    y[l]
                );
            }
        }
    }

    #[test]
    fn eta_exact_small_triangular_system() {
        // l=2, C̃₂=1, η(0) = (η_0, η_1, η_2) = (1, 0, 0):
        // η_1 = t, η_2 = t + t²/2.
        for &t in &[0.3, 1.0, 2.5] {
            let out = cascade_eta_exact(t, 2, 1.0, &[1.0, 0.0, 0.0]).unwrap();
            assert_relative_eq!(out[0], 1.0, epsilon = 1e-14);
            assert_relative_eq!(out[1], t, epsilon = 1e-13);
            assert_relative_eq!(out[2], t + 0.5 * t * t, epsilon = 1e-13);
        }
        // l=0: empty sum, η_0 constant.
        let out = cascade_eta_exact(3.0, 0, 2.0, &[0.7]).unwrap();
        assert_eq!(out[0], 0.7);
    }

    #[test]
    fn eta_exact_matches_rk4() {
        let c2t = 1.1;
        let lmax = 8;
        let eta0: Vec<f64> = (0..=lmax).map(|l| 0.3 + 0.1 * l as f64).collect();
        for &t in &[1.0, 5.0] {
            let rhs = |y: &[f64]| {
                let mut dy = vec![0.0; y.len()];
                for l in 1..y.len() {
                    dy[l] = c2t * y[..l].iter().sum::<f64>();
                }
                dy
            };
            let y = rk4(rhs, &eta0, t, 20_000);
            let exact = cascade_eta_exact(t, lmax, c2t, &eta0).unwrap();
            for l in 0..=lmax {
                assert!(
                    (y[l] - exact[l]).abs() <= 1e-8 * (1.0 + exact[l].abs()),
                    "l={l} t={t}: rk4 {} vs jordan {}",
                    y[l],
                    exact[l]
                );
            }
        }
    }

    #[test]
    fn jordan_chain_identity_holds_up_to_order_12() {
        for l in 0..=12 {
            let j = jordan_cascade::<f64>(l).unwrap();
            let res = &j.a * &j.s - &j.s * &j.j;
            let max = res.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            assert!(max <= 1e-9, "order {l}: residual {max}");
            let prod = &j.s * &j.s_inv;
            let eye_res = (prod - DMatrix::<f64>::identity(l + 1, l + 1))
                .iter()
                .fold(0.0f64, |acc, v: &f64| acc.max(v.abs()));
            assert!(eye_res <= 1e-9, "order {l}: S·S⁻¹ residual {eye_res}");
        }
        assert!(jordan_cascade::<f64>(MAX_CASCADE_ORDER + 1).is_err());
    }

    #[test]
    fn eta_bounds_spot_values_and_ordering() {
        // t = 0: the sum vanishes, sharp = H^l/l!.
        let b = cascade_eta_bound(0.0, 3, 2.0, 1.5).unwrap();
        assert_relative_eq!(b.sharp, 1.5f64.powi(3) / 6.0, epsilon = 1e-14);

        // l = 1: sharp = H + C̃₂ t (1+H)².
        let (t, c2t, h) = (0.8, 1.7, 0.6);
        let b1 = cascade_eta_bound(t, 1, c2t, h).unwrap();
        assert_relative_eq!(
            b1.sharp,
            h + c2t * t * (1.0 + h) * (1.0 + h),
            epsilon = 1e-14
        );

        // exact ≤ sharp ≤ both relaxations on the full test grid.
        for l in 0..=10usize {
            let fact = factorials::<f64>(l.max(1));
            for &h in &[0.0, 1.0] {
                for k in 0..=10 {
                    let t = 0.5 * k as f64;
                    let eta_init: Vec<f64> =
                        (0..=l).map(|m| int_pow(h, m) / fact[m]).collect();
                    let exact = cascade_eta_exact(t, l, 1.3, &eta_init).unwrap();
                    let b = cascade_eta_bound(t, l, 1.3, h).unwrap();
                    assert!(
                        exact[l] <= b.sharp * (1.0 + 1e-12) + 1e-12,
                        "exact > sharp at l={l}, h={h}, t={t}"
                    );
                    assert!(b.sharp <= b.relaxed_poly + 1e-12);
                    assert!(b.sharp <= b.relaxed_exp + 1e-12);
                }
            }
        }
    }
}
