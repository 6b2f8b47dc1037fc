//! Dense transport, collision, projection, and auxiliary operators in the
//! weighted inner product, together with the measured coercivity constants
//! `alpha`, `beta`, `gamma` and the assumption checks.
//!
//! Conventions: fields are flattened with `x` outer and `v` inner, the
//! weighted measure has the diagonal `mu_j = dx·lx·w_j/M_j`, and the
//! adjoint of an operator `X` is `X† = W⁻¹ Xᵀ W`. Spectral quantities are
//! computed on the similarity transform `W^{1/2} X W^{-1/2}`, which turns
//! weighted self-adjointness into plain matrix symmetry.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::phase_space::{Field, SharedGrid};
use crate::scalar::{real, real_usize, Real};

/// Semantic role of an assembled operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorRole {
    Transport,
    Collision,
    Projection,
    Auxiliary,
}

/// Spatial derivative discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeRule {
    /// Periodic spectral differentiation matrix (exactly antisymmetric).
    Spectral,
    /// Second-order central differences on the periodic grid.
    Central2,
}

/// Dense matrix acting on flattened fields.
#[derive(Debug, Clone)]
pub struct KineticOperator<T: Real> {
    matrix: DMatrix<T>,
    role: OperatorRole,
    grid: SharedGrid<T>,
}

impl<T: Real> KineticOperator<T> {
    pub fn from_matrix(matrix: DMatrix<T>, role: OperatorRole, grid: &SharedGrid<T>) -> Self {
        assert_eq!(matrix.nrows(), grid.len());
        assert_eq!(matrix.ncols(), grid.len());
        KineticOperator {
            matrix,
            role,
            grid: grid.clone(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn role(&self) -> OperatorRole {
        self.role
    }

    pub fn grid(&self) -> &SharedGrid<T> {
        &self.grid
    }

    pub fn apply(&self, f: &Field<T>) -> Result<Field<T>> {
        if !self.grid.compatible(f.grid()) {
            return Err(Error::GridMismatch);
        }
        let x = DVector::from_column_slice(f.as_flat());
        let y = &self.matrix * x;
        Ok(Field::from_flat(f.grid(), &y))
    }

    pub fn scale(&self, s: T) -> Self {
        KineticOperator {
            matrix: &self.matrix * s,
            role: self.role,
            grid: self.grid.clone(),
        }
    }

    /// Adjoint in the weighted inner product.
    pub fn weighted_adjoint(&self) -> DMatrix<T> {
        WeightedSpace::new(&self.grid).adjoint(&self.matrix)
    }
}

/// Diagonal data of the weighted measure on the flat index.
pub(crate) struct WeightedSpace<T: Real> {
    n: usize,
    nv: usize,
    mu: Vec<T>,
    sqrt_mu: Vec<T>,
}

impl<T: Real> WeightedSpace<T> {
    pub fn new(grid: &SharedGrid<T>) -> Self {
        let nv = grid.nv();
        let n = grid.len();
        let mu: Vec<T> = (0..n).map(|p| grid.mu()[p % nv]).collect();
        let sqrt_mu: Vec<T> = mu.iter().map(|&m| m.sqrt()).collect();
        WeightedSpace { n, nv, mu, sqrt_mu }
    }

    /// `W⁻¹ Xᵀ W`.
    pub fn adjoint(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let mut out = x.transpose();
        for r in 0..self.n {
            for c in 0..self.n {
                out[(r, c)] = out[(r, c)] * self.mu[c] / self.mu[r];
            }
        }
        out
    }

    /// Similarity transform `W^{1/2} X W^{-1/2}`.
    pub fn to_symmetric_frame(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let mut out = x.clone();
        for r in 0..self.n {
            for c in 0..self.n {
                out[(r, c)] = out[(r, c)] * self.sqrt_mu[r] / self.sqrt_mu[c];
            }
        }
        out
    }

    /// Operator norm in the weighted geometry (dense SVD).
    pub fn operator_norm(&self, x: &DMatrix<T>) -> T {
        largest_singular_value(&self.to_symmetric_frame(x))
    }

    /// Transformed projection onto the local equilibrium space: per-`x`
    /// blocks `u uᵀ` with `u_j = √(w_j M_j)`.
    pub fn macro_projector(&self, grid: &SharedGrid<T>) -> DMatrix<T> {
        let nv = self.nv;
        let u: Vec<T> = (0..nv)
            .map(|j| (grid.v_weights()[j] * grid.maxwellian()[j]).sqrt())
            .collect();
        let mut p = DMatrix::zeros(self.n, self.n);
        for i in 0..grid.nx() {
            for j in 0..nv {
                for k in 0..nv {
                    p[(i * nv + j, i * nv + k)] = u[j] * u[k];
                }
            }
        }
        p
    }
}

pub(crate) fn largest_singular_value<T: Real>(m: &DMatrix<T>) -> T {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(T::zero(), |acc, &s| acc.max(s))
}

fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let half = real::<T>(0.5);
    (m + m.transpose()) * half
}

/// Periodic spectral differentiation matrix on `nx` equispaced nodes of a
/// torus of length `lx`. Exactly antisymmetric by construction.
pub fn spectral_dx_matrix<T: Real>(nx: usize, lx: T) -> DMatrix<T> {
    let scale = real::<T>(2.0) * T::pi() / lx;
    let h = real::<T>(2.0) * T::pi() / real_usize::<T>(nx);
    let half = real::<T>(0.5);
    // c[k] = 0.5·(-1)^k·cot(k·h/2), with the antisymmetric pairing enforced
    // bit-exactly and the Nyquist entry pinned to zero.
    let mut c = vec![T::zero(); nx];
    for k in 1..nx / 2 {
        let sign = if k % 2 == 0 { T::one() } else { -T::one() };
        let angle = real_usize::<T>(k) * h * half;
        c[k] = half * sign * (angle.cos() / angle.sin()) * scale;
        c[nx - k] = -c[k];
    }
    c[nx / 2] = T::zero();
    DMatrix::from_fn(nx, nx, |i, j| {
        if i == j {
            T::zero()
        } else {
            c[(i + nx - j) % nx]
        }
    })
}

/// Second-order central-difference matrix on the periodic grid.
pub fn central2_dx_matrix<T: Real>(nx: usize, lx: T) -> DMatrix<T> {
    let dx = lx / real_usize::<T>(nx);
    let coeff = T::one() / (real::<T>(2.0) * dx);
    let mut d = DMatrix::zeros(nx, nx);
    for i in 0..nx {
        d[(i, (i + 1) % nx)] = coeff;
        d[(i, (i + nx - 1) % nx)] = -coeff;
    }
    d
}

/// Free transport `Tf = v·∂x f`.
pub fn build_transport<T: Real>(grid: &SharedGrid<T>, rule: DerivativeRule) -> KineticOperator<T> {
    let d = match rule {
        DerivativeRule::Spectral => spectral_dx_matrix(grid.nx(), grid.lx()),
        DerivativeRule::Central2 => central2_dx_matrix(grid.nx(), grid.lx()),
    };
    let nv = grid.nv();
    let n = grid.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..grid.nx() {
        for ip in 0..grid.nx() {
            let dv = d[(i, ip)];
            if dv != T::zero() {
                for j in 0..nv {
                    m[(i * nv + j, ip * nv + j)] = grid.v_nodes()[j] * dv;
                }
            }
        }
    }
    KineticOperator::from_matrix(m, OperatorRole::Transport, grid)
}

/// Projection `Π` onto the local equilibrium space as a dense operator.
pub fn build_projection<T: Real>(grid: &SharedGrid<T>) -> KineticOperator<T> {
    let nv = grid.nv();
    let mut m = DMatrix::zeros(grid.len(), grid.len());
    for i in 0..grid.nx() {
        for j in 0..nv {
            for k in 0..nv {
                m[(i * nv + j, i * nv + k)] = grid.v_weights()[k] * grid.maxwellian()[j];
            }
        }
    }
    KineticOperator::from_matrix(m, OperatorRole::Projection, grid)
}

/// Relaxation collision `Lf = σ(x)(Πf - f)`; `sigma_values` live on the
/// spatial nodes and must be strictly positive.
pub fn build_bgk<T: Real>(grid: &SharedGrid<T>, sigma_values: &[T]) -> Result<KineticOperator<T>> {
    if sigma_values.len() != grid.nx() {
        return Err(Error::InvalidParameter {
            name: "sigma_values",
            reason: format!("expected {} entries, got {}", grid.nx(), sigma_values.len()),
        });
    }
    if sigma_values.iter().any(|&s| s <= T::zero()) {
        return Err(Error::NonPositiveSigma);
    }
    let nv = grid.nv();
    let mut m = DMatrix::zeros(grid.len(), grid.len());
    for i in 0..grid.nx() {
        let s = sigma_values[i];
        for j in 0..nv {
            for k in 0..nv {
                let mut val = grid.v_weights()[k] * grid.maxwellian()[j];
                if j == k {
                    val -= T::one();
                }
                m[(i * nv + j, i * nv + k)] = s * val;
            }
        }
    }
    Ok(KineticOperator::from_matrix(
        m,
        OperatorRole::Collision,
        grid,
    ))
}

/// Velocity-space matrix of the anisotropic scattering operator
/// `(Lf)(v_j) = Σ_k w_k [k(v_k→v_j) f_k M_j - k(v_j→v_k) f_j M_k]`.
///
/// `kernel[(j, k)] = k(v_j → v_k)` must be strictly positive and symmetric
/// (detailed balance), which makes constants-in-`v` times `M` the null
/// space and the operator self-adjoint in the weighted product.
pub fn anisotropic_velocity_matrix<T: Real>(
    grid: &SharedGrid<T>,
    kernel: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    let nv = grid.nv();
    if kernel.nrows() != nv || kernel.ncols() != nv {
        return Err(Error::InvalidParameter {
            name: "kernel",
            reason: format!("expected {nv}x{nv} kernel"),
        });
    }
    if kernel.iter().any(|&k| k <= T::zero()) {
        return Err(Error::NonPositiveKernel);
    }
    let tol = real::<T>(1e-12);
    for j in 0..nv {
        for k in j + 1..nv {
            if (kernel[(j, k)] - kernel[(k, j)]).abs() > tol * (T::one() + kernel[(j, k)].abs()) {
                return Err(Error::InvalidParameter {
                    name: "kernel",
                    reason: "kernel must be symmetric (detailed balance)".into(),
                });
            }
        }
    }
    Ok(scattering_velocity_matrix(grid, kernel))
}

/// Gain/loss velocity matrix of a scattering kernel without the sign and
/// symmetry validation. Also used for kernel z-derivatives, which need not
/// be positive.
pub(crate) fn scattering_velocity_matrix<T: Real>(
    grid: &SharedGrid<T>,
    kernel: &DMatrix<T>,
) -> DMatrix<T> {
    let nv = grid.nv();
    let w = grid.v_weights();
    let mw = grid.maxwellian();
    let mut lv = DMatrix::zeros(nv, nv);
    for j in 0..nv {
        let mut loss = T::zero();
        for m in 0..nv {
            loss += w[m] * kernel[(j, m)] * mw[m];
        }
        for k in 0..nv {
            let mut val = w[k] * kernel[(k, j)] * mw[j];
            if j == k {
                val -= loss;
            }
            lv[(j, k)] = val;
        }
    }
    lv
}

/// Anisotropic scattering as a dense phase-space operator (same velocity
/// block at every spatial node).
pub fn build_anisotropic<T: Real>(
    grid: &SharedGrid<T>,
    kernel: &DMatrix<T>,
) -> Result<KineticOperator<T>> {
    let lv = anisotropic_velocity_matrix(grid, kernel)?;
    let nv = grid.nv();
    let mut m = DMatrix::zeros(grid.len(), grid.len());
    for i in 0..grid.nx() {
        for j in 0..nv {
            for k in 0..nv {
                m[(i * nv + j, i * nv + k)] = lv[(j, k)];
            }
        }
    }
    Ok(KineticOperator::from_matrix(
        m,
        OperatorRole::Collision,
        grid,
    ))
}

/// Auxiliary operator `A = (I + (TΠ)†(TΠ))⁻¹ (TΠ)†` of the modified
/// entropy. The solve is dense; `I` plus a positive-semidefinite matrix is
/// always invertible.
pub fn build_auxiliary_a<T: Real>(
    transport: &KineticOperator<T>,
    grid: &SharedGrid<T>,
) -> KineticOperator<T> {
    let ws = WeightedSpace::new(grid);
    let pi = build_projection(grid);
    let k = transport.matrix() * pi.matrix();
    let k_adj = ws.adjoint(&k);
    let lhs = DMatrix::identity(grid.len(), grid.len()) + &k_adj * &k;
    let a = lhs
        .lu()
        .solve(&k_adj)
        .expect("I + (TΠ)†(TΠ) is positive definite");
    KineticOperator::from_matrix(a, OperatorRole::Auxiliary, grid)
}

/// Microscopic coercivity constant: smallest eigenvalue of `-L` restricted
/// to `range(I-Π)`, via a dense symmetric eigensolve in the weighted frame.
pub fn estimate_alpha<T: Real>(collision: &KineticOperator<T>) -> Result<T> {
    let grid = collision.grid();
    let ws = WeightedSpace::new(grid);
    let l_sym = symmetrize(&ws.to_symmetric_frame(collision.matrix()));
    let p_macro = ws.macro_projector(grid);
    let q = DMatrix::identity(grid.len(), grid.len()) - &p_macro;
    // Deflate the macro subspace far above any collision eigenvalue, then
    // read the smallest eigenvalue of the remaining micro block.
    let shift = T::one() + l_sym.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
    let m = symmetrize(&(&q * (-&l_sym) * &q + &p_macro * shift));
    let eig = SymmetricEigen::new(m);
    let alpha = eig
        .eigenvalues
        .iter()
        .fold(T::max_value().unwrap(), |acc, &v| acc.min(v));
    if alpha <= real::<T>(1e-12) {
        return Err(Error::NoSpectralGap);
    }
    Ok(alpha)
}

/// Macroscopic coercivity constant: smallest eigenvalue of `(TΠ)†(TΠ)` on
/// the mass-zero part of `range(Π)`.
///
/// The odd-even spatial mode `(-1)^i` is excluded along with the constant:
/// every periodic derivative rule on an even grid annihilates it, so
/// `(-1)^i·M(v)` is a spurious steady state of the discretization rather
/// than a resolved macroscopic mode. None of the named initial generators
/// excite it, and the dynamics leave its orthogonal complement invariant.
pub fn estimate_beta<T: Real>(transport: &KineticOperator<T>) -> Result<T> {
    let grid = transport.grid();
    let ws = WeightedSpace::new(grid);
    let t_sym = ws.to_symmetric_frame(transport.matrix());
    let nx = grid.nx();
    let nv = grid.nv();

    // Orthonormal basis of the transformed resolved macro space: columns
    // (q ⊗ u) with u_j = √(w_j M_j) and q running over the real Fourier
    // modes k = 1, ..., nx/2 - 1 (zero-sum, Nyquist-free).
    let u: Vec<T> = (0..nv)
        .map(|j| (grid.v_weights()[j] * grid.maxwellian()[j]).sqrt())
        .collect();
    let n_modes = nx - 2;
    let amp = (real::<T>(2.0) / real_usize::<T>(nx)).sqrt();
    let tau = real::<T>(2.0) * T::pi();
    let mut basis = DMatrix::zeros(grid.len(), n_modes);
    for k in 1..nx / 2 {
        for ix in 0..nx {
            let angle = tau * real_usize::<T>(k) * real_usize::<T>(ix) / real_usize::<T>(nx);
            let qc = amp * angle.cos();
            let qs = amp * angle.sin();
            for j in 0..nv {
                basis[(ix * nv + j, 2 * (k - 1))] = qc * u[j];
                basis[(ix * nv + j, 2 * (k - 1) + 1)] = qs * u[j];
            }
        }
    }
    let y = &t_sym * &basis;
    let b = symmetrize(&(y.transpose() * &y));
    let eig = SymmetricEigen::new(b);
    let beta = eig
        .eigenvalues
        .iter()
        .fold(T::max_value().unwrap(), |acc, &v| acc.min(v));
    if beta <= real::<T>(1e-12) {
        return Err(Error::MacroscopicCoercivityFails);
    }
    Ok(beta)
}

/// Boundedness constant of the auxiliary operator: the norm of
/// `f ↦ (AT(I-Π)f, ALf)` as a map from `range(I-Π)` into the product
/// space, computed with a dense SVD of the stacked transformed blocks.
pub fn estimate_gamma<T: Real>(
    auxiliary: &KineticOperator<T>,
    transport: &KineticOperator<T>,
    collision: &KineticOperator<T>,
) -> T {
    let grid = transport.grid();
    let ws = WeightedSpace::new(grid);
    let n = grid.len();
    let a_sym = ws.to_symmetric_frame(auxiliary.matrix());
    let t_sym = ws.to_symmetric_frame(transport.matrix());
    let l_sym = ws.to_symmetric_frame(collision.matrix());
    let q = DMatrix::identity(n, n) - ws.macro_projector(grid);
    let top = &a_sym * &t_sym * &q;
    let bottom = &a_sym * &l_sym * &q;
    let mut stacked = DMatrix::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(&top);
    stacked.view_mut((n, 0), (n, n)).copy_from(&bottom);
    largest_singular_value(&stacked)
}

const PI_T_PI_TOL: f64 = 1e-11;
const SKEW_TOL: f64 = 1e-10;
const SYM_TOL: f64 = 1e-10;

/// Residuals and booleans of the four structural assumptions.
#[derive(Debug, Clone)]
pub struct AssumptionReport<T: Real> {
    pub pi_t_pi_norm: T,
    pub transport_skew_residual: T,
    pub collision_symmetry_residual: T,
    pub alpha: Option<T>,
    pub beta: Option<T>,
    pub gamma: T,
    pub orthogonality_ok: bool,
    pub transport_skew_ok: bool,
    pub collision_symmetric_ok: bool,
    pub constants_positive: bool,
}

impl<T: Real> AssumptionReport<T> {
    pub fn all_ok(&self) -> bool {
        self.orthogonality_ok
            && self.transport_skew_ok
            && self.collision_symmetric_ok
            && self.constants_positive
    }

    /// Names of the failed checks, empty when everything passed.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.orthogonality_ok {
            out.push("PiTPi != 0");
        }
        if !self.transport_skew_ok {
            out.push("transport not skew-adjoint");
        }
        if !self.collision_symmetric_ok {
            out.push("collision not self-adjoint");
        }
        if !self.constants_positive {
            out.push("coercivity constants not positive");
        }
        out
    }
}

/// Measure the structural residuals and the three coercivity constants.
pub fn check_assumptions<T: Real>(
    transport: &KineticOperator<T>,
    collision: &KineticOperator<T>,
    projection: &KineticOperator<T>,
) -> AssumptionReport<T> {
    let grid = transport.grid();
    let ws = WeightedSpace::new(grid);

    let t_adj = ws.adjoint(transport.matrix());
    let skew_res = ws.operator_norm(&(transport.matrix() + &t_adj));
    let l_adj = ws.adjoint(collision.matrix());
    let sym_res = ws.operator_norm(&(collision.matrix() - &l_adj));
    let ptp = projection.matrix() * transport.matrix() * projection.matrix();
    let ptp_norm = ws.operator_norm(&ptp);

    let alpha = estimate_alpha(collision).ok();
    let beta = estimate_beta(transport).ok();
    let aux = build_auxiliary_a(transport, grid);
    let gamma = estimate_gamma(&aux, transport, collision);

    AssumptionReport {
        pi_t_pi_norm: ptp_norm,
        transport_skew_residual: skew_res,
        collision_symmetry_residual: sym_res,
        alpha,
        beta,
        gamma,
        orthogonality_ok: ptp_norm <= real::<T>(PI_T_PI_TOL),
        transport_skew_ok: skew_res <= real::<T>(SKEW_TOL),
        collision_symmetric_ok: sym_res <= real::<T>(SYM_TOL),
        constants_positive: alpha.map_or(false, |a| a > T::zero())
            && beta.map_or(false, |b| b > T::zero())
            && gamma > T::zero(),
    }
}

/// Measured `alpha`, `beta`, `gamma` with the derived triple
/// `a = alpha`, `d = (1+gamma)/2`, `c = beta/(1+beta)`.
#[derive(Debug, Clone, Copy)]
pub struct CoercivityConstants<T: Real> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub a: T,
    pub c: T,
    pub d: T,
}

impl<T: Real> CoercivityConstants<T> {
    pub fn new(alpha: T, beta: T, gamma: T) -> Result<Self> {
        if alpha <= T::zero() || beta <= T::zero() || gamma <= T::zero() {
            return Err(Error::InvalidParameter {
                name: "coercivity constants",
                reason: "alpha, beta, gamma must be strictly positive".into(),
            });
        }
        let half = real::<T>(0.5);
        Ok(CoercivityConstants {
            alpha,
            beta,
            gamma,
            a: alpha,
            c: beta / (T::one() + beta),
            d: half * (T::one() + gamma),
        })
    }

    /// Measure all three constants from assembled operators.
    pub fn measure(
        transport: &KineticOperator<T>,
        collision: &KineticOperator<T>,
    ) -> Result<Self> {
        let alpha = estimate_alpha(collision)?;
        let beta = estimate_beta(transport)?;
        let aux = build_auxiliary_a(transport, transport.grid());
        let gamma = estimate_gamma(&aux, transport, collision);
        CoercivityConstants::new(alpha, beta, gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{build_grid, build_grid_with_shift, Field, VelocityRule};
    use approx::assert_relative_eq;

    const TAU: f64 = 2.0 * std::f64::consts::PI;

    fn grid(nx: usize, nv: usize) -> SharedGrid<f64> {
        build_grid(nx, TAU, nv, VelocityRule::GaussHermite).unwrap()
    }

    #[test]
    fn transport_annihilates_constants_in_x() {
        for rule in [DerivativeRule::Spectral, DerivativeRule::Central2] {
            let g = grid(8, 8);
            let t = build_transport(&g, rule);
            let f = Field::from_fn(&g, |_, v| (v * 0.3).cos());
            let tf = t.apply(&f).unwrap();
            assert!(tf.norm() <= 1e-13 * f.norm());
        }
    }

    #[test]
    fn spectral_transport_differentiates_resolved_modes_exactly() {
        let g = grid(16, 8);
        let t = build_transport(&g, DerivativeRule::Spectral);
        let f = Field::from_fn(&g, |x, _| x.sin());
        let mut f = f;
        for i in 0..g.nx() {
            for j in 0..g.nv() {
                *f.value_mut(i, j) = g.x_nodes()[i].sin() * g.maxwellian()[j];
            }
        }
        let tf = t.apply(&f).unwrap();
        for i in 0..g.nx() {
            for j in 0..g.nv() {
                let expected = g.v_nodes()[j] * g.x_nodes()[i].cos() * g.maxwellian()[j];
                assert!(
                    (tf.value(i, j) - expected).abs() <= 1e-12,
                    "entry ({i},{j}): {} vs {expected}",
                    tf.value(i, j)
                );
            }
        }
    }

    #[test]
    fn transport_quadratic_form_vanishes() {
        let g = grid(8, 8);
        for rule in [DerivativeRule::Spectral, DerivativeRule::Central2] {
            let t = build_transport(&g, rule);
            for seed in 0..100 {
                let f = Field::random_seeded(&g, seed);
                let tf = t.apply(&f).unwrap();
                let q = tf.inner_product(&f).unwrap();
                assert!(q.abs() <= 1e-11 * (1.0 + tf.norm() * f.norm()), "q = {q}");
            }
        }
    }

    #[test]
    fn bgk_null_space_and_orthogonal_action() {
        let g = grid(8, 8);
        let l = build_bgk(&g, &vec![1.0; 8]).unwrap();

        let mut rho_m = Field::zeros(&g);
        for i in 0..g.nx() {
            for j in 0..g.nv() {
                *rho_m.value_mut(i, j) = (1.0 + g.x_nodes()[i].sin()) * g.maxwellian()[j];
            }
        }
        assert!(l.apply(&rho_m).unwrap().norm() <= 1e-12 * rho_m.norm());

        // f orthogonal to the null space: zero velocity average at every x.
        let mut f = Field::zeros(&g);
        for i in 0..g.nx() {
            for j in 0..g.nv() {
                *f.value_mut(i, j) =
                    (1.0 + 0.5 * g.x_nodes()[i].cos()) * g.v_nodes()[j] * g.maxwellian()[j];
            }
        }
        let lf = l.apply(&f).unwrap();
        assert!((&lf + &f).norm() <= 1e-12 * f.norm());
    }

    #[test]
    fn bgk_is_weighted_symmetric_and_dissipative() {
        let g = grid(8, 8);
        let sigma: Vec<f64> = (0..8).map(|i| 1.0 + 0.5 * (i as f64 * 0.7).sin()).collect();
        let l = build_bgk(&g, &sigma).unwrap();
        for seed in 0..100 {
            let f = Field::random_seeded(&g, seed);
            let h = Field::random_seeded(&g, seed + 500);
            let lf_h = l.apply(&f).unwrap().inner_product(&h).unwrap();
            let f_lh = f.inner_product(&l.apply(&h).unwrap()).unwrap();
            assert!((lf_h - f_lh).abs() <= 1e-12 * (1.0 + lf_h.abs()));
            let diss = l.apply(&f).unwrap().inner_product(&f).unwrap();
            assert!(diss <= 1e-12);
        }
    }

    #[test]
    fn bgk_rejects_non_positive_sigma() {
        let g = grid(4, 4);
        assert!(matches!(
            build_bgk(&g, &[1.0, 0.0, 1.0, 1.0]),
            Err(Error::NonPositiveSigma)
        ));
    }

    #[test]
    fn anisotropic_unit_kernel_equals_bgk() {
        let g = grid(4, 8);
        let kernel = DMatrix::from_element(8, 8, 1.0);
        let aniso = build_anisotropic(&g, &kernel).unwrap();
        let bgk = build_bgk(&g, &vec![1.0; 4]).unwrap();
        let diff = aniso.matrix() - bgk.matrix();
        let max = diff.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        assert!(max <= 1e-13, "max entry diff {max}");
    }

    #[test]
    fn anisotropic_detailed_balance_and_mass_row() {
        let g = grid(4, 8);
        let kernel = DMatrix::from_fn(8, 8, |j, k| {
            1.0 + 0.5 * (-0.5 * (g.v_nodes()[j] - g.v_nodes()[k]).powi(2)).exp()
        });
        let l = build_anisotropic(&g, &kernel).unwrap();

        let mut rho_m = Field::zeros(&g);
        for i in 0..g.nx() {
            for j in 0..g.nv() {
                *rho_m.value_mut(i, j) = (2.0 + g.x_nodes()[i].cos()) * g.maxwellian()[j];
            }
        }
        assert!(l.apply(&rho_m).unwrap().norm() <= 1e-12 * rho_m.norm());

        for seed in 0..20 {
            let f = Field::random_seeded(&g, seed);
            let lf = l.apply(&f).unwrap();
            for i in 0..g.nx() {
                let mut s = 0.0;
                for j in 0..g.nv() {
                    s += g.v_weights()[j] * lf.value(i, j);
                }
                assert!(s.abs() <= 1e-12, "velocity integral {s}");
            }
            let diss = lf.inner_product(&f).unwrap();
            assert!(diss <= 1e-12);
        }
    }

    #[test]
    fn anisotropic_rejects_bad_kernels() {
        let g = grid(4, 4);
        let neg = DMatrix::from_element(4, 4, -1.0);
        assert!(matches!(
            build_anisotropic(&g, &neg),
            Err(Error::NonPositiveKernel)
        ));
        let mut asym = DMatrix::from_element(4, 4, 1.0);
        asym[(0, 1)] = 2.0;
        assert!(build_anisotropic(&g, &asym).is_err());
    }

    #[test]
    fn auxiliary_operator_inequalities() {
        let g = grid(8, 8);
        let t = build_transport(&g, DerivativeRule::Spectral);
        let a = build_auxiliary_a(&t, &g);

        // Constant-in-x macro state: TΠf = 0, so Af = 0.
        let mut cm = Field::zeros(&g);
        for i in 0..g.nx() {
            for j in 0..g.nv() {
                *cm.value_mut(i, j) = g.maxwellian()[j];
            }
        }
        assert!(a.apply(&cm).unwrap().norm() <= 1e-12);

        for seed in 0..100 {
            let f = Field::random_seeded(&g, seed);
            let micro = &f - &f.project_pi();
            let af = a.apply(&f).unwrap();
            assert!(af.norm() <= 0.5 * micro.norm() + 1e-12);
            let taf = t.apply(&af).unwrap();
            assert!(taf.norm() <= micro.norm() + 1e-12);
        }
    }

    #[test]
    fn alpha_matches_sigma_minimum() {
        let g = grid(8, 8);
        let l_unit = build_bgk(&g, &vec![1.0; 8]).unwrap();
        assert_relative_eq!(estimate_alpha(&l_unit).unwrap(), 1.0, epsilon = 1e-10);

        let sigma: Vec<f64> = (0..8).map(|i| 1.0 + 0.5 * (i as f64 * 0.9).sin()).collect();
        let sigma_min = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
        let l = build_bgk(&g, &sigma).unwrap();
        assert_relative_eq!(estimate_alpha(&l).unwrap(), sigma_min, epsilon = 1e-8);

        let zero = KineticOperator::from_matrix(
            DMatrix::zeros(g.len(), g.len()),
            OperatorRole::Collision,
            &g,
        );
        assert!(matches!(estimate_alpha(&zero), Err(Error::NoSpectralGap)));
    }

    #[test]
    fn beta_matches_fourier_oracle() {
        let g = grid(16, 8);
        let t = build_transport(&g, DerivativeRule::Spectral);
        let beta = estimate_beta(&t).unwrap();
        let oracle = (TAU / g.lx()).powi(2) * g.moment(2);
        assert!(
            (beta - oracle).abs() <= 0.02 * oracle,
            "beta {beta} vs oracle {oracle}"
        );

        let g2 = build_grid(16, 2.0 * TAU, 8, VelocityRule::GaussHermite).unwrap();
        let t2 = build_transport(&g2, DerivativeRule::Spectral);
        let beta2 = estimate_beta(&t2).unwrap();
        assert!(
            (beta2 - beta / 4.0).abs() <= 0.02 * (beta / 4.0),
            "beta halving: {beta2} vs {}",
            beta / 4.0
        );
        assert!(beta > 0.0 && beta2 > 0.0);
    }

    #[test]
    fn gamma_svd_and_power_iteration_agree() {
        let g = grid(16, 8);
        let t = build_transport(&g, DerivativeRule::Spectral);
        let l = build_bgk(&g, &vec![1.0; 16]).unwrap();
        let a = build_auxiliary_a(&t, &g);
        let gamma = estimate_gamma(&a, &t, &l);

        // Power-iteration cross-check on the stacked normal matrix.
        let ws = WeightedSpace::new(&g);
        let n = g.len();
        let a_s = ws.to_symmetric_frame(a.matrix());
        let t_s = ws.to_symmetric_frame(t.matrix());
        let l_s = ws.to_symmetric_frame(l.matrix());
        let q = DMatrix::identity(n, n) - ws.macro_projector(&g);
        let top = &a_s * &t_s * &q;
        let bottom = &a_s * &l_s * &q;
        let normal = top.transpose() * &top + bottom.transpose() * &bottom;
        let mut x = DVector::from_element(n, 1.0);
        let mut lam = 0.0;
        for _ in 0..500 {
            let y = &normal * &x;
            lam = y.norm();
            x = y / lam;
        }
        let gamma_pi = lam.sqrt();
        assert!(
            (gamma - gamma_pi).abs() <= 1e-8 * gamma,
            "svd {gamma} vs power iteration {gamma_pi}"
        );

        // With L = 0 only the transport block contributes.
        let zero =
            KineticOperator::from_matrix(DMatrix::zeros(n, n), OperatorRole::Collision, &g);
        let gamma_t_only = estimate_gamma(&a, &t, &zero);
        let top_only = largest_singular_value(&top);
        assert_relative_eq!(gamma_t_only, top_only, epsilon = 1e-10);

        // Replacing L by 2L at most doubles the bound.
        let l2 = l.scale(2.0);
        let gamma2 = estimate_gamma(&a, &t, &l2);
        assert!(gamma2 <= 2.0 * gamma + 1e-12 && gamma2 >= gamma - 1e-12);
    }

    #[test]
    fn micro_and_macro_coercivity_hold_with_measured_constants() {
        let g = grid(8, 8);
        let t = build_transport(&g, DerivativeRule::Spectral);
        let sigma: Vec<f64> = (0..8).map(|i| 1.0 + 0.4 * (i as f64 * 1.1).cos()).collect();
        let l = build_bgk(&g, &sigma).unwrap();
        let alpha = estimate_alpha(&l).unwrap();
        let beta = estimate_beta(&t).unwrap();

        for seed in 0..100 {
            let f = Field::random_seeded(&g, seed);
            let micro = &f - &f.project_pi();
            let diss = -l.apply(&f).unwrap().inner_product(&f).unwrap();
            assert!(
                diss >= (alpha - 1e-9) * micro.norm().powi(2) - 1e-12,
                "microscopic coercivity violated at seed {seed}"
            );

            let macro_zero_mass = f.project_pi().fluctuation().deflate_odd_even_mode();
            let t_pi = t.apply(&macro_zero_mass).unwrap();
            assert!(
                t_pi.norm().powi(2)
                    >= (beta - 1e-9) * macro_zero_mass.norm().powi(2) - 1e-12,
                "macroscopic coercivity violated at seed {seed}"
            );
        }
    }

    #[test]
    fn assumption_report_flags_broken_grids() {
        let g = grid(8, 8);
        let t = build_transport(&g, DerivativeRule::Spectral);
        let l = build_bgk(&g, &vec![1.0; 8]).unwrap();
        let pi = build_projection(&g);
        let report = check_assumptions(&t, &l, &pi);
        assert!(report.all_ok(), "failures: {:?}", report.failures());
        assert!(report.pi_t_pi_norm <= 1e-11);
        assert!(report.transport_skew_residual <= 1e-10);
        assert!(report.collision_symmetry_residual <= 1e-10);

        let bad = build_grid_with_shift(8, TAU, 8, VelocityRule::GaussHermite, 0.3).unwrap();
        let tb = build_transport(&bad, DerivativeRule::Spectral);
        let lb = build_bgk(&bad, &vec![1.0; 8]).unwrap();
        let pib = build_projection(&bad);
        let rb = check_assumptions(&tb, &lb, &pib);
        assert!(!rb.orthogonality_ok);
        assert!(rb.failures().contains(&"PiTPi != 0"));
    }

    #[test]
    fn derived_constants() {
        let c = CoercivityConstants::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(c.a, 1.0);
        assert_eq!(c.d, 1.0);
        assert_eq!(c.c, 0.5);
        assert!(CoercivityConstants::new(0.0, 1.0, 1.0).is_err());
    }
}
