//! Phase-space discretization: a periodic torus in `x` crossed with a
//! symmetric quadrature grid in `v`, the global equilibrium `F`, and the
//! weighted `L²(dx dv / F)` geometry every other module works in.
//!
//! The velocity grid folds a Gauss–Hermite rule with the Maxwellian so that
//! the discrete moments of order 0–2 are exact; this is what makes the
//! orthogonality identity `Π T Π = 0` hold to machine precision on the
//! assembled operators.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{real, real_usize, Real};

/// Shared, immutable grid handle.
pub type SharedGrid<T> = Arc<PhaseGrid<T>>;

/// Velocity quadrature family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityRule {
    /// Gauss–Hermite abscissae for the weight `e^{-v²/2}` (moments exact).
    GaussHermite,
    /// Equispaced symmetric midpoint rule on `[-8, 8]`.
    UniformSymmetric,
}

/// Discretization of `(x, v)` together with the Maxwellian values.
#[derive(Debug, Clone)]
pub struct PhaseGrid<T: Real> {
    nx: usize,
    lx: T,
    dx: T,
    x_nodes: Vec<T>,
    nv: usize,
    v_nodes: Vec<T>,
    v_weights: Vec<T>,
    maxwellian: Vec<T>,
    /// Weighted-measure diagonal `dx·lx·w_j/M_j` (independent of `x`).
    mu: Vec<T>,
    rule: VelocityRule,
}

/// Build a grid. `nx`, `nv` must be even and at least 4, `lx` positive.
pub fn build_grid<T: Real>(
    nx: usize,
    lx: T,
    nv: usize,
    rule: VelocityRule,
) -> Result<SharedGrid<T>> {
    build_grid_with_shift(nx, lx, nv, rule, T::zero())
}

/// Diagnostic variant of [`build_grid`]: shifts every velocity node by
/// `v_shift`, deliberately breaking the symmetry invariants. Useful to
/// demonstrate how the assumption checks flag a bad discretization.
pub fn build_grid_with_shift<T: Real>(
    nx: usize,
    lx: T,
    nv: usize,
    rule: VelocityRule,
    v_shift: T,
) -> Result<SharedGrid<T>> {
    if nv < 4 || nv % 2 != 0 {
        return Err(Error::InvalidGrid(format!(
            "nv must be even and >= 4, got {nv}"
        )));
    }
    if nx < 4 || nx % 2 != 0 {
        return Err(Error::InvalidGrid(format!(
            "nx must be even and >= 4, got {nx}"
        )));
    }
    if lx <= T::zero() {
        return Err(Error::InvalidGrid("lx must be positive".into()));
    }

    let (mut v_nodes, v_weights) = match rule {
        VelocityRule::GaussHermite => gauss_hermite(nv),
        VelocityRule::UniformSymmetric => uniform_symmetric(nv),
    };

    // Maxwellian at the nodes, normalized so Σ w_j M_j = 1 exactly. With a
    // diagnostic shift the Maxwellian stays pinned to the unshifted nodes,
    // so the odd moments genuinely break.
    let half = real::<T>(0.5);
    let norm = (real::<T>(2.0) * T::pi()).sqrt();
    let mut maxwellian: Vec<T> = v_nodes
        .iter()
        .map(|&v| (-half * v * v).exp() / norm)
        .collect();
    if v_shift != T::zero() {
        for v in v_nodes.iter_mut() {
            *v += v_shift;
        }
    }
    let total: T = v_weights
        .iter()
        .zip(&maxwellian)
        .fold(T::zero(), |acc, (&w, &m)| acc + w * m);
    for m in maxwellian.iter_mut() {
        *m /= total;
    }

    let dx = lx / real_usize::<T>(nx);
    let x_nodes: Vec<T> = (0..nx).map(|i| dx * real_usize::<T>(i)).collect();
    let mu: Vec<T> = v_weights
        .iter()
        .zip(&maxwellian)
        .map(|(&w, &m)| dx * lx * w / m)
        .collect();

    Ok(Arc::new(PhaseGrid {
        nx,
        lx,
        dx,
        x_nodes,
        nv,
        v_nodes,
        v_weights,
        maxwellian,
        mu,
        rule,
    }))
}

impl<T: Real> PhaseGrid<T> {
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nv(&self) -> usize {
        self.nv
    }
    /// Total number of phase-space nodes `nx·nv`.
    pub fn len(&self) -> usize {
        self.nx * self.nv
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn lx(&self) -> T {
        self.lx
    }
    pub fn dx(&self) -> T {
        self.dx
    }
    pub fn x_nodes(&self) -> &[T] {
        &self.x_nodes
    }
    pub fn v_nodes(&self) -> &[T] {
        &self.v_nodes
    }
    pub fn v_weights(&self) -> &[T] {
        &self.v_weights
    }
    pub fn maxwellian(&self) -> &[T] {
        &self.maxwellian
    }
    pub fn rule(&self) -> VelocityRule {
        self.rule
    }

    /// Weighted-measure diagonal entry for velocity index `j`:
    /// `dx·w_j/F = dx·lx·w_j/M_j`.
    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    /// Largest velocity magnitude (enters the CFL bound).
    pub fn max_abs_v(&self) -> T {
        self.v_nodes
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// Discrete velocity moment `Σ_j w_j v_j^k M_j`.
    pub fn moment(&self, k: u32) -> T {
        let mut s = T::zero();
        for j in 0..self.nv {
            s += self.v_weights[j] * self.v_nodes[j].powi(k as i32) * self.maxwellian[j];
        }
        s
    }

    /// Flattened index with `x` outer and `v` inner.
    #[inline]
    pub fn index(&self, ix: usize, jv: usize) -> usize {
        ix * self.nv + jv
    }

    /// Two grids are compatible when they discretize the same phase space.
    pub fn compatible(&self, other: &Self) -> bool {
        self.nx == other.nx && self.nv == other.nv && self.lx == other.lx && self.rule == other.rule
    }
}

/// Gauss–Hermite rule via the Golub–Welsch eigensolve, symmetrized so
/// paired nodes negate bit-exactly. The native weights integrate against
/// `e^{-v²/2}`; they are converted to plain quadrature weights
/// `w_j = ŵ_j·e^{v_j²/2}` so that `Σ w_j φ(v_j) ≈ ∫ φ dv` for integrands
/// concentrated like the Maxwellian.
fn gauss_hermite<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut jac = DMatrix::<T>::zeros(n, n);
    for k in 1..n {
        let b = real_usize::<T>(k).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mu0 = (real::<T>(2.0) * T::pi()).sqrt();
    let mut pairs: Vec<(T, T)> = (0..n)
        .map(|k| {
            let q0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], mu0 * q0 * q0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));

    let half = real::<T>(0.5);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    for k in 0..n / 2 {
        let m = n - 1 - k;
        let v = half * (pairs[k].0 - pairs[m].0);
        let w = half * (pairs[k].1 + pairs[m].1) * (half * v * v).exp();
        nodes[k] = v;
        nodes[m] = -v;
        weights[k] = w;
        weights[m] = w;
    }
    (nodes, weights)
}

fn uniform_symmetric<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let vmax = real::<T>(8.0);
    let dv = real::<T>(2.0) * vmax / real_usize::<T>(n);
    let half = real::<T>(0.5);
    let mut nodes = vec![T::zero(); n];
    for k in 0..n / 2 {
        let v = -vmax + dv * (real_usize::<T>(k) + half);
        nodes[k] = v;
        nodes[n - 1 - k] = -v;
    }
    (nodes, vec![dv; n])
}

/// Real values `f(x_i, v_j)` on a [`PhaseGrid`].
///
/// Stored as an `nv × nx` column-major matrix, which puts `x` outermost in
/// memory; velocity profiles at a fixed `x` are contiguous.
#[derive(Debug, Clone)]
pub struct Field<T: Real> {
    values: DMatrix<T>,
    grid: SharedGrid<T>,
}

impl<T: Real> Field<T> {
    pub fn zeros(grid: &SharedGrid<T>) -> Self {
        Field {
            values: DMatrix::zeros(grid.nv(), grid.nx()),
            grid: Arc::clone(grid),
        }
    }

    /// Build from a function of the node coordinates `(x, v)`.
    pub fn from_fn(grid: &SharedGrid<T>, mut f: impl FnMut(T, T) -> T) -> Self {
        let values = DMatrix::from_fn(grid.nv(), grid.nx(), |j, i| {
            f(grid.x_nodes()[i], grid.v_nodes()[j])
        });
        Field {
            values,
            grid: Arc::clone(grid),
        }
    }

    /// Deterministic pseudo-random field with entries uniform in `[-1, 1]`.
    pub fn random_seeded(grid: &SharedGrid<T>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = DMatrix::from_fn(grid.nv(), grid.nx(), |_, _| {
            real::<T>(rng.random_range(-1.0..1.0))
        });
        Field {
            values,
            grid: Arc::clone(grid),
        }
    }

    pub fn from_matrix(grid: &SharedGrid<T>, values: DMatrix<T>) -> Self {
        assert_eq!(values.nrows(), grid.nv());
        assert_eq!(values.ncols(), grid.nx());
        Field {
            values,
            grid: Arc::clone(grid),
        }
    }

    /// Rebuild from the flat coefficient vector used by dense operators
    /// (`x` outer, `v` inner).
    pub fn from_flat(grid: &SharedGrid<T>, flat: &DVector<T>) -> Self {
        assert_eq!(flat.len(), grid.len());
        let values = DMatrix::from_column_slice(grid.nv(), grid.nx(), flat.as_slice());
        Field {
            values,
            grid: Arc::clone(grid),
        }
    }

    pub fn grid(&self) -> &SharedGrid<T> {
        &self.grid
    }

    /// Value at `(x_i, v_j)`.
    #[inline]
    pub fn value(&self, ix: usize, jv: usize) -> T {
        self.values[(jv, ix)]
    }

    #[inline]
    pub fn value_mut(&mut self, ix: usize, jv: usize) -> &mut T {
        &mut self.values[(jv, ix)]
    }

    /// Raw `nv × nx` matrix (x-major memory layout).
    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DMatrix<T> {
        &mut self.values
    }

    /// Flat coefficient slice, `x` outer and `v` inner.
    pub fn as_flat(&self) -> &[T] {
        self.values.as_slice()
    }

    /// Weighted inner product `⟨f, g⟩ = Σ dx·w_j·f·g/F`.
    pub fn inner_product(&self, other: &Field<T>) -> Result<T> {
        if !self.grid.compatible(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let mu = self.grid.mu();
        let mut s = T::zero();
        for i in 0..self.grid.nx() {
            for j in 0..self.grid.nv() {
                // mu·(f·g) keeps the form bit-exactly symmetric in (f, g).
                s += mu[j] * (self.values[(j, i)] * other.values[(j, i)]);
            }
        }
        Ok(s)
    }

    /// Weighted norm `‖f‖ = √⟨f, f⟩`.
    pub fn norm(&self) -> T {
        self.inner_product(self).expect("same grid").sqrt()
    }

    /// Projection onto the local equilibrium space:
    /// `(Πf)(x, v) = (Σ_k w_k f(x, v_k))·M(v)`.
    pub fn project_pi(&self) -> Field<T> {
        let grid = &self.grid;
        let mut out = DMatrix::zeros(grid.nv(), grid.nx());
        for i in 0..grid.nx() {
            let mut rho = T::zero();
            for k in 0..grid.nv() {
                rho += grid.v_weights()[k] * self.values[(k, i)];
            }
            for j in 0..grid.nv() {
                out[(j, i)] = rho * grid.maxwellian()[j];
            }
        }
        Field {
            values: out,
            grid: Arc::clone(grid),
        }
    }

    /// Plain (unweighted) mass `∬ f dv dx`.
    pub fn mass(&self) -> T {
        let grid = &self.grid;
        let mut s = T::zero();
        for i in 0..grid.nx() {
            for j in 0..grid.nv() {
                s += grid.v_weights()[j] * self.values[(j, i)];
            }
        }
        s * grid.dx()
    }

    /// Fluctuation around the global equilibrium: `f - mass(f)·F`.
    pub fn fluctuation(&self) -> Field<T> {
        let m = self.mass();
        let grid = &self.grid;
        let mut out = self.values.clone();
        for i in 0..grid.nx() {
            for j in 0..grid.nv() {
                out[(j, i)] -= m * grid.maxwellian()[j] / grid.lx();
            }
        }
        Field {
            values: out,
            grid: Arc::clone(grid),
        }
    }

    /// Remove the component along the odd-even macroscopic mode
    /// `(-1)^i·M(v)`, the spurious steady state of periodic derivative
    /// rules on even grids. Resolved macroscopic coercivity statements
    /// apply on the complement of this mode.
    pub fn deflate_odd_even_mode(&self) -> Field<T> {
        let grid = &self.grid;
        let psi = Field::from_matrix(
            grid,
            DMatrix::from_fn(grid.nv(), grid.nx(), |j, i| {
                let sign = if i % 2 == 0 { T::one() } else { -T::one() };
                sign * grid.maxwellian()[j]
            }),
        );
        let c = self.inner_product(&psi).expect("same grid")
            / psi.inner_product(&psi).expect("same grid");
        self.axpy(-c, &psi)
    }

    /// Error if any entry is non-finite.
    pub fn assert_finite(&self) -> Result<()> {
        for v in self.values.iter() {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "field",
                    reason: "non-finite entry".into(),
                });
            }
        }
        Ok(())
    }

    pub fn scale(&self, s: T) -> Field<T> {
        Field {
            values: &self.values * s,
            grid: Arc::clone(&self.grid),
        }
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: T, other: &Field<T>) -> Field<T> {
        assert!(self.grid.compatible(&other.grid), "grid mismatch");
        Field {
            values: &self.values + &other.values * s,
            grid: Arc::clone(&self.grid),
        }
    }
}

impl<T: Real> std::ops::Add for &Field<T> {
    type Output = Field<T>;
    fn add(self, rhs: Self) -> Field<T> {
        self.axpy(T::one(), rhs)
    }
}

impl<T: Real> std::ops::Sub for &Field<T> {
    type Output = Field<T>;
    fn sub(self, rhs: Self) -> Field<T> {
        self.axpy(-T::one(), rhs)
    }
}

/// Global equilibrium `F(x, v) = M(v)/lx` with its discrete total mass.
#[derive(Debug, Clone)]
pub struct Equilibrium<T: Real> {
    pub field: Field<T>,
    pub total: T,
}

impl<T: Real> Equilibrium<T> {
    pub fn new(grid: &SharedGrid<T>) -> Self {
        let field = Field::from_fn(grid, |_, _| T::zero());
        let mut field = field;
        for i in 0..grid.nx() {
            for j in 0..grid.nv() {
                *field.value_mut(i, j) = grid.maxwellian()[j] / grid.lx();
            }
        }
        let total = field.mass();
        Equilibrium { field, total }
    }
}
