//! Random-input machinery: scattering-coefficient models `σ(x, z)`, the
//! triangular hierarchy of `z`-derivatives `g_l = ∂_z^l f`, a stochastic
//! collocation oracle for the same derivatives, the closed-form decay
//! bounds with their Knudsen-number amplifications, the scalar cascade
//! oracles, and the convergence-radius proxy.

mod cascade;
mod chebyshev;

pub use cascade::{
    cascade_eta_bound, cascade_eta_exact, cascade_hl_bound, jordan_cascade, EtaBounds,
    JordanCascade, MAX_CASCADE_ORDER,
};
pub use chebyshev::{cgl_nodes, diff_matrix};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::{largest_singular_value, scattering_velocity_matrix};
use crate::phase_space::{Field, SharedGrid};
use crate::rates::{RateCertificate, Scaling};
use crate::scalar::{real, real_usize, Real};
use crate::solver::{Scenario, Stepper};

use cascade::{binomial_table, factorials, int_pow};

/// Maximum hierarchy depth (cost guard).
pub const MAX_HIERARCHY_ORDER: usize = 10;

/// Real-valued factorial table `0!..=n!` (exact in doubles well past the
/// cascade order guard).
pub fn factorials_f64(n: usize) -> Vec<f64> {
    factorials::<f64>(n)
}

/// Spatial profile of a scattering coefficient ingredient.
#[derive(Debug, Clone, Copy)]
pub enum Profile<T: Real> {
    Constant(T),
    /// `mean + amp·sin(2π·mode·x/lx)`.
    SinX { mean: T, amp: T, mode: u32 },
}

impl<T: Real> Profile<T> {
    pub fn eval(&self, x: T, lx: T) -> T {
        match self {
            Profile::Constant(c) => *c,
            Profile::SinX { mean, amp, mode } => {
                let tau = real::<T>(2.0) * T::pi();
                *mean + *amp * (tau * real::<T>(*mode as f64) * x / lx).sin()
            }
        }
    }

    fn lower_bound(&self) -> T {
        match self {
            Profile::Constant(c) => *c,
            Profile::SinX { mean, amp, .. } => *mean - amp.abs(),
        }
    }

    fn abs_upper_bound(&self) -> T {
        match self {
            Profile::Constant(c) => c.abs(),
            Profile::SinX { mean, amp, .. } => mean.abs() + amp.abs(),
        }
    }

    pub fn values(&self, grid: &SharedGrid<T>) -> Vec<T> {
        grid.x_nodes()
            .iter()
            .map(|&x| self.eval(x, grid.lx()))
            .collect()
    }
}

/// How `σ` depends on the random parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaKind {
    Affine,
    Analytic,
}

/// Scattering coefficient `σ(x, z)`, either affine in `z`,
/// `σ = σ₀(x) + z·σ₁(x)`, or analytic with a sine modulation,
/// `σ = base(x) + amp·sin(z)`.
///
/// The model certifies the constants the derivative bounds need:
/// `c1 ≥ sup_x |∂_z σ|` and `c2 ≥ sup_x |s_n(x)|` for the Taylor
/// coefficients of every order `n ≥ 1` (the orders that enter the
/// hierarchy source).
#[derive(Debug, Clone)]
pub struct SigmaModel<T: Real> {
    form: SigmaForm<T>,
    z_interval: (T, T),
}

#[derive(Debug, Clone)]
enum SigmaForm<T: Real> {
    Affine {
        sigma0: Profile<T>,
        sigma1: Profile<T>,
    },
    SinZ {
        base: Profile<T>,
        amp: T,
    },
}

impl<T: Real> SigmaModel<T> {
    pub fn affine(sigma0: Profile<T>, sigma1: Profile<T>, z_interval: (T, T)) -> Result<Self> {
        if z_interval.0 >= z_interval.1 {
            return Err(Error::InvalidParameter {
                name: "z_interval",
                reason: "must be a nonempty interval".into(),
            });
        }
        let model = SigmaModel {
            form: SigmaForm::Affine { sigma0, sigma1 },
            z_interval,
        };
        model.check_positive()?;
        Ok(model)
    }

    pub fn analytic_sin(base: Profile<T>, amp: T, z_interval: (T, T)) -> Result<Self> {
        if z_interval.0 >= z_interval.1 {
            return Err(Error::InvalidParameter {
                name: "z_interval",
                reason: "must be a nonempty interval".into(),
            });
        }
        let model = SigmaModel {
            form: SigmaForm::SinZ { base, amp },
            z_interval,
        };
        model.check_positive()?;
        Ok(model)
    }

    /// `σ(x, z) = 1 + 0.5·z` on `z ∈ [-1, 1]`.
    pub fn default_affine(_nx: usize) -> Self {
        SigmaModel {
            form: SigmaForm::Affine {
                sigma0: Profile::Constant(T::one()),
                sigma1: Profile::Constant(real::<T>(0.5)),
            },
            z_interval: (-T::one(), T::one()),
        }
    }

    /// `σ(x, z) = 1 + 0.4·sin(z)` on `z ∈ [-1, 1]`.
    pub fn default_analytic(_nx: usize) -> Self {
        SigmaModel {
            form: SigmaForm::SinZ {
                base: Profile::Constant(T::one()),
                amp: real::<T>(0.4),
            },
            z_interval: (-T::one(), T::one()),
        }
    }

    /// Deterministic coefficient (no `z` dependence).
    pub fn constant(profile: Profile<T>) -> Result<Self> {
        SigmaModel::affine(
            profile,
            Profile::Constant(T::zero()),
            (-T::one(), T::one()),
        )
    }

    pub fn kind(&self) -> SigmaKind {
        match self.form {
            SigmaForm::Affine { .. } => SigmaKind::Affine,
            SigmaForm::SinZ { .. } => SigmaKind::Analytic,
        }
    }

    pub fn z_interval(&self) -> (T, T) {
        self.z_interval
    }

    /// Certified `sup_x |∂_z σ|`.
    pub fn c1(&self) -> T {
        match &self.form {
            SigmaForm::Affine { sigma1, .. } => sigma1.abs_upper_bound(),
            SigmaForm::SinZ { amp, .. } => amp.abs(),
        }
    }

    /// Certified bound on the Taylor coefficients `|s_n(x)|`, `n ≥ 1`.
    pub fn c2(&self) -> T {
        self.c1()
    }

    /// Conservative positivity certificate over the declared z-interval.
    fn check_positive(&self) -> Result<()> {
        let min = match &self.form {
            SigmaForm::Affine { sigma0, sigma1 } => {
                let zmax = self.z_interval.0.abs().max(self.z_interval.1.abs());
                sigma0.lower_bound() - zmax * sigma1.abs_upper_bound()
            }
            SigmaForm::SinZ { base, amp } => base.lower_bound() - amp.abs(),
        };
        if min <= T::zero() {
            return Err(Error::NonPositiveSigma);
        }
        Ok(())
    }

    /// Alias of the constructor-time validation for callers holding a grid.
    pub fn validate_positive(&self, _grid: &SharedGrid<T>) -> Result<()> {
        self.check_positive()
    }

    /// `σ(·, z)` on the spatial nodes.
    pub fn values_at(&self, grid: &SharedGrid<T>, z: T) -> Vec<T> {
        match &self.form {
            SigmaForm::Affine { sigma0, sigma1 } => grid
                .x_nodes()
                .iter()
                .map(|&x| sigma0.eval(x, grid.lx()) + z * sigma1.eval(x, grid.lx()))
                .collect(),
            SigmaForm::SinZ { base, amp } => grid
                .x_nodes()
                .iter()
                .map(|&x| base.eval(x, grid.lx()) + *amp * z.sin())
                .collect(),
        }
    }

    /// `∂_z^n σ(·, z0)` on the spatial nodes.
    pub fn deriv_at(&self, grid: &SharedGrid<T>, n: usize, z0: T) -> Vec<T> {
        match &self.form {
            SigmaForm::Affine { sigma0, sigma1 } => match n {
                0 => grid
                    .x_nodes()
                    .iter()
                    .map(|&x| sigma0.eval(x, grid.lx()) + z0 * sigma1.eval(x, grid.lx()))
                    .collect(),
                1 => sigma1.values(grid),
                _ => vec![T::zero(); grid.nx()],
            },
            SigmaForm::SinZ { base, amp } => {
                if n == 0 {
                    grid.x_nodes()
                        .iter()
                        .map(|&x| base.eval(x, grid.lx()) + *amp * z0.sin())
                        .collect()
                } else {
                    // d^n/dz^n sin cycles through cos, -sin, -cos, sin.
                    let v = match (n - 1) % 4 {
                        0 => z0.cos(),
                        1 => -z0.sin(),
                        2 => -z0.cos(),
                        _ => z0.sin(),
                    };
                    vec![*amp * v; grid.nx()]
                }
            }
        }
    }

    /// Taylor coefficient `s_n(x) = ∂_z^n σ(x, z0)/n!`.
    pub fn taylor_coefficient(&self, grid: &SharedGrid<T>, n: usize, z0: T) -> Vec<T> {
        let fact = factorials::<T>(n.max(1));
        self.deriv_at(grid, n, z0)
            .into_iter()
            .map(|d| d / fact[n])
            .collect()
    }

    /// Derivative orders with a non-vanishing `∂_z^n σ`, `1 ≤ n ≤ max_n`.
    fn active_orders(&self, max_n: usize) -> Vec<usize> {
        match self.form {
            SigmaForm::Affine { .. } => {
                if max_n >= 1 {
                    vec![1]
                } else {
                    vec![]
                }
            }
            SigmaForm::SinZ { .. } => (1..=max_n).collect(),
        }
    }
}

/// Time series of the derivative hierarchy at a fixed `z0`.
#[derive(Debug, Clone)]
pub struct Hierarchy<T: Real> {
    pub lmax: usize,
    pub z0: T,
    pub times: Vec<T>,
    /// `norms[time][l] = ‖g_l(t)‖`.
    pub norms: Vec<Vec<T>>,
    pub fields: Option<Vec<Vec<Field<T>>>>,
    pub dt: T,
    /// Norm of the raw initial fluctuation before unit normalization.
    pub initial_norm: T,
}

#[derive(Debug, Clone)]
pub struct HierarchyOptions<T: Real> {
    pub record_every: usize,
    pub save_fields: bool,
    /// Initial-derivative scale: `g_l(0) = h0^l · (unit pattern)` for
    /// `l ≥ 1`; zero initial derivatives when `h0 = 0`.
    pub h0: T,
}

impl<T: Real> Default for HierarchyOptions<T> {
    fn default() -> Self {
        HierarchyOptions {
            record_every: 10,
            save_fields: false,
            h0: T::zero(),
        }
    }
}

/// Solve the coupled triangular system
/// `∂t g_l + (1/Kn) T g_l = (1/Kn^p) [σ L g_l + Σ_{k<l} C(l,k) ∂_z^{l-k}σ · L g_k]`
/// with the same IMEX stepper as the base equation, lowest order first.
/// Sources are assembled from the already-updated lower levels, which makes
/// the discrete hierarchy the exact `z`-derivative of the discrete solver.
///
/// The initial fluctuation is normalized to unit weighted norm so the
/// initial-data premise `‖g_l(0)‖ ≤ H^l` holds with `H = h0`.
pub fn solve_hierarchy<T: Real>(
    scenario: &Scenario<T>,
    lmax: usize,
    opts: &HierarchyOptions<T>,
) -> Result<Hierarchy<T>> {
    if lmax > MAX_HIERARCHY_ORDER {
        return Err(Error::OrderGuard {
            got: lmax,
            max: MAX_HIERARCHY_ORDER,
        });
    }
    let grid = scenario.grid()?;
    let sigma = scenario.sigma_values(&grid)?;
    let dt = scenario.effective_dt(&grid)?;
    let stepper = Stepper::new(
        &grid,
        &scenario.model,
        &sigma,
        scenario.derivative_rule,
        scenario.kn,
        scenario.scaling,
        dt,
    )?;

    let raw = scenario.initial_field(&grid);
    let initial_norm = raw.norm();
    if initial_norm <= T::zero() {
        return Err(Error::InvalidParameter {
            name: "initial",
            reason: "initial fluctuation must be non-zero".into(),
        });
    }
    let pattern = raw.scale(T::one() / initial_norm);

    let mut g: Vec<Field<T>> = Vec::with_capacity(lmax + 1);
    g.push(pattern.clone());
    for l in 1..=lmax {
        if opts.h0 > T::zero() {
            g.push(pattern.scale(int_pow(opts.h0, l)));
        } else {
            g.push(Field::zeros(&grid));
        }
    }

    let binom = binomial_table::<T>(lmax);
    let active = scenario.sigma.active_orders(lmax);
    let derivs: Vec<Option<Vec<T>>> = (0..=lmax)
        .map(|n| {
            if n >= 1 && active.contains(&n) {
                Some(scenario.sigma.deriv_at(&grid, n, scenario.z0))
            } else {
                None
            }
        })
        .collect();

    let steps = crate::solver::steps_for(scenario.t_end, dt);
    let every = opts.record_every.max(1);
    let mut times = Vec::new();
    let mut norms = Vec::new();
    let mut fields = opts.save_fields.then(Vec::new);
    let mut record = |n: usize, g: &[Field<T>]| {
        times.push(dt * real_usize::<T>(n));
        norms.push(g.iter().map(|f| f.norm()).collect::<Vec<_>>());
        if let Some(fs) = fields.as_mut() {
            fs.push(g.to_vec());
        }
    };
    record(0, &g);

    for n in 1..=steps {
        let mut new_g: Vec<Field<T>> = Vec::with_capacity(lmax + 1);
        let mut lv_new: Vec<Field<T>> = Vec::with_capacity(lmax + 1);
        for l in 0..=lmax {
            let next = if l == 0 {
                stepper.step(&g[0])?
            } else {
                let mut source = Field::zeros(&grid);
                for k in 0..l {
                    if let Some(dsig) = &derivs[l - k] {
                        let coeff = binom[l][k];
                        let lv_gk = &lv_new[k];
                        for i in 0..grid.nx() {
                            let scale = coeff * dsig[i];
                            for j in 0..grid.nv() {
                                *source.value_mut(i, j) += scale * lv_gk.value(i, j);
                            }
                        }
                    }
                }
                stepper.step_with_source(&g[l], &source)?
            };
            lv_new.push(stepper.collision_raw(&next));
            new_g.push(next);
        }
        g = new_g;
        if n % every == 0 || n == steps {
            record(n, &g);
        }
    }

    Ok(Hierarchy {
        lmax,
        z0: scenario.z0,
        times,
        norms,
        fields,
        dt,
        initial_norm,
    })
}

/// Collocation estimates of the derivative norms, the independent oracle
/// for [`solve_hierarchy`].
#[derive(Debug, Clone)]
pub struct Collocation<T: Real> {
    pub z_nodes: Vec<T>,
    pub times: Vec<T>,
    /// `norms[time][l] = ‖g_l(t)‖` estimated by spectral differentiation.
    pub norms: Vec<Vec<T>>,
}

/// Run the deterministic solver on Chebyshev–Gauss–Lobatto `z`-nodes and
/// differentiate spectrally in `z` at `z0` (which must be one of the
/// nodes; the midpoint is a node whenever `n_nodes` is odd). The initial
/// fluctuation is normalized exactly as in [`solve_hierarchy`].
pub fn collocation_derivatives<T: Real + Send + Sync>(
    scenario: &Scenario<T>,
    n_nodes: usize,
    lmax: usize,
    record_every: usize,
) -> Result<Collocation<T>> {
    if n_nodes < 2 * lmax + 1 {
        return Err(Error::InsufficientNodes {
            need: 2 * lmax + 1,
            got: n_nodes,
        });
    }
    let grid = scenario.grid()?;
    scenario.sigma.validate_positive(&grid)?;
    let (zlo, zhi) = scenario.sigma.z_interval();
    let nodes = cgl_nodes(n_nodes, zlo, zhi);
    let tol = real::<T>(1e-12) * (T::one() + scenario.z0.abs());
    let idx0 = nodes
        .iter()
        .position(|&z| (z - scenario.z0).abs() <= tol)
        .ok_or(Error::ExpansionPointNotANode)?;

    let dt = scenario.effective_dt(&grid)?;
    let steps = crate::solver::steps_for(scenario.t_end, dt);
    let every = record_every.max(1);

    let raw = scenario.initial_field(&grid);
    let initial_norm = raw.norm();
    if initial_norm <= T::zero() {
        return Err(Error::InvalidParameter {
            name: "initial",
            reason: "initial fluctuation must be non-zero".into(),
        });
    }
    let pattern = raw.scale(T::one() / initial_norm);

    let per_node: Result<Vec<Vec<DMatrix<T>>>> = nodes
        .par_iter()
        .map(|&z| {
            let sigma = scenario.sigma.values_at(&grid, z);
            let stepper = Stepper::new(
                &grid,
                &scenario.model,
                &sigma,
                scenario.derivative_rule,
                scenario.kn,
                scenario.scaling,
                dt,
            )?;
            let mut f = pattern.clone();
            let mut saved = vec![f.values().clone()];
            for n in 1..=steps {
                f = stepper.step(&f)?;
                if n % every == 0 || n == steps {
                    saved.push(f.values().clone());
                }
            }
            Ok(saved)
        })
        .collect();
    let per_node = per_node?;

    let dz = diff_matrix(n_nodes, zlo, zhi);
    // Row `idx0` of Dz^l, built by repeated row-vector multiplication.
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(lmax + 1);
    let mut row = vec![T::zero(); n_nodes];
    row[idx0] = T::one();
    rows.push(row.clone());
    for _ in 1..=lmax {
        let mut next = vec![T::zero(); n_nodes];
        for (i, &ri) in row.iter().enumerate() {
            if ri != T::zero() {
                for j in 0..n_nodes {
                    next[j] += ri * dz[(i, j)];
                }
            }
        }
        rows.push(next.clone());
        row = next;
    }

    let n_times = per_node[0].len();
    let mut times = Vec::with_capacity(n_times);
    for n in 0..=steps {
        if n == 0 || n % every == 0 || n == steps {
            times.push(dt * real_usize::<T>(n));
        }
    }
    debug_assert_eq!(times.len(), n_times);

    let mut norms = Vec::with_capacity(n_times);
    for t_idx in 0..n_times {
        let mut per_l = Vec::with_capacity(lmax + 1);
        for coeffs in rows.iter() {
            let mut acc = DMatrix::<T>::zeros(grid.nv(), grid.nx());
            for (i, &ci) in coeffs.iter().enumerate() {
                if ci != T::zero() {
                    acc += &per_node[i][t_idx] * ci;
                }
            }
            per_l.push(Field::from_matrix(&grid, acc).norm());
        }
        norms.push(per_l);
    }
    Ok(Collocation {
        z_nodes: nodes,
        times,
        norms,
    })
}

/// Constants entering the derivative bounds, bundled from a rate
/// certificate: `C_z = (1+ε_z)/(1-ε_z)`, `C̃ᵢ = Cᵢ·C_z²`.
#[derive(Debug, Clone, Copy)]
pub struct TheoremConstants<T: Real> {
    pub h: T,
    pub c1: T,
    pub c2: T,
    pub c1_tilde: T,
    pub c2_tilde: T,
    pub lambda_z: T,
    pub eps_z: T,
    pub c_z: T,
}

impl<T: Real> TheoremConstants<T> {
    pub fn new(cert: &RateCertificate<T>, c1: T, c2: T, h: T) -> Self {
        Self::from_rate(cert.lambda_lower, cert.eps0, c1, c2, h)
    }

    pub fn from_rate(lambda_z: T, eps_z: T, c1: T, c2: T, h: T) -> Self {
        let c_z = (T::one() + eps_z) / (T::one() - eps_z);
        TheoremConstants {
            h,
            c1,
            c2,
            c1_tilde: c1 * c_z * c_z,
            c2_tilde: c2 * c_z * c_z,
            lambda_z,
            eps_z,
            c_z,
        }
    }
}

/// Affine-case derivative bound `‖g_l(t)‖ ≤ C_z e^{-λ_z t} (H + t·C̃₁)^l`.
pub fn bound_gl1<T: Real>(t: T, l: usize, h: T, c1_tilde: T, lambda_z: T, c_z: T) -> T {
    c_z * (-lambda_z * t).exp() * int_pow(h + t * c1_tilde, l)
}

/// The two branches of the analytic-case bound for `‖g_l/l!‖`.
#[derive(Debug, Clone, Copy)]
pub struct Gl2Bound<T> {
    pub poly: T,
    pub exp: T,
}

impl<T: Real> Gl2Bound<T> {
    pub fn min(&self) -> T {
        self.poly.min(self.exp)
    }
}

/// Analytic-case bound
/// `‖g_l/l!‖ ≤ √(2/(1-ε_z)) [H^l/l!·e^{-λ_z t}
///   + (1+H)^{l+1}·min{e^{-λ_z t}(1+C̃₂t)^l, e^{(C̃₂-λ_z)t}·2^{l-1}}]`.
pub fn bound_gl2<T: Real>(
    t: T,
    l: usize,
    h: T,
    c2_tilde: T,
    lambda_z: T,
    eps_z: T,
) -> Gl2Bound<T> {
    let two = real::<T>(2.0);
    let pref = (two / (T::one() - eps_z)).sqrt();
    let fact = factorials::<T>(l.max(1));
    let decay = (-lambda_z * t).exp();
    let head = pref * int_pow(h, l) / fact[l] * decay;
    let growth = pref * int_pow(T::one() + h, l + 1);
    let poly = head + growth * decay * int_pow(T::one() + c2_tilde * t, l);
    let exp_branch = head + growth * ((c2_tilde - lambda_z) * t).exp() * two.powi(l as i32 - 1);
    Gl2Bound {
        poly,
        exp: exp_branch,
    }
}

/// Knudsen-amplified derivative bound: the source amplification multiplies
/// `C̃₁`/`C̃₂` by `1/Kn²` (parabolic) or `1/Kn` (high field). The supplied
/// constants must already carry the rescaled certificate `λ_{z,Kn}`,
/// `ε_{z,Kn}`.
pub fn bound_kn<T: Real>(
    t: T,
    l: usize,
    constants: &TheoremConstants<T>,
    kind: SigmaKind,
    kn: T,
    scaling: Scaling,
) -> Result<T> {
    if kn <= T::zero() || kn > T::one() {
        return Err(Error::InvalidParameter {
            name: "kn",
            reason: "must lie in (0, 1]".into(),
        });
    }
    let amp = match scaling {
        Scaling::Kinetic => T::one(),
        Scaling::Parabolic => T::one() / (kn * kn),
        Scaling::HighField => T::one() / kn,
    };
    Ok(match kind {
        SigmaKind::Affine => bound_gl1(
            t,
            l,
            constants.h,
            constants.c1_tilde * amp,
            constants.lambda_z,
            constants.c_z,
        ),
        SigmaKind::Analytic => bound_gl2(
            t,
            l,
            constants.h,
            constants.c2_tilde * amp,
            constants.lambda_z,
            constants.eps_z,
        )
        .min(),
    })
}

/// Finite-truncation proxy of the convergence radius
/// `1 / max_{l ∈ [lmax/2, lmax]} (‖g_l‖/l!)^{1/l}`, with a `+∞` sentinel
/// when every tail term is negligible.
pub fn estimate_radius<T: Real>(norms_gl: &[T], lmax: usize) -> Result<T> {
    if lmax < 5 {
        return Err(Error::InvalidParameter {
            name: "lmax",
            reason: "radius proxy needs lmax >= 5".into(),
        });
    }
    if norms_gl.len() < lmax + 1 {
        return Err(Error::InvalidParameter {
            name: "norms_gl",
            reason: format!("need {} norms, got {}", lmax + 1, norms_gl.len()),
        });
    }
    if norms_gl.iter().any(|&n| n < T::zero()) {
        return Err(Error::InvalidParameter {
            name: "norms_gl",
            reason: "norms must be nonnegative".into(),
        });
    }
    let fact = factorials::<T>(lmax);
    let floor = real::<T>(1e-300);
    let lo = (lmax / 2).max(1);
    let mut worst = T::zero();
    for l in lo..=lmax {
        if norms_gl[l] > floor {
            let root = (norms_gl[l] / fact[l]).powf(T::one() / real_usize::<T>(l));
            worst = worst.max(root);
        }
    }
    if worst <= T::zero() {
        return Ok(T::from_f64(f64::INFINITY).expect("infinity representable"));
    }
    Ok(T::one() / worst)
}

/// Generalized scattering source `L^q_z f` built from the `q`-th kernel
/// derivative `∂_z^q k_z`:
/// `(L^q f)(v) = Σ w [∂_z^q k(v*→v) f(v*) M(v) - ∂_z^q k(v→v*) f(v) M(v*)]`.
pub fn apply_lq<T: Real>(
    kernel_derivatives: &[DMatrix<T>],
    q: usize,
    f: &Field<T>,
) -> Result<Field<T>> {
    let grid = f.grid();
    let kernel = kernel_derivatives
        .get(q)
        .ok_or(Error::MissingKernelOrder(q))?;
    if kernel.nrows() != grid.nv() || kernel.ncols() != grid.nv() {
        return Err(Error::InvalidParameter {
            name: "kernel_derivatives",
            reason: format!("order {q} kernel must be {0}x{0}", grid.nv()),
        });
    }
    let lv = scattering_velocity_matrix(grid, kernel);
    Ok(Field::from_matrix(grid, &lv * f.values()))
}

/// Operator norm `C_L` of the scattering source in the weighted geometry
/// (dense SVD of the similarity-transformed velocity block).
pub fn lq_operator_norm<T: Real>(grid: &SharedGrid<T>, kernel_derivative: &DMatrix<T>) -> T {
    let lv = scattering_velocity_matrix(grid, kernel_derivative);
    let nv = grid.nv();
    let sqrt_mu: Vec<T> = grid.mu().iter().map(|&m| m.sqrt()).collect();
    let transformed = DMatrix::from_fn(nv, nv, |r, c| lv[(r, c)] * sqrt_mu[r] / sqrt_mu[c]);
    largest_singular_value(&transformed)
}
