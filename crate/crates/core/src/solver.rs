//! IMEX time integration of `∂t f + (1/Kn) T f = (1/Kn^p) L_z f`.
//!
//! One step treats the transport explicitly (a four-stage Runge–Kutta
//! update of the skew part, stable under the enforced CFL restriction
//! `dt ≤ 0.5·Δx·Kn/max|v|`) and the collision implicitly (a linear solve
//! with `I - (dt/Kn^p)·σ(x)·L_v`, factorized once per spatial node and
//! cached). The splitting is first order; the implicit solve keeps the
//! stiff collision unconditionally stable and preserves the discrete mass
//! row exactly.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::operators::{
    anisotropic_velocity_matrix, build_auxiliary_a, build_transport, central2_dx_matrix,
    spectral_dx_matrix, DerivativeRule, KineticOperator, OperatorRole,
};
use crate::phase_space::{build_grid_with_shift, Field, SharedGrid, VelocityRule};
use crate::rates::Scaling;
use crate::scalar::{as_f64, real, real_usize, Real};
use crate::uq::SigmaModel;

/// Collision family of a scenario.
#[derive(Debug, Clone)]
pub enum CollisionModel<T: Real> {
    /// Relaxation toward the local equilibrium, `L = Π - I`.
    Bgk,
    /// Detailed-balance scattering with kernel
    /// `k(v, v') = base + amp·exp(-(v-v')²/(2·width²))`.
    Anisotropic { base: T, amp: T, width: T },
}

impl<T: Real> CollisionModel<T> {
    /// Velocity-space collision matrix `L_v` (no scattering coefficient).
    pub fn velocity_matrix(&self, grid: &SharedGrid<T>) -> Result<DMatrix<T>> {
        let nv = grid.nv();
        match self {
            CollisionModel::Bgk => {
                let mut lv = DMatrix::zeros(nv, nv);
                for j in 0..nv {
                    for k in 0..nv {
                        let mut val = grid.v_weights()[k] * grid.maxwellian()[j];
                        if j == k {
                            val -= T::one();
                        }
                        lv[(j, k)] = val;
                    }
                }
                Ok(lv)
            }
            CollisionModel::Anisotropic { base, amp, width } => {
                let kernel = self.kernel(grid)?;
                let _ = (base, amp, width);
                anisotropic_velocity_matrix(grid, &kernel)
            }
        }
    }

    /// Scattering kernel matrix for the anisotropic family.
    pub fn kernel(&self, grid: &SharedGrid<T>) -> Result<DMatrix<T>> {
        match self {
            CollisionModel::Bgk => Err(Error::InvalidParameter {
                name: "model",
                reason: "BGK has no scattering kernel".into(),
            }),
            CollisionModel::Anisotropic { base, amp, width } => {
                let nv = grid.nv();
                let half = real::<T>(0.5);
                Ok(DMatrix::from_fn(nv, nv, |j, k| {
                    let dv = grid.v_nodes()[j] - grid.v_nodes()[k];
                    *base + *amp * (-half * dv * dv / (*width * *width)).exp()
                }))
            }
        }
    }
}

/// Named initial-fluctuation generators. All produce mass-zero data.
#[derive(Debug, Clone)]
pub enum InitialData<T: Real> {
    /// `sin(2πx/lx)·M(v) + 0.3·sin(4πx/lx)·v·M(v)`: excites both the local
    /// equilibrium space and its orthogonal complement.
    Default,
    /// `amp·sin(2πkx/lx)·M(v)`.
    MacroMode { k: u32, amp: T },
    /// `amp·sin(2πkx/lx)·v·M(v)`.
    MicroMode { k: u32, amp: T },
}

impl<T: Real> InitialData<T> {
    pub fn build(&self, grid: &SharedGrid<T>) -> Field<T> {
        let tau = real::<T>(2.0) * T::pi();
        let mode = |k: u32, x: T, lx: T| (tau * real::<T>(k as f64) * x / lx).sin();
        match self {
            InitialData::Default => Field::from_fn(grid, |x, v| {
                let m = maxwellian_at(grid, v);
                mode(1, x, grid.lx()) * m + real::<T>(0.3) * mode(2, x, grid.lx()) * v * m
            }),
            InitialData::MacroMode { k, amp } => {
                Field::from_fn(grid, |x, v| *amp * mode(*k, x, grid.lx()) * maxwellian_at(grid, v))
            }
            InitialData::MicroMode { k, amp } => Field::from_fn(grid, |x, v| {
                *amp * mode(*k, x, grid.lx()) * v * maxwellian_at(grid, v)
            }),
        }
    }
}

fn maxwellian_at<T: Real>(grid: &SharedGrid<T>, v: T) -> T {
    // Grid nodes are exact, so a linear scan is fine at desk scale.
    for (j, &vj) in grid.v_nodes().iter().enumerate() {
        if vj == v {
            return grid.maxwellian()[j];
        }
    }
    unreachable!("initial data is evaluated on grid nodes");
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone)]
pub struct Scenario<T: Real> {
    pub model: CollisionModel<T>,
    pub scaling: Scaling,
    pub kn: T,
    pub sigma: SigmaModel<T>,
    pub z0: T,
    pub nx: usize,
    pub lx: T,
    pub nv: usize,
    pub velocity_rule: VelocityRule,
    pub derivative_rule: DerivativeRule,
    /// Diagnostic velocity-node shift; non-zero breaks the symmetry
    /// assumptions on purpose.
    pub v_shift: T,
    pub t_end: T,
    /// `None` picks half of the CFL bound.
    pub dt: Option<T>,
    pub output_every: usize,
    pub initial: InitialData<T>,
}

impl<T: Real> Scenario<T> {
    pub fn default_bgk() -> Self {
        Scenario {
            model: CollisionModel::Bgk,
            scaling: Scaling::Kinetic,
            kn: T::one(),
            sigma: SigmaModel::default_affine(32),
            z0: T::zero(),
            nx: 32,
            lx: real::<T>(2.0) * T::pi(),
            nv: 16,
            velocity_rule: VelocityRule::GaussHermite,
            derivative_rule: DerivativeRule::Spectral,
            v_shift: T::zero(),
            t_end: real::<T>(10.0),
            dt: None,
            output_every: 10,
            initial: InitialData::Default,
        }
    }

    pub fn default_anisotropic() -> Self {
        Scenario {
            model: CollisionModel::Anisotropic {
                base: T::one(),
                amp: real::<T>(0.5),
                width: T::one(),
            },
            ..Scenario::default_bgk()
        }
    }

    pub fn grid(&self) -> Result<SharedGrid<T>> {
        build_grid_with_shift(self.nx, self.lx, self.nv, self.velocity_rule, self.v_shift)
    }

    /// Scattering coefficient on the spatial nodes at `z0`, validated
    /// strictly positive over the declared z-interval.
    pub fn sigma_values(&self, grid: &SharedGrid<T>) -> Result<Vec<T>> {
        self.sigma.validate_positive(grid)?;
        Ok(self.sigma.values_at(grid, self.z0))
    }

    /// CFL-style stability bound `0.5·Δx·Kn/max|v|` for the explicit
    /// transport.
    pub fn stability_bound(&self, grid: &SharedGrid<T>) -> T {
        real::<T>(0.5) * grid.dx() * self.kn / grid.max_abs_v()
    }

    /// Effective time step: the requested one (validated) or half the bound.
    pub fn effective_dt(&self, grid: &SharedGrid<T>) -> Result<T> {
        let bound = self.stability_bound(grid);
        match self.dt {
            Some(dt) => {
                if dt <= T::zero() {
                    return Err(Error::InvalidParameter {
                        name: "dt",
                        reason: "must be positive".into(),
                    });
                }
                if dt > bound {
                    return Err(Error::StabilityBound {
                        dt: as_f64(dt),
                        bound: as_f64(bound),
                    });
                }
                Ok(dt)
            }
            None => Ok(real::<T>(0.5) * bound),
        }
    }

    pub fn initial_field(&self, grid: &SharedGrid<T>) -> Field<T> {
        self.initial.build(grid)
    }
}

/// Cached one-step integrator.
pub struct Stepper<T: Real> {
    grid: SharedGrid<T>,
    /// Transpose of the spatial derivative matrix (fields are `nv × nx`).
    dmat_t: DMatrix<T>,
    lv: DMatrix<T>,
    sigma: Vec<T>,
    tau: T,
    s_collision: T,
    dt: T,
    implicit_lu: Vec<LU<T, Dyn, Dyn>>,
}

impl<T: Real> Stepper<T> {
    pub fn new(
        grid: &SharedGrid<T>,
        model: &CollisionModel<T>,
        sigma: &[T],
        derivative_rule: DerivativeRule,
        kn: T,
        scaling: Scaling,
        dt: T,
    ) -> Result<Self> {
        if sigma.len() != grid.nx() {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: "one value per spatial node".into(),
            });
        }
        if sigma.iter().any(|&s| s <= T::zero()) {
            return Err(Error::NonPositiveSigma);
        }
        let bound = real::<T>(0.5) * grid.dx() * kn / grid.max_abs_v();
        if dt > bound || dt <= T::zero() {
            return Err(Error::StabilityBound {
                dt: as_f64(dt),
                bound: as_f64(bound),
            });
        }
        let dmat = match derivative_rule {
            DerivativeRule::Spectral => spectral_dx_matrix(grid.nx(), grid.lx()),
            DerivativeRule::Central2 => central2_dx_matrix(grid.nx(), grid.lx()),
        };
        let lv = model.velocity_matrix(grid)?;
        let p = scaling.collision_exponent();
        let s_collision = dt / kn.powi(p);
        let tau = dt / kn;
        let eye = DMatrix::<T>::identity(grid.nv(), grid.nv());
        let implicit_lu = sigma
            .iter()
            .map(|&si| (&eye - &lv * (s_collision * si)).lu())
            .collect();
        Ok(Stepper {
            grid: grid.clone(),
            dmat_t: dmat.transpose(),
            lv,
            sigma: sigma.to_vec(),
            tau,
            s_collision,
            dt,
            implicit_lu,
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn grid(&self) -> &SharedGrid<T> {
        &self.grid
    }

    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }

    /// `T f = v·∂x f` on the raw `nv × nx` value matrix.
    fn transport_raw(&self, m: &DMatrix<T>) -> DMatrix<T> {
        let mut out = m * &self.dmat_t;
        for j in 0..self.grid.nv() {
            let vj = self.grid.v_nodes()[j];
            for i in 0..self.grid.nx() {
                out[(j, i)] *= vj;
            }
        }
        out
    }

    /// Explicit transport substep: fourth-order Runge–Kutta update of
    /// `∂t f = -(1/Kn) T f`, norm-stable for `τ·max|v|·k_max ≤ 2√2`.
    fn explicit_transport(&self, m: &DMatrix<T>) -> DMatrix<T> {
        let t1 = self.transport_raw(m);
        let t2 = self.transport_raw(&t1);
        let t3 = self.transport_raw(&t2);
        let t4 = self.transport_raw(&t3);
        let tau = self.tau;
        let c2 = tau * tau / real::<T>(2.0);
        let c3 = tau * tau * tau / real::<T>(6.0);
        let c4 = tau * tau * tau * tau / real::<T>(24.0);
        m - t1 * tau + t2 * c2 - t3 * c3 + t4 * c4
    }

    /// Implicit collision solve, one cached factorization per spatial node.
    fn implicit_collision(&self, m: &DMatrix<T>) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.grid.nv(), self.grid.nx());
        for i in 0..self.grid.nx() {
            let col = DVector::from_column_slice(m.column(i).as_slice());
            let sol = self.implicit_lu[i]
                .solve(&col)
                .expect("I - s·σ·L_v is invertible");
            out.column_mut(i).copy_from(&sol);
        }
        out
    }

    /// One IMEX step.
    pub fn step(&self, f: &Field<T>) -> Result<Field<T>> {
        let staged = self.explicit_transport(f.values());
        let out = Field::from_matrix(&self.grid, self.implicit_collision(&staged));
        out.assert_finite()?;
        Ok(out)
    }

    /// One IMEX step with a new-time source: solves
    /// `(I - s·σ·L_v) g^{n+1} = E g^n + s·source`, which is the exact
    /// derivative-in-`z` of the plain step when `source` is assembled from
    /// already-updated lower hierarchy levels.
    pub fn step_with_source(&self, f: &Field<T>, source: &Field<T>) -> Result<Field<T>> {
        let mut staged = self.explicit_transport(f.values());
        staged += source.values() * self.s_collision;
        let out = Field::from_matrix(&self.grid, self.implicit_collision(&staged));
        out.assert_finite()?;
        Ok(out)
    }

    /// Raw collision application `L_v f` (no scattering coefficient).
    pub fn collision_raw(&self, f: &Field<T>) -> Field<T> {
        Field::from_matrix(&self.grid, &self.lv * f.values())
    }

    pub fn velocity_collision_matrix(&self) -> &DMatrix<T> {
        &self.lv
    }
}

/// Single IMEX step assembled from scratch (convenience wrapper; repeated
/// stepping should construct a [`Stepper`] once).
pub fn step<T: Real>(
    f: &Field<T>,
    model: &CollisionModel<T>,
    sigma: &[T],
    derivative_rule: DerivativeRule,
    kn: T,
    scaling: Scaling,
    dt: T,
) -> Result<Field<T>> {
    Stepper::new(f.grid(), model, sigma, derivative_rule, kn, scaling, dt)?.step(f)
}

/// Modified entropy `H[f] = ½‖f‖² + ε⟨Af, f⟩`.
pub fn entropy<T: Real>(f: &Field<T>, a_op: &KineticOperator<T>, eps: T) -> Result<T> {
    if eps < T::zero() || eps >= T::one() {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: "must lie in [0, 1)".into(),
        });
    }
    let half = real::<T>(0.5);
    let af = a_op.apply(f)?;
    Ok(half * f.inner_product(f)? + eps * af.inner_product(f)?)
}

/// Entropy production
/// `D[f] = -⟨Lf,f⟩ + ε⟨ATΠf,f⟩ + ε⟨AT(I-Π)f,f⟩ - ε⟨ALf,f⟩ - ε⟨TAf,f⟩`.
pub fn dissipation<T: Real>(
    f: &Field<T>,
    transport: &KineticOperator<T>,
    collision: &KineticOperator<T>,
    a_op: &KineticOperator<T>,
    eps: T,
) -> Result<T> {
    if eps < T::zero() || eps >= T::one() {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: "must lie in [0, 1)".into(),
        });
    }
    let lf = collision.apply(f)?;
    let pf = f.project_pi();
    let micro = f - &pf;
    let at_pi = a_op.apply(&transport.apply(&pf)?)?;
    let at_micro = a_op.apply(&transport.apply(&micro)?)?;
    let alf = a_op.apply(&lf)?;
    let taf = transport.apply(&a_op.apply(f)?)?;
    Ok(-lf.inner_product(f)?
        + eps * at_pi.inner_product(f)?
        + eps * at_micro.inner_product(f)?
        - eps * alf.inner_product(f)?
        - eps * taf.inner_product(f)?)
}

/// Cached quadratic forms for per-step entropy/dissipation recording:
/// `H[f] = ⟨H_mat f, f⟩` and `D[f] = ⟨D_mat f, f⟩`.
pub struct EntropyMachinery<T: Real> {
    pub a_op: KineticOperator<T>,
    pub eps: T,
    h_mat: DMatrix<T>,
    d_mat: DMatrix<T>,
}

impl<T: Real> EntropyMachinery<T> {
    /// `transport` and `collision` must already carry their `1/Kn` and
    /// `1/Kn^p` factors; `A` is built from the scaled transport.
    pub fn new(
        grid: &SharedGrid<T>,
        transport: &KineticOperator<T>,
        collision: &KineticOperator<T>,
        eps: T,
    ) -> Result<Self> {
        if eps < T::zero() || eps >= T::one() {
            return Err(Error::InvalidParameter {
                name: "eps",
                reason: "must lie in [0, 1)".into(),
            });
        }
        let a_op = build_auxiliary_a(transport, grid);
        let n = grid.len();
        let half = real::<T>(0.5);
        let h_mat = DMatrix::identity(n, n) * half + a_op.matrix() * eps;

        let pi = crate::operators::build_projection(grid).matrix().clone();
        let micro = DMatrix::identity(n, n) - &pi;
        let at_pi = a_op.matrix() * transport.matrix() * &pi;
        let at_micro = a_op.matrix() * transport.matrix() * &micro;
        let al = a_op.matrix() * collision.matrix();
        let ta = transport.matrix() * a_op.matrix();
        let d_mat = -collision.matrix() + (at_pi + at_micro - al - ta) * eps;
        Ok(EntropyMachinery {
            a_op,
            eps,
            h_mat,
            d_mat,
        })
    }

    pub fn entropy(&self, f: &Field<T>) -> T {
        quadratic_form(&self.h_mat, f)
    }

    pub fn dissipation(&self, f: &Field<T>) -> T {
        quadratic_form(&self.d_mat, f)
    }
}

fn quadratic_form<T: Real>(m: &DMatrix<T>, f: &Field<T>) -> T {
    let x = DVector::from_column_slice(f.as_flat());
    let y = m * &x;
    let g = Field::from_flat(f.grid(), &y);
    g.inner_product(f).expect("same grid")
}

/// Time series of the scalar diagnostics along one run.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub times: Vec<T>,
    pub norms: Vec<T>,
    pub entropies: Vec<T>,
    pub dissipations: Vec<T>,
    pub masses: Vec<T>,
    pub fields_saved: Option<Vec<Field<T>>>,
}

/// What to record along a run.
#[derive(Debug, Clone)]
pub struct RunOptions<T: Real> {
    /// Record every `record_every`-th step (plus the initial and final
    /// states).
    pub record_every: usize,
    /// Entropy/dissipation recording requires the certificate `eps`.
    pub entropy_eps: Option<T>,
    pub save_fields: bool,
}

impl<T: Real> Default for RunOptions<T> {
    fn default() -> Self {
        RunOptions {
            record_every: 10,
            entropy_eps: None,
            save_fields: false,
        }
    }
}

/// Outcome of [`integrate`].
pub struct SolveOutput<T: Real> {
    pub grid: SharedGrid<T>,
    pub trajectory: Trajectory<T>,
    pub dt: T,
    pub steps: usize,
}

/// Integrate a scenario from its initial data to `t_end`.
pub fn integrate<T: Real>(scenario: &Scenario<T>, opts: &RunOptions<T>) -> Result<SolveOutput<T>> {
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

    let machinery = match opts.entropy_eps {
        Some(eps) => {
            let t_scaled =
                build_transport(&grid, scenario.derivative_rule).scale(T::one() / scenario.kn);
            let l_full = full_collision_operator(&grid, &scenario.model, &sigma)?
                .scale(T::one() / scenario.kn.powi(scenario.scaling.collision_exponent()));
            Some(EntropyMachinery::new(&grid, &t_scaled, &l_full, eps)?)
        }
        None => None,
    };

    let steps = steps_for(scenario.t_end, dt);
    let every = opts.record_every.max(1);

    let mut f = scenario.initial_field(&grid);
    f.assert_finite()?;
    let mut traj = Trajectory {
        times: Vec::new(),
        norms: Vec::new(),
        entropies: Vec::new(),
        dissipations: Vec::new(),
        masses: Vec::new(),
        fields_saved: opts.save_fields.then(Vec::new),
    };
    let record = |n: usize, f: &Field<T>, traj: &mut Trajectory<T>| {
        traj.times.push(dt * real_usize::<T>(n));
        traj.norms.push(f.norm());
        traj.masses.push(f.mass());
        if let Some(m) = &machinery {
            traj.entropies.push(m.entropy(f));
            traj.dissipations.push(m.dissipation(f));
        }
        if let Some(fields) = traj.fields_saved.as_mut() {
            fields.push(f.clone());
        }
    };
    record(0, &f, &mut traj);
    for n in 1..=steps {
        f = stepper.step(&f)?;
        if n % every == 0 || n == steps {
            record(n, &f, &mut traj);
        }
    }
    Ok(SolveOutput {
        grid,
        trajectory: traj,
        dt,
        steps,
    })
}

pub(crate) fn steps_for<T: Real>(t_end: T, dt: T) -> usize {
    let ratio = as_f64(t_end / dt);
    (ratio.round() as usize).max(1)
}

/// Unscaled dense operators of a scenario (the `Kn = 1` reference frame
/// the coercivity constants are measured in).
pub struct ScenarioOperators<T: Real> {
    pub grid: SharedGrid<T>,
    pub transport: KineticOperator<T>,
    pub collision: KineticOperator<T>,
    pub projection: KineticOperator<T>,
}

pub fn assemble_operators<T: Real>(scenario: &Scenario<T>) -> Result<ScenarioOperators<T>> {
    let grid = scenario.grid()?;
    let sigma = scenario.sigma_values(&grid)?;
    let transport = build_transport(&grid, scenario.derivative_rule);
    let collision = full_collision_operator(&grid, &scenario.model, &sigma)?;
    let projection = crate::operators::build_projection(&grid);
    Ok(ScenarioOperators {
        grid,
        transport,
        collision,
        projection,
    })
}

/// Full dense collision operator `σ(x)·L_v` of a scenario model.
pub fn full_collision_operator<T: Real>(
    grid: &SharedGrid<T>,
    model: &CollisionModel<T>,
    sigma: &[T],
) -> Result<KineticOperator<T>> {
    let lv = model.velocity_matrix(grid)?;
    let nv = grid.nv();
    let mut m = DMatrix::zeros(grid.len(), grid.len());
    for i in 0..grid.nx() {
        for j in 0..nv {
            for k in 0..nv {
                m[(i * nv + j, i * nv + k)] = sigma[i] * lv[(j, k)];
            }
        }
    }
    Ok(KineticOperator::from_matrix(
        m,
        OperatorRole::Collision,
        grid,
    ))
}

/// Least-squares slope of `-log‖f(t)‖` over the trailing `window` fraction
/// of the samples.
pub fn fit_decay_rate<T: Real>(times: &[T], norms: &[T], window: T) -> Result<T> {
    if window <= T::zero() || window > T::one() {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: "must lie in (0, 1]".into(),
        });
    }
    if times.len() != norms.len() {
        return Err(Error::InvalidParameter {
            name: "norms",
            reason: "length mismatch with times".into(),
        });
    }
    let len = times.len();
    let take = ((as_f64(window) * len as f64).ceil() as usize).clamp(1, len);
    let start = len - take;
    let t = &times[start..];
    let n = &norms[start..];
    if t.len() < 4 {
        return Err(Error::FitWindowTooSmall(t.len()));
    }
    if n.iter().any(|&v| v <= T::zero()) {
        return Err(Error::NonPositiveNorms);
    }
    let count = real_usize::<T>(t.len());
    let mut tbar = T::zero();
    let mut ybar = T::zero();
    let ys: Vec<T> = n.iter().map(|&v| -v.ln()).collect();
    for k in 0..t.len() {
        tbar += t[k];
        ybar += ys[k];
    }
    tbar /= count;
    ybar /= count;
    let mut num = T::zero();
    let mut den = T::zero();
    for k in 0..t.len() {
        num += (t[k] - tbar) * (ys[k] - ybar);
        den += (t[k] - tbar) * (t[k] - tbar);
    }
    if den <= T::zero() {
        return Err(Error::FitWindowTooSmall(t.len()));
    }
    Ok(num / den)
}

/// Decay rate of the slowest non-equilibrium mode of the scaled generator
/// `L/Kn^p - T/Kn`, by a dense eigensolve.
pub fn spectral_decay_rate<T: Real>(
    transport_scaled: &KineticOperator<T>,
    collision_scaled: &KineticOperator<T>,
) -> T {
    let gen = collision_scaled.matrix() - transport_scaled.matrix();
    let schur = gen
        .clone()
        .try_schur(real::<T>(1e-12), 100_000)
        .expect("Schur iteration converged");
    let eigs = schur.complex_eigenvalues();
    let max_mag = eigs
        .iter()
        .fold(T::zero(), |acc, e| acc.max(e.norm_sqr().sqrt()));
    let cutoff = real::<T>(1e-8) * max_mag;
    let mut slowest = T::max_value().unwrap();
    for e in eigs.iter() {
        let mag = e.norm_sqr().sqrt();
        if mag > cutoff {
            slowest = slowest.min(-e.re);
        }
    }
    slowest
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::build_grid;
    use approx::assert_relative_eq;

    const TAU: f64 = 2.0 * std::f64::consts::PI;

    fn mini_scenario() -> Scenario<f64> {
        Scenario {
            nx: 16,
            nv: 8,
            t_end: 2.0,
            ..Scenario::default_bgk()
        }
    }

    #[test]
    fn pure_collision_decays_like_the_implicit_euler_solution() {
        // T = 0: use a constant-in-x micro mode so transport plays no role.
        let g = build_grid(8, TAU, 8, VelocityRule::GaussHermite).unwrap();
        let sigma = vec![1.0; 8];
        let dt = 1e-3;
        let stepper = Stepper::new(
            &g,
            &CollisionModel::Bgk,
            &sigma,
            DerivativeRule::Spectral,
            1.0,
            Scaling::Kinetic,
            dt,
        )
        .unwrap();
        let mut f = Field::from_fn(&g, |_, v| {
            v * (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt()
        });
        let n0 = f.norm();

        // One step: within 1e-6 of the exact exponential.
        f = stepper.step(&f).unwrap();
        assert!((f.norm() - (-dt_f(dt)).exp() * n0).abs() <= 1e-6 * n0);

        // Long run: matches the exact implicit-Euler sequence to rounding.
        let steps = 1000;
        for _ in 1..steps {
            f = stepper.step(&f).unwrap();
        }
        let expected = (1.0 + dt).powi(-(steps as i32)) * n0;
        assert_relative_eq!(f.norm(), expected, epsilon = 1e-11);
        // And within the first-order error bound of e^{-t}.
        let t = steps as f64 * dt;
        assert!((f.norm() - (-t).exp() * n0).abs() <= 0.6 * t * dt * (-t).exp() * n0);
    }

    fn dt_f(dt: f64) -> f64 {
        dt
    }

    #[test]
    fn zero_operators_leave_the_field_unchanged() {
        // L has sigma ~ tiny and f in the null space; with a constant-in-x
        // field the transport also vanishes, so the step is the identity.
        let g = build_grid(8, TAU, 8, VelocityRule::GaussHermite).unwrap();
        let stepper = Stepper::new(
            &g,
            &CollisionModel::Bgk,
            &vec![1.0; 8],
            DerivativeRule::Spectral,
            1.0,
            Scaling::Kinetic,
            1e-3,
        )
        .unwrap();
        let f = Field::from_fn(&g, |_, v| {
            (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt()
        });
        let f1 = stepper.step(&f).unwrap();
        assert!((&f1 - &f).norm() <= 1e-13 * f.norm());
    }

    #[test]
    fn step_conserves_mass() {
        let sc = mini_scenario();
        let g = sc.grid().unwrap();
        let sigma = sc.sigma_values(&g).unwrap();
        let dt = sc.effective_dt(&g).unwrap();
        let stepper = Stepper::new(
            &g,
            &sc.model,
            &sigma,
            sc.derivative_rule,
            sc.kn,
            sc.scaling,
            dt,
        )
        .unwrap();
        let mut f = Field::random_seeded(&g, 3);
        let mut prev = f.mass();
        for _ in 0..200 {
            f = stepper.step(&f).unwrap();
            let m = f.mass();
            assert!((m - prev).abs() <= 1e-13, "mass drift {}", (m - prev).abs());
            prev = m;
        }
    }

    #[test]
    fn stability_bound_is_enforced() {
        let sc = mini_scenario();
        let g = sc.grid().unwrap();
        let bound = sc.stability_bound(&g);
        let err = Stepper::new(
            &g,
            &sc.model,
            &sc.sigma_values(&g).unwrap(),
            sc.derivative_rule,
            sc.kn,
            sc.scaling,
            bound * 2.0,
        );
        match err {
            Err(Error::StabilityBound { dt, bound: b }) => {
                assert!(dt > b);
            }
            Ok(_) => panic!("expected stability error"),
            Err(e) => panic!("expected stability error, got {e}"),
        }
    }

    #[test]
    fn integrate_records_monotone_entropy_and_constant_mass() {
        let mut sc = mini_scenario();
        sc.t_end = 3.0;
        let g = sc.grid().unwrap();
        let sigma = sc.sigma_values(&g).unwrap();
        let t_op = build_transport(&g, sc.derivative_rule);
        let l_op = full_collision_operator(&g, &sc.model, &sigma).unwrap();
        let constants = crate::operators::CoercivityConstants::measure(&t_op, &l_op).unwrap();
        let plan = crate::rates::RatePlan::build(&constants, sc.kn, sc.scaling).unwrap();

        let out = integrate(
            &sc,
            &RunOptions {
                record_every: 1,
                entropy_eps: Some(plan.eps0),
                save_fields: false,
            },
        )
        .unwrap();
        let tr = &out.trajectory;
        assert_eq!(tr.times.len(), tr.entropies.len());
        for k in 1..tr.entropies.len() {
            assert!(
                tr.entropies[k] <= tr.entropies[k - 1] + 1e-10,
                "entropy increased at step {k}"
            );
        }
        for &m in &tr.masses {
            assert!((m - tr.masses[0]).abs() <= 1e-12);
        }
        // Hypocoercive envelope with the certificate.
        let n0 = tr.norms[0];
        for (k, &t) in tr.times.iter().enumerate() {
            let envelope = plan.c_eps * (-(plan.lambda_lower - 0.01) * t).exp() * n0;
            assert!(
                tr.norms[k] <= envelope * (1.0 + 1e-12),
                "decay envelope violated at t={t}"
            );
        }
        // Fitted rate at least the certificate.
        let fitted = fit_decay_rate(&tr.times, &tr.norms, 0.5).unwrap();
        assert!(fitted >= plan.lambda_lower - 0.01);
    }

    #[test]
    fn entropy_equivalence_and_dissipation_signs() {
        let sc = mini_scenario();
        let g = sc.grid().unwrap();
        let sigma = sc.sigma_values(&g).unwrap();
        let t_op = build_transport(&g, sc.derivative_rule);
        let l_op = full_collision_operator(&g, &sc.model, &sigma).unwrap();
        let a_op = build_auxiliary_a(&t_op, &g);
        let eps = 0.25;
        for seed in 0..100 {
            let f = Field::random_seeded(&g, seed);
            let h = entropy(&f, &a_op, eps).unwrap();
            let n2 = f.inner_product(&f).unwrap();
            assert!(0.5 * (1.0 - eps) * n2 - 1e-12 <= h);
            assert!(h <= 0.5 * (1.0 + eps) * n2 + 1e-12);
        }
        // eps = 0 reduces the dissipation to -<Lf, f> >= 0.
        for seed in 0..20 {
            let f = Field::random_seeded(&g, seed);
            let d0 = dissipation(&f, &t_op, &l_op, &a_op, 0.0).unwrap();
            assert!(d0 >= -1e-12);
            assert_relative_eq!(
                d0,
                -l_op.apply(&f).unwrap().inner_product(&f).unwrap(),
                epsilon = 1e-12
            );
        }
        // Equilibrium state: every term vanishes.
        let eq = crate::phase_space::Equilibrium::new(&g);
        let d_eq = dissipation(&eq.field, &t_op, &l_op, &a_op, eps).unwrap();
        assert!(d_eq.abs() <= 1e-12);
        assert!(entropy(&Field::zeros(&g), &a_op, eps).unwrap() == 0.0);

        // Cached machinery agrees with the five-term form.
        let machinery = EntropyMachinery::new(&g, &t_op, &l_op, eps).unwrap();
        for seed in 0..20 {
            let f = Field::random_seeded(&g, seed);
            assert_relative_eq!(
                machinery.entropy(&f),
                entropy(&f, &machinery.a_op, eps).unwrap(),
                epsilon = 1e-11,
                max_relative = 1e-12
            );
            assert_relative_eq!(
                machinery.dissipation(&f),
                dissipation(&f, &t_op, &l_op, &machinery.a_op, eps).unwrap(),
                max_relative = 1e-9,
                epsilon = 1e-11
            );
        }
    }

    #[test]
    fn decay_fit_recovers_exact_exponentials() {
        let times: Vec<f64> = (0..501).map(|k| k as f64 * 0.01).collect();
        let norms: Vec<f64> = times.iter().map(|&t| (-2.0 * t).exp()).collect();
        assert_relative_eq!(
            fit_decay_rate(&times, &norms, 1.0).unwrap(),
            2.0,
            epsilon = 1e-10
        );
        let norms3: Vec<f64> = times.iter().map(|&t| 3.0 * (-0.5 * t).exp()).collect();
        assert_relative_eq!(
            fit_decay_rate(&times, &norms3, 0.5).unwrap(),
            0.5,
            epsilon = 1e-10
        );
        assert!(matches!(
            fit_decay_rate(&times[..3], &norms[..3], 1.0),
            Err(Error::FitWindowTooSmall(_))
        ));
        let bad = vec![1.0, 0.5, 0.0, -0.1, 0.2];
        let ts = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        assert!(matches!(
            fit_decay_rate(&ts, &bad, 1.0),
            Err(Error::NonPositiveNorms)
        ));
    }

    #[test]
    fn certificate_stays_below_the_spectral_rate() {
        let sc = mini_scenario();
        let g = sc.grid().unwrap();
        let sigma = sc.sigma_values(&g).unwrap();
        let t_op = build_transport(&g, sc.derivative_rule);
        let l_op = full_collision_operator(&g, &sc.model, &sigma).unwrap();
        let constants = crate::operators::CoercivityConstants::measure(&t_op, &l_op).unwrap();
        let plan = crate::rates::RatePlan::build(&constants, sc.kn, sc.scaling).unwrap();
        let rate = spectral_decay_rate(&t_op, &l_op);
        assert!(
            plan.lambda_lower <= rate + 1e-8,
            "certificate {} exceeds spectral rate {rate}",
            plan.lambda_lower
        );
    }
}
