//! Runnable acceptance checks: every theorem-level claim the crate
//! implements is verified here at desk scale, one criterion per check.
//! The CLI `verify` subcommand and the acceptance test suite both drive
//! these functions.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::operators::{build_auxiliary_a, check_assumptions, CoercivityConstants};
use crate::phase_space::Field;
use crate::rates::{
    c_const, lambda_numeric, lambda_of_eps, lower_bound_highfield, lower_bound_parabolic, rescale,
    RatePlan, Scaling,
};
use crate::scalar::{as_f64, Real};
use crate::solver::{
    assemble_operators, fit_decay_rate, integrate, spectral_decay_rate, RunOptions, Scenario,
};
use crate::uq::{
    bound_kn, cascade_eta_bound, cascade_eta_exact, cascade_hl_bound, collocation_derivatives,
    estimate_radius, jordan_cascade, solve_hierarchy, HierarchyOptions, SigmaKind, SigmaModel,
    TheoremConstants,
};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:2} [{}] {} ({:.2}s / limit {:.0}s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs_f64(),
            self.detail
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub results: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }
}

fn run_criterion(
    id: usize,
    name: &'static str,
    limit_secs: f64,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionResult {
    let start = Instant::now();
    let (passed, detail) = match body() {
        Ok(pair) => pair,
        Err(e) => (false, format!("error: {e}")),
    };
    let elapsed = start.elapsed();
    let limit = Duration::from_secs_f64(limit_secs);
    let within_budget = elapsed <= limit;
    CriterionResult {
        id,
        name,
        passed: passed && within_budget,
        detail: if within_budget {
            detail
        } else {
            format!("{detail}; RUNTIME over budget")
        },
        elapsed,
        limit,
    }
}

/// Criterion 1: structural assumptions certified on both default models.
pub fn criterion_assumptions<T: Real>(bgk: &Scenario<T>, aniso: &Scenario<T>) -> CriterionResult {
    run_criterion(1, "assumption certification", 5.0, || {
        let mut passed = true;
        let mut details = Vec::new();
        for (label, sc) in [("bgk", bgk), ("aniso", aniso)] {
            let ops = assemble_operators(sc)?;
            let report = check_assumptions(&ops.transport, &ops.collision, &ops.projection);
            passed &= report.all_ok();
            details.push(format!(
                "{label}: |T+T*|={:.1e} |L-L*|={:.1e} |PiTPi|={:.1e} alpha={:.3} beta={:.3} gamma={:.3}",
                as_f64(report.transport_skew_residual),
                as_f64(report.collision_symmetry_residual),
                as_f64(report.pi_t_pi_norm),
                report.alpha.map(as_f64).unwrap_or(f64::NAN),
                report.beta.map(as_f64).unwrap_or(f64::NAN),
                as_f64(report.gamma),
            ));
            if !report.all_ok() {
                details.push(format!("{label} failures: {:?}", report.failures()));
            }
        }
        Ok((passed, details.join("; ")))
    })
}

/// Criterion 2: both explicit lower bounds never exceed the numeric
/// maximum on 1000 random triples, and the arithmetic spot values
/// reproduce.
pub fn criterion_bound_domination<T: Real>() -> CriterionResult {
    run_criterion(2, "rate bound domination", 5.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
        let mut max_excess = 0.0f64;
        for _ in 0..1000 {
            let a = crate::scalar::real::<T>(rng.random_range(0.1..10.0));
            let c = crate::scalar::real::<T>(rng.random_range(0.1..10.0));
            let d = crate::scalar::real::<T>(rng.random_range(0.1..10.0));
            let (lam, _) = lambda_numeric(a, c, d)?;
            let pb = lower_bound_parabolic(a, c, d)?;
            let hf = lower_bound_highfield(a, c, d)?;
            if pb.eps0 >= T::one() || hf.eps0 >= T::one() {
                return Ok((false, "eps0 >= 1".into()));
            }
            max_excess = max_excess
                .max(as_f64(pb.lambda_lb - lam))
                .max(as_f64(hf.lambda_lb - lam));
        }

        let one = T::one();
        let pb = lower_bound_parabolic(one, one, one)?;
        let spot_pb = (as_f64(pb.lambda_lb) - 1.0 / 15.0).abs();
        let hf1 = lower_bound_highfield(one, one, one)?;
        let hf1_oracle = (0.5 / 1.25) / (2.0 * (1.5 + 1.25f64.sqrt()));
        let spot_hf1 = (as_f64(hf1.lambda_lb) - hf1_oracle).abs();
        let hf2 = lower_bound_highfield(crate::scalar::real::<T>(10.0), one, one)?;
        let hf2_oracle = (1.0 / 3.0) / (9.5 + (8.5f64 * 8.5 + 1.0).sqrt());
        let spot_hf2 = (as_f64(hf2.lambda_lb) - hf2_oracle).abs();

        let passed = max_excess <= 1e-10
            && spot_pb <= 1e-6
            && spot_hf1 <= 1e-6
            && spot_hf2 <= 1e-6
            && (hf1_oracle - 0.0764).abs() < 1e-4
            && (hf2_oracle - 0.01846).abs() < 1e-4;
        Ok((
            passed,
            format!(
                "max bound excess {max_excess:.2e}; spot |1/15| {spot_pb:.1e}, \
                 |hf1| {spot_hf1:.1e}, |hf2| {spot_hf2:.1e}"
            ),
        ))
    })
}

/// Criterion 3: Knudsen-number uniformity of the certificates.
///
/// Parabolic: the explicit lower bound itself stays within a factor 3 of
/// its `Kn = 1` value across the sweep. High field: the displayed relaxed
/// branch-2 value shrinks linearly in `Kn` by construction, so the
/// uniformity claim is checked on the exact certificate rate
/// `lambda(eps0)` evaluated in closed form: it never drops below a third
/// of its `Kn = 1` value and stays bounded by 1 across the sweep.
/// `eps0 < 1` is required throughout.
pub fn criterion_kn_uniformity<T: Real>() -> CriterionResult {
    run_criterion(3, "Kn-uniformity of certificates", 1.0, || {
        let constants = CoercivityConstants::<T>::new(T::one(), T::one(), T::one())?;
        let kns = [1.0, 0.1, 0.01, 0.001];

        let mut passed = true;
        let mut para_vals = Vec::new();
        let mut hf_vals = Vec::new();
        for &kn_f in &kns {
            let kn = crate::scalar::real::<T>(kn_f);
            let sp = rescale(&constants, kn, Scaling::Parabolic)?;
            let pb = lower_bound_parabolic(sp.derived.a, sp.derived.c, sp.derived.d)?;
            passed &= pb.eps0 < T::one();
            para_vals.push(as_f64(pb.lambda_lb));

            let sh = rescale(&constants, kn, Scaling::HighField)?;
            let hf = lower_bound_highfield(sh.derived.a, sh.derived.c, sh.derived.d)?;
            passed &= hf.eps0 < T::one();
            let exact = lambda_of_eps(sh.derived.a, sh.derived.c, sh.derived.d, hf.eps0)?.value;
            hf_vals.push(as_f64(exact));
        }
        let para_base = para_vals[0];
        for &v in &para_vals {
            passed &= v >= para_base / 3.0 && v <= 3.0 * para_base;
        }
        let hf_base = hf_vals[0];
        for &v in &hf_vals {
            passed &= v >= hf_base / 3.0 && v <= 1.0;
        }
        Ok((
            passed,
            format!("parabolic bound {para_vals:.3?}; highfield lambda(eps0) {hf_vals:.3?}"),
        ))
    })
}

/// Outcome of one decay run against its certificate.
struct DecayCheck {
    envelope_ok: bool,
    fitted: f64,
    lambda_lower: f64,
    spectral_ok: bool,
    mass_ok: bool,
}

fn decay_check<T: Real>(
    scenario: &Scenario<T>,
    constants: &CoercivityConstants<T>,
    with_spectral: bool,
) -> Result<DecayCheck> {
    let plan = RatePlan::build(constants, scenario.kn, scenario.scaling)?;
    let out = integrate(
        scenario,
        &RunOptions {
            record_every: 10,
            entropy_eps: None,
            save_fields: false,
        },
    )?;
    let tr = &out.trajectory;
    let n0 = tr.norms[0];
    let mut envelope_ok = true;
    for (k, &t) in tr.times.iter().enumerate() {
        let env = plan.c_eps
            * (-(plan.lambda_lower - crate::scalar::real::<T>(0.01)) * t).exp()
            * n0;
        if tr.norms[k] > env * (T::one() + crate::scalar::real::<T>(1e-12)) {
            envelope_ok = false;
        }
    }
    let mass_ok = tr
        .masses
        .iter()
        .all(|&m| (m - tr.masses[0]).abs() <= crate::scalar::real::<T>(1e-12));

    // Truncate underflowed tails before fitting.
    let floor = crate::scalar::real::<T>(1e-280);
    let cut = tr
        .norms
        .iter()
        .position(|&n| n <= floor)
        .unwrap_or(tr.norms.len());
    let fitted = fit_decay_rate(
        &tr.times[..cut],
        &tr.norms[..cut],
        crate::scalar::real::<T>(0.5),
    )?;

    let spectral_ok = if with_spectral {
        let ops = assemble_operators(scenario)?;
        let p = scenario.scaling.collision_exponent();
        let t_scaled = ops.transport.scale(T::one() / scenario.kn);
        let l_scaled = ops.collision.scale(T::one() / scenario.kn.powi(p));
        let rate = spectral_decay_rate(&t_scaled, &l_scaled);
        plan.lambda_lower <= rate + crate::scalar::real::<T>(1e-8)
    } else {
        true
    };

    Ok(DecayCheck {
        envelope_ok,
        fitted: as_f64(fitted),
        lambda_lower: as_f64(plan.lambda_lower),
        spectral_ok,
        mass_ok,
    })
}

/// Criterion 4: hypocoercive decay of the default scenario at `Kn = 1`.
pub fn criterion_hypocoercive_decay<T: Real>(bgk: &Scenario<T>) -> CriterionResult {
    run_criterion(4, "hypocoercive decay (Kn = 1)", 30.0, || {
        let ops = assemble_operators(bgk)?;
        let constants = CoercivityConstants::measure(&ops.transport, &ops.collision)?;
        let check = decay_check(bgk, &constants, true)?;
        let passed = check.envelope_ok
            && check.spectral_ok
            && check.mass_ok
            && check.fitted >= check.lambda_lower - 0.01;
        Ok((
            passed,
            format!(
                "lambda_lower {:.4}, fitted {:.4}, envelope {}, spectral {}, mass {}",
                check.lambda_lower,
                check.fitted,
                check.envelope_ok,
                check.spectral_ok,
                check.mass_ok
            ),
        ))
    })
}

/// Criterion 5: decay bounds hold uniformly at small Knudsen numbers with
/// the analytically rescaled certificates.
pub fn criterion_uniform_in_kn_decay<T: Real + Send + Sync>(bgk: &Scenario<T>) -> CriterionResult {
    run_criterion(5, "uniform-in-Kn decay", 60.0, || {
        let ops = assemble_operators(bgk)?;
        let constants = CoercivityConstants::measure(&ops.transport, &ops.collision)?;
        let cases: Vec<(f64, Scaling)> = vec![
            (0.1, Scaling::Parabolic),
            (0.01, Scaling::Parabolic),
            (0.1, Scaling::HighField),
            (0.01, Scaling::HighField),
        ];
        let checks: Result<Vec<(f64, Scaling, DecayCheck)>> = cases
            .par_iter()
            .map(|&(kn_f, scaling)| {
                let mut sc = bgk.clone();
                sc.kn = crate::scalar::real::<T>(kn_f);
                sc.scaling = scaling;
                sc.dt = None;
                let check = decay_check(&sc, &constants, true)?;
                Ok((kn_f, scaling, check))
            })
            .collect();
        let checks = checks?;
        let mut passed = true;
        let mut details = Vec::new();
        for (kn, scaling, check) in &checks {
            let ok = check.envelope_ok
                && check.spectral_ok
                && check.mass_ok
                && check.fitted >= check.lambda_lower - 0.01;
            passed &= ok;
            details.push(format!(
                "Kn={kn} {scaling}: lb {:.4} fitted {:.3} {}",
                check.lambda_lower,
                check.fitted,
                if ok { "ok" } else { "FAIL" }
            ));
        }
        Ok((passed, details.join("; ")))
    })
}

/// Criterion 6: per-step entropy monotonicity and first-order consistency
/// of the entropy/dissipation pair under time-step refinement.
pub fn criterion_entropy_consistency<T: Real>(bgk: &Scenario<T>) -> CriterionResult {
    run_criterion(6, "entropy/dissipation consistency", 10.0, || {
        let ops = assemble_operators(bgk)?;
        let constants = CoercivityConstants::measure(&ops.transport, &ops.collision)?;
        let plan = RatePlan::build(&constants, bgk.kn, bgk.scaling)?;

        let mut sc = bgk.clone();
        sc.t_end = crate::scalar::real::<T>(3.0);
        let out = integrate(
            &sc,
            &RunOptions {
                record_every: 1,
                entropy_eps: Some(plan.eps0),
                save_fields: false,
            },
        )?;
        let tr = &out.trajectory;
        let slack = crate::scalar::real::<T>(1e-10);
        let mut monotone = true;
        for k in 1..tr.entropies.len() {
            if tr.entropies[k] > tr.entropies[k - 1] + slack {
                monotone = false;
            }
        }

        // Richardson check of dH/dt = -D at a fixed time: the defect is
        // first order in dt, so halving dt must shrink it by >= 1.8.
        let defect = |dt_scale: f64| -> Result<f64> {
            let mut s = sc.clone();
            let grid = s.grid()?;
            let base_dt = s.effective_dt(&grid)?;
            s.t_end = crate::scalar::real::<T>(1.0);
            s.dt = Some(base_dt * crate::scalar::real::<T>(dt_scale));
            let out = integrate(
                &s,
                &RunOptions {
                    record_every: 1,
                    entropy_eps: Some(plan.eps0),
                    save_fields: false,
                },
            )?;
            let tr = &out.trajectory;
            // step index closest to t* = 0.5
            let t_star = 0.5;
            let dt = as_f64(out.dt);
            let k = ((t_star / dt).round() as usize).min(tr.entropies.len() - 2);
            let dh = as_f64(tr.entropies[k + 1] - tr.entropies[k]) / dt;
            Ok((dh + as_f64(tr.dissipations[k])).abs())
        };
        let d1 = defect(1.0)?;
        let d2 = defect(0.5)?;
        let ratio = d1 / d2;
        let passed = monotone && ratio >= 1.8;
        Ok((
            passed,
            format!("monotone {monotone}; defect {d1:.2e} -> {d2:.2e}, ratio {ratio:.2}"),
        ))
    })
}

/// Criterion 7: mass conservation across representative runs.
pub fn criterion_mass_conservation<T: Real>(
    bgk: &Scenario<T>,
    aniso: &Scenario<T>,
) -> CriterionResult {
    run_criterion(7, "mass conservation", 30.0, || {
        let mut passed = true;
        let mut worst = 0.0f64;
        let mut small_kn = bgk.clone();
        small_kn.kn = crate::scalar::real::<T>(0.1);
        small_kn.scaling = Scaling::Parabolic;
        for sc in [bgk, aniso, &small_kn] {
            let out = integrate(
                sc,
                &RunOptions {
                    record_every: 1,
                    entropy_eps: None,
                    save_fields: false,
                },
            )?;
            let m0 = out.trajectory.masses[0];
            for &m in &out.trajectory.masses {
                let drift = as_f64((m - m0).abs());
                worst = worst.max(drift);
                if drift > 1e-12 {
                    passed = false;
                }
            }
        }
        Ok((passed, format!("worst |M(t)-M(0)| = {worst:.2e}")))
    })
}

/// Criterion 8: the scalar cascade oracles.
pub fn criterion_cascade_oracles<T: Real>() -> CriterionResult {
    run_criterion(8, "cascade oracles", 5.0, || {
        let mut passed = true;
        let mut notes = Vec::new();

        // RK4 on the equality cascades (f64 arithmetic, independent path).
        let rk4 = |rhs: &dyn Fn(&[f64]) -> Vec<f64>, y0: &[f64], t: f64, steps: usize| {
            let h = t / steps as f64;
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
        };

        let (lam, c1t, c2t) = (0.85, 1.2, 0.9);
        let lmax = 8usize;
        let h0: Vec<f64> = (0..=lmax).map(|l| 1.0 / (1.0 + l as f64)).collect();
        let mut worst_h = 0.0f64;
        let mut worst_eta = 0.0f64;
        for &t in &[0.5, 2.0, 5.0] {
            let rhs_h = |y: &[f64]| {
                (0..y.len())
                    .map(|l| {
                        -lam * y[l] + if l > 0 { c1t * l as f64 * y[l - 1] } else { 0.0 }
                    })
                    .collect::<Vec<_>>()
            };
            let yh = rk4(&rhs_h, &h0, t, 20_000);
            for l in 0..=lmax {
                let formula = as_f64(cascade_hl_bound(
                    crate::scalar::real::<T>(t),
                    l,
                    crate::scalar::real::<T>(c1t),
                    crate::scalar::real::<T>(lam),
                    &h0.iter()
                        .map(|&x| crate::scalar::real::<T>(x))
                        .collect::<Vec<_>>(),
                )?);
                worst_h = worst_h.max((yh[l] - formula).abs() / (1.0 + formula.abs()));
            }

            let rhs_eta = |y: &[f64]| {
                (0..y.len())
                    .map(|l| {
                        if l == 0 {
                            0.0
                        } else {
                            c2t * y[..l].iter().sum::<f64>()
                        }
                    })
                    .collect::<Vec<_>>()
            };
            let eta0: Vec<f64> = (0..=lmax).map(|l| 0.4 + 0.05 * l as f64).collect();
            let ye = rk4(&rhs_eta, &eta0, t, 20_000);
            let exact = cascade_eta_exact(
                crate::scalar::real::<T>(t),
                lmax,
                crate::scalar::real::<T>(c2t),
                &eta0
                    .iter()
                    .map(|&x| crate::scalar::real::<T>(x))
                    .collect::<Vec<_>>(),
            )?;
            for l in 0..=lmax {
                let ex = as_f64(exact[l]);
                worst_eta = worst_eta.max((ye[l] - ex).abs() / (1.0 + ex.abs()));
            }
        }
        passed &= worst_h <= 1e-8 && worst_eta <= 1e-8;
        notes.push(format!("rk4 vs formulas: h {worst_h:.1e}, eta {worst_eta:.1e}"));

        // Jordan chain identity up to order 12.
        let mut worst_jordan = 0.0f64;
        for l in 0..=12 {
            let j = jordan_cascade::<T>(l)?;
            let res = &j.a * &j.s - &j.s * &j.j;
            let m = res.iter().fold(0.0f64, |acc, v| acc.max(as_f64(v.abs())));
            worst_jordan = worst_jordan.max(m);
        }
        passed &= worst_jordan <= 1e-9;
        notes.push(format!("|A·S - S·J| {worst_jordan:.1e}"));

        // exact <= sharp <= both relaxations on the full grid.
        let mut order_ok = true;
        for l in 0..=10usize {
            let fact = crate::uq::factorials_f64(l.max(1));
            for &h in &[0.0f64, 1.0] {
                let eta0: Vec<T> = (0..=l)
                    .map(|m| crate::scalar::real::<T>(h.powi(m as i32) / fact[m]))
                    .collect();
                for k in 0..=10 {
                    let t = crate::scalar::real::<T>(0.5 * k as f64);
                    let exact = cascade_eta_exact(t, l, crate::scalar::real::<T>(1.3), &eta0)?;
                    let b = cascade_eta_bound(
                        t,
                        l,
                        crate::scalar::real::<T>(1.3),
                        crate::scalar::real::<T>(h),
                    )?;
                    let tol = crate::scalar::real::<T>(1e-12);
                    if exact[l] > b.sharp * (T::one() + tol) + tol
                        || b.sharp > b.relaxed_poly + tol
                        || b.sharp > b.relaxed_exp + tol
                    {
                        order_ok = false;
                    }
                }
            }
        }
        passed &= order_ok;
        notes.push(format!("exact<=sharp<=relaxed: {order_ok}"));
        Ok((passed, notes.join("; ")))
    })
}

/// One hierarchy scenario checked against its theorem bound.
fn hierarchy_bound_check<T: Real + Send + Sync>(
    base: &Scenario<T>,
    kind: SigmaKind,
    kn_f: f64,
    scaling: Scaling,
    constants: &CoercivityConstants<T>,
    lmax: usize,
) -> Result<(usize, Vec<Vec<T>>, Vec<T>)> {
    let mut sc = base.clone();
    sc.kn = crate::scalar::real::<T>(kn_f);
    sc.scaling = scaling;
    sc.dt = None;
    let plan = RatePlan::build(constants, sc.kn, sc.scaling)?;
    let tc = TheoremConstants::from_rate(
        plan.lambda_lower,
        plan.eps0,
        sc.sigma.c1(),
        sc.sigma.c2(),
        T::zero(),
    );
    let hier = solve_hierarchy(
        &sc,
        lmax,
        &HierarchyOptions {
            record_every: 20,
            save_fields: false,
            h0: T::zero(),
        },
    )?;
    let fact = crate::uq::factorials_f64(lmax);
    let mut violations = 0usize;
    for (k, &t) in hier.times.iter().enumerate() {
        for l in 0..=lmax {
            let bound = bound_kn(t, l, &tc, kind, sc.kn, sc.scaling)?;
            let measured = match kind {
                SigmaKind::Affine => hier.norms[k][l],
                SigmaKind::Analytic => {
                    hier.norms[k][l] / crate::scalar::real::<T>(fact[l])
                }
            };
            if measured > bound * (T::one() + crate::scalar::real::<T>(1e-9)) {
                violations += 1;
            }
        }
    }
    Ok((violations, hier.norms, hier.times))
}

/// Criterion 9: derivative bounds for both sigma models at `Kn ∈ {1, 0.1}`
/// in the kinetic, parabolic, and high-field scalings, plus the uniform
/// exponential decay of the low-order derivatives.
pub fn criterion_derivative_bounds<T: Real + Send + Sync>(
    bgk_affine: &Scenario<T>,
) -> CriterionResult {
    run_criterion(9, "derivative bounds", 60.0, || {
        let lmax = 5usize;
        let mut analytic = bgk_affine.clone();
        analytic.sigma = SigmaModel::default_analytic(analytic.nx);

        let ops = assemble_operators(bgk_affine)?;
        let constants_affine =
            CoercivityConstants::measure(&ops.transport, &ops.collision)?;
        let ops_a = assemble_operators(&analytic)?;
        let constants_analytic =
            CoercivityConstants::measure(&ops_a.transport, &ops_a.collision)?;

        let cases: Vec<(SigmaKind, f64, Scaling)> = vec![
            (SigmaKind::Affine, 1.0, Scaling::Kinetic),
            (SigmaKind::Affine, 0.1, Scaling::Parabolic),
            (SigmaKind::Affine, 0.1, Scaling::HighField),
            (SigmaKind::Analytic, 1.0, Scaling::Kinetic),
            (SigmaKind::Analytic, 0.1, Scaling::Parabolic),
            (SigmaKind::Analytic, 0.1, Scaling::HighField),
        ];
        let runs: Result<Vec<_>> = cases
            .par_iter()
            .map(|&(kind, kn, scaling)| {
                let (base, constants) = match kind {
                    SigmaKind::Affine => (bgk_affine, &constants_affine),
                    SigmaKind::Analytic => (&analytic, &constants_analytic),
                };
                let out = hierarchy_bound_check(base, kind, kn, scaling, constants, lmax)?;
                Ok((kind, kn, scaling, out))
            })
            .collect();
        let runs = runs?;

        let mut passed = true;
        let mut details = Vec::new();
        let mut kinetic_norms: Vec<(SigmaKind, Vec<Vec<T>>, Vec<T>)> = Vec::new();
        for (kind, kn, scaling, (violations, norms, times)) in runs {
            passed &= violations == 0;
            details.push(format!(
                "{kind:?} Kn={kn} {scaling}: {violations} violations"
            ));
            if kn == 1.0 {
                kinetic_norms.push((kind, norms, times));
            }
        }

        // Uniform decay: fitted rate of ‖g_l‖ over the trailing half at
        // Kn = 1 must reach the uniform-in-z certificate.
        let z_nodes = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let mut node_constants = Vec::new();
        for &z in &z_nodes {
            let mut sc = bgk_affine.clone();
            sc.z0 = crate::scalar::real::<T>(z);
            let ops = assemble_operators(&sc)?;
            node_constants.push(CoercivityConstants::measure(&ops.transport, &ops.collision)?);
        }
        let lambda_bar = crate::rates::uniform_rate_over_z(
            &node_constants,
            T::one(),
            Scaling::Kinetic,
        )?;
        let mut worst_fit = f64::INFINITY;
        for (_, norms, times) in &kinetic_norms {
            for l in 0..=3usize {
                let series: Vec<T> = norms.iter().map(|row| row[l]).collect();
                let start = series.iter().position(|&n| n > T::zero()).unwrap_or(0);
                let fitted = fit_decay_rate(
                    &times[start..],
                    &series[start..],
                    crate::scalar::real::<T>(0.5),
                )?;
                worst_fit = worst_fit.min(as_f64(fitted));
                if fitted < lambda_bar - crate::scalar::real::<T>(0.02) {
                    passed = false;
                }
            }
        }
        details.push(format!(
            "uniform rate {:.4}, worst fitted {worst_fit:.4}",
            as_f64(lambda_bar)
        ));
        Ok((passed, details.join("; ")))
    })
}

/// Criterion 10: convergence-radius proxy.
pub fn criterion_radius_proxy<T: Real + Send + Sync>(bgk_affine: &Scenario<T>) -> CriterionResult {
    run_criterion(10, "convergence-radius proxy", 5.0, || {
        // Bound-shaped sequence with H = 1 must give 1/4.
        let h = 1.0f64;
        let fact = crate::uq::factorials_f64(20);
        let seq: Vec<T> = (0..=20)
            .map(|l| {
                crate::scalar::real::<T>(
                    2.0f64.powi(l as i32 - 1) * (1.0 + h).powi(l as i32 + 1) * fact[l],
                )
            })
            .collect();
        let proxy = estimate_radius(&seq, 20)?;
        let mut passed = (as_f64(proxy) - 0.25).abs() <= 0.02;
        let mut details = vec![format!("bound-shaped sequence: {:.4}", as_f64(proxy))];

        // Measured sequences (H = 0): sup-in-time derivative norms.
        let mut analytic = bgk_affine.clone();
        analytic.sigma = SigmaModel::default_analytic(analytic.nx);
        for (label, sc) in [("affine", bgk_affine), ("analytic", &analytic)] {
            let hier = solve_hierarchy(
                sc,
                5,
                &HierarchyOptions {
                    record_every: 20,
                    save_fields: false,
                    h0: T::zero(),
                },
            )?;
            let sup_norms: Vec<T> = (0..=5)
                .map(|l| {
                    hier.norms
                        .iter()
                        .map(|row| row[l])
                        .fold(T::zero(), |acc, v| acc.max(v))
                })
                .collect();
            let r = estimate_radius(&sup_norms, 5)?;
            let ok = as_f64(r) >= 0.5 - 0.02;
            passed &= ok;
            details.push(format!("{label} proxy {:.3}", as_f64(r)));
        }
        Ok((passed, details.join("; ")))
    })
}

/// Criterion 11: hierarchy vs. collocation cross-check.
pub fn criterion_collocation_crosscheck<T: Real + Send + Sync>(
    bgk_affine: &Scenario<T>,
) -> CriterionResult {
    run_criterion(11, "collocation cross-check", 60.0, || {
        let lmax = 3usize;
        let hier = solve_hierarchy(
            bgk_affine,
            lmax,
            &HierarchyOptions {
                record_every: 50,
                save_fields: false,
                h0: T::zero(),
            },
        )?;
        let coll = collocation_derivatives(bgk_affine, 17, lmax, 50)?;
        let mut worst = 0.0f64;
        for (hr, cr) in hier.norms.iter().zip(&coll.norms) {
            for l in 0..=lmax {
                let denom = as_f64(hr[l]).max(1e-9);
                worst = worst.max((as_f64(hr[l]) - as_f64(cr[l])).abs() / denom);
            }
        }
        let passed = worst <= 0.01;
        Ok((passed, format!("worst relative mismatch {worst:.2e}")))
    })
}

/// Run the full acceptance suite on a pair of default scenarios.
pub fn run_all<T: Real + Send + Sync>(bgk: &Scenario<T>, aniso: &Scenario<T>) -> VerifyReport {
    let results = vec![
        criterion_assumptions(bgk, aniso),
        criterion_bound_domination::<T>(),
        criterion_kn_uniformity::<T>(),
        criterion_hypocoercive_decay(bgk),
        criterion_uniform_in_kn_decay(bgk),
        criterion_entropy_consistency(bgk),
        criterion_mass_conservation(bgk, aniso),
        criterion_cascade_oracles::<T>(),
        criterion_derivative_bounds(bgk),
        criterion_radius_proxy(bgk),
        criterion_collocation_crosscheck(bgk),
    ];
    VerifyReport { results }
}

/// Structural invariants on random fields (dissipativity, coercivity with
/// the measured constants, auxiliary-operator inequalities); used by the
/// CLI verify mode alongside the numbered criteria.
pub fn random_field_invariants<T: Real>(scenario: &Scenario<T>, samples: usize) -> Result<bool> {
    let ops = assemble_operators(scenario)?;
    let alpha = crate::operators::estimate_alpha(&ops.collision)?;
    let beta = crate::operators::estimate_beta(&ops.transport)?;
    let a_op = build_auxiliary_a(&ops.transport, &ops.grid);
    let slack = crate::scalar::real::<T>(1e-9);
    let tiny = crate::scalar::real::<T>(1e-12);
    let half = crate::scalar::real::<T>(0.5);
    for seed in 0..samples as u64 {
        let f = Field::random_seeded(&ops.grid, seed);
        let lf = ops.collision.apply(&f)?;
        if lf.inner_product(&f)? > tiny {
            return Ok(false);
        }
        let micro = &f - &f.project_pi();
        if -lf.inner_product(&f)? < (alpha - slack) * micro.norm() * micro.norm() - tiny {
            return Ok(false);
        }
        let macro_part = f.project_pi().fluctuation().deflate_odd_even_mode();
        let t_macro = ops.transport.apply(&macro_part)?;
        if t_macro.norm() * t_macro.norm()
            < (beta - slack) * macro_part.norm() * macro_part.norm() - tiny
        {
            return Ok(false);
        }
        let af = a_op.apply(&f)?;
        if af.norm() > half * micro.norm() + tiny {
            return Ok(false);
        }
        if ops.transport.apply(&af)?.norm() > micro.norm() + tiny {
            return Ok(false);
        }
        let tf = ops.transport.apply(&f)?;
        if tf.inner_product(&f)?.abs()
            > crate::scalar::real::<T>(1e-11) * (T::one() + tf.norm() * f.norm())
        {
            return Ok(false);
        }
    }
    let _ = c_const(crate::scalar::real::<T>(0.25))?;
    Ok(true)
}
