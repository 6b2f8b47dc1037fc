//! Exponential decay-rate certificates.
//!
//! Everything here is scalar arithmetic on the derived triple
//! `a = alpha`, `c = beta/(1+beta)`, `d = (1+gamma)/2`. The certified rate
//! at a fixed entropy parameter `eps` has the closed form
//!
//! ```text
//! lambda(eps) = [ (a-2b+eps·c) - sqrt((a-2b-eps·c)² + 4·b·d·eps) ] / (2(1+eps)),   b = eps·d,
//! ```
//!
//! the optimal rate is `max_eps lambda(eps)`, and two explicit lower bounds
//! pick a concrete `eps0` each: one tuned for the parabolic scaling, one
//! for the high-field scaling. The entropy-equivalence constant is
//! `C(eps) = sqrt((1+eps)/(1-eps))`.

use crate::error::{Error, Result};
use crate::operators::CoercivityConstants;
use crate::scalar::{real, Real};

/// Which explicit lower bound produced a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    ParabolicBound,
    HighfieldBound1,
    HighfieldBound2,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::ParabolicBound => write!(f, "parabolic_bound"),
            Branch::HighfieldBound1 => write!(f, "highfield_bound_1"),
            Branch::HighfieldBound2 => write!(f, "highfield_bound_2"),
        }
    }
}

/// Knudsen-number regime of the rescaled equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    Kinetic,
    Parabolic,
    HighField,
}

impl Scaling {
    /// Exponent `p` of the collision amplification `1/Kn^p`.
    pub fn collision_exponent(&self) -> i32 {
        match self {
            Scaling::Kinetic => 1,
            Scaling::Parabolic => 2,
            Scaling::HighField => 1,
        }
    }
}

impl std::fmt::Display for Scaling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scaling::Kinetic => write!(f, "kinetic"),
            Scaling::Parabolic => write!(f, "parabolic"),
            Scaling::HighField => write!(f, "highfield"),
        }
    }
}

fn check_acd<T: Real>(a: T, c: T, d: T) -> Result<()> {
    if a <= T::zero() || c <= T::zero() || d <= T::zero() {
        return Err(Error::InvalidParameter {
            name: "a, c, d",
            reason: "must be strictly positive".into(),
        });
    }
    Ok(())
}

/// Closed-form certified rate at a fixed `eps`, with the optimizing
/// balance parameter `delta` when `eps > 0`.
#[derive(Debug, Clone, Copy)]
pub struct LambdaAtEps<T> {
    pub value: T,
    pub delta: Option<T>,
}

/// Evaluate `lambda(eps)`; a non-positive value means “no certificate at
/// this eps”, not an error.
pub fn lambda_of_eps<T: Real>(a: T, c: T, d: T, eps: T) -> Result<LambdaAtEps<T>> {
    check_acd(a, c, d)?;
    if eps < T::zero() || eps >= T::one() {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: "must lie in [0, 1)".into(),
        });
    }
    let two = real::<T>(2.0);
    let four = real::<T>(4.0);
    let b = eps * d;
    let s = a - two * b;
    let disc = (s - eps * c) * (s - eps * c) + four * b * d * eps;
    let root = disc.sqrt();
    let value = ((s + eps * c) - root) / (two * (T::one() + eps));
    let delta = if eps > T::zero() {
        Some((-(s - eps * c) + root) / (two * eps * d))
    } else {
        None
    };
    Ok(LambdaAtEps { value, delta })
}

/// Maximize `lambda(eps)` over `eps ∈ [0, 1)`: coarse 1000-point grid, then
/// golden-section refinement around the best grid point. Serves as the
/// numerical oracle every closed-form lower bound is checked against.
pub fn lambda_numeric<T: Real>(a: T, c: T, d: T) -> Result<(T, T)> {
    check_acd(a, c, d)?;
    let eps_max = T::one() - real::<T>(1e-6);
    let n = 1000usize;
    let mut best_eps = T::zero();
    let mut best = T::zero(); // lambda(0) = 0
    for k in 0..=n {
        let eps = eps_max * real::<T>(k as f64 / n as f64);
        let v = lambda_of_eps(a, c, d, eps)?.value;
        if v > best {
            best = v;
            best_eps = eps;
        }
    }
    // Golden-section refinement on the bracketing interval.
    let step = eps_max / real::<T>(n as f64);
    let mut lo = (best_eps - step).max(T::zero());
    let mut hi = (best_eps + step).min(eps_max);
    let phi = (real::<T>(5.0).sqrt() - T::one()) / real::<T>(2.0);
    let tol = real::<T>(1e-12);
    let eval = |e: T| lambda_of_eps(a, c, d, e).map(|r| r.value);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = eval(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = eval(x1)?;
        }
    }
    let mid = (lo + hi) / real::<T>(2.0);
    let fm = eval(mid)?;
    if fm > best {
        best = fm;
        best_eps = mid;
    }
    Ok((best, best_eps))
}

/// Parabolic-regime lower bound with its admissible `eps0 < 1/k0 <= 1/2`.
#[derive(Debug, Clone, Copy)]
pub struct ParabolicBound<T> {
    pub lambda_lb: T,
    pub eps0: T,
}

/// `k0 = max{2, 2d²/(ac)}`, `ã = k0·a²c/(k0·ac + 2dc)`, bound
/// `ã·d²/((k0·a + ã)(k0·a + c))`, `eps0 = ac/(2dc + k0·ac)`.
pub fn lower_bound_parabolic<T: Real>(a: T, c: T, d: T) -> Result<ParabolicBound<T>> {
    check_acd(a, c, d)?;
    let two = real::<T>(2.0);
    let k0 = two.max(two * d * d / (a * c));
    let a_tilde = k0 * a * a * c / (k0 * a * c + two * d * c);
    let lambda_lb = a_tilde * d * d / ((k0 * a + a_tilde) * (k0 * a + c));
    let eps0 = a * c / (two * d * c + k0 * a * c);
    Ok(ParabolicBound { lambda_lb, eps0 })
}

/// High-field-regime lower bound: branch selected by `ã·c/d²` with
/// `ã = ad/(c+d)`, and `eps0 = min{1/2, ac/(2d(c+d))}`.
#[derive(Debug, Clone, Copy)]
pub struct HighfieldBound<T> {
    pub lambda_lb: T,
    pub eps0: T,
    pub branch: Branch,
}

pub fn lower_bound_highfield<T: Real>(a: T, c: T, d: T) -> Result<HighfieldBound<T>> {
    check_acd(a, c, d)?;
    let half = real::<T>(0.5);
    let two = real::<T>(2.0);
    let a_tilde = a * d / (c + d);
    let eps0 = half.min(a * c / (two * d * (c + d)));
    if a_tilde * c / (d * d) <= T::one() {
        let cd2 = c * c / (d * d);
        let prefactor = a_tilde / (T::one() + a_tilde * c / (two * d * d));
        let denom = two * ((T::one() + half * cd2) + (T::one() + cd2 * cd2 / real::<T>(4.0)).sqrt());
        Ok(HighfieldBound {
            lambda_lb: prefactor * cd2 / denom,
            eps0,
            branch: Branch::HighfieldBound1,
        })
    } else {
        // The branch condition implies a - d > 0.
        let third = T::one() / real::<T>(3.0);
        let p = a - d + half * c;
        let q = a - d - half * c;
        let lambda_lb = third * d * d / (p + (q * q + d * d).sqrt());
        Ok(HighfieldBound {
            lambda_lb,
            eps0,
            branch: Branch::HighfieldBound2,
        })
    }
}

/// Entropy-equivalence constant `C(eps) = sqrt((1+eps)/(1-eps))`.
pub fn c_const<T: Real>(eps: T) -> Result<T> {
    if eps < T::zero() || eps >= T::one() {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: "must lie in [0, 1)".into(),
        });
    }
    Ok(((T::one() + eps) / (T::one() - eps)).sqrt())
}

/// Coercivity constants rescaled into a Knudsen regime.
#[derive(Debug, Clone, Copy)]
pub struct ScaledConstants<T: Real> {
    pub alpha_kn: T,
    pub beta_kn: T,
    pub gamma_kn: T,
    pub kn: T,
    pub scaling: Scaling,
    /// Derived triple recomputed from the scaled constants.
    pub derived: CoercivityConstants<T>,
}

/// Apply the regime scalings: parabolic `(α/Kn², β/Kn², γ/Kn)`, high-field
/// `(α/Kn, β/Kn², γ)`, kinetic identity.
pub fn rescale<T: Real>(
    constants: &CoercivityConstants<T>,
    kn: T,
    scaling: Scaling,
) -> Result<ScaledConstants<T>> {
    if kn <= T::zero() || kn > T::one() {
        return Err(Error::InvalidParameter {
            name: "kn",
            reason: "must lie in (0, 1]".into(),
        });
    }
    let kn2 = kn * kn;
    let (alpha_kn, beta_kn, gamma_kn) = match scaling {
        Scaling::Kinetic => (constants.alpha, constants.beta, constants.gamma),
        Scaling::Parabolic => (
            constants.alpha / kn2,
            constants.beta / kn2,
            constants.gamma / kn,
        ),
        Scaling::HighField => (constants.alpha / kn, constants.beta / kn2, constants.gamma),
    };
    let derived = CoercivityConstants::new(alpha_kn, beta_kn, gamma_kn)?;
    Ok(ScaledConstants {
        alpha_kn,
        beta_kn,
        gamma_kn,
        kn,
        scaling,
        derived,
    })
}

/// Best explicit certificate for one set of derived constants: the larger
/// of the two lemma bounds, carrying its own `eps0` and branch tag, plus
/// the exact closed-form rate at that `eps0`.
#[derive(Debug, Clone, Copy)]
pub struct RateCertificate<T: Real> {
    pub lambda_lower: T,
    pub eps0: T,
    pub branch: Branch,
    /// Exact `lambda(eps0)`; always `>= lambda_lower` up to rounding.
    pub lambda_at_eps0: T,
    pub c_eps: T,
}

pub fn certificate<T: Real>(a: T, c: T, d: T) -> Result<RateCertificate<T>> {
    let pb = lower_bound_parabolic(a, c, d)?;
    let hf = lower_bound_highfield(a, c, d)?;
    let (lambda_lower, eps0, branch) = if pb.lambda_lb >= hf.lambda_lb {
        (pb.lambda_lb, pb.eps0, Branch::ParabolicBound)
    } else {
        (hf.lambda_lb, hf.eps0, hf.branch)
    };
    let lambda_at_eps0 = lambda_of_eps(a, c, d, eps0)?.value;
    Ok(RateCertificate {
        lambda_lower,
        eps0,
        branch,
        lambda_at_eps0,
        c_eps: c_const(eps0)?,
    })
}

/// Full certificate bundle for a scenario: scaled constants, both bounds,
/// the numeric maximum, and the entropy-equivalence constant.
#[derive(Debug, Clone, Copy)]
pub struct RatePlan<T: Real> {
    pub eps0: T,
    pub delta: T,
    pub lambda_lower: T,
    pub lambda_numeric: T,
    pub c_eps: T,
    pub branch: Branch,
    pub lambda_at_eps0: T,
    pub scaled: ScaledConstants<T>,
}

impl<T: Real> RatePlan<T> {
    pub fn build(constants: &CoercivityConstants<T>, kn: T, scaling: Scaling) -> Result<Self> {
        let scaled = rescale(constants, kn, scaling)?;
        let (a, c, d) = (scaled.derived.a, scaled.derived.c, scaled.derived.d);
        let cert = certificate(a, c, d)?;
        let (lam_num, _) = lambda_numeric(a, c, d)?;
        let delta = lambda_of_eps(a, c, d, cert.eps0)?
            .delta
            .unwrap_or_else(T::zero);
        Ok(RatePlan {
            eps0: cert.eps0,
            delta,
            lambda_lower: cert.lambda_lower,
            lambda_numeric: lam_num,
            c_eps: cert.c_eps,
            branch: cert.branch,
            lambda_at_eps0: cert.lambda_at_eps0,
            scaled,
        })
    }
}

/// Uniform-in-`z` certified rate: rescale each node's constants, take the
/// better lemma bound per node, and return the minimum over the nodes.
pub fn uniform_rate_over_z<T: Real>(
    constants_at_nodes: &[CoercivityConstants<T>],
    kn: T,
    scaling: Scaling,
) -> Result<T> {
    if constants_at_nodes.is_empty() {
        return Err(Error::InvalidParameter {
            name: "constants_at_nodes",
            reason: "need at least one z-node".into(),
        });
    }
    let mut min_rate: Option<T> = None;
    for cst in constants_at_nodes {
        if cst.alpha <= T::zero() || cst.beta <= T::zero() || cst.gamma <= T::zero() {
            return Err(Error::ZBoundsViolated);
        }
        let scaled = rescale(cst, kn, scaling)?;
        let cert = certificate(scaled.derived.a, scaled.derived.c, scaled.derived.d)?;
        min_rate = Some(match min_rate {
            None => cert.lambda_lower,
            Some(m) => m.min(cert.lambda_lower),
        });
    }
    Ok(min_rate.expect("non-empty"))
}
