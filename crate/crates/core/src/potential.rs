//! The logarithmic (Flory-Huggins) free energy and the scalar functions
//! derived from it, with a hard guard against the singularity at `u = +-1`.
//!
//! `F(u) = (theta/2) [(1+u) ln(1+u) + (1-u) ln(1-u)] - (theta_c/2) u^2` is a
//! double well with equal minima at the binodal points `+-u_plus` whenever
//! `0 < theta < theta_c`. Its derivative `f = F'` splits into a linear part
//! plus the logarithmic part `f_tilde(u) = (theta/2) ln((1+u)/(1-u))`, which
//! blows up at the endpoints.

use crate::error::{Error, Result};
use crate::grid::Field;

/// Physical parameters and the derived well geometry.
///
/// `binodal` is the positive root of `f(u) = 0` (location of the well
/// minima); `spinodal` is `sqrt(1 - theta/theta_c)`, the edge of the
/// concave region where `F'' < 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub nu: f64,
    pub theta: f64,
    pub theta_c: f64,
    binodal: f64,
    spinodal: f64,
}

impl ModelParams {
    pub fn new(nu: f64, theta: f64, theta_c: f64) -> Result<Self> {
        let ok = nu.is_finite()
            && theta.is_finite()
            && theta_c.is_finite()
            && nu > 0.0
            && theta > 0.0
            && theta < theta_c;
        if !ok {
            return Err(Error::InvalidParams { nu, theta, theta_c });
        }
        let spinodal = (1.0 - theta / theta_c).sqrt();
        let binodal = bisect_binodal(theta, theta_c, spinodal);
        Ok(ModelParams {
            nu,
            theta,
            theta_c,
            binodal,
            spinodal,
        })
    }

    /// Positive root of `f(u) = 0`, strictly inside `(spinodal, 1)`.
    pub fn binodal(&self) -> f64 {
        self.binodal
    }

    /// `sqrt(1 - theta/theta_c)`.
    pub fn spinodal(&self) -> f64 {
        self.spinodal
    }

    /// Free energy density `F(u)`; finite for `|u| < 1` and extended
    /// continuously by `theta ln 2 - theta_c/2` at the endpoints.
    pub fn free_energy_density(&self, u: f64) -> f64 {
        let entropy = if u.abs() >= 1.0 {
            2.0 * std::f64::consts::LN_2
        } else {
            // (1+u)ln(1+u) + (1-u)ln(1-u), with 0 ln 0 = 0.
            let a = 1.0 + u;
            let b = 1.0 - u;
            let la = if a > 0.0 { a * a.ln() } else { 0.0 };
            let lb = if b > 0.0 { b * b.ln() } else { 0.0 };
            la + lb
        };
        0.5 * self.theta * entropy - 0.5 * self.theta_c * u * u
    }

    /// `f(u) = F'(u) = -theta_c u + f_tilde(u)`.
    pub fn f(&self, u: f64) -> f64 {
        -self.theta_c * u + self.f_tilde(u)
    }

    /// Logarithmic part `f_tilde(u) = (theta/2) ln((1+u)/(1-u)) = theta atanh(u)`.
    pub fn f_tilde(&self, u: f64) -> f64 {
        self.theta * u.atanh()
    }

    /// `F''(u) = theta / (1 - u^2) - theta_c`.
    pub fn f_second(&self, u: f64) -> f64 {
        self.theta / (1.0 - u * u) - self.theta_c
    }

    /// Quartic approximation `(theta/2) u^4/6 + (theta - theta_c)/2 u^2`
    /// (comparison only; its minima sit shifted relative to the binodal).
    pub fn quartic_density(&self, u: f64) -> f64 {
        let u2 = u * u;
        0.5 * self.theta * u2 * u2 / 6.0 + 0.5 * (self.theta - self.theta_c) * u2
    }
}

// The root of f in (spinodal, 1): f < 0 just right of the spinodal and
// f -> +inf at 1, so plain bisection is robust; iterate to f64 resolution.
fn bisect_binodal(theta: f64, theta_c: f64, spinodal: f64) -> f64 {
    let f = |u: f64| -theta_c * u + theta * u.atanh();
    let mut lo = spinodal + 1e-12;
    let mut hi = 1.0 - 1e-12;
    if f(hi) <= 0.0 {
        // Root is within 1e-12 of the endpoint; hi is the best representable
        // answer at this temperature ratio.
        return hi;
    }
    if f(lo) >= 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// What to do when samples approach the singular endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GuardMode {
    /// Fail loudly; the scheme is supposed to keep iterates separated, so a
    /// hit means a bug or an inadmissible time step.
    Abort,
    /// Clamp to `+-(1 - eps)` before evaluating and count the clamps.
    Saturate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GuardPolicy {
    pub mode: GuardMode,
    pub eps_guard: f64,
}

impl GuardPolicy {
    pub const DEFAULT_EPS: f64 = 1e-13;

    pub fn new(mode: GuardMode, eps_guard: f64) -> Result<Self> {
        if !(eps_guard > 0.0 && eps_guard < 1e-6) {
            return Err(Error::InvalidGuardEps(eps_guard));
        }
        Ok(GuardPolicy { mode, eps_guard })
    }

    pub fn abort() -> Self {
        GuardPolicy {
            mode: GuardMode::Abort,
            eps_guard: Self::DEFAULT_EPS,
        }
    }

    pub fn saturate() -> Self {
        GuardPolicy {
            mode: GuardMode::Saturate,
            eps_guard: Self::DEFAULT_EPS,
        }
    }

    /// Largest admissible |u|.
    pub fn threshold(&self) -> f64 {
        1.0 - self.eps_guard
    }
}

impl Default for GuardPolicy {
    fn default() -> Self {
        GuardPolicy::abort()
    }
}

/// The scalar maps that get applied sample-by-sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialFn {
    FreeEnergy,
    F,
    FTilde,
    FSecond,
}

impl PotentialFn {
    pub fn eval(self, params: &ModelParams, u: f64) -> f64 {
        match self {
            PotentialFn::FreeEnergy => params.free_energy_density(u),
            PotentialFn::F => params.f(u),
            PotentialFn::FTilde => params.f_tilde(u),
            PotentialFn::FSecond => params.f_second(u),
        }
    }
}

/// Result of a guarded pointwise application.
pub struct GuardedField {
    pub field: Field,
    /// Number of samples clamped under [`GuardMode::Saturate`] (always 0 in
    /// abort mode).
    pub saturated: usize,
}

/// Applies one of the potential's scalar functions to every sample under the
/// guard policy. Abort mode reports the first offending sample.
pub fn apply_pointwise(
    field: &Field,
    func: PotentialFn,
    params: &ModelParams,
    policy: &GuardPolicy,
) -> Result<GuardedField> {
    let threshold = policy.threshold();
    let mut saturated = 0usize;
    let mut out = Vec::with_capacity(field.values().len());
    for (index, &value) in field.values().iter().enumerate() {
        let u = if value.abs() >= threshold {
            match policy.mode {
                GuardMode::Abort => {
                    return Err(Error::Guard {
                        index,
                        value,
                        eps: policy.eps_guard,
                    })
                }
                GuardMode::Saturate => {
                    saturated += 1;
                    threshold.copysign(value)
                }
            }
        } else {
            value
        };
        out.push(func.eval(params, u));
    }
    Ok(GuardedField {
        field: Field::from_values_unchecked(field.grid().clone(), out),
        saturated,
    })
}
