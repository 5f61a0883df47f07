//! Per-step certification of the observables the scheme is supposed to
//! control: energy, mass, separation margin, chemical potential, the
//! logarithmic field `g = f_tilde(u)`, Sobolev norms, and the residual of the
//! discrete energy law.
//!
//! The energy law checked here is the exact algebraic consequence of one
//! update step. Pairing the update with `(-lap)^{-1}(u_next - u)` gives, with
//! `d = u_next - u` and `H1 = F(u_next) - F(u) - f(u) d`,
//!
//! ```text
//! (1/tau) |||grad|^{-1} d||^2 + (nu/2) ||grad d||^2 + E(u_next) - E(u)
//!     = int H1 dx + theta_c ||d||^2     (implicit backward diffusion)
//!     = int H1 dx                       (variant scheme)
//! ```
//!
//! The `theta_c ||d||^2` term belongs to the schemes that treat the backward
//! diffusion implicitly: moving `-theta_c lap u_next` across the pairing
//! produces `theta_c <u_next, d>` where `H1` only accounts for
//! `theta_c <u, d>`. Both sides are evaluated by quadrature and spectral
//! sums, which agree exactly on the lattice, so the residual is pure
//! roundoff for consistent steps.

use crate::error::{Error, Result};
use crate::grid::{Field, Spectrum};
use crate::potential::{apply_pointwise, GuardPolicy, ModelParams, PotentialFn};
use crate::stepper::{Scheme, SimState};

/// One row of the per-step record series.
#[derive(Clone, Copy, Debug)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub time: f64,
    /// `E(u) = (nu/2) ||grad u||^2 + int F(u)`.
    pub energy: f64,
    /// Mean of the samples.
    pub mass: f64,
    /// `1 - max|u|` over the grid.
    pub margin: f64,
    /// `||grad K||_2` of the chemical potential.
    pub grad_k_l2: f64,
    pub g_mean: f64,
    /// `||g - mean(g)||_2`.
    pub g_fluct_l2: f64,
    pub h1: f64,
    pub h3: f64,
    pub h5: f64,
    /// Residual of the discrete energy law for the step that produced this
    /// state; 0 on the initial record.
    pub identity_residual: f64,
    /// `|||grad|^{-1}(u_next - u)||_2` of the producing step.
    pub incr_neg_grad_l2: f64,
    /// `||grad(u_next - u)||_2` of the producing step.
    pub incr_grad_l2: f64,
}

/// Ginzburg-Landau energy by spectral gradient norm plus quadrature of `F`.
pub fn energy(u: &Field, params: &ModelParams, guard: &GuardPolicy) -> Result<f64> {
    energy_with_spectrum(u, &u.transform(), params, guard)
}

/// Same, reusing an already computed spectrum of `u`.
pub fn energy_with_spectrum(
    u: &Field,
    spectrum: &Spectrum,
    params: &ModelParams,
    guard: &GuardPolicy,
) -> Result<f64> {
    let density = apply_pointwise(u, PotentialFn::FreeEnergy, params, guard)?;
    let bulk: f64 = density.field.values().iter().sum::<f64>() * u.grid().quad_weight();
    let grad = spectrum.grad_norm_l2();
    Ok(0.5 * params.nu * grad * grad + bulk)
}

pub(crate) fn energy_of_state(
    state: &SimState,
    params: &ModelParams,
    guard: &GuardPolicy,
) -> Result<f64> {
    energy_with_spectrum(&state.u, &state.spectrum, params, guard)
}

/// Chemical potential `K = -nu lap u - theta_c u + f_tilde(u)` with the
/// norms the analysis tracks.
pub struct ChemicalPotential {
    pub field: Field,
    pub grad_l2: f64,
    pub mean: f64,
}

pub fn chemical_potential(
    u: &Field,
    params: &ModelParams,
    guard: &GuardPolicy,
) -> Result<ChemicalPotential> {
    chemical_potential_with_spectrum(u, &u.transform(), params, guard)
}

pub fn chemical_potential_with_spectrum(
    u: &Field,
    spectrum: &Spectrum,
    params: &ModelParams,
    guard: &GuardPolicy,
) -> Result<ChemicalPotential> {
    let g = apply_pointwise(u, PotentialFn::FTilde, params, guard)?;
    let lap = spectrum.apply_symbol(|m| -m.k_sq)?.inverse_transform();
    let values: Vec<f64> = u
        .values()
        .iter()
        .zip(lap.values())
        .zip(g.field.values())
        .map(|((&ui, &li), &gi)| -params.nu * li - params.theta_c * ui + gi)
        .collect();
    let field = Field::from_values_unchecked(u.grid().clone(), values);
    let grad_l2 = field.transform().grad_norm_l2();
    let mean = field.mean();
    Ok(ChemicalPotential {
        field,
        grad_l2,
        mean,
    })
}

/// Residual of the discrete energy law for one step `u -> u_next` of the
/// given scheme. The two states must share a trajectory: their means may
/// differ by at most 1e-12.
pub fn energy_identity_residual(
    u_prev: &Field,
    u_next: &Field,
    tau: f64,
    params: &ModelParams,
    guard: &GuardPolicy,
    scheme: &Scheme,
) -> Result<f64> {
    let spec_prev = u_prev.transform();
    let spec_next = u_next.transform();
    let e_prev = energy_with_spectrum(u_prev, &spec_prev, params, guard)?;
    let e_next = energy_with_spectrum(u_next, &spec_next, params, guard)?;
    let (residual, _, _) = identity_parts(
        u_prev, &spec_prev, e_prev, u_next, &spec_next, e_next, tau, params, guard, scheme,
    )?;
    Ok(residual)
}

// Shared by the public op and the per-step recorder. Also returns the
// increment norms so the recorder gets them for free.
#[allow(clippy::too_many_arguments)]
fn identity_parts(
    u_prev: &Field,
    spec_prev: &Spectrum,
    e_prev: f64,
    u_next: &Field,
    spec_next: &Spectrum,
    e_next: f64,
    tau: f64,
    params: &ModelParams,
    guard: &GuardPolicy,
    scheme: &Scheme,
) -> Result<(f64, f64, f64)> {
    let mean_prev = u_prev.mean();
    let mean_next = u_next.mean();
    let diff = (mean_next - mean_prev).abs();
    // Scale-aware so that roundoff on large exploratory (saturate-mode)
    // iterates passes while unrelated fields still fail.
    let tol = 1e-12 * (1.0 + u_prev.norm_linf() + u_next.norm_linf());
    if diff > tol {
        return Err(Error::MeanMismatch { diff, tol });
    }

    let grid = u_prev.grid();
    let two_pi_sq = (2.0 * std::f64::consts::PI).powi(2);

    // Increment norms from the coefficient difference; the zero mode is
    // mean-free up to roundoff and is excluded from the |grad|^{-1} sum.
    let mut neg_sq = 0.0;
    let mut grad_sq = 0.0;
    for ((cn, cp), mode) in spec_next
        .coeffs()
        .iter()
        .zip(spec_prev.coeffs())
        .zip(grid.modes())
    {
        let d = (cn - cp).norm_sqr();
        if mode.k != [0, 0] {
            neg_sq += d / mode.k_sq;
            grad_sq += d * mode.k_sq;
        }
    }
    neg_sq *= two_pi_sq;
    grad_sq *= two_pi_sq;

    let f_prev = apply_pointwise(u_prev, PotentialFn::FreeEnergy, params, guard)?;
    let f_next = apply_pointwise(u_next, PotentialFn::FreeEnergy, params, guard)?;
    let force_prev = apply_pointwise(u_prev, PotentialFn::F, params, guard)?;

    let w = grid.quad_weight();
    let mut h1_int = 0.0;
    let mut delta_l2_sq = 0.0;
    for i in 0..u_prev.values().len() {
        let d = u_next.values()[i] - u_prev.values()[i];
        h1_int += f_next.field.values()[i] - f_prev.field.values()[i]
            - force_prev.field.values()[i] * d;
        delta_l2_sq += d * d;
    }
    h1_int *= w;
    delta_l2_sq *= w;

    let lhs = neg_sq / tau + 0.5 * params.nu * grad_sq + e_next - e_prev;
    let rhs = match scheme {
        Scheme::Variant => h1_int,
        Scheme::SemiImplicit | Scheme::Galerkin { .. } => {
            h1_int + params.theta_c * delta_l2_sq
        }
    };
    Ok(((lhs - rhs).abs(), neg_sq.sqrt(), grad_sq.sqrt()))
}

/// `g = f_tilde(u)` summary: mean, fluctuation, and the scale-free statistic
/// `|mean(g)| sqrt(1 - |mean(u)|)` whose boundedness the separation analysis
/// predicts.
pub struct GStatistics {
    pub mean: f64,
    pub fluct_l2: f64,
    pub mean_bound_stat: f64,
}

pub fn g_statistics(u: &Field, params: &ModelParams, guard: &GuardPolicy) -> Result<GStatistics> {
    let u_mean = u.mean();
    if u_mean.abs() >= 1.0 {
        return Err(Error::Diagnostics(format!(
            "mean {u_mean} is not strictly inside (-1, 1)"
        )));
    }
    let g = apply_pointwise(u, PotentialFn::FTilde, params, guard)?;
    let stats = g_stats_of(&g.field, u_mean, u.grid().quad_weight());
    Ok(stats)
}

fn g_stats_of(g: &Field, u_mean: f64, w: f64) -> GStatistics {
    let mean = g.mean();
    let fluct_sq: f64 = g.values().iter().map(|v| (v - mean) * (v - mean)).sum();
    GStatistics {
        mean,
        fluct_l2: (w * fluct_sq).sqrt(),
        mean_bound_stat: mean.abs() * (1.0 - u_mean.abs()).sqrt(),
    }
}

/// Scan of a record series against the two trajectory-level guarantees:
/// strict separation and monotone energy.
#[derive(Clone, Copy, Debug)]
pub struct SeparationReport {
    pub min_margin: f64,
    pub argmin_step: u64,
    /// True iff every consecutive energy pair satisfies
    /// `E_next <= E + 1e-12 (1 + |E_first|)`.
    pub monotone_energy: bool,
    /// Largest positive consecutive energy increase seen (0 if none).
    pub max_energy_uptick: f64,
}

pub fn separation_report(records: &[DiagnosticsRecord]) -> Result<SeparationReport> {
    let first = records
        .first()
        .ok_or_else(|| Error::Diagnostics("empty record series".into()))?;
    let tol = 1e-12 * (1.0 + first.energy.abs());
    let mut min_margin = first.margin;
    let mut argmin_step = first.step;
    let mut monotone = true;
    let mut max_uptick = 0.0f64;
    for pair in records.windows(2) {
        let uptick = pair[1].energy - pair[0].energy;
        if uptick > tol {
            monotone = false;
        }
        max_uptick = max_uptick.max(uptick);
        if pair[1].margin < min_margin {
            min_margin = pair[1].margin;
            argmin_step = pair[1].step;
        }
    }
    Ok(SeparationReport {
        min_margin,
        argmin_step,
        monotone_energy: monotone,
        max_energy_uptick: max_uptick.max(0.0),
    })
}

/// Accumulated dissipation of a cadence-1 record series,
/// `sum_j (1/(2 tau)) |||grad|^{-1} d_j||^2 + (nu/4) ||grad d_j||^2`,
/// paired with the energy drop `E_first - E_last` that must dominate it.
pub fn dissipation_budget(records: &[DiagnosticsRecord], tau: f64, nu: f64) -> (f64, f64) {
    let mut sum = 0.0;
    for r in records.iter().skip(1) {
        sum += r.incr_neg_grad_l2 * r.incr_neg_grad_l2 / (2.0 * tau)
            + 0.25 * nu * r.incr_grad_l2 * r.incr_grad_l2;
    }
    let drop = match (records.first(), records.last()) {
        (Some(a), Some(b)) => a.energy - b.energy,
        _ => 0.0,
    };
    (sum, drop)
}

/// Largest `grad_k_l2` over the first and second halves of a record series;
/// a drift certificate for the chemical potential norm.
pub fn grad_k_half_maxima(records: &[DiagnosticsRecord]) -> (f64, f64) {
    let mid = records.len() / 2;
    let max_of = |rs: &[DiagnosticsRecord]| {
        rs.iter()
            .map(|r| r.grad_k_l2)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    (max_of(&records[..mid.max(1)]), max_of(&records[mid..]))
}

// The initial row has no producing step; its transition columns stay 0.
pub(crate) fn record_initial(
    state: &SimState,
    energy: f64,
    params: &ModelParams,
    guard: &GuardPolicy,
) -> Result<DiagnosticsRecord> {
    state_record(state, energy, params, guard)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn transition_record(
    prev: &SimState,
    e_prev: f64,
    next: &SimState,
    e_next: f64,
    tau: f64,
    params: &ModelParams,
    guard: &GuardPolicy,
    scheme: &Scheme,
) -> Result<DiagnosticsRecord> {
    let (identity_residual, incr_neg, incr_grad) = identity_parts(
        &prev.u,
        &prev.spectrum,
        e_prev,
        &next.u,
        &next.spectrum,
        e_next,
        tau,
        params,
        guard,
        scheme,
    )?;
    let mut record = state_record(next, e_next, params, guard)?;
    record.identity_residual = identity_residual;
    record.incr_neg_grad_l2 = incr_neg;
    record.incr_grad_l2 = incr_grad;
    Ok(record)
}

/// Full observable set of a single state (no transition columns).
pub fn state_record(
    state: &SimState,
    energy: f64,
    params: &ModelParams,
    guard: &GuardPolicy,
) -> Result<DiagnosticsRecord> {
    let chem = chemical_potential_with_spectrum(&state.u, &state.spectrum, params, guard)?;
    let g = apply_pointwise(&state.u, PotentialFn::FTilde, params, guard)?;
    let gs = g_stats_of(&g.field, state.u.mean(), state.u.grid().quad_weight());
    let (h1, h3, h5) = sobolev_triple(&state.spectrum);
    Ok(DiagnosticsRecord {
        step: state.step_index,
        time: state.time,
        energy,
        mass: state.u.mean(),
        margin: state.u.margin(),
        grad_k_l2: chem.grad_l2,
        g_mean: gs.mean,
        g_fluct_l2: gs.fluct_l2,
        h1,
        h3,
        h5,
        identity_residual: 0.0,
        incr_neg_grad_l2: 0.0,
        incr_grad_l2: 0.0,
    })
}

// H^1, H^3 and H^5 norms in one pass over the coefficients.
fn sobolev_triple(spectrum: &Spectrum) -> (f64, f64, f64) {
    let mut s1 = 0.0;
    let mut s3 = 0.0;
    let mut s5 = 0.0;
    for (c, mode) in spectrum.coeffs().iter().zip(spectrum.grid().modes()) {
        let p = c.norm_sqr();
        let x = 1.0 + mode.k_sq;
        let x1 = x;
        let x3 = x * x * x;
        let x5 = x3 * x * x;
        s1 += x1 * p;
        s3 += x3 * p;
        s5 += x5 * p;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    (
        two_pi * s1.sqrt(),
        two_pi * s3.sqrt(),
        two_pi * s5.sqrt(),
    )
}
