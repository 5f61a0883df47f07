//! Temporal-convergence and near-solution stability experiments.
//!
//! The exact flow is unavailable, so the error of a run at step `tau` is
//! measured at a fixed physical time against the same scheme at a much finer
//! reference step (`tau_ref <= min(tau)/16`); that shifts the curve by
//! `O(tau_ref)`, negligible against the coarsest error. The observed order
//! is the least-squares slope of `log error` against `log tau` over all
//! points. The near-solution experiment runs a twin trajectory with a small
//! initial offset and optional per-step spectral forcing and fits the
//! exponential envelope that must dominate the squared gap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::potential::{GuardPolicy, ModelParams};
use crate::stepper::{
    self, build_propagators, InitialData, RunOptions, Scheme, SchemeConfig, SimState,
};

/// Full description of a temporal convergence study.
#[derive(Clone, Debug)]
pub struct ConvergenceStudy {
    pub grid_n: usize,
    pub params: ModelParams,
    pub guard: GuardPolicy,
    pub init: InitialData,
    pub seed: u64,
    pub t_final: f64,
    /// Tested time steps, strictly decreasing.
    pub taus: Vec<f64>,
    /// Reference step, at least 16x finer than the finest tested step.
    pub tau_ref: f64,
}

impl ConvergenceStudy {
    pub fn validate(&self) -> Result<()> {
        if self.taus.len() < 3 {
            return Err(Error::Study(format!(
                "need at least 3 tested steps, got {}",
                self.taus.len()
            )));
        }
        for pair in self.taus.windows(2) {
            if pair[1] >= pair[0] {
                return Err(Error::Study("tau list must be strictly decreasing".into()));
            }
        }
        let finest = *self.taus.last().unwrap();
        if self.tau_ref > finest / 16.0 {
            return Err(Error::Study(format!(
                "tau_ref = {} must be at most min(taus)/16 = {}",
                self.tau_ref,
                finest / 16.0
            )));
        }
        if self.t_final.is_nan() || self.t_final <= 0.0 {
            return Err(Error::Study("t_final must be positive".into()));
        }
        for &tau in self.taus.iter().chain(std::iter::once(&self.tau_ref)) {
            steps_for(self.t_final, tau)?;
        }
        Ok(())
    }
}

/// Number of steps to reach `t_final`; errors unless `t_final/tau` is an
/// integer (within 1e-6 relative).
pub fn steps_for(t_final: f64, tau: f64) -> Result<u64> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::Study(format!("invalid tau = {tau}")));
    }
    let ratio = t_final / tau;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > 1e-6 * rounded.max(1.0) {
        return Err(Error::Study(format!(
            "t_final = {t_final} is not an integer multiple of tau = {tau}"
        )));
    }
    Ok(rounded as u64)
}

/// Runs the scheme at `tau_ref` up to `t_final`; the result stands in for
/// the exact solution when measuring errors.
pub fn reference_solution(
    u0: &Field,
    params: &ModelParams,
    guard: &GuardPolicy,
    t_final: f64,
    tau_ref: f64,
) -> Result<SimState> {
    run_to_time(u0, params, guard, t_final, tau_ref)
}

fn run_to_time(
    u0: &Field,
    params: &ModelParams,
    guard: &GuardPolicy,
    t_final: f64,
    tau: f64,
) -> Result<SimState> {
    let n_steps = steps_for(t_final, tau)?;
    let config = SchemeConfig {
        scheme: Scheme::SemiImplicit,
        tau,
        params: *params,
        guard: *guard,
    };
    let opts = RunOptions {
        delta0: 1e-12,
        cadence: None,
        start_step: 0,
    };
    let out = stepper::run(u0.clone(), &config, n_steps, &opts, |_, _| {})?;
    if let Some(abort) = out.abort {
        return Err(Error::StudyAborted {
            tau,
            step: abort.step,
        });
    }
    Ok(out.state)
}

/// One `(tau, l2 error at t_final)` pair per tested step, all runs starting
/// from the same initial data and compared against the same reference.
pub fn error_curve(study: &ConvergenceStudy) -> Result<Vec<(f64, f64)>> {
    study.validate()?;
    let grid = Grid::new(study.grid_n)?;
    let u0 = study.init.build(&grid, study.seed)?;
    let reference = reference_solution(&u0, &study.params, &study.guard, study.t_final, study.tau_ref)?;

    let mut points = Vec::with_capacity(study.taus.len());
    for &tau in &study.taus {
        let state = run_to_time(&u0, &study.params, &study.guard, study.t_final, tau)?;
        let err = state.u.sub(&reference.u)?.norm_l2();
        points.push((tau, err));
    }
    Ok(points)
}

/// Least-squares fit of `log error` against `log tau`.
#[derive(Clone, Copy, Debug)]
pub struct OrderFit {
    /// Fitted slope (the observed order).
    pub p: f64,
    /// Root-mean-square residual of the log-log fit.
    pub fit_residual: f64,
}

/// Fits the observed order. Errors at or below 1e-14 sit in the noise floor
/// and make the fit meaningless, so they are rejected.
pub fn observed_order(points: &[(f64, f64)]) -> Result<OrderFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    for &(tau, err) in points {
        if err.is_nan() || err <= 1e-14 {
            return Err(Error::DegenerateFit(format!(
                "error {err:.3e} at tau = {tau} is at the noise floor"
            )));
        }
    }
    let xs: Vec<f64> = points.iter().map(|&(t, _)| t.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, e)| e.ln()).collect();
    let (slope, intercept) = least_squares_line(&xs, &ys);
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    Ok(OrderFit {
        p: slope,
        fit_residual: (rss / xs.len() as f64).sqrt(),
    })
}

fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Convenience wrapper: error curve plus the fitted order.
pub struct StudyReport {
    pub points: Vec<(f64, f64)>,
    pub order: OrderFit,
}

pub fn run_study(study: &ConvergenceStudy) -> Result<StudyReport> {
    let points = error_curve(study)?;
    let order = observed_order(&points)?;
    Ok(StudyReport { points, order })
}

/// Per-step forcing injected into the twin trajectory: band-limited noise of
/// fixed l2 size, one independent draw per step from a seeded stream.
#[derive(Clone, Copy, Debug)]
pub struct ForcingSpec {
    pub kmax: usize,
    pub amp_l2: f64,
    pub seed: u64,
}

/// Two-trajectory near-solution experiment.
#[derive(Clone, Debug)]
pub struct GapExperiment {
    pub config: SchemeConfig,
    pub n_steps: u64,
    pub forcing: Option<ForcingSpec>,
}

/// Gap trajectory against its exponential envelope.
#[derive(Clone, Debug)]
pub struct GapReport {
    /// Squared l2 gap per step, starting at step 0.
    pub gap_sq: Vec<f64>,
    /// `sum_{j<n} ||G_j||_2^2` per step (cumulative forcing load).
    pub cumulative_forcing_sq: Vec<f64>,
    /// Smallest `C1` such that
    /// `gap^2(n) <= exp(n tau C1 / nu) (gap^2(0) + (2 tau/nu) sum ||G||^2)`
    /// at every step; 0 when the gap never exceeds the base.
    pub fitted_c1: f64,
    /// RMS residual, in log units, of a linear fit to `log gap` over
    /// `n tau`; 0.1 means the gap tracks a pure exponential within about
    /// ten percent.
    pub log_linear_rms: f64,
}

/// Runs the plain and the perturbed/forced trajectory side by side and
/// reports the gap against the Gronwall-type envelope. The two starting
/// fields must have the same mean (tolerance 1e-12).
pub fn near_solution_gap(
    v0: &Field,
    v0_tilde: &Field,
    experiment: &GapExperiment,
) -> Result<GapReport> {
    let diff = (v0.mean() - v0_tilde.mean()).abs();
    if diff > 1e-12 {
        return Err(Error::MeanMismatch { diff, tol: 1e-12 });
    }
    let grid = v0.grid().clone();
    let config = &experiment.config;
    let props = build_propagators(&grid, config)?;

    let mut a = SimState::from_field(v0.clone(), 0, config.tau);
    let mut b = SimState::from_field(v0_tilde.clone(), 0, config.tau);

    let mut rng = experiment
        .forcing
        .map(|f| ChaCha8Rng::seed_from_u64(f.seed));

    let mut gap_sq = Vec::with_capacity(experiment.n_steps as usize + 1);
    let mut cumulative = Vec::with_capacity(experiment.n_steps as usize + 1);
    gap_sq.push(squared_l2_gap(&a.u, &b.u));
    cumulative.push(0.0);

    let mut forcing_load = 0.0;
    for _ in 0..experiment.n_steps {
        let forcing_term = match (&experiment.forcing, rng.as_mut()) {
            (Some(spec), Some(rng)) => {
                let mut g = stepper::random_bandlimited_spectrum(&grid, spec.kmax, rng);
                let norm = g.norm_l2();
                if norm > 0.0 {
                    let scale = spec.amp_l2 / norm;
                    for c in g.coeffs_mut() {
                        *c *= scale;
                    }
                }
                forcing_load += spec.amp_l2 * spec.amp_l2;
                Some(g)
            }
            _ => None,
        };

        let (na, _) = stepper::step(&a, config, &props)?;
        let (nb, _) = stepper::step_with_forcing(&b, config, &props, forcing_term.as_ref())?;
        a = na;
        b = nb;
        gap_sq.push(squared_l2_gap(&a.u, &b.u));
        cumulative.push(forcing_load);
    }

    let tau = config.tau;
    let nu = config.params.nu;
    let mut fitted_c1 = 0.0f64;
    for n in 1..gap_sq.len() {
        let base = gap_sq[0] + (2.0 * tau / nu) * cumulative[n];
        if gap_sq[n] > 0.0 && base > 0.0 {
            let needed = nu * (gap_sq[n] / base).ln() / (n as f64 * tau);
            fitted_c1 = fitted_c1.max(needed);
        }
    }

    let log_linear_rms = log_linearity(&gap_sq, tau);

    Ok(GapReport {
        gap_sq,
        cumulative_forcing_sq: cumulative,
        fitted_c1,
        log_linear_rms,
    })
}

fn squared_l2_gap(a: &Field, b: &Field) -> f64 {
    let w = a.grid().quad_weight();
    w * a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
}

// RMS deviation, in log units, of log gap from its best linear fit in n tau.
fn log_linearity(gap_sq: &[f64], tau: f64) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (n, &g) in gap_sq.iter().enumerate() {
        if g > 0.0 {
            xs.push(n as f64 * tau);
            ys.push(0.5 * g.ln());
        }
    }
    if xs.len() < 3 {
        return 0.0;
    }
    let (slope, intercept) = least_squares_line(&xs, &ys);
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    (rss / xs.len() as f64).sqrt()
}
