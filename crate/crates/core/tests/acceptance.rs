//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Criteria 1-4 and 10 share one long reference run (n = 128, tau = 1e-3,
//! 5000 steps, band-limited random data), computed once.

mod common;

use chlog_core::convergence::{near_solution_gap, run_study, ConvergenceStudy, GapExperiment};
use chlog_core::diagnostics::{separation_report, DiagnosticsRecord};
use chlog_core::io::{load_snapshot, save_snapshot};
use chlog_core::*;
use std::sync::{Arc, OnceLock};

fn params() -> ModelParams {
    ModelParams::new(1.0, 1.0, 2.0).unwrap()
}

fn criterion_line(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id:>2} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

struct LongRun {
    grid: Arc<Grid>,
    config: SchemeConfig,
    u0: Field,
    records: Vec<DiagnosticsRecord>,
    final_state: SimState,
    aborted: bool,
}

static LONG_RUN: OnceLock<LongRun> = OnceLock::new();

fn long_run() -> &'static LongRun {
    LONG_RUN.get_or_init(|| {
        let grid = Grid::new(128).unwrap();
        let config = SchemeConfig {
            scheme: Scheme::SemiImplicit,
            tau: 1e-3,
            params: params(),
            guard: GuardPolicy::abort(),
        };
        let u0 = InitialData::RandomBandlimited { kmax: 4, amp: 0.4 }
            .build(&grid, 7)
            .unwrap();
        let opts = RunOptions {
            delta0: 1e-3,
            cadence: Some(1),
            start_step: 0,
        };
        let out = run(u0.clone(), &config, 5000, &opts, |_, _| {}).unwrap();
        LongRun {
            grid,
            config,
            u0,
            aborted: out.abort.is_some(),
            records: out.records,
            final_state: out.state,
        }
    })
}

#[test]
fn criterion_01_energy_stability() {
    let data = long_run();
    let e0 = data.records[0].energy;
    let tol = 1e-12 * (1.0 + e0.abs());
    let mut worst = f64::NEG_INFINITY;
    let mut ok = true;
    for pair in data.records.windows(2) {
        let uptick = pair[1].energy - pair[0].energy;
        worst = worst.max(uptick);
        if uptick > tol {
            ok = false;
        }
    }
    criterion_line(
        1,
        "energy stability",
        ok,
        &format!(
            "5000 steps, E0 = {:.6}, E_final = {:.6}, max uptick {:.3e} (tol {:.3e})",
            e0,
            data.records.last().unwrap().energy,
            worst,
            tol
        ),
    );
    assert!(ok);
    assert_eq!(data.records.len(), 5001);
}

#[test]
fn criterion_02_strict_phase_separation() {
    let data = long_run();
    let report = separation_report(&data.records).unwrap();
    let ok = !data.aborted && report.min_margin >= 1e-3;
    criterion_line(
        2,
        "strict phase separation",
        ok,
        &format!(
            "min margin {:.6} at step {} (threshold 1e-3), no abort: {}",
            report.min_margin,
            report.argmin_step,
            !data.aborted
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_03_mass_conservation() {
    let data = long_run();
    let m0 = data.records[0].mass;
    let mut worst = 0.0f64;
    for r in &data.records {
        worst = worst.max((r.mass - m0).abs());
    }
    let ok = worst <= 1e-12;
    criterion_line(
        3,
        "mass conservation",
        ok,
        &format!("max |mean drift| {worst:.3e} (tol 1e-12)"),
    );
    assert!(ok);
}

#[test]
fn criterion_04_discrete_energy_identity() {
    let data = long_run();
    let e0 = data.records[0].energy;
    let tol = 1e-8 * (1.0 + e0.abs());
    let mut worst = 0.0f64;
    for r in &data.records {
        worst = worst.max(r.identity_residual);
    }
    let ok = worst <= tol;
    criterion_line(
        4,
        "discrete energy identity",
        ok,
        &format!("max residual {worst:.3e} (tol {tol:.3e})"),
    );
    assert!(ok);
}

#[test]
fn criterion_05_temporal_order_one() {
    let study = ConvergenceStudy {
        grid_n: 64,
        params: params(),
        guard: GuardPolicy::abort(),
        init: InitialData::RandomBandlimited { kmax: 4, amp: 0.4 },
        seed: 7,
        t_final: 0.5,
        taus: vec![4e-3, 2e-3, 1e-3, 5e-4],
        tau_ref: 3.125e-5,
    };
    let report = run_study(&study).unwrap();

    let mut monotone = true;
    let mut halving_ok = true;
    for pair in report.points.windows(2) {
        if pair[1].1 > pair[0].1 * 1.05 {
            monotone = false;
        }
        // First-order behavior: halving tau roughly halves the error.
        let ratio = pair[0].1 / pair[1].1;
        if !(1.7..=2.3).contains(&ratio) {
            halving_ok = false;
        }
    }
    let ok = (0.8..=1.2).contains(&report.order.p)
        && report.order.fit_residual <= 0.1
        && monotone
        && halving_ok;
    let detail = format!(
        "p = {:.4}, fit residual {:.4}, errors {:?}",
        report.order.p,
        report.order.fit_residual,
        report
            .points
            .iter()
            .map(|(t, e)| format!("tau {t:.0e} -> {e:.3e}"))
            .collect::<Vec<_>>()
    );
    criterion_line(5, "temporal order one", ok, &detail);
    assert!(ok);
}

#[test]
fn criterion_06_linear_amplification() {
    let grid = Grid::new(32).unwrap();
    let p = params();
    let tau = 1e-3;
    let config = SchemeConfig {
        scheme: Scheme::SemiImplicit,
        tau,
        params: p,
        guard: GuardPolicy::abort(),
    };
    let props = build_propagators(&grid, &config).unwrap();
    let eps = 1e-8;

    let mut ok = true;
    let mut worst = 0.0f64;
    for k in [[1, 0], [1, 1], [2, 0]] {
        let k_sq = (k[0] * k[0] + k[1] * k[1]) as f64;
        let factor = (1.0 - tau * p.theta * k_sq)
            / (1.0 + tau * p.nu * k_sq * k_sq - tau * p.theta_c * k_sq);
        let u0 = Field::from_fn(&grid, |x1, x2| {
            eps * (k[0] as f64 * x1 + k[1] as f64 * x2).cos()
        });
        let mut state = SimState::from_field(u0, 0, tau);
        for _ in 0..10 {
            let before = state.spectrum.coeff(k).re;
            let (next, _) = step(&state, &config, &props).unwrap();
            let after = next.spectrum.coeff(k).re;
            let rel = ((after / before) - factor).abs() / factor.abs();
            worst = worst.max(rel);
            if rel > 1e-6 {
                ok = false;
            }
            state = next;
        }
    }
    criterion_line(
        6,
        "linear amplification",
        ok,
        &format!("|k|^2 in {{1,2,4}}, 10 steps each, worst per-step rel error {worst:.3e} (tol 1e-6)"),
    );
    assert!(ok);
}

#[test]
fn criterion_07_dense_oracle_equivalence() {
    let grid = Grid::new(4).unwrap();
    let dft = common::DenseDft::new(4);
    let p = params();
    let tau = 0.4;
    let config = SchemeConfig {
        scheme: Scheme::SemiImplicit,
        tau,
        params: p,
        guard: GuardPolicy::abort(),
    };
    let props = build_propagators(&grid, &config).unwrap();

    let mut worst = 0.0f64;
    for seed in 0..20 {
        let u0 = InitialData::RandomBandlimited { kmax: 1, amp: 0.3 }
            .build(&grid, seed)
            .unwrap();
        let state = SimState::from_field(u0.clone(), 0, tau);
        let (next, _) = step(&state, &config, &props).unwrap();
        let dense = common::dense_semi_implicit_step(&dft, &grid, &u0, tau, &p);
        for (a, b) in next.u.values().iter().zip(&dense) {
            worst = worst.max((a - b).abs());
        }
    }
    let ok = worst <= 1e-10;
    criterion_line(
        7,
        "dense oracle equivalence",
        ok,
        &format!("20 seeded states on n = 4, worst sample gap {worst:.3e} (tol 1e-10)"),
    );
    assert!(ok);
}

#[test]
fn criterion_08_solvability_boundary() {
    let grid = Grid::new(128).unwrap();
    let p = params();

    let tau_max = max_admissible_tau(&p, &grid, &Scheme::SemiImplicit);
    let bound_ok = (tau_max - 0.5).abs() < 1e-15;

    let min_denom = grid
        .modes()
        .iter()
        .map(|m| 1.0 + 0.5 * p.nu * m.k_sq * m.k_sq - 0.5 * p.theta_c * m.k_sq)
        .fold(f64::INFINITY, f64::min);
    let denom_ok = min_denom > 0.0;

    let variant = SchemeConfig {
        scheme: Scheme::Variant,
        tau: 10.0,
        params: p,
        guard: GuardPolicy::abort(),
    };
    let u0 = InitialData::Constant(0.2).build(&grid, 0).unwrap();
    let out = run(u0, &variant, 100, &RunOptions::default(), |_, _| {}).unwrap();
    let variant_ok = out.abort.is_none() && out.state.step_index == 100;

    let ok = bound_ok && denom_ok && variant_ok;
    criterion_line(
        8,
        "solvability boundary",
        ok,
        &format!(
            "max tau = {tau_max}, min denominator at tau = 0.5: {min_denom:.6}, \
             variant at tau = 10 ran 100 steps: {variant_ok}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_gronwall_envelope() {
    let data = long_run();
    // Mean-free offset of l2 size 1e-6 along the neutral cos(x1) direction.
    let bump = Field::from_fn(&data.grid, |x1, _| x1.cos());
    let scale = 1e-6 / bump.norm_l2();
    let perturbed: Vec<f64> = data
        .u0
        .values()
        .iter()
        .zip(bump.values())
        .map(|(a, b)| a + scale * b)
        .collect();
    let v0_tilde = Field::from_values(&data.grid, perturbed).unwrap();

    let experiment = GapExperiment {
        config: data.config,
        n_steps: 1000,
        forcing: None,
    };
    let report = near_solution_gap(&data.u0, &v0_tilde, &experiment).unwrap();

    let mut envelope_ok = true;
    for (n, &g) in report.gap_sq.iter().enumerate() {
        let envelope = (n as f64 * data.config.tau * report.fitted_c1 / data.config.params.nu)
            .exp()
            * report.gap_sq[0];
        if g > envelope * (1.0 + 1e-9) {
            envelope_ok = false;
        }
    }
    let ok = report.fitted_c1 <= 50.0 && report.log_linear_rms <= 0.1 && envelope_ok;
    criterion_line(
        9,
        "gronwall envelope",
        ok,
        &format!(
            "fitted C1 = {:.4} (<= 50), log-gap RMS deviation {:.4} (<= 0.1)",
            report.fitted_c1, report.log_linear_rms
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_determinism_and_persistence() {
    let data = long_run();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("half.chlog");

    let opts = RunOptions {
        delta0: 1e-3,
        cadence: Some(u64::MAX),
        start_step: 0,
    };
    let first = run(data.u0.clone(), &data.config, 2500, &opts, |_, _| {}).unwrap();
    save_snapshot(&path, &first.state, data.config.tau, &data.config.params).unwrap();

    let resumed = load_snapshot(&path).unwrap().into_state().unwrap();
    let props = build_propagators(&data.grid, &data.config).unwrap();
    let mut state = resumed;
    for _ in 0..2500 {
        state = step(&state, &data.config, &props).unwrap().0;
    }

    let mut ok = state.step_index == data.final_state.step_index;
    let mut first_mismatch = None;
    for (i, (a, b)) in state
        .u
        .values()
        .iter()
        .zip(data.final_state.u.values())
        .enumerate()
    {
        if a.to_bits() != b.to_bits() {
            ok = false;
            first_mismatch = Some(i);
            break;
        }
    }
    criterion_line(
        10,
        "determinism and persistence",
        ok,
        &format!(
            "split 2500+2500 vs straight 5000: bit-identical = {ok}{}",
            first_mismatch
                .map(|i| format!(" (first mismatch at sample {i})"))
                .unwrap_or_default()
        ),
    );
    assert!(ok);
}
