//! Command-line driver: `run`, `convergence`, `sweep` and `inspect`.
//!
//! Exit codes: 0 on success, 1 on configuration/usage errors, 2 when a run
//! hits the guard (singularity abort). Partial CSV output is flushed row by
//! row, so an aborted run leaves its diagnostics up to the failing step.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chlog_core::convergence::{run_study, ConvergenceStudy};
use chlog_core::io::{
    self, load_snapshot, parse_config, parse_config_with_overrides, save_snapshot,
    DiagnosticsWriter, RunConfig,
};
use chlog_core::{run, Error, Grid, RunOptions, SimState};

const USAGE: &str = "\
usage:
  chlog run --config FILE [--snapshot-every K] [--resume SNAPSHOT] [--force]
  chlog convergence --config FILE --taus A,B,C[,..] --tau-ref R --t-final T
  chlog sweep --config FILE --vary KEY=V1,V2[,..]
  chlog inspect --snapshot FILE

Configs are key=value lines; see README for the key set. Exit codes:
0 success, 1 config error, 2 guard abort.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::GuardAbort { .. } | Error::StudyAborted { .. } => 2,
        _ => 1,
    }
}

fn usage_err(msg: &str) -> Error {
    Error::Config(format!("{msg}\n{USAGE}"))
}

fn dispatch(args: &[String]) -> Result<(), Error> {
    match args.first().map(String::as_str) {
        Some("run") => cmd_run(&args[1..]),
        Some("convergence") => cmd_convergence(&args[1..]),
        Some("sweep") => cmd_sweep(&args[1..]),
        Some("inspect") => cmd_inspect(&args[1..]),
        Some("--help") | Some("-h") | Some("help") => {
            println!("{USAGE}");
            Ok(())
        }
        Some(other) => Err(usage_err(&format!("unknown command {other:?}"))),
        None => Err(usage_err("missing command")),
    }
}

/// Pulls `--flag value` pairs and bare `--switch`es out of an argument list.
struct Flags {
    pairs: Vec<(String, String)>,
    switches: Vec<String>,
}

impl Flags {
    fn parse(args: &[String], value_flags: &[&str], switch_flags: &[&str]) -> Result<Flags, Error> {
        let mut pairs = Vec::new();
        let mut switches = Vec::new();
        let mut i = 0;
        while i < args.len() {
            let flag = args[i].as_str();
            if switch_flags.contains(&flag) {
                switches.push(flag.to_string());
                i += 1;
            } else if value_flags.contains(&flag) {
                let value = args
                    .get(i + 1)
                    .ok_or_else(|| usage_err(&format!("{flag} needs a value")))?;
                pairs.push((flag.to_string(), value.clone()));
                i += 2;
            } else {
                return Err(usage_err(&format!("unknown flag {flag:?}")));
            }
        }
        Ok(Flags { pairs, switches })
    }

    fn get(&self, flag: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(f, _)| f == flag)
            .map(|(_, v)| v.as_str())
    }

    fn require(&self, flag: &str) -> Result<&str, Error> {
        self.get(flag)
            .ok_or_else(|| usage_err(&format!("missing required flag {flag}")))
    }

    fn has(&self, flag: &str) -> bool {
        self.switches.iter().any(|s| s == flag)
    }
}

fn load_config(path: &str) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {path:?}: {e}")))?;
    parse_config(&text)
}

fn cmd_run(args: &[String]) -> Result<(), Error> {
    let flags = Flags::parse(
        args,
        &["--config", "--snapshot-every", "--resume"],
        &["--force"],
    )?;
    let config = load_config(flags.require("--config")?)?;
    let snapshot_every: Option<u64> = match flags.get("--snapshot-every") {
        Some(k) => {
            let k: u64 = k
                .parse()
                .map_err(|_| usage_err("--snapshot-every needs a positive integer"))?;
            if k == 0 {
                return Err(usage_err("--snapshot-every needs a positive integer"));
            }
            Some(k)
        }
        None => None,
    };

    let grid = Grid::new(config.grid_n)?;
    let n_steps = config.n_steps()?;

    // Either fresh initial data or a resumed snapshot; a snapshot carries
    // its physical parameters and refuses a mismatched config unless forced.
    let (initial, start_step) = match flags.get("--resume") {
        None => (config.init.build(&grid, config.seed)?, 0),
        Some(path) => {
            let snap = load_snapshot(Path::new(path))?;
            if snap.n != config.grid_n {
                return Err(Error::Config(format!(
                    "snapshot grid n = {} does not match config grid_n = {}",
                    snap.n, config.grid_n
                )));
            }
            let same = snap.tau == config.tau
                && snap.nu == config.params.nu
                && snap.theta == config.params.theta
                && snap.theta_c == config.params.theta_c;
            if !same && !flags.has("--force") {
                return Err(Error::Config(format!(
                    "snapshot parameters (tau = {}, nu = {}, theta = {}, theta_c = {}) \
                     do not match the config; pass --force to resume anyway",
                    snap.tau, snap.nu, snap.theta, snap.theta_c
                )));
            }
            let step = snap.step;
            let state = snap.into_state()?;
            (state.u, step)
        }
    };

    fs::create_dir_all(&config.out_dir)?;
    let csv_path = config.out_dir.join("diagnostics.csv");
    let mut writer = DiagnosticsWriter::create(&csv_path)?;
    let mut hook_err: Option<Error> = None;

    let opts = RunOptions {
        delta0: 1e-6,
        cadence: config.cadence,
        start_step,
    };
    let out_dir = config.out_dir.clone();
    let tau = config.tau;
    let params = config.params;
    let outcome = run(
        initial,
        &chlog_core::SchemeConfig {
            scheme: config.scheme,
            tau,
            params,
            guard: config.guard,
        },
        n_steps,
        &opts,
        |state, record| {
            if hook_err.is_some() {
                return;
            }
            if let Err(e) = writer.write(record) {
                hook_err = Some(e);
                return;
            }
            if let Some(k) = snapshot_every {
                if state.step_index > start_step && state.step_index % k == 0 {
                    if let Err(e) = write_snapshot_file(&out_dir, state, tau, &params) {
                        hook_err = Some(e);
                    }
                }
            }
        },
    )?;
    if let Some(e) = hook_err {
        return Err(e);
    }

    if let Some(abort) = outcome.abort {
        return Err(Error::GuardAbort {
            step: abort.step,
            index: abort.index,
            value: abort.value,
        });
    }

    if snapshot_every.is_some() {
        write_snapshot_file(&config.out_dir, &outcome.state, tau, &params)?;
    }

    let last = outcome.records.last().expect("at least the initial record");
    println!(
        "run complete: {} steps, final time {}, energy {}, mass {}, margin {}",
        outcome.state.step_index - start_step,
        io::fmt_g17(last.time),
        io::fmt_g17(last.energy),
        io::fmt_g17(last.mass),
        io::fmt_g17(last.margin),
    );
    if outcome.saturated > 0 {
        println!("saturation clamps: {}", outcome.saturated);
    }
    println!("diagnostics: {}", csv_path.display());
    Ok(())
}

fn write_snapshot_file(
    dir: &Path,
    state: &SimState,
    tau: f64,
    params: &chlog_core::ModelParams,
) -> Result<(), Error> {
    let path = dir.join(format!("snapshot_{:08}.chlog", state.step_index));
    save_snapshot(&path, state, tau, params)
}

fn cmd_convergence(args: &[String]) -> Result<(), Error> {
    let flags = Flags::parse(args, &["--config", "--taus", "--tau-ref", "--t-final"], &[])?;
    let config = load_config(flags.require("--config")?)?;

    let taus: Vec<f64> = flags
        .require("--taus")?
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| usage_err(&format!("bad tau value {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    let tau_ref: f64 = flags
        .require("--tau-ref")?
        .parse()
        .map_err(|_| usage_err("bad --tau-ref value"))?;
    let t_final: f64 = flags
        .require("--t-final")?
        .parse()
        .map_err(|_| usage_err("bad --t-final value"))?;

    let study = ConvergenceStudy {
        grid_n: config.grid_n,
        params: config.params,
        guard: config.guard,
        init: config.init,
        seed: config.seed,
        t_final,
        taus,
        tau_ref,
    };
    let report = run_study(&study)?;

    fs::create_dir_all(&config.out_dir)?;
    let curve_path = config.out_dir.join("error_curve.csv");
    let summary_path = config.out_dir.join("convergence_summary.csv");
    io::write_error_curve(&curve_path, &report.points)?;
    io::write_order_summary(&summary_path, &report.order)?;

    for (tau, err) in &report.points {
        println!("tau {} -> error {}", io::fmt_g17(*tau), io::fmt_g17(*err));
    }
    println!(
        "observed order p = {}, fit residual = {}",
        io::fmt_g17(report.order.p),
        io::fmt_g17(report.order.fit_residual)
    );
    println!("curve: {}", curve_path.display());
    println!("summary: {}", summary_path.display());
    Ok(())
}

fn cmd_sweep(args: &[String]) -> Result<(), Error> {
    let flags = Flags::parse(args, &["--config", "--vary"], &[])?;
    let config_path = flags.require("--config")?;
    let text = fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read config {config_path:?}: {e}")))?;

    let vary = flags.require("--vary")?;
    let (key, values) = vary
        .split_once('=')
        .ok_or_else(|| usage_err("--vary expects KEY=V1,V2,..."))?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
    if values.is_empty() {
        return Err(usage_err("--vary needs at least one value"));
    }

    // Validate every variant up front so a typo fails before any run starts.
    let base = parse_config(&text)?;
    let mut variants = Vec::new();
    for value in &values {
        let cfg =
            parse_config_with_overrides(&text, &[(key.to_string(), value.clone())])?;
        variants.push((value.clone(), cfg));
    }

    let results: Vec<(String, Result<(), Error>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = variants
            .into_iter()
            .map(|(value, mut cfg)| {
                let label = format!("{key}={value}");
                let dir_name = format!("sweep_{key}_{value}");
                cfg.out_dir = base.out_dir.join(dir_name);
                scope.spawn(move || (label, sweep_one(cfg)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut worst: Option<Error> = None;
    for (label, result) in results {
        match result {
            Ok(()) => println!("sweep {label}: ok"),
            Err(e) => {
                println!("sweep {label}: {e}");
                let replace = match (&worst, &e) {
                    (None, _) => true,
                    // Guard aborts outrank config problems in the exit code.
                    (Some(w), e) => exit_code_for(e) > exit_code_for(w),
                };
                if replace {
                    worst = Some(e);
                }
            }
        }
    }
    match worst {
        None => Ok(()),
        Some(e) => Err(e),
    }
}

fn sweep_one(config: RunConfig) -> Result<(), Error> {
    let grid = Grid::new(config.grid_n)?;
    let initial = config.init.build(&grid, config.seed)?;
    let n_steps = config.n_steps()?;

    fs::create_dir_all(&config.out_dir)?;
    let mut writer = DiagnosticsWriter::create(&config.out_dir.join("diagnostics.csv"))?;
    let mut hook_err: Option<Error> = None;

    let outcome = run(
        initial,
        &chlog_core::SchemeConfig {
            scheme: config.scheme,
            tau: config.tau,
            params: config.params,
            guard: config.guard,
        },
        n_steps,
        &RunOptions {
            delta0: 1e-6,
            cadence: config.cadence,
            start_step: 0,
        },
        |_, record| {
            if hook_err.is_none() {
                if let Err(e) = writer.write(record) {
                    hook_err = Some(e);
                }
            }
        },
    )?;
    if let Some(e) = hook_err {
        return Err(e);
    }
    if let Some(abort) = outcome.abort {
        return Err(Error::GuardAbort {
            step: abort.step,
            index: abort.index,
            value: abort.value,
        });
    }
    Ok(())
}

fn cmd_inspect(args: &[String]) -> Result<(), Error> {
    let flags = Flags::parse(args, &["--snapshot"], &[])?;
    let path = PathBuf::from(flags.require("--snapshot")?);
    let snap = load_snapshot(&path)?;

    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &v in &snap.values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    let mean = sum / snap.values.len() as f64;

    println!("n = {}", snap.n);
    println!("step = {}", snap.step);
    println!("tau = {}", io::fmt_g17(snap.tau));
    println!("nu = {}", io::fmt_g17(snap.nu));
    println!("theta = {}", io::fmt_g17(snap.theta));
    println!("theta_c = {}", io::fmt_g17(snap.theta_c));
    println!("min = {}", io::fmt_g17(min));
    println!("max = {}", io::fmt_g17(max));
    println!("mean = {}", io::fmt_g17(mean));

    if snap.params().is_err() {
        eprintln!("warning: snapshot parameters fail validation");
    }
    Ok(())
}
