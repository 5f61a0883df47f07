//! Configuration parsing, snapshot persistence and CSV emission.
//!
//! Configs are plain `key=value` lines with `#` comments; unknown keys are
//! rejected. Snapshots are little-endian binary files with the 7-byte magic
//! `CHLOG1\n`, a u16 format version, the grid size, step index, time step
//! and physical parameters, then the raw samples; a load/save round trip is
//! bit-exact so a resumed run continues on the identical trajectory. CSV
//! columns are printed with 17 significant digits so every double survives a
//! parse round trip.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::convergence::OrderFit;
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::potential::{GuardPolicy, ModelParams};
use crate::stepper::{InitialData, Scheme, SimState};

/// Run length: exactly one of a step count or a final physical time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RunLength {
    Steps(u64),
    FinalTime(f64),
}

/// A fully validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub grid_n: usize,
    pub params: ModelParams,
    pub scheme: Scheme,
    pub tau: f64,
    pub length: RunLength,
    pub init: InitialData,
    pub seed: u64,
    pub guard: GuardPolicy,
    pub cadence: Option<u64>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Steps this run executes; `t_final` must be an integer multiple of
    /// `tau`.
    pub fn n_steps(&self) -> Result<u64> {
        match self.length {
            RunLength::Steps(n) => Ok(n),
            RunLength::FinalTime(t) => {
                let ratio = t / self.tau;
                let rounded = ratio.round();
                if (ratio - rounded).abs() > 1e-6 * rounded.max(1.0) {
                    return Err(Error::Config(format!(
                        "t_final = {t} is not an integer multiple of tau = {}",
                        self.tau
                    )));
                }
                Ok(rounded as u64)
            }
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "grid_n", "nu", "theta", "theta_c", "scheme", "tau", "n_steps", "t_final", "init", "seed",
    "guard", "cadence", "out_dir",
];

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_overrides(text, &[])
}

/// Parses `key=value` lines, applying `overrides` on top before validation
/// (used by parameter sweeps).
pub fn parse_config_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value, got {:?}", lineno + 1, line))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "line {}: unknown key {:?}",
                lineno + 1,
                key
            )));
        }
        if pairs.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!(
                "line {}: duplicate key {:?}",
                lineno + 1,
                key
            )));
        }
        pairs.push((key, value));
    }
    for (key, value) in overrides {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        if let Some(slot) = pairs.iter_mut().find(|(k, _)| k == key) {
            slot.1 = value.clone();
        } else {
            pairs.push((key.clone(), value.clone()));
        }
    }
    build_config(&pairs)
}

fn get<'a>(pairs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

fn require<'a>(pairs: &'a [(String, String)], key: &str) -> Result<&'a str> {
    get(pairs, key).ok_or_else(|| Error::Config(format!("missing required key {key:?}")))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("key {key:?}: cannot parse {value:?}")))
}

fn build_config(pairs: &[(String, String)]) -> Result<RunConfig> {
    let grid_n: usize = parse_num("grid_n", require(pairs, "grid_n")?)?;
    let nu: f64 = parse_num("nu", require(pairs, "nu")?)?;
    let theta: f64 = parse_num("theta", require(pairs, "theta")?)?;
    let theta_c: f64 = parse_num("theta_c", require(pairs, "theta_c")?)?;

    if nu.is_nan() || nu <= 0.0 {
        return Err(Error::Config(format!("nu must be positive, got {nu}")));
    }
    if theta.is_nan() || theta <= 0.0 {
        return Err(Error::Config(format!("theta must be positive, got {theta}")));
    }
    if theta.is_nan() || theta_c.is_nan() || theta >= theta_c {
        return Err(Error::Config(format!(
            "theta must be < theta_c (theta = {theta}, theta_c = {theta_c})"
        )));
    }
    let params = ModelParams::new(nu, theta, theta_c)?;

    let scheme = match require(pairs, "scheme")? {
        "semi_implicit" => Scheme::SemiImplicit,
        "variant" => Scheme::Variant,
        other => match other.strip_prefix("galerkin:") {
            Some(cut) => Scheme::Galerkin {
                cutoff: parse_num("scheme", cut)?,
            },
            None => {
                return Err(Error::Config(format!(
                    "scheme must be semi_implicit, variant or galerkin:<N>, got {other:?}"
                )))
            }
        },
    };

    let tau_text = require(pairs, "tau")?;
    let tau = if tau_text == "auto" {
        if matches!(scheme, Scheme::Variant) {
            return Err(Error::Config(
                "tau=auto needs a scheme with a finite solvability bound; \
                 give the variant scheme an explicit tau"
                    .into(),
            ));
        }
        0.5 * 2.0 * nu / (theta_c * theta_c)
    } else {
        parse_num("tau", tau_text)?
    };
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::Config(format!("tau must be positive, got {tau}")));
    }
    if !matches!(scheme, Scheme::Variant) {
        let bound = 2.0 * nu / (theta_c * theta_c);
        if tau > bound {
            return Err(Error::Config(format!(
                "tau = {tau} is inadmissible: the solvability bound is 2 nu / theta_c^2 = {bound}"
            )));
        }
    }

    let length = match (get(pairs, "n_steps"), get(pairs, "t_final")) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give exactly one of n_steps / t_final, not both".into(),
            ))
        }
        (None, None) => {
            return Err(Error::Config(
                "give exactly one of n_steps / t_final".into(),
            ))
        }
        (Some(n), None) => RunLength::Steps(parse_num("n_steps", n)?),
        (None, Some(t)) => {
            let t: f64 = parse_num("t_final", t)?;
            if t.is_nan() || t <= 0.0 {
                return Err(Error::Config(format!("t_final must be positive, got {t}")));
            }
            RunLength::FinalTime(t)
        }
    };

    let init = parse_init(require(pairs, "init")?)?;
    let seed: u64 = match get(pairs, "seed") {
        Some(s) => parse_num("seed", s)?,
        None => 0,
    };
    let guard = match get(pairs, "guard") {
        None | Some("abort") => GuardPolicy::abort(),
        Some("saturate") => GuardPolicy::saturate(),
        Some(other) => {
            return Err(Error::Config(format!(
                "guard must be abort or saturate, got {other:?}"
            )))
        }
    };
    let cadence = match get(pairs, "cadence") {
        Some(c) => {
            let c: u64 = parse_num("cadence", c)?;
            if c == 0 {
                return Err(Error::Config("cadence must be at least 1".into()));
            }
            Some(c)
        }
        None => None,
    };
    let out_dir = PathBuf::from(get(pairs, "out_dir").unwrap_or("out"));

    // Cheap structural checks that don't need the grid built.
    if !grid_n.is_multiple_of(2) || !(4..=crate::grid::MAX_GRID_N).contains(&grid_n) {
        return Err(Error::Config(format!(
            "grid_n must be even and within 4..=4096, got {grid_n}"
        )));
    }
    if let Scheme::Galerkin { cutoff } = scheme {
        if cutoff == 0 || cutoff > grid_n / 2 {
            return Err(Error::Config(format!(
                "galerkin cutoff {cutoff} out of range 1..={}",
                grid_n / 2
            )));
        }
    }

    Ok(RunConfig {
        grid_n,
        params,
        scheme,
        tau,
        length,
        init,
        seed,
        guard,
        cadence,
        out_dir,
    })
}

fn parse_init(text: &str) -> Result<InitialData> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        ["constant", c] => Ok(InitialData::Constant(parse_num("init", c)?)),
        ["single_mode", c, k1, k2, amp] => Ok(InitialData::SingleMode {
            mean: parse_num("init", c)?,
            k: [parse_num("init", k1)?, parse_num("init", k2)?],
            amp: parse_num("init", amp)?,
        }),
        ["random", kmax, amp] => Ok(InitialData::RandomBandlimited {
            kmax: parse_num("init", kmax)?,
            amp: parse_num("init", amp)?,
        }),
        ["two_bump"] => Ok(InitialData::TwoBump),
        _ => Err(Error::Config(format!(
            "init must be constant:<c>, single_mode:<c>:<k1>:<k2>:<amp>, \
             random:<kmax>:<amp> or two_bump, got {text:?}"
        ))),
    }
}

pub const SNAPSHOT_MAGIC: &[u8; 7] = b"CHLOG1\n";
pub const SNAPSHOT_VERSION: u16 = 1;

/// Decoded snapshot header plus samples.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub n: usize,
    pub step: u64,
    pub tau: f64,
    pub nu: f64,
    pub theta: f64,
    pub theta_c: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.nu, self.theta, self.theta_c)
    }

    /// Rebuilds the simulation state; the spectrum is recomputed from the
    /// samples, which is exactly how a live run maintains it.
    pub fn into_state(self) -> Result<SimState> {
        let grid = Grid::new(self.n)?;
        let field = Field::from_values(&grid, self.values)?;
        Ok(SimState::from_field(field, self.step, self.tau))
    }
}

pub fn save_snapshot(
    path: &Path,
    state: &SimState,
    tau: f64,
    params: &ModelParams,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&(state.u.grid().n() as u32).to_le_bytes())?;
    w.write_all(&state.step_index.to_le_bytes())?;
    w.write_all(&tau.to_le_bytes())?;
    w.write_all(&params.nu.to_le_bytes())?;
    w.write_all(&params.theta.to_le_bytes())?;
    w.write_all(&params.theta_c.to_le_bytes())?;
    for v in state.u.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<Snapshot> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 7];
    read_exact_or_short(&mut r, &mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::SnapshotMagic);
    }

    let mut b2 = [0u8; 2];
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];

    read_exact_or_short(&mut r, &mut b2)?;
    let version = u16::from_le_bytes(b2);
    if version != SNAPSHOT_VERSION {
        return Err(Error::SnapshotVersion(version));
    }

    read_exact_or_short(&mut r, &mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    read_exact_or_short(&mut r, &mut b8)?;
    let step = u64::from_le_bytes(b8);
    read_exact_or_short(&mut r, &mut b8)?;
    let tau = f64::from_le_bytes(b8);
    read_exact_or_short(&mut r, &mut b8)?;
    let nu = f64::from_le_bytes(b8);
    read_exact_or_short(&mut r, &mut b8)?;
    let theta = f64::from_le_bytes(b8);
    read_exact_or_short(&mut r, &mut b8)?;
    let theta_c = f64::from_le_bytes(b8);

    let expected = n
        .checked_mul(n)
        .and_then(|p| p.checked_mul(8))
        .ok_or(Error::SnapshotLength {
            expected: usize::MAX,
            got: 0,
        })?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != expected {
        return Err(Error::SnapshotLength {
            expected,
            got: payload.len(),
        });
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    Ok(Snapshot {
        n,
        step,
        tau,
        nu,
        theta,
        theta_c,
        values,
    })
}

fn read_exact_or_short(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::SnapshotLength {
                expected: buf.len(),
                got: 0,
            }
        } else {
            Error::Io(e)
        }
    })
}

/// Formats with 17 significant digits; parsing the text recovers the exact
/// double.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

pub const DIAGNOSTICS_HEADER: &str =
    "step,time,energy,mass,margin,grad_K_l2,g_mean,g_fluct,h1,h3,h5,identity_residual";

/// Streaming writer for the per-step diagnostics CSV; each row is flushed so
/// partial output survives an abort.
pub struct DiagnosticsWriter {
    out: BufWriter<File>,
}

impl DiagnosticsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{DIAGNOSTICS_HEADER}")?;
        out.flush()?;
        Ok(DiagnosticsWriter { out })
    }

    pub fn write(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            fmt_g17(r.time),
            fmt_g17(r.energy),
            fmt_g17(r.mass),
            fmt_g17(r.margin),
            fmt_g17(r.grad_k_l2),
            fmt_g17(r.g_mean),
            fmt_g17(r.g_fluct_l2),
            fmt_g17(r.h1),
            fmt_g17(r.h3),
            fmt_g17(r.h5),
            fmt_g17(r.identity_residual),
        )?;
        self.out.flush()?;
        Ok(())
    }
}

/// Writes the `(tau, error)` curve with its logs.
pub fn write_error_curve(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "tau,error,log_tau,log_error")?;
    for &(tau, err) in points {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_g17(tau),
            fmt_g17(err),
            fmt_g17(tau.ln()),
            fmt_g17(err.ln())
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the fitted-order summary row.
pub fn write_order_summary(path: &Path, fit: &OrderFit) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "p,fit_residual")?;
    writeln!(out, "{},{}", fmt_g17(fit.p), fmt_g17(fit.fit_residual))?;
    out.flush()?;
    Ok(())
}
