//! Time integration driven by a [`RunConfig`].

use std::path::{Path, PathBuf};

use cahn_hilliard::diagnostics::{self, EnergyRecord};
use cahn_hilliard::random::perturbed_constant;
use cahn_hilliard::scheme::{self, Forcing, ManufacturedSolution, SchemeParams, StepState};
use cahn_hilliard::{Field, GridSpec, SpectralPlan};
use log::info;
use serde::Serialize;

use crate::config::{Format, InitialKind, RunConfig};
use crate::error::CliError;
use crate::output::{self, EnergyWriter};

pub const ENERGY_FILE: &str = "energy.csv";
pub const METADATA_FILE: &str = "metadata.toml";

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub requested: f64,
    pub t: f64,
    pub step: usize,
    pub files: Vec<PathBuf>,
}

/// Everything a run measured, independent of what was written to disk.
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// One record per step, starting with the initial state as step 0.
    pub records: Vec<EnergyRecord>,
    pub beta0: f64,
    /// `max_k |mean(phi^k) - beta0| / (1 + |beta0|)`
    pub max_mass_drift: f64,
    /// Largest `(E_mod^{k+1} - E_mod^k) / |E_mod^k|` over all steps, including
    /// the first step of each segment against the segment's starting value.
    pub worst_energy_increase: f64,
    pub max_iterations: usize,
    pub total_iterations: usize,
    pub worst_tail_ratio: f64,
    pub worst_objective_increase: f64,
    pub h1_initial: f64,
    pub h1_max: f64,
    pub snapshots: Vec<SnapshotRecord>,
    pub final_field: Field,
    pub final_time: f64,
    /// `(linf, l2)` error against the exact solution for manufactured runs.
    pub manufactured_error: Option<(f64, f64)>,
}

impl RunSummary {
    pub fn steps(&self) -> usize {
        self.records.len() - 1
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    version: &'static str,
    seed: u64,
    status: String,
    steps: usize,
    final_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_linf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_l2: Option<f64>,
    config: &'a RunConfig,
}

fn write_metadata(
    dir: &Path,
    cfg: &RunConfig,
    status: String,
    summary: Option<&RunSummary>,
) -> Result<(), CliError> {
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.initial.seed,
        status,
        steps: summary.map_or(0, |s| s.steps()),
        final_time: summary.map_or(f64::NAN, |s| s.final_time),
        error_linf: summary.and_then(|s| s.manufactured_error.map(|e| e.0)),
        error_l2: summary.and_then(|s| s.manufactured_error.map(|e| e.1)),
        config: cfg,
    };
    let text = toml::to_string(&meta).expect("metadata serializes");
    let path = dir.join(METADATA_FILE);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

/// Number of steps of size `dt` covering `span`; rejects fractional counts.
pub fn step_count(span: f64, dt: f64) -> Result<usize, CliError> {
    let n = (span / dt).round();
    if n < 1.0 || (n * dt - span).abs() > 1e-9 * span.max(1.0) {
        return Err(CliError::Config(format!(
            "segment of length {span} is not a whole number of steps of {dt}"
        )));
    }
    Ok(n as usize)
}

struct Sinks<'a> {
    dir: Option<&'a Path>,
    energy: Option<EnergyWriter>,
    formats: &'a [Format],
    every: usize,
    pending: Vec<f64>,
    snapshots: Vec<SnapshotRecord>,
}

impl Sinks<'_> {
    fn record(&mut self, r: &EnergyRecord) -> Result<(), CliError> {
        if let Some(w) = &mut self.energy {
            if r.step % self.every == 0 {
                w.record(r)?;
            }
        }
        Ok(())
    }

    fn snapshots_due(&mut self, phi: &Field, t: f64, step: usize, dt: f64) -> Result<(), CliError> {
        while let Some(&req) = self.pending.first() {
            if t < req - 1e-9 * dt {
                break;
            }
            self.pending.remove(0);
            let mut files = Vec::new();
            if let Some(dir) = self.dir {
                for fmt in self.formats {
                    let path = match fmt {
                        Format::Chf1 => dir.join(format!("snap_{step:08}.chf1")),
                        Format::Pgm => dir.join(format!("snap_{step:08}.pgm")),
                    };
                    if !files.contains(&path) {
                        match fmt {
                            Format::Chf1 => output::write_snapshot(phi, t, &path)?,
                            Format::Pgm => output::write_pgm(phi, &path)?,
                        }
                        files.push(path);
                    }
                }
            }
            self.snapshots.push(SnapshotRecord {
                requested: req,
                t,
                step,
                files,
            });
        }
        Ok(())
    }
}

fn initial_state(
    cfg: &RunConfig,
    grid: GridSpec,
) -> Result<(Field, f64, Option<ManufacturedSolution>), CliError> {
    let init = &cfg.initial;
    Ok(match init.kind {
        InitialKind::Random => (
            perturbed_constant(grid, init.mean, init.amplitude, init.seed),
            0.0,
            None,
        ),
        InitialKind::Manufactured => {
            let exact = ManufacturedSolution::new(cfg.physics.eps, cfg.domain.length);
            (exact.exact_field(grid, 0.0), 0.0, Some(exact))
        }
        InitialKind::File => {
            let path = init.path.as_ref().expect("validated");
            let (field, t) = output::read_snapshot(path)?;
            if field.grid() != &grid {
                return Err(CliError::Config(format!(
                    "{}: snapshot grid {} points on L = {} does not match the configured {} on L = {}",
                    path.display(),
                    field.grid().points(),
                    field.grid().length(),
                    grid.points(),
                    grid.length()
                )));
            }
            (field, t, None)
        }
    })
}

/// Runs the configured simulation. With `out_dir`, writes the energy log,
/// snapshots and metadata there; otherwise only the summary is produced.
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_metadata(dir, cfg, "running".into(), None)?;
    }
    let result = run_inner(cfg, out_dir);
    if let Some(dir) = out_dir {
        let status = match &result {
            Ok(_) => "completed".to_string(),
            Err(e) => format!("failed: {e}"),
        };
        write_metadata(dir, cfg, status, result.as_ref().ok())?;
    }
    result
}

fn run_inner(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunSummary, CliError> {
    let grid = GridSpec::square(cfg.domain.length, cfg.grid.m)?;
    let plan = SpectralPlan::new(grid)?;
    let psd = cfg.solver.psd();
    let (phi0, t0, exact) = initial_state(cfg, grid)?;
    let source: Option<&dyn Forcing> = exact.as_ref().map(|e| e as &dyn Forcing);

    let mut pending: Vec<f64> = cfg.output.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    let mut sinks = Sinks {
        dir: out_dir,
        energy: out_dir
            .map(|d| EnergyWriter::create(&d.join(ENERGY_FILE)))
            .transpose()?,
        formats: &cfg.output.formats,
        every: cfg.output.energy_every,
        pending,
        snapshots: Vec::new(),
    };

    let eps = cfg.physics.eps;
    let first_dt = cfg.schedule[0].dt;
    let params0 = SchemeParams::new(eps, cfg.physics.a, first_dt)?;
    let mut state: StepState = if cfg.initial.kind == InitialKind::File {
        scheme::restart_flat(phi0, t0)
    } else {
        scheme::ghost_init_at(phi0, &params0, source, t0)?
    };
    let beta0 = state.beta0;
    let h1_initial = diagnostics::h1_norm_sq(&state.phi_curr)?;
    let initial_emod =
        diagnostics::modified_energy(&state.phi_curr, &state.phi_prev, eps, first_dt, &plan)?;
    let r0 = EnergyRecord {
        step: 0,
        t: t0,
        mass: state.phi_curr.mean(),
        energy: diagnostics::energy(&state.phi_curr, eps)?,
        modified_energy: initial_emod,
        psd_iters: 0,
        residual: 0.0,
    };
    sinks.record(&r0)?;
    sinks.snapshots_due(&state.phi_curr, t0, 0, first_dt)?;

    let mut summary = RunSummary {
        records: vec![r0],
        beta0,
        max_mass_drift: 0.0,
        worst_energy_increase: f64::NEG_INFINITY,
        max_iterations: 0,
        total_iterations: 0,
        worst_tail_ratio: 0.0,
        worst_objective_increase: f64::NEG_INFINITY,
        h1_initial,
        h1_max: h1_initial,
        snapshots: Vec::new(),
        final_field: state.phi_curr.clone(),
        final_time: t0,
        manufactured_error: None,
    };

    let mut step_index = 0usize;
    let mut prev_emod = initial_emod;
    let mut first_segment = true;
    for seg in &cfg.schedule {
        let t_start = state.t;
        if seg.t_end <= t_start + 1e-12 * seg.t_end.abs().max(1.0) {
            continue;
        }
        let params = SchemeParams::new(eps, cfg.physics.a, seg.dt)?;
        if !first_segment {
            // the two-step scheme restarts with phi^{-1} = phi^0 whenever dt changes
            state = scheme::restart_flat(state.phi_curr, t_start);
            prev_emod = diagnostics::energy(&state.phi_curr, eps)?;
        }
        first_segment = false;
        let n = step_count(seg.t_end - t_start, seg.dt)?;
        info!("segment dt = {} from t = {t_start} to {} ({n} steps)", seg.dt, seg.t_end);
        for j in 1..=n {
            let (mut next, diag) = scheme::step(&state, &params, &plan, &psd, source)?;
            next.t = if j == n { seg.t_end } else { t_start + j as f64 * seg.dt };
            step_index += 1;

            let stats = &diag.solve;
            summary.max_iterations = summary.max_iterations.max(stats.iterations);
            summary.total_iterations += stats.iterations;
            if let Some(r) = stats.tail_ratio() {
                summary.worst_tail_ratio = summary.worst_tail_ratio.max(r);
            }
            summary.worst_objective_increase = summary
                .worst_objective_increase
                .max(stats.worst_objective_increase());
            summary.max_mass_drift = summary
                .max_mass_drift
                .max((diag.mass - beta0).abs() / (1.0 + beta0.abs()));
            summary.worst_energy_increase = summary
                .worst_energy_increase
                .max((diag.modified_energy - prev_emod) / prev_emod.abs().max(f64::MIN_POSITIVE));
            prev_emod = diag.modified_energy;
            summary.h1_max = summary.h1_max.max(diag.h1_sq);

            let rec = EnergyRecord {
                step: step_index,
                t: next.t,
                ..EnergyRecord::from_step(&diag)
            };
            sinks.record(&rec)?;
            summary.records.push(rec);
            sinks.snapshots_due(&next.phi_curr, next.t, step_index, seg.dt)?;
            if step_index % 1000 == 0 {
                info!(
                    "step {step_index}, t = {:.4}, E = {:.8e}, PSD iterations {}",
                    next.t, diag.energy, stats.iterations
                );
            }
            state = next;
        }
    }

    summary.manufactured_error = match &exact {
        Some(e) => {
            let err = state
                .phi_curr
                .zip_map(&e.exact_field(grid, state.t), |a, b| a - b)?;
            Some((err.norm_linf(), err.norm_l2()))
        }
        None => None,
    };
    summary.snapshots = sinks.snapshots;
    summary.final_time = state.t;
    summary.final_field = state.phi_curr;
    Ok(summary)
}
