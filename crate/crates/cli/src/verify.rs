//! Verification commands: each produces a CSV report plus pass/fail checks.

use std::fmt::Write as _;

use cahn_hilliard::verification::{
    self, ConvergenceConfig, ConvergenceOutcome, InequalityReport, RefinementReport,
    TestFunction, TruncatedOperator,
};
use cahn_hilliard::{Dim, GridSpec};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub csv: String,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `Err(Verification)` naming every failed check.
    pub fn into_result(self) -> Result<Self, CliError> {
        if self.passed() {
            return Ok(self);
        }
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect();
        Err(CliError::Verification(failed.join("; ")))
    }
}

pub fn in_band(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

/// Checks that every consecutive `l2` rate of a report lies in `[lo, hi]`.
fn rate_check(report: &RefinementReport, lo: f64, hi: f64) -> Check {
    let rates: Vec<f64> = report.rows.iter().filter_map(|r| r.rate_l2).collect();
    let ok = !rates.is_empty() && rates.iter().all(|&r| in_band(r, lo, hi));
    Check::new(
        report.name.clone(),
        ok,
        format!("l2 rates {rates:.3?}, required in [{lo}, {hi}]"),
    )
}

pub const TRUNCATION_LEVELS: [usize; 4] = [32, 64, 128, 256];

/// Laplacian truncation in 2-D for a single mode and a non-band-limited
/// function, plus the first-derivative variant in 1-D and 2-D.
pub fn truncation(length: f64) -> Result<Outcome, CliError> {
    let mode = TestFunction::Mode { kx: 1, ky: 2 };
    let cases = [
        (Dim::Two, mode, TruncatedOperator::Laplacian),
        (Dim::Two, TestFunction::ExpSinCos, TruncatedOperator::Laplacian),
        (Dim::One, TestFunction::ExpSinCos, TruncatedOperator::Laplacian),
        (Dim::One, TestFunction::ExpSinCos, TruncatedOperator::FirstDerivative),
        (Dim::Two, mode, TruncatedOperator::FirstDerivative),
    ];
    let mut out = Outcome::default();
    for (dim, func, op) in cases {
        let report = verification::truncation_study(dim, func, op, length, &TRUNCATION_LEVELS)?;
        out.csv.push_str(&report.to_csv());
        let mut check = rate_check(&report, 3.9, 4.1);
        check.name = format!("{} ({}-D)", check.name, dim.count());
        out.checks.push(check);
    }
    Ok(out)
}

pub const SYMBOL_LEVELS: [usize; 6] = [16, 32, 64, 128, 256, 512];

pub fn symbols(length: f64) -> Result<Outcome, CliError> {
    let report = verification::symbol_bound_study(length, &SYMBOL_LEVELS)?;
    let last = report.rows.last().expect("levels").ratio;
    Ok(Outcome {
        csv: report.to_csv(),
        checks: vec![
            Check::new(
                "symbol ratio bounded",
                report.bounded(),
                format!("max R = {:.6e}, 2 R(512) = {:.6e}", report.max_ratio(), 2.0 * last),
            ),
            Check::new(
                "symbol lower bound",
                report.all_nonnegative(),
                format!(
                    "min h^2 (lambda + k^2) = {:.3e}",
                    report.rows.iter().map(|r| r.min_gap).fold(f64::INFINITY, f64::min)
                ),
            ),
        ],
    })
}

pub const INEQUALITY_LEVELS: [usize; 3] = [32, 64, 128];

/// Norm inequalities at each `m` in `levels` with `trials` random fields each.
pub fn inequalities(
    length: f64,
    levels: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Outcome, CliError> {
    if trials == 0 {
        return Err(CliError::Usage("inequality study needs at least one trial".into()));
    }
    let mut out = Outcome {
        csv: InequalityReport::csv_header().to_string(),
        checks: Vec::new(),
    };
    let mut ratios = Vec::new();
    for (i, &m) in levels.iter().enumerate() {
        let grid = GridSpec::square(length, m)?;
        let r = verification::inequality_study(grid, trials, seed.wrapping_add(i as u64))?;
        out.csv.push_str(&r.csv_row());
        out.checks.push(Check::new(
            format!("norm inequalities m = {m}"),
            r.passed(),
            format!(
                "{} + {} violations in {trials} trials, min slack {:.3e} / {:.3e}",
                r.interpolation_violations,
                r.laplacian_violations,
                r.interpolation_min_slack,
                r.laplacian_min_slack
            ),
        ));
        ratios.push(r.embedding_ratio_max);
    }
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    writeln!(out.csv, "# embedding ratio max across levels: {ratios:.4?}").unwrap();
    if ratios.len() > 1 {
        out.checks.push(Check::new(
            "embedding ratio bounded across resolutions",
            hi < 2.0 * lo,
            format!("ratios {ratios:.4?}"),
        ));
    }
    Ok(out)
}

/// Reference manufactured-solution errors: `(m, linf, l2)`.
pub const REFERENCE_ERRORS: [(usize, f64, f64); 4] = [
    (16, 5.4719e-5, 9.1073e-5),
    (32, 3.5430e-6, 5.7279e-6),
    (64, 2.2333e-7, 3.5846e-7),
    (128, 1.3961e-8, 2.2367e-8),
];

pub fn convergence_checks(out: &ConvergenceOutcome, solver_max_iter: usize) -> Vec<Check> {
    let report = &out.report;
    let finest = report.finest_rates(2);
    let rates_ok = finest.len() == 2
        && finest
            .iter()
            .all(|&(l2, linf)| in_band(l2, 3.8, 4.1) && in_band(linf, 3.8, 4.1));
    let mut factors = Vec::new();
    for row in &report.rows {
        if let Some(&(_, linf, l2)) = REFERENCE_ERRORS.iter().find(|r| r.0 == row.m) {
            let f = |a: f64, b: f64| (a / b).max(b / a);
            factors.push((row.m, f(row.error_linf, linf), f(row.error_l2, l2)));
        }
    }
    let factors_ok = !factors.is_empty() && factors.iter().all(|&(_, a, b)| a <= 5.0 && b <= 5.0);
    let solver_ok = out.levels.iter().all(|l| {
        l.max_iterations <= solver_max_iter
            && l.worst_tail_ratio < 1.0
            && l.worst_objective_increase <= 1e-12
    });
    vec![
        Check::new(
            "finest-pair rates in [3.8, 4.1]",
            rates_ok,
            format!("(l2, linf) = {finest:.3?}"),
        ),
        Check::new(
            "absolute errors within 5x of reference",
            factors_ok,
            format!("(m, linf factor, l2 factor) = {factors:.3?}"),
        ),
        Check::new(
            "solver health",
            solver_ok,
            out.levels
                .iter()
                .map(|l| {
                    format!(
                        "m={}: max iters {}, tail ratio {:.3}, objective rise {:.2e}",
                        l.m, l.max_iterations, l.worst_tail_ratio, l.worst_objective_increase
                    )
                })
                .collect::<Vec<_>>()
                .join("; "),
        ),
        Check::new(
            "mass conservation",
            out.levels.iter().all(|l| l.mass_drift <= 1e-11),
            format!(
                "max drift {:.2e}",
                out.levels.iter().map(|l| l.mass_drift).fold(0.0, f64::max)
            ),
        ),
    ]
}

pub fn convergence(cfg: &ConvergenceConfig) -> Result<(Outcome, ConvergenceOutcome), CliError> {
    let study = verification::convergence_study(cfg)?;
    let mut csv = study.report.to_csv();
    csv.push_str("# m,dt,steps,max_psd_iters,total_psd_iters,worst_tail_ratio,mass_drift\n");
    for l in &study.levels {
        writeln!(
            csv,
            "# {},{:.6e},{},{},{},{:.4},{:.3e}",
            l.m, l.dt, l.steps, l.max_iterations, l.total_iterations, l.worst_tail_ratio, l.mass_drift
        )
        .unwrap();
    }
    let checks = convergence_checks(&study, cfg.solver.max_iter);
    Ok((Outcome { csv, checks }, study))
}

pub const GHOST_STEPS: [f64; 5] = [0.04, 0.02, 0.01, 0.005, 0.0025];

/// Ghost-step error against the exact solution as `dt` halves at fixed `m`.
pub fn ghost(m: usize) -> Result<Outcome, CliError> {
    let eps = 0.1;
    let errs = verification::ghost_step_errors(3.2, eps, m, &GHOST_STEPS)?;
    let mut csv = format!("# ghost step, m = {m}, eps = {eps}\ndt,error_l2,order\n");
    let mut orders = Vec::new();
    for (i, &(dt, e)) in errs.iter().enumerate() {
        let order = (i > 0).then(|| verification::halving_rate(errs[i - 1].1, e));
        if let Some(o) = order {
            orders.push(o);
        }
        writeln!(
            csv,
            "{dt:.16e},{e:.16e},{}",
            order.map_or(String::new(), |o| format!("{o:.4}"))
        )
        .unwrap();
    }
    let ok = !orders.is_empty() && orders.iter().all(|&o| o >= 1.9);
    Ok(Outcome {
        csv,
        checks: vec![Check::new(
            "ghost step temporal order >= 1.9",
            ok,
            format!("orders {orders:.3?}"),
        )],
    })
}
