//! One runner per subcommand. Sweep points are computed in parallel and
//! written afterwards by a single [`Emitter`].

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use heavy_atom::bound_integrals::{
    fit_exponent, lemma1_term, lemma2_term, lemma3_term, lemma_scaling_fits,
    DEFAULT_ENVELOPE_CONSTANT,
};
use heavy_atom::coherent_phase_space::kinetic_error_term;
use heavy_atom::exchange_hole::{
    correlation_sweep, correlation_tables, f_sup_norm, smeared_hole_sup, tf_hole_scan,
    CorrelationSweep,
};
use heavy_atom::semiclassical_lower::{lower_bound_total, measured_correlation_constant};
use heavy_atom::tf_atom::{
    gamma_tf, minimize_tf_functional, FunctionalMinimum, UniversalChecks, UniversalGridSpec,
};
use heavy_atom::{
    convergence_study, upper_bound_total, BoundContext, BoundTermReport, Error, Evaluation,
    LogGrid, LowerBoundReport, Mode, ScalingFit, TermId, TfUniversalSolution, UpperBound,
};

use crate::cache;
use crate::check::{run_checks, CheckOutcome};
use crate::config::{Command, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::Emitter;

/// Scan centers per hole scan.
pub const HOLE_SCAN_POINTS: usize = 64;
/// Charge, configuration count and particle cap of the correlation sweep.
pub const CORRELATION_Z: f64 = 20.0;
pub const CORRELATION_CONFIGURATIONS: usize = 10_000;
pub const CORRELATION_MAX_PARTICLES: usize = 20;

/// What a finished run produced, for the terminal.
#[derive(Debug, Default)]
pub struct RunReport {
    pub lines: Vec<String>,
    pub files: Vec<std::path::PathBuf>,
}

/// Runs `config` on a pool of `config.jobs` threads.
pub fn run(config: &RunConfig) -> CliResult<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| CliError::config("jobs", e.to_string()))?;
    pool.install(|| {
        let universal = cache::universal(&config.cache_dir, UniversalGridSpec::default())?;
        let mut emitter = Emitter::new(&config.output_dir, config.format)?;
        let mut lines = Vec::new();
        let outcome = match config.command {
            Command::TfSolve => tf_solve(config, &universal, &mut emitter, &mut lines),
            Command::BoundsUpper => bounds_upper(config, &universal, &mut emitter, &mut lines),
            Command::BoundsLower => bounds_lower(config, &universal, &mut emitter, &mut lines),
            Command::HoleScan => hole_scan(config, &universal, &mut emitter, &mut lines),
            Command::Sandwich => sandwich(config, &universal, &mut emitter, &mut lines),
            Command::Check => check(&universal, &mut emitter, &mut lines),
        };
        let report = RunReport {
            lines,
            files: emitter.written().to_vec(),
        };
        outcome.map(|()| report)
    })
}

#[derive(Debug, Serialize)]
struct TfRow {
    #[serde(rename = "Z")]
    z: f64,
    #[serde(rename = "E_TF")]
    e_tf: f64,
    kinetic: f64,
    attraction: f64,
    repulsion: f64,
    electron_count: f64,
    tf_relation_error: f64,
}

#[derive(Debug, Serialize)]
struct TfSummary {
    slope0: f64,
    slope0_collocation: f64,
    slope0_far_field: f64,
    checks: UniversalChecks,
    unit_energy: f64,
    functional_minimum: FunctionalMinimum,
}

fn tf_solve(
    config: &RunConfig,
    universal: &Arc<TfUniversalSolution>,
    emitter: &mut Emitter,
    lines: &mut Vec<String>,
) -> CliResult<()> {
    let atoms = config
        .z_grid
        .par_iter()
        .map(|&z| heavy_atom::build_atom(z, universal.clone()))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut rows = Vec::new();
    for atom in &atoms {
        cache::store_atom(&config.cache_dir, atom)?;
        let e = atom.energies();
        let c = atom.checks();
        rows.push(TfRow {
            z: atom.z(),
            e_tf: e.total,
            kinetic: e.kinetic,
            attraction: e.attraction,
            repulsion: e.repulsion,
            electron_count: c.electron_count,
            tf_relation_error: c.tf_relation_error,
        });
    }
    let oracle_grid = LogGrid::new(1e-11, 2e3, 700)?;
    let summary = TfSummary {
        slope0: universal.slope0,
        slope0_collocation: universal.slope0_collocation,
        slope0_far_field: universal.slope0_far_field,
        checks: universal.checks(),
        unit_energy: heavy_atom::build_atom(1.0, universal.clone())?
            .energies()
            .total,
        functional_minimum: minimize_tf_functional(&oracle_grid)?,
    };
    lines.push(format!(
        "slope0 = {:.10}, E_TF(1) = {:.10} (functional minimum {:.10})",
        summary.slope0, summary.unit_energy, summary.functional_minimum.energy
    ));
    emitter.records("tf_solve", &rows)?;
    emitter.summary("tf_solve_summary", &summary)
}

/// Fits need a grid of at least three points over two decades.
fn optional_fits(
    result: heavy_atom::Result<Vec<ScalingFit>>,
    lines: &mut Vec<String>,
) -> CliResult<Vec<ScalingFit>> {
    match result {
        Ok(fits) => Ok(fits),
        Err(Error::Invalid(reason)) => {
            lines.push(format!("scaling fits skipped: {reason}"));
            Ok(Vec::new())
        }
        Err(e) => Err(e.into()),
    }
}

fn bounds_upper(
    config: &RunConfig,
    universal: &Arc<TfUniversalSolution>,
    emitter: &mut Emitter,
    lines: &mut Vec<String>,
) -> CliResult<()> {
    let ctx = BoundContext::new(universal.clone())?;
    let (kappa, delta) = (config.kappa, config.delta);
    let per_z = config
        .z_grid
        .par_iter()
        .map(
            |&z| -> heavy_atom::Result<(Vec<BoundTermReport>, UpperBound)> {
                let mut evaluations = vec![Evaluation::MomentBound];
                if config.mc_samples > 0 {
                    evaluations.push(Evaluation::MonteCarlo {
                        samples: config.mc_samples,
                        seed: config.seed,
                    });
                }
                let mut reports = Vec::new();
                for evaluation in evaluations {
                    reports.push(lemma1_term(&ctx, z, delta, kappa, evaluation)?);
                    reports.push(lemma2_term(&ctx, z, delta, kappa, evaluation)?);
                    reports.push(lemma3_term(&ctx, z, delta, kappa, evaluation)?);
                }
                reports.push(BoundTermReport {
                    term_id: TermId::KineticError,
                    z,
                    delta,
                    kappa,
                    value: kinetic_error_term(z, ctx.shape(), delta)?,
                    mode: Mode::MomentBound,
                    std_error: 0.0,
                });
                let total = upper_bound_total(&ctx, z, kappa, delta)?;
                reports.push(total.report());
                Ok((reports, total))
            },
        )
        .collect::<heavy_atom::Result<Vec<_>>>()?;
    let fits = optional_fits(
        lemma_scaling_fits(&ctx, &config.z_grid, delta, kappa),
        lines,
    )?;
    let (reports, totals): (Vec<_>, Vec<_>) = per_z.into_iter().unzip();
    let reports: Vec<BoundTermReport> = reports.into_iter().flatten().collect();
    for t in &totals {
        lines.push(format!(
            "Z = {:e}: upper = {:.6e}, remainder / Z^(20/9) = {:.4} (envelope {DEFAULT_ENVELOPE_CONSTANT})",
            t.z,
            t.total,
            t.envelope_ratio()
        ));
    }
    emitter.records("bounds_upper", &reports)?;
    emitter.records("bounds_upper_totals", &totals)?;
    if !fits.is_empty() {
        emitter.records("bounds_upper_fits", &fits)?;
    }
    Ok(())
}

fn bounds_lower(
    config: &RunConfig,
    universal: &Arc<TfUniversalSolution>,
    emitter: &mut Emitter,
    lines: &mut Vec<String>,
) -> CliResult<()> {
    let shape = heavy_atom::default_shape();
    let reports = config
        .z_grid
        .par_iter()
        .map(|&z| -> heavy_atom::Result<LowerBoundReport> {
            let atom = heavy_atom::build_atom(z, universal.clone())?;
            let k = measured_correlation_constant(&atom, config.delta, &shape)?;
            lower_bound_total(&atom, config.kappa, config.delta, &shape, k)
        })
        .collect::<heavy_atom::Result<Vec<_>>>()?;
    for r in &reports {
        lines.push(format!(
            "Z = {:e}: lower = {:.6e}, lower / E_TF = {:.6}",
            r.z, r.e_lower, r.ratio
        ));
    }
    emitter.records("bounds_lower", &reports)
}

#[derive(Debug, Serialize)]
struct HoleSup {
    #[serde(rename = "Z")]
    z: f64,
    tf_sup: f64,
    tf_argmax: f64,
    smeared_sup: f64,
    smeared_argmax: f64,
    /// smeared over TF sup.
    ratio: f64,
}

#[derive(Debug, Serialize)]
struct HoleSummary {
    delta: f64,
    f_sup: f64,
    f_argmax: f64,
    sups: Vec<HoleSup>,
    tf_exponent: Option<f64>,
    smeared_exponent: Option<f64>,
    scan_nodes: usize,
    cap_violations: usize,
    correlation: CorrelationSweep,
}

fn hole_scan(
    config: &RunConfig,
    universal: &Arc<TfUniversalSolution>,
    emitter: &mut Emitter,
    lines: &mut Vec<String>,
) -> CliResult<()> {
    let shape = heavy_atom::default_shape();
    let (f_argmax, f_sup) = f_sup_norm()?;
    let scans = config
        .z_grid
        .par_iter()
        .map(|&z| {
            let atom = heavy_atom::build_atom(z, universal.clone())?;
            Ok((
                tf_hole_scan(&atom, HOLE_SCAN_POINTS)?,
                smeared_hole_sup(&atom, config.delta, &shape, HOLE_SCAN_POINTS)?,
            ))
        })
        .collect::<heavy_atom::Result<Vec<_>>>()?;
    let a1_factor = f_sup * gamma_tf().powf(-1.5);
    let mut rows = Vec::new();
    let mut cap_violations = 0;
    for (tf, _) in &scans {
        for row in &tf.rows {
            let (a1, a2) = (row.a1.unwrap_or(f64::NAN), row.a2.unwrap_or(f64::NAN));
            let holds =
                a1 <= a1_factor * row.z && a2 <= 0.5 * row.z && row.l <= (a1 + a2) * (1.0 + 1e-9);
            cap_violations += usize::from(!holds);
        }
    }
    for (tf, smeared) in &scans {
        rows.extend(tf.rows.iter().copied());
        rows.extend(smeared.rows.iter().copied());
    }
    let sups: Vec<HoleSup> = scans
        .iter()
        .map(|(tf, smeared)| HoleSup {
            z: tf.z,
            tf_sup: tf.sup,
            tf_argmax: tf.argmax,
            smeared_sup: smeared.sup,
            smeared_argmax: smeared.argmax,
            ratio: smeared.sup / tf.sup,
        })
        .collect();
    let exponent = |pick: fn(&HoleSup) -> f64| {
        let points: Vec<(f64, f64)> = sups.iter().map(|s| (s.z, pick(s))).collect();
        fit_exponent(&points).ok().map(|f| f.exponent)
    };
    let atom = heavy_atom::build_atom(CORRELATION_Z, universal.clone())?;
    let tables = correlation_tables(&atom, config.delta, &shape)?;
    let correlation = correlation_sweep(
        &atom,
        &tables,
        CORRELATION_CONFIGURATIONS,
        CORRELATION_MAX_PARTICLES,
        config.seed,
    )?;
    let summary = HoleSummary {
        delta: config.delta,
        f_sup,
        f_argmax,
        tf_exponent: exponent(|s| s.tf_sup),
        smeared_exponent: exponent(|s| s.smeared_sup),
        scan_nodes: scans.iter().map(|(tf, _)| tf.rows.len()).sum(),
        sups,
        cap_violations,
        correlation,
    };
    lines.push(format!(
        "‖f‖∞ = {f_sup:.6}; sup exponents: TF {:?}, smeared {:?}",
        summary.tf_exponent, summary.smeared_exponent
    ));
    lines.push(format!(
        "cap violations: {cap_violations} of {} nodes; correlation violations: {} of {}",
        summary.scan_nodes, correlation.violations, correlation.configurations
    ));
    emitter.records("hole_scan", &rows)?;
    emitter.summary("hole_scan_summary", &summary)?;
    if cap_violations > 0 || correlation.violations > 0 {
        return Err(CliError::Invariant(format!(
            "{cap_violations} cap violations, {} correlation-inequality violations",
            correlation.violations
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SandwichSummary {
    upper_gap_fit: ScalingFit,
    lower_gap_fit: ScalingFit,
    converging: bool,
    ordered: bool,
    note: &'static str,
}

fn sandwich(
    config: &RunConfig,
    universal: &Arc<TfUniversalSolution>,
    emitter: &mut Emitter,
    lines: &mut Vec<String>,
) -> CliResult<()> {
    let ctx = BoundContext::new(universal.clone())?;
    let table = convergence_study(&ctx, config.kappa, config.delta, &config.z_grid)?;
    let ordered = table.rows.iter().all(|r| r.ordered());
    for r in &table.rows {
        lines.push(format!(
            "Z = {:e}: (upper − E_TF) Z^(-7/3) = {:.6}, (E_TF − lower) Z^(-7/3) = {:.6}",
            r.z, r.upper_gap, r.lower_gap
        ));
    }
    let summary = SandwichSummary {
        converging: table.converging(),
        ordered,
        upper_gap_fit: table.upper_gap_fit.clone(),
        lower_gap_fit: table.lower_gap_fit.clone(),
        note: "finite-Z trend of the normalized gaps; not a certified asymptotic rate",
    };
    lines.push(format!(
        "gap exponents: upper {:.4}, lower {:.4}",
        summary.upper_gap_fit.fitted_exponent, summary.lower_gap_fit.fitted_exponent
    ));
    emitter.records("sandwich", &table.rows)?;
    emitter.summary("sandwich_summary", &summary)?;
    if !ordered {
        return Err(CliError::Invariant(
            "lower ≤ E_TF ≤ upper fails on the grid".into(),
        ));
    }
    Ok(())
}

fn check(
    universal: &Arc<TfUniversalSolution>,
    emitter: &mut Emitter,
    lines: &mut Vec<String>,
) -> CliResult<()> {
    let outcomes: Vec<CheckOutcome> = run_checks(universal)?;
    for o in &outcomes {
        lines.push(format!(
            "{:<28} {:>6} cases  {:>3} violations  max deviation {:.3e}",
            o.name, o.cases, o.violations, o.max_deviation
        ));
    }
    let passed = outcomes.iter().filter(|o| o.passed()).count();
    lines.push(format!("{passed}/{} invariants hold", outcomes.len()));
    emitter.records("check", &outcomes)?;
    if passed < outcomes.len() {
        return Err(CliError::Invariant(format!(
            "{} invariants violated",
            outcomes.len() - passed
        )));
    }
    Ok(())
}
