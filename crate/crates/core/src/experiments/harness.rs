//! Config-driven sweeps: cells run on a bounded pool and are merged in cell
//! order, so output depends only on the config.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::excursion::{target_counts, MultiscaleConfig};
use crate::gff::{domination_check, ray_knight_check, DominationGrid};
use crate::green::green_log_residual;
use crate::rng::derive_seed;
use crate::stats::median;
use crate::torus::Torus;
use crate::walker::t_theta;
use crate::VERSION;

use super::census::{census_many, extreme_normalized, late_point_census, log_scale, successful_census};
use super::config::{ExperimentConfig, ExponentKind, OutputFormat, Suite};
use super::fit::{exponent_fit_pairs, late_exponent, thick_exponent, thin_exponent};
use super::output::{CellSeed, CensusRow, CheckRow, ExcursionsRow, ExponentRow, ExtremesRow, GreenRow, LateRow, RowSet, Summary};
use super::Sign;

/// Seed of the sweep cell for torus side `side`; replica `r` uses stream `r`.
pub fn cell_seed(seed: u64, side: usize) -> u64 {
    derive_seed(seed, side as u64)
}

/// Quantile levels used by the `gff-check` domination comparison.
pub const DOMINATION_LEVELS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: RowSet,
    pub summary: Summary,
}

fn cells(cfg: &ExperimentConfig) -> Vec<(usize, u64)> {
    cfg.sides.iter().flat_map(|&n| (0..cfg.replicas as u64).map(move |r| (n, r))).collect()
}

fn run_cells<T: Send>(cfg: &ExperimentConfig, f: impl Fn(usize, u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    cells(cfg).into_par_iter().map(|(n, r)| f(n, r)).collect()
}

fn key(parts: &[(&str, String)]) -> String {
    parts.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

/// Runs the configured suite on a pool of `cfg.workers` threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    pool.install(|| run_suite(cfg))
}

struct Partial {
    rows: RowSet,
    fitted: BTreeMap<String, f64>,
    checks: BTreeMap<String, bool>,
    notes: Vec<String>,
}

fn run_suite(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = match cfg.suite {
        Suite::Census => census_suite(cfg)?,
        Suite::Late => late_suite(cfg)?,
        Suite::Extremes => extremes_suite(cfg)?,
        Suite::Excursions => excursions_suite(cfg)?,
        Suite::GffCheck => gff_suite(cfg)?,
        Suite::GreenCheck => green_suite(cfg)?,
        Suite::Exponents => exponents_suite(cfg)?,
    };
    let invariants_ok = p.checks.values().all(|&ok| ok);
    let summary = Summary {
        version: VERSION.to_string(),
        suite: cfg.suite.name().to_string(),
        config: cfg.clone(),
        seeds: cfg.sides.iter().map(|&n| CellSeed { side: n, seed: cell_seed(cfg.seed, n) }).collect(),
        rows: p.rows.len(),
        fitted: p.fitted,
        checks: p.checks,
        notes: p.notes,
        invariants_ok,
    };
    Ok(ExperimentOutput { rows: p.rows, summary })
}

/// Adds per-η slope fits of `(side, count)` pairs when at least three sides
/// have nonzero counts; otherwise records why not.
fn add_fits(fitted: &mut BTreeMap<String, f64>, notes: &mut Vec<String>, label: &str, eta: f64, pairs: &[(usize, usize)], predicted: Option<f64>) {
    match exponent_fit_pairs(pairs) {
        Ok(fit) => {
            let k = |name: &str| key(&[("fit", name.to_string()), ("kind", label.to_string()), ("eta", eta.to_string())]);
            fitted.insert(k("slope"), fit.slope);
            fitted.insert(k("stderr"), fit.stderr);
            fitted.insert(k("intercept"), fit.intercept);
            fitted.insert(k("dropped_zero"), fit.dropped_zero as f64);
            if let Some(p) = predicted {
                fitted.insert(k("predicted"), p);
            }
        }
        Err(e) => notes.push(format!("{label} eta={eta}: no slope fit ({e})")),
    }
}

fn census_suite(cfg: &ExperimentConfig) -> Result<Partial> {
    let per_cell = run_cells(cfg, |n, r| census_many(n, cfg.theta, &cfg.etas, cfg.sign, cell_seed(cfg.seed, n), r))?;
    let mut rows = Vec::new();
    for cell in per_cell {
        for c in cell {
            rows.push(CensusRow {
                side: c.side,
                theta: c.query.theta,
                eta: c.query.eta,
                sign: c.query.sign,
                replica: c.replica,
                seed: c.seed,
                count: c.count,
                tau: c.tau_value,
                threshold: c.query.eta * log_scale(c.side),
            });
        }
    }
    let mut fitted = BTreeMap::new();
    let mut notes = Vec::new();
    let mut checks = BTreeMap::new();
    checks.insert("count_within_volume".into(), rows.iter().all(|r| r.count <= r.side * r.side));
    for &eta in &cfg.etas {
        let pairs: Vec<(usize, usize)> = rows.iter().filter(|r| r.eta == eta).map(|r| (r.side, r.count)).collect();
        for &n in &cfg.sides {
            let counts: Vec<f64> = pairs.iter().filter(|p| p.0 == n).map(|p| p.1 as f64).collect();
            fitted.insert(key(&[("mean_count", String::new()), ("n", n.to_string()), ("eta", eta.to_string())]), counts.iter().sum::<f64>() / counts.len() as f64);
        }
        let (label, predicted) = match cfg.sign {
            Sign::Thick => ("thick", Some(thick_exponent(cfg.theta, eta))),
            Sign::Thin => ("thin", thin_exponent(cfg.theta, eta)),
        };
        if cfg.sides.len() >= 3 {
            add_fits(&mut fitted, &mut notes, label, eta, &pairs, predicted);
        }
    }
    // Nested thresholds on one field: counts must not increase with η.
    let mut sorted_etas = cfg.etas.clone();
    sorted_etas.sort_by(f64::total_cmp);
    let nested = cells(cfg).iter().all(|&(n, r)| {
        let counts: Vec<usize> = sorted_etas
            .iter()
            .map(|&e| rows.iter().find(|row| row.side == n && row.replica == r && row.eta == e).map_or(0, |row| row.count))
            .collect();
        counts.windows(2).all(|w| w[0] >= w[1])
    });
    checks.insert("nested_thresholds".into(), nested);
    Ok(Partial { rows: RowSet::Census(rows), fitted, checks, notes })
}

fn late_rows(cfg: &ExperimentConfig) -> Result<Vec<LateRow>> {
    let per_cell = run_cells(cfg, |n, r| {
        cfg.etas.iter().map(|&eta| late_point_census(n, eta, cell_seed(cfg.seed, n), r)).collect::<Result<Vec<_>>>()
    })?;
    Ok(per_cell
        .into_iter()
        .flatten()
        .map(|c| LateRow {
            side: c.side,
            eta: c.eta,
            replica: c.replica,
            seed: c.seed,
            count: c.count,
            threshold: c.threshold,
            stopped_at: c.stopped_at,
            covered: c.covered,
        })
        .collect())
}

fn late_suite(cfg: &ExperimentConfig) -> Result<Partial> {
    let rows = late_rows(cfg)?;
    let mut fitted = BTreeMap::new();
    let mut notes = Vec::new();
    let mut checks = BTreeMap::new();
    checks.insert("count_within_volume".into(), rows.iter().all(|r| r.count <= r.side * r.side));
    for &eta in &cfg.etas {
        let pairs: Vec<(usize, usize)> = rows.iter().filter(|r| r.eta == eta).map(|r| (r.side, r.count)).collect();
        for &n in &cfg.sides {
            let zeros = pairs.iter().filter(|p| p.0 == n && p.1 == 0).count();
            fitted.insert(key(&[("zero_fraction", String::new()), ("n", n.to_string()), ("eta", eta.to_string())]), zeros as f64 / cfg.replicas as f64);
        }
        if cfg.sides.len() >= 3 {
            add_fits(&mut fitted, &mut notes, "late", eta, &pairs, Some(late_exponent(eta)));
        }
    }
    Ok(Partial { rows: RowSet::Late(rows), fitted, checks, notes })
}

fn extremes_suite(cfg: &ExperimentConfig) -> Result<Partial> {
    let rows: Vec<ExtremesRow> = run_cells(cfg, |n, r| extreme_normalized(n, cfg.theta, cell_seed(cfg.seed, n), r))?
        .into_iter()
        .map(|e| ExtremesRow {
            side: e.side,
            theta: e.theta,
            replica: e.replica,
            seed: e.seed,
            max_norm: e.max_norm,
            min_norm: e.min_norm,
            min_local_time: e.min_local_time,
            tau: e.tau,
        })
        .collect();
    let mut fitted = BTreeMap::new();
    for &n in &cfg.sides {
        let mx: Vec<f64> = rows.iter().filter(|r| r.side == n).map(|r| r.max_norm).collect();
        let mn: Vec<f64> = rows.iter().filter(|r| r.side == n).map(|r| r.min_norm).collect();
        let zero = rows.iter().filter(|r| r.side == n && r.min_local_time == 0.0).count();
        fitted.insert(key(&[("median_max_norm", String::new()), ("n", n.to_string())]), median(&mx));
        fitted.insert(key(&[("median_min_norm", String::new()), ("n", n.to_string())]), median(&mn));
        fitted.insert(key(&[("zero_min_fraction", String::new()), ("n", n.to_string())]), zero as f64 / mx.len() as f64);
    }
    let mut checks = BTreeMap::new();
    checks.insert("min_not_above_max".into(), rows.iter().all(|r| r.min_norm <= r.max_norm));
    Ok(Partial { rows: RowSet::Extremes(rows), fitted, checks, notes: Vec::new() })
}

fn excursions_suite(cfg: &ExperimentConfig) -> Result<Partial> {
    let eta = cfg.etas[0];
    let ms = MultiscaleConfig::lab(cfg.depth, cfg.r0, cfg.rho);
    let targets = target_counts(cfg.depth, cfg.theta, eta)?;
    let rows: Vec<ExcursionsRow> = run_cells(cfg, |n, r| successful_census(n, &ms, &targets, cell_seed(cfg.seed, n), r))?
        .into_iter()
        .map(|s| ExcursionsRow {
            side: s.side,
            theta: cfg.theta,
            eta,
            depth: cfg.depth,
            r0: cfg.r0,
            rho: cfg.rho,
            replica: s.replica,
            seed: s.seed,
            centers: s.centers,
            reached_budget: s.reached_budget,
            successful: s.count(),
            tau: s.field.elapsed,
        })
        .collect();
    let mut fitted = BTreeMap::new();
    for (l, v) in targets.n_ell.iter().enumerate() {
        fitted.insert(key(&[("target", String::new()), ("level", l.to_string())]), *v as f64);
    }
    for &n in &cfg.sides {
        let s: Vec<f64> = rows.iter().filter(|r| r.side == n).map(|r| r.successful as f64).collect();
        fitted.insert(key(&[("mean_successful", String::new()), ("n", n.to_string())]), s.iter().sum::<f64>() / s.len() as f64);
    }
    let mut checks = BTreeMap::new();
    checks.insert("successful_within_budgeted".into(), rows.iter().all(|r| r.successful <= r.reached_budget && r.reached_budget <= r.centers));
    Ok(Partial { rows: RowSet::Excursions(rows), fitted, checks, notes: Vec::new() })
}

fn gff_suite(cfg: &ExperimentConfig) -> Result<Partial> {
    let grid = DominationGrid::Quantiles(DOMINATION_LEVELS.to_vec());
    let mut rows = Vec::new();
    let mut checks = BTreeMap::new();
    for &n in &cfg.sides {
        let seed = cell_seed(cfg.seed, n);
        let rk = ray_knight_check(n, cfg.t, cfg.replicas, seed)?;
        let dom = domination_check(n, cfg.t, cfg.replicas, seed, &grid)?;
        let row = |check: &str, value: f64, bound: Option<f64>, pass: Option<bool>| CheckRow {
            check: check.into(),
            side: n,
            t: cfg.t,
            replicas: cfg.replicas,
            seed,
            value,
            bound,
            pass,
        };
        let ks_ok = rk.spatial_average_ks.p_value > 0.001;
        let dom_ok = dom.violations.is_empty();
        rows.push(row("local_time_mean_max_z", rk.local_time_max_z, Some(3.0), Some(rk.local_time_means_ok)));
        rows.push(row("shifted_mean_max_z", rk.left_max_z, Some(3.0), Some(rk.left_means_ok)));
        rows.push(row("second_moment_max_z", rk.second_moment_max_z, None, None));
        rows.push(row("spatial_average_ks_p", rk.spatial_average_ks.p_value, Some(0.001), Some(ks_ok)));
        rows.push(row("domination_violations", dom.violations.len() as f64, Some(0.0), Some(dom_ok)));
        rows.push(row("domination_max_excess_z", dom.max_excess_z, None, None));
        for r in &rows[rows.len() - 6..] {
            if let Some(p) = r.pass {
                checks.insert(key(&[("check", r.check.clone()), ("n", n.to_string())]), p);
            }
        }
    }
    Ok(Partial { rows: RowSet::Checks(rows), fitted: BTreeMap::new(), checks, notes: Vec::new() })
}

/// Bounds for the `green-check` suite.
pub const GREEN_RESIDUAL_BOUND: f64 = 2.0;
pub const GREEN_STEP_BOUND: f64 = 0.3;

fn green_suite(cfg: &ExperimentConfig) -> Result<Partial> {
    let tables = cfg
        .sides
        .par_iter()
        .map(|&n| Torus::new(n).and_then(|t| green_log_residual(&t, &cfg.radii)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut fitted = BTreeMap::new();
    let mut checks = BTreeMap::new();
    for table in &tables {
        let n = table.side;
        for r in &table.rows {
            rows.push(GreenRow {
                kind: "center".into(),
                side: n,
                radius: r.radius,
                distance: 0.0,
                green: r.g_center,
                reference: r.log_reference,
                residual: r.residual,
                bound: GREEN_RESIDUAL_BOUND,
                pass: r.residual.abs() <= GREEN_RESIDUAL_BOUND,
            });
            rows.push(GreenRow {
                kind: "off_center".into(),
                side: n,
                radius: r.radius,
                distance: r.off_distance,
                green: r.g_off,
                reference: r.off_reference,
                residual: r.off_deviation,
                bound: r.off_bound,
                pass: r.off_deviation.abs() <= r.off_bound,
            });
        }
        fitted.insert(key(&[("max_abs_residual", String::new()), ("n", n.to_string())]), table.max_abs_residual);
        fitted.insert(key(&[("max_step_change", String::new()), ("n", n.to_string())]), table.max_step_change);
        checks.insert(key(&[("check", "residual_bounds".into()), ("n", n.to_string())]), table.within(GREEN_RESIDUAL_BOUND, GREEN_STEP_BOUND));
    }
    Ok(Partial { rows: RowSet::Green(rows), fitted, checks, notes: Vec::new() })
}

fn exponents_suite(cfg: &ExperimentConfig) -> Result<Partial> {
    let label = match cfg.kind {
        ExponentKind::Thick => "thick",
        ExponentKind::Thin => "thin",
        ExponentKind::Late => "late",
    };
    let rows: Vec<ExponentRow> = match cfg.kind {
        ExponentKind::Late => late_rows(cfg)?
            .into_iter()
            .map(|r| ExponentRow { kind: label.into(), side: r.side, theta: 1.0, eta: r.eta, replica: r.replica, seed: r.seed, count: r.count })
            .collect(),
        ExponentKind::Thick | ExponentKind::Thin => {
            let sign = if cfg.kind == ExponentKind::Thick { Sign::Thick } else { Sign::Thin };
            run_cells(cfg, |n, r| census_many(n, cfg.theta, &cfg.etas, sign, cell_seed(cfg.seed, n), r))?
                .into_iter()
                .flatten()
                .map(|c| ExponentRow { kind: label.into(), side: c.side, theta: c.query.theta, eta: c.query.eta, replica: c.replica, seed: c.seed, count: c.count })
                .collect()
        }
    };
    let mut fitted = BTreeMap::new();
    let mut notes = Vec::new();
    for &eta in &cfg.etas {
        let pairs: Vec<(usize, usize)> = rows.iter().filter(|r| r.eta == eta).map(|r| (r.side, r.count)).collect();
        let predicted = match cfg.kind {
            ExponentKind::Thick => Some(thick_exponent(cfg.theta, eta)),
            ExponentKind::Thin => thin_exponent(cfg.theta, eta),
            ExponentKind::Late => Some(late_exponent(eta)),
        };
        add_fits(&mut fitted, &mut notes, label, eta, &pairs, predicted);
    }
    for &n in &cfg.sides {
        fitted.insert(key(&[("t_theta", String::new()), ("n", n.to_string())]), t_theta(n, cfg.theta));
    }
    let mut checks = BTreeMap::new();
    checks.insert("count_within_volume".into(), rows.iter().all(|r| r.count <= r.side * r.side));
    Ok(Partial { rows: RowSet::Exponents(rows), fitted, checks, notes })
}

/// `out.csv` → `out.summary.json`.
pub fn summary_path(data: &Path) -> PathBuf {
    data.with_extension("summary.json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn write_data<W: Write>(out: &ExperimentOutput, format: OutputFormat, w: W) -> Result<()> {
    match format {
        OutputFormat::Csv => out.rows.write_csv(w),
        OutputFormat::Json => out.rows.write_json(w),
    }
}

/// Writes the data file and summary next to `cfg.output_path`, or the data
/// to `stdout` and the summary to `stderr` when no path is set.
pub fn write_outputs(out: &ExperimentOutput, cfg: &ExperimentConfig) -> Result<()> {
    match &cfg.output_path {
        Some(path) => {
            let f = File::create(path).map_err(io_err(path))?;
            let mut w = BufWriter::new(f);
            write_data(out, cfg.format, &mut w)?;
            w.flush().map_err(io_err(path))?;
            let sp = summary_path(path);
            let f = File::create(&sp).map_err(io_err(&sp))?;
            let mut w = BufWriter::new(f);
            serde_json::to_writer_pretty(&mut w, &out.summary)?;
            w.write_all(b"\n").map_err(io_err(&sp))?;
            w.flush().map_err(io_err(&sp))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_data(out, cfg.format, &mut lock)?;
            if cfg.format == OutputFormat::Json {
                let _ = lock.write_all(b"\n");
            }
            eprintln!("{}", serde_json::to_string(&out.summary)?);
        }
    }
    Ok(())
}

/// Parses, runs and persists; returns the process exit code (0 ok, 1 failed
/// invariant or check, 2 config, 3 i/o).
pub fn run_config_file(path: &Path) -> i32 {
    match ExperimentConfig::from_file(path).and_then(|cfg| run_and_write(&cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs and persists an already-built config; returns the exit code.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<i32> {
    let out = run_experiment(cfg)?;
    write_outputs(&out, cfg)?;
    if out.summary.invariants_ok {
        Ok(0)
    } else {
        let failed: Vec<&String> = out.summary.checks.iter().filter(|(_, ok)| !**ok).map(|(k, _)| k).collect();
        eprintln!("failed checks: {failed:?}");
        Ok(1)
    }
}
