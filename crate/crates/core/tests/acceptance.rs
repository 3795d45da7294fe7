//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Runs without the libtest harness so the lines are always printed.

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use ltlab_core::excursion::{excursion_duration_theory, excursion_trace, qn_chain_monte_carlo, qn_exact, qn_exact_windowed, TraceHorizon};
use ltlab_core::experiments::census::{extreme_normalized, predicted_extremes};
use ltlab_core::experiments::{exponent_fit_pairs, run_experiment, thick_exponent, ExperimentConfig};
use ltlab_core::experiments::output::RowSet;
use ltlab_core::gff::{domination_check, ray_knight_check, DominationGrid};
use ltlab_core::green::{green_exact, green_log_residual, hitting_bracket, hitting_prob_exact, kac_moment, laplace_excursion_transform};
use ltlab_core::rng::stream_rng;
use ltlab_core::stats::{median, MeanSe};
use ltlab_core::walker::{run_until, tau_concentration_check};
use ltlab_core::{PointSet, Radii, StopRule, TargetCounts, Torus, TorusPoint, WalkConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn conservation() -> Outcome {
    let mut rng = stream_rng(101, 0);
    let sides = [8usize, 16, 32];
    let mut worst = 0.0f64;
    let mut kinds = [0usize; 4];
    for run in 0..1000u64 {
        let side = sides[rng.random_range(0..3)];
        let torus = Torus::new(side).unwrap();
        let start = torus.point(rng.random_range(0..side as i64), rng.random_range(0..side as i64));
        let kind = rng.random_range(0..4);
        kinds[kind] += 1;
        let stop = match kind {
            0 => {
                let k = rng.random_range(1..6);
                let pts: Vec<TorusPoint> = (0..k).map(|_| torus.point(rng.random_range(0..side as i64), rng.random_range(0..side as i64))).collect();
                StopRule::HitSet(PointSet::from_points(torus, pts))
            }
            1 => StopRule::InverseLocalTime { site: torus.point(rng.random_range(0..side as i64), 0), level: rng.random_range(0.5..20.0) },
            2 => StopRule::CoverTime,
            _ => StopRule::FixedTime(rng.random_range(1.0..5000.0)),
        };
        let f = run_until(&WalkConfig::new(side, start, 102).replica(run), &stop).unwrap();
        let err = (f.total() - f.elapsed).abs() / f.elapsed.max(f64::MIN_POSITIVE);
        if f.elapsed > 0.0 {
            worst = worst.max(err);
        } else {
            worst = worst.max(f.total());
        }
    }
    outcome(worst <= 1e-9, format!("1000 runs (hit/ilt/cover/fixed = {kinds:?}), max relative error {worst:.2e}"))
}

/// Local times at the center of `D(c, 4)` from `x0 = c + (2, 0)` until exit,
/// on `Z_16^2`.
fn exit_local_times(seed: u64, runs: u64) -> (Torus, TorusPoint, TorusPoint, Vec<f64>) {
    let torus = Torus::new(16).unwrap();
    let c = torus.point(8, 8);
    let x0 = torus.offset(c, 2, 0);
    let ball = torus.ball(c, 4.0).unwrap();
    let stop = StopRule::HitSet(torus.boundary(&ball).unwrap());
    let ls = (0..runs)
        .into_par_iter()
        .map(|r| run_until(&WalkConfig::new(16, x0, seed).replica(r), &stop).unwrap().at(&torus, c))
        .collect();
    (torus, c, x0, ls)
}

fn kac() -> Outcome {
    let (torus, c, x0, ls) = exit_local_times(201, 100_000);
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 1..=3u32 {
        let exact = kac_moment(&torus, c, 4.0, x0, k).unwrap();
        let m = MeanSe::of(&ls.iter().map(|l| l.powi(k as i32)).collect::<Vec<_>>());
        ok &= m.within(exact, 3.0);
        parts.push(format!("k={k}: exact {exact:.4}, MC {:.4} (z {:+.2})", m.mean, m.z(exact)));
    }
    outcome(ok, parts.join("; "))
}

fn laplace() -> Outcome {
    let (torus, c, x0, ls) = exit_local_times(301, 100_000);
    let gcc = green_exact(&torus.ball(c, 4.0).unwrap(), c, c).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for beta in [0.5, 1.0, 2.0] {
        let exact = laplace_excursion_transform(&torus, c, 4.0, x0, beta).unwrap();
        let m = MeanSe::of(&ls.iter().map(|l| (-beta * l / gcc).exp()).collect::<Vec<_>>());
        ok &= m.within(exact, 3.0);
        parts.push(format!("beta={beta}: exact {exact:.5}, MC {:.5} (z {:+.2})", m.mean, m.z(exact)));
    }
    outcome(ok, parts.join("; "))
}

fn green_residual() -> Outcome {
    let table = green_log_residual(&Torus::new(128).unwrap(), &[4.0, 8.0, 16.0, 32.0]).unwrap();
    let res: Vec<String> = table.rows.iter().map(|r| format!("{:.4}", r.residual)).collect();
    let ok = table.max_abs_residual <= 2.0 && table.max_step_change <= 0.3;
    outcome(ok, format!("residuals [{}], max |residual| {:.4}, max step {:.4}", res.join(", "), table.max_abs_residual, table.max_step_change))
}

fn hitting_sweep() -> Outcome {
    let torus = Torus::new(256).unwrap();
    let c = torus.point(128, 128);
    let mut ok = true;
    let mut cases = 0;
    let mut worst_margin = f64::INFINITY;
    for r in [4.0f64, 8.0] {
        for big_r in [32.0f64, 64.0] {
            for (a, b) in [(0.75, 0.25), (0.5, 0.5), (0.25, 0.75)] {
                let d_target = r.powf(a) * big_r.powf(b);
                let x0 = torus.offset(c, d_target.round() as i64, 0);
                let d = torus.distance(c, x0);
                let p = hitting_prob_exact(&torus, c, r, big_r, x0).unwrap();
                let (lo, hi) = hitting_bracket(r, big_r, d, 2.0, 2.0);
                ok &= lo <= p && p <= hi;
                worst_margin = worst_margin.min(p - lo).min(hi - p);
                cases += 1;
            }
        }
    }
    outcome(ok, format!("{cases} cases inside the c1 = c2 = 2 bracket, smallest margin {worst_margin:.4}"))
}

fn excursion_duration() -> Outcome {
    let radii = Radii::from_values(vec![16.0, 4.0]).unwrap();
    let cfg = WalkConfig::new(64, TorusPoint::ORIGIN, 601);
    let rec = excursion_trace(&cfg, TorusPoint::ORIGIN, &radii, &TraceHorizon::TopLevelBudget(1000)).unwrap();
    let m = MeanSe::of(&rec.durations[0]);
    let theory = excursion_duration_theory(64, 4.0, 16.0);
    outcome(
        m.within(theory, 3.0) && m.n == 1000,
        format!("{} excursions, mean duration {:.1} ± {:.1} vs (2/π)N²log(R/r) = {theory:.1} (z {:+.2})", m.n, m.mean, m.se, m.z(theory)),
    )
}

fn tau_concentration() -> Outcome {
    let rep = tau_concentration_check(16, 50.0, 100, 701).unwrap();
    let ok = rep.tau.within(rep.expected, 3.0) && rep.fitted_constant <= 5.0;
    outcome(
        ok,
        format!(
            "mean τ {:.1} ± {:.1} vs tN² = {:.0} (z {:+.2}); q95 |τ − tN²| / (√(t log N) N²) = {:.3}",
            rep.tau.mean,
            rep.tau.se,
            rep.expected,
            rep.tau.z(rep.expected),
            rep.fitted_constant
        ),
    )
}

fn ray_knight() -> Outcome {
    let rep = ray_knight_check(8, 20.0, 2000, 801).unwrap();
    let ok = rep.local_time_means_ok && rep.spatial_average_ks.p_value > 0.001;
    outcome(
        ok,
        format!(
            "max |z| of per-site E[L] vs t = {:.2} over 64 sites; spatial-average KS p = {:.4} (D = {:.4})",
            rep.local_time_max_z, rep.spatial_average_ks.p_value, rep.spatial_average_ks.statistic
        ),
    )
}

fn domination() -> Outcome {
    let grid = DominationGrid::Quantiles(vec![0.1, 0.3, 0.5, 0.7, 0.9]);
    let rep = domination_check(8, 20.0, 5000, 901, &grid).unwrap();
    outcome(
        rep.violations.is_empty(),
        format!("{} comparisons (64 sites + max, 5-point grid), {} violations beyond 3 SE, max excess z {:.2}", rep.comparisons, rep.violations.len(), rep.max_excess_z),
    )
}

fn qn_oracle() -> Outcome {
    let a = qn_exact_windowed(1, &[1], 0);
    let b = qn_exact_windowed(2, &[2], 1);
    let hand = (a - 0.25).abs() <= 1e-12 && (b - 0.5625).abs() <= 1e-12;
    let targets = TargetCounts::explicit(vec![4, 4, 5]);
    let q = qn_exact(3, &targets).unwrap();
    let replicas = 1_000_000u64;
    let mc = qn_chain_monte_carlo(4, &[4, 5], 3, replicas, 1001);
    let se = (q * (1.0 - q) / replicas as f64).sqrt();
    let ok = hand && (mc - q).abs() <= 3.0 * se;
    outcome(ok, format!("hand cases {a} and {b}; n=3 targets (4,4,5): exact {q:.6}, chain MC {mc:.6} (z {:+.2})", (mc - q) / se))
}

fn census_rows(text: &str) -> (String, Vec<ltlab_core::experiments::output::CensusRow>) {
    let cfg = ExperimentConfig::parse(text).unwrap();
    let out = run_experiment(&cfg).unwrap();
    let csv = out.rows.to_csv_string().unwrap();
    match out.rows {
        RowSet::Census(rows) => (csv, rows),
        _ => unreachable!(),
    }
}

fn late_rows(text: &str) -> (String, Vec<ltlab_core::experiments::output::LateRow>) {
    let cfg = ExperimentConfig::parse(text).unwrap();
    let out = run_experiment(&cfg).unwrap();
    let csv = out.rows.to_csv_string().unwrap();
    match out.rows {
        RowSet::Late(rows) => (csv, rows),
        _ => unreachable!(),
    }
}

const THICK_SWEEP: &str = "suite = census\nn = 32, 64, 128\ntheta = 1\neta = 0.5\nsign = thick\nreplicas = 10\nseed = 1101\n";
const THICK_VANISH: &str = "suite = census\nn = 64\ntheta = 1\neta = 1.6\nsign = thick\nreplicas = 20\nseed = 1102\n";
const LATE_SWEEP: &str = "suite = late\nn = 32, 64, 128\neta = 0.5\nreplicas = 10\nseed = 1201\n";
const LATE_VANISH: &str = "suite = late\nn = 64\neta = 1.5\nreplicas = 20\nseed = 1202\n";

fn thick_trend() -> Outcome {
    let (_, rows) = census_rows(THICK_SWEEP);
    let pairs: Vec<(usize, usize)> = rows.iter().map(|r| (r.side, r.count)).collect();
    let predicted = thick_exponent(1.0, 0.5);
    let (slope_ok, slope_txt) = match exponent_fit_pairs(&pairs) {
        Ok(f) => ((f.slope - predicted).abs() <= 0.5, format!("slope {:.3} ± {:.3} ({} zeros dropped) vs {predicted:.3}", f.slope, f.stderr, f.dropped_zero)),
        Err(e) => (false, format!("no fit: {e}")),
    };
    let (_, vanish) = census_rows(THICK_VANISH);
    let zeros = vanish.iter().filter(|r| r.count == 0).count();
    let frac = zeros as f64 / vanish.len() as f64;
    outcome(slope_ok && frac >= 0.9, format!("{slope_txt}; eta=1.6 at N=64 zero in {zeros}/{}", vanish.len()))
}

fn late_trend() -> Outcome {
    let (_, rows) = late_rows(LATE_SWEEP);
    let pairs: Vec<(usize, usize)> = rows.iter().map(|r| (r.side, r.count)).collect();
    let (slope_ok, slope_txt) = match exponent_fit_pairs(&pairs) {
        Ok(f) => ((f.slope - 1.0).abs() <= 0.35, format!("slope {:.3} ± {:.3} ({} zeros dropped) vs 1.0", f.slope, f.stderr, f.dropped_zero)),
        Err(e) => (false, format!("no fit: {e}")),
    };
    let (_, vanish) = late_rows(LATE_VANISH);
    let zeros = vanish.iter().filter(|r| r.count == 0).count();
    let frac = zeros as f64 / vanish.len() as f64;
    outcome(slope_ok && frac >= 0.9, format!("{slope_txt}; eta=1.5 at N=64 zero in {zeros}/{}", vanish.len()))
}

fn extremes() -> Outcome {
    let low: Vec<f64> = (0..20u64).into_par_iter().map(|r| extreme_normalized(64, 0.5, 1301, r).unwrap().min_local_time).collect();
    let zeros = low.iter().filter(|&&m| m == 0.0).count();
    let maxes: Vec<f64> = (0..20u64).into_par_iter().map(|r| extreme_normalized(64, 1.0, 1302, r).unwrap().max_norm).collect();
    let med = median(&maxes);
    let ok = zeros as f64 >= 0.9 * 20.0 && med > 0.9 && med < 2.1;
    outcome(ok, format!("theta=0.5: min L = 0 in {zeros}/20; theta=1: median normalized max {med:.3} (limit {:.1})", predicted_extremes(1.0).0))
}

fn determinism() -> Outcome {
    let mut same = true;
    let mut rows = 0;
    for text in [THICK_SWEEP, THICK_VANISH] {
        let (a, r) = census_rows(text);
        let (b, _) = census_rows(text);
        same &= a == b;
        rows += r.len();
    }
    for text in [LATE_SWEEP, LATE_VANISH] {
        let (a, r) = late_rows(text);
        let (b, _) = late_rows(text);
        same &= a == b;
        rows += r.len();
    }
    outcome(same, format!("census and late sweeps rerun: {rows} CSV data rows byte-identical = {same}"))
}

fn main() {
    // The budget is the stated runtime limit for each criterion.
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("conservation of local time", Duration::from_secs(60), conservation),
        ("Kac moment formula", Duration::from_secs(300), kac),
        ("excursion Laplace transform", Duration::from_secs(300), laplace),
        ("logarithmic Green asymptotics", Duration::from_secs(120), green_residual),
        ("annulus hitting-probability bracket", Duration::from_secs(300), hitting_sweep),
        ("mean excursion duration", Duration::from_secs(600), excursion_duration),
        ("inverse local time concentration", Duration::from_secs(600), tau_concentration),
        ("Ray-Knight first moment", Duration::from_secs(900), ray_knight),
        ("stochastic domination by the shifted field", Duration::from_secs(1200), domination),
        ("q_n dynamic program vs chain simulation", Duration::from_secs(120), qn_oracle),
        ("thick-point exponent trend", Duration::from_secs(7200), thick_trend),
        ("late-point exponent trend", Duration::from_secs(7200), late_trend),
        ("extremes of the local-time field", Duration::from_secs(3600), extremes),
        ("determinism of CSV data rows", Duration::from_secs(7200), determinism),
    ];
    let mut failed = 0;
    for (k, (name, budget, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let pass = o.pass && took <= budget;
        failed += !pass as usize;
        let tag = if pass { "PASS" } else { "FAIL" };
        let late = if took > budget { " [over time budget]" } else { "" };
        println!("[{tag}] {:>2} {name}: {} ({:.1}s){late}", k + 1, o.detail, took.as_secs_f64());
    }
    println!("acceptance: {} of 14 criteria passed", 14 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
