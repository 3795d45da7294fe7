//! Point censuses on one local-time field.

use std::f64::consts::PI;
use std::ops::ControlFlow;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excursion::{counts_successful, multiscale_radii, MultiCenterTracker, MultiscaleConfig, TargetCounts};
use crate::torus::{Torus, TorusPoint};
use crate::walker::{cover_time_theory, run_observed, run_until, t_theta, LocalTimeField, StopRule, WalkConfig, WalkObserver};

use super::{PointCensus, Sign, ThickThinQuery};

/// `2√(2/π) log N`, the normalization of census thresholds.
pub fn log_scale(side: usize) -> f64 {
    2.0 * (2.0 / PI).sqrt() * (side as f64).ln()
}

/// Checks `Σ_x L(x) = elapsed` to `1e−9 · elapsed`.
pub fn check_conservation(field: &LocalTimeField) -> Result<()> {
    let total = field.total();
    if (total - field.elapsed).abs() > 1e-9 * field.elapsed.max(1.0) {
        return Err(Error::InvariantViolation(format!("local times sum to {total} but elapsed is {}", field.elapsed)));
    }
    Ok(())
}

/// Sites with `(L(x) − t)/√(2t) ≥ η 2√(2/π) log N` (thick) or `≤ −η …` (thin).
pub fn count_thick_thin(field: &LocalTimeField, t: f64, eta: f64, sign: Sign) -> usize {
    let u = eta * log_scale(field.side);
    let s = (2.0 * t).sqrt();
    field
        .occupation
        .iter()
        .filter(|&&l| {
            let z = (l - t) / s;
            match sign {
                Sign::Thick => z >= u,
                Sign::Thin => z <= -u,
            }
        })
        .count()
}

/// One run from the origin to `τ_{t_θ}` at the origin.
pub fn inverse_local_time_run(side: usize, theta: f64, seed: u64, replica: u64) -> Result<LocalTimeField> {
    if !(theta > 0.0) {
        return Err(Error::invalid(format!("theta must be positive, got {theta}")));
    }
    let stop = StopRule::InverseLocalTime { site: TorusPoint::ORIGIN, level: t_theta(side, theta) };
    let field = run_until(&WalkConfig::new(side, TorusPoint::ORIGIN, seed).replica(replica), &stop)?;
    check_conservation(&field)?;
    Ok(field)
}

pub fn census_thick_thin(side: usize, query: &ThickThinQuery, seed: u64, replica: u64) -> Result<PointCensus> {
    Ok(census_many(side, query.theta, &[query.eta], query.sign, seed, replica)?.remove(0))
}

/// Censuses at several `η` from one shared run.
pub fn census_many(side: usize, theta: f64, etas: &[f64], sign: Sign, seed: u64, replica: u64) -> Result<Vec<PointCensus>> {
    for &eta in etas {
        ThickThinQuery { theta, eta, sign }.validate()?;
    }
    let start = Instant::now();
    let field = inverse_local_time_run(side, theta, seed, replica)?;
    let wall = start.elapsed().as_secs_f64();
    let t = t_theta(side, theta);
    Ok(etas
        .iter()
        .map(|&eta| PointCensus {
            side,
            query: ThickThinQuery { theta, eta, sign },
            count: count_thick_thin(&field, t, eta, sign),
            seed,
            replica,
            elapsed_wall: wall,
            tau_value: field.elapsed,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateCensus {
    pub side: usize,
    pub eta: f64,
    pub seed: u64,
    pub replica: u64,
    /// Sites with `T_x ≥ η (4/π) N² (log N)²`.
    pub count: usize,
    pub threshold: f64,
    /// Time the run ended: the cover time, or the first entrance at or after
    /// the threshold.
    pub stopped_at: f64,
    pub covered: bool,
}

struct StopAfter(f64);

impl WalkObserver for StopAfter {
    fn on_enter(&mut self, _site: usize, now: f64) -> ControlFlow<()> {
        if now >= self.0 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    }
}

/// Runs until cover or until the threshold is passed, whichever is first, and
/// counts sites first visited at or after the threshold (or never).
pub fn late_point_census(side: usize, eta: f64, seed: u64, replica: u64) -> Result<LateCensus> {
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    let threshold = eta * cover_time_theory(side);
    let cfg = WalkConfig::new(side, TorusPoint::ORIGIN, seed).replica(replica);
    let field = run_observed(&cfg, &StopRule::CoverTime, &mut StopAfter(threshold))?;
    check_conservation(&field)?;
    let count = field.first_visit.iter().filter(|&&t| t >= threshold).count();
    Ok(LateCensus {
        side,
        eta,
        seed,
        replica,
        count,
        threshold,
        stopped_at: field.elapsed,
        covered: field.visited_count == side * side,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    pub side: usize,
    pub theta: f64,
    pub seed: u64,
    pub replica: u64,
    /// `(max L − t_θ)/√(2t_θ)` divided by `2√(2/π) log N`.
    pub max_norm: f64,
    /// The same for the minimum.
    pub min_norm: f64,
    pub min_local_time: f64,
    pub tau: f64,
}

pub fn extreme_normalized(side: usize, theta: f64, seed: u64, replica: u64) -> Result<Extremes> {
    let field = inverse_local_time_run(side, theta, seed, replica)?;
    let t = t_theta(side, theta);
    let norm = |l: f64| (l - t) / (2.0 * t).sqrt() / log_scale(side);
    let min = field.min();
    Ok(Extremes { side, theta, seed, replica, max_norm: norm(field.max()), min_norm: norm(min), min_local_time: min, tau: field.elapsed })
}

/// `1 + 1/(2√θ)` and `1 − 1/(2√θ)`, the limits of the normalized extremes.
pub fn predicted_extremes(theta: f64) -> (f64, f64) {
    let g = 1.0 / (2.0 * theta.sqrt());
    (1.0 + g, 1.0 - g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessfulCensus {
    pub side: usize,
    pub seed: u64,
    pub replica: u64,
    /// Centers examined (all sites outside `D(0, r_0)`).
    pub centers: usize,
    /// Centers whose top-level budget `n_0` was spent before `τ_{t_θ}`.
    pub reached_budget: usize,
    pub successful: Vec<TorusPoint>,
    pub field: LocalTimeField,
}

impl SuccessfulCensus {
    pub fn count(&self) -> usize {
        self.successful.len()
    }
}

/// Successful centers under one shared run to `τ_{t_θ}`, `θ` taken from the
/// targets. A center must spend its whole top-level budget before the run
/// ends to qualify.
pub fn successful_census(side: usize, cfg: &MultiscaleConfig, targets: &TargetCounts, seed: u64, replica: u64) -> Result<SuccessfulCensus> {
    let theta = targets.theta.ok_or_else(|| Error::invalid("targets carry no theta; the run horizon is t_theta"))?;
    let n = cfg.n;
    if targets.n_ell.len() < n {
        return Err(Error::LevelMismatch { needed: n, have: targets.n_ell.len() });
    }
    let torus = Torus::new(side)?;
    let radii = multiscale_radii(cfg)?;
    radii.bind(&torus)?;
    let r0 = radii.radius(0);
    let centers: Vec<TorusPoint> = torus.sites().filter(|&x| torus.distance(TorusPoint::ORIGIN, x) >= r0).collect();
    let mut tracker = MultiCenterTracker::new(&torus, &radii, centers.iter().copied(), targets.n_ell[0])?;
    let stop = StopRule::InverseLocalTime { site: TorusPoint::ORIGIN, level: t_theta(side, theta) };
    let field = run_observed(&WalkConfig::new(side, TorusPoint::ORIGIN, seed).replica(replica), &stop, &mut tracker)?;
    check_conservation(&field)?;
    let mut reached = 0;
    let mut successful = Vec::new();
    for &c in &centers {
        if !tracker.budget_reached(c) {
            continue;
        }
        reached += 1;
        let counts: Vec<u64> = tracker.counts(c).iter().map(|&v| v as u64).collect();
        if counts_successful(&counts, targets, n)? {
            successful.push(c);
        }
    }
    Ok(SuccessfulCensus { side, seed, replica, centers: centers.len(), reached_budget: reached, successful, field })
}
