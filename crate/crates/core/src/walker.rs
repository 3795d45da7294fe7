//! Continuous-time simple random walk on `Z_N^2` with Exp(1) holding times.
//!
//! The walk is realised as its discrete skeleton (uniform choice among the
//! four neighbours) decorated with i.i.d. Exp(1) holding times, which is
//! exact in law. The local time `L_t(x)` of a site is the sum of the holding
//! times spent there before `t`.

use std::ops::ControlFlow;

use rand::RngCore;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamRng};
use crate::stats::{quantile, sample_sd, MeanSe};
use crate::torus::{PointSet, Torus, TorusPoint};

pub const DEFAULT_MAX_STEPS: u64 = 10_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub side: usize,
    pub start: TorusPoint,
    pub seed: u64,
    /// Replica index; selects the random stream for this run.
    pub replica: u64,
    pub max_steps: u64,
}

impl WalkConfig {
    pub fn new(side: usize, start: TorusPoint, seed: u64) -> Self {
        WalkConfig { side, start, seed, replica: 0, max_steps: DEFAULT_MAX_STEPS }
    }

    pub fn replica(mut self, replica: u64) -> Self {
        self.replica = replica;
        self
    }

    pub fn max_steps(mut self, cap: u64) -> Self {
        self.max_steps = cap;
        self
    }

    fn validate(&self) -> Result<Torus> {
        let torus = Torus::new(self.side)?;
        if !torus.contains(self.start) {
            return Err(Error::invalid("start site outside the torus"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be positive"));
        }
        Ok(torus)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopRule {
    /// Stop on entry to the target set (time `T_A`).
    HitSet(PointSet),
    /// Stop at `τ_t = inf{s : L_s(site) > t}`; the final holding at `site` is
    /// truncated so that `L(site) = t` exactly.
    InverseLocalTime { site: TorusPoint, level: f64 },
    /// Stop at the first instant every site has been visited.
    CoverTime,
    /// Stop at a deterministic horizon.
    FixedTime(f64),
}

impl StopRule {
    fn validate(&self, torus: &Torus) -> Result<()> {
        match self {
            StopRule::HitSet(target) => {
                if target.is_empty() {
                    return Err(Error::EmptyRegion);
                }
                if target.torus() != *torus {
                    return Err(Error::invalid("target set belongs to a different torus"));
                }
            }
            StopRule::InverseLocalTime { site, level } => {
                if !torus.contains(*site) {
                    return Err(Error::invalid("inverse-local-time site outside the torus"));
                }
                if !(*level > 0.0) || !level.is_finite() {
                    return Err(Error::invalid(format!("local-time level must be positive, got {level}")));
                }
            }
            StopRule::CoverTime => {}
            StopRule::FixedTime(h) => {
                if !(*h > 0.0) || !h.is_finite() {
                    return Err(Error::invalid(format!("horizon must be positive, got {h}")));
                }
            }
        }
        Ok(())
    }
}

/// Occupation-time field of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeField {
    pub side: usize,
    /// Local time per site, indexed by [`Torus::index`].
    pub occupation: Vec<f64>,
    /// First entrance time per site; `+∞` for sites never visited.
    pub first_visit: Vec<f64>,
    pub elapsed: f64,
    pub visited_count: usize,
    pub skeleton_steps: u64,
}

impl LocalTimeField {
    pub fn at(&self, torus: &Torus, x: TorusPoint) -> f64 {
        self.occupation[torus.index(x)]
    }

    pub fn total(&self) -> f64 {
        self.occupation.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.occupation.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.occupation.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Hooks into a running walk.
pub trait WalkObserver {
    /// The walk enters `site` (torus index) at time `now`. This fires for the
    /// start site at time 0 as well. Returning `Break` ends the run at `now`.
    fn on_enter(&mut self, _site: usize, _now: f64) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }

    /// The walk spent `dt` at `site` (after any truncation by the stop rule).
    fn on_hold(&mut self, _site: usize, _dt: f64) {}
}

impl WalkObserver for () {}

/// Runs one walk under `stop`.
pub fn run_until(config: &WalkConfig, stop: &StopRule) -> Result<LocalTimeField> {
    run_observed(config, stop, &mut ())
}

/// Runs one walk under `stop`, reporting entries and holdings to `observer`.
pub fn run_observed<O: WalkObserver>(config: &WalkConfig, stop: &StopRule, observer: &mut O) -> Result<LocalTimeField> {
    let torus = config.validate()?;
    stop.validate(&torus)?;
    let mut rng = stream_rng(config.seed, config.replica);
    simulate(&torus, config, stop, observer, &mut rng)
}

fn simulate<O: WalkObserver>(
    torus: &Torus,
    config: &WalkConfig,
    stop: &StopRule,
    observer: &mut O,
    rng: &mut StreamRng,
) -> Result<LocalTimeField> {
    let n = torus.side();
    let volume = torus.volume();
    let mut occupation = vec![0.0f64; volume];
    let mut first_visit = vec![f64::INFINITY; volume];
    let mut visited = 0usize;
    let mut now = 0.0f64;
    let mut steps = 0u64;
    let (mut i, mut j) = (config.start.i as usize, config.start.j as usize);

    let (target, ilt_site, ilt_level, horizon, cover) = match stop {
        StopRule::HitSet(set) => (Some(set), usize::MAX, 0.0, f64::INFINITY, false),
        StopRule::InverseLocalTime { site, level } => (None, torus.index(*site), *level, f64::INFINITY, false),
        StopRule::CoverTime => (None, usize::MAX, 0.0, f64::INFINITY, true),
        StopRule::FixedTime(h) => (None, usize::MAX, 0.0, *h, false),
    };

    // Random direction bits are drawn 32 at a time.
    let mut bits = 0u64;
    let mut bits_left = 0u32;

    loop {
        let site = i * n + j;
        if first_visit[site].is_infinite() {
            first_visit[site] = now;
            visited += 1;
        }
        if let Some(target) = target {
            if target.contains_index(site) {
                break;
            }
        }
        if cover && visited == volume {
            break;
        }
        if observer.on_enter(site, now).is_break() {
            break;
        }

        let hold: f64 = Exp1.sample(rng);
        if site == ilt_site && occupation[site] + hold > ilt_level {
            let dt = ilt_level - occupation[site];
            occupation[site] = ilt_level;
            now += dt;
            observer.on_hold(site, dt);
            break;
        }
        if now + hold >= horizon {
            let dt = horizon - now;
            occupation[site] += dt;
            now = horizon;
            observer.on_hold(site, dt);
            break;
        }
        occupation[site] += hold;
        now += hold;
        observer.on_hold(site, hold);

        if steps == config.max_steps {
            return Err(Error::StepCapExceeded { cap: config.max_steps });
        }
        steps += 1;
        if bits_left == 0 {
            bits = rng.next_u64();
            bits_left = 32;
        }
        let dir = bits & 3;
        bits >>= 2;
        bits_left -= 1;
        match dir {
            0 => i = if i + 1 == n { 0 } else { i + 1 },
            1 => i = if i == 0 { n - 1 } else { i - 1 },
            2 => j = if j + 1 == n { 0 } else { j + 1 },
            _ => j = if j == 0 { n - 1 } else { j - 1 },
        }
    }

    Ok(LocalTimeField { side: n, occupation, first_visit, elapsed: now, visited_count: visited, skeleton_steps: steps })
}

/// `t_θ(N) = (4/π) θ (log N)²`, the inverse-local-time level comparable to
/// `θ` times the cover time.
pub fn t_theta(side: usize, theta: f64) -> f64 {
    let l = (side as f64).ln();
    4.0 / std::f64::consts::PI * theta * l * l
}

/// Leading-order cover time `(4/π) N² (log N)²`.
pub fn cover_time_theory(side: usize) -> f64 {
    (side * side) as f64 * t_theta(side, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverTimeStats {
    pub side: usize,
    pub replicas: usize,
    pub mean: f64,
    pub sd: f64,
    pub theory: f64,
    pub ratio_to_theory: f64,
}

/// Monte Carlo cover times from the origin; replica `r` uses stream `r`.
pub fn cover_time_stats(side: usize, replicas: usize, seed: u64) -> Result<CoverTimeStats> {
    if replicas == 0 {
        return Err(Error::invalid("replicas must be >= 1"));
    }
    let times = (0..replicas as u64)
        .into_par_iter()
        .map(|r| run_until(&WalkConfig::new(side, TorusPoint::ORIGIN, seed).replica(r), &StopRule::CoverTime).map(|f| f.elapsed))
        .collect::<Result<Vec<f64>>>()?;
    let mean = times.iter().sum::<f64>() / replicas as f64;
    let theory = cover_time_theory(side);
    Ok(CoverTimeStats { side, replicas, mean, sd: sample_sd(&times), theory, ratio_to_theory: mean / theory })
}

/// Concentration of `τ_t` around `t N²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauConcentration {
    pub side: usize,
    pub t: f64,
    pub replicas: usize,
    /// Sample mean of `τ_t` with its standard error.
    pub tau: MeanSe,
    /// `t N²`.
    pub expected: f64,
    pub mean_abs_dev: f64,
    /// 95% quantile of `|τ_t − t N²|`.
    pub q95_abs_dev: f64,
    /// `√(t log N) N²`.
    pub band: f64,
    /// `q95_abs_dev / band`, the fitted concentration constant.
    pub fitted_constant: f64,
}

pub fn tau_concentration_check(side: usize, t: f64, replicas: usize, seed: u64) -> Result<TauConcentration> {
    if !(t > 0.0) {
        return Err(Error::invalid("t must be positive"));
    }
    if replicas < 30 {
        return Err(Error::invalid(format!("need at least 30 replicas, got {replicas}")));
    }
    let stop = StopRule::InverseLocalTime { site: TorusPoint::ORIGIN, level: t };
    let taus = (0..replicas as u64)
        .into_par_iter()
        .map(|r| run_until(&WalkConfig::new(side, TorusPoint::ORIGIN, seed).replica(r), &stop).map(|f| f.elapsed))
        .collect::<Result<Vec<f64>>>()?;
    let n2 = (side * side) as f64;
    let expected = t * n2;
    let devs: Vec<f64> = taus.iter().map(|x| (x - expected).abs()).collect();
    let band = (t * (side as f64).ln()).sqrt() * n2;
    let q95 = quantile(&devs, 0.95);
    Ok(TauConcentration {
        side,
        t,
        replicas,
        tau: MeanSe::of(&taus),
        expected,
        mean_abs_dev: devs.iter().sum::<f64>() / replicas as f64,
        q95_abs_dev: q95,
        band,
        fitted_constant: q95 / band,
    })
}
