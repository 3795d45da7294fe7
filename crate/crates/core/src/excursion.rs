//! Excursions between concentric circles and the multiscale counting
//! machinery built on them.
//!
//! For radii `r_0 > r_1 > … > r_n` around a center `x`, level `ℓ` is the
//! annulus between `∂D(x, r_{ℓ+1})` (inner) and `∂D(x, r_ℓ)` (outer). An
//! excursion at level `ℓ` starts on the inner circle, reaches the outer circle
//! and ends on the next return to the inner circle. The tracker follows all
//! levels in one pass: a level is *armed* by a visit to its inner circle and
//! an armed level counts one excursion (and disarms) on a visit to its outer
//! circle. Arming times are the stopping times `τ^{(0)}, τ^{(0)} + τ^{(1)}, …`,
//! so successive differences are the excursion durations.

use std::f64::consts::PI;
use std::ops::ControlFlow;

use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::stats::{chi_square_gof, ChiSquareResult};
use crate::torus::{Torus, TorusPoint};
use crate::walker::{run_observed, LocalTimeField, StopRule, WalkConfig, WalkObserver};

/// At most this many levels fit in the per-site bitmasks.
pub const MAX_LEVELS: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RadiiMode {
    /// `r_k = e^n n^{3(n−k)}`, `K_n = n^{γ̄} r_0`. Formula-level use only.
    Asymptotic,
    /// `r_k = r0 · rho^{−k}`; the torus side is supplied by the caller.
    Lab { r0: f64, rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiscaleConfig {
    pub n: usize,
    pub gamma_bar: f64,
    pub b: f64,
    pub mode: RadiiMode,
}

impl MultiscaleConfig {
    pub fn lab(n: usize, r0: f64, rho: f64) -> Self {
        MultiscaleConfig { n, gamma_bar: 0.0, b: 0.0, mode: RadiiMode::Lab { r0, rho } }
    }

    pub fn asymptotic(n: usize, b: f64, gamma_bar: f64) -> Self {
        MultiscaleConfig { n, gamma_bar, b, mode: RadiiMode::Asymptotic }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n > MAX_LEVELS {
            return Err(Error::invalid(format!("depth n must be in [2, {MAX_LEVELS}], got {}", self.n)));
        }
        match self.mode {
            RadiiMode::Asymptotic => {
                if !(self.gamma_bar >= self.b && self.gamma_bar <= self.b + 4.0) {
                    return Err(Error::invalid(format!("gamma_bar = {} not in [b, b + 4] with b = {}", self.gamma_bar, self.b)));
                }
            }
            RadiiMode::Lab { r0, rho } => {
                if !(rho > 1.0) || !(r0 > 0.0) {
                    return Err(Error::invalid(format!("lab radii need r0 > 0 and rho > 1, got r0 = {r0}, rho = {rho}")));
                }
            }
        }
        Ok(())
    }
}

/// Decreasing radii `r_0 > … > r_n`, plus the torus side `K_n` in asymptotic mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Radii {
    values: Vec<f64>,
    side: Option<f64>,
}

impl Radii {
    /// Explicit radii, outermost first. Consecutive circles must be at least
    /// one lattice unit apart so their boundaries are disjoint.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.len() > MAX_LEVELS + 1 {
            return Err(Error::RadiiCollapse(format!("need between 2 and {} radii, got {}", MAX_LEVELS + 1, values.len())));
        }
        for w in values.windows(2) {
            if !(w[0] >= w[1] + 1.0) {
                return Err(Error::RadiiCollapse(format!("radii {} and {} are closer than one lattice unit", w[0], w[1])));
            }
        }
        let last = *values.last().expect("nonempty");
        if !(last >= 2.0) {
            return Err(Error::RadiiCollapse(format!("innermost radius {last} < 2")));
        }
        Ok(Radii { values, side: None })
    }

    /// Number of levels `n` (one fewer than the number of radii).
    pub fn levels(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn radius(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// `K_n` in asymptotic mode.
    pub fn asymptotic_side(&self) -> Option<f64> {
        self.side
    }

    /// Checks the radii fit on `torus` (`r_0 < N/2`).
    pub fn bind(&self, torus: &Torus) -> Result<()> {
        let half = torus.side() as f64 / 2.0;
        if self.values[0] >= half {
            return Err(Error::RadiiCollapse(format!("r_0 = {} must be < N/2 = {half}", self.values[0])));
        }
        Ok(())
    }
}

pub fn multiscale_radii(cfg: &MultiscaleConfig) -> Result<Radii> {
    cfg.validate()?;
    let n = cfg.n;
    match cfg.mode {
        RadiiMode::Asymptotic => {
            let nf = n as f64;
            let values: Vec<f64> = (0..=n).map(|k| (nf + 3.0 * (n - k) as f64 * nf.ln()).exp()).collect();
            let side = (nf.powf(cfg.gamma_bar) * values[0]).ceil();
            let mut radii = Radii::from_values(values)?;
            radii.side = Some(side);
            Ok(radii)
        }
        RadiiMode::Lab { r0, rho } => Radii::from_values((0..=n).map(|k| r0 * rho.powi(-(k as i32))).collect()),
    }
}

/// Target profile `n_ℓ`, `ℓ = 0..n−1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCounts {
    pub n_ell: Vec<u64>,
    pub theta: Option<f64>,
    pub eta: Option<f64>,
}

impl TargetCounts {
    /// Hand-chosen targets, e.g. for small exact checks.
    pub fn explicit(n_ell: Vec<u64>) -> Self {
        TargetCounts { n_ell, theta: None, eta: None }
    }

    pub fn depth(&self) -> usize {
        self.n_ell.len()
    }
}

/// `√(θ + 2η√θ) − √θ`.
pub fn thick_gap(theta: f64, eta: f64) -> f64 {
    (theta + 2.0 * eta * theta.sqrt()).sqrt() - theta.sqrt()
}

/// `n_ℓ = ⌈6 (1 − n^{−1/4}) {√θ + (√(θ + 2η√θ) − √θ) ℓ/n}² n² log n⌉`.
pub fn target_counts(n: usize, theta: f64, eta: f64) -> Result<TargetCounts> {
    if n < 2 {
        return Err(Error::invalid(format!("depth n must be >= 2, got {n}")));
    }
    if !(theta > 0.0) {
        return Err(Error::invalid(format!("theta must be positive, got {theta}")));
    }
    let limit = 1.0 + 1.0 / (2.0 * theta.sqrt());
    if !(eta > 0.0 && eta < limit) {
        return Err(Error::EtaOutOfRange { eta, theta, limit });
    }
    let nf = n as f64;
    let gap = thick_gap(theta, eta);
    let scale = 6.0 * (1.0 - nf.powf(-0.25)) * nf * nf * nf.ln();
    let n_ell = (0..n)
        .map(|l| {
            let s = theta.sqrt() + gap * l as f64 / nf;
            (scale * s * s).ceil() as u64
        })
        .collect();
    Ok(TargetCounts { n_ell, theta: Some(theta), eta: Some(eta) })
}

/// How long an excursion trace runs.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceHorizon {
    Stop(StopRule),
    /// Run until the top-level budget is spent: stop at time
    /// `Σ_{j=0}^{n_0} τ^{(j)}[r_1, r_0]`, i.e. on the first arrival at
    /// `∂D(x, r_1)` after `n_0` completed top-level excursions.
    TopLevelBudget(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionRecord {
    pub center: TorusPoint,
    /// `N_ℓ` for `ℓ = 0..n−1`.
    pub level_counts: Vec<u64>,
    /// Per level, the completed excursion durations `τ^{(j)}`, `j >= 1`.
    pub durations: Vec<Vec<f64>>,
    /// Per level, `τ^{(0)}` (`+∞` if the inner circle was never reached).
    pub first_arrivals: Vec<f64>,
    /// Local time at the center during each completed deepest-level excursion.
    pub deepest_local_times: Vec<f64>,
    pub elapsed: f64,
    /// True when a [`TraceHorizon::TopLevelBudget`] was exhausted.
    pub budget_reached: bool,
}

/// Per-site inner/outer level masks for one center.
#[derive(Debug, Clone)]
pub struct ExcursionGeometry {
    torus: Torus,
    center: TorusPoint,
    levels: usize,
    inner: Vec<u64>,
    outer: Vec<u64>,
}

/// Relative offsets of every boundary circle, with the level masks they carry.
fn boundary_pattern(torus: &Torus, radii: &Radii) -> Result<Vec<(TorusPoint, u64, u64)>> {
    radii.bind(torus)?;
    let n = radii.levels();
    let mut inner = vec![0u64; torus.volume()];
    let mut outer = vec![0u64; torus.volume()];
    for k in 0..=n {
        let circle = torus.boundary(&torus.ball(TorusPoint::ORIGIN, radii.radius(k))?)?;
        for p in circle.iter() {
            let idx = torus.index(*p);
            if k < n {
                outer[idx] |= 1 << k;
            }
            if k > 0 {
                inner[idx] |= 1 << (k - 1);
            }
        }
    }
    let mut pattern: Vec<(TorusPoint, u64, u64)> = (0..torus.volume())
        .filter(|&i| inner[i] | outer[i] != 0)
        .map(|i| (torus.point_at(i), inner[i], outer[i]))
        .collect();
    pattern.sort_by_key(|e| e.0);
    Ok(pattern)
}

impl ExcursionGeometry {
    pub fn new(torus: &Torus, center: TorusPoint, radii: &Radii) -> Result<Self> {
        let pattern = boundary_pattern(torus, radii)?;
        let mut inner = vec![0u64; torus.volume()];
        let mut outer = vec![0u64; torus.volume()];
        for (off, im, om) in pattern {
            let idx = torus.index(torus.offset(center, off.i as i64, off.j as i64));
            inner[idx] = im;
            outer[idx] = om;
        }
        Ok(ExcursionGeometry { torus: *torus, center, levels: radii.levels(), inner, outer })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }
}

struct Tracker<'g> {
    geom: &'g ExcursionGeometry,
    center_idx: usize,
    armed: u64,
    arm_time: Vec<f64>,
    rec: ExcursionRecord,
    budget: Option<u64>,
    deepest_acc: f64,
}

impl WalkObserver for Tracker<'_> {
    fn on_enter(&mut self, site: usize, now: f64) -> ControlFlow<()> {
        let deepest = self.geom.levels - 1;
        let mut om = self.geom.outer[site] & self.armed;
        while om != 0 {
            let l = om.trailing_zeros() as usize;
            om &= om - 1;
            self.armed &= !(1 << l);
            self.rec.level_counts[l] += 1;
            if l == deepest {
                self.rec.deepest_local_times.push(self.deepest_acc);
            }
        }
        let mut im = self.geom.inner[site] & !self.armed;
        while im != 0 {
            let l = im.trailing_zeros() as usize;
            im &= im - 1;
            self.armed |= 1 << l;
            if self.arm_time[l].is_finite() {
                self.rec.durations[l].push(now - self.arm_time[l]);
            } else {
                self.rec.first_arrivals[l] = now;
            }
            self.arm_time[l] = now;
            if l == deepest {
                self.deepest_acc = 0.0;
            }
            if l == 0 && self.budget == Some(self.rec.level_counts[0]) {
                self.rec.budget_reached = true;
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    }

    fn on_hold(&mut self, site: usize, dt: f64) {
        if site == self.center_idx && self.armed >> (self.geom.levels - 1) & 1 == 1 {
            self.deepest_acc += dt;
        }
    }
}

/// Runs one walk and records the excursions around `geom`'s center.
pub fn trace_with(geom: &ExcursionGeometry, config: &WalkConfig, horizon: &TraceHorizon) -> Result<(ExcursionRecord, LocalTimeField)> {
    if config.side != geom.torus.side() {
        return Err(Error::invalid("walk and excursion geometry use different tori"));
    }
    let n = geom.levels;
    let (stop, budget) = match horizon {
        TraceHorizon::Stop(rule) => (rule.clone(), None),
        // The step cap bounds the run; the observer ends it.
        TraceHorizon::TopLevelBudget(n0) => (StopRule::FixedTime(f64::MAX), Some(*n0)),
    };
    let mut tracker = Tracker {
        geom,
        center_idx: geom.torus.index(geom.center),
        armed: 0,
        arm_time: vec![f64::INFINITY; n],
        rec: ExcursionRecord {
            center: geom.center,
            level_counts: vec![0; n],
            durations: vec![Vec::new(); n],
            first_arrivals: vec![f64::INFINITY; n],
            deepest_local_times: Vec::new(),
            elapsed: 0.0,
            budget_reached: false,
        },
        budget,
        deepest_acc: 0.0,
    };
    let field = run_observed(config, &stop, &mut tracker)?;
    let mut rec = tracker.rec;
    rec.elapsed = field.elapsed;
    Ok((rec, field))
}

pub fn excursion_trace(config: &WalkConfig, center: TorusPoint, radii: &Radii, horizon: &TraceHorizon) -> Result<ExcursionRecord> {
    let torus = Torus::new(config.side)?;
    let geom = ExcursionGeometry::new(&torus, center, radii)?;
    trace_with(&geom, config, horizon).map(|(rec, _)| rec)
}

fn check_levels(counts: &[u64], targets: &TargetCounts, n: usize) -> Result<()> {
    if counts.len() < n || targets.n_ell.len() < n {
        return Err(Error::LevelMismatch { needed: n, have: counts.len().min(targets.n_ell.len()) });
    }
    Ok(())
}

/// `|N_ℓ − n_ℓ| ≤ n` for `1 ≤ ℓ ≤ n−1`.
pub fn counts_successful(counts: &[u64], targets: &TargetCounts, n: usize) -> Result<bool> {
    check_levels(counts, targets, n)?;
    Ok((1..n).all(|l| counts[l].abs_diff(targets.n_ell[l]) <= n as u64))
}

pub fn is_successful(rec: &ExcursionRecord, targets: &TargetCounts, n: usize) -> Result<bool> {
    counts_successful(&rec.level_counts, targets, n)
}

fn balls_disjoint(torus: &Torus, x: TorusPoint, y: TorusPoint, rho: f64) -> bool {
    let d2 = torus.distance_sq(x, y) as f64;
    if d2 >= 4.0 * rho * rho {
        return true;
    }
    let reach = rho.ceil() as i64;
    for di in -reach..=reach {
        for dj in -reach..=reach {
            if ((di * di + dj * dj) as f64).sqrt() < rho && torus.distance(torus.offset(x, di, dj), y) < rho {
                return false;
            }
        }
    }
    true
}

/// `ℓ(x, y) = min{ℓ : D(x, r_ℓ + 1) ∩ D(y, r_ℓ + 1) = ∅} ∧ n`.
pub fn separation_scale(torus: &Torus, x: TorusPoint, y: TorusPoint, radii: &Radii, n: usize) -> usize {
    (0..n.min(radii.values.len())).find(|&l| balls_disjoint(torus, x, y, radii.radius(l) + 1.0)).unwrap_or(n)
}

/// Tracks excursion counts around many centers at once during one walk.
/// Each center stops counting once its own top-level budget is spent.
pub struct MultiCenterTracker {
    torus: Torus,
    levels: usize,
    budget: u64,
    pattern: Vec<(i64, i64, u64, u64)>,
    tracked: Vec<bool>,
    done: Vec<bool>,
    armed: Vec<u64>,
    counts: Vec<u32>,
}

impl MultiCenterTracker {
    pub fn new(torus: &Torus, radii: &Radii, centers: impl IntoIterator<Item = TorusPoint>, budget: u64) -> Result<Self> {
        let pattern = boundary_pattern(torus, radii)?.into_iter().map(|(p, im, om)| (p.i as i64, p.j as i64, im, om)).collect();
        let v = torus.volume();
        let mut tracked = vec![false; v];
        for c in centers {
            tracked[torus.index(c)] = true;
        }
        let levels = radii.levels();
        Ok(MultiCenterTracker {
            torus: *torus,
            levels,
            budget,
            pattern,
            tracked,
            done: vec![false; v],
            armed: vec![0; v],
            counts: vec![0; v * levels],
        })
    }

    pub fn counts(&self, c: TorusPoint) -> &[u32] {
        let k = self.torus.index(c);
        &self.counts[k * self.levels..(k + 1) * self.levels]
    }

    pub fn budget_reached(&self, c: TorusPoint) -> bool {
        self.done[self.torus.index(c)]
    }

    /// Tracked centers in index order.
    pub fn centers(&self) -> impl Iterator<Item = TorusPoint> + '_ {
        (0..self.tracked.len()).filter(|&k| self.tracked[k]).map(|k| self.torus.point_at(k))
    }
}

impl WalkObserver for MultiCenterTracker {
    fn on_enter(&mut self, site: usize, _now: f64) -> ControlFlow<()> {
        let n = self.torus.side() as i64;
        let (si, sj) = ((site as i64) / n, (site as i64) % n);
        for &(oi, oj, im, om) in &self.pattern {
            let ci = (si - oi).rem_euclid(n);
            let cj = (sj - oj).rem_euclid(n);
            let c = (ci * n + cj) as usize;
            if !self.tracked[c] || self.done[c] {
                continue;
            }
            let counts = &mut self.counts[c * self.levels..(c + 1) * self.levels];
            let mut hits = om & self.armed[c];
            self.armed[c] &= !hits;
            while hits != 0 {
                counts[hits.trailing_zeros() as usize] += 1;
                hits &= hits - 1;
            }
            let arm = im & !self.armed[c];
            self.armed[c] |= arm;
            if arm & 1 == 1 && counts[0] as u64 == self.budget {
                self.done[c] = true;
            }
        }
        ControlFlow::Continue(())
    }
}

/// `ln P(N = k)` for `N` the number of failures before the `m`-th success of
/// fair coin flips: `ln C(k + m − 1, k) − (k + m) ln 2`. With `m = 0` the
/// law is a point mass at 0.
pub fn ln_negative_binomial(k: u64, m: u64) -> f64 {
    if m == 0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let (k, m) = (k as f64, m as f64);
    ln_gamma(k + m) - ln_gamma(k + 1.0) - ln_gamma(m) - (k + m) * std::f64::consts::LN_2
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln q` for `m_0 = n0` and windows `|m_ℓ − targets[ℓ−1]| ≤ half_width`,
/// `ℓ = 1..=targets.len()`, by a forward pass over levels.
pub fn ln_qn_windowed(n0: u64, targets: &[u64], half_width: u64) -> f64 {
    let mut states: Vec<(u64, f64)> = vec![(n0, 0.0)];
    for &t in targets {
        let lo = t.saturating_sub(half_width);
        let hi = t + half_width;
        states = (lo..=hi)
            .map(|m| (m, log_sum_exp(states.iter().map(|&(prev, lp)| lp + ln_negative_binomial(m, prev)))))
            .collect();
    }
    log_sum_exp(states.into_iter().map(|(_, lp)| lp))
}

pub fn qn_exact_windowed(n0: u64, targets: &[u64], half_width: u64) -> f64 {
    ln_qn_windowed(n0, targets, half_width).exp()
}

/// `q_n` with `m_0 = n_0` and window half-width `n` at levels `1..n−1`.
pub fn qn_exact(n: usize, targets: &TargetCounts) -> Result<f64> {
    if targets.n_ell.len() < n || n < 2 {
        return Err(Error::LevelMismatch { needed: n, have: targets.n_ell.len() });
    }
    Ok(qn_exact_windowed(targets.n_ell[0], &targets.n_ell[1..n], n as u64))
}

/// `f(u) = (1 + u) log(1 + u) − u log u − (1 + u) log 2`, `u > 0`.
pub fn rate_f(u: f64) -> f64 {
    (1.0 + u) * (1.0 + u).ln() - u * u.ln() - (1.0 + u) * std::f64::consts::LN_2
}

/// `ln K_n = γ̄ ln n + n + 3n ln n`.
pub fn ln_asymptotic_side(n: usize, gamma_bar: f64) -> f64 {
    let nf = n as f64;
    gamma_bar * nf.ln() + nf + 3.0 * nf * nf.ln()
}

/// Envelopes `exp(−c n log log n) K_n^{−2 gap²}` in log form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QnEnvelope {
    pub ln_lower: f64,
    pub ln_upper: f64,
}

impl QnEnvelope {
    pub fn contains_ln(&self, ln_q: f64) -> bool {
        self.ln_lower <= ln_q && ln_q <= self.ln_upper
    }
}

pub fn qn_asymptotic_bounds(n: usize, theta: f64, eta: f64, gamma_bar: f64, c1: f64, c2: f64) -> QnEnvelope {
    let nf = n as f64;
    let g = thick_gap(theta, eta);
    let base = -2.0 * g * g * ln_asymptotic_side(n, gamma_bar);
    let scale = nf * nf.ln().ln();
    QnEnvelope { ln_lower: base - c1 * scale, ln_upper: base - c2 * scale }
}

/// The `c` with `ln q = −c n log log n − 2 gap² ln K_n`; any `c1 ≥ c ≥ c2`
/// brackets `q`.
pub fn qn_envelope_constant(ln_q: f64, n: usize, theta: f64, eta: f64, gamma_bar: f64) -> f64 {
    let nf = n as f64;
    let g = thick_gap(theta, eta);
    -(ln_q + 2.0 * g * g * ln_asymptotic_side(n, gamma_bar)) / (nf * nf.ln().ln())
}

/// Simulates the chain `N_ℓ | N_{ℓ−1} = m ~ NB(m, 1/2)` from `N_0 = n0` and
/// returns the fraction of runs with every `|N_ℓ − targets[ℓ−1]| ≤ half_width`.
pub fn qn_chain_monte_carlo(n0: u64, targets: &[u64], half_width: u64, replicas: u64, seed: u64) -> f64 {
    let geo = Geometric::new(0.5).expect("valid p");
    let mut rng = stream_rng(seed, 0);
    let mut hits = 0u64;
    for _ in 0..replicas {
        let mut m = n0;
        let mut ok = true;
        for &t in targets {
            m = (0..m).map(|_| geo.sample(&mut rng)).sum();
            if m.abs_diff(t) > half_width {
                ok = false;
                break;
            }
        }
        hits += ok as u64;
    }
    hits as f64 / replicas as f64
}

/// Fit of consecutive-level counts to the negative-binomial transition law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionDiagnostic {
    pub level: usize,
    /// Conditioning value `m` of `N_ℓ`.
    pub given: u64,
    pub samples: usize,
    pub test: ChiSquareResult,
}

/// For each value `m` of `N_level` seen at least `min_samples` times, a χ²
/// comparison of `N_{level+1}` against NB(m, 1/2). Diagnostic only.
pub fn nb_transition_diagnostic(records: &[Vec<u64>], level: usize, min_samples: usize) -> Result<Vec<TransitionDiagnostic>> {
    let mut groups: std::collections::BTreeMap<u64, Vec<u64>> = Default::default();
    for r in records {
        if r.len() <= level + 1 {
            return Err(Error::LevelMismatch { needed: level + 2, have: r.len() });
        }
        groups.entry(r[level]).or_default().push(r[level + 1]);
    }
    let mut out = Vec::new();
    for (m, next) in groups {
        if next.len() < min_samples || m == 0 {
            continue;
        }
        let kmax = *next.iter().max().expect("nonempty") as usize;
        let mut obs = vec![0.0; kmax + 2];
        for &k in &next {
            obs[k as usize] += 1.0;
        }
        let total = next.len() as f64;
        let mut exp: Vec<f64> = (0..=kmax).map(|k| total * ln_negative_binomial(k as u64, m).exp()).collect();
        let tail = total - exp.iter().sum::<f64>();
        exp.push(tail.max(0.0));
        let test = chi_square_gof(&obs, &exp, 5.0);
        out.push(TransitionDiagnostic { level, given: m, samples: next.len(), test });
    }
    Ok(out)
}

/// `(2/π) N² log(R / r)`, the leading-order mean excursion duration.
pub fn excursion_duration_theory(side: usize, r: f64, big_r: f64) -> f64 {
    2.0 / PI * (side * side) as f64 * (big_r / r).ln()
}
