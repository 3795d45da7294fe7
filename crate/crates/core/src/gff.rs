//! The Gaussian free field on `Z_N^2` pinned at the origin, and statistical
//! checks relating it to walk local times at `τ_t`.
//!
//! The covariance is `C(x, y) = E_x[L_{T_0}(y)] = G_{Z_N^2 \ {0}}(x, y)`,
//! built by one dense Green solve and factored as `C = F Fᵀ` with `F` lower
//! triangular. Samples are `h = F z` on the non-origin sites with `h(0) = 0`.
//!
//! The comparisons with local times test fixed functionals (per-site moments,
//! spatial average, maximum, marginal tails). Agreement on these is necessary
//! for the distributional identities, not sufficient.

use faer::{Mat, Side};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::green::GreenMatrix;
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{ks_one_sample, ks_two_sample, proportion_diff_se, quantile, KsResult, MeanSe};
use crate::torus::{PointSet, Torus, TorusPoint};
use crate::walker::{run_until, LocalTimeField, StopRule, WalkConfig};

/// Largest side with a dense covariance factor.
pub const MAX_GFF_SIDE: usize = 64;

const TAG_WALK: u64 = 0x5741_4c4b;
const TAG_LEFT: u64 = 0x4c45_4654;
const TAG_RIGHT: u64 = 0x5249_4748;

#[derive(Debug, Clone)]
pub struct GffCovariance {
    torus: Torus,
    /// Position of each torus index among the non-origin sites; `None` at 0.
    slot: Vec<Option<usize>>,
    /// Torus index of each slot.
    site_of_slot: Vec<usize>,
    cov: Mat<f64>,
    factor: Mat<f64>,
}

pub fn gff_covariance(side: usize) -> Result<GffCovariance> {
    if side > MAX_GFF_SIDE {
        return Err(Error::SizeTooLarge { side, limit: MAX_GFF_SIDE });
    }
    let torus = Torus::new(side)?;
    let region = PointSet::complement_of(torus, [TorusPoint::ORIGIN]);
    let (sites, cov) = GreenMatrix::build(&region)?.into_values();
    let llt = cov.llt(Side::Lower).map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
    let factor = llt.L().to_owned();
    let mut slot = vec![None; torus.volume()];
    let site_of_slot: Vec<usize> = sites.iter().map(|p| torus.index(*p)).collect();
    for (k, &idx) in site_of_slot.iter().enumerate() {
        slot[idx] = Some(k);
    }
    Ok(GffCovariance { torus, slot, site_of_slot, cov, factor })
}

impl GffCovariance {
    pub fn torus(&self) -> Torus {
        self.torus
    }

    pub fn side(&self) -> usize {
        self.torus.side()
    }

    /// `C(x, y)`; zero when either site is the origin.
    pub fn get(&self, x: TorusPoint, y: TorusPoint) -> f64 {
        match (self.slot[self.torus.index(x)], self.slot[self.torus.index(y)]) {
            (Some(a), Some(b)) => self.cov[(a, b)],
            _ => 0.0,
        }
    }

    /// `C(x, x)` for every site, in torus index order.
    pub fn variances(&self) -> Vec<f64> {
        (0..self.torus.volume()).map(|i| self.slot[i].map_or(0.0, |k| self.cov[(k, k)])).collect()
    }

    /// `max |F Fᵀ − C|`.
    pub fn factor_residual(&self) -> f64 {
        let prod = &self.factor * self.factor.transpose();
        let n = self.cov.nrows();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max((prod[(i, j)] - self.cov[(i, j)]).abs());
            }
        }
        worst
    }

    /// Draws one field from `rng`.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> GffSample {
        let n = self.factor.nrows();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut h = vec![0.0; self.torus.volume()];
        for (i, &idx) in self.site_of_slot.iter().enumerate() {
            let mut acc = 0.0;
            for (k, zk) in z.iter().enumerate().take(i + 1) {
                acc += self.factor[(i, k)] * zk;
            }
            h[idx] = acc;
        }
        GffSample { side: self.side(), h }
    }
}

/// One pinned field; `h` is indexed by [`Torus::index`] and `h[0] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GffSample {
    pub side: usize,
    pub h: Vec<f64>,
}

impl GffSample {
    pub fn at(&self, torus: &Torus, x: TorusPoint) -> f64 {
        self.h[torus.index(x)]
    }

    pub fn negated(&self) -> GffSample {
        GffSample { side: self.side, h: self.h.iter().map(|v| -v).collect() }
    }
}

pub fn gff_sample(cov: &GffCovariance, seed: u64) -> GffSample {
    gff_sample_stream(cov, seed, 0)
}

pub fn gff_sample_stream(cov: &GffCovariance, seed: u64, stream: u64) -> GffSample {
    cov.sample_with(&mut stream_rng(seed, stream))
}

/// `η · 2√(2/π) · log N`.
pub fn level_threshold(side: usize, eta: f64) -> f64 {
    eta * 2.0 * (2.0 / std::f64::consts::PI).sqrt() * (side as f64).ln()
}

/// Number of sites with `h(x) ≥ η 2√(2/π) log N`.
pub fn gff_level_census(sample: &GffSample, eta: f64) -> usize {
    let u = level_threshold(sample.side, eta);
    sample.h.iter().filter(|&&v| v >= u).count()
}

fn walk_fields(side: usize, t: f64, replicas: usize, seed: u64) -> Result<Vec<LocalTimeField>> {
    let stop = StopRule::InverseLocalTime { site: TorusPoint::ORIGIN, level: t };
    let wseed = derive_seed(seed, TAG_WALK);
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| run_until(&WalkConfig::new(side, TorusPoint::ORIGIN, wseed).replica(r), &stop))
        .collect()
}

fn fields(cov: &GffCovariance, replicas: usize, seed: u64, tag: u64) -> Vec<GffSample> {
    let s = derive_seed(seed, tag);
    (0..replicas as u64).into_par_iter().map(|r| gff_sample_stream(cov, s, r)).collect()
}

fn check_small_side(side: usize, limit: usize) -> Result<()> {
    if side > limit {
        return Err(Error::SizeTooLarge { side, limit });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayKnightReport {
    pub side: usize,
    pub t: f64,
    pub replicas: usize,
    /// Per site: `E[L_{τ_t}(x)]` estimate (target `t`).
    pub local_time_means: Vec<MeanSe>,
    /// Largest `|z|` of the local-time means against `t`.
    pub local_time_max_z: f64,
    pub local_time_means_ok: bool,
    /// Per site: mean of `L + h²/2` (target `t + C(x,x)/2`).
    pub left_means: Vec<MeanSe>,
    pub left_max_z: f64,
    pub left_means_ok: bool,
    /// Largest two-sample `|z|` between per-site second moments of the
    /// left field and of `(h' + √(2t))²/2`.
    pub second_moment_max_z: f64,
    /// Sites whose second-moment `|z|` exceeds 3.
    pub second_moment_flags: usize,
    /// Two-sample KS of the spatial averages of both sides.
    pub spatial_average_ks: KsResult,
}

/// Compares `{L_{τ_t}(x) + h_x²/2}` with `{(h'_x + √(2t))²/2}` through fixed
/// functionals. Walk, left field and right field use independent streams.
pub fn ray_knight_check(side: usize, t: f64, replicas: usize, seed: u64) -> Result<RayKnightReport> {
    check_small_side(side, 32)?;
    if replicas < 2 {
        return Err(Error::invalid("need at least 2 replicas"));
    }
    let cov = gff_covariance(side)?;
    let walks = walk_fields(side, t, replicas, seed)?;
    let left_h = fields(&cov, replicas, seed, TAG_LEFT);
    let right_h = fields(&cov, replicas, seed, TAG_RIGHT);
    let v = side * side;
    let var = cov.variances();
    let shift = (2.0 * t).sqrt();

    let mut local_time_means = Vec::with_capacity(v);
    let mut left_means = Vec::with_capacity(v);
    let mut second_max = 0.0f64;
    let mut flags = 0usize;
    for x in 0..v {
        let l: Vec<f64> = walks.iter().map(|f| f.occupation[x]).collect();
        let left: Vec<f64> = l.iter().zip(&left_h).map(|(a, h)| a + 0.5 * h.h[x] * h.h[x]).collect();
        let right: Vec<f64> = right_h.iter().map(|h| 0.5 * (h.h[x] + shift).powi(2)).collect();
        local_time_means.push(MeanSe::of(&l));
        left_means.push(MeanSe::of(&left));
        let a = MeanSe::of(&left.iter().map(|v| v * v).collect::<Vec<_>>());
        let b = MeanSe::of(&right.iter().map(|v| v * v).collect::<Vec<_>>());
        let se = (a.se * a.se + b.se * b.se).sqrt();
        if se > 0.0 {
            let z = ((a.mean - b.mean) / se).abs();
            second_max = second_max.max(z);
            flags += (z > 3.0) as usize;
        }
    }
    let local_time_max_z = local_time_means.iter().map(|m| m.z(t).abs()).fold(0.0, f64::max);
    let left_max_z = left_means.iter().zip(&var).map(|(m, c)| m.z(t + 0.5 * c).abs()).fold(0.0, f64::max);
    let local_time_means_ok = local_time_means.iter().all(|m| m.within(t, 3.0));
    let left_means_ok = left_means.iter().zip(&var).all(|(m, c)| m.within(t + 0.5 * c, 3.0));

    let left_avg: Vec<f64> = walks
        .iter()
        .zip(&left_h)
        .map(|(f, h)| f.occupation.iter().zip(&h.h).map(|(a, b)| a + 0.5 * b * b).sum::<f64>() / v as f64)
        .collect();
    let right_avg: Vec<f64> = right_h.iter().map(|h| h.h.iter().map(|b| 0.5 * (b + shift).powi(2)).sum::<f64>() / v as f64).collect();

    Ok(RayKnightReport {
        side,
        t,
        replicas,
        local_time_means,
        local_time_max_z,
        local_time_means_ok,
        left_means,
        left_max_z,
        left_means_ok,
        second_moment_max_z: second_max,
        second_moment_flags: flags,
        spatial_average_ks: ks_two_sample(&left_avg, &right_avg),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltRow {
    pub t: f64,
    /// KS distance of `(L_{τ_t}(x) − t)/√(2t)` to `N(0, C(x,x))`.
    pub ks: KsResult,
    pub normalized_mean: MeanSe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub side: usize,
    pub site: TorusPoint,
    pub variance: f64,
    pub replicas: usize,
    pub rows: Vec<CltRow>,
}

impl CltReport {
    /// Each KS distance is at most the previous one plus `slack`.
    pub fn nonincreasing_within(&self, slack: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].ks.statistic <= w[0].ks.statistic + slack)
    }

    pub fn last_distance(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.ks.statistic)
    }
}

/// Normalized local time at `(N/2, N/2)` against its Gaussian limit, for each
/// level in `t_list`.
pub fn clt_drift_check(side: usize, t_list: &[f64], replicas: usize, seed: u64) -> Result<CltReport> {
    check_small_side(side, 16)?;
    if t_list.is_empty() || replicas < 2 {
        return Err(Error::invalid("need a nonempty t list and at least 2 replicas"));
    }
    let torus = Torus::new(side)?;
    let cov = gff_covariance(side)?;
    let site = torus.point(side as i64 / 2, side as i64 / 2);
    let variance = cov.get(site, site);
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let idx = torus.index(site);
    let mut rows = Vec::with_capacity(t_list.len());
    for (k, &t) in t_list.iter().enumerate() {
        let walks = walk_fields(side, t, replicas, derive_seed(seed, k as u64))?;
        let xs: Vec<f64> = walks.iter().map(|f| (f.occupation[idx] - t) / (2.0 * t).sqrt()).collect();
        rows.push(CltRow { t, ks: ks_one_sample(&xs, |v| normal.cdf(v)), normalized_mean: MeanSe::of(&xs) });
    }
    Ok(CltReport { side, site, variance, replicas, rows })
}

/// Where the tail comparisons are made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DominationGrid {
    /// Quantile levels of the dominating side, per functional.
    Quantiles(Vec<f64>),
    /// Fixed thresholds `a`.
    Thresholds(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationViolation {
    /// `None` for the maximum functional.
    pub site: Option<TorusPoint>,
    pub threshold: f64,
    pub p_local: f64,
    pub p_field: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub side: usize,
    pub t: f64,
    pub replicas: usize,
    pub comparisons: usize,
    /// Largest `(p_local − p_field) / se` over all comparisons.
    pub max_excess_z: f64,
    pub violations: Vec<DominationViolation>,
}

fn tail(xs: &[f64], a: f64) -> f64 {
    xs.iter().filter(|&&v| v > a).count() as f64 / xs.len() as f64
}

fn compare_tails(
    local: &[f64],
    field: &[f64],
    grid: &DominationGrid,
    site: Option<TorusPoint>,
    comparisons: &mut usize,
    max_z: &mut f64,
    out: &mut Vec<DominationViolation>,
) {
    let thresholds: Vec<f64> = match grid {
        DominationGrid::Quantiles(ps) => ps.iter().map(|&p| quantile(field, p)).collect(),
        DominationGrid::Thresholds(a) => a.clone(),
    };
    for a in thresholds {
        let p_local = tail(local, a);
        let p_field = tail(field, a);
        let se = proportion_diff_se(p_local, local.len(), p_field, field.len());
        *comparisons += 1;
        if se > 0.0 {
            *max_z = max_z.max((p_local - p_field) / se);
        }
        if p_local > p_field + 3.0 * se {
            out.push(DominationViolation { site, threshold: a, p_local, p_field, se });
        }
    }
}

/// One-sided tail comparisons of `√L_{τ_t}(x)` against
/// `max(h_x + √(2t), 0)/√2`, per site and for the maximum over sites.
pub fn domination_check(side: usize, t: f64, replicas: usize, seed: u64, grid: &DominationGrid) -> Result<DominationReport> {
    check_small_side(side, 32)?;
    if replicas < 2 {
        return Err(Error::invalid("need at least 2 replicas"));
    }
    let torus = Torus::new(side)?;
    let cov = gff_covariance(side)?;
    let walks = walk_fields(side, t, replicas, seed)?;
    let fields = fields(&cov, replicas, seed, TAG_RIGHT);
    let shift = (2.0 * t).sqrt();
    let dominating = |h: f64| (h + shift).max(0.0) / std::f64::consts::SQRT_2;

    let mut comparisons = 0;
    let mut max_z = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for x in 0..side * side {
        let local: Vec<f64> = walks.iter().map(|f| f.occupation[x].sqrt()).collect();
        let field: Vec<f64> = fields.iter().map(|h| dominating(h.h[x])).collect();
        compare_tails(&local, &field, grid, Some(torus.point_at(x)), &mut comparisons, &mut max_z, &mut violations);
    }
    let local_max: Vec<f64> = walks.iter().map(|f| f.max().sqrt()).collect();
    let field_max: Vec<f64> = fields.iter().map(|h| h.h.iter().map(|&v| dominating(v)).fold(0.0, f64::max)).collect();
    compare_tails(&local_max, &field_max, grid, None, &mut comparisons, &mut max_z, &mut violations);
    Ok(DominationReport { side, t, replicas, comparisons, max_excess_z: max_z, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_and_symmetric() {
        let cov = gff_covariance(8).unwrap();
        let t = cov.torus();
        let o = TorusPoint::ORIGIN;
        assert_eq!(cov.get(o, o), 0.0);
        assert_eq!(cov.get(o, t.point(3, 2)), 0.0);
        for x in t.sites().filter(|p| *p != o) {
            assert!(cov.get(x, x) > 0.0);
        }
        let (x, y) = (t.point(1, 5), t.point(6, 2));
        assert!((cov.get(x, y) - cov.get(y, x)).abs() < 1e-12);
        assert!(cov.factor_residual() < 1e-8);
    }

    #[test]
    fn size_limit() {
        assert!(matches!(gff_covariance(65), Err(Error::SizeTooLarge { .. })));
    }

    #[test]
    fn samples_are_pinned_and_reproducible() {
        let cov = gff_covariance(8).unwrap();
        let a = gff_sample(&cov, 3);
        assert_eq!(a.h[0], 0.0);
        assert_eq!(a, gff_sample(&cov, 3));
        assert_ne!(a, gff_sample_stream(&cov, 3, 1));
    }

    #[test]
    fn level_census_is_monotone() {
        let cov = gff_covariance(16).unwrap();
        let s = gff_sample(&cov, 1);
        let counts: Vec<usize> = [0.05, 0.1, 0.2, 0.4, 0.8].iter().map(|&e| gff_level_census(&s, e)).collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn level_threshold_value() {
        let u = level_threshold(16, 0.5);
        assert!((u - (2.0 / std::f64::consts::PI).sqrt() * 16f64.ln()).abs() < 1e-12);
    }
}
