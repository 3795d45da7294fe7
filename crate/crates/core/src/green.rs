//! Exact Green's functions of the walk killed on exiting a region, and the
//! quantities built from them.
//!
//! For a proper subset `A` of the torus, `G_A(x, y) = E_x[L_{T_∂A}(y)]`. With
//! unit mean holding times the expected occupation equals the expected number
//! of visits, so `G_A(·, y)` solves `(I − P) g = 1_{y}` on `A` with `g = 0`
//! outside `A`, where `P` is the nearest-neighbour transition matrix. The
//! restricted operator `I − P_A` is symmetric positive definite whenever
//! `A ≠ Z_N^2`.

use std::f64::consts::PI;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{PointSet, Torus, TorusPoint};

/// Regions up to this many sites are solved by dense Cholesky; larger ones by
/// conjugate gradients.
pub const DENSE_LIMIT: usize = 4096;

/// Relative residual target for the iterative path.
pub const CG_TOLERANCE: f64 = 1e-12;

const OUTSIDE: u32 = u32::MAX;

/// `I − P` restricted to a region, with Dirichlet (killing) conditions on the
/// complement.
#[derive(Debug, Clone)]
pub(crate) struct RegionOperator {
    torus: Torus,
    sites: Vec<TorusPoint>,
    local: Vec<u32>,
    nbrs: Vec<[u32; 4]>,
}

impl RegionOperator {
    pub(crate) fn new(region: &PointSet) -> Result<Self> {
        let torus = region.torus();
        if region.is_empty() {
            return Err(Error::EmptyRegion);
        }
        if region.len() == torus.volume() {
            return Err(Error::SingularSystem("region is the whole torus; the walk is never killed".into()));
        }
        let sites = region.sorted();
        let mut local = vec![OUTSIDE; torus.volume()];
        for (k, p) in sites.iter().enumerate() {
            local[torus.index(*p)] = k as u32;
        }
        let nbrs = sites.iter().map(|p| torus.neighbors(*p).map(|q| local[torus.index(q)])).collect();
        Ok(RegionOperator { torus, sites, local, nbrs })
    }

    pub(crate) fn len(&self) -> usize {
        self.sites.len()
    }

    pub(crate) fn local_index(&self, p: TorusPoint) -> Option<usize> {
        match self.local[self.torus.index(p)] {
            OUTSIDE => None,
            k => Some(k as usize),
        }
    }

    fn require(&self, p: TorusPoint) -> Result<usize> {
        self.local_index(p).ok_or(Error::SiteOutsideRegion { i: p.i, j: p.j })
    }

    pub(crate) fn sites(&self) -> &[TorusPoint] {
        &self.sites
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (k, nb) in self.nbrs.iter().enumerate() {
            let mut acc = x[k];
            for &l in nb {
                if l != OUTSIDE {
                    acc -= 0.25 * x[l as usize];
                }
            }
            y[k] = acc;
        }
    }

    pub(crate) fn dense(&self) -> Mat<f64> {
        let n = self.len();
        let mut m = Mat::<f64>::zeros(n, n);
        for (k, nb) in self.nbrs.iter().enumerate() {
            m[(k, k)] += 1.0;
            for &l in nb {
                if l != OUTSIDE {
                    m[(k, l as usize)] -= 0.25;
                }
            }
        }
        m
    }

    pub(crate) fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if self.len() <= DENSE_LIMIT {
            self.solve_dense(rhs)
        } else {
            self.solve_cg(rhs)
        }
    }

    pub(crate) fn solve_dense(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let llt = self.dense().llt(Side::Lower).map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
        let mut b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        llt.solve_in_place(&mut b);
        Ok((0..rhs.len()).map(|i| b[(i, 0)]).collect())
    }

    /// Jacobi-preconditioned conjugate gradients.
    pub(crate) fn solve_cg(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        // The diagonal of I − P_A is 1 except on N = 2 tori where a site can
        // neighbour itself; it is never smaller than 1/2.
        let diag: Vec<f64> = (0..n).map(|k| 1.0 - 0.25 * self.nbrs[k].iter().filter(|&&l| l as usize == k).count() as f64).collect();
        let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        for _ in 0..(20 * n).max(1000) {
            self.apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return Err(Error::SingularSystem("operator is not positive definite".into()));
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm <= CG_TOLERANCE * bnorm {
                return Ok(x);
            }
            for k in 0..n {
                z[k] = r[k] / diag[k];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::SingularSystem("conjugate gradients did not converge".into()))
    }
}

/// All values `G_A(x0, x)` for `x0, x ∈ A`, from one dense factorization.
#[derive(Debug, Clone)]
pub struct GreenMatrix {
    op: RegionOperator,
    values: Mat<f64>,
}

impl GreenMatrix {
    /// Dense inverse of `I − P_A`. Intended for regions up to a few thousand
    /// sites.
    pub fn build(region: &PointSet) -> Result<Self> {
        let op = RegionOperator::new(region)?;
        let llt = op.dense().llt(Side::Lower).map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
        let values = llt.inverse();
        Ok(GreenMatrix { op, values })
    }

    pub fn get(&self, x0: TorusPoint, x: TorusPoint) -> Result<f64> {
        Ok(self.values[(self.op.require(x0)?, self.op.require(x)?)])
    }

    /// Region sites in the order used by [`GreenMatrix::values`].
    pub fn sites(&self) -> &[TorusPoint] {
        self.op.sites()
    }

    pub fn values(&self) -> &Mat<f64> {
        &self.values
    }

    pub(crate) fn into_values(self) -> (Vec<TorusPoint>, Mat<f64>) {
        (self.op.sites, self.values)
    }
}

/// The column `y ↦ G_A(y, x)` over the region.
#[derive(Debug, Clone)]
pub struct GreenColumn {
    op: RegionOperator,
    target: TorusPoint,
    values: Vec<f64>,
}

impl GreenColumn {
    pub fn solve(region: &PointSet, x: TorusPoint) -> Result<Self> {
        let op = RegionOperator::new(region)?;
        let k = op.require(x)?;
        let mut rhs = vec![0.0; op.len()];
        rhs[k] = 1.0;
        let values = op.solve(&rhs)?;
        Ok(GreenColumn { op, target: x, values })
    }

    /// `G_A(y, x)`.
    pub fn at(&self, y: TorusPoint) -> Result<f64> {
        Ok(self.values[self.op.require(y)?])
    }

    pub fn diagonal(&self) -> f64 {
        self.values[self.op.local_index(self.target).expect("target is in the region")]
    }
}

/// `G_A(x0, x)` by one linear solve.
pub fn green_exact(region: &PointSet, x0: TorusPoint, x: TorusPoint) -> Result<f64> {
    let col = GreenColumn::solve(region, x)?;
    col.at(x0)
}

/// `P_{x0}(T_{∂D(center, r)} < T_{∂D(center, R)})`, solved exactly as the
/// harmonic function on the annulus with boundary values 1 (inner) and 0
/// (outer).
pub fn hitting_prob_exact(torus: &Torus, center: TorusPoint, r: f64, big_r: f64, x0: TorusPoint) -> Result<f64> {
    let d = torus.distance(center, x0);
    if !(r > 0.0 && big_r > r + 1.0 && big_r < torus.side() as f64 / 2.0) {
        return Err(Error::GeometryViolation(format!("need 0 < r, r + 1 < R < N/2, got r={r}, R={big_r}")));
    }
    let inner_ball = torus.ball(center, r)?;
    let inner = torus.boundary(&inner_ball)?;
    // A start on the inner boundary has already hit it, even when d = r.
    if inner.contains(x0) {
        return Ok(1.0);
    }
    if !(r < d && d < big_r) {
        return Err(Error::GeometryViolation(format!("need r < d(x0, center) < R, got r={r}, d={d}, R={big_r}")));
    }
    let outer_ball = torus.ball(center, big_r)?;
    let free = PointSet::from_points(*torus, outer_ball.iter().copied().filter(|p| !inner_ball.contains(*p) && !inner.contains(*p)));
    let op = RegionOperator::new(&free)?;
    let rhs: Vec<f64> = op
        .sites()
        .iter()
        .map(|p| 0.25 * torus.neighbors(*p).iter().filter(|q| inner.contains(**q)).count() as f64)
        .collect();
    let u = op.solve(&rhs)?;
    let k = op.require(x0)?;
    Ok(u[k])
}

fn ball_column(torus: &Torus, center: TorusPoint, big_r: f64, x0: TorusPoint) -> Result<(f64, f64)> {
    let ball = torus.ball(center, big_r)?;
    let col = GreenColumn::solve(&ball, center)?;
    Ok((col.at(x0)?, col.diagonal()))
}

/// `E_{x0}[(L_{T_∂D(center,R)}(center))^k] = k! G_D(x0, center) G_D(center, center)^{k−1}`.
pub fn kac_moment(torus: &Torus, center: TorusPoint, big_r: f64, x0: TorusPoint, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("moment order must be >= 1"));
    }
    let (g0, gc) = ball_column(torus, center, big_r, x0)?;
    Ok(kac_closed_form(g0, gc, k))
}

/// `k! g0 gc^{k−1}`.
pub fn kac_closed_form(g0: f64, gc: f64, k: u32) -> f64 {
    let fact: f64 = (1..=k).map(f64::from).product();
    fact * g0 * gc.powi(k as i32 - 1)
}

/// `E_{x0}[exp(−β L / G_D(center, center))] = 1 − (G_D(x0, center) / G_D(center, center)) β / (1 + β)`
/// with `L` the local time at the center before exiting `D(center, R)`.
pub fn laplace_excursion_transform(torus: &Torus, center: TorusPoint, big_r: f64, x0: TorusPoint, beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let (g0, gc) = ball_column(torus, center, big_r, x0)?;
    Ok(laplace_closed_form(g0 / gc, beta))
}

/// `1 − ratio · β / (1 + β)`.
pub fn laplace_closed_form(ratio: f64, beta: f64) -> f64 {
    1.0 - ratio * beta / (1.0 + beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenResidualRow {
    pub radius: f64,
    /// `G_{D(x,R)}(x, x)`.
    pub g_center: f64,
    /// `(2/π) log R`.
    pub log_reference: f64,
    pub residual: f64,
    /// Off-center point at lattice distance ≈ R/2.
    pub off_distance: f64,
    pub g_off: f64,
    /// `(2/π) log(R / d)`.
    pub off_reference: f64,
    pub off_deviation: f64,
    /// `c2 (1/d + 1/R)` with `c2 = 4`.
    pub off_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenResidualTable {
    pub side: usize,
    pub rows: Vec<GreenResidualRow>,
    pub max_abs_residual: f64,
    /// Largest `|residual(R_{k+1}) − residual(R_k)|` over consecutive radii.
    pub max_step_change: f64,
}

pub const OFF_CENTER_C2: f64 = 4.0;

impl GreenResidualTable {
    pub fn within(&self, residual_bound: f64, step_bound: f64) -> bool {
        self.max_abs_residual <= residual_bound
            && self.max_step_change <= step_bound
            && self.rows.iter().all(|r| r.off_deviation.abs() <= r.off_bound)
    }
}

/// Tabulates `G_{D(x,R)}(x,x) − (2/π) log R` and the off-center analogue at
/// distance `R/2`, one solve per radius. Centered at the origin.
pub fn green_log_residual(torus: &Torus, radii: &[f64]) -> Result<GreenResidualTable> {
    let center = TorusPoint::ORIGIN;
    let mut rows = Vec::with_capacity(radii.len());
    for &big_r in radii {
        let ball = torus.ball(center, big_r)?;
        let col = GreenColumn::solve(&ball, center)?;
        let g_center = col.diagonal();
        let log_reference = 2.0 / PI * big_r.ln();
        let x0 = torus.point((big_r / 2.0).round() as i64, 0);
        let off_distance = torus.distance(center, x0);
        let g_off = col.at(x0)?;
        let off_reference = 2.0 / PI * (big_r / off_distance).ln();
        rows.push(GreenResidualRow {
            radius: big_r,
            g_center,
            log_reference,
            residual: g_center - log_reference,
            off_distance,
            g_off,
            off_reference,
            off_deviation: g_off - off_reference,
            off_bound: OFF_CENTER_C2 * (1.0 / off_distance + 1.0 / big_r),
        });
    }
    let max_abs_residual = rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    let max_step_change = rows.windows(2).map(|w| (w[1].residual - w[0].residual).abs()).fold(0.0, f64::max);
    Ok(GreenResidualTable { side: torus.side(), rows, max_abs_residual, max_step_change })
}

/// The bracket `[(log(R/d) − c1/r), (log(R/d) + c2/r)] / log(R/r)` for the
/// annulus hitting probability.
pub fn hitting_bracket(r: f64, big_r: f64, d: f64, c1: f64, c2: f64) -> (f64, f64) {
    let denom = (big_r / r).ln();
    (((big_r / d).ln() - c1 / r) / denom, ((big_r / d).ln() + c2 / r) / denom)
}
