//! Geometry of the discrete torus `Z_N^2`: wrapped Euclidean distance,
//! discrete balls `D(x, r) = {y : d(x, y) < r}` and outer vertex boundaries
//! `∂A = {y ∉ A : d(x, y) = 1 for some x ∈ A}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice site of the torus. Coordinates are always reduced mod `N`; the
/// side length is carried by the owning [`Torus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TorusPoint {
    pub i: u32,
    pub j: u32,
}

impl TorusPoint {
    pub const ORIGIN: TorusPoint = TorusPoint { i: 0, j: 0 };
}

/// The torus `Z_N^2` with `N >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Torus {
    side: usize,
}

impl Torus {
    pub fn new(side: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::invalid(format!("torus side must be >= 2, got {side}")));
        }
        if side > u32::MAX as usize / 2 {
            return Err(Error::invalid(format!("torus side {side} too large")));
        }
        Ok(Torus { side })
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of sites, `N^2`.
    #[inline]
    pub fn volume(&self) -> usize {
        self.side * self.side
    }

    /// The site with coordinates `(i mod N, j mod N)`.
    pub fn point(&self, i: i64, j: i64) -> TorusPoint {
        let n = self.side as i64;
        TorusPoint { i: i.rem_euclid(n) as u32, j: j.rem_euclid(n) as u32 }
    }

    /// `x + (di, dj)` on the torus.
    pub fn offset(&self, x: TorusPoint, di: i64, dj: i64) -> TorusPoint {
        self.point(x.i as i64 + di, x.j as i64 + dj)
    }

    #[inline]
    pub fn index(&self, x: TorusPoint) -> usize {
        x.i as usize * self.side + x.j as usize
    }

    #[inline]
    pub fn point_at(&self, index: usize) -> TorusPoint {
        TorusPoint { i: (index / self.side) as u32, j: (index % self.side) as u32 }
    }

    pub fn contains(&self, x: TorusPoint) -> bool {
        (x.i as usize) < self.side && (x.j as usize) < self.side
    }

    /// The four nearest neighbours (with repetition when `N = 2`).
    pub fn neighbors(&self, x: TorusPoint) -> [TorusPoint; 4] {
        [self.offset(x, 1, 0), self.offset(x, -1, 0), self.offset(x, 0, 1), self.offset(x, 0, -1)]
    }

    /// Minimal-image coordinate separation along one axis.
    #[inline]
    fn axis_gap(&self, a: u32, b: u32) -> u64 {
        let d = (a as i64 - b as i64).unsigned_abs();
        d.min(self.side as u64 - d)
    }

    /// Squared wrapped distance; exact in integers.
    #[inline]
    pub fn distance_sq(&self, x: TorusPoint, y: TorusPoint) -> u64 {
        let a = self.axis_gap(x.i, y.i);
        let b = self.axis_gap(x.j, y.j);
        a * a + b * b
    }

    /// Wrapped ℓ² distance `√(a² + b²)` with `a`, `b` the minimal axis gaps.
    pub fn distance(&self, x: TorusPoint, y: TorusPoint) -> f64 {
        (self.distance_sq(x, y) as f64).sqrt()
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        let half = self.side as f64 / 2.0;
        if !(r > 0.0) || r >= half {
            return Err(Error::RadiusTooLarge { radius: r, half });
        }
        Ok(())
    }

    /// The discrete ball `D(center, r)` (strict inequality). Requires
    /// `0 < r < N/2`; wrapped balls that would overlap themselves are
    /// rejected rather than silently folded.
    pub fn ball(&self, center: TorusPoint, r: f64) -> Result<PointSet> {
        self.check_radius(r)?;
        let reach = r.ceil() as i64;
        let mut set = PointSet::empty(*self);
        for di in -reach..=reach {
            for dj in -reach..=reach {
                if (((di * di + dj * dj) as f64).sqrt()) < r {
                    set.insert(self.offset(center, di, dj));
                }
            }
        }
        Ok(set)
    }

    /// Outer vertex boundary of a nonempty proper subset.
    pub fn boundary(&self, region: &PointSet) -> Result<PointSet> {
        if region.torus != *self {
            return Err(Error::invalid("region belongs to a different torus"));
        }
        if region.is_empty() {
            return Err(Error::EmptyRegion);
        }
        if region.len() == self.volume() {
            return Err(Error::FullTorus);
        }
        let mut out = PointSet::empty(*self);
        for &x in region.iter() {
            for y in self.neighbors(x) {
                if !region.contains(y) {
                    out.insert(y);
                }
            }
        }
        Ok(out)
    }

    /// All sites, in index order.
    pub fn sites(&self) -> impl Iterator<Item = TorusPoint> + '_ {
        (0..self.volume()).map(|k| self.point_at(k))
    }
}

/// Deduplicated set of sites on one torus, with O(1) membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    torus: Torus,
    sites: Vec<TorusPoint>,
    member: Vec<bool>,
}

impl PointSet {
    pub fn empty(torus: Torus) -> Self {
        PointSet { torus, sites: Vec::new(), member: vec![false; torus.volume()] }
    }

    pub fn from_points(torus: Torus, points: impl IntoIterator<Item = TorusPoint>) -> Self {
        let mut set = PointSet::empty(torus);
        for p in points {
            set.insert(torus.point(p.i as i64, p.j as i64));
        }
        set
    }

    /// Everything except the listed sites.
    pub fn complement_of(torus: Torus, holes: impl IntoIterator<Item = TorusPoint>) -> Self {
        let holes = PointSet::from_points(torus, holes);
        PointSet::from_points(torus, torus.sites().filter(|p| !holes.contains(*p)))
    }

    pub fn torus(&self) -> Torus {
        self.torus
    }

    /// Returns `true` if the site was not already present.
    pub fn insert(&mut self, p: TorusPoint) -> bool {
        let k = self.torus.index(p);
        if self.member[k] {
            return false;
        }
        self.member[k] = true;
        self.sites.push(p);
        true
    }

    #[inline]
    pub fn contains(&self, p: TorusPoint) -> bool {
        self.torus.contains(p) && self.member[self.torus.index(p)]
    }

    #[inline]
    pub fn contains_index(&self, k: usize) -> bool {
        self.member[k]
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Sites in insertion order.
    pub fn iter(&self) -> std::slice::Iter<'_, TorusPoint> {
        self.sites.iter()
    }

    /// Sites sorted by torus index.
    pub fn sorted(&self) -> Vec<TorusPoint> {
        let mut v = self.sites.clone();
        v.sort();
        v
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        let mut out = self.clone();
        for &p in other.iter() {
            out.insert(p);
        }
        out
    }

    pub fn is_disjoint(&self, other: &PointSet) -> bool {
        self.iter().all(|p| !other.contains(*p))
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.iter().all(|p| other.contains(*p))
    }
}
