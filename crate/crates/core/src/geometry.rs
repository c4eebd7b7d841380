//! Spatial domain, axis-aligned box partitions, and segment/region geometry.
//!
//! The deformed-space distance between two sites is a weighted combination of
//! regional distance warps, where the weight of region `i` is the fraction of
//! the straight segment between the sites that lies inside region `i`. This
//! module owns locations, partitions, segment clipping and those weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for partition tiling checks (volume accounting).
const TILING_TOL: f64 = 1e-9;

/// A point in the geographic domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    coords: Vec<f64>,
}

impl Location {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("empty coordinate vector".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite coordinate in {coords:?}"
            )));
        }
        Ok(Self { coords })
    }

    pub fn new_2d(x: f64, y: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite());
        Self { coords: vec![x, y] }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Euclidean distance to another location.
    pub fn distance(&self, other: &Location) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// An axis-aligned box `[lower_1, upper_1] x ... x [lower_d, upper_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidPartition(
                "box lower/upper corners must share a positive dimension".into(),
            ));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !l.is_finite() || !u.is_finite() || u <= l {
                return Err(Error::InvalidPartition(format!(
                    "box needs finite bounds with upper > lower, got [{l}, {u}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Build from `[[min, max]; d]` style bounds, the form used in run configs.
    pub fn from_bounds(bounds: &[[f64; 2]]) -> Result<Self> {
        let lower = bounds.iter().map(|b| b[0]).collect();
        let upper = bounds.iter().map(|b| b[1]).collect();
        Self::new(lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Closed-box containment.
    pub fn contains(&self, p: &Location) -> bool {
        p.dim() == self.dim()
            && p.coords()
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(c, (l, u))| *c >= *l && *c <= *u)
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .product()
    }

    /// Diameter of the box (length of its main diagonal).
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    /// Volume of the intersection with another box (0 if disjoint).
    fn intersection_volume(&self, other: &BoxRegion) -> f64 {
        let mut v = 1.0;
        for a in 0..self.dim() {
            let lo = self.lower[a].max(other.lower[a]);
            let hi = self.upper[a].min(other.upper[a]);
            if hi <= lo {
                return 0.0;
            }
            v *= hi - lo;
        }
        v
    }

    /// Clip the parametric segment `p(t) = start + t * dir`, `t in [0, 1]`,
    /// against the closed box. Returns the parameter interval, or `None` if
    /// the segment misses the box.
    fn clip_segment(&self, start: &[f64], dir: &[f64]) -> Option<(f64, f64)> {
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for a in 0..self.dim() {
            if dir[a] == 0.0 {
                if start[a] < self.lower[a] || start[a] > self.upper[a] {
                    return None;
                }
                continue;
            }
            let ta = (self.lower[a] - start[a]) / dir[a];
            let tb = (self.upper[a] - start[a]) / dir[a];
            let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(lo);
            t1 = t1.min(hi);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

/// Decomposition of a segment by region: `(region index, length inside it)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDecomposition {
    pieces: Vec<(usize, f64)>,
}

impl SegmentDecomposition {
    pub fn pieces(&self) -> &[(usize, f64)] {
        &self.pieces
    }

    pub fn total_length(&self) -> f64 {
        self.pieces.iter().map(|(_, l)| l).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }
}

/// A tiling of a rectangular domain by axis-aligned boxes.
///
/// Regions may share boundaries; points on a shared boundary belong to the
/// region with the smallest index, so that membership is deterministic and
/// segment pieces never double count.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    regions: Vec<BoxRegion>,
    domain: BoxRegion,
}

impl Partition {
    /// Validate a set of boxes as a tiling: positive volumes, pairwise
    /// disjoint interiors, and union equal to the bounding box.
    pub fn new(regions: Vec<BoxRegion>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::InvalidPartition("need at least one region".into()));
        }
        let dim = regions[0].dim();
        if regions.iter().any(|r| r.dim() != dim) {
            return Err(Error::InvalidPartition(
                "all regions must share the domain dimension".into(),
            ));
        }
        let lower: Vec<f64> = (0..dim)
            .map(|a| {
                regions
                    .iter()
                    .map(|r| r.lower[a])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let upper: Vec<f64> = (0..dim)
            .map(|a| {
                regions
                    .iter()
                    .map(|r| r.upper[a])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let domain = BoxRegion::new(lower, upper)?;
        let domain_vol = domain.volume();

        let mut total = 0.0;
        for (i, r) in regions.iter().enumerate() {
            total += r.volume();
            for (j, s) in regions.iter().enumerate().skip(i + 1) {
                let overlap = r.intersection_volume(s);
                if overlap > TILING_TOL * r.volume().min(s.volume()) {
                    return Err(Error::InvalidPartition(format!(
                        "regions {i} and {j} overlap with volume {overlap}"
                    )));
                }
            }
        }
        if ((total - domain_vol) / domain_vol).abs() > TILING_TOL {
            return Err(Error::InvalidPartition(format!(
                "regions cover volume {total} of a domain with volume {domain_vol}"
            )));
        }
        Ok(Self { regions, domain })
    }

    /// Split a 2-D domain into vertical strips at the given x coordinates.
    pub fn vertical_split(domain: &BoxRegion, splits: &[f64]) -> Result<Self> {
        if domain.dim() != 2 {
            return Err(Error::InvalidPartition(
                "vertical_split expects a 2-D domain".into(),
            ));
        }
        let mut xs = vec![domain.lower[0]];
        xs.extend_from_slice(splits);
        xs.push(domain.upper[0]);
        let mut regions = Vec::with_capacity(xs.len() - 1);
        for w in xs.windows(2) {
            regions.push(BoxRegion::new(
                vec![w[0], domain.lower[1]],
                vec![w[1], domain.upper[1]],
            )?);
        }
        Self::new(regions)
    }

    /// Tile a 2-D domain with an `nx` by `ny` grid of equal boxes.
    pub fn grid(domain: &BoxRegion, nx: usize, ny: usize) -> Result<Self> {
        if domain.dim() != 2 || nx == 0 || ny == 0 {
            return Err(Error::InvalidPartition(
                "grid expects a 2-D domain and positive counts".into(),
            ));
        }
        let (x0, x1) = (domain.lower[0], domain.upper[0]);
        let (y0, y1) = (domain.lower[1], domain.upper[1]);
        let mut regions = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let xl = x0 + (x1 - x0) * ix as f64 / nx as f64;
                let xu = x0 + (x1 - x0) * (ix + 1) as f64 / nx as f64;
                let yl = y0 + (y1 - y0) * iy as f64 / ny as f64;
                let yu = y0 + (y1 - y0) * (iy + 1) as f64 / ny as f64;
                regions.push(BoxRegion::new(vec![xl, yl], vec![xu, yu])?);
            }
        }
        Self::new(regions)
    }

    pub fn regions(&self) -> &[BoxRegion] {
        &self.regions
    }

    pub fn domain(&self) -> &BoxRegion {
        &self.domain
    }

    /// Number of regions `k`.
    pub fn k(&self) -> usize {
        self.regions.len()
    }

    /// Index of the region containing `p`. Boundary points go to the region
    /// with the smallest index.
    pub fn region_of(&self, p: &Location) -> Result<usize> {
        if !self.domain.contains(p) {
            return Err(Error::OutsideDomain(format!("{:?}", p.coords())));
        }
        self.regions
            .iter()
            .position(|r| r.contains(p))
            .ok_or_else(|| Error::OutsideDomain(format!("{:?}", p.coords())))
    }

    /// Decompose the segment `[s, s2]` by region.
    ///
    /// Coincident endpoints yield an empty decomposition (callers treat a
    /// zero distance specially). Pieces covered by several closed boxes are
    /// assigned to the smallest region index so lengths sum exactly to
    /// `|s - s2|`.
    pub fn segment_lengths(&self, s: &Location, s2: &Location) -> Result<SegmentDecomposition> {
        if !self.domain.contains(s) {
            return Err(Error::OutsideDomain(format!("{:?}", s.coords())));
        }
        if !self.domain.contains(s2) {
            return Err(Error::OutsideDomain(format!("{:?}", s2.coords())));
        }
        let seg_len = s.distance(s2);
        if seg_len == 0.0 {
            return Ok(SegmentDecomposition { pieces: Vec::new() });
        }
        let start = s.coords();
        let dir: Vec<f64> = s2
            .coords()
            .iter()
            .zip(start)
            .map(|(b, a)| b - a)
            .collect();

        // Claimed parameter intervals, kept sorted and disjoint. Each new box
        // only receives the part of its interval not already claimed by a
        // lower-index box.
        let mut claimed: Vec<(f64, f64)> = Vec::new();
        let mut pieces = Vec::new();
        for (idx, region) in self.regions.iter().enumerate() {
            let Some((a, b)) = region.clip_segment(start, &dir) else {
                continue;
            };
            if b <= a {
                continue;
            }
            let mut remainder = vec![(a, b)];
            for &(ca, cb) in &claimed {
                let mut next = Vec::with_capacity(remainder.len() + 1);
                for (ra, rb) in remainder {
                    if cb <= ra || ca >= rb {
                        next.push((ra, rb));
                        continue;
                    }
                    if ra < ca {
                        next.push((ra, ca));
                    }
                    if cb < rb {
                        next.push((cb, rb));
                    }
                }
                remainder = next;
            }
            let t_len: f64 = remainder.iter().map(|(ra, rb)| rb - ra).sum();
            if t_len > 0.0 {
                pieces.push((idx, t_len * seg_len));
            }
            claimed.push((a, b));
            claimed.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut merged: Vec<(f64, f64)> = Vec::with_capacity(claimed.len());
            for (ca, cb) in claimed.drain(..) {
                match merged.last_mut() {
                    Some(last) if ca <= last.1 => last.1 = last.1.max(cb),
                    _ => merged.push((ca, cb)),
                }
            }
            claimed = merged;
        }
        Ok(SegmentDecomposition { pieces })
    }

    /// Location-dependent weights `W_i(s, s2)`: the fraction of the segment
    /// in each region. They are nonnegative and sum to 1.
    pub fn weights(&self, s: &Location, s2: &Location) -> Result<Vec<(usize, f64)>> {
        let seg_len = s.distance(s2);
        if seg_len == 0.0 {
            return Err(Error::CoincidentSites);
        }
        let dec = self.segment_lengths(s, s2)?;
        Ok(dec
            .pieces()
            .iter()
            .map(|&(i, l)| (i, l / seg_len))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_strip() -> Partition {
        let domain = BoxRegion::from_bounds(&[[0.0, 2.0], [0.0, 2.0]]).unwrap();
        Partition::vertical_split(&domain, &[1.0]).unwrap()
    }

    #[test]
    fn region_of_interior_and_boundary() {
        let part = two_strip();
        assert_eq!(part.region_of(&Location::new_2d(0.5, 0.5)).unwrap(), 0);
        // shared boundary goes to the smallest index
        assert_eq!(part.region_of(&Location::new_2d(1.0, 1.0)).unwrap(), 0);
        assert_eq!(part.region_of(&Location::new_2d(1.5, 0.1)).unwrap(), 1);
        assert!(part.region_of(&Location::new_2d(2.5, 0.1)).is_err());
    }

    #[test]
    fn segment_split_at_midpoint() {
        let part = two_strip();
        let dec = part
            .segment_lengths(&Location::new_2d(0.5, 1.0), &Location::new_2d(1.5, 1.0))
            .unwrap();
        assert_eq!(dec.pieces().len(), 2);
        assert_abs_diff_eq!(dec.pieces()[0].1, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(dec.pieces()[1].1, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn same_region_pair_gets_full_length() {
        let part = two_strip();
        let s = Location::new_2d(0.2, 0.3);
        let s2 = Location::new_2d(0.9, 1.7);
        let dec = part.segment_lengths(&s, &s2).unwrap();
        assert_eq!(dec.pieces().len(), 1);
        assert_eq!(dec.pieces()[0].0, 0);
        assert_abs_diff_eq!(dec.pieces()[0].1, s.distance(&s2), epsilon = 1e-14);
        let w = part.weights(&s, &s2).unwrap();
        assert_eq!(w, vec![(0, 1.0)]);
    }

    #[test]
    fn coincident_points() {
        let part = two_strip();
        let s = Location::new_2d(0.2, 0.3);
        let dec = part.segment_lengths(&s, &s).unwrap();
        assert!(dec.is_empty());
        assert!(matches!(
            part.weights(&s, &s),
            Err(Error::CoincidentSites)
        ));
    }

    #[test]
    fn diagonal_crossing_matches_sampling_oracle() {
        // 2x2 partition of [0,2]^2; classify 1e5 points on the segment and
        // turn the fractions into lengths.
        let domain = BoxRegion::from_bounds(&[[0.0, 2.0], [0.0, 2.0]]).unwrap();
        let part = Partition::grid(&domain, 2, 2).unwrap();
        let s = Location::new_2d(0.25, 0.25);
        let s2 = Location::new_2d(1.75, 1.75);
        let dec = part.segment_lengths(&s, &s2).unwrap();
        let n = 100_000usize;
        let mut counts = vec![0usize; part.k()];
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64;
            let p = Location::new_2d(
                s.coords()[0] + t * (s2.coords()[0] - s.coords()[0]),
                s.coords()[1] + t * (s2.coords()[1] - s.coords()[1]),
            );
            counts[part.region_of(&p).unwrap()] += 1;
        }
        let seg = s.distance(&s2);
        for &(i, len) in dec.pieces() {
            let oracle = counts[i] as f64 / n as f64 * seg;
            assert_abs_diff_eq!(len, oracle, epsilon = 1e-4);
        }
        assert_abs_diff_eq!(dec.total_length(), seg, epsilon = 1e-12);
    }

    #[test]
    fn boundary_segment_does_not_double_count() {
        // a segment running along the shared boundary x = 1
        let part = two_strip();
        let s = Location::new_2d(1.0, 0.25);
        let s2 = Location::new_2d(1.0, 1.75);
        let dec = part.segment_lengths(&s, &s2).unwrap();
        assert_eq!(dec.pieces().len(), 1);
        assert_eq!(dec.pieces()[0].0, 0);
        assert_abs_diff_eq!(dec.total_length(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn refinement_reproduces_parent_decomposition() {
        let domain = BoxRegion::from_bounds(&[[0.0, 2.0], [0.0, 2.0]]).unwrap();
        let coarse = Partition::vertical_split(&domain, &[1.0]).unwrap();
        let fine = Partition::grid(&domain, 2, 4).unwrap();
        let s = Location::new_2d(0.15, 0.4);
        let s2 = Location::new_2d(1.9, 1.95);
        let dec_c = coarse.segment_lengths(&s, &s2).unwrap();
        let dec_f = fine.segment_lengths(&s, &s2).unwrap();
        // sum fine pieces by coarse membership (left column of the grid is
        // even indices)
        let mut by_strip = [0.0f64; 2];
        for &(i, l) in dec_f.pieces() {
            by_strip[i % 2] += l;
        }
        for &(i, l) in dec_c.pieces() {
            assert_abs_diff_eq!(by_strip[i], l, epsilon = 1e-12);
        }
    }

    #[test]
    fn invalid_partitions_rejected() {
        let a = BoxRegion::from_bounds(&[[0.0, 1.5], [0.0, 2.0]]).unwrap();
        let b = BoxRegion::from_bounds(&[[1.0, 2.0], [0.0, 2.0]]).unwrap();
        assert!(Partition::new(vec![a, b]).is_err()); // overlap
        let a = BoxRegion::from_bounds(&[[0.0, 0.8], [0.0, 2.0]]).unwrap();
        let b = BoxRegion::from_bounds(&[[1.0, 2.0], [0.0, 2.0]]).unwrap();
        assert!(Partition::new(vec![a, b]).is_err()); // gap
        assert!(BoxRegion::from_bounds(&[[1.0, 1.0], [0.0, 2.0]]).is_err());
    }
}
