//! Static k-d tree over a point cloud.
//!
//! The tree is implicit: points are permuted so that every subrange
//! `[lo, hi)` larger than a leaf stores its splitting point at the midpoint,
//! with smaller coordinates on the left.

use alloc::vec::Vec;

use super::Point;

const LEAF: usize = 8;

#[derive(Clone, Debug)]
pub struct KdTree<const D: usize> {
    pts: Vec<Point<D>>,
    ids: Vec<u32>,
    axes: Vec<u8>,
}

impl<const D: usize> KdTree<D> {
    pub fn build(points: &[Point<D>]) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut axes = alloc::vec![0u8; points.len()];
        build_range(points, &mut order, &mut axes, 0, points.len());
        let pts = order.iter().map(|&i| points[i as usize]).collect();
        KdTree {
            pts,
            ids: order,
            axes,
        }
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    /// Index (into the original slice) and squared distance of the nearest
    /// point. `None` for an empty tree.
    pub fn nearest(&self, q: &Point<D>) -> Option<(usize, f64)> {
        if self.pts.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_in(q, 0, self.pts.len(), &mut best);
        Some((self.ids[best.0] as usize, best.1))
    }

    fn nearest_in(&self, q: &Point<D>, lo: usize, hi: usize, best: &mut (usize, f64)) {
        if hi - lo <= LEAF {
            for k in lo..hi {
                let d = self.pts[k].dist2(q);
                if d < best.1 || (d == best.1 && self.ids[k] < self.ids[best.0]) {
                    *best = (k, d);
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axes[mid] as usize;
        let d = self.pts[mid].dist2(q);
        if d < best.1 || (d == best.1 && self.ids[mid] < self.ids[best.0]) {
            *best = (mid, d);
        }
        let diff = q[axis] - self.pts[mid][axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_in(q, near.0, near.1, best);
        if diff * diff <= best.1 {
            self.nearest_in(q, far.0, far.1, best);
        }
    }

    /// Calls `f(original_index, squared_distance)` for every point with
    /// `|p - q| <= radius`.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, q: &Point<D>, radius: f64, mut f: F) {
        if self.pts.is_empty() || !(radius >= 0.0) {
            return;
        }
        self.within_in(q, radius * radius, 0, self.pts.len(), &mut f);
    }

    fn within_in<F: FnMut(usize, f64)>(&self, q: &Point<D>, r2: f64, lo: usize, hi: usize, f: &mut F) {
        if hi - lo <= LEAF {
            for k in lo..hi {
                let d = self.pts[k].dist2(q);
                if d <= r2 {
                    f(self.ids[k] as usize, d);
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axes[mid] as usize;
        let d = self.pts[mid].dist2(q);
        if d <= r2 {
            f(self.ids[mid] as usize, d);
        }
        let diff = q[axis] - self.pts[mid][axis];
        if diff <= 0.0 || diff * diff <= r2 {
            self.within_in(q, r2, lo, mid, f);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.within_in(q, r2, mid + 1, hi, f);
        }
    }
}

fn build_range<const D: usize>(
    points: &[Point<D>],
    order: &mut [u32],
    axes: &mut [u8],
    lo: usize,
    hi: usize,
) {
    if hi - lo <= LEAF {
        return;
    }
    let mut min = [f64::INFINITY; D];
    let mut max = [f64::NEG_INFINITY; D];
    for &i in &order[lo..hi] {
        let p = &points[i as usize];
        for a in 0..D {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    }
    let mut axis = 0;
    for a in 1..D {
        if max[a] - min[a] > max[axis] - min[axis] {
            axis = a;
        }
    }
    let mid = (lo + hi) / 2;
    order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    axes[mid] = axis as u8;
    build_range(points, order, axes, lo, mid);
    build_range(points, order, axes, mid + 1, hi);
}
