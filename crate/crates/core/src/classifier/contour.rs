//! Zero-level contours of a sampled scalar field and equal-arc-length resampling.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{signed_area, Point2};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContourError {
    #[error("empty success region")]
    EmptyRegion,
    #[error("invalid extraction grid: {0}")]
    BadGrid(&'static str),
    #[error("need at least 3 landmarks, got {0}")]
    TooFewLandmarks(usize),
    #[error("degenerate contour")]
    Degenerate,
}

/// Lattice of sample points `(x_min + i*cell, y_min + j*cell)` covering the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct GridSpec<F> {
    pub x_min: F,
    pub x_max: F,
    pub y_min: F,
    pub y_max: F,
    pub cell: F,
}

impl<F: Real> GridSpec<F> {
    pub fn validate(&self) -> Result<(), ContourError> {
        if !(self.cell > F::zero()) {
            return Err(ContourError::BadGrid("cell size must be positive"));
        }
        if !(self.x_max > self.x_min && self.y_max > self.y_min) {
            return Err(ContourError::BadGrid("empty rectangle"));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        ((self.x_max - self.x_min) / self.cell).round().to_usize().unwrap_or(0) + 1
    }

    pub fn ny(&self) -> usize {
        ((self.y_max - self.y_min) / self.cell).round().to_usize().unwrap_or(0) + 1
    }

    pub fn point(&self, i: usize, j: usize) -> Point2<F> {
        Point2::new(self.x_min + F::count(i) * self.cell, self.y_min + F::count(j) * self.cell)
    }
}

/// Scalar field sampled on a lattice, row-major over `j` (y) then `i` (x).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField<F> {
    pub grid: GridSpec<F>,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<F>,
}

impl<F: Real> SampledField<F> {
    pub fn sample(grid: GridSpec<F>, f: impl Fn(Point2<F>) -> F) -> Result<Self, ContourError> {
        grid.validate()?;
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(grid.point(i, j)));
            }
        }
        Ok(Self { grid, nx, ny, values })
    }

    fn at(&self, i: usize, j: usize) -> F {
        self.values[j * self.nx + i]
    }
}

/// Closed outline of the largest positive region, counterclockwise, one vertex
/// per grid-edge crossing.
pub fn extract_contour<F: Real>(field: &SampledField<F>) -> Result<Vec<Point2<F>>, ContourError> {
    let (nx, ny) = (field.nx, field.ny);
    // padded lattice: index (i+1, j+1) holds sample (i, j); the border is outside
    let (px, py) = (nx + 2, ny + 2);
    let mut v = vec![-F::one(); px * py];
    for j in 0..ny {
        for i in 0..nx {
            v[(j + 1) * px + i + 1] = field.at(i, j);
        }
    }

    // 4-connected positive components; keep the one with the most samples
    let mut comp = vec![usize::MAX; px * py];
    let mut sizes = Vec::new();
    for start in 0..px * py {
        if v[start] <= F::zero() || comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut stack = vec![start];
        comp[start] = id;
        let mut size = 0usize;
        while let Some(k) = stack.pop() {
            size += 1;
            let (i, j) = (k % px, k / px);
            let mut push = |n: usize| {
                if v[n] > F::zero() && comp[n] == usize::MAX {
                    comp[n] = id;
                    stack.push(n);
                }
            };
            if i > 0 {
                push(k - 1);
            }
            if i + 1 < px {
                push(k + 1);
            }
            if j > 0 {
                push(k - px);
            }
            if j + 1 < py {
                push(k + px);
            }
        }
        sizes.push(size);
    }
    if sizes.is_empty() {
        return Err(ContourError::EmptyRegion);
    }
    let keep = (0..sizes.len()).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap();
    if sizes.len() > 1 {
        log::warn!("{} positive components, keeping the largest ({} samples)", sizes.len(), sizes[keep]);
    }
    let tiny = F::lit(1e-12);
    for k in 0..px * py {
        if v[k] > F::zero() && comp[k] != keep {
            v[k] = -tiny;
        }
    }

    // Edge keys: (0, i, j) = edge from (i,j) to (i+1,j); (1, i, j) = edge from (i,j) to (i,j+1).
    let val = |i: usize, j: usize| v[j * px + i];
    let pos = |i: usize, j: usize| -> Point2<F> {
        let g = &field.grid;
        Point2::new(g.x_min + (F::count(i) - F::one()) * g.cell, g.y_min + (F::count(j) - F::one()) * g.cell)
    };
    let crossing = |key: (u8, usize, usize)| -> Point2<F> {
        let (a, b) = match key.0 {
            0 => ((key.1, key.2), (key.1 + 1, key.2)),
            _ => ((key.1, key.2), (key.1, key.2 + 1)),
        };
        let (fa, fb) = (val(a.0, a.1), val(b.0, b.1));
        let t = fa / (fa - fb);
        let (pa, pb) = (pos(a.0, a.1), pos(b.0, b.1));
        pa.add(pb.sub(pa).scale(t))
    };

    let mut next: HashMap<(u8, usize, usize), (u8, usize, usize)> = HashMap::new();
    for j in 0..py - 1 {
        for i in 0..px - 1 {
            // corners and edges walked counterclockwise: v0 e0 v1 e1 v2 e2 v3 e3
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let edges = [(0u8, i, j), (1u8, i + 1, j), (0u8, i, j + 1), (1u8, i, j)];
            let inside: Vec<bool> = corners.iter().map(|&(a, b)| val(a, b) > F::zero()).collect();
            let mut cross = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (inside[e], inside[(e + 1) % 4]);
                if a != b {
                    cross.push((edges[e], a));
                }
            }
            if cross.is_empty() {
                continue;
            }
            let connected = if cross.len() == 4 {
                let c = corners.iter().fold(F::zero(), |s, &(a, b)| s + val(a, b)) / F::lit(4.0);
                c > F::zero()
            } else {
                true
            };
            let nc = cross.len();
            for k in 0..nc {
                let (key, leaving) = cross[k];
                if !leaving {
                    continue;
                }
                let partner = if connected { cross[(k + 1) % nc].0 } else { cross[(k + nc - 1) % nc].0 };
                next.insert(key, partner);
            }
        }
    }

    // link segments into loops; the outer boundary has the largest positive area
    let mut keys: Vec<_> = next.keys().copied().collect();
    keys.sort();
    let mut used = std::collections::HashSet::new();
    let mut best: Option<(F, Vec<Point2<F>>)> = None;
    for &start in &keys {
        if used.contains(&start) {
            continue;
        }
        let mut poly = Vec::new();
        let mut k = start;
        loop {
            if !used.insert(k) {
                break;
            }
            poly.push(crossing(k));
            match next.get(&k) {
                Some(&n) => k = n,
                None => break,
            }
        }
        dedup_closed(&mut poly);
        if poly.len() < 3 {
            continue;
        }
        let area = signed_area(&poly);
        if best.as_ref().is_none_or(|(a, _)| area > *a) {
            best = Some((area, poly));
        }
    }
    match best {
        Some((a, poly)) if a > F::zero() => Ok(poly),
        _ => Err(ContourError::EmptyRegion),
    }
}

fn dedup_closed<F: Real>(poly: &mut Vec<Point2<F>>) {
    let eps = F::lit(1e-12);
    poly.dedup_by(|a, b| a.dist(*b) <= eps);
    while poly.len() > 1 && poly[0].dist(poly[poly.len() - 1]) <= eps {
        poly.pop();
    }
}

/// Rotates a closed polygon so it starts at the vertex of maximal x (ties: smaller y).
pub fn canonical_start<F: Real>(poly: &[Point2<F>]) -> Vec<Point2<F>> {
    let mut s = 0;
    for (k, p) in poly.iter().enumerate() {
        let q = poly[s];
        if p.x > q.x || (p.x == q.x && p.y < q.y) {
            s = k;
        }
    }
    poly[s..].iter().chain(&poly[..s]).copied().collect()
}

/// Cumulative arc length at each vertex of a closed polygon plus the total perimeter.
pub fn arc_lengths<F: Real>(poly: &[Point2<F>]) -> (Vec<F>, F) {
    let mut cum = Vec::with_capacity(poly.len());
    let mut s = F::zero();
    for k in 0..poly.len() {
        cum.push(s);
        s += poly[k].dist(poly[(k + 1) % poly.len()]);
    }
    (cum, s)
}

/// Point at normalized arc-length position `t` in [0, 1) along a closed polygon.
pub fn point_at<F: Real>(poly: &[Point2<F>], cum: &[F], total: F, t: F) -> Point2<F> {
    let mut target = (t - t.floor()) * total;
    if target >= total {
        target = F::zero();
    }
    // last vertex whose cumulative length is <= target
    let k = match cum.binary_search_by(|c| c.partial_cmp(&target).unwrap_or(std::cmp::Ordering::Less)) {
        Ok(k) => k,
        Err(k) => k - 1,
    };
    let a = poly[k];
    let b = poly[(k + 1) % poly.len()];
    let seg = a.dist(b);
    if seg <= F::zero() {
        return a;
    }
    a.add(b.sub(a).scale((target - cum[k]) / seg))
}

/// `n` points at equal arc length, starting at the polygon's first vertex.
pub fn resample_closed<F: Real>(poly: &[Point2<F>], n: usize) -> Result<Vec<Point2<F>>, ContourError> {
    if n < 3 {
        return Err(ContourError::TooFewLandmarks(n));
    }
    if poly.len() < 3 {
        return Err(ContourError::Degenerate);
    }
    let (cum, total) = arc_lengths(poly);
    if !(total > F::zero()) {
        return Err(ContourError::Degenerate);
    }
    Ok((0..n).map(|k| point_at(poly, &cum, total, F::count(k) / F::count(n))).collect())
}
