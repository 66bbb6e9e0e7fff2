//! Probability and cost grids, their algebra and export formats.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::MapError;
use crate::geometry::Point2;
use crate::provenance::Provenance;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Edge-relative feature frame of one object.
    Gsm,
    World,
}

impl Frame {
    pub fn as_str(self) -> &'static str {
        match self {
            Frame::Gsm => "gsm",
            Frame::World => "world",
        }
    }
}

/// Cell layout: cell `(row, col)` has its lower-left corner at
/// `origin + (col, row) * cell_size`; rows run along y, columns along x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct GridGeometry<F> {
    pub origin: Point2<F>,
    pub cell_size: F,
    pub nx: usize,
    pub ny: usize,
    pub frame: Frame,
}

impl<F: Real> GridGeometry<F> {
    pub fn new(origin: Point2<F>, cell_size: F, nx: usize, ny: usize, frame: Frame) -> Result<Self, MapError> {
        if !(cell_size > F::zero()) || nx == 0 || ny == 0 {
            return Err(MapError::BadGeometry("cell size must be positive and the grid non-empty".into()));
        }
        Ok(Self { origin, cell_size, nx, ny, frame })
    }

    /// Smallest grid of `cell_size` cells covering the rectangle.
    pub fn covering(x_min: F, x_max: F, y_min: F, y_max: F, cell_size: F, frame: Frame) -> Result<Self, MapError> {
        let nx = ((x_max - x_min) / cell_size - F::lit(1e-9)).ceil().to_usize().unwrap_or(0).max(1);
        let ny = ((y_max - y_min) / cell_size - F::lit(1e-9)).ceil().to_usize().unwrap_or(0).max(1);
        Self::new(Point2::new(x_min, y_min), cell_size, nx, ny, frame)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.nx + col
    }

    pub fn center(&self, row: usize, col: usize) -> Point2<F> {
        let half = F::lit(0.5);
        Point2::new(
            self.origin.x + (F::count(col) + half) * self.cell_size,
            self.origin.y + (F::count(row) + half) * self.cell_size,
        )
    }

    pub fn center_of(&self, k: usize) -> Point2<F> {
        self.center(k / self.nx, k % self.nx)
    }

    /// Cell containing `p`, if any.
    pub fn locate(&self, p: Point2<F>) -> Option<(usize, usize)> {
        let c = ((p.x - self.origin.x) / self.cell_size).floor();
        let r = ((p.y - self.origin.y) / self.cell_size).floor();
        if c < F::zero() || r < F::zero() {
            return None;
        }
        let (c, r) = (c.to_usize()?, r.to_usize()?);
        (c < self.nx && r < self.ny).then_some((r, c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct ArplaceGrid<F> {
    pub geometry: GridGeometry<F>,
    /// Row-major success probabilities.
    pub probs: Vec<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct CostGrid<F> {
    pub geometry: GridGeometry<F>,
    /// Expected seconds per cell.
    pub costs: Vec<F>,
}

/// Best cell of a map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct CellChoice<F> {
    pub row: usize,
    pub col: usize,
    pub center: Point2<F>,
    pub value: F,
}

impl<F: Real> ArplaceGrid<F> {
    pub fn filled(geometry: GridGeometry<F>, value: F) -> Self {
        Self { geometry, probs: vec![value; geometry.len()] }
    }

    pub fn from_probs(geometry: GridGeometry<F>, probs: Vec<F>) -> Result<Self, MapError> {
        if probs.len() != geometry.len() {
            return Err(MapError::BadGeometry(format!("{} values for {} cells", probs.len(), geometry.len())));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= F::zero() && **p <= F::one())) {
            return Err(MapError::BadGeometry(format!("probability {} outside [0, 1]", p.as_f64())));
        }
        Ok(Self { geometry, probs })
    }

    pub fn at(&self, row: usize, col: usize) -> F {
        self.probs[self.geometry.index(row, col)]
    }

    pub fn max(&self) -> F {
        self.probs.iter().fold(F::zero(), |m, &p| m.max(p))
    }

    pub fn mean(&self) -> F {
        self.probs.iter().copied().sum::<F>() / F::count(self.probs.len())
    }

    /// Argmax; ties resolve to the smallest `(row, col)`.
    pub fn best_cell(&self) -> CellChoice<F> {
        let mut best = 0;
        for (k, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = k;
            }
        }
        let (row, col) = (best / self.geometry.nx, best % self.geometry.nx);
        CellChoice { row, col, center: self.geometry.center(row, col), value: self.probs[best] }
    }

    /// Value at an arbitrary point (nearest cell), zero outside the grid.
    pub fn value_at(&self, p: Point2<F>) -> F {
        self.geometry.locate(p).map_or(F::zero(), |(r, c)| self.at(r, c))
    }

    /// Nearest-cell resampling onto another geometry in the same frame.
    pub fn resample(&self, target: &GridGeometry<F>) -> Result<Self, MapError> {
        if target.frame != self.geometry.frame {
            return Err(MapError::FrameMismatch);
        }
        let probs = (0..target.len()).map(|k| self.value_at(target.center_of(k))).collect();
        Ok(Self { geometry: *target, probs })
    }
}

/// Cellwise product of two maps with identical geometry.
pub fn merge<F: Real>(a: &ArplaceGrid<F>, b: &ArplaceGrid<F>) -> Result<ArplaceGrid<F>, MapError> {
    if a.geometry != b.geometry {
        return Err(MapError::GeometryMismatch);
    }
    Ok(ArplaceGrid { geometry: a.geometry, probs: a.probs.iter().zip(&b.probs).map(|(&x, &y)| x * y).collect() })
}

/// Per-cell maximum over maps on a shared lattice; the result spans the union of
/// their extents and cells covered by no map are zero.
pub fn union_edges<F: Real>(maps: &[ArplaceGrid<F>]) -> Result<ArplaceGrid<F>, MapError> {
    let first = maps.first().ok_or(MapError::NoMaps)?;
    let g0 = first.geometry;
    let tol = F::lit(1e-9) * g0.cell_size;
    let mut offsets = Vec::with_capacity(maps.len());
    for m in maps {
        let g = &m.geometry;
        if g.frame != g0.frame {
            return Err(MapError::FrameMismatch);
        }
        if (g.cell_size - g0.cell_size).abs() > tol {
            return Err(MapError::GeometryMismatch);
        }
        let ox = (g.origin.x - g0.origin.x) / g0.cell_size;
        let oy = (g.origin.y - g0.origin.y) / g0.cell_size;
        if (ox - ox.round()).abs() > F::lit(1e-6) || (oy - oy.round()).abs() > F::lit(1e-6) {
            return Err(MapError::GeometryMismatch);
        }
        offsets.push((ox.round().to_i64().unwrap_or(0), oy.round().to_i64().unwrap_or(0)));
    }
    let min_c = offsets.iter().map(|o| o.0).min().unwrap();
    let min_r = offsets.iter().map(|o| o.1).min().unwrap();
    let max_c = maps.iter().zip(&offsets).map(|(m, o)| o.0 + m.geometry.nx as i64).max().unwrap();
    let max_r = maps.iter().zip(&offsets).map(|(m, o)| o.1 + m.geometry.ny as i64).max().unwrap();
    let geometry = GridGeometry {
        origin: Point2::new(
            g0.origin.x + F::lit(min_c as f64) * g0.cell_size,
            g0.origin.y + F::lit(min_r as f64) * g0.cell_size,
        ),
        cell_size: g0.cell_size,
        nx: (max_c - min_c) as usize,
        ny: (max_r - min_r) as usize,
        frame: g0.frame,
    };
    let mut probs = vec![F::zero(); geometry.len()];
    for (m, o) in maps.iter().zip(&offsets) {
        let (dc, dr) = ((o.0 - min_c) as usize, (o.1 - min_r) as usize);
        for r in 0..m.geometry.ny {
            for c in 0..m.geometry.nx {
                let k = geometry.index(r + dr, c + dc);
                probs[k] = probs[k].max(m.at(r, c));
            }
        }
    }
    Ok(ArplaceGrid { geometry, probs })
}

/// `u = (1 - P) * retry_penalty + distance / speed` per cell.
pub fn cost_map<F: Real>(map: &ArplaceGrid<F>, robot: Point2<F>, retry_penalty_s: F, nav_speed_mps: F) -> Result<CostGrid<F>, MapError> {
    if !(nav_speed_mps > F::zero()) || retry_penalty_s < F::zero() {
        return Err(MapError::BadParameter("speed must be positive and retry penalty non-negative"));
    }
    let costs = (0..map.geometry.len())
        .map(|k| (F::one() - map.probs[k]) * retry_penalty_s + map.geometry.center_of(k).dist(robot) / nav_speed_mps)
        .collect();
    Ok(CostGrid { geometry: map.geometry, costs })
}

impl<F: Real> CostGrid<F> {
    /// Argmin; ties resolve to the smallest `(row, col)`.
    pub fn best_cell(&self) -> CellChoice<F> {
        let mut best = 0;
        for (k, &c) in self.costs.iter().enumerate() {
            if c < self.costs[best] {
                best = k;
            }
        }
        let (row, col) = (best / self.geometry.nx, best % self.geometry.nx);
        CellChoice { row, col, center: self.geometry.center(row, col), value: self.costs[best] }
    }
}

fn write_header<W: Write, F: Real>(out: &mut W, g: &GridGeometry<F>, provenance: Option<&Provenance>) -> std::io::Result<()> {
    if let Some(p) = provenance {
        writeln!(out, "{}", p.comment_line())?;
    }
    writeln!(out, "# frame={}", g.frame.as_str())?;
    writeln!(out, "{}", g.origin.x)?;
    writeln!(out, "{}", g.origin.y)?;
    writeln!(out, "{}", g.cell_size)?;
    writeln!(out, "{} {}", g.nx, g.ny)
}

fn write_rows<W: Write, F: Real>(out: &mut W, g: &GridGeometry<F>, values: &[F]) -> std::io::Result<()> {
    for r in 0..g.ny {
        let row: Vec<String> = values[r * g.nx..(r + 1) * g.nx].iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

impl<F: Real> ArplaceGrid<F> {
    /// Text matrix: `#` comment lines, then origin_x, origin_y, cell_size and
    /// `nx ny` on one line each, then `ny` rows of `nx` values, row 0 first.
    pub fn write_text<W: Write>(&self, mut out: W, provenance: Option<&Provenance>) -> std::io::Result<()> {
        write_header(&mut out, &self.geometry, provenance)?;
        write_rows(&mut out, &self.geometry, &self.probs)
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self, MapError> {
        let (geometry, values) = read_matrix(input)?;
        Self::from_probs(geometry, values)
    }

    /// Binary 8-bit graymap (P5), pixel = round(255 * P), grid row 0 as the first image row.
    pub fn write_pgm<W: Write>(&self, mut out: W, provenance: Option<&Provenance>) -> std::io::Result<()> {
        writeln!(out, "P5")?;
        if let Some(p) = provenance {
            writeln!(out, "{}", p.comment_line())?;
        }
        writeln!(out, "{} {}", self.geometry.nx, self.geometry.ny)?;
        writeln!(out, "255")?;
        let bytes: Vec<u8> = self
            .probs
            .iter()
            .map(|p| (p.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        out.write_all(&bytes)
    }
}

impl<F: Real> CostGrid<F> {
    pub fn write_text<W: Write>(&self, mut out: W, provenance: Option<&Provenance>) -> std::io::Result<()> {
        write_header(&mut out, &self.geometry, provenance)?;
        write_rows(&mut out, &self.geometry, &self.costs)
    }
}

fn read_matrix<R: BufRead, F: Real>(input: R) -> Result<(GridGeometry<F>, Vec<F>), MapError> {
    let mut frame = Frame::Gsm;
    let mut header: Vec<String> = Vec::new();
    let mut values = Vec::new();
    for line in input.lines() {
        let line = line?;
        let t = line.trim();
        if let Some(c) = t.strip_prefix('#') {
            if let Some(f) = c.trim().strip_prefix("frame=") {
                frame = match f.trim() {
                    "world" => Frame::World,
                    "gsm" => Frame::Gsm,
                    other => return Err(MapError::Parse(format!("unknown frame {other}"))),
                };
            }
            continue;
        }
        if t.is_empty() {
            continue;
        }
        if header.len() < 4 {
            header.push(t.to_string());
            continue;
        }
        for tok in t.split_whitespace() {
            let v: f64 = tok.parse().map_err(|e| MapError::Parse(format!("value {tok}: {e}")))?;
            values.push(F::lit(v));
        }
    }
    if header.len() < 4 {
        return Err(MapError::Parse("truncated header".into()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| MapError::Parse(format!("header {s}: {e}")));
    let dims: Vec<&str> = header[3].split_whitespace().collect();
    if dims.len() != 2 {
        return Err(MapError::Parse("fourth header line must be `nx ny`".into()));
    }
    let nx = dims[0].parse::<usize>().map_err(|e| MapError::Parse(e.to_string()))?;
    let ny = dims[1].parse::<usize>().map_err(|e| MapError::Parse(e.to_string()))?;
    let geometry = GridGeometry::new(
        Point2::new(F::lit(num(&header[0])?), F::lit(num(&header[1])?)),
        F::lit(num(&header[2])?),
        nx,
        ny,
        frame,
    )?;
    if values.len() != geometry.len() {
        return Err(MapError::Parse(format!("expected {} values, found {}", geometry.len(), values.len())));
    }
    Ok((geometry, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(nx: usize, ny: usize) -> GridGeometry<f64> {
        GridGeometry::new(Point2::new(-1.0, 2.0), 0.5, nx, ny, Frame::World).unwrap()
    }

    #[test]
    fn cell_centers_and_lookup() {
        let g = geom(4, 3);
        assert_eq!(g.center(0, 0), Point2::new(-0.75, 2.25));
        assert_eq!(g.center(2, 3), Point2::new(0.75, 3.25));
        assert_eq!(g.locate(Point2::new(0.9, 3.4)), Some((2, 3)));
        assert_eq!(g.locate(Point2::new(1.1, 3.4)), None);
        assert_eq!(g.locate(Point2::new(-1.1, 2.1)), None);
    }

    #[test]
    fn formula_example() {
        let g = geom(1, 1);
        let map = ArplaceGrid::filled(g, 0.5);
        let robot = g.center(0, 0).add(Point2::new(0.3, 0.0));
        let cost = cost_map(&map, robot, 5.0, 0.3).unwrap();
        assert!((cost.costs[0] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn uniform_best_cell_is_origin() {
        let map = ArplaceGrid::filled(geom(3, 3), 0.4);
        let b = map.best_cell();
        assert_eq!((b.row, b.col), (0, 0));
    }

    #[test]
    fn merge_requires_same_geometry() {
        assert_eq!(merge(&ArplaceGrid::filled(geom(3, 3), 0.4), &ArplaceGrid::filled(geom(3, 2), 0.4)), Err(MapError::GeometryMismatch));
    }

    #[test]
    fn union_of_offset_maps() {
        let a = ArplaceGrid::from_probs(geom(2, 1), vec![0.2, 0.9]).unwrap();
        let mut gb = geom(2, 1);
        gb.origin = Point2::new(-0.5, 2.5);
        let b = ArplaceGrid::from_probs(gb, vec![0.5, 0.1]).unwrap();
        let u = union_edges(&[a, b]).unwrap();
        assert_eq!((u.geometry.nx, u.geometry.ny), (3, 2));
        assert_eq!(u.probs, vec![0.2, 0.9, 0.0, 0.0, 0.5, 0.1]);
        let mut gc = geom(1, 1);
        gc.origin = Point2::new(-0.7, 2.0);
        assert!(union_edges(&[ArplaceGrid::filled(geom(1, 1), 0.1), ArplaceGrid::filled(gc, 0.1)]).is_err());
        assert_eq!(union_edges::<f64>(&[]), Err(MapError::NoMaps));
    }

    #[test]
    fn text_round_trip_and_pgm_layout() {
        let map = ArplaceGrid::from_probs(geom(3, 2), vec![0.0, 0.1, 0.25, 1.0, 0.5, 1.0 / 3.0]).unwrap();
        let mut buf = Vec::new();
        map.write_text(&mut buf, Some(&Provenance::new(1, "h"))).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(&lines[2..6], &["-1", "2", "0.5", "3 2"]);
        assert_eq!(ArplaceGrid::read_text(&buf[..]).unwrap(), map);

        let mut pgm = Vec::new();
        map.write_pgm(&mut pgm, None).unwrap();
        assert!(pgm.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&pgm[pgm.len() - 6..], &[0, 26, 64, 255, 128, 85]);
    }
}
