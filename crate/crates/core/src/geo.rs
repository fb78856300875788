//! Rectangles, locations and grids.
//!
//! A [`Grid`] is an ordered decomposition of a rectangular domain into
//! disjoint rectangular cells. Cell membership is half-open: a cell owns its
//! minimum edges and not its maximum edges, except that edges lying on the
//! domain's maximum boundary are closed. This makes [`Grid::locate`] total and
//! single-valued over the closed domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in coordinate units (decimal degrees for real data).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoRect {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl GeoRect {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self> {
        let r = GeoRect {
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        };
        if ![min_lon, min_lat, max_lon, max_lat]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::param(format!("non-finite rectangle {r:?}")));
        }
        if !(min_lon < max_lon && min_lat < max_lat) {
            return Err(Error::param(format!("degenerate rectangle {r:?}")));
        }
        Ok(r)
    }

    pub fn width(&self) -> f64 {
        self.max_lon - self.min_lon
    }

    pub fn height(&self) -> f64 {
        self.max_lat - self.min_lat
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// True when `other` lies entirely within `self` (boundaries may touch).
    pub fn contains_rect(&self, other: &GeoRect) -> bool {
        self.min_lon <= other.min_lon
            && self.min_lat <= other.min_lat
            && other.max_lon <= self.max_lon
            && other.max_lat <= self.max_lat
    }

    /// Closed-rectangle membership.
    pub fn contains_closed(&self, loc: Location) -> bool {
        self.min_lon <= loc.lon
            && loc.lon <= self.max_lon
            && self.min_lat <= loc.lat
            && loc.lat <= self.max_lat
    }

    /// Half-open membership relative to `domain`: min edges included, max
    /// edges excluded unless they coincide with the domain's max edge.
    pub fn covers(&self, loc: Location, domain: &GeoRect) -> bool {
        let lon_ok = loc.lon >= self.min_lon
            && (loc.lon < self.max_lon
                || (self.max_lon == domain.max_lon && loc.lon <= self.max_lon));
        let lat_ok = loc.lat >= self.min_lat
            && (loc.lat < self.max_lat
                || (self.max_lat == domain.max_lat && loc.lat <= self.max_lat));
        lon_ok && lat_ok
    }

    pub fn intersection_area(&self, other: &GeoRect) -> f64 {
        intersection_area(self, other)
    }
}

/// Area of `a ∩ b`; zero for disjoint or edge-touching rectangles.
pub fn intersection_area(a: &GeoRect, b: &GeoRect) -> f64 {
    let w = a.max_lon.min(b.max_lon) - a.min_lon.max(b.min_lon);
    let h = a.max_lat.min(b.max_lat) - a.min_lat.max(b.min_lat);
    if w <= 0.0 || h <= 0.0 {
        0.0
    } else {
        w * h
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub lon: f64,
    pub lat: f64,
}

impl Location {
    pub fn new(lon: f64, lat: f64) -> Self {
        Location { lon, lat }
    }

    pub fn is_finite(&self) -> bool {
        self.lon.is_finite() && self.lat.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub id: usize,
    pub rect: GeoRect,
    /// Index of the first-level cell this cell was carved from, if any.
    pub parent_id: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Uniform,
    PrivAg,
    Aag,
}

impl GridKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GridKind::Uniform => "uniform",
            GridKind::PrivAg => "privag",
            GridKind::Aag => "aag",
        }
    }
}

/// A rectilinear split of one rectangle: strictly increasing edge lists along
/// each axis. Cells are enumerated row-major with row 0 at the minimum
/// latitude.
#[derive(Clone, Debug, PartialEq)]
pub struct Subdivision {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Subdivision {
    pub fn uniform(rect: &GeoRect, cols: usize, rows: usize) -> Result<Self> {
        if cols == 0 || rows == 0 {
            return Err(Error::param(format!(
                "grid dimensions must be positive, got {cols}x{rows}"
            )));
        }
        Ok(Subdivision {
            xs: uniform_edges(rect.min_lon, rect.max_lon, cols),
            ys: uniform_edges(rect.min_lat, rect.max_lat, rows),
        })
    }

    pub fn from_edges(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        for (axis, edges) in [("x", &xs), ("y", &ys)] {
            if edges.len() < 2 {
                return Err(Error::param(format!("{axis} edges need at least 2 values")));
            }
            if !edges.iter().all(|e| e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::param(format!(
                    "{axis} edges must be finite and strictly increasing"
                )));
            }
        }
        Ok(Subdivision { xs, ys })
    }

    pub fn cols(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn rows(&self) -> usize {
        self.ys.len() - 1
    }

    pub fn len(&self) -> usize {
        self.cols() * self.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self) -> GeoRect {
        GeoRect {
            min_lon: self.xs[0],
            min_lat: self.ys[0],
            max_lon: *self.xs.last().unwrap(),
            max_lat: *self.ys.last().unwrap(),
        }
    }

    pub fn x_edges(&self) -> &[f64] {
        &self.xs
    }

    pub fn y_edges(&self) -> &[f64] {
        &self.ys
    }

    pub fn rect(&self, col: usize, row: usize) -> GeoRect {
        GeoRect {
            min_lon: self.xs[col],
            min_lat: self.ys[row],
            max_lon: self.xs[col + 1],
            max_lat: self.ys[row + 1],
        }
    }

    /// Materializes the cells with consecutive ids starting at `first_id`.
    pub fn cells(&self, first_id: usize, parent_id: Option<usize>) -> Vec<GridCell> {
        let mut out = Vec::with_capacity(self.len());
        for row in 0..self.rows() {
            for col in 0..self.cols() {
                out.push(GridCell {
                    id: first_id + out.len(),
                    rect: self.rect(col, row),
                    parent_id,
                });
            }
        }
        out
    }

    /// (col, row) of the cell owning `(lon, lat)`, assuming the point is
    /// within the closed bounds.
    fn bucket(&self, loc: Location) -> (usize, usize) {
        (bucket(&self.xs, loc.lon), bucket(&self.ys, loc.lat))
    }
}

/// `n + 1` evenly spaced edges with both endpoints exact.
pub(crate) fn uniform_edges(min: f64, max: f64, n: usize) -> Vec<f64> {
    let span = max - min;
    let mut edges: Vec<f64> = (0..=n)
        .map(|i| min + span * (i as f64 / n as f64))
        .collect();
    edges[0] = min;
    edges[n] = max;
    edges
}

/// Number of interior edges `<= v`, i.e. the half-open bucket of `v` with the
/// last bucket closed on the right.
fn bucket(edges: &[f64], v: f64) -> usize {
    edges[1..edges.len() - 1].partition_point(|&e| e <= v)
}

#[derive(Clone, Debug)]
struct Block {
    split: Subdivision,
    first_id: usize,
}

/// Two-level stride index: a uniform first level whose cells each carry their
/// own rectilinear subdivision.
#[derive(Clone, Debug)]
struct GridIndex {
    level1: Subdivision,
    blocks: Vec<Block>,
}

/// A decomposition of `domain` into disjoint cells. Immutable once built.
#[derive(Clone, Debug)]
pub struct Grid {
    domain: GeoRect,
    cells: Vec<GridCell>,
    kind: GridKind,
    index: Option<GridIndex>,
}

impl Grid {
    /// `n_cols × n_rows` equal cells in row-major order.
    pub fn uniform(domain: GeoRect, n_cols: usize, n_rows: usize) -> Result<Self> {
        let level1 = Subdivision::uniform(&domain, n_cols, n_rows)?;
        let cells = level1.cells(0, None);
        let blocks = cells
            .iter()
            .map(|c| Block {
                split: Subdivision {
                    xs: vec![c.rect.min_lon, c.rect.max_lon],
                    ys: vec![c.rect.min_lat, c.rect.max_lat],
                },
                first_id: c.id,
            })
            .collect();
        Ok(Grid {
            domain,
            cells,
            kind: GridKind::Uniform,
            index: Some(GridIndex { level1, blocks }),
        })
    }

    /// Builds a two-level grid from a uniform first level and one subdivision
    /// per first-level cell (in first-level id order). Subcells are appended
    /// in that order and record their first-level parent.
    pub fn two_level(
        domain: GeoRect,
        kind: GridKind,
        level1: Subdivision,
        splits: Vec<Subdivision>,
    ) -> Result<Self> {
        if splits.len() != level1.len() {
            return Err(Error::param(format!(
                "expected {} subdivisions, got {}",
                level1.len(),
                splits.len()
            )));
        }
        if level1.bounds() != domain {
            return Err(Error::param("first level does not span the domain"));
        }
        let mut cells = Vec::new();
        let mut blocks = Vec::with_capacity(splits.len());
        for (parent, split) in splits.into_iter().enumerate() {
            let (col, row) = (parent % level1.cols(), parent / level1.cols());
            if split.bounds() != level1.rect(col, row) {
                return Err(Error::param(format!(
                    "subdivision {parent} does not match its parent cell"
                )));
            }
            let first_id = cells.len();
            cells.extend(split.cells(first_id, Some(parent)));
            blocks.push(Block { split, first_id });
        }
        Ok(Grid {
            domain,
            cells,
            kind,
            index: Some(GridIndex { level1, blocks }),
        })
    }

    /// Builds a grid from arbitrary rectangles, checking that they lie in the
    /// domain and cover its area. Lookups on such grids scan linearly.
    pub fn from_rects(domain: GeoRect, kind: GridKind, rects: Vec<GeoRect>) -> Result<Self> {
        if rects.is_empty() {
            return Err(Error::param("grid needs at least one cell"));
        }
        if let Some(r) = rects.iter().find(|r| !domain.contains_rect(r)) {
            return Err(Error::param(format!("cell {r:?} escapes the domain")));
        }
        let total: f64 = rects.iter().map(GeoRect::area).sum();
        if ((total - domain.area()) / domain.area()).abs() > 1e-9 {
            return Err(Error::param(format!(
                "cells cover area {total}, domain has {}",
                domain.area()
            )));
        }
        let cells = rects
            .into_iter()
            .enumerate()
            .map(|(id, rect)| GridCell {
                id,
                rect,
                parent_id: None,
            })
            .collect();
        Ok(Grid {
            domain,
            cells,
            kind,
            index: None,
        })
    }

    pub fn domain(&self) -> &GeoRect {
        &self.domain
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Column and row counts of the first level, when the grid has one.
    pub fn level1_dims(&self) -> Option<(usize, usize)> {
        self.index
            .as_ref()
            .map(|ix| (ix.level1.cols(), ix.level1.rows()))
    }

    /// Id of the unique cell owning `loc`.
    pub fn locate(&self, loc: Location) -> Result<usize> {
        if !loc.is_finite() || !self.domain.contains_closed(loc) {
            return Err(Error::DomainViolation {
                lon: loc.lon,
                lat: loc.lat,
            });
        }
        match &self.index {
            Some(ix) => {
                let (col, row) = ix.level1.bucket(loc);
                let block = &ix.blocks[row * ix.level1.cols() + col];
                let (c, r) = block.split.bucket(loc);
                Ok(block.first_id + r * block.split.cols() + c)
            }
            None => self
                .cells
                .iter()
                .position(|c| c.rect.covers(loc, &self.domain))
                .ok_or(Error::DomainViolation {
                    lon: loc.lon,
                    lat: loc.lat,
                }),
        }
    }
}

/// The user population: one location per user, all inside `domain`.
#[derive(Clone, Debug)]
pub struct Dataset {
    domain: GeoRect,
    locations: Vec<Location>,
}

impl Dataset {
    pub fn new(domain: GeoRect, locations: Vec<Location>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(l) = locations
            .iter()
            .find(|l| !l.is_finite() || !domain.contains_closed(**l))
        {
            return Err(Error::DomainViolation {
                lon: l.lon,
                lat: l.lat,
            });
        }
        Ok(Dataset { domain, locations })
    }

    pub fn domain(&self) -> &GeoRect {
        &self.domain
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}
