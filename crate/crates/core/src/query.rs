//! Spatial density queries and the Average Query Error metric.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collection::DensityEstimate;
use crate::error::{Error, Result};
use crate::geo::{intersection_area, Dataset, GeoRect, Grid, Location};

/// Fraction of the population used as the AQE denominator floor.
pub const AQE_BOUND_FRACTION: f64 = 0.02;

/// "How many users are inside `rect`?"
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityQuery {
    pub rect: GeoRect,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryWorkload {
    pub queries: Vec<DensityQuery>,
    pub rho: f64,
    pub gamma: usize,
}

/// Exact answer by scanning every user. Membership follows the grid
/// convention: max edges are open unless they lie on the domain boundary.
pub fn ground_truth(users: &Dataset, q: &DensityQuery) -> u64 {
    let domain = users.domain();
    users
        .locations()
        .iter()
        .filter(|l| q.rect.covers(**l, domain))
        .count() as u64
}

/// Users sorted by longitude so a query only inspects its longitude band.
/// Answers agree exactly with [`ground_truth`].
#[derive(Clone, Debug)]
pub struct GroundTruthIndex {
    domain: GeoRect,
    by_lon: Vec<Location>,
}

impl GroundTruthIndex {
    pub fn new(users: &Dataset) -> Self {
        let mut by_lon = users.locations().to_vec();
        by_lon.sort_by(|a, b| a.lon.total_cmp(&b.lon));
        GroundTruthIndex {
            domain: *users.domain(),
            by_lon,
        }
    }

    pub fn count(&self, q: &DensityQuery) -> u64 {
        let start = self.by_lon.partition_point(|l| l.lon < q.rect.min_lon);
        let end = self.by_lon.partition_point(|l| l.lon <= q.rect.max_lon);
        self.by_lon[start..end]
            .iter()
            .filter(|l| q.rect.covers(**l, &self.domain))
            .count() as u64
    }

    pub fn answer_all(&self, workload: &QueryWorkload) -> Vec<u64> {
        workload.queries.par_iter().map(|q| self.count(q)).collect()
    }
}

/// Grid-based answer: cells inside the query count fully, partially
/// overlapping cells count in proportion to the overlapping area, disjoint
/// cells not at all.
pub fn noisy_answer(grid: &Grid, est: &DensityEstimate, q: &DensityQuery) -> f64 {
    assert_eq!(
        grid.len(),
        est.phi.len(),
        "density estimate does not match the grid"
    );
    grid.cells()
        .iter()
        .zip(&est.phi)
        .map(|(cell, &phi)| {
            if q.rect.contains_rect(&cell.rect) {
                phi
            } else {
                let overlap = intersection_area(&cell.rect, &q.rect);
                if overlap > 0.0 {
                    phi * overlap / cell.rect.area()
                } else {
                    0.0
                }
            }
        })
        .sum()
}

pub fn noisy_answers(grid: &Grid, est: &DensityEstimate, workload: &QueryWorkload) -> Vec<f64> {
    workload
        .queries
        .par_iter()
        .map(|q| noisy_answer(grid, est, q))
        .collect()
}

/// `gamma` random queries of area `rho × area(domain)`, each shaped like the
/// domain and placed uniformly among positions that keep it inside.
pub fn generate_workload<R: Rng + ?Sized>(
    domain: &GeoRect,
    rho: f64,
    gamma: usize,
    rng: &mut R,
) -> Result<QueryWorkload> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::param(format!("rho must lie in (0, 1], got {rho}")));
    }
    let scale = rho.sqrt();
    let w = domain.width() * scale;
    let h = domain.height() * scale;
    let slack_lon = domain.width() - w;
    let slack_lat = domain.height() - h;
    let queries = (0..gamma)
        .map(|_| {
            if rho == 1.0 {
                return DensityQuery { rect: *domain };
            }
            let min_lon = domain.min_lon + rng.random::<f64>() * slack_lon;
            let min_lat = domain.min_lat + rng.random::<f64>() * slack_lat;
            DensityQuery {
                rect: GeoRect {
                    min_lon,
                    min_lat,
                    max_lon: (min_lon + w).min(domain.max_lon),
                    max_lat: (min_lat + h).min(domain.max_lat),
                },
            }
        })
        .collect();
    Ok(QueryWorkload {
        queries,
        rho,
        gamma,
    })
}

/// Average relative error with denominators floored at 2% of the population.
pub fn aqe(truths: &[u64], answers: &[f64], n_users: usize) -> Result<f64> {
    if truths.len() != answers.len() {
        return Err(Error::param(format!(
            "{} truths but {} answers",
            truths.len(),
            answers.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::param("AQE needs at least one query"));
    }
    let b = AQE_BOUND_FRACTION * n_users as f64;
    let total: f64 = truths
        .iter()
        .zip(answers)
        .map(|(&t, &a)| {
            let t = t as f64;
            (t - a).abs() / t.max(b)
        })
        .sum();
    Ok(total / truths.len() as f64)
}
