#![allow(dead_code)]

use gridldp::adaptive::{adaptive_grid, AdaptiveGridParams, AdaptiveMethod};
use gridldp::data::{clustered_components, synth_gaussian_mixture, UNIT_SQUARE};
use gridldp::geo::Subdivision;
use gridldp::{Dataset, GeoRect, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn clustered(n: usize, seed: u64) -> Dataset {
    synth_gaussian_mixture(&UNIT_SQUARE, n, &clustered_components(), seed).unwrap()
}

pub fn adaptive(users: &Dataset, method: AdaptiveMethod, epsilon: f64, seed: u64) -> Grid {
    let params = AdaptiveGridParams::defaults(method, epsilon);
    adaptive_grid(users, &params, method, &mut rng(seed))
        .unwrap()
        .0
}

/// One grid of each kind over the unit square.
pub fn grids_of_each_kind(users: &Dataset) -> Vec<Grid> {
    vec![
        Grid::uniform(UNIT_SQUARE, 7, 5).unwrap(),
        adaptive(users, AdaptiveMethod::PrivAg, 3.0, 11),
        adaptive(users, AdaptiveMethod::Aag, 3.0, 12),
    ]
}

/// A random query that is an exact union of grid cells: either a single
/// cell or a block of whole first-level cells.
pub fn cell_aligned_query<R: Rng>(grid: &Grid, rng: &mut R) -> GeoRect {
    if rng.random_bool(0.3) {
        return grid.cells()[rng.random_range(0..grid.len())].rect;
    }
    let (cols, rows) = grid.level1_dims().expect("grid has a first level");
    let level1 = Subdivision::uniform(grid.domain(), cols, rows).unwrap();
    let span = |n: usize, rng: &mut R| {
        let a = rng.random_range(0..n);
        let b = rng.random_range(a + 1..=n);
        (a, b)
    };
    let (c0, c1) = span(cols, rng);
    let (r0, r1) = span(rows, rng);
    GeoRect::new(
        level1.x_edges()[c0],
        level1.y_edges()[r0],
        level1.x_edges()[c1],
        level1.y_edges()[r1],
    )
    .unwrap()
}

pub fn random_point_in<R: Rng>(rect: &GeoRect, rng: &mut R) -> gridldp::Location {
    gridldp::Location::new(
        rect.min_lon + rng.random::<f64>() * rect.width(),
        rect.min_lat + rng.random::<f64>() * rect.height(),
    )
}
