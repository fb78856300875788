mod common;

use common::{clustered, grids_of_each_kind, random_point_in, rng};
use gridldp::data::UNIT_SQUARE;
use gridldp::{GeoRect, Grid, Location};
use proptest::prelude::*;
use rand::Rng;

fn owners(grid: &Grid, loc: Location) -> Vec<usize> {
    let domain = grid.domain();
    grid.cells()
        .iter()
        .filter(|c| c.rect.covers(loc, domain))
        .map(|c| c.id)
        .collect()
}

fn check_partition(grid: &Grid, points: usize, seed: u64) {
    let area: f64 = grid.cells().iter().map(|c| c.rect.area()).sum();
    assert!((area - grid.domain().area()).abs() <= 1e-9 * grid.domain().area());
    for (i, c) in grid.cells().iter().enumerate() {
        assert_eq!(c.id, i);
        assert!(grid.domain().contains_rect(&c.rect));
    }
    let mut r = rng(seed);
    for _ in 0..points {
        let p = random_point_in(grid.domain(), &mut r);
        let ids = owners(grid, p);
        assert_eq!(ids.len(), 1, "{p:?} owned by {ids:?}");
        assert_eq!(grid.locate(p).unwrap(), ids[0]);
    }
}

#[test]
fn every_grid_kind_partitions_the_domain() {
    let users = clustered(20_000, 3);
    for (k, grid) in grids_of_each_kind(&users).iter().enumerate() {
        check_partition(grid, 10_000, k as u64);
    }
}

#[test]
fn cell_corners_have_exactly_one_owner() {
    let users = clustered(20_000, 4);
    for grid in grids_of_each_kind(&users) {
        for c in grid.cells() {
            for p in [
                Location::new(c.rect.min_lon, c.rect.min_lat),
                Location::new(c.rect.max_lon, c.rect.max_lat),
                Location::new(c.rect.min_lon, c.rect.max_lat),
                Location::new(c.rect.max_lon, c.rect.min_lat),
            ] {
                assert_eq!(owners(&grid, p).len(), 1);
                assert_eq!(grid.locate(p).unwrap(), owners(&grid, p)[0]);
            }
        }
    }
}

#[test]
fn adaptive_subcells_stay_inside_their_parent() {
    let users = clustered(20_000, 5);
    let grids = grids_of_each_kind(&users);
    for grid in &grids[1..] {
        let (cols, rows) = grid.level1_dims().unwrap();
        let coarse = Grid::uniform(*grid.domain(), cols, rows).unwrap();
        for c in grid.cells() {
            let parent = c.parent_id.expect("subcells record their parent");
            assert!(coarse.cells()[parent].rect.contains_rect(&c.rect));
        }
    }
}

#[test]
fn points_outside_the_domain_are_rejected() {
    let grid = Grid::uniform(UNIT_SQUARE, 4, 4).unwrap();
    for p in [
        Location::new(-0.1, 0.5),
        Location::new(0.5, 1.0 + 1e-12),
        Location::new(f64::NAN, 0.5),
    ] {
        assert!(grid.locate(p).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn uniform_grids_partition(
        cols in 1usize..30,
        rows in 1usize..30,
        x0 in -180.0f64..100.0,
        y0 in -80.0f64..40.0,
        w in 0.001f64..50.0,
        h in 0.001f64..40.0,
        seed in any::<u64>(),
    ) {
        let domain = GeoRect::new(x0, y0, x0 + w, y0 + h).unwrap();
        let grid = Grid::uniform(domain, cols, rows).unwrap();
        prop_assert_eq!(grid.len(), cols * rows);
        check_partition(&grid, 300, seed);
    }

    #[test]
    fn locate_is_a_function(seed in any::<u64>(), lon in 0.0f64..=1.0, lat in 0.0f64..=1.0) {
        let grid = Grid::uniform(UNIT_SQUARE, 9, 4).unwrap();
        let p = Location::new(lon, lat);
        let a = grid.locate(p).unwrap();
        prop_assert_eq!(a, grid.locate(p).unwrap());
        prop_assert_eq!(owners(&grid, p), vec![a]);
        let mut r = rng(seed);
        let q = Location::new(r.random(), r.random());
        prop_assert_eq!(owners(&grid, q).len(), 1);
    }
}
