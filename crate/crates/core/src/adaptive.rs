//! Two-phase adaptive grids.
//!
//! Both methods split the population into a phase-1 group that reports over a
//! coarse `g1 × g1` uniform grid, and a phase-2 group that reports over the
//! refined grid. PrivAG refines each coarse cell into `g2 × g2` equal pieces.
//! AAG first cuts each cell once along each axis at offsets weighted by the
//! densities of its four neighbours, then splits the four quadrants evenly.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collection::{collect, DensityEstimate};
use crate::error::{Error, Result};
use crate::geo::{
    uniform_edges, Dataset, GeoRect, Grid, GridCell, GridKind, Location, Subdivision,
};

/// Lower bound applied to neighbour densities before forming split ratios.
pub const SPLIT_DENSITY_FLOOR: f64 = 1.0;
/// Split fractions are confined to this range so no subcell degenerates.
pub const SPLIT_FRACTION_RANGE: (f64, f64) = (0.1, 0.9);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdaptiveMethod {
    PrivAg,
    Aag,
}

impl AdaptiveMethod {
    pub fn grid_kind(self) -> GridKind {
        match self {
            AdaptiveMethod::PrivAg => GridKind::PrivAg,
            AdaptiveMethod::Aag => GridKind::Aag,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveGridParams {
    /// α used to size the first-level grid.
    pub alpha_g1: f64,
    /// α used to size each cell's second-level split.
    pub alpha_g2: f64,
    /// Fraction of users assigned to phase 1.
    pub sigma: f64,
    pub epsilon: f64,
}

impl AdaptiveGridParams {
    pub fn privag(epsilon: f64) -> Self {
        AdaptiveGridParams {
            alpha_g1: 0.02,
            alpha_g2: 0.02,
            sigma: 0.2,
            epsilon,
        }
    }

    /// AAG keeps PrivAG's first level and raises α and σ for the second.
    pub fn aag(epsilon: f64) -> Self {
        AdaptiveGridParams {
            alpha_g1: 0.02,
            alpha_g2: 0.25,
            sigma: 0.5,
            epsilon,
        }
    }

    pub fn defaults(method: AdaptiveMethod, epsilon: f64) -> Self {
        match method {
            AdaptiveMethod::PrivAg => Self::privag(epsilon),
            AdaptiveMethod::Aag => Self::aag(epsilon),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::param(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::param(format!(
                "sigma must lie in (0, 1), got {}",
                self.sigma
            )));
        }
        for alpha in [self.alpha_g1, self.alpha_g2] {
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(Error::param(format!("alpha must be positive, got {alpha}")));
            }
        }
        Ok(())
    }
}

/// Unrounded first-level grid side.
pub fn g1_raw(n_users: usize, epsilon: f64, alpha_g1: f64) -> f64 {
    let e = epsilon.exp();
    (2.0 * alpha_g1 * (e - 1.0) * (n_users as f64 / e).sqrt()).sqrt()
}

/// First-level grid side `g1` (the coarse grid is `g1 × g1`).
pub fn compute_g1(n_users: usize, epsilon: f64, alpha_g1: f64) -> usize {
    round_side(g1_raw(n_users, epsilon, alpha_g1))
}

/// Unrounded second-level split for a cell holding `density_fraction` of the
/// phase-1 population.
pub fn g2_raw(
    density_fraction: f64,
    epsilon: f64,
    alpha_g2: f64,
    sigma: f64,
    n_users: usize,
) -> f64 {
    if density_fraction.is_nan() || density_fraction <= 0.0 {
        return 0.0;
    }
    let f = density_fraction.min(1.0);
    let e = epsilon.exp();
    (2.0 * alpha_g2 * f * (e - 1.0) * ((1.0 - sigma) * n_users as f64 / e).sqrt()).sqrt()
}

/// Second-level split `g2` for one coarse cell; at least 1.
pub fn compute_g2(
    density_fraction: f64,
    epsilon: f64,
    alpha_g2: f64,
    sigma: f64,
    n_users: usize,
) -> usize {
    round_side(g2_raw(density_fraction, epsilon, alpha_g2, sigma, n_users))
}

fn round_side(raw: f64) -> usize {
    if raw.is_finite() {
        (raw.round() as usize).max(1)
    } else {
        1
    }
}

/// Densities of the four axis neighbours of a coarse cell. Missing neighbours
/// carry the cell's own density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborDensities {
    pub left: f64,
    pub right: f64,
    pub up: f64,
    pub down: f64,
}

/// Neighbour densities of cell `index` of a uniform coarse grid.
pub fn neighbor_densities(g1_grid: &Grid, phi: &[f64], index: usize) -> Result<NeighborDensities> {
    let (cols, rows) = g1_grid
        .level1_dims()
        .filter(|&(c, r)| c * r == g1_grid.len())
        .ok_or_else(|| Error::param("neighbour lookup needs a uniform coarse grid"))?;
    if phi.len() != g1_grid.len() || index >= phi.len() {
        return Err(Error::param("density vector does not match the grid"));
    }
    let (col, row) = (index % cols, index / cols);
    let own = phi[index];
    let at = |c: usize, r: usize| phi[r * cols + c];
    Ok(NeighborDensities {
        left: if col > 0 { at(col - 1, row) } else { own },
        right: if col + 1 < cols {
            at(col + 1, row)
        } else {
            own
        },
        // row 0 is the southernmost row
        up: if row + 1 < rows {
            at(col, row + 1)
        } else {
            own
        },
        down: if row > 0 { at(col, row - 1) } else { own },
    })
}

/// `toward / (away + toward)` after flooring both, confined to
/// [`SPLIT_FRACTION_RANGE`]; 0.5 when neither side carries positive density.
fn split_fraction(away: f64, toward: f64) -> f64 {
    let positive = |d: f64| d > 0.0;
    if !positive(away) && !positive(toward) {
        return 0.5;
    }
    let a = away.max(SPLIT_DENSITY_FLOOR);
    let t = toward.max(SPLIT_DENSITY_FLOOR);
    let (lo, hi) = SPLIT_FRACTION_RANGE;
    (t / (a + t)).clamp(lo, hi)
}

/// Horizontal split offset measured from the cell's left edge.
pub fn compute_hsplit(neigh: &NeighborDensities, cell_width: f64) -> f64 {
    split_fraction(neigh.left, neigh.right) * cell_width
}

/// Vertical split offset measured from the cell's top edge. A denser bottom
/// neighbour pushes the cut down and leaves a smaller bottom subcell.
pub fn compute_vsplit(neigh: &NeighborDensities, cell_height: f64) -> f64 {
    split_fraction(neigh.up, neigh.down) * cell_height
}

/// Even split of `rect` into `g2 × g2` pieces.
pub fn privag_split(rect: &GeoRect, g2: usize) -> Result<Subdivision> {
    Subdivision::uniform(rect, g2, g2)
}

/// Number of pieces per side AAG produces for a requested `g2`: odd values
/// above 2 are rounded up so each quadrant splits evenly.
pub fn aag_side(g2: usize) -> usize {
    match g2 {
        0 | 1 => 1,
        n if n % 2 == 1 => n + 1,
        n => n,
    }
}

/// Uneven AAG split of `rect`: one cut at `hsplit` from the left and one at
/// `vsplit` from the top, each quadrant then divided evenly so the whole cell
/// holds `aag_side(g2)²` pieces.
pub fn aag_split(rect: &GeoRect, g2: usize, hsplit: f64, vsplit: f64) -> Result<Subdivision> {
    if g2 == 0 {
        return Err(Error::param("g2 must be at least 1"));
    }
    if g2 == 1 {
        return privag_split(rect, 1);
    }
    if !(hsplit > 0.0 && hsplit < rect.width()) {
        return Err(Error::param(format!(
            "hsplit {hsplit} outside (0, {})",
            rect.width()
        )));
    }
    if !(vsplit > 0.0 && vsplit < rect.height()) {
        return Err(Error::param(format!(
            "vsplit {vsplit} outside (0, {})",
            rect.height()
        )));
    }
    let half = aag_side(g2) / 2;
    let x_cut = rect.min_lon + hsplit;
    let y_cut = rect.max_lat - vsplit;
    let mut xs = uniform_edges(rect.min_lon, x_cut, half);
    xs.extend_from_slice(&uniform_edges(x_cut, rect.max_lon, half)[1..]);
    let mut ys = uniform_edges(rect.min_lat, y_cut, half);
    ys.extend_from_slice(&uniform_edges(y_cut, rect.max_lat, half)[1..]);
    Subdivision::from_edges(xs, ys)
}

/// Splits `cell` into `g2 × g2` equal subcells (unchanged when `g2 == 1`).
pub fn subdivide_privag(cell: &GridCell, g2: usize) -> Result<Vec<GridCell>> {
    if g2 <= 1 {
        return Ok(vec![cell.clone()]);
    }
    Ok(privag_split(&cell.rect, g2)?.cells(0, Some(cell.id)))
}

/// Uneven AAG subdivision of `cell` (unchanged when `g2 == 1`).
pub fn subdivide_aag(
    cell: &GridCell,
    g2: usize,
    hsplit: f64,
    vsplit: f64,
) -> Result<Vec<GridCell>> {
    if g2 <= 1 {
        return Ok(vec![cell.clone()]);
    }
    Ok(aag_split(&cell.rect, g2, hsplit, vsplit)?.cells(0, Some(cell.id)))
}

/// Phase-1 result: the coarse grid, its densities, and the user split.
#[derive(Clone, Debug)]
pub struct CoarsePhase {
    pub grid: Grid,
    pub estimate: DensityEstimate,
    pub phase1: Vec<Location>,
    pub phase2: Vec<Location>,
}

/// Shuffles users and returns `(U1, U2)` with `|U1| = round(σ|U|)`, both
/// non-empty.
pub fn split_users<R: Rng + ?Sized>(
    users: &[Location],
    sigma: f64,
    rng: &mut R,
) -> Result<(Vec<Location>, Vec<Location>)> {
    let n = users.len();
    if n < 2 {
        return Err(Error::param("two-phase collection needs at least 2 users"));
    }
    let n1 = ((sigma * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let pick = |ix: &[usize]| ix.iter().map(|&i| users[i]).collect::<Vec<_>>();
    Ok((pick(&order[..n1]), pick(&order[n1..])))
}

/// Lays the `g1 × g1` grid and collects phase-1 densities.
pub fn coarse_phase<R: Rng + ?Sized>(
    users: &Dataset,
    params: &AdaptiveGridParams,
    rng: &mut R,
) -> Result<CoarsePhase> {
    params.validate()?;
    let g1 = compute_g1(users.len(), params.epsilon, params.alpha_g1);
    let (phase1, phase2) = split_users(users.locations(), params.sigma, rng)?;
    let grid = Grid::uniform(*users.domain(), g1, g1)?;
    let estimate = collect(&phase1, &grid, params.epsilon, rng)?;
    Ok(CoarsePhase {
        grid,
        estimate,
        phase1,
        phase2,
    })
}

/// Refines a coarse grid from its phase-1 densities.
pub fn refine(
    coarse: &Grid,
    estimate: &DensityEstimate,
    n_users: usize,
    params: &AdaptiveGridParams,
    method: AdaptiveMethod,
) -> Result<Grid> {
    let (cols, rows) = coarse
        .level1_dims()
        .ok_or_else(|| Error::param("coarse grid must be uniform"))?;
    let level1 = Subdivision::uniform(coarse.domain(), cols, rows)?;
    let phase1 = estimate.n_users.max(1) as f64;
    let splits = coarse
        .cells()
        .par_iter()
        .map(|cell| {
            let fraction = (estimate.phi[cell.id] / phase1).clamp(0.0, 1.0);
            let g2 = compute_g2(
                fraction,
                params.epsilon,
                params.alpha_g2,
                params.sigma,
                n_users,
            );
            match method {
                AdaptiveMethod::PrivAg => privag_split(&cell.rect, g2),
                AdaptiveMethod::Aag => {
                    let neigh = neighbor_densities(coarse, &estimate.phi, cell.id)?;
                    let h = compute_hsplit(&neigh, cell.rect.width());
                    let v = compute_vsplit(&neigh, cell.rect.height());
                    aag_split(&cell.rect, g2, h, v)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Grid::two_level(*coarse.domain(), method.grid_kind(), level1, splits)
}

/// Runs phase 1 and the refinement, returning the final grid together with
/// the phase-2 population that should report over it.
pub fn adaptive_grid<R: Rng + ?Sized>(
    users: &Dataset,
    params: &AdaptiveGridParams,
    method: AdaptiveMethod,
    rng: &mut R,
) -> Result<(Grid, Vec<Location>)> {
    let phase = coarse_phase(users, params, rng)?;
    let grid = refine(&phase.grid, &phase.estimate, users.len(), params, method)?;
    Ok((grid, phase.phase2))
}

fn build<R: Rng + ?Sized>(
    users: &Dataset,
    params: &AdaptiveGridParams,
    method: AdaptiveMethod,
    rng: &mut R,
) -> Result<(Grid, DensityEstimate)> {
    let (grid, phase2) = adaptive_grid(users, params, method, rng)?;
    let estimate = collect(&phase2, &grid, params.epsilon, rng)?;
    Ok((grid, estimate))
}

/// Full PrivAG pipeline: final grid plus phase-2 densities over it.
pub fn build_privag<R: Rng + ?Sized>(
    users: &Dataset,
    params: &AdaptiveGridParams,
    rng: &mut R,
) -> Result<(Grid, DensityEstimate)> {
    build(users, params, AdaptiveMethod::PrivAg, rng)
}

/// Full AAG pipeline: final grid plus phase-2 densities over it.
pub fn build_aag<R: Rng + ?Sized>(
    users: &Dataset,
    params: &AdaptiveGridParams,
    rng: &mut R,
) -> Result<(Grid, DensityEstimate)> {
    build(users, params, AdaptiveMethod::Aag, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square(side: f64) -> GeoRect {
        GeoRect::new(0.0, 0.0, side, side).unwrap()
    }

    fn cell(rect: GeoRect) -> GridCell {
        GridCell {
            id: 4,
            rect,
            parent_id: None,
        }
    }

    #[test]
    fn g1_table_values() {
        assert_eq!(compute_g1(3_451_190, 1.0, 0.02), 9);
        assert_eq!(compute_g1(573_703, 5.0, 0.02), 19);
        assert_eq!(compute_g1(1, 0.01, 0.02), 1);
    }

    #[test]
    fn g1_fourth_root_scaling() {
        let a = g1_raw(10_000, 1.0, 0.02);
        let b = g1_raw(160_000, 1.0, 0.02);
        assert!((b / a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn g2_hand_values() {
        assert_eq!(compute_g2(0.0, 1.0, 0.25, 0.5, 1000), 1);
        assert_eq!(compute_g2(-0.3, 1.0, 0.25, 0.5, 1000), 1);
        let raw = g2_raw(1.0 / 81.0, 1.0, 0.25, 0.5, 3_451_190);
        assert!((raw - 2.907).abs() < 1e-3, "{raw}");
        assert_eq!(compute_g2(1.0 / 81.0, 1.0, 0.25, 0.5, 3_451_190), 3);
        let raw = g2_raw(1.0 / 81.0, 1.0, 0.02, 0.2, 3_451_190);
        assert!((raw - 0.925).abs() < 1e-3, "{raw}");
        assert_eq!(compute_g2(1.0 / 81.0, 1.0, 0.02, 0.2, 3_451_190), 1);
    }

    #[test]
    fn neighbours_interior_and_edges() {
        let g = Grid::uniform(square(3.0), 3, 3).unwrap();
        let phi: Vec<f64> = (0..9).map(|i| i as f64 * 10.0).collect();
        let mid = neighbor_densities(&g, &phi, 4).unwrap();
        assert_eq!(
            mid,
            NeighborDensities {
                left: 30.0,
                right: 50.0,
                up: 70.0,
                down: 10.0
            }
        );
        // top-left corner: no upper or left neighbour
        let tl = neighbor_densities(&g, &phi, 6).unwrap();
        assert_eq!(tl.up, 60.0);
        assert_eq!(tl.left, 60.0);
        assert_eq!(tl.right, 70.0);
        assert_eq!(tl.down, 30.0);

        let one = Grid::uniform(square(1.0), 1, 1).unwrap();
        let n = neighbor_densities(&one, &[5.0], 0).unwrap();
        assert_eq!([n.left, n.right, n.up, n.down], [5.0; 4]);
    }

    fn neigh(left: f64, right: f64, up: f64, down: f64) -> NeighborDensities {
        NeighborDensities {
            left,
            right,
            up,
            down,
        }
    }

    #[test]
    fn hsplit_cases() {
        assert_eq!(compute_hsplit(&neigh(7.0, 7.0, 0.0, 0.0), 3.0), 1.5);
        let h = compute_hsplit(&neigh(2000.0, 4000.0, 0.0, 0.0), 3.0);
        assert!((h - 2.0).abs() < 1e-12);
        assert_eq!(compute_hsplit(&neigh(0.0, 0.0, 0.0, 0.0), 3.0), 1.5);
        assert_eq!(compute_hsplit(&neigh(-5.0, -1.0, 0.0, 0.0), 3.0), 1.5);
    }

    #[test]
    fn vsplit_cases() {
        let v = compute_vsplit(&neigh(0.0, 0.0, 10_000.0, 50_000.0), 6.0);
        assert!((v - 5.0).abs() < 1e-12);
        assert_eq!(compute_vsplit(&neigh(0.0, 0.0, 3.0, 3.0), 6.0), 3.0);
        let v = compute_vsplit(&neigh(0.0, 0.0, 1000.0, 0.0), 1.0);
        assert!((v - 0.1).abs() < 1e-15);
    }

    #[test]
    fn privag_subdivision() {
        let c = cell(square(1.0));
        assert_eq!(subdivide_privag(&c, 1).unwrap(), vec![c.clone()]);
        let four = subdivide_privag(&c, 2).unwrap();
        assert_eq!(four.len(), 4);
        assert!(four.iter().all(|s| (s.rect.area() - 0.25).abs() < 1e-15));
        assert!(four.iter().all(|s| s.parent_id == Some(4)));
        let nine = subdivide_privag(&cell(square(3.0)), 3).unwrap();
        assert_eq!(nine.len(), 9);
        assert!(nine.iter().all(|s| (s.rect.area() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn aag_subdivision_fig1_geometry() {
        let rect = square(6.0);
        let subs = subdivide_aag(&cell(rect), 2, 4.0, 5.0).unwrap();
        assert_eq!(subs.len(), 4);
        let mut fractions: Vec<f64> = subs.iter().map(|s| s.rect.area() / rect.area()).collect();
        fractions.sort_by(f64::total_cmp);
        let mut expected = vec![
            (2.0 / 3.0) * (5.0 / 6.0),
            (1.0 / 3.0) * (5.0 / 6.0),
            (2.0 / 3.0) * (1.0 / 6.0),
            (1.0 / 3.0) * (1.0 / 6.0),
        ];
        expected.sort_by(f64::total_cmp);
        for (a, b) in fractions.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        // the top-left quadrant is the large one
        let tl = subs
            .iter()
            .find(|s| s.rect.min_lon == 0.0 && s.rect.max_lat == 6.0)
            .unwrap();
        assert!((tl.rect.width() - 4.0).abs() < 1e-12);
        assert!((tl.rect.height() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn aag_subdivision_counts() {
        let c = cell(square(1.0));
        assert_eq!(subdivide_aag(&c, 1, 0.5, 0.5).unwrap(), vec![c.clone()]);
        let sixteen = subdivide_aag(&c, 4, 0.3, 0.6).unwrap();
        assert_eq!(sixteen.len(), 16);
        // each quadrant holds four equal pieces of itself
        let quad_bl = 0.3 * 0.4 / 4.0;
        let n_bl = sixteen
            .iter()
            .filter(|s| (s.rect.area() - quad_bl).abs() < 1e-12)
            .count();
        assert_eq!(n_bl, 4);
        assert_eq!(subdivide_aag(&c, 3, 0.5, 0.5).unwrap().len(), 16);
        let total: f64 = sixteen.iter().map(|s| s.rect.area()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn aag_rejects_bad_splits() {
        let c = cell(square(1.0));
        assert!(subdivide_aag(&c, 2, 0.0, 0.5).is_err());
        assert!(subdivide_aag(&c, 2, 0.5, 1.0).is_err());
        assert!(subdivide_aag(&c, 2, f64::NAN, 0.5).is_err());
    }

    #[test]
    fn equal_neighbours_match_privag_geometry() {
        let rect = GeoRect::new(2.0, 1.0, 4.0, 5.0).unwrap();
        let n = neigh(8.0, 8.0, 8.0, 8.0);
        let aag = aag_split(
            &rect,
            2,
            compute_hsplit(&n, rect.width()),
            compute_vsplit(&n, rect.height()),
        )
        .unwrap();
        assert_eq!(aag, privag_split(&rect, 2).unwrap());
    }

    #[test]
    fn split_users_sizes() {
        let users: Vec<Location> = (0..10).map(|i| Location::new(i as f64, 0.0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = split_users(&users, 0.2, &mut rng).unwrap();
        assert_eq!((a.len(), b.len()), (2, 8));
        let (a, b) = split_users(&users, 0.01, &mut rng).unwrap();
        assert_eq!((a.len(), b.len()), (1, 9));
        assert!(split_users(&users[..1], 0.5, &mut rng).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(AdaptiveGridParams::privag(1.0).validate().is_ok());
        let mut p = AdaptiveGridParams::aag(1.0);
        p.sigma = 1.0;
        assert!(p.validate().is_err());
        p = AdaptiveGridParams::aag(-1.0);
        assert!(p.validate().is_err());
    }
}
