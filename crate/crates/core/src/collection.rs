//! Collecting per-cell densities over a grid from a user population.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::{Grid, Location};
use crate::oracle::{estimate, support_counts, user_report, LdpParams, Report};

/// Estimated density `Φ` of every cell of the grid it was collected over.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityEstimate {
    pub phi: Vec<f64>,
    /// Size of the population that produced the reports.
    pub n_users: usize,
}

impl DensityEstimate {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.phi.iter().sum()
    }
}

/// Independent random stream for one user under a master seed. Streams depend
/// only on `(master, index)`, never on evaluation order.
pub fn user_stream(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Runs the client side for every user: discretize into `grid`, then report
/// through OLH. Exactly one report per user, in user order.
pub fn user_reports<R: Rng + ?Sized>(
    users: &[Location],
    grid: &Grid,
    params: &LdpParams,
    rng: &mut R,
) -> Result<Vec<Report>> {
    let master: u64 = rng.random();
    let base = user_stream(master, 0);
    let domain_size = grid.len();
    users
        .par_iter()
        .enumerate()
        .map(|(i, loc)| {
            let cell = grid.locate(*loc)?;
            let mut stream = base.clone();
            stream.set_stream(i as u64);
            user_report(cell, domain_size, params, &mut stream)
        })
        .collect()
}

/// Estimates the density of every cell of `grid` from `users` under ε-LDP.
pub fn collect<R: Rng + ?Sized>(
    users: &[Location],
    grid: &Grid,
    epsilon: f64,
    rng: &mut R,
) -> Result<DensityEstimate> {
    if users.is_empty() {
        return Err(Error::param("cannot collect from an empty population"));
    }
    let params = LdpParams::new(epsilon)?;
    let reports = user_reports(users, grid, &params, rng)?;
    let phi = support_counts(&reports, grid.len(), params.m())
        .into_iter()
        .map(|sup| estimate(sup, users.len(), &params))
        .collect();
    Ok(DensityEstimate {
        phi,
        n_users: users.len(),
    })
}

/// Exact per-cell user counts.
pub fn true_densities(users: &[Location], grid: &Grid) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; grid.len()];
    for loc in users {
        counts[grid.locate(*loc)?] += 1;
    }
    Ok(counts)
}
