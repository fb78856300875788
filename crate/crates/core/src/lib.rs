//! Grid-based spatial density collection under local differential privacy.
//!
//! Users discretize their location into the cell of a grid and report the
//! cell through Optimized Local Hashing ([`oracle`]). The server estimates
//! per-cell densities ([`collection`]) over a uniform grid, or over one of two
//! adaptive grids built in two phases ([`adaptive`]). [`query`] answers
//! rectangular density queries from a grid and scores them with the Average
//! Query Error.

pub mod adaptive;
pub mod collection;
pub mod data;
pub mod error;
pub mod geo;
pub mod oracle;
pub mod query;

pub use adaptive::{
    build_aag, build_privag, compute_g1, compute_g2, compute_hsplit, compute_vsplit,
    neighbor_densities, subdivide_aag, subdivide_privag, AdaptiveGridParams, AdaptiveMethod,
    NeighborDensities,
};
pub use collection::{collect, true_densities, DensityEstimate};
pub use error::{Error, Result};
pub use geo::{intersection_area, Dataset, GeoRect, Grid, GridCell, GridKind, Location};
pub use oracle::{HashFunctionId, LdpParams, Report};
pub use query::{aqe, generate_workload, ground_truth, noisy_answer, DensityQuery, QueryWorkload};
