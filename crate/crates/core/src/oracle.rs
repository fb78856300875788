//! Optimized Local Hashing (OLH).
//!
//! Each user picks a hash function uniformly from a seeded family, hashes
//! their value into `[1, m]`, and applies randomized response over `[1, m]`.
//! The server counts, for every candidate value, how many reports are
//! consistent with it under their own hash function, and debiases that count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hash range that maximizes OLH utility: `e^ε + 1` rounded to the nearest
/// integer, never below 2.
pub fn m_for_epsilon(epsilon: f64) -> Result<u32> {
    check_epsilon(epsilon)?;
    let m = (epsilon.exp() + 1.0).round();
    // ε large enough to overflow u32 keeps the widest range we can express
    Ok(if m >= u32::MAX as f64 {
        u32::MAX
    } else {
        (m as u32).max(2)
    })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "epsilon must be positive, got {epsilon}"
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdpParams {
    epsilon: f64,
    m: u32,
}

impl LdpParams {
    /// Parameters with the default hash range for `epsilon`.
    pub fn new(epsilon: f64) -> Result<Self> {
        Ok(LdpParams {
            epsilon,
            m: m_for_epsilon(epsilon)?,
        })
    }

    pub fn with_m(epsilon: f64, m: u32) -> Result<Self> {
        check_epsilon(epsilon)?;
        if m < 2 {
            return Err(Error::param(format!("hash range must be >= 2, got {m}")));
        }
        Ok(LdpParams { epsilon, m })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// `Pr[output = input]`.
    pub fn keep_probability(&self) -> f64 {
        let e = self.epsilon.exp();
        e / (e + self.m as f64 - 1.0)
    }

    /// `Pr[output = y]` for each `y != input`.
    pub fn flip_probability(&self) -> f64 {
        1.0 / (self.epsilon.exp() + self.m as f64 - 1.0)
    }

    /// `Pr[output = y | input = x]` of the perturbation step.
    pub fn transition_probability(&self, x: u32, y: u32) -> f64 {
        if x == y {
            self.keep_probability()
        } else {
            self.flip_probability()
        }
    }
}

/// Identifies one member of the hash family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HashFunctionId(pub u64);

/// What a user sends: their hash function and the perturbed hash value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub hash_id: HashFunctionId,
    pub value: u32,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn value_key(v: usize) -> u64 {
    (v as u64).wrapping_add(1).wrapping_mul(GOLDEN)
}

#[inline]
fn reduce(h: u64, m: u32) -> u32 {
    ((h as u128 * m as u128) >> 64) as u32 + 1
}

/// `H_seed(v)` in `[1, m]`.
#[inline]
pub fn hash_eval(hash_id: HashFunctionId, v: usize, m: u32) -> u32 {
    reduce(mix64(hash_id.0.wrapping_add(value_key(v))), m)
}

/// Randomized response over `[1, m]`.
pub fn perturb<R: Rng + ?Sized>(x: u32, params: &LdpParams, rng: &mut R) -> Result<u32> {
    let m = params.m;
    if x == 0 || x > m {
        return Err(Error::param(format!("value {x} outside [1, {m}]")));
    }
    if rng.random::<f64>() < params.keep_probability() {
        return Ok(x);
    }
    let y = rng.random_range(1..m);
    Ok(if y >= x { y + 1 } else { y })
}

/// Client side of OLH for a value `v` of a domain with `domain_size` values.
pub fn user_report<R: Rng + ?Sized>(
    v: usize,
    domain_size: usize,
    params: &LdpParams,
    rng: &mut R,
) -> Result<Report> {
    if v >= domain_size {
        return Err(Error::param(format!(
            "value {v} outside domain of size {domain_size}"
        )));
    }
    let hash_id = HashFunctionId(rng.random());
    let value = perturb(hash_eval(hash_id, v, params.m), params, rng)?;
    Ok(Report { hash_id, value })
}

/// Number of reports whose value matches their own hash of `v`.
pub fn support_count(reports: &[Report], v: usize, m: u32) -> u64 {
    let key = value_key(v);
    reports
        .iter()
        .filter(|r| reduce(mix64(r.hash_id.0.wrapping_add(key)), m) == r.value)
        .count() as u64
}

/// Unbiased estimate of how many of `n_users` hold the value with support
/// `sup`. Not clamped; may be negative.
pub fn estimate(sup: u64, n_users: usize, params: &LdpParams) -> f64 {
    let e = params.epsilon.exp();
    let m = params.m as f64;
    (e + m - 1.0) * (m * sup as f64 - n_users as f64) / ((e - 1.0) * (m - 1.0))
}

/// Support counts for every value in `0..domain_size`, computed in parallel
/// over values. Integer sums, so the result does not depend on scheduling.
pub fn support_counts(reports: &[Report], domain_size: usize, m: u32) -> Vec<u64> {
    (0..domain_size)
        .into_par_iter()
        .map(|v| support_count(reports, v, m))
        .collect()
}

/// Estimate for every value in `0..domain_size`.
pub fn estimate_all(
    reports: &[Report],
    domain_size: usize,
    n_users: usize,
    params: &LdpParams,
) -> Vec<f64> {
    support_counts(reports, domain_size, params.m)
        .into_iter()
        .map(|sup| estimate(sup, n_users, params))
        .collect()
}
