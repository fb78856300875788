//! Experiment runners.
//!
//! Every random draw is taken from a stream keyed by what it is for (data,
//! workload, collection), the method, the ε index, N and the repetition, so
//! results do not depend on how runs are scheduled across workers. Runs are
//! emitted in a fixed nested order: method, ε, N, repetition, ρ.

use std::time::Instant;

use gridldp::adaptive::{adaptive_grid, compute_g1, AdaptiveMethod};
use gridldp::collection::{collect, DensityEstimate};
use gridldp::query::{aqe, generate_workload, noisy_answers, GroundTruthIndex, QueryWorkload};
use gridldp::{Dataset, Grid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Method};
use crate::error::{BenchError, Result};
use crate::results::ResultRow;

const TAG_WORKLOAD: u64 = 1;
const TAG_RUN: u64 = 2;
const TAG_HOLDOUT: u64 = 3;
/// Repetition index reserved for the UG grid-size selection run.
const HOLDOUT_REP: u64 = u64::MAX;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the stream identified by `parts` under `master`.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix(master), |acc, &p| splitmix(acc ^ splitmix(p)))
}

fn stream(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, parts))
}

fn method_tag(m: Method) -> u64 {
    match m {
        Method::Ug => 0,
        Method::PrivAg => 1,
        Method::Aag => 2,
    }
}

/// A workload together with its exact answers.
#[derive(Clone, Debug)]
pub struct ScoredWorkload {
    pub rho_index: usize,
    pub workload: QueryWorkload,
    pub truths: Vec<u64>,
}

/// One query's exact and grid-based answers, for verbose dumps.
#[derive(Clone, Debug, PartialEq)]
pub struct AnswerRecord {
    pub method: Method,
    pub epsilon: f64,
    pub rho: f64,
    pub n: Option<usize>,
    pub rep: usize,
    pub query: usize,
    pub truth: u64,
    pub answer: f64,
}

/// The grid size chosen for UG at one ε.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UgChoice {
    pub epsilon: f64,
    pub n: usize,
    pub holdout_aqe: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub answers: Vec<AnswerRecord>,
    pub workloads: Vec<(usize, ScoredWorkload)>,
    pub ug_choices: Vec<UgChoice>,
}

/// Shared state for one experiment over one dataset.
pub struct Harness<'a> {
    config: &'a ExperimentConfig,
    dataset: &'a Dataset,
    truth: GroundTruthIndex,
}

struct Run {
    rows: Vec<ResultRow>,
    answers: Vec<AnswerRecord>,
}

impl<'a> Harness<'a> {
    pub fn new(config: &'a ExperimentConfig, dataset: &'a Dataset) -> Result<Self> {
        config.validate()?;
        Ok(Harness {
            config,
            dataset,
            truth: GroundTruthIndex::new(dataset),
        })
    }

    fn seed(&self) -> u64 {
        self.config.master_seed
    }

    /// Workloads for repetition `rep`, one per ρ. Every method sees the same
    /// queries within a repetition.
    pub fn workloads(&self, rep: u64) -> Result<Vec<ScoredWorkload>> {
        self.config
            .rhos
            .iter()
            .enumerate()
            .map(|(i, &rho)| {
                let mut rng = stream(self.seed(), &[TAG_WORKLOAD, rep, i as u64]);
                let workload =
                    generate_workload(self.dataset.domain(), rho, self.config.gamma, &mut rng)?;
                let truths = self.truth.answer_all(&workload);
                Ok(ScoredWorkload {
                    rho_index: i,
                    workload,
                    truths,
                })
            })
            .collect()
    }

    fn require_rhos(&self) -> Result<()> {
        if self.config.rhos.is_empty() {
            return Err(BenchError::Config("at least one rho is required".into()));
        }
        Ok(())
    }

    fn build(
        &self,
        method: Method,
        eps_index: usize,
        n: Option<usize>,
        rep: u64,
        holdout: bool,
    ) -> Result<(Grid, DensityEstimate, Option<f64>)> {
        let epsilon = self.config.epsilons[eps_index];
        let tag = if holdout { TAG_HOLDOUT } else { TAG_RUN };
        let mut rng = stream(
            self.seed(),
            &[
                tag,
                method_tag(method),
                eps_index as u64,
                n.unwrap_or(0) as u64,
                rep,
            ],
        );
        let started = Instant::now();
        let (grid, est) = match method.adaptive() {
            None => {
                let side = n.expect("uniform runs carry N");
                let grid = Grid::uniform(*self.dataset.domain(), side, side)?;
                let est = collect(self.dataset.locations(), &grid, epsilon, &mut rng)?;
                (grid, est)
            }
            Some(am) => {
                let params = self.config.adaptive_params(am, epsilon);
                let (grid, phase2) = adaptive_grid(self.dataset, &params, am, &mut rng)?;
                let est = collect(&phase2, &grid, epsilon, &mut rng)?;
                (grid, est)
            }
        };
        let elapsed = self
            .config
            .timing
            .then(|| started.elapsed().as_secs_f64() * 1e3);
        Ok((grid, est, elapsed))
    }

    fn evaluate(
        &self,
        method: Method,
        eps_index: usize,
        n: Option<usize>,
        rep: usize,
        workloads: &[ScoredWorkload],
    ) -> Result<Run> {
        let epsilon = self.config.epsilons[eps_index];
        let (grid, est, wall) = self.build(method, eps_index, n, rep as u64, false)?;
        let mut rows = Vec::with_capacity(workloads.len());
        let mut answers = Vec::new();
        for w in workloads {
            let noisy = noisy_answers(&grid, &est, &w.workload);
            let error = aqe(&w.truths, &noisy, self.dataset.len())?;
            rows.push(ResultRow {
                dataset: self.config.dataset.name.clone(),
                method: method.to_string(),
                epsilon,
                rho: Some(w.workload.rho),
                n,
                rep,
                aqe: Some(error),
                cell_count: grid.len(),
                wall_time_ms: wall,
            });
            if self.config.dump_answers.is_some() {
                answers.extend(w.truths.iter().zip(&noisy).enumerate().map(
                    |(query, (&truth, &answer))| AnswerRecord {
                        method,
                        epsilon,
                        rho: w.workload.rho,
                        n,
                        rep,
                        query,
                        truth,
                        answer,
                    },
                ));
            }
        }
        Ok(Run { rows, answers })
    }

    fn all_workloads(&self) -> Result<Vec<Vec<ScoredWorkload>>> {
        (0..self.config.reps)
            .map(|rep| self.workloads(rep as u64))
            .collect()
    }

    fn finish(
        &self,
        runs: Vec<Run>,
        workloads: Vec<Vec<ScoredWorkload>>,
        ug_choices: Vec<UgChoice>,
    ) -> RunOutput {
        let mut out = RunOutput {
            ug_choices,
            ..RunOutput::default()
        };
        for run in runs {
            out.rows.extend(run.rows);
            out.answers.extend(run.answers);
        }
        if self.config.dump_workload.is_some() {
            out.workloads = workloads
                .into_iter()
                .enumerate()
                .flat_map(|(rep, ws)| ws.into_iter().map(move |w| (rep, w)))
                .collect();
        }
        out
    }

    /// N × N uniform grids over all users for every configured N.
    pub fn run_uniform_sweep(&self) -> Result<RunOutput> {
        self.require_rhos()?;
        if self.config.ug_sizes.is_empty() {
            return Err(BenchError::Config("ug_sizes must not be empty".into()));
        }
        let workloads = self.all_workloads()?;
        let mut tasks = Vec::new();
        for e in 0..self.config.epsilons.len() {
            for &n in &self.config.ug_sizes {
                for rep in 0..self.config.reps {
                    tasks.push((e, n, rep));
                }
            }
        }
        let runs = tasks
            .par_iter()
            .map(|&(e, n, rep)| self.evaluate(Method::Ug, e, Some(n), rep, &workloads[rep]))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.finish(runs, workloads, Vec::new()))
    }

    /// Picks N for UG at ε index `e`: the only configured size, or the size
    /// with the lowest mean AQE over all ρ on a held-out repetition.
    pub fn choose_ug_size(&self, e: usize) -> Result<UgChoice> {
        let epsilon = self.config.epsilons[e];
        let sizes = &self.config.ug_sizes;
        match sizes.as_slice() {
            [] => Err(BenchError::Config("ug_sizes must not be empty".into())),
            [n] => Ok(UgChoice {
                epsilon,
                n: *n,
                holdout_aqe: None,
            }),
            _ => {
                let holdout = self.workloads(HOLDOUT_REP)?;
                let scores = sizes
                    .par_iter()
                    .map(|&n| {
                        let (grid, est, _) =
                            self.build(Method::Ug, e, Some(n), HOLDOUT_REP, true)?;
                        let mut total = 0.0;
                        for w in &holdout {
                            let noisy = noisy_answers(&grid, &est, &w.workload);
                            total += aqe(&w.truths, &noisy, self.dataset.len())?;
                        }
                        Ok((n, total / holdout.len() as f64))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let (n, score) = scores
                    .into_iter()
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                    .expect("non-empty sizes");
                Ok(UgChoice {
                    epsilon,
                    n,
                    holdout_aqe: Some(score),
                })
            }
        }
    }

    /// Every configured method at every ε, scored on shared workloads.
    pub fn run_comparison(&self) -> Result<RunOutput> {
        self.require_rhos()?;
        if self.config.methods.is_empty() {
            return Err(BenchError::Config("at least one method is required".into()));
        }
        let ug_choices = if self.config.methods.contains(&Method::Ug) {
            (0..self.config.epsilons.len())
                .map(|e| self.choose_ug_size(e))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let workloads = self.all_workloads()?;
        let mut tasks = Vec::new();
        for &method in &self.config.methods {
            for e in 0..self.config.epsilons.len() {
                let n = match method {
                    Method::Ug => ug_choices.get(e).map(|c| c.n),
                    _ => None,
                };
                for rep in 0..self.config.reps {
                    tasks.push((method, e, n, rep));
                }
            }
        }
        let runs = tasks
            .par_iter()
            .map(|&(method, e, n, rep)| self.evaluate(method, e, n, rep, &workloads[rep]))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.finish(runs, workloads, ug_choices))
    }

    /// Cell counts of the adaptive grids, plus the first-level grid size, per
    /// ε. Only the grids are built; no phase-2 collection takes place.
    pub fn run_gridinfo(&self) -> Result<RunOutput> {
        if let Some(m) = self.config.methods.iter().find(|m| m.adaptive().is_none()) {
            return Err(BenchError::Config(format!(
                "gridinfo only supports adaptive methods, got '{m}'"
            )));
        }
        let mut rows = Vec::new();
        for &epsilon in &self.config.epsilons {
            let params = self.config.adaptive_params(AdaptiveMethod::PrivAg, epsilon);
            let g1 = compute_g1(self.dataset.len(), epsilon, params.alpha_g1);
            rows.push(ResultRow {
                dataset: self.config.dataset.name.clone(),
                method: "g1".into(),
                epsilon,
                rho: None,
                n: Some(g1),
                rep: 0,
                aqe: None,
                cell_count: g1 * g1,
                wall_time_ms: None,
            });
        }
        let mut tasks = Vec::new();
        for &method in &self.config.methods {
            for e in 0..self.config.epsilons.len() {
                for rep in 0..self.config.reps {
                    tasks.push((method, e, rep));
                }
            }
        }
        let counted = tasks
            .par_iter()
            .map(|&(method, e, rep)| {
                let epsilon = self.config.epsilons[e];
                let am = method.adaptive().expect("checked above");
                let params = self.config.adaptive_params(am, epsilon);
                let mut rng = stream(
                    self.seed(),
                    &[TAG_RUN, method_tag(method), e as u64, 0, rep as u64],
                );
                let started = Instant::now();
                let (grid, _) = adaptive_grid(self.dataset, &params, am, &mut rng)?;
                Ok(ResultRow {
                    dataset: self.config.dataset.name.clone(),
                    method: method.to_string(),
                    epsilon,
                    rho: None,
                    n: None,
                    rep,
                    aqe: None,
                    cell_count: grid.len(),
                    wall_time_ms: self
                        .config
                        .timing
                        .then(|| started.elapsed().as_secs_f64() * 1e3),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.extend(counted);
        Ok(RunOutput {
            rows,
            ..RunOutput::default()
        })
    }
}

/// Runs `f` on a pool with the configured worker count.
pub fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(f),
    }
}
