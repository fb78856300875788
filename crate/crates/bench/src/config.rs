//! Experiment configuration: a flat `key = value` file, overridable from the
//! command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gridldp::adaptive::{AdaptiveGridParams, AdaptiveMethod};
use gridldp::data::{
    clustered_components, fit_components, DatasetSource, DatasetSpec, SyntheticKind, GOWALLA_BBOX,
    PORTO_BBOX,
};
use gridldp::GeoRect;

use crate::error::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Ug,
    PrivAg,
    Aag,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ug => "ug",
            Method::PrivAg => "privag",
            Method::Aag => "aag",
        }
    }

    pub fn adaptive(self) -> Option<AdaptiveMethod> {
        match self {
            Method::Ug => None,
            Method::PrivAg => Some(AdaptiveMethod::PrivAg),
            Method::Aag => Some(AdaptiveMethod::Aag),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ug" | "uniform" => Ok(Method::Ug),
            "privag" => Ok(Method::PrivAg),
            "aag" => Ok(Method::Aag),
            other => Err(BenchError::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Optional α/σ overrides for one adaptive method.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AdaptiveOverrides {
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub dataset_args: DatasetArgs,
    pub methods: Vec<Method>,
    pub epsilons: Vec<f64>,
    pub rhos: Vec<f64>,
    pub reps: usize,
    pub gamma: usize,
    /// Side lengths N for N × N uniform grids.
    pub ug_sizes: Vec<usize>,
    /// α of the first-level grid shared by both adaptive methods.
    pub g1_alpha: Option<f64>,
    pub privag: AdaptiveOverrides,
    pub aag: AdaptiveOverrides,
    pub master_seed: u64,
    pub out: Option<PathBuf>,
    pub dump_workload: Option<PathBuf>,
    pub dump_answers: Option<PathBuf>,
    /// Worker threads; `None` uses the machine default.
    pub workers: Option<usize>,
    /// Record wall-clock time per run. Off by default so output files are
    /// reproducible byte for byte.
    pub timing: bool,
}

pub const DEFAULT_SYNTH_USERS: usize = 100_000;
pub const DEFAULT_DATA_SEED: u64 = 1;

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetArgs::default().resolve().expect("builtin dataset"),
            dataset_args: DatasetArgs::default(),
            methods: vec![Method::Ug, Method::PrivAg, Method::Aag],
            epsilons: vec![1.0],
            rhos: vec![0.001],
            reps: 10,
            gamma: 500,
            ug_sizes: vec![2, 5, 10, 15, 20, 25, 30, 40, 50],
            g1_alpha: None,
            privag: AdaptiveOverrides::default(),
            aag: AdaptiveOverrides::default(),
            master_seed: 0,
            out: None,
            dump_workload: None,
            dump_answers: None,
            workers: None,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.reps == 0 {
            return bad("reps must be >= 1".into());
        }
        if self.gamma == 0 {
            return bad("gamma must be >= 1".into());
        }
        if self.epsilons.is_empty() {
            return bad("at least one epsilon is required".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return bad(format!("epsilon must be positive, got {e}"));
        }
        if let Some(r) = self.rhos.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return bad(format!("rho must lie in (0, 1], got {r}"));
        }
        if self.ug_sizes.contains(&0) {
            return bad("uniform grid sizes must be >= 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be >= 1".into());
        }
        for e in &self.epsilons {
            for m in [AdaptiveMethod::PrivAg, AdaptiveMethod::Aag] {
                self.adaptive_params(m, *e)
                    .validate()
                    .map_err(|err| BenchError::Config(err.to_string()))?;
            }
        }
        Ok(())
    }

    /// Adaptive parameters with defaults and overrides applied. PrivAG uses a
    /// single α for both levels; AAG's α affects the second level only.
    pub fn adaptive_params(&self, method: AdaptiveMethod, epsilon: f64) -> AdaptiveGridParams {
        let mut p = AdaptiveGridParams::defaults(method, epsilon);
        let o = match method {
            AdaptiveMethod::PrivAg => self.privag,
            AdaptiveMethod::Aag => self.aag,
        };
        if let Some(a) = o.alpha {
            p.alpha_g2 = a;
            if method == AdaptiveMethod::PrivAg {
                p.alpha_g1 = a;
            }
        }
        if let Some(s) = o.sigma {
            p.sigma = s;
        }
        if let Some(a) = self.g1_alpha {
            p.alpha_g1 = a;
        }
        p
    }

    /// Applies `key = value` lines. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut dataset = DatasetArgs::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                BenchError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.apply_pair(key.trim(), value.trim(), &mut dataset)
                .map_err(|e| BenchError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        self.set_dataset(dataset)
    }

    /// Merges dataset settings and re-resolves [`ExperimentConfig::dataset`].
    pub fn set_dataset(&mut self, args: DatasetArgs) -> Result<()> {
        self.dataset_args.merge(args);
        self.dataset = self.dataset_args.resolve()?;
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text)
    }

    fn apply_pair(&mut self, key: &str, value: &str, dataset: &mut DatasetArgs) -> Result<()> {
        match key {
            "dataset" => dataset.name = Some(value.to_string()),
            "bbox" => dataset.bbox = Some(parse_bbox(value)?),
            "users" => dataset.users = Some(parse(value)?),
            "data_seed" => dataset.seed = Some(parse(value)?),
            "methods" | "method" => self.methods = parse_list(value)?,
            "epsilons" | "epsilon" => self.epsilons = parse_list(value)?,
            "rhos" | "rho" => self.rhos = parse_list(value)?,
            "ug_sizes" | "n" => self.ug_sizes = parse_list(value)?,
            "reps" => self.reps = parse(value)?,
            "gamma" => self.gamma = parse(value)?,
            "g1_alpha" => self.g1_alpha = Some(parse(value)?),
            "alpha" => {
                let a = parse(value)?;
                self.privag.alpha = Some(a);
                self.aag.alpha = Some(a);
            }
            "sigma" => {
                let s = parse(value)?;
                self.privag.sigma = Some(s);
                self.aag.sigma = Some(s);
            }
            "privag_alpha" => self.privag.alpha = Some(parse(value)?),
            "privag_sigma" => self.privag.sigma = Some(parse(value)?),
            "aag_alpha" => self.aag.alpha = Some(parse(value)?),
            "aag_sigma" => self.aag.sigma = Some(parse(value)?),
            "seed" | "master_seed" => self.master_seed = parse(value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "dump_workload" => self.dump_workload = Some(PathBuf::from(value)),
            "dump_answers" => self.dump_answers = Some(PathBuf::from(value)),
            "workers" => self.workers = Some(parse(value)?),
            "timing" => self.timing = parse(value)?,
            other => return Err(BenchError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }
}

/// Raw dataset settings as given on the command line or in a config file.
/// Later sources override earlier ones field by field.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetArgs {
    pub name: Option<String>,
    pub bbox: Option<GeoRect>,
    pub users: Option<usize>,
    pub seed: Option<u64>,
}

impl DatasetArgs {
    pub fn merge(&mut self, other: DatasetArgs) {
        self.name = other.name.or(self.name.take());
        self.bbox = other.bbox.or(self.bbox.take());
        self.users = other.users.or(self.users.take());
        self.seed = other.seed.or(self.seed.take());
    }

    pub fn resolve(&self) -> Result<DatasetSpec> {
        resolve_dataset(
            self.name.as_deref().unwrap_or("clustered"),
            self.bbox,
            self.users.unwrap_or(DEFAULT_SYNTH_USERS),
            self.seed.unwrap_or(DEFAULT_DATA_SEED),
        )
    }
}

/// Maps a dataset name to a spec.
///
/// * `clustered` / `uniform`: synthetic data on the unit square, or stretched
///   over `bbox`.
/// * `gowalla:PATH`, `porto:PATH`: CSV filtered to the preset bounding box.
/// * `foursquare:PATH`: CSV over its own extent.
/// * anything else: a CSV path, filtered to `bbox` when given.
pub fn resolve_dataset(
    name: &str,
    bbox: Option<GeoRect>,
    users: usize,
    seed: u64,
) -> Result<DatasetSpec> {
    let synthetic = |kind| DatasetSpec {
        name: name.to_string(),
        bbox,
        source: DatasetSource::Synthetic {
            kind,
            n_users: users,
            seed,
        },
    };
    if name == "clustered" {
        let components = match &bbox {
            Some(b) => fit_components(&clustered_components(), b),
            None => clustered_components(),
        };
        return Ok(synthetic(SyntheticKind::GaussianMixture(components)));
    }
    if name == "uniform" {
        return Ok(synthetic(SyntheticKind::Uniform));
    }
    if let Some((preset, path)) = name.split_once(':') {
        let preset_bbox = match preset {
            "gowalla" => Some(Some(GOWALLA_BBOX)),
            "porto" => Some(Some(PORTO_BBOX)),
            "foursquare" => Some(None),
            _ => None,
        };
        if let Some(preset_bbox) = preset_bbox {
            return Ok(DatasetSpec {
                name: preset.to_string(),
                bbox: bbox.or(preset_bbox),
                source: DatasetSource::Csv(PathBuf::from(path)),
            });
        }
    }
    let path = PathBuf::from(name);
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name.to_string());
    Ok(DatasetSpec {
        name: stem,
        bbox,
        source: DatasetSource::Csv(path),
    })
}

pub fn parse<T: FromStr>(value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| BenchError::Config(format!("cannot parse '{value}': {e}")))
}

pub fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

/// `minlon,minlat,maxlon,maxlat`.
pub fn parse_bbox(value: &str) -> Result<GeoRect> {
    let v: Vec<f64> = parse_list(value)?;
    if v.len() != 4 {
        return Err(BenchError::Config(format!(
            "bbox needs 4 numbers, got {}",
            v.len()
        )));
    }
    GeoRect::new(v[0], v[1], v[2], v[3]).map_err(|e| BenchError::Config(e.to_string()))
}
