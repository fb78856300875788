//! Location datasets: CSV ingestion with bounding-box filtering, and seeded
//! synthetic generators.

use std::fs::File;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{Dataset, GeoRect, Location};

/// US check-ins.
pub const GOWALLA_BBOX: GeoRect = GeoRect {
    min_lon: -124.26,
    min_lat: 25.45,
    max_lon: -71.87,
    max_lat: 47.44,
};

/// City of Porto.
pub const PORTO_BBOX: GeoRect = GeoRect {
    min_lon: -8.691294,
    min_lat: 41.138351,
    max_lon: -8.552009,
    max_lat: 41.185935,
};

/// Planar domain used by the synthetic presets.
pub const UNIT_SQUARE: GeoRect = GeoRect {
    min_lon: 0.0,
    min_lat: 0.0,
    max_lon: 1.0,
    max_lat: 1.0,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub center: Location,
    /// Isotropic standard deviation in coordinate units.
    pub std: f64,
    pub weight: f64,
}

/// Three clusters on the unit square: two tight dense cores and a broad
/// diffuse background.
pub fn clustered_components() -> Vec<MixtureComponent> {
    vec![
        MixtureComponent {
            center: Location::new(0.3, 0.35),
            std: 0.008,
            weight: 0.35,
        },
        MixtureComponent {
            center: Location::new(0.7, 0.6),
            std: 0.015,
            weight: 0.35,
        },
        MixtureComponent {
            center: Location::new(0.45, 0.5),
            std: 0.12,
            weight: 0.3,
        },
    ]
}

/// Maps components defined on the unit square onto `domain`. Standard
/// deviations scale by the geometric mean of the side lengths.
pub fn fit_components(components: &[MixtureComponent], domain: &GeoRect) -> Vec<MixtureComponent> {
    let scale = (domain.width() * domain.height()).sqrt();
    components
        .iter()
        .map(|c| MixtureComponent {
            center: Location::new(
                domain.min_lon + c.center.lon * domain.width(),
                domain.min_lat + c.center.lat * domain.height(),
            ),
            std: c.std * scale,
            weight: c.weight,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SyntheticKind {
    Uniform,
    GaussianMixture(Vec<MixtureComponent>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DatasetSource {
    Csv(PathBuf),
    Synthetic {
        kind: SyntheticKind,
        n_users: usize,
        seed: u64,
    },
}

/// A named dataset recipe. A CSV source without a bounding box uses the
/// extent of its own points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub bbox: Option<GeoRect>,
    pub source: DatasetSource,
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Dataset> {
        self.load_with_stats().map(|(d, _)| d)
    }

    /// Loads the dataset; bounding-box filtered CSV loads also report how
    /// many rows were kept and dropped.
    pub fn load_with_stats(&self) -> Result<(Dataset, Option<LoadStats>)> {
        match &self.source {
            DatasetSource::Csv(path) => match &self.bbox {
                Some(bbox) => load_csv(path, bbox).map(|(d, s)| (d, Some(s))),
                None => load_csv_extent(path).map(|d| (d, None)),
            },
            DatasetSource::Synthetic {
                kind,
                n_users,
                seed,
            } => {
                let domain = self.bbox.unwrap_or(UNIT_SQUARE);
                let d = match kind {
                    SyntheticKind::Uniform => synth_uniform(&domain, *n_users, *seed),
                    SyntheticKind::GaussianMixture(c) => {
                        synth_gaussian_mixture(&domain, *n_users, c, *seed)
                    }
                }?;
                Ok((d, None))
            }
        }
    }
}

/// Kept/dropped row counts from a bounding-box filtered load.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub kept: usize,
    pub dropped: usize,
}

/// Reads `lon,lat` rows. A first row that does not parse as two numbers is
/// treated as a header.
pub fn read_points(path: &Path) -> Result<Vec<Location>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record.position().map_or(i as u64 + 1, |p| p.line());
        let malformed = |message: String| Error::MalformedRow {
            path: path.to_path_buf(),
            row,
            message,
        };
        if record.len() != 2 {
            return Err(malformed(format!(
                "expected 2 fields, found {}",
                record.len()
            )));
        }
        let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
        match parsed {
            (Ok(lon), Ok(lat)) if lon.is_finite() && lat.is_finite() => {
                points.push(Location::new(lon, lat))
            }
            _ if i == 0 => continue,
            _ => {
                return Err(malformed(format!(
                    "cannot parse '{},{}' as lon,lat",
                    &record[0], &record[1]
                )))
            }
        }
    }
    Ok(points)
}

/// Loads a CSV keeping only the rows inside `bbox`, which becomes the domain.
pub fn load_csv(path: impl AsRef<Path>, bbox: &GeoRect) -> Result<(Dataset, LoadStats)> {
    let points = read_points(path.as_ref())?;
    let total = points.len();
    let kept: Vec<Location> = points
        .into_iter()
        .filter(|l| bbox.contains_closed(*l))
        .collect();
    let stats = LoadStats {
        kept: kept.len(),
        dropped: total - kept.len(),
    };
    Ok((Dataset::new(*bbox, kept)?, stats))
}

/// Loads a CSV unfiltered; the domain is the bounding box of its points.
pub fn load_csv_extent(path: impl AsRef<Path>) -> Result<Dataset> {
    let points = read_points(path.as_ref())?;
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let fold = |f: fn(f64, f64) -> f64, get: fn(&Location) -> f64| {
        points.iter().map(get).reduce(f).unwrap()
    };
    let domain = GeoRect::new(
        fold(f64::min, |l| l.lon),
        fold(f64::min, |l| l.lat),
        fold(f64::max, |l| l.lon),
        fold(f64::max, |l| l.lat),
    )?;
    Dataset::new(domain, points)
}

/// Independent uniform points over `domain`.
pub fn synth_uniform(domain: &GeoRect, n_users: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n_users)
        .map(|_| {
            Location::new(
                domain.min_lon + rng.random::<f64>() * domain.width(),
                domain.min_lat + rng.random::<f64>() * domain.height(),
            )
        })
        .collect();
    Dataset::new(*domain, points)
}

const MAX_REJECTIONS: usize = 10_000;

/// Points from an isotropic Gaussian mixture, resampled until they land in
/// `domain`.
pub fn synth_gaussian_mixture(
    domain: &GeoRect,
    n_users: usize,
    components: &[MixtureComponent],
    seed: u64,
) -> Result<Dataset> {
    if components.is_empty() {
        return Err(Error::param("mixture needs at least one component"));
    }
    let weight_sum: f64 = components.iter().map(|c| c.weight).sum();
    if (weight_sum - 1.0).abs() > 1e-9 {
        return Err(Error::param(format!(
            "mixture weights sum to {weight_sum}, expected 1"
        )));
    }
    let picker = WeightedIndex::new(components.iter().map(|c| c.weight))
        .map_err(|e| Error::param(format!("mixture weights: {e}")))?;
    let shapes = components
        .iter()
        .map(|c| {
            let lon = Normal::new(c.center.lon, c.std);
            let lat = Normal::new(c.center.lat, c.std);
            match (lon, lat) {
                (Ok(lon), Ok(lat)) if c.std > 0.0 => Ok((lon, lat)),
                _ => Err(Error::param(format!("invalid component std {}", c.std))),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_users);
    for _ in 0..n_users {
        let (lon, lat) = &shapes[picker.sample(&mut rng)];
        let mut attempts = 0;
        let point = loop {
            let p = Location::new(lon.sample(&mut rng), lat.sample(&mut rng));
            if domain.contains_closed(p) {
                break p;
            }
            attempts += 1;
            if attempts == MAX_REJECTIONS {
                return Err(Error::param(
                    "mixture component lies almost entirely outside the domain",
                ));
            }
        };
        points.push(point);
    }
    Dataset::new(*domain, points)
}
