//! Synthetic datasets with an imbalanced, ordinal label geometry, and
//! JSONL / CSV dataset files (optionally gzip-compressed).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Example, Split};
use crate::error::{Error, Result};
use crate::level::{DifficultyLevel, NUM_LEVELS};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub dim: usize,
    pub level_proportions: [f64; NUM_LEVELS],
    pub noise_sd: f64,
    /// Level-2 feature noise is multiplied by `1 + hardness_skew`.
    pub hardness_skew: f64,
    /// Norm of each level's cluster centre offset, orthogonal to the
    /// difficulty direction.
    pub cluster_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_train: 8000,
            n_val: 500,
            n_test: 2000,
            dim: 16,
            level_proportions: [0.25, 0.62, 0.13],
            noise_sd: 0.3,
            hardness_skew: 1.0,
            cluster_scale: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.level_proportions;
        if p.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Config(format!(
                "level proportions {p:?} must be positive"
            )));
        }
        if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "level proportions {p:?} must sum to 1"
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config("noise_sd must be >= 0".into()));
        }
        if !(self.hardness_skew >= 0.0 && self.hardness_skew.is_finite()) {
            return Err(Error::Config("hardness_skew must be >= 0".into()));
        }
        if !(self.cluster_scale >= 0.0 && self.cluster_scale.is_finite()) {
            return Err(Error::Config("cluster_scale must be >= 0".into()));
        }
        if self.dim == 0 || self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return Err(Error::Config(
                "dimension and split sizes must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Hidden continuous difficulty of every generated example, by split.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
    pub test: Vec<f64>,
}

pub fn gen_synthetic(config: &SyntheticConfig) -> Result<Dataset> {
    gen_synthetic_with_latent(config).map(|(d, _)| d)
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Fixed geometry shared by all splits: the difficulty direction `u` and one
/// cluster centre per level, orthogonal to `u`.
struct Geometry {
    direction: Vec<f64>,
    centres: [Vec<f64>; NUM_LEVELS],
}

impl Geometry {
    fn draw(config: &SyntheticConfig) -> Self {
        let mut r = rng::derived(config.seed, &[rng::tag::DATA, 0]);
        let gaussian = |r: &mut Rng| -> Vec<f64> {
            (0..config.dim).map(|_| StandardNormal.sample(r)).collect()
        };
        let mut direction = gaussian(&mut r);
        normalize(&mut direction);
        let centres = std::array::from_fn(|_| {
            let mut c = gaussian(&mut r);
            let along: f64 = c.iter().zip(&direction).map(|(a, b)| a * b).sum();
            c.iter_mut()
                .zip(&direction)
                .for_each(|(x, u)| *x -= along * u);
            normalize(&mut c);
            c.iter_mut().for_each(|x| *x *= config.cluster_scale);
            c
        });
        Self { direction, centres }
    }
}

/// Each example draws a level from the configured proportions and a latent
/// difficulty `z = level + N(0, noise_sd)`. Features are
/// `z * u + c_level + N(0, s^2 I)` where `u` is a fixed unit direction,
/// `c_level` the level's cluster centre and `s = noise_sd`, multiplied by
/// `1 + hardness_skew` for level 2.
pub fn gen_synthetic_with_latent(config: &SyntheticConfig) -> Result<(Dataset, Latent)> {
    config.validate()?;
    let geometry = Geometry::draw(config);

    let levels = WeightedIndex::new(config.level_proportions)
        .map_err(|e| Error::Config(format!("level proportions: {e}")))?;
    let mut splits = Vec::with_capacity(3);
    for (tag, split, n) in [
        (1, Split::Train, config.n_train),
        (2, Split::Val, config.n_val),
        (3, Split::Test, config.n_test),
    ] {
        let mut r = rng::derived(config.seed, &[rng::tag::DATA, tag]);
        let (examples, latent): (Vec<_>, Vec<_>) = (0..n)
            .map(|i| generate_one(config, &geometry, &levels, split, i, &mut r))
            .unzip();
        splits.push((examples, latent));
    }
    let (test, test_z) = splits.pop().unwrap();
    let (val, val_z) = splits.pop().unwrap();
    let (train, train_z) = splits.pop().unwrap();
    Ok((
        Dataset::new(train, val, test)?,
        Latent {
            train: train_z,
            val: val_z,
            test: test_z,
        },
    ))
}

fn generate_one(
    config: &SyntheticConfig,
    geometry: &Geometry,
    levels: &WeightedIndex<f64>,
    split: Split,
    i: usize,
    r: &mut Rng,
) -> (Example, f64) {
    let level = levels.sample(r);
    let latent_noise = Normal::new(0.0, config.noise_sd).expect("validated sd");
    let z = level as f64 + latent_noise.sample(r);
    let skew = if level == 2 {
        1.0 + config.hardness_skew
    } else {
        1.0
    };
    let feature_noise = Normal::new(0.0, config.noise_sd * skew).expect("validated sd");
    let features = geometry
        .direction
        .iter()
        .zip(&geometry.centres[level])
        .map(|(&u, &c)| z * u + c + feature_noise.sample(r))
        .collect();
    let example = Example {
        id: format!("{}-{i:06}", split.as_str()),
        features,
        gold_level: DifficultyLevel::new(level as u8).expect("weighted index below 3"),
    };
    (example, z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Jsonl,
    Csv,
}

impl DataFormat {
    /// From the extension, ignoring a trailing `.gz`.
    pub fn infer(path: &Path) -> Option<DataFormat> {
        let name = path.file_name()?.to_str()?;
        let name = name.strip_suffix(".gz").unwrap_or(name);
        if name.ends_with(".jsonl") || name.ends_with(".ndjson") {
            Some(DataFormat::Jsonl)
        } else if name.ends_with(".csv") {
            Some(DataFormat::Csv)
        } else {
            None
        }
    }
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn open_reader(path: &Path) -> Result<Box<dyn Read>> {
    let file = File::open(path)?;
    Ok(if is_gz(path) {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    })
}

fn open_writer(path: &Path) -> Result<Box<dyn Write>> {
    let file = BufWriter::new(File::create(path)?);
    Ok(if is_gz(path) {
        Box::new(GzEncoder::new(file, Compression::default()))
    } else {
        Box::new(file)
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    split: String,
    level: i64,
    features: Vec<f64>,
}

/// Accumulates records into splits, checking them as they arrive.
struct Builder<'a> {
    path: &'a Path,
    dim: Option<usize>,
    ids: HashSet<String>,
    splits: [Vec<Example>; 3],
}

impl<'a> Builder<'a> {
    fn new(path: &'a Path) -> Self {
        Self {
            path,
            dim: None,
            ids: HashSet::new(),
            splits: Default::default(),
        }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    fn push(&mut self, line: usize, rec: Record) -> Result<()> {
        let split = Split::parse(&rec.split)
            .ok_or_else(|| self.err(line, format!("unknown split {:?}", rec.split)))?;
        let level = DifficultyLevel::try_from(rec.level)
            .map_err(|_| self.err(line, format!("level {} not in {{0, 1, 2}}", rec.level)))?;
        let dim = *self.dim.get_or_insert(rec.features.len());
        if rec.features.len() != dim || dim == 0 {
            return Err(self.err(
                line,
                format!("expected {dim} features, found {}", rec.features.len()),
            ));
        }
        if rec.features.iter().any(|x| !x.is_finite()) {
            return Err(self.err(line, "non-finite feature value"));
        }
        if !self.ids.insert(rec.id.clone()) {
            return Err(self.err(line, format!("duplicate id {:?}", rec.id)));
        }
        let idx = Split::ALL.iter().position(|&s| s == split).unwrap();
        self.splits[idx].push(Example {
            id: rec.id,
            features: rec.features,
            gold_level: level,
        });
        Ok(())
    }

    fn finish(self, last_line: usize) -> Result<Dataset> {
        for (split, examples) in Split::ALL.iter().zip(&self.splits) {
            if examples.is_empty() {
                return Err(self.err(
                    last_line,
                    format!("no records for split {:?}", split.as_str()),
                ));
            }
        }
        let [train, val, test] = self.splits;
        Dataset::new(train, val, test)
    }
}

pub fn load_dataset(path: &Path, format: DataFormat) -> Result<Dataset> {
    let reader = open_reader(path)?;
    match format {
        DataFormat::Jsonl => load_jsonl(path, reader),
        DataFormat::Csv => load_csv(path, reader),
    }
}

fn load_jsonl(path: &Path, reader: Box<dyn Read>) -> Result<Dataset> {
    let mut b = Builder::new(path);
    let mut last = 0;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        last = line_no;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| b.err(line_no, e.to_string()))?;
        b.push(line_no, rec)?;
    }
    b.finish(last)
}

fn load_csv(path: &Path, reader: Box<dyn Read>) -> Result<Dataset> {
    let mut b = Builder::new(path);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected_prefix = ["id", "split", "level"];
    if headers.len() < 4 || headers.iter().take(3).ne(expected_prefix) {
        return Err(b.err(1, "header must start with id,split,level,f0"));
    }
    for (j, h) in headers.iter().skip(3).enumerate() {
        if h != format!("f{j}") {
            return Err(b.err(
                1,
                format!("feature column {j} is named {h:?}, expected \"f{j}\""),
            ));
        }
    }
    let mut last = 1;
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            b.err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        last = line;
        let level = row[2]
            .trim()
            .parse::<i64>()
            .map_err(|e| b.err(line, format!("level: {e}")))?;
        let features = row
            .iter()
            .skip(3)
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| b.err(line, format!("feature: {e}")))?;
        b.push(
            line,
            Record {
                id: row[0].to_string(),
                split: row[1].to_string(),
                level,
                features,
            },
        )?;
    }
    b.finish(last)
}

fn all_records(dataset: &Dataset) -> impl Iterator<Item = (Split, &Example)> {
    Split::ALL
        .into_iter()
        .flat_map(move |s| dataset.split(s).iter().map(move |e| (s, e)))
}

pub fn save_dataset(dataset: &Dataset, path: &Path, format: DataFormat) -> Result<()> {
    let mut w = open_writer(path)?;
    match format {
        DataFormat::Jsonl => {
            for (split, e) in all_records(dataset) {
                let rec = Record {
                    id: e.id.clone(),
                    split: split.as_str().into(),
                    level: e.gold_level.value() as i64,
                    features: e.features.clone(),
                };
                serde_json::to_writer(&mut w, &rec)?;
                w.write_all(b"\n")?;
            }
        }
        DataFormat::Csv => {
            let mut cw = csv::Writer::from_writer(&mut w);
            let mut header = vec!["id".to_string(), "split".into(), "level".into()];
            header.extend((0..dataset.dim()).map(|j| format!("f{j}")));
            cw.write_record(&header)?;
            for (split, e) in all_records(dataset) {
                let mut row = vec![
                    e.id.clone(),
                    split.as_str().into(),
                    e.gold_level.to_string(),
                ];
                row.extend(e.features.iter().map(|v| v.to_string()));
                cw.write_record(&row)?;
            }
            cw.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}
