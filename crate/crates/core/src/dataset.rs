//! In-memory dataset and the labeled/pool partition of its training split.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::level::{level_counts, level_proportions, DifficultyLevel, NUM_LEVELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub features: Vec<f64>,
    pub gold_level: DifficultyLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Train/validation/test splits sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
    dim: usize,
}

impl Dataset {
    /// Builds a dataset, checking that every split is non-empty, dimensions
    /// agree, all features are finite and ids are unique across splits.
    pub fn new(train: Vec<Example>, val: Vec<Example>, test: Vec<Example>) -> Result<Self> {
        for (split, examples) in [("train", &train), ("val", &val), ("test", &test)] {
            if examples.is_empty() {
                return Err(Error::Config(format!("{split} split is empty")));
            }
        }
        let dim = train[0].features.len();
        if dim == 0 {
            return Err(Error::Config("feature dimension is zero".into()));
        }
        let mut ids = HashSet::new();
        for ex in train.iter().chain(&val).chain(&test) {
            if ex.features.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: ex.features.len(),
                });
            }
            if let Some(&x) = ex.features.iter().find(|x| !x.is_finite()) {
                return Err(Error::NonFinite(x));
            }
            if !ids.insert(ex.id.as_str()) {
                return Err(Error::Config(format!("duplicate example id {:?}", ex.id)));
            }
        }
        Ok(Self {
            train,
            val,
            test,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn split(&self, split: Split) -> &[Example] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// Level proportions of the training split.
    pub fn level_distribution(&self) -> [f64; NUM_LEVELS] {
        level_proportions(&levels_of(&self.train)).expect("train split is non-empty")
    }

    pub fn train_level_counts(&self) -> [usize; NUM_LEVELS] {
        level_counts(&levels_of(&self.train))
    }
}

pub fn levels_of(examples: &[Example]) -> Vec<DifficultyLevel> {
    examples.iter().map(|e| e.gold_level).collect()
}

/// Partition of the training indices into a labeled set and an unlabeled
/// pool. Labels become visible only through [`LabelState::reveal`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelState {
    labeled: Vec<usize>,
    pool: Vec<usize>,
    revealed: BTreeMap<usize, DifficultyLevel>,
}

impl LabelState {
    /// Everything unlabeled.
    pub fn new(n_train: usize) -> Self {
        Self {
            labeled: Vec::new(),
            pool: (0..n_train).collect(),
            revealed: BTreeMap::new(),
        }
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    /// Pool indices in ascending order.
    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    pub fn revealed(&self) -> &BTreeMap<usize, DifficultyLevel> {
        &self.revealed
    }

    pub fn label_of(&self, index: usize) -> Option<DifficultyLevel> {
        self.revealed.get(&index).copied()
    }

    /// Labels of the labeled set in acquisition order.
    pub fn labeled_levels(&self) -> Vec<DifficultyLevel> {
        self.labeled.iter().map(|i| self.revealed[i]).collect()
    }

    /// Moves `indices` from the pool to the labeled set, taking each label
    /// from the dataset's gold annotation.
    pub fn reveal(&mut self, indices: &[usize], train: &[Example]) -> Result<()> {
        let mut seen = HashSet::with_capacity(indices.len());
        for &i in indices {
            if !seen.insert(i) {
                return Err(Error::Partition(format!("index {i} acquired twice")));
            }
            if self.pool.binary_search(&i).is_err() {
                return Err(Error::Partition(format!("index {i} is not in the pool")));
            }
        }
        self.pool.retain(|i| !seen.contains(i));
        for &i in indices {
            self.labeled.push(i);
            self.revealed.insert(i, train[i].gold_level);
        }
        Ok(())
    }

    pub fn check_invariants(&self, n_train: usize) -> Result<()> {
        if self.labeled.len() + self.pool.len() != n_train {
            return Err(Error::Partition(format!(
                "{} labeled + {} pool != {} train",
                self.labeled.len(),
                self.pool.len(),
                n_train
            )));
        }
        let mut seen = vec![false; n_train];
        for &i in self.labeled.iter().chain(&self.pool) {
            if i >= n_train || seen[i] {
                return Err(Error::Partition(format!(
                    "index {i} duplicated or out of range"
                )));
            }
            seen[i] = true;
        }
        if self.revealed.len() != self.labeled.len()
            || self.labeled.iter().any(|i| !self.revealed.contains_key(i))
        {
            return Err(Error::Partition(
                "revealed labels do not match labeled set".into(),
            ));
        }
        Ok(())
    }
}

/// Proportion of each level among the revealed labels.
pub fn level_distribution(state: &LabelState) -> Result<[f64; NUM_LEVELS]> {
    if state.labeled.is_empty() {
        return Err(Error::Empty("labeled set"));
    }
    level_proportions(&state.labeled_levels())
}
