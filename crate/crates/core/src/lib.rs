//! Pool-based active learning for ordinal difficulty regression with Monte
//! Carlo dropout uncertainty and PowerVariance batch acquisition.

pub mod acquisition;
pub mod data;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod level;
pub mod model;
pub mod rng;

pub use acquisition::{AcquisitionConfig, Strategy};
pub use dataset::{Dataset, Example, LabelState};
pub use error::{Error, Result};
pub use experiment::{Baseline, LearningCurve, LoopConfig, MetricsRow};
pub use level::DifficultyLevel;
pub use model::{Regressor, RegressorConfig, SampleMatrix};
