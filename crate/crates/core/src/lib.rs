//! Semi-supervised training of small MLPs with self-ensembling teachers and a
//! teacher-graph contrastive loss on hidden features.

pub mod data;
pub mod error;
pub mod model;
pub mod numerics;
pub mod sntg;
pub mod teachers;
pub mod trainer;

pub use data::Dataset;
pub use error::{Error, Result};
pub use model::Mlp;
pub use numerics::{Matrix, Rng};
pub use teachers::{Teacher, TeacherKind};
pub use trainer::{train, train_with, TrainConfig, TrainOutcome};
