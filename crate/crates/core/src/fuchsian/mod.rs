//! Free Fuchsian groups given by integer generators, cusp words and an
//! ideal fundamental polygon.

mod ball;
mod classes;
mod presentation;
mod word;

use alloc::string::String;

pub use ball::{enumerate_ball, fold_ball, visit_ball, BallEntry, BallOptions, BallStats, BallVisit};
pub use classes::{
    enumerate_conjugacy_classes, visit_conjugacy_classes, visit_with_cosets, ClassOptions,
    ConjugacyClass, ModularCosets,
};
pub use presentation::{
    generates_free_group, GroupPresentation, IdealPoint, PresentationSpec, Reduction, Side,
};
pub use word::{Letter, Word};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FuchsianError {
    #[error("invalid presentation: {0}")]
    InvalidPresentation(String),
    #[error("point escaped into a cusp (height {height:e})")]
    CuspEscape { height: f64 },
    #[error("enumeration budget of {budget} nodes exceeded")]
    BudgetExceeded { budget: u64 },
    #[error("radius {requested} exceeds the configured maximum {max}")]
    RadiusTooLarge { requested: f64, max: f64 },
}
