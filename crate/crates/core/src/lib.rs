//! Utility-maximizing binary prediction with penalized model selection.

pub mod cli;
pub mod comparators;
pub mod error;
pub mod optimizer;
pub mod penalties;
pub mod rng;
pub mod selection;
pub mod sieve;
pub mod simulation;
pub mod utility;

pub use error::{Error, Result};
pub use sieve::{HierarchySpec, Link, PolynomialClass, PredictionRule};
pub use utility::{empirical_utility, CatalogPreference, Dataset, Label, Preference, UtilityValue};
