//! Satisfiability workbench for the fluted fragment with equality and one
//! distinguished transitive relation.
//!
//! The pipeline runs normal form, spread normal form, basic formulas, the
//! quadratic transformation, certificate search and model synthesis. A
//! bounded finite-model oracle serves as independent ground truth, and the
//! corpus module generates the tiling encodings and their intended models.

pub mod basic_reduction;
pub mod certificate;
pub mod corpus;
pub mod model_synthesis;
pub mod multivar;
pub mod normal_form;
pub mod oracle;
pub mod random;
pub mod resolution;
pub mod semantics;
pub mod syntax;

pub use semantics::{eval, FlutedType, Structure};
pub use syntax::{parse, parse_file, print, Formula, PredId, PredKind, Signature};
