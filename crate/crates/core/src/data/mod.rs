//! Tabular discrete-choice data: variable specifications, CSV ingestion,
//! Jenks discretisation, seeded train/validation splits and the
//! ordered-logit ground-truth generator.

mod dataset;
mod jenks;
mod simulate;
mod spec;

pub use dataset::{read_csv, load_csv, split, split_indices, Column, Dataset, LoadReport, Value};
pub use jenks::{discretize, jenks_breaks};
pub use simulate::{simulate, Coefficient, ExogenousSpec, GeneratorConfig, OrderedLogitSpec};
pub use spec::{AltRef, SpecSet, VarKind, VariableSpec};
