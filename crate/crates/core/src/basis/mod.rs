//! Basis functions: per-part extraction, merging of instrument instances and
//! fusion onto the global onset grid.

mod extract;
mod fusion;
mod id;
mod io;
mod matrix;

pub use extract::{extract_part_basis, NoteBasisRow};
pub use fusion::{fuse, merge_instrument_class};
pub use id::{feature_kind, BasisId, FeatureKind, FusionOp, FusionSpec};
pub use io::{read_basis_csv, sidecar_path, write_basis_csv};
pub use matrix::{build_basis_matrix, standardize, BasisMatrix, BasisStats};
