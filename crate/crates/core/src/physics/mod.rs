//! Scaling, constitutive closures and PDE residuals.

pub mod closures;
pub mod presets;
pub mod residuals;
mod scales;

pub use closures::{brooks_corey, BrooksCoreyParams, BrooksCoreyState, ScaledRetention, StorageMatrix};
pub use residuals::{Coeffs, FieldDerivs, Phase, Physics};
pub use scales::{
    compute_groups, dimensionalize, CoeffKind, DimensionalCoeffs, DimensionlessGroups, MaterialRecord, ScaleSet,
    TrainableCoeffs,
};
