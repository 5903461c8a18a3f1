//! Sequential physics-informed training.

mod adam;
mod collocation;
mod fields;
mod fit;
mod gradnorm;
mod loss;
mod model;
mod problem;
mod sequential;

pub use adam::AdamState;
pub use collocation::{concat, CollocationSet, Refinement};
pub use fields::{comp_count, comps_of, derivs_from, function_comps, network_comps, DirPlan, FieldFn, Need};
pub use fit::{fit_network, FitSchedule};
pub use gradnorm::GradNormState;
pub use loss::{eval_term, frozen_comps, CompiledTerm, FieldSource, LossBreakdown, TermEval, TermInputs, TermLoss};
pub use model::{coeff_array, Model};
pub use problem::{
    Ctx, FieldSpec, FieldUse, Problem, ProblemSettings, ResidualFn, Source, Stage, StageSpec, TermKind, TermSpec,
};
pub use sequential::{write_trajectory, EpochRecord, InversionResult, SequentialSchedule, Trainer};
