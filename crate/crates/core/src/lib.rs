#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classes;
pub mod entropy;
pub mod error;
pub mod experiment;
pub mod hilbert;
pub mod jl;
pub mod net;
pub mod piecewise;
pub mod reconstruct;
pub mod rng;
pub mod tail;
pub mod warp;

pub use classes::{ClassMember, ClassSpec, MemberParams, Relaxation, SpanFunction};
pub use error::{Error, Result};
pub use hilbert::{BasisSpec, Signal};
pub use net::{build_net, EpsilonNet, GridFactor, NetOptions};
pub use piecewise::{analyze_piecewise, PiecewiseDescription};
pub use tail::{fit_tail_model, TailDecayModel};
pub use jl::{random_subspace, required_measurements, MeasurementOperator};
pub use reconstruct::{preprocess, PreparedSampler, PreprocessOptions, ReconstructionOutcome};
pub use entropy::{exhaustive_min_cover, fit_growth, greedy_cover, measurement_lower_bound, theorem_bound_check, EntropyScan, GrowthModel};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentSummary, TrialMode};
