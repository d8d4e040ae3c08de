//! Model-free rotor angle stability assessment.
//!
//! Post-fault rotor angle and speed traces of the severely disturbed
//! generator pairs are turned into a logarithmic distance sequence whose
//! slope, the maximal Lyapunov exponent (MLE), is tracked with recursive
//! least squares. The swing pattern of the relative rotor speed picks the
//! Theiler window and the estimation start step, and the shape of the
//! resulting MLE curve decides stability.
//!
//! The [`sim`] module is a classical multi-machine simulator used to
//! produce traces and ground-truth verdicts.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assess;
pub mod classify;
pub mod error;
pub mod extremum;
pub mod ingest;
pub mod mle;
pub mod sdgp;
pub mod sim;
pub mod trace;

pub use assess::{
    aggregate, assess_simulation, run_assessment, AssessConfig, AssessmentReport, CriteriaConfig, PairAssessor, PairReport, PairStatus,
    PairVerdict, SystemStatus, SystemVerdict,
};
pub use classify::{
    distance_series, find_mle_start, ClassifierConfig, DistanceSeries, EstimatorParams,
    MleStartFinder, SwingClassifier, SwingPattern,
};
pub use error::{Error, Result};
pub use ingest::{align, resample, AlignedDataset, EventMeta, ASSESSMENT_RATE_HZ};
pub use mle::{estimate_stream, log_distance, rls_init, rls_update, MleSeries, RlsState};
pub use sdgp::{build_pair_trace, identify_sdgp, GenPair, SdgpConfig, SdgpSelection, SdgpTrace};
pub use sim::{
    reduce_network, simulate, stability_oracle, FaultSpec, NetworkModel, OracleVerdict,
    SimOptions, SimulationOutput, Topology,
};
pub use trace::{parse_traces, write_traces, GeneratorTrace, ParseOptions};

/// Generator identifier as it appears in trace files and network configs.
pub type GenId = u32;
