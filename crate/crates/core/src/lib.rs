//! Viterbi training ("Viterbi extraction") for HMMs with a non-emitting entry
//! state, emitting states with diagonal Gaussians, and an absorbing exit state,
//! in the style of HTK's HInit.
//!
//! The pipeline is [`trainer::initialize`] (uniform segmentation),
//! then repeated [`viterbi::align`] and re-estimation until the best-path log
//! score changes by at most `epsilon` ([`trainer::train`]).

pub mod error;
pub mod io;
pub mod logmath;
pub mod model;
pub mod observation;
pub mod oracle;
pub mod trainer;
pub mod viterbi;

pub use error::{Error, Result, Violation};
pub use logmath::{LOG_ZERO, LOG_ZERO_THRESHOLD};
pub use model::{gconst, GaussianState, HmmModel, DEFAULT_VARIANCE_FLOOR};
pub use observation::ObservationSequence;
pub use trainer::{
    initialize, refine, train, train_with_trace, IterationTrace, Segmentation, TrainingConfig,
    TrainingReport,
};
pub use viterbi::{align, align_with_trellis, AlignmentResult, Trellis};

/// The bundled 12-frame, 3-dimensional worked example.
pub mod fixtures {
    use crate::{io, HmmModel, ObservationSequence};

    pub const OBSERVATIONS: &str = include_str!("../fixtures/example.obs");
    pub const PROTO: &str = include_str!("../fixtures/example_proto.hmm");

    pub fn observations() -> ObservationSequence {
        io::parse_observations(OBSERVATIONS).expect("bundled observations parse")
    }

    /// Four-state prototype: initial transitions with the uniform-segmentation Gaussians.
    pub fn proto() -> HmmModel {
        io::parse_model(PROTO).expect("bundled prototype parses")
    }
}
