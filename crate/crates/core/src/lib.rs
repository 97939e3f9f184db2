//! Goal recognition from per-frame activity probabilities.
//!
//! The pipeline labels every frame from its classifier probabilities
//! ([`smoothing`]), collapses equal labels into plan-step segments and keeps
//! the set of library plans whose prefix matches the segments seen so far
//! ([`recognizer`]). The goals owning those plans are the candidates.
//!
//! ```
//! use planrec::{fixtures, recognizer::{RecognitionState, RecognizerPolicy}};
//!
//! let lib = fixtures::kscgr();
//! let mut state = RecognitionState::init(&lib, RecognizerPolicy::default()).unwrap();
//! for label in ["breaking", "mixing", "baking"] {
//!     state.observe_name(label).unwrap();
//! }
//! assert_eq!(state.candidates().goals, ["omelet", "scrambled_egg"]);
//! ```

pub mod eval;
pub mod fixtures;
pub mod io;
pub mod oracle;
pub mod plan_library;
pub mod recognizer;
pub mod smoothing;
pub mod streamgen;

pub use oracle::oracle_candidates;
pub use plan_library::{
    parse_library, validate_library, ActivityAlphabet, ActivityClass, Plan, PlanLibrary,
};
pub use recognizer::{
    recognize_stream, CandidateGoalSet, OnDead, RecognitionState, RecognizerPolicy, TraceRecord,
};
pub use smoothing::{
    collapse_runs, smooth_frame, smooth_stream, FrameObservation, NonePolicy, Segment,
    SmoothingConfig,
};
pub use streamgen::{generate_stream, FramesPerStep, GenConfig};
