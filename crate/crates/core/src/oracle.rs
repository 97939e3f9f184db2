//! Brute-force reference for the candidate goal set.
//!
//! Rescans every plan of the library by name for each query and keeps no
//! state between calls. Used to cross-check [`crate::recognizer`].

use thiserror::Error;

use crate::plan_library::PlanLibrary;
use crate::recognizer::CandidateGoalSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("segment {index} (\"{label}\") repeats the previous segment")]
    Uncollapsed { index: usize, label: String },
}

/// Goals owning a plan that `segments` is a prefix of (or equal to).
pub fn oracle_candidates<S: AsRef<str>>(
    lib: &PlanLibrary,
    segments: &[S],
) -> Result<CandidateGoalSet, OracleError> {
    for i in 1..segments.len() {
        if segments[i].as_ref() == segments[i - 1].as_ref() {
            return Err(OracleError::Uncollapsed {
                index: i,
                label: segments[i].as_ref().to_owned(),
            });
        }
    }
    let counts: Vec<usize> = lib
        .goals
        .iter()
        .map(|goal| {
            goal.plans
                .iter()
                .filter(|plan| {
                    segments.len() <= plan.steps.len()
                        && segments
                            .iter()
                            .zip(&plan.steps)
                            .all(|(seen, step)| seen.as_ref() == step)
                })
                .count()
        })
        .collect();
    Ok(CandidateGoalSet::from_counts(lib, &counts))
}
