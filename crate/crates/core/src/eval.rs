//! Scoring of recognition traces against ground truth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recognizer::TraceRecord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("label sequences differ in length ({predicted} predicted, {truth} truth)")]
    LengthMismatch { predicted: usize, truth: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub true_goal: String,
    pub converged: bool,
    /// Frame id of the convergence point.
    pub convergence_frame: Option<u64>,
    /// Position of the convergence point within the trace.
    pub convergence_index: Option<usize>,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub frame_accuracy: f64,
    pub frames_total: usize,
}

/// Earliest trace position from which the candidate set is exactly
/// `{true_goal}` through to the end.
pub fn convergence_point<S: AsRef<str>>(
    sets: &[Vec<S>],
    true_goal: &str,
) -> Result<Option<usize>, EvalError> {
    if sets.is_empty() {
        return Err(EvalError::EmptyTrace);
    }
    let exact = |set: &Vec<S>| set.len() == 1 && set[0].as_ref() == true_goal;
    let stable_suffix = sets.iter().rev().take_while(|s| exact(s)).count();
    Ok((stable_suffix > 0).then(|| sets.len() - stable_suffix))
}

/// Mean per-frame precision (`1/|C|` when the true goal is in `C`) and
/// recall (1 when the true goal is in `C`).
pub fn candidate_metrics<S: AsRef<str>>(
    sets: &[Vec<S>],
    true_goal: &str,
) -> Result<(f64, f64), EvalError> {
    if sets.is_empty() {
        return Err(EvalError::EmptyTrace);
    }
    let (mut precision, mut recall) = (0.0, 0.0);
    for set in sets {
        if set.iter().any(|g| g.as_ref() == true_goal) {
            precision += 1.0 / set.len() as f64;
            recall += 1.0;
        }
    }
    let n = sets.len() as f64;
    Ok((precision / n, recall / n))
}

pub fn frame_accuracy<T: PartialEq>(predicted: &[T], truth: &[T]) -> Result<f64, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Ok(1.0);
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Full report for one trace. `truth` holds one label per trace record.
pub fn evaluate(
    trace: &[TraceRecord],
    truth: &[String],
    true_goal: &str,
) -> Result<EvalReport, EvalError> {
    let sets: Vec<&Vec<String>> = trace.iter().map(|r| &r.candidates).collect();
    let sets: Vec<Vec<&str>> = sets
        .iter()
        .map(|s| s.iter().map(String::as_str).collect())
        .collect();
    let convergence_index = convergence_point(&sets, true_goal)?;
    let (mean_precision, mean_recall) = candidate_metrics(&sets, true_goal)?;
    let predicted: Vec<&str> = trace.iter().map(|r| r.label.as_str()).collect();
    let truth: Vec<&str> = truth.iter().map(String::as_str).collect();
    let accuracy = frame_accuracy(&predicted, &truth)?;
    Ok(EvalReport {
        true_goal: true_goal.to_owned(),
        converged: convergence_index.is_some(),
        convergence_frame: convergence_index.map(|i| trace[i].frame),
        convergence_index,
        mean_precision,
        mean_recall,
        frame_accuracy: accuracy,
        frames_total: trace.len(),
    })
}

/// Unweighted mean of several reports. `None` for an empty slice.
pub fn mean_report(reports: &[EvalReport]) -> Option<MeanReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Some(MeanReport {
        traces: reports.len(),
        converged_fraction: mean(|r| if r.converged { 1.0 } else { 0.0 }),
        mean_precision: mean(|r| r.mean_precision),
        mean_recall: mean(|r| r.mean_recall),
        frame_accuracy: mean(|r| r.frame_accuracy),
        frames_total: reports.iter().map(|r| r.frames_total).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanReport {
    pub traces: usize,
    pub converged_fraction: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub frame_accuracy: f64,
    pub frames_total: usize,
}
