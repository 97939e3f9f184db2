//! Synthetic classifier output for one plan of a library.
//!
//! Every frame puts `1 - noise` on its true class and spreads `noise` over
//! the remaining classes. The spread is drawn per frame:
//!
//! 1. The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//!    `seed_from_u64(seed)`.
//! 2. For every other class, in alphabet order, one 64-bit word is taken
//!    and mapped to `[0, 1)` as `(word >> 11) * 2^-53`.
//! 3. Each class receives `noise * w_i / sum(w)`; an all-zero draw spreads
//!    the mass evenly.
//!
//! Draws happen even when `noise` is zero, so the random sequence consumed
//! per frame depends only on the alphabet size.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::plan_library::{ActivityClass, LibraryError, PlanLibrary};
use crate::smoothing::FrameObservation;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FramesPerStep {
    Uniform(usize),
    /// One count per plan step.
    PerStep(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub frames_per_step: FramesPerStep,
    /// Probability mass moved off the true class, in `[0, 1)`.
    pub noise: f64,
    /// `none` frames inserted between consecutive steps.
    pub none_gap: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            frames_per_step: FramesPerStep::Uniform(10),
            noise: 0.0,
            none_gap: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error("unknown goal \"{0}\"")]
    UnknownGoal(String),
    #[error("goal \"{goal}\" has no plan {plan}")]
    UnknownPlan { goal: String, plan: usize },
    #[error("noise must lie in [0, 1), got {0}")]
    InvalidNoise(f64),
    #[error("frames per step must be at least 1")]
    ZeroFrames,
    #[error("{got} per-step frame counts given for a plan of {expected} steps")]
    PerStepLength { expected: usize, got: usize },
    #[error("none_gap needs a \"none\" class in the alphabet")]
    MissingNone,
    #[error("noise needs at least two classes in the alphabet")]
    SingleClass,
}

/// Frames plus the class each one was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedStream {
    pub frames: Vec<FrameObservation>,
    pub truth: Vec<(u64, ActivityClass)>,
}

fn unit_interval(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn noisy_vector(rng: &mut ChaCha8Rng, classes: usize, truth: usize, noise: f64) -> Vec<f64> {
    let weights: Vec<f64> = (0..classes - 1).map(|_| unit_interval(rng)).collect();
    let total: f64 = weights.iter().sum();
    let mut probs = Vec::with_capacity(classes);
    let mut others = weights.iter();
    for i in 0..classes {
        if i == truth {
            probs.push(1.0 - noise);
        } else {
            let w = *others.next().expect("one weight per other class");
            let share = if total > 0.0 {
                noise * w / total
            } else {
                noise / (classes - 1) as f64
            };
            probs.push(share);
        }
    }
    probs
}

pub fn generate_stream(
    lib: &PlanLibrary,
    goal: &str,
    plan_index: usize,
    cfg: &GenConfig,
) -> Result<GeneratedStream, GenError> {
    let plans = lib.compile()?;
    let goal_idx = lib
        .goal_index(goal)
        .ok_or_else(|| GenError::UnknownGoal(goal.to_owned()))?;
    let plan = plans
        .iter()
        .find(|p| p.goal == goal_idx && p.plan_index == plan_index)
        .ok_or_else(|| GenError::UnknownPlan {
            goal: goal.to_owned(),
            plan: plan_index,
        })?;

    if !(0.0..1.0).contains(&cfg.noise) {
        return Err(GenError::InvalidNoise(cfg.noise));
    }
    let counts = match &cfg.frames_per_step {
        FramesPerStep::Uniform(n) => vec![*n; plan.steps.len()],
        FramesPerStep::PerStep(v) if v.len() != plan.steps.len() => {
            return Err(GenError::PerStepLength {
                expected: plan.steps.len(),
                got: v.len(),
            })
        }
        FramesPerStep::PerStep(v) => v.clone(),
    };
    if counts.contains(&0) {
        return Err(GenError::ZeroFrames);
    }
    let classes = lib.alphabet.len();
    if classes < 2 && cfg.noise > 0.0 {
        return Err(GenError::SingleClass);
    }
    let none = lib.alphabet.none_class();
    if cfg.none_gap > 0 && plan.steps.len() > 1 && none.is_none() {
        return Err(GenError::MissingNone);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut frames = Vec::new();
    let mut truth = Vec::new();
    let mut emit = |class: ActivityClass, rng: &mut ChaCha8Rng| {
        let id = frames.len() as u64;
        let probs = if classes == 1 {
            vec![1.0]
        } else {
            noisy_vector(rng, classes, class.0, cfg.noise)
        };
        frames.push(FrameObservation::new(id, probs));
        truth.push((id, class));
    };

    for (i, (&step, &n)) in plan.steps.iter().zip(&counts).enumerate() {
        if i > 0 {
            if let Some(none) = none {
                for _ in 0..cfg.none_gap {
                    emit(none, &mut rng);
                }
            }
        }
        for _ in 0..n {
            emit(step, &mut rng);
        }
    }
    Ok(GeneratedStream { frames, truth })
}
