//! Incremental plan recognition over a labeled frame stream.
//!
//! The recognizer keeps one hypothesis per library plan that is still
//! consistent with the observed segments, i.e. every plan of which the
//! observed segment sequence is a prefix. Consecutive equal labels are one
//! segment, so the state can be fed frame by frame.

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::plan_library::{ActivityClass, CompiledPlan, LibraryError, PlanLibrary};
use crate::smoothing::{FrameObservation, NonePolicy, SmoothError, Smoother, SmoothingConfig};

/// What happens when a segment contradicts every live hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnDead {
    /// Stay dead; every later frame reports no candidates.
    #[default]
    Strict,
    /// Discard the offending segment and keep the previous hypotheses.
    Skip,
    /// Stop the stream with an error.
    Halt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RecognizerPolicy {
    pub none_policy: NonePolicy,
    pub on_dead: OnDead,
}

/// A partially matched plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Hypothesis {
    pub goal: usize,
    pub plan_index: usize,
    /// Number of plan steps matched so far.
    pub position: usize,
}

/// Goals with at least one live hypothesis, in library declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CandidateGoalSet {
    pub goals: Vec<String>,
    /// Live hypothesis count for every library goal, including zeros.
    pub hypotheses: GoalCounts,
}

/// Per-goal counts in declaration order; serialized as a JSON object.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GoalCounts(pub Vec<(String, usize)>);

impl CandidateGoalSet {
    /// Builds the set from one count per library goal.
    pub fn from_counts(lib: &PlanLibrary, counts: &[usize]) -> Self {
        debug_assert_eq!(counts.len(), lib.goals.len());
        let hypotheses: Vec<(String, usize)> = lib
            .goal_names()
            .zip(counts)
            .map(|(name, &n)| (name.to_owned(), n))
            .collect();
        let goals = hypotheses
            .iter()
            .filter(|(_, n)| *n > 0)
            .map(|(g, _)| g.clone())
            .collect();
        Self {
            goals,
            hypotheses: GoalCounts(hypotheses),
        }
    }

    pub fn contains(&self, goal: &str) -> bool {
        self.goals.iter().any(|g| g == goal)
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    pub fn count(&self, goal: &str) -> usize {
        self.hypotheses
            .0
            .iter()
            .find(|(g, _)| g == goal)
            .map_or(0, |(_, n)| *n)
    }

    /// True when every goal here is also in `other`.
    pub fn is_subset(&self, other: &CandidateGoalSet) -> bool {
        self.goals.iter().all(|g| other.contains(g))
    }
}

impl Serialize for GoalCounts {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (goal, n) in &self.0 {
            map.serialize_entry(goal, n)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for GoalCounts {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct CountsVisitor;

        impl<'de> Visitor<'de> for CountsVisitor {
            type Value = GoalCounts;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map of goal names to hypothesis counts")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<GoalCounts, A::Error> {
                let mut out = Vec::new();
                while let Some(entry) = access.next_entry::<String, usize>()? {
                    out.push(entry);
                }
                Ok(GoalCounts(out))
            }
        }

        deserializer.deserialize_map(CountsVisitor)
    }
}

#[derive(Debug, Error)]
pub enum RecognizeError {
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Smooth(#[from] SmoothError),
    #[error("label index {0} is outside the library alphabet")]
    UnknownLabel(usize),
    #[error("unknown activity \"{0}\"")]
    UnknownLabelName(String),
    #[error("frame {frame}: segment \"{label}\" is inconsistent with every plan")]
    Halted { frame: u64, label: String },
}

/// How a single observation affected the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// `none` frame under the skip policy.
    Paused,
    /// Same label as the current segment.
    Continued,
    /// New segment matched by at least one hypothesis.
    Advanced,
    /// New segment matched nothing; the state is now dead.
    Died,
    /// New segment observed while already dead.
    StillDead,
    /// New segment matched nothing and was dropped (`OnDead::Skip`).
    Discarded,
}

impl Outcome {
    pub fn new_segment(self) -> bool {
        !matches!(self, Outcome::Paused | Outcome::Continued)
    }

    /// Whether the segment became part of the matched sequence.
    pub fn consumed(self) -> bool {
        matches!(self, Outcome::Advanced | Outcome::Died | Outcome::StillDead)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub outcome: Outcome,
    pub candidates: CandidateGoalSet,
}

/// Live hypotheses for one stream over a shared library.
#[derive(Debug, Clone)]
pub struct RecognitionState<'lib> {
    lib: &'lib PlanLibrary,
    plans: Vec<CompiledPlan>,
    alive: Vec<Hypothesis>,
    last_label: Option<ActivityClass>,
    policy: RecognizerPolicy,
}

impl<'lib> RecognitionState<'lib> {
    /// One hypothesis at position 0 for every plan of the library.
    pub fn init(lib: &'lib PlanLibrary, policy: RecognizerPolicy) -> Result<Self, LibraryError> {
        let plans = lib.compile()?;
        let alive = plans
            .iter()
            .map(|p| Hypothesis {
                goal: p.goal,
                plan_index: p.plan_index,
                position: 0,
            })
            .collect();
        Ok(Self {
            lib,
            plans,
            alive,
            last_label: None,
            policy,
        })
    }

    pub fn library(&self) -> &'lib PlanLibrary {
        self.lib
    }

    pub fn policy(&self) -> RecognizerPolicy {
        self.policy
    }

    pub fn alive(&self) -> &[Hypothesis] {
        &self.alive
    }

    pub fn is_dead(&self) -> bool {
        self.alive.is_empty()
    }

    pub fn last_label(&self) -> Option<ActivityClass> {
        self.last_label
    }

    fn plan_steps(&self, h: &Hypothesis) -> &[ActivityClass] {
        // plans are stored goal-major in declaration order
        let offset: usize = self.lib.goals[..h.goal].iter().map(|g| g.plans.len()).sum();
        &self.plans[offset + h.plan_index].steps
    }

    pub fn candidates(&self) -> CandidateGoalSet {
        let mut counts = vec![0; self.lib.goals.len()];
        for h in &self.alive {
            counts[h.goal] += 1;
        }
        CandidateGoalSet::from_counts(self.lib, &counts)
    }

    pub fn observe_name(&mut self, label: &str) -> Result<Observation, RecognizeError> {
        let class = self
            .lib
            .alphabet
            .lookup(label)
            .ok_or_else(|| RecognizeError::UnknownLabelName(label.to_owned()))?;
        self.observe(class)
    }

    /// Feeds one frame label.
    pub fn observe(&mut self, label: ActivityClass) -> Result<Observation, RecognizeError> {
        if label.0 >= self.lib.alphabet.len() {
            return Err(RecognizeError::UnknownLabel(label.0));
        }
        let outcome = self.step(label);
        Ok(Observation {
            outcome,
            candidates: self.candidates(),
        })
    }

    fn step(&mut self, label: ActivityClass) -> Outcome {
        if self.policy.none_policy == NonePolicy::Skip && self.lib.alphabet.is_none(label) {
            return Outcome::Paused;
        }
        if self.last_label == Some(label) {
            return Outcome::Continued;
        }
        self.last_label = Some(label);
        if self.alive.is_empty() {
            return Outcome::StillDead;
        }

        let advanced: Vec<Hypothesis> = self
            .alive
            .iter()
            .filter(|h| self.plan_steps(h).get(h.position) == Some(&label))
            .map(|h| Hypothesis {
                position: h.position + 1,
                ..*h
            })
            .collect();

        if !advanced.is_empty() {
            self.alive = advanced;
            return Outcome::Advanced;
        }
        match self.policy.on_dead {
            OnDead::Skip => Outcome::Discarded,
            OnDead::Strict | OnDead::Halt => {
                self.alive.clear();
                Outcome::Died
            }
        }
    }
}

/// One line of a recognition trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub frame: u64,
    pub label: String,
    pub new_segment: bool,
    pub candidates: Vec<String>,
    pub hypotheses: GoalCounts,
}

impl TraceRecord {
    pub fn new(frame: u64, label: String, new_segment: bool, set: CandidateGoalSet) -> Self {
        Self {
            frame,
            label,
            new_segment,
            candidates: set.goals,
            hypotheses: set.hypotheses,
        }
    }

    pub fn candidate_set(&self) -> CandidateGoalSet {
        CandidateGoalSet {
            goals: self.candidates.clone(),
            hypotheses: self.hypotheses.clone(),
        }
    }
}

pub type RecognitionTrace = Vec<TraceRecord>;

/// Frame-at-a-time pipeline: smoothing, run collapsing and matching.
#[derive(Debug, Clone)]
pub struct Session<'lib> {
    smoother: Smoother<'lib>,
    state: RecognitionState<'lib>,
    last_outcome: Option<Outcome>,
}

impl<'lib> Session<'lib> {
    pub fn new(
        lib: &'lib PlanLibrary,
        cfg: SmoothingConfig,
        policy: RecognizerPolicy,
    ) -> Result<Self, LibraryError> {
        Ok(Self {
            smoother: Smoother::new(&lib.alphabet, cfg),
            state: RecognitionState::init(lib, policy)?,
            last_outcome: None,
        })
    }

    pub fn state(&self) -> &RecognitionState<'lib> {
        &self.state
    }

    /// Outcome of the most recent frame.
    pub fn last_outcome(&self) -> Option<Outcome> {
        self.last_outcome
    }

    pub fn push(&mut self, obs: &FrameObservation) -> Result<TraceRecord, RecognizeError> {
        let label = self.smoother.push(obs)?;
        let observation = self.state.observe(label)?;
        self.last_outcome = Some(observation.outcome);
        let name = self.state.library().alphabet.name(label).to_owned();
        if observation.outcome == Outcome::Died && self.state.policy().on_dead == OnDead::Halt {
            return Err(RecognizeError::Halted {
                frame: obs.frame_id,
                label: name,
            });
        }
        Ok(TraceRecord::new(
            obs.frame_id,
            name,
            observation.outcome.new_segment(),
            observation.candidates,
        ))
    }
}

/// Runs the whole pipeline over a stream, one trace record per frame.
pub fn recognize_stream(
    lib: &PlanLibrary,
    stream: &[FrameObservation],
    cfg: &SmoothingConfig,
    policy: RecognizerPolicy,
) -> Result<RecognitionTrace, RecognizeError> {
    let mut session = Session::new(lib, *cfg, policy)?;
    stream.iter().map(|obs| session.push(obs)).collect()
}
