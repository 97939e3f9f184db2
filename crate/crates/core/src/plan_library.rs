//! Plan libraries: top-level goals mapped to flat activity sequences.
//!
//! A library file is a JSON document with two keys:
//!
//! ```json
//! {
//!   "alphabet": ["breaking", "mixing", "none"],
//!   "goals": [
//!     { "name": "A", "plans": [["breaking", "mixing"]] }
//!   ]
//! }
//! ```
//!
//! `alphabet` fixes the class order that every probability vector must
//! follow. A class literally named `none` is the distinguished no-activity
//! class. Unknown keys are rejected.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the distinguished no-activity class.
pub const NONE_CLASS: &str = "none";

/// Index of a class inside an [`ActivityAlphabet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActivityClass(pub usize);

impl ActivityClass {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The closed, ordered set of recognizable activities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActivityAlphabet {
    classes: Vec<String>,
}

impl ActivityAlphabet {
    pub fn new<I, S>(classes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            classes: classes.into_iter().map(Into::into).collect(),
        }
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Position of the `none` class, if the alphabet declares one.
    pub fn none_index(&self) -> Option<usize> {
        self.classes.iter().position(|c| c == NONE_CLASS)
    }

    pub fn none_class(&self) -> Option<ActivityClass> {
        self.none_index().map(ActivityClass)
    }

    pub fn lookup(&self, name: &str) -> Option<ActivityClass> {
        self.classes
            .iter()
            .position(|c| c == name)
            .map(ActivityClass)
    }

    /// Panics if `class` is out of range.
    pub fn name(&self, class: ActivityClass) -> &str {
        &self.classes[class.0]
    }

    pub fn get(&self, class: ActivityClass) -> Option<&str> {
        self.classes.get(class.0).map(String::as_str)
    }

    pub fn is_none(&self, class: ActivityClass) -> bool {
        self.none_index() == Some(class.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ActivityClass, &str)> {
        self.classes
            .iter()
            .enumerate()
            .map(|(i, c)| (ActivityClass(i), c.as_str()))
    }
}

/// A flat plan: one activity per plan-step, in execution order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Plan {
    pub steps: Vec<String>,
}

impl Plan {
    pub fn new<I, S>(steps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            steps: steps.into_iter().map(Into::into).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    pub name: String,
    pub plans: Vec<Plan>,
}

/// Named top-level goals, each owning one or more plans.
///
/// The fields are public so that libraries can be assembled in code; such
/// libraries are not checked until [`validate_library`] or
/// [`PlanLibrary::compile`] runs. [`parse_library`] only ever returns valid
/// libraries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanLibrary {
    pub alphabet: ActivityAlphabet,
    pub goals: Vec<Goal>,
}

/// One broken library invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyAlphabet,
    EmptyClassName {
        position: usize,
    },
    DuplicateClass {
        name: String,
    },
    NoGoals,
    EmptyGoalName {
        position: usize,
    },
    DuplicateGoal {
        name: String,
    },
    GoalWithoutPlans {
        goal: String,
    },
    EmptyPlan {
        goal: String,
        plan: usize,
    },
    UnknownStep {
        goal: String,
        plan: usize,
        step: usize,
        name: String,
    },
    NoneStep {
        goal: String,
        plan: usize,
        step: usize,
    },
    ConsecutiveDuplicate {
        goal: String,
        plan: usize,
        step: usize,
        name: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyAlphabet => write!(f, "alphabet is empty"),
            Violation::EmptyClassName { position } => {
                write!(f, "alphabet entry {position} is an empty name")
            }
            Violation::DuplicateClass { name } => {
                write!(f, "alphabet declares class \"{name}\" more than once")
            }
            Violation::NoGoals => write!(f, "library declares no goals"),
            Violation::EmptyGoalName { position } => {
                write!(f, "goal {position} has an empty name")
            }
            Violation::DuplicateGoal { name } => {
                write!(f, "goal \"{name}\" is declared more than once")
            }
            Violation::GoalWithoutPlans { goal } => write!(f, "goal \"{goal}\" has no plans"),
            Violation::EmptyPlan { goal, plan } => {
                write!(f, "goal \"{goal}\" plan {plan} is empty")
            }
            Violation::UnknownStep {
                goal,
                plan,
                step,
                name,
            } => write!(
                f,
                "goal \"{goal}\" plan {plan} step {step}: \"{name}\" is not in the alphabet"
            ),
            Violation::NoneStep { goal, plan, step } => write!(
                f,
                "goal \"{goal}\" plan {plan} step {step}: \"{NONE_CLASS}\" cannot be a plan step"
            ),
            Violation::ConsecutiveDuplicate {
                goal,
                plan,
                step,
                name,
            } => write!(
                f,
                "goal \"{goal}\" plan {plan} step {step}: \"{name}\" repeats the previous step"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("library syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid library: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parses a library document without checking its invariants.
pub fn parse_library_unchecked(text: &str) -> Result<PlanLibrary, LibraryError> {
    serde_json::from_str(text).map_err(|e| LibraryError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Parses and validates a library document.
pub fn parse_library(text: &str) -> Result<PlanLibrary, LibraryError> {
    let lib = parse_library_unchecked(text)?;
    let violations = validate_library(&lib);
    if violations.is_empty() {
        Ok(lib)
    } else {
        Err(LibraryError::Invalid(violations))
    }
}

/// Lists every invariant the library breaks, in declaration order.
pub fn validate_library(lib: &PlanLibrary) -> Vec<Violation> {
    let mut out = Vec::new();

    if lib.alphabet.is_empty() {
        out.push(Violation::EmptyAlphabet);
    }
    let mut seen = HashSet::new();
    for (position, name) in lib.alphabet.classes().iter().enumerate() {
        if name.is_empty() {
            out.push(Violation::EmptyClassName { position });
        } else if !seen.insert(name.as_str()) {
            out.push(Violation::DuplicateClass { name: name.clone() });
        }
    }

    if lib.goals.is_empty() {
        out.push(Violation::NoGoals);
    }
    let mut goal_names = HashSet::new();
    for (position, goal) in lib.goals.iter().enumerate() {
        if goal.name.is_empty() {
            out.push(Violation::EmptyGoalName { position });
        } else if !goal_names.insert(goal.name.as_str()) {
            out.push(Violation::DuplicateGoal {
                name: goal.name.clone(),
            });
        }
        if goal.plans.is_empty() {
            out.push(Violation::GoalWithoutPlans {
                goal: goal.name.clone(),
            });
        }
        for (plan_idx, plan) in goal.plans.iter().enumerate() {
            check_plan(&lib.alphabet, &goal.name, plan_idx, plan, &mut out);
        }
    }
    out
}

fn check_plan(
    alphabet: &ActivityAlphabet,
    goal: &str,
    plan_idx: usize,
    plan: &Plan,
    out: &mut Vec<Violation>,
) {
    if plan.is_empty() {
        out.push(Violation::EmptyPlan {
            goal: goal.to_owned(),
            plan: plan_idx,
        });
        return;
    }
    for (step, name) in plan.steps.iter().enumerate() {
        if name == NONE_CLASS {
            out.push(Violation::NoneStep {
                goal: goal.to_owned(),
                plan: plan_idx,
                step,
            });
        } else if alphabet.lookup(name).is_none() {
            out.push(Violation::UnknownStep {
                goal: goal.to_owned(),
                plan: plan_idx,
                step,
                name: name.clone(),
            });
        }
        if step > 0 && plan.steps[step - 1] == *name {
            out.push(Violation::ConsecutiveDuplicate {
                goal: goal.to_owned(),
                plan: plan_idx,
                step,
                name: name.clone(),
            });
        }
    }
}

/// A plan with its steps resolved to alphabet indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledPlan {
    pub goal: usize,
    pub plan_index: usize,
    pub steps: Vec<ActivityClass>,
}

impl PlanLibrary {
    /// Serializes back to the library file format.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("library serializes to JSON")
    }

    pub fn goal_index(&self, name: &str) -> Option<usize> {
        self.goals.iter().position(|g| g.name == name)
    }

    pub fn goal_names(&self) -> impl Iterator<Item = &str> {
        self.goals.iter().map(|g| g.name.as_str())
    }

    pub fn plan_count(&self) -> usize {
        self.goals.iter().map(|g| g.plans.len()).sum()
    }

    /// Validates and resolves every plan, in declaration order.
    pub fn compile(&self) -> Result<Vec<CompiledPlan>, LibraryError> {
        let violations = validate_library(self);
        if !violations.is_empty() {
            return Err(LibraryError::Invalid(violations));
        }
        let mut out = Vec::with_capacity(self.plan_count());
        for (goal, g) in self.goals.iter().enumerate() {
            for (plan_index, plan) in g.plans.iter().enumerate() {
                let steps = plan
                    .steps
                    .iter()
                    .map(|s| self.alphabet.lookup(s).expect("validated step"))
                    .collect();
                out.push(CompiledPlan {
                    goal,
                    plan_index,
                    steps,
                });
            }
        }
        Ok(out)
    }
}
