#![allow(dead_code)]

use planrec::plan_library::{ActivityAlphabet, Goal, Plan, PlanLibrary};
use rand_chacha::rand_core::RngCore;
use rand_chacha::ChaCha8Rng;

pub fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

pub fn chance(rng: &mut ChaCha8Rng, p: f64) -> bool {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 <= p
}

/// Activity names of a library, excluding `none`.
pub fn activities(lib: &PlanLibrary) -> Vec<String> {
    lib.alphabet
        .classes()
        .iter()
        .filter(|c| *c != "none")
        .cloned()
        .collect()
}

/// A sequence of `len` picks from `pool` with no two equal neighbours.
fn collapsed_sequence(
    rng: &mut ChaCha8Rng,
    pool: &[String],
    len: usize,
    after: Option<&str>,
) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(len);
    while out.len() < len {
        let pick = &pool[below(rng, pool.len())];
        let prev = out.last().map(String::as_str).or(after);
        if pool.len() == 1 && prev == Some(pick.as_str()) {
            break;
        }
        if prev != Some(pick.as_str()) {
            out.push(pick.clone());
        }
    }
    out
}

/// Random valid library: at most 5 goals, 4 plans per goal, 6 steps per
/// plan and 9 classes (one of which may be `none`).
pub fn random_library(rng: &mut ChaCha8Rng) -> PlanLibrary {
    let with_none = chance(rng, 0.5);
    let activity_count = 2 + below(rng, if with_none { 7 } else { 8 });
    let mut classes: Vec<String> = (0..activity_count).map(|i| format!("act{i}")).collect();
    if with_none {
        let at = below(rng, classes.len() + 1);
        classes.insert(at, "none".into());
    }
    let pool: Vec<String> = classes.iter().filter(|c| *c != "none").cloned().collect();
    let goal_count = 1 + below(rng, 5);
    let mut goals: Vec<Goal> = Vec::new();
    for g in 0..goal_count {
        let plan_count = 1 + below(rng, 4);
        let mut plans = Vec::new();
        for _ in 0..plan_count {
            // share prefixes with earlier plans often, to make ambiguity common
            let existing: Vec<&Plan> = goals.iter().flat_map(|g| &g.plans).chain(&plans).collect();
            let len = 1 + below(rng, 6);
            let steps = if !existing.is_empty() && chance(rng, 0.5) {
                let base = existing[below(rng, existing.len())];
                let keep = below(rng, base.len() + 1).min(len);
                let mut steps = base.steps[..keep].to_vec();
                let tail =
                    collapsed_sequence(rng, &pool, len - keep, steps.last().map(String::as_str));
                steps.extend(tail);
                steps
            } else {
                collapsed_sequence(rng, &pool, len, None)
            };
            if steps.is_empty() {
                plans.push(Plan::new([pool[0].clone()]));
            } else {
                plans.push(Plan { steps });
            }
        }
        goals.push(Goal {
            name: format!("goal{g}"),
            plans,
        });
    }
    PlanLibrary {
        alphabet: ActivityAlphabet::new(classes),
        goals,
    }
}

/// Random collapsed segment sequence of length at most `max_len`, half the
/// time starting along one of the library's plans.
pub fn random_segments(rng: &mut ChaCha8Rng, lib: &PlanLibrary, max_len: usize) -> Vec<String> {
    let pool = activities(lib);
    let len = below(rng, max_len + 1);
    let mut out = Vec::new();
    if chance(rng, 0.5) {
        let plans: Vec<&Plan> = lib.goals.iter().flat_map(|g| &g.plans).collect();
        let plan = plans[below(rng, plans.len())];
        let keep = below(rng, plan.len() + 1).min(len);
        out.extend(plan.steps[..keep].iter().cloned());
    }
    let tail = collapsed_sequence(rng, &pool, len - out.len(), out.last().map(String::as_str));
    out.extend(tail);
    out
}
