//! Per-frame label disambiguation and run collapsing.
//!
//! Each frame carries a probability vector aligned to the library alphabet.
//! The label of a frame is the argmax class, except when the two best
//! classes are closer than `theta` and one of them is the label given to the
//! previous frame: then the previous label is kept.

use std::borrow::Cow;

use thiserror::Error;

use crate::plan_library::{ActivityAlphabet, ActivityClass};

/// Allowed deviation of a probability vector's sum from 1.
pub const SUM_TOLERANCE: f64 = 1e-6;
/// Deviation from 1 that `normalize` will still rescale.
pub const NORMALIZE_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_THETA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    pub frame_id: u64,
    pub probs: Vec<f64>,
}

impl FrameObservation {
    pub fn new(frame_id: u64, probs: Vec<f64>) -> Self {
        Self { frame_id, probs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    theta: f64,
    /// Rescale vectors whose sum is within [`NORMALIZE_TOLERANCE`] of 1.
    pub normalize: bool,
}

impl SmoothingConfig {
    pub fn new(theta: f64) -> Result<Self, SmoothError> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(SmoothError::InvalidTheta(theta));
        }
        Ok(Self {
            theta,
            normalize: false,
        })
    }

    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            theta: DEFAULT_THETA,
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmoothError {
    #[error("theta must lie in [0, 1], got {0}")]
    InvalidTheta(f64),
    #[error("frame {frame}: expected {expected} probabilities, got {got}")]
    WrongLength {
        frame: u64,
        expected: usize,
        got: usize,
    },
    #[error("frame {frame}: probability {index} is {value}, outside [0, 1]")]
    OutOfRange {
        frame: u64,
        index: usize,
        value: f64,
    },
    #[error("frame {frame}: probabilities sum to {sum}")]
    BadSum { frame: u64, sum: f64 },
    #[error("frame {frame} does not follow frame {previous}")]
    NonMonotone { previous: u64, frame: u64 },
}

/// Checks a vector against the alphabet and returns it, rescaled when the
/// config allows and the sum needs it.
pub fn checked_probs<'a>(
    obs: &'a FrameObservation,
    alphabet_len: usize,
    cfg: &SmoothingConfig,
) -> Result<Cow<'a, [f64]>, SmoothError> {
    let frame = obs.frame_id;
    if obs.probs.len() != alphabet_len {
        return Err(SmoothError::WrongLength {
            frame,
            expected: alphabet_len,
            got: obs.probs.len(),
        });
    }
    for (index, &value) in obs.probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(SmoothError::OutOfRange {
                frame,
                index,
                value,
            });
        }
    }
    let sum: f64 = obs.probs.iter().sum();
    let deviation = (sum - 1.0).abs();
    if deviation <= SUM_TOLERANCE {
        Ok(Cow::Borrowed(&obs.probs))
    } else if cfg.normalize && deviation <= NORMALIZE_TOLERANCE {
        Ok(Cow::Owned(obs.probs.iter().map(|p| p / sum).collect()))
    } else {
        Err(SmoothError::BadSum { frame, sum })
    }
}

/// The best and second-best classes. Ties go to the earlier class.
/// `second` is `None` only for single-class alphabets.
pub fn top_two(probs: &[f64]) -> (usize, Option<usize>) {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    let mut second: Option<usize> = None;
    for (i, &p) in probs.iter().enumerate() {
        if i == best {
            continue;
        }
        match second {
            Some(s) if p <= probs[s] => {}
            _ => second = Some(i),
        }
    }
    (best, second)
}

/// Labels one frame.
pub fn smooth_frame(
    obs: &FrameObservation,
    prev: Option<ActivityClass>,
    cfg: &SmoothingConfig,
    alphabet: &ActivityAlphabet,
) -> Result<ActivityClass, SmoothError> {
    let probs = checked_probs(obs, alphabet.len(), cfg)?;
    let (best, second) = top_two(&probs);
    if let (Some(prev), Some(second)) = (prev, second) {
        let ambiguous = probs[best] - probs[second] < cfg.theta;
        if ambiguous && (prev.0 == best || prev.0 == second) {
            return Ok(prev);
        }
    }
    Ok(ActivityClass(best))
}

/// Incremental form of [`smooth_stream`] for live feeds.
#[derive(Debug, Clone)]
pub struct Smoother<'a> {
    alphabet: &'a ActivityAlphabet,
    cfg: SmoothingConfig,
    prev: Option<(u64, ActivityClass)>,
}

impl<'a> Smoother<'a> {
    pub fn new(alphabet: &'a ActivityAlphabet, cfg: SmoothingConfig) -> Self {
        Self {
            alphabet,
            cfg,
            prev: None,
        }
    }

    pub fn push(&mut self, obs: &FrameObservation) -> Result<ActivityClass, SmoothError> {
        if let Some((previous, _)) = self.prev {
            if obs.frame_id <= previous {
                return Err(SmoothError::NonMonotone {
                    previous,
                    frame: obs.frame_id,
                });
            }
        }
        let label = smooth_frame(obs, self.prev.map(|p| p.1), &self.cfg, self.alphabet)?;
        self.prev = Some((obs.frame_id, label));
        Ok(label)
    }
}

/// Labels every frame of a stream, threading each label into the next frame.
pub fn smooth_stream(
    stream: &[FrameObservation],
    cfg: &SmoothingConfig,
    alphabet: &ActivityAlphabet,
) -> Result<Vec<(u64, ActivityClass)>, SmoothError> {
    let mut smoother = Smoother::new(alphabet, *cfg);
    stream
        .iter()
        .map(|obs| smoother.push(obs).map(|label| (obs.frame_id, label)))
        .collect()
}

/// What to do with runs of the `none` class when collapsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NonePolicy {
    /// Drop `none` runs; equal labels on both sides of a pause merge.
    #[default]
    Skip,
    /// Treat `none` like any other class.
    Keep,
}

/// A maximal run of one label. `end_frame` is inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub label: ActivityClass,
    pub start_frame: u64,
    pub end_frame: u64,
}

/// Collapses a labeled stream into segments.
pub fn collapse_runs(
    labels: &[(u64, ActivityClass)],
    policy: NonePolicy,
    alphabet: &ActivityAlphabet,
) -> Vec<Segment> {
    let none = alphabet.none_class();
    let mut out: Vec<Segment> = Vec::new();
    for &(frame, label) in labels {
        if policy == NonePolicy::Skip && Some(label) == none {
            continue;
        }
        match out.last_mut() {
            Some(seg) if seg.label == label => seg.end_frame = frame,
            _ => out.push(Segment {
                label,
                start_frame: frame,
                end_frame: frame,
            }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const KSCGR: [&str; 9] = [
        "breaking",
        "mixing",
        "baking",
        "turning",
        "cutting",
        "boiling",
        "seasoning",
        "peeling",
        "none",
    ];

    fn alphabet() -> ActivityAlphabet {
        ActivityAlphabet::new(KSCGR)
    }

    fn class(name: &str) -> ActivityClass {
        alphabet().lookup(name).unwrap()
    }

    /// baking and mixing set explicitly, remaining mass spread evenly.
    fn vector(baking: f64, mixing: f64) -> Vec<f64> {
        let rest = (1.0 - baking - mixing) / 7.0;
        let mut v = vec![rest; 9];
        v[class("baking").0] = baking;
        v[class("mixing").0] = mixing;
        v
    }

    fn smooth(probs: Vec<f64>, prev: Option<&str>) -> &'static str {
        let a = alphabet();
        let label = smooth_frame(
            &FrameObservation::new(0, probs),
            prev.map(class),
            &SmoothingConfig::new(0.1).unwrap(),
            &a,
        )
        .unwrap();
        KSCGR[label.0]
    }

    #[test]
    fn clear_margin_is_argmax() {
        assert_eq!(smooth(vector(0.70, 0.20), Some("none")), "baking");
    }

    #[test]
    fn ambiguous_keeps_previous_in_top_two() {
        assert_eq!(smooth(vector(0.45, 0.40), Some("mixing")), "mixing");
    }

    #[test]
    fn ambiguous_with_outside_previous_is_argmax() {
        assert_eq!(smooth(vector(0.45, 0.40), Some("cutting")), "baking");
    }

    #[test]
    fn first_frame_is_argmax() {
        assert_eq!(smooth(vector(0.45, 0.40), None), "baking");
    }

    #[test]
    fn ties_break_by_alphabet_order() {
        assert_eq!(top_two(&[0.25, 0.25, 0.25, 0.25]), (0, Some(1)));
        assert_eq!(top_two(&[0.1, 0.3, 0.3, 0.3]), (1, Some(2)));
        assert_eq!(top_two(&[0.5, 0.1, 0.2, 0.2]), (0, Some(2)));
        assert_eq!(top_two(&[1.0]), (0, None));
    }

    #[test]
    fn rejects_malformed_vectors() {
        let a = alphabet();
        let cfg = SmoothingConfig::default();
        let short = FrameObservation::new(3, vec![1.0]);
        assert_eq!(
            smooth_frame(&short, None, &cfg, &a),
            Err(SmoothError::WrongLength {
                frame: 3,
                expected: 9,
                got: 1
            })
        );
        let mut negative = vector(0.7, 0.2);
        negative[0] = -0.01;
        assert!(matches!(
            smooth_frame(&FrameObservation::new(0, negative), None, &cfg, &a),
            Err(SmoothError::OutOfRange { index: 0, .. })
        ));
        let mut off = vector(0.7, 0.2);
        off[0] += 1e-4;
        assert!(matches!(
            smooth_frame(&FrameObservation::new(0, off), None, &cfg, &a),
            Err(SmoothError::BadSum { .. })
        ));
        assert!(SmoothingConfig::new(1.5).is_err());
        assert!(SmoothingConfig::new(f64::NAN).is_err());
    }

    #[test]
    fn normalize_rescales_small_drift_only() {
        let a = alphabet();
        let cfg = SmoothingConfig::default().with_normalize(true);
        let mut drift = vector(0.7, 0.2);
        drift[0] += 5e-4;
        let obs = FrameObservation::new(0, drift);
        let probs = checked_probs(&obs, 9, &cfg).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut far = vector(0.7, 0.2);
        far[0] += 0.01;
        assert!(smooth_frame(&FrameObservation::new(0, far), None, &cfg, &a).is_err());
    }

    #[test]
    fn stream_chains_previous_label() {
        let a = alphabet();
        let cfg = SmoothingConfig::new(0.1).unwrap();
        let stream = vec![
            FrameObservation::new(0, vector(0.1, 0.8)),
            FrameObservation::new(1, vector(0.45, 0.40)),
            FrameObservation::new(2, vector(0.8, 0.1)),
        ];
        let labels: Vec<_> = smooth_stream(&stream, &cfg, &a)
            .unwrap()
            .into_iter()
            .map(|(f, c)| (f, KSCGR[c.0]))
            .collect();
        assert_eq!(labels, vec![(0, "mixing"), (1, "mixing"), (2, "baking")]);
        assert!(smooth_stream(&[], &cfg, &a).unwrap().is_empty());
    }

    #[test]
    fn stream_rejects_non_monotone_frames() {
        let a = alphabet();
        let stream = vec![
            FrameObservation::new(5, vector(0.8, 0.1)),
            FrameObservation::new(5, vector(0.8, 0.1)),
        ];
        assert_eq!(
            smooth_stream(&stream, &SmoothingConfig::default(), &a),
            Err(SmoothError::NonMonotone {
                previous: 5,
                frame: 5
            })
        );
    }

    fn labels(names: &[&str]) -> Vec<(u64, ActivityClass)> {
        names
            .iter()
            .enumerate()
            .map(|(i, n)| (i as u64, class(n)))
            .collect()
    }

    fn seg(name: &str, start: u64, end: u64) -> Segment {
        Segment {
            label: class(name),
            start_frame: start,
            end_frame: end,
        }
    }

    #[test]
    fn collapse_examples() {
        let a = alphabet();
        assert_eq!(
            collapse_runs(&labels(&["baking"; 3]), NonePolicy::Skip, &a),
            vec![seg("baking", 0, 2)]
        );
        assert_eq!(
            collapse_runs(
                &labels(&["breaking", "breaking", "none", "mixing"]),
                NonePolicy::Skip,
                &a
            ),
            vec![seg("breaking", 0, 1), seg("mixing", 3, 3)]
        );
        assert_eq!(
            collapse_runs(&labels(&["baking", "none", "baking"]), NonePolicy::Skip, &a),
            vec![seg("baking", 0, 2)]
        );
        assert_eq!(
            collapse_runs(&labels(&["baking", "none", "baking"]), NonePolicy::Keep, &a),
            vec![seg("baking", 0, 0), seg("none", 1, 1), seg("baking", 2, 2)]
        );
        assert!(collapse_runs(&[], NonePolicy::Skip, &a).is_empty());
    }

    fn prob_vector() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 9).prop_filter_map("zero mass", |raw| {
            let sum: f64 = raw.iter().sum();
            (sum > 1e-9).then(|| raw.iter().map(|x| x / sum).collect())
        })
    }

    fn argmax(v: &[f64]) -> usize {
        // independent of top_two: last strictly-greater scan from the front
        let mut best = 0;
        for i in 0..v.len() {
            if v[i] > v[best] {
                best = i;
            }
        }
        best
    }

    proptest! {
        #[test]
        fn output_in_alphabet(v in prob_vector(), prev in prop::option::of(0usize..9), theta in 0.0f64..=1.0) {
            let a = alphabet();
            let cfg = SmoothingConfig::new(theta).unwrap();
            let got = smooth_frame(&FrameObservation::new(0, v), prev.map(ActivityClass), &cfg, &a).unwrap();
            prop_assert!(got.0 < a.len());
        }

        #[test]
        fn clear_margin_ignores_previous(v in prob_vector(), prev in 0usize..9, frac in 0.0f64..=1.0) {
            let a = alphabet();
            let mut sorted = v.clone();
            sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
            let theta = (sorted[0] - sorted[1]) * frac;
            let cfg = SmoothingConfig::new(theta).unwrap();
            let got = smooth_frame(&FrameObservation::new(0, v.clone()), Some(ActivityClass(prev)), &cfg, &a).unwrap();
            prop_assert_eq!(got.0, argmax(&v));
        }

        #[test]
        fn zero_theta_is_argmax(v in prob_vector(), prev in prop::option::of(0usize..9)) {
            let a = alphabet();
            let cfg = SmoothingConfig::new(0.0).unwrap();
            let got = smooth_frame(&FrameObservation::new(0, v.clone()), prev.map(ActivityClass), &cfg, &a).unwrap();
            prop_assert_eq!(got.0, argmax(&v));
        }

        #[test]
        fn collapse_never_repeats_and_is_idempotent(
            raw in prop::collection::vec(0usize..9, 0..60),
            keep in any::<bool>(),
        ) {
            let a = alphabet();
            let policy = if keep { NonePolicy::Keep } else { NonePolicy::Skip };
            let input: Vec<_> = raw.iter().enumerate().map(|(i, &c)| (i as u64, ActivityClass(c))).collect();
            let segs = collapse_runs(&input, policy, &a);
            for pair in segs.windows(2) {
                prop_assert_ne!(pair[0].label, pair[1].label);
                prop_assert!(pair[0].end_frame < pair[1].start_frame);
            }
            for s in &segs {
                prop_assert!(s.start_frame <= s.end_frame);
            }
            let expanded: Vec<_> = segs.iter().enumerate().map(|(i, s)| (i as u64, s.label)).collect();
            let again = collapse_runs(&expanded, policy, &a);
            let before: Vec<_> = segs.iter().map(|s| s.label).collect();
            let after: Vec<_> = again.iter().map(|s| s.label).collect();
            prop_assert_eq!(before, after);
        }
    }
}
