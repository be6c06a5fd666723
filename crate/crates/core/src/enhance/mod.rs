//! Caption enrichment from motion: read body direction, head orientation and
//! hand placement off the skeleton every few frames, turn them into words, and
//! append templated clauses to the original caption.

mod extract;
mod vocab;

pub use extract::{extract_head, hand_offset, torso_normal, translate_body, translate_hand, translate_head, ExtractorFrame};
pub use vocab::{BodyPart, StatusWord, COMPASS, HAND, HAND_SECTORS, HEAD};

use crate::error::{invalid, Result};
use crate::geometry::horizontal_azimuth;
use crate::motion::GlobalJoints;
use crate::skeleton::SkeletonMap;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Most statuses rendered per part after merging.
pub const MAX_STATUSES_PER_PART: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslatorConfig {
    /// Cosine threshold of the forward head cone.
    pub mu: f64,
    /// Horizontal/vertical deadzone on the normalized head direction.
    pub deadzone: f64,
    /// Keep every n-th frame.
    pub downsample: usize,
}

impl Default for TranslatorConfig {
    fn default() -> Self {
        Self { mu: 0.85, deadzone: 0.15, downsample: 10 }
    }
}

impl TranslatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(invalid(format!("mu must lie in (0,1), got {}", self.mu)));
        }
        if !(self.deadzone >= 0.0 && self.deadzone < self.mu) {
            return Err(invalid(format!("deadzone must lie in [0, mu), got {}", self.deadzone)));
        }
        if self.downsample == 0 {
            return Err(invalid("downsample factor must be at least 1"));
        }
        Ok(())
    }
}

/// Status words per body part, one per kept frame (or merged, depending on use).
pub type PartStatuses = BTreeMap<BodyPart, Vec<StatusWord>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusTimeline {
    /// Source frame index of every kept frame.
    pub frames: Vec<usize>,
    pub parts: PartStatuses,
}

impl StatusTimeline {
    pub fn part(&self, part: BodyPart) -> &[StatusWord] {
        self.parts.get(&part).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Consecutive duplicates merged, per part.
    pub fn merged(&self) -> PartStatuses {
        self.parts.iter().map(|(p, w)| (*p, merge_duplicates(w))).collect()
    }
}

/// Indices of the frames kept by down-sampling.
pub fn kept_frames(n_frames: usize, factor: usize) -> Vec<usize> {
    (0..n_frames).step_by(factor.max(1)).collect()
}

/// Classifies every kept frame for all four parts.
pub fn status_timeline(joints: &GlobalJoints, skel: &SkeletonMap, cfg: &TranslatorConfig) -> Result<StatusTimeline> {
    cfg.validate()?;
    skel.validate(joints.joint_count())?;
    let frames = kept_frames(joints.n_frames(), cfg.downsample);
    let mut parts: PartStatuses = BodyPart::ALL.iter().map(|p| (*p, Vec::with_capacity(frames.len()))).collect();
    let mut prev_body = StatusWord::North;
    let mut prev_yaw = 0.0;
    for &i in &frames {
        let ex = extract_head(joints, skel, i)?;
        let body = translate_body(&ex.torso).unwrap_or(prev_body);
        prev_body = body;
        let yaw = horizontal_azimuth(&ex.torso).unwrap_or(prev_yaw);
        prev_yaw = yaw;
        let head = translate_head(&ex.relative, cfg);
        let (lo, lr) = hand_offset(joints, skel, i, true, yaw);
        let (ro, rr) = hand_offset(joints, skel, i, false, yaw);
        for (part, word) in [
            (BodyPart::BodyDirection, body),
            (BodyPart::Head, head),
            (BodyPart::LeftHand, translate_hand(&lo, lr)),
            (BodyPart::RightHand, translate_hand(&ro, rr)),
        ] {
            parts.get_mut(&part).expect("all parts present").push(word);
        }
    }
    Ok(StatusTimeline { frames, parts })
}

pub fn merge_duplicates(words: &[StatusWord]) -> Vec<StatusWord> {
    let mut out = words.to_vec();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancedCaption {
    pub original: String,
    /// Merged (and truncated) statuses that were rendered.
    pub parts: PartStatuses,
    pub text: String,
}

fn render(part: BodyPart, words: &[StatusWord]) -> String {
    let mut s = String::new();
    for (k, w) in words.iter().enumerate() {
        match (part, k) {
            (BodyPart::BodyDirection, 0) => s.push_str(&format!("the person faces {w}")),
            (BodyPart::BodyDirection, 1) => s.push_str(&format!(", then turns to {w}")),
            (BodyPart::Head, 0) => s.push_str(&format!("the head points {w}")),
            (BodyPart::LeftHand | BodyPart::RightHand, 0) => {
                let side = if part == BodyPart::LeftHand { "left" } else { "right" };
                if *w == StatusWord::RaiseUp {
                    s.push_str(&format!("the {side} hand raises up"));
                } else {
                    s.push_str(&format!("the {side} hand stays at the {w}"));
                }
            }
            (_, _) if *w == StatusWord::RaiseUp => s.push_str(", then raises up"),
            _ => s.push_str(&format!(", then {w}")),
        }
    }
    s
}

/// Appends one clause per part (body, head, left hand, right hand order) to
/// the caption. Each part's statuses are merged and cut to the first
/// [`MAX_STATUSES_PER_PART`].
pub fn combine(original: &str, statuses: &PartStatuses) -> Result<EnhancedCaption> {
    let base = original.trim_end().trim_end_matches('.');
    if base.trim().is_empty() {
        return Err(invalid("original caption is empty"));
    }
    let mut parts = PartStatuses::new();
    let mut clauses = Vec::new();
    for part in BodyPart::ALL {
        let Some(words) = statuses.get(&part) else { continue };
        let mut merged = merge_duplicates(words);
        merged.truncate(MAX_STATUSES_PER_PART);
        if merged.is_empty() {
            continue;
        }
        if let Some(bad) = merged.iter().find(|w| !part.accepts(**w)) {
            return Err(invalid(format!("'{bad}' is not a {} status", part.name())));
        }
        clauses.push(render(part, &merged));
        parts.insert(part, merged);
    }
    let text = if clauses.is_empty() {
        original.to_string()
    } else {
        format!("{base}. {}.", clauses.join(". "))
    };
    Ok(EnhancedCaption { original: original.to_string(), parts, text })
}

/// Reads status clauses back out of a caption rendered by [`combine`].
/// Text without such clauses yields an empty map.
pub fn parse_statuses(text: &str) -> PartStatuses {
    let mut out = PartStatuses::new();
    for clause in text.split('.').map(str::trim) {
        let (part, rest) = if let Some(r) = clause.strip_prefix("the person faces ") {
            (BodyPart::BodyDirection, r)
        } else if let Some(r) = clause.strip_prefix("the head points ") {
            (BodyPart::Head, r)
        } else if let Some(r) = clause.strip_prefix("the left hand ") {
            (BodyPart::LeftHand, r)
        } else if let Some(r) = clause.strip_prefix("the right hand ") {
            (BodyPart::RightHand, r)
        } else {
            continue;
        };
        let words: Vec<StatusWord> = rest
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
            .filter_map(|tok| match tok {
                "raises" => Some(StatusWord::RaiseUp),
                _ => part.vocabulary().iter().copied().find(|w| w.as_str() == tok && *w != StatusWord::RaiseUp),
            })
            .collect();
        if !words.is_empty() {
            out.entry(part).or_default().extend(words);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use StatusWord::*;

    fn one(part: BodyPart, w: Vec<StatusWord>) -> PartStatuses {
        [(part, w)].into_iter().collect()
    }

    #[test]
    fn parse_inverts_combine() {
        let s: PartStatuses = [
            (BodyPart::BodyDirection, vec![East, North]),
            (BodyPart::Head, vec![UpLeft]),
            (BodyPart::LeftHand, vec![Front, RaiseUp, BackLeft]),
            (BodyPart::RightHand, vec![RaiseUp, Right]),
        ]
        .into_iter()
        .collect();
        let c = combine("a person walks.", &s).unwrap();
        assert_eq!(parse_statuses(&c.text), s);
        assert!(parse_statuses("a person walks").is_empty());
    }

    #[test]
    fn turn_template() {
        let c = combine("a person walks", &one(BodyPart::BodyDirection, vec![East, East, East, North, North])).unwrap();
        assert_eq!(c.text, "a person walks. the person faces east, then turns to north.");
        assert_eq!(c.parts[&BodyPart::BodyDirection], vec![East, North]);
    }

    #[test]
    fn constant_parts() {
        let s: PartStatuses = [
            (BodyPart::BodyDirection, vec![East; 3]),
            (BodyPart::Head, vec![Forward; 3]),
            (BodyPart::LeftHand, vec![Front; 3]),
        ]
        .into_iter()
        .collect();
        let c = combine("X", &s).unwrap();
        assert_eq!(c.text, "X. the person faces east. the head points forward. the left hand stays at the front.");
    }

    #[test]
    fn truncates_to_four() {
        let c = combine("X", &one(BodyPart::BodyDirection, vec![East, North, West, South, East, North])).unwrap();
        assert_eq!(c.parts[&BodyPart::BodyDirection].len(), 4);
        assert_eq!(c.text, "X. the person faces east, then turns to north, then west, then south.");
    }

    #[test]
    fn hand_and_head_sequences() {
        let c = combine("a person stands.", &one(BodyPart::RightHand, vec![Front, RaiseUp, Back])).unwrap();
        assert_eq!(c.text, "a person stands. the right hand stays at the front, then raises up, then back.");
        assert!(c.text.starts_with("a person stands."));
        let c = combine("Y", &one(BodyPart::LeftHand, vec![RaiseUp])).unwrap();
        assert_eq!(c.text, "Y. the left hand raises up.");
        let c = combine("Y", &one(BodyPart::Head, vec![Forward, UpLeft])).unwrap();
        assert_eq!(c.text, "Y. the head points forward, then up-left.");
    }

    #[test]
    fn rejects_foreign_words_and_empty_text() {
        assert!(combine("X", &one(BodyPart::Head, vec![East])).is_err());
        assert!(combine("  ", &PartStatuses::new()).is_err());
    }

    #[test]
    fn kept_frame_indices() {
        assert_eq!(kept_frames(45, 10), vec![0, 10, 20, 30, 40]);
        assert_eq!(kept_frames(1, 10), vec![0]);
    }

    #[test]
    fn config_bounds() {
        assert!(TranslatorConfig::default().validate().is_ok());
        assert!(TranslatorConfig { mu: 1.0, ..Default::default() }.validate().is_err());
        assert!(TranslatorConfig { deadzone: 0.9, ..Default::default() }.validate().is_err());
    }
}
