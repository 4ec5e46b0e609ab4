//! Q&A corpora and the directed context-target samples built from them.
//!
//! A corpus is line-delimited JSON, one Q&A pair per line:
//!
//! ```text
//! {"pair_id":"p1","question":"...","answer":"...","q_role":0,"a_role":1}
//! ```
//!
//! Every pair yields two samples: the question classified with the answer as
//! context, and the answer classified with the question as context.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::percentile_sorted;

pub const NUM_ROLES: usize = 5;

/// Participant role of one comment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct RoleLabel(u8);

impl RoleLabel {
    pub const HARASSER: RoleLabel = RoleLabel(0);
    pub const VICTIM: RoleLabel = RoleLabel(1);
    pub const BYSTANDER_DEFENDER: RoleLabel = RoleLabel(2);
    pub const BYSTANDER_ASSISTANT: RoleLabel = RoleLabel(3);
    pub const BYSTANDER_OTHER: RoleLabel = RoleLabel(4);

    pub const ALL: [RoleLabel; NUM_ROLES] = [
        Self::HARASSER,
        Self::VICTIM,
        Self::BYSTANDER_DEFENDER,
        Self::BYSTANDER_ASSISTANT,
        Self::BYSTANDER_OTHER,
    ];

    pub fn new(value: i64) -> Result<Self> {
        if (0..NUM_ROLES as i64).contains(&value) {
            Ok(RoleLabel(value as u8))
        } else {
            Err(Error::Validation(format!(
                "role {value} outside [0, {}]",
                NUM_ROLES - 1
            )))
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        match self.0 {
            0 => "harasser",
            1 => "victim",
            2 => "bystander-defender",
            3 => "bystander-assistant",
            _ => "bystander-other",
        }
    }
}

impl TryFrom<u8> for RoleLabel {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        RoleLabel::new(value as i64)
    }
}

impl TryFrom<usize> for RoleLabel {
    type Error = Error;

    fn try_from(value: usize) -> Result<Self> {
        RoleLabel::new(value as i64)
    }
}

impl From<RoleLabel> for u8 {
    fn from(label: RoleLabel) -> u8 {
        label.0
    }
}

impl fmt::Display for RoleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub pair_id: String,
    pub question: String,
    pub answer: String,
    pub q_role: RoleLabel,
    pub a_role: RoleLabel,
}

#[derive(Deserialize)]
struct RawRecord {
    pair_id: String,
    question: String,
    answer: String,
    q_role: i64,
    a_role: i64,
}

/// Parses a line-delimited corpus. Blank lines are skipped.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<QaPair>> {
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let q_role = RoleLabel::new(raw.q_role)
            .map_err(|e| Error::Validation(format!("line {line_no}: q_role: {e}")))?;
        let a_role = RoleLabel::new(raw.a_role)
            .map_err(|e| Error::Validation(format!("line {line_no}: a_role: {e}")))?;
        if !seen.insert(raw.pair_id.clone()) {
            return Err(Error::Validation(format!(
                "line {line_no}: duplicate pair_id `{}`",
                raw.pair_id
            )));
        }
        pairs.push(QaPair {
            pair_id: raw.pair_id,
            question: raw.question,
            answer: raw.answer,
            q_role,
            a_role,
        });
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    QuestionAsTarget,
    AnswerAsTarget,
}

impl Direction {
    pub fn target_suffix(self) -> &'static str {
        match self {
            Direction::QuestionAsTarget => ":q",
            Direction::AnswerAsTarget => ":a",
        }
    }

    pub fn context_suffix(self) -> &'static str {
        match self {
            Direction::QuestionAsTarget => ":a",
            Direction::AnswerAsTarget => ":q",
        }
    }
}

/// One directed sample. `sample_id` doubles as the target comment id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextTargetSample {
    pub sample_id: String,
    pub pair_id: String,
    pub target_text: String,
    pub context_text: String,
    pub label: RoleLabel,
    pub direction: Direction,
}

impl ContextTargetSample {
    pub fn target_id(&self) -> &str {
        &self.sample_id
    }

    pub fn context_id(&self) -> String {
        format!("{}{}", self.pair_id, self.direction.context_suffix())
    }
}

pub fn comment_id(pair_id: &str, direction: Direction) -> String {
    format!("{pair_id}{}", direction.target_suffix())
}

pub fn to_context_target(pairs: &[QaPair]) -> Vec<ContextTargetSample> {
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for p in pairs {
        out.push(ContextTargetSample {
            sample_id: comment_id(&p.pair_id, Direction::QuestionAsTarget),
            pair_id: p.pair_id.clone(),
            target_text: p.question.clone(),
            context_text: p.answer.clone(),
            label: p.q_role,
            direction: Direction::QuestionAsTarget,
        });
        out.push(ContextTargetSample {
            sample_id: comment_id(&p.pair_id, Direction::AnswerAsTarget),
            pair_id: p.pair_id.clone(),
            target_text: p.answer.clone(),
            context_text: p.question.clone(),
            label: p.a_role,
            direction: Direction::AnswerAsTarget,
        });
    }
    out
}

/// What the cap in [`subsample_class`] counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapUnit {
    /// Directed samples carrying the label.
    #[default]
    Samples,
    /// Source pairs with at least one comment carrying the label; all such
    /// samples of a selected pair are kept.
    Pairs,
}

/// Reduces the samples of `label` to at most `cap` units, chosen uniformly
/// without replacement. Everything else passes through in order.
pub fn subsample_class(
    samples: &[ContextTargetSample],
    label: RoleLabel,
    cap: usize,
    unit: CapUnit,
    seed: u64,
) -> Vec<ContextTargetSample> {
    // unit keys in first-appearance order
    let mut keys: Vec<&str> = Vec::new();
    let mut seen = HashSet::new();
    for s in samples.iter().filter(|s| s.label == label) {
        let key = match unit {
            CapUnit::Samples => s.sample_id.as_str(),
            CapUnit::Pairs => s.pair_id.as_str(),
        };
        if seen.insert(key) {
            keys.push(key);
        }
    }
    if keys.len() <= cap {
        return samples.to_vec();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chosen, _) = keys.partial_shuffle(&mut rng, cap);
    let keep: HashSet<&str> = chosen.iter().copied().collect();

    samples
        .iter()
        .filter(|s| {
            if s.label != label {
                return true;
            }
            let key = match unit {
                CapUnit::Samples => s.sample_id.as_str(),
                CapUnit::Pairs => s.pair_id.as_str(),
            };
            keep.contains(key)
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub label: RoleLabel,
    pub count: usize,
    pub share: f64,
    pub median_tokens: f64,
    /// 99th percentile, rounded up; usable as a truncation length.
    pub p99_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub classes: Vec<ClassRow>,
    pub total: usize,
    pub overall_median_tokens: f64,
    pub overall_p99_tokens: usize,
}

fn length_summary(lengths: &mut [f64]) -> (f64, usize) {
    if lengths.is_empty() {
        return (0.0, 0);
    }
    lengths.sort_by(f64::total_cmp);
    let median = percentile_sorted(lengths, 50.0);
    let p99 = percentile_sorted(lengths, 99.0).ceil() as usize;
    (median, p99)
}

/// Per-class counts and target-length statistics. Classes with no samples
/// are reported with zero count and zero lengths.
pub fn class_stats<F>(samples: &[ContextTargetSample], tokenizer: F) -> Result<ClassStats>
where
    F: Fn(&str) -> Vec<String>,
{
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "class statistics of an empty sample list".into(),
        ));
    }
    let mut per_class: Vec<Vec<f64>> = vec![Vec::new(); NUM_ROLES];
    for s in samples {
        per_class[s.label.index()].push(tokenizer(&s.target_text).len() as f64);
    }
    let total = samples.len();
    let mut all: Vec<f64> = per_class.iter().flatten().copied().collect();
    let (overall_median_tokens, overall_p99_tokens) = length_summary(&mut all);

    let classes = RoleLabel::ALL
        .iter()
        .zip(per_class.iter_mut())
        .map(|(&label, lengths)| {
            let count = lengths.len();
            let (median_tokens, p99_tokens) = length_summary(lengths);
            ClassRow {
                label,
                count,
                share: count as f64 / total as f64,
                median_tokens,
                p99_tokens,
            }
        })
        .collect();

    Ok(ClassStats {
        classes,
        total,
        overall_median_tokens,
        overall_p99_tokens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, q: i64, a: i64) -> QaPair {
        QaPair {
            pair_id: id.into(),
            question: format!("{id} question"),
            answer: format!("{id} answer"),
            q_role: RoleLabel::new(q).unwrap(),
            a_role: RoleLabel::new(a).unwrap(),
        }
    }

    fn words(text: &str) -> Vec<String> {
        text.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn parses_single_record() {
        let input = r#"{"pair_id":"p1","question":"hi","answer":"hello","q_role":4,"a_role":4}"#;
        let pairs = parse_corpus(input.as_bytes()).unwrap();
        assert_eq!(
            pairs,
            vec![QaPair {
                pair_id: "p1".into(),
                question: "hi".into(),
                answer: "hello".into(),
                q_role: RoleLabel::BYSTANDER_OTHER,
                a_role: RoleLabel::BYSTANDER_OTHER,
            }]
        );
    }

    #[test]
    fn out_of_range_role_is_validation_error() {
        let input = r#"{"pair_id":"p1","question":"hi","answer":"hello","q_role":4,"a_role":7}"#;
        assert!(matches!(
            parse_corpus(input.as_bytes()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn malformed_line_names_line_number() {
        let input = "{\"pair_id\":\"p1\",\"question\":\"\",\"answer\":\"\",\"q_role\":0,\"a_role\":1}\nnot json\n";
        match parse_corpus(input.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_pair_id_rejected() {
        let line = r#"{"pair_id":"p1","question":"","answer":"","q_role":0,"a_role":1}"#;
        let input = format!("{line}\n{line}\n");
        assert!(matches!(
            parse_corpus(input.as_bytes()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn empty_stream_is_empty_corpus() {
        assert!(parse_corpus("".as_bytes()).unwrap().is_empty());
        assert!(to_context_target(&[]).is_empty());
    }

    #[test]
    fn one_pair_gives_two_swapped_samples() {
        let samples = to_context_target(&[pair("p", 0, 1)]);
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].label, RoleLabel::HARASSER);
        assert_eq!(samples[0].target_text, "p question");
        assert_eq!(samples[0].context_text, "p answer");
        assert_eq!(samples[0].sample_id, "p:q");
        assert_eq!(samples[0].context_id(), "p:a");
        assert_eq!(samples[1].label, RoleLabel::VICTIM);
        assert_eq!(samples[1].target_text, samples[0].context_text);
        assert_eq!(samples[1].context_text, samples[0].target_text);
    }

    #[test]
    fn cap_above_count_is_noop() {
        let samples = to_context_target(&[pair("a", 4, 4), pair("b", 0, 4)]);
        let out = subsample_class(&samples, RoleLabel::BYSTANDER_OTHER, 3, CapUnit::Samples, 1);
        assert_eq!(out, samples);
    }

    #[test]
    fn subsample_is_seeded() {
        let pairs: Vec<_> = (0..50).map(|i| pair(&format!("p{i}"), 4, 4)).collect();
        let samples = to_context_target(&pairs);
        let a = subsample_class(&samples, RoleLabel::BYSTANDER_OTHER, 10, CapUnit::Samples, 9);
        let b = subsample_class(&samples, RoleLabel::BYSTANDER_OTHER, 10, CapUnit::Samples, 9);
        let c = subsample_class(&samples, RoleLabel::BYSTANDER_OTHER, 10, CapUnit::Samples, 10);
        assert_eq!(a.len(), 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn pair_unit_keeps_whole_pairs() {
        let pairs: Vec<_> = (0..20).map(|i| pair(&format!("p{i}"), 4, 4)).collect();
        let samples = to_context_target(&pairs);
        let out = subsample_class(&samples, RoleLabel::BYSTANDER_OTHER, 5, CapUnit::Pairs, 3);
        assert_eq!(out.len(), 10);
        let ids: HashSet<_> = out.iter().map(|s| s.pair_id.clone()).collect();
        assert_eq!(ids.len(), 5);
    }

    #[test]
    fn stats_of_constant_lengths() {
        let samples: Vec<_> = (0..3)
            .map(|i| ContextTargetSample {
                sample_id: format!("s{i}:q"),
                pair_id: format!("s{i}"),
                target_text: "two words".into(),
                context_text: String::new(),
                label: RoleLabel::VICTIM,
                direction: Direction::QuestionAsTarget,
            })
            .collect();
        let stats = class_stats(&samples, words).unwrap();
        let victim = &stats.classes[1];
        assert_eq!(victim.count, 3);
        assert_eq!(victim.median_tokens, 2.0);
        assert_eq!(victim.p99_tokens, 2);
        assert_eq!(stats.total, 3);
        assert_eq!(stats.classes[0].count, 0);
    }

    #[test]
    fn stats_rejects_empty() {
        assert!(class_stats(&[], words).is_err());
    }

    #[test]
    fn empty_text_has_zero_tokens() {
        let samples = to_context_target(&[QaPair {
            pair_id: "e".into(),
            question: String::new(),
            answer: "x".into(),
            q_role: RoleLabel::HARASSER,
            a_role: RoleLabel::HARASSER,
        }]);
        let stats = class_stats(&samples, words).unwrap();
        assert_eq!(stats.classes[0].median_tokens, 0.5);
    }
}
