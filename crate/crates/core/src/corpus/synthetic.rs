//! Seeded generator of policy-like labelled segments.
//!
//! Each practice has a small keyword list; a segment mixes keywords of its own
//! class with shared boilerplate and, with some probability, keywords of a
//! distractor class.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DataPractice, Dataset, Segment, NUM_PRACTICES};

pub const FILLER: &[&str] = &[
    "we", "our", "the", "and", "to", "of", "your", "information", "may", "this", "with", "for", "us", "you",
    "data", "services", "site", "or", "any", "in", "by", "such", "as", "other", "will",
];

pub fn keywords(p: DataPractice) -> &'static [&'static str] {
    use DataPractice::*;
    match p {
        FirstPartyCollectionUse => &["collect", "use", "email", "address", "name", "account", "purposes", "provide"],
        ThirdPartySharingCollection => &["third", "parties", "share", "party", "partners", "advertisers", "companies", "disclose"],
        UserChoiceControl => &["opt", "out", "cookies", "settings", "choose", "consent", "preferences", "unsubscribe"],
        UserAccessEditDeletion => &["access", "update", "delete", "edit", "correct", "profile", "request", "remove"],
        DataRetention => &["retain", "retention", "period", "stored", "long", "days", "disputes", "legal"],
        DataSecurity => &["security", "secure", "encryption", "unauthorized", "protect", "safeguards", "ssl", "breach"],
        PolicyChange => &["policy", "changes", "change", "notify", "revised", "effective", "modify", "posting"],
        DoNotTrack => &["dnt", "track", "signals", "browser", "tracking", "respond", "honor", "headers"],
        InternationalSpecificAudiences => &["california", "children", "residents", "european", "under", "minors", "eu", "shine"],
        Other => &["contact", "questions", "welcome", "introduction", "agreement", "terms", "inc", "website"],
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub policies: usize,
    pub segments_per_policy: (usize, usize),
    /// Relative class frequencies, indexed by practice index.
    pub class_weights: [f64; NUM_PRACTICES],
    pub tokens_per_segment: (usize, usize),
    /// Probability that a token is drawn from the segment's own keywords.
    pub keyword_rate: f64,
    /// Probability that a segment also contains keywords of another class.
    pub distractor_rate: f64,
}

impl Default for SyntheticSpec {
    /// Roughly the skew of the real corpus: collection and sharing dominate,
    /// retention and do-not-track are thin.
    fn default() -> Self {
        Self {
            policies: 12,
            segments_per_policy: (8, 16),
            class_weights: [0.26, 0.20, 0.09, 0.06, 0.03, 0.07, 0.04, 0.02, 0.06, 0.17],
            tokens_per_segment: (8, 24),
            keyword_rate: 0.3,
            distractor_rate: 0.3,
        }
    }
}

fn sample_class<R: Rng>(weights: &[f64; NUM_PRACTICES], rng: &mut R) -> DataPractice {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return DataPractice::ALL[i];
        }
        x -= w;
    }
    DataPractice::Other
}

pub fn synthetic_segment_text<R: Rng>(label: DataPractice, spec: &SyntheticSpec, rng: &mut R) -> String {
    let n = rng.gen_range(spec.tokens_per_segment.0..=spec.tokens_per_segment.1);
    let distractor = (rng.gen::<f64>() < spec.distractor_rate).then(|| *DataPractice::ALL.choose(rng).expect("non-empty"));
    let own = keywords(label);
    let mut words: Vec<&str> = Vec::with_capacity(n + 1);
    // at least one own keyword per segment
    words.push(own.choose(rng).expect("non-empty"));
    for _ in 1..n {
        let r = rng.gen::<f64>();
        let w = if r < spec.keyword_rate {
            own.choose(rng)
        } else if r < spec.keyword_rate * 1.4 && distractor.is_some() {
            keywords(distractor.expect("checked")).choose(rng)
        } else {
            FILLER.choose(rng)
        };
        words.push(w.expect("non-empty"));
    }
    words.shuffle(rng);
    let mut text = words.join(" ");
    if let Some(first) = text.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    text.push('.');
    text
}

/// Deterministic corpus of `spec.policies` policies.
pub fn synthetic_corpus(spec: &SyntheticSpec, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut segments = Vec::new();
    for p in 0..spec.policies {
        let policy_id = format!("synthetic_{p:03}");
        let n = rng.gen_range(spec.segments_per_policy.0..=spec.segments_per_policy.1);
        for segment_id in 0..n {
            let label = sample_class(&spec.class_weights, &mut rng);
            let text = synthetic_segment_text(label, spec, &mut rng);
            segments.push(Segment {
                policy_id: policy_id.clone(),
                segment_id,
                text,
                label,
            });
        }
    }
    Dataset::new(segments).expect("generator produces unique non-empty segments")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let spec = SyntheticSpec::default();
        assert_eq!(synthetic_corpus(&spec, 3), synthetic_corpus(&spec, 3));
        assert_ne!(synthetic_corpus(&spec, 3), synthetic_corpus(&spec, 4));
    }

    #[test]
    fn keyword_lists_are_distinct() {
        let mut all = std::collections::BTreeSet::new();
        for p in DataPractice::ALL {
            for k in keywords(p) {
                assert!(all.insert(*k), "{k} repeated");
                assert!(!FILLER.contains(k));
            }
        }
    }
}
