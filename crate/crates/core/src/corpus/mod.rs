//! Policy segments, their data-practice labels, and stratified folds.

mod canonical;
mod folds;
mod opp115;
pub mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use canonical::{load_canonical, save_canonical, PolicyRecord, SegmentRecord};
pub use folds::{stratified_folds, FoldAssignment};
pub use opp115::{load_opp115, IngestReport};

/// The ten OPP-115 data-practice categories, in their conventional order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DataPractice {
    FirstPartyCollectionUse,
    ThirdPartySharingCollection,
    UserChoiceControl,
    UserAccessEditDeletion,
    DataRetention,
    DataSecurity,
    PolicyChange,
    DoNotTrack,
    InternationalSpecificAudiences,
    Other,
}

pub const NUM_PRACTICES: usize = 10;

impl DataPractice {
    pub const ALL: [DataPractice; NUM_PRACTICES] = [
        DataPractice::FirstPartyCollectionUse,
        DataPractice::ThirdPartySharingCollection,
        DataPractice::UserChoiceControl,
        DataPractice::UserAccessEditDeletion,
        DataPractice::DataRetention,
        DataPractice::DataSecurity,
        DataPractice::PolicyChange,
        DataPractice::DoNotTrack,
        DataPractice::InternationalSpecificAudiences,
        DataPractice::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Category name as written in the OPP-115 annotation tables.
    pub fn as_str(self) -> &'static str {
        match self {
            DataPractice::FirstPartyCollectionUse => "First Party Collection/Use",
            DataPractice::ThirdPartySharingCollection => "Third Party Sharing/Collection",
            DataPractice::UserChoiceControl => "User Choice/Control",
            DataPractice::UserAccessEditDeletion => "User Access, Edit and Deletion",
            DataPractice::DataRetention => "Data Retention",
            DataPractice::DataSecurity => "Data Security",
            DataPractice::PolicyChange => "Policy Change",
            DataPractice::DoNotTrack => "Do Not Track",
            DataPractice::InternationalSpecificAudiences => "International and Specific Audiences",
            DataPractice::Other => "Other",
        }
    }

    fn variant_name(self) -> &'static str {
        match self {
            DataPractice::FirstPartyCollectionUse => "FirstPartyCollectionUse",
            DataPractice::ThirdPartySharingCollection => "ThirdPartySharingCollection",
            DataPractice::UserChoiceControl => "UserChoiceControl",
            DataPractice::UserAccessEditDeletion => "UserAccessEditDeletion",
            DataPractice::DataRetention => "DataRetention",
            DataPractice::DataSecurity => "DataSecurity",
            DataPractice::PolicyChange => "PolicyChange",
            DataPractice::DoNotTrack => "DoNotTrack",
            DataPractice::InternationalSpecificAudiences => "InternationalSpecificAudiences",
            DataPractice::Other => "Other",
        }
    }
}

impl fmt::Display for DataPractice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataPractice {
    type Err = Error;

    /// Accepts the canonical name or the CamelCase identifier.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        DataPractice::ALL
            .into_iter()
            .find(|p| p.as_str() == s || p.variant_name() == s)
            .ok_or_else(|| Error::Data(format!("unknown data practice {s:?}")))
    }
}

impl Serialize for DataPractice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DataPractice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One labelled, self-contained block of a policy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub policy_id: String,
    pub segment_id: usize,
    pub text: String,
    pub label: DataPractice,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SegmentKey {
    pub policy_id: String,
    pub segment_id: usize,
}

impl Segment {
    pub fn key(&self) -> SegmentKey {
        SegmentKey {
            policy_id: self.policy_id.clone(),
            segment_id: self.segment_id,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub segments: Vec<Segment>,
    pub policies: BTreeSet<String>,
}

impl Dataset {
    /// Builds a dataset, checking non-empty text and key uniqueness.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &segments {
            if s.text.trim().is_empty() {
                return Err(Error::Data(format!(
                    "policy {} segment {} has empty text",
                    s.policy_id, s.segment_id
                )));
            }
            if !seen.insert((s.policy_id.as_str(), s.segment_id)) {
                return Err(Error::Data(format!(
                    "duplicate segment ({}, {})",
                    s.policy_id, s.segment_id
                )));
            }
        }
        let policies = segments.iter().map(|s| s.policy_id.clone()).collect();
        Ok(Self { segments, policies })
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn labels(&self) -> Vec<DataPractice> {
        self.segments.iter().map(|s| s.label).collect()
    }

    /// Sub-dataset with the segments at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let segments: Vec<Segment> = indices.iter().map(|&i| self.segments[i].clone()).collect();
        let policies = segments.iter().map(|s| s.policy_id.clone()).collect();
        Dataset { segments, policies }
    }

    /// Segments of one policy, ordered by segment id.
    pub fn policy_segments(&self, policy_id: &str) -> Vec<&Segment> {
        let mut v: Vec<&Segment> = self.segments.iter().filter(|s| s.policy_id == policy_id).collect();
        v.sort_by_key(|s| s.segment_id);
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schema {
    CanonicalJson,
    Opp115Raw,
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical-json" => Ok(Schema::CanonicalJson),
            "opp115-raw" => Ok(Schema::Opp115Raw),
            other => Err(Error::Config(format!(
                "unknown corpus schema {other:?} (expected canonical-json or opp115-raw)"
            ))),
        }
    }
}

/// Loads a corpus tree in either supported layout.
pub fn load_corpus(root: &Path, schema: Schema) -> Result<Dataset> {
    if !root.exists() {
        return Err(Error::MissingFile(root.to_path_buf()));
    }
    match schema {
        Schema::CanonicalJson => load_canonical(root),
        Schema::Opp115Raw => load_opp115(root).map(|(d, _)| d),
    }
}

/// Majority label of a non-empty multiset.
///
/// Ties go to the candidate that is most frequent in `global_freq` (indexed
/// by [`DataPractice::index`]), then to the lowest class index.
pub fn consolidate_labels(candidates: &[DataPractice], global_freq: &[usize; NUM_PRACTICES]) -> Result<DataPractice> {
    if candidates.is_empty() {
        return Err(Error::Data("cannot consolidate an empty label set".into()));
    }
    let mut votes = [0usize; NUM_PRACTICES];
    for c in candidates {
        votes[c.index()] += 1;
    }
    let best = DataPractice::ALL
        .into_iter()
        .filter(|p| votes[p.index()] > 0)
        .max_by(|a, b| {
            votes[a.index()]
                .cmp(&votes[b.index()])
                .then(global_freq[a.index()].cmp(&global_freq[b.index()]))
                // lower index wins the final tie
                .then(b.index().cmp(&a.index()))
        })
        .expect("non-empty");
    Ok(best)
}

/// Segment count per practice; every practice is present as a key.
pub fn class_distribution(dataset: &Dataset) -> BTreeMap<DataPractice, usize> {
    let mut counts: BTreeMap<DataPractice, usize> = DataPractice::ALL.into_iter().map(|p| (p, 0)).collect();
    for s in &dataset.segments {
        *counts.get_mut(&s.label).expect("all keys present") += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use DataPractice::*;

    #[test]
    fn practices_are_ten_with_stable_indices() {
        assert_eq!(DataPractice::ALL.len(), 10);
        for (i, p) in DataPractice::ALL.into_iter().enumerate() {
            assert_eq!(p.index(), i);
            assert_eq!(DataPractice::from_index(i), Some(p));
            assert_eq!(p.as_str().parse::<DataPractice>().unwrap(), p);
            assert_eq!(p.to_string().parse::<DataPractice>().unwrap().as_str(), p.as_str());
        }
        let names: BTreeSet<_> = DataPractice::ALL.iter().map(|p| p.as_str()).collect();
        assert_eq!(names.len(), 10);
        assert!("Data Retention ".parse::<DataPractice>().is_ok());
        assert!("DoNotTrack".parse::<DataPractice>().is_ok());
        assert!("nope".parse::<DataPractice>().is_err());
    }

    #[test]
    fn consolidation_examples() {
        let freq = [0; 10];
        assert_eq!(consolidate_labels(&[DataSecurity, DataSecurity, Other], &freq).unwrap(), DataSecurity);
        assert_eq!(consolidate_labels(&[PolicyChange], &freq).unwrap(), PolicyChange);
        assert!(consolidate_labels(&[], &freq).is_err());

        let mut freq = [0; 10];
        freq[DataRetention.index()] = 5;
        freq[DataSecurity.index()] = 9;
        assert_eq!(consolidate_labels(&[DataRetention, DataSecurity], &freq).unwrap(), DataSecurity);
        // full tie falls back to the lower index
        assert_eq!(consolidate_labels(&[DoNotTrack, PolicyChange], &[0; 10]).unwrap(), PolicyChange);
    }

    proptest! {
        #[test]
        fn consolidation_is_permutation_invariant(
            labels in proptest::collection::vec(0usize..10, 1..12),
            freq in proptest::array::uniform10(0usize..50),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut ps: Vec<DataPractice> = labels.iter().map(|&i| DataPractice::from_index(i).unwrap()).collect();
            let a = consolidate_labels(&ps, &freq).unwrap();
            ps.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(a, consolidate_labels(&ps, &freq).unwrap());
        }
    }

    fn seg(p: &str, id: usize, label: DataPractice) -> Segment {
        Segment {
            policy_id: p.into(),
            segment_id: id,
            text: format!("text {id}"),
            label,
        }
    }

    #[test]
    fn distribution_examples() {
        let empty = Dataset::default();
        let d = class_distribution(&empty);
        assert_eq!(d.len(), 10);
        assert!(d.values().all(|&c| c == 0));

        let ds = Dataset::new(vec![seg("a", 0, Other), seg("a", 1, Other), seg("b", 0, DoNotTrack)]).unwrap();
        let d = class_distribution(&ds);
        assert_eq!(d[&Other], 2);
        assert_eq!(d[&DoNotTrack], 1);
        assert_eq!(d.values().sum::<usize>(), 3);
    }

    #[test]
    fn dataset_rejects_duplicates_and_blank_text() {
        assert!(Dataset::new(vec![seg("a", 0, Other), seg("a", 0, Other)]).is_err());
        let mut s = seg("a", 0, Other);
        s.text = "  \n".into();
        assert!(Dataset::new(vec![s]).is_err());
    }
}
