use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DataPractice, Dataset, Segment};
use crate::error::{Error, Result};

/// One policy file: `{policy_id, segments: [{segment_id, text, label}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub policy_id: String,
    pub segments: Vec<SegmentRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub segment_id: usize,
    pub text: String,
    pub label: DataPractice,
}

fn json_files(root: &Path) -> Result<Vec<PathBuf>> {
    if root.is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_policy_file(path: &Path) -> Result<PolicyRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Reads every `*.json` file directly under `root` (or `root` itself when it
/// is a file), in filename order.
pub fn load_canonical(root: &Path) -> Result<Dataset> {
    let files = json_files(root)?;
    if files.is_empty() {
        return Err(Error::MissingFile(root.join("*.json")));
    }
    let mut segments = Vec::new();
    for path in files {
        let record = read_policy_file(&path)?;
        for s in record.segments {
            segments.push(Segment {
                policy_id: record.policy_id.clone(),
                segment_id: s.segment_id,
                text: s.text,
                label: s.label,
            });
        }
    }
    Dataset::new(segments)
}

fn file_stem_for(policy_id: &str) -> String {
    policy_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Writes one pretty-printed file per policy into `dir`.
pub fn save_canonical(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut by_policy: BTreeMap<&str, Vec<&Segment>> = BTreeMap::new();
    for s in &dataset.segments {
        by_policy.entry(&s.policy_id).or_default().push(s);
    }
    for (policy_id, segs) in by_policy {
        let record = PolicyRecord {
            policy_id: policy_id.to_string(),
            segments: segs
                .into_iter()
                .map(|s| SegmentRecord {
                    segment_id: s.segment_id,
                    text: s.text.clone(),
                    label: s.label,
                })
                .collect(),
        };
        let path = dir.join(format!("{}.json", file_stem_for(policy_id)));
        let body = serde_json::to_string_pretty(&record)?;
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::{synthetic_corpus, SyntheticSpec};

    #[test]
    fn two_policy_tree_loads() {
        let dir = tempfile::tempdir().unwrap();
        let a = r#"{"policy_id":"p1","segments":[
            {"segment_id":0,"text":"We collect your email.","label":"First Party Collection/Use"},
            {"segment_id":1,"text":"We honor DNT.","label":"Do Not Track"},
            {"segment_id":2,"text":"Contact us.","label":"Other"}]}"#;
        let b = r#"{"policy_id":"p2","segments":[
            {"segment_id":0,"text":"Data is encrypted.","label":"Data Security"},
            {"segment_id":1,"text":"We may change this policy.","label":"Policy Change"}]}"#;
        fs::write(dir.path().join("p1.json"), a).unwrap();
        fs::write(dir.path().join("p2.json"), b).unwrap();
        let ds = load_canonical(dir.path()).unwrap();
        assert_eq!(ds.len(), 5);
        assert_eq!(ds.policies.len(), 2);
        assert_eq!(ds.segments[1].label, DataPractice::DoNotTrack);
    }

    #[test]
    fn malformed_file_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("bad.json"), "{\n\"policy_id\": \"x\",\n\"segments\": [ oops ]\n}").unwrap();
        match load_canonical(dir.path()) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let ds = synthetic_corpus(&SyntheticSpec::default(), 5);
        let dir = tempfile::tempdir().unwrap();
        save_canonical(&ds, dir.path()).unwrap();
        let back = load_canonical(dir.path()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn missing_root_is_an_error() {
        assert!(matches!(
            super::super::load_corpus(Path::new("/nonexistent/corpus"), super::super::Schema::CanonicalJson),
            Err(Error::MissingFile(_))
        ));
    }
}
