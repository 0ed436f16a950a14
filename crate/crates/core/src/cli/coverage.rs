use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::DataPractice;
use crate::error::{Error, Result};
use crate::features::tokenize;
use crate::pipeline::ModelArtifact;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentPrediction {
    pub segment_id: usize,
    pub practice: DataPractice,
    /// Probability of the predicted practice; absent for SVM models.
    pub confidence: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub policy_id: String,
    pub segments: Vec<SegmentPrediction>,
    pub covered: BTreeSet<DataPractice>,
    pub missing: BTreeSet<DataPractice>,
    /// Segment ids per practice; every practice has an entry.
    pub by_practice: BTreeMap<DataPractice, Vec<usize>>,
}

impl CoverageReport {
    pub fn from_predictions(policy_id: impl Into<String>, segments: Vec<SegmentPrediction>) -> Self {
        let mut by_practice: BTreeMap<DataPractice, Vec<usize>> = DataPractice::ALL.iter().map(|&p| (p, Vec::new())).collect();
        for s in &segments {
            by_practice.get_mut(&s.practice).expect("all practices present").push(s.segment_id);
        }
        let (covered, missing) = DataPractice::ALL.iter().partition(|p| !by_practice[p].is_empty());
        Self {
            policy_id: policy_id.into(),
            segments,
            covered,
            missing,
            by_practice,
        }
    }
}

#[derive(Deserialize)]
struct LooseSegment {
    segment_id: usize,
    text: String,
}

#[derive(Deserialize)]
struct LoosePolicy {
    policy_id: String,
    segments: Vec<LooseSegment>,
}

/// Splits raw text into blocks separated by blank lines.
pub fn split_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line.trim_end());
        }
    }
    if !current.is_empty() {
        blocks.push(current.join("\n"));
    }
    blocks
}

/// A `.json` file is read as a pre-segmented policy (labels, if present,
/// are ignored); anything else is plain text split on blank lines.
pub fn read_policy(path: &Path) -> Result<(String, Vec<(usize, String)>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        let p: LoosePolicy = serde_json::from_str(&text).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let segs = p.segments.into_iter().map(|s| (s.segment_id, s.text)).collect();
        return Ok((p.policy_id, segs));
    }
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok((id, split_blocks(&text).into_iter().enumerate().collect()))
}

pub fn analyze_policy(policy_id: &str, segments: &[(usize, String)], model: &ModelArtifact) -> Result<CoverageReport> {
    if segments.is_empty() {
        return Err(Error::Data(format!("policy {policy_id} has no segments")));
    }
    let tokens: Vec<Vec<String>> = segments.iter().map(|(_, t)| tokenize(t)).collect();
    let preds = model.classify(&tokens)?;
    let rows = segments
        .iter()
        .zip(preds)
        .map(|((id, _), (practice, confidence))| SegmentPrediction {
            segment_id: *id,
            practice,
            confidence,
        })
        .collect();
    Ok(CoverageReport::from_predictions(policy_id, rows))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            other => Err(Error::Config(format!("unknown format {other:?} (expected json or text)"))),
        }
    }
}

pub fn render_report(report: &CoverageReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "Policy {}: {} of 10 data practices covered", report.policy_id, report.covered.len());
            let _ = writeln!(out, "Covered:");
            for p in &report.covered {
                let ids: Vec<String> = report.by_practice[p].iter().map(usize::to_string).collect();
                let _ = writeln!(out, "  {p}: segments {}", ids.join(", "));
            }
            let _ = writeln!(out, "Missing:");
            for p in &report.missing {
                let _ = writeln!(out, "  {p}");
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::{synthetic_corpus, SyntheticSpec};
    use crate::pipeline::{fit, ModelType, PipelineConfig};

    fn pred(id: usize, p: DataPractice) -> SegmentPrediction {
        SegmentPrediction {
            segment_id: id,
            practice: p,
            confidence: Some(0.5),
        }
    }

    #[test]
    fn set_arithmetic() {
        let r = CoverageReport::from_predictions(
            "p",
            vec![pred(0, DataPractice::FirstPartyCollectionUse), pred(1, DataPractice::DataSecurity)],
        );
        assert_eq!((r.covered.len(), r.missing.len()), (2, 8));
        let all_other = CoverageReport::from_predictions("q", vec![pred(0, DataPractice::Other), pred(4, DataPractice::Other)]);
        assert_eq!(all_other.covered, BTreeSet::from([DataPractice::Other]));
        assert_eq!(all_other.missing.len(), 9);
        assert_eq!(all_other.by_practice[&DataPractice::Other], vec![0, 4]);
        for r in [&r, &all_other] {
            assert!(r.covered.is_disjoint(&r.missing));
            assert_eq!(r.covered.len() + r.missing.len(), 10);
            assert_eq!(r.by_practice.values().map(Vec::len).sum::<usize>(), r.segments.len());
        }
    }

    #[test]
    fn renderings_round_trip_and_list_covered_practices() {
        let r = CoverageReport::from_predictions("p", vec![pred(0, DataPractice::DoNotTrack), pred(1, DataPractice::DataRetention)]);
        let json = render_report(&r, ReportFormat::Json).unwrap();
        assert_eq!(serde_json::from_str::<CoverageReport>(&json).unwrap(), r);
        let text = render_report(&r, ReportFormat::Text).unwrap();
        assert_eq!(text.lines().filter(|l| l.contains(": segments ")).count(), 2);
        let empty = CoverageReport::from_predictions("e", Vec::new());
        let v: serde_json::Value = serde_json::from_str(&render_report(&empty, ReportFormat::Json).unwrap()).unwrap();
        assert_eq!(v["covered"], serde_json::json!([]));
    }

    #[test]
    fn blocks_and_analysis() {
        assert_eq!(split_blocks("a\nb\n\n\n  \nc\n"), vec!["a\nb".to_string(), "c".into()]);
        assert!(split_blocks(" \n\n").is_empty());
        let ds = synthetic_corpus(&SyntheticSpec::default(), 0);
        let model = fit(&PipelineConfig::new(ModelType::Lr), &ds, None, 0).unwrap();
        let segs: Vec<(usize, String)> = ds.segments.iter().take(6).map(|s| (s.segment_id, s.text.clone())).collect();
        let a = analyze_policy("x", &segs, &model).unwrap();
        assert_eq!(a, analyze_policy("x", &segs, &model).unwrap());
        assert_eq!(a.segments.len(), 6);
        assert!(analyze_policy("x", &[], &model).is_err());
    }
}
