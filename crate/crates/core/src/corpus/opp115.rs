//! Importer for the public OPP-115 distribution.
//!
//! Expected layout under the root:
//!
//! ```text
//! annotations/<policy>.csv          one row per annotation, no header
//! sanitized_policies/<policy>.html  segment texts separated by "|||"
//! ```
//!
//! Annotation columns: annotation id, batch id, annotator id, policy id,
//! segment id, category name, attribute JSON, date, policy URL. Only the
//! annotator, segment and category columns are used.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{consolidate_labels, DataPractice, Dataset, Segment, NUM_PRACTICES};
use crate::error::{Error, Result};

const SEGMENT_DELIMITER: &str = "|||";
const COL_ANNOTATOR: usize = 2;
const COL_SEGMENT: usize = 4;
const COL_CATEGORY: usize = 5;

/// What happened during import, for the run log.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub policies: usize,
    pub segments: usize,
    pub annotation_rows: usize,
    /// Segments present in the policy text with no annotation at all.
    pub dropped_unannotated: usize,
    /// Annotated segments whose text is blank after markup removal.
    pub dropped_empty_text: usize,
    /// Distinct (annotator, practice) votes per practice over the corpus;
    /// this is the table used to break consolidation ties.
    pub global_votes: [usize; NUM_PRACTICES],
}

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    files.sort();
    Ok(files)
}

/// Removes markup and decodes the handful of entities the sanitized
/// policies use, collapsing runs of whitespace.
pub fn strip_markup(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    let mut in_tag = false;
    for c in html.chars() {
        match c {
            '<' => {
                in_tag = true;
                out.push(' ');
            }
            '>' if in_tag => in_tag = false,
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    let decoded = out
        .replace("&nbsp;", " ")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&apos;", "'")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&");
    decoded.split_whitespace().collect::<Vec<_>>().join(" ")
}

struct PolicyVotes {
    texts: Vec<String>,
    votes: BTreeMap<usize, BTreeSet<(String, DataPractice)>>,
}

/// Imports the raw tree and consolidates each segment's votes into one label.
///
/// An annotator marking the same practice several times on one segment
/// counts as one vote.
pub fn load_opp115(root: &Path) -> Result<(Dataset, IngestReport)> {
    let annotation_files = sorted_files(&root.join("annotations"), "csv")?;
    let text_dir = root.join("sanitized_policies");
    let mut report = IngestReport::default();
    let mut policies: Vec<(String, PolicyVotes)> = Vec::new();

    for ann_path in annotation_files {
        let stem = ann_path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Data(format!("bad file name {}", ann_path.display())))?
            .to_string();
        let text_path = text_dir.join(format!("{stem}.html"));
        if !text_path.exists() {
            return Err(Error::MissingFile(text_path));
        }
        let html = fs::read_to_string(&text_path).map_err(|e| Error::io(&text_path, e))?;
        let texts: Vec<String> = html.split(SEGMENT_DELIMITER).map(strip_markup).collect();

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(&ann_path)
            .map_err(|e| Error::Malformed {
                path: ann_path.clone(),
                line: 0,
                message: e.to_string(),
            })?;
        let mut votes: BTreeMap<usize, BTreeSet<(String, DataPractice)>> = BTreeMap::new();
        for record in reader.records() {
            let malformed = |line: usize, message: String| Error::Malformed {
                path: ann_path.clone(),
                line,
                message,
            };
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                malformed(line, e.to_string())
            })?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            if record.len() <= COL_CATEGORY {
                return Err(malformed(line, format!("expected at least {} columns, got {}", COL_CATEGORY + 1, record.len())));
            }
            let segment: usize = record[COL_SEGMENT]
                .trim()
                .parse()
                .map_err(|_| malformed(line, format!("bad segment id {:?}", &record[COL_SEGMENT])))?;
            let practice: DataPractice = record[COL_CATEGORY]
                .parse()
                .map_err(|e: Error| malformed(line, e.to_string()))?;
            if segment >= texts.len() {
                return Err(Error::MissingSegment {
                    policy: stem.clone(),
                    segment,
                });
            }
            report.annotation_rows += 1;
            votes
                .entry(segment)
                .or_default()
                .insert((record[COL_ANNOTATOR].trim().to_string(), practice));
        }
        policies.push((stem, PolicyVotes { texts, votes }));
    }

    for (_, pv) in &policies {
        for set in pv.votes.values() {
            for (_, p) in set {
                report.global_votes[p.index()] += 1;
            }
        }
    }

    let mut segments = Vec::new();
    for (policy_id, pv) in policies {
        for (segment_id, text) in pv.texts.into_iter().enumerate() {
            let Some(set) = pv.votes.get(&segment_id) else {
                if !text.is_empty() {
                    report.dropped_unannotated += 1;
                }
                continue;
            };
            if text.is_empty() {
                report.dropped_empty_text += 1;
                continue;
            }
            let candidates: Vec<DataPractice> = set.iter().map(|(_, p)| *p).collect();
            let label = consolidate_labels(&candidates, &report.global_votes)?;
            segments.push(Segment {
                policy_id: policy_id.clone(),
                segment_id,
                text,
                label,
            });
        }
    }
    let dataset = Dataset::new(segments)?;
    report.policies = dataset.policies.len();
    report.segments = dataset.len();
    if report.dropped_unannotated > 0 || report.dropped_empty_text > 0 {
        log::info!(
            "dropped {} unannotated and {} empty segments",
            report.dropped_unannotated,
            report.dropped_empty_text
        );
    }
    Ok((dataset, report))
}
