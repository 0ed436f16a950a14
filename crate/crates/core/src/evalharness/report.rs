use std::fmt::Write as _;

use super::cv::CvReport;
use super::metrics::Averages;
use crate::error::{Error, Result};

pub fn render_json(report: &CvReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// CSV with one row per class and one per aggregate.
pub fn render_flat_table(report: &CvReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Data(format!("csv: {e}"));
    w.write_record(["scope", "class", "precision", "recall", "f_measure", "support"]).map_err(csv_err)?;
    for row in &report.per_class {
        let m = &row.metrics;
        w.write_record([
            "class",
            row.practice.as_str(),
            &m.precision.to_string(),
            &m.recall.to_string(),
            &m.f_measure.to_string(),
            &m.support.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let total = report.pooled.total().to_string();
    let aggregates: [(&str, &Averages); 4] = [
        ("micro", &report.micro),
        ("macro", &report.macro_avg),
        ("fold_mean_micro", &report.fold_averaged_micro),
        ("fold_mean_macro", &report.fold_averaged_macro),
    ];
    for (scope, a) in aggregates {
        w.write_record([scope, "", &a.precision.to_string(), &a.recall.to_string(), &a.f_measure.to_string(), &total])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

/// Fixed-width precision/recall/F table at two decimals. The Other row is
/// starred.
pub fn render_table(report: &CvReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} ({}-fold, seed {})", report.model, report.k, report.seed);
    let _ = writeln!(out, "{:<36} {:>9} {:>6} {:>9} {:>7}", "Data practice", "Precision", "Recall", "F-measure", "Support");
    for row in &report.per_class {
        let m = &row.metrics;
        let name = if row.marked { format!("{} *", row.practice) } else { row.practice.to_string() };
        let _ = writeln!(out, "{name:<36} {:>9.2} {:>6.2} {:>9.2} {:>7}", m.precision, m.recall, m.f_measure, m.support);
    }
    for (label, a) in [("Micro-average", &report.micro), ("Macro-average", &report.macro_avg)] {
        let _ = writeln!(out, "{label:<36} {:>9.2} {:>6.2} {:>9.2}", a.precision, a.recall, a.f_measure);
    }
    let _ = writeln!(out, "* catch-all class, included in both averages");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::{synthetic_corpus, SyntheticSpec};
    use crate::corpus::DataPractice;
    use crate::evalharness::run_cv;

    #[test]
    fn renderings() {
        let ds = synthetic_corpus(&SyntheticSpec::default(), 2);
        let (r, _) = run_cv(&ds, 3, 0, "const", String::new(), |_, t, _| Ok(vec![DataPractice::Other; t.len()])).unwrap();
        let json = render_json(&r).unwrap();
        let back: CvReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        let flat = render_flat_table(&r).unwrap();
        assert_eq!(flat.lines().count(), 1 + 10 + 4);
        let table = render_table(&r);
        assert!(table.contains("Other *"));
        assert!(table.lines().any(|l| l.starts_with("Micro-average")));
    }
}
