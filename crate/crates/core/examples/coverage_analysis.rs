//! Trains a classifier, then reports which data practices a short policy
//! covers and which it leaves out.

use polcov::cli::{analyze_policy, render_report, split_blocks, ReportFormat};
use polcov::corpus::synthetic::{synthetic_corpus, SyntheticSpec};
use polcov::pipeline::{fit, ModelType, PipelineConfig};

const POLICY: &str = "\
We collect your name, email address and device identifiers when you sign up.

We may share information with advertising partners and analytics providers.

You can opt out of marketing messages using the unsubscribe link.

We use encryption and secure servers to protect your information.

We will post any changes to this policy on this page.";

fn main() -> polcov::Result<()> {
    let ds = synthetic_corpus(&SyntheticSpec { policies: 30, ..SyntheticSpec::default() }, 17);
    let model = fit(&PipelineConfig::new(ModelType::Lr), &ds, None, 0)?;
    let segments: Vec<(usize, String)> = split_blocks(POLICY).into_iter().enumerate().collect();
    let report = analyze_policy("example", &segments, &model)?;
    print!("{}", render_report(&report, ReportFormat::Text)?);
    Ok(())
}
