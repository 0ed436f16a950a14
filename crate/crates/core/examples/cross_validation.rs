//! Ten-fold cross-validation of logistic regression with the per-class
//! table and both averages.

use polcov::corpus::synthetic::{synthetic_corpus, SyntheticSpec};
use polcov::evalharness::render_table;
use polcov::pipeline::{evaluate, ModelType, PipelineConfig};

fn main() -> polcov::Result<()> {
    let ds = synthetic_corpus(&SyntheticSpec { policies: 30, ..SyntheticSpec::default() }, 11);
    let (report, timings) = evaluate(&PipelineConfig::new(ModelType::Lr), &ds, 10, 0)?;
    print!("{}", render_table(&report));
    println!(
        "pooled micro-F {:.4}, fold-mean micro-F {:.4}, {:.2}s",
        report.micro.f_measure, report.fold_averaged_micro.f_measure, timings.total_seconds
    );
    Ok(())
}
