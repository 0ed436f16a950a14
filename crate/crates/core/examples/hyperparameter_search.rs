//! Grid and random search over logistic-regression settings, scored by
//! pooled micro-F under 5-fold cross-validation.

use polcov::corpus::synthetic::{synthetic_corpus, SyntheticSpec};
use polcov::evalharness::SearchSpace;
use polcov::pipeline::{best_config, tune, ModelType, PipelineConfig, Strategy};

fn main() -> polcov::Result<()> {
    let ds = synthetic_corpus(&SyntheticSpec::default(), 13);
    let base = PipelineConfig::new(ModelType::Lr);
    let space = SearchSpace::new().with("lr.penalty", ["l1", "l2"]).with("lr.c", [0.1, 0.5, 1.5, 5.0]);

    for strategy in [Strategy::Grid, Strategy::Random { budget: 4 }] {
        let outcome = tune(&base, &space, strategy, &ds, 5, 0)?;
        println!("{strategy:?}");
        for t in &outcome.trials {
            println!("  #{:<2} {:<40} {:.4}", t.index, serde_json::to_string(&t.config)?, t.objective.unwrap_or(f64::NAN));
        }
        if let Some(best) = best_config(&base, &outcome)? {
            println!("  best: penalty {:?}, C {}", best.lr.penalty, best.lr.c);
        }
    }
    Ok(())
}
