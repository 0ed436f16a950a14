//! Multinomial naive Bayes, logistic regression and a linear SVM on one
//! train/test split of a synthetic corpus.

use polcov::classical::{train_lr, train_mnb, train_svm, ClassicalModel, LrConfig, SvmConfig};
use polcov::corpus::synthetic::{synthetic_corpus, SyntheticSpec};
use polcov::corpus::stratified_folds;
use polcov::features::{fit_tfidf, transform_tfidf, FeatureVector};
use polcov::pipeline::tokenize_dataset;

fn main() -> polcov::Result<()> {
    let ds = synthetic_corpus(&SyntheticSpec { policies: 30, ..SyntheticSpec::default() }, 5);
    let folds = stratified_folds(&ds, 5, 1)?;
    let (train, test) = (ds.subset(&folds.train_indices(&ds, 0)), ds.subset(&folds.test_indices(&ds, 0)));
    let (train_tok, test_tok) = (tokenize_dataset(&train), tokenize_dataset(&test));
    let labels = train.labels();

    let tfidf = fit_tfidf(&train_tok)?;
    let width = tfidf.width();
    let weighted = |docs: &[Vec<String>]| -> Vec<FeatureVector> { docs.iter().map(|d| transform_tfidf(&tfidf, d)).collect() };
    let counted = |docs: &[Vec<String>]| -> Vec<FeatureVector> { docs.iter().map(|d| tfidf.counts(d)).collect() };

    let models = [
        (ClassicalModel::Mnb(train_mnb(&counted(&train_tok), &labels, width, 1.0)?), counted(&test_tok)),
        (ClassicalModel::Lr(train_lr(&weighted(&train_tok), &labels, width, &LrConfig::default())?), weighted(&test_tok)),
        (ClassicalModel::Svm(train_svm(&weighted(&train_tok), &labels, width, &SvmConfig::default())?), weighted(&test_tok)),
    ];
    println!("train {} / test {} segments, {width} features", train.len(), test.len());
    for (model, rows) in &models {
        let correct = rows
            .iter()
            .zip(test.labels())
            .filter(|(x, y)| model.predict(x).map(|p| p == *y).unwrap_or(false))
            .count();
        println!("{:<4} accuracy {:.3}", model.kind(), correct as f64 / test.len() as f64);
    }
    Ok(())
}
