use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{class_metrics, confusion_matrix, macro_average, micro_average, Averages, ClassMetrics, ConfusionMatrix};
use crate::corpus::{stratified_folds, DataPractice, Dataset, NUM_PRACTICES};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub confusion: ConfusionMatrix,
    pub micro: Averages,
    pub macro_avg: Averages,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub practice: DataPractice,
    #[serde(flatten)]
    pub metrics: ClassMetrics,
    /// True for the catch-all Other class.
    pub marked: bool,
}

/// Cross-validation results. Final metrics come from the fold confusion
/// matrices summed together; `fold_averaged` holds the per-fold means for
/// comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub model: String,
    pub k: usize,
    pub seed: u64,
    pub config_fingerprint: String,
    pub folds: Vec<FoldOutcome>,
    pub pooled: ConfusionMatrix,
    pub per_class: Vec<ClassRow>,
    pub micro: Averages,
    pub macro_avg: Averages,
    pub fold_averaged_micro: Averages,
    pub fold_averaged_macro: Averages,
}

/// Wall-clock seconds of a CV run. Not part of [`CvReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvTimings {
    pub fold_seconds: Vec<f64>,
    pub total_seconds: f64,
}

/// Hex SHA-256 of the value's JSON encoding.
pub fn fingerprint<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_add((fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn mean_averages(items: &[Averages]) -> Averages {
    let n = items.len().max(1) as f64;
    Averages {
        precision: items.iter().map(|a| a.precision).sum::<f64>() / n,
        recall: items.iter().map(|a| a.recall).sum::<f64>() / n,
        f_measure: items.iter().map(|a| a.f_measure).sum::<f64>() / n,
    }
}

/// Stratified k-fold cross-validation. `fit_predict(train, test, seed)`
/// must return one prediction per test segment; folds run in parallel.
pub fn run_cv<F>(dataset: &Dataset, k: usize, seed: u64, model: &str, config_fingerprint: String, fit_predict: F) -> Result<(CvReport, CvTimings)>
where
    F: Fn(&Dataset, &Dataset, u64) -> Result<Vec<DataPractice>> + Sync,
{
    if dataset.is_empty() {
        return Err(Error::Data("cannot cross-validate an empty dataset".into()));
    }
    let start = Instant::now();
    let assignment = stratified_folds(dataset, k, seed)?;
    let results: Vec<Result<(FoldOutcome, f64)>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let t0 = Instant::now();
            let wrap = |e: Error| Error::Fold {
                fold,
                source: Box::new(e),
            };
            let train = dataset.subset(&assignment.train_indices(dataset, fold));
            let test = dataset.subset(&assignment.test_indices(dataset, fold));
            let fs = fold_seed(seed, fold);
            let pred = fit_predict(&train, &test, fs).map_err(wrap)?;
            let gold: Vec<usize> = test.segments.iter().map(|s| s.label.index()).collect();
            let pred: Vec<usize> = pred.iter().map(|p| p.index()).collect();
            let confusion = confusion_matrix(&gold, &pred, NUM_PRACTICES).map_err(wrap)?;
            Ok((
                FoldOutcome {
                    fold,
                    seed: fs,
                    train_size: train.len(),
                    test_size: test.len(),
                    micro: micro_average(&confusion),
                    macro_avg: macro_average(&confusion),
                    confusion,
                },
                t0.elapsed().as_secs_f64(),
            ))
        })
        .collect();

    let mut folds = Vec::with_capacity(k);
    let mut fold_seconds = Vec::with_capacity(k);
    for r in results {
        let (f, secs) = r?;
        folds.push(f);
        fold_seconds.push(secs);
    }
    let mut pooled = ConfusionMatrix::zeros(NUM_PRACTICES);
    for f in &folds {
        pooled.add(&f.confusion)?;
    }
    let per_class = DataPractice::ALL
        .iter()
        .map(|&p| ClassRow {
            practice: p,
            metrics: class_metrics(&pooled, p.index()),
            marked: p == DataPractice::Other,
        })
        .collect();
    let fold_micro: Vec<Averages> = folds.iter().map(|f| f.micro).collect();
    let fold_macro: Vec<Averages> = folds.iter().map(|f| f.macro_avg).collect();
    let report = CvReport {
        model: model.to_string(),
        k,
        seed,
        config_fingerprint,
        micro: micro_average(&pooled),
        macro_avg: macro_average(&pooled),
        fold_averaged_micro: mean_averages(&fold_micro),
        fold_averaged_macro: mean_averages(&fold_macro),
        folds,
        pooled,
        per_class,
    };
    let timings = CvTimings {
        fold_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((report, timings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::{synthetic_corpus, SyntheticSpec};
    use crate::corpus::{class_distribution, Segment};

    fn majority(train: &Dataset, test: &Dataset) -> Vec<DataPractice> {
        let dist = class_distribution(train);
        let top = dist.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(p, _)| *p).unwrap();
        vec![top; test.len()]
    }

    #[test]
    fn constant_model_on_single_class_data_is_perfect() {
        let segs = (0..20)
            .map(|i| Segment {
                policy_id: format!("p{}", i % 3),
                segment_id: i,
                text: "we keep data".into(),
                label: DataPractice::DataRetention,
            })
            .collect();
        let ds = Dataset::new(segs).unwrap();
        let (r, t) = run_cv(&ds, 10, 0, "const", String::new(), |_, test, _| Ok(vec![DataPractice::DataRetention; test.len()])).unwrap();
        assert_eq!(r.micro.f_measure, 1.0);
        assert_eq!(t.fold_seconds.len(), 10);
        assert_eq!(r.folds.iter().map(|f| f.test_size).sum::<usize>(), 20);
    }

    #[test]
    fn majority_baseline_scores_the_majority_share() {
        let ds = synthetic_corpus(&SyntheticSpec::default(), 4);
        let dist = class_distribution(&ds);
        let (&top, &count) = dist.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).unwrap();
        let (r, _) = run_cv(&ds, 10, 1, "majority", String::new(), |train, test, _| Ok(majority(train, test))).unwrap();
        // every fold predicts the overall majority class
        assert!(r.folds.iter().all(|f| f.confusion.counts.iter().all(|row| row.iter().enumerate().all(|(p, &n)| n == 0 || p == top.index()))));
        assert_eq!(r.micro.f_measure, count as f64 / ds.len() as f64);
        assert_eq!(r.micro.precision, r.micro.recall);
        assert_eq!(r.micro.recall, r.micro.f_measure);
        assert!(r.per_class.iter().find(|c| c.practice == DataPractice::Other).unwrap().marked);
    }

    #[test]
    fn failures_carry_the_fold_index_and_runs_are_deterministic() {
        let ds = synthetic_corpus(&SyntheticSpec::default(), 5);
        let err = run_cv(&ds, 5, 0, "x", String::new(), |_, _, _| Err(Error::Model("boom".into()))).unwrap_err();
        assert!(matches!(err, Error::Fold { .. }));
        let pseudo = |_: &Dataset, test: &Dataset, s: u64| -> Result<Vec<DataPractice>> {
            Ok(test.segments.iter().map(|seg| DataPractice::ALL[((seg.segment_id as u64 ^ s) % 10) as usize]).collect())
        };
        let a = run_cv(&ds, 10, 9, "p", fingerprint("cfg").unwrap(), pseudo).unwrap().0;
        let b = run_cv(&ds, 10, 9, "p", fingerprint("cfg").unwrap(), pseudo).unwrap().0;
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.micro.precision, a.micro.f_measure);
        assert_eq!(a.config_fingerprint.len(), 64);
    }
}
