use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are gold classes, columns are predictions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    pub fn false_positives(&self, c: usize) -> u64 {
        (0..self.n).filter(|&g| g != c).map(|g| self.counts[g][c]).sum()
    }

    pub fn false_negatives(&self, c: usize) -> u64 {
        (0..self.n).filter(|&p| p != c).map(|p| self.counts[c][p]).sum()
    }

    /// Gold count of class `c`.
    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        for (a, b) in self.counts.iter_mut().flatten().zip(other.counts.iter().flatten()) {
            *a += b;
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let counts = (0..self.n).map(|p| (0..self.n).map(|g| self.counts[g][p]).collect()).collect();
        Self { n: self.n, counts }
    }
}

pub fn confusion_matrix(gold: &[usize], pred: &[usize], n: usize) -> Result<ConfusionMatrix> {
    if gold.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: gold.len(),
            got: pred.len(),
        });
    }
    let mut m = ConfusionMatrix::zeros(n);
    for (&g, &p) in gold.iter().zip(pred) {
        if g >= n || p >= n {
            return Err(Error::Data(format!("label pair ({g}, {p}) outside 0..{n}")));
        }
        m.counts[g][p] += 1;
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub support: u64,
    /// Set when any of the three ratios had a zero denominator and was
    /// reported as 0.
    pub zero_division: bool,
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// `2TP / (2TP + FP + FN)`, the count form of the harmonic mean.
fn f_from_counts(tp: u64, fp: u64, fn_: u64, flag: &mut bool) -> f64 {
    ratio(2 * tp, 2 * tp + fp + fn_, flag)
}

pub fn class_metrics(m: &ConfusionMatrix, c: usize) -> ClassMetrics {
    let (tp, fp, fn_) = (m.true_positives(c), m.false_positives(c), m.false_negatives(c));
    let mut zero_division = false;
    let precision = ratio(tp, tp + fp, &mut zero_division);
    let recall = ratio(tp, tp + fn_, &mut zero_division);
    let f_measure = f_from_counts(tp, fp, fn_, &mut zero_division);
    ClassMetrics {
        precision,
        recall,
        f_measure,
        support: m.support(c),
        zero_division,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Metrics from TP, FP and FN summed over classes.
pub fn micro_average(m: &ConfusionMatrix) -> Averages {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for c in 0..m.n {
        tp += m.true_positives(c);
        fp += m.false_positives(c);
        fn_ += m.false_negatives(c);
    }
    let mut flag = false;
    let precision = ratio(tp, tp + fp, &mut flag);
    let recall = ratio(tp, tp + fn_, &mut flag);
    Averages {
        precision,
        recall,
        f_measure: f_from_counts(tp, fp, fn_, &mut flag),
    }
}

/// Unweighted mean of per-class metrics over every class in the matrix.
pub fn macro_average(m: &ConfusionMatrix) -> Averages {
    let per: Vec<ClassMetrics> = (0..m.n).map(|c| class_metrics(m, c)).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per.iter().map(f).sum::<f64>() / m.n.max(1) as f64;
    Averages {
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        f_measure: mean(|c| c.f_measure),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn confusion_examples() {
        let m = confusion_matrix(&[0, 1], &[0, 1], 2).unwrap();
        assert_eq!(m.counts, vec![vec![1, 0], vec![0, 1]]);
        let m = confusion_matrix(&[0], &[1], 2).unwrap();
        assert_eq!(m.counts[0][1], 1);
        assert!(confusion_matrix(&[0], &[0, 1], 2).is_err());
        assert!(confusion_matrix(&[2], &[0], 2).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let gold: Vec<usize> = (0..1000).map(|_| rng.gen_range(0..4)).collect();
        let pred: Vec<usize> = (0..1000).map(|_| rng.gen_range(0..4)).collect();
        let m = confusion_matrix(&gold, &pred, 4).unwrap();
        for c in 0..4 {
            assert_eq!(m.support(c), gold.iter().filter(|&&g| g == c).count() as u64);
        }
        assert_eq!(m.total(), 1000);
    }

    #[test]
    fn class_metric_examples() {
        // TP=8, FP=2, FN=2
        let m = ConfusionMatrix {
            n: 2,
            counts: vec![vec![8, 2], vec![2, 0]],
        };
        let c = class_metrics(&m, 0);
        assert_eq!((c.precision, c.recall, c.f_measure), (0.8, 0.8, 0.8));
        assert!(!c.zero_division);
        assert_eq!((f_measure(0.89, 0.26) * 100.0).round() / 100.0, 0.40);
        assert_eq!((f_measure(1.00, 0.23) * 100.0).round() / 100.0, 0.37);
        let c1 = class_metrics(&m, 1);
        assert_eq!(c1.f_measure, 0.0);
        assert!(!c1.zero_division);
        let absent = confusion_matrix(&[0, 1], &[0, 0], 3).unwrap();
        let c2 = class_metrics(&absent, 2);
        assert_eq!((c2.precision, c2.recall, c2.f_measure), (0.0, 0.0, 0.0));
        assert!(c2.zero_division);
        assert!(class_metrics(&absent, 1).zero_division);
    }

    #[test]
    fn averages() {
        let perfect = confusion_matrix(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        let mi = micro_average(&perfect);
        let ma = macro_average(&perfect);
        assert_eq!((mi.precision, mi.recall, mi.f_measure), (1.0, 1.0, 1.0));
        assert_eq!(ma.f_measure, 1.0);
        // class 0 always right, class 1 always predicted as 0
        let m = confusion_matrix(&[0, 0, 1, 1], &[0, 0, 0, 0], 2).unwrap();
        let f0 = class_metrics(&m, 0).f_measure;
        assert!((macro_average(&m).f_measure - f0 / 2.0).abs() < 1e-15);
        let m = confusion_matrix(&[0, 1], &[0, 0], 2).unwrap();
        let perfect_and_zero = ConfusionMatrix {
            n: 2,
            counts: vec![vec![3, 0], vec![0, 0]],
        };
        assert_eq!(macro_average(&perfect_and_zero).f_measure, 0.5);
        assert_eq!(micro_average(&m).f_measure, 0.5);
    }

    fn random_matrix(rng: &mut ChaCha8Rng) -> ConfusionMatrix {
        let n = rng.gen_range(1..8);
        let counts = (0..n)
            .map(|_| (0..n).map(|_| if rng.gen_bool(0.3) { 0 } else { rng.gen_range(0..50) }).collect())
            .collect();
        ConfusionMatrix { n, counts }
    }

    /// Scripted oracle: expand the matrix to label pairs and count directly.
    fn oracle(m: &ConfusionMatrix, c: usize) -> (f64, f64, f64) {
        let mut pairs = Vec::new();
        for g in 0..m.n {
            for p in 0..m.n {
                for _ in 0..m.counts[g][p] {
                    pairs.push((g, p));
                }
            }
        }
        let tp = pairs.iter().filter(|&&(g, p)| g == c && p == c).count();
        let predicted = pairs.iter().filter(|&&(_, p)| p == c).count();
        let actual = pairs.iter().filter(|&&(g, _)| g == c).count();
        let p = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let r = if actual == 0 { 0.0 } else { tp as f64 / actual as f64 };
        let f = if predicted + actual == 0 { 0.0 } else { (2 * tp) as f64 / (predicted + actual) as f64 };
        (p, r, f)
    }

    #[test]
    fn random_matrices_match_oracle_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let m = random_matrix(&mut rng);
            for c in 0..m.n {
                let got = class_metrics(&m, c);
                assert_eq!((got.precision, got.recall, got.f_measure), oracle(&m, c));
                let t = class_metrics(&m.transpose(), c);
                assert_eq!((t.precision, t.recall), (got.recall, got.precision));
                if got.precision + got.recall > 0.0 {
                    assert!((got.f_measure - f_measure(got.precision, got.recall)).abs() < 1e-15);
                }
            }
            let mi = micro_average(&m);
            assert_eq!(mi.precision, mi.recall);
            assert_eq!(mi.precision, mi.f_measure);
        }
    }

    #[test]
    fn pooling_equals_direct_computation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gold: Vec<usize> = (0..300).map(|_| rng.gen_range(0..5)).collect();
        let pred: Vec<usize> = (0..300).map(|_| rng.gen_range(0..5)).collect();
        let mut pooled = ConfusionMatrix::zeros(5);
        for chunk in (0..300).collect::<Vec<_>>().chunks(37) {
            let g: Vec<usize> = chunk.iter().map(|&i| gold[i]).collect();
            let p: Vec<usize> = chunk.iter().map(|&i| pred[i]).collect();
            pooled.add(&confusion_matrix(&g, &p, 5).unwrap()).unwrap();
        }
        assert_eq!(pooled, confusion_matrix(&gold, &pred, 5).unwrap());
    }
}
