use ndcore::functional::{softmax_slice, PROB_FLOOR};
use serde::{Deserialize, Serialize};

use super::{affine_scores, check_training};
use crate::corpus::{DataPractice, NUM_PRACTICES};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    None,
    L1,
    L2,
    ElasticNet,
}

impl Penalty {
    pub const ALL: [Penalty; 4] = [Penalty::L1, Penalty::L2, Penalty::ElasticNet, Penalty::None];

    pub fn as_str(self) -> &'static str {
        match self {
            Penalty::None => "none",
            Penalty::L1 => "l1",
            Penalty::L2 => "l2",
            Penalty::ElasticNet => "elasticnet",
        }
    }
}

impl std::str::FromStr for Penalty {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Penalty::None),
            "l1" => Ok(Penalty::L1),
            "l2" => Ok(Penalty::L2),
            "elasticnet" | "elastic-net" | "elastic_net" => Ok(Penalty::ElasticNet),
            other => Err(Error::Config(format!("unknown penalty {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrConfig {
    pub penalty: Penalty,
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// L1 share of the elastic-net penalty.
    pub l1_ratio: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self {
            penalty: Penalty::L2,
            c: 1.5,
            tol: 1e-4,
            max_iter: 100,
            l1_ratio: 0.5,
        }
    }
}

impl LrConfig {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(format!(
                "logistic regression needs C > 0, tol > 0 and max_iter >= 1 (got C={}, tol={}, max_iter={})",
                self.c, self.tol, self.max_iter
            )));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::Config(format!("l1_ratio must lie in [0, 1], got {}", self.l1_ratio)));
        }
        Ok(())
    }

    /// `(l1, l2)` coefficients of `l1 * |W|_1 + l2 / 2 * |W|^2` for `n` samples.
    fn strengths(&self, n: usize) -> (f64, f64) {
        let scale = 1.0 / (self.c * n as f64);
        match self.penalty {
            Penalty::None => (0.0, 0.0),
            Penalty::L1 => (scale, 0.0),
            Penalty::L2 => (0.0, scale),
            Penalty::ElasticNet => (self.l1_ratio * scale, (1.0 - self.l1_ratio) * scale),
        }
    }
}

/// Softmax over ten affine class scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub config: LrConfig,
    pub width: usize,
    /// `NUM_PRACTICES x width`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub iterations: usize,
}

impl LrModel {
    pub fn zeros(config: LrConfig, width: usize) -> Self {
        Self {
            config,
            width,
            weights: vec![0.0; NUM_PRACTICES * width],
            bias: vec![0.0; NUM_PRACTICES],
            iterations: 0,
        }
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<[f64; NUM_PRACTICES]> {
        super::check_rows(std::slice::from_ref(x), self.width)?;
        let s = affine_scores(&self.weights, &self.bias, self.width, x);
        let mut p = [0.0; NUM_PRACTICES];
        softmax_slice(&s, &mut p);
        Ok(p)
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Mean cross-entropy and, when `grad` is given, its gradient (weights then bias).
fn data_loss(w: &[f64], b: &[f64], width: usize, rows: &[FeatureVector], labels: &[DataPractice], grad: Option<(&mut [f64], &mut [f64])>) -> f64 {
    let n = rows.len() as f64;
    let mut loss = 0.0;
    let mut p = [0.0; NUM_PRACTICES];
    let mut grad = grad;
    if let Some((gw, gb)) = grad.as_mut() {
        gw.fill(0.0);
        gb.fill(0.0);
    }
    for (x, y) in rows.iter().zip(labels) {
        let s = affine_scores(w, b, width, x);
        softmax_slice(&s, &mut p);
        loss -= p[y.index()].max(PROB_FLOOR).ln();
        if let Some((gw, gb)) = grad.as_mut() {
            p[y.index()] -= 1.0;
            for k in 0..NUM_PRACTICES {
                let g = p[k] / n;
                gb[k] += g;
                for &(col, v) in &x.entries {
                    gw[k * width + col] += g * v;
                }
            }
        }
    }
    loss / n
}

/// Data loss plus the differentiable part of the penalty.
struct Smooth<'a> {
    rows: &'a [FeatureVector],
    labels: &'a [DataPractice],
    width: usize,
    l2: f64,
}

impl Smooth<'_> {
    fn eval(&self, w: &[f64], b: &[f64], grad: Option<(&mut [f64], &mut [f64])>) -> f64 {
        let f = match grad {
            Some((gw, gb)) => {
                let f = data_loss(w, b, self.width, self.rows, self.labels, Some((&mut *gw, gb)));
                for (gi, wi) in gw.iter_mut().zip(w) {
                    *gi += self.l2 * wi;
                }
                f
            }
            None => data_loss(w, b, self.width, self.rows, self.labels, None),
        };
        f + 0.5 * self.l2 * sq_norm(w)
    }
}

fn l1_norm(w: &[f64]) -> f64 {
    w.iter().map(|x| x.abs()).sum()
}

fn sq_norm(w: &[f64]) -> f64 {
    w.iter().map(|x| x * x).sum()
}

pub fn train_lr(rows: &[FeatureVector], labels: &[DataPractice], width: usize, config: &LrConfig) -> Result<LrModel> {
    train_lr_traced(rows, labels, width, config).map(|(m, _)| m)
}

/// Proximal gradient descent with backtracking; also returns the objective
/// after every iteration.
pub fn train_lr_traced(
    rows: &[FeatureVector],
    labels: &[DataPractice],
    width: usize,
    config: &LrConfig,
) -> Result<(LrModel, Vec<f64>)> {
    config.validate()?;
    check_training(rows, labels, width)?;
    let (l1, l2) = config.strengths(rows.len());
    let mut model = LrModel::zeros(config.clone(), width);
    let nw = model.weights.len();
    let problem = Smooth { rows, labels, width, l2 };
    let smooth = |w: &[f64], b: &[f64], g: Option<(&mut [f64], &mut [f64])>| problem.eval(w, b, g);

    let mut gw = vec![0.0; nw];
    let mut gb = vec![0.0; NUM_PRACTICES];
    let mut cand_w = vec![0.0; nw];
    let mut cand_b = vec![0.0; NUM_PRACTICES];
    let mut f = smooth(&model.weights, &model.bias, Some((&mut gw, &mut gb)));
    let mut objective = f + l1 * l1_norm(&model.weights);
    let mut history = Vec::with_capacity(config.max_iter);
    let mut step = 1.0f64;

    for it in 0..config.max_iter {
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..nw {
                let z = model.weights[i] - step * gw[i];
                cand_w[i] = if l1 > 0.0 { z.signum() * (z.abs() - step * l1).max(0.0) } else { z };
            }
            for k in 0..NUM_PRACTICES {
                cand_b[k] = model.bias[k] - step * gb[k];
            }
            let fc = smooth(&cand_w, &cand_b, None);
            let mut lin = 0.0;
            let mut quad = 0.0;
            for i in 0..nw {
                let d = cand_w[i] - model.weights[i];
                lin += gw[i] * d;
                quad += d * d;
            }
            for k in 0..NUM_PRACTICES {
                let d = cand_b[k] - model.bias[k];
                lin += gb[k] * d;
                quad += d * d;
            }
            if !fc.is_finite() {
                step *= 0.5;
                continue;
            }
            if fc <= f + lin + quad / (2.0 * step) + 1e-15 * f.abs() {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            log::debug!("backtracking exhausted at iteration {it}; stopping");
            break;
        }
        std::mem::swap(&mut model.weights, &mut cand_w);
        std::mem::swap(&mut model.bias, &mut cand_b);
        f = smooth(&model.weights, &model.bias, Some((&mut gw, &mut gb)));
        let next = f + l1 * l1_norm(&model.weights);
        if !next.is_finite() {
            return Err(Error::Diverged { epoch: it + 1, loss: next });
        }
        history.push(next);
        model.iterations = it + 1;
        let improvement = objective - next;
        objective = next;
        if improvement.abs() < config.tol {
            break;
        }
        step *= 2.0;
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::argmax;
    use DataPractice::{DataSecurity as B, FirstPartyCollectionUse as A};

    fn separable() -> (Vec<FeatureVector>, Vec<DataPractice>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let t = 0.2 + 0.04 * i as f64;
            if i % 2 == 0 {
                rows.push(FeatureVector { entries: vec![(0, 1.0), (1, t)] });
                labels.push(A);
            } else {
                rows.push(FeatureVector { entries: vec![(1, t), (2, 1.0)] });
                labels.push(B);
            }
        }
        (rows, labels)
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = LrModel::zeros(LrConfig::default(), 3);
        let p = m.predict_proba(&FeatureVector { entries: vec![(1, 0.7)] }).unwrap();
        assert!(p.iter().all(|&x| x == 0.1));
    }

    #[test]
    fn separable_set_fits_with_monotone_loss() {
        let (rows, labels) = separable();
        let cfg = LrConfig { penalty: Penalty::None, tol: 1e-9, max_iter: 200, ..Default::default() };
        let (m, hist) = train_lr_traced(&rows, &labels, 3, &cfg).unwrap();
        assert!(hist.windows(2).all(|w| w[1] <= w[0]), "loss must not increase");
        for (x, y) in rows.iter().zip(&labels) {
            let p = m.predict_proba(x).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(argmax(&p), y.index());
        }
    }

    #[test]
    fn stronger_regularization_shrinks_weights() {
        let (rows, labels) = separable();
        for penalty in [Penalty::L2, Penalty::L1, Penalty::ElasticNet] {
            let strong = train_lr(&rows, &labels, 3, &LrConfig { penalty, c: 0.01, tol: 1e-8, ..Default::default() }).unwrap();
            let weak = train_lr(&rows, &labels, 3, &LrConfig { penalty, c: 1.5, tol: 1e-8, ..Default::default() }).unwrap();
            assert!(strong.weight_norm() < weak.weight_norm(), "{penalty:?}");
        }
    }

    #[test]
    fn l1_produces_exact_zeros() {
        let (mut rows, labels) = separable();
        for r in rows.iter_mut() {
            r.entries.push((3, 0.5));
        }
        let m = train_lr(&rows, &labels, 4, &LrConfig { penalty: Penalty::L1, c: 0.05, tol: 1e-10, max_iter: 500, ..Default::default() }).unwrap();
        assert!(m.weights.iter().any(|&w| w == 0.0));
    }

    #[test]
    fn deterministic_and_validated() {
        let (rows, labels) = separable();
        let a = train_lr(&rows, &labels, 3, &LrConfig::default()).unwrap();
        let b = train_lr(&rows, &labels, 3, &LrConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(train_lr(&rows, &labels, 3, &LrConfig { c: 0.0, ..Default::default() }).is_err());
        assert!(train_lr(&rows, &labels, 3, &LrConfig { tol: -1.0, ..Default::default() }).is_err());
        assert!(a.predict_proba(&FeatureVector { entries: vec![(9, 1.0)] }).is_err());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let (rows, labels) = separable();
        let width = 3;
        let mut w: Vec<f64> = (0..NUM_PRACTICES * width).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.1).collect();
        let b: Vec<f64> = (0..NUM_PRACTICES).map(|i| i as f64 * 0.05).collect();
        let mut gw = vec![0.0; w.len()];
        let mut gb = vec![0.0; NUM_PRACTICES];
        data_loss(&w, &b, width, &rows, &labels, Some((&mut gw, &mut gb)));
        let h = 1e-6;
        for i in [0, 4, 13, 29] {
            let orig = w[i];
            w[i] = orig + h;
            let up = data_loss(&w, &b, width, &rows, &labels, None);
            w[i] = orig - h;
            let down = data_loss(&w, &b, width, &rows, &labels, None);
            w[i] = orig;
            let num = (up - down) / (2.0 * h);
            assert!((num - gw[i]).abs() < 1e-7, "{i}: {num} vs {}", gw[i]);
        }
    }
}
