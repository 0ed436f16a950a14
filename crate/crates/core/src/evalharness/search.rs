use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// One point of a search space: parameter name to value.
pub type Config = BTreeMap<String, Value>;

/// Candidate values per parameter. Grid order is lexicographic by name with
/// the last name varying fastest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace(pub BTreeMap<String, Vec<Value>>);

impl SearchSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, values: impl IntoIterator<Item = impl Into<Value>>) -> Self {
        self.0.insert(name.to_string(), values.into_iter().map(Into::into).collect());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((name, _)) = self.0.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::Config(format!("parameter {name:?} has no candidate values")));
        }
        Ok(())
    }

    pub fn grid_size(&self) -> Result<usize> {
        self.0
            .values()
            .try_fold(1usize, |acc, v| acc.checked_mul(v.len()))
            .ok_or_else(|| Error::Config("search space too large to enumerate".into()))
    }

    /// The `index`-th configuration in grid order.
    pub fn config_at(&self, mut index: usize) -> Config {
        let mut out = Config::new();
        for (name, values) in self.0.iter().rev() {
            out.insert(name.clone(), values[index % values.len()].clone());
            index /= values.len();
        }
        out
    }

    /// Logistic-regression space: four penalties, six tolerances and C from
    /// 0.1 to 2.0 in steps of 0.1.
    pub fn logistic_regression() -> Self {
        Self::new()
            .with("lr.penalty", ["l1", "l2", "elasticnet", "none"])
            .with("lr.tol", [0.1, 0.01, 0.001, 1e-4, 1e-5, 1e-6])
            .with("lr.c", (1..=20).map(|i| i as f64 / 10.0))
    }

    /// Shared recurrent-model space.
    pub fn recurrent() -> Self {
        let rates = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
        Self::new()
            .with("neural.embedding_dropout", [0.0, 0.5])
            .with("neural.input_dropout", rates)
            .with("neural.recurrent_dropout", rates)
            .with("neural.lstm_units", [32, 64, 100, 128, 150, 256])
            .with("neural.lstm_blocks", [1, 2, 3])
            .with("neural.optimizer", ["adam", "adam_lr_0.01", "nadam", "rmsprop"])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub index: usize,
    pub config: Config,
    pub objective: Option<f64>,
    pub error: Option<String>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub strategy: String,
    pub seed: u64,
    pub trials: Vec<TrialResult>,
    /// Position in `trials` of the best finite objective, earliest on ties.
    pub best: Option<usize>,
    /// Seconds per trial, parallel to `trials`; not serialized.
    #[serde(skip)]
    pub runtimes: Vec<f64>,
}

impl SearchOutcome {
    pub fn best_trial(&self) -> Option<&TrialResult> {
        self.best.map(|i| &self.trials[i])
    }

    /// One JSON object per trial including its runtime.
    pub fn trial_log(&self) -> Result<String> {
        let mut out = String::new();
        for (t, secs) in self.trials.iter().zip(&self.runtimes) {
            let mut v = serde_json::to_value(t)?;
            v["runtime_seconds"] = (*secs).into();
            out.push_str(&serde_json::to_string(&v)?);
            out.push('\n');
        }
        Ok(out)
    }
}

fn evaluate<F>(strategy: &str, space: &SearchSpace, indices: Vec<usize>, seed: u64, objective: F) -> SearchOutcome
where
    F: Fn(&Config, u64) -> Result<f64> + Sync,
{
    let runs: Vec<(TrialResult, f64)> = indices
        .into_par_iter()
        .map(|index| {
            let config = space.config_at(index);
            let t0 = Instant::now();
            let (objective, error) = match objective(&config, seed) {
                Ok(v) if v.is_finite() => (Some(v), None),
                Ok(v) => (None, Some(format!("non-finite objective {v}"))),
                Err(e) => (None, Some(e.to_string())),
            };
            let trial = TrialResult {
                index,
                config,
                objective,
                error,
                seed,
            };
            (trial, t0.elapsed().as_secs_f64())
        })
        .collect();
    let (trials, runtimes): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let mut best: Option<usize> = None;
    for (i, t) in trials.iter().enumerate() {
        if let Some(v) = t.objective {
            if best.is_none_or(|b| v > trials[b].objective.expect("best has a value")) {
                best = Some(i);
            }
        }
    }
    SearchOutcome {
        strategy: strategy.to_string(),
        seed,
        trials,
        best,
        runtimes,
    }
}

/// Evaluates every grid point and maximizes `objective`.
pub fn grid_search<F>(space: &SearchSpace, seed: u64, objective: F) -> Result<SearchOutcome>
where
    F: Fn(&Config, u64) -> Result<f64> + Sync,
{
    space.validate()?;
    let n = space.grid_size()?;
    Ok(evaluate("grid", space, (0..n).collect(), seed, objective))
}

/// `budget` uniformly drawn grid points, distinct until the grid is
/// exhausted, maximizing `objective`.
pub fn random_search<F>(space: &SearchSpace, budget: usize, seed: u64, objective: F) -> Result<SearchOutcome>
where
    F: Fn(&Config, u64) -> Result<f64> + Sync,
{
    space.validate()?;
    if budget == 0 {
        return Err(Error::Config("random search budget must be at least 1".into()));
    }
    let n = space.grid_size()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, n, budget.min(n)).into_vec();
    while picks.len() < budget {
        picks.push(rng.gen_range(0..n));
    }
    Ok(evaluate("random", space, picks, seed, objective))
}
