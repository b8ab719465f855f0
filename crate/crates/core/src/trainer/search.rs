//! Sensitivity sweeps over one hyperparameter and random search scored on
//! the validation split.

use std::io::Write;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::probe::{evaluate_probe, fit_probe, LabeledNodes, ProbeConfig, ProbeResult};
use super::{train, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Beta,
    K,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Beta => "beta",
            SweepParam::K => "k",
        }
    }

    fn apply(self, base: &TrainConfig, value: f64) -> Result<TrainConfig> {
        let mut cfg = base.clone();
        match self {
            SweepParam::Beta => cfg.beta = value,
            SweepParam::K => {
                if value < 1.0 || value.fract() != 0.0 || value > u32::MAX as f64 {
                    return Err(Error::contract(format!(
                        "subgraph size must be a positive integer, got {value}"
                    )));
                }
                cfg.subgraph_size = value as usize;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(SweepParam::Beta),
            "k" => Ok(SweepParam::K),
            other => Err(Error::contract(format!(
                "unknown sweep parameter {other:?}; expected beta or k"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub result: ProbeResult,
}

/// Trains and probes one model per value of `param`, all other settings
/// taken from `base`.
pub fn sensitivity_sweep(
    g: &Graph,
    base: &TrainConfig,
    param: SweepParam,
    values: &[f64],
    probe: &ProbeConfig,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::contract("sweep needs at least one value"));
    }
    let configs = values
        .iter()
        .map(|&v| param.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    values
        .iter()
        .zip(configs)
        .map(|(&value, cfg)| {
            log::info!("sweep {}={value}", param.name());
            let outcome = train(g, &cfg)?;
            Ok(SweepRow {
                param,
                value,
                result: evaluate_probe(g, &outcome.embeddings, probe)?,
            })
        })
        .collect()
}

/// `param value mean std accuracies` with accuracies comma-separated.
pub fn write_sweep_tsv(rows: &[SweepRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "param\tvalue\tmean\tstd\taccuracies")?;
    for r in rows {
        let accs: Vec<String> = r.result.accuracies.iter().map(|a| a.to_string()).collect();
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.param.name(),
            r.value,
            r.result.mean,
            r.result.std,
            accs.join(",")
        )?;
    }
    Ok(())
}

/// Ranges sampled by [`random_search`]. Learning rate and beta are drawn
/// log-uniformly, alpha and tau uniformly, the subgraph size from a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub learning_rate: [f64; 2],
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub tau: [f64; 2],
    pub subgraph_size: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: [1e-3, 1e-2],
            alpha: [0.0, 1.0],
            beta: [1e-5, 1e-1],
            tau: [0.2, 1.0],
            subgraph_size: vec![5, 10, 15],
        }
    }
}

impl SearchSpace {
    fn validate(&self) -> Result<()> {
        let ordered = |name: &str, r: [f64; 2], positive: bool| {
            if !(r[0] <= r[1]) || (positive && !(r[0] > 0.0)) || !r.iter().all(|v| v.is_finite()) {
                Err(Error::contract(format!(
                    "search range {name} {r:?} is invalid"
                )))
            } else {
                Ok(())
            }
        };
        ordered("learning_rate", self.learning_rate, true)?;
        ordered("alpha", self.alpha, false)?;
        ordered("beta", self.beta, true)?;
        ordered("tau", self.tau, true)?;
        if self.subgraph_size.is_empty() {
            return Err(Error::contract(
                "search space needs at least one subgraph size",
            ));
        }
        Ok(())
    }

    fn sample(&self, base: &TrainConfig, rng: &mut ChaCha8Rng) -> TrainConfig {
        let uniform = |rng: &mut ChaCha8Rng, r: [f64; 2]| {
            if r[0] == r[1] {
                r[0]
            } else {
                rng.random_range(r[0]..r[1])
            }
        };
        let log_uniform =
            |rng: &mut ChaCha8Rng, r: [f64; 2]| uniform(rng, [r[0].ln(), r[1].ln()]).exp();
        TrainConfig {
            learning_rate: log_uniform(rng, self.learning_rate),
            alpha: uniform(rng, self.alpha),
            beta: log_uniform(rng, self.beta),
            tau: uniform(rng, self.tau),
            subgraph_size: *self.subgraph_size.choose(rng).expect("non-empty list"),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub config: TrainConfig,
    /// Mean validation accuracy over probe seeds.
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: TrainConfig,
    pub best_val_accuracy: f64,
    pub trials: Vec<Trial>,
}

/// Samples `budget` configurations around `base`, trains each, and keeps the
/// one with the highest validation accuracy (earliest on ties). Test labels
/// are never read.
pub fn random_search(
    g: &Graph,
    base: &TrainConfig,
    space: &SearchSpace,
    budget: usize,
    seed: u64,
    probe: &ProbeConfig,
) -> Result<SearchOutcome> {
    if budget == 0 {
        return Err(Error::contract("random search budget must be at least 1"));
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train_set = LabeledNodes::from_graph(g, &g.splits().train);
    let val_set = LabeledNodes::from_graph(g, &g.splits().val);
    let mut trials: Vec<Trial> = Vec::with_capacity(budget);
    for t in 0..budget {
        let config = space.sample(base, &mut rng);
        log::info!("search trial {t}: {config:?}");
        let outcome = train(g, &config)?;
        let fitted = fit_probe(
            &outcome.embeddings,
            &train_set,
            &val_set,
            g.num_classes(),
            probe,
        )?;
        let val_accuracy = ProbeResult::from_accuracies(fitted.val_accuracies.clone()).mean;
        trials.push(Trial {
            config,
            val_accuracy,
        });
    }
    let best = trials
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.val_accuracy
                .total_cmp(&b.1.val_accuracy)
                .then(b.0.cmp(&a.0))
        })
        .map(|(_, t)| t.clone())
        .expect("budget >= 1");
    Ok(SearchOutcome {
        best_val_accuracy: best.val_accuracy,
        best: best.config,
        trials,
    })
}
