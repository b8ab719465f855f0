//! Command-line driver for dataset generation and inspection, training,
//! linear probing, sensitivity sweeps, random search and loss timing.
//!
//! The binary is a thin shell around [`run`], so every command can be
//! exercised in-process.

pub mod bench;
pub mod embeddings;
pub mod manifest;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use subgec::gnn::save_checkpoint;
use subgec::graph::{load_dataset, save_dataset, Graph};
use subgec::synthetic::{toy_graph, PlantedPartition};
use subgec::trainer::{
    fit_probe, random_search, sensitivity_sweep, train_with_progress, write_sweep_tsv,
    write_trace_tsv, LabeledNodes, ProbeConfig, ProbeResult, SearchSpace, SweepParam, TrainConfig,
};

use crate::bench::{time_loss, write_bench_tsv};
use crate::embeddings::{read_embeddings, write_embeddings};
use crate::manifest::RunManifest;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const EMBEDDINGS_FILE: &str = "embeddings.tsv";
pub const TRACE_FILE: &str = "loss_trace.tsv";

#[derive(Debug, Parser)]
#[command(
    name = "subgec",
    version,
    about = "Subgraph Gaussian embedding contrast"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetKind {
    /// The fixed 12-node two-community graph.
    Toy,
    /// A planted-partition graph with Gaussian class features.
    Planted,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated dataset in the on-disk directory format.
    Generate {
        #[arg(long, value_enum)]
        kind: DatasetKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        nodes: usize,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 16)]
        features: usize,
        #[arg(long, default_value_t = 0.8)]
        homophily: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print size, degree and split statistics of a dataset as JSON.
    Inspect {
        #[arg(long)]
        data: PathBuf,
    },
    /// Train a model and export checkpoint, embeddings, loss trace and manifest.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// JSON training config; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Linear-probe an embeddings table and print test accuracy as mean±std.
    Probe {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Per-seed accuracy table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and probe one model per value of beta or k.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Sweep table; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random hyperparameter search scored on the validation split.
    Search {
        #[arg(long)]
        data: PathBuf,
        /// Base config whose fields are kept where the search space does not vary them.
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON search space; omitted ranges take their defaults.
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Directory receiving best_config.json and trials.tsv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Time one full loss evaluation on generated graphs.
    BenchOt {
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        nodes: Vec<usize>,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        k: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 100)]
        anchors: usize,
        #[arg(long, default_value_t = 32)]
        features: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Timing table; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Executes `cmd`, writing human-readable results to `stdout`.
pub fn run(cmd: Command, stdout: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Generate {
            kind,
            out,
            nodes,
            classes,
            features,
            homophily,
            seed,
        } => {
            let g = match kind {
                DatasetKind::Toy => toy_graph(),
                DatasetKind::Planted => PlantedPartition {
                    nodes,
                    classes,
                    features,
                    homophily,
                    seed,
                    ..Default::default()
                }
                .generate()?,
            };
            save_dataset(&g, &out)?;
            writeln!(stdout, "wrote {} nodes to {}", g.num_nodes(), out.display())?;
        }
        Command::Inspect { data } => {
            let g = load(&data)?;
            writeln!(stdout, "{}", serde_json::to_string_pretty(&summary(&g))?)?;
        }
        Command::Train {
            data,
            config,
            out,
            seed,
        } => {
            let mut cfg = read_config(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let paths = train_command(&data, cfg, &out)?;
            writeln!(
                stdout,
                "wrote {}",
                paths
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            )?;
        }
        Command::Probe {
            embeddings,
            data,
            seeds,
            out,
        } => {
            let result = probe_command(&embeddings, &data, seeds)?;
            if let Some(path) = out {
                let mut text = String::from("seed\taccuracy\n");
                for (s, a) in result.accuracies.iter().enumerate() {
                    text += &format!("{s}\t{a}\n");
                }
                fs::write(&path, text)
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            writeln!(stdout, "{}", result.display_percent())?;
        }
        Command::Sweep {
            data,
            config,
            param,
            values,
            seeds,
            out,
        } => {
            let g = load(&data)?;
            let cfg = read_config(config.as_deref())?;
            let rows = sensitivity_sweep(&g, &cfg, param, &values, &probe_config(seeds))?;
            match out {
                Some(path) => {
                    let file = fs::File::create(&path)
                        .with_context(|| format!("cannot create {}", path.display()))?;
                    write_sweep_tsv(&rows, file)?;
                    for r in &rows {
                        writeln!(
                            stdout,
                            "{}={}\t{}",
                            param.name(),
                            r.value,
                            r.result.display_percent()
                        )?;
                    }
                }
                None => write_sweep_tsv(&rows, &mut *stdout)?,
            }
        }
        Command::Search {
            data,
            config,
            space,
            budget,
            seed,
            seeds,
            out,
        } => {
            let g = load(&data)?;
            let base = read_config(config.as_deref())?;
            let space: SearchSpace = match space {
                Some(p) => read_json(&p)?,
                None => SearchSpace::default(),
            };
            let outcome = random_search(&g, &base, &space, budget, seed, &probe_config(seeds))?;
            fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            let best = out.join("best_config.json");
            fs::write(&best, serde_json::to_string_pretty(&outcome.best)? + "\n")
                .with_context(|| format!("cannot write {}", best.display()))?;
            let mut table = String::from("trial\tval_accuracy\tconfig\n");
            for (t, trial) in outcome.trials.iter().enumerate() {
                table += &format!(
                    "{t}\t{}\t{}\n",
                    trial.val_accuracy,
                    serde_json::to_string(&trial.config)?
                );
            }
            let trials = out.join("trials.tsv");
            fs::write(&trials, table)
                .with_context(|| format!("cannot write {}", trials.display()))?;
            writeln!(
                stdout,
                "best validation accuracy {:.2} written to {}",
                100.0 * outcome.best_val_accuracy,
                best.display()
            )?;
        }
        Command::BenchOt {
            nodes,
            k,
            trials,
            anchors,
            features,
            seed,
            out,
        } => {
            if trials == 0 {
                bail!("--trials must be at least 1");
            }
            let base = TrainConfig {
                anchors_per_iter: anchors,
                seed,
                ..Default::default()
            };
            let mut rows = Vec::new();
            for &n in &nodes {
                let graph = PlantedPartition {
                    nodes: n,
                    features,
                    seed,
                    ..Default::default()
                };
                for &size in &k {
                    rows.push(time_loss(&graph, &base, size, trials)?);
                }
            }
            match out {
                Some(path) => {
                    let file = fs::File::create(&path)
                        .with_context(|| format!("cannot create {}", path.display()))?;
                    write_bench_tsv(&rows, file)?;
                }
                None => write_bench_tsv(&rows, &mut *stdout)?,
            }
        }
    }
    Ok(())
}

fn load(dir: &Path) -> Result<Graph> {
    load_dataset(dir).with_context(|| format!("cannot load dataset {}", dir.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

/// Parses a config file, or returns the defaults when no file is given.
pub fn read_config(path: Option<&Path>) -> Result<TrainConfig> {
    let cfg: TrainConfig = match path {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn probe_config(seeds: usize) -> ProbeConfig {
    ProbeConfig {
        seeds,
        ..Default::default()
    }
}

fn summary(g: &Graph) -> serde_json::Value {
    let degrees: Vec<usize> = (0..g.num_nodes()).map(|v| g.degree(v)).collect();
    let mut class_sizes = vec![0usize; g.num_classes()];
    for &l in g.labels() {
        class_sizes[l] += 1;
    }
    let s = g.splits();
    serde_json::json!({
        "nodes": g.num_nodes(),
        "edges": g.num_edges(),
        "features": g.num_features(),
        "classes": g.num_classes(),
        "class_sizes": class_sizes,
        "mean_degree": degrees.iter().sum::<usize>() as f64 / g.num_nodes().max(1) as f64,
        "max_degree": degrees.iter().max().copied().unwrap_or(0),
        "isolated_nodes": degrees.iter().filter(|&&d| d == 0).count(),
        "splits": {"train": s.train.len(), "val": s.val.len(), "test": s.test.len()},
    })
}

/// Trains on the dataset in `data` and writes the four run files into
/// `out`. The manifest is written before training and rewritten with the
/// finish time afterwards. Returns the paths written.
pub fn train_command(data: &Path, cfg: TrainConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let g = load(data)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let manifest_path = out.join(MANIFEST_FILE);
    let outputs = vec![
        out.join(CHECKPOINT_FILE),
        out.join(EMBEDDINGS_FILE),
        out.join(TRACE_FILE),
    ];
    let mut manifest = RunManifest::new(cfg.clone(), data, outputs.clone());
    manifest.write(&manifest_path)?;

    let report = (cfg.epochs / 10).max(1);
    let outcome = train_with_progress(&g, &cfg, |log| {
        if (log.iteration + 1) % report == 0 {
            log::info!("iteration {}: loss {:.6}", log.iteration + 1, log.total);
        }
    })?;
    save_checkpoint(&outcome.params, &outputs[0])?;
    write_embeddings(&outcome.embeddings, &outputs[1])?;
    let trace = fs::File::create(&outputs[2])
        .with_context(|| format!("cannot create {}", outputs[2].display()))?;
    write_trace_tsv(&outcome.trace, std::io::BufWriter::new(trace))
        .with_context(|| format!("cannot write {}", outputs[2].display()))?;

    manifest.finish();
    manifest.write(&manifest_path)?;
    let mut written = outputs;
    written.push(manifest_path);
    Ok(written)
}

/// Probes the embeddings table against the dataset's splits.
pub fn probe_command(embeddings: &Path, data: &Path, seeds: usize) -> Result<ProbeResult> {
    let g = load(data)?;
    let emb = read_embeddings(embeddings)?;
    if emb.rows() != g.num_nodes() {
        bail!(
            "{} has {} rows but the dataset has {} nodes",
            embeddings.display(),
            emb.rows(),
            g.num_nodes()
        );
    }
    let s = g.splits();
    let fitted = fit_probe(
        &emb,
        &LabeledNodes::from_graph(&g, &s.train),
        &LabeledNodes::from_graph(&g, &s.val),
        g.num_classes(),
        &probe_config(seeds),
    )?;
    Ok(fitted.score(&emb, &LabeledNodes::from_graph(&g, &s.test))?)
}
