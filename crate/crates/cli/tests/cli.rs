use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::Parser;
use subgec::graph::load_dataset;
use subgec::tensor::Tensor;
use subgec::trainer::TrainConfig;
use subgec_cli::embeddings::{read_embeddings, write_embeddings};
use subgec_cli::manifest::RunManifest;
use subgec_cli::{run, Cli, CHECKPOINT_FILE, EMBEDDINGS_FILE, MANIFEST_FILE, TRACE_FILE};
use tempfile::TempDir;

fn exec(args: &[&str]) -> anyhow::Result<String> {
    let cli = Cli::try_parse_from(std::iter::once("subgec").chain(args.iter().copied()))?;
    let mut out = Vec::new();
    run(cli.command, &mut out)?;
    Ok(String::from_utf8(out)?)
}

fn binary(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_subgec"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn toy_dataset(dir: &TempDir) -> PathBuf {
    let data = dir.path().join("toy");
    exec(&["generate", "--kind", "toy", "--out", s(&data)]).unwrap();
    data
}

fn planted_dataset(dir: &TempDir, nodes: usize) -> PathBuf {
    let data = dir.path().join("planted");
    let n = nodes.to_string();
    exec(&[
        "generate",
        "--kind",
        "planted",
        "--nodes",
        &n,
        "--out",
        s(&data),
    ])
    .unwrap();
    data
}

fn small_config(dir: &TempDir, seed: u64) -> PathBuf {
    let cfg = TrainConfig {
        subgraph_size: 3,
        anchors_per_iter: 4,
        hidden_dim: 8,
        embed_dim: 4,
        sage_dim: 4,
        epochs: 3,
        seed,
        ..Default::default()
    };
    let path = dir.path().join(format!("config-{seed}.json"));
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    path
}

/// One-hot label embeddings, so a linear probe separates the classes.
fn label_embeddings(data: &Path, path: &Path) {
    let g = load_dataset(data).unwrap();
    let c = g.num_classes();
    let mut rows = vec![0.0; g.num_nodes() * c];
    for (v, &l) in g.labels().iter().enumerate() {
        rows[v * c + l] = 1.0;
    }
    write_embeddings(&Tensor::matrix(g.num_nodes(), c, rows).unwrap(), path).unwrap();
}

#[test]
fn default_training_on_the_toy_graph_writes_four_files() {
    let dir = TempDir::new().unwrap();
    let data = toy_dataset(&dir);
    let out = dir.path().join("run");
    let status = binary(&["train", "--data", s(&data), "--out", s(&out)]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let mut expected = vec![CHECKPOINT_FILE, EMBEDDINGS_FILE, TRACE_FILE, MANIFEST_FILE];
    expected.sort();
    assert_eq!(names, expected);
    let emb = read_embeddings(&out.join(EMBEDDINGS_FILE)).unwrap();
    assert_eq!(emb.shape(), &[12, TrainConfig::default().embed_dim]);
}

#[test]
fn missing_edges_file_fails_and_names_it() {
    let dir = TempDir::new().unwrap();
    let data = toy_dataset(&dir);
    fs::remove_file(data.join("edges.tsv")).unwrap();
    let result = binary(&[
        "train",
        "--data",
        s(&data),
        "--out",
        s(&dir.path().join("run")),
    ]);
    assert_eq!(result.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&result.stderr).contains("edges.tsv"));
}

#[test]
fn same_seed_gives_byte_identical_embeddings() {
    let dir = TempDir::new().unwrap();
    let data = toy_dataset(&dir);
    let cfg = small_config(&dir, 7);
    let read = |name: &str| {
        let out = dir.path().join(name);
        exec(&[
            "train",
            "--data",
            s(&data),
            "--config",
            s(&cfg),
            "--out",
            s(&out),
        ])
        .unwrap();
        fs::read(out.join(EMBEDDINGS_FILE)).unwrap()
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn seed_flag_overrides_the_config_seed() {
    let dir = TempDir::new().unwrap();
    let data = toy_dataset(&dir);
    let cfg = small_config(&dir, 7);
    let train = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec![
            "train",
            "--data",
            s(&data),
            "--config",
            s(&cfg),
            "--out",
            s(&out),
        ];
        args.extend_from_slice(extra);
        exec(&args).unwrap();
        (
            fs::read(out.join(EMBEDDINGS_FILE)).unwrap(),
            RunManifest::read(&out.join(MANIFEST_FILE)).unwrap(),
        )
    };
    let (base, _) = train("base", &[]);
    let (other, manifest) = train("other", &["--seed", "8"]);
    assert_ne!(base, other);
    assert_eq!(manifest.seed, 8);
    assert_eq!(manifest.config.seed, 8);
}

#[test]
fn manifest_round_trips_the_config_and_names_existing_outputs() {
    let dir = TempDir::new().unwrap();
    let data = toy_dataset(&dir);
    let cfg_path = small_config(&dir, 3);
    let out = dir.path().join("run");
    exec(&[
        "train",
        "--data",
        s(&data),
        "--config",
        s(&cfg_path),
        "--out",
        s(&out),
    ])
    .unwrap();
    let manifest = RunManifest::read(&out.join(MANIFEST_FILE)).unwrap();
    let cfg: TrainConfig = serde_json::from_str(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    assert_eq!(manifest.config, cfg);
    assert_eq!(manifest.dataset, data);
    assert!(manifest.finished_at.is_some());
    assert!(!manifest.git_describe.is_empty());
    for p in &manifest.outputs {
        assert!(p.exists(), "{} missing", p.display());
    }
    let again: RunManifest =
        serde_json::from_str(&serde_json::to_string(&manifest).unwrap()).unwrap();
    assert_eq!(again, manifest);
}

#[test]
fn invalid_config_is_rejected() {
    let dir = TempDir::new().unwrap();
    let data = toy_dataset(&dir);
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"learning_rate": -1.0}"#).unwrap();
    let result = binary(&[
        "train",
        "--data",
        s(&data),
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("run")),
    ]);
    assert_eq!(result.status.code(), Some(1));
    fs::write(&cfg, r#"{"no_such_field": 1}"#).unwrap();
    let err = exec(&[
        "train",
        "--data",
        s(&data),
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("run")),
    ]);
    assert!(format!("{:#}", err.unwrap_err()).contains("bad.json"));
}

#[test]
fn probe_on_separable_embeddings_is_perfect() {
    let dir = TempDir::new().unwrap();
    let data = planted_dataset(&dir, 120);
    let emb = dir.path().join("emb.tsv");
    label_embeddings(&data, &emb);
    let table = dir.path().join("probe.tsv");
    let printed = exec(&[
        "probe",
        "--embeddings",
        s(&emb),
        "--data",
        s(&data),
        "--seeds",
        "3",
        "--out",
        s(&table),
    ])
    .unwrap();
    assert_eq!(printed.trim(), "100.00±0.00");
    let rows = fs::read_to_string(&table).unwrap();
    assert_eq!(rows.lines().count(), 4);
}

#[test]
fn probe_with_one_seed_has_zero_spread() {
    let dir = TempDir::new().unwrap();
    let data = planted_dataset(&dir, 120);
    let emb = dir.path().join("emb.tsv");
    let g = load_dataset(&data).unwrap();
    let noise: Vec<f64> = (0..g.num_nodes() * 3)
        .map(|i| ((i * 37 % 101) as f64).sin())
        .collect();
    write_embeddings(&Tensor::matrix(g.num_nodes(), 3, noise).unwrap(), &emb).unwrap();
    let printed = exec(&[
        "probe",
        "--embeddings",
        s(&emb),
        "--data",
        s(&data),
        "--seeds",
        "1",
    ])
    .unwrap();
    let (mean, std) = printed.trim().split_once('±').unwrap();
    let mean: f64 = mean.parse().unwrap();
    assert!((0.0..=100.0).contains(&mean));
    assert_eq!(std, "0.00");
}

#[test]
fn probe_rejects_a_row_count_mismatch() {
    let dir = TempDir::new().unwrap();
    let data = planted_dataset(&dir, 120);
    let emb = dir.path().join("emb.tsv");
    write_embeddings(&Tensor::matrix(5, 2, vec![0.0; 10]).unwrap(), &emb).unwrap();
    let result = binary(&["probe", "--embeddings", s(&emb), "--data", s(&data)]);
    assert_eq!(result.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&result.stderr).contains("emb.tsv"));
}

#[test]
fn generate_is_reproducible_for_a_seed() {
    let dir = TempDir::new().unwrap();
    let make = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        exec(&[
            "generate",
            "--kind",
            "planted",
            "--nodes",
            "60",
            "--seed",
            seed,
            "--out",
            s(&out),
        ])
        .unwrap();
        ["edges.tsv", "features.tsv", "meta.json"].map(|f| fs::read(out.join(f)).unwrap())
    };
    assert_eq!(make("a", "4"), make("b", "4"));
    assert_ne!(make("c", "4")[0], make("d", "5")[0]);
}

#[test]
fn inspect_reports_the_toy_graph() {
    let dir = TempDir::new().unwrap();
    let data = toy_dataset(&dir);
    let summary: serde_json::Value =
        serde_json::from_str(&exec(&["inspect", "--data", s(&data)]).unwrap()).unwrap();
    assert_eq!(summary["nodes"], 12);
    assert_eq!(summary["classes"], 2);
}

#[test]
fn singleton_sweep_writes_one_row() {
    let dir = TempDir::new().unwrap();
    let data = toy_dataset(&dir);
    let cfg = small_config(&dir, 0);
    let table = dir.path().join("sweep.tsv");
    let args = [
        "sweep",
        "--data",
        s(&data),
        "--config",
        s(&cfg),
        "--param",
        "beta",
        "--values",
        "0.1",
        "--seeds",
        "2",
        "--out",
        s(&table),
    ];
    let printed = exec(&args).unwrap();
    assert_eq!(fs::read_to_string(&table).unwrap().lines().count(), 2);
    assert_eq!(printed.lines().count(), 1);
    assert!(printed.starts_with("beta=0.1\t"));
}

#[test]
fn sweep_lists_every_value() {
    let dir = TempDir::new().unwrap();
    let data = toy_dataset(&dir);
    let cfg = small_config(&dir, 0);
    let args = [
        "sweep",
        "--data",
        s(&data),
        "--config",
        s(&cfg),
        "--param",
        "k",
        "--values",
        "2,3,4",
        "--seeds",
        "1",
    ];
    let printed = exec(&args).unwrap();
    assert_eq!(printed.lines().count(), 4);
}

#[test]
fn search_writes_the_best_config_and_every_trial() {
    let dir = TempDir::new().unwrap();
    let data = toy_dataset(&dir);
    let cfg = small_config(&dir, 0);
    let out = dir.path().join("search");
    let args = [
        "search",
        "--data",
        s(&data),
        "--config",
        s(&cfg),
        "--budget",
        "2",
        "--seeds",
        "1",
        "--out",
        s(&out),
    ];
    exec(&args).unwrap();
    let best: TrainConfig =
        serde_json::from_str(&fs::read_to_string(out.join("best_config.json")).unwrap()).unwrap();
    best.validate().unwrap();
    assert_eq!(
        fs::read_to_string(out.join("trials.tsv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}

fn bench_means(table: &str) -> Vec<(usize, usize, usize, f64)> {
    table
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
                f[3].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn bench_with_one_trial_reports_a_single_sample() {
    let table = exec(&[
        "bench-ot",
        "--nodes",
        "100",
        "--k",
        "5",
        "--trials",
        "1",
        "--anchors",
        "20",
    ])
    .unwrap();
    assert!(table.starts_with("nodes\tk\ttrials\tmean_seconds\tmin_seconds\tmax_seconds\n"));
    let rows = bench_means(&table);
    assert_eq!(rows.len(), 1);
    let (n, k, trials, mean) = rows[0];
    assert_eq!((n, k, trials), (100, 5, 1));
    assert!(mean > 0.0);
}

#[test]
fn bench_larger_subgraphs_take_longer() {
    let table = exec(&[
        "bench-ot",
        "--nodes",
        "300",
        "--k",
        "5,31",
        "--trials",
        "2",
        "--anchors",
        "30",
    ])
    .unwrap();
    let rows = bench_means(&table);
    assert_eq!(rows.len(), 2);
    assert!(
        rows[1].3 > rows[0].3,
        "k=31 {} vs k=5 {}",
        rows[1].3,
        rows[0].3
    );
}

#[test]
fn bench_rejects_zero_trials() {
    assert!(exec(&["bench-ot", "--nodes", "100", "--k", "5", "--trials", "0"]).is_err());
}
