use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use subgec::error::Error;
use subgec::gnn::ModelParams;
use subgec::graph::{Graph, Splits};
use subgec::synthetic::{toy_graph, PlantedPartition};
use subgec::tensor::Tensor;
use subgec::trainer::{
    fit_probe, posterior_stats, random_search, sensitivity_sweep, train, write_sweep_tsv,
    write_trace_tsv, LabeledNodes, ProbeConfig, SearchSpace, SweepParam, TrainConfig,
};

fn toy_config() -> TrainConfig {
    TrainConfig {
        subgraph_size: 3,
        anchors_per_iter: 4,
        hidden_dim: 8,
        embed_dim: 4,
        sage_dim: 4,
        learning_rate: 1e-2,
        epochs: 5,
        ..Default::default()
    }
}

fn quick_probe() -> ProbeConfig {
    ProbeConfig {
        steps: 100,
        seeds: 3,
        ..Default::default()
    }
}

#[test]
fn toy_smoke_run_decreases_the_loss() {
    let out = train(&toy_graph(), &toy_config()).unwrap();
    assert_eq!(out.trace.len(), 5);
    assert!(out
        .trace
        .iter()
        .all(|r| r.total.is_finite() && r.kl.is_finite()));
    assert!(out.trace[4].total < out.trace[0].total, "{:?}", out.trace);
    assert_eq!(out.embeddings.shape(), &[12, 4]);
}

#[test]
fn zero_epochs_returns_the_initialization() {
    let cfg = TrainConfig {
        epochs: 0,
        ..toy_config()
    };
    let out = train(&toy_graph(), &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = ModelParams::init(cfg.dims(5), &mut rng);
    assert_eq!(out.params, init);
    assert!(out.trace.is_empty());
}

#[test]
fn training_is_bit_identical_across_runs() {
    let cfg = TrainConfig {
        epochs: 8,
        ..toy_config()
    };
    let (a, b) = (
        train(&toy_graph(), &cfg).unwrap(),
        train(&toy_graph(), &cfg).unwrap(),
    );
    let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.embeddings), bits(&b.embeddings));
    let (mut ta, mut tb) = (Vec::new(), Vec::new());
    write_trace_tsv(&a.trace, &mut ta).unwrap();
    write_trace_tsv(&b.trace, &mut tb).unwrap();
    assert_eq!(ta, tb);
    let other = train(&toy_graph(), &TrainConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(bits(&a.embeddings), bits(&other.embeddings));
}

#[test]
fn kl_term_shrinks_when_regularized() {
    // The contrastive term inflates the KL during the first hundred steps;
    // afterwards the regularized run pulls it back down.
    let cfg = TrainConfig {
        epochs: 600,
        beta: 1e-3,
        ..toy_config()
    };
    let window = |trace: &[subgec::trainer::IterationLog], from: usize| {
        trace[from..from + 100].iter().map(|r| r.kl).sum::<f64>() / 100.0
    };
    let trace = train(&toy_graph(), &cfg).unwrap().trace;
    let (early, late) = (window(&trace, 100), window(&trace, 500));
    assert!(late < early, "KL {early} -> {late}");

    let plain = train(&toy_graph(), &TrainConfig { beta: 0.0, ..cfg })
        .unwrap()
        .trace;
    assert!(window(&plain, 500) > window(&plain, 100));
    assert!(late < window(&plain, 500));
}

#[test]
fn trace_tsv_marks_skipped_terms() {
    let cfg = TrainConfig {
        alpha: 1.0,
        epochs: 2,
        ..toy_config()
    };
    let out = train(&toy_graph(), &cfg).unwrap();
    let mut buf = Vec::new();
    write_trace_tsv(&out.trace, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "iteration\ttotal\twasserstein\tgromov\tkl");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].split('\t').nth(3) == Some("NA"));
    assert!(lines[1].split('\t').nth(2) != Some("NA"));
}

#[test]
fn strong_regularization_pulls_posteriors_to_the_prior() {
    let g = toy_graph();
    let all: Vec<usize> = (0..12).collect();
    let stats = |beta: f64| {
        let cfg = TrainConfig {
            beta,
            epochs: 300,
            ..toy_config()
        };
        posterior_stats(&g, &train(&g, &cfg).unwrap().params, &all).unwrap()
    };
    let (mu, sigma) = stats(10.0);
    assert!(
        mu < 0.1 && sigma < 0.1,
        "beta=10: |mu| {mu}, |sigma-1| {sigma}"
    );
    let (mu, sigma) = stats(0.0);
    assert!(
        mu > 0.3 || sigma > 0.3,
        "beta=0: |mu| {mu}, |sigma-1| {sigma}"
    );
}

#[test]
fn anchor_count_is_capped_at_the_node_count() {
    let capped = TrainConfig {
        anchors_per_iter: 100,
        epochs: 3,
        ..toy_config()
    };
    let exact = TrainConfig {
        anchors_per_iter: 12,
        ..capped.clone()
    };
    let (a, b) = (
        train(&toy_graph(), &capped).unwrap(),
        train(&toy_graph(), &exact).unwrap(),
    );
    assert_eq!(a.trace, b.trace);
}

#[test]
fn runaway_learning_rate_reports_divergence() {
    let cfg = TrainConfig {
        learning_rate: 1e150,
        epochs: 50,
        ..toy_config()
    };
    match train(&toy_graph(), &cfg) {
        Err(Error::Divergence { message, .. }) => assert!(message.contains("\"learning_rate\"")),
        Ok(_) => {}
        Err(e) => panic!("unexpected error {e}"),
    }
}

fn labeled_graph(features: Tensor, labels: Vec<usize>, classes: usize) -> Graph {
    let n = labels.len();
    let splits = Splits {
        train: (0..n).step_by(3).collect(),
        val: (1..n).step_by(3).collect(),
        test: (2..n).step_by(3).collect(),
    };
    let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    Graph::from_edges(n, &edges, features, labels, classes, splits)
        .unwrap()
        .0
}

#[test]
fn separable_embeddings_probe_perfectly() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let labels: Vec<usize> = (0..60).map(|i| i % 2).collect();
    let data = labels
        .iter()
        .flat_map(|&c| {
            let shift = if c == 0 { 3.0 } else { -3.0 };
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            [shift + 0.3 * a, b]
        })
        .collect();
    let emb = Tensor::matrix(60, 2, data).unwrap();
    let g = labeled_graph(emb.clone(), labels, 2);
    let r = subgec::trainer::evaluate_probe(&g, &emb, &ProbeConfig::default()).unwrap();
    assert_eq!(r.accuracies.len(), 10);
    assert_eq!(r.mean, 1.0);
    assert_eq!(r.display_percent(), "100.00±0.00");
}

#[test]
fn random_embeddings_probe_at_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (n, classes) = (3000, 4);
    let labels: Vec<usize> = (0..n).map(|i| (i / 3) % classes).collect();
    let emb = Tensor::matrix(
        n,
        8,
        (0..n * 8)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect(),
    )
    .unwrap();
    let g = labeled_graph(emb.clone(), labels, classes);
    let cfg = ProbeConfig {
        seeds: 3,
        ..Default::default()
    };
    let r = subgec::trainer::evaluate_probe(&g, &emb, &cfg).unwrap();
    assert!((r.mean - 0.25).abs() < 0.05, "accuracy {}", r.mean);
    assert_eq!(r, subgec::trainer::evaluate_probe(&g, &emb, &cfg).unwrap());
}

#[test]
fn probe_scoring_is_separate_from_fitting() {
    let g = toy_graph();
    let s = g.splits();
    let train_set = LabeledNodes::from_graph(&g, &s.train);
    let val_set = LabeledNodes::from_graph(&g, &s.val);
    let fitted = fit_probe(g.features(), &train_set, &val_set, 2, &quick_probe()).unwrap();
    assert_eq!(fitted.val_accuracies.len(), 3);
    let test = fitted
        .score(g.features(), &LabeledNodes::from_graph(&g, &s.test))
        .unwrap();
    assert!(test.accuracies.iter().all(|a| (0.0..=1.0).contains(a)));
    assert!(test.std >= 0.0);
}

#[test]
fn singleton_sweep_gives_one_row() {
    let g = toy_graph();
    let rows = sensitivity_sweep(&g, &toy_config(), SweepParam::K, &[3.0], &quick_probe()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].param, SweepParam::K);
    let mut buf = Vec::new();
    write_sweep_tsv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("k\t3\t"));
}

#[test]
fn sweep_rejects_bad_values() {
    let g = toy_graph();
    assert!(sensitivity_sweep(&g, &toy_config(), SweepParam::K, &[], &quick_probe()).is_err());
    assert!(sensitivity_sweep(&g, &toy_config(), SweepParam::K, &[2.5], &quick_probe()).is_err());
    assert!("gamma".parse::<SweepParam>().is_err());
    assert_eq!("beta".parse::<SweepParam>().unwrap(), SweepParam::Beta);
}

#[test]
fn search_with_budget_one_returns_its_only_trial() {
    let g = toy_graph();
    let out = random_search(
        &g,
        &toy_config(),
        &SearchSpace::default(),
        1,
        7,
        &quick_probe(),
    )
    .unwrap();
    assert_eq!(out.trials.len(), 1);
    assert_eq!(out.best, out.trials[0].config);
    assert!(random_search(
        &g,
        &toy_config(),
        &SearchSpace::default(),
        0,
        7,
        &quick_probe()
    )
    .is_err());
}

#[test]
fn search_is_seeded_and_picks_the_best_trial() {
    let g = toy_graph();
    let space = SearchSpace {
        subgraph_size: vec![2, 3],
        ..Default::default()
    };
    let a = random_search(&g, &toy_config(), &space, 10, 3, &quick_probe()).unwrap();
    let b = random_search(&g, &toy_config(), &space, 10, 3, &quick_probe()).unwrap();
    assert_eq!(a, b);
    let mut accs: Vec<f64> = a.trials.iter().map(|t| t.val_accuracy).collect();
    assert!(accs.iter().all(|&v| v <= a.best_val_accuracy));
    accs.sort_by(f64::total_cmp);
    assert!(a.best_val_accuracy >= accs[accs.len() / 2]);
    let first = a
        .trials
        .iter()
        .position(|t| t.val_accuracy == a.best_val_accuracy)
        .unwrap();
    assert_eq!(a.best, a.trials[first].config);
}

#[test]
fn planted_partition_embeddings_beat_chance() {
    let g = PlantedPartition {
        nodes: 120,
        ..Default::default()
    }
    .generate()
    .unwrap();
    let cfg = TrainConfig {
        subgraph_size: 5,
        anchors_per_iter: 10,
        hidden_dim: 16,
        embed_dim: 8,
        sage_dim: 8,
        epochs: 20,
        ..Default::default()
    };
    let out = train(&g, &cfg).unwrap();
    let r = subgec::trainer::evaluate_probe(&g, &out.embeddings, &quick_probe()).unwrap();
    assert!(r.mean > 0.4, "accuracy {}", r.mean);
}
