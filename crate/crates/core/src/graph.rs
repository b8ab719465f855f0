//! Attributed graphs: dataset I/O, GCN adjacency normalization, BFS subgraph
//! extraction and anchor sampling.
//!
//! # Dataset directory format
//!
//! All files are UTF-8 with `\n` line endings.
//!
//! | file | content |
//! |---|---|
//! | `meta.json` | `{"num_nodes": N, "num_features": C, "num_classes": K}` |
//! | `edges.tsv` | one `u\tv` pair per line (undirected; duplicates and both directions allowed) |
//! | `features.tsv` | `N` lines of `C` tab-separated decimal floats |
//! | `labels.tsv` | `N` lines, one class id in `0..K` per line |
//! | `split_train.txt`, `split_val.txt`, `split_test.txt` | one node id per line |

use std::collections::VecDeque;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{CsrMatrix, Tensor};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub num_nodes: usize,
    pub num_features: usize,
    pub num_classes: usize,
}

/// Immutable undirected attributed graph. Neighbor lists are sorted by id,
/// symmetric, duplicate-free and contain no self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    features: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
    splits: Splits,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list. Edges are symmetrized and
    /// deduplicated; self-loops are dropped and counted in the second return
    /// value.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize)],
        features: Tensor,
        labels: Vec<usize>,
        num_classes: usize,
        splits: Splits,
    ) -> Result<(Self, usize)> {
        let (rows, _) = features.dims2("graph features")?;
        if rows != n {
            return Err(Error::dim(format!("{rows} feature rows for {n} nodes")));
        }
        if labels.len() != n {
            return Err(Error::dim(format!("{} labels for {n} nodes", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Index {
                index: bad,
                limit: num_classes,
            });
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut self_loops = 0;
        for &(u, v) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::Index { index: x, limit: n });
                }
            }
            if u == v {
                self_loops += 1;
                continue;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for mut list in adj {
            list.sort_unstable();
            list.dedup();
            neighbors.extend(list);
            offsets.push(neighbors.len());
        }
        validate_splits(&splits, n)?;
        Ok((
            Self {
                offsets,
                neighbors,
                features,
                labels,
                num_classes,
                splits,
            },
            self_loops,
        ))
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Undirected edge count.
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| v > u)
                .map(move |&v| (u, v))
        })
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            num_nodes: self.num_nodes(),
            num_features: self.num_features(),
            num_classes: self.num_classes,
        }
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        let mut inverse = vec![usize::MAX; n];
        for (old, &new) in perm.iter().enumerate() {
            if new >= n || inverse[new] != usize::MAX {
                return Err(Error::contract("perm is not a permutation"));
            }
            inverse[new] = old;
        }
        if perm.len() != n {
            return Err(Error::contract("perm length differs from node count"));
        }
        let edges: Vec<_> = self.edges().map(|(u, v)| (perm[u], perm[v])).collect();
        let features = self.features.gather_rows(&inverse)?;
        let labels = inverse.iter().map(|&o| self.labels[o]).collect();
        let remap = |ids: &[usize]| ids.iter().map(|&i| perm[i]).collect();
        let splits = Splits {
            train: remap(&self.splits.train),
            val: remap(&self.splits.val),
            test: remap(&self.splits.test),
        };
        Ok(Self::from_edges(n, &edges, features, labels, self.num_classes, splits)?.0)
    }
}

fn validate_splits(splits: &Splits, n: usize) -> Result<()> {
    let mut owner = vec![0u8; n];
    for (tag, ids) in [(1u8, &splits.train), (2, &splits.val), (3, &splits.test)] {
        for &i in ids {
            if i >= n {
                return Err(Error::Index { index: i, limit: n });
            }
            if owner[i] != 0 {
                return Err(Error::contract(format!(
                    "node {i} appears in more than one split slot"
                )));
            }
            owner[i] = tag;
        }
    }
    Ok(())
}

/// Induced BFS subgraph: `nodes[0]` is the root, the rest follow BFS order.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    pub nodes: Vec<usize>,
    pub adj: Tensor,
}

impl Subgraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree matrix of `A + I`.
pub fn normalize_adjacency(g: &Graph) -> CsrMatrix {
    let n = g.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / ((g.degree(i) + 1) as f64).sqrt())
        .collect();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(g.neighbors.len() + n);
    let mut values = Vec::with_capacity(g.neighbors.len() + n);
    indptr.push(0);
    for i in 0..n {
        let mut self_done = false;
        for &j in g.neighbors(i) {
            if !self_done && j > i {
                indices.push(i);
                values.push(inv_sqrt[i] * inv_sqrt[i]);
                self_done = true;
            }
            indices.push(j);
            values.push(inv_sqrt[i] * inv_sqrt[j]);
        }
        if !self_done {
            indices.push(i);
            values.push(inv_sqrt[i] * inv_sqrt[i]);
        }
        indptr.push(indices.len());
    }
    CsrMatrix::new(n, n, indptr, indices, values).expect("valid normalized adjacency")
}

/// First `k` vertices reached by BFS from `root`, expanding neighbors in
/// ascending id order. Smaller components are returned whole.
pub fn bfs_subgraph(g: &Graph, root: usize, k: usize) -> Result<Subgraph> {
    let n = g.num_nodes();
    if root >= n {
        return Err(Error::Index {
            index: root,
            limit: n,
        });
    }
    if k == 0 {
        return Err(Error::contract("subgraph size k must be at least 1"));
    }
    let mut seen = vec![false; n];
    let mut nodes = Vec::with_capacity(k);
    let mut queue = VecDeque::new();
    seen[root] = true;
    queue.push_back(root);
    while let Some(u) = queue.pop_front() {
        nodes.push(u);
        if nodes.len() == k {
            break;
        }
        for &v in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    let kk = nodes.len();
    let mut adj = Tensor::zeros(&[kk, kk]);
    for a in 0..kk {
        for b in (a + 1)..kk {
            if g.has_edge(nodes[a], nodes[b]) {
                adj.set(a, b, 1.0);
                adj.set(b, a, 1.0);
            }
        }
    }
    Ok(Subgraph { nodes, adj })
}

/// `m` distinct node ids drawn uniformly without replacement.
pub fn sample_anchors(g: &Graph, m: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_anchors_with(&mut rng, g.num_nodes(), m)
}

pub fn sample_anchors_with<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Result<Vec<usize>> {
    if m < 2 {
        return Err(Error::contract(format!(
            "need at least 2 anchors for in-batch negatives, got {m}"
        )));
    }
    if m > n {
        return Err(Error::contract(format!(
            "{m} anchors requested from {n} nodes"
        )));
    }
    Ok(index::sample(rng, n, m).into_vec())
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Load {
        path: path.to_path_buf(),
        line: 0,
        message: format!("cannot read file: {e}"),
    })
}

fn load_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Load {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_ids(path: &Path, text: &str, n: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let id: usize = line
            .trim()
            .parse()
            .map_err(|e| load_err(path, i + 1, format!("bad node id {line:?}: {e}")))?;
        if id >= n {
            return Err(load_err(
                path,
                i + 1,
                format!("node id {id} out of range (N = {n})"),
            ));
        }
        out.push(id);
    }
    Ok(out)
}

/// Reads the dataset directory format described in the module docs.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta: DatasetMeta = serde_json::from_str(&read_file(&meta_path)?)
        .map_err(|e| load_err(&meta_path, e.line(), e.to_string()))?;
    let n = meta.num_nodes;

    let edges_path = dir.join("edges.tsv");
    let mut edges = Vec::new();
    for (i, line) in read_file(&edges_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(load_err(
                &edges_path,
                i + 1,
                "expected two tab-separated node ids",
            ));
        };
        let parse = |s: &str| -> Result<usize> {
            let v: usize = s
                .trim()
                .parse()
                .map_err(|e| load_err(&edges_path, i + 1, format!("bad node id {s:?}: {e}")))?;
            if v >= n {
                return Err(load_err(
                    &edges_path,
                    i + 1,
                    format!("node id {v} out of range (N = {n})"),
                ));
            }
            Ok(v)
        };
        edges.push((parse(a)?, parse(b)?));
    }

    let feat_path = dir.join("features.tsv");
    let mut data = Vec::with_capacity(n * meta.num_features);
    let mut rows = 0;
    for (i, line) in read_file(&feat_path)?.lines().enumerate() {
        if line.is_empty() && meta.num_features > 0 {
            continue;
        }
        let before = data.len();
        if meta.num_features > 0 {
            for tok in line.split('\t') {
                let v: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|e| load_err(&feat_path, i + 1, format!("bad float {tok:?}: {e}")))?;
                data.push(v);
            }
        }
        if data.len() - before != meta.num_features {
            return Err(load_err(
                &feat_path,
                i + 1,
                format!(
                    "{} values, expected {}",
                    data.len() - before,
                    meta.num_features
                ),
            ));
        }
        rows += 1;
        if rows > n {
            return Err(load_err(
                &feat_path,
                i + 1,
                format!("more than N = {n} rows"),
            ));
        }
    }
    if rows != n {
        return Err(load_err(
            &feat_path,
            rows,
            format!("{rows} rows, expected N = {n}"),
        ));
    }

    let labels_path = dir.join("labels.tsv");
    let mut labels = Vec::with_capacity(n);
    for (i, line) in read_file(&labels_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let l: usize = line
            .trim()
            .parse()
            .map_err(|e| load_err(&labels_path, i + 1, format!("bad label {line:?}: {e}")))?;
        if l >= meta.num_classes {
            return Err(load_err(
                &labels_path,
                i + 1,
                format!("label {l} out of range (K = {})", meta.num_classes),
            ));
        }
        labels.push(l);
    }
    if labels.len() != n {
        return Err(load_err(
            &labels_path,
            labels.len(),
            format!("{} labels, expected N = {n}", labels.len()),
        ));
    }

    let split = |name: &str| -> Result<Vec<usize>> {
        let p = dir.join(name);
        parse_ids(&p, &read_file(&p)?, n)
    };
    let splits = Splits {
        train: split("split_train.txt")?,
        val: split("split_val.txt")?,
        test: split("split_test.txt")?,
    };
    let features = Tensor::matrix(n, meta.num_features, data)?;
    let (graph, self_loops) =
        Graph::from_edges(n, &edges, features, labels, meta.num_classes, splits)
            .map_err(|e| load_err(dir, 0, format!("inconsistent dataset: {e}")))?;
    if self_loops > 0 {
        log::warn!(
            "{}: dropped {self_loops} self-loop(s)",
            edges_path.display()
        );
    }
    Ok(graph)
}

/// Writes `g` in the directory format read by [`load_dataset`].
pub fn save_dataset(g: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, f: &dyn Fn(&mut dyn Write) -> std::io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))
    };
    let meta = serde_json::to_string_pretty(&g.meta())?;
    write("meta.json", &|w| writeln!(w, "{meta}"))?;
    write("edges.tsv", &|w| {
        for (u, v) in g.edges() {
            writeln!(w, "{u}\t{v}")?;
        }
        Ok(())
    })?;
    write("features.tsv", &|w| {
        for r in 0..g.num_nodes() {
            let row: Vec<String> = g.features.row(r).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", row.join("\t"))?;
        }
        Ok(())
    })?;
    write("labels.tsv", &|w| {
        for l in &g.labels {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    for (name, ids) in [
        ("split_train.txt", &g.splits.train),
        ("split_val.txt", &g.splits.val),
        ("split_test.txt", &g.splits.test),
    ] {
        write(name, &|w| {
            for i in ids {
                writeln!(w, "{i}")?;
            }
            Ok(())
        })?;
    }
    Ok(())
}
