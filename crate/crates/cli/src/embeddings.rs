//! Embedding tables: one row per node, the node id followed by its values,
//! tab-separated.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use subgec::tensor::Tensor;

pub fn write_embeddings(emb: &Tensor, path: &Path) -> Result<()> {
    let file =
        fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for r in 0..emb.rows() {
        write!(out, "{r}")?;
        for v in emb.row(r) {
            write!(out, "\t{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()
        .with_context(|| format!("cannot write {}", path.display()))
}

/// Reads a table written by [`write_embeddings`]. Rows may come in any
/// order but every id in `0..rows` must appear exactly once.
pub fn read_embeddings(path: &Path) -> Result<Tensor> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut rows: Vec<Option<Vec<f64>>> = Vec::new();
    let mut width = None;
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let at = || format!("{}:{}", path.display(), i + 1);
        let mut fields = line.split('\t');
        let id: usize = fields
            .next()
            .unwrap_or_default()
            .trim()
            .parse()
            .with_context(|| format!("{}: bad node id", at()))?;
        let values = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: bad value", at()))?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                bail!("{}: {} values, expected {w}", at(), values.len())
            }
            _ => {}
        }
        if id >= rows.len() {
            rows.resize(id + 1, None);
        }
        if rows[id].replace(values).is_some() {
            bail!("{}: node id {id} repeated", at());
        }
    }
    let width = width.with_context(|| format!("{} holds no embeddings", path.display()))?;
    let n = rows.len();
    let mut data = Vec::with_capacity(n * width);
    for (id, row) in rows.into_iter().enumerate() {
        data.extend(row.with_context(|| format!("{}: node id {id} missing", path.display()))?);
    }
    Ok(Tensor::matrix(n, width, data)?)
}
