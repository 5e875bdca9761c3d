//! Bilinear attention importance of triples against their source text.
//!
//! Token correlation is `ψ(x_b, x_n) = (W_tri x_b)ᵀ (W_tex x_n)`. A triple's
//! correlation with one text token averages ψ over the triple's tokens, its
//! importance sums that over the text, and a softmax over the graph turns
//! importances into a distribution.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::corpus::{split_tokens, TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::rng;
use crate::semantics::{SemanticGraph, SemanticTriple};

pub const DEFAULT_EMBED_DIM: usize = 500;
pub const DEFAULT_ATTENTION_DIM: usize = 64;

const EMBED_STREAM: &str = "attention/embedding";
const TRIPLE_STREAM: &str = "attention/w_tri";
const TEXT_STREAM: &str = "attention/w_tex";

fn unit_gaussian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = normalize(v) {
            return u;
        }
    }
}

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One unit-norm vector per vocabulary id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingTable {
    /// Seeded pseudo-random unit vectors; token `t` always gets the same
    /// vector for a given `(seed, dim)`.
    pub fn seeded(vocab_len: usize, dim: usize, seed: u64) -> Self {
        let vectors = (0..vocab_len)
            .map(|t| unit_gaussian(dim, &mut rng::indexed_stream(seed, EMBED_STREAM, t as u64)))
            .collect();
        Self { dim, vectors }
    }

    /// Reads `token<TAB>v1 v2 ... vD` rows. Vocabulary tokens missing from the
    /// file fall back to seeded vectors; rows for unknown tokens are ignored.
    pub fn from_file(
        path: impl AsRef<Path>,
        vocab: &Vocabulary,
        dim: usize,
        seed: u64,
    ) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut table = Self::seeded(vocab.len(), dim, seed);
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: idx + 1,
                message,
            };
            let (token, values) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected `token<TAB>values`".into()))?;
            let values: Vec<f64> = values
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|e| parse_err(e.to_string())))
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(parse_err(format!(
                    "{} values, expected {dim}",
                    values.len()
                )));
            }
            let key = split_tokens(token).concat();
            if let Some(id) = vocab.get(&key) {
                table.vectors[id.index()] = normalize(values)
                    .ok_or_else(|| parse_err("zero or non-finite vector".into()))?;
            }
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

pub fn embed(token: TokenId, table: &EmbeddingTable) -> Result<&[f64]> {
    table
        .vectors
        .get(token.index())
        .map(Vec::as_slice)
        .ok_or(Error::UnknownToken(token.0))
}

/// Row-major `rows × cols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        (0..n).for_each(|i| m.data[i * n + i] = 1.0);
        m
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.data.iter_mut().for_each(|x| *x *= s);
        self
    }

    pub fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { rows, cols, data }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Input(format!(
                "vector of length {} against {}×{} matrix",
                x.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| dot(row, x))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_triple: Matrix,
    pub w_text: Matrix,
    pub seed: u64,
}

impl AttentionParams {
    /// Fixed Gaussian projections with std `1/√embed_dim`.
    pub fn seeded(attention_dim: usize, embed_dim: usize, seed: u64) -> Self {
        let std = 1.0 / (embed_dim as f64).sqrt();
        Self {
            w_triple: Matrix::gaussian(
                attention_dim,
                embed_dim,
                std,
                &mut rng::stream(seed, TRIPLE_STREAM),
            ),
            w_text: Matrix::gaussian(
                attention_dim,
                embed_dim,
                std,
                &mut rng::stream(seed, TEXT_STREAM),
            ),
            seed,
        }
    }
}

pub fn token_correlation(x_b: &[f64], x_n: &[f64], p: &AttentionParams) -> Result<f64> {
    if x_b.len() != x_n.len() {
        return Err(Error::Input(format!(
            "token vectors of length {} and {}",
            x_b.len(),
            x_n.len()
        )));
    }
    Ok(dot(&p.w_triple.mul_vec(x_b)?, &p.w_text.mul_vec(x_n)?))
}

/// Mean token correlation between the triple's tokens and one text token vector.
pub fn triple_text_correlation(
    triple: &SemanticTriple,
    text_token: &[f64],
    table: &EmbeddingTable,
    p: &AttentionParams,
) -> Result<f64> {
    let mut sum = 0.0;
    for t in triple.tokens() {
        sum += token_correlation(embed(t, table)?, text_token, p)?;
    }
    Ok(sum / triple.token_count() as f64)
}

pub fn triple_importance(
    triple: &SemanticTriple,
    text: &[TokenId],
    table: &EmbeddingTable,
    p: &AttentionParams,
) -> Result<f64> {
    if text.is_empty() {
        return Err(Error::Input("text is empty".into()));
    }
    let mut sum = 0.0;
    for t in text {
        sum += triple_text_correlation(triple, embed(*t, table)?, table, p)?;
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceDistribution {
    pub weights: Vec<f64>,
    pub raw: Vec<f64>,
}

impl ImportanceDistribution {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Softmax with the maximum subtracted before exponentiation.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Importance of every triple in `g` against `text`.
///
/// Projections are computed once per token, so the cost is linear in the
/// number of text and triple tokens rather than their product.
pub fn importance_distribution(
    g: &SemanticGraph,
    text: &[TokenId],
    table: &EmbeddingTable,
    p: &AttentionParams,
) -> Result<ImportanceDistribution> {
    if g.is_empty() {
        return Err(Error::Input("cannot score an empty graph".into()));
    }
    if text.is_empty() {
        return Err(Error::Input("text is empty".into()));
    }
    let mut text_sum = vec![0.0; p.w_text.rows];
    for t in text {
        let v = p.w_text.mul_vec(embed(*t, table)?)?;
        text_sum.iter_mut().zip(&v).for_each(|(s, x)| *s += x);
    }
    let raw = g
        .triples
        .iter()
        .map(|triple| {
            let mut mean = vec![0.0; p.w_triple.rows];
            for t in triple.tokens() {
                let u = p.w_triple.mul_vec(embed(t, table)?)?;
                mean.iter_mut().zip(&u).for_each(|(m, x)| *m += x);
            }
            Ok(dot(&mean, &text_sum) / triple.token_count() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ImportanceDistribution {
        weights: softmax(&raw),
        raw,
    })
}
