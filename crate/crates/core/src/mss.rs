//! MSS: semantic accuracy, completeness, short-text penalty, and their blend.
//!
//! Matching is clipped per distinct token type: a token that appears `r`
//! times in the recovery and `o` times in the original contributes
//! `min(r, o)` correct occurrences.

use std::collections::HashMap;

use serde::Serialize;

use crate::corpus::TokenId;
use crate::error::{Error, Result};

pub const DEFAULT_PHI: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MssReport {
    #[serde(rename = "A")]
    pub accuracy: f64,
    #[serde(rename = "R")]
    pub completeness: f64,
    #[serde(rename = "xi")]
    pub penalty: f64,
    #[serde(rename = "E")]
    pub score: f64,
    #[serde(rename = "M")]
    pub recovered_len: usize,
    #[serde(rename = "N")]
    pub original_len: usize,
    /// Set when the recovery is empty and A, ξ fall back to 0.
    pub degenerate: bool,
}

fn histogram(tokens: &[TokenId]) -> HashMap<TokenId, usize> {
    let mut h = HashMap::with_capacity(tokens.len());
    for t in tokens {
        *h.entry(*t).or_insert(0) += 1;
    }
    h
}

/// Σ over distinct recovered tokens of min(count in recovered, count in original).
pub fn matched_count(original: &[TokenId], recovered: &[TokenId]) -> usize {
    let orig = histogram(original);
    histogram(recovered)
        .iter()
        .map(|(t, r)| (*r).min(orig.get(t).copied().unwrap_or(0)))
        .sum()
}

pub fn semantic_accuracy(original: &[TokenId], recovered: &[TokenId]) -> f64 {
    if recovered.is_empty() {
        return 0.0;
    }
    matched_count(original, recovered) as f64 / recovered.len() as f64
}

pub fn semantic_completeness(original: &[TokenId], recovered: &[TokenId]) -> Result<f64> {
    if original.is_empty() {
        return Err(Error::Input("original text is empty".into()));
    }
    Ok(matched_count(original, recovered) as f64 / original.len() as f64)
}

/// 1 when the recovery is at least as long as the original, else e^{1 − N/M};
/// 0 for an empty recovery.
pub fn short_text_penalty(original_len: usize, recovered_len: usize) -> f64 {
    if recovered_len >= original_len {
        1.0
    } else if recovered_len == 0 {
        0.0
    } else {
        (1.0 - original_len as f64 / recovered_len as f64).exp()
    }
}

/// Weighted harmonic blend of A and R scaled by ξ; 0 whenever A·R = 0.
pub fn combine(accuracy: f64, completeness: f64, penalty: f64, phi: f64) -> f64 {
    let product = accuracy * completeness;
    if product == 0.0 {
        return 0.0;
    }
    penalty * product / (phi * accuracy + (1.0 - phi) * completeness)
}

pub fn mss(original: &[TokenId], recovered: &[TokenId], phi: f64) -> Result<MssReport> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::Input(format!("phi must lie in (0,1), got {phi}")));
    }
    let completeness = semantic_completeness(original, recovered)?;
    let accuracy = semantic_accuracy(original, recovered);
    let penalty = short_text_penalty(original.len(), recovered.len());
    Ok(MssReport {
        accuracy,
        completeness,
        penalty,
        score: combine(accuracy, completeness, penalty, phi),
        recovered_len: recovered.len(),
        original_len: original.len(),
        degenerate: recovered.is_empty(),
    })
}
