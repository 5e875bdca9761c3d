//! Seeded synthetic corpus: short technical documents whose triples are
//! embedded verbatim in the text among filler words.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::corpus::{from_records, Corpus, RawRecord, RawTriple};
use crate::error::Result;
use crate::rng;

const NOUNS: &[&str] = &[
    "model",
    "network",
    "signal",
    "channel",
    "decoder",
    "encoder",
    "packet",
    "spectrum",
    "antenna",
    "receiver",
    "transmitter",
    "protocol",
    "scheduler",
    "buffer",
    "codebook",
    "filter",
    "detector",
    "estimator",
    "beam",
    "carrier",
    "frame",
    "symbol",
    "sensor",
    "cache",
    "graph",
    "token",
    "vector",
    "layer",
    "kernel",
    "policy",
    "reward",
    "agent",
    "server",
    "client",
    "link",
    "relay",
    "router",
    "queue",
    "feature",
    "speech",
    "image",
    "text",
    "lexicon",
    "corpus",
    "parser",
    "grammar",
];

const MODIFIERS: &[&str] = &[
    "adaptive",
    "neural",
    "stochastic",
    "sparse",
    "robust",
    "linear",
    "hybrid",
    "optimal",
    "dynamic",
    "wireless",
    "semantic",
    "acoustic",
    "digital",
    "compressed",
    "distributed",
    "joint",
    "hidden",
    "statistical",
    "deep",
    "low",
    "high",
    "fast",
    "static",
    "local",
    "global",
];

const RELATIONS: &[[&str; 2]] = &[
    ["used", "for"],
    ["part", "of"],
    ["feature", "of"],
    ["compare", "with"],
    ["conjunction", "with"],
    ["evaluate", "for"],
    ["hyponym", "of"],
    ["based", "on"],
];

const FILLER: &[&str] = &[
    "the",
    "a",
    "we",
    "this",
    "that",
    "is",
    "are",
    "and",
    "in",
    "to",
    "which",
    "also",
    "results",
    "show",
    "our",
    "approach",
    "proposed",
    "method",
    "performance",
    "paper",
    "under",
    "each",
    "while",
    "significantly",
    "improves",
    "experiments",
    "then",
    "can",
    "be",
    "by",
    "it",
    "further",
];

fn entity<R: Rng + ?Sized>(rng: &mut R) -> Vec<String> {
    let mods = rng.random_range(0..=2);
    let mut words: Vec<String> = (0..mods)
        .map(|_| MODIFIERS.choose(rng).unwrap().to_string())
        .collect();
    words.push(NOUNS.choose(rng).unwrap().to_string());
    words
}

fn filler<R: Rng + ?Sized>(rng: &mut R, lo: usize, hi: usize) -> Vec<String> {
    let n = rng.random_range(lo..=hi);
    (0..n)
        .map(|_| FILLER.choose(rng).unwrap().to_string())
        .collect()
}

/// One record with `3..=max_triples` triples.
pub fn synthetic_record<R: Rng + ?Sized>(id: String, max_triples: usize, rng: &mut R) -> RawRecord {
    let n_triples = rng.random_range(3..=max_triples.max(3));
    let mut entities: Vec<Vec<String>> = Vec::new();
    let mut triples = Vec::with_capacity(n_triples);
    let mut sentences: Vec<Vec<String>> = Vec::new();
    for _ in 0..n_triples {
        // Reuse an earlier entity sometimes so documents form a connected graph.
        let head = if !entities.is_empty() && rng.random_bool(0.4) {
            entities.choose(rng).unwrap().clone()
        } else {
            entity(rng)
        };
        let tail = entity(rng);
        entities.push(head.clone());
        entities.push(tail.clone());
        let relation = RELATIONS.choose(rng).unwrap();
        let mut sentence = filler(rng, 1, 4);
        sentence.extend(head.iter().cloned());
        sentence.extend(filler(rng, 0, 2));
        sentence.extend(relation.iter().map(|s| s.to_string()));
        sentence.extend(filler(rng, 0, 2));
        sentence.extend(tail.iter().cloned());
        sentence.extend(filler(rng, 0, 5));
        sentence.push(".".into());
        sentences.push(sentence);
        triples.push(RawTriple {
            head,
            relation: relation.iter().map(|s| s.to_string()).collect(),
            tail,
        });
    }
    for _ in 0..rng.random_range(0..=3) {
        let mut s = filler(rng, 4, 12);
        s.push(".".into());
        let at = rng.random_range(0..=sentences.len());
        sentences.insert(at, s);
    }
    let text = sentences
        .iter()
        .map(|s| s.join(" "))
        .collect::<Vec<_>>()
        .join(" ");
    RawRecord { id, text, triples }
}

pub fn synthetic_records(docs: usize, max_triples: usize, seed: u64) -> Vec<RawRecord> {
    let mut rng = rng::stream(seed, rng::CORPUS);
    (0..docs)
        .map(|i| synthetic_record(format!("doc{i:04}"), max_triples, &mut rng))
        .collect()
}

pub fn synthetic_corpus(docs: usize, max_triples: usize, seed: u64) -> Result<Corpus> {
    from_records(&synthetic_records(docs, max_triples, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_corpus_is_valid_and_deterministic() {
        let a = synthetic_corpus(20, 12, 3).unwrap();
        let b = synthetic_corpus(20, 12, 3).unwrap();
        assert_eq!(a.documents, b.documents);
        for d in &a.documents {
            assert!((3..=12).contains(&d.graph.len()));
            assert!(d.graph.token_count() < d.document.len());
        }
        assert_ne!(synthetic_corpus(20, 12, 4).unwrap().documents, a.documents);
    }
}
