//! Semantic graphs, budgeted triple selection, and template text recovery.

use std::fmt;

use crate::corpus::TokenId;
use crate::error::{Error, Result};

/// Number of tokens every relation carries.
pub const RELATION_LEN: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SemanticTriple {
    pub head: Vec<TokenId>,
    pub relation: [TokenId; RELATION_LEN],
    pub tail: Vec<TokenId>,
}

impl SemanticTriple {
    pub fn new(head: Vec<TokenId>, relation: Vec<TokenId>, tail: Vec<TokenId>) -> Result<Self> {
        if head.is_empty() || tail.is_empty() {
            return Err(Error::Input("triple entities must be non-empty".into()));
        }
        let relation: [TokenId; RELATION_LEN] =
            relation.try_into().map_err(|r: Vec<TokenId>| {
                Error::Input(format!(
                    "relation has {} tokens, expected {RELATION_LEN}",
                    r.len()
                ))
            })?;
        Ok(Self {
            head,
            relation,
            tail,
        })
    }

    /// `S_head + S_tail + 2`.
    pub fn token_count(&self) -> usize {
        self.head.len() + RELATION_LEN + self.tail.len()
    }

    /// Head, relation, then tail tokens.
    pub fn tokens(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.head
            .iter()
            .chain(self.relation.iter())
            .chain(self.tail.iter())
            .copied()
    }
}

pub fn triple_token_count(t: &SemanticTriple) -> usize {
    t.token_count()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SemanticGraph {
    pub triples: Vec<SemanticTriple>,
}

impl SemanticGraph {
    pub fn new(triples: Vec<SemanticTriple>) -> Self {
        Self { triples }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn token_count(&self) -> usize {
        graph_token_count(self)
    }
}

impl fmt::Display for SemanticGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SemanticGraph({} triples, {} tokens)",
            self.len(),
            self.token_count()
        )
    }
}

pub fn graph_token_count(g: &SemanticGraph) -> usize {
    g.triples.iter().map(SemanticTriple::token_count).sum()
}

/// Indices sorted by descending weight, ties broken by lower index.
pub fn importance_order(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order
}

/// Walks `order` and keeps triples while the running token count stays within
/// `token_budget`; stops at the first triple that does not fit.
pub fn select_in_order(g: &SemanticGraph, order: &[usize], token_budget: usize) -> SemanticGraph {
    let mut used = 0usize;
    let mut picked = Vec::new();
    for &i in order {
        let t = &g.triples[i];
        if used + t.token_count() > token_budget {
            break;
        }
        used += t.token_count();
        picked.push(t.clone());
    }
    SemanticGraph::new(picked)
}

/// Maximal importance-ordered prefix of `g` that fits in `token_budget`.
pub fn select_triples(
    g: &SemanticGraph,
    weights: &[f64],
    token_budget: usize,
) -> Result<SemanticGraph> {
    if weights.len() != g.len() {
        return Err(Error::Input(format!(
            "{} importance weights for {} triples",
            weights.len(),
            g.len()
        )));
    }
    Ok(select_in_order(g, &importance_order(weights), token_budget))
}

/// `head ++ relation ++ tail ++ [period]` for each received triple, in order.
pub fn recover_text(received: &SemanticGraph, period: TokenId) -> Vec<TokenId> {
    let mut out = Vec::with_capacity(received.token_count() + received.len());
    for t in &received.triples {
        out.extend(t.tokens());
        out.push(period);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, Vocabulary};
    use proptest::prelude::*;

    fn triple(v: &mut Vocabulary, h: &str, r: &str, t: &str) -> SemanticTriple {
        SemanticTriple::new(
            tokenize(h, v, false).unwrap(),
            tokenize(r, v, false).unwrap(),
            tokenize(t, v, false).unwrap(),
        )
        .unwrap()
    }

    fn sized(head: usize, tail: usize) -> SemanticTriple {
        SemanticTriple::new(
            vec![TokenId(0); head],
            vec![TokenId(1), TokenId(2)],
            vec![TokenId(3); tail],
        )
        .unwrap()
    }

    #[test]
    fn token_counts() {
        let mut v = Vocabulary::new();
        let part = triple(
            &mut v,
            "baseform of word",
            "part of",
            "stochastic lexicon model",
        );
        let used = triple(
            &mut v,
            "stochastic lexicon model",
            "used for",
            "speech recognizer",
        );
        let tiny = triple(&mut v, "a", "part of", "b");
        assert_eq!(triple_token_count(&part), 8);
        assert_eq!(triple_token_count(&used), 7);
        assert_eq!(triple_token_count(&tiny), 4);
        assert_eq!(graph_token_count(&SemanticGraph::default()), 0);
        assert_eq!(graph_token_count(&SemanticGraph::new(vec![used, part])), 15);
    }

    #[test]
    fn relation_must_have_two_tokens() {
        let r = SemanticTriple::new(vec![TokenId(0)], vec![TokenId(1)], vec![TokenId(2)]);
        assert!(r.is_err());
        let r = SemanticTriple::new(vec![], vec![TokenId(1), TokenId(1)], vec![TokenId(2)]);
        assert!(r.is_err());
    }

    #[test]
    fn keeps_most_important_triple_under_ten_tokens() {
        let g = SemanticGraph::new(vec![sized(3, 2), sized(3, 3)]);
        let sel = select_triples(&g, &[0.7, 0.3], 10).unwrap();
        assert_eq!(sel.triples, vec![g.triples[0].clone()]);
    }

    #[test]
    fn zero_budget_selects_nothing() {
        let g = SemanticGraph::new(vec![sized(1, 1)]);
        assert!(select_triples(&g, &[1.0], 0).unwrap().is_empty());
    }

    #[test]
    fn ties_keep_index_order() {
        let a = sized(1, 1);
        let b = SemanticTriple::new(
            vec![TokenId(9)],
            vec![TokenId(1), TokenId(2)],
            vec![TokenId(9)],
        )
        .unwrap();
        let g = SemanticGraph::new(vec![a.clone(), b.clone()]);
        // Every subset in every order, filtered by the prefix rule, leaves only [a, b].
        let sel = select_triples(&g, &[0.5, 0.5], 8).unwrap();
        assert_eq!(sel.triples, vec![a, b]);
    }

    #[test]
    fn stops_at_first_misfit() {
        // 0.6 fits, 0.3 (size 8) does not, 0.1 (size 4) would but is after the misfit.
        let g = SemanticGraph::new(vec![sized(1, 1), sized(3, 3), sized(1, 1)]);
        let sel = select_triples(&g, &[0.6, 0.3, 0.1], 9).unwrap();
        assert_eq!(sel.len(), 1);
    }

    #[test]
    fn weight_length_mismatch_is_an_error() {
        let g = SemanticGraph::new(vec![sized(1, 1)]);
        assert!(select_triples(&g, &[0.5, 0.5], 4).is_err());
    }

    #[test]
    fn recovery_template() {
        let mut v = Vocabulary::new();
        let t = triple(&mut v, "a", "part of", "b");
        let period = v.intern(".");
        assert!(recover_text(&SemanticGraph::default(), period).is_empty());
        let text = recover_text(&SemanticGraph::new(vec![t]), period);
        let words: Vec<_> = text.iter().map(|i| v.token(*i).unwrap()).collect();
        assert_eq!(words, ["a", "part", "of", "b", "."]);
    }

    fn arb_graph() -> impl Strategy<Value = (SemanticGraph, Vec<f64>)> {
        proptest::collection::vec((1usize..5, 1usize..5, 0u32..4), 0..10).prop_map(|spec| {
            let triples = spec.iter().map(|(h, t, _)| sized(*h, *t)).collect();
            // Coarse weights so ties are common.
            let w = spec.iter().map(|(_, _, w)| f64::from(*w) / 4.0).collect();
            (SemanticGraph::new(triples), w)
        })
    }

    proptest! {
        #[test]
        fn selection_respects_budget_and_prefix((g, w) in arb_graph(), budget in 0usize..60) {
            let sel = select_triples(&g, &w, budget).unwrap();
            prop_assert!(sel.token_count() <= budget);
            prop_assert!(sel.token_count() <= g.token_count());
            prop_assert_eq!(sel.token_count() == g.token_count(), sel.len() == g.len());
            let order = importance_order(&w);
            // The selection is exactly the first `sel.len()` entries of the order,
            // and the next one (if any) did not fit.
            for (k, idx) in order.iter().take(sel.len()).enumerate() {
                prop_assert_eq!(&sel.triples[k], &g.triples[*idx]);
            }
            if let Some(next) = order.get(sel.len()) {
                prop_assert!(sel.token_count() + g.triples[*next].token_count() > budget);
            }
        }

        #[test]
        fn selected_mass_is_monotone_in_budget((g, w) in arb_graph(), b in 0usize..60) {
            let mass = |budget| {
                let order = importance_order(&w);
                let n = select_triples(&g, &w, budget).unwrap().len();
                order[..n].iter().map(|i| w[*i]).sum::<f64>()
            };
            prop_assert!(mass(b) <= mass(b + 1) + 1e-12);
        }

        #[test]
        fn recovered_length_is_sum_of_sizes_plus_terminators((g, _) in arb_graph()) {
            let m = recover_text(&g, TokenId(7)).len();
            prop_assert_eq!(m, g.triples.iter().map(|t| t.token_count() + 1).sum::<usize>());
        }
    }
}
