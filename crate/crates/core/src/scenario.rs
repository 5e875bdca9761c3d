//! One downlink scenario: the documents addressed to each user, their triple
//! importances, the users' links, and the RB grid.

use crate::attention::{
    importance_distribution, AttentionParams, EmbeddingTable, ImportanceDistribution,
};
use crate::channel::{capacity, place_users, token_budget, RbGrid, UserLink};
use crate::config::SimConfig;
use crate::corpus::{load_corpus, AnnotatedDocument, Corpus, TokenId};
use crate::error::{Error, Result};
use crate::mss::{mss, MssReport};
use crate::rng;
use crate::semantics::{recover_text, select_in_order, select_triples, SemanticGraph};
use crate::synth::synthetic_corpus;

/// Upper bound on triples per synthetic document.
pub const SYNTHETIC_MAX_TRIPLES: usize = 12;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub documents: Vec<AnnotatedDocument>,
    pub importance: Vec<ImportanceDistribution>,
    pub links: Vec<UserLink>,
    pub grid: RbGrid,
    pub period: TokenId,
    pub bits_per_token: f64,
    pub delay_s: f64,
    pub phi: f64,
}

/// Loads the configured corpus, or generates one from `cfg.seed`.
pub fn corpus_for(cfg: &SimConfig) -> Result<Corpus> {
    match &cfg.corpus_path {
        Some(p) => load_corpus(p),
        None => synthetic_corpus(cfg.users, SYNTHETIC_MAX_TRIPLES, cfg.seed),
    }
}

pub fn attention_for(
    cfg: &SimConfig,
    corpus: &Corpus,
) -> Result<(EmbeddingTable, AttentionParams)> {
    let table = match &cfg.embedding_path {
        Some(p) => EmbeddingTable::from_file(p, &corpus.vocab, cfg.embed_dim, cfg.seed)?,
        None => EmbeddingTable::seeded(corpus.vocab.len(), cfg.embed_dim, cfg.seed),
    };
    Ok((
        table,
        AttentionParams::seeded(cfg.attention_dim, cfg.embed_dim, cfg.seed),
    ))
}

/// Importance of a document's triples; empty graphs get an empty distribution.
pub fn document_importance(
    doc: &AnnotatedDocument,
    table: &EmbeddingTable,
    params: &AttentionParams,
) -> Result<ImportanceDistribution> {
    if doc.graph.is_empty() {
        return Ok(ImportanceDistribution {
            weights: Vec::new(),
            raw: Vec::new(),
        });
    }
    importance_distribution(&doc.graph, &doc.document.tokens, table, params)
}

impl Scenario {
    pub fn build(cfg: &SimConfig) -> Result<Self> {
        let corpus = corpus_for(cfg)?;
        if corpus.len() < cfg.users {
            return Err(Error::Config(format!(
                "corpus has {} documents but U = {}",
                corpus.len(),
                cfg.users
            )));
        }
        let (table, params) = attention_for(cfg, &corpus)?;
        let documents: Vec<AnnotatedDocument> = corpus.documents[..cfg.users].to_vec();
        let importance = documents
            .iter()
            .map(|d| document_importance(d, &table, &params))
            .collect::<Result<Vec<_>>>()?;
        let links = place_users(
            cfg.users,
            cfg.cell_radius_m,
            cfg.min_distance_m,
            cfg.power_w,
            &mut rng::stream(cfg.seed, rng::ENVIRONMENT),
        )?;
        Ok(Self {
            documents,
            importance,
            links,
            grid: cfg.grid()?,
            period: corpus.vocab.period(),
            bits_per_token: cfg.bits_per_token,
            delay_s: cfg.delay_s,
            phi: cfg.phi,
        })
    }

    pub fn users(&self) -> usize {
        self.documents.len()
    }

    pub fn rbs(&self) -> usize {
        self.grid.rb_count()
    }

    pub fn budget(&self, user: usize, rb: Option<usize>) -> usize {
        token_budget(
            capacity(&self.links[user], rb, &self.grid),
            self.bits_per_token,
            self.delay_s,
        )
    }

    pub fn selection(&self, user: usize, budget: usize) -> Result<SemanticGraph> {
        select_triples(
            &self.documents[user].graph,
            &self.importance[user].weights,
            budget,
        )
    }

    pub fn score_recovery(&self, user: usize, recovered: &[TokenId]) -> Result<MssReport> {
        mss(&self.documents[user].document.tokens, recovered, self.phi)
    }

    /// Select → recover → score for `user` on `rb`, with nothing cached.
    pub fn user_report(&self, user: usize, rb: Option<usize>) -> Result<MssReport> {
        let selected = self.selection(user, self.budget(user, rb))?;
        self.score_recovery(user, &recover_text(&selected, self.period))
    }

    /// Score when triples go out in `order` instead of importance order.
    pub fn user_report_in_order(
        &self,
        user: usize,
        rb: Option<usize>,
        order: &[usize],
    ) -> Result<MssReport> {
        let selected = select_in_order(&self.documents[user].graph, order, self.budget(user, rb));
        self.score_recovery(user, &recover_text(&selected, self.period))
    }
}
