//! Run orchestration shared by the command-line tool and the test suites.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::appo::{
    build_state, log_csv, train, truncate_distribution, TrainOutcome, TrainSettings, Variant,
};
use crate::channel::RbAssignment;
use crate::config::SimConfig;
use crate::corpus::{detokenize, Corpus};
use crate::error::{Error, Result};
use crate::oracle::{
    baseline_random, baseline_random_selection, baseline_truncated_text, build_mss_table,
    hungarian_optimum, MssTable,
};
use crate::rng;
use crate::scenario::{attention_for, corpus_for, document_importance, Scenario};

/// A scenario with its reward table and policy state.
pub struct Prepared {
    pub scenario: Scenario,
    pub table: MssTable,
    pub state: Vec<f64>,
}

pub fn prepare(cfg: &SimConfig) -> Result<Prepared> {
    let scenario = Scenario::build(cfg)?;
    let table = build_mss_table(&scenario)?;
    let truncated: Vec<_> = scenario
        .importance
        .iter()
        .map(|d| truncate_distribution(d, cfg.g_max))
        .collect();
    let state = build_state(&truncated, cfg.g_max)?;
    Ok(Prepared {
        scenario,
        table,
        state,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub variant: Variant,
    pub final_reward: f64,
    pub hungarian_optimum: f64,
    pub ratio: f64,
    pub rounds: usize,
    pub converged: bool,
    pub wall_s: f64,
}

pub struct Run {
    pub prepared: Prepared,
    pub outcome: TrainOutcome,
    pub summary: RunSummary,
}

fn ratio(value: f64, optimum: f64) -> f64 {
    if optimum > 0.0 {
        value / optimum
    } else {
        1.0
    }
}

/// Trains one policy on the scenario generated from `cfg.seed`.
pub fn run_training(cfg: &SimConfig, variant: Variant) -> Result<Run> {
    let prepared = prepare(cfg)?;
    let settings = match variant {
        Variant::Appo => TrainSettings::from_config(cfg),
        Variant::Apg => TrainSettings::from_config(cfg).apg(),
    };
    let start = Instant::now();
    let outcome = train(&prepared.state, &prepared.table, &settings, cfg.seed)?;
    let wall_s = start.elapsed().as_secs_f64();
    let (_, optimum) = hungarian_optimum(&prepared.table);
    let summary = RunSummary {
        seed: cfg.seed,
        variant,
        final_reward: outcome.snapshot.reward,
        hungarian_optimum: optimum,
        ratio: ratio(outcome.snapshot.reward, optimum),
        rounds: outcome.snapshot.rounds,
        converged: outcome.snapshot.converged,
        wall_s,
    };
    Ok(Run {
        prepared,
        outcome,
        summary,
    })
}

/// Writes `convergence.csv`, `snapshot.json`, `summary.json` and
/// `config.resolved` into `dir`.
pub fn write_run_dir(dir: &Path, cfg: &SimConfig, run: &Run) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("convergence.csv"), log_csv(&run.outcome.log))?;
    fs::write(dir.join("snapshot.json"), to_json(&run.outcome.snapshot)?)?;
    fs::write(dir.join("summary.json"), to_json(&run.summary)?)?;
    fs::write(dir.join("config.resolved"), cfg.to_resolved())?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Input(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub method: String,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_iters: f64,
    pub wall_s: f64,
}

pub const COMPARE_HEADER: &str = "method,mean_reward,std_reward,mean_iters,wall_s";
pub const METHODS: [&str; 6] = [
    "appo",
    "apg",
    "random",
    "random_selection",
    "truncated_text",
    "hungarian",
];

#[derive(Default)]
struct Tally {
    rewards: Vec<f64>,
    iters: Vec<f64>,
    wall_s: f64,
}

impl Tally {
    fn push(&mut self, reward: f64, iters: usize, wall_s: f64) {
        self.rewards.push(reward);
        self.iters.push(iters as f64);
        self.wall_s += wall_s;
    }

    fn row(&self, method: &str) -> CompareRow {
        let n = self.rewards.len().max(1) as f64;
        let mean = self.rewards.iter().sum::<f64>() / n;
        let var = self.rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        CompareRow {
            method: method.to_string(),
            mean_reward: mean,
            std_reward: var.sqrt(),
            mean_iters: self.iters.iter().sum::<f64>() / n,
            wall_s: self.wall_s,
        }
    }
}

/// Per-seed rewards of every method, for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub appo: f64,
    pub apg: f64,
    pub random: f64,
    pub random_selection: f64,
    pub truncated_text: f64,
    pub hungarian: f64,
    pub appo_rounds: usize,
    pub apg_rounds: usize,
}

/// Runs every method on the scenario of each seed in `cfg.seeds`.
///
/// The two transmission baselines use the assignment APPO decoded.
pub fn compare(cfg: &SimConfig) -> Result<(Vec<CompareRow>, Vec<SeedResult>)> {
    if cfg.seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    let mut tallies: Vec<Tally> = METHODS.iter().map(|_| Tally::default()).collect();
    let mut per_seed = Vec::new();
    for &seed in &cfg.seeds {
        let cfg = cfg.with_seed(seed);
        let appo = run_training(&cfg, Variant::Appo)?;
        let apg = run_training(&cfg, Variant::Apg)?;
        let scenario = &appo.prepared.scenario;
        let table = &appo.prepared.table;
        let assignment =
            RbAssignment::from_rb_map(table.users(), &appo.outcome.snapshot.assignment);
        let mut baseline_rng = rng::stream(seed, rng::BASELINE);

        let timed = |f: &mut dyn FnMut() -> Result<f64>| -> Result<(f64, f64)> {
            let start = Instant::now();
            let v = f()?;
            Ok((v, start.elapsed().as_secs_f64()))
        };
        let random = timed(&mut || Ok(baseline_random(table, &mut baseline_rng)))?;
        let selection =
            timed(&mut || baseline_random_selection(scenario, &assignment, &mut baseline_rng))?;
        let truncated = timed(&mut || baseline_truncated_text(scenario, &assignment))?;
        let hungarian = timed(&mut || Ok(hungarian_optimum(table).1))?;

        tallies[0].push(
            appo.summary.final_reward,
            appo.summary.rounds,
            appo.summary.wall_s,
        );
        tallies[1].push(
            apg.summary.final_reward,
            apg.summary.rounds,
            apg.summary.wall_s,
        );
        tallies[2].push(random.0, 0, random.1);
        tallies[3].push(selection.0, 0, selection.1);
        tallies[4].push(truncated.0, 0, truncated.1);
        tallies[5].push(hungarian.0, 0, hungarian.1);
        per_seed.push(SeedResult {
            seed,
            appo: appo.summary.final_reward,
            apg: apg.summary.final_reward,
            random: random.0,
            random_selection: selection.0,
            truncated_text: truncated.0,
            hungarian: hungarian.0,
            appo_rounds: appo.summary.rounds,
            apg_rounds: apg.summary.rounds,
        });
    }
    let rows = METHODS
        .iter()
        .zip(&tallies)
        .map(|(m, t)| t.row(m))
        .collect();
    Ok((rows, per_seed))
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut s = format!("{COMPARE_HEADER}\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method, r.mean_reward, r.std_reward, r.mean_iters, r.wall_s
        ));
    }
    s
}

/// One row per triple: its text, raw attention score and softmax weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceRow {
    pub triple: String,
    pub score: f64,
    pub weight: f64,
}

pub fn importance_rows(cfg: &SimConfig, doc_id: &str) -> Result<Vec<ImportanceRow>> {
    let corpus = corpus_for(cfg)?;
    let doc = corpus
        .find(doc_id)
        .ok_or_else(|| Error::Input(format!("unknown document id {doc_id:?}")))?;
    let (table, params) = attention_for(cfg, &corpus)?;
    let dist = document_importance(doc, &table, &params)?;
    Ok(doc
        .graph
        .triples
        .iter()
        .zip(dist.raw.iter().zip(&dist.weights))
        .map(|(t, (&score, &weight))| ImportanceRow {
            triple: detokenize(&t.tokens().collect::<Vec<_>>(), &corpus.vocab),
            score,
            weight,
        })
        .collect())
}

pub fn importance_csv(rows: &[ImportanceRow]) -> String {
    let mut s = String::from("triple,score,weight\n");
    for r in rows {
        s.push_str(&format!(
            "\"{}\",{},{}\n",
            r.triple.replace('"', "\"\""),
            r.score,
            r.weight
        ));
    }
    s
}

/// `id,N,Z` for every document: text length and graph size in tokens.
pub fn corpus_stats_csv(corpus: &Corpus) -> String {
    let mut s = String::from("id,N,Z\n");
    for d in &corpus.documents {
        s.push_str(&format!(
            "{},{},{}\n",
            d.document.id,
            d.document.tokens.len(),
            d.graph.token_count()
        ));
    }
    s
}
