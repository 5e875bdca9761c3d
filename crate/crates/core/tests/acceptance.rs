//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semcom::appo::{
    moving_average, sample_actions, update_penalty, ActionSpace, PenaltyState, PolicyParams,
    Surrogate, Variant,
};
use semcom::attention::{importance_distribution, softmax, AttentionParams, EmbeddingTable};
use semcom::channel::token_budget;
use semcom::config::SimConfig;
use semcom::corpus::{load_corpus, tokenize, TokenId, Vocabulary};
use semcom::experiment::run_training;
use semcom::mss::mss;
use semcom::oracle::{baseline_random, exhaustive_optimum, hungarian_optimum, MssTable};
use semcom::rng;
use semcom::semantics::{select_triples, SemanticGraph, SemanticTriple};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn ids(n: usize, start: u32) -> Vec<TokenId> {
    (0..n as u32).map(|i| TokenId(start + i)).collect()
}

fn triple(head: usize, tail: usize, start: u32) -> SemanticTriple {
    SemanticTriple::new(
        ids(head, start),
        vec![TokenId(start + 100), TokenId(start + 101)],
        ids(tail, start + 200),
    )
    .unwrap()
}

fn mss_worked_example() -> Outcome {
    let mut vocab = Vocabulary::new();
    let orig = tokenize("little girls are playing", &mut vocab, false).unwrap();
    let rec = tokenize("girls are playing", &mut vocab, false).unwrap();
    let r = mss(&orig, &rec, 0.5).unwrap();
    let expected = (-1.0f64 / 3.0).exp() * (0.75 / 0.875);
    let pass = r.accuracy == 1.0 && r.completeness == 0.75 && (r.score - expected).abs() <= 1e-9;
    outcome(
        pass,
        format!(
            "A = {}, R = {}, E = {:.9} (expected {expected:.9})",
            r.accuracy, r.completeness, r.score
        ),
    )
}

fn selection_worked_example() -> Outcome {
    let g = SemanticGraph {
        triples: vec![triple(3, 2, 0), triple(3, 3, 1000)],
    };
    let sizes: Vec<usize> = g.triples.iter().map(SemanticTriple::token_count).collect();
    let sel = select_triples(&g, &[0.7, 0.3], 10).unwrap();
    let pass = sizes == [7, 8] && sel.triples == g.triples[..1];
    outcome(
        pass,
        format!(
            "sizes {sizes:?}, selected {} triple(s), first kept: {}",
            sel.len(),
            sel.triples.first() == g.triples.first()
        ),
    )
}

fn bundled_abstract() -> Outcome {
    let path = format!("{}/data/abstract.jsonl", env!("CARGO_MANIFEST_DIR"));
    let corpus = load_corpus(path).unwrap();
    let doc = &corpus.documents[0];
    let (n, z) = (doc.document.tokens.len(), doc.graph.token_count());
    let reduction = 100.0 * (1.0 - z as f64 / n as f64);
    let pass = n == 178 && z == 86 && format!("{reduction:.1}") == "51.7";
    outcome(pass, format!("N = {n}, Z = {z}, reduction {reduction:.1}%"))
}

fn penalty_table() -> Outcome {
    let p = PenaltyState {
        lambda: 1.0,
        tau: 0.8,
        eta: 2.0,
        lambda_min: 1e-4,
        lambda_max: 1e4,
    };
    let got: Vec<f64> = [2.0, 0.1, 1.0]
        .iter()
        .map(|&kl| update_penalty(p, kl).lambda)
        .collect();
    outcome(got == [2.0, 0.5, 1.0], format!("lambda' = {got:?}"))
}

fn softmax_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let vocab_len = 400;
    let table = EmbeddingTable::seeded(vocab_len, 32, 5);
    let params = AttentionParams::seeded(16, 32, 5);
    let token = |rng: &mut ChaCha8Rng| TokenId(rng.random_range(0..vocab_len as u32));
    let (mut worst_sum, mut worst_shift, mut worst_perm) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(1..=12);
        let triples: Vec<SemanticTriple> = (0..n)
            .map(|_| {
                let head = (0..rng.random_range(1..4))
                    .map(|_| token(&mut rng))
                    .collect();
                let tail = (0..rng.random_range(1..4))
                    .map(|_| token(&mut rng))
                    .collect();
                SemanticTriple::new(head, vec![token(&mut rng), token(&mut rng)], tail).unwrap()
            })
            .collect();
        let text: Vec<TokenId> = (0..rng.random_range(5..60))
            .map(|_| token(&mut rng))
            .collect();
        let g = SemanticGraph { triples };
        let d = importance_distribution(&g, &text, &table, &params).unwrap();
        worst_sum = worst_sum.max((d.weights.iter().sum::<f64>() - 1.0).abs());

        let c = rng.random_range(-100.0..100.0);
        let shifted = softmax(&d.raw.iter().map(|s| s + c).collect::<Vec<_>>());
        for (a, b) in d.weights.iter().zip(&shifted) {
            worst_shift = worst_shift.max((a - b).abs());
        }

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let pg = SemanticGraph {
            triples: perm.iter().map(|&i| g.triples[i].clone()).collect(),
        };
        let pd = importance_distribution(&pg, &text, &table, &params).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            worst_perm = worst_perm.max((pd.weights[k] - d.weights[i]).abs());
        }
    }
    let elapsed = start.elapsed();
    let pass =
        worst_sum <= 1e-9 && worst_shift <= 1e-9 && worst_perm <= 1e-9 && within(elapsed, 5.0);
    outcome(
        pass,
        format!("max |sum-1| {worst_sum:.1e}, shift {worst_shift:.1e}, permutation {worst_perm:.1e}, {elapsed:.2?}"),
    )
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let space = ActionSpace { users: 2, rbs: 2 };
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let state: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let sizes = PolicyParams::shape(state.len(), 8, 3, space);
        let star = PolicyParams::seeded(sizes.clone(), &mut rng);
        let mut theta = PolicyParams::seeded(sizes, &mut rng);
        theta
            .params
            .iter_mut()
            .zip(&star.params)
            .for_each(|(t, s)| *t = s + 0.3 * *t);
        let table = MssTable::new(2, 2, (0..4).map(|_| rng.random::<f64>()).collect()).unwrap();
        let batch = sample_actions(&star, &state, &table, 32, &mut rng);
        let lambda = rng.random_range(0.0..5.0);
        let s = Surrogate::new(&star, &state, space, &batch, lambda).unwrap();
        let (_, grad) = s.value_and_grad(&theta);
        let fd: Vec<f64> = (0..theta.params.len())
            .map(|i| {
                let (mut plus, mut minus) = (theta.clone(), theta.clone());
                plus.params[i] += h;
                minus.params[i] -= h;
                (s.value(&plus) - s.value(&minus)) / (2.0 * h)
            })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = grad.iter().zip(&fd).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&diff) / norm(&grad).max(norm(&fd)).max(1e-300));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-4 && within(elapsed, 30.0),
        format!("worst relative error {worst:.2e} over 50 draws, {elapsed:.2?}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (u, q) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let table = MssTable::new(u, q, (0..u * q).map(|_| rng.random::<f64>()).collect()).unwrap();
        let (_, h) = hungarian_optimum(&table);
        let (_, e) = exhaustive_optimum(&table).unwrap();
        worst = worst.max((h - e).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && within(elapsed, 10.0),
        format!("max |hungarian - exhaustive| {worst:.1e}, {elapsed:.2?}"),
    )
}

struct TrainedSeed {
    ratio: f64,
    reward: f64,
    random: f64,
    wall_s: f64,
    converged: bool,
    objectives: Vec<f64>,
}

fn acceptance_runs() -> Vec<TrainedSeed> {
    let base = SimConfig::parse_str("U = 4\nQ = 2\nK = 100\nT = 10\nmax_outer = 500\n").unwrap();
    (0..10u64)
        .map(|seed| {
            let cfg = base.with_seed(seed);
            let run = run_training(&cfg, Variant::Appo).unwrap();
            let random =
                baseline_random(&run.prepared.table, &mut rng::stream(seed, rng::BASELINE));
            TrainedSeed {
                ratio: run.summary.ratio,
                reward: run.summary.final_reward,
                random,
                wall_s: run.summary.wall_s,
                converged: run.summary.converged,
                objectives: run.outcome.log.iter().map(|r| r.objective).collect(),
            }
        })
        .collect()
}

fn near_optimality(runs: &[TrainedSeed]) -> Outcome {
    let good = runs.iter().filter(|r| r.ratio >= 0.9).count();
    let slowest = runs.iter().map(|r| r.wall_s).fold(0.0, f64::max);
    let mean = |f: fn(&TrainedSeed) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
    let (appo, random) = (mean(|r| r.reward), mean(|r| r.random));
    let ratios: Vec<String> = runs.iter().map(|r| format!("{:.3}", r.ratio)).collect();
    outcome(
        good >= 8 && slowest < 60.0 && appo >= random,
        format!("{good}/10 seeds >= 0.90 (ratios {ratios:?}), slowest {slowest:.2}s, mean reward {appo:.4} vs random {random:.4}"),
    )
}

fn trend_property(runs: &[TrainedSeed]) -> Outcome {
    let converged: Vec<&TrainedSeed> = runs.iter().filter(|r| r.converged).collect();
    if converged.is_empty() {
        return outcome(
            false,
            format!(
                "no run converged within {} rounds; property not exercised",
                runs.first().map_or(0, |r| r.objectives.len())
            ),
        );
    }
    let mut worst = 0.0f64;
    for r in &converged {
        let ma = moving_average(&r.objectives, 20);
        let half = r.objectives.len() / 2;
        // ma[t] covers rounds t..t+20; keep windows ending in the final half.
        let first = half.saturating_sub(19);
        for w in ma[first.min(ma.len())..].windows(2) {
            worst = worst.max(w[0] - w[1]);
        }
    }
    outcome(
        worst <= 1e-6,
        format!(
            "{} converged run(s), largest moving-average drop {worst:.2e}",
            converged.len()
        ),
    )
}

fn budget_fuzz() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(0..15);
        let g = SemanticGraph {
            triples: (0..n)
                .map(|i| triple(rng.random_range(1..6), rng.random_range(1..6), i * 1000))
                .collect(),
        };
        let weights = softmax(
            &(0..n)
                .map(|_| rng.random_range(-3.0..3.0))
                .collect::<Vec<_>>(),
        );
        let rate = 10f64.powf(rng.random_range(3.0..9.0));
        let delay = 10f64.powf(rng.random_range(-6.0..-2.0));
        let bits = rng.random_range(1.0..200.0);
        let z = token_budget(rate, bits, delay);
        let sel = select_triples(&g, &weights, z).unwrap();
        if sel.token_count() as f64 * bits > rate * delay {
            violations += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        violations == 0 && within(elapsed, 5.0),
        format!("{violations} violations in 10^4 draws, {elapsed:.2?}"),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("mss worked example", mss_worked_example()),
        ("selection worked example", selection_worked_example()),
        ("bundled abstract compression", bundled_abstract()),
        ("penalty update table", penalty_table()),
        ("softmax simplex suite", softmax_suite()),
        ("gradient check", gradient_check()),
        ("oracle equivalence", oracle_equivalence()),
    ];
    let runs = acceptance_runs();
    results.push(("appo near-optimality", near_optimality(&runs)));
    results.push(("objective trend on converged runs", trend_property(&runs)));
    results.push(("budget feasibility fuzz", budget_fuzz()));

    let mut failed = 0;
    for (name, o) in &results {
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
