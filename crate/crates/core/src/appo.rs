//! APPO: KL-penalized importance-sampled policy gradient for RB allocation.
//!
//! The allocation problem is a one-shot contextual bandit. The state is the
//! concatenated (zero-padded) importance distributions of all users. The
//! policy is an MLP whose output holds one head per RB; RBs are decided in
//! index order, each from a categorical over the users not yet served plus an
//! idle choice, so every action it can emit gives each user at most one RB
//! and each RB at most one user.
//!
//! A training round stores `θ*`, samples `K` actions from it, takes `T`
//! gradient-ascent steps on
//!
//! ```text
//! J(θ) = 1/K Σ_k R(a_k) π_θ(a_k) / π_θ*(a_k)  −  λ · KL(π_θ* ‖ π_θ)
//! ```
//!
//! rescales `λ` by `η` when the KL leaves `[1 − τ, 1 + τ]`, and replaces `θ*`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attention::ImportanceDistribution;
use crate::channel::RbAssignment;
use crate::error::{Error, Result};
use crate::oracle::{evaluate_reward, MssTable};
use crate::rng;

/// Zero-padded concatenation of per-user importance distributions.
pub fn build_state(distributions: &[ImportanceDistribution], g_max: usize) -> Result<Vec<f64>> {
    let mut state = vec![0.0; distributions.len() * g_max];
    for (u, d) in distributions.iter().enumerate() {
        if d.len() > g_max {
            return Err(Error::Config(format!(
                "user {u} has {} triples but G_max = {g_max}",
                d.len()
            )));
        }
        state[u * g_max..u * g_max + d.len()].copy_from_slice(&d.weights);
    }
    Ok(state)
}

/// Keeps the `g_max` highest-weight entries (original order preserved) and
/// renormalizes them to sum to one.
pub fn truncate_distribution(d: &ImportanceDistribution, g_max: usize) -> ImportanceDistribution {
    if d.len() <= g_max {
        return d.clone();
    }
    let mut keep = crate::semantics::importance_order(&d.weights);
    keep.truncate(g_max);
    keep.sort_unstable();
    let total: f64 = keep.iter().map(|i| d.weights[*i]).sum();
    ImportanceDistribution {
        weights: keep.iter().map(|i| d.weights[*i] / total).collect(),
        raw: keep.iter().map(|i| d.raw[*i]).collect(),
    }
}

/// Per-RB choice: `Some(user)` or `None` for idle.
pub type Choices = Vec<Option<usize>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ActionSpace {
    pub users: usize,
    pub rbs: usize,
}

impl ActionSpace {
    /// Options per RB head: every user, then idle.
    pub fn head_width(&self) -> usize {
        self.users + 1
    }

    pub fn logits_len(&self) -> usize {
        self.rbs * self.head_width()
    }

    fn idle(&self) -> usize {
        self.users
    }

    fn slot(&self, c: Option<usize>) -> usize {
        c.unwrap_or(self.users)
    }

    fn choice(&self, slot: usize) -> Option<usize> {
        (slot < self.users).then_some(slot)
    }

    /// Every action the factorized policy can emit, in lexicographic order.
    pub fn enumerate(&self) -> Vec<Choices> {
        fn rec(
            space: &ActionSpace,
            q: usize,
            used: &mut Vec<bool>,
            cur: &mut Choices,
            out: &mut Vec<Choices>,
        ) {
            if q == space.rbs {
                out.push(cur.clone());
                return;
            }
            for slot in 0..space.head_width() {
                if slot < space.users && used[slot] {
                    continue;
                }
                if slot < space.users {
                    used[slot] = true;
                }
                cur[q] = space.choice(slot);
                rec(space, q + 1, used, cur, out);
                if slot < space.users {
                    used[slot] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(
            self,
            0,
            &mut vec![false; self.users],
            &mut vec![None; self.rbs],
            &mut out,
        );
        out
    }
}

/// Log-probabilities of one RB head restricted to the available options.
/// Masked entries are `-inf`.
fn masked_log_softmax(logits: &[f64], used: &[bool]) -> Vec<f64> {
    let available = |j: usize| j >= used.len() || !used[j];
    let max = (0..logits.len())
        .filter(|j| available(*j))
        .map(|j| logits[j])
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = max
        + (0..logits.len())
            .filter(|j| available(*j))
            .map(|j| (logits[j] - max).exp())
            .sum::<f64>()
            .ln();
    (0..logits.len())
        .map(|j| {
            if available(j) {
                logits[j] - lse
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Per-RB categorical factors derived from one set of head logits.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedPolicy {
    pub space: ActionSpace,
    pub logits: Vec<f64>,
}

impl FactorizedPolicy {
    fn head(&self, q: usize) -> &[f64] {
        let w = self.space.head_width();
        &self.logits[q * w..(q + 1) * w]
    }

    /// Calls `visit(q, log_probs, chosen_slot)` for each RB along `choices`.
    fn walk(&self, choices: &[Option<usize>], mut visit: impl FnMut(usize, &[f64], usize)) {
        let mut used = vec![false; self.space.users];
        for (q, c) in choices.iter().enumerate() {
            let lp = masked_log_softmax(self.head(q), &used);
            visit(q, &lp, self.space.slot(*c));
            if let Some(i) = c {
                used[*i] = true;
            }
        }
    }

    /// Factor probabilities for RB `q` given the users taken by earlier RBs.
    pub fn factor(&self, q: usize, used: &[bool]) -> Vec<f64> {
        masked_log_softmax(self.head(q), used)
            .into_iter()
            .map(f64::exp)
            .collect()
    }

    pub fn log_prob(&self, choices: &[Option<usize>]) -> f64 {
        let mut total = 0.0;
        self.walk(choices, |_, lp, slot| total += lp[slot]);
        total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Choices, f64) {
        let mut used = vec![false; self.space.users];
        let mut choices = Vec::with_capacity(self.space.rbs);
        let mut log_prob = 0.0;
        for q in 0..self.space.rbs {
            let lp = masked_log_softmax(self.head(q), &used);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut slot = self.space.idle();
            for (j, l) in lp.iter().enumerate() {
                if l.is_finite() {
                    acc += l.exp();
                    if u < acc {
                        slot = j;
                        break;
                    }
                }
            }
            log_prob += lp[slot];
            let c = self.space.choice(slot);
            if let Some(i) = c {
                used[i] = true;
            }
            choices.push(c);
        }
        (choices, log_prob)
    }

    /// Argmax per head (ties to the lower index, idle last).
    pub fn greedy(&self) -> Choices {
        let mut used = vec![false; self.space.users];
        let mut choices = Vec::with_capacity(self.space.rbs);
        for q in 0..self.space.rbs {
            let lp = masked_log_softmax(self.head(q), &used);
            let mut best = self.space.idle();
            for j in 0..lp.len() {
                if lp[j] > lp[best] || (lp[j] == lp[best] && j < best) {
                    best = j;
                }
            }
            let c = self.space.choice(best);
            if let Some(i) = c {
                used[i] = true;
            }
            choices.push(c);
        }
        choices
    }
}

/// Fully connected network with tanh hidden layers and a linear output.
/// Parameters are stored flat, layer by layer, weights (row-major, out×in)
/// before biases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyParams {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

impl PolicyParams {
    /// `layers` weight layers mapping `input` through `hidden`-wide tanh
    /// layers to the head logits.
    pub fn shape(input: usize, hidden: usize, layers: usize, space: ActionSpace) -> Vec<usize> {
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat_n(hidden, layers.saturating_sub(1)));
        sizes.push(space.logits_len());
        sizes
    }

    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn zeros(sizes: Vec<usize>) -> Self {
        let n = Self::param_count(&sizes);
        Self {
            sizes,
            params: vec![0.0; n],
        }
    }

    /// Gaussian weights with std `1/√fan_in` (output layer scaled by 0.1),
    /// zero biases.
    pub fn seeded<R: Rng + ?Sized>(sizes: Vec<usize>, rng: &mut R) -> Self {
        let mut p = Self::zeros(sizes);
        let mut offset = 0;
        let layers = p.sizes.len() - 1;
        for l in 0..layers {
            let (fan_in, fan_out) = (p.sizes[l], p.sizes[l + 1]);
            let scale = if l + 1 == layers { 0.1 } else { 1.0 } / (fan_in.max(1) as f64).sqrt();
            for w in &mut p.params[offset..offset + fan_in * fan_out] {
                *w = scale * rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
            offset += fan_in * fan_out + fan_out;
        }
        p
    }

    /// Zeroes the output layer so every head starts uniform over its
    /// allowed choices.
    pub fn with_uniform_output(mut self) -> Self {
        let layers = self.sizes.len() - 1;
        let (n_in, n_out) = (self.sizes[layers - 1], self.sizes[layers]);
        let len = self.params.len();
        self.params[len - n_in * n_out - n_out..].fill(0.0);
        self
    }

    /// Post-activation outputs of every layer, input first.
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![input.to_vec()];
        let mut offset = 0;
        let layers = self.sizes.len() - 1;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let prev = &acts[l];
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let z = b[o]
                        + w[o * n_in..(o + 1) * n_in]
                            .iter()
                            .zip(prev)
                            .map(|(a, x)| a * x)
                            .sum::<f64>();
                    if l + 1 == layers {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            offset += n_in * n_out + n_out;
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.activations(input).pop().unwrap_or_default()
    }

    /// Parameter gradient of `Σ grad_out · output`.
    fn backward(&self, acts: &[Vec<f64>], grad_out: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut o = 0;
        for l in 0..layers {
            offsets.push(o);
            o += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 != layers {
                for (d, a) in delta.iter_mut().zip(&acts[l + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let off = offsets[l];
            let prev = &acts[l];
            for out in 0..n_out {
                for i in 0..n_in {
                    grad[off + out * n_in + i] = delta[out] * prev[i];
                }
                grad[off + n_in * n_out + out] = delta[out];
            }
            if l > 0 {
                let w = &self.params[off..off + n_in * n_out];
                delta = (0..n_in)
                    .map(|i| (0..n_out).map(|out| w[out * n_in + i] * delta[out]).sum())
                    .collect();
            }
        }
        grad
    }

    pub fn policy(&self, state: &[f64], space: ActionSpace) -> FactorizedPolicy {
        FactorizedPolicy {
            space,
            logits: self.forward(state),
        }
    }
}

pub fn policy_forward(theta: &PolicyParams, state: &[f64], space: ActionSpace) -> FactorizedPolicy {
    theta.policy(state, space)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionSample {
    pub choices: Choices,
    pub assignment: RbAssignment,
    pub log_prob_old: f64,
    pub reward: f64,
}

/// `k` independent draws from the stored policy, each with its exact
/// log-probability and table reward.
pub fn sample_actions<R: Rng + ?Sized>(
    theta_star: &PolicyParams,
    state: &[f64],
    table: &MssTable,
    k: usize,
    rng: &mut R,
) -> Vec<ActionSample> {
    let space = ActionSpace {
        users: table.users(),
        rbs: table.rbs(),
    };
    let policy = theta_star.policy(state, space);
    (0..k)
        .map(|_| {
            let (choices, log_prob_old) = policy.sample(rng);
            let assignment = RbAssignment::from_rb_map(space.users, &choices);
            let reward = evaluate_reward(&assignment, table);
            ActionSample {
                choices,
                assignment,
                log_prob_old,
                reward,
            }
        })
        .collect()
}

/// KL(p ‖ q) in nats for categorical distributions given as log-probabilities.
pub fn categorical_kl(log_p: &[f64], log_q: &[f64]) -> f64 {
    log_p
        .iter()
        .zip(log_q)
        .filter(|(p, _)| p.is_finite())
        .map(|(p, q)| p.exp() * (p - q))
        .sum()
}

/// KL between the stored and current policies, summed over RB factors along
/// each sampled action's prefix and averaged over the batch.
pub fn kl_divergence(
    theta_star: &PolicyParams,
    theta: &PolicyParams,
    state: &[f64],
    batch: &[ActionSample],
    space: ActionSpace,
) -> f64 {
    let star = theta_star.policy(state, space);
    let cur = theta.policy(state, space);
    batch_kl(&star, &cur, batch)
}

fn batch_kl(star: &FactorizedPolicy, cur: &FactorizedPolicy, batch: &[ActionSample]) -> f64 {
    let mut total = 0.0;
    for s in batch {
        let mut used = vec![false; star.space.users];
        for (q, c) in s.choices.iter().enumerate() {
            let lp_star = masked_log_softmax(star.head(q), &used);
            let lp_cur = masked_log_softmax(cur.head(q), &used);
            total += categorical_kl(&lp_star, &lp_cur);
            if let Some(i) = c {
                used[*i] = true;
            }
        }
    }
    total / batch.len() as f64
}

/// Sampled batch plus the fixed quantities the surrogate needs.
#[derive(Debug, Clone)]
pub struct Surrogate<'a> {
    pub state: &'a [f64],
    pub space: ActionSpace,
    pub star: FactorizedPolicy,
    pub batch: &'a [ActionSample],
    pub lambda: f64,
}

impl<'a> Surrogate<'a> {
    pub fn new(
        theta_star: &PolicyParams,
        state: &'a [f64],
        space: ActionSpace,
        batch: &'a [ActionSample],
        lambda: f64,
    ) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::Input("surrogate needs a non-empty batch".into()));
        }
        if batch.iter().any(|s| !s.log_prob_old.is_finite()) {
            return Err(Error::Training(
                "sampled action has zero probability under the stored policy".into(),
            ));
        }
        Ok(Self {
            state,
            space,
            star: theta_star.policy(state, space),
            batch,
            lambda,
        })
    }

    /// Importance-sampled reward estimate at `theta`.
    pub fn expected_reward(&self, theta: &PolicyParams) -> f64 {
        let cur = theta.policy(self.state, self.space);
        self.batch
            .iter()
            .map(|s| s.reward * (cur.log_prob(&s.choices) - s.log_prob_old).exp())
            .sum::<f64>()
            / self.batch.len() as f64
    }

    pub fn kl(&self, theta: &PolicyParams) -> f64 {
        batch_kl(
            &self.star,
            &theta.policy(self.state, self.space),
            self.batch,
        )
    }

    pub fn value(&self, theta: &PolicyParams) -> f64 {
        self.expected_reward(theta) - self.lambda * self.kl(theta)
    }

    /// `J(θ)` and `∇_θ J(θ)` by reverse-mode differentiation through the
    /// masked head softmaxes and the network.
    pub fn value_and_grad(&self, theta: &PolicyParams) -> (f64, Vec<f64>) {
        let acts = theta.activations(self.state);
        let cur = FactorizedPolicy {
            space: self.space,
            logits: acts.last().cloned().unwrap_or_default(),
        };
        let width = self.space.head_width();
        let k = self.batch.len() as f64;
        let mut d_logits = vec![0.0; cur.logits.len()];
        let mut estimate = 0.0;
        let mut kl = 0.0;
        for s in self.batch {
            let weight = s.reward * (cur.log_prob(&s.choices) - s.log_prob_old).exp() / k;
            estimate += weight;
            let mut used = vec![false; self.space.users];
            for (q, c) in s.choices.iter().enumerate() {
                let lp = masked_log_softmax(cur.head(q), &used);
                let lp_star = masked_log_softmax(self.star.head(q), &used);
                kl += categorical_kl(&lp_star, &lp) / k;
                let slot = self.space.slot(*c);
                for j in 0..width {
                    if !lp[j].is_finite() {
                        continue;
                    }
                    let p = lp[j].exp();
                    let p_star = lp_star[j].exp();
                    let indicator = if j == slot { 1.0 } else { 0.0 };
                    // d log p_slot / dz_j = 1[j = slot] − p_j; d KL / dz_j = p_j − p*_j.
                    d_logits[q * width + j] +=
                        weight * (indicator - p) - self.lambda / k * (p - p_star);
                }
                if let Some(i) = c {
                    used[*i] = true;
                }
            }
        }
        (
            estimate - self.lambda * kl,
            theta.backward(&acts, &d_logits),
        )
    }
}

pub fn surrogate_objective(
    theta: &PolicyParams,
    theta_star: &PolicyParams,
    state: &[f64],
    space: ActionSpace,
    batch: &[ActionSample],
    lambda: f64,
) -> Result<f64> {
    Ok(Surrogate::new(theta_star, state, space, batch, lambda)?.value(theta))
}

/// One ascent step `θ ← θ + δ ∇J(θ)`.
pub fn policy_gradient_step(
    theta: &PolicyParams,
    surrogate: &Surrogate<'_>,
    learning_rate: f64,
) -> Result<PolicyParams> {
    if !(learning_rate > 0.0) {
        return Err(Error::Input(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    let (_, grad) = surrogate.value_and_grad(theta);
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Training(format!(
            "non-finite gradient at parameter {i} (λ = {}, batch of {})",
            surrogate.lambda,
            surrogate.batch.len()
        )));
    }
    let mut next = theta.clone();
    next.params
        .iter_mut()
        .zip(&grad)
        .for_each(|(p, g)| *p += learning_rate * g);
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenaltyState {
    pub lambda: f64,
    pub tau: f64,
    pub eta: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl PenaltyState {
    pub fn high(&self) -> f64 {
        1.0 + self.tau
    }

    pub fn low(&self) -> f64 {
        1.0 - self.tau
    }
}

/// Multiplies λ by η above `1 + τ`, divides below `1 − τ`, then clamps.
pub fn update_penalty(p: PenaltyState, kl: f64) -> PenaltyState {
    let lambda = if kl > p.high() {
        p.lambda * p.eta
    } else if kl < p.low() {
        p.lambda / p.eta
    } else {
        p.lambda
    };
    PenaltyState {
        lambda: lambda.clamp(p.lambda_min, p.lambda_max),
        ..p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Variant {
    /// Stored policy, `T` inner steps per batch, adaptive KL penalty.
    Appo,
    /// Fresh batch every step, no KL term.
    Apg,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSettings {
    pub variant: Variant,
    pub batch: usize,
    pub inner_steps: usize,
    pub learning_rate: f64,
    pub lambda_init: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub eta: f64,
    pub tau: f64,
    pub max_outer: usize,
    pub window: usize,
    pub tolerance: f64,
    pub hidden: usize,
    pub layers: usize,
}

impl TrainSettings {
    pub fn from_config(cfg: &crate::config::SimConfig) -> Self {
        Self {
            variant: Variant::Appo,
            batch: cfg.batch,
            inner_steps: cfg.inner_steps,
            learning_rate: cfg.learning_rate,
            lambda_init: cfg.lambda_init,
            lambda_min: cfg.lambda_min,
            lambda_max: cfg.lambda_max,
            eta: cfg.eta,
            tau: cfg.tau,
            max_outer: cfg.max_outer,
            window: cfg.window,
            tolerance: cfg.tolerance,
            hidden: cfg.hidden,
            layers: cfg.layers,
        }
    }

    /// The APG baseline: λ = 0, one update per fresh batch.
    pub fn apg(&self) -> Self {
        Self {
            variant: Variant::Apg,
            inner_steps: 1,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRow {
    pub iter: usize,
    #[serde(rename = "J")]
    pub objective: f64,
    pub mean_reward: f64,
    pub kl: f64,
    pub lambda: f64,
    pub best_reward: f64,
}

pub const LOG_HEADER: &str = "iter,J,mean_reward,kl,lambda,best_reward";

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iter, r.objective, r.mean_reward, r.kl, r.lambda, r.best_reward
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySnapshot {
    pub theta: PolicyParams,
    pub theta_star: PolicyParams,
    pub lambda: f64,
    pub assignment: Choices,
    pub reward: f64,
    pub rounds: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainOutcome {
    pub snapshot: PolicySnapshot,
    pub log: Vec<LogRow>,
}

/// Moving averages of `values` over `window` entries, one per index from
/// `window - 1` on.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    values
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect()
}

/// True once the moving average of J has changed by less than `tolerance`
/// (relative) at every one of the last `window` rounds.
pub fn has_converged(objectives: &[f64], window: usize, tolerance: f64) -> bool {
    if objectives.len() < 2 * window {
        return false;
    }
    let ma = moving_average(objectives, window);
    ma[ma.len() - window - 1..]
        .windows(2)
        .all(|w| (w[1] - w[0]).abs() <= tolerance * w[0].abs().max(1e-12))
}

/// Trains a policy for one fixed state against the reward table.
pub fn train(
    state: &[f64],
    table: &MssTable,
    settings: &TrainSettings,
    seed: u64,
) -> Result<TrainOutcome> {
    let space = ActionSpace {
        users: table.users(),
        rbs: table.rbs(),
    };
    let sizes = PolicyParams::shape(state.len(), settings.hidden, settings.layers, space);
    let mut theta =
        PolicyParams::seeded(sizes, &mut rng::stream(seed, rng::INIT)).with_uniform_output();
    let mut sampling: ChaCha8Rng = rng::stream(seed, rng::SAMPLING);
    let adaptive = settings.variant == Variant::Appo;
    let mut penalty = PenaltyState {
        lambda: if adaptive { settings.lambda_init } else { 0.0 },
        tau: settings.tau,
        eta: settings.eta,
        lambda_min: settings.lambda_min,
        lambda_max: settings.lambda_max,
    };
    let mut log = Vec::new();
    let mut objectives = Vec::new();
    let mut converged = false;

    for iter in 0..settings.max_outer {
        let theta_star = theta.clone();
        let batch = sample_actions(&theta_star, state, table, settings.batch, &mut sampling);
        let surrogate = Surrogate::new(&theta_star, state, space, &batch, penalty.lambda)?;
        for _ in 0..settings.inner_steps {
            theta = policy_gradient_step(&theta, &surrogate, settings.learning_rate)?;
        }
        let objective = surrogate.value(&theta);
        let kl = surrogate.kl(&theta);
        let mean_reward = batch.iter().map(|s| s.reward).sum::<f64>() / batch.len() as f64;
        let greedy = theta.policy(state, space).greedy();
        let best_reward = evaluate_reward(&RbAssignment::from_rb_map(space.users, &greedy), table);
        log.push(LogRow {
            iter,
            objective,
            mean_reward,
            kl,
            lambda: penalty.lambda,
            best_reward,
        });
        if adaptive {
            penalty = update_penalty(penalty, kl);
        }
        objectives.push(objective);
        if has_converged(&objectives, settings.window, settings.tolerance) {
            converged = true;
            break;
        }
    }

    let policy = theta.policy(state, space);
    let assignment = policy.greedy();
    let reward = evaluate_reward(&RbAssignment::from_rb_map(space.users, &assignment), table);
    Ok(TrainOutcome {
        snapshot: PolicySnapshot {
            theta_star: theta.clone(),
            theta,
            lambda: penalty.lambda,
            assignment,
            reward,
            rounds: log.len(),
            converged,
        },
        log,
    })
}
