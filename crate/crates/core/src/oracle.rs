//! Exact and baseline solvers over the per-(user, RB) MSS table.
//!
//! Each user's recovery depends only on the RB it holds, so total MSS of an
//! assignment is the sum of table entries over assigned pairs and the optimum
//! is a maximum-weight bipartite matching.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::channel::RbAssignment;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Enumeration refuses instances with more candidate assignments than this.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MssTable {
    users: usize,
    rbs: usize,
    values: Vec<f64>,
}

impl MssTable {
    pub fn new(users: usize, rbs: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != users * rbs {
            return Err(Error::Input(format!(
                "{} values for a {users}×{rbs} table",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("table entries must be finite".into()));
        }
        Ok(Self { users, rbs, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rbs = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != rbs) {
            return Err(Error::Input("ragged table".into()));
        }
        Self::new(rows.len(), rbs, rows.concat())
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn rbs(&self) -> usize {
        self.rbs
    }

    pub fn get(&self, user: usize, rb: usize) -> f64 {
        self.values[user * self.rbs + rb]
    }

    pub fn row(&self, user: usize) -> &[f64] {
        &self.values[user * self.rbs..(user + 1) * self.rbs]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("user");
        (0..self.rbs).for_each(|q| s.push_str(&format!(",rb{q}")));
        s.push('\n');
        for i in 0..self.users {
            s.push_str(&i.to_string());
            self.row(i)
                .iter()
                .for_each(|v| s.push_str(&format!(",{v}")));
            s.push('\n');
        }
        s
    }
}

pub fn build_mss_table(scenario: &Scenario) -> Result<MssTable> {
    let (users, rbs) = (scenario.users(), scenario.rbs());
    let mut values = Vec::with_capacity(users * rbs);
    for i in 0..users {
        for q in 0..rbs {
            values.push(scenario.user_report(i, Some(q))?.score);
        }
    }
    MssTable::new(users, rbs, values)
}

/// Σ of table entries over assigned (user, RB) pairs.
pub fn evaluate_reward(a: &RbAssignment, table: &MssTable) -> f64 {
    a.pairs().map(|(i, q)| table.get(i, q)).sum()
}

/// Maximum-weight assignment via the O(n³) Hungarian method on the square
/// padding of the negated table.
pub fn hungarian_optimum(table: &MssTable) -> (RbAssignment, f64) {
    let (users, rbs) = (table.users, table.rbs);
    let n = users.max(rbs);
    if n == 0 {
        return (RbAssignment::empty(users, rbs), 0.0);
    }
    let cost = |i: usize, j: usize| -> f64 {
        if i < users && j < rbs {
            -table.get(i, j)
        } else {
            0.0
        }
    };
    // 1-based potentials; p[j] is the row matched to column j.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut a = RbAssignment::empty(users, rbs);
    for j in 1..=n {
        let (i, q) = (p[j] - 1, j - 1);
        if i < users && q < rbs {
            a.set(i, q, true);
        }
    }
    let value = evaluate_reward(&a, table);
    (a, value)
}

/// Number of RB → user-or-idle maps that respect the one-RB-per-user rule.
pub fn assignment_count(users: usize, rbs: usize) -> u128 {
    // Σ_k C(Q,k) · U!/(U−k)!
    let mut total = 0u128;
    let mut binom = 1u128;
    let mut falling = 1u128;
    for k in 0..=rbs.min(users) {
        total = total.saturating_add(binom.saturating_mul(falling));
        binom = binom * (rbs - k) as u128 / (k + 1) as u128;
        falling = falling.saturating_mul((users - k) as u128);
    }
    total
}

/// Best assignment by enumerating every valid RB → user-or-idle map in
/// lexicographic order (users before idle); the first maximum wins.
pub fn exhaustive_optimum(table: &MssTable) -> Result<(RbAssignment, f64)> {
    let count = assignment_count(table.users, table.rbs);
    if count > ENUMERATION_LIMIT {
        return Err(Error::InstanceTooLarge(count));
    }
    let mut best = (vec![None; table.rbs], f64::NEG_INFINITY);
    let mut current = vec![None; table.rbs];
    let mut used = vec![false; table.users];
    enumerate(table, 0, 0.0, &mut current, &mut used, &mut best);
    Ok((
        RbAssignment::from_rb_map(table.users, &best.0),
        best.1.max(0.0),
    ))
}

fn enumerate(
    table: &MssTable,
    q: usize,
    value: f64,
    current: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    best: &mut (Vec<Option<usize>>, f64),
) {
    if q == table.rbs {
        if value > best.1 {
            *best = (current.clone(), value);
        }
        return;
    }
    for i in 0..table.users {
        if used[i] {
            continue;
        }
        used[i] = true;
        current[q] = Some(i);
        enumerate(table, q + 1, value + table.get(i, q), current, used, best);
        used[i] = false;
    }
    current[q] = None;
    enumerate(table, q + 1, value, current, used, best);
}

/// Uniformly random maximal assignment (min(U, Q) pairs).
pub fn random_assignment<R: Rng + ?Sized>(users: usize, rbs: usize, rng: &mut R) -> RbAssignment {
    let mut user_order: Vec<usize> = (0..users).collect();
    let mut rb_order: Vec<usize> = (0..rbs).collect();
    user_order.shuffle(rng);
    rb_order.shuffle(rng);
    let mut a = RbAssignment::empty(users, rbs);
    for (i, q) in user_order.into_iter().zip(rb_order) {
        a.set(i, q, true);
    }
    a
}

pub fn baseline_random<R: Rng + ?Sized>(table: &MssTable, rng: &mut R) -> f64 {
    evaluate_reward(&random_assignment(table.users, table.rbs, rng), table)
}

/// Total MSS when every assigned user receives triples in a uniformly random
/// order instead of importance order.
pub fn baseline_random_selection<R: Rng + ?Sized>(
    scenario: &Scenario,
    assignment: &RbAssignment,
    rng: &mut R,
) -> Result<f64> {
    let mut total = 0.0;
    for (i, q) in assignment.pairs() {
        let mut order: Vec<usize> = (0..scenario.documents[i].graph.len()).collect();
        order.shuffle(rng);
        total += scenario.user_report_in_order(i, Some(q), &order)?.score;
    }
    Ok(total)
}

/// Total MSS when every assigned user receives the first `budget` tokens of
/// its original text.
pub fn baseline_truncated_text(scenario: &Scenario, assignment: &RbAssignment) -> Result<f64> {
    let mut total = 0.0;
    for (i, q) in assignment.pairs() {
        let tokens = &scenario.documents[i].document.tokens;
        let budget = scenario.budget(i, Some(q)).min(tokens.len());
        total += scenario.score_recovery(i, &tokens[..budget])?.score;
    }
    Ok(total)
}
