//! OFDMA downlink: channel gains, per-RB Shannon capacity, delay-limited token
//! budgets, and the one-RB-per-user allocation constraint.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// dBm/Hz to W/Hz.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbGrid {
    pub bandwidth_hz: f64,
    /// Per-RB interference power in watts; its length is the RB count.
    pub interference_w: Vec<f64>,
    /// Noise power spectral density in W/Hz (linear).
    pub noise_psd: f64,
}

impl RbGrid {
    pub fn new(bandwidth_hz: f64, interference_w: Vec<f64>, noise_psd: f64) -> Result<Self> {
        if interference_w.is_empty() {
            return Err(Error::Input("grid needs at least one RB".into()));
        }
        if !(bandwidth_hz > 0.0) || !(noise_psd > 0.0) {
            return Err(Error::Input(
                "bandwidth and noise density must be positive".into(),
            ));
        }
        if interference_w.iter().any(|i| !(*i >= 0.0)) {
            return Err(Error::Input("interference must be nonnegative".into()));
        }
        Ok(Self {
            bandwidth_hz,
            interference_w,
            noise_psd,
        })
    }

    pub fn rb_count(&self) -> usize {
        self.interference_w.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserLink {
    pub distance_m: f64,
    pub fading: f64,
    pub gain: f64,
    pub power_w: f64,
}

impl UserLink {
    pub fn new(distance_m: f64, fading: f64, power_w: f64) -> Result<Self> {
        Ok(Self {
            distance_m,
            fading,
            gain: channel_gain(fading, distance_m)?,
            power_w,
        })
    }
}

/// γ·d⁻².
pub fn channel_gain(fading: f64, distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::Input(format!(
            "distance must be positive, got {distance_m}"
        )));
    }
    if !(fading >= 0.0) {
        return Err(Error::Input(format!(
            "fading must be nonnegative, got {fading}"
        )));
    }
    Ok(fading / (distance_m * distance_m))
}

/// Achievable rate in bit/s of `user` on `rb`; zero without an RB.
pub fn capacity(user: &UserLink, rb: Option<usize>, grid: &RbGrid) -> f64 {
    match rb {
        None => 0.0,
        Some(q) => {
            let sinr = user.power_w * user.gain
                / (grid.interference_w[q] + grid.bandwidth_hz * grid.noise_psd);
            grid.bandwidth_hz * (1.0 + sinr).log2()
        }
    }
}

/// Largest token count `z` with `z·bits_per_token ≤ rate·delay`.
pub fn token_budget(rate_bps: f64, bits_per_token: f64, delay_s: f64) -> usize {
    let capacity_bits = rate_bps * delay_s;
    if !(capacity_bits > 0.0) || !(bits_per_token > 0.0) {
        return 0;
    }
    let mut z = (capacity_bits / bits_per_token).floor() as usize;
    while z > 0 && z as f64 * bits_per_token > capacity_bits {
        z -= 1;
    }
    while (z + 1) as f64 * bits_per_token <= capacity_bits {
        z += 1;
    }
    z
}

/// Places `users` uniformly in a disk and draws unit-mean exponential power
/// fading for each.
pub fn place_users<R: Rng + ?Sized>(
    users: usize,
    radius_m: f64,
    min_distance_m: f64,
    power_w: f64,
    rng: &mut R,
) -> Result<Vec<UserLink>> {
    (0..users)
        .map(|_| {
            let u: f64 = rng.random();
            let d = (radius_m * u.sqrt()).max(min_distance_m);
            let fading: f64 = Exp1.sample(rng);
            UserLink::new(d, fading, power_w)
        })
        .collect()
}

/// Binary user×RB allocation matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RbAssignment {
    users: usize,
    rbs: usize,
    alloc: Vec<bool>,
}

impl RbAssignment {
    pub fn empty(users: usize, rbs: usize) -> Self {
        Self {
            users,
            rbs,
            alloc: vec![false; users * rbs],
        }
    }

    /// From an RB → user map (`None` leaves the RB idle).
    pub fn from_rb_map(users: usize, map: &[Option<usize>]) -> Self {
        let mut a = Self::empty(users, map.len());
        for (q, u) in map.iter().enumerate() {
            if let Some(i) = u {
                a.set(*i, q, true);
            }
        }
        a
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn rbs(&self) -> usize {
        self.rbs
    }

    pub fn get(&self, user: usize, rb: usize) -> bool {
        self.alloc[user * self.rbs + rb]
    }

    pub fn set(&mut self, user: usize, rb: usize, on: bool) {
        self.alloc[user * self.rbs + rb] = on;
    }

    /// First RB held by `user`.
    pub fn rb_of(&self, user: usize) -> Option<usize> {
        (0..self.rbs).find(|q| self.get(user, *q))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.users).flat_map(move |i| {
            (0..self.rbs)
                .filter(move |q| self.get(i, *q))
                .map(move |q| (i, q))
        })
    }

    pub fn rb_map(&self) -> Vec<Option<usize>> {
        (0..self.rbs)
            .map(|q| (0..self.users).find(|i| self.get(*i, q)))
            .collect()
    }

    pub fn assigned_users(&self) -> usize {
        (0..self.users).filter(|i| self.rb_of(*i).is_some()).count()
    }
}

/// True iff the matrix is `users × rbs` with every row and column sum ≤ 1.
pub fn validate_assignment(a: &RbAssignment, users: usize, rbs: usize) -> bool {
    if a.users != users || a.rbs != rbs {
        return false;
    }
    let rows_ok = (0..users).all(|i| (0..rbs).filter(|q| a.get(i, *q)).count() <= 1);
    let cols_ok = (0..rbs).all(|q| (0..users).filter(|i| a.get(*i, q)).count() <= 1);
    rows_ok && cols_ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gains() {
        assert_eq!(channel_gain(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(channel_gain(0.0, 37.0).unwrap(), 0.0);
        assert_relative_eq!(channel_gain(2.0, 10.0).unwrap(), 0.02);
        assert!(channel_gain(1.0, 0.0).is_err());
        assert!(channel_gain(1.0, -3.0).is_err());
    }

    #[test]
    fn noise_conversion() {
        assert_relative_eq!(dbm_to_watts(30.0), 1.0);
        assert_relative_eq!(
            dbm_to_watts(-174.0),
            3.981_071_705_534_972e-21,
            max_relative = 1e-12
        );
    }

    #[test]
    fn capacity_formula() {
        // P·φ = 3 W, I = 0, W·N0 = 1 W.
        let grid = RbGrid::new(1e6, vec![0.0], 1e-6).unwrap();
        let user = UserLink {
            distance_m: 1.0,
            fading: 3.0,
            gain: 3.0,
            power_w: 1.0,
        };
        assert_relative_eq!(capacity(&user, Some(0), &grid), 2e6, max_relative = 1e-12);
        assert_eq!(capacity(&user, None, &grid), 0.0);
    }

    #[test]
    fn budgets() {
        assert_eq!(token_budget(0.0, 80.0, 1e-4), 0);
        assert_eq!(token_budget(2.4e6, 80.0, 1e-4), 3);
    }

    #[test]
    fn assignment_validation() {
        let id = RbAssignment::from_rb_map(2, &[Some(0), Some(1)]);
        assert!(validate_assignment(&id, 2, 2));
        let mut two_rbs = RbAssignment::empty(2, 2);
        two_rbs.set(0, 0, true);
        two_rbs.set(0, 1, true);
        assert!(!validate_assignment(&two_rbs, 2, 2));
        let mut shared = RbAssignment::empty(2, 2);
        shared.set(0, 0, true);
        shared.set(1, 0, true);
        assert!(!validate_assignment(&shared, 2, 2));
        assert!(!validate_assignment(&id, 3, 2));
    }

    #[test]
    fn placement_stays_in_disk() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let links = place_users(200, 500.0, 10.0, 1.0, &mut rng).unwrap();
        assert!(links
            .iter()
            .all(|l| (10.0..=500.0).contains(&l.distance_m) && l.fading >= 0.0));
        let mean_fading = links.iter().map(|l| l.fading).sum::<f64>() / 200.0;
        assert!((mean_fading - 1.0).abs() < 0.25, "{mean_fading}");
    }

    #[test]
    fn doubling_signal_never_lowers_capacity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let grid = RbGrid::new(
                rng.random_range(1e3..1e7),
                vec![rng.random_range(0.0..1e-9)],
                1e-18,
            )
            .unwrap();
            let gain = rng.random_range(0.0..1e-3);
            let a = UserLink {
                distance_m: 1.0,
                fading: gain,
                gain,
                power_w: 1.0,
            };
            let b = UserLink { power_w: 2.0, ..a };
            assert!(capacity(&b, Some(0), &grid) >= capacity(&a, Some(0), &grid));
        }
    }

    proptest! {
        #[test]
        fn budget_is_tight(rate in 0.0f64..1e9, bits in 1.0f64..1e3, delay in 1e-6f64..1e-2) {
            let b = token_budget(rate, bits, delay);
            prop_assert!(b as f64 * bits <= rate * delay);
            prop_assert!((b + 1) as f64 * bits > rate * delay);
        }

        #[test]
        fn budget_monotone(rate in 0.0f64..1e8, bits in 1.0f64..200.0, delay in 1e-5f64..1e-3, s in 1.0f64..3.0) {
            let b = token_budget(rate, bits, delay);
            prop_assert!(token_budget(rate * s, bits, delay) >= b);
            prop_assert!(token_budget(rate, bits, delay * s) >= b);
            prop_assert!(token_budget(rate, bits * s, delay) <= b);
        }

        #[test]
        fn capacity_monotone(
            w in 1e3f64..1e7, pg in 1e-12f64..1e-3, i in 0.0f64..1e-9, s in 1.0f64..4.0,
        ) {
            let grid = RbGrid::new(w, vec![i], 4e-21).unwrap();
            let u = UserLink { distance_m: 1.0, fading: pg, gain: pg, power_w: 1.0 };
            let c = capacity(&u, Some(0), &grid);
            prop_assert!(c >= 0.0);
            let stronger = UserLink { gain: pg * s, ..u };
            prop_assert!(capacity(&stronger, Some(0), &grid) >= c);
            let wider = RbGrid::new(w * s, vec![i], 4e-21).unwrap();
            prop_assert!(capacity(&u, Some(0), &wider) >= c);
            let noisier = RbGrid::new(w, vec![i * s + 1e-15], 4e-21).unwrap();
            prop_assert!(capacity(&u, Some(0), &noisier) <= c);
        }

        #[test]
        fn valid_assignments_are_bounded(map in proptest::collection::vec(proptest::option::of(0usize..6), 1..6)) {
            let users = 6;
            let mut seen = std::collections::HashSet::new();
            let map: Vec<Option<usize>> = map.into_iter().map(|u| u.filter(|i| seen.insert(*i))).collect();
            let a = RbAssignment::from_rb_map(users, &map);
            prop_assert!(validate_assignment(&a, users, map.len()));
            prop_assert!(a.assigned_users() <= users.min(map.len()));
            prop_assert_eq!(a.rb_map(), map);
        }
    }
}
