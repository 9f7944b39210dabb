//! Content demand: long-term popularity from a Chinese restaurant process
//! and short-term Ornstein-Uhlenbeck fluctuation around it.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Demand-side parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandConfig {
    /// CRP concentration `θ`.
    pub theta: f64,
    /// CRP discount `ν`.
    pub nu: f64,
    /// Catalog size `M`.
    pub catalog_size: usize,
    /// OU reversion rate `r`.
    pub reversion_rate: f64,
    /// OU volatility `η`.
    pub volatility: f64,
    /// Period `T` between long-term popularity refreshes.
    pub period: f64,
    /// Mean requests per user per period feeding each SBS's CRP.
    pub requests_per_user: f64,
    pub ipi: IpiModel,
}

impl Default for DemandConfig {
    fn default() -> Self {
        DemandConfig {
            theta: 1.0,
            nu: 0.5,
            catalog_size: 20,
            reversion_rate: 1.0,
            volatility: 0.1,
            period: 1.0,
            requests_per_user: 1000.0,
            ipi: IpiModel::default(),
        }
    }
}

impl DemandConfig {
    pub fn validate(&self) -> Result<()> {
        check_crp("demand", self.theta, self.nu)?;
        if self.catalog_size == 0 {
            return Err(Error::validation("demand.catalog_size", "must be at least 1"));
        }
        if !self.reversion_rate.is_finite() || self.reversion_rate < 0.0 {
            return Err(Error::validation("demand.reversion_rate", "must be finite and non-negative"));
        }
        if !self.volatility.is_finite() || self.volatility < 0.0 {
            return Err(Error::validation("demand.volatility", "must be finite and non-negative"));
        }
        if !self.period.is_finite() || self.period <= 0.0 {
            return Err(Error::validation("demand.period", "must be finite and positive"));
        }
        if !self.requests_per_user.is_finite() || self.requests_per_user < 0.0 {
            return Err(Error::validation("demand.requests_per_user", "must be finite and non-negative"));
        }
        self.ipi.validate()
    }
}

fn check_crp(prefix: &str, theta: f64, nu: f64) -> Result<()> {
    if !nu.is_finite() || !(0.0..1.0).contains(&nu) {
        return Err(Error::validation(format!("{prefix}.nu"), format!("must lie in [0, 1), got {nu}")));
    }
    if !theta.is_finite() || theta <= -nu {
        return Err(Error::validation(
            format!("{prefix}.theta"),
            format!("must exceed -nu, got {theta}"),
        ));
    }
    Ok(())
}

/// Request history of one SBS search region under a two-parameter CRP over
/// a finite catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct CrpState {
    theta: f64,
    nu: f64,
    counts: Vec<u64>,
    total: u64,
    /// Requested content ids, in order of first request.
    requested_ids: Vec<usize>,
    /// Unrequested content ids; `pool_pos[j]` locates `j` in it.
    pool: Vec<usize>,
    pool_pos: Vec<usize>,
}

impl CrpState {
    pub fn new(catalog_size: usize, theta: f64, nu: f64) -> Result<Self> {
        check_crp("crp", theta, nu)?;
        if catalog_size == 0 {
            return Err(Error::validation("crp.catalog_size", "must be at least 1"));
        }
        Ok(CrpState {
            theta,
            nu,
            counts: vec![0; catalog_size],
            total: 0,
            requested_ids: Vec::new(),
            pool: (0..catalog_size).collect(),
            pool_pos: (0..catalog_size).collect(),
        })
    }

    /// Builds a state from existing request counts.
    pub fn with_counts(counts: Vec<u64>, theta: f64, nu: f64) -> Result<Self> {
        let mut state = CrpState::new(counts.len(), theta, nu)?;
        for (j, &n) in counts.iter().enumerate() {
            if n > 0 {
                state.record(j);
                state.counts[j] = n;
                state.total += n - 1;
            }
        }
        Ok(state)
    }

    pub fn catalog_size(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct contents requested so far, `|U^r|`.
    pub fn requested(&self) -> usize {
        self.requested_ids.len()
    }

    /// Probability that the next request is for a never-requested content.
    pub fn new_content_probability(&self) -> f64 {
        if self.pool.is_empty() {
            return 0.0;
        }
        (self.nu * self.requested() as f64 + self.theta) / (self.total as f64 + self.theta)
    }

    /// Mean popularity of every content. Requested contents get
    /// `(n_j − ν)/(N + θ)`; the new-content mass is split uniformly over the
    /// unrequested ones, or, once the catalog is exhausted, folded back into
    /// the requested contents in proportion to `n_j − ν`.
    pub fn mean_popularity(&self) -> Vec<f64> {
        let m = self.counts.len();
        if self.total == 0 {
            return vec![1.0 / m as f64; m];
        }
        let n = self.total as f64;
        let unrequested = self.pool.len();
        if unrequested == 0 {
            let denom = n - self.nu * self.requested() as f64;
            return self
                .counts
                .iter()
                .map(|&c| (c as f64 - self.nu) / denom)
                .collect();
        }
        let share = self.new_content_probability() / unrequested as f64;
        self.counts
            .iter()
            .map(|&c| {
                if c == 0 {
                    share
                } else {
                    (c as f64 - self.nu) / (n + self.theta)
                }
            })
            .collect()
    }

    /// Folds one request for `content` into the history.
    pub fn record(&mut self, content: usize) {
        if self.counts[content] == 0 {
            let pos = self.pool_pos[content];
            let last = *self.pool.last().expect("unrequested content is in the pool");
            self.pool.swap_remove(pos);
            if last != content {
                self.pool_pos[last] = pos;
            }
            self.requested_ids.push(content);
        }
        self.counts[content] += 1;
        self.total += 1;
    }

    /// Draws the next request from the CRP predictive law and records it.
    /// A new content is uniform over the unrequested ones; an existing one
    /// is drawn in proportion to `n_j − ν`.
    pub fn next_request<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let pick = if u < self.new_content_probability() {
            self.pool[rng.random_range(0..self.pool.len())]
        } else {
            let weight = |j: usize| self.counts[j] as f64 - self.nu;
            let total: f64 = self.requested_ids.iter().map(|&j| weight(j)).sum();
            let mut target = rng.random::<f64>() * total;
            let mut pick = *self.requested_ids.last().expect("some content was requested");
            for &j in &self.requested_ids {
                target -= weight(j);
                if target < 0.0 {
                    pick = j;
                    break;
                }
            }
            pick
        };
        self.record(pick);
        pick
    }
}

/// Asymptotic mean number of distinct contents after `total` requests.
pub fn expected_distinct_contents(total: u64, theta: f64, nu: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::Domain("expected distinct contents needs N >= 1".into()));
    }
    if !(theta > 0.0) || !(0.0..1.0).contains(&nu) {
        return Err(Error::Domain(format!("need theta > 0 and nu in [0, 1), got {theta}, {nu}")));
    }
    let n = total as f64;
    if nu == 0.0 {
        Ok(theta * (n + theta).ln())
    } else {
        let log_coef = ln_gamma(theta + 1.0) - ln_gamma(theta + nu) - nu.ln();
        Ok((log_coef + nu * n.ln()).exp())
    }
}

/// Short-term request probability of one content: an OU process around the
/// long-term mean, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopularityProcess {
    pub mu: f64,
    pub x: f64,
    pub reversion_rate: f64,
    pub volatility: f64,
    pub period: f64,
}

impl PopularityProcess {
    /// Euler-Maruyama step driven by the standard normal `xi`.
    pub fn step_with(&mut self, dt: f64, xi: f64) -> Result<f64> {
        if !(dt > 0.0) || dt > self.period {
            return Err(Error::Domain(format!(
                "OU step needs 0 < dt <= period ({}), got {dt}",
                self.period
            )));
        }
        let next = self.x
            + self.reversion_rate * (self.mu - self.x) * dt
            + self.volatility * dt.sqrt() * xi;
        self.x = next.clamp(0.0, 1.0);
        Ok(self.x)
    }

    pub fn ou_step<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) -> Result<f64> {
        let xi: f64 = StandardNormal.sample(rng);
        self.step_with(dt, xi)
    }
}

/// Observation error on the request probability: `x̂ = clamp(x + Δ, ε, 1)`
/// with `Δ ~ N(bias_mean, bias_std²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IpiModel {
    pub bias_mean: f64,
    pub bias_std: f64,
    pub floor_eps: f64,
}

impl Default for IpiModel {
    fn default() -> Self {
        IpiModel {
            bias_mean: 0.2,
            bias_std: 0.001,
            floor_eps: 1e-6,
        }
    }
}

impl IpiModel {
    /// Perfect information with the same floor.
    pub fn perfect(floor_eps: f64) -> Self {
        IpiModel {
            bias_mean: 0.0,
            bias_std: 0.0,
            floor_eps,
        }
    }

    pub fn is_perfect(&self) -> bool {
        self.bias_mean == 0.0 && self.bias_std == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !self.bias_mean.is_finite() {
            return Err(Error::validation("demand.ipi.bias_mean", "must be finite"));
        }
        if !self.bias_std.is_finite() || self.bias_std < 0.0 {
            return Err(Error::validation("demand.ipi.bias_std", "must be finite and non-negative"));
        }
        if !self.floor_eps.is_finite() || self.floor_eps <= 0.0 || self.floor_eps >= 1.0 {
            return Err(Error::validation("demand.ipi.floor_eps", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn perturb_popularity<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let delta = if self.bias_std > 0.0 {
            Normal::new(self.bias_mean, self.bias_std)
                .expect("validated IPI parameters")
                .sample(rng)
        } else {
            self.bias_mean
        };
        (x + delta).clamp(self.floor_eps, 1.0)
    }
}

/// Folds a period's arrivals into `state`, recomputes the long-term means and
/// resets every process mean to them. `x` carries over unchanged.
pub fn refresh_period(
    state: &mut CrpState,
    arrivals: &[usize],
    processes: &mut [PopularityProcess],
) -> Vec<f64> {
    for &j in arrivals {
        state.record(j);
    }
    let mu = state.mean_popularity();
    for (proc, &m) in processes.iter_mut().zip(&mu) {
        proc.mu = m;
    }
    mu
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn empty_state_always_draws_new_content() {
        let s = CrpState::new(5, 1.0, 0.5).unwrap();
        assert_eq!(s.new_content_probability(), 1.0);
        assert_eq!(s.mean_popularity(), vec![0.2; 5]);
    }

    #[test]
    fn two_branch_probabilities() {
        let s = CrpState::with_counts(vec![3, 1, 0, 0], 1.0, 0.5).unwrap();
        assert_relative_eq!(s.new_content_probability(), 0.4, epsilon = 1e-15);
        let mu = s.mean_popularity();
        for (a, b) in mu.iter().zip([0.5, 0.1, 0.2, 0.2]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn exhausted_catalog_renormalises_over_requested() {
        let s = CrpState::with_counts(vec![3, 1], 1.0, 0.5).unwrap();
        assert_eq!(s.new_content_probability(), 0.0);
        let mu = s.mean_popularity();
        assert_relative_eq!(mu[0], 2.5 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(mu[1], 0.5 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn next_request_follows_predictive_law() {
        let mut rng = seeded(17);
        let base = CrpState::with_counts(vec![3, 1, 0, 0], 1.0, 0.5).unwrap();
        let draws = 200_000;
        let mut hits = [0usize; 4];
        for _ in 0..draws {
            let mut s = base.clone();
            hits[s.next_request(&mut rng)] += 1;
        }
        for (h, p) in hits.iter().zip([0.5, 0.1, 0.2, 0.2]) {
            let freq = *h as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() < 4.0 * se, "freq {freq} vs {p}");
        }
    }

    #[test]
    fn distinct_contents_closed_forms() {
        assert_relative_eq!(
            expected_distinct_contents(100, 1.0, 0.0).unwrap(),
            101f64.ln(),
            max_relative = 1e-14
        );
        let v = expected_distinct_contents(10_000, 1.0, 0.5).unwrap();
        // Γ(2) / (0.5 Γ(1.5)) · 100 with Γ(1.5) = √π / 2.
        let oracle = 1.0 / (0.5 * std::f64::consts::PI.sqrt() / 2.0) * 100.0;
        assert_relative_eq!(v, oracle, max_relative = 1e-12);
        assert_relative_eq!(v, 225.7, max_relative = 1e-3);
        assert!(expected_distinct_contents(0, 1.0, 0.5).is_err());
    }

    #[test]
    fn ou_fixed_point_and_deterministic_path() {
        let mut p = PopularityProcess {
            mu: 0.5,
            x: 0.5,
            reversion_rate: 1.0,
            volatility: 0.0,
            period: 1.0,
        };
        p.step_with(0.01, 0.0).unwrap();
        assert_eq!(p.x, 0.5);

        p.x = 0.3;
        let dt = 1e-3;
        for _ in 0..1000 {
            p.step_with(dt, 0.0).unwrap();
        }
        let exact = 0.5 - 0.2 * (-1.0f64).exp();
        assert!((p.x - exact).abs() < 1e-3);
    }

    #[test]
    fn ou_rejects_bad_step() {
        let mut p = PopularityProcess {
            mu: 0.5,
            x: 0.5,
            reversion_rate: 1.0,
            volatility: 0.1,
            period: 1.0,
        };
        assert!(p.step_with(0.0, 0.0).is_err());
        assert!(p.step_with(-1.0, 0.0).is_err());
        assert!(p.step_with(2.0, 0.0).is_err());
    }

    #[test]
    fn ipi_examples() {
        let perfect = IpiModel::perfect(1e-6);
        let mut rng = seeded(5);
        assert_eq!(perfect.perturb_popularity(0.3, &mut rng), 0.3);
        assert_eq!(perfect.perturb_popularity(0.0, &mut rng), 1e-6);
        let ipi = IpiModel::default();
        for _ in 0..1000 {
            let v = ipi.perturb_popularity(0.3, &mut rng);
            assert!((v - 0.5).abs() < 0.005);
        }
        assert_eq!(ipi.perturb_popularity(1.0, &mut rng), 1.0);
    }

    #[test]
    fn refresh_updates_means_and_keeps_x() {
        let mut s = CrpState::new(4, 1.0, 0.5).unwrap();
        let mut procs = vec![
            PopularityProcess {
                mu: 0.25,
                x: 0.3,
                reversion_rate: 1.0,
                volatility: 0.1,
                period: 1.0,
            };
            4
        ];
        let before = s.mean_popularity();
        assert_eq!(refresh_period(&mut s, &[], &mut procs), before);

        refresh_period(&mut s, &[2], &mut procs);
        assert_eq!(s.counts()[2], 1);
        assert_eq!(s.total(), 1);

        // Content 0 requested repeatedly: its mean rises every period.
        let mut last = procs[0].mu;
        for _ in 0..10 {
            let mu = refresh_period(&mut s, &[0, 0, 0, 1], &mut procs);
            assert!(mu[0] > last);
            last = mu[0];
        }
        assert!(procs.iter().all(|p| p.x == 0.3));
        assert_eq!(procs[0].mu, last);
    }

    proptest! {
        #[test]
        fn mean_popularity_is_a_distribution(
            counts in proptest::collection::vec(0u64..50, 1..30),
            theta in 0.01f64..10.0,
            nu in 0.0f64..0.99,
        ) {
            let s = CrpState::with_counts(counts, theta, nu).unwrap();
            let mu = s.mean_popularity();
            prop_assert!(mu.iter().all(|&m| m >= 0.0));
            prop_assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let branches = s.new_content_probability()
                + s.counts().iter().filter(|&&c| c > 0)
                    .map(|&c| (c as f64 - nu) / (s.total() as f64 + theta)).sum::<f64>();
            if s.requested() < s.catalog_size() {
                prop_assert!((branches - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn perturbed_popularity_in_range(x in 0.0f64..=1.0, mean in -1.0f64..1.0, std in 0.0f64..0.5, seed: u64) {
            let ipi = IpiModel { bias_mean: mean, bias_std: std, floor_eps: 1e-6 };
            let v = ipi.perturb_popularity(x, &mut seeded(seed));
            prop_assert!((1e-6..=1.0).contains(&v));
        }

        #[test]
        fn ou_stays_in_unit_interval(x in 0.0f64..=1.0, mu in 0.0f64..=1.0, xi in -10.0f64..10.0) {
            let mut p = PopularityProcess { mu, x, reversion_rate: 1.0, volatility: 0.5, period: 1.0 };
            let v = p.step_with(0.1, xi).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn ou_without_noise_approaches_mean(x in 0.0f64..=1.0, mu in 0.0f64..=1.0) {
            let mut p = PopularityProcess { mu, x, reversion_rate: 1.0, volatility: 0.0, period: 1.0 };
            let mut gap = (x - mu).abs();
            for _ in 0..50 {
                p.step_with(0.05, 0.0).unwrap();
                let g = (p.x - mu).abs();
                prop_assert!(g <= gap + 1e-15);
                gap = g;
            }
        }
    }
}
