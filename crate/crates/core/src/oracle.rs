//! Reference processes without any hashing structure: every ball goes to a
//! uniformly random non-full bin. The fraction of bins left non-full, and the
//! probes a ball spends finding one, are what the placement structure's costs
//! are compared against.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::SystemState;

/// `n` balls into `m` bins of capacity `C`, repeated `trials` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub n: u64,
    pub m: u64,
    pub capacity: u64,
    pub trials: u32,
    pub seed: u64,
}

impl OracleConfig {
    pub fn new(n: u64, m: u64, capacity: u64, trials: u32, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::NoBins);
        }
        if capacity == 0 {
            return Err(Error::ZeroCapacity);
        }
        if capacity * m < n {
            return Err(Error::OracleInfeasible {
                balls: n,
                bins: m,
                capacity,
            });
        }
        Ok(OracleConfig {
            n,
            m,
            capacity,
            trials,
            seed,
        })
    }

    /// Config for a grid point: `n = round(C·m/(1+ε))`, so that `C` is an
    /// integer and [`OracleConfig::epsilon`] gives back the exact slack.
    pub fn from_grid(m: u64, capacity: u64, epsilon: f64, trials: u32, seed: u64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 || !epsilon.is_finite() {
            return Err(Error::EpsilonDomain(epsilon));
        }
        let n = ((capacity * m) as f64 / (1.0 + epsilon)).round() as u64;
        Self::new(n.max(1), m, capacity, trials, seed)
    }

    /// `ε = C·m/n - 1`
    pub fn epsilon(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        (self.capacity * self.m) as f64 / self.n as f64 - 1.0
    }

    /// Deterministic lower bound on the non-full fraction, `ε/(1+ε)`.
    pub fn nonfull_floor(&self) -> f64 {
        1.0 - self.n as f64 / (self.capacity * self.m) as f64
    }

    fn rng(&self, trial: u32, variant: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((trial as u64) << 2) | variant);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u32,
    pub fraction_nonfull: f64,
    /// Uniform throws consumed, counting those that hit a full bin.
    pub throws: u64,
    /// Sum over balls of `m / (non-full bins when it was placed)`, the
    /// expected probes given the state each ball saw.
    pub expected_probes: Option<f64>,
    /// Probes spent on the last tenth of the balls.
    pub tail_probes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub config: OracleConfig,
    pub trials: Vec<TrialResult>,
    /// Balls by number of bins probed, over all trials.
    pub probe_counts: BTreeMap<u64, u64>,
}

impl OracleResult {
    pub fn fractions(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.fraction_nonfull).collect()
    }

    pub fn mean_fraction(&self) -> f64 {
        mean(&self.fractions())
    }

    pub fn stddev_fraction(&self) -> f64 {
        stddev(&self.fractions())
    }

    pub fn mean_throws(&self) -> f64 {
        mean(
            &self
                .trials
                .iter()
                .map(|t| t.throws as f64)
                .collect::<Vec<_>>(),
        )
    }

    /// Mean probes per ball over all trials.
    pub fn mean_probes(&self) -> f64 {
        let balls: u64 = self.probe_counts.values().sum();
        let probes: u64 = self.probe_counts.iter().map(|(p, c)| p * c).sum();
        if balls == 0 {
            0.0
        } else {
            probes as f64 / balls as f64
        }
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn stddev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mu = mean(xs);
    let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt()
}

fn collect(
    config: OracleConfig,
    per_trial: Vec<(TrialResult, BTreeMap<u64, u64>)>,
) -> OracleResult {
    let mut probe_counts = BTreeMap::new();
    let mut trials = Vec::with_capacity(per_trial.len());
    for (t, hist) in per_trial {
        trials.push(t);
        for (p, c) in hist {
            *probe_counts.entry(p).or_insert(0) += c;
        }
    }
    OracleResult {
        config,
        trials,
        probe_counts,
    }
}

/// Places balls one by one into a uniformly random non-full bin, found by
/// drawing uniform bins until one has room.
pub fn run_random_nonfull(config: OracleConfig) -> OracleResult {
    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|trial| rejection_trial(&config, trial))
        .collect();
    collect(config, per_trial)
}

fn rejection_trial(config: &OracleConfig, trial: u32) -> (TrialResult, BTreeMap<u64, u64>) {
    let mut rng = config.rng(trial, 0);
    let m = config.m as usize;
    let cap = config.capacity as u32;
    let mut load = vec![0u32; m];
    let mut nonfull = m as u64;
    let mut hist = BTreeMap::new();
    let mut throws = 0u64;
    let mut expected = 0.0;
    let mut tail = 0u64;
    let tail_from = config.n - config.n / 10;
    for ball in 0..config.n {
        expected += config.m as f64 / nonfull as f64;
        let mut probes = 0u64;
        loop {
            probes += 1;
            let b = rng.random_range(0..m);
            if load[b] < cap {
                load[b] += 1;
                if load[b] == cap {
                    nonfull -= 1;
                }
                break;
            }
        }
        throws += probes;
        if ball >= tail_from {
            tail += probes;
        }
        *hist.entry(probes).or_insert(0) += 1;
    }
    let result = TrialResult {
        trial,
        fraction_nonfull: nonfull as f64 / config.m as f64,
        throws,
        expected_probes: Some(expected),
        tail_probes: tail,
    };
    (result, hist)
}

/// Same process, picking directly from an index of non-full bins. The
/// rejected throws are drawn as a geometric count instead of simulated, so
/// this is the fast variant for large sweeps.
pub fn run_random_nonfull_indexed(config: OracleConfig) -> OracleResult {
    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|trial| indexed_trial(&config, trial))
        .collect();
    collect(config, per_trial)
}

fn indexed_trial(config: &OracleConfig, trial: u32) -> (TrialResult, BTreeMap<u64, u64>) {
    let mut rng = config.rng(trial, 2);
    let cap = config.capacity as u32;
    let mut load = vec![0u32; config.m as usize];
    let mut open: Vec<u32> = (0..config.m as u32).collect();
    let mut hist = BTreeMap::new();
    let mut throws = 0u64;
    let mut expected = 0.0;
    let mut tail = 0u64;
    let tail_from = config.n - config.n / 10;
    for ball in 0..config.n {
        let p = open.len() as f64 / config.m as f64;
        expected += 1.0 / p;
        let probes = 1 + failures_before_success(&mut rng, p);
        let slot = rng.random_range(0..open.len());
        let b = open[slot] as usize;
        load[b] += 1;
        if load[b] == cap {
            open.swap_remove(slot);
        }
        throws += probes;
        if ball >= tail_from {
            tail += probes;
        }
        *hist.entry(probes).or_insert(0) += 1;
    }
    let result = TrialResult {
        trial,
        fraction_nonfull: open.len() as f64 / config.m as f64,
        throws,
        expected_probes: Some(expected),
        tail_probes: tail,
    };
    (result, hist)
}

fn failures_before_success(rng: &mut ChaCha8Rng, p: f64) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    (u.ln() / (1.0 - p).ln()).floor() as u64
}

/// Ignores capacities: throws balls at uniform bins and stops at the first
/// `T` where `Σ min(X_j, C) = n`. Bins with `X_j < C` are the non-full ones.
pub fn run_t_viewpoint(config: OracleConfig) -> OracleResult {
    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|trial| t_trial(&config, trial))
        .collect();
    collect(config, per_trial)
}

fn t_trial(config: &OracleConfig, trial: u32) -> (TrialResult, BTreeMap<u64, u64>) {
    let mut rng = config.rng(trial, 1);
    let m = config.m as usize;
    let cap = config.capacity;
    let mut hits = vec![0u64; m];
    let mut capped = 0u64;
    let mut throws = 0u64;
    while capped < config.n {
        let b = rng.random_range(0..m);
        throws += 1;
        if hits[b] < cap {
            capped += 1;
        }
        hits[b] += 1;
    }
    let nonfull = hits.iter().filter(|&&x| x < cap).count();
    let result = TrialResult {
        trial,
        fraction_nonfull: nonfull as f64 / config.m as f64,
        throws,
        expected_probes: None,
        tail_probes: 0,
    };
    (result, BTreeMap::new())
}

/// Fraction of bins in a live system holding fewer balls than their capacity.
pub fn estimate_nonfull_fraction(state: &SystemState) -> f64 {
    state.nonfull_fraction()
}

/// Two-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub critical: f64,
    pub alpha: f64,
    pub reject: bool,
}

pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> KsTest {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let critical = c * ((na + nb) / (na * nb)).sqrt();
    KsTest {
        statistic: d,
        critical,
        alpha,
        reject: d > critical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_config_rederives_epsilon() {
        let c = OracleConfig::from_grid(1000, 11, 0.1, 1, 0).unwrap();
        assert_eq!(c.n, 10_000);
        assert!((c.epsilon() - 0.1).abs() < 1e-12);
        let c = OracleConfig::from_grid(10_000, 1, 0.05, 1, 0).unwrap();
        assert_eq!(c.n, 9524);
        assert!((c.epsilon() - (10_000.0 / 9524.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn infeasible_config_rejected() {
        assert!(matches!(
            OracleConfig::new(11, 5, 2, 1, 0),
            Err(Error::OracleInfeasible { .. })
        ));
    }

    #[test]
    fn perfect_matching_fills_every_bin() {
        let cfg = OracleConfig::new(50, 50, 1, 4, 3).unwrap();
        for r in [run_random_nonfull(cfg), run_t_viewpoint(cfg)] {
            for t in &r.trials {
                assert_eq!(t.fraction_nonfull, 0.0);
                assert!(t.throws >= 50);
            }
        }
    }

    #[test]
    fn pigeonhole_floor_holds() {
        let cfg = OracleConfig::new(4, 4, 2, 200, 9).unwrap();
        for t in &run_random_nonfull(cfg).trials {
            assert!(t.fraction_nonfull >= 0.5);
        }
    }

    #[test]
    fn same_seed_same_result() {
        let cfg = OracleConfig::new(500, 100, 6, 5, 1).unwrap();
        assert_eq!(run_random_nonfull(cfg), run_random_nonfull(cfg));
        assert_eq!(run_t_viewpoint(cfg), run_t_viewpoint(cfg));
    }

    #[test]
    fn ks_detects_shift() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..100).map(|i| i as f64 + 60.0).collect();
        assert!(ks_two_sample(&a, &b, 0.01).reject);
        assert!(!ks_two_sample(&a, &a, 0.01).reject);
        assert!((ks_two_sample(&a, &b, 0.01).statistic - 0.6).abs() < 1e-12);
    }
}
