use serde::{Deserialize, Serialize};

use crate::report::{UpdateKind, UpdateReport};

pub const SCHEMA_VERSION: u32 = 1;

/// Per-operation numbers kept for aggregation and the optional raw dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawOp {
    pub trial: u32,
    pub window: u64,
    pub kind: UpdateKind,
    pub subject: u64,
    pub bins_visited: u64,
    pub balls_moved: u64,
}

impl RawOp {
    pub fn from_report(trial: u32, window: u64, report: &UpdateReport) -> Self {
        RawOp {
            trial,
            window,
            kind: report.kind,
            subject: report.subject,
            bins_visited: report.bins_visited,
            balls_moved: report.moved.len() as u64,
        }
    }
}

/// Count, mean, median and 99th percentile of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub count: u64,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub p99: Option<f64>,
}

impl Summary {
    /// Nearest-rank quantiles.
    pub fn of(values: &[u64]) -> Self {
        if values.is_empty() {
            return Summary::default();
        }
        let mut v = values.to_vec();
        v.sort_unstable();
        let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1] as f64;
        Summary {
            count: v.len() as u64,
            mean: Some(v.iter().sum::<u64>() as f64 / v.len() as f64),
            median: Some(rank(0.5)),
            p99: Some(rank(0.99)),
        }
    }
}

/// One output row. Flat so it maps one-to-one onto CSV columns; fields that
/// do not apply to a record kind are left empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub schema_version: u32,
    /// `steady_state`, `window`, `summary`, `sweep_point`, `oracle_trial`,
    /// `oracle_summary` or `warning`.
    pub kind: String,
    pub scheme: Option<String>,
    pub k: Option<u32>,
    pub hash: Option<String>,
    pub capacity: Option<u64>,
    pub balance_c: Option<f64>,
    pub epsilon: Option<f64>,
    pub n: Option<u64>,
    pub m: Option<u64>,
    pub seed: Option<u64>,
    pub trial: Option<u32>,
    pub window: Option<u64>,
    pub ops: Option<u64>,

    pub ball_insert_count: Option<u64>,
    pub ball_insert_visits_mean: Option<f64>,
    pub ball_insert_visits_median: Option<f64>,
    pub ball_insert_visits_p99: Option<f64>,
    pub ball_insert_moves_mean: Option<f64>,
    pub ball_insert_moves_median: Option<f64>,
    pub ball_insert_moves_p99: Option<f64>,

    pub ball_delete_count: Option<u64>,
    pub ball_delete_visits_mean: Option<f64>,
    pub ball_delete_visits_median: Option<f64>,
    pub ball_delete_visits_p99: Option<f64>,
    pub ball_delete_moves_mean: Option<f64>,
    pub ball_delete_moves_median: Option<f64>,
    pub ball_delete_moves_p99: Option<f64>,

    pub bin_insert_count: Option<u64>,
    pub bin_insert_visits_mean: Option<f64>,
    pub bin_insert_visits_median: Option<f64>,
    pub bin_insert_visits_p99: Option<f64>,
    pub bin_insert_moves_mean: Option<f64>,
    pub bin_insert_moves_median: Option<f64>,
    pub bin_insert_moves_p99: Option<f64>,

    pub bin_delete_count: Option<u64>,
    pub bin_delete_visits_mean: Option<f64>,
    pub bin_delete_visits_median: Option<f64>,
    pub bin_delete_visits_p99: Option<f64>,
    pub bin_delete_moves_mean: Option<f64>,
    pub bin_delete_moves_median: Option<f64>,
    pub bin_delete_moves_p99: Option<f64>,

    pub search_visits_mean: Option<f64>,
    pub nonfull_fraction: Option<f64>,
    pub f: Option<f64>,
    /// `ball_insert_visits_mean / (1/f)`
    pub insert_visits_times_f: Option<f64>,
    pub nonfull_over_f: Option<f64>,

    pub oracle_fraction_nonfull: Option<f64>,
    pub oracle_fraction_stddev: Option<f64>,
    pub oracle_throws: Option<f64>,
    pub oracle_mean_probes: Option<f64>,

    pub wall_ms: Option<f64>,
    pub message: Option<String>,
}

impl MetricsRecord {
    pub fn new(kind: &str) -> Self {
        MetricsRecord {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            ..Default::default()
        }
    }

    /// Fills the per-kind columns from raw operations.
    pub fn set_ops(&mut self, ops: &[RawOp]) {
        self.ops = Some(ops.len() as u64);
        for kind in UpdateKind::ALL {
            let visits: Vec<u64> = ops
                .iter()
                .filter(|o| o.kind == kind)
                .map(|o| o.bins_visited)
                .collect();
            let moves: Vec<u64> = ops
                .iter()
                .filter(|o| o.kind == kind)
                .map(|o| o.balls_moved)
                .collect();
            self.set_kind(kind, Summary::of(&visits), Summary::of(&moves));
        }
    }

    fn set_kind(&mut self, kind: UpdateKind, visits: Summary, moves: Summary) {
        let slots = match kind {
            UpdateKind::BallInsert => (
                &mut self.ball_insert_count,
                [
                    &mut self.ball_insert_visits_mean,
                    &mut self.ball_insert_visits_median,
                    &mut self.ball_insert_visits_p99,
                    &mut self.ball_insert_moves_mean,
                    &mut self.ball_insert_moves_median,
                    &mut self.ball_insert_moves_p99,
                ],
            ),
            UpdateKind::BallDelete => (
                &mut self.ball_delete_count,
                [
                    &mut self.ball_delete_visits_mean,
                    &mut self.ball_delete_visits_median,
                    &mut self.ball_delete_visits_p99,
                    &mut self.ball_delete_moves_mean,
                    &mut self.ball_delete_moves_median,
                    &mut self.ball_delete_moves_p99,
                ],
            ),
            UpdateKind::BinInsert => (
                &mut self.bin_insert_count,
                [
                    &mut self.bin_insert_visits_mean,
                    &mut self.bin_insert_visits_median,
                    &mut self.bin_insert_visits_p99,
                    &mut self.bin_insert_moves_mean,
                    &mut self.bin_insert_moves_median,
                    &mut self.bin_insert_moves_p99,
                ],
            ),
            UpdateKind::BinDelete => (
                &mut self.bin_delete_count,
                [
                    &mut self.bin_delete_visits_mean,
                    &mut self.bin_delete_visits_median,
                    &mut self.bin_delete_visits_p99,
                    &mut self.bin_delete_moves_mean,
                    &mut self.bin_delete_moves_median,
                    &mut self.bin_delete_moves_p99,
                ],
            ),
        };
        *slots.0 = Some(visits.count);
        let values = [
            visits.mean,
            visits.median,
            visits.p99,
            moves.mean,
            moves.median,
            moves.p99,
        ];
        for (slot, v) in slots.1.into_iter().zip(values) {
            *slot = v;
        }
    }

    /// Mean visits and count for one update kind.
    pub fn visits_mean(&self, kind: UpdateKind) -> Option<f64> {
        match kind {
            UpdateKind::BallInsert => self.ball_insert_visits_mean,
            UpdateKind::BallDelete => self.ball_delete_visits_mean,
            UpdateKind::BinInsert => self.bin_insert_visits_mean,
            UpdateKind::BinDelete => self.bin_delete_visits_mean,
        }
    }

    pub fn moves_mean(&self, kind: UpdateKind) -> Option<f64> {
        match kind {
            UpdateKind::BallInsert => self.ball_insert_moves_mean,
            UpdateKind::BallDelete => self.ball_delete_moves_mean,
            UpdateKind::BinInsert => self.bin_insert_moves_mean,
            UpdateKind::BinDelete => self.bin_delete_moves_mean,
        }
    }

    pub fn count(&self, kind: UpdateKind) -> Option<u64> {
        match kind {
            UpdateKind::BallInsert => self.ball_insert_count,
            UpdateKind::BallDelete => self.ball_delete_count,
            UpdateKind::BinInsert => self.bin_insert_count,
            UpdateKind::BinDelete => self.bin_delete_count,
        }
    }

    /// Fills the `f`-relative ratio columns from what is already set.
    pub fn set_ratios(&mut self) {
        if let Some(f) = self.f {
            self.insert_visits_times_f = self.ball_insert_visits_mean.map(|v| v * f);
            self.nonfull_over_f = self.nonfull_fraction.map(|x| x / f);
        }
    }

    /// Rounds every float to 6 significant digits.
    pub fn rounded(mut self) -> Self {
        self.for_each_float(|x| *x = round_sig(*x, 6));
        self
    }

    fn for_each_float(&mut self, mut g: impl FnMut(&mut f64)) {
        let fields = [
            &mut self.balance_c,
            &mut self.epsilon,
            &mut self.ball_insert_visits_mean,
            &mut self.ball_insert_visits_median,
            &mut self.ball_insert_visits_p99,
            &mut self.ball_insert_moves_mean,
            &mut self.ball_insert_moves_median,
            &mut self.ball_insert_moves_p99,
            &mut self.ball_delete_visits_mean,
            &mut self.ball_delete_visits_median,
            &mut self.ball_delete_visits_p99,
            &mut self.ball_delete_moves_mean,
            &mut self.ball_delete_moves_median,
            &mut self.ball_delete_moves_p99,
            &mut self.bin_insert_visits_mean,
            &mut self.bin_insert_visits_median,
            &mut self.bin_insert_visits_p99,
            &mut self.bin_insert_moves_mean,
            &mut self.bin_insert_moves_median,
            &mut self.bin_insert_moves_p99,
            &mut self.bin_delete_visits_mean,
            &mut self.bin_delete_visits_median,
            &mut self.bin_delete_visits_p99,
            &mut self.bin_delete_moves_mean,
            &mut self.bin_delete_moves_median,
            &mut self.bin_delete_moves_p99,
            &mut self.search_visits_mean,
            &mut self.nonfull_fraction,
            &mut self.f,
            &mut self.insert_visits_times_f,
            &mut self.nonfull_over_f,
            &mut self.oracle_fraction_nonfull,
            &mut self.oracle_fraction_stddev,
            &mut self.oracle_throws,
            &mut self.oracle_mean_probes,
            &mut self.wall_ms,
        ];
        for x in fields.into_iter().flatten() {
            g(x);
        }
    }
}

/// `x` rounded to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_quantiles() {
        let s = Summary::of(&(1..=100).collect::<Vec<u64>>());
        assert_eq!(s.count, 100);
        assert_eq!(s.mean, Some(50.5));
        assert_eq!(s.median, Some(50.0));
        assert_eq!(s.p99, Some(99.0));
        assert_eq!(Summary::of(&[]).mean, None);
    }

    #[test]
    fn rounding_keeps_six_digits() {
        assert_eq!(round_sig(1.23456789, 6), 1.23457);
        assert_eq!(round_sig(123456789.0, 6), 123457000.0);
        assert_eq!(round_sig(0.000123456789, 6), 0.000123457);
        assert_eq!(round_sig(0.0, 6), 0.0);
    }
}
