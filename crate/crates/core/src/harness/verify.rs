use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::CapacityMode;
use crate::levels::{recommended_k, LevelScheme, SchemeKind};
use crate::report::UpdateKind;
use crate::system::{Fault, SystemConfig, SystemState};

use super::metrics::MetricsRecord;
use super::spec::{ExperimentSpec, HashKind, Mix};
use super::trace::{initial_bins, Op, TraceGenerator};

pub const PROPERTIES: [&str; 7] = [
    "history_independence",
    "load_bound",
    "search_completeness",
    "symmetry",
    "pass_reconciliation",
    "capacity_locality",
    "capacity_round_trip",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub property: String,
    pub scheme: SchemeKind,
    pub hash: HashKind,
    /// `fixed` or `dynamic`.
    pub capacity_mode: String,
    pub checked: u64,
    pub failures: u64,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.failures == 0)
    }

    pub fn total_checked(&self) -> u64 {
        self.checks.iter().map(|c| c.checked).sum()
    }

    /// PASS/FAIL per (scheme, hash) cell.
    pub fn matrix(&self) -> BTreeMap<(String, String), bool> {
        let mut out = BTreeMap::new();
        for c in &self.checks {
            let cell = out
                .entry((c.scheme.name().to_string(), c.hash.name().to_string()))
                .or_insert(true);
            *cell &= c.failures == 0;
        }
        out
    }

    pub fn to_records(&self) -> Vec<MetricsRecord> {
        self.checks
            .iter()
            .map(|c| {
                let mut rec = MetricsRecord::new("verify");
                rec.scheme = Some(c.scheme.name().to_string());
                rec.hash = Some(c.hash.name().to_string());
                rec.ops = Some(c.checked);
                let verdict = if c.failures == 0 { "PASS" } else { "FAIL" };
                let mut msg = format!(
                    "{} {} {verdict} checked={} failures={}",
                    c.property, c.capacity_mode, c.checked, c.failures
                );
                if let Some(f) = &c.first_failure {
                    msg.push_str(": ");
                    msg.push_str(f);
                }
                rec.message = Some(msg);
                rec
            })
            .collect()
    }
}

/// What to run: which (scheme, hash) cells, and an optional deliberate defect.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub matrix: Vec<(SchemeKind, HashKind)>,
    pub fault: Option<Fault>,
}

impl VerifyOptions {
    pub fn full() -> Self {
        let schemes = [
            SchemeKind::Single,
            SchemeKind::Uniform,
            SchemeKind::Geometric,
        ];
        VerifyOptions {
            matrix: schemes
                .iter()
                .flat_map(|&s| HashKind::ALL.iter().map(move |&h| (s, h)))
                .collect(),
            fault: None,
        }
    }
}

#[derive(Debug, Default, Clone)]
struct Tally {
    checked: u64,
    failures: u64,
    first: Option<String>,
}

impl Tally {
    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) -> bool {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(what());
            }
        }
        ok
    }

    fn merge(&mut self, other: &Tally) {
        self.checked += other.checked;
        self.failures += other.failures;
        if self.first.is_none() {
            self.first.clone_from(&other.first);
        }
    }
}

type Tallies = BTreeMap<&'static str, Tally>;

/// Default parameters when the spec leaves them open.
struct Params {
    n: u64,
    m: u64,
    capacity: u64,
    balance_c: f64,
    epsilon: f64,
    traces: u32,
    trace_len: u64,
}

impl Params {
    fn from_spec(spec: &ExperimentSpec) -> Self {
        let n = spec.n.unwrap_or(120);
        let m = spec.m.max(1);
        let epsilon = spec.epsilon.unwrap_or(0.5);
        let capacity = spec
            .capacity
            .unwrap_or(((1.0 + epsilon) * n as f64 / m as f64).ceil().max(1.0) as u64);
        Params {
            n,
            m,
            capacity,
            balance_c: spec.balance_c.unwrap_or(1.25),
            epsilon,
            traces: spec.trials,
            trace_len: spec.trace_len.unwrap_or(200),
        }
    }

    fn scheme(&self, kind: SchemeKind, k: Option<u32>, k_const: f64) -> LevelScheme {
        let k = k.unwrap_or_else(|| {
            recommended_k(kind, self.epsilon.clamp(1e-6, 0.999_999), k_const).unwrap_or(1)
        });
        LevelScheme::new(kind, k).unwrap_or(LevelScheme::Single)
    }
}

/// Runs the invariant suite over every cell of the matrix, with fixed and
/// dynamic capacities.
pub fn run_verify(spec: &ExperimentSpec, options: &VerifyOptions) -> VerifyReport {
    let p = Params::from_spec(spec);
    let mut jobs = Vec::new();
    for &(scheme, hash) in &options.matrix {
        let level = p.scheme(scheme, spec.k, spec.k_const);
        for dynamic in [false, true] {
            let capacity = if dynamic {
                CapacityMode::dynamic(p.balance_c).unwrap_or(CapacityMode::Fixed { capacity: 2 })
            } else {
                CapacityMode::Fixed {
                    capacity: p.capacity.max(p.n.div_ceil(p.m)),
                }
            };
            for trace in 0..p.traces {
                let config = SystemConfig::new(
                    hash.mode(spec.seed.wrapping_add(trace as u64)),
                    level,
                    capacity,
                );
                jobs.push((scheme, hash, dynamic, trace, config));
            }
        }
    }
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(scheme, hash, dynamic, trace, config)| {
            let tallies = run_one(config, &p, spec.seed, trace, options.fault, spec.mix);
            ((scheme, hash, dynamic), tallies)
        })
        .collect();

    let mut merged: BTreeMap<(u8, u8, bool), (SchemeKind, HashKind, Tallies)> = BTreeMap::new();
    for ((scheme, hash, dynamic), tallies) in results {
        let key = (scheme as u8, hash as u8, dynamic);
        let entry = merged
            .entry(key)
            .or_insert_with(|| (scheme, hash, Tallies::new()));
        for (name, t) in tallies {
            entry.2.entry(name).or_default().merge(&t);
        }
    }
    let mut checks = Vec::new();
    for ((_, _, dynamic), (scheme, hash, tallies)) in merged {
        for name in PROPERTIES {
            let Some(t) = tallies.get(name) else { continue };
            checks.push(CheckOutcome {
                property: name.to_string(),
                scheme,
                hash,
                capacity_mode: if dynamic { "dynamic" } else { "fixed" }.to_string(),
                checked: t.checked,
                failures: t.failures,
                first_failure: t.first.clone(),
            });
        }
    }
    VerifyReport { checks }
}

fn run_one(
    config: SystemConfig,
    p: &Params,
    seed: u64,
    trace: u32,
    fault: Option<Fault>,
    mix: Mix,
) -> Tallies {
    let mut tallies = Tallies::new();
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        trace_checks(config, p, seed, trace, fault, mix, &mut tallies)
    }));
    if outcome.is_err() {
        tallies
            .entry("pass_reconciliation")
            .or_default()
            .record(false, || format!("trace {trace} aborted inside an update"));
    }
    tallies
}

fn trace_checks(
    config: SystemConfig,
    p: &Params,
    seed: u64,
    trace: u32,
    fault: Option<Fault>,
    mix: Mix,
    t: &mut Tallies,
) {
    let dynamic = matches!(config.capacity, CapacityMode::Dynamic { .. });
    let Ok(mut state) = SystemState::new(config, &initial_bins(p.m)) else {
        t.entry("load_bound")
            .or_default()
            .record(false, || "could not build the initial system".into());
        return;
    };
    state.inject_fault(fault);
    // Build by incremental inserts, then run the random trace.
    let mut ops: Vec<Op> = (0..p.n).map(Op::InsertBall).collect();
    let mut gen = TraceGenerator::new(seed, trace as u64, mix, config.capacity, p.n, p.m);
    ops.extend((0..p.trace_len).map(|_| gen.next_op()));

    for (i, op) in ops.iter().enumerate() {
        let m_before = state.m();
        let cap_before = state.max_capacity();
        let report = match op.apply(&mut state) {
            Ok(r) => r,
            Err(e) => {
                t.entry("load_bound")
                    .or_default()
                    .record(false, || format!("op {i} {op:?} rejected: {e}"));
                return;
            }
        };
        let overloaded = state
            .bin_ids()
            .find(|&b| state.load(b).unwrap() > state.capacity(b).unwrap());
        let ok = t
            .entry("load_bound")
            .or_default()
            .record(overloaded.is_none(), || {
                format!("op {i}: bin {:#x} over capacity", overloaded.unwrap())
            });
        if !ok {
            return;
        }
        if let Some(plan) = state.plan(state.n(), state.m()).ok().flatten() {
            let max = state.max_capacity();
            let ok = t
                .entry("load_bound")
                .or_default()
                .record(max == plan.max_capacity(), || {
                    format!(
                        "op {i}: max capacity {max}, expected {}",
                        plan.max_capacity()
                    )
                });
            if !ok {
                return;
            }
        }
        let violations = state.check_invariants();
        let ok = t
            .entry("pass_reconciliation")
            .or_default()
            .record(violations.is_empty(), || {
                format!("op {i}: {}", violations[0])
            });
        if !ok {
            return;
        }
        if dynamic {
            let CapacityMode::Dynamic { balance } = config.capacity else {
                unreachable!()
            };
            let changes = report.capacity_changes.len() as u64;
            let limit = match report.kind {
                UpdateKind::BallInsert | UpdateKind::BallDelete => balance.ceil(),
                _ => cap_before.max(state.max_capacity()) + balance.ceil(),
            };
            t.entry("capacity_locality")
                .or_default()
                .record(changes <= limit, || {
                    format!(
                        "op {i} {:?}: {changes} capacity changes, limit {limit} (m was {m_before})",
                        report.kind
                    )
                });
        }
        let at_checkpoint =
            (i as u64) >= p.n && ((i as u64 - p.n) % 25 == 24 || i + 1 == ops.len());
        if at_checkpoint || i + 1 == ops.len() {
            let same = state.rebuild().map(|r| r.snapshot() == state.snapshot());
            t.entry("history_independence")
                .or_default()
                .record(same == Ok(true), || {
                    format!("op {i}: state differs from rebuild")
                });
        }
    }

    let present: Vec<u64> = state.ball_ids().collect();
    let search = t.entry("search_completeness").or_default();
    for &x in &present {
        search.record(state.search_ball(x).bin == state.bin_of(x), || {
            format!("present ball {x:#x} not found")
        });
    }
    for j in 0..100u64 {
        let x = (1 << 62) | (trace as u64) << 20 | j;
        search.record(state.search_ball(x).bin.is_none(), || {
            format!("absent ball {x:#x} reported present")
        });
    }

    let mut sample: Vec<u64> = present.clone();
    sample.sort_unstable();
    sample.truncate(20);
    for &x in &sample {
        let before = state.snapshot();
        let (Ok(del), Ok(ins)) = (state.delete_ball(x), state.insert_ball(x)) else {
            t.entry("symmetry")
                .or_default()
                .record(false, || format!("ball {x:#x} round trip rejected"));
            return;
        };
        let ok = del.trail == ins.trail && state.snapshot() == before;
        t.entry("symmetry").or_default().record(ok, || {
            format!("ball {x:#x}: delete and insert trails differ")
        });
    }

    if dynamic {
        for j in 0..10u64 {
            let x = (1 << 61) | (trace as u64) << 20 | j;
            let before = state.snapshot();
            let plan = state.plan(state.n(), state.m()).ok().flatten();
            let ok = state.insert_ball(x).is_ok()
                && state.delete_ball(x).is_ok()
                && state.snapshot() == before
                && state.plan(state.n(), state.m()).ok().flatten() == plan;
            t.entry("capacity_round_trip").or_default().record(ok, || {
                format!("insert/delete of {x:#x} did not restore the plan")
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentSpec {
        ExperimentSpec {
            n: Some(40),
            m: 20,
            trials: 2,
            trace_len: Some(60),
            ..Default::default()
        }
    }

    #[test]
    fn default_matrix_passes() {
        let report = run_verify(&small(), &VerifyOptions::full());
        assert!(
            report.passed(),
            "{:#?}",
            report.checks.iter().find(|c| c.failures > 0)
        );
        assert_eq!(report.matrix().len(), 6);
        for name in PROPERTIES {
            assert!(report
                .checks
                .iter()
                .any(|c| c.property == name && c.checked > 0));
        }
    }

    #[test]
    fn injected_fault_fails_reconciliation() {
        let options = VerifyOptions {
            matrix: vec![(SchemeKind::Uniform, HashKind::Random)],
            fault: Some(Fault::PassIncrementOffByOne),
        };
        let report = run_verify(&small(), &options);
        assert!(!report.passed());
        assert!(report
            .checks
            .iter()
            .any(|c| c.property == "pass_reconciliation" && c.failures > 0));
    }
}
