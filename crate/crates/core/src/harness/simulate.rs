use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::CapacityMode;
use crate::levels::f_formula;
use crate::oracle::{self, OracleConfig};
use crate::system::{rebuild_from_scratch, SystemState};

use super::metrics::{MetricsRecord, RawOp};
use super::spec::{ExperimentSpec, OracleProcess, Resolved, SpecError};
use super::trace::{initial_balls, initial_bins, TraceGenerator};

/// Records plus the per-operation data they were aggregated from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub records: Vec<MetricsRecord>,
    pub raw: Vec<RawOp>,
}

fn base_record(kind: &str, spec: &ExperimentSpec, r: &Resolved) -> MetricsRecord {
    let mut rec = MetricsRecord::new(kind);
    rec.scheme = Some(spec.scheme.name().to_string());
    rec.k = Some(r.config.scheme.levels());
    rec.hash = Some(spec.hash.name().to_string());
    rec.capacity = r.capacity;
    rec.balance_c = r.balance_c;
    rec.epsilon = Some(r.epsilon);
    rec.n = Some(r.n);
    rec.m = Some(r.m);
    rec.seed = Some(spec.seed);
    rec.f = target_f(r);
    rec
}

/// `f(ε, C)` for fixed capacities with `ε < 1`.
pub fn target_f(r: &Resolved) -> Option<f64> {
    match r.config.capacity {
        CapacityMode::Fixed { capacity } => f_formula(r.epsilon, capacity).ok(),
        CapacityMode::Dynamic { .. } => None,
    }
}

/// Mean bins visited when searching for every present ball.
pub fn mean_search_visits(state: &SystemState) -> f64 {
    let balls: Vec<u64> = state.ball_ids().collect();
    if balls.is_empty() {
        return 0.0;
    }
    let total: u64 = balls
        .iter()
        .map(|&x| state.search_ball(x).bins_visited)
        .sum();
    total as f64 / balls.len() as f64
}

/// The steady state of trial `trial`: `m` bins and `n` balls. Built directly
/// in canonical form, which is what inserting the balls one by one yields.
pub fn steady_state(r: &Resolved, trial: u32) -> crate::Result<SystemState> {
    let mut config = r.config;
    config.hash = trial_hash(&config.hash, trial);
    let balls: Vec<u64> = initial_balls(r.n).collect();
    rebuild_from_scratch(config, &balls, &initial_bins(r.m))
}

fn trial_hash(mode: &crate::HashMode, trial: u32) -> crate::HashMode {
    use crate::HashMode::*;
    match *mode {
        FullyRandom { seed } => FullyRandom {
            seed: seed.wrapping_add(trial as u64),
        },
        MixedTabulation { seed, c, d } => MixedTabulation {
            seed: seed.wrapping_add(trial as u64),
            c,
            d,
        },
    }
}

fn run_trial(spec: &ExperimentSpec, r: &Resolved, trial: u32) -> Result<RunOutput, SpecError> {
    let clock = Instant::now();
    let wall = |rec: &mut MetricsRecord| {
        if spec.timing {
            rec.wall_ms = Some(clock.elapsed().as_secs_f64() * 1e3);
        }
    };
    let mut state = steady_state(r, trial).map_err(|e| SpecError(e.to_string()))?;
    let mut out = RunOutput::default();

    let mut steady = base_record("steady_state", spec, r);
    steady.trial = Some(trial);
    steady.search_visits_mean = Some(mean_search_visits(&state));
    steady.nonfull_fraction = Some(state.nonfull_fraction());
    steady.set_ratios();
    wall(&mut steady);
    out.records.push(steady);

    if r.trace_len == 0 {
        return Ok(out);
    }
    let window = spec.window.unwrap_or(r.trace_len).max(1);
    let mut gen = TraceGenerator::new(
        spec.seed,
        trial as u64,
        spec.mix,
        r.config.capacity,
        r.n,
        r.m,
    );
    let mut current = Vec::new();
    for i in 0..r.trace_len {
        let w = i / window;
        let op = gen.next_op();
        let report = op.apply(&mut state).map_err(|e| SpecError(e.to_string()))?;
        current.push(RawOp::from_report(trial, w, &report));
        if current.len() as u64 == window || i + 1 == r.trace_len {
            let mut rec = base_record("window", spec, r);
            rec.trial = Some(trial);
            rec.window = Some(w);
            rec.n = Some(state.n());
            rec.m = Some(state.m());
            rec.set_ops(&current);
            rec.nonfull_fraction = Some(state.nonfull_fraction());
            rec.set_ratios();
            wall(&mut rec);
            out.records.push(rec);
            out.raw.append(&mut current);
        }
    }
    let mut summary = base_record("summary", spec, r);
    summary.trial = Some(trial);
    summary.set_ops(&out.raw);
    summary.nonfull_fraction = Some(state.nonfull_fraction());
    summary.set_ratios();
    wall(&mut summary);
    out.records.push(summary);
    Ok(out)
}

/// Builds each trial to steady state, runs the trace and reports a
/// steady-state record, one record per window and a trace summary.
pub fn run_simulate(spec: &ExperimentSpec) -> Result<RunOutput, SpecError> {
    let r = spec.resolve()?;
    let trials: Vec<RunOutput> = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, &r, t))
        .collect::<Result<_, _>>()?;
    let mut out = RunOutput::default();
    for mut t in trials {
        out.records.append(&mut t.records);
        out.raw.append(&mut t.raw);
    }
    Ok(out)
}

/// Points of a sweep: every ε against every capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub epsilons: Vec<f64>,
    pub capacities: Vec<u64>,
}

impl SweepGrid {
    pub fn points(&self) -> Vec<(f64, u64)> {
        self.epsilons
            .iter()
            .flat_map(|&e| self.capacities.iter().map(move |&c| (e, c)))
            .collect()
    }
}

fn sweep_point(spec: &ExperimentSpec, epsilon: f64, capacity: u64) -> RunOutput {
    let mut point = spec.clone();
    point.capacity = Some(capacity);
    point.balance_c = None;
    if spec.n.is_none() {
        point.epsilon = Some(epsilon);
    } else {
        point.epsilon = None;
    }
    let warning = |msg: String| {
        let mut rec = MetricsRecord::new("warning");
        rec.scheme = Some(spec.scheme.name().to_string());
        rec.capacity = Some(capacity);
        rec.epsilon = Some(epsilon);
        rec.m = Some(spec.m);
        rec.message = Some(format!("point skipped: {msg}"));
        RunOutput {
            records: vec![rec],
            raw: Vec::new(),
        }
    };
    let r = match point.resolve() {
        Ok(r) => r,
        Err(e) => return warning(e.0),
    };
    let run = match run_simulate(&point) {
        Ok(run) => run,
        Err(e) => return warning(e.0),
    };
    let steady: Vec<&MetricsRecord> = run
        .records
        .iter()
        .filter(|x| x.kind == "steady_state")
        .collect();
    let avg = |get: fn(&MetricsRecord) -> Option<f64>| {
        let v: Vec<f64> = steady.iter().filter_map(|x| get(x)).collect();
        (!v.is_empty()).then(|| oracle::mean(&v))
    };
    let mut rec = base_record("sweep_point", &point, &r);
    rec.set_ops(&run.raw);
    rec.search_visits_mean = avg(|x| x.search_visits_mean);
    rec.nonfull_fraction = avg(|x| x.nonfull_fraction);
    rec.set_ratios();
    RunOutput {
        records: vec![rec],
        raw: run.raw,
    }
}

/// One record per grid point, in grid order. Points whose parameters do not
/// describe a feasible system produce a warning record instead.
pub fn run_sweep(spec: &ExperimentSpec, grid: &SweepGrid) -> RunOutput {
    let parts: Vec<RunOutput> = grid
        .points()
        .into_par_iter()
        .map(|(e, c)| sweep_point(spec, e, c))
        .collect();
    let mut out = RunOutput::default();
    for mut p in parts {
        out.records.append(&mut p.records);
        out.raw.append(&mut p.raw);
    }
    out
}

/// Oracle config for a spec with fixed capacity.
pub fn oracle_config(spec: &ExperimentSpec) -> Result<OracleConfig, SpecError> {
    let Some(capacity) = spec.capacity else {
        return Err(SpecError("the oracle needs --capacity".into()));
    };
    let r = spec.resolve()?;
    OracleConfig::new(r.n, r.m, capacity, spec.trials, spec.seed)
        .map_err(|e| SpecError(e.to_string()))
}

/// One record per trial and a closing summary.
pub fn run_oracle(spec: &ExperimentSpec) -> Result<RunOutput, SpecError> {
    let cfg = oracle_config(spec)?;
    let clock = Instant::now();
    let result = match spec.process {
        OracleProcess::Rejection => oracle::run_random_nonfull(cfg),
        OracleProcess::Indexed => oracle::run_random_nonfull_indexed(cfg),
        OracleProcess::TView => oracle::run_t_viewpoint(cfg),
    };
    let f = f_formula(cfg.epsilon(), cfg.capacity).ok();
    let base = |kind: &str| {
        let mut rec = MetricsRecord::new(kind);
        rec.capacity = Some(cfg.capacity);
        rec.epsilon = Some(cfg.epsilon());
        rec.n = Some(cfg.n);
        rec.m = Some(cfg.m);
        rec.seed = Some(cfg.seed);
        rec.f = f;
        rec.message = Some(format!("{:?}", spec.process).to_lowercase());
        rec
    };
    let mut records = Vec::with_capacity(result.trials.len() + 1);
    for t in &result.trials {
        let mut rec = base("oracle_trial");
        rec.trial = Some(t.trial);
        rec.oracle_fraction_nonfull = Some(t.fraction_nonfull);
        rec.oracle_throws = Some(t.throws as f64);
        rec.oracle_mean_probes = (cfg.n > 0).then(|| t.throws as f64 / cfg.n as f64);
        rec.nonfull_over_f = f.map(|f| t.fraction_nonfull / f);
        records.push(rec);
    }
    let mut summary = base("oracle_summary");
    summary.oracle_fraction_nonfull = Some(result.mean_fraction());
    summary.oracle_fraction_stddev = Some(result.stddev_fraction());
    summary.oracle_throws = Some(result.mean_throws());
    summary.oracle_mean_probes = (cfg.n > 0).then(|| result.mean_throws() / cfg.n as f64);
    summary.nonfull_over_f = f.map(|f| result.mean_fraction() / f);
    if spec.timing {
        summary.wall_ms = Some(clock.elapsed().as_secs_f64() * 1e3);
    }
    records.push(summary);
    Ok(RunOutput {
        records,
        raw: Vec::new(),
    })
}

/// Recomputes every per-kind aggregate of `records` from the raw dump.
/// Returns the number of records checked, or a description of the first
/// mismatch.
pub fn reconcile(records: &[MetricsRecord], raw: &[RawOp]) -> Result<usize, String> {
    let mut checked = 0;
    for rec in records {
        let ops: Vec<RawOp> = match rec.kind.as_str() {
            "window" => raw
                .iter()
                .filter(|o| Some(o.trial) == rec.trial && Some(o.window) == rec.window)
                .cloned()
                .collect(),
            "summary" => raw
                .iter()
                .filter(|o| Some(o.trial) == rec.trial)
                .cloned()
                .collect(),
            _ => continue,
        };
        let mut again = rec.clone();
        again.set_ops(&ops);
        again.set_ratios();
        if again.clone().rounded() != rec.clone().rounded() {
            return Err(format!(
                "{} record for trial {:?} window {:?} disagrees with the raw dump",
                rec.kind, rec.trial, rec.window
            ));
        }
        checked += 1;
    }
    Ok(checked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levels::SchemeKind;

    fn spec() -> ExperimentSpec {
        ExperimentSpec {
            scheme: SchemeKind::Geometric,
            capacity: Some(4),
            epsilon: Some(0.25),
            m: 200,
            trace_len: Some(120),
            window: Some(50),
            trials: 2,
            ..Default::default()
        }
    }

    #[test]
    fn empty_trace_gives_steady_state_only() {
        let s = ExperimentSpec {
            trace_len: Some(0),
            trials: 1,
            ..spec()
        };
        let out = run_simulate(&s).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].kind, "steady_state");
        assert!(out.raw.is_empty());
    }

    #[test]
    fn windows_cover_the_trace() {
        let out = run_simulate(&spec()).unwrap();
        let windows = out.records.iter().filter(|r| r.kind == "window").count();
        assert_eq!(windows, 6);
        assert_eq!(out.raw.len(), 240);
        assert_eq!(reconcile(&out.records, &out.raw), Ok(8));
    }

    #[test]
    fn replay_is_identical() {
        assert_eq!(
            run_simulate(&spec()).unwrap(),
            run_simulate(&spec()).unwrap()
        );
    }

    #[test]
    fn single_point_sweep_matches_simulation() {
        let s = spec();
        let grid = SweepGrid {
            epsilons: vec![0.25],
            capacities: vec![4],
        };
        let sweep = run_sweep(&s, &grid);
        let sim = run_simulate(&s).unwrap();
        assert_eq!(sweep.raw, sim.raw);
        assert_eq!(sweep.records.len(), 1);
        let rec = &sweep.records[0];
        assert!(rec.f.is_some() && rec.nonfull_over_f.is_some());
    }

    #[test]
    fn infeasible_sweep_point_warns() {
        let s = ExperimentSpec {
            n: Some(1000),
            epsilon: None,
            ..spec()
        };
        let grid = SweepGrid {
            epsilons: vec![0.1],
            capacities: vec![2, 8],
        };
        let out = run_sweep(&s, &grid);
        assert_eq!(out.records[0].kind, "warning");
        assert_eq!(out.records[1].kind, "sweep_point");
    }

    #[test]
    fn oracle_emits_one_record_per_trial() {
        let s = ExperimentSpec {
            capacity: Some(3),
            epsilon: Some(0.5),
            m: 100,
            trials: 5,
            ..Default::default()
        };
        let out = run_oracle(&s).unwrap();
        assert_eq!(out.records.len(), 6);
        assert!(out.records[..5].iter().all(|r| r.kind == "oracle_trial"));
    }
}
