//! Experiment runner behind the command-line tool: operation traces, cost
//! aggregation, parameter sweeps, the invariant suite and result files.

pub mod calibration;
pub mod emit;
pub mod metrics;
pub mod simulate;
pub mod spec;
pub mod trace;
pub mod verify;

pub use emit::{emit, load, read_raw, read_records, write_raw, write_records};
pub use metrics::{MetricsRecord, RawOp, Summary, SCHEMA_VERSION};
pub use simulate::{
    mean_search_visits, oracle_config, reconcile, run_oracle, run_simulate, run_sweep,
    steady_state, target_f, RunOutput, SweepGrid,
};
pub use spec::{ExperimentSpec, Format, HashKind, Mix, Mode, OracleProcess, Resolved, SpecError};
pub use trace::{initial_balls, initial_bins, Op, TraceGenerator, BIN_NAMESPACE};
pub use verify::{run_verify, CheckOutcome, VerifyOptions, VerifyReport};
