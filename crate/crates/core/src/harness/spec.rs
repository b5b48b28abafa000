use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::capacity::CapacityMode;
use crate::hashing::HashMode;
use crate::levels::{recommended_k, LevelScheme, SchemeKind, DEFAULT_UNIFORM_K_CONST};
use crate::system::SystemConfig;

/// Invalid experiment description. Reported as a usage error by the CLI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecError(pub String);

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SpecError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, SpecError> {
    Err(SpecError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Oracle,
    Sweep,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashKind {
    Random,
    Mixedtab,
}

impl HashKind {
    pub const ALL: [HashKind; 2] = [HashKind::Random, HashKind::Mixedtab];

    pub fn mode(self, seed: u64) -> HashMode {
        match self {
            HashKind::Random => HashMode::random(seed),
            HashKind::Mixedtab => HashMode::mixed_tabulation(seed),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HashKind::Random => "random",
            HashKind::Mixedtab => "mixedtab",
        }
    }
}

impl FromStr for HashKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(HashKind::Random),
            "mixedtab" => Ok(HashKind::Mixedtab),
            other => Err(format!("unknown hash family '{other}'")),
        }
    }
}

/// Which reference process the oracle mode runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleProcess {
    Rejection,
    Indexed,
    TView,
}

impl FromStr for OracleProcess {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rejection" => Ok(OracleProcess::Rejection),
            "indexed" => Ok(OracleProcess::Indexed),
            "t-view" => Ok(OracleProcess::TView),
            other => Err(format!("unknown oracle process '{other}'")),
        }
    }
}

/// Relative weights of ball insert, ball delete, bin insert and bin delete,
/// normalised to sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mix {
    pub ball_insert: f64,
    pub ball_delete: f64,
    pub bin_insert: f64,
    pub bin_delete: f64,
}

impl Mix {
    pub fn new(weights: [f64; 4]) -> Result<Self, SpecError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("mix weights must be finite and non-negative");
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return bad("mix weights must not all be zero");
        }
        Ok(Mix {
            ball_insert: weights[0] / total,
            ball_delete: weights[1] / total,
            bin_insert: weights[2] / total,
            bin_delete: weights[3] / total,
        })
    }

    pub fn weights(&self) -> [f64; 4] {
        [
            self.ball_insert,
            self.ball_delete,
            self.bin_insert,
            self.bin_delete,
        ]
    }
}

impl Default for Mix {
    fn default() -> Self {
        Mix::new([45.0, 45.0, 5.0, 5.0]).unwrap()
    }
}

impl FromStr for Mix {
    type Err = String;

    /// Parses `i:d:I:D`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(format!("mix '{s}' must have the form i:d:I:D"));
        }
        let mut w = [0.0; 4];
        for (slot, p) in w.iter_mut().zip(&parts) {
            *slot = p
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("bad mix weight '{p}'"))?;
        }
        Mix::new(w).map_err(|e| e.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Jsonl,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format '{other}'")),
        }
    }
}

/// Everything an experiment run needs, as given on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub scheme: SchemeKind,
    /// Explicit level count; otherwise derived from ε.
    pub k: Option<u32>,
    /// `c₀` in the uniform level count `⌈c₀/ε²⌉`.
    pub k_const: f64,
    pub epsilon: Option<f64>,
    /// Fixed capacity per bin.
    pub capacity: Option<u64>,
    /// Dynamic capacities with this balancing parameter.
    pub balance_c: Option<f64>,
    pub n: Option<u64>,
    pub m: u64,
    pub trials: u32,
    pub seed: u64,
    /// Operations after the initial build; defaults to `n/10`.
    pub trace_len: Option<u64>,
    /// Operations per window record; defaults to the whole trace.
    pub window: Option<u64>,
    pub mix: Mix,
    pub hash: HashKind,
    pub process: OracleProcess,
    /// Record wall-clock time. Off by default so output is reproducible.
    pub timing: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            mode: Mode::Simulate,
            scheme: SchemeKind::Geometric,
            k: None,
            k_const: DEFAULT_UNIFORM_K_CONST,
            epsilon: None,
            capacity: None,
            balance_c: None,
            n: None,
            m: 1000,
            trials: 1,
            seed: 1,
            trace_len: None,
            window: None,
            mix: Mix::default(),
            hash: HashKind::Random,
            process: OracleProcess::Rejection,
            timing: false,
        }
    }
}

/// A spec with every derived quantity filled in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub config: SystemConfig,
    pub n: u64,
    pub m: u64,
    /// Slack: `C·m/n - 1` for fixed capacities, `c - 1` for dynamic ones.
    pub epsilon: f64,
    pub capacity: Option<u64>,
    pub balance_c: Option<f64>,
    pub trace_len: u64,
}

impl ExperimentSpec {
    /// Checks the spec and derives `n`, `ε` and `k`.
    ///
    /// Fixed capacity takes exactly one of `n` and `ε` (the other follows
    /// from `n = round(C·m/(1+ε))`). Dynamic capacity takes `--balance-c`,
    /// or `--epsilon` alone meaning `c = 1 + ε`, and requires `n`.
    pub fn resolve(&self) -> Result<Resolved, SpecError> {
        if self.m == 0 {
            return bad("--m must be at least 1");
        }
        if self.trials == 0 {
            return bad("--trials must be at least 1");
        }
        let (capacity_mode, n, epsilon) = match (self.capacity, self.balance_c) {
            (Some(_), Some(_)) => return bad("--capacity and --balance-c are mutually exclusive"),
            (Some(c), None) => {
                if c == 0 {
                    return bad("--capacity must be at least 1");
                }
                let total = c * self.m;
                let n = match (self.n, self.epsilon) {
                    (Some(_), Some(_)) => {
                        return bad("with --capacity give either --n or --epsilon, not both")
                    }
                    (Some(n), None) => n,
                    (None, Some(e)) if e > 0.0 && e.is_finite() => {
                        (total as f64 / (1.0 + e)).round() as u64
                    }
                    (None, Some(e)) => return bad(format!("--epsilon must be positive, got {e}")),
                    (None, None) => return bad("with --capacity give --n or --epsilon"),
                };
                if n == 0 {
                    return bad("the derived ball count is zero");
                }
                if n > total {
                    return bad(format!(
                        "{n} balls do not fit in {} bins of capacity {c}",
                        self.m
                    ));
                }
                let epsilon = total as f64 / n as f64 - 1.0;
                (CapacityMode::Fixed { capacity: c }, n, epsilon)
            }
            (None, balance) => {
                let c = match (balance, self.epsilon) {
                    (Some(_), Some(_)) => {
                        return bad("--balance-c and --epsilon are mutually exclusive")
                    }
                    (Some(c), None) => c,
                    (None, Some(e)) => 1.0 + e,
                    (None, None) => return bad("give --capacity, --balance-c or --epsilon"),
                };
                let mode = CapacityMode::dynamic(c).map_err(|e| SpecError(e.to_string()))?;
                let Some(n) = self.n else {
                    return bad("dynamic capacities need --n");
                };
                (mode, n, c - 1.0)
            }
        };
        let k = match (self.scheme, self.k) {
            (SchemeKind::Single, _) => 1,
            (_, Some(k)) => k,
            (kind, None) => {
                let e = self
                    .epsilon
                    .unwrap_or(epsilon)
                    .clamp(f64::MIN_POSITIVE, 0.999_999);
                recommended_k(kind, e, self.k_const).map_err(|e| SpecError(e.to_string()))?
            }
        };
        let scheme = LevelScheme::new(self.scheme, k).map_err(|e| SpecError(e.to_string()))?;
        let config = SystemConfig::new(self.hash.mode(self.seed), scheme, capacity_mode);
        Ok(Resolved {
            config,
            n,
            m: self.m,
            epsilon,
            capacity: self.capacity,
            balance_c: match capacity_mode {
                CapacityMode::Dynamic { balance } => Some(balance.value()),
                CapacityMode::Fixed { .. } => None,
            },
            trace_len: self.trace_len.unwrap_or(n / 10),
        })
    }
}
