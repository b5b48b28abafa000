//! Consistent hashing with bounded loads on a single linear order of
//! virtual bins, with multi-level hashing to keep insertions cheap when
//! capacities are tight.
//!
//! ```
//! use chbl_core::{CapacityMode, HashMode, LevelScheme, SchemeKind, SystemConfig, SystemState};
//!
//! let config = SystemConfig::new(
//!     HashMode::random(7),
//!     LevelScheme::new(SchemeKind::Geometric, 4).unwrap(),
//!     CapacityMode::fixed(2).unwrap(),
//! );
//! let mut state = SystemState::new(config, &[1, 2, 3]).unwrap();
//! state.insert_ball(42).unwrap();
//! assert_eq!(state.search_ball(42).bin, state.bin_of(42));
//! assert!(state.check_invariants().is_empty());
//! ```

pub mod capacity;
pub mod error;
pub mod harness;
pub mod hashing;
pub mod levels;
pub mod oracle;
pub mod report;
pub mod system;

pub use capacity::{plan_for, BalanceFactor, CapacityChange, CapacityMode, CapacityPlan};
pub use error::{Error, Result};
pub use hashing::{Domain, HashFamily, HashMode, HashUniverse, MixedTabulation};
pub use levels::{f_formula, recommended_k, LevelScheme, SchemeKind};
pub use oracle::{
    estimate_nonfull_fraction, ks_two_sample, run_random_nonfull, run_random_nonfull_indexed,
    run_t_viewpoint, OracleConfig, OracleResult,
};
pub use report::{Move, UpdateKind, UpdateReport, VisitedBin};
pub use system::{
    rebuild_from_scratch, BallKey, Fault, SearchResult, Snapshot, SystemConfig, SystemState,
    Violation, VirtualBin,
};
