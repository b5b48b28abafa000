use serde::{Deserialize, Serialize};

use super::SystemState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallSnapshot {
    pub id: u64,
    pub position: u64,
    /// Level of the virtual bin the ball landed in.
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinSnapshot {
    pub id: u64,
    pub capacity: u64,
    /// Balls in priority order.
    pub balls: Vec<BallSnapshot>,
    /// Pass count per level, overflow last.
    pub pass_counts: Vec<u32>,
}

/// Canonical dump of a state: bins by id, balls by priority. Two states
/// with the same ball and bin sets are equal exactly when their snapshots are.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub n: u64,
    pub m: u64,
    pub levels: u32,
    pub bins: Vec<BinSnapshot>,
}

impl SystemState {
    pub fn snapshot(&self) -> Snapshot {
        let k = self.levels();
        let bins = self
            .bins
            .iter()
            .map(|(&id, bin)| BinSnapshot {
                id,
                capacity: bin.capacity,
                balls: bin
                    .balls
                    .iter()
                    .map(|(key, &level)| BallSnapshot {
                        id: key.id,
                        position: key.position,
                        level,
                    })
                    .collect(),
                pass_counts: (0..=k)
                    .map(|l| self.index[self.locate(id, l)].pass_count)
                    .collect(),
            })
            .collect();
        Snapshot {
            n: self.n(),
            m: self.m(),
            levels: k,
            bins,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.snapshot()).expect("snapshot serializes")
    }
}
