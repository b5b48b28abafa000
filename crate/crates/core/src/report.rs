use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::capacity::CapacityChange;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKind {
    BallInsert,
    BallDelete,
    BinInsert,
    BinDelete,
}

impl UpdateKind {
    pub const ALL: [UpdateKind; 4] = [
        UpdateKind::BallInsert,
        UpdateKind::BallDelete,
        UpdateKind::BinInsert,
        UpdateKind::BinDelete,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UpdateKind::BallInsert => "ball_insert",
            UpdateKind::BallDelete => "ball_delete",
            UpdateKind::BinInsert => "bin_insert",
            UpdateKind::BinDelete => "bin_delete",
        }
    }
}

/// A ball changing bins. `from == None` is a new ball, `to == None` a removed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub ball: u64,
    pub from: Option<u64>,
    pub to: Option<u64>,
}

/// One virtual-bin inspection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VisitedBin {
    pub bin: u64,
    pub level: u32,
}

/// Audit record of a single update.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub kind: UpdateKind,
    /// Ball or bin id the update was about.
    pub subject: u64,
    /// Net moves of real balls, in the order they first moved.
    pub moved: Vec<Move>,
    /// Virtual bins inspected by the update itself, in order.
    pub trail: Vec<VisitedBin>,
    /// Virtual bins inspected while other bins' capacities were adjusted.
    pub capacity_trail: Vec<VisitedBin>,
    /// All inspections, both trails included.
    pub bins_visited: u64,
    pub per_level_visits: BTreeMap<u32, u64>,
    pub levels_touched: Vec<u32>,
    pub capacity_changes: Vec<CapacityChange>,
}

impl UpdateReport {
    /// Moves that changed a ball's bin, excluding the subject ball's own
    /// arrival or departure.
    pub fn relocations(&self) -> usize {
        self.moved
            .iter()
            .filter(|m| m.from.is_some() && m.to.is_some())
            .count()
    }
}

/// Accumulates a report while an update runs.
#[derive(Debug)]
pub(crate) struct Recorder {
    kind: UpdateKind,
    subject: u64,
    moved: Vec<Move>,
    slot: HashMap<u64, usize>,
    trail: Vec<VisitedBin>,
    capacity_trail: Vec<VisitedBin>,
    adjusting: bool,
    capacity_changes: Vec<CapacityChange>,
}

impl Recorder {
    pub(crate) fn new(kind: UpdateKind, subject: u64) -> Self {
        Recorder {
            kind,
            subject,
            moved: Vec::new(),
            slot: HashMap::new(),
            trail: Vec::new(),
            capacity_trail: Vec::new(),
            adjusting: false,
            capacity_changes: Vec::new(),
        }
    }

    pub(crate) fn visit(&mut self, bin: u64, level: u32) {
        let v = VisitedBin { bin, level };
        if self.adjusting {
            self.capacity_trail.push(v);
        } else {
            self.trail.push(v);
        }
    }

    /// Routes visits to the capacity trail while `on`.
    pub(crate) fn adjusting(&mut self, on: bool) {
        self.adjusting = on;
    }

    pub(crate) fn moved(&mut self, ball: u64, from: Option<u64>, to: Option<u64>) {
        match self.slot.get(&ball) {
            Some(&i) => self.moved[i].to = to,
            None => {
                self.slot.insert(ball, self.moved.len());
                self.moved.push(Move { ball, from, to });
            }
        }
    }

    pub(crate) fn capacity_changed(&mut self, change: CapacityChange) {
        self.capacity_changes.push(change);
    }

    pub(crate) fn finish(self) -> UpdateReport {
        let mut per_level_visits = BTreeMap::new();
        for v in self.trail.iter().chain(&self.capacity_trail) {
            *per_level_visits.entry(v.level).or_insert(0) += 1;
        }
        UpdateReport {
            kind: self.kind,
            subject: self.subject,
            moved: self.moved.into_iter().filter(|m| m.from != m.to).collect(),
            bins_visited: (self.trail.len() + self.capacity_trail.len()) as u64,
            levels_touched: per_level_visits.keys().copied().collect(),
            per_level_visits,
            trail: self.trail,
            capacity_trail: self.capacity_trail,
            capacity_changes: self.capacity_changes,
        }
    }
}
