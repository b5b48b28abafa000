//! Incremental updates. Each one leaves the state equal to the canonical
//! placement of the new ball and bin sets, pass counts included.
//!
//! Capacity changes reuse the same machinery: lowering a bin's capacity by
//! one behaves like an artificial top-priority ball landing in it (its
//! lowest-priority ball is pushed out and carried on), and raising it is a
//! hole to be refilled from the balls that passed it. Bin insertion starts
//! the new bin at capacity 0 and raises it; bin deletion lowers it to 0.

use std::collections::{BTreeMap, BTreeSet};

use crate::capacity::{CapacityChange, CapacityMode, CapacityPlan};
use crate::error::{Error, Result};
use crate::report::{Recorder, UpdateKind, UpdateReport};

use super::{BallKey, Fault, SuperBin, SystemState, VirtualBin};

/// Outcome of a read-only search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchResult {
    pub bin: Option<u64>,
    pub bins_visited: u64,
}

impl SystemState {
    pub fn insert_ball(&mut self, ball_id: u64) -> Result<UpdateReport> {
        if self.balls.contains_key(&ball_id) {
            return Err(Error::DuplicateBall(ball_id));
        }
        let mut rec = Recorder::new(UpdateKind::BallInsert, ball_id);
        let n = self.n() + 1;
        match self.config.capacity {
            CapacityMode::Fixed { capacity } => {
                if n > capacity * self.m() {
                    return Err(Error::CapacityExhausted {
                        balls: n,
                        capacity: capacity * self.m(),
                    });
                }
            }
            CapacityMode::Dynamic { .. } => {
                let current = self.plan(self.n(), self.m())?.expect("dynamic mode");
                let plan = self.plan(n, self.m())?.expect("dynamic mode");
                self.apply_plan(&plan, current.changed_ranks(&plan), &mut rec);
            }
        }
        let key = self.ball_key(ball_id);
        let start = self.start_index(key.position);
        self.carry(key, None, start, &mut rec);
        Ok(rec.finish())
    }

    pub fn delete_ball(&mut self, ball_id: u64) -> Result<UpdateReport> {
        let &(owner, position) = self
            .balls
            .get(&ball_id)
            .ok_or(Error::MissingBall(ball_id))?;
        let key = BallKey {
            position,
            id: ball_id,
        };
        let mut rec = Recorder::new(UpdateKind::BallDelete, ball_id);
        let level = self.bins[&owner].balls[&key];
        let landing = self.locate(owner, level);
        for i in self.start_index(position)..landing {
            let v = self.index[i];
            rec.visit(v.owner, v.level);
            self.add_pass(i, -1);
        }
        let v = self.index[landing];
        rec.visit(v.owner, v.level);
        self.bins.get_mut(&owner).unwrap().balls.remove(&key);
        self.balls.remove(&ball_id);
        rec.moved(ball_id, Some(owner), None);
        self.fill_hole(owner, &mut rec);
        if let Some(plan) = self.plan(self.n(), self.m())? {
            let current = self.plan(self.n() + 1, self.m())?.expect("dynamic mode");
            self.apply_plan(&plan, current.changed_ranks(&plan), &mut rec);
        }
        Ok(rec.finish())
    }

    pub fn insert_bin(&mut self, bin_id: u64) -> Result<UpdateReport> {
        self.check_bin_absent(bin_id)?;
        let mut rec = Recorder::new(UpdateKind::BinInsert, bin_id);
        self.attach_bin(bin_id, &mut rec)?;
        let target = match self.config.capacity {
            CapacityMode::Fixed { capacity } => capacity,
            CapacityMode::Dynamic { .. } => {
                let plan = self.plan(self.n(), self.m())?.expect("dynamic mode");
                plan.capacity_at(self.selection_rank(bin_id).unwrap())
            }
        };
        self.set_capacity(bin_id, target, false, &mut rec);
        if let Some(plan) = self.plan(self.n(), self.m())? {
            self.apply_plan(&plan, None, &mut rec);
        }
        Ok(rec.finish())
    }

    pub fn delete_bin(&mut self, bin_id: u64) -> Result<UpdateReport> {
        if !self.bins.contains_key(&bin_id) {
            return Err(Error::MissingBin(bin_id));
        }
        if self.m() == 1 {
            return Err(Error::LastBin);
        }
        let mut rec = Recorder::new(UpdateKind::BinDelete, bin_id);
        match self.config.capacity {
            CapacityMode::Fixed { capacity } => {
                let remaining = capacity * (self.m() - 1);
                if self.n() > remaining {
                    return Err(Error::CapacityExhausted {
                        balls: self.n(),
                        capacity: remaining,
                    });
                }
            }
            CapacityMode::Dynamic { .. } => {
                // Raise the survivors first, ranked as if the bin were gone.
                let plan = self.plan(self.n(), self.m() - 1)?.expect("dynamic mode");
                let survivors: Vec<(u64, u64)> = self
                    .selection
                    .iter()
                    .filter(|&&(_, id)| id != bin_id)
                    .enumerate()
                    .map(|(r, &(_, id))| (id, plan.capacity_at(r as u64)))
                    .collect();
                self.apply_capacities(survivors, &mut rec);
            }
        }
        self.lower_capacity_to(bin_id, 0, &mut rec);
        self.detach_bin(bin_id);
        Ok(rec.finish())
    }

    /// Walks from the ball's position until it is found or a bin that is not
    /// full of higher-priority balls is reached.
    pub fn search_ball(&self, ball_id: u64) -> SearchResult {
        let key = self.ball_key(ball_id);
        let mut visited = 0;
        for v in &self.index[self.start_index(key.position)..] {
            visited += 1;
            let bin = &self.bins[&v.owner];
            if bin.balls.contains_key(&key) {
                return SearchResult {
                    bin: Some(v.owner),
                    bins_visited: visited,
                };
            }
            let lower_priority_present = bin.balls.last_key_value().is_some_and(|(k, _)| *k > key);
            if !bin.is_full() || lower_priority_present {
                break;
            }
        }
        SearchResult {
            bin: None,
            bins_visited: visited,
        }
    }

    fn add_pass(&mut self, i: usize, delta: i32) {
        let v = &mut self.index[i];
        let before = v.pass_count;
        v.pass_count = before
            .checked_add_signed(delta)
            .expect("pass count underflow");
        let (owner, level, after) = (v.owner, v.level, v.pass_count);
        if (before == 0) != (after == 0) {
            let bin = self.bins.get_mut(&owner).unwrap();
            if after == 0 {
                bin.passed_levels.remove(&level);
            } else {
                bin.passed_levels.insert(level);
            }
        }
    }

    fn bump_pass(&mut self, i: usize) {
        let delta = match self.fault {
            Some(Fault::PassIncrementOffByOne) => 2,
            None => 1,
        };
        self.add_pass(i, delta);
    }

    fn place(&mut self, key: BallKey, owner: u64, level: u32) {
        self.bins.get_mut(&owner).unwrap().balls.insert(key, level);
        self.balls.insert(key.id, (owner, key.position));
    }

    /// Carries `ball` forward from index `idx` until it settles, displacing
    /// lower-priority balls on the way.
    fn carry(
        &mut self,
        mut ball: BallKey,
        mut from: Option<u64>,
        mut idx: usize,
        rec: &mut Recorder,
    ) {
        loop {
            let v = *self
                .index
                .get(idx)
                .expect("walk ran past the overflow range");
            rec.visit(v.owner, v.level);
            let bin = &self.bins[&v.owner];
            if !bin.is_full() {
                self.place(ball, v.owner, v.level);
                rec.moved(ball.id, from, Some(v.owner));
                return;
            }
            match bin.balls.last_key_value().map(|(k, l)| (*k, *l)) {
                Some((lowest, lowest_level)) if lowest > ball => {
                    self.bins.get_mut(&v.owner).unwrap().balls.remove(&lowest);
                    self.place(ball, v.owner, v.level);
                    rec.moved(ball.id, from, Some(v.owner));
                    let popped_from = self.locate(v.owner, lowest_level);
                    self.bump_pass(popped_from);
                    ball = lowest;
                    from = Some(v.owner);
                    idx = popped_from + 1;
                }
                _ => {
                    self.bump_pass(idx);
                    idx += 1;
                }
            }
        }
    }

    /// Refills free room in `bin` by pulling back the highest-priority ball
    /// that passed it, then repeats for the bin that ball left.
    fn fill_hole(&mut self, mut bin_id: u64, rec: &mut Recorder) {
        loop {
            let bin = &self.bins[&bin_id];
            if bin.is_full() {
                return;
            }
            let Some(&level) = bin.passed_levels.first() else {
                return;
            };
            let hole = self.locate(bin_id, level);
            let hole_pos = self.index[hole].position;
            let mut i = hole + 1;
            let pulled = loop {
                let v = self.index[i];
                rec.visit(v.owner, v.level);
                let candidate = self.bins[&v.owner]
                    .balls
                    .iter()
                    .find(|(k, l)| **l == v.level && (k.position as u128) <= hole_pos)
                    .map(|(k, _)| *k);
                if let Some(k) = candidate {
                    break (k, v.owner);
                }
                i += 1;
            };
            for j in hole..i {
                self.add_pass(j, -1);
            }
            let (key, from) = pulled;
            self.bins.get_mut(&from).unwrap().balls.remove(&key);
            self.place(key, bin_id, level);
            rec.moved(key.id, Some(from), Some(bin_id));
            bin_id = from;
        }
    }

    /// Lowers a capacity one unit at a time, pushing out overflowing balls.
    fn lower_capacity_to(&mut self, bin_id: u64, target: u64, rec: &mut Recorder) {
        while self.bins[&bin_id].capacity > target {
            let bin = self.bins.get_mut(&bin_id).unwrap();
            bin.capacity -= 1;
            if bin.load() > bin.capacity {
                let (lowest, level) = bin.balls.pop_last().expect("overfull bin has balls");
                self.balls.remove(&lowest.id);
                let from = self.locate(bin_id, level);
                self.bump_pass(from);
                self.carry(lowest, Some(bin_id), from + 1, rec);
            }
        }
    }

    fn raise_capacity_to(&mut self, bin_id: u64, target: u64, rec: &mut Recorder) {
        while self.bins[&bin_id].capacity < target {
            self.bins.get_mut(&bin_id).unwrap().capacity += 1;
            self.fill_hole(bin_id, rec);
        }
    }

    /// Moves a bin to `target` capacity; `report` records it as a change.
    fn set_capacity(&mut self, bin_id: u64, target: u64, report: bool, rec: &mut Recorder) {
        let old = self.bins[&bin_id].capacity;
        if target > old {
            self.raise_capacity_to(bin_id, target, rec);
        } else {
            self.lower_capacity_to(bin_id, target, rec);
        }
        if old != target && report {
            rec.capacity_changed(CapacityChange {
                bin: bin_id,
                old,
                new: target,
            });
        }
    }

    /// Applies `(bin, capacity)` targets, all raises before any drop so total
    /// capacity never dips below the ball count.
    fn apply_capacities(&mut self, targets: Vec<(u64, u64)>, rec: &mut Recorder) {
        let (raises, drops): (Vec<_>, Vec<_>) = targets
            .into_iter()
            .filter(|&(id, cap)| self.bins[&id].capacity != cap)
            .partition(|&(id, cap)| cap > self.bins[&id].capacity);
        rec.adjusting(true);
        for (id, cap) in raises.into_iter().chain(drops) {
            self.set_capacity(id, cap, true, rec);
        }
        rec.adjusting(false);
    }

    /// Brings bins to their capacity under `plan`. `ranks` limits the check
    /// to ranks known to differ from the current layout.
    fn apply_plan(&mut self, plan: &CapacityPlan, ranks: Option<Vec<u64>>, rec: &mut Recorder) {
        let ranks = ranks.unwrap_or_else(|| (0..self.m()).collect());
        let targets = ranks
            .into_iter()
            .map(|r| (self.selection[r as usize].1, plan.capacity_at(r)))
            .collect();
        self.apply_capacities(targets, rec);
    }

    /// Adds a bin with capacity 0: it owns no balls, and every ball passing
    /// one of its virtual bins is counted there.
    fn attach_bin(&mut self, bin_id: u64, rec: &mut Recorder) -> Result<()> {
        let k = self.levels();
        let positions: Vec<u128> = (0..=k)
            .map(|l| self.hashes.virtual_bin(bin_id, l))
            .collect::<Result<_>>()?;
        let mut fresh: Vec<VirtualBin> = positions
            .iter()
            .enumerate()
            .map(|(l, &position)| VirtualBin {
                position,
                owner: bin_id,
                level: l as u32,
                pass_count: self.passers_of(position, bin_id, rec),
            })
            .collect();
        fresh.sort_by_key(VirtualBin::key);
        let passed_levels: BTreeSet<u32> = fresh
            .iter()
            .filter(|v| v.pass_count > 0)
            .map(|v| v.level)
            .collect();

        let old = std::mem::take(&mut self.index);
        let mut merged = Vec::with_capacity(old.len() + fresh.len());
        let mut fresh = fresh.into_iter().peekable();
        for v in old {
            while let Some(f) = fresh.next_if(|f| f.key() < v.key()) {
                merged.push(f);
            }
            merged.push(v);
        }
        merged.extend(fresh);
        self.index = merged;

        let selection = self.hashes.capacity_selection(bin_id);
        let at = self.selection.partition_point(|&s| s < (selection, bin_id));
        self.selection.insert(at, (selection, bin_id));
        self.bins.insert(
            bin_id,
            SuperBin {
                capacity: 0,
                balls: BTreeMap::new(),
                positions,
                passed_levels,
                selection,
            },
        );
        Ok(())
    }

    /// Number of balls that start at or before `(position, owner)` and land
    /// after it. Passers land in priority order, so the scan stops at the
    /// first virtual bin holding a ball that starts after the point, or one
    /// that nothing passes.
    fn passers_of(&self, position: u128, owner: u64, rec: &mut Recorder) -> u32 {
        let mut count = 0;
        let from = self.index.partition_point(|v| v.key() < (position, owner));
        for v in &self.index[from..] {
            rec.visit(v.owner, v.level);
            let mut later_ball = false;
            for (k, &l) in &self.bins[&v.owner].balls {
                if l != v.level {
                    continue;
                }
                if k.position as u128 <= position {
                    count += 1;
                } else {
                    later_ball = true;
                }
            }
            if later_ball || v.pass_count == 0 {
                break;
            }
        }
        count
    }

    /// Removes an empty bin with capacity 0.
    fn detach_bin(&mut self, bin_id: u64) {
        let bin = self.bins.remove(&bin_id).unwrap();
        debug_assert!(bin.balls.is_empty() && bin.capacity == 0);
        self.index.retain(|v| v.owner != bin_id);
        let at = self
            .selection
            .binary_search(&(bin.selection, bin_id))
            .unwrap();
        self.selection.remove(at);
    }
}
