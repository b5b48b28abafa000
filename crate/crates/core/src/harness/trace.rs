use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::CapacityMode;
use crate::report::UpdateKind;
use crate::system::SystemState;

use super::spec::Mix;

/// Bin ids carry the top bit; ball ids never do.
pub const BIN_NAMESPACE: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    InsertBall(u64),
    DeleteBall(u64),
    InsertBin(u64),
    DeleteBin(u64),
}

impl Op {
    pub fn kind(&self) -> UpdateKind {
        match self {
            Op::InsertBall(_) => UpdateKind::BallInsert,
            Op::DeleteBall(_) => UpdateKind::BallDelete,
            Op::InsertBin(_) => UpdateKind::BinInsert,
            Op::DeleteBin(_) => UpdateKind::BinDelete,
        }
    }

    pub fn apply(&self, state: &mut SystemState) -> crate::Result<crate::UpdateReport> {
        match *self {
            Op::InsertBall(x) => state.insert_ball(x),
            Op::DeleteBall(x) => state.delete_ball(x),
            Op::InsertBin(b) => state.insert_bin(b),
            Op::DeleteBin(b) => state.delete_bin(b),
        }
    }
}

/// Set with uniform sampling and O(1) removal.
#[derive(Debug, Clone, Default)]
struct Pool {
    items: Vec<u64>,
    slot: HashMap<u64, usize>,
}

impl Pool {
    fn insert(&mut self, id: u64) {
        self.slot.insert(id, self.items.len());
        self.items.push(id);
    }

    fn remove(&mut self, id: u64) {
        if let Some(i) = self.slot.remove(&id) {
            self.items.swap_remove(i);
            if let Some(&moved) = self.items.get(i) {
                self.slot.insert(moved, i);
            }
        }
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> Option<u64> {
        if self.items.is_empty() {
            None
        } else {
            Some(self.items[rng.random_range(0..self.items.len())])
        }
    }

    fn len(&self) -> u64 {
        self.items.len() as u64
    }
}

/// Deterministic random operation stream. It tracks the live ids itself and
/// never proposes an update the capacities cannot absorb: an infeasible
/// insert becomes a delete of the same kind and vice versa.
#[derive(Debug, Clone)]
pub struct TraceGenerator {
    rng: ChaCha8Rng,
    mix: Mix,
    capacity: CapacityMode,
    balls: Pool,
    bins: Pool,
    next_ball: u64,
    next_bin: u64,
}

impl TraceGenerator {
    /// Generator for a system built from [`initial_bins`] and [`initial_balls`].
    pub fn new(seed: u64, stream: u64, mix: Mix, capacity: CapacityMode, n: u64, m: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut balls = Pool::default();
        initial_balls(n).for_each(|x| balls.insert(x));
        let mut bins = Pool::default();
        initial_bins(m).iter().for_each(|&b| bins.insert(b));
        TraceGenerator {
            rng,
            mix,
            capacity,
            balls,
            bins,
            next_ball: n,
            next_bin: m,
        }
    }

    fn room_for(&self, n: u64, m: u64) -> bool {
        match self.capacity {
            CapacityMode::Fixed { capacity } => n <= capacity * m,
            CapacityMode::Dynamic { .. } => m >= 1,
        }
    }

    pub fn next_op(&mut self) -> Op {
        let [i, d, bi, _] = self.mix.weights();
        let r: f64 = self.rng.random();
        let (n, m) = (self.balls.len(), self.bins.len());
        let op = if r < i + d {
            let insert = r < i;
            if (insert && self.room_for(n + 1, m)) || n == 0 {
                self.fresh_ball()
            } else {
                Op::DeleteBall(self.balls.pick(&mut self.rng).unwrap())
            }
        } else {
            let insert = r < i + d + bi;
            if insert || m <= 1 || !self.room_for(n, m - 1) {
                self.fresh_bin()
            } else {
                Op::DeleteBin(self.bins.pick(&mut self.rng).unwrap())
            }
        };
        match op {
            Op::InsertBall(x) => self.balls.insert(x),
            Op::DeleteBall(x) => self.balls.remove(x),
            Op::InsertBin(b) => self.bins.insert(b),
            Op::DeleteBin(b) => self.bins.remove(b),
        }
        op
    }

    fn fresh_ball(&mut self) -> Op {
        let x = self.next_ball;
        self.next_ball += 1;
        Op::InsertBall(x)
    }

    fn fresh_bin(&mut self) -> Op {
        let b = BIN_NAMESPACE | self.next_bin;
        self.next_bin += 1;
        Op::InsertBin(b)
    }

    /// A uniformly random live ball.
    pub fn pick_ball(&mut self) -> Option<u64> {
        self.balls.pick(&mut self.rng)
    }
}

pub fn initial_bins(m: u64) -> Vec<u64> {
    (0..m).map(|b| BIN_NAMESPACE | b).collect()
}

pub fn initial_balls(n: u64) -> impl Iterator<Item = u64> {
    0..n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn traces_are_deterministic_and_feasible() {
        let cap = CapacityMode::fixed(1).unwrap();
        let mix: Mix = "1:0:0:1".parse().unwrap();
        let mut a = TraceGenerator::new(3, 0, mix, cap, 5, 5);
        let mut b = TraceGenerator::new(3, 0, mix, cap, 5, 5);
        let ops: Vec<Op> = (0..100).map(|_| a.next_op()).collect();
        assert_eq!(ops, (0..100).map(|_| b.next_op()).collect::<Vec<_>>());
        // Full from the start: every step must grow the bin set first.
        let (mut n, mut m) = (5i64, 5i64);
        for op in ops {
            match op {
                Op::InsertBall(_) => n += 1,
                Op::DeleteBall(_) => n -= 1,
                Op::InsertBin(_) => m += 1,
                Op::DeleteBin(_) => m -= 1,
            }
            assert!(n <= m && m >= 1);
        }
    }

    #[test]
    fn namespaces_are_disjoint() {
        let mut g = TraceGenerator::new(
            1,
            0,
            "1:0:1:0".parse().unwrap(),
            CapacityMode::fixed(4).unwrap(),
            0,
            1,
        );
        for _ in 0..200 {
            match g.next_op() {
                Op::InsertBall(x) => assert_eq!(x & BIN_NAMESPACE, 0),
                Op::InsertBin(b) => assert_ne!(b & BIN_NAMESPACE, 0),
                _ => unreachable!(),
            }
        }
    }
}
