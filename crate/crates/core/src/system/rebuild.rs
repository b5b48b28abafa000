use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::capacity::{plan_for, CapacityMode};
use crate::error::{Error, Result};

use super::{BallKey, SuperBin, SystemConfig, SystemState, VirtualBin};

/// Canonical state for the given ball and bin sets, built from nothing:
/// balls are placed one at a time in priority order, each into the first
/// virtual bin at or after its position whose bin still has room, and every
/// full virtual bin walked past gets its pass count bumped.
///
/// This is the reference the incremental updates are checked against, so it
/// deliberately shares none of their walking code.
pub fn rebuild_from_scratch(
    config: SystemConfig,
    ball_ids: &[u64],
    bin_ids: &[u64],
) -> Result<SystemState> {
    if bin_ids.is_empty() {
        return Err(Error::NoBins);
    }
    let mut state = SystemState::empty(config)?;
    let hashes = state.hashes.clone();
    let k = config.scheme.levels();

    let mut order: Vec<(u64, u64)> = Vec::with_capacity(bin_ids.len());
    let mut index: Vec<VirtualBin> = Vec::with_capacity(bin_ids.len() * (k as usize + 1));
    for &id in bin_ids {
        if state.bins.contains_key(&id) {
            return Err(Error::DuplicateBin(id));
        }
        let positions = (0..=k)
            .map(|l| hashes.virtual_bin(id, l))
            .collect::<Result<Vec<u128>>>()?;
        for (l, &position) in positions.iter().enumerate() {
            index.push(VirtualBin {
                position,
                owner: id,
                level: l as u32,
                pass_count: 0,
            });
        }
        let selection = hashes.capacity_selection(id);
        order.push((selection, id));
        state.bins.insert(
            id,
            SuperBin {
                capacity: 0,
                balls: BTreeMap::new(),
                positions,
                passed_levels: BTreeSet::new(),
                selection,
            },
        );
    }
    index.sort_by_key(|v| (v.position, v.owner));
    order.sort_unstable();

    let n = ball_ids.len() as u64;
    let m = bin_ids.len() as u64;
    match config.capacity {
        CapacityMode::Fixed { capacity } => {
            for bin in state.bins.values_mut() {
                bin.capacity = capacity;
            }
        }
        CapacityMode::Dynamic { balance } => {
            let plan = plan_for(balance, n, m)?;
            for (rank, &(_, id)) in order.iter().enumerate() {
                state.bins.get_mut(&id).unwrap().capacity = plan.capacity_at(rank as u64);
            }
        }
    }
    let total: u64 = state.bins.values().map(|b| b.capacity).sum();
    if n > total {
        return Err(Error::CapacityExhausted {
            balls: n,
            capacity: total,
        });
    }

    let mut keys: Vec<BallKey> = Vec::with_capacity(ball_ids.len());
    let mut seen = HashMap::with_capacity(ball_ids.len());
    for &id in ball_ids {
        if seen.insert(id, ()).is_some() {
            return Err(Error::DuplicateBall(id));
        }
        keys.push(BallKey {
            position: hashes.ball(id),
            id,
        });
    }
    keys.sort_unstable();

    let mut room: HashMap<u64, u64> = state.bins.iter().map(|(&id, b)| (id, b.capacity)).collect();
    let mut cursor = 0;
    for key in keys {
        // Keys arrive in increasing position, so the start index only moves forward.
        while cursor < index.len() && index[cursor].position < key.position as u128 {
            cursor += 1;
        }
        let mut i = cursor;
        loop {
            let v = &mut index[i];
            let free = room.get_mut(&v.owner).unwrap();
            if *free > 0 {
                *free -= 1;
                let bin = state.bins.get_mut(&v.owner).unwrap();
                bin.balls.insert(key, v.level);
                state.balls.insert(key.id, (v.owner, key.position));
                break;
            }
            v.pass_count += 1;
            i += 1;
        }
    }

    for v in &index {
        if v.pass_count > 0 {
            state
                .bins
                .get_mut(&v.owner)
                .unwrap()
                .passed_levels
                .insert(v.level);
        }
    }
    state.index = index;
    state.selection = order;
    Ok(state)
}

impl SystemState {
    /// Rebuilds the canonical state for the current ball and bin sets.
    pub fn rebuild(&self) -> Result<SystemState> {
        let balls: Vec<u64> = self.ball_ids().collect();
        let bins: Vec<u64> = self.bin_ids().collect();
        rebuild_from_scratch(self.config, &balls, &bins)
    }
}
