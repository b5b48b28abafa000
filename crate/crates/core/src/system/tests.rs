use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::levels::SchemeKind;
use crate::report::Move;

fn config(kind: SchemeKind, k: u32, hash: HashMode, capacity: CapacityMode) -> SystemConfig {
    SystemConfig::new(hash, LevelScheme::new(kind, k).unwrap(), capacity)
}

fn fixed(kind: SchemeKind, k: u32, c: u64) -> SystemConfig {
    config(
        kind,
        k,
        HashMode::random(11),
        CapacityMode::fixed(c).unwrap(),
    )
}

fn assert_canonical(state: &SystemState) {
    assert_eq!(state.check_invariants(), vec![]);
    assert_eq!(state.snapshot(), state.rebuild().unwrap().snapshot());
}

/// Random state with `m` bins and `n` balls built by incremental inserts.
fn populated(config: SystemConfig, m: u64, n: u64) -> SystemState {
    let bins: Vec<u64> = (0..m).map(|b| 1000 + b).collect();
    let mut state = SystemState::new(config, &bins).unwrap();
    for x in 0..n {
        state.insert_ball(x).unwrap();
    }
    state
}

fn run_trace(config: SystemConfig, seed: u64, len: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = populated(config, 6, 8);
    let mut next_ball = 100;
    let mut next_bin = 5000;
    for _ in 0..len {
        let before = state.snapshot();
        let op = rng.random_range(0..4);
        let outcome = match op {
            0 => {
                next_ball += 1;
                state.insert_ball(next_ball)
            }
            1 => match state.ball_ids().choose(&mut rng) {
                Some(x) => state.delete_ball(x),
                None => continue,
            },
            2 => {
                next_bin += 1;
                state.insert_bin(next_bin)
            }
            _ => match state.bin_ids().choose(&mut rng) {
                Some(b) => state.delete_bin(b),
                None => continue,
            },
        };
        if outcome.is_err() {
            assert_eq!(state.snapshot(), before, "failed update must not mutate");
            continue;
        }
        assert_canonical(&state);
    }
}

#[test]
fn new_system_has_all_virtual_bins() {
    let state = SystemState::new(fixed(SchemeKind::Uniform, 4, 2), &[1, 2, 3]).unwrap();
    assert_eq!(state.m(), 3);
    assert_eq!(state.n(), 0);
    assert_eq!(state.virtual_bins().len(), 15);
    assert!(state.virtual_bins().iter().all(|v| v.pass_count == 0));
    assert_canonical(&state);
}

#[test]
fn zero_bins_rejected() {
    let err = SystemState::new(fixed(SchemeKind::Single, 1, 1), &[]).unwrap_err();
    assert_eq!(err, Error::NoBins);
}

#[test]
fn dynamic_empty_system_has_unit_capacities() {
    let cfg = config(
        SchemeKind::Single,
        1,
        HashMode::random(3),
        CapacityMode::dynamic(1.25).unwrap(),
    );
    let state = SystemState::new(cfg, &[1, 2, 3, 4, 5]).unwrap();
    assert!(state.bin_ids().all(|b| state.capacity(b) == Some(1)));
}

#[test]
fn single_bin_insert() {
    let mut state = SystemState::new(fixed(SchemeKind::Single, 1, 2), &[7]).unwrap();
    let report = state.insert_ball(1).unwrap();
    assert!(report.bins_visited >= 1);
    assert_eq!(
        report.moved,
        vec![Move {
            ball: 1,
            from: None,
            to: Some(7)
        }]
    );
    assert_eq!(state.search_ball(1).bin, Some(7));
}

#[test]
fn duplicate_and_missing_errors() {
    let mut state = SystemState::new(fixed(SchemeKind::Single, 1, 2), &[7]).unwrap();
    state.insert_ball(1).unwrap();
    assert_eq!(state.insert_ball(1).unwrap_err(), Error::DuplicateBall(1));
    assert_eq!(state.delete_ball(2).unwrap_err(), Error::MissingBall(2));
    assert_eq!(state.insert_bin(7).unwrap_err(), Error::DuplicateBin(7));
    assert_eq!(state.delete_bin(8).unwrap_err(), Error::MissingBin(8));
    assert_eq!(state.delete_bin(7).unwrap_err(), Error::LastBin);
}

#[test]
fn insert_then_delete_restores_state() {
    let mut state = populated(fixed(SchemeKind::Uniform, 8, 2), 20, 30);
    let before = state.snapshot();
    state.insert_ball(999).unwrap();
    state.delete_ball(999).unwrap();
    assert_eq!(state.snapshot(), before);
}

#[test]
fn singleton_round_trip_clears_pass_counts() {
    let mut state = SystemState::new(fixed(SchemeKind::Geometric, 3, 1), &[5]).unwrap();
    state.insert_ball(9).unwrap();
    state.delete_ball(9).unwrap();
    assert_eq!(state.n(), 0);
    assert!(state.virtual_bins().iter().all(|v| v.pass_count == 0));
}

#[test]
fn delete_without_passers_moves_only_the_ball() {
    let mut state = populated(fixed(SchemeKind::Uniform, 4, 3), 10, 6);
    let x = state
        .ball_ids()
        .find(|&x| {
            let b = state.bin_of(x).unwrap();
            (0..=4).all(|l| state.pass_count(b, l) == Some(0))
        })
        .expect("some bin is never passed");
    let b = state.bin_of(x).unwrap();
    let report = state.delete_ball(x).unwrap();
    assert_eq!(
        report.moved,
        vec![Move {
            ball: x,
            from: Some(b),
            to: None
        }]
    );
}

#[test]
fn fresh_ball_matches_rebuild() {
    let cfg = config(
        SchemeKind::Uniform,
        32,
        HashMode::random(0xC0FFEE),
        CapacityMode::dynamic(1.5).unwrap(),
    );
    let mut state = populated(cfg, 100, 150);
    state.insert_ball(1 << 40).unwrap();
    assert_canonical(&state);
    let x = state.ball_ids().nth(17).unwrap();
    state.delete_ball(x).unwrap();
    assert_canonical(&state);
}

#[test]
fn bin_round_trip_restores_state() {
    let mut state = populated(fixed(SchemeKind::Geometric, 4, 2), 30, 50);
    let before = state.snapshot();
    state.insert_bin(77_777).unwrap();
    assert_canonical(&state);
    state.delete_bin(77_777).unwrap();
    assert_eq!(state.snapshot(), before);
}

#[test]
fn deleting_a_bin_moves_its_ball_to_the_other() {
    let mut state = SystemState::new(fixed(SchemeKind::Single, 1, 1), &[1, 2]).unwrap();
    state.insert_ball(10).unwrap();
    let a = state.bin_of(10).unwrap();
    let b = if a == 1 { 2 } else { 1 };
    state.delete_bin(a).unwrap();
    assert_eq!(state.bin_of(10), Some(b));
    assert_eq!(state.m(), 1);
}

#[test]
fn deleting_an_empty_bin_moves_nothing() {
    let mut state = SystemState::new(fixed(SchemeKind::Uniform, 2, 3), &[1, 2, 3]).unwrap();
    state.insert_ball(10).unwrap();
    let empty = state.bin_ids().find(|&b| state.load(b) == Some(0)).unwrap();
    let report = state.delete_bin(empty).unwrap();
    assert!(report.moved.is_empty());
    assert_eq!(state.m(), 2);
}

#[test]
fn new_bin_pulls_back_passed_balls() {
    // One full bin, then a second bin: whatever moves must match the rebuild.
    let mut state = SystemState::new(fixed(SchemeKind::Single, 1, 1), &[1]).unwrap();
    state.insert_ball(10).unwrap();
    state.insert_bin(2).unwrap();
    assert_canonical(&state);
    state.insert_ball(11).unwrap();
    state.insert_bin(3).unwrap();
    assert_canonical(&state);
}

#[test]
fn search_in_empty_system_visits_one_bin() {
    let state = SystemState::new(fixed(SchemeKind::Uniform, 4, 2), &[1, 2]).unwrap();
    let r = state.search_ball(5);
    assert_eq!(r.bin, None);
    assert_eq!(r.bins_visited, 1);
}

#[test]
fn search_is_complete() {
    let state = populated(fixed(SchemeKind::Geometric, 5, 3), 50, 140);
    for x in state.ball_ids() {
        assert_eq!(state.search_ball(x).bin, state.bin_of(x));
    }
    for x in 10_000..11_000 {
        assert_eq!(state.search_ball(x).bin, None);
    }
}

#[test]
fn insert_and_delete_trails_agree() {
    let mut state = populated(fixed(SchemeKind::Uniform, 6, 2), 40, 70);
    let xs: Vec<u64> = state.ball_ids().take(40).collect();
    for x in xs {
        let del = state.delete_ball(x).unwrap();
        let ins = state.insert_ball(x).unwrap();
        assert_eq!(del.trail, ins.trail, "ball {x}");
    }
}

#[test]
fn corrupted_counter_is_reported() {
    let mut state = populated(fixed(SchemeKind::Uniform, 4, 2), 10, 15);
    assert!(state.check_invariants().is_empty());
    state.corrupt_pass_count(1003, 1, 9);
    assert!(!state.check_invariants().is_empty());
}

#[test]
fn injected_fault_breaks_reconciliation() {
    let mut state = SystemState::new(fixed(SchemeKind::Single, 1, 1), &[1, 2, 3, 4]).unwrap();
    state.inject_fault(Some(Fault::PassIncrementOffByOne));
    for x in 0..4 {
        state.insert_ball(x).unwrap();
    }
    assert!(state
        .check_invariants()
        .iter()
        .any(|v| matches!(v, Violation::PassCount { .. })));
}

#[test]
fn rebuild_matches_any_insertion_order() {
    let cfg = fixed(SchemeKind::Geometric, 4, 2);
    let bins: Vec<u64> = (0..12).collect();
    let balls: Vec<u64> = (100..120).collect();
    let reference = rebuild_from_scratch(cfg, &balls, &bins).unwrap().snapshot();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let mut order = balls.clone();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut state = SystemState::new(cfg, &bins).unwrap();
        for x in order {
            state.insert_ball(x).unwrap();
        }
        assert_eq!(state.snapshot(), reference);
    }
}

#[test]
fn mixed_traces_stay_canonical() {
    let schemes = [
        (SchemeKind::Single, 1),
        (SchemeKind::Uniform, 5),
        (SchemeKind::Geometric, 4),
    ];
    for (i, &(kind, k)) in schemes.iter().enumerate() {
        for hash in [
            HashMode::random(i as u64),
            HashMode::mixed_tabulation(i as u64),
        ] {
            run_trace(
                config(kind, k, hash, CapacityMode::fixed(2).unwrap()),
                1,
                150,
            );
            run_trace(
                config(kind, k, hash, CapacityMode::dynamic(1.25).unwrap()),
                2,
                150,
            );
        }
    }
}
