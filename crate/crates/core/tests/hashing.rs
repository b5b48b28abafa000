use chbl_core::{Domain, HashFamily, HashMode, LevelScheme, MixedTabulation, SchemeKind};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const SAMPLES: u64 = 1_000_000;

fn family(mode: HashMode, scheme: LevelScheme) -> HashFamily {
    HashFamily::new(mode, scheme.universe().unwrap()).unwrap()
}

fn modes(seed: u64) -> [HashMode; 2] {
    [HashMode::random(seed), HashMode::mixed_tabulation(seed)]
}

/// Straight-line evaluation of `h2(x, h1(x))` from the table entries.
fn reference_tabulation(h: &MixedTabulation, x: u64) -> u64 {
    let bits = h.char_bits();
    let alphabet = 1u64 << bits;
    let c = h.chars() as usize;
    let chars: Vec<usize> = (0..c)
        .map(|i| ((x >> (bits as usize * i)) % alphabet) as usize)
        .collect();
    let mut derived = 0u64;
    for (i, &ch) in chars.iter().enumerate() {
        derived ^= h.derived_entry(i, ch);
    }
    let mut out = 0u64;
    for (i, &ch) in chars.iter().enumerate() {
        out ^= h.output_entry(i, ch);
    }
    for j in 0..h.derived_chars() as usize {
        let ch = ((derived >> (bits as usize * j)) % alphabet) as usize;
        out ^= h.output_entry(c + j, ch);
    }
    out
}

#[test]
fn tabulation_matches_reference_evaluator() {
    for (c, d) in [(8, 4), (4, 2), (8, 8), (16, 4)] {
        let h = MixedTabulation::new(99, 3, c, d).unwrap();
        let mut x = 0x0123_4567_89ab_cdefu64;
        for i in 0..10_000u64 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(i | 1);
            assert_eq!(
                h.hash(x),
                reference_tabulation(&h, x),
                "c={c} d={d} x={x:#x}"
            );
        }
    }
}

#[test]
fn tabulation_rejects_bad_shapes() {
    for (c, d) in [(0, 1), (3, 1), (8, 0), (8, 9), (4, 5)] {
        assert!(MixedTabulation::new(1, 0, c, d).is_err(), "c={c} d={d}");
    }
}

#[test]
fn ball_hashes_pass_chi_squared_uniformity() {
    const BUCKETS: usize = 256;
    let critical = ChiSquared::new((BUCKETS - 1) as f64)
        .unwrap()
        .inverse_cdf(1.0 - 0.001);
    for mode in modes(17) {
        let fam = family(mode, LevelScheme::Single);
        let mut counts = [0u64; BUCKETS];
        for x in 0..SAMPLES {
            counts[(fam.ball(x) >> 56) as usize] += 1;
        }
        let expected = SAMPLES as f64 / BUCKETS as f64;
        let stat: f64 = counts
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        assert!(
            stat < critical,
            "{}: chi2 {stat} >= {critical}",
            mode.name()
        );
    }
}

#[test]
fn virtual_bins_stay_in_their_level_range() {
    for scheme in [
        LevelScheme::Single,
        LevelScheme::new(SchemeKind::Uniform, 7).unwrap(),
        LevelScheme::new(SchemeKind::Geometric, 9).unwrap(),
    ] {
        for mode in modes(5) {
            let fam = family(mode, scheme);
            let u = fam.universe();
            let k = u.levels();
            let per_level = SAMPLES / (k as u64 + 1);
            for level in 0..=k {
                let range = u.range(level).unwrap();
                for b in 0..per_level {
                    let p = fam.virtual_bin(b, level).unwrap();
                    assert!(range.contains(&p), "level {level} bin {b} at {p}");
                }
            }
            assert_eq!(u.range(k).unwrap(), u.overflow_range());
            assert!(u.overflow_range().start == 1u128 << 64);
            assert!(fam.virtual_bin(0, k + 1).is_err());
        }
    }
}

#[test]
fn ball_levels_follow_scheme_probabilities() {
    for scheme in [
        LevelScheme::new(SchemeKind::Uniform, 6).unwrap(),
        LevelScheme::new(SchemeKind::Geometric, 8).unwrap(),
    ] {
        for mode in modes(23) {
            let fam = family(mode, scheme);
            let mut counts = vec![0u64; scheme.levels() as usize];
            for x in 0..SAMPLES {
                counts[scheme.level_of(fam.ball(x)) as usize] += 1;
            }
            for (level, (&got, (num, den))) in counts.iter().zip(scheme.probabilities()).enumerate()
            {
                let p = num as f64 / den as f64;
                let mean = p * SAMPLES as f64;
                let sigma = (mean * (1.0 - p)).sqrt();
                assert!(
                    (got as f64 - mean).abs() <= 3.0 * sigma,
                    "{:?} {} level {level}: {got} vs {mean}",
                    scheme,
                    mode.name()
                );
            }
        }
    }
}

#[test]
fn probabilities_sum_to_one() {
    for scheme in [
        LevelScheme::Single,
        LevelScheme::new(SchemeKind::Uniform, 12).unwrap(),
        LevelScheme::new(SchemeKind::Geometric, 12).unwrap(),
        LevelScheme::new(SchemeKind::Geometric, 1).unwrap(),
    ] {
        let sum: f64 = scheme
            .probabilities()
            .iter()
            .map(|&(n, d)| n as f64 / d as f64)
            .sum();
        assert!((sum - 1.0).abs() < 1e-12, "{scheme:?}");
    }
}

#[test]
fn level_of_inverts_the_range_table() {
    for scheme in [
        LevelScheme::Single,
        LevelScheme::new(SchemeKind::Uniform, 3).unwrap(),
        LevelScheme::new(SchemeKind::Uniform, 800).unwrap(),
        LevelScheme::new(SchemeKind::Geometric, 5).unwrap(),
        LevelScheme::new(SchemeKind::Geometric, 64).unwrap(),
    ] {
        let u = scheme.universe().unwrap();
        for level in 0..u.levels() {
            let r = u.range(level).unwrap();
            let edges = [r.start, r.start + 1, (r.start + r.end) / 2, r.end - 1];
            for p in edges.into_iter().filter(|p| r.contains(p)) {
                let p = p as u64;
                assert_eq!(scheme.level_of(p), level, "{scheme:?} at {p}");
                assert_eq!(u.level_of(p), level, "{scheme:?} at {p}");
            }
        }
    }
}

#[test]
fn ball_hashes_rarely_collide() {
    // 10^4 pairs of 64-bit values: a single collision has probability ~2^-50.
    for mode in modes(31) {
        let fam = family(mode, LevelScheme::Single);
        let collisions = (0..10_000u64)
            .filter(|&i| fam.ball(2 * i) == fam.ball(2 * i + 1))
            .count();
        assert_eq!(collisions, 0, "{}", mode.name());
    }
}

#[test]
fn different_seeds_give_different_functions() {
    for (a, b) in modes(1).into_iter().zip(modes(2)) {
        let (fa, fb) = (
            family(a, LevelScheme::Single),
            family(b, LevelScheme::Single),
        );
        let differ = (0..1000u64).filter(|&x| fa.ball(x) != fb.ball(x)).count();
        assert!(differ >= 990, "{}: {differ}", a.name());
    }
}

#[test]
fn domains_are_independent_functions() {
    for mode in modes(8) {
        let fam = family(mode, LevelScheme::new(SchemeKind::Uniform, 4).unwrap());
        let same = (0..1000u64)
            .filter(|&x| {
                fam.raw(Domain::Ball, x) == fam.raw(Domain::Level(0), x)
                    || fam.raw(Domain::Level(0), x) == fam.raw(Domain::Level(1), x)
                    || fam.raw(Domain::Ball, x) == fam.capacity_selection(x)
            })
            .count();
        assert!(same <= 10, "{}: {same}", mode.name());
    }
}

#[test]
fn hashing_is_deterministic() {
    for mode in modes(77) {
        let a = family(mode, LevelScheme::new(SchemeKind::Geometric, 6).unwrap());
        let b = family(mode, LevelScheme::new(SchemeKind::Geometric, 6).unwrap());
        for x in 0..1000u64 {
            assert_eq!(a.ball(x), b.ball(x));
            assert_eq!(a.virtual_bin(x, 3).unwrap(), b.virtual_bin(x, 3).unwrap());
        }
    }
}
