//! Level schemes and the target non-full fraction `f(ε, C)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::HashUniverse;

/// Default constant `c₀` in `k = ⌈c₀/ε²⌉` for the uniform scheme.
pub const DEFAULT_UNIFORM_K_CONST: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Single,
    Uniform,
    Geometric,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Single => "single",
            SchemeKind::Uniform => "uniform",
            SchemeKind::Geometric => "geometric",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "single" => Ok(SchemeKind::Single),
            "uniform" => Ok(SchemeKind::Uniform),
            "geometric" => Ok(SchemeKind::Geometric),
            other => Err(format!("unknown scheme '{other}'")),
        }
    }
}

/// How balls are spread over levels. Bins get one virtual bin per level plus
/// one overflow virtual bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum LevelScheme {
    /// One level: plain consistent hashing with bounded loads.
    Single,
    /// `k` levels with probability `1/k` each.
    Uniform { k: u32 },
    /// `p_i = 2^-(i+1)` for `i < k-1`, and `2^-(k-1)` for the last level.
    Geometric { k: u32 },
}

impl LevelScheme {
    pub fn new(kind: SchemeKind, k: u32) -> Result<Self> {
        match kind {
            SchemeKind::Single => Ok(LevelScheme::Single),
            SchemeKind::Uniform if k >= 1 => Ok(LevelScheme::Uniform { k }),
            SchemeKind::Geometric if (1..=64).contains(&k) => Ok(LevelScheme::Geometric { k }),
            _ => Err(Error::InvalidLevels(k)),
        }
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            LevelScheme::Single => SchemeKind::Single,
            LevelScheme::Uniform { .. } => SchemeKind::Uniform,
            LevelScheme::Geometric { .. } => SchemeKind::Geometric,
        }
    }

    pub fn levels(&self) -> u32 {
        match *self {
            LevelScheme::Single => 1,
            LevelScheme::Uniform { k } | LevelScheme::Geometric { k } => k,
        }
    }

    pub fn universe(&self) -> Result<HashUniverse> {
        match *self {
            LevelScheme::Single => HashUniverse::uniform(1),
            LevelScheme::Uniform { k } => HashUniverse::uniform(k),
            LevelScheme::Geometric { k } => HashUniverse::geometric(k),
        }
    }

    /// Exact level probabilities as `(numerator, denominator)` pairs.
    pub fn probabilities(&self) -> Vec<(u128, u128)> {
        match *self {
            LevelScheme::Single => vec![(1, 1)],
            LevelScheme::Uniform { k } => vec![(1, k as u128); k as usize],
            LevelScheme::Geometric { k } => {
                let mut p: Vec<(u128, u128)> = (0..k - 1).map(|i| (1, 1u128 << (i + 1))).collect();
                p.push((1, 1u128 << (k - 1)));
                p
            }
        }
    }

    /// Level of a ball at `position`.
    pub fn level_of(&self, position: u64) -> u32 {
        // Cheap closed forms; the range table is authoritative and tested
        // against these.
        match *self {
            LevelScheme::Single => 0,
            LevelScheme::Uniform { k } => {
                let k = k as u128;
                let p = position as u128;
                // Largest i with ⌊i·u/k⌋ <= p.
                let mut i = (p * k) >> 64;
                while i + 1 < k && ((i + 1) << 64) / k <= p {
                    i += 1;
                }
                i as u32
            }
            LevelScheme::Geometric { k } => position.leading_ones().min(k - 1),
        }
    }
}

/// Levels suggested for a target ε.
///
/// Geometric: `⌈log₂(1/ε)⌉ + 2`. Uniform: `⌈c₀/ε²⌉`. Single: 1.
pub fn recommended_k(kind: SchemeKind, epsilon: f64, k_const: f64) -> Result<u32> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::EpsilonDomain(epsilon));
    }
    // Shave rounding noise so that e.g. 8/0.1² gives 800, not 801.
    let ceil = |x: f64| (x - 1e-9).ceil().max(1.0) as u32;
    Ok(match kind {
        SchemeKind::Single => 1,
        SchemeKind::Geometric => ceil((1.0 / epsilon).log2()) + 2,
        SchemeKind::Uniform => ceil(k_const / (epsilon * epsilon)),
    })
}

/// Expected fraction of non-full bins, up to constant factors:
///
/// ```text
/// f = εC                          if C ≤ ln(1/ε)
///   = ε√C · √ln(1/(ε√C))          if ln(1/ε) < C < 1/(2ε²)
///   = 1                           if C ≥ 1/(2ε²)
/// ```
///
/// The logarithm is natural. Inside the middle case the log term is floored
/// at `ln 2` so the value stays within a factor 2 of its neighbours.
pub fn f_formula(epsilon: f64, capacity: u64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::EpsilonDomain(epsilon));
    }
    if capacity == 0 {
        return Err(Error::ZeroCapacity);
    }
    Ok(f_real(epsilon, capacity as f64))
}

/// `f` for real-valued capacity; used for boundary checks.
pub(crate) fn f_real(epsilon: f64, capacity: f64) -> f64 {
    let low = (1.0 / epsilon).ln();
    let high = 1.0 / (2.0 * epsilon * epsilon);
    let f = if capacity <= low {
        epsilon * capacity
    } else if capacity < high {
        let s = epsilon * capacity.sqrt();
        s * (1.0 / s).ln().max(std::f64::consts::LN_2).sqrt()
    } else {
        1.0
    };
    f.clamp(f64::MIN_POSITIVE, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_examples() {
        assert_eq!(f_formula(0.5, 8).unwrap(), 1.0);
        assert!((f_formula(0.01, 1).unwrap() - 0.01).abs() < 1e-15);
        let mid = f_formula(0.01, 100).unwrap();
        assert!((mid - 0.1 * 10f64.ln().sqrt()).abs() < 1e-12);
        assert!((mid - 0.1517).abs() < 1e-4);
    }

    #[test]
    fn f_domain_errors() {
        assert!(f_formula(0.0, 4).is_err());
        assert!(f_formula(1.0, 4).is_err());
        assert!(f_formula(-0.2, 4).is_err());
        assert!(f_formula(0.2, 0).is_err());
    }

    #[test]
    fn f_is_continuous_up_to_factor_two() {
        for i in 1..200 {
            let eps = i as f64 / 201.0;
            for boundary in [(1.0 / eps).ln(), 1.0 / (2.0 * eps * eps)] {
                if boundary < 1.0 {
                    continue;
                }
                let below = f_real(eps, boundary * (1.0 - 1e-9));
                let above = f_real(eps, boundary * (1.0 + 1e-9));
                let ratio = below.max(above) / below.min(above);
                assert!(ratio <= 2.0, "eps={eps} boundary={boundary} ratio={ratio}");
            }
        }
    }

    #[test]
    fn recommended_levels() {
        assert_eq!(recommended_k(SchemeKind::Geometric, 0.25, 8.0).unwrap(), 4);
        assert_eq!(recommended_k(SchemeKind::Geometric, 0.125, 8.0).unwrap(), 5);
        assert_eq!(recommended_k(SchemeKind::Uniform, 0.5, 8.0).unwrap(), 32);
        assert_eq!(recommended_k(SchemeKind::Uniform, 0.1, 8.0).unwrap(), 800);
        assert_eq!(recommended_k(SchemeKind::Single, 0.1, 8.0).unwrap(), 1);
    }

    #[test]
    fn probabilities_sum_to_one() {
        for scheme in [
            LevelScheme::Single,
            LevelScheme::Uniform { k: 7 },
            LevelScheme::Geometric { k: 1 },
            LevelScheme::Geometric { k: 6 },
        ] {
            let p = scheme.probabilities();
            assert_eq!(p.len() as u32, scheme.levels());
            let den: u128 = p.iter().map(|&(_, d)| d).max().unwrap();
            let sum: u128 = p.iter().map(|&(n, d)| n * den / d).sum();
            assert_eq!(sum, den, "{scheme:?}");
        }
    }

    #[test]
    fn geometric_level_examples() {
        let g = LevelScheme::Geometric { k: 3 };
        assert_eq!(g.level_of((1 << 63) - 1), 0);
        assert_eq!(g.level_of(1 << 63), 1);
        assert_eq!(g.level_of(u64::MAX), 2);
        let u = LevelScheme::Uniform { k: 4 };
        assert_eq!(u.level_of(0), 0);
        assert_eq!(u.level_of(1 << 63), 2);
    }
}
