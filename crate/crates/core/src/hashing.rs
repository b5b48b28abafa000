//! Seedable hash families for balls and virtual bins.
//!
//! Every hash value is a 64-bit word. Balls use theirs directly as a position
//! in `[0, 2^64)`, which is also their priority. Virtual bins are mapped into
//! the range of their level, and the overflow level `k` lives past `2^64`,
//! so bin positions are carried as `u128`.
//!
//! Two families are provided:
//!
//! * [`HashMode::FullyRandom`]: a keyed ChaCha8 keystream read at a
//!   key-dependent offset. Each (seed, domain) pair is extensionally a fixed
//!   random function, which is the model the analysis assumes.
//! * [`HashMode::MixedTabulation`]: `h(x) = h2(x, h1(x))` where `h1` and `h2`
//!   are simple tabulation functions over `c` characters of the key and `d`
//!   derived characters.

use std::ops::Range;
use std::sync::OnceLock;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Size of the normal hash universe, `u = 2^64`.
pub const UNIVERSE: u128 = 1 << 64;

/// Default number of key characters for mixed tabulation.
pub const DEFAULT_TAB_CHARS: u32 = 8;
/// Default number of derived characters for mixed tabulation.
pub const DEFAULT_TAB_DERIVED: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HashMode {
    FullyRandom { seed: u64 },
    MixedTabulation { seed: u64, c: u32, d: u32 },
}

impl HashMode {
    pub fn random(seed: u64) -> Self {
        HashMode::FullyRandom { seed }
    }

    /// Mixed tabulation with the default 8 eight-bit characters and 4 derived ones.
    pub fn mixed_tabulation(seed: u64) -> Self {
        HashMode::MixedTabulation {
            seed,
            c: DEFAULT_TAB_CHARS,
            d: DEFAULT_TAB_DERIVED,
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            HashMode::FullyRandom { seed } | HashMode::MixedTabulation { seed, .. } => seed,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HashMode::FullyRandom { .. } => "random",
            HashMode::MixedTabulation { .. } => "mixedtab",
        }
    }
}

/// Consecutive level ranges `0..k` partitioning `[0, 2^64)`, followed by the
/// overflow range of level `k`, which starts at `2^64`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashUniverse {
    // bounds[i]..bounds[i + 1] is level i; there are k + 2 bounds.
    bounds: Vec<u128>,
}

impl HashUniverse {
    /// Builds a universe from the `k + 1` boundaries of the normal levels.
    /// The boundaries must start at 0, end at `2^64` and be strictly increasing.
    pub fn from_bounds(mut bounds: Vec<u128>) -> Result<Self> {
        let k = bounds.len().saturating_sub(1) as u32;
        if k == 0
            || bounds[0] != 0
            || *bounds.last().unwrap() != UNIVERSE
            || bounds.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidLevels(k));
        }
        bounds.push(UNIVERSE + UNIVERSE / k as u128);
        Ok(HashUniverse { bounds })
    }

    /// `k` equal ranges `[⌊i·u/k⌋, ⌊(i+1)·u/k⌋)`.
    pub fn uniform(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidLevels(k));
        }
        let k128 = k as u128;
        // i * 2^64 overflows u128 only for i >= 2^64, which k cannot reach.
        Self::from_bounds((0..=k128).map(|i| i * UNIVERSE / k128).collect())
    }

    /// Halving ranges: level `j < k-1` is `[u - u/2^j, u - u/2^(j+1))`, the last
    /// normal level takes the remaining `[u - u/2^(k-1), u)`.
    pub fn geometric(k: u32) -> Result<Self> {
        if k == 0 || k > 64 {
            return Err(Error::InvalidLevels(k));
        }
        let mut bounds: Vec<u128> = (0..k).map(|j| UNIVERSE - (UNIVERSE >> j)).collect();
        bounds.push(UNIVERSE);
        Self::from_bounds(bounds)
    }

    /// Number of normal levels `k`.
    pub fn levels(&self) -> u32 {
        (self.bounds.len() - 2) as u32
    }

    /// Half-open range of `level`; `level == k` is the overflow range.
    pub fn range(&self, level: u32) -> Result<Range<u128>> {
        if level > self.levels() {
            return Err(Error::LevelOutOfRange {
                level,
                levels: self.levels(),
            });
        }
        let i = level as usize;
        Ok(self.bounds[i]..self.bounds[i + 1])
    }

    pub fn overflow_range(&self) -> Range<u128> {
        let k = self.levels() as usize;
        self.bounds[k]..self.bounds[k + 1]
    }

    /// Index of the normal level containing a ball position. Never returns `k`.
    pub fn level_of(&self, position: u64) -> u32 {
        let p = position as u128;
        let normal = &self.bounds[..self.bounds.len() - 1];
        (normal.partition_point(|&b| b <= p) - 1) as u32
    }

    /// Maps a raw 64-bit hash uniformly into the range of `level`.
    fn place(&self, level: u32, raw: u64) -> Result<u128> {
        let r = self.range(level)?;
        let width = r.end - r.start;
        Ok(r.start + ((raw as u128 * width) >> 64))
    }
}

/// Independent hash functions are indexed by domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Ball,
    CapacitySelection,
    Level(u32),
}

impl Domain {
    fn index(self) -> u64 {
        match self {
            Domain::Ball => 0,
            Domain::CapacitySelection => 1,
            Domain::Level(l) => 2 + l as u64,
        }
    }
}

/// Keyed pseudo-random function: word `2·key` of the ChaCha8 keystream for
/// stream `domain`.
#[derive(Clone)]
struct KeystreamPrf {
    base: ChaCha8Rng,
}

impl KeystreamPrf {
    fn new(seed: u64) -> Self {
        KeystreamPrf {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn eval(&self, domain: u64, key: u64) -> u64 {
        let mut rng = self.base.clone();
        rng.set_stream(domain);
        rng.set_word_pos((key as u128) << 1);
        rng.next_u64()
    }
}

/// One mixed tabulation function `h(x) = h2(x, h1(x))` over 64-bit keys.
#[derive(Debug, Clone)]
pub struct MixedTabulation {
    c: u32,
    d: u32,
    char_bits: u32,
    /// `c` tables mapping a key character to `d` derived characters.
    derived: Vec<u64>,
    /// `c + d` tables mapping a character to a 64-bit output word.
    output: Vec<u64>,
}

impl MixedTabulation {
    /// Checks that `c` characters tile the 64-bit key with at most 16 bits
    /// each, and that `d` derived characters fit in one word.
    pub fn validate(c: u32, d: u32) -> Result<u32> {
        let ok = matches!(c, 4 | 8 | 16 | 32 | 64) && d >= 1 && d * (64 / c.max(1)) <= 64;
        if !ok {
            return Err(Error::InvalidTabulation { c, d });
        }
        Ok(64 / c)
    }

    pub fn new(seed: u64, domain: u64, c: u32, d: u32) -> Result<Self> {
        let char_bits = Self::validate(c, d)?;
        let alphabet = 1usize << char_bits;
        let derived_mask = if d * char_bits == 64 {
            u64::MAX
        } else {
            (1u64 << (d * char_bits)) - 1
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(domain);
        let derived = (0..c as usize * alphabet)
            .map(|_| rng.next_u64() & derived_mask)
            .collect();
        let output = (0..(c + d) as usize * alphabet)
            .map(|_| rng.next_u64())
            .collect();
        Ok(MixedTabulation {
            c,
            d,
            char_bits,
            derived,
            output,
        })
    }

    pub fn chars(&self) -> u32 {
        self.c
    }

    pub fn derived_chars(&self) -> u32 {
        self.d
    }

    pub fn char_bits(&self) -> u32 {
        self.char_bits
    }

    /// Entry `ch` of derived-character table `table` (`table < c`).
    pub fn derived_entry(&self, table: usize, ch: usize) -> u64 {
        self.derived[(table << self.char_bits) + ch]
    }

    /// Entry `ch` of output table `table` (`table < c + d`).
    pub fn output_entry(&self, table: usize, ch: usize) -> u64 {
        self.output[(table << self.char_bits) + ch]
    }

    pub fn hash(&self, key: u64) -> u64 {
        let bits = self.char_bits;
        let mask = (1u64 << bits) - 1;
        let mut derived = 0u64;
        let mut out = 0u64;
        for i in 0..self.c {
            let ch = ((key >> (i * bits)) & mask) as usize;
            let slot = ((i as usize) << bits) + ch;
            derived ^= self.derived[slot];
            out ^= self.output[slot];
        }
        for j in 0..self.d {
            let ch = ((derived >> (j * bits)) & mask) as usize;
            out ^= self.output[(((self.c + j) as usize) << bits) + ch];
        }
        out
    }
}

enum Backend {
    Random(KeystreamPrf),
    Tabulation {
        seed: u64,
        c: u32,
        d: u32,
        ball: MixedTabulation,
        selection: MixedTabulation,
        levels: Vec<OnceLock<MixedTabulation>>,
    },
}

/// All hash functions used by one system: one for balls, one per level for
/// virtual bins (including overflow), and one for capacity selection.
///
/// Immutable after construction except for lazily built per-level tables,
/// which are initialized through `OnceLock`, so a family can be shared
/// across threads.
pub struct HashFamily {
    mode: HashMode,
    universe: HashUniverse,
    backend: Backend,
}

impl std::fmt::Debug for HashFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HashFamily")
            .field("mode", &self.mode)
            .field("levels", &self.universe.levels())
            .finish()
    }
}

impl HashFamily {
    pub fn new(mode: HashMode, universe: HashUniverse) -> Result<Self> {
        let backend = match mode {
            HashMode::FullyRandom { seed } => Backend::Random(KeystreamPrf::new(seed)),
            HashMode::MixedTabulation { seed, c, d } => Backend::Tabulation {
                seed,
                c,
                d,
                ball: MixedTabulation::new(seed, Domain::Ball.index(), c, d)?,
                selection: MixedTabulation::new(seed, Domain::CapacitySelection.index(), c, d)?,
                levels: (0..=universe.levels()).map(|_| OnceLock::new()).collect(),
            },
        };
        Ok(HashFamily {
            mode,
            universe,
            backend,
        })
    }

    pub fn mode(&self) -> HashMode {
        self.mode
    }

    pub fn universe(&self) -> &HashUniverse {
        &self.universe
    }

    /// Raw 64-bit hash of `key` under the function for `domain`.
    pub fn raw(&self, domain: Domain, key: u64) -> u64 {
        match &self.backend {
            Backend::Random(prf) => prf.eval(domain.index(), key),
            Backend::Tabulation {
                seed,
                c,
                d,
                ball,
                selection,
                levels,
            } => match domain {
                Domain::Ball => ball.hash(key),
                Domain::CapacitySelection => selection.hash(key),
                Domain::Level(l) => levels[l as usize]
                    .get_or_init(|| {
                        MixedTabulation::new(*seed, domain.index(), *c, *d)
                            .expect("parameters validated at construction")
                    })
                    .hash(key),
            },
        }
    }

    /// Position (and priority) of a ball.
    pub fn ball(&self, ball_id: u64) -> u64 {
        self.raw(Domain::Ball, ball_id)
    }

    /// Position of a bin's virtual bin at `level` (`level == k` is overflow).
    pub fn virtual_bin(&self, bin_id: u64, level: u32) -> Result<u128> {
        if level > self.universe.levels() {
            return Err(Error::LevelOutOfRange {
                level,
                levels: self.universe.levels(),
            });
        }
        self.universe
            .place(level, self.raw(Domain::Level(level), bin_id))
    }

    /// Hash deciding which bins are big under dynamic capacities.
    pub fn capacity_selection(&self, bin_id: u64) -> u64 {
        self.raw(Domain::CapacitySelection, bin_id)
    }
}
