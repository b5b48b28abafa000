//! Tolerances for the statistical checks. These are calibration choices for
//! desk-scale runs, not derived quantities.

/// Lower edge of the band for ratios against `f`.
pub const BAND_LOW: f64 = 1.0 / 32.0;
/// Upper edge of the band for ratios against `f`.
pub const BAND_HIGH: f64 = 32.0;
/// `K` in the search bound `K·log₂(1/ε)` for geometric levels.
pub const SEARCH_LOG_FACTOR: f64 = 8.0;
/// Mean bins visited that counts as constant cost.
pub const CONSTANT_COST: f64 = 8.0;
/// Largest insert cost ratio between consecutive halvings of ε.
pub const HALVING_RATIO: f64 = 2.5;
/// Required insert cost advantage of geometric levels over a single level.
pub const SINGLE_LEVEL_SPEEDUP: f64 = 2.0;
/// Significance level of distribution comparisons.
pub const KS_ALPHA: f64 = 0.01;

/// Whether `ratio` lies in `[BAND_LOW, BAND_HIGH]`.
pub fn in_band(ratio: f64) -> bool {
    (BAND_LOW..=BAND_HIGH).contains(&ratio)
}
