//! The 11-level progress grid `{0.0, 0.1, ..., 1.0}`.

pub const LEVELS: usize = 11;
const STEPS: f64 = (LEVELS - 1) as f64;
const ON_GRID_TOL: f64 = 1e-9;

/// Grid value for class index `k` (`0..=10`).
pub fn value(k: usize) -> f64 {
    debug_assert!(k < LEVELS);
    k as f64 / STEPS
}

/// Nearest grid class with ties rounded up; input is clamped to `[0, 1]`.
pub fn nearest_class(p: f64) -> usize {
    let scaled = (p.clamp(0.0, 1.0) * STEPS * 1e9).round() / 1e9;
    ((scaled + 0.5).floor() as usize).min(LEVELS - 1)
}

/// `quantize_11(clamp01(p))`: nearest multiple of 0.1, ties up.
pub fn quantize(p: f64) -> f64 {
    value(nearest_class(p))
}

/// Class index of an on-grid label, `None` when off-grid.
pub fn class_of(label: f64) -> Option<usize> {
    if !label.is_finite() || !(-ON_GRID_TOL..=1.0 + ON_GRID_TOL).contains(&label) {
        return None;
    }
    let k = (label * STEPS).round();
    ((label * STEPS - k).abs() < ON_GRID_TOL * STEPS).then_some(k as usize)
}

pub fn is_on_grid(label: f64) -> bool {
    class_of(label).is_some()
}
