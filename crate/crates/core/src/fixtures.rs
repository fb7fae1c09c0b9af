//! Standard test inputs on a circle grid.

use crate::spectral::{BoundaryFn, CircleGrid};

/// `sign(sin θ)`, taking the value 0 at the two jumps.
pub fn square_wave(grid: CircleGrid) -> BoundaryFn {
    let n = grid.n();
    let v = (0..n)
        .map(|j| match j {
            0 => 0.0,
            j if j == n / 2 => 0.0,
            j if j < n / 2 => 1.0,
            _ => -1.0,
        })
        .collect();
    BoundaryFn::from_values_real(grid, v)
}

/// `cos θ`.
pub fn cosine(grid: CircleGrid) -> BoundaryFn {
    BoundaryFn::from_real_fn(grid, f64::cos)
}

/// `ln|2 sin(θ/2)|`, with the singular sample at θ = 0 replaced by its
/// neighbour's value.
pub fn log_singularity(grid: CircleGrid) -> BoundaryFn {
    let n = grid.n();
    let f = |j: usize| (2.0 * (grid.point(j) / 2.0).sin()).abs().ln();
    let v = (0..n).map(|j| if j == 0 { f(1) } else { f(j) }).collect();
    BoundaryFn::from_values_real(grid, v)
}

/// Looks up a fixture by name (`square`, `cosine`, `log`).
pub fn by_name(name: &str, grid: CircleGrid) -> Option<BoundaryFn> {
    match name {
        "square" | "square-wave" => Some(square_wave(grid)),
        "cosine" | "cos" => Some(cosine(grid)),
        "log" | "log-singularity" => Some(log_singularity(grid)),
        _ => None,
    }
}
