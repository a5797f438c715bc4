//! Seeded two-feature test functions: a 20x20 value lattice on
//! `[0, 255]^2` interpolated with bicubic Catmull-Rom, peaking at 1.0
//! near (127, 127) with every other lattice value below 0.5.
//!
//! 127 does not fall on a 20-point uniform lattice, so the peak is pinned
//! to the nearest node (index 9, coordinate 9 * 255/19 ~ 120.79). The four
//! axis neighbors of the peak node are mirrored during sampling
//! (`g[10][9] = g[8][9]`, `g[9][10] = g[9][8]`), which makes the peak an
//! exact critical point of the interpolated surface: the Catmull-Rom
//! derivative at a node is the centered difference of its neighbors.

use crate::error::{Error, Result};
use crate::rng::{substream, unit_f64};

pub const GRID_N: usize = 20;
pub const DOMAIN_MAX: f64 = 255.0;
/// Lattice index of the pinned peak: `round(127 / (255/19))`.
pub const PEAK_NODE: usize = 9;

const SPACING: f64 = DOMAIN_MAX / (GRID_N as f64 - 1.0);

#[derive(Debug, Clone)]
pub struct GridFunction {
    /// Row-major lattice values; index `(ix, iy)` at `iy * GRID_N + ix`.
    values: Vec<f64>,
}

impl GridFunction {
    /// Sample a function: off-peak values uniform in `[0, 0.5)`, peak node
    /// pinned to exactly 1.0, axis neighbors of the peak mirrored so the
    /// surface attains its maximum with zero gradient at the peak node.
    pub fn seeded(seed: u64) -> GridFunction {
        let mut rng = substream(seed, "grid-function");
        let mut values: Vec<f64> = (0..GRID_N * GRID_N).map(|_| 0.5 * unit_f64(&mut rng)).collect();
        let at = |ix: usize, iy: usize| iy * GRID_N + ix;
        values[at(PEAK_NODE + 1, PEAK_NODE)] = values[at(PEAK_NODE - 1, PEAK_NODE)];
        values[at(PEAK_NODE, PEAK_NODE + 1)] = values[at(PEAK_NODE, PEAK_NODE - 1)];
        values[at(PEAK_NODE, PEAK_NODE)] = 1.0;
        GridFunction { values }
    }

    /// Build from explicit lattice values (row-major, `GRID_N`^2 of them).
    /// No pinning or mirroring is applied; callers own the invariants.
    pub fn from_values(values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != GRID_N * GRID_N {
            return Err(Error::DimensionMismatch(format!(
                "grid needs {} values, got {}",
                GRID_N * GRID_N,
                values.len()
            )));
        }
        Ok(GridFunction { values })
    }

    pub fn lattice_value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * GRID_N + ix]
    }

    pub fn set_lattice_value(&mut self, ix: usize, iy: usize, v: f64) {
        self.values[iy * GRID_N + ix] = v;
    }

    /// Domain coordinates of the pinned peak (both axes equal).
    pub fn peak_coord() -> f64 {
        PEAK_NODE as f64 * SPACING
    }

    /// Spacing between lattice nodes in domain units.
    pub fn spacing() -> f64 {
        SPACING
    }

    fn check_range(x1: f64, x2: f64) -> Result<()> {
        for v in [x1, x2] {
            if !(0.0..=DOMAIN_MAX).contains(&v) {
                return Err(Error::Parameter(format!("grid input {v} outside [0, {DOMAIN_MAX}]")));
            }
        }
        Ok(())
    }

    /// Catmull-Rom interpolation of the lattice, clamped-edge extension.
    pub fn eval(&self, x1: f64, x2: f64) -> Result<f64> {
        Self::check_range(x1, x2)?;
        let (i1, t1) = cell_of(x1);
        let (i2, t2) = cell_of(x2);
        let wx = cr_weights(t1);
        let wy = cr_weights(t2);
        Ok(self.tensor(i1, i2, &wx, &wy))
    }

    /// Analytic gradient `(df/dx1, df/dx2)` of the interpolated surface,
    /// in domain units.
    pub fn gradient(&self, x1: f64, x2: f64) -> Result<(f64, f64)> {
        Self::check_range(x1, x2)?;
        let (i1, t1) = cell_of(x1);
        let (i2, t2) = cell_of(x2);
        let wx = cr_weights(t1);
        let wy = cr_weights(t2);
        let dwx = cr_weight_derivs(t1);
        let dwy = cr_weight_derivs(t2);
        let gx = self.tensor(i1, i2, &dwx, &wy) / SPACING;
        let gy = self.tensor(i1, i2, &wx, &dwy) / SPACING;
        Ok((gx, gy))
    }

    fn tensor(&self, i1: i64, i2: i64, wx: &[f64; 4], wy: &[f64; 4]) -> f64 {
        let mut acc = 0.0;
        for (dy, wyv) in wy.iter().enumerate() {
            let iy = clamp_index(i2 - 1 + dy as i64);
            let mut row = 0.0;
            for (dx, wxv) in wx.iter().enumerate() {
                let ix = clamp_index(i1 - 1 + dx as i64);
                row += wxv * self.values[iy * GRID_N + ix];
            }
            acc += wyv * row;
        }
        acc
    }
}

/// Map a domain coordinate to (cell index, fractional position).
fn cell_of(x: f64) -> (i64, f64) {
    let u = x / SPACING;
    let mut i = u.floor() as i64;
    if i > GRID_N as i64 - 2 {
        i = GRID_N as i64 - 2; // x == DOMAIN_MAX evaluates at t == 1
    }
    (i, u - i as f64)
}

fn clamp_index(i: i64) -> usize {
    i.clamp(0, GRID_N as i64 - 1) as usize
}

/// Catmull-Rom basis weights for neighbors `p_{i-1}, p_i, p_{i+1}, p_{i+2}`.
fn cr_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t + 2.0 * t2 - t3),
        0.5 * (2.0 - 5.0 * t2 + 3.0 * t3),
        0.5 * (t + 4.0 * t2 - 3.0 * t3),
        0.5 * (-t2 + t3),
    ]
}

fn cr_weight_derivs(t: f64) -> [f64; 4] {
    let t2 = t * t;
    [
        0.5 * (-1.0 + 4.0 * t - 3.0 * t2),
        0.5 * (-10.0 * t + 9.0 * t2),
        0.5 * (1.0 + 8.0 * t - 9.0 * t2),
        0.5 * (-2.0 * t + 3.0 * t2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_evaluates_to_exactly_one() {
        for seed in 0..50 {
            let g = GridFunction::seeded(seed);
            let p = GridFunction::peak_coord();
            assert_eq!(g.eval(p, p).unwrap(), 1.0);
        }
    }

    #[test]
    fn off_peak_lattice_values_stay_below_half() {
        for seed in 0..50 {
            let g = GridFunction::seeded(seed);
            for iy in 0..GRID_N {
                for ix in 0..GRID_N {
                    if (ix, iy) != (PEAK_NODE, PEAK_NODE) {
                        assert!(g.lattice_value(ix, iy) < 0.5, "seed {seed} node ({ix},{iy})");
                    }
                }
            }
        }
    }

    #[test]
    fn gradient_at_peak_is_exactly_zero() {
        for seed in 0..200 {
            let g = GridFunction::seeded(seed);
            let p = GridFunction::peak_coord();
            let (gx, gy) = g.gradient(p, p).unwrap();
            assert_eq!(gx, 0.0, "seed {seed}");
            assert_eq!(gy, 0.0, "seed {seed}");
        }
    }

    #[test]
    fn lattice_nodes_interpolate_exactly() {
        let g = GridFunction::seeded(41);
        for iy in (0..GRID_N).step_by(3) {
            for ix in (0..GRID_N).step_by(3) {
                let v = g.eval(ix as f64 * SPACING, iy as f64 * SPACING).unwrap();
                assert!((v - g.lattice_value(ix, iy)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn midpoint_matches_closed_form_catmull_rom() {
        let g = GridFunction::seeded(17);
        // Evaluate at the midpoint of cell (4..5, 7..8) and compare with
        // the spline form 0.5 * [2 p1 + (-p0+p2) t + (2p0-5p1+4p2-p3) t^2
        // + (-p0+3p1-3p2+p3) t^3] applied per row in x, then across rows
        // in y.
        let spline = |p: [f64; 4], t: f64| -> f64 {
            0.5 * (2.0 * p[1]
                + (-p[0] + p[2]) * t
                + (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * t * t
                + (-p[0] + 3.0 * p[1] - 3.0 * p[2] + p[3]) * t * t * t)
        };
        let t = 0.5;
        let (cx, cy) = (4usize, 7usize);
        let mut rows = [0.0; 4];
        for (dy, row) in rows.iter_mut().enumerate() {
            let iy = cy - 1 + dy;
            let p = [
                g.lattice_value(cx - 1, iy),
                g.lattice_value(cx, iy),
                g.lattice_value(cx + 1, iy),
                g.lattice_value(cx + 2, iy),
            ];
            *row = spline(p, t);
        }
        let want = spline(rows, t);
        let got = g
            .eval((cx as f64 + t) * SPACING, (cy as f64 + t) * SPACING)
            .unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = GridFunction::seeded(29);
        let mut rng = crate::rng::substream(1, "grid-probe");
        let h = 1e-3;
        for _ in 0..50 {
            let x = h + crate::rng::unit_f64(&mut rng) * (DOMAIN_MAX - 2.0 * h);
            let y = h + crate::rng::unit_f64(&mut rng) * (DOMAIN_MAX - 2.0 * h);
            let (gx, gy) = g.gradient(x, y).unwrap();
            let fdx = (g.eval(x + h, y).unwrap() - g.eval(x - h, y).unwrap()) / (2.0 * h);
            let fdy = (g.eval(x, y + h).unwrap() - g.eval(x, y - h).unwrap()) / (2.0 * h);
            assert!((gx - fdx).abs() < 1e-5, "x-grad at ({x:.2},{y:.2})");
            assert!((gy - fdy).abs() < 1e-5, "y-grad at ({x:.2},{y:.2})");
        }
    }

    #[test]
    fn constant_grid_has_zero_gradient_everywhere() {
        let g = GridFunction::from_values(vec![0.3; GRID_N * GRID_N]).unwrap();
        for (x, y) in [(0.0, 0.0), (7.5, 200.2), (127.0, 127.0), (255.0, 255.0)] {
            let v = g.eval(x, y).unwrap();
            assert!((v - 0.3).abs() < 1e-12);
            let (gx, gy) = g.gradient(x, y).unwrap();
            assert!(gx.abs() < 1e-12 && gy.abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_bump_has_zero_gradient_at_its_center() {
        let mut g = GridFunction::from_values(vec![0.1; GRID_N * GRID_N]).unwrap();
        g.set_lattice_value(5, 5, 0.9);
        let v = 5.0 * SPACING;
        let (gx, gy) = g.gradient(v, v).unwrap();
        assert_eq!(gx, 0.0);
        assert_eq!(gy, 0.0);
    }

    #[test]
    fn out_of_range_inputs_are_rejected() {
        let g = GridFunction::seeded(3);
        assert!(g.eval(-0.1, 10.0).is_err());
        assert!(g.eval(10.0, 255.1).is_err());
        assert!(g.gradient(-1.0, 0.0).is_err());
    }

    #[test]
    fn same_seed_gives_identical_functions() {
        let a = GridFunction::seeded(77);
        let b = GridFunction::seeded(77);
        assert_eq!(a.values, b.values);
    }
}
