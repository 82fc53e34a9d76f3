//! One-dimensional maximisation of expected margin over the action interval.

use super::conversion::Acceptance;
use crate::market::MarketVariables;

pub const ACTION_MIN: f64 = 1.0;
pub const ACTION_MAX: f64 = 2.0;
pub const GRID_POINTS: usize = 64;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximises `f` on `[lo, hi]`: a uniform grid scan locates the best point, then
/// golden-section search refines inside its neighbouring cells. The result is
/// never worse than the best grid point.
pub fn maximize_on_interval(f: impl Fn(f64) -> f64, lo: f64, hi: f64, grid_points: usize) -> f64 {
    assert!(grid_points >= 2 && hi > lo);
    let step = (hi - lo) / (grid_points - 1) as f64;
    let grid = |i: usize| {
        if i + 1 == grid_points {
            hi
        } else {
            lo + step * i as f64
        }
    };
    let (mut best_i, mut best_v) = (0, f64::NEG_INFINITY);
    for i in 0..grid_points {
        let v = f(grid(i));
        if v > best_v {
            best_i = i;
            best_v = v;
        }
    }
    let mut a = grid(best_i.saturating_sub(1));
    let mut b = grid((best_i + 1).min(grid_points - 1));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    if f(x) >= best_v {
        x
    } else {
        grid(best_i)
    }
}

/// `argmax_{a ∈ [1, 2]} p(m, a) · (a − k)`.
pub fn optimize_action<P: Acceptance + ?Sized>(p: &P, m: &MarketVariables, k: f64) -> f64 {
    let curve = p.at_market(*m);
    maximize_on_interval(|a| curve(a) * (a - k), ACTION_MIN, ACTION_MAX, GRID_POINTS)
}
