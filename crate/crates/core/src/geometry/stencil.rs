//! Second-order finite-difference stencils on the uniform grid `x_j = j/N`.
//!
//! Interior nodes use centered stencils (3 points for orders 1-2, 5 points
//! for orders 3-4). Nodes too close to an end use a one-sided window of
//! `order + 2` points anchored at that end, which keeps the truncation error
//! at O(h²) there as well.

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;
pub const MAX_WIDTH: usize = MAX_ORDER + 2;

/// Finite-difference weights for one node, already scaled by `h^-order`.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub start: usize,
    pub len: usize,
    pub weights: [f64; MAX_WIDTH],
}

impl Stencil {
    pub fn weights(&self) -> &[f64] {
        &self.weights[..self.len]
    }

    pub fn nodes(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

pub fn min_nodes(order: usize) -> usize {
    2 * order + 4
}

pub fn check_grid(n: usize, order: usize) -> Result<()> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::InvalidArgument(format!("derivative order {order} not in 1..=4")));
    }
    if n < min_nodes(order) {
        return Err(Error::GridTooSmall {
            n,
            required: min_nodes(order),
        });
    }
    Ok(())
}

fn half_width(order: usize) -> usize {
    if order <= 2 {
        1
    } else {
        2
    }
}

/// Stencil for the derivative of the given order at `node` on a grid with
/// `n` intervals. Callers must have validated the grid with [`check_grid`].
pub fn stencil(n: usize, order: usize, node: usize) -> Stencil {
    debug_assert!(node <= n);
    let r = half_width(order);
    let (start, len) = if node >= r && node + r <= n {
        (node - r, 2 * r + 1)
    } else if node < r {
        (0, order + 2)
    } else {
        (n - order - 1, order + 2)
    };
    let offsets: Vec<f64> = (start..start + len).map(|j| j as f64 - node as f64).collect();
    let w = fornberg(&offsets, order).into_iter().map(snap);
    let scale = (n as f64).powi(order as i32);
    let mut weights = [0.0; MAX_WIDTH];
    for (dst, src) in weights.iter_mut().zip(w) {
        *dst = src * scale;
    }
    Stencil { start, len, weights }
}

/// Weights of an `order`-th derivative at `node` from a window of `width`
/// consecutive nodes, as centered as the ends allow. Truncation error is
/// O(h^(width - order)); used where accuracy matters more than locality.
pub fn wide_stencil(n: usize, order: usize, node: usize, width: usize) -> (usize, Vec<f64>) {
    debug_assert!(width <= n + 1 && width > order);
    let start = node.saturating_sub(width / 2).min(n + 1 - width);
    let offsets: Vec<f64> = (start..start + width).map(|j| j as f64 - node as f64).collect();
    let scale = (n as f64).powi(order as i32);
    (
        start,
        fornberg(&offsets, order).into_iter().map(|w| w * scale).collect(),
    )
}

// Unit-spacing weights of these stencils are small dyadic rationals. Removing
// the recursion's rounding makes differences of exactly linear data vanish
// exactly, which the stationary configurations rely on.
fn snap(w: f64) -> f64 {
    let scaled = w * 48.0;
    let r = scaled.round();
    if (scaled - r).abs() < 1e-9 {
        r / 48.0
    } else {
        w
    }
}

/// Fornberg's recursion for weights of the `m`-th derivative at 0 from
/// samples at the given (unit-spaced) offsets.
fn fornberg(offsets: &[f64], m: usize) -> Vec<f64> {
    let n = offsets.len();
    // c[i][k]: weight of point i for the k-th derivative
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}
