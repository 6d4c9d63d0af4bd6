//! Discrete differential geometry of a single curve sampled on `[0, 1]`.
//!
//! A [`CurveSample`] caches the finite-difference derivatives of its position
//! up to fourth order; everything else (frame, curvature and its arclength
//! derivatives, energy density) is evaluated node-wise from that cache, so all
//! quantities at a node share one consistent discretization.

pub mod stencil;

use std::ops::{Add, Mul, Sub};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// Smallest admissible number of grid intervals.
pub const MIN_INTERVALS: usize = 16;

/// Default floor for `min |γ_x|`.
pub const DEFAULT_REGULARITY_FLOOR: f64 = 1e-6;

/// Rotation by +π/2: `(a, b) -> (-b, a)`.
#[inline]
pub fn rot90(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Values that can live on a grid and be differentiated.
pub trait GridValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + PartialEq {
    fn zero() -> Self;
    fn norm(&self) -> f64;
    fn is_finite(&self) -> bool;
}

impl GridValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl GridValue for Vec2 {
    fn zero() -> Self {
        Vec2::zeros()
    }
    fn norm(&self) -> f64 {
        Vector2::norm(self)
    }
    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Values at the `N + 1` nodes `x_j = j / N` of the uniform grid on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    values: Vec<T>,
}

impl<T: GridValue> GridFunction<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < MIN_INTERVALS + 1 {
            return Err(Error::GridTooSmall {
                n: values.len().saturating_sub(1),
                required: MIN_INTERVALS,
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        Ok(Self { values })
    }

    /// Samples `f` at the grid nodes.
    pub fn sample(n: usize, f: impl Fn(f64) -> T) -> Result<Self> {
        Self::new((0..=n).map(|j| f(j as f64 / n as f64)).collect())
    }

    // Internal constructor for values derived from an already valid grid.
    pub(crate) fn from_vec_unchecked(values: Vec<T>) -> Self {
        Self { values }
    }

    /// Number of grid intervals.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n() as f64
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn first(&self) -> T {
        self.values[0]
    }

    pub fn last(&self) -> T {
        self.values[self.n()]
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn map<U: GridValue>(&self, f: impl Fn(T) -> U) -> GridFunction<U> {
        GridFunction::from_vec_unchecked(self.values.iter().map(|&v| f(v)).collect())
    }
}

impl<T> std::ops::Index<usize> for GridFunction<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

/// Derivative of the given order (1-4), second-order accurate at every node.
pub fn finite_difference<T: GridValue>(g: &GridFunction<T>, order: usize) -> Result<GridFunction<T>> {
    let n = g.n();
    stencil::check_grid(n, order)?;
    let vals = g.values();
    let out = (0..=n)
        .map(|j| {
            let s = stencil::stencil(n, order, j);
            s.nodes()
                .zip(s.weights())
                .fold(T::zero(), |acc, (k, &w)| acc + vals[k] * w)
        })
        .collect();
    Ok(GridFunction::from_vec_unchecked(out))
}

/// Composite trapezoid rule on the grid.
pub fn trapezoid(values: &[f64]) -> f64 {
    let n = values.len() - 1;
    let h = 1.0 / n as f64;
    let inner: f64 = values[1..n].iter().sum();
    h * (inner + 0.5 * (values[0] + values[n]))
}

/// Weight of the length term in the elastic energy. Any real value is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub mu: f64,
}

impl EnergyParams {
    pub fn new(mu: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidArgument(format!("mu must be finite, got {mu}")));
        }
        Ok(Self { mu })
    }
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self { mu: 1.0 }
    }
}

/// Derivatives `γ_x .. γ_xxxx` at a single node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub d1: Vec2,
    pub d2: Vec2,
    pub d3: Vec2,
    pub d4: Vec2,
}

/// Local geometry at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFrame {
    pub speed: f64,
    pub tau: Vec2,
    pub nu: Vec2,
    pub k: f64,
    pub k_s: f64,
    pub k_ss: f64,
}

impl Jet {
    /// Frame and curvature derivatives by the chain rule, with
    /// `k = (γ_x × γ_xx) / |γ_x|³` and `f_s = f_x / |γ_x|`.
    pub fn frame(&self) -> PointFrame {
        let (g1, g2, g3, g4) = (self.d1, self.d2, self.d3, self.d4);
        let w = g1.norm_squared();
        let v = w.sqrt();
        let c = cross(g1, g2);
        let c1 = cross(g1, g3);
        let c2 = cross(g2, g3) + cross(g1, g4);
        let w1 = 2.0 * g1.dot(&g2);
        let w2 = 2.0 * (g2.norm_squared() + g1.dot(&g3));
        let w_32 = w * v; // w^{3/2}
        let w_52 = w_32 * w;
        let w_72 = w_52 * w;
        let k = c / w_32;
        let k_x = c1 / w_32 - 1.5 * c * w1 / w_52;
        let k_xx = c2 / w_32 - 3.0 * c1 * w1 / w_52 + 3.75 * c * w1 * w1 / w_72 - 1.5 * c * w2 / w_52;
        let tau = g1 / v;
        PointFrame {
            speed: v,
            tau,
            nu: rot90(tau),
            k,
            k_s: k_x / v,
            k_ss: (k_xx - k_x * w1 / (2.0 * w)) / w,
        }
    }
}

/// A planar curve sampled on the uniform grid, with cached derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample {
    position: GridFunction<Vec2>,
    derivatives: [GridFunction<Vec2>; 4],
    speed: GridFunction<f64>,
}

impl CurveSample {
    pub fn new(position: GridFunction<Vec2>) -> Result<Self> {
        stencil::check_grid(position.n(), 4)?;
        let d1 = finite_difference(&position, 1)?;
        let d2 = finite_difference(&position, 2)?;
        let d3 = finite_difference(&position, 3)?;
        let d4 = finite_difference(&position, 4)?;
        let speed = d1.map(|v| v.norm());
        Ok(Self {
            position,
            derivatives: [d1, d2, d3, d4],
            speed,
        })
    }

    pub fn from_points(points: Vec<Vec2>) -> Result<Self> {
        Self::new(GridFunction::new(points)?)
    }

    pub fn sample(n: usize, f: impl Fn(f64) -> Vec2) -> Result<Self> {
        Self::new(GridFunction::sample(n, f)?)
    }

    pub fn n(&self) -> usize {
        self.position.n()
    }

    pub fn position(&self) -> &GridFunction<Vec2> {
        &self.position
    }

    pub fn points(&self) -> &[Vec2] {
        self.position.values()
    }

    /// Cached derivative of order 1-4.
    pub fn derivative(&self, order: usize) -> &GridFunction<Vec2> {
        &self.derivatives[order - 1]
    }

    pub fn speed(&self) -> &GridFunction<f64> {
        &self.speed
    }

    pub fn min_speed(&self) -> f64 {
        self.speed.values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn jet(&self, node: usize) -> Jet {
        Jet {
            d1: self.derivatives[0][node],
            d2: self.derivatives[1][node],
            d3: self.derivatives[2][node],
            d4: self.derivatives[3][node],
        }
    }

    /// Node index of the endpoint `x = 0` (`false`) or `x = 1` (`true`).
    pub fn end_node(&self, at_one: bool) -> usize {
        if at_one {
            self.n()
        } else {
            0
        }
    }

    /// Fails if `min |γ_x| < threshold`. `curve` labels the error.
    pub fn check_regular(&self, threshold: f64, curve: usize) -> Result<()> {
        let (node, speed) = self
            .speed
            .values()
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |best, (j, s)| if s < best.1 { (j, s) } else { best },
            );
        if !(speed >= threshold) {
            return Err(Error::Irregular {
                curve,
                node,
                speed,
                threshold,
            });
        }
        Ok(())
    }

    pub fn frame_at(&self, node: usize) -> PointFrame {
        self.jet(node).frame()
    }

    /// Applies a map to every point (used for rigid motions). Derivatives are
    /// recomputed from the new positions.
    pub fn map_points(&self, f: impl Fn(Vec2) -> Vec2) -> Result<Self> {
        Self::new(self.position.map(f))
    }

    pub fn map_points_indexed(&self, f: impl Fn(usize, Vec2) -> Vec2) -> Result<Self> {
        Self::new(GridFunction::new(
            self.points().iter().enumerate().map(|(j, &p)| f(j, p)).collect(),
        )?)
    }

    /// Position at an arbitrary parameter `s` in `[0, 1]` by degree-5 Lagrange
    /// interpolation on the six nearest nodes. Returns the node value exactly
    /// when `s` is a grid point.
    pub fn interpolate(&self, s: f64) -> Vec2 {
        let n = self.n();
        let t = s.clamp(0.0, 1.0) * n as f64;
        let j = (t.floor() as usize).min(n - 1);
        let start = j.saturating_sub(2).min(n - 5);
        let pts = self.points();
        let mut out = Vec2::zeros();
        for a in start..start + 6 {
            let mut l = 1.0;
            for b in start..start + 6 {
                if b != a {
                    l *= (t - b as f64) / (a as f64 - b as f64);
                }
            }
            out += pts[a] * l;
        }
        out
    }
}

/// Unit tangent, unit normal, curvature and its first two arclength
/// derivatives on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub tau: GridFunction<Vec2>,
    pub nu: GridFunction<Vec2>,
    pub k: GridFunction<f64>,
    pub k_s: GridFunction<f64>,
    pub k_ss: GridFunction<f64>,
}

pub fn frame(curve: &CurveSample) -> Result<Frame> {
    curve.check_regular(DEFAULT_REGULARITY_FLOOR, 0)?;
    let pts: Vec<PointFrame> = (0..=curve.n()).map(|j| curve.frame_at(j)).collect();
    let grid = |f: &dyn Fn(&PointFrame) -> f64| GridFunction::from_vec_unchecked(pts.iter().map(f).collect::<Vec<_>>());
    Ok(Frame {
        tau: GridFunction::from_vec_unchecked(pts.iter().map(|p| p.tau).collect()),
        nu: GridFunction::from_vec_unchecked(pts.iter().map(|p| p.nu).collect()),
        k: grid(&|p| p.k),
        k_s: grid(&|p| p.k_s),
        k_ss: grid(&|p| p.k_ss),
    })
}

/// `∫ (k² + μ) ds` over one curve, by the trapezoid rule in `x`.
pub fn elastic_energy(curve: &CurveSample, params: &EnergyParams) -> Result<f64> {
    curve.check_regular(DEFAULT_REGULARITY_FLOOR, 0)?;
    Ok(energy_unchecked(curve, params.mu))
}

pub(crate) fn energy_unchecked(curve: &CurveSample, mu: f64) -> f64 {
    let density: Vec<f64> = (0..=curve.n())
        .map(|j| {
            let jet = curve.jet(j);
            let w = jet.d1.norm_squared();
            let v = w.sqrt();
            let k = cross(jet.d1, jet.d2) / (w * v);
            (k * k + mu) * v
        })
        .collect();
    trapezoid(&density)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HolderDirection {
    Time,
    Space,
}

/// Discrete Hölder seminorm `[u]_{ρ,0}` (time) or `[u]_{0,ρ}` (space): the
/// largest difference quotient over all pairs of samples.
pub fn holder_seminorm<T: GridValue>(
    times: &[f64],
    slices: &[GridFunction<T>],
    rho: f64,
    direction: HolderDirection,
) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("rho = {rho} not in (0, 1)")));
    }
    if slices.is_empty() || times.len() != slices.len() {
        return Err(Error::InvalidArgument("need one time value per slice".into()));
    }
    let n = slices[0].n();
    if slices.iter().any(|s| s.n() != n) {
        return Err(Error::GridMismatch("slices have different grids".into()));
    }
    let mut best = 0.0_f64;
    match direction {
        HolderDirection::Time => {
            if slices.len() < 2 {
                return Err(Error::InvalidArgument("need at least two time slices".into()));
            }
            for a in 0..slices.len() {
                for b in a + 1..slices.len() {
                    let dt = (times[a] - times[b]).abs();
                    if dt == 0.0 {
                        return Err(Error::InvalidArgument("repeated time value".into()));
                    }
                    let denom = dt.powf(rho);
                    for j in 0..=n {
                        best = best.max((slices[a][j] - slices[b][j]).norm() / denom);
                    }
                }
            }
        }
        HolderDirection::Space => {
            let h = 1.0 / n as f64;
            for s in slices {
                for i in 0..=n {
                    for j in i + 1..=n {
                        let denom = ((j - i) as f64 * h).powf(rho);
                        best = best.max((s[i] - s[j]).norm() / denom);
                    }
                }
            }
        }
    }
    Ok(best)
}
