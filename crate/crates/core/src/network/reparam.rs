//! Reparametrization of a geometrically admissible network into an admissible
//! initial parametrization.
//!
//! Each curve `σ` is composed with a diffeomorphism `θ` of `[0, 1]` that agrees
//! with a quartic Taylor polynomial near every constrained end and with the
//! identity in the interior. The Taylor data start from closed-form values and
//! are then refined so that the discrete conditions of the composed curve hold
//! on the grid, not only in the continuum limit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{geometric_admissibility, End, Flavor, NetworkState, Topology, GRID_TOLERANCE};
use crate::error::{Error, Result};
use crate::geometry::stencil::stencil;
use crate::geometry::{CurveSample, EnergyParams, GridFunction, Jet, Vec2};
use crate::velocity::{normal_scalar_at, parametric_vector_at, tangential_scalar_at};

const INITIAL_RADIUS: f64 = 0.25;
const NEWTON_ITERATIONS: usize = 40;

/// Value and first four derivatives of `θ` at an end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorData {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

impl TaylorData {
    fn at(end: End, d2: f64, d4: f64) -> Self {
        Self {
            value: match end {
                End::Zero => 0.0,
                End::One => 1.0,
            },
            d1: 1.0,
            d2,
            d3: 1.0,
            d4,
        }
    }

    fn identity(end: End) -> Self {
        Self {
            d3: 0.0,
            ..Self::at(end, 0.0, 0.0)
        }
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let d = x - self.value;
        let v = self.value + d * (self.d1 + d * (self.d2 / 2.0 + d * (self.d3 / 6.0 + d * self.d4 / 24.0)));
        let dv = self.d1 + d * (self.d2 + d * (self.d3 / 2.0 + d * self.d4 / 6.0));
        (v, dv)
    }
}

fn smoothstep(t: f64) -> (f64, f64) {
    let s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
    let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    (s, ds)
}

/// Cut-off that equals 1 on `[0, 1/2]`, 0 on `[1, ∞)`, quintic in between.
fn bump(u: f64) -> (f64, f64) {
    if u <= 0.5 {
        (1.0, 0.0)
    } else if u >= 1.0 {
        (0.0, 0.0)
    } else {
        let (s, ds) = smoothstep(2.0 * u - 1.0);
        (1.0 - s, -2.0 * ds)
    }
}

/// Interior nodes next to each end whose `θ` values take part in the final
/// node-level refinement: `1..=5` and `n-1` down to `n-5`.
const NUDGED: usize = 5;

#[derive(Debug, Clone, Copy)]
struct Blend {
    ends: [TaylorData; 2],
    radius: f64,
    /// Offsets added to `θ` at the [`NUDGED`] nodes next to each end.
    nudge: [[f64; NUDGED]; 2],
}

impl Blend {
    fn eval(&self, x: f64) -> (f64, f64) {
        let r = self.radius;
        let (b0, db0) = bump(x / r);
        let (b1, db1) = bump((1.0 - x) / r);
        let mut v = x;
        let mut dv = 1.0;
        if b0 != 0.0 || db0 != 0.0 {
            let (t, dt) = self.ends[0].eval(x);
            v += b0 * (t - x);
            dv += db0 / r * (t - x) + b0 * (dt - 1.0);
        }
        if b1 != 0.0 || db1 != 0.0 {
            let (t, dt) = self.ends[1].eval(x);
            v += b1 * (t - x);
            dv += -db1 / r * (t - x) + b1 * (dt - 1.0);
        }
        (v, dv)
    }

    fn min_derivative(&self, samples: usize) -> f64 {
        (0..=samples)
            .map(|k| self.eval(k as f64 / samples as f64).1)
            .fold(f64::INFINITY, f64::min)
    }

    fn node_value(&self, j: usize, n: usize) -> f64 {
        if j == 0 {
            return 0.0;
        }
        if j == n {
            return 1.0;
        }
        let mut v = self.eval(j as f64 / n as f64).0;
        if j <= NUDGED {
            v += self.nudge[0][j - 1];
        }
        if j >= n - NUDGED {
            v += self.nudge[1][n - 1 - j];
        }
        v
    }

    fn node_values(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|j| self.node_value(j, n)).collect()
    }
}

/// The maps `θ^i` and their Taylor data at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ReparamMap {
    theta: [GridFunction<f64>; 3],
    taylor: [[TaylorData; 2]; 3],
    radius: f64,
    min_derivative: f64,
}

impl ReparamMap {
    pub fn theta(&self) -> &[GridFunction<f64>; 3] {
        &self.theta
    }

    pub fn taylor(&self, curve: usize, end: End) -> TaylorData {
        self.taylor[curve][end as usize]
    }

    /// Radius of the blending region around each end.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `min θ_x` over a sampling much finer than the grid.
    pub fn min_derivative(&self) -> f64 {
        self.min_derivative
    }

    /// The composed network `σ^i ∘ θ^i`.
    pub fn apply(&self, net: &NetworkState) -> Result<NetworkState> {
        if net.n() != self.theta[0].n() {
            return Err(Error::GridMismatch("map and network grids differ".into()));
        }
        let pts = [0, 1, 2].map(|i| {
            self.theta[i]
                .values()
                .iter()
                .map(|&s| net.curve(i).interpolate(s))
                .collect::<Vec<_>>()
        });
        net.with_points(pts)
    }
}

/// Jet of the composed curve at an end node, evaluated with the same one-sided
/// stencils the checkers use.
fn composed_jet(curve: &CurveSample, blend: &Blend, end: End) -> Jet {
    let n = curve.n();
    let node = end.node(n);
    let window: Vec<usize> = match end {
        End::Zero => (0..=5).collect(),
        End::One => (n - 5..=n).collect(),
    };
    let first = window[0];
    let pts: Vec<Vec2> = window
        .iter()
        .map(|&j| curve.interpolate(blend.node_value(j, n)))
        .collect();
    let d = |order: usize| {
        let st = stencil(n, order, node);
        st.nodes()
            .zip(st.weights())
            .fold(Vec2::zeros(), |acc, (k, &w)| acc + pts[k - first] * w)
    };
    Jet {
        d1: d(1),
        d2: d(2),
        d3: d(3),
        d4: d(4),
    }
}

fn tangential_second(jet: &Jet) -> f64 {
    let w = jet.d1.norm_squared();
    jet.d2.dot(&jet.d1) / (w * w.sqrt())
}

/// `θ_xx` from the tangential part of `σ_xx`.
fn initial_d2(jet: &Jet) -> f64 {
    -jet.d2.dot(&jet.d1) / jet.d1.norm_squared()
}

/// Jet of `σ ∘ θ` at the end, with `θ_x = 1`, `θ_xxx = 1`.
fn chain_jet(s: &Jet, q: f64, r: f64) -> Jet {
    Jet {
        d1: s.d1,
        d2: s.d2 + s.d1 * q,
        d3: s.d3 + s.d2 * (3.0 * q) + s.d1,
        d4: s.d4 + s.d3 * (6.0 * q) + s.d2 * (4.0 + 3.0 * q * q) + s.d1 * r,
    }
}

/// Tangential velocities making `Aν + Tτ` equal across the curves, in the
/// least-squares sense.
fn target_tangential(jets: &[Jet; 3], mu: f64) -> [f64; 3] {
    let mut m = DMatrix::<f64>::zeros(6, 5);
    let mut rhs = DVector::<f64>::zeros(6);
    for (i, jet) in jets.iter().enumerate() {
        let f = jet.frame();
        let a = normal_scalar_at(jet, mu);
        for c in 0..2 {
            m[(2 * i + c, c)] = 1.0;
            m[(2 * i + c, 2 + i)] = -f.tau[c];
            rhs[2 * i + c] = a * f.nu[c];
        }
    }
    let sol = m.svd(true, true).solve(&rhs, 1e-14).expect("svd with vectors");
    [sol[2], sol[3], sol[4]]
}

fn junction_residual(curves: &[CurveSample; 3], blends: &[Blend; 3], end: End, mu: f64) -> DVector<f64> {
    let jets = [0, 1, 2].map(|i| composed_jet(&curves[i], &blends[i], end));
    let v = jets.map(|j| parametric_vector_at(&j, mu));
    let mut f = DVector::zeros(7);
    for i in 0..3 {
        f[i] = tangential_second(&jets[i]);
    }
    f[3] = v[0].x - v[1].x;
    f[4] = v[0].y - v[1].y;
    f[5] = v[0].x - v[2].x;
    f[6] = v[0].y - v[2].y;
    f
}

/// Gauss-Newton on `(θ_xx, θ_xxxx)` of the three curves at one junction.
fn refine_junction(curves: &[CurveSample; 3], blends: &mut [Blend; 3], end: End, mu: f64) {
    let k = end as usize;
    let get = |b: &[Blend; 3]| DVector::from_iterator(6, (0..3).flat_map(|i| [b[i].ends[k].d2, b[i].ends[k].d4]));
    let set = |b: &mut [Blend; 3], u: &DVector<f64>| {
        for i in 0..3 {
            b[i].ends[k].d2 = u[2 * i];
            b[i].ends[k].d4 = u[2 * i + 1];
        }
    };
    let mut u = get(blends);
    let mut f = junction_residual(curves, blends, end, mu);
    for _ in 0..NEWTON_ITERATIONS {
        let mut jac = DMatrix::<f64>::zeros(7, 6);
        for c in 0..6 {
            let h = 1e-6 * (1.0 + u[c].abs());
            let mut trial = blends.to_owned();
            let mut up = u.clone();
            up[c] += h;
            set(&mut trial, &up);
            let fp = junction_residual(curves, &trial, end, mu);
            up[c] -= 2.0 * h;
            set(&mut trial, &up);
            let fm = junction_residual(curves, &trial, end, mu);
            jac.set_column(c, &((fp - fm) / (2.0 * h)));
        }
        let Ok(step) = jac.svd(true, true).solve(&(-&f), 1e-13) else {
            break;
        };
        let candidate = &u + &step;
        let mut trial = blends.to_owned();
        set(&mut trial, &candidate);
        let fc = junction_residual(curves, &trial, end, mu);
        if !(fc.norm() < f.norm()) {
            break;
        }
        let small = step.norm() <= 1e-15 * (1.0 + u.norm());
        u = candidate;
        f = fc;
        *blends = trial;
        if small || f.norm() < 1e-14 {
            break;
        }
    }
}

/// Newton on `θ_xx` of one curve at a fixed endpoint.
fn refine_endpoint(curve: &CurveSample, blend: &mut Blend, end: End) {
    let k = end as usize;
    let eval = |b: &Blend| tangential_second(&composed_jet(curve, b, end));
    let mut f = eval(blend);
    for _ in 0..NEWTON_ITERATIONS {
        let q = blend.ends[k].d2;
        let h = 1e-6 * (1.0 + q.abs());
        let mut bp = *blend;
        bp.ends[k].d2 = q + h;
        let mut bm = *blend;
        bm.ends[k].d2 = q - h;
        let slope = (eval(&bp) - eval(&bm)) / (2.0 * h);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let mut trial = *blend;
        trial.ends[k].d2 = q - f / slope;
        let ft = eval(&trial);
        if !(ft.abs() < f.abs()) {
            break;
        }
        *blend = trial;
        f = ft;
        if f.abs() < 1e-15 {
            break;
        }
    }
}

/// Signed form of every discrete condition the parametric checker imposes
/// at `end`.
fn end_conditions(curves: &[CurveSample; 3], blends: &[Blend; 3], topology: Topology, end: End, mu: f64) -> Vec<f64> {
    let jets = [0, 1, 2].map(|i| composed_jet(&curves[i], &blends[i], end));
    let f = jets.map(|j| j.frame());
    let mut out = Vec::with_capacity(12);
    let compat = |out: &mut Vec<f64>| {
        let v = jets.map(|j| parametric_vector_at(&j, mu));
        out.extend([v[0].x - v[1].x, v[0].y - v[1].y, v[0].x - v[2].x, v[0].y - v[2].y]);
    };
    match (topology, end) {
        (Topology::Theta, _) => {
            out.extend(jets.iter().flat_map(|j| [j.d2.x, j.d2.y]));
            let third: Vec2 = f.iter().map(|p| p.nu * (2.0 * p.k_s) - p.tau * mu).sum();
            out.extend([third.x, third.y]);
            compat(&mut out);
        }
        (Topology::Triod, End::Zero) => {
            let angle: Vec2 = f.iter().map(|p| p.tau).sum();
            out.extend([angle.x, angle.y, f.iter().map(|p| p.k).sum()]);
            out.extend((0..3).map(|i| jets[i].d2.dot(&f[i].tau)));
            let third: Vec2 = f.iter().map(|p| p.nu * (2.0 * p.k_s) - p.tau * (p.k * p.k)).sum();
            out.extend([third.x, third.y]);
            compat(&mut out);
        }
        (Topology::Triod, End::One) => out.extend(jets.iter().flat_map(|j| [j.d2.x, j.d2.y])),
    }
    out
}

/// Minimum-norm Gauss-Newton on the `θ` values next to `end`, so that the
/// end conditions hold for the discrete stencils and not only up to their
/// truncation error. The offsets needed are far below the grid spacing.
fn refine_nodes(curves: &[CurveSample; 3], blends: &mut [Blend; 3], topology: Topology, end: End, mu: f64) {
    let k = end as usize;
    let residual = |b: &[Blend; 3]| DVector::from_vec(end_conditions(curves, b, topology, end, mu));
    let set = |b: &mut [Blend; 3], u: &DVector<f64>| {
        for i in 0..3 {
            for m in 0..NUDGED {
                b[i].nudge[k][m] = u[NUDGED * i + m];
            }
        }
    };
    let unknowns = 3 * NUDGED;
    let mut u = DVector::from_iterator(unknowns, (0..3).flat_map(|i| blends[i].nudge[k]));
    let mut f = residual(blends);
    for _ in 0..NEWTON_ITERATIONS {
        if f.norm() < 1e-14 {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(f.len(), unknowns);
        let h = 1e-9;
        for c in 0..unknowns {
            let mut trial = *blends;
            let mut up = u.clone();
            up[c] += h;
            set(&mut trial, &up);
            let fp = residual(&trial);
            up[c] -= 2.0 * h;
            set(&mut trial, &up);
            let fm = residual(&trial);
            jac.set_column(c, &((fp - fm) / (2.0 * h)));
        }
        let Ok(step) = jac.svd(true, true).solve(&(-&f), 1e-12) else {
            break;
        };
        let candidate = &u + &step;
        let mut trial = *blends;
        set(&mut trial, &candidate);
        let fc = residual(&trial);
        if !(fc.norm() < f.norm()) {
            break;
        }
        u = candidate;
        f = fc;
        *blends = trial;
    }
}

/// Builds `θ^i` so that `σ^i ∘ θ^i` is an admissible initial parametrization.
///
/// The network must pass [`geometric_admissibility`] for the flavor matching
/// its topology (at grid tolerance). For a Triod the full construction is done
/// at the junction; at the fixed endpoints only `θ_xx` is adjusted.
pub fn build_reparametrization(net: &NetworkState, params: &EnergyParams) -> Result<ReparamMap> {
    let flavor = Flavor::for_topology(net.topology());
    let report = geometric_admissibility(net, params, flavor)?.with_tolerance(GRID_TOLERANCE);
    if !report.pass() {
        let names: Vec<String> = report
            .failures()
            .map(|r| format!("{} = {:.3e}", r.name, r.value))
            .collect();
        return Err(Error::Inadmissible(names.join(", ")));
    }
    let n = net.n();
    let mu = params.mu;
    let curves = net.curves();

    let mut taylor = [[TaylorData::identity(End::Zero), TaylorData::identity(End::One)]; 3];
    for &end in net.junction_ends() {
        let node = end.node(n);
        let jets = [0, 1, 2].map(|i| curves[i].jet(node));
        let targets = target_tangential(&jets, mu);
        for i in 0..3 {
            let q = initial_d2(&jets[i]);
            let base = tangential_scalar_at(&chain_jet(&jets[i], q, 0.0), mu);
            let v3 = jets[i].d1.norm().powi(3);
            let r = (targets[i] - base) * v3 / 2.0;
            taylor[i][end as usize] = TaylorData::at(end, q, r);
        }
    }
    if net.topology() == Topology::Triod {
        for i in 0..3 {
            let q = initial_d2(&curves[i].jet(n));
            taylor[i][1] = TaylorData::at(End::One, q, 0.0);
        }
    }

    let samples = 32 * n;
    let mut radius = INITIAL_RADIUS;
    let min_radius = 2.0 / n as f64;
    while radius >= min_radius {
        let mut blends = [0, 1, 2].map(|i| Blend {
            ends: taylor[i],
            radius,
            nudge: [[0.0; NUDGED]; 2],
        });
        for &end in net.junction_ends() {
            refine_junction(curves, &mut blends, end, mu);
        }
        if net.topology() == Topology::Triod {
            for i in 0..3 {
                refine_endpoint(&curves[i], &mut blends[i], End::One);
            }
        }
        for end in [End::Zero, End::One] {
            refine_nodes(curves, &mut blends, net.topology(), end, mu);
        }
        let increasing = blends.iter().all(|b| b.node_values(n).windows(2).all(|w| w[1] > w[0]));
        let min_dx = blends
            .iter()
            .map(|b| b.min_derivative(samples))
            .fold(f64::INFINITY, f64::min);
        if min_dx > 0.0 && increasing {
            let theta = blends.map(|b| GridFunction::from_vec_unchecked(b.node_values(n)));
            return Ok(ReparamMap {
                theta,
                taylor: blends.map(|b| b.ends),
                radius,
                min_derivative: min_dx,
            });
        }
        radius /= 2.0;
    }
    Err(Error::Reparametrization(
        "no blending radius gives an increasing map".into(),
    ))
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    };
    (p - (a + ab * t)).norm()
}

fn directed(a: &[Vec2], b: &[Vec2]) -> f64 {
    a.iter()
        .map(|&p| {
            if b.len() == 1 {
                return (p - b[0]).norm();
            }
            b.windows(2)
                .map(|w| point_segment_distance(p, w[0], w[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two polylines given by their vertices.
pub fn hausdorff_distance(a: &[Vec2], b: &[Vec2]) -> f64 {
    directed(a, b).max(directed(b, a))
}

/// Hausdorff distance between the images of two sampled curves, each densely
/// resampled through its interpolant with `refine` points per interval.
pub fn image_distance(a: &CurveSample, b: &CurveSample, refine: usize) -> f64 {
    let dense = |c: &CurveSample| -> Vec<Vec2> {
        let m = c.n() * refine.max(1);
        (0..=m).map(|k| c.interpolate(k as f64 / m as f64)).collect()
    };
    hausdorff_distance(&dense(a), &dense(b))
}
