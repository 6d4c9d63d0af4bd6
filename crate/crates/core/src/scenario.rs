//! Built-in initial networks.
//!
//! Near every junction and fixed endpoint the curves are straight segments
//! whose node coordinates are quantized to multiples of 2⁻⁴⁰, so that the
//! finite-difference derivatives of order ≥ 2 vanish exactly there and all
//! junction conditions hold to rounding. The Theta arcs are constant-speed
//! curves with a smoothly turning tangent; the other curves join their stubs
//! with polynomial pieces that match derivatives up to fourth order.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use gauss_quad::GaussLegendre;
use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cross, rot90, EnergyParams, Vec2};
use crate::network::{Flavor, NetworkState};

const QUANTUM: f64 = 1_099_511_627_776.0; // 2^40

/// Stub length and speed of the Hermite loop of `theta-degenerate`.
const STUB: f64 = 0.1;
const ARC_SPEED: f64 = 3.0;

/// Stub length and turn width of the constant-speed Theta arcs, in parameter
/// units. The stub covers the end stencils of warped grids with `N >= 64`.
const ARC_STUB: f64 = 0.15;
const ARC_TURN: f64 = 0.2;

pub const DEFAULT_AMPLITUDE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    TriodStraight,
    TriodPerturbed,
    ThetaSymmetric,
    ThetaDegenerate,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 4] = [
        ScenarioName::TriodStraight,
        ScenarioName::TriodPerturbed,
        ScenarioName::ThetaSymmetric,
        ScenarioName::ThetaDegenerate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::TriodStraight => "triod-straight",
            ScenarioName::TriodPerturbed => "triod-perturbed",
            ScenarioName::ThetaSymmetric => "theta-symmetric",
            ScenarioName::ThetaDegenerate => "theta-degenerate",
        }
    }

    pub fn flavor(self) -> Flavor {
        match self {
            ScenarioName::TriodStraight | ScenarioName::TriodPerturbed => Flavor::C1,
            ScenarioName::ThetaSymmetric | ScenarioName::ThetaDegenerate => Flavor::C0,
        }
    }

    /// Smallest grid on which the construction is exact near the ends.
    pub fn min_grid(self) -> usize {
        match self {
            ScenarioName::TriodStraight => crate::geometry::MIN_INTERVALS,
            ScenarioName::TriodPerturbed => 32,
            ScenarioName::ThetaSymmetric => 64,
            ScenarioName::ThetaDegenerate => 64,
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub n: usize,
    pub mu: f64,
    /// Bump height for `triod-perturbed`, bulge height for `theta-degenerate`.
    pub amplitude: Option<f64>,
}

impl ScenarioSpec {
    pub fn new(name: ScenarioName, n: usize, mu: f64) -> Self {
        Self {
            name,
            n,
            mu,
            amplitude: None,
        }
    }

    pub fn with_amplitude(mut self, a: f64) -> Self {
        self.amplitude = Some(a);
        self
    }
}

/// A generated network together with the parameters it was built for.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub net: NetworkState,
    pub params: EnergyParams,
    pub flavor: Flavor,
}

pub fn build(spec: &ScenarioSpec) -> Result<Scenario> {
    let params = EnergyParams::new(spec.mu)?;
    let min = spec.name.min_grid();
    if spec.n < min {
        return Err(Error::GridTooSmall {
            n: spec.n,
            required: min,
        });
    }
    let amplitude = spec.amplitude.unwrap_or(DEFAULT_AMPLITUDE);
    if !amplitude.is_finite() {
        return Err(Error::InvalidArgument("amplitude must be finite".into()));
    }
    let net = match spec.name {
        ScenarioName::TriodStraight => triod_straight(spec.n)?,
        ScenarioName::TriodPerturbed => triod_perturbed(spec.n, amplitude)?,
        ScenarioName::ThetaSymmetric => theta_warped(spec.n, [0.0; 3])?,
        ScenarioName::ThetaDegenerate => theta_degenerate(spec.n, spec.amplitude.unwrap_or(0.5))?,
    };
    Ok(Scenario {
        net,
        params,
        flavor: spec.name.flavor(),
    })
}

fn quantize(v: Vec2) -> Vec2 {
    Vec2::new((v.x * QUANTUM).round() / QUANTUM, (v.y * QUANTUM).round() / QUANTUM)
}

fn triod_steps(n: usize) -> [Vec2; 3] {
    [90.0_f64, 210.0, 330.0].map(|deg| {
        let a = deg.to_radians();
        quantize(Vec2::new(a.cos(), a.sin()) / n as f64)
    })
}

/// Three unit segments from the origin at mutual angles of 120°, ending at
/// fixed points on the unit circle.
pub fn triod_straight(n: usize) -> Result<NetworkState> {
    let q = triod_steps(n);
    let pts = q.map(|q| (0..=n).map(|j| q * j as f64).collect::<Vec<_>>());
    NetworkState::from_points(crate::network::Topology::Triod, pts, Some(q.map(|q| q * n as f64)))
}

/// Bump `a (1 - u²)⁵`, `u = (x - 1/2) / 0.3`, supported in `[0.2, 0.8]`.
pub fn bump(x: f64) -> f64 {
    let u = (x - 0.5) / 0.3;
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - u * u).powi(5)
    }
}

/// The straight triod with a normal bump of height `a` on the first curve.
pub fn triod_perturbed(n: usize, a: f64) -> Result<NetworkState> {
    let base = triod_straight(n)?;
    let nu = rot90(base.curve(0).points()[n].normalize());
    let mut pts = [0, 1, 2].map(|i| base.curve(i).points().to_vec());
    for (j, p) in pts[0].iter_mut().enumerate() {
        *p += nu * (a * bump(j as f64 / n as f64));
    }
    base.with_points(pts)
}

/// Degree-9 polynomial on `[x0, x1]` with prescribed value and first
/// derivative at both ends and vanishing derivatives of orders 2-4.
struct Hermite {
    x0: f64,
    len: f64,
    coeffs: [SVector<f64, 10>; 2],
}

impl Hermite {
    fn new(x0: f64, x1: f64, p0: Vec2, v0: Vec2, p1: Vec2, v1: Vec2) -> Result<Self> {
        let len = x1 - x0;
        let mut m = SMatrix::<f64, 10, 10>::zeros();
        let fact = |k: usize, d: usize| -> f64 { ((k - d + 1)..=k).map(|i| i as f64).product() };
        for d in 0..5 {
            m[(d, d)] = fact(d, d);
            for k in d..10 {
                m[(5 + d, k)] = fact(k, d);
            }
        }
        let lu = m.lu();
        let mut coeffs = [SVector::<f64, 10>::zeros(); 2];
        for (c, out) in coeffs.iter_mut().enumerate() {
            let mut rhs = SVector::<f64, 10>::zeros();
            rhs[0] = p0[c];
            rhs[1] = v0[c] * len;
            rhs[5] = p1[c];
            rhs[6] = v1[c] * len;
            *out = lu
                .solve(&rhs)
                .ok_or_else(|| Error::InvalidArgument("Hermite interpolation system is singular".into()))?;
        }
        Ok(Self { x0, len, coeffs })
    }

    fn eval(&self, x: f64) -> Vec2 {
        let s = (x - self.x0) / self.len;
        let horner = |c: &SVector<f64, 10>| c.iter().rev().fold(0.0, |acc, &a| acc * s + a);
        Vec2::new(horner(&self.coeffs[0]), horner(&self.coeffs[1]))
    }
}

/// A curve from `a` to `b` leaving with tangent `t0` and arriving with
/// tangent `t1`: quantized straight stubs at both ends and a Hermite arc
/// between them.
struct StubbedArc {
    a: Vec2,
    b: Vec2,
    q0: Vec2,
    q1: Vec2,
    n: usize,
    mid: Hermite,
}

impl StubbedArc {
    fn new(n: usize, a: Vec2, b: Vec2, t0: Vec2, t1: Vec2) -> Result<Self> {
        let q0 = quantize(t0 * (ARC_SPEED / n as f64));
        let q1 = quantize(t1 * (ARC_SPEED / n as f64));
        let nf = n as f64;
        let mid = Hermite::new(
            STUB,
            1.0 - STUB,
            a + q0 * (STUB * nf),
            q0 * nf,
            b - q1 * (STUB * nf),
            q1 * nf,
        )?;
        Ok(Self { a, b, q0, q1, n, mid })
    }

    /// Position at parameter `x`; stub positions use the exact line.
    fn eval(&self, x: f64) -> Vec2 {
        let nf = self.n as f64;
        if x <= STUB {
            self.a + self.q0 * (x * nf)
        } else if x >= 1.0 - STUB {
            self.b - self.q1 * ((1.0 - x) * nf)
        } else {
            self.mid.eval(x)
        }
    }

    /// Node values; nodes on the stubs are exact multiples of the quantized step.
    fn nodes(&self, warp: impl Fn(f64) -> f64) -> Vec<Vec2> {
        let n = self.n;
        (0..=n)
            .map(|j| {
                let x = j as f64 / n as f64;
                let w = warp(x);
                if w == x && x <= STUB {
                    self.a + self.q0 * j as f64
                } else if w == x && x >= 1.0 - STUB {
                    self.b - self.q1 * (n - j) as f64
                } else {
                    self.eval(w)
                }
            })
            .collect()
    }
}

/// Smooth step, 0 for `t <= 0` and 1 for `t >= 1`, with all derivatives
/// vanishing at both ends.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// A constant-speed curve from `a` to `b` whose tangent angle is `phi0` on
/// the first stub, turns by `turn` in two equal smooth steps and stays fixed
/// on the last stub. Symmetric turning (the Theta arcs) closes in `y`; the
/// speed is chosen so that it closes in `x`.
struct TurningArc {
    a: Vec2,
    b: Vec2,
    n: usize,
    phi0: f64,
    turn: f64,
    speed: f64,
    q0: Vec2,
    q1: Vec2,
    rule: GaussLegendre,
}

impl TurningArc {
    fn new(n: usize, a: Vec2, b: Vec2, phi0: f64, turn: f64) -> Result<Self> {
        let mut arc = Self {
            a,
            b,
            n,
            phi0,
            turn,
            speed: 1.0,
            q0: Vec2::zeros(),
            q1: Vec2::zeros(),
            rule: GaussLegendre::new(NonZeroUsize::new(20).expect("nonzero")),
        };
        let d = arc.integral(0.0, 1.0);
        let chord = b - a;
        if d.norm() < 1e-12 || cross(d, chord).abs() > 1e-12 * d.norm() * chord.norm() || d.dot(&chord) <= 0.0 {
            return Err(Error::InvalidArgument(
                "turning profile does not reach the far junction".into(),
            ));
        }
        arc.speed = chord.norm() / d.norm();
        let nf = n as f64;
        arc.q0 = quantize(arc.tangent(0.0) * (arc.speed / nf));
        arc.q1 = quantize(arc.tangent(1.0) * (arc.speed / nf));
        Ok(arc)
    }

    fn angle(&self, x: f64) -> f64 {
        let second = 1.0 - ARC_STUB - ARC_TURN;
        self.phi0 + 0.5 * self.turn * (smooth_step((x - ARC_STUB) / ARC_TURN) + smooth_step((x - second) / ARC_TURN))
    }

    fn tangent(&self, x: f64) -> Vec2 {
        let p = self.angle(x);
        Vec2::new(p.cos(), p.sin())
    }

    /// `∫_x0^x1 τ`, on panels short enough for the rule to reach rounding.
    fn integral(&self, x0: f64, x1: f64) -> Vec2 {
        let panels = ((x1 - x0).abs() / 0.01).ceil().max(1.0) as usize;
        let h = (x1 - x0) / panels as f64;
        (0..panels)
            .map(|k| {
                let (l, r) = (x0 + h * k as f64, x0 + h * (k + 1) as f64);
                Vec2::new(
                    self.rule.integrate(l, r, |x| self.angle(x).cos()),
                    self.rule.integrate(l, r, |x| self.angle(x).sin()),
                )
            })
            .sum()
    }

    /// Position at `x`; the first half is integrated from `a`, the second
    /// back from `b`, and the stubs are exact multiples of the quantized step.
    fn eval(&self, x: f64) -> Vec2 {
        let nf = self.n as f64;
        if x <= ARC_STUB {
            self.a + self.q0 * (x * nf)
        } else if x >= 1.0 - ARC_STUB {
            self.b - self.q1 * ((1.0 - x) * nf)
        } else if x <= 0.5 {
            self.a + self.q0 * (ARC_STUB * nf) + self.integral(ARC_STUB, x) * self.speed
        } else {
            self.b - self.q1 * (ARC_STUB * nf) - self.integral(x, 1.0 - ARC_STUB) * self.speed
        }
    }

    fn nodes(&self, warp: impl Fn(f64) -> f64) -> Vec<Vec2> {
        let n = self.n;
        (0..=n)
            .map(|j| {
                let x = j as f64 / n as f64;
                let w = warp(x);
                if w == x && x <= ARC_STUB {
                    self.a + self.q0 * j as f64
                } else if w == x && x >= 1.0 - ARC_STUB {
                    self.b - self.q1 * (n - j) as f64
                } else {
                    self.eval(w)
                }
            })
            .collect()
    }
}

fn mirror(v: Vec2) -> Vec2 {
    Vec2::new(v.x, -v.y)
}

/// The reflection-symmetric Theta network with each curve composed with the
/// parameter warp `x + ε_i x (1 - x)`. Warps with `|ε_i| < 1` are
/// orientation preserving; nonzero ones give tangential second derivatives
/// at the junctions while leaving the image sets unchanged.
pub fn theta_warped(n: usize, eps: [f64; 3]) -> Result<NetworkState> {
    if n < ScenarioName::ThetaSymmetric.min_grid() {
        return Err(Error::GridTooSmall {
            n,
            required: ScenarioName::ThetaSymmetric.min_grid(),
        });
    }
    if eps.iter().any(|e| !(e.abs() < 1.0)) {
        return Err(Error::InvalidArgument("warp parameters must lie in (-1, 1)".into()));
    }
    let a = Vec2::new(-1.0, 0.0);
    let b = Vec2::new(1.0, 0.0);
    let third = 2.0 * std::f64::consts::PI / 3.0;
    let upper = TurningArc::new(n, a, b, third, -2.0 * third)?;
    let step = quantize(Vec2::new(2.0 / n as f64, 0.0));
    let warp = |e: f64| move |x: f64| x + e * x * (1.0 - x);
    let middle: Vec<Vec2> = (0..=n)
        .map(|j| {
            let x = j as f64 / n as f64;
            if eps[1] == 0.0 {
                a + step * j as f64
            } else {
                a + step * (n as f64 * warp(eps[1])(x))
            }
        })
        .collect();
    let upper_pts = upper.nodes(warp(eps[0]));
    let lower_pts = if eps[2] == eps[0] {
        upper_pts.iter().map(|&p| mirror(p)).collect()
    } else {
        upper.nodes(warp(eps[2])).into_iter().map(mirror).collect()
    };
    NetworkState::from_points(crate::network::Topology::Theta, [upper_pts, middle, lower_pts], None)
}

/// Bump supported in `[STUB, 1 - STUB]`.
fn arc_bump(x: f64) -> f64 {
    let u = (x - 0.5) / (0.5 - STUB);
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - u * u).powi(5)
    }
}

/// A Theta network whose three curves are horizontal near both junctions,
/// so that all junction normals are parallel. Two curves bulge by `±a`; the
/// third leaves and enters the junctions pointing left and loops above.
pub fn theta_degenerate(n: usize, a: f64) -> Result<NetworkState> {
    let min = ScenarioName::ThetaDegenerate.min_grid();
    if n < min {
        return Err(Error::GridTooSmall { n, required: min });
    }
    let left = Vec2::new(-1.0, 0.0);
    let right = Vec2::new(1.0, 0.0);
    let step = quantize(Vec2::new(2.0 / n as f64, 0.0));
    let lens = |sign: f64| -> Vec<Vec2> {
        (0..=n)
            .map(|j| left + step * j as f64 + Vec2::new(0.0, sign * a * arc_bump(j as f64 / n as f64)))
            .collect()
    };
    let back = -Vec2::x();
    let arc = StubbedArc::new(n, left, right, back, back)?;
    let loop_: Vec<Vec2> = arc
        .nodes(|x| x)
        .into_iter()
        .enumerate()
        .map(|(j, p)| p + Vec2::new(0.0, 1.5 * arc_bump(j as f64 / n as f64)))
        .collect();
    NetworkState::from_points(crate::network::Topology::Theta, [lens(1.0), lens(-1.0), loop_], None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{
        geometric_admissibility, junction_residuals, normal_span_measure, parametric_admissibility, End,
    };

    #[test]
    fn names_round_trip() {
        for n in ScenarioName::ALL {
            assert_eq!(n.as_str().parse::<ScenarioName>().unwrap(), n);
        }
        assert!(matches!("nope".parse::<ScenarioName>(), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn straight_triod_residuals_vanish() {
        let s = build(&ScenarioSpec::new(ScenarioName::TriodStraight, 32, 0.2)).unwrap();
        let r = geometric_admissibility(&s.net, &s.params, Flavor::C1).unwrap();
        assert!(r.pass(), "{r}");
        let p = parametric_admissibility(&s.net, &s.params, Flavor::C1);
        assert!(p.pass(), "{p}");
        assert!((s.net.energy(&s.params).unwrap() - 0.6).abs() < 1e-9);
    }

    #[test]
    fn perturbed_triod_is_admissible() {
        let s = build(&ScenarioSpec::new(ScenarioName::TriodPerturbed, 64, 0.2).with_amplitude(0.05)).unwrap();
        let p = parametric_admissibility(&s.net, &s.params, Flavor::C1);
        assert!(p.pass(), "{p}");
        assert!(s.net.energy(&s.params).unwrap() > 0.6);
    }

    #[test]
    fn symmetric_theta_is_admissible() {
        for n in [64, 128] {
            let s = build(&ScenarioSpec::new(ScenarioName::ThetaSymmetric, n, 1.0)).unwrap();
            let p = parametric_admissibility(&s.net, &s.params, Flavor::C0);
            assert!(p.pass(), "N={n}: {p}");
            let j = junction_residuals(&s.net, &s.params).unwrap();
            assert!(j.pass(), "{j}");
            for i in 0..=n {
                assert_eq!(s.net.curve(0).points()[i], mirror(s.net.curve(2).points()[i]));
            }
            assert!(s.net.min_speed() >= 2.0 - 1e-12);
        }
    }

    #[test]
    fn theta_needs_a_fine_grid() {
        assert!(matches!(
            build(&ScenarioSpec::new(ScenarioName::ThetaSymmetric, 32, 1.0)),
            Err(Error::GridTooSmall { required: 64, .. })
        ));
    }

    #[test]
    fn degenerate_theta_has_parallel_normals() {
        let s = build(&ScenarioSpec::new(ScenarioName::ThetaDegenerate, 64, 1.0)).unwrap();
        for end in [End::Zero, End::One] {
            assert_eq!(normal_span_measure(&s.net, end), 0.0);
        }
        let r = geometric_admissibility(&s.net, &s.params, Flavor::C0).unwrap();
        assert!(!r.pass());
    }

    #[test]
    fn warped_theta_keeps_geometry() {
        let net = theta_warped(128, [0.3, -0.2, 0.15]).unwrap();
        let params = EnergyParams::new(1.0).unwrap();
        let g = geometric_admissibility(&net, &params, Flavor::C0)
            .unwrap()
            .with_tolerance(1e-6);
        assert!(g.pass(), "{g}");
        let j = junction_residuals(&net, &params).unwrap();
        assert!(j.get("tangential_second_order@0").unwrap() > 1e-3);
    }
}
