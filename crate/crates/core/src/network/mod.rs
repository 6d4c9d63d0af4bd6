//! Networks of three curves, their junction conditions and admissibility.
//!
//! A Theta network has triple junctions at both `x = 0` and `x = 1`. A Triod
//! has one junction at `x = 0`, and each curve ends at a fixed point `P^i` at
//! `x = 1`.

mod reparam;

pub use reparam::{build_reparametrization, hausdorff_distance, image_distance, ReparamMap, TaylorData};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    cross, elastic_energy, finite_difference, CurveSample, EnergyParams, PointFrame, Vec2, DEFAULT_REGULARITY_FLOOR,
};
use crate::velocity::{normal_scalar_at, parametric_vector_at};

/// Tolerance for data built from closed-form constructions.
pub const ANALYTIC_TOLERANCE: f64 = 1e-8;
/// Tolerance for data that went through grid operations (resampling, solves).
pub const GRID_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Theta,
    Triod,
}

/// Which set of junction conditions applies: the C⁰ flow of Theta networks
/// or the C¹ flow of Triods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    C0,
    C1,
}

impl Flavor {
    pub fn topology(self) -> Topology {
        match self {
            Flavor::C0 => Topology::Theta,
            Flavor::C1 => Topology::Triod,
        }
    }

    pub fn for_topology(t: Topology) -> Self {
        match t {
            Topology::Theta => Flavor::C0,
            Topology::Triod => Flavor::C1,
        }
    }
}

/// An end of the parameter interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum End {
    Zero,
    One,
}

impl End {
    pub fn node(self, n: usize) -> usize {
        match self {
            End::Zero => 0,
            End::One => n,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            End::Zero => "0",
            End::One => "1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    curves: [CurveSample; 3],
    topology: Topology,
    endpoints: Option<[Vec2; 3]>,
}

impl NetworkState {
    /// Junction conditions are not enforced here; use the residual checks.
    pub fn new(curves: [CurveSample; 3], topology: Topology, endpoints: Option<[Vec2; 3]>) -> Result<Self> {
        let n = curves[0].n();
        if curves.iter().any(|c| c.n() != n) {
            return Err(Error::GridMismatch(format!(
                "curves have {}, {} and {} intervals",
                curves[0].n(),
                curves[1].n(),
                curves[2].n()
            )));
        }
        match (topology, &endpoints) {
            (Topology::Triod, None) => {
                return Err(Error::InvalidArgument("a triod needs three fixed endpoints".into()))
            }
            (Topology::Theta, Some(_)) => {
                return Err(Error::InvalidArgument("a theta network has no fixed endpoints".into()))
            }
            (_, Some(p)) if p.iter().any(|v| !(v.x.is_finite() && v.y.is_finite())) => {
                return Err(Error::InvalidArgument("endpoints must be finite".into()))
            }
            _ => {}
        }
        Ok(Self {
            curves,
            topology,
            endpoints,
        })
    }

    pub fn theta(curves: [CurveSample; 3]) -> Result<Self> {
        Self::new(curves, Topology::Theta, None)
    }

    pub fn triod(curves: [CurveSample; 3], endpoints: [Vec2; 3]) -> Result<Self> {
        Self::new(curves, Topology::Triod, Some(endpoints))
    }

    pub fn from_points(topology: Topology, points: [Vec<Vec2>; 3], endpoints: Option<[Vec2; 3]>) -> Result<Self> {
        let [a, b, c] = points;
        Self::new(
            [
                CurveSample::from_points(a)?,
                CurveSample::from_points(b)?,
                CurveSample::from_points(c)?,
            ],
            topology,
            endpoints,
        )
    }

    pub fn n(&self) -> usize {
        self.curves[0].n()
    }

    pub fn curves(&self) -> &[CurveSample; 3] {
        &self.curves
    }

    pub fn curve(&self, i: usize) -> &CurveSample {
        &self.curves[i]
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn endpoints(&self) -> Option<&[Vec2; 3]> {
        self.endpoints.as_ref()
    }

    /// Ends of the parameter interval where the curves form a triple junction.
    pub fn junction_ends(&self) -> &'static [End] {
        match self.topology {
            Topology::Theta => &[End::Zero, End::One],
            Topology::Triod => &[End::Zero],
        }
    }

    pub fn min_speed(&self) -> f64 {
        self.curves.iter().map(|c| c.min_speed()).fold(f64::INFINITY, f64::min)
    }

    pub fn check_regular(&self, floor: f64) -> Result<()> {
        for (i, c) in self.curves.iter().enumerate() {
            c.check_regular(floor, i)?;
        }
        Ok(())
    }

    /// Total elastic energy of the three curves.
    pub fn energy(&self, params: &EnergyParams) -> Result<f64> {
        let mut e = 0.0;
        for (i, c) in self.curves.iter().enumerate() {
            c.check_regular(DEFAULT_REGULARITY_FLOOR, i)?;
            e += elastic_energy(c, params)?;
        }
        Ok(e)
    }

    /// Applies a map of the plane to every node and fixed endpoint.
    pub fn map_points(&self, f: impl Fn(Vec2) -> Vec2) -> Result<Self> {
        let curves = [
            self.curves[0].map_points(&f)?,
            self.curves[1].map_points(&f)?,
            self.curves[2].map_points(&f)?,
        ];
        Self::new(curves, self.topology, self.endpoints.map(|p| p.map(&f)))
    }

    pub fn translate(&self, v: Vec2) -> Result<Self> {
        self.map_points(|p| p + v)
    }

    /// Rotation by `angle` about `center`.
    pub fn rotate(&self, angle: f64, center: Vec2) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        self.map_points(|p| {
            let d = p - center;
            center + Vec2::new(c * d.x - s * d.y, s * d.x + c * d.y)
        })
    }

    /// Same topology and endpoints, new node arrays.
    pub fn with_points(&self, points: [Vec<Vec2>; 3]) -> Result<Self> {
        Self::from_points(self.topology, points, self.endpoints)
    }

    pub(crate) fn frames_at(&self, end: End) -> [PointFrame; 3] {
        let node = end.node(self.n());
        [0, 1, 2].map(|i| self.curves[i].frame_at(node))
    }

    pub(crate) fn points_at(&self, end: End) -> [Vec2; 3] {
        let node = end.node(self.n());
        [0, 1, 2].map(|i| self.curves[i].points()[node])
    }

    pub(crate) fn second_derivatives_at(&self, end: End) -> [Vec2; 3] {
        let node = end.node(self.n());
        [0, 1, 2].map(|i| self.curves[i].derivative(2)[node])
    }
}

/// How a residual is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "floor")]
pub enum Requirement {
    /// Must not exceed the report tolerance.
    AtMost,
    /// Must strictly exceed the given floor (span, regularity).
    Exceeds(f64),
    /// Reported for information, never fails.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub requirement: Requirement,
}

impl Residual {
    pub fn satisfied(&self, tolerance: f64) -> bool {
        match self.requirement {
            Requirement::AtMost => self.value <= tolerance,
            Requirement::Exceeds(floor) => self.value > floor,
            Requirement::Info => true,
        }
    }
}

/// Named residuals of junction and endpoint conditions with a verdict.
///
/// Residuals marked [`Requirement::AtMost`] pass when `value <= tolerance`;
/// measures that have to stay away from zero carry their own floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    residuals: Vec<Residual>,
    tolerance: f64,
    pass: bool,
}

impl AdmissibilityReport {
    pub fn new(tolerance: f64) -> Self {
        Self {
            residuals: Vec::new(),
            tolerance,
            pass: true,
        }
    }

    fn push(&mut self, name: impl Into<String>, value: f64, requirement: Requirement) {
        let r = Residual {
            name: name.into(),
            value,
            requirement,
        };
        self.pass &= r.satisfied(self.tolerance);
        self.residuals.push(r);
    }

    pub fn push_at_most(&mut self, name: impl Into<String>, value: f64) {
        self.push(name, value, Requirement::AtMost);
    }

    pub fn push_exceeds(&mut self, name: impl Into<String>, value: f64, floor: f64) {
        self.push(name, value, Requirement::Exceeds(floor));
    }

    pub fn push_info(&mut self, name: impl Into<String>, value: f64) {
        self.push(name, value, Requirement::Info);
    }

    pub fn extend(&mut self, other: AdmissibilityReport) {
        for r in other.residuals {
            self.push(r.name, r.value, r.requirement);
        }
    }

    /// The same residuals judged at another tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.pass = self.residuals.iter().all(|r| r.satisfied(tolerance));
        self
    }

    pub fn residuals(&self) -> &[Residual] {
        &self.residuals
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn pass(&self) -> bool {
        self.pass
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.residuals.iter().find(|r| r.name == name).map(|r| r.value)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Residual> {
        self.residuals.iter().filter(|r| !r.satisfied(self.tolerance))
    }

    /// Largest `AtMost` residual whose name starts with `prefix`.
    pub fn max_with_prefix(&self, prefix: &str) -> f64 {
        self.residuals
            .iter()
            .filter(|r| r.requirement == Requirement::AtMost && r.name.starts_with(prefix))
            .map(|r| r.value)
            .fold(0.0, f64::max)
    }
}

impl std::fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for r in &self.residuals {
            let verdict = if r.satisfied(self.tolerance) { "ok" } else { "FAIL" };
            let rule = match r.requirement {
                Requirement::AtMost => format!("<= {:.1e}", self.tolerance),
                Requirement::Exceeds(floor) => format!(">  {floor:.1e}"),
                Requirement::Info => "info".to_string(),
            };
            writeln!(f, "{:<28} {:>12.4e}  {:<10} {}", r.name, r.value, rule, verdict)?;
        }
        write!(f, "verdict: {}", if self.pass { "pass" } else { "fail" })
    }
}

/// Angles between the junction tangents: `alpha3` between τ¹ and τ²,
/// `alpha1` between τ² and τ³, `alpha2` between τ³ and τ¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionAngles {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

fn angle_between(a: Vec2, b: Vec2) -> f64 {
    cross(a, b).abs().atan2(a.dot(&b))
}

pub fn junction_angles(net: &NetworkState, end: End) -> JunctionAngles {
    let f = net.frames_at(end);
    JunctionAngles {
        alpha1: angle_between(f[1].tau, f[2].tau),
        alpha2: angle_between(f[2].tau, f[0].tau),
        alpha3: angle_between(f[0].tau, f[1].tau),
    }
}

fn max_pairwise(v: &[Vec2; 3]) -> f64 {
    (v[0] - v[1]).norm().max((v[0] - v[2]).norm()).max((v[1] - v[2]).norm())
}

fn require(net: &NetworkState, expected: Topology) -> Result<()> {
    if net.topology() != expected {
        return Err(Error::WrongTopology {
            expected,
            found: net.topology(),
        });
    }
    Ok(())
}

fn sum<T: std::iter::Sum<T>>(it: impl Iterator<Item = T>) -> T {
    it.sum()
}

/// C⁰ junction residuals at both ends of a Theta network.
pub fn junction_residuals_c0(net: &NetworkState, params: &EnergyParams) -> Result<AdmissibilityReport> {
    require(net, Topology::Theta)?;
    let mut report = AdmissibilityReport::new(ANALYTIC_TOLERANCE);
    for &end in net.junction_ends() {
        let y = end.label();
        let f = net.frames_at(end);
        let g2 = net.second_derivatives_at(end);
        report.push_at_most(format!("concurrency@{y}"), max_pairwise(&net.points_at(end)));
        report.push_at_most(
            format!("curvature@{y}"),
            f.iter().map(|p| p.k.abs()).fold(0.0, f64::max),
        );
        report.push_at_most(
            format!("second_order@{y}"),
            g2.iter().map(|v| v.norm()).fold(0.0, f64::max),
        );
        report.push_at_most(
            format!("tangential_second_order@{y}"),
            (0..3).map(|i| g2[i].dot(&f[i].tau).abs()).fold(0.0, f64::max),
        );
        let third: Vec2 = sum(f.iter().map(|p| p.nu * (2.0 * p.k_s) - p.tau * params.mu));
        report.push_at_most(format!("third_order@{y}"), third.norm());
    }
    Ok(report)
}

/// C¹ residuals of a Triod: junction conditions at `x = 0`, Navier conditions
/// at the fixed endpoints.
pub fn junction_residuals_c1(net: &NetworkState, _params: &EnergyParams) -> Result<AdmissibilityReport> {
    require(net, Topology::Triod)?;
    let mut report = AdmissibilityReport::new(ANALYTIC_TOLERANCE);
    let f = net.frames_at(End::Zero);
    let g2 = net.second_derivatives_at(End::Zero);
    report.push_at_most("concurrency@0", max_pairwise(&net.points_at(End::Zero)));
    report.push_at_most("angle@0", sum(f.iter().map(|p| p.tau)).norm());
    report.push_at_most("curvature_sum@0", sum(f.iter().map(|p| p.k)).abs());
    report.push_at_most(
        "tangential_second_order@0",
        (0..3).map(|i| g2[i].dot(&f[i].tau).abs()).fold(0.0, f64::max),
    );
    let third: Vec2 = sum(f.iter().map(|p| p.nu * (2.0 * p.k_s) - p.tau * (p.k * p.k)));
    report.push_at_most("third_order@0", third.norm());

    let ends = net.points_at(End::One);
    let fixed = net.endpoints().expect("triod has endpoints");
    report.push_at_most(
        "endpoint@1",
        (0..3).map(|i| (ends[i] - fixed[i]).norm()).fold(0.0, f64::max),
    );
    report.push_at_most(
        "second_order@1",
        net.second_derivatives_at(End::One)
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max),
    );
    Ok(report)
}

/// Junction residuals of the flavor that matches the network's topology.
pub fn junction_residuals(net: &NetworkState, params: &EnergyParams) -> Result<AdmissibilityReport> {
    match net.topology() {
        Topology::Theta => junction_residuals_c0(net, params),
        Topology::Triod => junction_residuals_c1(net, params),
    }
}

/// Smallest singular value of the 2×3 matrix of junction normals.
pub fn normal_span_measure(net: &NetworkState, end: End) -> f64 {
    let f = net.frames_at(end);
    span_of(&[f[0].nu, f[1].nu, f[2].nu])
}

pub(crate) fn span_of(nu: &[Vec2; 3]) -> f64 {
    // M Mᵀ = [[a, b], [b, c]]; det(M Mᵀ) = Σ_{i<j} (νᵢ × νⱼ)² keeps full relative
    // accuracy when the normals are nearly parallel.
    let a: f64 = nu.iter().map(|v| v.x * v.x).sum();
    let b: f64 = nu.iter().map(|v| v.x * v.y).sum();
    let c: f64 = nu.iter().map(|v| v.y * v.y).sum();
    let det = cross(nu[0], nu[1]).powi(2) + cross(nu[0], nu[2]).powi(2) + cross(nu[1], nu[2]).powi(2);
    let lmax = 0.5 * (a + c) + (0.25 * (a - c) * (a - c) + b * b).sqrt();
    if lmax == 0.0 {
        return 0.0;
    }
    (det / lmax).sqrt()
}

/// Relative mismatch between the cached fourth derivative and the derivative
/// of the cached third one. Small for curves resolved by the grid.
fn smoothness_proxy(net: &NetworkState) -> f64 {
    net.curves()
        .iter()
        .map(|c| {
            let d4 = c.derivative(4);
            let scale = d4.max_norm().max(1.0);
            match finite_difference(c.derivative(3), 1) {
                Ok(dd) => (0..=c.n()).map(|j| (dd[j] - d4[j]).norm()).fold(0.0, f64::max) / scale,
                Err(_) => f64::INFINITY,
            }
        })
        .fold(0.0, f64::max)
}

fn normal_scalars_at(net: &NetworkState, end: End, mu: f64) -> [f64; 3] {
    let node = end.node(net.n());
    [0, 1, 2].map(|i| normal_scalar_at(&net.curve(i).jet(node), mu))
}

/// Checks the geometric admissibility conditions of the given flavor.
pub fn geometric_admissibility(
    net: &NetworkState,
    params: &EnergyParams,
    flavor: Flavor,
) -> Result<AdmissibilityReport> {
    require(net, flavor.topology())?;
    let tol = ANALYTIC_TOLERANCE;
    let mut report = AdmissibilityReport::new(tol);
    report.push_exceeds("regularity", net.min_speed(), DEFAULT_REGULARITY_FLOOR);
    match flavor {
        Flavor::C0 => {
            for &end in net.junction_ends() {
                let y = end.label();
                let f = net.frames_at(end);
                report.push_at_most(format!("concurrency@{y}"), max_pairwise(&net.points_at(end)));
                report.push_exceeds(format!("span@{y}"), normal_span_measure(net, end), tol);
                report.push_at_most(
                    format!("curvature@{y}"),
                    f.iter().map(|p| p.k.abs()).fold(0.0, f64::max),
                );
                let third: Vec2 = sum(f.iter().map(|p| p.nu * (2.0 * p.k_s) - p.tau * params.mu));
                report.push_at_most(format!("third_order@{y}"), third.norm());
                let ang = junction_angles(net, end);
                let a = normal_scalars_at(net, end, params.mu);
                let balance = ang.alpha1.sin() * a[0] + ang.alpha2.sin() * a[1] + ang.alpha3.sin() * a[2];
                report.push_at_most(format!("a_balance@{y}"), balance.abs());
            }
        }
        Flavor::C1 => {
            let f = net.frames_at(End::Zero);
            report.push_at_most("concurrency@0", max_pairwise(&net.points_at(End::Zero)));
            report.push_at_most("angle@0", sum(f.iter().map(|p| p.tau)).norm());
            report.push_at_most("curvature_sum@0", sum(f.iter().map(|p| p.k)).abs());
            let third: Vec2 = sum(f.iter().map(|p| p.nu * (2.0 * p.k_s) - p.tau * (p.k * p.k)));
            report.push_at_most("third_order@0", third.norm());
            report.push_at_most(
                "a_sum@0",
                normal_scalars_at(net, End::Zero, params.mu).iter().sum::<f64>().abs(),
            );
            let ends = net.points_at(End::One);
            let fixed = net.endpoints().expect("triod has endpoints");
            report.push_at_most(
                "endpoint@1",
                (0..3).map(|i| (ends[i] - fixed[i]).norm()).fold(0.0, f64::max),
            );
            let f1 = net.frames_at(End::One);
            report.push_at_most("curvature@1", f1.iter().map(|p| p.k.abs()).fold(0.0, f64::max));
        }
    }
    report.push_info("smoothness", smoothness_proxy(net));
    Ok(report)
}

/// Largest mismatch of the junction velocities `Aν + Tτ` between curves.
pub fn compatibility_residual(net: &NetworkState, params: &EnergyParams) -> Result<f64> {
    net.check_regular(DEFAULT_REGULARITY_FLOOR)?;
    let mut worst = 0.0_f64;
    for &end in net.junction_ends() {
        let node = end.node(net.n());
        let v = [0, 1, 2].map(|i| parametric_vector_at(&net.curve(i).jet(node), params.mu));
        worst = worst.max(max_pairwise(&v));
    }
    Ok(worst)
}

/// Everything required of an initial parametrization for the flavor's flow.
pub fn parametric_admissibility(net: &NetworkState, params: &EnergyParams, flavor: Flavor) -> AdmissibilityReport {
    let tol = ANALYTIC_TOLERANCE;
    let mut report = AdmissibilityReport::new(tol);
    if net.topology() != flavor.topology() {
        report.push_at_most("topology", f64::INFINITY);
        return report;
    }
    report.push_exceeds("regularity", net.min_speed(), DEFAULT_REGULARITY_FLOOR);
    if flavor == Flavor::C0 {
        for &end in net.junction_ends() {
            report.push_exceeds(format!("span@{}", end.label()), normal_span_measure(net, end), tol);
        }
    }
    let junction = match flavor {
        Flavor::C0 => junction_residuals_c0(net, params),
        Flavor::C1 => junction_residuals_c1(net, params),
    };
    report.extend(junction.expect("topology checked above"));
    report.push_at_most(
        "compatibility",
        compatibility_residual(net, params).unwrap_or(f64::INFINITY),
    );
    report
}
