//! Assembly and solution of one implicit step of the linearized problem.
//!
//! Unknowns are ordered node-major: index `6 j + 2 i + c` holds component `c`
//! of curve `i` at node `j`. The rows belonging to nodes `0, 1` carry the
//! twelve conditions at `x = 0`, those of nodes `N - 1, N` the twelve at
//! `x = 1`; every other node carries the motion equation
//! `γ + dt c γ_xxxx - dt M γ_xxx = ψ + dt f` with `c = 2 / |φ_x|⁴` and an
//! optional frozen 2×2 coefficient `M` for the third-order part.

use crate::error::{Error, Result};
use crate::geometry::stencil::stencil;
use nalgebra::Matrix2;

use crate::geometry::{EnergyParams, GridFunction, Vec2, DEFAULT_REGULARITY_FLOOR};
use crate::network::{End, Flavor, NetworkState};
use crate::velocity::motion_rhs;

use super::banded::{solve_banded, BandMatrix};
use super::rows::{boundary_rows, end_kinds, natural_rhs, BoundaryRow, EndKind, ROWS_PER_END};

/// Unknowns per grid node.
pub const UNKNOWNS_PER_NODE: usize = 6;
/// Sub- and super-diagonal bandwidth of the assembled matrix.
pub const BANDWIDTH: usize = 29;

#[inline]
pub fn unknown(node: usize, curve: usize, comp: usize) -> usize {
    UNKNOWNS_PER_NODE * node + 2 * curve + comp
}

/// Data of the linear problem: bulk forcing `f`, initial datum `ψ`, the
/// boundary right-hand sides at `x = 0` and `x = 1`, the step `dt` and the
/// per-node third-order coefficients (empty for none).
#[derive(Debug, Clone)]
pub struct LinearData {
    pub dt: f64,
    pub f: [GridFunction<Vec2>; 3],
    pub psi: [GridFunction<Vec2>; 3],
    pub boundary: [[f64; ROWS_PER_END]; 2],
    pub third_order: [Vec<Matrix2<f64>>; 3],
}

/// Coefficient of `γ_xxx` in the lower-order part of the velocity,
/// `(12 ⟨γ_xx, γ_x⟩ I + 8 γ_xx γ_xᵀ) / |γ_x|⁶`.
pub fn third_order_coefficient(d1: Vec2, d2: Vec2) -> Matrix2<f64> {
    let w3 = d1.norm_squared().powi(3);
    (Matrix2::identity() * (12.0 * d2.dot(&d1)) + d2 * d1.transpose() * 8.0) / w3
}

impl LinearData {
    /// The data of one semi-implicit step from `state`: `ψ` is the state
    /// itself, the third-order part of the velocity is implicit with frozen
    /// coefficients, `f` is the rest of the lower-order remainder, and the
    /// boundary data are the frozen lower-order terms.
    pub fn natural(state: &NetworkState, params: &EnergyParams, flavor: Flavor, dt: f64) -> Result<Self> {
        let mut f = Vec::with_capacity(3);
        let mut m3 = Vec::with_capacity(3);
        for (i, c) in state.curves().iter().enumerate() {
            c.check_regular(DEFAULT_REGULARITY_FLOOR, i)?;
            let rem = motion_rhs(c, params)?.remainder;
            let coeff: Vec<Matrix2<f64>> = (0..=c.n())
                .map(|j| third_order_coefficient(c.derivative(1)[j], c.derivative(2)[j]))
                .collect();
            let explicit = (0..=c.n()).map(|j| rem[j] - coeff[j] * c.derivative(3)[j]).collect();
            f.push(GridFunction::new(explicit)?);
            m3.push(coeff);
        }
        Ok(Self {
            dt,
            f: f.try_into().expect("three curves"),
            psi: [0, 1, 2].map(|i| state.curve(i).position().clone()),
            boundary: natural_boundary(state, params, flavor),
            third_order: m3.try_into().expect("three curves"),
        })
    }

    /// Fully explicit lower-order part: no third-order coefficients.
    pub fn explicit(state: &NetworkState, params: &EnergyParams, flavor: Flavor, dt: f64) -> Result<Self> {
        let mut f = Vec::with_capacity(3);
        for (i, c) in state.curves().iter().enumerate() {
            c.check_regular(DEFAULT_REGULARITY_FLOOR, i)?;
            f.push(motion_rhs(c, params)?.remainder);
        }
        Ok(Self {
            dt,
            f: f.try_into().expect("three curves"),
            psi: [0, 1, 2].map(|i| state.curve(i).position().clone()),
            boundary: natural_boundary(state, params, flavor),
            third_order: Default::default(),
        })
    }
}

/// Boundary right-hand sides at both ends with frames frozen at `state`.
pub fn natural_boundary(state: &NetworkState, params: &EnergyParams, flavor: Flavor) -> [[f64; ROWS_PER_END]; 2] {
    end_kinds(flavor).map(|(end, kind)| natural_rhs(kind, state, end, params))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AssembleOptions {
    /// When set, the initial datum must satisfy the boundary rows up to this
    /// (row-normalized) residual.
    pub compatibility_tolerance: Option<f64>,
}

#[derive(Debug, Clone)]
struct EndBlock {
    end: End,
    kind: EndKind,
    rows: Vec<BoundaryRow>,
    first_row: usize,
}

#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    n: usize,
    flavor: Flavor,
    coefficient: [GridFunction<f64>; 3],
    matrix: BandMatrix,
    rhs: Vec<f64>,
    ends: Vec<EndBlock>,
    template: NetworkState,
}

/// Assembles the system with implicit coefficient and frozen frames both
/// taken from `net0`.
pub fn assemble(
    net0: &NetworkState,
    flavor: Flavor,
    data: &LinearData,
    options: AssembleOptions,
) -> Result<LinearizedSystem> {
    assemble_with_frames(net0, net0, flavor, data, options)
}

/// As [`assemble`], but the boundary rows use the frames of `frames`.
pub fn assemble_with_frames(
    net0: &NetworkState,
    frames: &NetworkState,
    flavor: Flavor,
    data: &LinearData,
    options: AssembleOptions,
) -> Result<LinearizedSystem> {
    if net0.topology() != flavor.topology() {
        return Err(Error::WrongTopology {
            expected: flavor.topology(),
            found: net0.topology(),
        });
    }
    let n = net0.n();
    if frames.n() != n
        || data.f.iter().chain(&data.psi).any(|g| g.n() != n)
        || data.third_order.iter().any(|m| !m.is_empty() && m.len() != n + 1)
    {
        return Err(Error::GridMismatch("linear data must live on the network grid".into()));
    }
    if !(data.dt > 0.0 && data.dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "time step {} must be positive",
            data.dt
        )));
    }
    net0.check_regular(DEFAULT_REGULARITY_FLOOR)?;
    frames.check_regular(DEFAULT_REGULARITY_FLOOR)?;

    let size = UNKNOWNS_PER_NODE * (n + 1);
    let mut matrix = BandMatrix::zeros(size, BANDWIDTH, BANDWIDTH);
    let mut rhs = vec![0.0; size];
    let coefficient = [0, 1, 2].map(|i| net0.curve(i).speed().map(|v| 2.0 / v.powi(4)));

    for j in 2..=n - 2 {
        let s = stencil(n, 4, j);
        let s3 = stencil(n, 3, j);
        for i in 0..3 {
            let c = coefficient[i][j] * data.dt;
            let m3 = data.third_order[i].get(j).map(|m| m * data.dt);
            for comp in 0..2 {
                let row = unknown(j, i, comp);
                matrix.add(row, row, 1.0);
                for (k, w) in s.nodes().zip(s.weights()) {
                    matrix.add(row, unknown(k, i, comp), c * w);
                }
                if let Some(m) = &m3 {
                    for (k, w) in s3.nodes().zip(s3.weights()) {
                        for other in 0..2 {
                            let a = m[(comp, other)];
                            if a != 0.0 {
                                matrix.add(row, unknown(k, i, other), -a * w);
                            }
                        }
                    }
                }
                let p = data.psi[i][j];
                let f = data.f[i][j];
                rhs[row] = if comp == 0 {
                    p.x + data.dt * f.x
                } else {
                    p.y + data.dt * f.y
                };
            }
        }
    }

    let mut ends = Vec::with_capacity(2);
    for (slot, (end, kind)) in end_kinds(flavor).into_iter().enumerate() {
        let rows = boundary_rows(kind, &frames.frames_at(end));
        let first_row = match end {
            End::Zero => 0,
            End::One => unknown(n - 1, 0, 0),
        };
        let node = end.node(n);
        for (r, row) in rows.iter().enumerate() {
            for t in &row.terms {
                let s = if t.order == 0 {
                    None
                } else {
                    Some(stencil(n, t.order, node))
                };
                for comp in 0..2 {
                    let w = t.weight[comp];
                    if w == 0.0 {
                        continue;
                    }
                    match &s {
                        None => matrix.add(first_row + r, unknown(node, t.curve, comp), w),
                        Some(s) => {
                            for (k, sw) in s.nodes().zip(s.weights()) {
                                matrix.add(first_row + r, unknown(k, t.curve, comp), w * sw);
                            }
                        }
                    }
                }
            }
            rhs[first_row + r] = data.boundary[slot][r];
        }
        ends.push(EndBlock {
            end,
            kind,
            rows,
            first_row,
        });
    }

    let system = LinearizedSystem {
        n,
        flavor,
        coefficient,
        matrix,
        rhs,
        ends,
        template: net0.clone(),
    };
    if let Some(tolerance) = options.compatibility_tolerance {
        let x = flatten(&data.psi);
        let residual = system
            .boundary_residuals(&x)
            .iter()
            .map(|r| r.value)
            .fold(0.0, f64::max);
        if !(residual <= tolerance) {
            return Err(Error::Compatibility { residual, tolerance });
        }
    }
    Ok(system)
}

fn flatten(points: &[GridFunction<Vec2>; 3]) -> Vec<f64> {
    let n = points[0].n();
    let mut x = vec![0.0; UNKNOWNS_PER_NODE * (n + 1)];
    for j in 0..=n {
        for (i, g) in points.iter().enumerate() {
            x[unknown(j, i, 0)] = g[j].x;
            x[unknown(j, i, 1)] = g[j].y;
        }
    }
    x
}

/// Residual of one imposed boundary row, divided by its largest coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct RowResidual {
    pub end: End,
    pub name: &'static str,
    pub value: f64,
}

/// Result of [`LinearizedSystem::solve`].
#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub state: NetworkState,
    /// Componentwise relative residual of the full system.
    pub relative_residual: f64,
    pub boundary: Vec<RowResidual>,
}

impl LinearSolution {
    pub fn max_boundary_residual(&self) -> f64 {
        self.boundary.iter().map(|r| r.value).fold(0.0, f64::max)
    }
}

impl LinearizedSystem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn matrix(&self) -> &BandMatrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn coefficient(&self, curve: usize) -> &GridFunction<f64> {
        &self.coefficient[curve]
    }

    /// Number of boundary rows imposed at `end`.
    pub fn boundary_row_count(&self, end: End) -> usize {
        self.ends.iter().filter(|b| b.end == end).map(|b| b.rows.len()).sum()
    }

    pub fn end_kind(&self, end: End) -> Option<EndKind> {
        self.ends.iter().find(|b| b.end == end).map(|b| b.kind)
    }

    /// Row-normalized residuals of the boundary rows at the vector `x`.
    pub fn boundary_residuals(&self, x: &[f64]) -> Vec<RowResidual> {
        let mut out = Vec::with_capacity(2 * ROWS_PER_END);
        for block in &self.ends {
            for (r, row) in block.rows.iter().enumerate() {
                let i = block.first_row + r;
                let scale = self.matrix.row_max_abs(i);
                let raw = (self.matrix.row_dot(i, x) - self.rhs[i]).abs();
                out.push(RowResidual {
                    end: block.end,
                    name: row.name,
                    value: if scale > 0.0 { raw / scale } else { raw },
                });
            }
        }
        out
    }

    pub fn solve(&self) -> Result<LinearSolution> {
        let sol = solve_banded(&self.matrix, &self.rhs)?;
        let n = self.n;
        let points: [Vec<Vec2>; 3] = [0, 1, 2].map(|i| {
            (0..=n)
                .map(|j| Vec2::new(sol.x[unknown(j, i, 0)], sol.x[unknown(j, i, 1)]))
                .collect()
        });
        let state = self.template.with_points(points)?;
        Ok(LinearSolution {
            boundary: self.boundary_residuals(&sol.x),
            state,
            relative_residual: sol.relative_residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Topology;
    use std::f64::consts::PI;

    fn straight_triod(n: usize) -> NetworkState {
        let dirs = [90.0_f64, 210.0, 330.0].map(|d| {
            let a = d.to_radians();
            let q = Vec2::new(a.cos(), a.sin()) / n as f64;
            Vec2::new((q.x * 2f64.powi(40)).round(), (q.y * 2f64.powi(40)).round()) / 2f64.powi(40)
        });
        let pts = dirs.map(|q| (0..=n).map(|j| q * j as f64).collect::<Vec<_>>());
        NetworkState::from_points(Topology::Triod, pts, Some(dirs.map(|q| q * n as f64))).unwrap()
    }

    fn bent_triod(n: usize) -> NetworkState {
        let base = straight_triod(n);
        let pts = [0, 1, 2].map(|i| {
            base.curve(i)
                .points()
                .iter()
                .enumerate()
                .map(|(j, p)| {
                    let x = j as f64 / n as f64;
                    let bump = if i == 0 { 0.05 * (PI * x).sin().powi(2) * x } else { 0.0 };
                    p + Vec2::new(bump, 0.0)
                })
                .collect()
        });
        base.with_points(pts).unwrap()
    }

    #[test]
    fn twelve_rows_per_end() {
        let net = straight_triod(32);
        let data = LinearData::natural(&net, &EnergyParams::new(0.2).unwrap(), Flavor::C1, 1e-3).unwrap();
        let sys = assemble(&net, Flavor::C1, &data, AssembleOptions::default()).unwrap();
        assert_eq!(sys.boundary_row_count(End::Zero), 12);
        assert_eq!(sys.boundary_row_count(End::One), 12);
        assert_eq!(sys.end_kind(End::One), Some(EndKind::Navier));
        assert_eq!(sys.matrix().n(), 6 * 33);
    }

    #[test]
    fn stationary_triod_is_a_fixed_point() {
        let net = straight_triod(64);
        let params = EnergyParams::new(0.2).unwrap();
        let data = LinearData::natural(&net, &params, Flavor::C1, 0.1).unwrap();
        let opts = AssembleOptions {
            compatibility_tolerance: Some(1e-10),
        };
        let sol = assemble(&net, Flavor::C1, &data, opts).unwrap().solve().unwrap();
        for i in 0..3 {
            for (a, b) in sol.state.curve(i).points().iter().zip(net.curve(i).points()) {
                assert!((a - b).norm() < 1e-10);
            }
        }
        assert!(sol.relative_residual < 1e-12);
    }

    #[test]
    fn wrong_flavor_is_rejected() {
        let net = straight_triod(32);
        let data = LinearData::natural(&net, &EnergyParams::default(), Flavor::C1, 1e-3).unwrap();
        assert!(matches!(
            assemble(&net, Flavor::C0, &data, AssembleOptions::default()),
            Err(Error::WrongTopology { .. })
        ));
    }

    #[test]
    fn incompatible_data_is_rejected() {
        let net = straight_triod(32);
        let mut data = LinearData::natural(&net, &EnergyParams::default(), Flavor::C1, 1e-3).unwrap();
        data.boundary[1][0] += 0.01;
        let opts = AssembleOptions {
            compatibility_tolerance: Some(1e-8),
        };
        assert!(matches!(
            assemble(&net, Flavor::C1, &data, opts),
            Err(Error::Compatibility { .. })
        ));
    }

    // Manufactured discrete solution: pick the target γ(dt) = φ + dt q and
    // derive f and the boundary data from it; the solver must return it.
    #[test]
    fn manufactured_solution_is_recovered() {
        let n = 48;
        let phi = bent_triod(n);
        let dt = 1e-3;
        let target = phi
            .with_points([0, 1, 2].map(|i| {
                phi.curve(i)
                    .points()
                    .iter()
                    .enumerate()
                    .map(|(j, p)| {
                        let x = j as f64 / n as f64;
                        p + Vec2::new(x * x * (1.0 - x), 0.3 * x * x) * (dt * (i + 1) as f64)
                    })
                    .collect()
            }))
            .unwrap();
        let coeff = [0, 1, 2].map(|i| phi.curve(i).speed().map(|v| 2.0 / v.powi(4)));
        let f = [0, 1, 2].map(|i| {
            let t = target.curve(i);
            GridFunction::new(
                (0..=n)
                    .map(|j| (t.points()[j] - phi.curve(i).points()[j]) / dt + t.derivative(4)[j] * coeff[i][j])
                    .collect(),
            )
            .unwrap()
        });
        let psi = [0, 1, 2].map(|i| phi.curve(i).position().clone());
        // boundary data: the rows evaluated at the target
        let mut data = LinearData {
            dt,
            f,
            psi,
            boundary: [[0.0; 12]; 2],
            third_order: Default::default(),
        };
        let probe = assemble(&phi, Flavor::C1, &data, AssembleOptions::default()).unwrap();
        let x = flatten(&[0, 1, 2].map(|i| target.curve(i).position().clone()));
        for (slot, block) in probe.ends.iter().enumerate() {
            for r in 0..12 {
                data.boundary[slot][r] = probe.matrix.row_dot(block.first_row + r, &x);
            }
        }
        let sol = assemble(&phi, Flavor::C1, &data, AssembleOptions::default())
            .unwrap()
            .solve()
            .unwrap();
        for i in 0..3 {
            for (a, b) in sol.state.curve(i).points().iter().zip(target.curve(i).points()) {
                assert!((a - b).norm() < 1e-10, "{}", (a - b).norm());
            }
        }
        assert!(sol.max_boundary_residual() < 1e-12);
    }
}
