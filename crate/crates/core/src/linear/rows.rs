//! The twelve linear boundary conditions imposed at each end of the
//! parameter interval, with frames frozen at a reference state.
//!
//! A row is a sum of terms `⟨w, ∂ₓᵐ γⁱ(end)⟩`. The same description drives
//! the discrete assembly (where `∂ₓᵐ` is a one-sided stencil) and the
//! Lopatinskii–Shapiro matrix (where it acts on exponential modes).

use serde::{Deserialize, Serialize};

use crate::geometry::{EnergyParams, PointFrame, Vec2};
use crate::network::{End, Flavor, NetworkState, Topology};

/// Rows per end of the interval: 4 per curve end, 3 curves.
pub const ROWS_PER_END: usize = 12;

/// Which set of conditions holds at an end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndKind {
    /// Theta junction: concurrency, full second order, third order.
    JunctionC0,
    /// Triod junction: concurrency, angle, curvature sum, tangential second
    /// order, third order.
    JunctionC1,
    /// Fixed endpoint with vanishing second derivative.
    Navier,
}

impl EndKind {
    pub fn label(self) -> &'static str {
        match self {
            EndKind::JunctionC0 => "junction_c0",
            EndKind::JunctionC1 => "junction_c1",
            EndKind::Navier => "navier",
        }
    }
}

/// The ends of a network of the given flavor together with their conditions.
pub fn end_kinds(flavor: Flavor) -> [(End, EndKind); 2] {
    match flavor {
        Flavor::C0 => [(End::Zero, EndKind::JunctionC0), (End::One, EndKind::JunctionC0)],
        Flavor::C1 => [(End::Zero, EndKind::JunctionC1), (End::One, EndKind::Navier)],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub curve: usize,
    pub order: usize,
    pub weight: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRow {
    pub name: &'static str,
    pub terms: Vec<Term>,
}

impl BoundaryRow {
    fn new(name: &'static str, terms: Vec<Term>) -> Self {
        Self { name, terms }
    }

    pub fn max_order(&self) -> usize {
        self.terms.iter().map(|t| t.order).max().unwrap_or(0)
    }
}

fn unit(c: usize) -> Vec2 {
    if c == 0 {
        Vec2::x()
    } else {
        Vec2::y()
    }
}

fn concurrency_rows() -> Vec<BoundaryRow> {
    let mut rows = Vec::with_capacity(4);
    for other in [1, 2] {
        for c in 0..2 {
            rows.push(BoundaryRow::new(
                "concurrency",
                vec![
                    Term {
                        curve: 0,
                        order: 0,
                        weight: unit(c),
                    },
                    Term {
                        curve: other,
                        order: 0,
                        weight: -unit(c),
                    },
                ],
            ));
        }
    }
    rows
}

fn per_curve_rows(name: &'static str, order: usize) -> Vec<BoundaryRow> {
    (0..3)
        .flat_map(|i| (0..2).map(move |c| (i, c)))
        .map(|(i, c)| {
            BoundaryRow::new(
                name,
                vec![Term {
                    curve: i,
                    order,
                    weight: unit(c),
                }],
            )
        })
        .collect()
}

/// `-Σ |γ_x|^{-m} ⟨∂ₓᵐγ, ν⟩ ν`, component by component.
fn normal_projection_rows(name: &'static str, order: usize, frames: &[PointFrame; 3]) -> Vec<BoundaryRow> {
    (0..2)
        .map(|c| {
            let terms = frames
                .iter()
                .enumerate()
                .map(|(i, f)| Term {
                    curve: i,
                    order,
                    weight: -f.nu * (f.nu[c] / f.speed.powi(order as i32)),
                })
                .collect();
            BoundaryRow::new(name, terms)
        })
        .collect()
}

/// The twelve rows at one end, with frames frozen at `frames`.
pub fn boundary_rows(kind: EndKind, frames: &[PointFrame; 3]) -> Vec<BoundaryRow> {
    let mut rows = Vec::with_capacity(ROWS_PER_END);
    match kind {
        EndKind::JunctionC0 => {
            rows.extend(concurrency_rows());
            rows.extend(per_curve_rows("second_order", 2));
            rows.extend(normal_projection_rows("third_order", 3, frames));
        }
        EndKind::JunctionC1 => {
            rows.extend(concurrency_rows());
            rows.extend(normal_projection_rows("angle", 1, frames));
            rows.push(BoundaryRow::new(
                "curvature_sum",
                frames
                    .iter()
                    .enumerate()
                    .map(|(i, f)| Term {
                        curve: i,
                        order: 2,
                        weight: f.nu / (f.speed * f.speed),
                    })
                    .collect(),
            ));
            rows.extend((0..3).map(|i| {
                BoundaryRow::new(
                    "tangential_second_order",
                    vec![Term {
                        curve: i,
                        order: 2,
                        weight: frames[i].tau,
                    }],
                )
            }));
            rows.extend(normal_projection_rows("third_order", 3, frames));
        }
        EndKind::Navier => {
            rows.extend(per_curve_rows("endpoint", 0));
            rows.extend(per_curve_rows("second_order", 2));
        }
    }
    debug_assert_eq!(rows.len(), ROWS_PER_END);
    rows
}

/// Right-hand sides of the rows of [`boundary_rows`] derived from a reference
/// state: the linearized angle and third-order conditions carry the frozen
/// lower-order terms, the Navier rows carry the fixed endpoints.
pub fn natural_rhs(kind: EndKind, state: &NetworkState, end: End, params: &EnergyParams) -> [f64; ROWS_PER_END] {
    let frames = state.frames_at(end);
    let mut rhs = [0.0; ROWS_PER_END];
    let sum_tau: Vec2 = frames.iter().map(|f| f.tau).sum();
    match kind {
        EndKind::JunctionC0 => {
            let b = sum_tau * (-0.5 * params.mu);
            rhs[10] = b.x;
            rhs[11] = b.y;
        }
        EndKind::JunctionC1 => {
            rhs[4] = sum_tau.x;
            rhs[5] = sum_tau.y;
            let g2 = state.second_derivatives_at(end);
            let h: Vec2 = frames
                .iter()
                .zip(g2)
                .map(|(f, g)| -(f.nu * (3.0 * f.k * g.dot(&f.tau) / (f.speed * f.speed)) + f.tau * (0.5 * f.k * f.k)))
                .sum();
            rhs[10] = h.x;
            rhs[11] = h.y;
        }
        EndKind::Navier => {
            if let (Topology::Triod, Some(p)) = (state.topology(), state.endpoints()) {
                for i in 0..3 {
                    rhs[2 * i] = p[i].x;
                    rhs[2 * i + 1] = p[i].y;
                }
            }
        }
    }
    rhs
}
