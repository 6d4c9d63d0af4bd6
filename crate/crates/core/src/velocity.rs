//! Normal and tangential velocities of the flow and the first-variation check.
//!
//! The normal scalar is `A = 2 k_ss + k³ - μ k`. The parametric motion vector
//! `P = A ν + T τ` is assembled term by term from the derivatives of the
//! parametrization; its normal projection reproduces `A` and its tangential
//! projection is `T`.

use crate::error::{Error, Result};
use crate::geometry::{
    cross, stencil::wide_stencil, CurveSample, EnergyParams, GridFunction, Jet, Vec2, DEFAULT_REGULARITY_FLOOR,
};
use crate::network::{NetworkState, Topology};

/// Normal scalar at a node from the geometric form.
pub fn normal_scalar_at(jet: &Jet, mu: f64) -> f64 {
    let f = jet.frame();
    2.0 * f.k_ss + f.k * f.k * f.k - mu * f.k
}

/// Parametric motion vector `P = Aν + Tτ` at a node.
pub fn parametric_vector_at(jet: &Jet, mu: f64) -> Vec2 {
    parametric_split_at(jet, mu).0
}

/// Returns `(P, lead, remainder)` with `P = lead - remainder`,
/// `lead = 2 γ_xxxx / |γ_x|⁴` and `remainder` the lower-order part.
pub fn parametric_split_at(jet: &Jet, mu: f64) -> (Vec2, Vec2, Vec2) {
    let (g1, g2, g3, g4) = (jet.d1, jet.d2, jet.d3, jet.d4);
    let w = g1.norm_squared();
    let w2 = w * w;
    let w3 = w2 * w;
    let w4 = w2 * w2;
    let g21 = g2.dot(&g1);
    let lead = g4 * (2.0 / w2);
    let remainder = g3 * (12.0 * g21 / w3) + g2 * (5.0 * g2.norm_squared() / w3) + g2 * (8.0 * g3.dot(&g1) / w3)
        - g2 * (35.0 * g21 * g21 / w4)
        + g2 * (mu / w);
    (lead - remainder, lead, remainder)
}

/// Tangential scalar `T = ⟨P, τ⟩` at a node.
pub fn tangential_scalar_at(jet: &Jet, mu: f64) -> f64 {
    let tau = jet.d1 / jet.d1.norm();
    parametric_vector_at(jet, mu).dot(&tau)
}

fn regular(curve: &CurveSample) -> Result<()> {
    curve.check_regular(DEFAULT_REGULARITY_FLOOR, 0)
}

pub fn normal_scalar(curve: &CurveSample, params: &EnergyParams) -> Result<GridFunction<f64>> {
    regular(curve)?;
    Ok(GridFunction::from_vec_unchecked(
        (0..=curve.n())
            .map(|j| normal_scalar_at(&curve.jet(j), params.mu))
            .collect(),
    ))
}

pub fn tangential_scalar(curve: &CurveSample, params: &EnergyParams) -> Result<GridFunction<f64>> {
    regular(curve)?;
    Ok(GridFunction::from_vec_unchecked(
        (0..=curve.n())
            .map(|j| tangential_scalar_at(&curve.jet(j), params.mu))
            .collect(),
    ))
}

/// Velocity of one curve: `γ_t = rhs = -Aν - Tτ = -lead + remainder`.
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub a: GridFunction<f64>,
    pub t: GridFunction<f64>,
    pub rhs: GridFunction<Vec2>,
    /// `2 γ_xxxx / |γ_x|⁴`, the term treated implicitly by the stepper.
    pub lead: GridFunction<Vec2>,
    /// Lower-order part; `rhs ≈ -lead + remainder`.
    pub remainder: GridFunction<Vec2>,
}

pub fn motion_rhs(curve: &CurveSample, params: &EnergyParams) -> Result<VelocityField> {
    regular(curve)?;
    let n = curve.n();
    let mut a = Vec::with_capacity(n + 1);
    let mut t = Vec::with_capacity(n + 1);
    let mut rhs = Vec::with_capacity(n + 1);
    let mut lead = Vec::with_capacity(n + 1);
    let mut rem = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let jet = curve.jet(j);
        let frame = jet.frame();
        let aj = 2.0 * frame.k_ss + frame.k.powi(3) - params.mu * frame.k;
        let (p, l, r) = parametric_split_at(&jet, params.mu);
        let tj = p.dot(&frame.tau);
        a.push(aj);
        t.push(tj);
        rhs.push(-(frame.nu * aj) - frame.tau * tj);
        lead.push(l);
        rem.push(r);
    }
    Ok(VelocityField {
        a: GridFunction::from_vec_unchecked(a),
        t: GridFunction::from_vec_unchecked(t),
        rhs: GridFunction::from_vec_unchecked(rhs),
        lead: GridFunction::from_vec_unchecked(lead),
        remainder: GridFunction::from_vec_unchecked(rem),
    })
}

/// Directional derivative of the network energy along `psi`, evaluated twice:
/// from the first-variation formula (bulk integral plus junction brackets) and
/// by a central difference of the energy with step `t`. Both sides use
/// sixth-order derivatives and fourth-order quadrature, independent of the
/// second-order stencils of the flow, so that their agreement tests the
/// formula rather than the truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationCheck {
    pub analytic: f64,
    pub numeric: f64,
}

impl VariationCheck {
    pub fn relative_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.analytic - self.numeric).abs() / scale
        }
    }
}

pub fn first_variation_oracle(
    net: &NetworkState,
    params: &EnergyParams,
    psi: &[GridFunction<Vec2>; 3],
    t: f64,
) -> Result<VariationCheck> {
    let n = net.n();
    if psi.iter().any(|p| p.n() != n) {
        return Err(Error::GridMismatch(
            "perturbation grid differs from network grid".into(),
        ));
    }
    net.check_regular(DEFAULT_REGULARITY_FLOOR)?;
    check_perturbation(net, psi)?;
    let mu = params.mu;

    let mut analytic = 0.0;
    for (curve, p) in net.curves().iter().zip(psi) {
        let jets = accurate_jets(curve.points(), 4);
        let frames: Vec<_> = jets.iter().map(Jet::frame).collect();
        let bulk: Vec<f64> = frames
            .iter()
            .zip(p.values())
            .map(|(f, q)| {
                let a = 2.0 * f.k_ss + f.k.powi(3) - mu * f.k;
                a * q.dot(&f.nu) * f.speed
            })
            .collect();
        analytic += gregory(&bulk);
        let psi_x = accurate_jets(p.values(), 1);
        for (node, sign) in [(n, 1.0), (0, -1.0)] {
            let f = &frames[node];
            let psi_s = psi_x[node].d1 / f.speed;
            let first = 2.0 * psi_s.dot(&(f.nu * f.k));
            let second = p[node].dot(&(-(f.nu * (2.0 * f.k_s)) - f.tau * (f.k * f.k) + f.tau * mu));
            analytic += sign * (first + second);
        }
    }

    let energy = |s: f64| -> f64 {
        let mut e = 0.0;
        for (curve, p) in net.curves().iter().zip(psi) {
            let moved: Vec<Vec2> = curve.points().iter().zip(p.values()).map(|(x, q)| x + q * s).collect();
            let density: Vec<f64> = accurate_jets(&moved, 2)
                .iter()
                .map(|jet| {
                    let w = jet.d1.norm_squared();
                    let v = w.sqrt();
                    let k = cross(jet.d1, jet.d2) / (w * v);
                    (k * k + mu) * v
                })
                .collect();
            e += gregory(&density);
        }
        e
    };
    let numeric = (energy(t) - energy(-t)) / (2.0 * t);
    Ok(VariationCheck { analytic, numeric })
}

/// Derivatives up to `orders` at every node from wide windows.
fn accurate_jets(points: &[Vec2], orders: usize) -> Vec<Jet> {
    let n = points.len() - 1;
    let zero = Vec2::zeros();
    (0..=n)
        .map(|j| {
            let mut d = [zero; 4];
            for (m, dm) in d.iter_mut().enumerate().take(orders) {
                let (start, w) = wide_stencil(n, m + 1, j, m + 7);
                *dm = w.iter().zip(&points[start..]).map(|(c, p)| p * *c).sum();
            }
            Jet {
                d1: d[0],
                d2: d[1],
                d3: d[2],
                d4: d[3],
            }
        })
        .collect()
}

/// Composite trapezoid rule with Gregory end corrections, O(h⁴).
fn gregory(values: &[f64]) -> f64 {
    const ENDS: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    let n = values.len() - 1;
    let sum: f64 = values
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let k = j.min(n - j);
            v * ENDS.get(k).copied().unwrap_or(1.0)
        })
        .sum();
    sum / n as f64
}

fn check_perturbation(net: &NetworkState, psi: &[GridFunction<Vec2>; 3]) -> Result<()> {
    let scale = psi.iter().map(|p| p.max_norm()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-12 * scale;
    let mismatch = |node_of: &dyn Fn(&GridFunction<Vec2>) -> Vec2| {
        let v: Vec<Vec2> = psi.iter().map(node_of).collect();
        (v[0] - v[1]).norm().max((v[0] - v[2]).norm())
    };
    if mismatch(&|p| p.first()) > tol {
        return Err(Error::InvalidPerturbation("ψ differs between curves at x = 0".into()));
    }
    match net.topology() {
        Topology::Theta => {
            if mismatch(&|p| p.last()) > tol {
                return Err(Error::InvalidPerturbation("ψ differs between curves at x = 1".into()));
            }
        }
        Topology::Triod => {
            if psi.iter().any(|p| p.last().norm() > tol) {
                return Err(Error::InvalidPerturbation(
                    "ψ must vanish at the fixed endpoints".into(),
                ));
            }
        }
    }
    Ok(())
}
