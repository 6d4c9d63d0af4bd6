//! Numerical Lopatinskii–Shapiro check of the boundary conditions.
//!
//! Freezing coefficients at an end and taking the Laplace transform in time
//! leaves `λγ + (2/|φ_x|⁴) γ_xxxx = 0` on a half-line. Its bounded solutions
//! are spanned by `e_c e^{p x}` over the two roots `p` with `Re p < 0`, per
//! curve and component. The condition holds at `λ` iff the 12×12 matrix of
//! the boundary rows evaluated on these modes is nonsingular.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{EnergyParams, PointFrame, Vec2, DEFAULT_REGULARITY_FLOOR};
use crate::network::{End, Flavor, NetworkState};

use super::rows::{boundary_rows, end_kinds, EndKind, ROWS_PER_END};

pub type Complex64 = Complex<f64>;

/// Ratio `σ_min / σ_max` above which a sample passes.
pub const LS_THRESHOLD: f64 = 1e-6;

pub const DEFAULT_MODULI: [f64; 3] = [1e-2, 1.0, 1e2];
pub const DEFAULT_ARGUMENTS: [f64; 5] = [
    -std::f64::consts::FRAC_PI_2 + 0.1,
    -std::f64::consts::FRAC_PI_4,
    0.0,
    std::f64::consts::FRAC_PI_4,
    std::f64::consts::FRAC_PI_2 - 0.1,
];

/// The four roots of `p⁴ = -λ s⁴`, with the two decaying ones flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolRoots {
    pub roots: [Complex64; 4],
    pub decaying: [bool; 4],
}

impl SymbolRoots {
    pub fn decaying_roots(&self) -> Vec<Complex64> {
        self.roots
            .iter()
            .zip(self.decaying)
            .filter(|(_, d)| *d)
            .map(|(r, _)| *r)
            .collect()
    }
}

pub fn symbol_roots(lambda: Complex64, speed: f64) -> Result<SymbolRoots> {
    if !(lambda.re > 0.0 && lambda.im.is_finite() && lambda.re.is_finite()) {
        return Err(Error::InvalidArgument(format!("Re λ must be positive, got {lambda}")));
    }
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(Error::InvalidArgument(format!("speed must be positive, got {speed}")));
    }
    // principal branch of (-λ)^{1/4}; arg(-λ) = arg λ + π stays in (π/2, 3π/2)
    let base = Complex64::from_polar(
        lambda.norm().powf(0.25) * speed,
        (lambda.arg() + std::f64::consts::PI) / 4.0,
    );
    let mut roots = [Complex64::new(0.0, 0.0); 4];
    let mut k_pow = Complex64::new(1.0, 0.0);
    for r in &mut roots {
        *r = base * k_pow;
        k_pow *= Complex64::i();
    }
    Ok(SymbolRoots {
        roots,
        decaying: roots.map(|p| p.re < 0.0),
    })
}

/// Frozen frame data of one curve at the boundary point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionFrame {
    pub speed: f64,
    pub tau: [f64; 2],
    pub nu: [f64; 2],
}

impl JunctionFrame {
    pub fn new(speed: f64, tau: Vec2) -> Self {
        let t = tau.normalize();
        Self {
            speed,
            tau: [t.x, t.y],
            nu: [-t.y, t.x],
        }
    }

    fn point_frame(&self) -> PointFrame {
        PointFrame {
            speed: self.speed,
            tau: Vec2::new(self.tau[0], self.tau[1]),
            nu: Vec2::new(self.nu[0], self.nu[1]),
            k: 0.0,
            k_s: 0.0,
            k_ss: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LSQuery {
    pub lambda: Complex64,
    pub frames: [JunctionFrame; 3],
    pub kind: EndKind,
    pub end: End,
}

/// Boundary matrix on the decaying modes. Column `4 i + 2 c + r` is curve
/// `i`, component `c`, decaying root `r`. A row of derivative order `m` is
/// divided by `(|λ/2|^{1/4} |φ_x|)^m` so that all entries are O(1) in `λ`.
pub fn ls_matrix(query: &LSQuery) -> Result<DMatrix<Complex64>> {
    let frames = query.frames.map(|f| f.point_frame());
    let rows = boundary_rows(query.kind, &frames);
    let mut roots = Vec::with_capacity(3);
    for f in &query.frames {
        // the operator has coefficient 2/|φ_x|⁴, so p⁴ = -(λ/2)|φ_x|⁴
        let r = symbol_roots(query.lambda / 2.0, f.speed)?.decaying_roots();
        debug_assert_eq!(r.len(), 2);
        roots.push(r);
    }
    // at x = 1 the half-line runs backwards: modes e^{p(1-x)}
    let sign = match query.end {
        End::Zero => 1.0,
        End::One => -1.0,
    };
    let rho = (query.lambda.norm() / 2.0).powf(0.25);
    let mut m = DMatrix::from_element(ROWS_PER_END, ROWS_PER_END, Complex64::new(0.0, 0.0));
    for (r, row) in rows.iter().enumerate() {
        for t in &row.terms {
            for c in 0..2 {
                let w = t.weight[c];
                if w == 0.0 {
                    continue;
                }
                for (k, p) in roots[t.curve].iter().enumerate() {
                    m[(r, 4 * t.curve + 2 * c + k)] += (p * sign).powu(t.order as u32) * w;
                }
            }
        }
        let order = row.max_order() as i32;
        let single = row.terms.iter().all(|t| t.curve == row.terms[0].curve);
        // multi-curve rows already carry |φ_x|^{-m} in their weights
        let speed = if single {
            query.frames[row.terms[0].curve].speed
        } else {
            1.0
        };
        let scale = (rho * speed).powi(order);
        for z in m.row_mut(r).iter_mut() {
            *z /= scale;
        }
    }
    Ok(m)
}

/// Extreme singular values of a complex matrix.
pub fn singular_range(m: &DMatrix<Complex64>) -> (f64, f64) {
    let s = m.clone().svd(false, false).singular_values;
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    (min, max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LSSample {
    pub end: End,
    pub kind: EndKind,
    /// `[Re λ, Im λ]`.
    pub lambda: [f64; 2],
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LSReport {
    pub flavor: Flavor,
    pub threshold: f64,
    pub samples: Vec<LSSample>,
    pub min_ratio: f64,
    pub pass: bool,
}

impl LSReport {
    pub fn min_ratio_at(&self, end: End) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.end == end)
            .map(|s| s.ratio)
            .fold(f64::INFINITY, f64::min)
    }
}

/// The default sample of spectral parameters in the right half-plane.
pub fn default_lambdas() -> Vec<Complex64> {
    DEFAULT_MODULI
        .iter()
        .flat_map(|&r| DEFAULT_ARGUMENTS.iter().map(move |&a| Complex64::from_polar(r, a)))
        .collect()
}

pub fn ls_verify(net0: &NetworkState, _params: &EnergyParams, flavor: Flavor) -> Result<LSReport> {
    ls_verify_at(net0, flavor, &default_lambdas())
}

pub fn ls_verify_at(net0: &NetworkState, flavor: Flavor, lambdas: &[Complex64]) -> Result<LSReport> {
    if net0.topology() != flavor.topology() {
        return Err(Error::WrongTopology {
            expected: flavor.topology(),
            found: net0.topology(),
        });
    }
    let n = net0.n();
    let mut samples = Vec::new();
    for (end, kind) in end_kinds(flavor) {
        let node = end.node(n);
        for (i, c) in net0.curves().iter().enumerate() {
            let v = c.speed()[node];
            if !(v >= DEFAULT_REGULARITY_FLOOR) {
                return Err(Error::Irregular {
                    curve: i,
                    node,
                    speed: v,
                    threshold: DEFAULT_REGULARITY_FLOOR,
                });
            }
        }
        let frames = net0.frames_at(end).map(|f| JunctionFrame::new(f.speed, f.tau));
        for &lambda in lambdas {
            let m = ls_matrix(&LSQuery {
                lambda,
                frames,
                kind,
                end,
            })?;
            let (sigma_min, sigma_max) = singular_range(&m);
            samples.push(LSSample {
                end,
                kind,
                lambda: [lambda.re, lambda.im],
                sigma_min,
                sigma_max,
                ratio: if sigma_max > 0.0 { sigma_min / sigma_max } else { 0.0 },
            });
        }
    }
    let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    Ok(LSReport {
        flavor,
        threshold: LS_THRESHOLD,
        pass: min_ratio > LS_THRESHOLD,
        min_ratio,
        samples,
    })
}
