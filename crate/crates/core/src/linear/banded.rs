//! Banded LU factorization with partial pivoting.
//!
//! Row `i` stores the columns `i - kl ..= i + kl + ku`; the extra `kl`
//! columns on the right hold the fill-in created by row interchanges.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Pivots below this fraction of the largest (equilibrated) entry count as zero.
pub const SINGULAR_PIVOT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || j + self.kl < i || j > i + self.kl + self.ku {
            return None;
        }
        Some(i * self.width + (j + self.kl - i))
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Adds `v` to entry `(i, j)`. Panics outside the declared band, which
    /// would be an assembly bug.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            i < self.n && j < self.n && self.in_band(i, j),
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let k = self.slot(i, j).expect("checked above");
        self.data[k] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            i < self.n && j < self.n && self.in_band(i, j),
            "entry ({i}, {j}) outside band"
        );
        let k = self.slot(i, j).expect("checked above");
        self.data[k] = v;
    }

    fn row_range(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        i.saturating_sub(self.kl)..=(i + self.ku).min(self.n - 1)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Value of row `i` applied to `x`.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row_range(i).map(|j| self.get(i, j) * x[j]).sum()
    }

    pub fn row_max_abs(&self, i: usize) -> f64 {
        self.row_range(i).map(|j| self.get(i, j).abs()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn from_dense(m: &DMatrix<f64>, kl: usize, ku: usize) -> Self {
        let mut b = Self::zeros(m.nrows(), kl, ku);
        for i in 0..m.nrows() {
            for j in b.row_range(i) {
                b.set(i, j, m[(i, j)]);
            }
        }
        b
    }

    fn scale_row(&mut self, i: usize, s: f64) {
        let start = i * self.width;
        for v in &mut self.data[start..start + self.width] {
            *v *= s;
        }
    }
}

/// `P A = L U` of a band matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    lu: BandMatrix,
    pivots: Vec<usize>,
    multipliers: Vec<f64>,
}

impl BandLu {
    pub fn factor(a: &BandMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let scale = (0..n).map(|i| a.row_max_abs(i)).fold(0.0, f64::max);
        let tiny = SINGULAR_PIVOT * scale;
        let mut pivots = vec![0; n];
        let mut multipliers = vec![0.0; n * kl.max(1)];
        for i in 0..n {
            let last = (i + kl).min(n - 1);
            let p = (i..=last)
                .max_by(|&r, &s| lu.get(r, i).abs().total_cmp(&lu.get(s, i).abs()).then(s.cmp(&r)))
                .expect("non-empty range");
            let pivot = lu.get(p, i);
            if !(pivot.abs() > tiny) {
                return Err(Error::Singular {
                    row: i,
                    pivot: pivot.abs(),
                });
            }
            pivots[i] = p;
            let right = (i + kl + ku).min(n - 1);
            if p != i {
                for c in i..=right {
                    let a_i = lu.get(i, c);
                    let a_p = lu.get(p, c);
                    let (si, sp) = (lu.slot(i, c).expect("band"), lu.slot(p, c).expect("band"));
                    lu.data[si] = a_p;
                    lu.data[sp] = a_i;
                }
            }
            for r in i + 1..=last {
                let m = lu.get(r, i) / pivot;
                multipliers[i * kl + (r - i - 1)] = m;
                if m == 0.0 {
                    continue;
                }
                let sr = lu.slot(r, i).expect("band");
                lu.data[sr] = 0.0;
                for c in i + 1..=right {
                    let u = lu.get(i, c);
                    if u != 0.0 {
                        let k = lu.slot(r, c).expect("fill-in within band");
                        lu.data[k] -= m * u;
                    }
                }
            }
        }
        Ok(Self {
            lu,
            pivots,
            multipliers,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl, ku) = (self.lu.n, self.lu.kl, self.lu.ku);
        let mut x = b.to_vec();
        for i in 0..n {
            x.swap(i, self.pivots[i]);
            let xi = x[i];
            for r in i + 1..=(i + kl).min(n - 1) {
                x[r] -= self.multipliers[i * kl + (r - i - 1)] * xi;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for c in i + 1..=(i + kl + ku).min(n - 1) {
                s -= self.lu.get(i, c) * x[c];
            }
            x[i] = s / self.lu.get(i, i);
        }
        x
    }
}

/// Solution of a band system with its achieved relative residual.
#[derive(Debug, Clone)]
pub struct BandSolution {
    pub x: Vec<f64>,
    /// `max_i |(Ax - b)_i| / (Σ_j |a_ij||x_j| + |b_i|)`.
    pub relative_residual: f64,
}

fn relative_residual(a: &BandMatrix, x: &[f64], b: &[f64]) -> f64 {
    (0..a.n)
        .map(|i| {
            let mut r = -b[i];
            let mut s = b[i].abs();
            for j in a.row_range(i) {
                let v = a.get(i, j) * x[j];
                r += v;
                s += v.abs();
            }
            if s == 0.0 {
                0.0
            } else {
                r.abs() / s
            }
        })
        .fold(0.0, f64::max)
}

/// Row-equilibrated LU solve followed by two steps of iterative refinement.
pub fn solve_banded(a: &BandMatrix, b: &[f64]) -> Result<BandSolution> {
    assert_eq!(b.len(), a.n, "right-hand side length");
    let mut scaled = a.clone();
    let mut rhs = b.to_vec();
    for i in 0..a.n {
        let m = a.row_max_abs(i);
        if m == 0.0 {
            return Err(Error::Singular { row: i, pivot: 0.0 });
        }
        scaled.scale_row(i, 1.0 / m);
        rhs[i] /= m;
    }
    let lu = BandLu::factor(&scaled)?;
    let mut x = lu.solve(&rhs);
    for _ in 0..2 {
        let ax = scaled.mul_vec(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
        let dx = lu.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    let relative_residual = relative_residual(a, &x, b);
    Ok(BandSolution { x, relative_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> BandMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in a.row_range(i) {
                a.set(i, j, rng.random_range(-1.0..1.0));
            }
            // weak diagonal so that pivoting actually happens
            a.add(i, i, 0.1);
        }
        a
    }

    #[test]
    fn identity_returns_rhs() {
        let mut a = BandMatrix::zeros(10, 2, 3);
        for i in 0..10 {
            a.set(i, i, 1.0);
        }
        let b: Vec<f64> = (0..10).map(|i| i as f64 - 3.5).collect();
        let s = solve_banded(&a, &b).unwrap();
        assert_eq!(s.x, b);
    }

    #[test]
    fn matches_dense_oracle() {
        for seed in 0..5 {
            let (n, kl, ku) = (60, 4, 7);
            let a = random_band(n, kl, ku, seed);
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let s = solve_banded(&a, &b).unwrap();
            let dense = a
                .to_dense()
                .lu()
                .solve(&nalgebra::DVector::from_vec(b.clone()))
                .unwrap();
            let diff =
                s.x.iter()
                    .zip(dense.iter())
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
            assert!(diff < 1e-10, "seed {seed}: {diff}");
            assert!(s.relative_residual < 1e-14);
        }
    }

    #[test]
    fn zero_row_is_singular() {
        let mut a = random_band(20, 2, 2, 7);
        for j in a.row_range(5) {
            a.set(5, j, 0.0);
        }
        assert!(matches!(solve_banded(&a, &[1.0; 20]), Err(Error::Singular { .. })));
    }

    #[test]
    fn dependent_rows_are_singular() {
        let mut a = random_band(20, 3, 3, 11);
        for j in a.row_range(8) {
            if a.in_band(9, j) {
                a.set(9, j, 2.0 * a.get(8, j));
            }
        }
        // zero the entries of row 9 not shared with row 8
        for j in a.row_range(9) {
            if !a.in_band(8, j) {
                a.set(9, j, 0.0);
            }
        }
        for j in a.row_range(8) {
            if !a.in_band(9, j) {
                a.set(8, j, 0.0);
            }
        }
        assert!(matches!(solve_banded(&a, &[1.0; 20]), Err(Error::Singular { .. })));
    }

    #[test]
    fn out_of_band_entries_read_zero() {
        let a = random_band(12, 1, 2, 3);
        assert_eq!(a.get(0, 5), 0.0);
        assert_eq!(a.get(6, 2), 0.0);
        assert_eq!(a.to_dense()[(4, 6)], a.get(4, 6));
    }
}
