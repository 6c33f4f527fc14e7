//! Fixed-size complex 4×4 matrices and the few dense kernels the solver needs.

#![allow(clippy::needless_range_loop)]

use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

// inherent std float methods shadow these when std is linked
#[allow(unused_imports)]
use num_traits::Float;

pub type C64 = num_complex::Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Dense 4×4 complex matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CMatrix4(pub [[C64; 4]; 4]);

impl Default for CMatrix4 {
    fn default() -> Self {
        Self::zeros()
    }
}

impl CMatrix4 {
    pub const fn zeros() -> Self {
        CMatrix4([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        Self::from_diagonal([1.0; 4])
    }

    pub fn from_diagonal(d: [f64; 4]) -> Self {
        let mut m = Self::zeros();
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = C64::new(v, 0.0);
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..4).map(|i| self.0[i][i]).sum()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] = self.0[j][i].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..4 {
            for k in 0..4 {
                let a = self.0[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..4 {
                    out.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        out
    }

    /// `[self, rhs] = self·rhs − rhs·self`.
    pub fn commutator(&self, rhs: &Self) -> Self {
        self.matmul(rhs) - rhs.matmul(self)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|z| *z *= s);
        out
    }

    /// `self + s·rhs`, the axpy used by the Runge–Kutta stages.
    pub fn add_scaled(&self, s: f64, rhs: &Self) -> Self {
        let mut out = *self;
        for (o, r) in out.0.iter_mut().flatten().zip(rhs.0.iter().flatten()) {
            *o += r * s;
        }
        out
    }

    /// Largest element-wise deviation from Hermiticity, `max |m_ij − conj(m_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in i..4 {
                worst = worst.max((self.0[i][j] - self.0[j][i].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &C64> {
        self.0.iter().flatten()
    }

    /// Eigenvalues of the Hermitian part `(M + M†)/2`, ascending.
    ///
    /// The 4×4 Hermitian problem is embedded in the 8×8 real symmetric matrix
    /// `[[Re, −Im], [Im, Re]]`, whose spectrum is the Hermitian spectrum with
    /// every eigenvalue doubled, and solved by cyclic Jacobi rotations.
    pub fn hermitian_eigenvalues(&self) -> [f64; 4] {
        let h = (*self + self.adjoint()).scale(C64::new(0.5, 0.0));
        let mut a = [[0.0f64; 8]; 8];
        for i in 0..4 {
            for j in 0..4 {
                let z = h.0[i][j];
                a[i][j] = z.re;
                a[i + 4][j + 4] = z.re;
                a[i][j + 4] = -z.im;
                a[i + 4][j] = z.im;
            }
        }
        let mut ev = jacobi_eigenvalues(&mut a);
        ev.sort_by(|x, y| x.total_cmp(y));
        [ev[0], ev[2], ev[4], ev[6]]
    }
}

impl CMatrix4 {
    /// True when `(M + M†)/2 + shift·I` is positive definite, i.e. every
    /// eigenvalue of the Hermitian part exceeds `−shift`. A Cholesky attempt,
    /// much cheaper than the full spectrum.
    pub fn hermitian_part_exceeds(&self, shift: f64) -> bool {
        let mut l = [[ZERO; 4]; 4];
        for j in 0..4 {
            let mut d = self.0[j][j].re + shift;
            for k in 0..j {
                d -= l[j][k].norm_sqr();
            }
            if !(d > 0.0) {
                return false;
            }
            let djj = d.sqrt();
            l[j][j] = C64::new(djj, 0.0);
            for i in j + 1..4 {
                let mut v = 0.5 * (self.0[i][j] + self.0[j][i].conj());
                for k in 0..j {
                    v -= l[i][k] * l[j][k].conj();
                }
                l[i][j] = v / djj;
            }
        }
        true
    }
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi sweeps. The input is
/// overwritten.
pub fn jacobi_eigenvalues<const N: usize>(a: &mut [[f64; N]; N]) -> [f64; N] {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return [0.0; N];
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for (p, row) in a.iter().enumerate() {
            for v in &row[p + 1..] {
                off += v * v;
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..N {
            for q in p + 1..N {
                let apq = a[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    core::array::from_fn(|i| a[i][i])
}

impl Index<(usize, usize)> for CMatrix4 {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix4 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Add for CMatrix4 {
    type Output = CMatrix4;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for CMatrix4 {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().flatten().zip(rhs.0.iter().flatten()) {
            *a += b;
        }
    }
}

impl Sub for CMatrix4 {
    type Output = CMatrix4;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.0.iter_mut().flatten().zip(rhs.0.iter().flatten()) {
            *a -= b;
        }
        self
    }
}

impl Mul<f64> for CMatrix4 {
    type Output = CMatrix4;
    fn mul(self, rhs: f64) -> Self {
        self.scale(C64::new(rhs, 0.0))
    }
}

/// Solves the symmetric positive definite system `a·x = b` in place by
/// Cholesky factorisation. Returns `None` if `a` is not positive definite.
pub fn cholesky_solve(a: &[f64], b: &mut [f64], n: usize) -> Option<()> {
    let mut l = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    Some(())
}

/// Inverse of a symmetric positive definite matrix via repeated Cholesky solves.
pub fn spd_inverse(a: &[f64], n: usize) -> Option<alloc::vec::Vec<f64>> {
    let mut inv = alloc::vec![0.0; n * n];
    let mut col = alloc::vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|v| *v = 0.0);
        col[j] = 1.0;
        cholesky_solve(a, &mut col, n)?;
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal() {
        let m = CMatrix4::from_diagonal([0.4, -0.1, 0.2, 0.5]);
        let ev = m.hermitian_eigenvalues();
        let want = [-0.1, 0.2, 0.4, 0.5];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn eigenvalues_of_complex_two_by_two_block() {
        // [[a, c], [c*, b]] has eigenvalues (a+b)/2 ± sqrt(((a−b)/2)² + |c|²)
        let mut m = CMatrix4::zeros();
        m[(0, 0)] = C64::new(0.3, 0.0);
        m[(1, 1)] = C64::new(0.1, 0.0);
        m[(0, 1)] = C64::new(0.05, 0.12);
        m[(1, 0)] = C64::new(0.05, -0.12);
        let r = (0.01f64 + 0.05 * 0.05 + 0.12 * 0.12).sqrt();
        let ev = m.hermitian_eigenvalues();
        assert!(ev[0].abs() < 1e-13 && ev[1].abs() < 1e-13);
        assert!((ev[2] - (0.2 - r)).abs() < 1e-13);
        assert!((ev[3] - (0.2 + r)).abs() < 1e-13);
    }

    #[test]
    fn cholesky_matches_known_solution() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let mut b = [2.0, 1.0];
        cholesky_solve(&a, &mut b, 2).unwrap();
        assert!((b[0] - 0.5).abs() < 1e-15 && b[1].abs() < 1e-15);
        assert!(cholesky_solve(&[1.0, 2.0, 2.0, 1.0], &mut [1.0, 1.0], 2).is_none());
    }

    #[test]
    fn positive_definite_shift_matches_spectrum() {
        let mut m = CMatrix4::from_diagonal([0.5, 0.3, 0.2, 0.0]);
        m[(0, 1)] = C64::new(0.1, 0.2);
        m[(1, 0)] = C64::new(0.1, -0.2);
        let min = m.hermitian_eigenvalues()[0];
        assert!(m.hermitian_part_exceeds(-min + 1e-9));
        assert!(!m.hermitian_part_exceeds(-min - 1e-9));
    }
}
