//! Small fixed-size complex linear algebra used throughout the crate.
//!
//! Everything here is 2×2 or ℂ²; larger systems go through `faer`.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;
pub type Vec2 = [C64; 2];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

#[inline]
pub fn norm2(v: &Vec2) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr()
}

#[inline]
pub fn norm(v: &Vec2) -> f64 {
    norm2(v).sqrt()
}

/// Inner product linear in the first argument.
#[inline]
pub fn inner(u: &Vec2, v: &Vec2) -> C64 {
    u[0] * v[0].conj() + u[1] * v[1].conj()
}

#[inline]
pub fn scale(v: &Vec2, s: C64) -> Vec2 {
    [v[0] * s, v[1] * s]
}

#[inline]
pub fn add(u: &Vec2, v: &Vec2) -> Vec2 {
    [u[0] + v[0], u[1] + v[1]]
}

#[inline]
pub fn sub(u: &Vec2, v: &Vec2) -> Vec2 {
    [u[0] - v[0], u[1] - v[1]]
}

/// det[u v] for column vectors u, v.
#[inline]
pub fn wedge(u: &Vec2, v: &Vec2) -> C64 {
    u[0] * v[1] - u[1] * v[0]
}

/// Dense 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub const fn zero() -> Self {
        Mat2([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub const fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn scalar(s: C64) -> Self {
        Mat2([[s, ZERO], [ZERO, s]])
    }

    pub fn from_cols(c0: Vec2, c1: Vec2) -> Self {
        Mat2([[c0[0], c1[0]], [c0[1], c1[1]]])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    pub fn col(&self, j: usize) -> Vec2 {
        [self.0[0][j], self.0[1][j]]
    }

    #[inline]
    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    #[inline]
    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn scaled(&self, s: C64) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    /// Inverse, or `None` when the determinant is exactly zero.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == ZERO {
            return None;
        }
        let m = &self.0;
        let inv = det.inv();
        Some(Mat2::new(m[1][1] * inv, -m[0][1] * inv, -m[1][0] * inv, m[0][0] * inv))
    }

    #[inline]
    pub fn apply(&self, v: &Vec2) -> Vec2 {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-entry distance to the identity of `self* self`.
    pub fn unitarity_defect(&self) -> f64 {
        (self.adjoint() * *self - Mat2::identity()).max_abs()
    }

    /// Both eigenvalues, roots of λ² − tr λ + det.
    pub fn eigenvalues(&self) -> [C64; 2] {
        let tr = self.trace();
        let det = self.det();
        let disc = (tr * tr - 4.0 * det).sqrt();
        // pick the larger-magnitude root first, recover the other from the product
        let big = if (tr + disc).norm() >= (tr - disc).norm() {
            (tr + disc) * 0.5
        } else {
            (tr - disc) * 0.5
        };
        if big == ZERO {
            return [ZERO, ZERO];
        }
        [big, det / big]
    }

    /// Null vector of `self - λ`, picking the better-conditioned of the two
    /// row-derived candidates. Not normalised.
    pub fn eigenvector(&self, lambda: C64) -> Vec2 {
        let m = &self.0;
        let from_row0 = [m[0][1], lambda - m[0][0]];
        let from_row1 = [lambda - m[1][1], m[1][0]];
        if norm2(&from_row0) >= norm2(&from_row1) {
            from_row0
        } else {
            from_row1
        }
    }

    /// Singular values (largest first) in closed form.
    ///
    /// After a phase that makes `det` real and nonnegative, `σ₁ ± σ₂` are
    /// norms of `(a ± d̄, b ∓ c̄)`, which avoids cancellation when `σ₁ ≈ σ₂`.
    pub fn singular_values(&self) -> [f64; 2] {
        let det = self.det();
        let ph = if det.norm() > 0.0 { (det.conj() / det.norm()).sqrt() } else { ONE };
        let [[a, b], [c, d]] = self.0.map(|row| row.map(|z| z * ph));
        let sum = ((a + d.conj()).norm_sqr() + (b - c.conj()).norm_sqr()).sqrt();
        let diff = ((a - d.conj()).norm_sqr() + (b + c.conj()).norm_sqr()).sqrt();
        [0.5 * (sum + diff), 0.5 * (sum - diff).max(0.0)]
    }

    pub fn condition_number(&self) -> f64 {
        let [s1, s2] = self.singular_values();
        if s2 == 0.0 {
            f64::INFINITY
        } else {
            s1 / s2
        }
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2::new(a[0][0] + b[0][0], a[0][1] + b[0][1], a[1][0] + b[1][0], a[1][1] + b[1][1])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2::new(a[0][0] - b[0][0], a[0][1] - b[0][1], a[1][0] - b[1][0], a[1][1] - b[1][1])
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scaled(-ONE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = Mat2::new(C64::new(1.0, 2.0), C64::new(0.5, -1.0), C64::new(-0.3, 0.2), C64::new(2.0, 0.1));
        let p = m * m.inverse().unwrap();
        assert!((p - Mat2::identity()).max_abs() < 1e-14);
    }

    #[test]
    fn eigenpairs_of_upper_triangular() {
        let m = Mat2::new(C64::new(2.0, 0.0), ONE, ZERO, C64::new(-1.0, 0.0));
        let ev = m.eigenvalues();
        for lambda in ev {
            let v = m.eigenvector(lambda);
            let r = sub(&m.apply(&v), &scale(&v, lambda));
            assert!(norm(&r) < 1e-14 * norm(&v).max(1.0));
        }
        assert!((ev[0] * ev[1] - m.det()).norm() < 1e-14);
    }

    #[test]
    fn singular_values_match_svd_definition() {
        let m = Mat2::new(C64::new(0.3, -1.2), C64::new(0.7, 0.1), C64::new(-0.4, 0.9), C64::new(1.1, 0.5));
        let [s1, s2] = m.singular_values();
        // eigenvalues of M*M are σ²
        let g = m.adjoint() * m;
        let tr = g.trace().re;
        assert!((s1 * s1 + s2 * s2 - tr).abs() < 1e-13);
        assert!((s1 * s2 - m.det().norm()).abs() < 1e-13);
        // equal singular values, small scale
        let e = Mat2::new(C64::new(0.0, 1e-9), ZERO, ZERO, C64::new(0.0, -1e-9));
        assert_eq!(e.singular_values(), [1e-9, 1e-9]);
    }

    #[test]
    fn singular_values_of_diagonal() {
        let m = Mat2::new(C64::new(3.0, 0.0), ZERO, ZERO, C64::new(0.0, -0.5));
        let [s1, s2] = m.singular_values();
        assert!((s1 - 3.0).abs() < 1e-14 && (s2 - 0.5).abs() < 1e-14);
        assert!((m.condition_number() - 6.0).abs() < 1e-12);
    }
}
