//! The Euler trilinear symbol near the base frequency triple and the
//! non-degeneracy of its angular Fourier coefficients.
//!
//! For frequencies `η₁ + η₂ + η₃ = 0` with unit normal `n ⟂ η_j`, rotating
//! `n` about each `η_j` by `γ_j` and feeding the three vectors into
//! `Λ(X₁,X₂,X₃) = (X₁·η₂)(X₂·X₃) + (X₂·η₁)(X₁·X₃)` gives a trigonometric
//! polynomial `Θ(γ)` of degree one in each angle. Only the eight modes
//! `e^{i(σ₁γ₁+σ₂γ₂+σ₃γ₃)}`, `σ_j = ±1`, occur, and the construction needs
//! all eight coefficients to stay away from zero.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::circuit::unit_f64;
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self([x, y, z])
    }

    pub fn dot(self, o: Self) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Self([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])
    }

    pub fn norm(self) -> f64 {
        math::sqrt(self.dot(self))
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Add for Vec3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3([self * v.0[0], self * v.0[1], self * v.0[2]])
    }
}

/// Three frequencies summing to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqTriple {
    pub eta: [Vec3; 3],
}

impl FreqTriple {
    pub fn new(eta1: Vec3, eta2: Vec3, eta3: Vec3) -> Result<Self> {
        if !(eta1.is_finite() && eta2.is_finite() && eta3.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite frequency".into()));
        }
        let scale = eta1.norm().max(eta2.norm()).max(eta3.norm()).max(1.0);
        let s = (eta1 + eta2 + eta3).norm();
        if s > 1e-12 * scale {
            return Err(Error::InvalidGeometry(format!("frequencies sum to a vector of length {s:e}")));
        }
        Ok(Self { eta: [eta1, eta2, eta3] })
    }

    /// `η₃ = -η₁ - η₂`.
    pub fn closing(eta1: Vec3, eta2: Vec3) -> Result<Self> {
        Self::new(eta1, eta2, -(eta1 + eta2))
    }

    /// `(0,1,0), (-1,-1,0), (1,0,0)`.
    pub fn base() -> Self {
        Self { eta: [Vec3::new(0.0, 1.0, 0.0), Vec3::new(-1.0, -1.0, 0.0), Vec3::new(1.0, 0.0, 0.0)] }
    }

    /// Unit normal `η₁ × η₂ / |η₁ × η₂|` with nonnegative `z`. Triples whose
    /// normal leans more than 60° away from the `z` axis are rejected.
    pub fn normal(&self) -> Result<Vec3> {
        let c = self.eta[0].cross(self.eta[1]);
        let len = c.norm();
        if !(len > 1e-12 * self.eta[0].norm() * self.eta[1].norm()) || len == 0.0 {
            return Err(Error::InvalidGeometry("η₁ and η₂ are collinear".into()));
        }
        let mut n = (1.0 / len) * c;
        if n.0[2] < 0.0 {
            n = -n;
        }
        if n.0[2] < 0.5 {
            return Err(Error::InvalidGeometry(format!("normal {:?} too far from the z axis", n.0)));
        }
        Ok(n)
    }

    /// Applies the same linear map to all three frequencies.
    pub fn map(&self, f: impl Fn(Vec3) -> Vec3) -> Result<Self> {
        Self::new(f(self.eta[0]), f(self.eta[1]), f(self.eta[2]))
    }
}

/// Largest `|X_j·ξ_j|` (relative to `|X_j||ξ_j|`) accepted by [`lambda_form`].
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// `(X₁·ξ₂)(X₂·X₃) + (X₂·ξ₁)(X₁·X₃)`, requiring each `X_j ⟂ ξ_j`.
pub fn lambda_form(xi: [Vec3; 3], x: [Vec3; 3]) -> Result<f64> {
    for j in 0..3 {
        let d = x[j].dot(xi[j]).abs();
        if d > ORTHOGONALITY_TOL * (x[j].norm() * xi[j].norm()).max(1.0) {
            return Err(Error::InvalidGeometry(format!("X{} is not orthogonal to ξ{} (dot {d:e})", j + 1, j + 1)));
        }
    }
    Ok(lambda_unchecked(xi, x))
}

fn lambda_unchecked(xi: [Vec3; 3], x: [Vec3; 3]) -> f64 {
    x[0].dot(xi[1]) * x[1].dot(x[2]) + x[1].dot(xi[0]) * x[0].dot(x[2])
}

/// Right-handed rotation of `x` by `theta` about `axis`.
pub fn axis_rotation(axis: Vec3, theta: f64, x: Vec3) -> Result<Vec3> {
    let len = axis.norm();
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::InvalidGeometry("rotation axis must be a nonzero finite vector".into()));
    }
    let u = (1.0 / len) * axis;
    let along = x.dot(u) * u;
    Ok(along + math::cos(theta) * (x - along) + math::sin(theta) * u.cross(x))
}

/// `Θ(γ₁,γ₂,γ₃) = Λ_η(R_{η₁}^{γ₁} n, R_{η₂}^{γ₂} n, R_{η₃}^{γ₃} n)`.
pub fn theta_function(eta: &FreqTriple, gamma: [f64; 3]) -> Result<f64> {
    let n = eta.normal()?;
    theta_with_normal(eta, n, gamma)
}

fn theta_with_normal(eta: &FreqTriple, n: Vec3, gamma: [f64; 3]) -> Result<f64> {
    let x = [
        axis_rotation(eta.eta[0], gamma[0], n)?,
        axis_rotation(eta.eta[1], gamma[1], n)?,
        axis_rotation(eta.eta[2], gamma[2], n)?,
    ];
    lambda_form(eta.eta, x)
}

/// `(σ₁, σ₂, σ₃)`, each `±1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignPattern(pub [i8; 3]);

impl SignPattern {
    /// All eight patterns, `(-,-,-)` first, last index fastest.
    pub fn all() -> [SignPattern; 8] {
        let mut out = [SignPattern([0; 3]); 8];
        for (k, o) in out.iter_mut().enumerate() {
            let bit = |b: usize| if (k >> (2 - b)) & 1 == 1 { 1 } else { -1 };
            *o = SignPattern([bit(0), bit(1), bit(2)]);
        }
        out
    }

    pub fn negated(self) -> Self {
        SignPattern([-self.0[0], -self.0[1], -self.0[2]])
    }
}

/// Fourier coefficients of `Θ` over the eight sign patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    pub coeffs: Vec<(SignPattern, Complex64)>,
    /// Largest magnitude among all other resolved Fourier modes.
    pub max_off_pattern: f64,
}

impl FourierCoefficients {
    pub fn get(&self, s: SignPattern) -> Complex64 {
        self.coeffs.iter().find(|(p, _)| *p == s).map(|(_, c)| *c).unwrap()
    }

    pub fn min_abs(&self) -> (SignPattern, f64) {
        self.coeffs
            .iter()
            .map(|(p, c)| (*p, c.norm()))
            .fold((SignPattern([0; 3]), f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    /// Magnitudes, ascending.
    pub fn magnitudes(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.coeffs.iter().map(|(_, c)| c.norm()).collect();
        m.sort_by(f64::total_cmp);
        m
    }
}

/// Smallest grid that resolves a degree-one polynomial without aliasing onto
/// the `±1` modes.
pub const MIN_GRID: usize = 4;

/// `c_σ = (2π)^{-3} ∫ Θ(γ) e^{-iσ·γ} dγ` by the tensor trapezoid rule on an
/// `grid³` lattice, which is exact here. The full discrete transform is
/// formed axis by axis so that every other mode can be checked to vanish.
pub fn fourier_coefficients(eta: &FreqTriple, grid: usize) -> Result<FourierCoefficients> {
    if grid < MIN_GRID {
        return Err(Error::InvalidParameter { name: "grid", reason: format!("must be at least {MIN_GRID}, got {grid}") });
    }
    let n = eta.normal()?;
    let g = grid;
    let angle = |k: usize| 2.0 * PI * k as f64 / g as f64;
    let mut data = vec![Complex64::new(0.0, 0.0); g * g * g];
    for a in 0..g {
        for b in 0..g {
            for c in 0..g {
                data[(a * g + b) * g + c] = Complex64::new(theta_with_normal(eta, n, [angle(a), angle(b), angle(c)])?, 0.0);
            }
        }
    }
    let twiddle: Vec<Complex64> = (0..g).map(|k| Complex64::from_polar(1.0, -angle(k))).collect();
    let strides = [g * g, g, 1];
    for &stride in &strides {
        let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let f = (idx / stride) % g;
            let base = idx - f * stride;
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..g {
                acc += data[base + k * stride] * twiddle[(f * k) % g];
            }
            *o = acc / g as f64;
        }
        data = out;
    }
    let bin = |s: i8| if s > 0 { 1 } else { g - 1 };
    let mut coeffs = Vec::with_capacity(8);
    let mut on = vec![false; data.len()];
    for p in SignPattern::all() {
        let idx = (bin(p.0[0]) * g + bin(p.0[1])) * g + bin(p.0[2]);
        on[idx] = true;
        coeffs.push((p, data[idx]));
    }
    let max_off_pattern = data
        .iter()
        .zip(&on)
        .filter(|(_, o)| !**o)
        .map(|(c, _)| c.norm())
        .fold(0.0, f64::max);
    Ok(FourierCoefficients { coeffs, max_off_pattern })
}

/// Grid used by [`nondegeneracy_scan`].
pub const SCAN_GRID: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub min_abs_c: f64,
    pub argmin: FreqTriple,
    pub argmin_pattern: SignPattern,
    pub samples: usize,
}

/// Perturbs `η₁, η₂` of `center` uniformly within `radius` (closing `η₃`)
/// and reports the smallest `|c_σ|` seen. The center itself is always the
/// first sample.
pub fn nondegeneracy_scan(center: &FreqTriple, radius: f64, samples: usize, seed: u64) -> Result<ScanResult> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter { name: "radius", reason: format!("must be nonnegative, got {radius}") });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ball = |rng: &mut ChaCha8Rng| loop {
        let v = Vec3::new(2.0 * unit_f64(rng) - 1.0, 2.0 * unit_f64(rng) - 1.0, 2.0 * unit_f64(rng) - 1.0);
        if v.norm() <= 1.0 {
            return radius * v;
        }
    };
    let c0 = fourier_coefficients(center, SCAN_GRID)?;
    let (p0, m0) = c0.min_abs();
    let mut best = ScanResult { min_abs_c: m0, argmin: *center, argmin_pattern: p0, samples: 1 };
    for _ in 1..samples.max(1) {
        let (d1, d2) = (ball(&mut rng), ball(&mut rng));
        let eta = FreqTriple::closing(center.eta[0] + d1, center.eta[1] + d2)?;
        let (p, m) = fourier_coefficients(&eta, SCAN_GRID)?.min_abs();
        best.samples += 1;
        if m < best.min_abs_c {
            best.min_abs_c = m;
            best.argmin = eta;
            best.argmin_pattern = p;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, SQRT_2};

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn rotation_examples() {
        let z = Vec3::new(0.0, 0.0, 1.0);
        let x = Vec3::new(1.0, 0.0, 0.0);
        assert!(close(axis_rotation(z, FRAC_PI_2, x).unwrap(), Vec3::new(0.0, 1.0, 0.0), 1e-15));
        let v = Vec3::new(0.3, -1.2, 0.7);
        let axis = Vec3::new(1.0, 2.0, -0.5);
        assert!(close(axis_rotation(axis, 0.0, v).unwrap(), v, 1e-15));
        let ab = axis_rotation(axis, 0.4, axis_rotation(axis, 1.1, v).unwrap()).unwrap();
        assert!(close(ab, axis_rotation(axis, 1.5, v).unwrap(), 1e-12));
        assert!((axis_rotation(axis, 2.3, v).unwrap().norm() - v.norm()).abs() < 1e-12);
        assert!(close(axis_rotation(axis, 2.3, axis).unwrap(), axis, 1e-12));
        assert!(axis_rotation(Vec3::new(0.0, 0.0, 0.0), 1.0, v).is_err());
    }

    #[test]
    fn lambda_checks_orthogonality() {
        let b = FreqTriple::base();
        let n = Vec3::new(0.0, 0.0, 1.0);
        assert_eq!(lambda_form(b.eta, [n, n, n]).unwrap(), 0.0);
        let bad = Vec3::new(0.0, 1.0, 0.0); // not ⟂ ξ₁ = (0,1,0)
        match lambda_form(b.eta, [bad, n, n]) {
            Err(Error::InvalidGeometry(m)) => assert!(m.contains("X1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn base_normal_and_degenerate_triples() {
        assert_eq!(FreqTriple::base().normal().unwrap(), Vec3::new(0.0, 0.0, 1.0));
        let col = FreqTriple::closing(Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)).unwrap();
        assert!(col.normal().is_err());
        let tilted = FreqTriple::closing(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(tilted.normal().is_err());
        assert!(FreqTriple::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn theta_periodic_and_zero_at_origin() {
        let b = FreqTriple::base();
        assert_eq!(theta_function(&b, [0.0; 3]).unwrap(), 0.0);
        let g = [0.3, -1.1, 2.0];
        let v = theta_function(&b, g).unwrap();
        for j in 0..3 {
            let mut h = g;
            h[j] += 2.0 * PI;
            assert!((theta_function(&b, h).unwrap() - v).abs() < 1e-12);
        }
    }

    #[test]
    fn base_coefficient_magnitudes() {
        let c = fourier_coefficients(&FreqTriple::base(), 8).unwrap();
        let mags: Vec<f64> = c.magnitudes().iter().map(|m| 8.0 * m).collect();
        let want = [SQRT_2 - 1.0, SQRT_2 - 1.0, 1.0, 1.0, 1.0, 1.0, SQRT_2 + 1.0, SQRT_2 + 1.0];
        for (m, w) in mags.iter().zip(want) {
            assert!((m - w).abs() < 1e-12, "{mags:?}");
        }
        assert!(c.max_off_pattern < 1e-12);
        for p in SignPattern::all() {
            assert!((c.get(p.negated()) - c.get(p).conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn sign_patterns_are_distinct() {
        let all = SignPattern::all();
        assert_eq!(all[0], SignPattern([-1, -1, -1]));
        assert_eq!(all[7], SignPattern([1, 1, 1]));
        for (i, a) in all.iter().enumerate() {
            assert!(all[i + 1..].iter().all(|b| a != b));
        }
    }

    #[test]
    fn grid_too_small_rejected() {
        assert!(fourier_coefficients(&FreqTriple::base(), 3).is_err());
    }
}
