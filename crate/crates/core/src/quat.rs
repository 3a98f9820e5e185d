//! Quaternion algebra and the gray-axis color rotation.
//!
//! A color (r, g, b) is represented as the pure quaternion r*i + g*j + b*k.
//! Filter taps act on colors by rotating them about the gray axis (1,1,1)/sqrt(3)
//! and scaling: p = s * R(theta) * v. The sandwich form w q w* with a unit
//! half-angle quaternion w and the circulant closed form below are the same
//! map; [`apply_color_rotation`] uses the closed form, [`rotate_about_axis`]
//! the sandwich, and tests hold them against each other.

use crate::error::{Error, Result};
use crate::num::Real;
use std::ops::{Add, Mul, Neg, Sub};

/// Quaternion w + x*i + y*j + z*k.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quaternion<F> {
    pub w: F,
    pub x: F,
    pub y: F,
    pub z: F,
}

impl<F: Real> Quaternion<F> {
    pub fn new(w: F, x: F, y: F, z: F) -> Self {
        Quaternion { w, x, y, z }
    }

    /// Pure quaternion (zero scalar part); how colors embed.
    pub fn pure(x: F, y: F, z: F) -> Self {
        Quaternion { w: F::zero(), x, y, z }
    }

    pub fn conjugate(self) -> Self {
        Quaternion { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn norm(self) -> F {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_pure(self, tol: F) -> bool {
        self.w.abs() <= tol
    }

    pub fn scaled(self, k: F) -> Self {
        Quaternion { w: self.w * k, x: self.x * k, y: self.y * k, z: self.z * k }
    }

    /// Imaginary part as a 3-vector.
    pub fn vector(self) -> [F; 3] {
        [self.x, self.y, self.z]
    }
}

impl<F: Real> Add for Quaternion<F> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Quaternion { w: self.w + o.w, x: self.x + o.x, y: self.y + o.y, z: self.z + o.z }
    }
}

impl<F: Real> Sub for Quaternion<F> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Quaternion { w: self.w - o.w, x: self.x - o.x, y: self.y - o.y, z: self.z - o.z }
    }
}

impl<F: Real> Neg for Quaternion<F> {
    type Output = Self;
    fn neg(self) -> Self {
        Quaternion { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }
}

/// Hamilton product. Non-commutative: i*j = k but j*i = -k.
impl<F: Real> Mul for Quaternion<F> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        hamilton_product(self, o)
    }
}

/// Hamilton product of two quaternions (the group operation; order matters).
pub fn hamilton_product<F: Real>(p: Quaternion<F>, q: Quaternion<F>) -> Quaternion<F> {
    Quaternion {
        w: p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z,
        x: p.w * q.x + p.x * q.w + p.y * q.z - p.z * q.y,
        y: p.w * q.y - p.x * q.z + p.y * q.w + p.z * q.x,
        z: p.w * q.z + p.x * q.y - p.y * q.x + p.z * q.w,
    }
}

/// RGB color as a 3-vector, interchangeable with a pure quaternion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColorVector<F> {
    pub r: F,
    pub g: F,
    pub b: F,
}

impl<F: Real> ColorVector<F> {
    pub fn new(r: F, g: F, b: F) -> Self {
        ColorVector { r, g, b }
    }

    pub fn to_quaternion(self) -> Quaternion<F> {
        Quaternion::pure(self.r, self.g, self.b)
    }

    pub fn from_quaternion(q: Quaternion<F>) -> Self {
        ColorVector { r: q.x, g: q.y, b: q.z }
    }

    pub fn as_array(self) -> [F; 3] {
        [self.r, self.g, self.b]
    }

    pub fn from_array(v: [F; 3]) -> Self {
        ColorVector { r: v[0], g: v[1], b: v[2] }
    }
}

/// Unit vector along (1,1,1): the axis every filter tap rotates about.
pub fn gray_axis<F: Real>() -> [F; 3] {
    let c = F::one() / F::from_f64(3.0).sqrt();
    [c, c, c]
}

/// Rotate the vector part of `q` by `theta` about a unit `axis` via the
/// sandwich w q w* with w = cos(theta/2) + sin(theta/2)(a1 i + a2 j + a3 k).
/// Errors if `axis` is not unit length. Preserves norm and purity.
pub fn rotate_about_axis<F: Real>(q: Quaternion<F>, axis: [F; 3], theta: F) -> Result<Quaternion<F>> {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let tol = F::epsilon() * F::from_f64(16.0);
    if (n - F::one()).abs() > tol {
        return Err(Error::invalid(format!(
            "rotation axis must be unit length, got norm {}",
            n.as_f64()
        )));
    }
    let half = theta * F::from_f64(0.5);
    let (sin, cos) = (half.sin(), half.cos());
    let w = Quaternion::new(cos, sin * axis[0], sin * axis[1], sin * axis[2]);
    Ok(w * q * w.conjugate())
}

/// Row coefficients of the gray-axis rotation matrix.
///
/// R(theta) is circulant:
/// ```text
/// | f1 f2 f3 |        f1 = 1/3 + 2/3 cos(theta)
/// | f3 f1 f2 |        f2 = 1/3 - 2/3 cos(theta - pi/3)
/// | f2 f3 f1 |        f3 = 1/3 - 2/3 cos(theta + pi/3)
/// ```
/// It is orthogonal with determinant 1, fixes (1,1,1), and every row and
/// column sums to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationCoeffs<F> {
    pub f1: F,
    pub f2: F,
    pub f3: F,
}

impl<F: Real> RotationCoeffs<F> {
    /// Matrix rows in order; row i gives output component i.
    pub fn rows(self) -> [[F; 3]; 3] {
        let RotationCoeffs { f1, f2, f3 } = self;
        [[f1, f2, f3], [f3, f1, f2], [f2, f3, f1]]
    }

    pub fn apply(self, v: [F; 3]) -> [F; 3] {
        let RotationCoeffs { f1, f2, f3 } = self;
        [
            f1 * v[0] + f2 * v[1] + f3 * v[2],
            f3 * v[0] + f1 * v[1] + f2 * v[2],
            f2 * v[0] + f3 * v[1] + f1 * v[2],
        ]
    }

    /// Applies the transposed matrix; for a rotation this is the inverse,
    /// i.e. identical to `rotation_coeffs(-theta).apply(v)`.
    pub fn apply_transpose(self, v: [F; 3]) -> [F; 3] {
        let RotationCoeffs { f1, f2, f3 } = self;
        [
            f1 * v[0] + f3 * v[1] + f2 * v[2],
            f2 * v[0] + f1 * v[1] + f3 * v[2],
            f3 * v[0] + f2 * v[1] + f1 * v[2],
        ]
    }
}

/// Coefficients of the gray-axis rotation by `theta`.
pub fn rotation_coeffs<F: Real>(theta: F) -> RotationCoeffs<F> {
    let third = F::from_f64(1.0 / 3.0);
    let two_thirds = F::from_f64(2.0 / 3.0);
    let pi3 = F::from_f64(std::f64::consts::FRAC_PI_3);
    RotationCoeffs {
        f1: third + two_thirds * theta.cos(),
        f2: third - two_thirds * (theta - pi3).cos(),
        f3: third - two_thirds * (theta + pi3).cos(),
    }
}

/// d/d(theta) of [`rotation_coeffs`]; same circulant layout. Columns of the
/// derivative matrix sum to zero, so gray inputs contribute no angle gradient.
pub fn rotation_coeffs_deriv<F: Real>(theta: F) -> RotationCoeffs<F> {
    let two_thirds = F::from_f64(2.0 / 3.0);
    let pi3 = F::from_f64(std::f64::consts::FRAC_PI_3);
    RotationCoeffs {
        f1: -two_thirds * theta.sin(),
        f2: two_thirds * (theta - pi3).sin(),
        f3: two_thirds * (theta + pi3).sin(),
    }
}

/// One filter tap applied to one color: `s * R(theta) * v`.
///
/// `s` may be zero or negative; no normalization by `s` happens anywhere, so
/// the map is defined for all parameter values. `theta` is unconstrained
/// (the coefficients are 2*pi periodic). Gray inputs (c,c,c) map to
/// (s*c, s*c, s*c) for every theta.
pub fn apply_color_rotation<F: Real>(s: F, theta: F, v: ColorVector<F>) -> ColorVector<F> {
    let out = rotation_coeffs(theta).apply(v.as_array());
    ColorVector { r: s * out[0], g: s * out[1], b: s * out[2] }
}
