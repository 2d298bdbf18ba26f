//! Small fixed-size linear algebra helpers shared across the crate.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Axial vector of the affine momentum carried by a scaled velocity
/// gradient: `axl(B)_a = ε_abc B_cb`.
///
/// For a skew `B` this is twice the usual axial vector, matching the
/// angular momentum the APIC transfer deposits on the grid.
#[inline]
pub fn axl(b: &Mat3) -> Vec3 {
    Vec3::new(b[(2, 1)] - b[(1, 2)], b[(0, 2)] - b[(2, 0)], b[(1, 0)] - b[(0, 1)])
}

/// Rotation by `angle` radians about the unit `axis` (Rodrigues).
pub fn rotation(axis: Vec3, angle: f64) -> Mat3 {
    let k = axis.normalize();
    let kx = Mat3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Mat3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
}
