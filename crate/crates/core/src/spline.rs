//! Quadratic B-spline basis on a uniform, conceptually unbounded lattice.
//!
//! A point `x` with `ξ = (x - origin) / h` lies in cell `i = floor(ξ)` and is
//! covered by the four nodes `i-1 ..= i+2`. With `s = ξ - i`,
//!
//! ```text
//! a = (1 - s)^2,  b = 1 + 2s - 2s^2,  c = s^2
//! N_{i-1} = a/4,  N_i = (a + b)/4,  N_{i+1} = (b + c)/4,  N_{i+2} = c/4
//! ```
//!
//! This basis is a partition of unity, reproduces linear fields exactly and
//! has the constant second moment `Σ N (x_i - x)(x_i - x)^T = h^2/2 I`.

use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};

/// Integer lattice coordinates of a background node.
pub type NodeKey = [i64; 3];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    spacing: f64,
    origin: Vec3,
}

impl GridSpec {
    pub fn new(spacing: f64) -> Result<Self> {
        Self::with_origin(spacing, Vec3::zeros())
    }

    pub fn with_origin(spacing: f64, origin: Vec3) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid spacing must be positive and finite, got {spacing}"
            )));
        }
        if !origin.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidInput("grid origin must be finite".into()));
        }
        Ok(Self { spacing, origin })
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    /// World position of a lattice node.
    pub fn node_position(&self, key: NodeKey) -> Vec3 {
        self.origin + Vec3::new(key[0] as f64, key[1] as f64, key[2] as f64) * self.spacing
    }

    /// Index of the cell containing coordinate `x` along `axis`.
    pub fn cell_of(&self, x: f64, axis: usize) -> Result<i64> {
        check_finite(x)?;
        Ok(((x - self.origin[axis]) / self.spacing).floor() as i64)
    }

    pub fn weights_1d(&self, x: f64, axis: usize) -> Result<WeightStencil1D> {
        check_finite(x)?;
        let xi = (x - self.origin[axis]) / self.spacing;
        let base = xi.floor();
        Ok(WeightStencil1D {
            base: base as i64,
            weights: quadratic_weights(xi - base),
        })
    }

    /// Tensor-product stencil at `x`. Iterating it yields the 64 covered
    /// nodes with their weights.
    pub fn weights_3d(&self, x: &Vec3) -> Result<Stencil3> {
        Ok(Stencil3 {
            axes: [
                self.weights_1d(x.x, 0)?,
                self.weights_1d(x.y, 1)?,
                self.weights_1d(x.z, 2)?,
            ],
        })
    }

    /// The constant `D_p` tensor of this basis.
    pub fn d_tensor(&self) -> Mat3 {
        Mat3::identity() * (0.5 * self.spacing * self.spacing)
    }

    pub fn d_tensor_inverse(&self) -> Mat3 {
        Mat3::identity() * (2.0 / (self.spacing * self.spacing))
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("non-finite coordinate {x}")))
    }
}

/// Weights for local coordinate `s ∈ [0, 1)` on nodes `i-1 ..= i+2`.
#[inline]
pub fn quadratic_weights(s: f64) -> [f64; 4] {
    let a = (1.0 - s) * (1.0 - s);
    let b = 1.0 + 2.0 * s - 2.0 * s * s;
    let c = s * s;
    [0.25 * a, 0.25 * (a + b), 0.25 * (b + c), 0.25 * c]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightStencil1D {
    /// Cell index `i`; weights apply to nodes `i-1 ..= i+2`.
    pub base: i64,
    pub weights: [f64; 4],
}

impl WeightStencil1D {
    pub fn node(&self, k: usize) -> i64 {
        self.base - 1 + k as i64
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Stencil3 {
    pub axes: [WeightStencil1D; 3],
}

impl Stencil3 {
    /// All 64 `(node, weight)` pairs in x-fastest order, zero weights included.
    pub fn iter(&self) -> impl Iterator<Item = (NodeKey, f64)> + '_ {
        let [sx, sy, sz] = &self.axes;
        (0..4).flat_map(move |c| {
            (0..4).flat_map(move |b| {
                (0..4).map(move |a| {
                    (
                        [sx.node(a), sy.node(b), sz.node(c)],
                        sx.weights[a] * sy.weights[b] * sz.weights[c],
                    )
                })
            })
        })
    }
}

/// Verifies partition of unity and linear completeness at a deterministic
/// set of sample points. Run once before any simulation.
pub fn self_check() -> Result<()> {
    let spec = GridSpec::with_origin(0.37, Vec3::new(-0.11, 0.05, 1.3))?;
    // low-discrepancy samples over a few cells
    let phi = [
        0.754_877_666_246_692_7,
        0.569_840_290_998_053_3,
        0.430_159_709_001_946_7,
    ];
    for n in 1..=256 {
        let p = Vec3::from_fn(|k, _| ((n as f64 * phi[k]).fract() - 0.5) * 7.0 * spec.spacing);
        let mut sum = 0.0;
        let mut first = Vec3::zeros();
        for (key, w) in spec.weights_3d(&p)?.iter() {
            sum += w;
            first += spec.node_position(key) * w;
        }
        if (sum - 1.0).abs() > 1e-14 || (first - p).norm() > 1e-12 * spec.spacing {
            return Err(Error::InvalidInput(format!(
                "spline basis self-check failed at {p:?}: sum = {sum}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(h: f64) -> GridSpec {
        GridSpec::new(h).unwrap()
    }

    #[test]
    fn cell_of_examples() {
        assert_eq!(spec(1.0).cell_of(0.3, 0).unwrap(), 0);
        assert_eq!(spec(1.0).cell_of(-0.3, 0).unwrap(), -1);
        assert_eq!(spec(0.5).cell_of(2.0, 0).unwrap(), 4);
        assert!(spec(1.0).cell_of(f64::NAN, 0).is_err());
        assert!(spec(1.0).weights_1d(f64::INFINITY, 1).is_err());
    }

    #[test]
    fn weights_on_node_and_midpoint() {
        let w = spec(1.0).weights_1d(3.0, 0).unwrap();
        assert_eq!(w.base, 3);
        assert_eq!(w.weights, [0.25, 0.5, 0.25, 0.0]);
        let w = spec(1.0).weights_1d(3.5, 0).unwrap();
        assert_eq!(w.weights, [0.0625, 0.4375, 0.4375, 0.0625]);
    }

    #[test]
    fn center_weight_at_lattice_node() {
        let s = spec(0.5);
        let st = s.weights_3d(&Vec3::new(1.0, -0.5, 0.0)).unwrap();
        let w = st.iter().find(|(k, _)| *k == [2, -1, 0]).map(|(_, w)| w).unwrap();
        assert_eq!(w, 0.125);
        assert_eq!(st.iter().count(), 64);
    }

    #[test]
    fn d_tensor_values() {
        assert_eq!(spec(1.0).d_tensor(), Mat3::identity() * 0.5);
        assert_eq!(spec(2.0).d_tensor(), Mat3::identity() * 2.0);
        assert!((spec(0.3).d_tensor() * spec(0.3).d_tensor_inverse() - Mat3::identity()).norm() < 1e-15);
    }

    #[test]
    fn rejects_bad_spacing() {
        assert!(GridSpec::new(0.0).is_err());
        assert!(GridSpec::new(-1.0).is_err());
        assert!(GridSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn builtin_self_check_passes() {
        self_check().unwrap();
    }

    proptest! {
        #[test]
        fn partition_of_unity_and_linear_completeness(x in -50.0f64..50.0, h in 0.05f64..4.0) {
            let s = spec(h);
            let st = s.weights_1d(x, 0).unwrap();
            let sum: f64 = st.weights.iter().sum();
            let first: f64 = (0..4).map(|k| st.weights[k] * st.node(k) as f64 * h).sum();
            prop_assert!((sum - 1.0).abs() < 1e-14);
            prop_assert!((first - x).abs() < 1e-13 * h.max(x.abs()));
            prop_assert!(st.weights.iter().all(|w| (0.0..=1.0).contains(w)));
        }

        #[test]
        fn translation_by_one_cell_shifts_base(x in -20.0f64..20.0) {
            let s = spec(1.0);
            let a = s.weights_1d(x, 0).unwrap();
            let b = s.weights_1d(x + 1.0, 0).unwrap();
            prop_assert_eq!(b.base, a.base + 1);
            for k in 0..4 {
                prop_assert!((a.weights[k] - b.weights[k]).abs() < 1e-12);
            }
        }
    }
}
