//! Augury contact corrections.
//!
//! The boundary particles' velocities are predicted a time `τ` ahead,
//! smoothed through the shared background grid (`H`), and the particles are
//! given the acceleration that would reach the smoothed state after `τ`.
//! Every correction lies in the range of `G = H - I` and therefore carries no
//! net linear momentum (and, with APIC transfers, no net angular momentum).
//!
//! Contact laws other than `Sticky` iterate on this: the part of the proposed
//! velocity change that pulls a particle away from its surface, or that
//! exceeds the Coulomb cone, is fed back through `G` to cancel it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::TetMesh;
use crate::math::Vec3;
use crate::transfer::{GeneralizedVelocity, TransferMode, TransferOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactLaw {
    /// Pure grid smoothing; bodies stick on contact.
    Sticky,
    /// Frictionless contact that lets bodies separate.
    Separation,
    /// Rate-form Coulomb friction.
    Friction,
}

impl std::fmt::Display for ContactLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ContactLaw::Sticky => "sticky",
            ContactLaw::Separation => "separation",
            ContactLaw::Friction => "friction",
        })
    }
}

impl std::str::FromStr for ContactLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sticky" => Ok(ContactLaw::Sticky),
            "separation" => Ok(ContactLaw::Separation),
            "friction" => Ok(ContactLaw::Friction),
            other => Err(Error::InvalidInput(format!("unknown contact law `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactConfig {
    /// Augury horizon.
    pub tau: f64,
    pub mode: TransferMode,
    pub law: ContactLaw,
    /// Coulomb coefficient, used by the friction law only.
    pub mu: f64,
    /// Number of augury iterations; zero exactly for the sticky law.
    pub iterations: usize,
}

impl ContactConfig {
    pub fn new(tau: f64, mode: TransferMode, law: ContactLaw, mu: f64, iterations: usize) -> Result<Self> {
        let cfg = Self {
            tau,
            mode,
            law,
            mu,
            iterations,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sticky(tau: f64, mode: TransferMode) -> Self {
        Self {
            tau,
            mode,
            law: ContactLaw::Sticky,
            mu: 0.0,
            iterations: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidInput(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "friction coefficient must be non-negative, got {}",
                self.mu
            )));
        }
        match (self.law, self.iterations) {
            (ContactLaw::Sticky, 0) => Ok(()),
            (ContactLaw::Sticky, n) => Err(Error::InvalidInput(format!(
                "the sticky law takes no augury iterations, got {n}"
            ))),
            (law, 0) => Err(Error::InvalidInput(format!(
                "the {law} law needs at least one augury iteration"
            ))),
            _ => Ok(()),
        }
    }
}

/// Area-weighted outward unit normals of the boundary particles, in the order
/// of [`TetMesh::boundary_nodes`].
pub fn compute_normals(mesh: &TetMesh, coords: &[Vec3]) -> Result<Vec<Vec3>> {
    let mut acc = vec![Vec3::zeros(); mesh.node_count()];
    let mut weight = vec![0.0; mesh.node_count()];
    for (k, f) in mesh.boundary_faces().iter().enumerate() {
        let [a, b, c] = f.map(|i| coords[i]);
        // twice the area-weighted normal
        let n = (b - a).cross(&(c - a));
        if !(n.norm() > 0.0) {
            return Err(Error::Degenerate(format!("boundary face {k} has zero area")));
        }
        for &i in f {
            acc[i] += n;
            weight[i] += n.norm();
        }
    }
    mesh.boundary_nodes()
        .iter()
        .map(|&node| {
            let n = acc[node];
            let len = n.norm();
            if !(len > 1e-12 * weight[node]) {
                Err(Error::ZeroNormal { particle: node })
            } else {
                Ok(n / len)
            }
        })
        .collect()
}

/// `V̄ = V + τ A`; the mechanical rate of `B` is zero, so `B̄ = B`.
pub fn predict_velocity(
    velocities: &[GeneralizedVelocity],
    accelerations: &[Vec3],
    tau: f64,
) -> Vec<GeneralizedVelocity> {
    velocities
        .iter()
        .zip(accelerations)
        .map(|(u, a)| GeneralizedVelocity::new(u.v + a * tau, u.b))
        .collect()
}

/// `Â = (H - I) V̄ / τ`.
pub fn base_correction(
    op: &TransferOperator,
    predicted: &[GeneralizedVelocity],
    tau: f64,
) -> Result<Vec<GeneralizedVelocity>> {
    let inv_tau = 1.0 / tau;
    Ok(op.apply_g(predicted)?.into_iter().map(|g| g * inv_tau).collect())
}

/// The part of a proposed velocity change that the contact law rejects.
pub fn undesirable_delta(
    delta: &GeneralizedVelocity,
    normal: &Vec3,
    law: ContactLaw,
    mu: f64,
) -> Result<GeneralizedVelocity> {
    if !((normal.norm() - 1.0).abs() <= 1e-10) {
        return Err(Error::InvalidInput(format!(
            "contact normal must be unit length, got |n| = {}",
            normal.norm()
        )));
    }
    let dv = delta.v;
    let dn = dv.dot(normal);
    Ok(match law {
        ContactLaw::Sticky => GeneralizedVelocity::zero(),
        _ if dn > 0.0 => *delta,
        ContactLaw::Separation => GeneralizedVelocity::zero(),
        ContactLaw::Friction => {
            let tangential = dv - normal * dn;
            let t_norm = tangential.norm();
            let v = if t_norm <= 1e-14 * dv.norm() {
                tangential
            } else {
                let slip = t_norm.min(-mu * dn);
                tangential * (1.0 - slip / t_norm)
            };
            GeneralizedVelocity::new(v, delta.b)
        }
    })
}

/// `V̂_N` of the iterative series starting from `V̂_0 = H V̄`.
pub fn augury_series(
    op: &TransferOperator,
    predicted: &[GeneralizedVelocity],
    normals: &[Vec3],
    cfg: &ContactConfig,
) -> Result<Vec<GeneralizedVelocity>> {
    check_operator(op, cfg)?;
    let mut current = op.apply_h(predicted)?;
    if cfg.iterations == 0 {
        return Ok(current);
    }
    if normals.len() != predicted.len() {
        return Err(Error::InvalidInput(format!(
            "{} normals for {} particles",
            normals.len(),
            predicted.len()
        )));
    }
    for _ in 0..cfg.iterations {
        let rejected = current
            .iter()
            .zip(predicted)
            .zip(normals)
            .map(|((c, p), n)| undesirable_delta(&(*c - *p), n, cfg.law, cfg.mu))
            .collect::<Result<Vec<_>>>()?;
        for (c, g) in current.iter_mut().zip(op.apply_g(&rejected)?) {
            *c += g;
        }
    }
    Ok(current)
}

/// Augury acceleration `Â = (V̂_N - V̄) / τ` with `V̄ = V + τ A_mech`.
pub fn full_correction(
    op: &TransferOperator,
    velocities: &[GeneralizedVelocity],
    accelerations: &[Vec3],
    normals: &[Vec3],
    cfg: &ContactConfig,
) -> Result<Vec<GeneralizedVelocity>> {
    let predicted = predict_velocity(velocities, accelerations, cfg.tau);
    let corrected = augury_series(op, &predicted, normals, cfg)?;
    let inv_tau = 1.0 / cfg.tau;
    Ok(corrected
        .into_iter()
        .zip(&predicted)
        .map(|(c, p)| (c - *p) * inv_tau)
        .collect())
}

fn check_operator(op: &TransferOperator, cfg: &ContactConfig) -> Result<()> {
    cfg.validate()?;
    if op.mode() != cfg.mode {
        return Err(Error::InvalidInput(format!(
            "transfer operator is {} but contact config asks for {}",
            op.mode(),
            cfg.mode
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Mat3;

    fn gv(x: f64, y: f64, z: f64) -> GeneralizedVelocity {
        GeneralizedVelocity::translation(Vec3::new(x, y, z))
    }

    #[test]
    fn separating_change_is_undesirable() {
        let d = GeneralizedVelocity::new(Vec3::new(0.0, 0.0, 0.4), Mat3::identity());
        for law in [ContactLaw::Separation, ContactLaw::Friction] {
            assert_eq!(undesirable_delta(&d, &Vec3::z(), law, 0.3).unwrap(), d);
        }
    }

    #[test]
    fn pure_approach_is_desirable() {
        let d = gv(0.0, 0.0, -1.0);
        for mu in [0.0, 0.2, 5.0] {
            let u = undesirable_delta(&d, &Vec3::z(), ContactLaw::Friction, mu).unwrap();
            assert_eq!(u.v, Vec3::zeros());
        }
        let u = undesirable_delta(&d, &Vec3::z(), ContactLaw::Separation, 0.0).unwrap();
        assert_eq!(u, GeneralizedVelocity::zero());
    }

    #[test]
    fn friction_cone_clips_tangential_change() {
        let d = gv(0.3, 0.0, -1.0);
        let u = undesirable_delta(&d, &Vec3::z(), ContactLaw::Friction, 0.2).unwrap();
        assert!((u.v - Vec3::new(0.1, 0.0, 0.0)).norm() < 1e-15);
        let u = undesirable_delta(&d, &Vec3::z(), ContactLaw::Friction, 10.0).unwrap();
        assert!(u.v.norm() < 1e-15);
        // frictionless: all tangential change rejected
        let u = undesirable_delta(&d, &Vec3::z(), ContactLaw::Friction, 0.0).unwrap();
        assert!((u.v - Vec3::new(0.3, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn friction_always_rejects_gradient_change() {
        let d = GeneralizedVelocity::new(Vec3::new(0.0, 0.1, -1.0), Mat3::identity() * 0.5);
        let u = undesirable_delta(&d, &Vec3::z(), ContactLaw::Friction, 1.0).unwrap();
        assert_eq!(u.b, d.b);
        let u = undesirable_delta(&d, &Vec3::z(), ContactLaw::Separation, 1.0).unwrap();
        assert_eq!(u.b, Mat3::zeros());
    }

    #[test]
    fn non_unit_normal_rejected() {
        assert!(undesirable_delta(&gv(1.0, 0.0, 0.0), &Vec3::new(0.0, 0.0, 2.0), ContactLaw::Friction, 0.1).is_err());
    }

    #[test]
    fn prediction_is_linear_and_keeps_b() {
        let b = Mat3::identity() * 3.0;
        let v = [GeneralizedVelocity::new(Vec3::zeros(), b)];
        let p = predict_velocity(&v, &[Vec3::new(1.0, 0.0, 0.0)], 0.5);
        assert_eq!(p[0].v, Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(p[0].b, b);
        let p = predict_velocity(&v, &[Vec3::zeros()], 0.5);
        assert_eq!(p[0], v[0]);
    }

    #[test]
    fn config_validation() {
        let ok = ContactConfig::new(1e-3, TransferMode::Apic, ContactLaw::Friction, 0.2, 1);
        assert!(ok.is_ok());
        assert!(ContactConfig::new(0.0, TransferMode::Apic, ContactLaw::Friction, 0.2, 1).is_err());
        assert!(ContactConfig::new(1e-3, TransferMode::Apic, ContactLaw::Friction, -0.1, 1).is_err());
        assert!(ContactConfig::new(1e-3, TransferMode::Apic, ContactLaw::Sticky, 0.0, 1).is_err());
        assert!(ContactConfig::new(1e-3, TransferMode::Pic, ContactLaw::Separation, 0.0, 0).is_err());
        assert!(ContactConfig::sticky(1e-3, TransferMode::Pic).validate().is_ok());
    }

    #[test]
    fn law_and_mode_parse() {
        assert_eq!("Friction".parse::<ContactLaw>().unwrap(), ContactLaw::Friction);
        assert_eq!("apic".parse::<TransferMode>().unwrap(), TransferMode::Apic);
        assert!("slip".parse::<ContactLaw>().is_err());
    }
}
