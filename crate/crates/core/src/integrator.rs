//! Explicit central-difference Newmark stepping with augury contact.
//!
//! Each step performs
//!
//! ```text
//! V^{n+1/2} = V^n + Δt/2 A^n
//! x^{n+1}   = x^n + Δt v^{n+1/2}
//! A^{n+1}   = {a(x^{n+1}), 0} + Â^{n+1}
//! V^{n+1}   = V^{n+1/2} + Δt/2 A^{n+1}
//! ```
//!
//! where `Â` is the augury correction evaluated with the transfer operator
//! and surface normals at `x^{n+1}`. Only boundary nodes carry a scaled
//! velocity gradient and receive corrections; interior nodes see the
//! mechanical acceleration alone.

use serde::{Deserialize, Serialize};

use crate::contact::{compute_normals, full_correction, ContactConfig};
use crate::error::{Error, Result};
use crate::fem::FemModel;
use crate::math::{Mat3, Vec3};
use crate::spline::{self, GridSpec};
use crate::transfer::{GeneralizedVelocity, TransferOperator};

/// Velocity the augury prediction starts from when `A^{n+1}` is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorBase {
    /// `V^n`, the velocity at the start of the step.
    #[default]
    StepStart,
    /// `V^{n+1/2} + Δt/2 {a(x^{n+1}), 0}`, the contact-free estimate of `V^{n+1}`.
    StepEnd,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    /// `None` runs the bodies without any contact coupling.
    pub contact: Option<ContactConfig>,
    pub predictor: PredictorBase,
}

impl IntegratorConfig {
    pub fn new(dt: f64, contact: Option<ContactConfig>) -> Self {
        Self {
            dt,
            contact,
            predictor: PredictorBase::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if let Some(c) = &self.contact {
            c.validate()?;
        }
        Ok(())
    }
}

/// Nodal kinematics at an integer time level.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub step: u64,
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub a: Vec<Vec3>,
    /// Scaled velocity gradient per boundary particle.
    pub b: Vec<Mat3>,
    pub b_rate: Vec<Mat3>,
}

impl SimState {
    fn is_finite(&self) -> bool {
        let vecs = self.x.iter().chain(&self.v).chain(&self.a);
        let mats = self.b.iter().chain(&self.b_rate);
        vecs.flat_map(|v| v.iter())
            .chain(mats.flat_map(|m| m.iter()))
            .all(|c| c.is_finite())
    }
}

#[derive(Clone, Debug)]
pub struct Simulation {
    model: FemModel,
    grid: GridSpec,
    config: IntegratorConfig,
    particle_mass: Vec<f64>,
    state: SimState,
}

impl Simulation {
    /// Sets up the initial state from nodal velocities at the reference
    /// configuration.
    ///
    /// `velocity_gradients`, when given, is the initial velocity gradient at
    /// every node; boundary particles start with `B = L D`. Without it
    /// `B(0) = 0`, which is exact for rigidly translating bodies.
    pub fn new(
        model: FemModel,
        grid: GridSpec,
        config: IntegratorConfig,
        velocities: Vec<Vec3>,
        velocity_gradients: Option<&[Mat3]>,
    ) -> Result<Self> {
        spline::self_check()?;
        config.validate()?;
        let n = model.mesh.node_count();
        if velocities.len() != n || model.masses.len() != n || model.fixed.len() != n {
            return Err(Error::InvalidInput(format!(
                "model has {n} nodes but {} initial velocities",
                velocities.len()
            )));
        }
        if let Some(g) = velocity_gradients {
            if g.len() != n {
                return Err(Error::InvalidInput(format!(
                    "{} velocity gradients for {n} nodes",
                    g.len()
                )));
            }
        }
        let d = grid.d_tensor();
        let particles = model.mesh.boundary_nodes();
        let b = particles
            .iter()
            .map(|&node| velocity_gradients.map_or(Mat3::zeros(), |g| g[node] * d))
            .collect();
        let particle_mass = particles.iter().map(|&node| model.masses[node]).collect();

        let mut sim = Self {
            state: SimState {
                time: 0.0,
                step: 0,
                x: model.mesh.ref_coords().to_vec(),
                v: velocities,
                a: vec![Vec3::zeros(); n],
                b,
                b_rate: vec![Mat3::zeros(); particles.len()],
            },
            model,
            grid,
            config,
            particle_mass,
        };
        sim.pin(true);
        let a_mech = sim.model.mechanical_acceleration(&sim.state.x)?;
        let base: Vec<GeneralizedVelocity> = sim.particle_velocities(&sim.state.v, &sim.state.b);
        sim.update_accelerations(a_mech, &base)?;
        sim.pin(false);
        Ok(sim)
    }

    pub fn model(&self) -> &FemModel {
        &self.model
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    /// Node indices of the contact particles.
    pub fn particles(&self) -> &[usize] {
        self.model.mesh.boundary_nodes()
    }

    pub fn particle_masses(&self) -> &[f64] {
        &self.particle_mass
    }

    fn particle_velocities(&self, v: &[Vec3], b: &[Mat3]) -> Vec<GeneralizedVelocity> {
        self.particles()
            .iter()
            .zip(b)
            .map(|(&node, b)| GeneralizedVelocity::new(v[node], *b))
            .collect()
    }

    /// Zeroes the rates of pinned nodes, and their velocities when `velocity`.
    fn pin(&mut self, velocity: bool) {
        let fixed = &self.model.fixed;
        for (n, _) in fixed.iter().enumerate().filter(|(_, f)| **f) {
            self.state.a[n] = Vec3::zeros();
            if velocity {
                self.state.v[n] = Vec3::zeros();
            }
        }
        for (p, &node) in self.model.mesh.boundary_nodes().iter().enumerate() {
            if fixed[node] {
                self.state.b_rate[p] = Mat3::zeros();
                if velocity {
                    self.state.b[p] = Mat3::zeros();
                }
            }
        }
    }

    /// Stores `A = {a_mech, 0} + Â` given the velocity the prediction starts from.
    fn update_accelerations(&mut self, a_mech: Vec<Vec3>, base: &[GeneralizedVelocity]) -> Result<()> {
        self.state.a = a_mech;
        for r in self.state.b_rate.iter_mut() {
            *r = Mat3::zeros();
        }
        let Some(cfg) = self.config.contact else {
            return Ok(());
        };
        let particles = self.model.mesh.boundary_nodes();
        if particles.is_empty() {
            return Ok(());
        }
        let positions: Vec<Vec3> = particles.iter().map(|&n| self.state.x[n]).collect();
        let op = TransferOperator::new(&positions, &self.particle_mass, &self.grid, cfg.mode)?;
        let normals = if cfg.iterations > 0 {
            compute_normals(&self.model.mesh, &self.state.x)?
        } else {
            Vec::new()
        };
        let a_particles: Vec<Vec3> = particles.iter().map(|&n| self.state.a[n]).collect();
        let correction = full_correction(&op, base, &a_particles, &normals, &cfg)?;
        for ((p, &node), c) in particles.iter().enumerate().zip(correction) {
            self.state.a[node] += c.v;
            self.state.b_rate[p] = c.b;
        }
        Ok(())
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.config.dt;
        let half = 0.5 * dt;
        let step_start = match self.config.predictor {
            PredictorBase::StepStart => Some(self.particle_velocities(&self.state.v, &self.state.b)),
            PredictorBase::StepEnd => None,
        };

        let s = &mut self.state;
        for ((x, v), a) in s.x.iter_mut().zip(s.v.iter_mut()).zip(&s.a) {
            *v += a * half;
            *x += *v * dt;
        }
        for (b, r) in s.b.iter_mut().zip(&s.b_rate) {
            *b += r * half;
        }
        self.pin(true);

        let a_mech = self.model.mechanical_acceleration(&self.state.x).map_err(|e| {
            log::error!("step {}: {e}", self.state.step + 1);
            e
        })?;
        let base = match step_start {
            Some(base) => base,
            None => {
                let mut base = self.particle_velocities(&self.state.v, &self.state.b);
                for (u, &node) in base.iter_mut().zip(self.model.mesh.boundary_nodes()) {
                    u.v += a_mech[node] * half;
                }
                base
            }
        };
        self.update_accelerations(a_mech, &base)?;
        self.pin(false);

        let s = &mut self.state;
        for (v, a) in s.v.iter_mut().zip(&s.a) {
            *v += a * half;
        }
        for (b, r) in s.b.iter_mut().zip(&s.b_rate) {
            *b += r * half;
        }
        s.step += 1;
        s.time = s.step as f64 * dt;
        self.pin(true);

        if !self.state.is_finite() {
            return Err(Error::NonFinite { step: self.state.step });
        }
        Ok(())
    }

    /// Steps until `end_time`, calling `observe` on the initial state, every
    /// `cadence` steps, and on the final state.
    pub fn run<F>(&mut self, end_time: f64, cadence: u64, mut observe: F) -> Result<()>
    where
        F: FnMut(&Simulation) -> Result<()>,
    {
        let cadence = cadence.max(1);
        let steps = self.steps_until(end_time);
        observe(self)?;
        for k in 1..=steps {
            self.step()?;
            if k % cadence == 0 || k == steps {
                observe(self)?;
            }
        }
        Ok(())
    }

    /// Number of further steps needed to reach `end_time`.
    pub fn steps_until(&self, end_time: f64) -> u64 {
        let remaining = (end_time - self.state.time) / self.config.dt;
        if remaining <= 0.0 {
            0
        } else {
            // tolerate round-off in end_time / dt
            (remaining - 1e-9).ceil() as u64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::ContactLaw;
    use crate::fem::{Material, TetMesh};
    use crate::scenario::{build_block_mesh, Placement};
    use crate::transfer::TransferMode;

    fn cube(offset: Vec3) -> TetMesh {
        build_block_mesh([1.0; 3], 1.0, &Placement::translation(offset + Vec3::repeat(0.5))).unwrap()
    }

    fn apic_contact(dt: f64) -> Option<ContactConfig> {
        Some(ContactConfig::new(dt, TransferMode::Apic, ContactLaw::Separation, 0.0, 1).unwrap())
    }

    #[test]
    fn uniform_translation_advances_exactly() {
        let mesh = cube(Vec3::zeros());
        let model = FemModel::new(mesh, vec![Material::new(1.0, 1e3, 0.3).unwrap()], Vec3::zeros()).unwrap();
        let v0 = Vec3::new(0.5, -0.25, 0.125);
        let dt = 0.0625;
        let mut sim = Simulation::new(
            model,
            GridSpec::new(1.0).unwrap(),
            IntegratorConfig::new(dt, apic_contact(dt)),
            vec![v0; 8],
            None,
        )
        .unwrap();
        let x0 = sim.state().x.clone();
        for k in 1..=10 {
            sim.step().unwrap();
            for (x, r) in sim.state().x.iter().zip(&x0) {
                assert!((x - (r + v0 * (k as f64 * dt))).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn free_fall_velocity_is_exact() {
        let g = Vec3::new(0.0, 0.0, -9.5);
        let model = FemModel::new(cube(Vec3::zeros()), vec![Material::new(1.0, 1e3, 0.3).unwrap()], g).unwrap();
        let v0 = Vec3::new(1.0, 0.0, 2.0);
        let dt = 0.01;
        let mut sim = Simulation::new(
            model,
            GridSpec::new(1.0).unwrap(),
            IntegratorConfig::new(dt, None),
            vec![v0; 8],
            None,
        )
        .unwrap();
        for _ in 0..25 {
            sim.step().unwrap();
        }
        let t = 25.0 * dt;
        for v in &sim.state().v {
            assert!((v - (v0 + g * t)).norm() < 1e-12);
        }
    }

    #[test]
    fn pinned_nodes_stay_put() {
        let g = Vec3::new(0.0, 0.0, -10.0);
        let model = FemModel::new(cube(Vec3::zeros()), vec![Material::new(1.0, 1e4, 0.3).unwrap()], g)
            .unwrap()
            .with_fixed([0, 1, 2, 3]);
        let x0 = model.mesh.ref_coords().to_vec();
        let dt = 1e-3;
        let mut sim = Simulation::new(
            model,
            GridSpec::new(0.5).unwrap(),
            IntegratorConfig::new(dt, apic_contact(dt)),
            vec![Vec3::new(0.0, 0.0, 1.0); 8],
            None,
        )
        .unwrap();
        for _ in 0..50 {
            sim.step().unwrap();
        }
        let s = sim.state();
        assert_eq!(s.x[..4], x0[..4]);
        assert!(s.v[..4].iter().all(|v| *v == Vec3::zeros()));
    }

    #[test]
    fn initial_velocity_gradient_seeds_b() {
        let model = FemModel::new(
            cube(Vec3::zeros()),
            vec![Material::new(1.0, 1e3, 0.3).unwrap()],
            Vec3::zeros(),
        )
        .unwrap();
        let grid = GridSpec::new(2.0).unwrap();
        let w = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let v: Vec<Vec3> = model.mesh.ref_coords().iter().map(|x| w * x).collect();
        let sim = Simulation::new(model, grid, IntegratorConfig::new(1e-3, None), v, Some(&[w; 8])).unwrap();
        for b in &sim.state().b {
            assert_eq!(*b, w * 2.0);
        }
    }

    #[test]
    fn steps_until_rounds_sensibly() {
        let model = FemModel::new(
            cube(Vec3::zeros()),
            vec![Material::new(1.0, 1e3, 0.3).unwrap()],
            Vec3::zeros(),
        )
        .unwrap();
        let sim = Simulation::new(
            model,
            GridSpec::new(1.0).unwrap(),
            IntegratorConfig::new(1e-4, None),
            vec![Vec3::zeros(); 8],
            None,
        )
        .unwrap();
        assert_eq!(sim.steps_until(0.0), 0);
        assert_eq!(sim.steps_until(0.04), 400);
        assert_eq!(sim.steps_until(0.040_05), 401);
    }

    #[test]
    fn rejects_bad_time_step() {
        let model = FemModel::new(
            cube(Vec3::zeros()),
            vec![Material::new(1.0, 1e3, 0.3).unwrap()],
            Vec3::zeros(),
        )
        .unwrap();
        let r = Simulation::new(
            model,
            GridSpec::new(1.0).unwrap(),
            IntegratorConfig::new(0.0, None),
            vec![Vec3::zeros(); 8],
            None,
        );
        assert!(r.is_err());
    }
}
