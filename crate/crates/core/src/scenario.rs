//! Deterministic construction of the benchmark problems.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::contact::{ContactConfig, ContactLaw};
use crate::error::{Error, Result};
use crate::fem::{FemModel, Material, TetMesh};
use crate::integrator::{IntegratorConfig, Simulation};
use crate::math::{rotation, Mat3, Vec3};
use crate::spline::GridSpec;
use crate::transfer::TransferMode;

/// Rigid placement `x ↦ R x + t` applied to a block meshed about its center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placement {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Placement {
    pub fn identity() -> Self {
        Self::translation(Vec3::zeros())
    }

    pub fn translation(t: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: t,
        }
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }
}

// Kuhn split of a hex along its 0-6 diagonal; conforming across neighbours.
const HEX_TETS: [[usize; 4]; 6] = [
    [0, 1, 2, 6],
    [0, 2, 3, 6],
    [0, 3, 7, 6],
    [0, 7, 4, 6],
    [0, 4, 5, 6],
    [0, 5, 1, 6],
];
const HEX_CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Structured block of `extent`, centered at the origin before `placement`,
/// with six tetrahedra per hexahedral cell.
///
/// Extents that are not a multiple of `h` get one extra cell along that axis
/// and a correspondingly smaller spacing, so the block keeps its size.
pub fn build_block_mesh(extent: [f64; 3], h: f64, placement: &Placement) -> Result<TetMesh> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("mesh size must be positive, got {h}")));
    }
    let mut cells = [0usize; 3];
    for axis in 0..3 {
        let ratio = extent[axis] / h;
        if !(ratio.is_finite() && extent[axis] > 0.0) {
            return Err(Error::InvalidInput(format!(
                "block extent {} along axis {axis} gives no cells",
                extent[axis]
            )));
        }
        let n = (ratio - 1e-9).ceil().max(1.0);
        if (ratio - ratio.round()).abs() > 1e-9 {
            log::warn!(
                "extent {} is not a multiple of h = {h}; using {n} cells of {}",
                extent[axis],
                extent[axis] / n
            );
        }
        cells[axis] = n as usize;
    }
    let [nx, ny, nz] = cells;
    let spacing = Vec3::new(extent[0] / nx as f64, extent[1] / ny as f64, extent[2] / nz as f64);
    let half = Vec3::new(extent[0], extent[1], extent[2]) * 0.5;
    let node = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);

    let mut coords = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let local = Vec3::new(i as f64 * spacing.x, j as f64 * spacing.y, k as f64 * spacing.z) - half;
                coords.push(placement.apply(&local));
            }
        }
    }

    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    let det = placement.rotation.determinant();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let corner = HEX_CORNERS.map(|[a, b, c]| node(i + a, j + b, k + c));
                for t in HEX_TETS {
                    let mut tet = t.map(|c| corner[c]);
                    // the template is positively oriented; reflections flip it
                    if det < 0.0 {
                        tet.swap(2, 3);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    let n = coords.len();
    TetMesh::new(coords, tets, vec![0; n])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    TwoBlock,
    Ramp,
    Toy1d,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::TwoBlock => "two-block",
            ScenarioKind::Ramp => "ramp",
            ScenarioKind::Toy1d => "toy1d",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-block" => Ok(ScenarioKind::TwoBlock),
            "ramp" => Ok(ScenarioKind::Ramp),
            "toy1d" => Ok(ScenarioKind::Toy1d),
            other => Err(Error::InvalidInput(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Resolved parameters of a finite element scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub mesh_size: f64,
    /// Background grid spacing divided by mesh size.
    pub grid_ratio: f64,
    pub dt: f64,
    pub end_time: f64,
    pub materials: Vec<Material>,
    pub gravity: Vec3,
    pub contact: ContactConfig,
}

impl ScenarioSpec {
    pub fn grid_spacing(&self) -> f64 {
        self.mesh_size * self.grid_ratio
    }
}

/// A ready-to-run problem.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub model: FemModel,
    pub initial_velocity: Vec<Vec3>,
}

impl Scenario {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.spec.grid_spacing())
    }

    /// Replaces transfer mode, law, friction and iteration count, keeping τ.
    pub fn with_contact(mut self, mode: TransferMode, law: ContactLaw, mu: f64, iterations: usize) -> Result<Self> {
        self.spec.contact = ContactConfig::new(self.spec.contact.tau, mode, law, mu, iterations)?;
        Ok(self)
    }

    pub fn simulation(&self) -> Result<Simulation> {
        Simulation::new(
            self.model.clone(),
            self.grid()?,
            IntegratorConfig::new(self.spec.dt, Some(self.spec.contact)),
            self.initial_velocity.clone(),
            None,
        )
    }

    /// Mass-weighted centroid of one body.
    pub fn body_centroid(&self, x: &[Vec3], body: usize) -> Vec3 {
        body_centroid(&self.model, x, body)
    }
}

pub fn body_centroid(model: &FemModel, x: &[Vec3], body: usize) -> Vec3 {
    let (mut sum, mut mass) = (Vec3::zeros(), 0.0);
    for ((x, m), b) in x.iter().zip(&model.masses).zip(model.mesh.node_body()) {
        if *b == body {
            sum += x * *m;
            mass += m;
        }
    }
    sum / mass
}

pub const TWO_BLOCK_MATERIAL: (f64, f64, f64) = (2700.0, 1e8, 0.3);
pub const TWO_BLOCK_OFFSET: f64 = 3.8;
pub const TWO_BLOCK_TILT_DEG: f64 = 22.0;
pub const TWO_BLOCK_END_TIME: f64 = 0.04;

/// Two 3×3×3 blocks colliding at an angle, meshed at `h = 2^k`.
///
/// Block 2 is offset by 3.8 along y and tilted 22° about the x-axis through
/// its own center. Defaults to APIC transfers with one separation iteration.
pub fn two_block_impact(k: i32) -> Result<Scenario> {
    if !(-4..=0).contains(&k) {
        return Err(Error::InvalidInput(format!(
            "two-block refinement k must lie in -4..=0, got {k}"
        )));
    }
    let h = 2f64.powi(k);
    let block1 = build_block_mesh([3.0; 3], h, &Placement::identity())?;
    let block2 = build_block_mesh(
        [3.0; 3],
        h,
        &Placement {
            rotation: rotation(Vec3::x(), TWO_BLOCK_TILT_DEG.to_radians()),
            translation: Vec3::new(0.0, TWO_BLOCK_OFFSET, 0.0),
        },
    )?;
    let mesh = TetMesh::merge(&[block1, block2])?;
    let (rho, e, nu) = TWO_BLOCK_MATERIAL;
    let mat = Material::new(rho, e, nu)?;
    let dt = 1e-4 * h;
    let v1 = Vec3::new(0.0, 35.0, 0.0);
    let v2 = Vec3::new(-15.0, -35.0, -15.0);
    let initial_velocity = mesh.node_body().iter().map(|&b| if b == 0 { v1 } else { v2 }).collect();
    let model = FemModel::new(mesh, vec![mat, mat], Vec3::zeros())?;
    Ok(Scenario {
        spec: ScenarioSpec {
            kind: ScenarioKind::TwoBlock,
            mesh_size: h,
            grid_ratio: 2.0,
            dt,
            end_time: TWO_BLOCK_END_TIME,
            materials: vec![mat, mat],
            gravity: Vec3::zeros(),
            contact: ContactConfig::new(dt, TransferMode::Apic, ContactLaw::Separation, 0.0, 1)?,
        },
        model,
        initial_velocity,
    })
}

pub const RAMP_ANGLE_DEG: f64 = 30.0;
pub const RAMP_GRAVITY: f64 = 100.0;
pub const RAMP_EXTENT: [f64; 3] = [4.0, 1.5, 0.25];
pub const RAMP_MATERIAL: (f64, f64, f64) = (1e6, 1e10, 0.3);
/// Distance from the block's uphill face to the upper end of the ramp.
pub const RAMP_BLOCK_MARGIN: f64 = 0.25;

/// Unit block resting on a 30° ramp whose bottom face is pinned.
///
/// The assembly is built with the ramp along local x (rising towards +x) and
/// then rotated about the y-axis; gravity stays along global -z. The block
/// starts flush against the ramp's upper end region and slides towards -x.
pub fn ramp_scenario(h: f64, mu: f64) -> Result<Scenario> {
    if ![0.25, 1.0 / 3.0, 0.33, 0.5, 1.0].iter().any(|v| (h - v).abs() < 1e-12) {
        log::warn!("ramp mesh size {h} is outside the reference set {{0.25, 0.33, 0.5, 1.0}}");
    }
    // 0.33 stands for a third so that the unit block meshes exactly
    let h = if (h - 0.33).abs() < 1e-12 { 1.0 / 3.0 } else { h };
    let angle = RAMP_ANGLE_DEG.to_radians();
    // rotating by -θ about y lifts local +x
    let tilt = rotation(Vec3::y(), -angle);
    let [rl, rw, rt] = RAMP_EXTENT;
    let ramp_center = Vec3::new(rl / 2.0, rw / 2.0, rt / 2.0);
    let block_center = Vec3::new(rl - RAMP_BLOCK_MARGIN - 0.5, rw / 2.0, rt + 0.5);
    let place = |c: Vec3| Placement {
        rotation: tilt,
        translation: tilt * c,
    };
    let ramp = build_block_mesh(RAMP_EXTENT, h, &place(ramp_center))?;
    let block = build_block_mesh([1.0; 3], h, &place(block_center))?;

    // block is body 0, ramp is body 1
    let ramp_bottom: Vec<usize> = ramp
        .ref_coords()
        .iter()
        .enumerate()
        .filter(|(_, x)| (tilt.transpose() * *x).z.abs() < 1e-9)
        .map(|(i, _)| i + block.node_count())
        .collect();
    let mesh = TetMesh::merge(&[block, ramp])?;
    let (rho, e, nu) = RAMP_MATERIAL;
    let mat = Material::new(rho, e, nu)?;
    let gravity = Vec3::new(0.0, 0.0, -RAMP_GRAVITY);
    let n = mesh.node_count();
    let model = FemModel::new(mesh, vec![mat, mat], gravity)?.with_fixed(ramp_bottom);
    let dt = 2.5e-5 * h;
    Ok(Scenario {
        spec: ScenarioSpec {
            kind: ScenarioKind::Ramp,
            mesh_size: h,
            grid_ratio: 0.5,
            dt,
            end_time: ramp_time_to_travel(1.0, angle, mu, RAMP_GRAVITY).unwrap_or(0.25),
            materials: vec![mat, mat],
            gravity,
            contact: ContactConfig::new(dt, TransferMode::Apic, ContactLaw::Friction, mu, 1)?,
        },
        model,
        initial_velocity: vec![Vec3::zeros(); n],
    })
}

/// Horizontal direction the block slides in.
pub fn ramp_downhill() -> Vec3 {
    -Vec3::x()
}

/// Horizontal displacement of a rigid block sliding from rest down an
/// incline of angle `theta` with Coulomb coefficient `mu`.
pub fn ramp_analytic(t: f64, theta: f64, mu: f64, g: f64) -> f64 {
    let a = g * (theta.sin() - mu * theta.cos());
    if a <= 0.0 || t <= 0.0 {
        return 0.0;
    }
    0.5 * a * t * t * theta.cos()
}

/// Time for the analytic slide to cover `distance` horizontally, `None` when
/// the block does not slide.
pub fn ramp_time_to_travel(distance: f64, theta: f64, mu: f64, g: f64) -> Option<f64> {
    let rate = ramp_analytic(1.0, theta, mu, g);
    (rate > 0.0).then(|| (distance / rate).sqrt())
}

pub fn degrees(rad: f64) -> f64 {
    rad * 180.0 / PI
}
