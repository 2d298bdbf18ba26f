//! Conservation and contact-quality measurements.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::TetMesh;
use crate::integrator::Simulation;
use crate::math::{axl, Mat3, Vec3};

pub const CSV_HEADER: &str = "time,px,py,pz,Lx,Ly,Lz,KE,SE,PE,E_total,min_gap";

/// `Σ m_n v_n` over all nodes.
pub fn linear_momentum(masses: &[f64], v: &[Vec3]) -> Vec3 {
    masses.iter().zip(v).fold(Vec3::zeros(), |acc, (m, v)| acc + v * *m)
}

/// `Σ m_n x_n × v_n + Σ_p m_p axl(B_p)` about the origin.
pub fn angular_momentum(masses: &[f64], x: &[Vec3], v: &[Vec3], particles: &[usize], b: &[Mat3]) -> Vec3 {
    let nodal = masses
        .iter()
        .zip(x)
        .zip(v)
        .fold(Vec3::zeros(), |acc, ((m, x), v)| acc + x.cross(v) * *m);
    particles
        .iter()
        .zip(b)
        .fold(nodal, |acc, (&n, b)| acc + axl(b) * masses[n])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energies {
    pub kinetic: f64,
    pub strain: f64,
    pub potential: f64,
}

impl Energies {
    pub fn total(&self) -> f64 {
        self.kinetic + self.strain + self.potential
    }
}

/// Kinetic energy counts nodal velocities only; the `B` mode is left out.
pub fn kinetic_energy(masses: &[f64], v: &[Vec3]) -> f64 {
    0.5 * masses.iter().zip(v).map(|(m, v)| m * v.norm_squared()).sum::<f64>()
}

/// `-Σ m g · x`.
pub fn gravitational_energy(masses: &[f64], x: &[Vec3], gravity: &Vec3) -> f64 {
    -masses.iter().zip(x).map(|(m, x)| m * gravity.dot(x)).sum::<f64>()
}

pub fn total_energy(sim: &Simulation) -> Result<Energies> {
    let model = sim.model();
    let s = sim.state();
    Ok(Energies {
        kinetic: kinetic_energy(&model.masses, &s.v),
        strain: model.strain_energy(&s.x)?,
        potential: gravitational_energy(&model.masses, &s.x, &model.gravity),
    })
}

/// Closest point on triangle `abc` to `p`.
fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Signed solid angle of triangle `abc` seen from `p`.
fn solid_angle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let (ra, rb, rc) = (a - p, b - p, c - p);
    let (la, lb, lc) = (ra.norm(), rb.norm(), rc.norm());
    let num = ra.dot(&rb.cross(&rc));
    let den = la * lb * lc + ra.dot(&rb) * lc + rb.dot(&rc) * la + rc.dot(&ra) * lb;
    2.0 * num.atan2(den)
}

/// Signed distance from `p` to the closed surface `faces` (negative inside).
fn signed_distance(p: &Vec3, x: &[Vec3], faces: &[[usize; 3]]) -> f64 {
    let mut dist = f64::INFINITY;
    let mut winding = 0.0;
    for f in faces {
        let [a, b, c] = f.map(|i| x[i]);
        dist = dist.min((closest_on_triangle(p, &a, &b, &c) - p).norm());
        winding += solid_angle(p, &a, &b, &c);
    }
    // winding number is ±1 inside, 0 outside
    if dist > 0.0 && (winding / (4.0 * std::f64::consts::PI)).abs() > 0.5 {
        -dist
    } else {
        dist
    }
}

/// Minimum signed vertex-to-surface distance between two bodies, taken over
/// both directions. Negative values indicate interpenetration.
pub fn min_gap(mesh: &TetMesh, x: &[Vec3], body_a: usize, body_b: usize) -> Result<f64> {
    if body_a == body_b {
        return Err(Error::InvalidInput("min_gap needs two distinct bodies".into()));
    }
    let faces_of = |body| -> Result<Vec<[usize; 3]>> {
        let faces: Vec<[usize; 3]> = mesh.body_faces(body).copied().collect();
        if faces.is_empty() {
            return Err(Error::InvalidInput(format!("body {body} has no boundary")));
        }
        for f in &faces {
            let [a, b, c] = f.map(|i| x[i]);
            if !((b - a).cross(&(c - a)).norm() > 0.0) {
                return Err(Error::Degenerate(format!("boundary face {f:?} has zero area")));
            }
        }
        Ok(faces)
    };
    let fa = faces_of(body_a)?;
    let fb = faces_of(body_b)?;
    let verts_of = |body| {
        mesh.boundary_nodes()
            .iter()
            .copied()
            .filter(move |&n| mesh.node_body()[n] == body)
    };
    let one_way = |verts: &mut dyn Iterator<Item = usize>, faces: &[[usize; 3]]| {
        verts
            .map(|n| signed_distance(&x[n], x, faces))
            .fold(f64::INFINITY, f64::min)
    };
    Ok(one_way(&mut verts_of(body_a), &fb).min(one_way(&mut verts_of(body_b), &fa)))
}

/// One line of the diagnostics stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub time: f64,
    pub linear_momentum: Vec3,
    pub angular_momentum: Vec3,
    pub energies: Energies,
    /// Gap between bodies 0 and 1; `NaN` for single-body models.
    pub min_gap: f64,
}

impl DiagnosticsRow {
    pub fn capture(sim: &Simulation) -> Result<Self> {
        let model = sim.model();
        let s = sim.state();
        let min_gap = if model.mesh.body_count() >= 2 {
            min_gap(&model.mesh, &s.x, 0, 1)?
        } else {
            f64::NAN
        };
        Ok(Self {
            time: s.time,
            linear_momentum: linear_momentum(&model.masses, &s.v),
            angular_momentum: angular_momentum(&model.masses, &s.x, &s.v, sim.particles(), &s.b),
            energies: total_energy(sim)?,
            min_gap,
        })
    }

    pub fn csv_line(&self) -> String {
        let e = &self.energies;
        let fields = [
            self.time,
            self.linear_momentum.x,
            self.linear_momentum.y,
            self.linear_momentum.z,
            self.angular_momentum.x,
            self.angular_momentum.y,
            self.angular_momentum.z,
            e.kinetic,
            e.strain,
            e.potential,
            e.total(),
            self.min_gap,
        ];
        fields.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
    }
}

/// Writes the header once, then one row per call.
pub struct CsvWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write_row(&mut self, row: &DiagnosticsRow) -> std::io::Result<()> {
        writeln!(self.out, "{}", row.csv_line())
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentum_examples() {
        assert_eq!(linear_momentum(&[2.0], &[Vec3::x()]), Vec3::new(2.0, 0.0, 0.0));
        let v = Vec3::new(1.0, -2.0, 3.0);
        assert_eq!(linear_momentum(&[1.5, 1.5], &[v, -v]), Vec3::zeros());
        let l = angular_momentum(&[1.0], &[Vec3::x()], &[Vec3::y()], &[0], &[Mat3::zeros()]);
        assert_eq!(l, Vec3::z());
    }

    #[test]
    fn skew_b_contributes_twice_its_axial_part() {
        let s = 0.3;
        let m = 2.0;
        let mut b = Mat3::zeros();
        b[(1, 0)] = s;
        b[(0, 1)] = -s;
        let l = angular_momentum(&[m], &[Vec3::zeros()], &[Vec3::zeros()], &[0], &[b]);
        assert!((l - Vec3::new(0.0, 0.0, 2.0 * s * m)).norm() < 1e-15);
    }

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = (Vec3::zeros(), Vec3::x(), Vec3::y());
        let q = closest_on_triangle(&Vec3::new(0.2, 0.2, 1.0), &a, &b, &c);
        assert!((q - Vec3::new(0.2, 0.2, 0.0)).norm() < 1e-15);
        assert_eq!(closest_on_triangle(&Vec3::new(-1.0, -1.0, 0.0), &a, &b, &c), a);
        assert_eq!(closest_on_triangle(&Vec3::new(2.0, -0.5, 0.0), &a, &b, &c), b);
        assert_eq!(
            closest_on_triangle(&Vec3::new(0.5, -1.0, 0.0), &a, &b, &c),
            Vec3::new(0.5, 0.0, 0.0)
        );
        let q = closest_on_triangle(&Vec3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((q - Vec3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn csv_row_has_twelve_fields_with_seventeen_digits() {
        let row = DiagnosticsRow {
            time: 0.1,
            linear_momentum: Vec3::new(1.0, 2.0, 3.0),
            angular_momentum: Vec3::zeros(),
            energies: Energies {
                kinetic: 1.0 / 3.0,
                strain: 0.0,
                potential: -1.0,
            },
            min_gap: 0.5,
        };
        let line = row.csv_line();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), CSV_HEADER.split(',').count());
        assert_eq!(fields[7], "3.3333333333333331e-1");
        assert_eq!(fields[7].parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
