//! Linear tetrahedral total-Lagrangian finite elements with a compressible
//! Neo-Hookean material and one quadrature point per element.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};

/// Multi-body linear tetrahedral mesh.
///
/// Boundary faces are stored outward oriented: `(x1 - x0) × (x2 - x0)`
/// points away from the owning tetrahedron.
#[derive(Clone, Debug)]
pub struct TetMesh {
    ref_coords: Vec<Vec3>,
    tets: Vec<[usize; 4]>,
    node_body: Vec<usize>,
    tet_body: Vec<usize>,
    boundary_faces: Vec<[usize; 3]>,
    boundary_nodes: Vec<usize>,
    ref_volume: Vec<f64>,
    dm_inv: Vec<Mat3>,
}

fn shape_matrix(x: &[Vec3], t: &[usize; 4]) -> Mat3 {
    Mat3::from_columns(&[x[t[1]] - x[t[0]], x[t[2]] - x[t[0]], x[t[3]] - x[t[0]]])
}

impl TetMesh {
    /// Builds a mesh, rejecting tetrahedra with non-positive reference volume.
    pub fn new(ref_coords: Vec<Vec3>, tets: Vec<[usize; 4]>, node_body: Vec<usize>) -> Result<Self> {
        let n = ref_coords.len();
        if node_body.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} nodes but {} body ids",
                n,
                node_body.len()
            )));
        }
        let mut ref_volume = Vec::with_capacity(tets.len());
        let mut dm_inv = Vec::with_capacity(tets.len());
        let mut tet_body = Vec::with_capacity(tets.len());
        for (e, t) in tets.iter().enumerate() {
            if t.iter().any(|&i| i >= n) {
                return Err(Error::InvalidInput(format!("tet {e} references a missing node")));
            }
            let body = node_body[t[0]];
            if t.iter().any(|&i| node_body[i] != body) {
                return Err(Error::InvalidInput(format!("tet {e} spans several bodies")));
            }
            let dm = shape_matrix(&ref_coords, t);
            let vol = dm.determinant() / 6.0;
            if !(vol > 0.0) {
                return Err(Error::Degenerate(format!(
                    "tet {e} has non-positive reference volume {vol:e}"
                )));
            }
            ref_volume.push(vol);
            // non-singular since vol > 0
            dm_inv.push(dm.try_inverse().unwrap());
            tet_body.push(body);
        }

        let boundary_faces = extract_boundary(&ref_coords, &tets)?;
        let mut boundary_nodes: Vec<usize> = boundary_faces.iter().flatten().copied().collect();
        boundary_nodes.sort_unstable();
        boundary_nodes.dedup();

        Ok(Self {
            ref_coords,
            tets,
            node_body,
            tet_body,
            boundary_faces,
            boundary_nodes,
            ref_volume,
            dm_inv,
        })
    }

    /// Concatenates meshes; the `k`-th input becomes body `k`.
    pub fn merge(meshes: &[TetMesh]) -> Result<Self> {
        let mut coords = Vec::new();
        let mut tets = Vec::new();
        let mut body = Vec::new();
        for (k, m) in meshes.iter().enumerate() {
            let off = coords.len();
            coords.extend_from_slice(&m.ref_coords);
            tets.extend(m.tets.iter().map(|t| t.map(|i| i + off)));
            body.resize(body.len() + m.node_count(), k);
        }
        Self::new(coords, tets, body)
    }

    pub fn node_count(&self) -> usize {
        self.ref_coords.len()
    }

    pub fn tet_count(&self) -> usize {
        self.tets.len()
    }

    pub fn body_count(&self) -> usize {
        self.node_body.iter().max().map_or(0, |b| b + 1)
    }

    pub fn ref_coords(&self) -> &[Vec3] {
        &self.ref_coords
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn node_body(&self) -> &[usize] {
        &self.node_body
    }

    pub fn tet_body(&self) -> &[usize] {
        &self.tet_body
    }

    pub fn boundary_faces(&self) -> &[[usize; 3]] {
        &self.boundary_faces
    }

    /// Sorted indices of nodes on the boundary; these are the contact particles.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn ref_volumes(&self) -> &[f64] {
        &self.ref_volume
    }

    pub fn total_volume(&self) -> f64 {
        self.ref_volume.iter().sum()
    }

    /// Boundary faces belonging to one body.
    pub fn body_faces(&self, body: usize) -> impl Iterator<Item = &[usize; 3]> + '_ {
        self.boundary_faces.iter().filter(move |f| self.node_body[f[0]] == body)
    }

    /// Deformation gradient of element `e` at coordinates `x`.
    pub fn deformation_gradient(&self, e: usize, x: &[Vec3]) -> Mat3 {
        shape_matrix(x, &self.tets[e]) * self.dm_inv[e]
    }
}

fn extract_boundary(coords: &[Vec3], tets: &[[usize; 4]]) -> Result<Vec<[usize; 3]>> {
    // local faces, each listed with the vertex opposite to it
    const FACES: [([usize; 3], usize); 4] = [([0, 1, 2], 3), ([0, 1, 3], 2), ([0, 2, 3], 1), ([1, 2, 3], 0)];
    let sorted = |f: [usize; 3]| {
        let mut k = f;
        k.sort_unstable();
        k
    };

    let mut count: HashMap<[usize; 3], u32> = HashMap::new();
    for t in tets {
        for (f, _) in FACES {
            *count.entry(sorted(f.map(|i| t[i]))).or_insert(0) += 1;
        }
    }
    if let Some((f, _)) = count.iter().find(|(_, c)| **c > 2) {
        return Err(Error::Degenerate(format!("face {f:?} shared by more than two tets")));
    }

    let mut faces = Vec::new();
    for t in tets {
        for (f, opp) in FACES {
            let mut face = f.map(|i| t[i]);
            if count[&sorted(face)] != 1 {
                continue;
            }
            let [a, b, c] = face.map(|i| coords[i]);
            let normal = (b - a).cross(&(c - a));
            if normal.dot(&(coords[t[opp]] - a)) > 0.0 {
                face.swap(1, 2);
            }
            faces.push(face);
        }
    }
    Ok(faces)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub density: f64,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
}

impl Material {
    pub fn new(density: f64, youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        let m = Self {
            density,
            youngs_modulus,
            poisson_ratio,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "density must be positive, got {}",
                self.density
            )));
        }
        if !(self.youngs_modulus > 0.0 && self.youngs_modulus.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "Young's modulus must be positive, got {}",
                self.youngs_modulus
            )));
        }
        if !(self.poisson_ratio > -1.0 && self.poisson_ratio < 0.5) {
            return Err(Error::InvalidInput(format!(
                "Poisson ratio must lie in (-1, 0.5), got {}",
                self.poisson_ratio
            )));
        }
        Ok(())
    }

    pub fn neo_hookean(&self) -> NeoHookean {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        NeoHookean {
            lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
            mu: e / (2.0 * (1.0 + nu)),
        }
    }
}

/// `W = μ/2 (tr FᵀF - 3) - μ ln J + λ/2 (ln J)²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeoHookean {
    pub lambda: f64,
    pub mu: f64,
}

impl NeoHookean {
    /// Strain energy density, `None` when `det F <= 0`.
    pub fn energy_density(&self, f: &Mat3) -> Option<f64> {
        let j = f.determinant();
        if !(j > 0.0) {
            return None;
        }
        let ln_j = j.ln();
        Some(0.5 * self.mu * (f.norm_squared() - 3.0) - self.mu * ln_j + 0.5 * self.lambda * ln_j * ln_j)
    }

    /// First Piola-Kirchhoff stress `μ(F - F⁻ᵀ) + λ ln J F⁻ᵀ`, `None` when
    /// `det F <= 0`.
    pub fn first_piola(&self, f: &Mat3) -> Option<Mat3> {
        let j = f.determinant();
        if !(j > 0.0) {
            return None;
        }
        let f_inv_t = f.try_inverse()?.transpose();
        Some((f - f_inv_t) * self.mu + f_inv_t * (self.lambda * j.ln()))
    }
}

/// Row-sum lumped nodal masses.
pub fn lumped_mass(mesh: &TetMesh, materials: &[Material]) -> Result<Vec<f64>> {
    check_materials(mesh, materials)?;
    let mut m = vec![0.0; mesh.node_count()];
    for (e, t) in mesh.tets.iter().enumerate() {
        let share = materials[mesh.tet_body[e]].density * mesh.ref_volume[e] / 4.0;
        for &n in t {
            m[n] += share;
        }
    }
    if let Some(n) = m.iter().position(|m| !(*m > 0.0)) {
        return Err(Error::InvalidInput(format!("node {n} belongs to no element")));
    }
    Ok(m)
}

fn check_materials(mesh: &TetMesh, materials: &[Material]) -> Result<()> {
    if materials.len() < mesh.body_count() {
        return Err(Error::InvalidInput(format!(
            "{} bodies but {} materials",
            mesh.body_count(),
            materials.len()
        )));
    }
    materials.iter().try_for_each(Material::validate)
}

/// Internal nodal forces `f_n = Σ_e V_e P_e ∇N_n`.
pub fn internal_force(mesh: &TetMesh, materials: &[Material], x: &[Vec3]) -> Result<Vec<Vec3>> {
    check_materials(mesh, materials)?;
    let laws: Vec<NeoHookean> = materials.iter().map(Material::neo_hookean).collect();
    let mut f = vec![Vec3::zeros(); mesh.node_count()];
    for (e, t) in mesh.tets.iter().enumerate() {
        let def = mesh.deformation_gradient(e, x);
        let p = laws[mesh.tet_body[e]]
            .first_piola(&def)
            .ok_or(Error::ElementInversion {
                element: e,
                det: def.determinant(),
            })?;
        let h = p * mesh.dm_inv[e].transpose() * mesh.ref_volume[e];
        let (c1, c2, c3) = (
            h.column(0).into_owned(),
            h.column(1).into_owned(),
            h.column(2).into_owned(),
        );
        f[t[1]] += c1;
        f[t[2]] += c2;
        f[t[3]] += c3;
        f[t[0]] -= c1 + c2 + c3;
    }
    Ok(f)
}

pub fn strain_energy(mesh: &TetMesh, materials: &[Material], x: &[Vec3]) -> Result<f64> {
    check_materials(mesh, materials)?;
    let mut total = 0.0;
    for e in 0..mesh.tet_count() {
        let def = mesh.deformation_gradient(e, x);
        let w = materials[mesh.tet_body[e]]
            .neo_hookean()
            .energy_density(&def)
            .ok_or(Error::ElementInversion {
                element: e,
                det: def.determinant(),
            })?;
        total += w * mesh.ref_volume[e];
    }
    Ok(total)
}

/// Mesh, materials, lumped masses, Dirichlet pins and body force.
#[derive(Clone, Debug)]
pub struct FemModel {
    pub mesh: TetMesh,
    pub materials: Vec<Material>,
    pub masses: Vec<f64>,
    /// Nodes with velocity and acceleration held at zero.
    pub fixed: Vec<bool>,
    pub gravity: Vec3,
}

impl FemModel {
    pub fn new(mesh: TetMesh, materials: Vec<Material>, gravity: Vec3) -> Result<Self> {
        let masses = lumped_mass(&mesh, &materials)?;
        let fixed = vec![false; mesh.node_count()];
        Ok(Self {
            mesh,
            materials,
            masses,
            fixed,
            gravity,
        })
    }

    pub fn with_fixed(mut self, nodes: impl IntoIterator<Item = usize>) -> Self {
        for n in nodes {
            self.fixed[n] = true;
        }
        self
    }

    pub fn internal_force(&self, x: &[Vec3]) -> Result<Vec<Vec3>> {
        internal_force(&self.mesh, &self.materials, x)
    }

    pub fn strain_energy(&self, x: &[Vec3]) -> Result<f64> {
        strain_energy(&self.mesh, &self.materials, x)
    }

    /// `a_n = (m_n g - f_int,n) / m_n`, zero on pinned nodes.
    pub fn mechanical_acceleration(&self, x: &[Vec3]) -> Result<Vec<Vec3>> {
        let f = self.internal_force(x)?;
        Ok(f.iter()
            .zip(&self.masses)
            .zip(&self.fixed)
            .map(|((f, m), pinned)| if *pinned { Vec3::zeros() } else { self.gravity - f / *m })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::rotation;

    fn unit_tet() -> TetMesh {
        TetMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()],
            vec![[0, 1, 2, 3]],
            vec![0; 4],
        )
        .unwrap()
    }

    fn steel() -> Material {
        Material::new(7800.0, 2e11, 0.3).unwrap()
    }

    #[test]
    fn single_tet_boundary_is_outward() {
        let m = unit_tet();
        assert_eq!(m.boundary_faces().len(), 4);
        assert_eq!(m.boundary_nodes(), &[0, 1, 2, 3]);
        let centroid = Vec3::new(0.25, 0.25, 0.25);
        for f in m.boundary_faces() {
            let [a, b, c] = f.map(|i| m.ref_coords()[i]);
            assert!((b - a).cross(&(c - a)).dot(&(a - centroid)) > 0.0);
        }
    }

    #[test]
    fn inverted_reference_tet_rejected() {
        let err = TetMesh::new(
            vec![Vec3::zeros(), Vec3::y(), Vec3::x(), Vec3::z()],
            vec![[0, 1, 2, 3]],
            vec![0; 4],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn unit_volume_tet_mass_split() {
        // scale the unit tet to volume 1
        let s = 6f64.cbrt();
        let m = TetMesh::new(
            vec![Vec3::zeros(), Vec3::x() * s, Vec3::y() * s, Vec3::z() * s],
            vec![[0, 1, 2, 3]],
            vec![0; 4],
        )
        .unwrap();
        let mass = lumped_mass(&m, &[Material::new(4.0, 1.0, 0.3).unwrap()]).unwrap();
        for v in mass {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stress_free_reference_and_rotation() {
        let law = steel().neo_hookean();
        assert_eq!(law.first_piola(&Mat3::identity()).unwrap(), Mat3::zeros());
        let r = rotation(Vec3::new(0.3, -1.0, 0.4), 1.1);
        assert!(law.first_piola(&r).unwrap().norm() < 1e-12 * law.mu);
        assert!(law.energy_density(&r).unwrap().abs() < 1e-12 * law.mu);
    }

    #[test]
    fn inverted_deformation_has_no_stress() {
        let law = steel().neo_hookean();
        let f = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0));
        assert!(law.first_piola(&f).is_none());
        assert!(law.energy_density(&f).is_none());
    }

    #[test]
    fn stress_matches_energy_finite_difference() {
        let law = Material::new(1.0, 1e3, 0.3).unwrap().neo_hookean();
        let f = Mat3::new(1.1, 0.05, -0.02, 0.03, 0.95, 0.07, -0.04, 0.01, 1.02);
        let p = law.first_piola(&f).unwrap();
        let step = 1e-6 * f.norm();
        for i in 0..3 {
            for j in 0..3 {
                let mut fp = f;
                let mut fm = f;
                fp[(i, j)] += step;
                fm[(i, j)] -= step;
                let fd = (law.energy_density(&fp).unwrap() - law.energy_density(&fm).unwrap()) / (2.0 * step);
                assert!(
                    (fd - p[(i, j)]).abs() < 1e-6 * p.norm(),
                    "({i},{j}): {fd} vs {}",
                    p[(i, j)]
                );
            }
        }
    }

    #[test]
    fn single_tet_stretch_force_matches_traction() {
        let mat = Material::new(1.0, 1e6, 0.25).unwrap();
        let law = mat.neo_hookean();
        let m = unit_tet();
        let eps = 1e-3;
        let x: Vec<Vec3> = m
            .ref_coords()
            .iter()
            .map(|p| Vec3::new(p.x * (1.0 + eps), p.y, p.z))
            .collect();
        let f = internal_force(&m, &[mat], &x).unwrap();
        // linearized P_xx over the slanted face (area √3/2, normal (1,1,1)/√3)
        // lumped equally to its three nodes: node 1 carries P_xx / 6
        let expected = (law.lambda + 2.0 * law.mu) * eps / 6.0;
        assert!((f[1].x - expected).abs() < 0.05 * expected);
        let total: Vec3 = f.iter().sum();
        assert!(total.norm() < 1e-10 * f[1].norm());
    }

    #[test]
    fn reference_configuration_is_force_and_energy_free() {
        let m = unit_tet();
        let f = internal_force(&m, &[steel()], m.ref_coords()).unwrap();
        assert!(f.iter().all(|v| v.norm() == 0.0));
        assert_eq!(strain_energy(&m, &[steel()], m.ref_coords()).unwrap(), 0.0);
    }

    #[test]
    fn uniaxial_stress_energy_is_linear_elastic() {
        let mat = Material::new(1.0, 1e6, 0.3).unwrap();
        let m = unit_tet();
        let eps = 1e-4;
        let nu = mat.poisson_ratio;
        let x: Vec<Vec3> = m
            .ref_coords()
            .iter()
            .map(|p| Vec3::new(p.x * (1.0 + eps), p.y * (1.0 - nu * eps), p.z * (1.0 - nu * eps)))
            .collect();
        let w = strain_energy(&m, &[mat], &x).unwrap();
        let expected = 0.5 * mat.youngs_modulus * eps * eps / 6.0;
        assert!((w - expected).abs() < 1e-3 * expected, "{w} vs {expected}");
    }

    #[test]
    fn inversion_reports_element() {
        let m = unit_tet();
        let mut x = m.ref_coords().to_vec();
        x[3].z = -1.0;
        let err = internal_force(&m, &[steel()], &x).unwrap_err();
        assert!(matches!(err, Error::ElementInversion { element: 0, .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn material_validation() {
        assert!(Material::new(0.0, 1.0, 0.3).is_err());
        assert!(Material::new(1.0, -1.0, 0.3).is_err());
        assert!(Material::new(1.0, 1.0, 0.5).is_err());
        assert!(Material::new(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn pinned_nodes_have_zero_acceleration() {
        let model = FemModel::new(unit_tet(), vec![steel()], Vec3::new(0.0, 0.0, -9.81))
            .unwrap()
            .with_fixed([0, 1]);
        let a = model.mechanical_acceleration(model.mesh.ref_coords()).unwrap();
        assert_eq!(a[0], Vec3::zeros());
        assert_eq!(a[1], Vec3::zeros());
        assert_eq!(a[2], Vec3::new(0.0, 0.0, -9.81));
    }
}
