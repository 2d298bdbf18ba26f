//! Built-in property checks, runnable from the command line against a
//! release binary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fem::{self, Material};
use crate::math::{Mat3, Vec3};
use crate::scenario::{build_block_mesh, Placement};
use crate::spline::GridSpec;
use crate::toy1d::{self, ToyState};
use crate::transfer::{angular_momentum, linear_momentum, GeneralizedVelocity, TransferMode, TransferOperator};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

fn vec3(rng: &mut impl Rng, scale: f64) -> Vec3 {
    Vec3::from_fn(|_, _| rng.random_range(-scale..scale))
}

fn mat3(rng: &mut impl Rng, scale: f64) -> Mat3 {
    Mat3::from_fn(|_, _| rng.random_range(-scale..scale))
}

/// A particle cloud of `n` points scattered over a few cells.
pub fn random_cloud(rng: &mut impl Rng, n: usize, spread: f64) -> (Vec<Vec3>, Vec<f64>) {
    let x = (0..n).map(|_| vec3(rng, spread)).collect();
    let m = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    (x, m)
}

/// Partition of unity, linear completeness and the second moment at
/// `samples` random points.
pub fn check_spline(seed: u64, samples: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut unity, mut linear, mut moment) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let h = rng.random_range(0.1..3.0);
        let spec = GridSpec::with_origin(h, vec3(&mut rng, 1.0))?;
        let p = vec3(&mut rng, 10.0);
        let (mut sum, mut first, mut second) = (0.0, Vec3::zeros(), Mat3::zeros());
        for (key, w) in spec.weights_3d(&p)?.iter() {
            let r = spec.node_position(key) - p;
            sum += w;
            first += r * w;
            second += r * r.transpose() * w;
        }
        unity = unity.max((sum - 1.0).abs());
        linear = linear.max(first.norm() / h);
        moment = moment.max((second - spec.d_tensor()).abs().max() / (h * h));
    }
    let passed = unity < 1e-14 && linear < 1e-13 && moment < 1e-13;
    Ok(CheckOutcome::new(
        "spline basis",
        passed,
        format!("max |ΣN-1| = {unity:.2e}, max |ΣN r|/h = {linear:.2e}, max |D - h²/2 I|/h² = {moment:.2e}"),
    ))
}

/// Random affine fields are fixed points of the APIC `H`.
pub fn check_affine(seed: u64, trials: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let h = rng.random_range(0.2..1.5);
        let spec = GridSpec::with_origin(h, vec3(&mut rng, 1.0))?;
        let n = rng.random_range(1..60);
        let (x, m) = random_cloud(&mut rng, n, 3.0 * h);
        let v0 = vec3(&mut rng, 2.0);
        let l = mat3(&mut rng, 2.0);
        let field: Vec<_> = x
            .iter()
            .map(|p| GeneralizedVelocity::new(v0 + l * p, l * spec.d_tensor()))
            .collect();
        let op = TransferOperator::new(&x, &m, &spec, TransferMode::Apic)?;
        let out = op.apply_h(&field)?;
        let vmax = field.iter().map(|u| u.v.norm()).fold(0.0, f64::max);
        let bmax = field.iter().map(|u| u.b.norm()).fold(0.0, f64::max);
        for (o, u) in out.iter().zip(&field) {
            worst = worst.max((o.v - u.v).norm() / vmax).max((o.b - u.b).norm() / bmax);
        }
    }
    Ok(CheckOutcome::new(
        "affine preservation",
        worst < 1e-12,
        format!("max relative deviation {worst:.2e} over {trials} fields"),
    ))
}

/// `G V` carries no net linear momentum (both modes) and no net angular
/// momentum (APIC).
pub fn check_momentum_free(seed: u64, trials: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lin, mut ang) = (0.0f64, 0.0f64);
    for trial in 0..trials {
        let mode = if trial % 2 == 0 {
            TransferMode::Apic
        } else {
            TransferMode::Pic
        };
        let h = rng.random_range(0.2..1.5);
        let spec = GridSpec::with_origin(h, vec3(&mut rng, 1.0))?;
        let n = rng.random_range(1..60);
        let (x, m) = random_cloud(&mut rng, n, 3.0 * h);
        let field: Vec<_> = (0..n)
            .map(|_| {
                let b = if mode == TransferMode::Apic {
                    mat3(&mut rng, h)
                } else {
                    Mat3::zeros()
                };
                GeneralizedVelocity::new(vec3(&mut rng, 1.0), b)
            })
            .collect();
        let op = TransferOperator::new(&x, &m, &spec, mode)?;
        let g = op.apply_g(&field)?;
        let p_scale: f64 = m.iter().zip(&field).map(|(m, u)| m * u.v.norm()).sum();
        lin = lin.max(linear_momentum(&m, &g).norm() / p_scale);
        if mode == TransferMode::Apic {
            let l_scale: f64 = m
                .iter()
                .zip(&field)
                .zip(&x)
                .map(|((m, u), x)| m * (x.norm() * u.v.norm() + 2.0 * u.b.norm()))
                .sum();
            ang = ang.max(angular_momentum(&x, &m, &g).norm() / l_scale);
        }
    }
    Ok(CheckOutcome::new(
        "momentum-free corrections",
        lin < 1e-12 && ang < 1e-12,
        format!("max relative linear {lin:.2e}, angular {ang:.2e}"),
    ))
}

/// Internal forces against central differences of the strain energy.
pub fn check_force_gradient(seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mesh = build_block_mesh([1.0, 1.5, 1.0], 0.5, &Placement::identity())?;
    let mats = [Material::new(1000.0, 1e6, 0.3)?];
    let x: Vec<Vec3> = mesh.ref_coords().iter().map(|p| p + vec3(&mut rng, 0.05)).collect();
    let f = fem::internal_force(&mesh, &mats, &x)?;
    let fmax = f.iter().map(|v| v.amax()).fold(0.0, f64::max);
    let eps = 1e-6;
    let mut worst = 0.0f64;
    let mut y = x.clone();
    for n in 0..x.len() {
        for k in 0..3 {
            y[n][k] = x[n][k] + eps;
            let ep = fem::strain_energy(&mesh, &mats, &y)?;
            y[n][k] = x[n][k] - eps;
            let em = fem::strain_energy(&mesh, &mats, &y)?;
            y[n][k] = x[n][k];
            worst = worst.max(((ep - em) / (2.0 * eps) - f[n][k]).abs() / fmax);
        }
    }
    Ok(CheckOutcome::new(
        "force gradient",
        worst < 1e-6,
        format!("max relative difference {worst:.2e}"),
    ))
}

/// Zero-gap rest for APIC, finite-gap rest for PIC, blow-up at large τ.
pub fn check_toy() -> Result<CheckOutcome> {
    let tau = 0.1;
    let dt = toy1d::default_dt(tau);
    let apic = toy1d::integrate_toy(ToyState::approach(tau), TransferMode::Apic, 40.0, dt)?;
    let pic = toy1d::integrate_toy(ToyState::approach(tau), TransferMode::Pic, 40.0, dt)?;
    let wild = toy1d::integrate_toy(ToyState::approach(5.0), TransferMode::Apic, 200.0, 0.01)?;
    let (xa, xp) = (apic.last().x, pic.last().x);
    Ok(CheckOutcome::new(
        "toy model",
        xa.abs() < 1e-3 && xp.abs() > 0.05 && wild.unstable && !apic.unstable,
        format!(
            "APIC rest x = {xa:.2e}, PIC rest x = {xp:.3}, τ = 5 unstable: {}",
            wild.unstable
        ),
    ))
}

/// The full suite with fixed seeds.
pub fn run_all() -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        check_spline(1, 10_000)?,
        check_affine(2, 100)?,
        check_momentum_free(3, 100)?,
        check_force_gradient(4)?,
        check_toy()?,
    ])
}
