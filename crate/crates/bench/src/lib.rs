//! Fixtures shared by the benchmarks.

use augury_core::scenario::two_block_impact;
use augury_core::transfer::{GeneralizedVelocity, TransferMode, TransferOperator};
use augury_core::{GridSpec, Mat3, Simulation, Vec3};

/// Particles on a jittered lattice with a smooth velocity field.
pub fn particle_cloud(per_axis: usize, h: f64) -> (Vec<Vec3>, Vec<f64>, Vec<GeneralizedVelocity>) {
    let mut x = Vec::with_capacity(per_axis.pow(3));
    for i in 0..per_axis {
        for j in 0..per_axis {
            for k in 0..per_axis {
                let jitter = ((i * 7 + j * 13 + k * 29) % 17) as f64 / 17.0 * 0.3;
                x.push(Vec3::new(i as f64, j as f64, k as f64) * (0.5 * h) + Vec3::repeat(jitter * h));
            }
        }
    }
    let m = vec![1.0; x.len()];
    let v = x
        .iter()
        .map(|p| GeneralizedVelocity::new(Vec3::new(p.y.sin(), p.z.cos(), p.x), Mat3::identity() * 0.01))
        .collect();
    (x, m, v)
}

pub fn operator(x: &[Vec3], m: &[f64], h: f64, mode: TransferMode) -> TransferOperator {
    TransferOperator::new(x, m, &GridSpec::new(h).expect("positive spacing"), mode).expect("valid cloud")
}

/// The coarsest two-block impact, ready to step.
pub fn two_block_simulation() -> Simulation {
    two_block_impact(0)
        .and_then(|s| s.simulation())
        .expect("two-block scenario builds")
}
