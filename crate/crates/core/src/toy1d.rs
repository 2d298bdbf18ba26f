//! Two equal particles in 1D approaching each other across one background
//! cell with linear hat functions. The left particle sits at `x`, its mirror
//! image at `-x`; everything is nondimensionalized by the cell size and the
//! approach speed.

use std::io::Write;

use crate::error::{Error, Result};
use crate::transfer::TransferMode;

/// Augury time sweep used when none is given.
pub const DEFAULT_TAUS: [f64; 5] = [0.02, 0.05, 0.1, 0.2, 0.5];
pub const DEFAULT_END_TIME: f64 = 40.0;
/// Trajectories leaving `|x| <= BLOWUP` are flagged unstable.
pub const BLOWUP: f64 = 10.0;
pub const TOY_CSV_HEADER: &str = "t,x,v,a,B";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyState {
    pub x: f64,
    pub v: f64,
    pub b: f64,
    pub tau: f64,
}

impl ToyState {
    /// Particles one cell apart, closing at unit speed, no affine mode.
    pub fn approach(tau: f64) -> Self {
        Self {
            x: 1.0,
            v: -1.0,
            b: 0.0,
            tau,
        }
    }
}

/// `(ẋ, v̇, Ḃ)` for the APIC augury system.
pub fn apic_rhs(s: &ToyState) -> (f64, f64, f64) {
    let ToyState { x, v, b, tau } = *s;
    let x2 = x * x;
    (v, ((x2 - 1.0) * v - x * b) / tau, ((x2 * x - x) * v - x2 * b) / tau)
}

/// `(ẋ, v̇)` for the PIC augury system.
pub fn pic_rhs(s: &ToyState) -> (f64, f64) {
    (s.v, s.v * (s.x * s.x - 1.0) / s.tau)
}

fn rhs(s: &ToyState, mode: TransferMode) -> [f64; 3] {
    match mode {
        TransferMode::Apic => {
            let (a, b, c) = apic_rhs(s);
            [a, b, c]
        }
        TransferMode::Pic => {
            let (a, b) = pic_rhs(s);
            [a, b, 0.0]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToySample {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    /// `v̇`
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyTrajectory {
    pub mode: TransferMode,
    pub tau: f64,
    pub samples: Vec<ToySample>,
    /// Set when `|x|` exceeded the blow-up bound; integration stops there.
    pub unstable: bool,
}

impl ToyTrajectory {
    pub fn last(&self) -> &ToySample {
        self.samples.last().expect("trajectory holds the initial sample")
    }

    /// Turns a flagged trajectory into [`Error::Unstable`].
    pub fn check(self) -> Result<Self> {
        if self.unstable {
            let s = self.last();
            return Err(Error::Unstable {
                tau: self.tau,
                x: s.x.abs(),
                t: s.t,
            });
        }
        Ok(self)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TOY_CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", s.t, s.x, s.v, s.a, s.b)?;
        }
        Ok(())
    }
}

/// Largest step accepted by [`integrate_toy`] for a given `tau`.
pub fn max_dt(tau: f64) -> f64 {
    tau / 50.0
}

/// A comfortably resolved step: `min(τ/100, 1e-3)`.
pub fn default_dt(tau: f64) -> f64 {
    (tau / 100.0).min(1e-3)
}

/// Classical RK4 from `initial` to `t_end`, one sample per step.
pub fn integrate_toy(initial: ToyState, mode: TransferMode, t_end: f64, dt: f64) -> Result<ToyTrajectory> {
    let tau = initial.tau;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    if !(dt > 0.0 && dt <= max_dt(tau)) {
        return Err(Error::InvalidInput(format!(
            "dt = {dt} must lie in (0, tau/50 = {}]",
            max_dt(tau)
        )));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "end time must be non-negative, got {t_end}"
        )));
    }
    let mut s = initial;
    if mode == TransferMode::Pic {
        s.b = 0.0;
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let sample = |t: f64, s: &ToyState| {
        let d = rhs(s, mode);
        ToySample {
            t,
            x: s.x,
            v: s.v,
            a: d[1],
            b: s.b,
        }
    };
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(sample(0.0, &s));
    let at = |s: &ToyState, k: &[f64; 3], f: f64| ToyState {
        x: s.x + f * k[0],
        v: s.v + f * k[1],
        b: s.b + f * k[2],
        tau,
    };
    let mut unstable = false;
    for n in 1..=steps {
        let k1 = rhs(&s, mode);
        let k2 = rhs(&at(&s, &k1, 0.5 * dt), mode);
        let k3 = rhs(&at(&s, &k2, 0.5 * dt), mode);
        let k4 = rhs(&at(&s, &k3, dt), mode);
        let inc = |i: usize| dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        s = ToyState {
            x: s.x + inc(0),
            v: s.v + inc(1),
            b: s.b + inc(2),
            tau,
        };
        let t = if n == steps { t_end } else { n as f64 * dt };
        samples.push(sample(t, &s));
        if !(s.x.abs() <= BLOWUP) || !s.v.is_finite() || !s.b.is_finite() {
            unstable = true;
            break;
        }
    }
    Ok(ToyTrajectory {
        mode,
        tau,
        samples,
        unstable,
    })
}

/// Runs the standard approach for every τ, in order.
pub fn sweep(mode: TransferMode, taus: &[f64], t_end: f64) -> Result<Vec<ToyTrajectory>> {
    taus.iter()
        .map(|&tau| integrate_toy(ToyState::approach(tau), mode, t_end, default_dt(tau)))
        .collect()
}
