//! Fixed-step classical Runge–Kutta.

use crate::error::{Error, Result};

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Reusable stage buffers for [`Rk4::step`].
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `state` from `t` to `t + dt` in place. `field(t, y, dy)`
    /// writes the derivative into `dy`.
    pub fn step<F>(&mut self, state: &mut [f64], t: f64, dt: f64, mut field: F) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        let n = state.len();
        if self.k1.len() != n {
            *self = Self::new(n);
        }
        let h2 = 0.5 * dt;
        field(t, state, &mut self.k1);
        check_finite(&self.k1)?;
        for i in 0..n {
            self.tmp[i] = state[i] + h2 * self.k1[i];
        }
        field(t + h2, &self.tmp, &mut self.k2);
        check_finite(&self.k2)?;
        for i in 0..n {
            self.tmp[i] = state[i] + h2 * self.k2[i];
        }
        field(t + h2, &self.tmp, &mut self.k3);
        check_finite(&self.k3)?;
        for i in 0..n {
            self.tmp[i] = state[i] + dt * self.k3[i];
        }
        field(t + dt, &self.tmp, &mut self.k4);
        check_finite(&self.k4)?;
        for i in 0..n {
            state[i] += dt / 6.0 * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
        check_finite(state)
    }
}

/// One-shot convenience wrapper around [`Rk4::step`].
pub fn integrate_step<F>(state: &[f64], t: f64, dt: f64, field: F) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut out = state.to_vec();
    Rk4::new(state.len()).step(&mut out, t, dt, field)?;
    Ok(out)
}
