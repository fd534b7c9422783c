//! Linear-term generators `b(t)`, evaluated in closed form.

use std::f64::consts::TAU;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exosystem::{ExosystemModel, ModalResponse};

#[derive(Debug, Clone)]
pub enum SignalSource {
    /// `b_i(t) = H_row exp(F t) ξ_i(0)`; built with [`SignalSource::exosystem`].
    Exosystem {
        model: ExosystemModel,
        xi0: Vec<DVector<f64>>,
        responses: Vec<ModalResponse>,
    },
    /// Continuous piecewise-linear wave peaking at `amplitude_i` a quarter
    /// period after phase zero.
    TriangularWave {
        amplitude: Vec<f64>,
        period: Vec<f64>,
        phase: Vec<f64>,
    },
    /// `b_i(t) = amp_i sin(ω t + phase_i) + offset_i`.
    SinusoidPlusConstant {
        amp: Vec<f64>,
        omega: f64,
        phase: Vec<f64>,
        offset: Vec<f64>,
    },
}

fn same_len(n: usize, parts: &[(&str, usize)]) -> Result<()> {
    for &(name, len) in parts {
        if len != n {
            return Err(Error::Dimension(format!("{name} has length {len}, expected {n}")));
        }
    }
    Ok(())
}

impl SignalSource {
    pub fn exosystem(model: ExosystemModel, xi0: Vec<DVector<f64>>) -> Result<Self> {
        if xi0.is_empty() {
            return Err(Error::Dimension("need at least one component".into()));
        }
        let responses = xi0.iter().map(|x| model.response(x)).collect::<Result<_>>()?;
        Ok(Self::Exosystem { model, xi0, responses })
    }

    /// Exosystem with every `ξ_i(0)` drawn uniformly from `[-1, 1]^m`.
    pub fn exosystem_seeded(model: ExosystemModel, n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = model.order();
        let xi0 = (0..n)
            .map(|_| DVector::from_fn(m, |_, _| rng.random_range(-1.0..=1.0)))
            .collect();
        Self::exosystem(model, xi0)
    }

    pub fn triangular(amplitude: Vec<f64>, period: Vec<f64>, phase: Vec<f64>) -> Result<Self> {
        let n = amplitude.len();
        same_len(n, &[("period", period.len()), ("phase", phase.len())])?;
        if n == 0 {
            return Err(Error::Dimension("need at least one component".into()));
        }
        if period.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidArgument("triangular period must be positive".into()));
        }
        Ok(Self::TriangularWave { amplitude, period, phase })
    }

    /// Amplitudes uniform in `[0.5, 2]`, common period `2π/ω`, phases uniform
    /// in `[0, 2π)`.
    pub fn triangular_seeded(n: usize, omega: f64, seed: u64) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::InvalidArgument("omega must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amplitude: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..=2.0)).collect();
        let phase: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        Self::triangular(amplitude, vec![TAU / omega; n], phase)
    }

    /// Unit amplitudes, offsets 0.5, phases uniform in `[0, 2π)`.
    pub fn sinusoid_seeded(n: usize, omega: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phase = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        Self::sinusoid(vec![1.0; n], omega, phase, vec![0.5; n])
    }

    pub fn sinusoid(amp: Vec<f64>, omega: f64, phase: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        let n = amp.len();
        same_len(n, &[("phase", phase.len()), ("offset", offset.len())])?;
        if n == 0 {
            return Err(Error::Dimension("need at least one component".into()));
        }
        if !omega.is_finite() {
            return Err(Error::InvalidArgument("omega must be finite".into()));
        }
        Ok(Self::SinusoidPlusConstant { amp, omega, phase, offset })
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Exosystem { xi0, .. } => xi0.len(),
            Self::TriangularWave { amplitude, .. } => amplitude.len(),
            Self::SinusoidPlusConstant { amp, .. } => amp.len(),
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.n());
        self.eval_into(t, out.as_mut_slice());
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        match self {
            Self::Exosystem { responses, .. } => {
                for (o, r) in out.iter_mut().zip(responses) {
                    *o = r.eval(t);
                }
            }
            Self::TriangularWave { amplitude, period, phase } => {
                for i in 0..out.len() {
                    out[i] = amplitude[i] * unit_triangle(t / period[i] + phase[i] / TAU);
                }
            }
            Self::SinusoidPlusConstant { amp, omega, phase, offset } => {
                for i in 0..out.len() {
                    out[i] = amp[i] * (omega * t + phase[i]).sin() + offset[i];
                }
            }
        }
    }
}

/// Triangle wave of unit amplitude and period in cycles `s`; equal to
/// `(2/π) asin(sin(2π s))` but exact at the corners.
fn unit_triangle(s: f64) -> f64 {
    let f = s - s.floor();
    if f < 0.25 {
        4.0 * f
    } else if f < 0.75 {
        2.0 - 4.0 * f
    } else {
        4.0 * f - 4.0
    }
}

pub fn b_of_t(source: &SignalSource, t: f64) -> DVector<f64> {
    source.eval(t)
}
