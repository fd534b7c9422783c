//! Scenario JSON: schema, validation, and resolution into a simulator
//! [`Scenario`] plus a provenance record of every value actually used.

use std::path::Path;

use pimaw_core::exosystem::ExosystemModel;
use pimaw_core::nalgebra::{DMatrix, DVector};
use pimaw_core::problem::QuadraticProblem;
use pimaw_core::signal::SignalSource;
use pimaw_core::sim::{InitState, Scenario};
use pimaw_core::synthesis::SynthesisConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const ALL_COLUMNS: [&str; 5] = ["t", "err", "znorm", "bnorm", "x"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub n: usize,
    pub hessian: HessianSpec,
    pub signal: SignalSpec,
    pub internal_model: InternalModelSpec,
    pub gamma: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum HessianSpec {
    Explicit {
        matrix: Vec<Vec<f64>>,
        /// Curvature bounds used for synthesis; defaults to the extreme
        /// eigenvalues of `matrix`.
        #[serde(default)]
        eig_range: Option<[f64; 2]>,
    },
    RandomOrthogonal {
        eig_range: [f64; 2],
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Exosystem {
        /// Defaults to the internal model's polynomial.
        #[serde(default)]
        poly_coeffs: Option<Vec<f64>>,
        #[serde(default)]
        xi0: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        seed: Option<u64>,
    },
    TriangularWave {
        omega: f64,
        #[serde(default)]
        amplitude: Option<Vec<f64>>,
        #[serde(default)]
        period: Option<Vec<f64>>,
        #[serde(default)]
        phase: Option<Vec<f64>>,
        #[serde(default)]
        seed: Option<u64>,
    },
    SinusoidPlusConstant {
        omega: f64,
        #[serde(default)]
        amp: Option<Vec<f64>>,
        #[serde(default)]
        phase: Option<Vec<f64>>,
        #[serde(default)]
        offset: Option<Vec<f64>>,
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InternalModelSpec {
    /// Monic `d(s)`, highest power first.
    pub poly_coeffs: Vec<f64>,
    #[serde(default)]
    pub eps_decay: Option<f64>,
    #[serde(default)]
    pub pole_radius: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    #[serde(default)]
    pub eta: Option<Vec<f64>>,
    #[serde(default)]
    pub q: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    #[serde(default = "default_columns")]
    pub columns: Vec<String>,
}

fn default_decimation() -> usize {
    10
}

fn default_columns() -> Vec<String> {
    ALL_COLUMNS.iter().map(|s| s.to_string()).collect()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { decimation: default_decimation(), columns: default_columns() }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub gamma: Option<f64>,
    /// Replaces the Hessian seed; the signal seed becomes `seed + 1`.
    pub seed: Option<u64>,
    pub dt: Option<f64>,
}

/// Signal parameters after seeding, echoed into outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResolvedSignal {
    Exosystem { poly_coeffs: Vec<f64>, xi0: Vec<Vec<f64>>, seed: Option<u64> },
    TriangularWave { omega: f64, amplitude: Vec<f64>, period: Vec<f64>, phase: Vec<f64>, seed: u64 },
    SinusoidPlusConstant { omega: f64, amp: Vec<f64>, phase: Vec<f64>, offset: Vec<f64>, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisProvenance {
    pub poly_coeffs: Vec<f64>,
    pub eps_decay: f64,
    pub pole_radius: f64,
    pub stabilization_radius: f64,
    pub antiwindup_radius: f64,
    pub interior_samples: usize,
    pub solver_max_iter: usize,
    pub solver_tol_feas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario_sha256: String,
    pub n: usize,
    pub hessian_mode: &'static str,
    pub hessian_seed: Option<u64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub signal: ResolvedSignal,
    pub synthesis: SynthesisProvenance,
    pub gamma: f64,
    pub alpha: f64,
    pub t_end: f64,
    pub dt: f64,
    pub decimation: usize,
    pub columns: Vec<String>,
    pub init_eta: Vec<f64>,
    pub init_q: Vec<f64>,
}

/// Everything a command needs from a scenario file.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub model: ExosystemModel,
    pub gamma: f64,
    pub synthesis: SynthesisConfig,
    pub columns: Vec<String>,
    pub provenance: Provenance,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn check_len(name: &str, v: &[f64], n: usize) -> CliResult<()> {
    if v.len() != n {
        return Err(CliError::Input(format!("{name} has length {}, expected {n}", v.len())));
    }
    Ok(())
}

pub fn load(path: &Path, overrides: Overrides) -> CliResult<Resolved> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let file: ScenarioFile = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    resolve(&file, &sha256_hex(&bytes), overrides)
}

pub fn resolve(file: &ScenarioFile, hash: &str, ov: Overrides) -> CliResult<Resolved> {
    let n = file.n;
    if n == 0 {
        return Err(CliError::Input("n must be positive".into()));
    }
    let (prob, hessian_mode, hessian_seed) = match &file.hessian {
        HessianSpec::Explicit { matrix, eig_range } => {
            if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                return Err(CliError::Input(format!("hessian.matrix must be {n}x{n}")));
            }
            let a = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
            let [lo, hi] = match eig_range {
                Some(r) => *r,
                None => {
                    let e = pimaw_core::linalg::symmetric_eigenvalues(&a).map_err(input)?;
                    [e[0], e[n - 1]]
                }
            };
            (QuadraticProblem::new(a, lo, hi).map_err(input)?, "explicit", None)
        }
        HessianSpec::RandomOrthogonal { eig_range: [lo, hi], seed } => {
            let seed = ov.seed.unwrap_or(*seed);
            (QuadraticProblem::random(n, *lo, *hi, seed).map_err(input)?, "random_orthogonal", Some(seed))
        }
    };

    let im = &file.internal_model;
    let model = ExosystemModel::from_poly(&im.poly_coeffs).map_err(input)?;
    let defaults = SynthesisConfig::default();
    let synthesis = SynthesisConfig {
        eps_decay: im.eps_decay.unwrap_or(defaults.eps_decay),
        pole_radius: im.pole_radius.unwrap_or(defaults.pole_radius),
        ..defaults
    };
    if !(synthesis.eps_decay > 0.0 && synthesis.pole_radius > 0.0) {
        return Err(CliError::Input("eps_decay and pole_radius must be positive".into()));
    }

    let signal_seed_override = ov.seed.map(|s| s.wrapping_add(1));
    let (source, signal) = resolve_signal(&file.signal, n, &im.poly_coeffs, signal_seed_override)?;

    let gamma = ov.gamma.unwrap_or(file.gamma);
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(CliError::Input(format!("gamma must be positive, got {gamma}")));
    }
    let dt = ov.dt.unwrap_or(file.dt);
    let alpha = file.alpha.unwrap_or(1.0 / prob.lambda_max());

    for c in &file.output.columns {
        if !ALL_COLUMNS.contains(&c.as_str()) {
            return Err(CliError::Input(format!("unknown output column {c:?}")));
        }
    }
    let columns: Vec<String> = ALL_COLUMNS
        .iter()
        .filter(|c| file.output.columns.iter().any(|x| x == *c))
        .map(|c| c.to_string())
        .collect();

    let m = model.order();
    let eta = file.init.eta.clone().unwrap_or_else(|| vec![0.0; n * m]);
    check_len("init.eta", &eta, n * m)?;
    let q = file.init.q.clone().unwrap_or_else(|| vec![0.0; n]);
    check_len("init.q", &q, n)?;

    let provenance = Provenance {
        tool: "pimaw",
        version: env!("CARGO_PKG_VERSION"),
        scenario_sha256: hash.to_string(),
        n,
        hessian_mode,
        hessian_seed,
        lambda_min: prob.lambda_min(),
        lambda_max: prob.lambda_max(),
        signal,
        synthesis: SynthesisProvenance {
            poly_coeffs: im.poly_coeffs.clone(),
            eps_decay: synthesis.eps_decay,
            pole_radius: synthesis.pole_radius,
            stabilization_radius: synthesis.stabilization_radius,
            antiwindup_radius: synthesis.antiwindup_radius,
            interior_samples: synthesis.interior_samples,
            solver_max_iter: synthesis.solver.max_iter,
            solver_tol_feas: synthesis.solver.tol_feas,
        },
        gamma,
        alpha,
        t_end: file.t_end,
        dt,
        decimation: file.output.decimation,
        columns: columns.clone(),
        init_eta: eta.clone(),
        init_q: q.clone(),
    };

    let mut scenario = Scenario::new(prob, source, None, file.t_end, dt);
    scenario.alpha = alpha;
    scenario.decimation = file.output.decimation;
    scenario.init = InitState { eta: Some(DVector::from_vec(eta)), q: Some(DVector::from_vec(q)) };
    scenario.validate().map_err(input)?;
    Ok(Resolved { scenario, model, gamma, synthesis, columns, provenance })
}

fn resolve_signal(
    spec: &SignalSpec,
    n: usize,
    im_coeffs: &[f64],
    seed_override: Option<u64>,
) -> CliResult<(SignalSource, ResolvedSignal)> {
    match spec {
        SignalSpec::Exosystem { poly_coeffs, xi0, seed } => {
            let coeffs = poly_coeffs.clone().unwrap_or_else(|| im_coeffs.to_vec());
            let model = ExosystemModel::from_poly(&coeffs).map_err(input)?;
            if xi0.is_some() && seed.is_some() {
                return Err(CliError::Input("signal.xi0 and signal.seed are exclusive".into()));
            }
            let (source, seed) = match (xi0, seed_override) {
                (Some(x), None) => {
                    if x.len() != n {
                        return Err(CliError::Input(format!("signal.xi0 needs {n} vectors")));
                    }
                    let xi = x.iter().map(|v| DVector::from_vec(v.clone())).collect();
                    (SignalSource::exosystem(model, xi).map_err(input)?, None)
                }
                _ => {
                    let s = seed_override.or(*seed).unwrap_or(0);
                    (SignalSource::exosystem_seeded(model, n, s).map_err(input)?, Some(s))
                }
            };
            let SignalSource::Exosystem { xi0, .. } = &source else { unreachable!() };
            let xi0 = xi0.iter().map(|v| v.iter().copied().collect()).collect();
            Ok((source, ResolvedSignal::Exosystem { poly_coeffs: coeffs, xi0, seed }))
        }
        SignalSpec::TriangularWave { omega, amplitude, period, phase, seed } => {
            let seed = seed_override.or(*seed).unwrap_or(0);
            let base = SignalSource::triangular_seeded(n, *omega, seed).map_err(input)?;
            let SignalSource::TriangularWave { amplitude: a0, period: p0, phase: f0 } = base else { unreachable!() };
            let amplitude = amplitude.clone().unwrap_or(a0);
            let period = period.clone().unwrap_or(p0);
            let phase = phase.clone().unwrap_or(f0);
            check_len("signal.amplitude", &amplitude, n)?;
            let source = SignalSource::triangular(amplitude.clone(), period.clone(), phase.clone()).map_err(input)?;
            Ok((source, ResolvedSignal::TriangularWave { omega: *omega, amplitude, period, phase, seed }))
        }
        SignalSpec::SinusoidPlusConstant { omega, amp, phase, offset, seed } => {
            let seed = seed_override.or(*seed).unwrap_or(0);
            let base = SignalSource::sinusoid_seeded(n, *omega, seed).map_err(input)?;
            let SignalSource::SinusoidPlusConstant { amp: a0, phase: f0, offset: o0, .. } = base else { unreachable!() };
            let amp = amp.clone().unwrap_or(a0);
            let phase = phase.clone().unwrap_or(f0);
            let offset = offset.clone().unwrap_or(o0);
            check_len("signal.amp", &amp, n)?;
            let source = SignalSource::sinusoid(amp.clone(), *omega, phase.clone(), offset.clone()).map_err(input)?;
            Ok((source, ResolvedSignal::SinusoidPlusConstant { omega: *omega, amp, phase, offset, seed }))
        }
    }
}

impl Resolved {
    pub fn eta0_is_zero(&self) -> bool {
        self.scenario.init.eta.as_ref().is_none_or(|e| e.iter().all(|&v| v == 0.0))
    }
}
