//! Closed-loop simulation of the projected internal-model flow and its
//! baselines, plus trajectory metrics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::ControllerDesign;
use crate::error::{Error, Result};
use crate::integrate::Rk4;
use crate::par::{self, Exec};
use crate::problem::QuadraticProblem;
use crate::qp;
use crate::signal::SignalSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Projected internal model with the certified anti-windup gain.
    Pimaw,
    /// Same loop with an overridden gain (ρ = 0 by default).
    PimawRho0,
    /// Same loop in eigen-coordinates, mapped back through `V`.
    PimawDecoupled,
    /// Internal model without projection.
    UnconstrainedIm,
    /// Projected gradient flow.
    Opgd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pimaw => "pimaw",
            Method::PimawRho0 => "pimaw-rho0",
            Method::PimawDecoupled => "pimaw-decoupled",
            Method::UnconstrainedIm => "unconstrained-im",
            Method::Opgd => "opgd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Method::Pimaw,
            Method::PimawRho0,
            Method::PimawDecoupled,
            Method::UnconstrainedIm,
            Method::Opgd,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InitState {
    /// Controller state, `n·m` entries, component-major.
    pub eta: Option<DVector<f64>>,
    /// OP-GD state.
    pub q: Option<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub prob: QuadraticProblem,
    pub source: SignalSource,
    pub design: Option<ControllerDesign>,
    pub alpha: f64,
    pub t_end: f64,
    pub dt: f64,
    pub init: InitState,
    /// Record every `decimation`-th integration step.
    pub decimation: usize,
    /// How the `x*(t_k)` oracle solves are spread.
    pub exec: Exec,
}

impl Scenario {
    /// `α = 1/λmax`, zero initial states, decimation 10.
    pub fn new(prob: QuadraticProblem, source: SignalSource, design: Option<ControllerDesign>, t_end: f64, dt: f64) -> Self {
        Self {
            alpha: 1.0 / prob.lambda_max(),
            prob,
            source,
            design,
            t_end,
            dt,
            init: InitState::default(),
            decimation: 10,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_end must be at least dt, got {}", self.t_end)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.decimation == 0 {
            return Err(Error::InvalidArgument("decimation must be positive".into()));
        }
        let n = self.prob.n();
        if self.source.n() != n {
            return Err(Error::Dimension(format!("signal has {} components, problem has {n}", self.source.n())));
        }
        if let Some(q) = &self.init.q {
            if q.len() != n {
                return Err(Error::Dimension(format!("q(0) has length {}, expected {n}", q.len())));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    fn design(&self) -> Result<&ControllerDesign> {
        let d = self
            .design
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("internal-model method needs a design".into()))?;
        if d.k.len() != d.model.order() {
            return Err(Error::Dimension(format!("K has length {}, expected {}", d.k.len(), d.model.order())));
        }
        Ok(d)
    }

    fn eta0(&self, m: usize) -> Result<DVector<f64>> {
        let len = self.prob.n() * m;
        match &self.init.eta {
            Some(e) if e.len() != len => Err(Error::Dimension(format!("eta(0) has length {}, expected {len}", e.len()))),
            Some(e) => Ok(e.clone()),
            None => Ok(DVector::zeros(len)),
        }
    }
}

/// Sampled closed-loop signals. For OP-GD `x = y_c = q`, `w = v = 0` and
/// `u = ∇f(q)`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub method: Method,
    /// Anti-windup gain used (internal-model methods).
    pub rho: Option<f64>,
    pub t: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub y_c: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub b: Vec<DVector<f64>>,
    /// `∇f(x) + w`.
    pub z: Vec<DVector<f64>>,
    pub x_star: Vec<DVector<f64>>,
    pub mu_star: Vec<DVector<f64>>,
    pub eta_norm: Vec<f64>,
    pub eta0_zero: bool,
    /// Time of the first non-finite state, if the run blew up.
    pub divergence: Option<f64>,
    pub scenario_hash: Option<String>,
}

impl Trajectory {
    fn empty(method: Method, rho: Option<f64>, eta0_zero: bool) -> Self {
        Self {
            method,
            rho,
            t: Vec::new(),
            x: Vec::new(),
            y_c: Vec::new(),
            w: Vec::new(),
            v: Vec::new(),
            u: Vec::new(),
            b: Vec::new(),
            z: Vec::new(),
            x_star: Vec::new(),
            mu_star: Vec::new(),
            eta_norm: Vec::new(),
            eta0_zero,
            divergence: None,
            scenario_hash: None,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    /// `‖A x(t_k) + b(t_k)‖` per sample.
    pub fn gradient_norm(&self, prob: &QuadraticProblem) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.b)
            .map(|(x, b)| (prob.a() * x + b).norm())
            .collect()
    }
}

struct Sample {
    x: DVector<f64>,
    y_c: DVector<f64>,
    w: DVector<f64>,
    v: DVector<f64>,
    u: DVector<f64>,
    b: DVector<f64>,
}

/// A vector field plus the map from state to recorded signals.
trait Loop: Sync {
    fn field(&self, t: f64, state: &[f64], dy: &mut [f64]);
    fn sample(&self, t: f64, state: &[f64]) -> Sample;
}

/// `η̇_i = F η_i + H u_i` for each of the `n` controller blocks.
fn controller_field(f: &DMatrix<f64>, h: &DVector<f64>, eta: &[f64], u: &[f64], dy: &mut [f64]) {
    let m = h.len();
    for (i, &ui) in u.iter().enumerate() {
        let blk = &eta[i * m..(i + 1) * m];
        for r in 0..m {
            let mut acc = h[r] * ui;
            for c in 0..m {
                acc += f[(r, c)] * blk[c];
            }
            dy[i * m + r] = acc;
        }
    }
}

fn controller_output(k: &[f64], eta: &[f64], n: usize) -> DVector<f64> {
    let m = k.len();
    DVector::from_fn(n, |i, _| k.iter().zip(&eta[i * m..(i + 1) * m]).map(|(a, b)| a * b).sum())
}

struct InternalModelLoop<'a> {
    sc: &'a Scenario,
    f: &'a DMatrix<f64>,
    h: &'a DVector<f64>,
    k: Vec<f64>,
    rho: f64,
    projected: bool,
}

impl InternalModelLoop<'_> {
    fn signals(&self, t: f64, eta: &[f64]) -> Sample {
        let n = self.sc.prob.n();
        let y_c = controller_output(&self.k, eta, n);
        let x = if self.projected { y_c.map(|v| v.max(0.0)) } else { y_c.clone() };
        let w = &y_c - &x;
        let v = &w * self.rho;
        let b = self.sc.source.eval(t);
        let u = self.sc.prob.a() * &x + &b + &v;
        Sample { x, y_c, w, v, u, b }
    }
}

impl Loop for InternalModelLoop<'_> {
    fn field(&self, t: f64, state: &[f64], dy: &mut [f64]) {
        let s = self.signals(t, state);
        controller_field(self.f, self.h, state, s.u.as_slice(), dy);
    }

    fn sample(&self, t: f64, state: &[f64]) -> Sample {
        self.signals(t, state)
    }
}

/// Per-channel loops on `(Λ, Vᵀb)`: `ū_i = λ_i ȳ_i + (ρ − λ_i) w̄_i + b̄_i`
/// with `w̄ = ȳ − Vᵀ proj(V ȳ)`.
struct DecoupledLoop<'a> {
    sc: &'a Scenario,
    f: &'a DMatrix<f64>,
    h: &'a DVector<f64>,
    k: Vec<f64>,
    rho: f64,
    vt: DMatrix<f64>,
}

impl DecoupledLoop<'_> {
    fn channel_signals(&self, t: f64, eta_bar: &[f64]) -> (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>) {
        let v = &self.sc.prob.eig().vectors;
        let lambda = &self.sc.prob.eig().values;
        let n = self.sc.prob.n();
        let y_bar = controller_output(&self.k, eta_bar, n);
        let x = (v * &y_bar).map(|s| s.max(0.0));
        let x_bar = &self.vt * &x;
        let w_bar = &y_bar - &x_bar;
        let b = self.sc.source.eval(t);
        let b_bar = &self.vt * &b;
        let u_bar = DVector::from_fn(n, |i, _| {
            lambda[i] * y_bar[i] + (self.rho - lambda[i]) * w_bar[i] + b_bar[i]
        });
        (y_bar, w_bar, u_bar, b)
    }
}

impl Loop for DecoupledLoop<'_> {
    fn field(&self, t: f64, state: &[f64], dy: &mut [f64]) {
        let (_, _, u_bar, _) = self.channel_signals(t, state);
        controller_field(self.f, self.h, state, u_bar.as_slice(), dy);
    }

    fn sample(&self, t: f64, state: &[f64]) -> Sample {
        let v = &self.sc.prob.eig().vectors;
        let (y_bar, w_bar, u_bar, b) = self.channel_signals(t, state);
        let y_c = v * y_bar;
        let x = y_c.map(|s| s.max(0.0));
        let w = v * w_bar;
        Sample { v: &w * self.rho, u: v * u_bar, x, y_c, w, b }
    }
}

struct OpgdLoop<'a> {
    sc: &'a Scenario,
}

impl Loop for OpgdLoop<'_> {
    fn field(&self, t: f64, state: &[f64], dy: &mut [f64]) {
        let q = DVector::from_column_slice(state);
        let b = self.sc.source.eval(t);
        let step = &q - (self.sc.prob.a() * &q + b) * self.sc.alpha;
        for i in 0..dy.len() {
            dy[i] = -q[i] + step[i].max(0.0);
        }
    }

    fn sample(&self, t: f64, state: &[f64]) -> Sample {
        let q = DVector::from_column_slice(state);
        let b = self.sc.source.eval(t);
        let n = q.len();
        Sample {
            u: self.sc.prob.a() * &q + &b,
            x: q.clone(),
            y_c: q,
            w: DVector::zeros(n),
            v: DVector::zeros(n),
            b,
        }
    }
}

fn run(sc: &Scenario, lp: &dyn Loop, mut state: Vec<f64>, method: Method, rho: Option<f64>) -> Result<Trajectory> {
    let eta0_zero = state.iter().all(|&v| v == 0.0);
    let mut traj = Trajectory::empty(method, rho, eta0_zero);
    let steps = sc.steps();
    let dt = sc.dt;
    let record = |traj: &mut Trajectory, t: f64, state: &[f64]| {
        let s = lp.sample(t, state);
        let grad = sc.prob.a() * &s.x + &s.b;
        traj.z.push(grad + &s.w);
        traj.t.push(t);
        traj.x.push(s.x);
        traj.y_c.push(s.y_c);
        traj.w.push(s.w);
        traj.v.push(s.v);
        traj.u.push(s.u);
        traj.b.push(s.b);
        traj.eta_norm.push(state.iter().map(|v| v * v).sum::<f64>().sqrt());
    };
    record(&mut traj, 0.0, &state);
    let mut rk = Rk4::new(state.len());
    for k in 0..steps {
        let t = k as f64 * dt;
        match rk.step(&mut state, t, dt, |t, y, dy| lp.field(t, y, dy)) {
            Ok(()) => {}
            Err(Error::NonFinite { .. }) => {
                traj.divergence = Some((k + 1) as f64 * dt);
                break;
            }
            Err(e) => return Err(e),
        }
        if (k + 1) % sc.decimation == 0 || k + 1 == steps {
            record(&mut traj, (k + 1) as f64 * dt, &state);
        }
    }
    // Truncate at the last sample with finite signals.
    if traj.divergence.is_some() {
        let keep = traj
            .z
            .iter()
            .position(|z| z.iter().any(|v| !v.is_finite()))
            .unwrap_or(traj.len());
        truncate(&mut traj, keep);
    }
    fill_optimum(sc, &mut traj)?;
    Ok(traj)
}

fn truncate(traj: &mut Trajectory, len: usize) {
    traj.t.truncate(len);
    traj.x.truncate(len);
    traj.y_c.truncate(len);
    traj.w.truncate(len);
    traj.v.truncate(len);
    traj.u.truncate(len);
    traj.b.truncate(len);
    traj.z.truncate(len);
    traj.eta_norm.truncate(len);
}

/// Fills `x*(t_k)` and `μ*(t_k)` from the frozen-time oracle.
fn fill_optimum(sc: &Scenario, traj: &mut Trajectory) -> Result<()> {
    let a = sc.prob.a();
    let kkt = par::map(sc.exec, &traj.b, |b| qp::solve_nonneg_qp(a, b));
    for p in kkt {
        let p = p?;
        traj.x_star.push(p.x_star);
        traj.mu_star.push(p.mu_star);
    }
    Ok(())
}

fn model_parts(sc: &Scenario) -> Result<(&ControllerDesign, Vec<f64>)> {
    let d = sc.design()?;
    Ok((d, d.k.iter().copied().collect()))
}

/// The projected internal-model loop: `y_c = K_ext η`, `x = proj(y_c)`,
/// `w = y_c − x`, `u = A x + b + ρ w`, `η̇ = F_ext η + H_ext u`.
pub fn simulate_pimaw(sc: &Scenario, rho_override: Option<f64>) -> Result<Trajectory> {
    sc.validate()?;
    let (d, k) = model_parts(sc)?;
    let rho = rho_override.unwrap_or(d.rho);
    let method = if rho_override.is_some() { Method::PimawRho0 } else { Method::Pimaw };
    let lp = InternalModelLoop { sc, f: d.model.f(), h: d.model.h_col(), k, rho, projected: true };
    let eta0 = sc.eta0(d.model.order())?;
    run(sc, &lp, eta0.as_slice().to_vec(), method, Some(rho))
}

/// The same loop simulated channel by channel in the eigenbasis of `A`.
pub fn simulate_decoupled(sc: &Scenario, rho_override: Option<f64>) -> Result<Trajectory> {
    sc.validate()?;
    let (d, k) = model_parts(sc)?;
    let rho = rho_override.unwrap_or(d.rho);
    let m = d.model.order();
    let n = sc.prob.n();
    let vt = sc.prob.eig().vectors.transpose();
    let eta0 = sc.eta0(m)?;
    // η̄ = (Vᵀ ⊗ I_m) η
    let mut eta_bar = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..n {
            for r in 0..m {
                eta_bar[i * m + r] += vt[(i, j)] * eta0[j * m + r];
            }
        }
    }
    let lp = DecoupledLoop { sc, f: d.model.f(), h: d.model.h_col(), k, rho, vt };
    let mut traj = run(sc, &lp, eta_bar, Method::PimawDecoupled, Some(rho))?;
    traj.eta0_zero = eta0.iter().all(|&v| v == 0.0);
    Ok(traj)
}

/// Internal-model loop with the projection replaced by the identity.
pub fn simulate_unconstrained_im(sc: &Scenario) -> Result<Trajectory> {
    sc.validate()?;
    let (d, k) = model_parts(sc)?;
    let lp = InternalModelLoop { sc, f: d.model.f(), h: d.model.h_col(), k, rho: 0.0, projected: false };
    let eta0 = sc.eta0(d.model.order())?;
    run(sc, &lp, eta0.as_slice().to_vec(), Method::UnconstrainedIm, None)
}

/// `q̇ = −q + proj(q − α(A q + b))`.
pub fn simulate_opgd(sc: &Scenario) -> Result<Trajectory> {
    sc.validate()?;
    let q0 = sc.init.q.clone().unwrap_or_else(|| DVector::zeros(sc.prob.n()));
    run(sc, &OpgdLoop { sc }, q0.as_slice().to_vec(), Method::Opgd, None)
}

/// Dispatches on `method`; `rho` only affects [`Method::PimawRho0`] (default 0).
pub fn simulate(sc: &Scenario, method: Method, rho: Option<f64>) -> Result<Trajectory> {
    match method {
        Method::Pimaw => simulate_pimaw(sc, None),
        Method::PimawRho0 => simulate_pimaw(sc, Some(rho.unwrap_or(0.0))),
        Method::PimawDecoupled => simulate_decoupled(sc, None),
        Method::UnconstrainedIm => simulate_unconstrained_im(sc),
        Method::Opgd => simulate_opgd(sc),
    }
}

/// Several methods on the same scenario, run concurrently under `exec`.
pub fn simulate_all(sc: &Scenario, methods: &[Method], rho: Option<f64>, exec: Exec) -> Vec<Result<Trajectory>> {
    par::map(exec, methods, |&m| simulate(sc, m, rho))
}

// ---- metrics ---------------------------------------------------------------

/// `‖x(t_k) − x*(t_k)‖`.
pub fn tracking_error(traj: &Trajectory) -> Vec<f64> {
    traj.x.iter().zip(&traj.x_star).map(|(x, s)| (x - s).norm()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L2Check {
    /// `∫‖z‖²` over the whole run.
    pub lhs: f64,
    /// `γ² ∫‖b‖²` over the whole run.
    pub rhs: f64,
    /// Largest `lhs_k / rhs_k` over prefixes with `rhs_k > 0`.
    pub worst_ratio: f64,
    /// First prefix end time at which the bound failed.
    pub first_violation: Option<f64>,
    pub pass: bool,
}

/// Relative slack allowed on every prefix.
pub const L2_SLACK: f64 = 1e-3;

/// Prefix check `∫₀ᵀ‖z‖² ≤ γ² ∫₀ᵀ‖b‖² (1 + slack)` with trapezoidal sums on
/// the output grid. Refused for a nonzero initial controller state.
pub fn l2_performance_check(traj: &Trajectory, gamma: f64) -> Result<L2Check> {
    if !traj.eta0_zero {
        return Err(Error::NonzeroInitialState);
    }
    let g2 = gamma * gamma;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    let mut worst_ratio = 0.0f64;
    let mut first_violation = None;
    for k in 1..traj.len() {
        let h = traj.t[k] - traj.t[k - 1];
        lhs += 0.5 * h * (traj.z[k - 1].norm_squared() + traj.z[k].norm_squared());
        rhs += 0.5 * h * g2 * (traj.b[k - 1].norm_squared() + traj.b[k].norm_squared());
        if rhs > 0.0 {
            worst_ratio = worst_ratio.max(lhs / rhs);
        }
        if first_violation.is_none() && lhs > rhs * (1.0 + L2_SLACK) {
            first_violation = Some(traj.t[k]);
        }
    }
    let pass = first_violation.is_none() && !traj.diverged();
    Ok(L2Check { lhs, rhs, worst_ratio, first_violation, pass })
}

/// Mean of `series` over samples with `t ≥ (1 − fraction)·t_last`.
pub fn final_window_mean(t: &[f64], series: &[f64], fraction: f64) -> f64 {
    let Some(&t_last) = t.last() else { return f64::NAN };
    let start = t_last * (1.0 - fraction);
    let vals: Vec<f64> = t.iter().zip(series).filter(|(t, _)| **t >= start - 1e-12).map(|(_, v)| *v).collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// Max of `series` over samples with `t ≥ (1 − fraction)·t_last`.
pub fn final_window_max(t: &[f64], series: &[f64], fraction: f64) -> f64 {
    let Some(&t_last) = t.last() else { return f64::NAN };
    let start = t_last * (1.0 - fraction);
    t.iter()
        .zip(series)
        .filter(|(t, _)| **t >= start - 1e-12)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Sample times at which the active set `{i : x*_i = 0}` of the frozen
/// optimum changes.
pub fn switching_instants(traj: &Trajectory) -> Vec<f64> {
    let active = |x: &DVector<f64>| x.iter().map(|&v| v <= 0.0).collect::<Vec<_>>();
    let mut out = Vec::new();
    for k in 1..traj.x_star.len() {
        if active(&traj.x_star[k]) != active(&traj.x_star[k - 1]) {
            out.push(traj.t[k]);
        }
    }
    out
}

/// Peak of `series` over the union of windows `[s, s + width]`, `s` in
/// `instants`. `None` when no sample falls inside a window.
pub fn windowed_peak(t: &[f64], series: &[f64], instants: &[f64], width: f64) -> Option<f64> {
    t.iter()
        .zip(series)
        .filter(|(tk, _)| instants.iter().any(|&s| **tk >= s && **tk <= s + width))
        .map(|(_, v)| *v)
        .reduce(f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::DesignCertificate;
    use crate::exosystem::companion_realization;
    use nalgebra::RowDVector;

    fn scalar_design(coeffs: &[f64], k: &[f64], rho: f64) -> ControllerDesign {
        ControllerDesign {
            model: companion_realization(coeffs).unwrap(),
            k: RowDVector::from_row_slice(k),
            rho,
            gamma: 10.0,
            lambda_min: 1.0,
            lambda_max: 1.0,
            cert: DesignCertificate {
                eps_decay: 0.0,
                hurwitz_max_real: [0.0; 2],
                lmi_vertex_max_eig: [0.0; 2],
                q_min_eig: 0.0,
                stabilization_margins: vec![],
                antiwindup_margins: vec![],
                rho_near_zero: false,
            },
            antiwindup: None,
        }
    }

    fn constant_scenario(a: f64, b: f64, design: Option<ControllerDesign>, t_end: f64) -> Scenario {
        let prob = QuadraticProblem::new(DMatrix::from_element(1, 1, a), a, a).unwrap();
        let src = SignalSource::sinusoid(vec![0.0], 0.0, vec![0.0], vec![b]).unwrap();
        let mut sc = Scenario::new(prob, src, design, t_end, 1e-3);
        sc.exec = Exec::Sequential;
        sc
    }

    #[test]
    fn zero_signal_is_equilibrium() {
        let sc = constant_scenario(1.0, 0.0, Some(scalar_design(&[1.0, 0.0], &[-2.0], 3.0)), 2.0);
        let tr = simulate_pimaw(&sc, None).unwrap();
        assert!(tr.x.iter().chain(&tr.z).all(|v| v.amax() == 0.0));
    }

    #[test]
    fn integrator_tracks_inactive_constant() {
        // closed loop ẏ = K(y + b), pole at -2
        let sc = constant_scenario(1.0, -4.0, Some(scalar_design(&[1.0, 0.0], &[-2.0], 3.0)), 15.0);
        let tr = simulate_pimaw(&sc, None).unwrap();
        let x_end = tr.x.last().unwrap()[0];
        assert!((x_end - 4.0).abs() < 1e-9, "{x_end}");
        let g = tr.gradient_norm(&sc.prob);
        assert!(g[500] < 1e-3 && *g.last().unwrap() < 1e-9);
    }

    #[test]
    fn active_constraint_multiplier() {
        let rho = 1.0;
        let sc = constant_scenario(1.0, 4.0, Some(scalar_design(&[1.0, 0.0], &[-2.0], rho)), 15.0);
        let tr = simulate_pimaw(&sc, None).unwrap();
        let last = tr.len() - 1;
        assert_eq!(tr.x[last][0], 0.0);
        assert!((-tr.w[last][0] - 4.0).abs() < 1e-9);
        assert!((tr.mu_star[last][0] - 4.0).abs() < 1e-12);
        assert!(tracking_error(&tr)[last] < 1e-12);
    }

    #[test]
    fn opgd_fixed_points() {
        let mut sc = constant_scenario(2.0, -4.0, None, 30.0);
        sc.alpha = 0.5;
        let tr = simulate_opgd(&sc).unwrap();
        assert!((tr.x.last().unwrap()[0] - 2.0).abs() < 1e-9);
        let tr = simulate_opgd(&constant_scenario(2.0, 4.0, None, 10.0)).unwrap();
        assert_eq!(tr.x.last().unwrap()[0], 0.0);
        let tr = simulate_opgd(&constant_scenario(2.0, 0.0, None, 1.0)).unwrap();
        assert!(tr.x.iter().all(|q| q[0] == 0.0));
    }

    #[test]
    fn samples_respect_loop_identities() {
        let sc = constant_scenario(1.0, 1.5, Some(scalar_design(&[1.0, 0.0], &[-2.0], 2.0)), 3.0);
        let tr = simulate_pimaw(&sc, None).unwrap();
        assert_eq!(tr.len(), 301);
        for k in 0..tr.len() {
            assert_eq!(tr.w[k], &tr.y_c[k] - &tr.x[k]);
            assert!(tr.x[k].iter().all(|&v| v >= 0.0));
            assert!(tr.x[k][0].min(-tr.w[k][0]).abs() <= 1e-15);
        }
    }

    #[test]
    fn divergence_is_flagged() {
        // destabilizing gain: pole at +50
        let sc = constant_scenario(1.0, 1.0, Some(scalar_design(&[1.0, 0.0], &[50.0], 0.0)), 45.0);
        let tr = simulate_pimaw(&sc, None).unwrap();
        assert!(tr.diverged());
        assert!(tr.len() < 4501);
        assert!(tr.z.iter().all(|z| z[0].is_finite()));
    }

    #[test]
    fn l2_check_refuses_nonzero_start() {
        let mut sc = constant_scenario(1.0, -1.0, Some(scalar_design(&[1.0, 0.0], &[-2.0], 2.0)), 1.0);
        sc.init.eta = Some(DVector::from_element(1, 0.1));
        let tr = simulate_pimaw(&sc, None).unwrap();
        assert_eq!(l2_performance_check(&tr, 10.0), Err(Error::NonzeroInitialState));
    }

    #[test]
    fn l2_check_zero_signal() {
        let sc = constant_scenario(1.0, 0.0, Some(scalar_design(&[1.0, 0.0], &[-2.0], 2.0)), 1.0);
        let c = l2_performance_check(&simulate_pimaw(&sc, None).unwrap(), 10.0).unwrap();
        assert!(c.pass && c.lhs == 0.0 && c.rhs == 0.0);
    }

    #[test]
    fn window_helpers() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0];
        let s = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(final_window_mean(&t, &s, 0.5), 2.0);
        assert_eq!(final_window_max(&t, &s, 0.25), 2.0);
        assert_eq!(windowed_peak(&t, &s, &[1.0], 1.0), Some(4.0));
        assert_eq!(windowed_peak(&t, &s, &[], 1.0), None);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Pimaw, Method::PimawRho0, Method::PimawDecoupled, Method::UnconstrainedIm, Method::Opgd] {
            assert_eq!(Method::parse(m.name()), Some(m));
        }
    }
}
