use std::path::{Path, PathBuf};

use pimaw_core::design::ControllerDesign;
use pimaw_core::linalg;
use pimaw_core::par::Exec;
use pimaw_core::sim::{self, Method, Trajectory};
use pimaw_core::synthesis;
use pimaw_core::Error;
use serde::Serialize;

use crate::design_file::DesignFile;
use crate::error::{CliError, CliResult};
use crate::output::{self, CsvTable, MethodSummary};
use crate::scenario::{self, Overrides, Provenance, Resolved};

/// Interior curvature samples rechecked by `verify`.
pub const VERIFY_INTERIOR: usize = 50;

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub scenario: Option<PathBuf>,
    pub design: Option<PathBuf>,
    pub method: Option<String>,
    pub out: PathBuf,
    pub rho: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub trajectory: Option<PathBuf>,
    pub quiet: bool,
    pub exec: Exec,
}

impl Options {
    fn overrides(&self) -> Overrides {
        Overrides { gamma: self.gamma, seed: self.seed, dt: self.dt }
    }

    fn load_scenario(&self) -> CliResult<Resolved> {
        let path = self.scenario.as_ref().ok_or_else(|| CliError::Input("--scenario is required".into()))?;
        let mut r = scenario::load(path, self.overrides())?;
        r.scenario.exec = self.exec;
        Ok(r)
    }

    fn load_design(&self) -> CliResult<DesignFile> {
        let path = self.design.as_ref().ok_or_else(|| CliError::Input("--design is required".into()))?;
        DesignFile::load(path)
    }
}

fn core_error(e: Error) -> CliError {
    match e {
        Error::StabilizationInfeasible { .. }
        | Error::AntiWindupInfeasible { .. }
        | Error::SolverStalled { .. }
        | Error::HurwitzVerification { .. } => CliError::Infeasible(e.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn synthesize(r: &Resolved) -> CliResult<ControllerDesign> {
    let p = &r.scenario.prob;
    synthesis::design_controller(&r.model, p.lambda_min(), p.lambda_max(), r.gamma, &r.synthesis).map_err(core_error)
}

/// Writes the certified design; exit 2 when either synthesis step fails.
pub fn cmd_synth(opts: &Options) -> CliResult<String> {
    let r = opts.load_scenario()?;
    let design = synthesize(&r)?;
    let file = DesignFile::from_design(&design, Some(r.provenance.scenario_sha256.clone()));
    let path = opts.design.clone().unwrap_or_else(|| opts.out.join("design.json"));
    write(&path, file.to_json()?.as_bytes())?;
    Ok(format!(
        "design written to {}\n  K = {:?}\n  rho = {}\n  gamma = {}\n  eps_decay = {}",
        path.display(),
        file.k,
        file.rho,
        file.gamma,
        file.certificate.eps_decay
    ))
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    provenance: &'a Provenance,
    design: Option<&'a DesignFile>,
    result: MethodSummary,
}

fn parse_method(name: Option<&str>) -> CliResult<Method> {
    let name = name.unwrap_or("pimaw");
    Method::parse(name).ok_or_else(|| CliError::Input(format!("unknown method {name:?}")))
}

fn needs_design(m: Method) -> bool {
    m != Method::Opgd
}

fn l2_gamma(m: Method, gamma: f64) -> Option<f64> {
    needs_design(m).then_some(gamma)
}

fn switching_windows(traj: &Trajectory) -> Vec<f64> {
    sim::switching_instants(traj)
}

pub fn cmd_simulate(opts: &Options) -> CliResult<String> {
    let mut r = opts.load_scenario()?;
    let method = parse_method(opts.method.as_deref())?;
    let file = if needs_design(method) { Some(opts.load_design()?) } else { opts.design.as_ref().map(|_| opts.load_design()).transpose()? };
    if let Some(f) = &file {
        r.scenario.design = Some(f.to_design()?);
    }
    let mut traj = sim::simulate(&r.scenario, method, opts.rho).map_err(core_error)?;
    traj.scenario_hash = Some(r.provenance.scenario_sha256.clone());
    let csv_name = format!("{}.csv", method.name());
    write(&opts.out.join(&csv_name), &output::trajectory_csv(&traj, &r.columns)?)?;
    let gamma = file.as_ref().map_or(r.gamma, |f| f.gamma);
    let switches = switching_windows(&traj);
    let result = output::summarize(&traj, &csv_name, l2_gamma(method, gamma), &switches);
    let line = summary_line(&result);
    let diverged = result.diverged_at;
    let summary = SimulateSummary { provenance: &r.provenance, design: file.as_ref(), result };
    write(&opts.out.join(format!("{}.summary.json", method.name())), &output::to_json_bytes(&summary)?)?;
    if let Some(t) = diverged {
        return Err(CliError::Divergence(format!("{} diverged at t = {t}", method.name())));
    }
    Ok(line)
}

fn summary_line(s: &MethodSummary) -> String {
    let l2 = match &s.l2_check {
        Some(c) if c.pass => "pass",
        Some(_) => "FAIL",
        None => "-",
    };
    format!(
        "{:<12} final-window mean err {:>10.3e}  peak {:>10.3e}  switching peak {:>10}  int|z|^2 {:>10.3e}  L2 {}",
        s.method,
        s.final_window_mean_error,
        s.peak_error,
        s.switching_peak_error.map_or("-".to_string(), |v| format!("{v:.3e}")),
        s.integral_z_sq,
        l2
    )
}

#[derive(Serialize)]
struct CompareSummary<'a> {
    provenance: &'a Provenance,
    design: &'a DesignFile,
    baseline_rho: f64,
    final_window_fraction: f64,
    switching_window_s: f64,
    switching_instants: usize,
    methods: Vec<MethodSummary>,
    chart: Option<String>,
}

pub const COMPARE_METHODS: [Method; 3] = [Method::Pimaw, Method::PimawRho0, Method::Opgd];

/// All three methods on one scenario, plus summary and chart.
pub fn cmd_compare(opts: &Options) -> CliResult<String> {
    let mut r = opts.load_scenario()?;
    let file = match &opts.design {
        Some(_) => opts.load_design()?,
        None => {
            let d = synthesize(&r)?;
            let f = DesignFile::from_design(&d, Some(r.provenance.scenario_sha256.clone()));
            write(&opts.out.join("design.json"), f.to_json()?.as_bytes())?;
            f
        }
    };
    r.scenario.design = Some(file.to_design()?);
    let baseline_rho = opts.rho.unwrap_or(0.0);
    let runs = sim::simulate_all(&r.scenario, &COMPARE_METHODS, Some(baseline_rho), opts.exec);
    let mut trajs = Vec::new();
    for run in runs {
        let mut t = run.map_err(core_error)?;
        t.scenario_hash = Some(r.provenance.scenario_sha256.clone());
        trajs.push(t);
    }
    let switches = switching_windows(&trajs[0]);
    let mut methods = Vec::new();
    let mut series = Vec::new();
    for traj in &trajs {
        let csv_name = format!("{}.csv", traj.method.name());
        let path = opts.out.join(&csv_name);
        write(&path, &output::trajectory_csv(traj, &r.columns)?)?;
        methods.push(output::summarize(traj, &csv_name, l2_gamma(traj.method, file.gamma), &switches));
        series.push((traj.method.name().to_string(), path));
    }
    // Charts are drawn from the files just written, not from memory.
    let chart = if r.columns.iter().any(|c| c == "t") && r.columns.iter().any(|c| c == "err") {
        let tables = series
            .iter()
            .map(|(name, path)| Ok((name.clone(), CsvTable::read(path)?)))
            .collect::<CliResult<Vec<_>>>()?;
        let svg = output::svg_chart("tracking error |x(t) - x*(t)|", "err", &tables)?;
        write(&opts.out.join("tracking_error.svg"), svg.as_bytes())?;
        Some("tracking_error.svg".to_string())
    } else {
        None
    };
    let lines: Vec<String> = methods.iter().map(summary_line).collect();
    let diverged: Vec<String> = methods
        .iter()
        .filter_map(|m| m.diverged_at.map(|t| format!("{} at t = {t}", m.method)))
        .collect();
    let summary = CompareSummary {
        provenance: &r.provenance,
        design: &file,
        baseline_rho,
        final_window_fraction: output::FINAL_WINDOW,
        switching_window_s: output::SWITCH_WINDOW,
        switching_instants: switches.len(),
        methods,
        chart,
    };
    write(&opts.out.join("summary.json"), &output::to_json_bytes(&summary)?)?;
    if !diverged.is_empty() {
        return Err(CliError::Divergence(diverged.join(", ")));
    }
    Ok(lines.join("\n"))
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub design_sha256: String,
    pub checks: Vec<CheckItem>,
    pub pass: bool,
}

fn check(name: &str, pass: bool, detail: String) -> CheckItem {
    CheckItem { name: name.to_string(), pass, detail }
}

/// Independent recomputation of a design's certificates.
pub fn verify_design(file: &DesignFile, r: &Resolved, trajectory: Option<&Path>) -> CliResult<Vec<CheckItem>> {
    let model = file.model()?;
    let k = file.k_row();
    if k.len() != model.order() {
        return Err(CliError::Input(format!("design: K has length {}, model order is {}", k.len(), model.order())));
    }
    let (lo, hi) = (file.lambda_min, file.lambda_max);
    let mut lambdas = vec![lo, hi];
    lambdas.extend(synthesis::interior_lambdas(lo, hi, VERIFY_INTERIOR));
    let mut items = Vec::new();

    let p = &r.scenario.prob;
    let covered = p.lambda_min() >= lo * (1.0 - 1e-12) && p.lambda_max() <= hi * (1.0 + 1e-12);
    items.push(check(
        "curvature-range",
        covered,
        format!("scenario [{}, {}] within design [{lo}, {hi}]", p.lambda_min(), p.lambda_max()),
    ));
    let same_model = model.d_coeffs() == r.model.d_coeffs();
    items.push(check("internal-model", same_model, format!("design d(s) {:?}, scenario d(s) {:?}", model.d_coeffs(), r.model.d_coeffs())));

    let hur = synthesis::verify_hurwitz(&model, &k, &lambdas).map_err(|e| CliError::Input(e.to_string()))?;
    let (wl, wr) = hur.worst().unwrap_or((f64::NAN, f64::NAN));
    items.push(check("hurwitz", hur.pass, format!("max real part {wr:e} at lambda = {wl}")));

    match file.qbar() {
        None => items.push(check("antiwindup-lmi", false, "design has no anti-windup certificate".into())),
        Some(q) => {
            let q = q?;
            let aw = file.antiwindup.as_ref().expect("qbar implies antiwindup");
            let q_min = linalg::symmetric_eigenvalues(&q).map_err(|e| CliError::Input(e.to_string()))?[0];
            items.push(check("qbar-positive", q_min > 0.0, format!("min eigenvalue {q_min:e}")));
            items.push(check("delta-positive", aw.delta > 0.0, format!("delta = {}", aw.delta)));
            let rho = aw.xi / aw.delta;
            let rho_ok = if file.certificate.rho_near_zero {
                file.rho == 0.0 && rho.abs() < synthesis::RHO_ZERO_TOL
            } else {
                (file.rho - rho).abs() <= 1e-9 * rho.abs().max(1.0)
            };
            items.push(check("rho-consistency", rho_ok, format!("rho = {}, xi/delta = {rho}", file.rho)));
            let mut worst = (f64::NEG_INFINITY, f64::NAN);
            for &l in &lambdas {
                let m = synthesis::assemble_antiwindup_lmi(&model, &k, l, file.gamma, &q, aw.delta, aw.xi)
                    .map_err(|e| CliError::Input(e.to_string()))?;
                let e = linalg::eig_max_symmetric(&m).map_err(|e| CliError::Input(e.to_string()))?;
                if e > worst.0 {
                    worst = (e, l);
                }
            }
            items.push(check(
                "antiwindup-lmi",
                worst.0 < 0.0,
                format!("max eigenvalue {:e} at lambda = {}", worst.0, worst.1),
            ));
        }
    }

    if let Some(path) = trajectory {
        if !r.eta0_is_zero() {
            items.push(check("l2-prefix", false, "refused: initial controller state is nonzero".into()));
        } else {
            let table = CsvTable::read(path)?;
            let c = output::l2_check_from_table(&table, file.gamma)?;
            items.push(check(
                "l2-prefix",
                c.pass,
                format!("lhs {:e}, rhs {:e}, worst prefix ratio {:e}", c.lhs, c.rhs, c.worst_ratio),
            ));
        }
    }
    Ok(items)
}

pub fn cmd_verify(opts: &Options) -> CliResult<String> {
    let r = opts.load_scenario()?;
    let path = opts.design.as_ref().ok_or_else(|| CliError::Input("--design is required".into()))?;
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let file = opts.load_design()?;
    let checks = verify_design(&file, &r, opts.trajectory.as_deref())?;
    let pass = checks.iter().all(|c| c.pass);
    let report = VerifyReport { design_sha256: scenario::sha256_hex(&bytes), checks, pass };
    write(&opts.out.join("verify.json"), &output::to_json_bytes(&report)?)?;
    let lines: Vec<String> = report
        .checks
        .iter()
        .map(|c| format!("{:<16} {}  {}", c.name, if c.pass { "pass" } else { "FAIL" }, c.detail))
        .collect();
    if !pass {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        return Err(CliError::Verify(format!("{}\n{}", failed.join(", "), lines.join("\n"))));
    }
    Ok(lines.join("\n"))
}
