//! Subcommand implementations. Each returns its report text and whether the
//! run counts as a pass; `main` maps that to the exit status.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use leadcons_core::netgraph::validate_schedule;
use leadcons_core::numkit::eigenvalues;
use leadcons_core::spectral::{delta as schedule_delta, ScheduleSpectra};
use leadcons_core::switchsim::{self, max_normalized_deviation, Mode, Rk4Options, Trajectory};
use leadcons_core::synthesis::{
    check_solvable, decay_certificate, design_gains, mu_floor, Certificate, GainDesign, GainRequest, LoopKind,
    Solvability,
};
use leadcons_core::DMatrix;
use serde::Serialize;

use crate::error::AppError;
use crate::report::{self, component_series, error_series, DecayFit, PlotOptions};
use crate::scenario::{MatrixJson, Scenario};

/// Bundled eight-follower scenario for the third-order example plant.
pub const EXAMPLE_SCENARIO: &str = include_str!("../fixtures/standin_eight.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Validation or certification failed (exit 1).
    Failure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Failure => 1,
        }
    }

    fn and(self, ok: bool) -> Self {
        if ok {
            self
        } else {
            Status::Failure
        }
    }
}

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub text: String,
    pub status: Status,
    /// Files written, in creation order.
    pub files: Vec<PathBuf>,
}

impl CommandOutput {
    fn new() -> Self {
        CommandOutput { text: String::new(), status: Status::Success, files: Vec::new() }
    }
}

/// Significant-figure formatting for reports.
pub fn sig(v: f64, digits: i32) -> String {
    if !v.is_finite() {
        return if v > 0.0 { "inf".into() } else if v < 0.0 { "-inf".into() } else { "nan".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    if !(-4..=6).contains(&magnitude) {
        return format!("{:.*e}", (digits - 1).max(0) as usize, v);
    }
    let decimals = (digits - 1 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

fn fmt_row(m: &DMatrix<f64>) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| r.iter().map(|v| sig(*v, 6)).collect::<Vec<_>>().join(", "))
        .collect();
    format!("[{}]", rows.join("; "))
}

/// `validate`: schedule assumptions and plant rank conditions.
pub fn validate(scenario: &Scenario) -> CommandOutput {
    let mut out = CommandOutput::new();
    let report = validate_schedule(&scenario.schedule);
    let _ = writeln!(out.text, "{report}");
    out.status = out.status.and(report.is_valid());

    let n = scenario.plant.state_dim();
    let ctrl = scenario.plant.controllability_rank();
    let _ = writeln!(
        out.text,
        "controllability rank {ctrl}/{n}: {}",
        if ctrl == n { "ok" } else { "RANK DEFICIENT" }
    );
    out.status = out.status.and(ctrl == n);
    if let Some(obs) = scenario.plant.observability_rank() {
        let _ = writeln!(
            out.text,
            "observability rank {obs}/{n}: {}",
            if obs == n { "ok" } else { "RANK DEFICIENT" }
        );
        out.status = out.status.and(obs == n);
    }
    out
}

/// `delta`: instability budget, margin and per-window product norms.
pub fn delta(scenario: &Scenario) -> Result<CommandOutput, AppError> {
    let mut out = CommandOutput::new();
    let report = validate_schedule(&scenario.schedule);
    if !report.is_valid() {
        let _ = writeln!(out.text, "{report}");
        out.status = Status::Failure;
        return Ok(out);
    }
    let spectra = ScheduleSpectra::new(&scenario.schedule)?;
    for (k, norm) in spectra.window_norms(&scenario.schedule)?.iter().enumerate() {
        let _ = writeln!(out.text, "window {k}: ‖∏P‖ = {}", sig(*norm, 6));
    }
    let d = schedule_delta(&scenario.schedule)?;
    let verdict = check_solvable(&scenario.plant.a, d, scenario.schedule.t_c())?;
    let _ = writeln!(out.text, "delta = {}", sig(d, 6));
    let _ = writeln!(out.text, "margin = {} (T_c = {})", sig(verdict.margin, 6), scenario.schedule.t_c());
    let _ = writeln!(out.text, "{}", solvability_line(&verdict));
    Ok(out)
}

fn solvability_line(v: &Solvability) -> String {
    format!(
        "lambda_max(A) = {} {} margin {}: {}",
        sig(v.lambda_max, 4),
        if v.solvable { "<" } else { ">=" },
        sig(v.margin, 6),
        if v.solvable { "solvable" } else { "not certified solvable" }
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateJson {
    pub mode: &'static str,
    pub lambda_max: f64,
    pub lambda_star: f64,
    pub c0: f64,
    pub c1: f64,
    pub ell: u32,
    pub phases_per_window: u32,
    pub ln_c3: f64,
    /// `null` when the projector term alone is not below 1.
    pub alpha_threshold: Option<f64>,
    pub alpha: f64,
    pub rho: f64,
    pub varrho: f64,
    pub ln_c2: f64,
    pub certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CertificateJson {
    fn new(mode: Mode, c: &Certificate, note: Option<String>) -> Self {
        CertificateJson {
            mode: mode.name(),
            lambda_max: c.lambda_max,
            lambda_star: c.lambda_star,
            c0: c.c0,
            c1: c.c1,
            ell: c.ell,
            phases_per_window: c.phases_per_window,
            ln_c3: c.ln_c3,
            alpha_threshold: c.alpha_threshold.is_finite().then_some(c.alpha_threshold),
            alpha: c.alpha,
            rho: c.rho,
            varrho: c.varrho,
            ln_c2: c.ln_c2,
            certified: c.certified && note.is_none(),
            note,
        }
    }
}

/// Contents of the `synth` output file.
#[derive(Debug, Clone, Serialize)]
pub struct SynthJson {
    pub scenario: String,
    pub delta: f64,
    /// `null` when δ = 0 (unbounded margin).
    pub margin: Option<f64>,
    pub lambda_max: f64,
    pub solvable: bool,
    pub alpha: f64,
    pub t_star: f64,
    pub mu: f64,
    pub mu_floor: f64,
    pub aggressive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_c: Option<MatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_o: Option<MatrixJson>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<MatrixJson>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<MatrixJson>,
    pub certificates: Vec<CertificateJson>,
}

/// Gains, budget and certificates for a scenario's design section.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub delta: f64,
    pub verdict: Solvability,
    pub design: GainDesign,
    pub certificates: Vec<(Mode, Result<Certificate, leadcons_core::Error>)>,
    pub json: SynthJson,
}

fn smallest_nonzero_eigenvalue(scenario: &Scenario) -> Result<Option<f64>, AppError> {
    let spectra = ScheduleSpectra::new(&scenario.schedule)?;
    Ok(spectra
        .splits()
        .iter()
        .flat_map(|s| s.nonzero_eigenvalues().iter().copied())
        .reduce(f64::min))
}

pub fn synthesize(scenario: &Scenario) -> Result<Synthesis, AppError> {
    let d = scenario.design()?;
    let aggressive_floor = if d.aggressive {
        smallest_nonzero_eigenvalue(scenario)?.map(|l| 1.0 / l)
    } else {
        None
    };
    let params = scenario.design_params(aggressive_floor)?;
    let modes = d.mode.modes();
    let request = GainRequest {
        feedback: modes.contains(&Mode::Consensus),
        observer: modes.contains(&Mode::Observer),
    };
    let design = design_gains(&scenario.plant, &params, request)?;
    let delta = schedule_delta(&scenario.schedule)?;
    let verdict = check_solvable(&scenario.plant.a, delta, scenario.schedule.t_c())?;
    let worst_case_floor = mu_floor(params.n_followers)?;
    let below_floor = params.mu < worst_case_floor * (1.0 - 1e-12);

    let mut certificates = Vec::new();
    let mut cert_json = Vec::new();
    for &mode in modes {
        let kind = match mode {
            Mode::Consensus => LoopKind::Feedback,
            Mode::Observer => LoopKind::Observer,
        };
        let cert = decay_certificate(
            &scenario.plant,
            &params,
            kind,
            delta,
            scenario.schedule.t_c(),
            scenario.schedule.dwell_floor(),
            None,
        );
        if let Ok(c) = &cert {
            let note = below_floor.then(|| format!("mu below 1/lambda_H = {worst_case_floor}; not covered"));
            cert_json.push(CertificateJson::new(mode, c, note));
        }
        certificates.push((mode, cert));
    }

    let json = SynthJson {
        scenario: scenario.name.clone(),
        delta,
        margin: verdict.margin.is_finite().then_some(verdict.margin),
        lambda_max: verdict.lambda_max,
        solvable: verdict.solvable,
        alpha: params.alpha,
        t_star: params.t_star,
        mu: params.mu,
        mu_floor: worst_case_floor,
        aggressive: d.aggressive,
        w_c: design.w_c.as_ref().map(MatrixJson::from_matrix),
        w_o: design.w_o.as_ref().map(MatrixJson::from_matrix),
        k: design.k.as_ref().map(MatrixJson::from_matrix),
        l: design.l.as_ref().map(MatrixJson::from_matrix),
        certificates: cert_json,
    };
    Ok(Synthesis { delta, verdict, design, certificates, json })
}

fn ensure_dir(dir: &Path) -> Result<(), AppError> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))
}

fn synth_summary(out: &mut CommandOutput, scenario: &Scenario, s: &Synthesis) -> bool {
    let p = &s.design.params;
    let _ = writeln!(out.text, "delta = {}, margin = {}", sig(s.delta, 6), sig(s.verdict.margin, 6));
    let _ = writeln!(out.text, "{}", solvability_line(&s.verdict));
    let _ = writeln!(
        out.text,
        "alpha = {}, t* = {}, mu = {} (1/lambda_H({}) = {})",
        p.alpha,
        p.t_star,
        sig(p.mu, 6),
        scenario.schedule.n_followers(),
        sig(s.json.mu_floor, 6)
    );
    if let Some(k) = &s.design.k {
        let _ = writeln!(out.text, "K = {}", fmt_row(k));
    }
    if let Some(l) = &s.design.l {
        let _ = writeln!(out.text, "L^T = {}", fmt_row(&l.transpose()));
    }
    let mut all_certified = s.verdict.solvable;
    for (mode, cert) in &s.certificates {
        match cert {
            Ok(c) => {
                let json = s.json.certificates.iter().find(|j| j.mode == mode.name());
                let certified = json.is_some_and(|j| j.certified);
                all_certified &= certified;
                let _ = writeln!(
                    out.text,
                    "{} certificate: lambda* = {}, C1 = {}, ell = {}, C0 = {}, alpha threshold = {}, rho = {}, varrho = {}: {}",
                    mode.name(),
                    sig(c.lambda_star, 6),
                    sig(c.c1, 6),
                    c.ell,
                    sig(c.c0, 6),
                    sig(c.alpha_threshold, 6),
                    sig(c.rho, 6),
                    sig(c.varrho, 6),
                    if certified {
                        "certified".to_string()
                    } else if let Some(note) = json.and_then(|j| j.note.clone()) {
                        format!("NOT CERTIFIED ({note})")
                    } else {
                        "NOT CERTIFIED (raise alpha or shorten t*)".to_string()
                    }
                );
            }
            Err(e) => {
                all_certified = false;
                let _ = writeln!(out.text, "{} certificate: unavailable ({e})", mode.name());
            }
        }
    }
    all_certified
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub out: PathBuf,
    pub strict: bool,
}

/// `synth`: gains plus certificates, written to `<out>/<name>.synth.json`.
pub fn synth(scenario: &Scenario, options: &SynthOptions) -> Result<CommandOutput, AppError> {
    let mut out = CommandOutput::new();
    let report = validate_schedule(&scenario.schedule);
    if !report.is_valid() {
        let _ = writeln!(out.text, "{report}");
        out.status = Status::Failure;
        return Ok(out);
    }
    let s = synthesize(scenario)?;
    let certified = synth_summary(&mut out, scenario, &s);
    ensure_dir(&options.out)?;
    let path = options.out.join(format!("{}.synth.json", scenario.name));
    let text = serde_json::to_string_pretty(&s.json).expect("synthesis report serializes");
    fs::write(&path, text + "\n").map_err(|e| AppError::io(&path, e))?;
    let _ = writeln!(out.text, "wrote {}", path.display());
    out.files.push(path);
    if options.strict {
        out.status = out.status.and(certified);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub out: PathBuf,
    pub cross_check: bool,
    /// Also plot the error norm on a log axis.
    pub error_plot: bool,
}

/// Builds the core scenario for one mode of a run.
pub fn sim_scenario(scenario: &Scenario, design: &GainDesign, mode: Mode) -> Result<switchsim::Scenario, AppError> {
    let sim = scenario.sim()?;
    let init = scenario.initial_states()?;
    Ok(switchsim::Scenario {
        plant: scenario.plant.clone(),
        schedule: scenario.schedule.clone(),
        design: design.clone(),
        mode,
        initial_leader: init.leader,
        initial_followers: match mode {
            Mode::Consensus => init.followers,
            Mode::Observer => init.observers,
        },
        horizon: sim.horizon,
        sample_step: sim.sample_step,
    })
}

fn write_plots(
    out: &mut CommandOutput,
    dir: &Path,
    stem: &str,
    traj: &Trajectory,
    error_plot: bool,
) -> Result<(), AppError> {
    let symbol = match traj.mode {
        Mode::Consensus => "x",
        Mode::Observer => "eta",
    };
    for c in 0..traj.state_dim() {
        let path = dir.join(format!("{stem}.{symbol}{}.svg", c + 1));
        let options = PlotOptions {
            title: format!("{} component {}: leader and agents", traj.mode.name(), c + 1),
            y_label: format!("{symbol}_i,{}(t)", c + 1),
            ..PlotOptions::default()
        };
        let file = File::create(&path).map_err(|e| AppError::io(&path, e))?;
        report::render_svg(&component_series(traj, c), &options, file)?;
        out.files.push(path);
    }
    if error_plot {
        let path = dir.join(format!("{stem}.error.svg"));
        let options = PlotOptions {
            title: format!("{} error norm", traj.mode.name()),
            y_label: "‖error‖".into(),
            log_y: true,
            ..PlotOptions::default()
        };
        let file = File::create(&path).map_err(|e| AppError::io(&path, e))?;
        report::render_svg(&[error_series(traj)], &options, file)?;
        out.files.push(path);
    }
    Ok(())
}

/// `simulate`: exact propagation per mode, CSV + SVG output and a fitted
/// decay rate; optionally the RK4 cross-check.
pub fn simulate(scenario: &Scenario, options: &SimulateOptions) -> Result<CommandOutput, AppError> {
    let mut out = CommandOutput::new();
    let report = validate_schedule(&scenario.schedule);
    if !report.is_valid() {
        let _ = writeln!(out.text, "{report}");
        out.status = Status::Failure;
        return Ok(out);
    }
    let d = scenario.design()?;
    let s = synthesize(scenario)?;
    ensure_dir(&options.out)?;
    for &mode in d.mode.modes() {
        let sc = sim_scenario(scenario, &s.design, mode)?;
        let traj = switchsim::propagate_exact(&sc)?;
        let stem = format!("{}.{}", scenario.name, mode.name());

        let csv_path = options.out.join(format!("{stem}.csv"));
        let file = File::create(&csv_path).map_err(|e| AppError::io(&csv_path, e))?;
        report::write_csv(&traj, file).map_err(|e| AppError::io(&csv_path, e))?;
        out.files.push(csv_path);
        write_plots(&mut out, &options.out, &stem, &traj, options.error_plot)?;

        let e0 = traj.error_norms[0];
        let e_end = *traj.error_norms.last().expect("at least one sample");
        let leader_growth = traj.leader_states.last().expect("sample").norm() / traj.leader_states[0].norm();
        let _ = writeln!(
            out.text,
            "{}: {} samples to t = {}, ‖e(T)‖/‖e(0)‖ = {}, leader ‖x0(T)‖/‖x0(0)‖ = {}",
            mode.name(),
            traj.len(),
            sig(*traj.times.last().expect("sample"), 6),
            sig(if e0 > 0.0 { e_end / e0 } else { 0.0 }, 4),
            sig(leader_growth, 4)
        );
        let t_start = 2.0 * scenario.schedule.t_c();
        match report::fit_decay_rate(&traj, t_start) {
            Ok(DecayFit::Rate(fit)) => {
                let _ = writeln!(
                    out.text,
                    "{}: fitted rate {} 1/s (r^2 = {}) over t in [{}, {}]",
                    mode.name(),
                    sig(fit.slope, 4),
                    sig(fit.r_squared, 4),
                    sig(fit.fit_window.0, 4),
                    sig(fit.fit_window.1, 4)
                );
            }
            Ok(DecayFit::AlreadyConverged) => {
                let _ = writeln!(out.text, "{}: already converged (error below 1e-12)", mode.name());
            }
            Err(e) => {
                let _ = writeln!(out.text, "{}: no rate fit ({e})", mode.name());
            }
        }
        if options.cross_check {
            let rk = switchsim::integrate_rk4(&sc, Rk4Options::default())?;
            let dev = max_normalized_deviation(&traj, &rk)?;
            let _ = writeln!(out.text, "{}: max exact-vs-rk4 deviation {}", mode.name(), sig(dev, 3));
        }
    }
    for f in &out.files {
        let _ = writeln!(out.text, "wrote {}", f.display());
    }
    Ok(out)
}

/// `repro-example`: the bundled eight-follower scenario end to end.
pub fn repro_example(out_dir: &Path) -> Result<CommandOutput, AppError> {
    let scenario = Scenario::parse(EXAMPLE_SCENARIO)?;
    let mut out = CommandOutput::new();

    let ev = eigenvalues(&scenario.plant.a)?;
    let listed: Vec<String> = ev
        .iter()
        .filter(|z| z.im >= 0.0)
        .map(|z| {
            if z.im == 0.0 {
                sig(z.re, 3)
            } else {
                format!("{} ± {}i", sig(z.re, 3), sig(z.im, 3))
            }
        })
        .collect();
    let _ = writeln!(out.text, "eigenvalues of A: {}", listed.join(", "));
    let v = validate(&scenario);
    out.text.push_str(&v.text);
    out.status = v.status;
    let s = synthesize(&scenario)?;
    synth_summary(&mut out, &scenario, &s);

    let sim = simulate(
        &scenario,
        &SimulateOptions { out: out_dir.to_path_buf(), cross_check: false, error_plot: false },
    )?;
    out.text.push_str(&sim.text);
    out.files.extend(sim.files);
    out.status = out.status.and(sim.status == Status::Success);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_figures() {
        assert_eq!(sig(0.318_957, 3), "0.319");
        assert_eq!(sig(2.402_83, 3), "2.40");
        assert_eq!(sig(0.790_569_415, 6), "0.790569");
        assert_eq!(sig(1.732_867_951, 6), "1.73287");
        assert_eq!(sig(120.000_000_1, 6), "120.000");
        assert_eq!(sig(f64::INFINITY, 6), "inf");
        assert_eq!(sig(3.0e-9, 2), "3.0e-9");
    }

    #[test]
    fn bundled_scenario_parses() {
        let s = Scenario::parse(EXAMPLE_SCENARIO).unwrap();
        assert_eq!(s.schedule.n_followers(), 8);
        assert!(validate(&s).status == Status::Success);
    }
}
