//! Command-line front end for the mean field solver.
//!
//! Subcommands cover the full pipeline: mesh generation, the closed-form
//! disk oracle, single solves, continuation branches, linearized spectra,
//! domain classification, thermodynamic curves, convexity scans, and the
//! blow-up law verifications. Curves are CSV for external plotting;
//! structured results are JSON embedding the SHA-256 of their primary input
//! and the tolerance set in force. All default paths are deterministic:
//! rerunning a command with identical inputs reproduces its outputs byte for
//! byte. Exit codes: 0 success, 1 computation error, 2 usage error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use meanfield::asymptotics::{
    check_est_muk, check_im_ck, test_function_energy, test_function_limit,
};
use meanfield::classify::{classify_domain, default_r_list, KindVerdict};
use meanfield::domain::Domain;
use meanfield::fem::FemSpace;
use meanfield::geometry::{make_disk_mesh, Mesh, Point2};
use meanfield::oracle::DiskOracle;
use meanfield::solver::{
    continue_in_amplitude, continue_in_rho, solve_mean_field, Branch, Problem, Solution,
};
use meanfield::spectral::smallest_eigenvalues;
use meanfield::thermo::{build_thermo_curve, convexity_scan, ThermoCurve, ThermoSample};
use meanfield::weights::{SinkConfig, WeightField};
use meanfield::MfError;

// ------------------------------------------------------------------ errors

/// An error routed to one of the two non-zero exit codes.
struct AppError {
    message: String,
    usage: bool,
}

impl AppError {
    fn usage(message: impl Into<String>) -> AppError {
        AppError {
            message: message.into(),
            usage: true,
        }
    }

    fn compute(message: impl Into<String>) -> AppError {
        AppError {
            message: message.into(),
            usage: false,
        }
    }
}

impl From<MfError> for AppError {
    fn from(e: MfError) -> AppError {
        match e {
            MfError::InvalidInput(_) => AppError::usage(e.to_string()),
            _ => AppError::compute(e.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> AppError {
        AppError::compute(e.to_string())
    }
}

type AppResult<T> = Result<T, AppError>;

// ------------------------------------------------------------------- args

#[derive(Parser)]
#[command(
    name = "meanfield",
    version,
    about = "Singular Liouville mean field equations: solver, classifier, and thermodynamic curves"
)]
struct Cli {
    /// Reserved for future randomized algorithms; default paths ignore it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a graded disk triangulation in the ASCII mesh format.
    Mesh {
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long)]
        level: u32,
        /// Grading center as "x,y"; omit for a quasi-uniform mesh.
        #[arg(long, value_name = "x,y")]
        grade_at: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the closed-form disk branch as a CSV table (rho,gamma,E,I_w,lambda,c).
    Oracle {
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        /// Geometric grid "a:b:n" over the height parameter gamma.
        #[arg(long, default_value = "0.5:100:20")]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the mean field equation at a single mass.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        rho: f64,
        /// Prior solution JSON used as the Newton starting point.
        #[arg(long)]
        guess: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Continue a solution branch in mass or in sink-height amplitude.
    Branch {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: BranchParam,
        /// Uniform grid "a:b:n" of the continuation parameter.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Smallest eigenvalues of the linearized operator at a solution.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(short, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify the configuration as first or second kind via D0.
    Classify {
        #[arg(long)]
        config: PathBuf,
        /// Truncation radii, e.g. "0.2,0.1,0.05,0.025"; defaults to an
        /// adapted ladder.
        #[arg(long)]
        radii: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the thermodynamic curve of a stored branch as CSV.
    Thermo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        branch: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scan a thermodynamic curve for intervals of constant S''(E) sign.
    Scan {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a blow-up asymptotic law along a stored branch.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        branch: Option<PathBuf>,
        #[arg(long, value_enum)]
        law: Law,
        /// Classification artifact from `classify`; required for im-ck.
        #[arg(long)]
        verdict: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchParam {
    Rho,
    Amp,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Law {
    EstMuk,
    ImCk,
    Iexp,
}

// ----------------------------------------------------------------- config

/// Solver tolerances in force; informational copies of the library
/// constants, embedded in every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tolerances {
    #[serde(default = "default_newton_tol")]
    newton_residual: f64,
    #[serde(default = "default_max_iters")]
    max_newton_iters: usize,
}

fn default_newton_tol() -> f64 {
    1e-10
}

fn default_max_iters() -> usize {
    50
}

impl Default for Tolerances {
    fn default() -> Tolerances {
        Tolerances {
            newton_residual: default_newton_tol(),
            max_newton_iters: default_max_iters(),
        }
    }
}

/// A run configuration: disk domain, sinks, mesh resolution, tolerances.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunConfig {
    /// Disk radius; the analytic domain is the disk of this radius at the
    /// origin.
    #[serde(default = "default_radius")]
    radius: f64,
    sinks: SinkConfig,
    #[serde(default = "default_level")]
    mesh_level: u32,
    /// Optional externally generated mesh in the ASCII format; overrides
    /// `mesh_level`.
    #[serde(default)]
    mesh_file: Option<String>,
    /// Grade the generated mesh toward the sink (ignored with `mesh_file`).
    #[serde(default = "default_true")]
    grade_at_sink: bool,
    #[serde(default)]
    tolerances: Tolerances,
}

fn default_radius() -> f64 {
    1.0
}

fn default_level() -> u32 {
    3
}

fn default_true() -> bool {
    true
}

/// Parsed configuration plus the hash of the file it came from.
struct LoadedConfig {
    run: RunConfig,
    sha256: String,
    base_dir: PathBuf,
}

/// Reads and validates a config, aggregating every violation into one error.
fn parse_config(path: &Path) -> AppResult<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| AppError::usage(format!("config file not found: {}", path.display())))?;
    let run: RunConfig = serde_json::from_str(&text).map_err(|e| {
        AppError::usage(format!(
            "malformed config {} at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut violations = Vec::new();
    if !(run.radius > 0.0) {
        violations.push(format!("radius must be positive, got {}", run.radius));
    }
    let beta = run.sinks.beta;
    if !(-1.0 < beta && beta < 0.0) {
        violations.push(format!("beta must satisfy beta in (-1, 0), got {beta}"));
    }
    for (i, p) in run.sinks.positives.iter().enumerate() {
        if !(p.alpha > 0.0) {
            violations.push(format!(
                "positives[{i}].alpha must be positive, got {}",
                p.alpha
            ));
        }
        if p.q.norm() >= run.radius {
            violations.push(format!(
                "positives[{i}] at ({}, {}) lies outside the disk of radius {}",
                p.q.x, p.q.y, run.radius
            ));
        }
    }
    if run.sinks.q0.norm() >= run.radius {
        violations.push(format!(
            "sink q0 at ({}, {}) lies outside the disk of radius {}",
            run.sinks.q0.x, run.sinks.q0.y, run.radius
        ));
    }
    if !(1..=8).contains(&run.mesh_level) {
        violations.push(format!(
            "mesh_level must be within 1..=8, got {}",
            run.mesh_level
        ));
    }
    if let Some(f) = &run.mesh_file {
        if !base_dir.join(f).is_file() {
            violations.push(format!(
                "mesh file not found: {}",
                base_dir.join(f).display()
            ));
        }
    }
    if !(run.tolerances.newton_residual > 0.0) {
        violations.push("tolerances.newton_residual must be positive".into());
    }
    if run.tolerances.max_newton_iters == 0 {
        violations.push("tolerances.max_newton_iters must be positive".into());
    }
    if !violations.is_empty() {
        return Err(AppError::usage(format!(
            "invalid config {}: {}",
            path.display(),
            violations.join("; ")
        )));
    }
    Ok(LoadedConfig {
        run,
        sha256: hex::encode(Sha256::digest(text.as_bytes())),
        base_dir,
    })
}

fn build_field(cfg: &RunConfig) -> AppResult<Arc<WeightField>> {
    let domain = Arc::new(Domain::disk(Point2::new(0.0, 0.0), cfg.radius));
    Ok(Arc::new(WeightField::new(domain, cfg.sinks.clone())?))
}

fn build_problem(loaded: &LoadedConfig) -> AppResult<Arc<Problem>> {
    let cfg = &loaded.run;
    let mesh = match &cfg.mesh_file {
        Some(f) => {
            let path = loaded.base_dir.join(f);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| AppError::usage(format!("cannot read {}: {e}", path.display())))?;
            Mesh::from_ascii(&text)?
        }
        None => {
            let grade = cfg.grade_at_sink.then_some(cfg.sinks.q0);
            make_disk_mesh(cfg.radius, cfg.mesh_level, grade)?
        }
    };
    let fem = Arc::new(FemSpace::new(Arc::new(mesh))?);
    let field = build_field(cfg)?;
    Ok(Arc::new(Problem::new(fem, field)?))
}

// ---------------------------------------------------------------- reports

#[derive(Serialize)]
struct Report<T: Serialize> {
    /// SHA-256 of the primary input file (config, or curve for `scan`)
    input_sha256: String,
    tolerances: Tolerances,
    #[serde(flatten)]
    payload: T,
}

fn write_json<T: Serialize>(out: &Path, report: &T) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| AppError::compute(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(out, text)
        .map_err(|e| AppError::compute(format!("cannot write {}: {e}", out.display())))?;
    Ok(())
}

fn write_text(out: &Path, text: &str) -> AppResult<()> {
    std::fs::write(out, text)
        .map_err(|e| AppError::compute(format!("cannot write {}: {e}", out.display())))
}

#[derive(Serialize, Deserialize)]
struct SolveReport {
    solution: Solution,
}

#[derive(Serialize, Deserialize)]
struct BranchReport {
    param: String,
    grid: Vec<f64>,
    branch: Branch,
}

#[derive(Serialize, Deserialize)]
struct VerdictReport {
    verdict: KindVerdict,
}

// ------------------------------------------------------------ arg parsing

fn parse_point(text: &str) -> AppResult<Point2> {
    let parts: Vec<&str> = text.split(',').collect();
    let err = || AppError::usage(format!("expected \"x,y\", got \"{text}\""));
    if parts.len() != 2 {
        return Err(err());
    }
    let x: f64 = parts[0].trim().parse().map_err(|_| err())?;
    let y: f64 = parts[1].trim().parse().map_err(|_| err())?;
    Ok(Point2::new(x, y))
}

/// Parses "a:b:n" into n values from a to b inclusive.
fn parse_grid(text: &str, geometric: bool) -> AppResult<Vec<f64>> {
    let err = || AppError::usage(format!("expected grid \"a:b:n\", got \"{text}\""));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(err());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| err())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| err())?;
    let n: usize = parts[2].trim().parse().map_err(|_| err())?;
    if n < 1 || (geometric && !(a > 0.0 && b > 0.0)) {
        return Err(err());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            if geometric {
                a * (b / a).powf(t)
            } else {
                a + t * (b - a)
            }
        })
        .collect())
}

fn parse_list(text: &str) -> AppResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| AppError::usage(format!("bad numeric list entry \"{s}\"")))
        })
        .collect()
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> AppResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| AppError::usage(format!("{what} file not found: {}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        AppError::usage(format!(
            "malformed {what} {} at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn csv_num(v: f64) -> String {
    format!("{v:.17e}")
}

// ------------------------------------------------------------- subcommands

fn cmd_mesh(radius: f64, level: u32, grade_at: Option<String>, out: &Path) -> AppResult<()> {
    let grade = grade_at.as_deref().map(parse_point).transpose()?;
    let mesh = make_disk_mesh(radius, level, grade)?;
    write_text(out, &mesh.to_ascii())?;
    println!(
        "mesh: {} nodes, {} triangles -> {}",
        mesh.num_nodes(),
        mesh.num_triangles(),
        out.display()
    );
    Ok(())
}

fn cmd_oracle(beta: f64, grid: &str, out: &Path) -> AppResult<()> {
    let oracle = DiskOracle::new(beta)?;
    let gammas = parse_grid(grid, true)?;
    let mut csv = String::from("rho,gamma,E,I_w,lambda,c\n");
    for g in gammas {
        let rho = oracle.rho_from_gamma(g);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            csv_num(rho),
            csv_num(g),
            csv_num(oracle.energy(rho)?),
            csv_num(oracle.log_mass(rho)?),
            csv_num(oracle.lambda(rho)?),
            csv_num(oracle.c_const(rho)?)
        );
    }
    write_text(out, &csv)?;
    println!("oracle: beta = {beta} table -> {}", out.display());
    Ok(())
}

fn cmd_solve(config: &Path, rho: f64, guess: Option<&Path>, out: &Path) -> AppResult<()> {
    let loaded = parse_config(config)?;
    let problem = build_problem(&loaded)?;
    let guess_values = guess
        .map(|p| read_json::<SolveReport>(p, "guess"))
        .transpose()?
        .map(|r| r.solution.values);
    if let Some(v) = &guess_values {
        if v.len() != problem.fem.mesh.num_nodes() {
            return Err(AppError::usage(format!(
                "guess has {} values but the mesh has {} nodes",
                v.len(),
                problem.fem.mesh.num_nodes()
            )));
        }
    }
    let solution = solve_mean_field(&problem, rho, guess_values.as_deref())?;
    write_json(
        out,
        &Report {
            input_sha256: loaded.sha256,
            tolerances: loaded.run.tolerances.clone(),
            payload: SolveReport { solution: solution.clone() },
        },
    )?;
    println!(
        "solve: rho = {rho}, height {:.4}, residual {:.2e} -> {}",
        solution.max_value,
        solution.residual_norm,
        out.display()
    );
    Ok(())
}

fn cmd_branch(config: &Path, param: BranchParam, grid: &str, out: &Path) -> AppResult<()> {
    let loaded = parse_config(config)?;
    let problem = build_problem(&loaded)?;
    let values = parse_grid(grid, false)?;
    let (name, branch) = match param {
        BranchParam::Rho => ("rho", continue_in_rho(&problem, &values)?),
        BranchParam::Amp => ("amp", continue_in_amplitude(&problem, &values)?),
    };
    // partial results are persisted before any continuation failure is raised
    let failure = branch.failure.clone();
    write_json(
        out,
        &Report {
            input_sha256: loaded.sha256,
            tolerances: loaded.run.tolerances.clone(),
            payload: BranchReport {
                param: name.into(),
                grid: values,
                branch,
            },
        },
    )?;
    match failure {
        Some(msg) => Err(AppError::compute(format!(
            "continuation stopped early (partial branch written to {}): {msg}",
            out.display()
        ))),
        None => {
            println!("branch: {name} continuation -> {}", out.display());
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SpectrumPayload {
    rho: f64,
    formulation: String,
    eigenvalues: Vec<f64>,
}

fn cmd_spectrum(config: &Path, solution: &Path, k: usize, out: &Path) -> AppResult<()> {
    if k == 0 {
        return Err(AppError::usage("k must be positive"));
    }
    let loaded = parse_config(config)?;
    let problem = build_problem(&loaded)?;
    let sol = read_json::<SolveReport>(solution, "solution")?.solution;
    if sol.values.len() != problem.fem.mesh.num_nodes() {
        return Err(AppError::usage(format!(
            "solution has {} values but the mesh has {} nodes",
            sol.values.len(),
            problem.fem.mesh.num_nodes()
        )));
    }
    let report = smallest_eigenvalues(&problem, &sol, k)?;
    write_json(
        out,
        &Report {
            input_sha256: loaded.sha256,
            tolerances: loaded.run.tolerances.clone(),
            payload: SpectrumPayload {
                rho: report.rho,
                formulation: report.formulation.clone(),
                eigenvalues: report.eigenvalues.clone(),
            },
        },
    )?;
    println!(
        "spectrum: eigenvalues {:?} -> {}",
        report.eigenvalues,
        out.display()
    );
    Ok(())
}

fn cmd_classify(config: &Path, radii: Option<&str>, out: &Path) -> AppResult<()> {
    let loaded = parse_config(config)?;
    let field = build_field(&loaded.run)?;
    let r_list = match radii {
        Some(text) => parse_list(text)?,
        None => default_r_list(&field)?,
    };
    let verdict = classify_domain(&field, &r_list)?;
    write_json(
        out,
        &Report {
            input_sha256: loaded.sha256,
            tolerances: loaded.run.tolerances.clone(),
            payload: VerdictReport {
                verdict: verdict.clone(),
            },
        },
    )?;
    println!(
        "classify: {:?} (D0 = {:.6}) -> {}",
        verdict.verdict,
        verdict.d0_truncation,
        out.display()
    );
    Ok(())
}

fn cmd_thermo(config: &Path, branch: &Path, out: &Path) -> AppResult<()> {
    let loaded = parse_config(config)?;
    let problem = build_problem(&loaded)?;
    let stored: Report2<BranchReport> = read_json(branch, "branch")?;
    let curve = build_thermo_curve(&problem, &stored.payload.branch)?;
    let mut csv = String::from("rho,mu,E,J,S,height\n");
    for s in &curve.samples {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            csv_num(s.rho),
            csv_num(s.mu),
            csv_num(s.e),
            csv_num(s.j),
            csv_num(s.s),
            csv_num(s.height)
        );
    }
    write_text(out, &csv)?;
    if !curve.flagged.is_empty() {
        eprintln!(
            "warning: S + rho E + J identity exceeded tolerance at samples {:?}",
            curve.flagged
        );
    }
    println!("thermo: {} samples -> {}", curve.samples.len(), out.display());
    Ok(())
}

/// Mirror of [`Report`] for reading artifacts back in.
#[derive(Deserialize)]
struct Report2<T> {
    #[allow(dead_code)]
    input_sha256: String,
    #[allow(dead_code)]
    tolerances: Tolerances,
    #[serde(flatten)]
    payload: T,
}

fn cmd_scan(curve_path: &Path, out: &Path) -> AppResult<()> {
    let text = std::fs::read_to_string(curve_path)
        .map_err(|_| AppError::usage(format!("curve file not found: {}", curve_path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.trim() != "rho,mu,E,J,S,height" {
        return Err(AppError::usage(format!(
            "unexpected curve header \"{header}\"; expected \"rho,mu,E,J,S,height\""
        )));
    }
    let mut samples = Vec::new();
    for (ln, line) in lines.enumerate() {
        let f: Vec<f64> = line
            .split(',')
            .map(|v| {
                v.trim().parse().map_err(|_| {
                    AppError::usage(format!("bad number on curve line {}: \"{v}\"", ln + 2))
                })
            })
            .collect::<AppResult<_>>()?;
        if f.len() != 6 {
            return Err(AppError::usage(format!(
                "curve line {} has {} fields, expected 6",
                ln + 2,
                f.len()
            )));
        }
        samples.push(ThermoSample {
            rho: f[0],
            mu: f[1],
            e: f[2],
            j: f[3],
            s: f[4],
            height: f[5],
        });
    }
    let curve = ThermoCurve {
        samples,
        flagged: Vec::new(),
        legendre_residual: 0.0,
    };
    let scan = convexity_scan(&curve)?;
    write_json(
        out,
        &Report {
            input_sha256: hex::encode(Sha256::digest(text.as_bytes())),
            tolerances: Tolerances::default(),
            payload: scan,
        },
    )?;
    println!("scan: curve {} -> {}", curve_path.display(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct VerifyPayload<T: Serialize> {
    law: Law,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct ImCkBody {
    d_beta: f64,
    ratios: Vec<f64>,
}

#[derive(Serialize)]
struct IexpBody {
    tau: f64,
    eps: Vec<f64>,
    values: Vec<f64>,
    limit: f64,
    /// empirical exponent over the last sampled decade; exact is 2(1+beta)
    rate: f64,
}

fn cmd_verify(
    config: &Path,
    branch: Option<&Path>,
    law: Law,
    verdict: Option<&Path>,
    out: &Path,
) -> AppResult<()> {
    let loaded = parse_config(config)?;
    // the asymptotic laws only apply to the concentrating tail, so restrict
    // the stored branch to points above the blow-up threshold
    let read_branch = |p: Option<&Path>| -> AppResult<Branch> {
        let p = p.ok_or_else(|| {
            AppError::usage("this law needs a continuation artifact; pass --branch branch.json")
        })?;
        let stored = read_json::<Report2<BranchReport>>(p, "branch")?.payload.branch;
        let points: Vec<Solution> = stored
            .points
            .into_iter()
            .filter(|s| s.max_value > meanfield::spectral::BLOWUP_THRESHOLD)
            .collect();
        if points.is_empty() {
            return Err(AppError::compute(format!(
                "no branch point in {} exceeds the blow-up threshold {}",
                p.display(),
                meanfield::spectral::BLOWUP_THRESHOLD
            )));
        }
        Ok(Branch {
            points,
            failure: None,
        })
    };
    match law {
        Law::EstMuk => {
            let problem = build_problem(&loaded)?;
            let stored = read_branch(branch)?;
            let report = check_est_muk(&problem, &stored)?;
            write_json(
                out,
                &Report {
                    input_sha256: loaded.sha256,
                    tolerances: loaded.run.tolerances.clone(),
                    payload: VerifyPayload {
                        law,
                        body: report.clone(),
                    },
                },
            )?;
            println!(
                "verify est-muk: residuals {:?}, decay rate {:?} -> {}",
                report.residuals,
                report.decay_rate,
                out.display()
            );
        }
        Law::ImCk => {
            let verdict_path = verdict.ok_or_else(|| {
                AppError::usage(
                    "im-ck needs the D_beta prefactor from a prior `classify` run; \
                     pass --verdict verdict.json",
                )
            })?;
            let stored_verdict =
                read_json::<Report2<VerdictReport>>(verdict_path, "verdict")?.payload.verdict;
            let d_beta = stored_verdict.critical_rho * stored_verdict.d0_truncation;
            let problem = build_problem(&loaded)?;
            let stored = read_branch(branch)?;
            let ratios = check_im_ck(&problem, &stored, d_beta)?;
            write_json(
                out,
                &Report {
                    input_sha256: loaded.sha256,
                    tolerances: loaded.run.tolerances.clone(),
                    payload: VerifyPayload {
                        law,
                        body: ImCkBody {
                            d_beta,
                            ratios: ratios.clone(),
                        },
                    },
                },
            )?;
            println!("verify im-ck: ratios {ratios:?} -> {}", out.display());
        }
        Law::Iexp => {
            let field = build_field(&loaded.run)?;
            let d_boundary = loaded.run.radius - loaded.run.sinks.q0.norm();
            let tau = 0.3 * d_boundary;
            let eps: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|e| e * d_boundary).collect();
            let values: Vec<f64> = eps
                .iter()
                .map(|&e| test_function_energy(&field, e, tau))
                .collect::<Result<_, _>>()?;
            let limit = test_function_limit(&field)?;
            let errs: Vec<f64> = values.iter().map(|v| (v - limit).abs()).collect();
            let rate = (errs[1] / errs[2]).log10();
            write_json(
                out,
                &Report {
                    input_sha256: loaded.sha256,
                    tolerances: loaded.run.tolerances.clone(),
                    payload: VerifyPayload {
                        law,
                        body: IexpBody {
                            tau,
                            eps,
                            values: values.clone(),
                            limit,
                            rate,
                        },
                    },
                },
            )?;
            println!(
                "verify iexp: values {values:?} -> limit {limit:.6}, rate {rate:.3} -> {}",
                out.display()
            );
        }
    }
    Ok(())
}

// ------------------------------------------------------------------- main

fn run(cli: Cli) -> AppResult<()> {
    match cli.cmd {
        Cmd::Mesh {
            radius,
            level,
            grade_at,
            out,
        } => cmd_mesh(radius, level, grade_at, &out),
        Cmd::Oracle { beta, grid, out } => cmd_oracle(beta, &grid, &out),
        Cmd::Solve {
            config,
            rho,
            guess,
            out,
        } => cmd_solve(&config, rho, guess.as_deref(), &out),
        Cmd::Branch {
            config,
            param,
            grid,
            out,
        } => cmd_branch(&config, param, &grid, &out),
        Cmd::Spectrum {
            config,
            solution,
            k,
            out,
        } => cmd_spectrum(&config, &solution, k, &out),
        Cmd::Classify { config, radii, out } => cmd_classify(&config, radii.as_deref(), &out),
        Cmd::Thermo {
            config,
            branch,
            out,
        } => cmd_thermo(&config, &branch, &out),
        Cmd::Scan { curve, out } => cmd_scan(&curve, &out),
        Cmd::Verify {
            config,
            branch,
            law,
            verdict,
            out,
        } => cmd_verify(&config, branch.as_deref(), law, verdict.as_deref(), &out),
    }
}

fn main() -> ExitCode {
    if let Ok(text) = std::env::var("MF_THREADS") {
        match text.trim().parse::<usize>() {
            Ok(n) if n >= 1 => meanfield::linalg::set_thread_cap(n),
            _ => {
                eprintln!("error: MF_THREADS must be a positive integer, got \"{text}\"");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(if e.usage { 2 } else { 1 })
        }
    }
}
