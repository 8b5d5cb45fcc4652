//! Convergence studies over a sequence of uniform grids.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;

use crate::assembly::{assemble, assemble_load_with};
use crate::error::{Error, Result};
use crate::grid::TensorGrid;
use crate::interpolate::{interp_stress_with, project_displacement_with};
use crate::manufactured::{ExactSolution, SolutionKind};
use crate::material::LameParams;
use crate::solver::{solve_with, SolverOptions};
use crate::verify::{
    error_norms_with, fit_convergence, infsup_probe, kernel_ellipticity_probe, superclose_norms, ErrorRecord,
    RateFit, DEFAULT_PROBE_BUDGET,
};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub dim: usize,
    pub levels: Vec<usize>,
    pub mu: f64,
    pub lambda: f64,
    pub solution: String,
    pub output: PathBuf,
    pub probe_infsup: bool,
    pub probe_max_dofs: usize,
    pub quad_points: usize,
    pub tol: f64,
    pub export_dir: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            levels: vec![4, 8, 16, 32],
            mu: 0.5,
            lambda: 1.0,
            solution: "sine".into(),
            output: PathBuf::from("study.csv"),
            probe_infsup: false,
            probe_max_dofs: DEFAULT_PROBE_BUDGET,
            quad_points: 5,
            tol: crate::solver::DEFAULT_TOLERANCE,
            export_dir: None,
        }
    }
}

impl StudyConfig {
    /// Parses a `key = value` TOML file; missing keys keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {}", e.message())))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn material(&self) -> Result<LameParams> {
        LameParams::new(self.mu, self.lambda)
    }

    pub fn solution_kind(&self) -> Result<SolutionKind> {
        self.solution.parse()
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidInput("at least one level is required".into()));
        }
        if self.levels.contains(&0) {
            return Err(Error::InvalidInput("levels must be positive".into()));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("levels must be strictly increasing".into()));
        }
        if self.quad_points == 0 {
            return Err(Error::InvalidInput("quad_points must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput("tol must be positive".into()));
        }
        self.material()?;
        self.solution_kind()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LevelResult {
    pub level: usize,
    pub n: usize,
    pub record: ErrorRecord,
    pub solve_residual: f64,
    pub wall_time_s: f64,
    /// `|(A sigma_h, sigma_h) + (f, u_h)| / (A sigma_h, sigma_h)`
    pub energy_defect: f64,
    pub beta_h: Option<f64>,
    pub alpha_kernel: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub levels: Vec<LevelResult>,
    /// Per-column fits; empty when fewer than three levels ran.
    pub rates: Vec<(&'static str, RateFit)>,
    pub warnings: Vec<String>,
}

pub const RATE_COLUMNS: [&str; 7] = [
    "err_sigma_l2",
    "err_sigma_div",
    "err_sigma_hdiv",
    "err_u_l2",
    "super_sigma_l2",
    "super_sigma_hdiv",
    "super_u_l2",
];

fn column(rec: &ErrorRecord, name: &str) -> f64 {
    match name {
        "err_sigma_l2" => rec.sigma_l2,
        "err_sigma_div" => rec.sigma_div,
        "err_sigma_hdiv" => rec.sigma_hdiv,
        "err_u_l2" => rec.u_l2,
        "super_sigma_l2" => rec.super_sigma_l2,
        "super_sigma_hdiv" => rec.super_sigma_hdiv,
        "super_u_l2" => rec.super_u_l2,
        _ => unreachable!("unknown column {name}"),
    }
}

impl StudyResult {
    pub fn rate(&self, name: &str) -> Option<f64> {
        self.rates.iter().find(|(n, _)| *n == name).map(|(_, f)| f.rate)
    }
}

/// Solves, interpolates and measures one grid.
pub fn run_level(config: &StudyConfig, level: usize, n: usize) -> Result<LevelResult> {
    let start = Instant::now();
    let material = config.material()?;
    let exact = ExactSolution::new(config.solution_kind()?, config.dim, material)?;
    let grid = TensorGrid::unit(config.dim, n)?;
    let system = assemble(&grid, &material);
    if let Some(dir) = &config.export_dir {
        system.export_matrix_market(&dir.join(format!("level{level}_N{n}")))?;
    }
    let dofs = system.dofs().clone();
    let q = config.quad_points;
    let load = assemble_load_with(&grid, |x: &[f64]| exact.f(x), &dofs, q);
    let (sigma_h, u_h, report) = solve_with(&system, &load, &SolverOptions::with_tol(config.tol))?;

    let pi = interp_stress_with(&dofs, |x: &[f64]| exact.sigma(x), q);
    let ph = project_displacement_with(&dofs, |x: &[f64]| exact.u(x), q);
    let plain = error_norms_with(&grid, &exact, &sigma_h, &u_h, q)?;
    let close = superclose_norms(&sigma_h, &pi, &u_h, &ph)?;

    let s = sigma_h.coefficients();
    let energy: f64 = s.iter().zip(system.compliance().mul_vec(s)).map(|(a, b)| a * b).sum();
    let work: f64 = load.iter().zip(u_h.coefficients()).map(|(a, b)| a * b).sum();
    let energy_defect = (energy + work).abs() / energy.abs().max(f64::MIN_POSITIVE);

    let (beta_h, alpha_kernel) = if config.probe_infsup {
        (
            Some(infsup_probe(&grid, config.probe_max_dofs)?),
            Some(kernel_ellipticity_probe(&grid, &material, config.probe_max_dofs)?),
        )
    } else {
        (None, None)
    };

    Ok(LevelResult {
        level,
        n,
        record: plain.with_superclose(&close),
        solve_residual: report.relative_residual,
        wall_time_s: start.elapsed().as_secs_f64(),
        energy_defect,
        beta_h,
        alpha_kernel,
    })
}

/// Runs every level in order and fits rates when at least three are available.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let mut levels = Vec::with_capacity(config.levels.len());
    for (k, &n) in config.levels.iter().enumerate() {
        levels.push(run_level(config, k, n)?);
    }
    let mut warnings = Vec::new();
    let mut rates = Vec::new();
    if levels.len() < 3 {
        warnings.push(format!(
            "only {} level(s): at least 3 are needed for a rate fit, skipping it",
            levels.len()
        ));
    } else {
        let hs: Vec<f64> = levels.iter().map(|l| l.record.h).collect();
        for name in RATE_COLUMNS {
            let errs: Vec<f64> = levels.iter().map(|l| column(&l.record, name)).collect();
            match fit_convergence(&hs, &errs) {
                Ok(fit) => rates.push((name, fit)),
                Err(e) => warnings.push(format!("no rate for {name}: {e}")),
            }
        }
    }
    Ok(StudyResult {
        config: config.clone(),
        levels,
        rates,
        warnings,
    })
}

fn sci(v: f64) -> String {
    format!("{v:.15e}")
}

/// One row per level; `wall_time_s` is the only non-deterministic column.
pub fn csv_table(result: &StudyResult) -> String {
    let probes = result.config.probe_infsup;
    let mut out = String::from(
        "level,N,h,stress_dofs,disp_dofs,err_sigma_l2,err_sigma_div,err_sigma_hdiv,err_u_l2,\
         super_sigma_l2,super_sigma_hdiv,super_u_l2,solve_residual,wall_time_s",
    );
    if probes {
        out.push_str(",beta_h,alpha_kernel");
    }
    out.push_str("\r\n");
    for l in &result.levels {
        let r = &l.record;
        let mut fields = vec![
            l.level.to_string(),
            l.n.to_string(),
            sci(r.h),
            r.stress_dofs.to_string(),
            r.disp_dofs.to_string(),
            sci(r.sigma_l2),
            sci(r.sigma_div),
            sci(r.sigma_hdiv),
            sci(r.u_l2),
            sci(r.super_sigma_l2),
            sci(r.super_sigma_hdiv),
            sci(r.super_u_l2),
            sci(l.solve_residual),
            sci(l.wall_time_s),
        ];
        if probes {
            fields.push(l.beta_h.map(sci).unwrap_or_default());
            fields.push(l.alpha_kernel.map(sci).unwrap_or_default());
        }
        out.push_str(&fields.join(","));
        out.push_str("\r\n");
    }
    out
}

pub fn rates_csv(result: &StudyResult) -> String {
    let mut out = String::from("column,rate,first_level,excluded_coarsest\r\n");
    for (name, fit) in &result.rates {
        let _ = write!(
            out,
            "{name},{},{},{}\r\n",
            sci(fit.rate),
            fit.first_level,
            fit.excluded_coarsest
        );
    }
    out
}

/// Human-readable summary derived from the CSV quantities.
pub fn markdown_summary(result: &StudyResult) -> String {
    let c = &result.config;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# Convergence study\n\ndim = {}, solution = {}, mu = {}, lambda = {}\n",
        c.dim, c.solution, c.mu, c.lambda
    );
    let _ = writeln!(out, "| N | h | err_sigma_hdiv | err_u_l2 | super_sigma_hdiv | super_u_l2 | residual |");
    let _ = writeln!(out, "|---|---|---|---|---|---|---|");
    for l in &result.levels {
        let r = &l.record;
        let _ = writeln!(
            out,
            "| {} | {:.4e} | {:.4e} | {:.4e} | {:.4e} | {:.4e} | {:.1e} |",
            l.n, r.h, r.sigma_hdiv, r.u_l2, r.super_sigma_hdiv, r.super_u_l2, l.solve_residual
        );
    }
    if result.rates.is_empty() {
        let _ = writeln!(out, "\nNo rates fitted (fewer than 3 levels).");
    } else {
        let excluded = result.rates.first().map(|(_, f)| f.excluded_coarsest).unwrap_or(false);
        let _ = writeln!(
            out,
            "\n## Fitted rates\n\nCoarsest level {}.\n",
            if excluded { "excluded from the fit" } else { "included in the fit" }
        );
        let _ = writeln!(out, "| column | rate |\n|---|---|");
        for (name, fit) in &result.rates {
            let _ = writeln!(out, "| {name} | {:.3} |", fit.rate);
        }
    }
    out
}

/// Sidecar paths next to the main CSV: `<stem>_rates.csv` and `<stem>.md`.
pub fn sidecar_paths(output: &Path) -> (PathBuf, PathBuf) {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "study".into());
    let dir = output.parent().unwrap_or_else(|| Path::new(""));
    (dir.join(format!("{stem}_rates.csv")), dir.join(format!("{stem}.md")))
}

pub fn write_outputs(result: &StudyResult) -> Result<()> {
    let output = &result.config.output;
    if let Some(dir) = output.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(output, csv_table(result))?;
    let (rates, md) = sidecar_paths(output);
    std::fs::write(md, markdown_summary(result))?;
    if !result.rates.is_empty() {
        std::fs::write(rates, rates_csv(result))?;
    }
    Ok(())
}
