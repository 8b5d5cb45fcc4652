use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use elastmix::study::{rates_csv, sidecar_paths, write_outputs};
use elastmix::{run_study, StudyConfig};

/// Convergence study for the mixed elasticity element on the unit box.
#[derive(Debug, Parser)]
#[command(name = "elastmix", version)]
struct Cli {
    /// TOML file with `key = value` settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Comma-separated subdivisions per axis, e.g. 4,8,16,32.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// `sine` or `polynomial`.
    #[arg(long)]
    solution: Option<String>,
    /// CSV path; rates and a markdown summary are written next to it.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Adds the inf-sup and kernel ellipticity probes (dense, small grids only).
    #[arg(long)]
    probe_infsup: bool,
    #[arg(long)]
    probe_max_dofs: Option<usize>,
    /// Gauss points per axis for loads, interpolation and error norms.
    #[arg(long)]
    quad_points: Option<usize>,
    /// Relative residual tolerance of the solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Writes M, B and the full matrix of every level in Matrix Market format.
    #[arg(long)]
    export_dir: Option<PathBuf>,
}

impl Cli {
    fn into_config(self) -> elastmix::Result<StudyConfig> {
        let mut c = match &self.config {
            Some(path) => StudyConfig::from_file(path)?,
            None => StudyConfig::default(),
        };
        if let Some(v) = self.dim {
            c.dim = v;
        }
        if let Some(v) = self.levels {
            c.levels = v;
        }
        if let Some(v) = self.mu {
            c.mu = v;
        }
        if let Some(v) = self.lambda {
            c.lambda = v;
        }
        if let Some(v) = self.solution {
            c.solution = v;
        }
        if let Some(v) = self.output {
            c.output = v;
        }
        if self.probe_infsup {
            c.probe_infsup = true;
        }
        if let Some(v) = self.probe_max_dofs {
            c.probe_max_dofs = v;
        }
        if let Some(v) = self.quad_points {
            c.quad_points = v;
        }
        if let Some(v) = self.tol {
            c.tol = v;
        }
        if self.export_dir.is_some() {
            c.export_dir = self.export_dir;
        }
        c.validate()?;
        Ok(c)
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("ELASTMIX_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("ELASTMIX_THREADS must be a positive integer, got '{raw}'"))?;
    if n == 0 {
        return Err("ELASTMIX_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let config = match cli.into_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match run_study(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.is_numerical() { 1 } else { 2 });
        }
    };
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    if let Err(e) = write_outputs(&result) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    for l in &result.levels {
        println!(
            "N = {:>4}  err_sigma_hdiv = {:.4e}  err_u_l2 = {:.4e}  super_sigma_hdiv = {:.4e}  super_u_l2 = {:.4e}",
            l.n, l.record.sigma_hdiv, l.record.u_l2, l.record.super_sigma_hdiv, l.record.super_u_l2
        );
    }
    if !result.rates.is_empty() {
        print!("{}", rates_csv(&result).replace("\r\n", "\n"));
    }
    let (rates, md) = sidecar_paths(&config.output);
    println!("wrote {}", config.output.display());
    if !result.rates.is_empty() {
        println!("wrote {}", rates.display());
    }
    println!("wrote {}", md.display());
    ExitCode::SUCCESS
}
