//! Command-line front end: builds a problem, runs the chosen optimizer and
//! writes `density.pgm`, `density.csv` and `convergence.csv`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;
use topopt::grid_fe::StructuredGrid;
use topopt::optimizers::{run_optimization, ConvergenceRecord, OcConfig, Optimizer, PgConfig};
use topopt::problems::{builtin_problem, load_problem, ProblemDefinition, BUILTIN_NAMES};
use topopt::simp_model::{DesignField, SimpMaterial};
use topopt::tension_energy::TensionConfig;

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MAX_ITERS: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] topopt::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Topology optimization of 2-D plane-stress structures.
#[derive(Debug, Clone, Parser)]
#[command(name = "topopt", version)]
pub struct RunConfig {
    /// Built-in benchmark (cantilever, mbb, bridge) or path to a problem file.
    #[arg(long, default_value = "cantilever")]
    pub problem: String,
    /// Elements along x (built-in problems only) [default: 40]
    #[arg(long)]
    pub nx: Option<usize>,
    /// Elements along y (built-in problems only) [default: 20]
    #[arg(long)]
    pub ny: Option<usize>,
    /// Volume fraction [default: 0.5, or the problem file's value]
    #[arg(long)]
    pub volfrac: Option<f64>,
    /// SIMP penalty exponent [default: 3]
    #[arg(long)]
    pub penalty: Option<f64>,
    /// oc, pg-add or pg-mult
    #[arg(long, default_value = "oc")]
    pub optimizer: String,
    /// Largest relative density change per iteration
    #[arg(long)]
    pub move_limit: Option<f64>,
    /// Exponent on the optimality factor (oc only)
    #[arg(long)]
    pub damping: Option<f64>,
    /// Step length, or step exponent for pg-mult (pg only)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Compressive stress factor in [0, 1]; enables the tension-only objective
    #[arg(long)]
    pub tension_k: Option<f64>,
    /// Stopping tolerance [default: 1e-3 for oc, 1e-2 for pg]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap [default: 300]
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Output directory, created if missing
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Skip density.pgm
    #[arg(long)]
    pub no_pgm: bool,
    /// Skip density.csv
    #[arg(long)]
    pub no_csv: bool,
}

impl RunConfig {
    pub fn problem(&self) -> Result<ProblemDefinition, CliError> {
        let mut p = if BUILTIN_NAMES.contains(&self.problem.as_str()) {
            builtin_problem(
                &self.problem,
                self.nx.unwrap_or(40),
                self.ny.unwrap_or(20),
                self.volfrac.unwrap_or(0.5),
            )?
        } else {
            let path = Path::new(&self.problem);
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "'{}' is neither a built-in problem ({}) nor an existing file",
                    self.problem,
                    BUILTIN_NAMES.join(", ")
                )));
            }
            if self.nx.is_some() || self.ny.is_some() {
                return Err(CliError::Config(
                    "--nx and --ny apply to built-in problems; a problem file sets its own grid".into(),
                ));
            }
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            let mut p = load_problem(&text)?;
            if let Some(v) = self.volfrac {
                p.volume_fraction = v;
            }
            p
        };
        if let Some(pen) = self.penalty {
            p.material = SimpMaterial::new(p.material.e0, p.material.nu, pen)?;
        }
        if let Some(k) = self.tension_k {
            p.tension = Some(TensionConfig::new(k)?);
        }
        p.validate()?;
        Ok(p)
    }

    pub fn optimizer(&self) -> Result<Optimizer, CliError> {
        let mut opt = Optimizer::from_name(&self.optimizer)?;
        match &mut opt {
            Optimizer::Oc(c) => {
                if self.gamma.is_some() {
                    return Err(CliError::Config("--gamma applies to pg-add and pg-mult".into()));
                }
                apply_oc(c, self);
            }
            Optimizer::Pg(c) => {
                if self.damping.is_some() {
                    return Err(CliError::Config("--damping applies to oc".into()));
                }
                apply_pg(c, self);
            }
        }
        opt.validate()?;
        Ok(opt)
    }
}

fn apply_oc(c: &mut OcConfig, cfg: &RunConfig) {
    if let Some(z) = cfg.move_limit {
        c.move_limit = z;
    }
    if let Some(d) = cfg.damping {
        c.damping = d;
    }
    if let Some(t) = cfg.tol {
        c.tol = t;
    }
    if let Some(m) = cfg.max_iters {
        c.max_iters = m;
    }
}

fn apply_pg(c: &mut PgConfig, cfg: &RunConfig) {
    if let Some(z) = cfg.move_limit {
        c.move_limit = z;
    }
    c.step = cfg.gamma.or(c.step);
    if let Some(t) = cfg.tol {
        c.tol = t;
    }
    if let Some(m) = cfg.max_iters {
        c.max_iters = m;
    }
}

/// Element densities in image order: rows from the top of the grid down.
fn rows_top_down<'a>(field: &'a DesignField, grid: &'a StructuredGrid) -> impl Iterator<Item = Vec<f64>> + 'a {
    (0..grid.ny())
        .rev()
        .map(move |ey| (0..grid.nx()).map(|ex| field.densities()[grid.element_index(ex, ey)]).collect())
}

pub fn pixel(rho: f64) -> u8 {
    (255.0 * (1.0 - rho) + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn density_pgm(field: &DesignField, grid: &StructuredGrid) -> String {
    let mut s = format!("P2\n{} {}\n255\n", grid.nx(), grid.ny());
    for row in rows_top_down(field, grid) {
        let line: Vec<String> = row.iter().map(|&r| pixel(r).to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn density_csv(field: &DesignField, grid: &StructuredGrid) -> String {
    let mut s = String::new();
    for row in rows_top_down(field, grid) {
        let line: Vec<String> = row.iter().map(|r| format!("{r:.16e}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn convergence_csv(record: &ConvergenceRecord) -> String {
    let mut s = String::from("iter,compliance,volume,kkt_inf,max_change,lambda\n");
    for r in &record.rows {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.iter, r.compliance, r.volume, r.kkt_inf, r.max_change, r.lambda
        );
    }
    s
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(contents.as_bytes()).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Parses `argv` (program name first), runs, writes artifacts and returns
/// the process exit status.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_CONVERGED };
            let _ = e.print();
            return code;
        }
    };
    match run(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn run(cfg: &RunConfig) -> Result<i32, CliError> {
    let problem = cfg.problem()?;
    let optimizer = cfg.optimizer()?;
    let result = run_optimization(&problem, &optimizer)?;

    std::fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    if !cfg.no_pgm {
        write_atomic(&cfg.out.join("density.pgm"), &density_pgm(&result.field, &problem.grid))?;
    }
    if !cfg.no_csv {
        write_atomic(&cfg.out.join("density.csv"), &density_csv(&result.field, &problem.grid))?;
    }
    write_atomic(&cfg.out.join("convergence.csv"), &convergence_csv(&result.record))?;

    let status = if result.converged { "converged" } else { "stopped at the iteration cap" };
    println!("{status} after {} iterations", result.record.len());
    println!("compliance {:.10e}", result.compliance);
    if let Some(e) = result.reduced_energy {
        println!("reduced energy {e:.10e}");
    }
    println!("volume {:.10e} (target {:.10e})", result.field.volume(), result.field.volume_target());
    Ok(if result.converged { EXIT_CONVERGED } else { EXIT_MAX_ITERS })
}
