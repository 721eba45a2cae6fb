use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use modecfie::experiment::{
    cmd_asymptotics, cmd_convergence, cmd_presets, cmd_roots, cmd_solve, parse_settings_file,
    Settings,
};
use modecfie::Error;

#[derive(Parser, Debug)]
#[command(
    name = "modecfie",
    version,
    about = "Mode-reduced time-domain CFIE experiments (CSV output)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// March one mode equation and print t, mu, g
    Solve(Common),
    /// Error and observed order on a step-size ladder
    Convergence(Common),
    /// Roots of the Laplace symbol and the predicted decay rate
    Roots(Common),
    /// Direct, diagonal and stationary-phase values over a k sweep
    Asymptotics(Common),
    /// List the named presets
    Presets(Output),
}

#[derive(Args, Debug)]
struct Output {
    /// Write CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Common {
    /// Plain-text key = value settings; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Spherical-harmonic degree
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Time step; rationals such as 97/6400 are accepted
    #[arg(long)]
    dt: Option<String>,
    /// 2, 4 or 6
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    t_end: Option<String>,
    /// osc, nonosc or zero
    #[arg(long)]
    signal: Option<String>,
    /// Add the operator residual column to `solve`
    #[arg(long)]
    residual: bool,
    /// Rungs of the convergence ladder
    #[arg(long)]
    levels: Option<String>,
    /// Real-part range of the root search, "lo,hi"
    #[arg(long, allow_hyphen_values = true)]
    re_range: Option<String>,
    /// Half-height of the root search rectangle
    #[arg(long)]
    im_max: Option<String>,
    /// Newton step tolerance
    #[arg(long)]
    tol: Option<String>,
    /// sphere or spheroid
    #[arg(long)]
    surface: Option<String>,
    /// Semi-axes "equatorial,polar"
    #[arg(long)]
    axes: Option<String>,
    /// Surface point "theta,phi"
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    b: Option<String>,
    /// Comma-separated wavenumbers
    #[arg(long)]
    k: Option<String>,
    /// Quadrature points per wavelength
    #[arg(long)]
    ppw: Option<String>,
    #[command(flatten)]
    output: Output,
}

impl Common {
    fn flag_pairs(&self) -> Vec<(String, String)> {
        let named = [
            ("preset", &self.preset),
            ("n", &self.n),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("dt", &self.dt),
            ("order", &self.order),
            ("t_end", &self.t_end),
            ("signal", &self.signal),
            ("levels", &self.levels),
            ("re_range", &self.re_range),
            ("im_max", &self.im_max),
            ("tol", &self.tol),
            ("surface", &self.surface),
            ("axes", &self.axes),
            ("point", &self.point),
            ("a", &self.a),
            ("b", &self.b),
            ("k", &self.k),
            ("ppw", &self.ppw),
        ];
        let mut out: Vec<_> = named
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        if self.residual {
            out.push(("residual".into(), "true".into()));
        }
        out
    }

    fn settings(&self) -> Result<Settings, Failure> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
                parse_settings_file(&text)?
            }
            None => Vec::new(),
        };
        Ok(Settings::resolve(&file, &self.flag_pairs())?)
    }
}

enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn emit(out: &Option<PathBuf>, csv: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (csv, out) = match &cli.command {
        Command::Presets(o) => (cmd_presets()?, &o.out),
        Command::Solve(c) => (cmd_solve(&c.settings()?)?, &c.output.out),
        Command::Convergence(c) => (cmd_convergence(&c.settings()?)?, &c.output.out),
        Command::Roots(c) => (cmd_roots(&c.settings()?)?, &c.output.out),
        Command::Asymptotics(c) => (cmd_asymptotics(&c.settings()?)?, &c.output.out),
    };
    emit(out, &csv)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
