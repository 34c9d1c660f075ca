//! Command-line front end: simulate twister models, trace their braids and
//! export data and plots.

mod commands;
mod config;
mod error;
mod svg;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Outputs, PlotKind, Route};
use config::{ModelArgs, RunManifest, Settings};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "twistknot", version, about = "Knotted non-Hermitian bands from simulated eigenstate tomography")]
struct Cli {
    #[command(flatten)]
    model: ModelArgs,
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = "twistknot-out")]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tracked complex band energies on the k-grid.
    Spectrum,
    /// Full protocol: circuits, reconstruction, windings, braid and invariants.
    Simulate,
    /// Winding traces and the winding matrix.
    Winding {
        #[arg(long, value_enum, default_value = "quantum")]
        route: Route,
    },
    /// Crossings and the braid word.
    Braid {
        #[arg(long, value_enum, default_value = "quantum")]
        route: Route,
    },
    /// Alexander and Jones polynomials of a given word or of the model's braid.
    Invariants {
        /// Braid word such as "s1 s2^-1 s1".
        #[arg(long)]
        word: Option<String>,
        #[arg(long)]
        strands: Option<usize>,
        #[arg(long, value_enum, default_value = "quantum")]
        route: Route,
    },
    /// Region labels over a window of the (m0, m1) plane.
    PhaseDiagram {
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true, default_values_t = [-3.0, 3.0])]
        window: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        resolution: usize,
    },
    /// Strands of the pure twister drawn on a torus.
    TorusExport {
        #[arg(long)]
        strands: usize,
        #[arg(long)]
        twists: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// SVG chart of a CSV written by another command.
    Plot {
        #[arg(long)]
        input: PathBuf,
        /// Inferred from the CSV header when omitted.
        #[arg(long, value_enum)]
        kind: Option<PlotKind>,
        /// Crossing markers; `crossings.csv` next to the input is used if present.
        #[arg(long)]
        crossings: Option<PathBuf>,
        /// Projection angle for braid diagrams.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        angle: f64,
        /// File name inside the output directory.
        #[arg(long)]
        output: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Simulate => "simulate",
            Command::Winding { .. } => "winding",
            Command::Braid { .. } => "braid",
            Command::Invariants { .. } => "invariants",
            Command::PhaseDiagram { .. } => "phase-diagram",
            Command::TorusExport { .. } => "torus-export",
            Command::Plot { .. } => "plot",
        }
    }
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--workers: {e}")))?;
    }
    let settings = Settings::resolve(&cli.model)?;
    let mut out = Outputs::create(&cli.out)?;
    let message = match &cli.command {
        Command::Spectrum => commands::spectrum(&settings, &mut out)?,
        Command::Simulate => commands::simulate(&settings, &mut out)?,
        Command::Winding { route } => commands::winding(&settings, *route, &mut out)?,
        Command::Braid { route } => commands::braid(&settings, *route, &mut out)?,
        Command::Invariants { word, strands, route } => {
            commands::invariants(&settings, word.as_deref(), *strands, *route, &mut out)?
        }
        Command::PhaseDiagram { window, resolution } => {
            commands::phase_diagram(settings.model, window[0], window[1], *resolution, &mut out)?
        }
        Command::TorusExport { strands, twists, samples } => {
            commands::torus_export(*strands, *twists, *samples, &mut out)?
        }
        Command::Plot { input, kind, crossings, angle, output } => {
            commands::plot(input, *kind, crossings.as_deref(), *angle, output.as_deref(), &mut out)?
        }
    };
    let manifest = out.finish(RunManifest::new(cli.command.name(), &settings))?;
    Ok(format!("{message}\nmanifest: {}", manifest.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(message) => {
            let _ = writeln!(std::io::stdout(), "{message}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
