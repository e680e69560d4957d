//! Command-line front end: spectra, instants, branches, census and the strip
//! period table, written as CSV or JSON.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use minsphere::branch_tracer::{self, CensusGrid, TracerConfig};
use minsphere::heun;
use minsphere::limit_strip::{self, StripMetric};
use minsphere::shooter::ShooterConfig;
use minsphere::sturm_liouville::{self, count_negative, eigenvalue};
use minsphere::{Parity, Semiaxes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "minsphere", version, about = "Bifurcating minimal spheres in ellipsoids of revolution")]
struct Cli {
    /// Semiaxis b (the rotated pair).
    #[arg(long, global = true, default_value_t = 1.0, allow_negative_numbers = true)]
    b: f64,
    /// Semiaxis d.
    #[arg(long, global = true, default_value_t = 1.0, allow_negative_numbers = true)]
    d: f64,
    /// Relative integrator tolerance for geodesic shots.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Progress messages on standard error.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues λ_n of both parities at one a.
    Spectrum {
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, default_value_t = 3)]
        n_max: usize,
    },
    /// Degeneracy instants a_1 < … < a_{m_max}.
    Instants {
        #[arg(long, default_value_t = 6)]
        m_max: usize,
        /// Cross-check against the Heun continued fraction.
        #[arg(long)]
        with_heun: bool,
    },
    /// Continue the branch B_m from a_m to a_max.
    Branch {
        #[arg(long)]
        m: usize,
        #[arg(long, allow_negative_numbers = true)]
        a_max: f64,
    },
    /// Lower bound for the number of distinct solutions at one a.
    Census {
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        /// Nodes of the launch-angle grid.
        #[arg(long, default_value_t = 400)]
        grid: usize,
    },
    /// Period table of the limit strip.
    Strip {
        #[arg(long, default_value_t = 25)]
        points: usize,
    },
}

#[derive(Serialize)]
struct SpectrumRow {
    parity: Parity,
    n: usize,
    a: f64,
    lambda: f64,
    zero_count: usize,
}

#[derive(Serialize)]
struct NegativeRow {
    parity: Parity,
    a: f64,
    negative_count: usize,
}

#[derive(Serialize)]
struct InstantRow {
    m: usize,
    parity: Parity,
    n: usize,
    a_m: f64,
}

/// Destination of one command's outputs.
struct Sink {
    out: Option<PathBuf>,
    format: Format,
}

impl Sink {
    fn table<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        let text = match self.format {
            Format::Csv => csv_text(rows)?,
            Format::Json => serde_json::to_string_pretty(rows)? + "\n",
        };
        self.emit(name, self.ext(), &text)
    }

    /// A JSON document; inline after a "# name" marker in CSV mode on stdout.
    fn document<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let json = serde_json::to_string(value)?;
        match (&self.out, self.format) {
            (None, Format::Csv) => self.emit(name, "json", &format!("# {name} {json}\n")),
            _ => self.emit(name, "json", &(serde_json::to_string_pretty(value)? + "\n")),
        }
    }

    fn ext(&self) -> &'static str {
        match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    fn emit(&self, name: &str, ext: &str, text: &str) -> Result<()> {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(format!("{name}.{ext}"));
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            None => io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

fn csv_text<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn shooter_override(tol: Option<f64>, sa: &Semiaxes) -> Result<Option<ShooterConfig>> {
    Ok(match tol {
        None => None,
        Some(t) => {
            let cfg = ShooterConfig { rk_rel_tol: t, ..ShooterConfig::new(sa) };
            cfg.validate()?;
            Some(cfg)
        }
    })
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    let (b, d) = (cli.b, cli.d);
    let sink = Sink { out: cli.out.clone(), format: cli.format };
    let log = |msg: String| {
        if cli.verbose {
            eprintln!("{msg}");
        }
    };
    match cli.command {
        Command::Spectrum { a, n_max } => {
            let sa = Semiaxes::new(a, b, d)?;
            let mut rows = Vec::new();
            let mut negatives = Vec::new();
            for parity in [Parity::Even, Parity::Odd] {
                for n in 0..=n_max {
                    let r = eigenvalue(&sa, parity, n, None)?;
                    rows.push(SpectrumRow { parity, n, a, lambda: r.lambda_n, zero_count: r.eigen_zero_count });
                }
                negatives.push(NegativeRow { parity, a, negative_count: count_negative(&sa, parity)? });
            }
            sink.table("spectrum", &rows)?;
            match &sink.out {
                Some(_) => sink.table("negative_counts", &negatives)?,
                None => {
                    for r in &negatives {
                        eprintln!("negative_count {} {}", r.parity, r.negative_count);
                    }
                }
            }
        }
        Command::Instants { m_max, with_heun } => {
            Semiaxes::new(d, b, d)?;
            let inst = sturm_liouville::instants(b, d, m_max)?;
            let rows: Vec<InstantRow> =
                inst.iter().map(|i| InstantRow { m: i.m, parity: i.parity, n: i.n, a_m: i.a_m }).collect();
            sink.table("instants", &rows)?;
            if with_heun {
                log(format!("cross-checking {m_max} instants"));
                let rep = heun::crosscheck(b, d, m_max)?;
                sink.document("crosscheck", &rep)?;
            }
        }
        Command::Branch { m, a_max } => {
            if m < 2 {
                bail!("--m must be at least 2");
            }
            let sa = Semiaxes::new(a_max, b, d)?;
            let cfg = TracerConfig { shooter: shooter_override(cli.tol, &sa)?, ..TracerConfig::default() };
            log(format!("tracing B_{m} to a = {a_max}"));
            let br = branch_tracer::trace_branch(b, d, m, a_max, &cfg)?;
            if !br.folds.is_empty() {
                log(format!("folds at points {:?}", br.folds));
            }
            sink.table("branch", &branch_tracer::branch_rows(&br))?;
            let asym = branch_tracer::asymptotics(&br, a_max, &cfg)?;
            sink.document("asymptotics", &asym)?;
        }
        Command::Census { a, grid } => {
            let sa = Semiaxes::new(a, b, d)?;
            if grid < 2 {
                bail!("--grid must be at least 2");
            }
            let g = CensusGrid { n: grid, ..CensusGrid::default() };
            let cfg = shooter_override(cli.tol, &sa)?.unwrap_or_else(|| ShooterConfig::new(&sa));
            let c = branch_tracer::census_with_config(b, d, a, &g, &cfg)?;
            let text = serde_json::to_string_pretty(&c)? + "\n";
            sink.emit("census", "json", &text)?;
        }
        Command::Strip { points } => {
            if points < 2 {
                bail!("--points must be at least 2");
            }
            let strip = StripMetric::new(b, d)?;
            log(format!("L = {}", strip.l));
            let grid = limit_strip::log_grid(1e-3, 0.99, points);
            sink.table("strip", &limit_strip::period_table(&strip, &grid)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
