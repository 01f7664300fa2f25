//! Command-line front end: `verify` runs suites, `emit` writes tables.

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::closedforms::{b_table, extract_constants, theta, theta_genpartitions, ExtractionModels, MultinomialRoute};
use crate::error::{Error, Result};
use crate::fock::FockSpace;
use crate::operators::{oracle_f, series_ch};
use crate::rational::format_rational;
use crate::series::ZQSeries;
use crate::surface::SurfaceModel;
use crate::verify::{load_models, run_suite};

#[derive(Parser, Debug)]
#[command(name = "hilbq", version, about = "Exact q-series for Hilbert schemes of points on surfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run verification suites; exit status 0 iff every check passes.
    Verify(VerifyArgs),
    /// Write a table or series.
    Emit(EmitArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Suite {
    All,
    Fock,
    Identities,
    Constants,
    Abelian,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Fock => "fock",
            Suite::Identities => "identities",
            Suite::Constants => "constants",
            Suite::Abelian => "abelian",
        }
    }
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value_t = 6)]
    pub qmax: u32,
    /// Comma-separated presets or model JSON paths.
    #[arg(long, default_value = "minimal,two-class,three-class")]
    pub models: String,
    /// Where to write the JSON report.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum What {
    Constants,
    Series,
    Theta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Via {
    Compositions,
    Genpartitions,
}

#[derive(Args, Debug)]
pub struct EmitArgs {
    #[arg(value_enum)]
    pub what: What,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long, default_value_t = 6)]
    pub qmax: u32,
    /// Preset name or model JSON path.
    #[arg(long, default_value = "minimal")]
    pub surface: String,
    #[arg(long, default_value_t = 7)]
    pub imax: u32,
    #[arg(long, default_value_t = 4)]
    pub jmax: u32,
    /// Also recover `g`, `h`, `f` from traces up to `--qmax`.
    #[arg(long)]
    pub extract: bool,
    /// Chern character degrees, one per `--L`.
    #[arg(long)]
    pub chk: Vec<usize>,
    /// Line bundle names, one per `--chk`.
    #[arg(long = "L")]
    pub line_bundles: Vec<String>,
    /// Operator degrees, one per `--alpha`.
    #[arg(long)]
    pub k: Vec<usize>,
    /// Class names: 1, x (point), K, eX, e<a>, or a line bundle.
    #[arg(long)]
    pub alpha: Vec<String>,
    /// Divide the series by the Euler product.
    #[arg(long)]
    pub reduced: bool,
    #[arg(long, value_enum, default_value = "compositions")]
    pub via: Via,
    #[arg(long)]
    pub out: Option<String>,
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Verify(a) => cmd_verify(&a),
        Command::Emit(a) => cmd_emit(&a).map(|_| true),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("HILBQ_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn write_output(out: Option<&str>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{path}: {e}"))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| Error::Io(e.to_string()))
        }
    }
}

/// Runs the suite, writes the report and prints one line per failure.
pub fn cmd_verify(a: &VerifyArgs) -> Result<bool> {
    let models = load_models(&a.models)?;
    let reports = run_suite(a.suite.name(), &models, a.qmax)?;
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n";
    write_output(a.out.as_deref(), &json)?;
    let failed: Vec<_> = reports.iter().filter(|r| !r.passed()).collect();
    for r in &failed {
        eprintln!("FAIL {} on {} (Qmax {})", r.identity, r.model, r.qmax);
    }
    eprintln!("{} checks, {} failed", reports.len(), failed.len());
    Ok(failed.is_empty())
}

fn load_surface(desc: &str) -> Result<SurfaceModel> {
    let mut v = load_models(desc)?;
    if v.len() != 1 {
        return Err(Error::Precondition(format!("expected one surface, got {desc:?}")));
    }
    Ok(v.remove(0))
}

pub fn cmd_emit(a: &EmitArgs) -> Result<()> {
    let text = match a.what {
        What::Constants => {
            let mut t = b_table(a.imax, a.jmax, MultinomialRoute::Collapsed).to_constants(a.jmax);
            if a.extract {
                let c = extract_constants(&ExtractionModels::standard(a.qmax as usize), a.qmax)?;
                t.entries.extend(c.to_table().entries);
            }
            match a.format {
                Format::Json => t.to_json() + "\n",
                Format::Csv => t.to_csv(),
            }
        }
        What::Series => series_text(&emit_series(a)?, a.format),
        What::Theta => {
            let m = load_surface(&a.surface)?;
            let k = *a.k.first().ok_or_else(|| Error::Precondition("theta needs --k".into()))?;
            let alpha = m.class_by_name(a.alpha.first().map_or("x", String::as_str))?;
            let s = match a.via {
                Via::Compositions => theta(&m, &alpha, k, a.qmax),
                Via::Genpartitions => theta_genpartitions(&m, &alpha, k, a.qmax),
            };
            series_text(&s, a.format)
        }
    };
    write_output(a.out.as_deref(), &text)
}

fn emit_series(a: &EmitArgs) -> Result<ZQSeries> {
    let m = load_surface(&a.surface)?;
    let space = FockSpace::new(m.clone());
    if !a.chk.is_empty() {
        let names: Vec<&str> = a.line_bundles.iter().map(String::as_str).collect();
        return series_ch(&space, &names, &a.chk, a.reduced, a.qmax);
    }
    let alphas = a.alpha.iter().map(|n| m.class_by_name(n)).collect::<Result<Vec<_>>>()?;
    let f = oracle_f(&space, &a.k, &alphas, a.qmax)?;
    Ok(if a.reduced { &f * &crate::series::euler_pow(m.chi(), a.qmax).lift(1) } else { f })
}

fn series_text(s: &ZQSeries, format: Format) -> String {
    match format {
        Format::Json => s.to_json() + "\n",
        Format::Csv => {
            let mut out = String::from("q,z,c\n");
            for ((q, z), c) in s.terms() {
                let zs: Vec<String> = z.iter().map(i64::to_string).collect();
                out.push_str(&format!("{q},{},{}\n", zs.join(";"), format_rational(c)));
            }
            out
        }
    }
}
