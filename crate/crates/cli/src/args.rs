use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use xnt_core::boxcount::PrimePolicy;
use xnt_core::sieve::ThresholdRule;

#[derive(Debug, Parser)]
#[command(
    name = "xnt",
    version,
    about = "Exponential sums, polynomial sieves and box counts over finite fields"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Directory for CSV tables, one file per report section.
    #[arg(long, global = true, value_name = "DIR")]
    pub csv: Option<PathBuf>,

    /// Evaluation budget; accepts `1e8` style values.
    #[arg(long, global = true, value_parser = parse_budget, default_value = "1e8")]
    pub budget: u128,

    /// Seed for randomized spot checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for the parallel kernels (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// TOML file of flag values; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

fn parse_budget(s: &str) -> Result<u128, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !(v >= 1.0 && v.is_finite() && v <= u128::MAX as f64) {
        return Err(format!("budget must be a positive count, got {s}"));
    }
    Ok(v as u128)
}

fn check_primes(s: &str) -> Result<String, String> {
    s.parse::<PrimePolicy>()
        .map(|_| s.to_string())
        .map_err(|e| e.to_string())
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got '{s}'")),
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Sum of Kl_m(F(x)) over F_p^n, optionally twisted by psi(<u, x>).
    Klsum(KlsumArgs),
    /// Sum of t(f(x)) over F_p^n, or over the zero set of g.
    Tracesum(TracesumArgs),
    /// Mixed sum of t(F(x)) psi(G(x)).
    Mixsum(MixsumArgs),
    /// Max error of the d-th power indicator decomposition mod p.
    SieveCheck(SieveCheckArgs),
    /// Per-prime image data, detectors and the sieve inequality for h.
    SieveDetect(SieveDetectArgs),
    /// Zero-type / good / bad classification of a frequency vector.
    ClassifyU(ClassifyUArgs),
    /// Fiber counts N(a, F) or N(a, b, F, G).
    Fibers(FibersArgs),
    /// Count x in [-B, B]^{n+1} with f(t) = F(x) for some integer t.
    Boxcount(BoxcountArgs),
    /// Counts and normalized ratios over a grid of box sizes.
    BoundScan(BoundScanArgs),
    /// Smooth-weight Poisson summation modulo pq.
    PoissonCheck(PoissonCheckArgs),
    /// CRT factorization of a complete sum modulo pq.
    CrtCheck(CrtCheckArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Klsum(_) => "klsum",
            Command::Tracesum(_) => "tracesum",
            Command::Mixsum(_) => "mixsum",
            Command::SieveCheck(_) => "sieve-check",
            Command::SieveDetect(_) => "sieve-detect",
            Command::ClassifyU(_) => "classify-u",
            Command::Fibers(_) => "fibers",
            Command::Boxcount(_) => "boxcount",
            Command::BoundScan(_) => "bound-scan",
            Command::PoissonCheck(_) => "poisson-check",
            Command::CrtCheck(_) => "crt-check",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KlsumArgs {
    #[arg(long, default_value_t = 2)]
    pub m: u32,
    #[arg(long)]
    pub p: u64,
    #[arg(long = "F", value_name = "POLY")]
    #[serde(rename = "F")]
    pub form: String,
    /// Frequency vector, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u: Option<Vec<i64>>,
    #[arg(long, default_value_t = 2)]
    pub kmax: u32,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TracesumArgs {
    /// one | legendre | psi | kl:M | char:R:J
    #[arg(long, default_value = "kl:2")]
    pub trace: String,
    #[arg(long)]
    pub p: u64,
    #[arg(long = "f", value_name = "POLY")]
    pub f: String,
    #[arg(long = "g", value_name = "POLY")]
    pub g: Option<String>,
    /// Also list the singular fibers of f (on g = 0 when g is given).
    #[arg(long)]
    pub singular_fibers: bool,
    #[arg(long, default_value_t = 1)]
    pub kmax: u32,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MixsumArgs {
    #[arg(long, default_value = "kl:2")]
    pub trace: String,
    #[arg(long)]
    pub p: u64,
    #[arg(long = "F", value_name = "POLY")]
    #[serde(rename = "F")]
    pub form: String,
    #[arg(long = "G", value_name = "POLY")]
    #[serde(rename = "G")]
    pub g: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SieveCheckArgs {
    #[arg(long)]
    pub d: u64,
    #[arg(long)]
    pub p: u64,
    /// Exit with status 2 when the error exceeds this.
    #[arg(long, default_value = "1e-9", value_parser = parse_positive)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SieveDetectArgs {
    #[arg(long = "f", value_name = "POLY")]
    #[serde(rename = "f")]
    pub h: String,
    /// list:p1,p2,...
    #[arg(long)]
    #[arg(value_parser = check_primes)]
    pub primes: String,
    #[arg(long, default_value = "lemma")]
    pub threshold: ThresholdRule,
    /// Sequence a = indicator of [LO, HI], as LO:HI.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
    /// Integers to run through the filter and detectors.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Vec<i128>,
    /// Exponent for the weight alpha + (nu - 1)(d - nu).
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassifyUArgs {
    #[arg(long = "F", value_name = "POLY")]
    #[serde(rename = "F")]
    pub form: String,
    #[arg(long)]
    pub p: u64,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub u: Vec<i64>,
    #[arg(long, default_value_t = 2)]
    pub kmax: u32,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FibersArgs {
    #[arg(long = "F", value_name = "POLY")]
    #[serde(rename = "F")]
    pub form: String,
    #[arg(long)]
    pub p: u64,
    /// Extension degree: count over F_{p^k}.
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long = "G", value_name = "POLY", requires = "a")]
    #[serde(rename = "G")]
    pub g: Option<String>,
    /// Fixed value of F when G is given (element index).
    #[arg(long)]
    pub a: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoxcountArgs {
    #[arg(long = "f", value_name = "POLY")]
    pub f: String,
    #[arg(long = "F", value_name = "POLY")]
    #[serde(rename = "F")]
    pub form: String,
    #[arg(long = "B")]
    #[serde(rename = "B")]
    pub b: u64,
    /// auto | list:p1,p2,...
    #[arg(long, default_value = "auto")]
    #[arg(value_parser = check_primes)]
    pub primes: String,
    #[arg(long, default_value_t = 2)]
    pub kmax: u32,
    #[arg(long, default_value = "lemma")]
    pub threshold: ThresholdRule,
    #[arg(long, default_value_t = 10_000)]
    pub spot_checks: usize,
    /// Skip the classification of all u at the smallest sieve prime.
    #[arg(long)]
    pub no_tallies: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundScanArgs {
    #[arg(long = "f", value_name = "POLY")]
    pub f: String,
    #[arg(long = "F", value_name = "POLY")]
    #[serde(rename = "F")]
    pub form: String,
    #[arg(long, value_delimiter = ',', default_value = "10,20,40,80")]
    pub grid: Vec<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PoissonCheckArgs {
    #[arg(long = "F", value_name = "POLY")]
    #[serde(rename = "F")]
    pub form: String,
    #[arg(long = "B", value_parser = parse_positive)]
    #[serde(rename = "B")]
    pub b: f64,
    #[arg(long)]
    pub p: u64,
    #[arg(long)]
    pub q: u64,
    #[arg(long, default_value = "one")]
    pub tp: String,
    #[arg(long, default_value = "one")]
    pub tq: String,
    /// Truncation |u_i| <= U; chosen from the tail bound when absent.
    #[arg(long)]
    pub u_cutoff: Option<u64>,
    #[arg(long, default_value_t = 4)]
    pub kappa: u32,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CrtCheckArgs {
    #[arg(long = "F", value_name = "POLY")]
    #[serde(rename = "F")]
    pub form: String,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub u: Vec<i64>,
    #[arg(long)]
    pub p: u64,
    #[arg(long)]
    pub q: u64,
    #[arg(long, default_value = "one")]
    pub tp: String,
    #[arg(long, default_value = "one")]
    pub tq: String,
    #[arg(long, default_value = "1e-6", value_parser = parse_positive)]
    pub tol: f64,
}
