use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nhgeo::geo::TensorKind;
use nhgeo::scan::{self, Axis, Format, Model, ScanSpec, StateSel};
use nhgeo::verify::{self, Level, Mutation};
use nhgeo::Error;

#[derive(Parser)]
#[command(name = "nhgeo", version, about = "Geometric tensors of non-Hermitian operators and quadratic Liouvillians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate tensors at one parameter point and print JSON.
    Tensor(Common),
    /// Evaluate tensors on a 1D or 2D parameter grid.
    Sweep(SweepArgs),
    /// Print the spectrum (or Liouvillian rapidities) as JSON.
    Spectrum(SpectrumArgs),
    /// Run the built-in self-checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    /// JSON file with scan fields; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// nh-ssh, kitaev-dissipative, quad-liouville or matrix-file.
    #[arg(long)]
    model: Option<String>,
    /// Fixed parameter, repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
    /// Comma-separated subset of chi, eta, zeta, zeta_limited, zeta_limited_rescaled, bures.
    #[arg(long, value_delimiter = ',')]
    tensors: Vec<String>,
    /// "ness" or an eigenstate index.
    #[arg(long)]
    state: Option<String>,
    /// Level-repulsion regulator μ in the AGP denominators (0 = none).
    #[arg(long)]
    mu_reg: Option<f64>,
    /// Merge eigenvalues closer than this instead of reporting a degeneracy.
    #[arg(long)]
    merge_tol: Option<f64>,
    /// Matrix JSON: K for matrix-file, the Majorana Hamiltonian for quad-liouville.
    #[arg(long)]
    matrix_file: Option<PathBuf>,
    /// Matrix JSON per parameter direction.
    #[arg(long, value_delimiter = ',')]
    param_files: Vec<PathBuf>,
    /// Bath matrix JSON for quad-liouville.
    #[arg(long)]
    bath_file: Option<PathBuf>,
    /// Bath matrix JSON per parameter direction for quad-liouville.
    #[arg(long, value_delimiter = ',')]
    bath_param_files: Vec<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// name:min:max:steps, given once or twice.
    #[arg(long)]
    axis: Vec<String>,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// csv (default) or json.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads; falls back to NHGEO_THREADS, then to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated momenta (nh-ssh, kitaev-dissipative); default is the full grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    k: Vec<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    FlipAgpSign,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "quick")]
    level: LevelArg,
    /// Corrupt the implementation on purpose; the affected checks must fail.
    #[arg(long, value_enum, hide = true)]
    mutation: Option<MutationArg>,
}

fn parse_set(s: &str) -> Result<(String, f64), Error> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("--set expects NAME=VALUE, got {s:?}")))?;
    let v = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("--set {k}: {v:?} is not a number")))?;
    Ok((k.trim().to_string(), v))
}

fn build_spec(c: &Common) -> Result<ScanSpec, Error> {
    let mut spec = match &c.config {
        Some(p) => ScanSpec::from_file(p)?,
        None => ScanSpec::default(),
    };
    if let Some(m) = &c.model {
        spec.model = m.clone();
    }
    for s in &c.set {
        let (k, v) = parse_set(s)?;
        spec.params.insert(k, v);
    }
    if !c.tensors.is_empty() {
        spec.tensors = c
            .tensors
            .iter()
            .map(|t| TensorKind::parse(t.trim()).ok_or_else(|| Error::InvalidConfig(format!("unknown tensor {t:?}"))))
            .collect::<Result<_, _>>()?;
    }
    if let Some(s) = &c.state {
        spec.state = Some(s.parse::<StateSel>()?);
    }
    if let Some(m) = c.mu_reg {
        spec.mu_reg = m;
    }
    if c.merge_tol.is_some() {
        spec.merge_tol = c.merge_tol;
    }
    if c.matrix_file.is_some() {
        spec.files.matrix_file = c.matrix_file.clone();
    }
    if !c.param_files.is_empty() {
        spec.files.param_files = c.param_files.clone();
    }
    if c.bath_file.is_some() {
        spec.files.bath_file = c.bath_file.clone();
    }
    if !c.bath_param_files.is_empty() {
        spec.files.bath_param_files = c.bath_param_files.clone();
    }
    if spec.model.is_empty() {
        if spec.files.matrix_file.is_some() {
            spec.model = "matrix-file".into();
        } else {
            return Err(Error::InvalidConfig("no model given (use --model)".into()));
        }
    }
    Ok(spec)
}

fn load(c: &Common) -> Result<(ScanSpec, Model), Error> {
    let spec = build_spec(c)?;
    let model = Model::load(&spec.model, &spec.files)?;
    Ok((spec, model))
}

/// Writes to stdout, ignoring a closed pipe (`nhgeo ... | head`).
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn print_json<T: serde::Serialize>(v: &T) {
    emit(&format!("{}\n", serde_json::to_string_pretty(v).unwrap_or_default()));
}

fn cmd_tensor(c: &Common) -> Result<(), Error> {
    let (spec, model) = load(c)?;
    print_json(&scan::run_tensor(&spec, &model)?);
    Ok(())
}

fn threads(arg: Option<usize>) -> Result<Option<usize>, Error> {
    if arg.is_some() {
        return Ok(arg);
    }
    match std::env::var("NHGEO_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidConfig(format!("NHGEO_THREADS={v:?} is not a count"))),
        _ => Ok(None),
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), Error> {
    let (mut spec, model) = load(&a.common)?;
    if !a.axis.is_empty() {
        spec.axes = a.axis.iter().map(|s| s.parse::<Axis>()).collect::<Result<_, _>>()?;
    }
    if a.output.is_some() {
        spec.output = a.output.clone();
    }
    if let Some(f) = &a.format {
        spec.format = f.parse::<Format>()?;
    }
    let rows = scan::run_sweep(&spec, &model, threads(a.threads)?)?;
    let text = match spec.format {
        Format::Csv => scan::to_csv(&spec, &model, &rows),
        Format::Json => scan::to_json(&spec, &model, &rows),
    };
    match &spec.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display())))?,
        None => emit(&text),
    }
    let failed = rows.iter().filter(|r| r.status() != "ok").count();
    if failed > 0 {
        eprintln!("{failed} of {} grid points failed (see status column)", rows.len());
    }
    Ok(())
}

fn cmd_spectrum(a: &SpectrumArgs) -> Result<(), Error> {
    let (spec, model) = load(&a.common)?;
    let p = model.complete(&spec.params)?;
    let ks = (!a.k.is_empty()).then_some(a.k.as_slice());
    print_json(&model.spectrum(&p, ks)?);
    Ok(())
}

fn cmd_verify(a: &VerifyArgs) -> ExitCode {
    let level = match a.level {
        LevelArg::Quick => Level::Quick,
        LevelArg::Full => Level::Full,
    };
    let mutation = Mutation {
        flip_agp_sign: matches!(a.mutation, Some(MutationArg::FlipAgpSign)),
    };
    let reports = verify::run(level, mutation);
    for r in &reports {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        emit(&format!("{tag} {:<28} {:>7.2}s  {}\n", r.name, r.seconds, r.detail));
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    emit(&format!("{} passed, {failed} failed\n", reports.len() - failed));
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Tensor(c) => cmd_tensor(c),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Verify(a) => return cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
