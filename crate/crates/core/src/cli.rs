//! `nhse` command-line front end.
//!
//! Every command that writes to `--out` also writes a JSON manifest next to
//! its output; `nhse replay --manifest FILE` re-runs it.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 input parse
//! error, 4 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::csvio::{
    read_eigenvalue_csv, read_matrix_csv, sniff_measured, write_eigenvalue_csv, MeasuredKind,
};
use crate::eigen::{eig, eigvals, Normalization, SolverConfig};
use crate::error::Error;
use crate::laplacian::{assemble, mu_of, shift, FrequencySpec};
use crate::measurement::{fit_uniform_correction, measure, DriveConfig, DriveMode, NoiseModel};
use crate::metrics::{scan, state_profiles, write_profiles_csv, ChainTemplate};
use crate::netlist::{build_chain, chain_meta, parse_netlist, ChainParams, Netlist};
use crate::C64;

pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "nhse",
    version,
    about = "Non-Hermitian circuit lattice simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of J or the shifted J~.
    Spectrum(SpectrumArgs),
    /// Eigenstate magnitude profiles.
    States(StatesArgs),
    /// Emulate the impedance-matrix measurement.
    Measure(MeasureArgs),
    /// Skin factor / IPR / spectral radius over an (N, delta_t) grid.
    Scan(ScanArgs),
    /// Fit uniform relative L and C corrections to a measured spectrum.
    Calibrate(CalibrateArgs),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct InputArgs {
    /// Netlist file.
    #[arg(long)]
    pub netlist: Option<PathBuf>,
    /// Chain parameters `N,C0,C1,C2,C3,L` in farads/henrys.
    #[arg(long, value_parser = parse_chain)]
    pub chain: Option<ChainParams>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 100e3)]
    pub freq: f64,
    /// Use J~ = J + i omega mu I (chain netlists only).
    #[arg(long)]
    pub shifted: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum NormArg {
    MaxAbs,
    FirstComponent,
    Unit2Norm,
}

impl From<NormArg> for Normalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::MaxAbs => Normalization::MaxAbs,
            NormArg::FirstComponent => Normalization::FirstComponent,
            NormArg::Unit2Norm => Normalization::Unit2Norm,
        }
    }
}

#[derive(Debug, Args)]
pub struct StatesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 100e3)]
    pub freq: f64,
    #[arg(long)]
    pub shifted: bool,
    #[arg(long, value_enum, default_value_t = NormArg::MaxAbs)]
    pub normalization: NormArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum DriveArg {
    Ideal,
    Series,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 100e3)]
    pub freq: f64,
    #[arg(long, value_enum, default_value_t = DriveArg::Ideal)]
    pub drive: DriveArg,
    /// Series resistance in ohms.
    #[arg(long = "r", default_value_t = 2000.0)]
    pub r: f64,
    /// Drive amplitude: amperes (ideal) or volts (series).
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    /// Voltage SNR in dB; omit for noiseless readings.
    #[arg(long)]
    pub snr_db: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub cap_tol: f64,
    #[arg(long, default_value_t = 0.0)]
    pub ind_tol: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub cap_bias: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub ind_bias: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub delta_list: Vec<f64>,
    /// `C0,C1,L`
    #[arg(long, value_parser = parse_template, default_value = "10e-9,220e-9,220e-6")]
    pub chain_template: ChainTemplate,
    #[arg(long, default_value_t = 100e3)]
    pub freq: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Impedance-matrix CSV (`row,col,re_ohm,im_ohm`) or eigenvalue CSV
    /// (`index,re_S,im_S`) of J~.
    #[arg(long)]
    pub measured: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 100e3)]
    pub freq: f64,
    #[arg(long, default_value_t = 0.02)]
    pub bound: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded location.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_numbers(s: &str, count: usize) -> Result<Vec<f64>, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("invalid number '{p}'"))
        })
        .collect::<Result<_, _>>()?;
    if parts.len() != count {
        return Err(format!(
            "expected {count} comma-separated values, got {}",
            parts.len()
        ));
    }
    Ok(parts)
}

pub fn parse_chain(s: &str) -> Result<ChainParams, String> {
    let v = parse_numbers(s, 6)?;
    if v[0] < 1.0 || v[0].fract() != 0.0 {
        return Err(format!("N must be a positive integer, got {}", v[0]));
    }
    let p = ChainParams {
        n: v[0] as usize,
        c0: v[1],
        c1: v[2],
        c2: v[3],
        c3: v[4],
        l: v[5],
    };
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

pub fn parse_template(s: &str) -> Result<ChainTemplate, String> {
    let v = parse_numbers(s, 3)?;
    if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err("template values must be positive".into());
    }
    Ok(ChainTemplate {
        c0: v[0],
        c1: v[1],
        l: v[2],
    })
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } => EXIT_PARSE,
            Error::Singular { .. }
            | Error::NoConvergence { .. }
            | Error::NonFinite
            | Error::ZeroVector
            | Error::Calibration(_) => EXIT_NUMERIC,
            Error::Io(_) => EXIT_IO,
            Error::InvalidSpec(_)
            | Error::InvalidComponent(_)
            | Error::InvalidFrequency(_)
            | Error::NotAChain(_)
            | Error::NotSquare { .. }
            | Error::DimensionMismatch { .. } => EXIT_USAGE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T> = Result<T, CliError>;

/// Written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Command-line arguments without the program name and `--out`.
    pub args: Vec<String>,
    pub parameters: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub tool_version: String,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let recorded: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|s| s.to_string_lossy().into_owned())
        .collect();
    match dispatch(cli.command, recorded) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn strip_out(args: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out" {
            skip = true;
            continue;
        }
        if a.starts_with("--out=") {
            continue;
        }
        out.push(a.clone());
    }
    out
}

fn dispatch(cmd: Command, argv: Vec<String>) -> CliResult<()> {
    let args = strip_out(&argv);
    match cmd {
        Command::Spectrum(a) => cmd_spectrum(&a, args),
        Command::States(a) => cmd_states(&a, args),
        Command::Measure(a) => cmd_measure(&a, args),
        Command::Scan(a) => cmd_scan(&a, args),
        Command::Calibrate(a) => cmd_calibrate(&a, args),
        Command::Replay(a) => cmd_replay(&a),
    }
}

fn load_input(input: &InputArgs) -> CliResult<Netlist> {
    match (&input.netlist, &input.chain) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            parse_netlist(&text).map_err(|e| CliError {
                code: if matches!(e, Error::Parse { .. }) {
                    EXIT_PARSE
                } else {
                    EXIT_USAGE
                },
                message: format!("{}: {e}", path.display()),
            })
        }
        (None, Some(p)) => Ok(build_chain(p)?),
        _ => Err(CliError {
            code: EXIT_USAGE,
            message: "exactly one of --netlist or --chain is required".into(),
        }),
    }
}

fn input_paths(input: &InputArgs) -> Vec<String> {
    input
        .netlist
        .iter()
        .map(|p| p.display().to_string())
        .collect()
}

fn system_matrix(net: &Netlist, freq: &FrequencySpec, shifted: bool) -> CliResult<crate::CMatrix> {
    let j = assemble(net, freq);
    if !shifted {
        return Ok(j.entries);
    }
    let meta = chain_meta(net)?;
    Ok(shift(&j, mu_of(&meta.params, freq))?.entries)
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| io_err(p, e)),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| io_err(Path::new("<stdout>"), e))
        }
    }
}

fn manifest_path_for(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_manifest(path: &Path, m: &RunManifest) -> CliResult<()> {
    let text = serde_json::to_string_pretty(m).map_err(|e| CliError::from(Error::from(e)))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn manifest(
    command: &str,
    args: Vec<String>,
    parameters: serde_json::Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
    seed: Option<u64>,
) -> RunManifest {
    RunManifest {
        command: command.into(),
        args,
        parameters,
        inputs,
        outputs,
        seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
    }
}

fn finish_single(
    out: Option<&Path>,
    bytes: &[u8],
    m: impl FnOnce(Vec<String>) -> RunManifest,
) -> CliResult<()> {
    write_output(out, bytes)?;
    if let Some(p) = out {
        write_manifest(&manifest_path_for(p), &m(vec![p.display().to_string()]))?;
    }
    Ok(())
}

fn cmd_spectrum(a: &SpectrumArgs, args: Vec<String>) -> CliResult<()> {
    let freq = FrequencySpec::from_hz(a.freq)?;
    let net = load_input(&a.input)?;
    let m = system_matrix(&net, &freq, a.shifted)?;
    let spectrum = eig(&m, &SolverConfig::default())?;
    let mut buf = Vec::new();
    write_eigenvalue_csv(&mut buf, &spectrum.eigenvalues)?;
    let params = serde_json::json!({
        "freq_hz": a.freq,
        "shifted": a.shifted,
        "input": a.input,
        "num_nodes": net.num_nodes(),
    });
    finish_single(a.out.as_deref(), &buf, |outs| {
        manifest("spectrum", args, params, input_paths(&a.input), outs, None)
    })
}

fn cmd_states(a: &StatesArgs, args: Vec<String>) -> CliResult<()> {
    let freq = FrequencySpec::from_hz(a.freq)?;
    let net = load_input(&a.input)?;
    let m = system_matrix(&net, &freq, a.shifted)?;
    let norm: Normalization = a.normalization.into();
    let spectrum = eig(&m, &SolverConfig::default().with_normalization(norm))?;
    let merge_tol = 1e3 * f64::EPSILON * m.norm_fro();
    let mut profiles = state_profiles(&spectrum, merge_tol)?;
    if norm != Normalization::MaxAbs {
        // report magnitudes in the requested normalization
        for p in profiles.iter_mut() {
            let v = spectrum.eigenvector(p.mode - 1);
            p.magnitudes = v.iter().map(|z| z.norm()).collect();
        }
    }
    let mut buf = Vec::new();
    write_profiles_csv(&mut buf, &profiles)?;
    let params = serde_json::json!({
        "freq_hz": a.freq,
        "shifted": a.shifted,
        "normalization": a.normalization,
        "input": a.input,
    });
    finish_single(a.out.as_deref(), &buf, |outs| {
        manifest("states", args, params, input_paths(&a.input), outs, None)
    })
}

fn cmd_measure(a: &MeasureArgs, args: Vec<String>) -> CliResult<()> {
    let freq = FrequencySpec::from_hz(a.freq)?;
    let net = load_input(&a.input)?;
    let drive = DriveConfig {
        mode: match a.drive {
            DriveArg::Ideal => DriveMode::IdealCurrent,
            DriveArg::Series => DriveMode::SeriesResistor,
        },
        amplitude: a.amplitude,
        series_resistance: a.r,
    };
    let noise = NoiseModel {
        cap_tolerance: a.cap_tol,
        ind_tolerance: a.ind_tol,
        cap_bias: a.cap_bias,
        ind_bias: a.ind_bias,
        voltage_snr_db: a.snr_db,
        seed: a.seed,
    };
    let run = measure(&net, &freq, &drive, &noise)?;
    let (recovered, shifted) = match &run.jtilde_recovered {
        Some(jt) => (jt, true),
        None => (&run.j_recovered, false),
    };
    let spectrum = eig(recovered, &SolverConfig::default())?;

    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    let g_path = a.out.join("G.csv");
    let side_path = a.out.join("G.json");
    let spec_path = a.out.join("spectrum.csv");
    let mut g_buf = Vec::new();
    run.write_g_csv(&mut g_buf)?;
    fs::write(&g_path, g_buf).map_err(|e| io_err(&g_path, e))?;
    fs::write(&side_path, run.sidecar_json()? + "\n").map_err(|e| io_err(&side_path, e))?;
    let mut s_buf = Vec::new();
    write_eigenvalue_csv(&mut s_buf, &spectrum.eigenvalues)?;
    fs::write(&spec_path, s_buf).map_err(|e| io_err(&spec_path, e))?;

    let params = serde_json::json!({
        "freq_hz": a.freq,
        "drive": drive,
        "noise": noise,
        "input": a.input,
        "spectrum_of": if shifted { "shifted" } else { "raw" },
    });
    let outs = [&g_path, &side_path, &spec_path]
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    write_manifest(
        &a.out.join("manifest.json"),
        &manifest(
            "measure",
            args,
            params,
            input_paths(&a.input),
            outs,
            Some(a.seed),
        ),
    )
}

fn cmd_scan(a: &ScanArgs, args: Vec<String>) -> CliResult<()> {
    let freq = FrequencySpec::from_hz(a.freq)?;
    let table = scan(
        &a.n_list,
        &a.delta_list,
        &a.chain_template,
        &freq,
        &SolverConfig::default(),
    );
    for f in &table.failures {
        eprintln!("warning: N={} delta_t={}: {}", f.n, f.delta_t, f.message);
    }
    if table.rows.is_empty() && !table.failures.is_empty() {
        return Err(CliError {
            code: EXIT_NUMERIC,
            message: "no feasible grid point".into(),
        });
    }
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    let params = serde_json::json!({
        "freq_hz": a.freq,
        "n_list": a.n_list,
        "delta_list": a.delta_list,
        "chain_template": a.chain_template,
        "failures": table.failures,
    });
    finish_single(a.out.as_deref(), &buf, |outs| {
        manifest("scan", args, params, vec![], outs, None)
    })
}

fn cmd_calibrate(a: &CalibrateArgs, args: Vec<String>) -> CliResult<()> {
    let freq = FrequencySpec::from_hz(a.freq)?;
    let net = load_input(&a.input)?;
    let nominal = chain_meta(&net)?.params;
    let text = fs::read_to_string(&a.measured).map_err(|e| io_err(&a.measured, e))?;
    let measured: Vec<C64> = match sniff_measured(&text)? {
        MeasuredKind::EigenvalueList => read_eigenvalue_csv(text.as_bytes())?,
        MeasuredKind::ImpedanceMatrix => {
            let g = read_matrix_csv(text.as_bytes(), ["re_ohm", "im_ohm"])?;
            let j = g.inverse()?;
            let jt = j.add_diagonal(C64::new(0.0, freq.omega * mu_of(&nominal, &freq)));
            eigvals(&jt, &SolverConfig::default())?
        }
    };
    let fit = fit_uniform_correction(&measured, &nominal, &freq, a.bound)?;
    let text =
        serde_json::to_string_pretty(&fit).map_err(|e| CliError::from(Error::from(e)))? + "\n";
    let params = serde_json::json!({
        "freq_hz": a.freq,
        "bound": a.bound,
        "nominal": nominal,
    });
    let mut inputs = input_paths(&a.input);
    inputs.push(a.measured.display().to_string());
    finish_single(a.out.as_deref(), text.as_bytes(), |outs| {
        manifest("calibrate", args, params, inputs, outs, None)
    })
}

fn cmd_replay(a: &ReplayArgs) -> CliResult<()> {
    let text = fs::read_to_string(&a.manifest).map_err(|e| io_err(&a.manifest, e))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| CliError {
        code: EXIT_PARSE,
        message: format!("{}: {e}", a.manifest.display()),
    })?;
    let out = match (&a.out, m.command.as_str()) {
        (Some(p), _) => Some(p.display().to_string()),
        // measure records three files; its output directory is their parent
        (None, "measure") => m
            .outputs
            .first()
            .and_then(|p| Path::new(p).parent())
            .map(|p| p.display().to_string()),
        (None, _) => m.outputs.first().cloned(),
    };
    let mut argv = vec!["nhse".to_string()];
    argv.extend(m.args.iter().cloned());
    if let Some(o) = out {
        argv.push("--out".into());
        argv.push(o);
    }
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError {
        code: EXIT_USAGE,
        message: format!("manifest arguments no longer parse: {e}"),
    })?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError {
            code: EXIT_USAGE,
            message: "manifest records a replay".into(),
        });
    }
    dispatch(cli.command, argv[1..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_argument() {
        let p = parse_chain("10,10e-9,220e-9,10e-9,220e-9,220e-6").unwrap();
        assert_eq!(p.n, 10);
        assert_eq!(p.c2, 10e-9);
        assert!(parse_chain("10,1,2").is_err());
        assert!(parse_chain("0,1,1,1,1,1").is_err());
        assert!(parse_chain("2.5,1,1,1,1,1").is_err());
        assert!(parse_chain("3,1,-1,1,1,1").is_err());
    }

    #[test]
    fn out_flag_is_stripped() {
        let a: Vec<String> = ["spectrum", "--out", "x.csv", "--shifted", "--out=y"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(
            strip_out(&a),
            vec!["spectrum".to_string(), "--shifted".to_string()]
        );
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["nhse", "spectrum"]), EXIT_USAGE);
        assert_eq!(run(["nhse", "spectrum", "--chain", "1,2"]), EXIT_USAGE);
        assert_eq!(run(["nhse", "bogus"]), EXIT_USAGE);
    }
}
