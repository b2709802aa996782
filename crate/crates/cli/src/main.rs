use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use optolink_core::budget::{verdict, BudgetConfig};
use optolink_core::harness::{
    emit_bundle, emit_table, link_ber, run_end_to_end, sweep, BundleFormat, Scenario, SweepOptions, SweepParam,
};
use optolink_core::spectral::LinkSpectrum;
use optolink_core::telemetry::{frame_encode, scan_frames, BitStream, Frame};

/// Simulator for a laser-powered, optically programmed retinal stimulator.
///
/// Exit status: 0 on success, 1 on invalid input or I/O failure, 2 when a
/// safety, thermal or link verdict fails.
#[derive(Parser)]
#[command(name = "optolink", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for BundleFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => BundleFormat::Csv,
            Format::Json => BundleFormat::Json,
        }
    }
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML file; the built-in nominal scenario if omitted.
    scenario: Option<PathBuf>,
    /// Overrides the scenario time step.
    #[arg(long)]
    time_step_ns: Option<f64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario> {
        let mut s = match &self.scenario {
            Some(p) => Scenario::load(p)?,
            None => Scenario::nominal(),
        };
        if let Some(dt) = self.time_step_ns {
            s.time_step_ns = dt;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario end to end and write its trace bundle.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Defaults to the scenario's output_dir, then `out/<name>`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Evaluate a scenario over values of one parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// wavelength_nm, p_pupil_mw, bitrate_kbps, modulation_depth or load_kohm.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', conflicts_with = "range")]
        values: Vec<f64>,
        /// Inclusive grid `from:to:step`.
        #[arg(long)]
        range: Option<String>,
        /// Also run the end-to-end simulation for each value.
        #[arg(long)]
        simulate: bool,
        /// Write a file here instead of printing to stdout.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Staged power flow from the pupil to the electrical load.
    PowerBudget {
        #[arg(long, default_value_t = 30.0)]
        p_pupil_mw: f64,
        #[arg(long, default_value_t = 850.0)]
        wavelength_nm: f64,
        /// Prints JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Wavelength maximizing the power deliverable to the PV cell.
    OptimizeWavelength {
        #[arg(long, default_value_t = 600.0)]
        from_nm: f64,
        #[arg(long, default_value_t = 1000.0)]
        to_nm: f64,
        #[arg(long, default_value_t = 1.0)]
        step_nm: f64,
        /// Also writes the capacity curve to `capacity.csv` (or `.json`).
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Bit-error rate of random data through the full optical and analog link.
    Ber {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 100_000)]
        bits: usize,
        /// Largest BER that still passes.
        #[arg(long, default_value_t = 0.0)]
        max_ber: f64,
    },
    /// Encode one frame as a bit stream text file.
    Encode {
        /// Opcode, decimal or 0x-prefixed hex.
        #[arg(long, value_parser = parse_u8)]
        opcode: u8,
        #[arg(long, default_value = "")]
        payload_hex: String,
        #[arg(long, default_value_t = 600.0)]
        bitrate_kbps: f64,
        /// Defaults to stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Find and check frames in a bit stream text file (`-` for stdin).
    Decode { input: PathBuf },
}

fn parse_u8(s: &str) -> Result<u8, String> {
    let r = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u8::from_str_radix(h, 16),
        None => s.parse(),
    };
    r.map_err(|e| format!("{s:?}: {e}"))
}

fn parse_range(r: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = r
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("range {r:?}"))?;
    let [from, to, step] = parts[..] else {
        bail!("range must be from:to:step, got {r:?}");
    };
    if !(step > 0.0) || to < from {
        bail!("empty range {r:?}");
    }
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| from + k as f64 * step).collect())
}

fn verdict_exit(ok: bool, what: &str) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        eprintln!("verdict failed: {what}");
        ExitCode::from(2)
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Cmd::Simulate {
            scenario,
            output_dir,
            format,
        } => {
            let s = scenario.load()?;
            let dir = output_dir
                .or_else(|| s.output_dir.clone())
                .unwrap_or_else(|| Path::new("out").join(&s.name));
            let bundle = run_end_to_end(&s)?;
            let manifest = emit_bundle(&bundle, &dir, format.into())?;
            println!("{}", serde_json::to_string_pretty(&bundle.summary)?);
            eprintln!("wrote {} files to {} (bundle {})", manifest.files.len(), dir.display(), manifest.bundle_sha256);
            Ok(verdict_exit(bundle.summary.verdict.pass, "power budget"))
        }
        Cmd::Sweep {
            scenario,
            param,
            values,
            range,
            simulate,
            output_dir,
            format,
        } => {
            let s = scenario.load()?;
            let param: SweepParam = param.parse()?;
            let values = match range {
                Some(r) => parse_range(&r)?,
                None => values,
            };
            let table = sweep(&s, param, &values, SweepOptions { simulate })?;
            match output_dir {
                Some(dir) => {
                    let path = emit_table(&table, &dir, format.into())?;
                    eprintln!("wrote {}", path.display());
                }
                None => match format {
                    Format::Csv => print!("{}", table.to_csv()),
                    Format::Json => println!("{}", serde_json::to_string_pretty(&table)?),
                },
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::PowerBudget {
            p_pupil_mw,
            wavelength_nm,
            json,
        } => {
            let report = BudgetConfig::default().power_chain(p_pupil_mw, wavelength_nm)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.to_table());
            }
            let v = verdict(&report);
            Ok(verdict_exit(v.pass, if v.safe { "thermal limit" } else { "ocular safety limit" }))
        }
        Cmd::OptimizeWavelength {
            from_nm,
            to_nm,
            step_nm,
            output_dir,
            format,
        } => {
            let spectrum = LinkSpectrum::default();
            let opt = spectrum.optimum_wavelength(from_nm, to_nm, step_nm)?;
            println!("{}", serde_json::to_string_pretty(&opt)?);
            if let Some(dir) = output_dir {
                let grid = parse_range(&format!("{from_nm}:{to_nm}:{step_nm}"))?;
                let table = sweep(&Scenario::nominal(), SweepParam::WavelengthNm, &grid, SweepOptions::default())?;
                let path = emit_table(&table, &dir, format.into())?;
                eprintln!("wrote {}", path.display());
            }
            Ok(verdict_exit(opt.wavelength_nm.is_some(), "no wavelength with nonzero capacity"))
        }
        Cmd::Ber {
            scenario,
            bits,
            max_ber,
        } => {
            let s = scenario.load()?;
            let stats = link_ber(&s, bits)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
            Ok(verdict_exit(stats.ber <= max_ber, "bit-error rate"))
        }
        Cmd::Encode {
            opcode,
            payload_hex,
            bitrate_kbps,
            output,
        } => {
            let payload = hex::decode(&payload_hex).with_context(|| format!("payload hex {payload_hex:?}"))?;
            let stream = frame_encode(&Frame::new(opcode, payload)?, bitrate_kbps)?;
            write_or_print(output.as_deref(), &stream.to_hex_text())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Decode { input } => {
            let text = if input.as_os_str() == "-" {
                let mut t = String::new();
                std::io::stdin().read_to_string(&mut t).context("reading stdin")?;
                t
            } else {
                std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?
            };
            let stream = BitStream::from_hex_text(&text)?;
            let mut good = 0;
            let mut bad = 0;
            for f in scan_frames(&stream.bits) {
                let line = match &f.result {
                    Ok(frame) => {
                        good += 1;
                        serde_json::json!({"sync_bit": f.sync_bit, "opcode": frame.opcode, "payload_hex": hex::encode(&frame.payload)})
                    }
                    Err(e) => {
                        bad += 1;
                        serde_json::json!({"sync_bit": f.sync_bit, "error": e.to_string()})
                    }
                };
                println!("{line}");
            }
            Ok(verdict_exit(good > 0 && bad == 0, &format!("{good} valid and {bad} rejected frames")))
        }
    }
}

fn main() -> Result<ExitCode> {
    run(Cli::parse())
}
