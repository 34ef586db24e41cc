// SPDX-License-Identifier: Apache-2.0

//! `camformer` command-line entry point.
//!
//! Exit status: 0 success, 1 invalid config or usage, 2 missing or corrupt
//! tensor file, 3 internal invariant violation, 4 output write failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use camformer::experiment::{
    emit_synthetic, load_config, run_experiment, Distribution, RunError, RunOverrides, SyntheticSpec, SEED_ENV,
};
use camformer::formats::{BIT_MAGIC, INT_MAGIC};
use camformer::perfmodel::PRESET_NAMES;

#[derive(Parser)]
#[command(name = "camformer", version, about = "Binary-attention CAM accelerator model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Generate tensors of shape n,d_k,d_v instead of reading files.
        #[arg(long, value_parser = parse_shape, value_name = "N,D_K,D_V")]
        synthetic: Option<(usize, usize, usize)>,
        /// Output directory; overrides the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write seeded synthetic Q/K/V tensor files.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d_k: usize,
        #[arg(long)]
        d_v: usize,
        #[arg(long, default_value_t = 1)]
        queries: usize,
        /// Falls back to the seed environment variable.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "uniform")]
        distribution: DistributionArg,
        #[arg(long, default_value_t = 8)]
        value_bits: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Describe the tensor file formats and shipped presets.
    Formats,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DistributionArg {
    Uniform,
    AdversarialClustered,
}

impl From<DistributionArg> for Distribution {
    fn from(d: DistributionArg) -> Self {
        match d {
            DistributionArg::Uniform => Distribution::Uniform,
            DistributionArg::AdversarialClustered => Distribution::AdversarialClustered,
        }
    }
}

fn parse_shape(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [n, d_k, d_v] = parts[..] else {
        return Err(format!("expected n,d_k,d_v, got {s:?}"));
    };
    let num = |v: &str| v.parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(n)?, num(d_k)?, num(d_v)?))
}

fn env_seed() -> Result<Option<u64>, RunError> {
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| RunError::Config(format!("`{SEED_ENV}`: {raw:?} is not an unsigned 64-bit integer"))),
        Err(_) => Ok(None),
    }
}

fn formats_text() -> String {
    let bit = String::from_utf8_lossy(BIT_MAGIC);
    let int = String::from_utf8_lossy(INT_MAGIC);
    format!(
        "{bit}  binary matrix (queries, keys)\n\
         \x20 magic \"{bit}\" (6 B), rows u32 LE, cols u32 LE,\n\
         \x20 then per row ceil(cols/8) bytes, bit j of a row at byte j/8, bit j%8 (LSB first);\n\
         \x20 bit 1 is +1, bit 0 is -1; padding bits are zero.\n\
         {int}  integer matrix (values)\n\
         \x20 magic \"{int}\" (6 B), rows u32 LE, cols u32 LE, bits u8, signed u8 (0 or 1),\n\
         \x20 then row-major entries of ceil(bits/8) bytes each, little-endian, two's complement if signed.\n\
         presets: {}\n",
        PRESET_NAMES.join(", ")
    )
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { config, synthetic, out } => {
            let overrides = RunOverrides {
                synthetic,
                output_dir: out,
                ..RunOverrides::from_env()
            };
            let summary = run_experiment(&config, &overrides)?;
            for f in &summary.files {
                println!("{}", f.display());
            }
        }
        Command::Validate { config } => {
            let r = load_config(&config, &RunOverrides::from_env())?;
            println!("ok {} {}", r.config.kind.name(), r.config_hash);
        }
        Command::Synth {
            n,
            d_k,
            d_v,
            queries,
            seed,
            distribution,
            value_bits,
            out,
        } => {
            let seed = match seed {
                Some(s) => s,
                None => {
                    env_seed()?.ok_or_else(|| RunError::Config(format!("`seed`: pass --seed or set {SEED_ENV}")))?
                }
            };
            let spec = SyntheticSpec {
                queries,
                distribution: distribution.into(),
                value_bits,
                ..SyntheticSpec::new(n, d_k, d_v)
            };
            spec.validate().map_err(|e| RunError::Config(e.to_string()))?;
            let (_, paths) = emit_synthetic(&out, &spec, seed).map_err(|e| RunError::Output(e.to_string()))?;
            for p in [paths.queries, paths.keys, paths.values] {
                println!("{}", p.display());
            }
        }
        Command::Formats => print!("{}", formats_text()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
