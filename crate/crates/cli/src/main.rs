use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rotloc::io::commands::{self, CommandError, Outcome};
use rotloc::io::config::{load_config, RunConfig, OUTPUT_DIR_ENV};
use rotloc::io::presets::PRESETS;
use rotloc::{DipoleModel, Execution, Representation};

#[derive(Parser)]
#[command(name = "rotloc", version, about = "Rotational localization under periodic pulse trains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unified-parameter row and predicted region; no simulation
    Predict(Overrides),
    /// Propagate one trajectory and write its time average
    Simulate(Overrides),
    /// Predicted (and optionally simulated) regions over a gamma grid
    SweepGamma(Overrides),
    /// Predicted (and optionally simulated) regions over T_p/T_M values
    SweepInterval(Overrides),
    /// Predicted and measured regions side by side
    Compare(Overrides),
    /// List built-in molecules
    Presets,
}

#[derive(Args, Default)]
struct Overrides {
    /// TOML run config; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Molecule preset
    #[arg(long)]
    preset: Option<String>,
    /// Synchronize T_p to this preset's rotational period
    #[arg(long)]
    tp_sync: Option<String>,
    #[arg(long)]
    tp_over_tm: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Number of comb harmonics
    #[arg(long)]
    n: Option<usize>,
    /// Pulse count
    #[arg(long)]
    pulses: Option<u64>,
    #[arg(long)]
    initial_j: Option<usize>,
    #[arg(long)]
    j_max: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    m: Option<i32>,
    #[arg(long, value_parser = parse_dipole)]
    dipole: Option<DipoleModel>,
    #[arg(long, value_parser = parse_representation)]
    representation: Option<Representation>,
    #[arg(long)]
    steps_per_pulse: Option<u32>,
    #[arg(long)]
    sample_stride: Option<u32>,
    #[arg(long)]
    norm_tolerance: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    floor: Option<f64>,
    /// Comma-separated gamma grid
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Comma-separated T_p/T_M grid
    #[arg(long, value_delimiter = ',')]
    tp_grid: Option<Vec<f64>>,
    /// Also simulate every sweep point
    #[arg(long)]
    simulate: bool,
    /// Run sweep points one after another
    #[arg(long)]
    sequential: bool,
    /// Output directory [default: $ROTLOC_OUTPUT_DIR, else rotloc-out]
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
}

fn parse_dipole(s: &str) -> Result<DipoleModel, String> {
    match s {
        "constant-half" => Ok(DipoleModel::ConstantHalf),
        "exact-jm" => Ok(DipoleModel::ExactJm),
        _ => Err("expected constant-half or exact-jm".into()),
    }
}

fn parse_representation(s: &str) -> Result<Representation, String> {
    match s {
        "rwa" => Ok(Representation::Rwa),
        "full-field" => Ok(Representation::FullField),
        _ => Err("expected rwa or full-field".into()),
    }
}

impl Overrides {
    fn config(&self) -> Result<RunConfig, CommandError> {
        let mut c = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.preset {
            c.molecule = Default::default();
            c.molecule.preset = Some(p.clone());
        }
        if let Some(v) = &self.tp_sync {
            c.train.tp_sync = Some(v.clone());
        }
        if let Some(v) = self.tp_over_tm {
            c.train.tp_over_tm = v;
        }
        if let Some(v) = self.gamma {
            c.train.gamma = v;
        }
        if let Some(v) = self.n {
            c.train.n = v;
        }
        if let Some(v) = self.pulses {
            c.train.pulse_count = Some(v);
        }
        if let Some(v) = self.initial_j {
            c.run.initial_j = v;
        }
        if let Some(v) = self.j_max {
            c.basis.j_max = Some(v);
        }
        if let Some(v) = self.m {
            c.basis.m = v;
        }
        if let Some(v) = self.dipole {
            c.basis.dipole_model = v;
        }
        if let Some(v) = self.representation {
            c.propagation.representation = v;
        }
        if let Some(v) = self.steps_per_pulse {
            c.propagation.steps_per_pulse = Some(v);
        }
        if let Some(v) = self.sample_stride {
            c.propagation.sample_stride = Some(v);
        }
        if let Some(v) = self.norm_tolerance {
            c.propagation.norm_tolerance = Some(v);
        }
        if let Some(v) = self.threshold {
            c.analysis.threshold = v;
        }
        if let Some(v) = self.floor {
            c.analysis.floor = v;
        }
        if let Some(v) = &self.gammas {
            c.sweep.gammas = Some(v.clone());
        }
        if let Some(v) = &self.tp_grid {
            c.sweep.tp_over_tm = Some(v.clone());
        }
        if self.simulate {
            c.sweep.simulate = true;
        }
        if let Some(v) = &self.out {
            c.run.output_dir = Some(v.clone());
        }
        c.resolve()?;
        Ok(c)
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

fn list_presets() {
    println!("{:<12} {:>8} {:>12}", "name", "B_M", "D_v/B_M");
    for p in PRESETS {
        let m = p.molecule();
        println!("{:<12} {:>8} {:>12e}", m.name, m.b_m, m.dv_over_bm);
    }
}

fn run(command: Command) -> Result<Option<Outcome>, CommandError> {
    let outcome = match command {
        Command::Presets => {
            list_presets();
            return Ok(None);
        }
        Command::Predict(o) => commands::predict(&o.config()?)?,
        Command::Simulate(o) => commands::simulate(&o.config()?)?,
        Command::Compare(o) => commands::compare(&o.config()?)?,
        Command::SweepGamma(o) => commands::sweep_gamma(&o.config()?, o.execution())?,
        Command::SweepInterval(o) => commands::sweep_interval(&o.config()?, o.execution())?,
    };
    Ok(Some(outcome))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(Some(outcome)) => {
            print!("{}", outcome.report);
            println!("wrote {}", outcome.dir.display());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
