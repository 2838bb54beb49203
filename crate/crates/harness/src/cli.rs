use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use escal_core::scenario::Scenario;

use crate::config::ScenarioFile;
use crate::error::HarnessError;
use crate::modes::{Mode, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Run,
    Sweep,
    Oracle,
    Pattern,
    Selftest,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Run => Mode::Run,
            ModeArg::Sweep => Mode::Sweep,
            ModeArg::Oracle => Mode::Oracle,
            ModeArg::Pattern => Mode::Pattern,
            ModeArg::Selftest => Mode::SelfTest,
        }
    }
}

/// Conformal phased-array tile simulator with extremum-seeking phase
/// calibration.
#[derive(Debug, Parser)]
#[command(name = "escal", version)]
pub struct Cli {
    /// Scenario TOML file. Optional for selftest, which falls back to the
    /// built-in headline scenario.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Run)]
    pub mode: ModeArg,
    /// Override a scenario field, e.g. `--set trajectory.r0_m=0.5` or
    /// `--set loops.0.a_phi_lsb=12`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Master seed; overrides the scenario's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exit with status 3 if the loops have not converged.
    #[arg(long)]
    pub require_converged: bool,
}

impl Cli {
    pub fn manifest(&self) -> Result<RunManifest, HarnessError> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        let config = match (&self.scenario, self.mode) {
            (Some(path), _) => ScenarioFile::load(path, &overrides)?,
            (None, ModeArg::Selftest) => {
                let text = ScenarioFile::from(&Scenario::headline()).to_toml()?;
                ScenarioFile::with_overrides(&text, &overrides)?
            }
            (None, _) => return Err(HarnessError::Usage("--scenario <path> is required".into())),
        };
        Ok(RunManifest {
            config,
            out_dir: self.out.clone(),
            mode: self.mode.into(),
            require_converged: self.require_converged,
        })
    }
}

/// Parses `args`, executes and returns the process exit status.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.manifest().and_then(|m| m.execute()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("escal: {e}");
            e.exit_code()
        }
    }
}
