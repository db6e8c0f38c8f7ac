use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use falcon_sim::output::{write_outputs, Analysis};
use falcon_sim::scenario::{ModeName, Scenario, SimConfig};
use falcon_sim::simulate;

#[derive(Parser)]
#[command(
    name = "falcon",
    about = "Run Falcon consensus scenarios on a simulated network"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario file and write its metrics and invariant report.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the scenario's output.dir, else out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mode: Option<ModeName>,
    },
    /// Run every *.toml scenario in a directory.
    Check {
        dir: PathBuf,
        /// Write each scenario's outputs to <out>/<file stem>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_VIOLATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn load(path: &Path, seed: Option<u64>, mode: Option<ModeName>) -> Result<(Scenario, SimConfig), String> {
    let sc = Scenario::load(path).map_err(|e| e.to_string())?;
    let cfg = sc.to_config(seed, mode).map_err(|e| e.to_string())?;
    Ok((sc, cfg))
}

/// Runs one config; returns whether it passed.
fn execute(label: &str, cfg: SimConfig, out: Option<&Path>) -> Result<bool, String> {
    let run = simulate(cfg);
    let analysis = Analysis::of(&run);
    if let Some(dir) = out {
        write_outputs(dir, &run, &analysis).map_err(|e| format!("writing {}: {e}", dir.display()))?;
    }
    let verdict = if analysis.passed() { "PASS" } else { "FAIL" };
    println!(
        "{verdict} {label} seed={} events={} end_time={}",
        run.config.seed,
        run.log.len(),
        run.end_time
    );
    for v in &analysis.violations {
        println!("  {}: {}", v.check, v.detail);
    }
    Ok(analysis.passed())
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run {
            scenario,
            seed,
            out,
            mode,
        } => {
            let (sc, cfg) = match load(&scenario, seed, mode) {
                Ok(x) => x,
                Err(e) => {
                    eprintln!("error: {}: {e}", scenario.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let dir = out
                .or_else(|| sc.output.dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| Path::new("out").join(&cfg.name));
            match execute(&cfg.name.clone(), cfg, Some(&dir)) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(EXIT_VIOLATION),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
            }
        }
        Cmd::Check { dir, out } => {
            let mut files: Vec<PathBuf> = match std::fs::read_dir(&dir) {
                Ok(rd) => rd
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "toml"))
                    .collect(),
                Err(e) => {
                    eprintln!("error: {}: {e}", dir.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            files.sort();
            let (mut bad_config, mut failed) = (false, false);
            for file in files {
                let stem = file
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                let cfg = match load(&file, None, None) {
                    Ok((_, cfg)) => cfg,
                    Err(e) => {
                        println!("ERROR {stem}: {e}");
                        bad_config = true;
                        continue;
                    }
                };
                let target = out.as_ref().map(|o| o.join(&stem));
                match execute(&stem, cfg, target.as_deref()) {
                    Ok(passed) => failed |= !passed,
                    Err(e) => {
                        println!("ERROR {stem}: {e}");
                        bad_config = true;
                    }
                }
            }
            if bad_config {
                ExitCode::from(EXIT_CONFIG)
            } else if failed {
                ExitCode::from(EXIT_VIOLATION)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
