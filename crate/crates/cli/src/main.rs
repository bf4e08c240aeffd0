use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfmimo::beamform::Beamforming;
use cfmimo::harness::{check_invariants, oracle_compare, run_experiment, series, write_outputs, Algorithm, ExperimentSpec};
use cfmimo::Error;

#[derive(Parser)]
#[command(name = "cfmimo", version, about = "Joint power control and user grouping for cell-free massive MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML spec file.
    Run {
        spec: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Compare GPGA against exhaustive enumeration on tiny instances.
    Oracle {
        spec: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Run the quick invariant suite.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
}

#[derive(Args)]
struct Overrides {
    /// Seeds as a list ("1,2,5") or half-open range ("0..20").
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<Seeds>,
    /// Output directory; defaults to <CFMIMO_OUT or ./runs>/<spec name>.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    #[arg(long, value_delimiter = ',')]
    beamforming: Option<Vec<Beamforming>>,
    /// Worker threads (all cores by default).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, env = "CFMIMO_OUT", hide_env_values = true)]
    out_root: Option<PathBuf>,
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("{e}"))?;
        if b <= a {
            return Err(format!("empty seed range {s}"));
        }
        return Ok(Seeds((a..b).collect()));
    }
    s.split(',').map(|t| t.trim().parse::<u64>().map_err(|e| format!("{t:?}: {e}"))).collect::<Result<_, _>>().map(Seeds)
}

impl Overrides {
    fn apply(&self, path: &Path) -> Result<(ExperimentSpec, PathBuf), Error> {
        let mut spec = ExperimentSpec::load(path)?;
        if let Some(s) = &self.seeds {
            spec.seeds = s.0.clone();
        }
        if let Some(a) = &self.algorithms {
            spec.algorithms = a.clone();
        }
        if let Some(b) = &self.beamforming {
            spec.beamforming = b.clone();
        }
        if let Some(d) = self.delta {
            spec.delta = d;
        }
        let out = match (&self.out, &spec.out_dir, &self.out_root) {
            (Some(o), _, _) => o.clone(),
            (None, Some(o), _) => o.clone(),
            (None, None, Some(root)) => root.join(&spec.name),
            (None, None, None) => PathBuf::from("runs").join(&spec.name),
        };
        spec.out_dir = Some(out.clone());
        spec.validate()?;
        Ok((spec, out))
    }
}

fn run(command: Command) -> Result<bool, Error> {
    match command {
        Command::Run { spec, opts } => {
            let (spec, out) = opts.apply(&spec)?;
            let rows = run_experiment(&spec, opts.jobs)?;
            write_outputs(&spec, &rows, &out)?;
            for ((a, b), pts) in series(&rows) {
                for p in pts {
                    println!(
                        "{a:<13} {:<3} x={:<10} median {:>8.3} dBm  [{:.3}, {:.3}]  feasible {}/{}",
                        b.name(),
                        p.x,
                        p.median,
                        p.p25,
                        p.p75,
                        p.feasible,
                        p.runs
                    );
                }
            }
            let failed: Vec<_> = rows.iter().filter(|r| !r.completed()).collect();
            for r in &failed {
                eprintln!("failed: {} {} seed {}: {}", r.algorithm, r.beamforming.name(), r.seed, r.error.as_deref().unwrap_or(""));
            }
            println!("{} rows written to {}", rows.len(), out.display());
            Ok(failed.is_empty())
        }
        Command::Oracle { spec, opts } => {
            let (spec, out) = opts.apply(&spec)?;
            let rows = oracle_compare(&spec, opts.jobs)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            let mut text = String::from("sweep,seed,gpga_w,brute_w,match\n");
            let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
            for r in &rows {
                text.push_str(&format!("{},{},{},{},{}\n", r.sweep, r.seed, fmt(r.gpga_w), fmt(r.brute_w), r.matches));
            }
            let path = out.join("oracle.csv");
            std::fs::write(&path, text).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            let ok = rows.iter().filter(|r| r.matches).count();
            println!("gpga matches brute force on {ok}/{} instances", rows.len());
            Ok(true)
        }
        Command::Check { seed, trials } => {
            let checks = check_invariants(seed, trials)?;
            for c in &checks {
                println!("{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
