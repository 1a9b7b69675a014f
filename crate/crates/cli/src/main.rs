use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tcilab_cli::{resolve_out, run, suite, ExperimentConfig, Kind, Manifest, RunError};

#[derive(Parser)]
#[command(name = "tcilab", version, about = "Run transport-inequality experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides TCILAB_OUT and the config's "output").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace the seed of every config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run { config: PathBuf },
    /// Run every experiment listed in a manifest.
    Suite { manifest: PathBuf },
    /// Print the experiment kinds and the claim each one checks.
    ListKinds,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    let code = pool.install(|| dispatch(&cli));
    ExitCode::from(code as u8)
}

fn dispatch(cli: &Cli) -> i32 {
    match &cli.command {
        Command::ListKinds => {
            for k in Kind::ALL {
                println!("{:<16} {}", k.name(), k.claim());
            }
            0
        }
        Command::Run { config } => {
            let result = ExperimentConfig::load(config).and_then(|mut cfg| {
                if let Some(s) = cli.seed {
                    cfg.seed = s;
                }
                let out = resolve_out(cli.out.as_deref(), cfg.output.as_deref());
                run(&cfg, &out)
            });
            match result {
                Ok(w) => {
                    for (name, ok) in &w.report.verdicts {
                        println!("{:<4} {name}", if *ok { "pass" } else { "FAIL" });
                    }
                    for f in &w.files {
                        println!("wrote {}", f.display());
                    }
                    w.exit_code()
                }
                Err(e) => report_error(&e),
            }
        }
        Command::Suite { manifest } => {
            let result = Manifest::load(manifest).and_then(|mut m| {
                if let Some(s) = cli.seed {
                    for c in &mut m.experiments {
                        c.seed = s;
                    }
                }
                let out = resolve_out(cli.out.as_deref(), None);
                suite(&m, &out).map(|r| (r, out))
            });
            match result {
                Ok((r, out)) => {
                    for row in &r.rows {
                        let status = match row.exit_code {
                            0 => "pass",
                            1 => "FAIL",
                            2 => "SCHEMA",
                            _ => "ERROR",
                        };
                        println!("{status:<6} {:<32} {}", row.name, row.detail);
                    }
                    if !r.culprits.is_empty() {
                        eprintln!("not passing: {}", r.culprits.join(", "));
                    }
                    println!("wrote {}", out.join("suite.json").display());
                    r.exit_code
                }
                Err(e) => report_error(&e),
            }
        }
    }
}

fn report_error(e: &RunError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}
