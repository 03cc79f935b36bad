use std::fs;
use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use sandshape::dataset::{
    compute_stats, extract_all, load_demos, read_triplets, save_demos, synthesize_demos, write_stats, write_triplets,
    ExtractConfig, SynthConfig,
};
use sandshape::learner::{self, MlpModel, TrainConfig};
use sandshape::session::{self, bench, write_bench_csv, Choice, Scenario, Session, SessionLog};
use sandshape::strategies::{PushStrategy, TerminationMode};

#[derive(Parser)]
#[command(name = "sandshape", version, about = "Vision-based shaping of a simulated sand bed")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Auto,
    Operator,
}

#[derive(Subcommand)]
enum Command {
    /// Run one shaping session and write its log.
    Run {
        /// Built-in scenario name or scenario JSON file.
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum, default_value = "auto")]
        mode: Mode,
        /// Push strategy used by auto steps.
        #[arg(long, default_value = "max")]
        strategy: PushStrategy,
        #[arg(long)]
        term: Option<TerminationMode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Operator choices, one per line (`auto`, `tap`, `push-max`, `push-avg`,
        /// `push-ann`, `stop`); stdin is read when omitted.
        #[arg(long)]
        script: Option<PathBuf>,
    },
    /// Re-execute a session log and compare.
    Replay {
        log: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run every scenario x strategy x seed and write the error curves.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "c,e,sigma")]
        scenarios: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "max,avg")]
        strategies: Vec<PushStrategy>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train the pushing policy on a triplet file.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 25_000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long)]
        model: PathBuf,
    },
    /// Serve the HTTP control surface.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Write synthetic demonstrations as PNG frames with sidecars.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Mine triplets (and their statistics) from a demonstration directory.
    Extract {
        #[arg(long)]
        demos: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        tau_u: f64,
        #[arg(long, default_value_t = 3.0)]
        tau_x: f64,
    },
}

fn load_model(path: Option<&PathBuf>) -> Result<Option<Arc<MlpModel>>> {
    path.map(|p| learner::load(p).map(Arc::new).with_context(|| format!("loading model {}", p.display())))
        .transpose()
}

fn print_summary(log: &SessionLog) {
    let reason = log.footer.reason.map_or_else(|| "-".into(), |r| r.to_string());
    println!(
        "{} iterations, e {:.4} -> {:.4}, stopped: {reason}",
        log.records.len(),
        log.header.initial_error,
        log.footer.final_error
    );
}

fn operator_loop(session: &mut Session, input: impl BufRead) -> Result<()> {
    let mut out = io::stdout();
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if matches!(line, "stop" | "quit" | "terminate") {
            session.terminate()?;
            break;
        }
        let choice: Choice = match line.parse() {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                continue;
            }
        };
        let r = session.run_iteration(&choice)?;
        writeln!(out, "k={} e={:.4} -> {:.4} {:?}", r.k, r.e_before, r.e_after, r.outcome)?;
        if session.is_terminated() {
            break;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, mode, strategy, term, seed, out, model, script } => {
            let mut sc = Scenario::load(&scenario)?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            if let Some(m) = term {
                sc.termination.mode = m;
            }
            let model = load_model(model.as_ref())?;
            let mut session = Session::new(sc, model)?.with_auto_strategy(strategy);
            match (mode, script) {
                (Mode::Auto, Some(_)) => bail!("--script needs --mode operator"),
                (Mode::Auto, None) => {
                    session.run_autonomous()?;
                }
                (Mode::Operator, Some(path)) => operator_loop(&mut session, io::BufReader::new(fs::File::open(path)?))?,
                (Mode::Operator, None) => operator_loop(&mut session, io::stdin().lock())?,
            }
            let log = session.log();
            log.save(&out)?;
            print_summary(&log);
        }
        Command::Replay { log, model } => {
            let log = SessionLog::load(&log)?;
            let verdict = session::replay(&log, load_model(model.as_ref())?)?;
            println!("replayed {} iterations: {}", verdict.replayed, if verdict.matched { "match" } else { "MISMATCH" });
            for m in &verdict.mismatches {
                println!("  {m}");
            }
            if !verdict.matched {
                std::process::exit(1);
            }
        }
        Command::Bench { scenarios, strategies, seeds, csv, model } => {
            let scenarios = scenarios.iter().map(|s| Scenario::load(s)).collect::<Result<Vec<_>, _>>()?;
            let report = bench(&scenarios, &strategies, &seeds, load_model(model.as_ref())?)?;
            write_bench_csv(&report, fs::File::create(&csv)?)?;
            print!("{}", report.summary_table());
        }
        Command::Dataset(DatasetCommand::Synth { out, count, seed }) => {
            let demos = synthesize_demos(&SynthConfig::default(), seed, count);
            save_demos(&out, &demos)?;
            println!("{} demonstrations written to {}", demos.len(), out.display());
        }
        Command::Dataset(DatasetCommand::Extract { demos, out, stats, tau_u, tau_x }) => {
            let demos = load_demos(&demos)?;
            let cfg = ExtractConfig { tau_u, tau_x, ..ExtractConfig::default() };
            let triplets = extract_all(&demos, &cfg);
            write_triplets(&out, &triplets)?;
            let s = compute_stats(&triplets)?;
            println!(
                "{} triplets from {} demonstrations; mu_d {:.2} sigma_d {:.2} mu_dv {:.2} sigma_dv {:.2}",
                triplets.len(),
                demos.len(),
                s.mu_d,
                s.sigma_d,
                s.mu_dv,
                s.sigma_dv
            );
            if let Some(path) = stats {
                write_stats(path, &s, triplets.len())?;
            }
        }
        Command::Train { data, episodes, seed, lr, model } => {
            let triplets = read_triplets(&data)?;
            let cfg = TrainConfig { episodes, seed, learning_rate: lr, ..TrainConfig::default() };
            let (m, report) = learner::train(&triplets, &cfg)?;
            let t = report.test;
            println!(
                "loss {:.5} -> {:.5}; test MAE px ({} samples): u_S {:.2} v_S {:.2} u_E {:.2} v_E {:.2}",
                report.first_loss(),
                report.final_loss(),
                t.samples,
                t.mae_u_s,
                t.mae_v_s,
                t.mae_u_e,
                t.mae_v_e
            );
            learner::save(&m, &model)?;
        }
        Command::Serve { port, host, model } => {
            let addr: SocketAddr = format!("{host}:{port}").parse().context("listen address")?;
            let model = load_model(model.as_ref())?;
            let rt = tokio::runtime::Runtime::new()?;
            println!("listening on http://{addr}");
            rt.block_on(session::http::serve(addr, model))?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    run(Cli::parse())
}
