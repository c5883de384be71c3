//! `morphnash` command-line driver.
//!
//! Exit codes: 0 success, 2 solver failure, 3 diverged trajectory, 4 bad
//! configuration or arguments, 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use morphnash::classifier::{self, ClassifierParams};
use morphnash::config::Config;
use morphnash::game::GameController;
use morphnash::meta::collect::collect_data;
use morphnash::meta::daiml::{discriminator_accuracy, prediction_report, train_daiml};
use morphnash::meta::{Dataset, PhiNetwork};
use morphnash::sim::metrics::{cumulative_trapezoid, weighted_norm};
use morphnash::sim::{self, Controller, LqrBaseline, MetricsReport, SimLog};
use morphnash::vehicle::{self, TrimPoint, INPUT_NAMES, STATE_NAMES};
use morphnash::weights::{config_hash, WeightFile};
use morphnash::Error;

const LOG_HELP: &str = "Log columns: t, V, alpha, theta, q, h, delta_e, delta_t, xi_cmd, xi_plant, \
j_u, j_a, iterations, residual_u, residual_a, wall_time_s, warm_started, converged, held, \
then a_1..a_h for game runs. States and inputs are physical; inputs are post-saturation.";

#[derive(Parser)]
#[command(name = "morphnash", version, about = "Morphing-aircraft game control pipeline")]
struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report the configured trim point and its residual.
    Trim,
    /// Fly every grid condition under the LQR baseline and write labelled data.
    Collect {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seconds_per_condition: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the shared representation and discriminator.
    TrainPhi {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the morph-condition classifier.
    TrainClassifier {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Linearize at the configured trim and compare with the reference model.
    Linearize,
    /// Run the closed-loop scenario.
    #[command(after_help = LOG_HELP)]
    Simulate {
        #[arg(long, value_enum)]
        controller: ControllerKind,
        #[arg(long)]
        out: PathBuf,
        /// Feature network weights (game controller only).
        #[arg(long)]
        phi: Option<PathBuf>,
        /// Classifier weights (game controller only).
        #[arg(long)]
        classifier: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare two simulation logs on the same time grid.
    #[command(after_help = "The optional CSV has columns t, error_a, error_b, cost_a, cost_b \
(weighted state error and cumulative cost).")]
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Plot-ready per-sample comparison.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ControllerKind {
    Game,
    Lqr,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::DivergedTrajectory { .. }) => 3,
        Some(Error::Config(_)) => 4,
        Some(err) if err.is_solver_failure() => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = Config::load_or_default(cli.config.as_deref())?;
    match cli.command {
        Command::Trim => trim(&cfg),
        Command::Collect {
            out,
            seconds_per_condition,
            seed,
        } => {
            if let Some(s) = seconds_per_condition {
                cfg.collect.seconds_per_condition = s;
            }
            if let Some(s) = seed {
                cfg.collect.seed = s;
            }
            cfg.validate()?;
            collect(&cfg, &out)
        }
        Command::TrainPhi { data, out, seed } => {
            if let Some(s) = seed {
                cfg.daiml.seed = s;
            }
            train_phi(&cfg, &data, &out)
        }
        Command::TrainClassifier { data, out, seed } => {
            if let Some(s) = seed {
                cfg.classifier.seed = s;
            }
            train_clf(&cfg, &data, &out)
        }
        Command::Linearize => linearize(&cfg),
        Command::Simulate {
            controller,
            out,
            phi,
            classifier,
            seed,
        } => {
            if let Some(s) = seed {
                cfg.scenario.seed = s;
            }
            simulate(&cfg, controller, &out, phi.as_deref(), classifier.as_deref())
        }
        Command::Compare { a, b, out } => compare(&cfg, &a, &b, out.as_deref()),
    }
}

fn resolved_trim(cfg: &Config) -> anyhow::Result<TrimPoint> {
    Ok(cfg.trim.resolve(&cfg.vehicle)?)
}

fn print_trim(label: &str, t: &TrimPoint, cfg: &Config) -> anyhow::Result<()> {
    let x = t.state();
    println!("{label}:");
    for (n, v) in STATE_NAMES.iter().zip(x.iter()) {
        println!("  {n:>8} = {v:.6}");
    }
    for (n, v) in INPUT_NAMES.iter().zip(t.input().iter()) {
        println!("  {n:>8} = {v:.6}");
    }
    println!("  {:>8} = {:.4}", "xi", t.xi_e.value());
    println!("  residual |xdot| = {:.3e}", t.residual(&cfg.vehicle)?);
    Ok(())
}

fn trim(cfg: &Config) -> anyhow::Result<()> {
    print_trim("configured trim", &cfg.trim.point(), cfg)?;
    if cfg.trim.refine {
        print_trim("refined trim", &cfg.trim.point().refine(&cfg.vehicle)?, cfg)?;
    }
    resolved_trim(cfg)?;
    println!("trim accepted at tolerance {:.1e}", cfg.trim.tol);
    Ok(())
}

fn collect(cfg: &Config, out: &Path) -> anyhow::Result<()> {
    let trim = resolved_trim(cfg)?;
    let lqr = LqrBaseline::design(&cfg.vehicle, &trim, &cfg.lqr)?;
    let ds = collect_data(&cfg.vehicle, &trim, &lqr, &cfg.collect)?;
    ds.write_csv(out)
        .with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} records to {}", ds.len(), out.display());
    Ok(())
}

fn read_data(path: &Path) -> anyhow::Result<Dataset> {
    Dataset::read_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn train_phi(cfg: &Config, data: &Path, out: &Path) -> anyhow::Result<()> {
    let ds = read_data(data)?;
    let (train, held) = ds.split_holdout(cfg.daiml.holdout);
    let trained = train_daiml(&train, &cfg.daiml)?;
    let report = prediction_report(&trained.phi, &train, &held, &cfg.daiml)?;
    let acc = discriminator_accuracy(&trained.phi, &trained.disc, &held);
    WeightFile::from_daiml(&trained.phi, &trained.disc, config_hash(&cfg.daiml)?).save(out)?;
    println!(
        "held-out prediction mse {:.5} (zero predictor {:.5}, zero/model {:.2})",
        report.mse,
        report.zero_mse,
        report.improvement()
    );
    println!("held-out discriminator accuracy {acc:.3}");
    println!("wrote {}", out.display());
    Ok(())
}

fn train_clf(cfg: &Config, data: &Path, out: &Path) -> anyhow::Result<()> {
    let ds = read_data(data)?;
    let (params, report) = classifier::train_classifier(&ds, &cfg.classifier)?;
    WeightFile::from_classifier(&params, config_hash(&cfg.classifier)?).save(out)?;
    println!(
        "held-out accuracy {:.3}, xi mean abs error {:.4}",
        report.accuracy, report.xi_mae
    );
    for (k, a) in report.per_condition_accuracy.iter().enumerate() {
        println!("  condition {} (xi = {:.1}): {a:.3}", k + 1, vehicle::MORPH_GRID[k]);
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn linearize(cfg: &Config) -> anyhow::Result<()> {
    // reference matrices belong to the configured point, not a refined one
    let point = cfg.trim.point();
    let (a, b) = vehicle::linearize(&cfg.vehicle, &point)?;
    let (ra, rb) = cfg.reference.matrices()?;
    println!("A =\n{a:.5}");
    println!("B =\n{b:.5}");
    // deviation is relative unless the reference entry is zero
    println!(
        "{:>4} {:>4} {:>13} {:>13} {:>10}",
        "row", "col", "computed", "reference", "deviation"
    );
    let print_dev = |name: &str, i: usize, j: usize, c: f64, r: f64| {
        let (dev, kind) = if r == 0.0 {
            ((c - r).abs(), "abs")
        } else {
            ((c - r).abs() / r.abs(), "rel")
        };
        println!(
            "{name}{:>3} {:>4} {c:>13.5e} {r:>13.5e} {dev:>10.3e} {kind}",
            i + 1,
            j + 1
        );
    };
    for i in 0..5 {
        for j in 0..5 {
            print_dev("A", i, j, a[(i, j)], ra[(i, j)]);
        }
    }
    for i in 0..5 {
        for j in 0..2 {
            print_dev("B", i, j, b[(i, j)], rb[(i, j)]);
        }
    }
    Ok(())
}

fn game_controller(
    cfg: &Config,
    trim: TrimPoint,
    phi: Option<&Path>,
    clf: Option<&Path>,
) -> anyhow::Result<GameController> {
    let phi: PhiNetwork = WeightFile::load(phi.context("--phi is required for the game controller")?)?.phi()?;
    let clf: ClassifierParams =
        WeightFile::load(clf.context("--classifier is required for the game controller")?)?.classifier()?;
    Ok(GameController::new(cfg.vehicle.clone(), trim, phi, clf, &cfg.game)?)
}

fn simulate(
    cfg: &Config,
    kind: ControllerKind,
    out: &Path,
    phi: Option<&Path>,
    clf: Option<&Path>,
) -> anyhow::Result<()> {
    let trim = resolved_trim(cfg)?;
    let controller = match kind {
        ControllerKind::Game => Controller::Game(Box::new(game_controller(cfg, trim, phi, clf)?)),
        ControllerKind::Lqr => Controller::Lqr(LqrBaseline::design(&cfg.vehicle, &trim, &cfg.lqr)?),
    };
    let weights = cfg.game.weights()?;
    let log = sim::run_closed_loop(&cfg.scenario, &cfg.vehicle, &trim, &controller, &weights)?;
    log.write_csv(out)
        .with_context(|| format!("writing {}", out.display()))?;
    let m = sim::metrics(&log, &weights.q_u, &trim.state());
    println!(
        "{} controller, {} samples written to {}",
        controller.name(),
        log.len(),
        out.display()
    );
    print_metrics("run", &m);
    Ok(())
}

fn fmt_row(v: &[f64]) -> String {
    let cells: Vec<String> = STATE_NAMES.iter().zip(v).map(|(n, x)| format!("{n} {x:.4}")).collect();
    cells.join(", ")
}

fn print_metrics(label: &str, m: &MetricsReport) {
    println!("{label}:");
    println!("  cumulative cost J_u   {:.4}", m.cost_u);
    println!("  cumulative cost J_a   {:.4}", m.cost_a);
    println!(
        "  weighted error        {:.4} -> {:.4} (threshold {:.4})",
        m.initial_error, m.final_error, m.threshold
    );
    match m.settling_time {
        Some(t) => println!("  settling time         {t:.2} s"),
        None => println!("  settling time         not settled"),
    }
    println!("  overshoot             {}", fmt_row(&m.overshoot));
    println!("  final state error     {}", fmt_row(&m.final_state_error));
    println!("  inputs admissible     {}", m.inputs_admissible);
}

fn compare(cfg: &Config, a: &Path, b: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let trim = resolved_trim(cfg)?;
    let q_u = cfg.game.weights()?.q_u;
    let (la, lb) = std::thread::scope(|s| {
        let ha = s.spawn(|| SimLog::read_csv(a));
        let hb = s.spawn(|| SimLog::read_csv(b));
        (ha.join().expect("reader thread"), hb.join().expect("reader thread"))
    });
    let la = la.with_context(|| format!("reading {}", a.display()))?;
    let lb = lb.with_context(|| format!("reading {}", b.display()))?;
    let c = sim::compare(&la, &lb, &q_u, &trim.state())?;
    print_metrics(&format!("a = {}", a.display()), &c.a);
    print_metrics(&format!("b = {}", b.display()), &c.b);
    println!("cost reduction of a relative to b: {:.2}%", c.cost_reduction_percent);
    if let Some(out) = out {
        let mut w = csv::Writer::from_path(out)?;
        w.write_record(["t", "error_a", "error_b", "cost_a", "cost_b"])?;
        let t = la.times();
        let cost = |log: &SimLog| cumulative_trapezoid(&t, &log.samples.iter().map(|s| s.j_u).collect::<Vec<_>>());
        let (ca, cb) = (cost(&la), cost(&lb));
        for k in 0..t.len() {
            let ea = weighted_norm(&(la.samples[k].x - trim.state()), &q_u);
            let eb = weighted_norm(&(lb.samples[k].x - trim.state()), &q_u);
            w.write_record([t[k], ea, eb, ca[k], cb[k]].map(|v| v.to_string()))?;
        }
        w.flush()?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
