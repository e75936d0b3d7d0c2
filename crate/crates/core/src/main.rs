use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use bnmix::exact::{parse_evidence, posterior_marginals, Evidence};
use bnmix::metrics::{distance_report, kl_vs_components_curve, write_curve_csv, DistanceReport};
use bnmix::mixture::parse_mixture;
use bnmix::network::parse_network;
use bnmix::parallel::Execution;
use bnmix::report::FitReport;
use bnmix::reproduce::{Study, StudyConfig};
use bnmix::{run_fit, BayesNet, FitMethod, FitSettings, MixtureModel};

#[derive(Parser)]
#[command(name = "bnmix", version, about = "Mixture-of-scenarios approximations of binary Bayesian networks")]
struct Cli {
    /// Run restarts on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a mixture and write report.json, mixture.json and scenarios.csv.
    Fit(FitArgs),
    /// Condition a mixture on evidence.
    Query {
        net: PathBuf,
        mixture: PathBuf,
        /// JSON object of variable name to 0/1; omitted means no evidence.
        evidence: Option<PathBuf>,
        #[arg(long)]
        compare_exact: bool,
    },
    /// Scenario table and distances of a mixture.
    Report { net: PathBuf, mixture: PathBuf },
    /// Ancestral samples as CSV.
    Sample {
        net: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// KL, BKL, SE and ESE of a mixture as a CSV row.
    Distance {
        net: PathBuf,
        mixture: PathBuf,
        #[arg(long, default_value = "mixture")]
        label: String,
    },
    /// KL of the best fit for each component count.
    Curve {
        net: PathBuf,
        #[arg(long, default_value = "kl-exact", value_parser = parse_method)]
        method: FitMethod,
        #[arg(long, default_value_t = 6, value_parser = positive)]
        max_components: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20, value_parser = positive)]
        restarts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full chest-clinic study.
    Reproduce {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100, value_parser = positive)]
        restarts: usize,
        #[arg(long, default_value_t = 100, value_parser = positive)]
        meanfield_restarts: usize,
    },
}

#[derive(Args)]
struct FitArgs {
    net: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: FitMethod,
    #[arg(long, default_value_t = 4, value_parser = positive)]
    components: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20, value_parser = positive)]
    restarts: usize,
    #[arg(long, value_parser = parse_tol)]
    tol: Option<f64>,
    #[arg(long, value_parser = positive)]
    max_iters: Option<usize>,
    /// Sample count for kl-sampled.
    #[arg(long, default_value_t = 200_000, value_parser = positive)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_method(s: &str) -> std::result::Result<FitMethod, String> {
    s.parse().map_err(|e: bnmix::Error| e.to_string())
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("`{s}` is not a positive integer")),
    }
}

fn parse_tol(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(t) if t > 0.0 && t.is_finite() => Ok(t),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_net(path: &Path) -> Result<BayesNet> {
    parse_network(&read(path)?).with_context(|| format!("parsing network {}", path.display()))
}

fn load_mixture(path: &Path, net: &BayesNet) -> Result<MixtureModel> {
    let m = parse_mixture(&read(path)?).with_context(|| format!("parsing mixture {}", path.display()))?;
    m.check_variables(net)?;
    Ok(m)
}

fn load_evidence(path: Option<&Path>, net: &BayesNet) -> Result<Evidence> {
    let Some(path) = path else {
        return Ok(Evidence::new());
    };
    let text = read(path)?;
    if text.trim().is_empty() {
        return Ok(Evidence::new());
    }
    parse_evidence(net, &text).with_context(|| format!("parsing evidence {}", path.display()))
}

fn evidence_label(net: &BayesNet, e: &Evidence) -> String {
    if e.is_empty() {
        return "(none)".into();
    }
    e.iter()
        .map(|(&j, &v)| format!("{}={}", net.name(j), v as u8))
        .collect::<Vec<_>>()
        .join(", ")
}

fn write_or_print(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(bytes)?),
    }
}

fn cmd_fit(args: FitArgs, execution: Execution) -> Result<()> {
    let net = load_net(&args.net)?;
    let settings = FitSettings {
        components: args.components,
        seed: args.seed,
        restarts: args.restarts,
        tol: args.tol,
        max_iters: args.max_iters,
        samples: args.samples,
        execution,
    };
    let start = Instant::now();
    let outcome = run_fit(&net, args.method, &settings)?;
    let elapsed = start.elapsed().as_secs_f64();
    let report = FitReport::new(&net, args.method, &settings, &outcome, elapsed)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join("report.json"), report.to_json())?;
    fs::write(args.out.join("mixture.json"), outcome.model.to_json())?;
    let mut csv = Vec::new();
    outcome.model.sorted_by_weight().write_scenario_csv(&mut csv)?;
    fs::write(args.out.join("scenarios.csv"), csv)?;

    if let Some(d) = &report.distances {
        println!("{}\n{}", DistanceReport::CSV_HEADER, d.csv_row());
    }
    println!(
        "{} components, objective {:.4e}, {:.2}s, written to {}",
        outcome.model.num_components(),
        outcome.objective(),
        elapsed,
        args.out.display()
    );
    Ok(())
}

fn cmd_query(net: &Path, mixture: &Path, evidence: Option<&Path>, compare_exact: bool) -> Result<()> {
    let net = load_net(net)?;
    let model = load_mixture(mixture, &net)?;
    let e = load_evidence(evidence, &net)?;
    let view = model.condition(&e)?;
    println!("evidence: {}", evidence_label(&net, &e));
    println!("\ncomponent,weight,reweighted");
    for (i, (w, r)) in model.weights().iter().zip(&view.reweighted_weights).enumerate() {
        println!("{},{w:.4},{r:.4}", i + 1);
    }
    let exact = if compare_exact {
        Some(posterior_marginals(&net, &e)?)
    } else {
        None
    };
    match &exact {
        Some(_) => println!("\nvariable,mixture,exact,abs_deviation"),
        None => println!("\nvariable,mixture"),
    }
    for (j, p) in view.unknowns() {
        match &exact {
            Some(x) => println!("{},{p:.4},{:.4},{:.4}", net.name(j), x[j], (p - x[j]).abs()),
            None => println!("{},{p:.4}", net.name(j)),
        }
    }
    Ok(())
}

fn cmd_report(net: &Path, mixture: &Path) -> Result<()> {
    let net = load_net(net)?;
    let model = load_mixture(mixture, &net)?;
    model.sorted_by_weight().write_scenario_csv(std::io::stdout())?;
    let d = distance_report(&net, &model, "mixture")?;
    println!("\nkl {:.4}\nbkl {:.4}\nse {:.4e}\nese {:.4e}", d.kl, d.bkl, d.se, d.ese);
    Ok(())
}

fn cmd_sample(net: &Path, count: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let net = load_net(net)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(net.names())?;
    for x in net.sample_many(count, seed) {
        w.write_record(x.values().iter().map(|&v| if v { "1" } else { "0" }))?;
    }
    let bytes = w.into_inner().context("flushing samples")?;
    write_or_print(out, &bytes)
}

fn run(cli: Cli) -> Result<()> {
    let execution = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Fit(args) => cmd_fit(args, execution),
        Command::Query {
            net,
            mixture,
            evidence,
            compare_exact,
        } => cmd_query(&net, &mixture, evidence.as_deref(), compare_exact),
        Command::Report { net, mixture } => cmd_report(&net, &mixture),
        Command::Sample {
            net,
            count,
            seed,
            out,
        } => cmd_sample(&net, count, seed, out.as_deref()),
        Command::Distance { net, mixture, label } => {
            let net = load_net(&net)?;
            let model = load_mixture(&mixture, &net)?;
            let d = distance_report(&net, &model, &label)?;
            println!("{}\n{}", DistanceReport::CSV_HEADER, d.csv_row());
            Ok(())
        }
        Command::Curve {
            net,
            method,
            max_components,
            seed,
            restarts,
            out,
        } => {
            let net = load_net(&net)?;
            let settings = FitSettings {
                seed,
                restarts,
                execution,
                ..FitSettings::default()
            };
            let curve = kl_vs_components_curve(&net, method, 1..=max_components, &settings)?;
            let mut buf = Vec::new();
            write_curve_csv(&mut buf, &curve)?;
            write_or_print(out.as_deref(), &buf)
        }
        Command::Reproduce {
            out_dir,
            seed,
            restarts,
            meanfield_restarts,
        } => {
            let cfg = StudyConfig {
                seed,
                restarts,
                meanfield_restarts,
                execution,
                ..StudyConfig::default()
            };
            let study = Study::run(&bnmix::fixtures::chest_clinic(), &cfg)?;
            let files = study.write(&out_dir)?;
            for c in study.checks() {
                println!("[{}] {}: {}", if c.pass { "pass" } else { "FAIL" }, c.name, c.detail);
            }
            println!("{} files written to {}", files.len(), out_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
