use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fakeprior::quantile::io::{from_json, from_table};
use fakeprior::report::{run_scenario, run_scenarios, write_dist, write_table, ScenarioConfig, ScenarioOutcome, SCENARIOS};
use fakeprior::{ClosedForm, QuantileDistribution, QuantileGrid};

#[derive(Parser)]
#[command(name = "fakeprior", version, about = "Auctions with fake reported priors: scenarios and tables")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Opts {
    /// Grid size; must be 16k + 1.
    #[arg(long, global = true)]
    n_points: Option<usize>,
    #[arg(long, global = true)]
    mc_samples: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory (default: $FAKEPRIOR_OUT, then ./fakeprior-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run scenarios concurrently.
    #[arg(long, global = true)]
    parallel: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate v, R, r and the ironed R of one distribution.
    ///
    /// `dist uniform 0 1`, `dist affine 0.5 -0.25`, `dist equal-revenue 1`,
    /// `dist constant 0.3`, `dist file table.tsv` or `dist json d.json`.
    Dist {
        form: String,
        #[arg(allow_negative_numbers = true)]
        params: Vec<String>,
    },
    /// Run one named scenario.
    Scenario { name: String },
    /// Run several scenarios (`all` for every one) and print the reproduction table.
    Table {
        #[arg(required = true)]
        names: Vec<String>,
    },
}

fn config(opts: &Opts) -> fakeprior::Result<ScenarioConfig> {
    let mut cfg = match &opts.config {
        Some(p) => ScenarioConfig::from_file(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(v) = opts.n_points {
        cfg.n_points = v;
    }
    if let Some(v) = opts.mc_samples {
        cfg.mc_samples = v;
    }
    if let Some(v) = opts.seed {
        cfg.seed = v;
    }
    if let Some(v) = opts.tol {
        cfg.tol = v;
    }
    if opts.out.is_some() {
        cfg.out = opts.out.clone();
    }
    cfg.parallel |= opts.parallel;
    cfg.validate()?;
    Ok(cfg)
}

fn load_dist(form: &str, params: &[String], cfg: &ScenarioConfig) -> fakeprior::Result<QuantileDistribution> {
    match form {
        "file" | "json" => {
            let [path] = params else {
                return Err(fakeprior::Error::InvalidParameters(format!("{form} takes one path")));
            };
            let text = fs::read_to_string(path)?;
            if form == "file" {
                from_table(&text)
            } else {
                from_json(&text)
            }
        }
        _ => {
            let nums = params
                .iter()
                .map(|p| p.parse::<f64>().map_err(|e| fakeprior::Error::Parse(format!("'{p}': {e}"))))
                .collect::<fakeprior::Result<Vec<_>>>()?;
            QuantileDistribution::from_closed_form(ClosedForm::parse(form, &nums)?, QuantileGrid::new(cfg.n_points)?)
        }
    }
}

fn print_checks(o: &ScenarioOutcome) {
    println!("{}", o.scenario);
    for c in &o.checks {
        println!(
            "  {:<48} ref {:>14.9} got {:>14.9} err {:>10.3e}  {}",
            c.name,
            c.reference,
            c.computed,
            c.error,
            if c.passed { "pass" } else { "FAIL" }
        );
    }
}

fn report_failures(outcomes: &[ScenarioOutcome]) -> ExitCode {
    let mut ok = true;
    for o in outcomes {
        for c in o.failures() {
            eprintln!("assertion failed: {}/{}", o.scenario, c.name);
            ok = false;
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> fakeprior::Result<ExitCode> {
    let cfg = config(&cli.opts)?;
    let out = cfg.out_dir();
    match cli.cmd {
        Cmd::Dist { form, params } => {
            let d = load_dist(&form, &params, &cfg)?;
            let s = write_dist(&d, &out.join("dist"))?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Scenario { name } => {
            let o = run_scenario(&name, &cfg)?;
            o.write(&out.join(&o.scenario))?;
            print_checks(&o);
            Ok(report_failures(std::slice::from_ref(&o)))
        }
        Cmd::Table { names } => {
            let names: Vec<String> = if names.iter().any(|n| n == "all") {
                SCENARIOS.iter().map(|s| s.to_string()).collect()
            } else {
                names
            };
            let outcomes = run_scenarios(&names, &cfg)?;
            let rows = write_table(&outcomes, &out)?;
            println!("{:<22} {:>14} {:>14} {:>11}  result", "scenario", "reference", "computed", "|error|");
            for r in &rows {
                println!(
                    "{:<22} {:>14.9} {:>14.9} {:>11.3e}  {}",
                    r.scenario,
                    r.reference,
                    r.computed,
                    r.error,
                    if r.passed { "pass" } else { "FAIL" }
                );
            }
            Ok(report_failures(&outcomes))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
