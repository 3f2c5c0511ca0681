use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context as _, Result};
use clap::{Parser, Subcommand, ValueEnum};
use infoflow::anonbench::{dp_release, linkage_attack, RoleSidecar, Table};
use infoflow::causalnet::{
    ballot_net, example_graph_with_control, leakage_profile, twins_net, BayesNet, NodeLeakage,
};
use infoflow::mechanisms::{
    bound_sweep, check_mi_bound, compose, mi_without_dp_example, randomized_response,
    realized_epsilon, Channel, EpsReport,
};
use infoflow::society::{
    run, write_events_csv, write_events_jsonl, write_ledger_csv, ScenarioConfig,
};
use infoflow::{BoundCertificate, Dist, Error, Extended, TOLERANCE};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "infoflow",
    version,
    about = "Information-flow measurement toolkit"
)]
struct Cli {
    /// RNG seed; overrides any seed in an input file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Numerical tolerance for bound checks.
    #[arg(long, global = true, default_value_t = TOLERANCE)]
    tolerance: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file, or output directory for `simulate`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Ballot,
    Twins,
    Graph,
}

#[derive(Subcommand)]
enum Command {
    /// Certify I(X;A(X)) <= eps*log2(e) for one channel and prior.
    VerifyBound {
        /// Randomized response parameters, e.g. `--rr k=2 eps=1.0986`.
        #[arg(long, num_args = 1..=2, conflicts_with_all = ["channel", "example"])]
        rr: Vec<String>,
        /// Channel JSON file.
        #[arg(long, conflicts_with = "example")]
        channel: Option<PathBuf>,
        /// Use the built-in channel that leaks little but is not DP.
        #[arg(long)]
        example: bool,
        /// `uniform` or a distribution JSON file.
        #[arg(long, default_value = "uniform")]
        prior: String,
    },
    /// Check the bound on many random channels and priors.
    Sweep {
        #[arg(long, default_value_t = 1000)]
        cases: u64,
        #[arg(long, default_value_t = 6)]
        max_dim: usize,
    },
    /// Per-node leakage of a message node in a Bayesian network.
    Leakage {
        /// Network JSON file.
        #[arg(
            long,
            conflicts_with = "scenario",
            required_unless_present = "scenario"
        )]
        net: Option<PathBuf>,
        /// Built-in network.
        #[arg(long, value_enum)]
        scenario: Option<Scenario>,
        /// Number of voters for the ballot scenario.
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Identical-twin prior for the twins scenario.
        #[arg(long, default_value_t = 0.5)]
        q: f64,
        /// Message node; each scenario has a default.
        #[arg(long)]
        message: Option<String>,
        /// Observed message state; defaults to the most likely one.
        #[arg(long)]
        observed: Option<String>,
    },
    /// Run an agent-society scenario and write its logs.
    Simulate {
        /// Scenario JSON file.
        scenario: PathBuf,
    },
    /// Linkage attack on a release, with an optional randomized-response release.
    Anon {
        /// Release CSV; roles are read from `<stem>.roles.json` beside it.
        #[arg(long)]
        release: PathBuf,
        /// Auxiliary CSV for the linkage attack.
        #[arg(long)]
        aux: Option<PathBuf>,
        /// Release `--sensitive` through randomized response, e.g. `--dp eps=1.0986`.
        #[arg(long, requires = "sensitive")]
        dp: Option<String>,
        #[arg(long)]
        sensitive: Option<String>,
    },
    /// Product of several channels and its realized eps.
    Compose {
        /// Channel JSON files or `rr:k=2,eps=1.0986`; at least two.
        #[arg(num_args = 2.., required = true)]
        parts: Vec<String>,
    },
}

#[derive(Serialize)]
struct Composed {
    channel: Channel,
    #[serde(flatten)]
    eps: EpsReport,
}

/// A leakage profile with nodes in descending order of mutual information.
#[derive(Serialize)]
struct SortedProfile<'a> {
    message_node: &'a str,
    message_entropy_sh: f64,
    observed: &'a str,
    nodes: &'a [&'a NodeLeakage],
}

#[derive(Serialize)]
struct AnonOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    attack: Option<infoflow::anonbench::AnonReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dp: Option<BoundCertificate>,
}

#[derive(Serialize)]
struct SimulationSummary {
    seed: u64,
    ticks: u64,
    events: usize,
    budget_stops: usize,
    contexts: usize,
    induced: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let capacity = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Capacity { .. })));
            ExitCode::from(if capacity { 3 } else { 2 })
        }
    }
}

/// Returns `Ok(false)` when a checked bound is violated.
fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::VerifyBound {
            rr,
            channel,
            example,
            prior,
        } => {
            let c = if *example {
                mi_without_dp_example().0
            } else if let Some(path) = channel {
                read_json(path)?
            } else if !rr.is_empty() {
                rr_channel(&rr.join(","))?
            } else {
                bail!("one of --rr, --channel or --example is required");
            };
            let prior = if prior == "uniform" {
                c.uniform_prior()
            } else {
                read_json::<Dist>(Path::new(prior))?
            };
            let mut cert = check_mi_bound(&c, &prior)?;
            cert.holds = Extended::Finite(cert.mi_sh).le_within(cert.bound_sh, cli.tolerance);
            let holds = cert.holds;
            match cli.format {
                Format::Json => emit(cli, &json(&cert)?)?,
                Format::Csv => {
                    let w = cert.witness.as_ref();
                    let field = |f: fn(&infoflow::mechanisms::Witness) -> &str| {
                        w.map(f).unwrap_or("").to_string()
                    };
                    emit_csv(
                        cli,
                        &["eps", "mi_sh", "bound_sh", "holds", "x", "x_prime", "y"],
                        vec![vec![
                            cert.eps.to_string(),
                            cert.mi_sh.to_string(),
                            cert.bound_sh.to_string(),
                            cert.holds.to_string(),
                            field(|w| &w.x),
                            field(|w| &w.x_prime),
                            field(|w| &w.y),
                        ]],
                    )?
                }
            }
            Ok(holds)
        }
        Command::Sweep { cases, max_dim } => {
            if *max_dim < 2 {
                bail!("--max-dim must be at least 2");
            }
            let summary = bound_sweep(cli.seed.unwrap_or(0), *cases, *max_dim);
            match cli.format {
                Format::Json => emit(cli, &json(&summary)?)?,
                Format::Csv => emit_csv(
                    cli,
                    &["case", "inputs", "outputs", "eps", "mi_sh", "bound_sh"],
                    summary
                        .violations
                        .iter()
                        .map(|v| {
                            vec![
                                v.case.to_string(),
                                v.inputs.to_string(),
                                v.outputs.to_string(),
                                v.eps.to_string(),
                                v.mi_sh.to_string(),
                                v.bound_sh.to_string(),
                            ]
                        })
                        .collect(),
                )?,
            }
            Ok(summary.violations.is_empty())
        }
        Command::Leakage {
            net,
            scenario,
            n,
            q,
            message,
            observed,
        } => {
            let (net, default_message): (BayesNet, &str) = match (net, scenario) {
                (Some(path), _) => (read_json(path)?, ""),
                (None, Some(Scenario::Ballot)) => (ballot_net(*n)?, "T"),
                (None, Some(Scenario::Twins)) => (twins_net(*q)?, "S1"),
                (None, Some(Scenario::Graph)) => {
                    (example_graph_with_control(cli.seed.unwrap_or(42)), "M")
                }
                (None, None) => bail!("one of --net or --scenario is required"),
            };
            let message = match message.as_deref() {
                Some(m) => m,
                None if !default_message.is_empty() => default_message,
                None => bail!("--message is required with --net"),
            };
            let profile = leakage_profile(&net, message, observed.as_deref())?;
            let sorted = profile.sorted_by_mi();
            match cli.format {
                Format::Json => emit(
                    cli,
                    &json(&SortedProfile {
                        message_node: &profile.message_node,
                        message_entropy_sh: profile.message_entropy_sh,
                        observed: &profile.observed,
                        nodes: &sorted,
                    })?,
                )?,
                Format::Csv => emit_csv(
                    cli,
                    &[
                        "node",
                        "mi_sh",
                        "entropy_sh",
                        "posterior_entropy_sh",
                        "entropy_drop_sh",
                    ],
                    sorted
                        .iter()
                        .map(|l| {
                            vec![
                                l.node.clone(),
                                l.mi_sh.to_string(),
                                l.entropy_sh.to_string(),
                                l.posterior_entropy_sh.to_string(),
                                l.entropy_drop_sh.to_string(),
                            ]
                        })
                        .collect(),
                )?,
            }
            Ok(true)
        }
        Command::Simulate { scenario } => {
            let mut cfg: ScenarioConfig = read_json(scenario)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let out = run(&cfg)?;
            if let Some(dir) = &cli.output {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let mut jsonl = Vec::new();
                write_events_jsonl(&mut jsonl, &out.events)?;
                write_file(&dir.join("events.jsonl"), &jsonl)?;
                let mut csv = Vec::new();
                write_events_csv(&mut csv, &out.events)?;
                write_file(&dir.join("events.csv"), &csv)?;
                let mut ledger = Vec::new();
                write_ledger_csv(&mut ledger, &out.ledger)?;
                write_file(&dir.join("ledger.csv"), &ledger)?;
                write_file(&dir.join("contexts.json"), json(&out.contexts)?.as_bytes())?;
                write_file(&dir.join("induced.json"), json(&out.induced)?.as_bytes())?;
                write_file(
                    &dir.join("budget_stops.json"),
                    json(&out.budget_stops)?.as_bytes(),
                )?;
                let summary = SimulationSummary {
                    seed: out.seed,
                    ticks: out.ticks,
                    events: out.events.len(),
                    budget_stops: out.budget_stops.len(),
                    contexts: out.contexts.len(),
                    induced: out.induced.len(),
                };
                println!("{}", json(&summary)?);
            } else {
                match cli.format {
                    Format::Json => println!("{}", json(&out)?),
                    Format::Csv => write_events_csv(std::io::stdout().lock(), &out.events)?,
                }
            }
            Ok(true)
        }
        Command::Anon {
            release,
            aux,
            dp,
            sensitive,
        } => {
            let table = read_table(release)?;
            let attack = match aux {
                Some(path) => Some(linkage_attack(&table, &read_table(path)?)?),
                None => None,
            };
            let (released, cert) = match (dp, sensitive) {
                (Some(dp), Some(col)) => {
                    let params = parse_params(dp)?;
                    let eps = param(&params, "eps")?;
                    let (t, cert) = dp_release(&table, col, eps, cli.seed.unwrap_or(0))?;
                    (Some(t), Some(cert))
                }
                _ => (None, None),
            };
            if attack.is_none() && cert.is_none() {
                bail!("nothing to do: pass --aux and/or --dp with --sensitive");
            }
            match cli.format {
                Format::Json => emit(cli, &json(&AnonOutput { attack, dp: cert })?)?,
                Format::Csv => {
                    let Some(t) = released else {
                        bail!("--format csv needs --dp")
                    };
                    emit(cli, t.to_csv()?.trim_end())?
                }
            }
            Ok(true)
        }
        Command::Compose { parts } => {
            let mut channels = parts.iter().map(|p| part_channel(p));
            let first = channels.next().expect("clap requires two parts")?;
            let product = channels.try_fold(first, |acc, c| {
                compose(&acc, &c?).map_err(anyhow::Error::from)
            })?;
            let eps = realized_epsilon(&product);
            match cli.format {
                Format::Json => emit(
                    cli,
                    &json(&Composed {
                        channel: product,
                        eps,
                    })?,
                )?,
                Format::Csv => {
                    let mut header = vec!["input"];
                    header.extend(product.outputs().iter().map(String::as_str));
                    let rows = product
                        .inputs()
                        .iter()
                        .zip(product.rows())
                        .map(|(x, r)| {
                            std::iter::once(x.clone())
                                .chain(r.iter().map(f64::to_string))
                                .collect()
                        })
                        .collect();
                    emit_csv(cli, &header, rows)?
                }
            }
            Ok(true)
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.output {
        Some(path) => write_file(path, format!("{text}\n").as_bytes()),
        None => {
            writeln!(std::io::stdout().lock(), "{text}")?;
            Ok(())
        }
    }
}

fn emit_csv(cli: &Cli, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("{e}"))?;
    emit(cli, String::from_utf8(bytes)?.trim_end())
}

fn read_table(path: &Path) -> Result<Table> {
    let stem = path
        .file_stem()
        .ok_or_else(|| anyhow!("{} has no file name", path.display()))?
        .to_string_lossy();
    let sidecar = path.with_file_name(format!("{stem}.roles.json"));
    let roles: RoleSidecar = read_json(&sidecar)?;
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    Table::from_csv(file, &roles).with_context(|| format!("loading {}", path.display()))
}

fn parse_params(text: &str) -> Result<BTreeMap<String, String>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow!("expected key=value, got `{kv}`"))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn param<T: std::str::FromStr>(params: &BTreeMap<String, String>, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = params.get(key).ok_or_else(|| anyhow!("missing `{key}`"))?;
    raw.parse()
        .map_err(|e| anyhow!("invalid `{key}={raw}`: {e}"))
}

fn rr_channel(text: &str) -> Result<Channel> {
    let params = parse_params(text)?;
    if let Some(k) = params.keys().find(|k| *k != "k" && *k != "eps") {
        bail!("unknown randomized-response parameter `{k}`");
    }
    Ok(randomized_response(
        param(&params, "k")?,
        param(&params, "eps")?,
    )?)
}

fn part_channel(part: &str) -> Result<Channel> {
    match part.strip_prefix("rr:") {
        Some(rest) => rr_channel(rest),
        None => read_json(Path::new(part)),
    }
}
