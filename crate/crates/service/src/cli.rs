//! The `flexnet` command line.
//!
//! Every command loads a scenario (the bundled testbed by default), records
//! it in the session store, prints its result, and saves the result as JSON
//! next to the scenario version it was computed from.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use flexnet_core::allocator::Objective;
use flexnet_core::hardware::format_loss_table;
use flexnet_core::ratemodel::Allocation;
use flexnet_core::tomography::format_scan;
use serde::Serialize;

use crate::ops::{self, OpError, PlanRequest, ScanRequest};
use crate::scenario::{load_scenario, paper_default, PlanPolicy, Scenario, ScenarioError};
use crate::store::{SessionStore, Snapshot, StoreError};

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    /// Internal fault: the store or the server failed.
    pub const INTERNAL: u8 = 1;
    /// Malformed command line (reported by the argument parser).
    pub const USAGE: u8 = 2;
    /// Unreadable or invalid scenario, or a request it cannot satisfy.
    pub const INVALID: u8 = 3;
    /// The planner ran but no plan meets the policy or the targets.
    pub const INFEASIBLE: u8 = 4;
}

#[derive(Debug, Parser)]
#[command(name = "flexnet", version, about = "Plan and simulate flex-grid entanglement distribution")]
pub struct Cli {
    /// Scenario file (TOML). The bundled four-user testbed when omitted.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Session store directory.
    #[arg(long, global = true, default_value = ".flexnet")]
    pub store: PathBuf,
    /// Print JSON instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Alphabetical,
    FixedGrid,
    FullFlex,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ObjectiveArg {
    Equalize,
    MaxMin,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assign channels to links.
    Plan {
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        /// Weighted and premium objectives are read from the scenario.
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        #[arg(long, conflicts_with = "no_drop")]
        allow_drop: bool,
        #[arg(long)]
        no_drop: bool,
        #[arg(long)]
        group_size: Option<usize>,
    },
    /// Analytic rates of the stored allocation.
    Predict {
        /// Predict with nothing routed.
        #[arg(long)]
        empty: bool,
    },
    /// Monte Carlo time tags of the stored allocation, counted into
    /// coincidence histograms.
    Simulate {
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Switch versus DWDM-tree loss for a range of user counts.
    CompareLoss {
        #[arg(long, default_value = "2..16")]
        users: String,
        #[arg(long)]
        csv: bool,
    },
    /// Synthetic tomography and fidelity estimates per channel.
    Tomo {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        channels: Option<Vec<usize>>,
    },
    /// Start the JSON API on the session store.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<OpError> for Failure {
    fn from(e: OpError) -> Self {
        match e {
            OpError::Invalid(_) => Failure::new(exit::INVALID, e.to_string()),
            OpError::Infeasible(_) => Failure::new(exit::INFEASIBLE, e.to_string()),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let code = match e {
            StoreError::Invalid(_) => exit::INVALID,
            _ => exit::INTERNAL,
        };
        Failure::new(code, e.to_string())
    }
}

pub fn run(cli: Cli) -> u8 {
    match execute(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load(cli: &Cli) -> Result<Scenario, Failure> {
    let Some(path) = &cli.scenario else {
        return Ok(paper_default());
    };
    load_scenario(path).map_err(|e| match e {
        ScenarioError::Invalid(fields) => {
            let lines: Vec<String> = fields.iter().map(|f| format!("  {f}")).collect();
            Failure::new(
                exit::INVALID,
                format!("{} is invalid:\n{}", path.display(), lines.join("\n")),
            )
        }
        other => Failure::new(exit::INVALID, format!("{}: {other}", path.display())),
    })
}

struct Output<'a> {
    store: &'a SessionStore,
    snap: &'a Snapshot,
    json: bool,
}

impl Output<'_> {
    fn emit<T: Serialize>(&self, kind: &str, value: &T, text: impl FnOnce() -> String) -> Result<(), Failure> {
        if self.json {
            let body = serde_json::to_string_pretty(value).map_err(|e| Failure::new(exit::INTERNAL, e.to_string()))?;
            println!("{body}");
        } else {
            print!("{}", text());
        }
        let path = self
            .store
            .save_artifact(&self.snap.scenario.name, kind, self.snap.version, value)?;
        eprintln!("saved {}", path.display());
        Ok(())
    }
}

fn execute(cli: Cli) -> Result<u8, Failure> {
    let scenario = load(&cli)?;
    let store = SessionStore::open(&cli.store)?;
    let snap = store.import(&scenario)?;
    let scenario = &snap.scenario;
    let out = Output {
        store: &store,
        snap: &snap,
        json: cli.json,
    };
    match cli.command {
        Command::Plan {
            policy,
            objective,
            allow_drop,
            no_drop,
            group_size,
        } => {
            let request = PlanRequest {
                policy: policy.map(|p| match p {
                    PolicyArg::Alphabetical => PlanPolicy::Alphabetical,
                    PolicyArg::FixedGrid => PlanPolicy::FixedGrid,
                    PolicyArg::FullFlex => PlanPolicy::FullFlex,
                }),
                objective: objective.map(|o| match o {
                    ObjectiveArg::Equalize => Objective::Equalize,
                    ObjectiveArg::MaxMin => Objective::MaxMin,
                }),
                allow_drop: match (allow_drop, no_drop) {
                    (true, _) => Some(true),
                    (_, true) => Some(false),
                    _ => None,
                },
                drop_fraction: None,
                group_size,
            };
            let outcome = ops::plan(scenario, &request)?;
            out.emit("plan", &outcome, || format_plan(&outcome))?;
            if !outcome.feasible {
                return Err(Failure::new(
                    exit::INFEASIBLE,
                    format!("no feasible plan: {}", outcome.plan.diagnostics.join("; ")),
                ));
            }
        }
        Command::Predict { empty } => {
            let allocation = if empty { Allocation::new() } else { scenario.allocation() };
            let report = ops::predict(scenario, &allocation)?;
            out.emit("predict", &report, || ops::format_report(&report))?;
        }
        Command::Simulate { seed, duration } => {
            let seed = seed.unwrap_or(scenario.seeds.simulate);
            let duration = duration.unwrap_or(scenario.simulation.duration_s);
            let result = ops::simulate(scenario, &scenario.allocation(), seed, duration)?;
            out.emit("simulate", &result, || ops::format_simulation(&result))?;
        }
        Command::CompareLoss { users, csv } => {
            let table = ops::compare_loss(scenario, ops::parse_user_range(&users)?)?;
            out.emit("loss-table", &table, || {
                let mut text = format_loss_table(&table.rows, if csv { ',' } else { '\t' });
                if !csv {
                    text.push_str(&format!(
                        "\nworst-case DWDM loss exceeds the switch from {} users\n",
                        table.crossover_users
                    ));
                }
                text
            })?;
        }
        Command::Tomo { seed, channels } => {
            let seed = seed.unwrap_or(scenario.seeds.tomography);
            let rows = ops::fidelity_scan(scenario, &ScanRequest { channels, sampler: None }, seed)?;
            out.emit("fidelity-scan", &rows, || format_scan(&rows))?;
        }
        Command::Serve { addr } => {
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new(exit::INTERNAL, e.to_string()))?;
            runtime
                .block_on(crate::api::serve(Arc::new(store), &addr))
                .map_err(|e| Failure::new(exit::INTERNAL, format!("server on {addr}: {e}")))?;
        }
    }
    Ok(exit::OK)
}

fn format_plan(outcome: &ops::PlanOutcome) -> String {
    let plan = &outcome.plan;
    let policy = match outcome.policy {
        PlanPolicy::Alphabetical => "alphabetical",
        PlanPolicy::FixedGrid => "fixed-grid",
        PlanPolicy::FullFlex => "full-flex",
    };
    let mut text = format!("policy {policy}, objective {}\n", plan.objective.name());
    let active: Vec<String> = plan.active_links.iter().map(|l| l.to_string()).collect();
    text.push_str(&format!("active links: {}\n", active.join(", ")));
    if !plan.dropped_links.is_empty() {
        let dropped: Vec<String> = plan.dropped_links.iter().map(|l| l.to_string()).collect();
        text.push_str(&format!("dropped links: {}\n", dropped.join(", ")));
    }
    if let Some(v) = plan.objective_value {
        text.push_str(&format!("objective value {v:.4}\n"));
    }
    for d in &plan.diagnostics {
        text.push_str(&format!("note: {d}\n"));
    }
    text.push('\n');
    text.push_str(&ops::format_report(&plan.predicted));
    text
}
