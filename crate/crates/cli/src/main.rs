//! Command-line front end: reproducible simulation runs, game analysis and
//! parameter calculation.
//!
//! Exit codes: 0 success, 2 validation or domain error, 3 runtime failure,
//! 4 enumeration-size refusal.

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest as _, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;
use watchtower_core::engine::run_simulation;
use watchtower_core::games::{
    check_conditions, find_pure_nash, is_dominant, pareto_check, Action, DcMode, GameError,
    GameKind, GameSpec,
};
use watchtower_core::games::solve::{find_pure_nash_dc, pareto_efficient_flags};
use watchtower_core::params::{compute_bounds, secured_value_estimate};
use watchtower_core::scenario::{parse_scenario, render_scenario, Scenario};

const EXIT_OK: i32 = 0;
const EXIT_VALIDATION: i32 = 2;
const EXIT_RUNTIME: i32 = 3;
const EXIT_TOO_LARGE: i32 = 4;

#[derive(Parser)]
#[command(name = "watchtower-sim", version, about = "Watchtower network simulator and incentive analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GameArg {
    /// Diligent vs lazy, no agreements.
    Pod,
    /// Obey vs betray inside a formed lazy collusion.
    Lc,
    /// Leader-based diligent collusion.
    Dc,
    /// The joint game with lazy collusion available.
    PodCollusion,
    /// The joint game with collusion and the report action.
    PodCollusionWb,
}

impl From<GameArg> for GameKind {
    fn from(value: GameArg) -> Self {
        match value {
            GameArg::Pod => GameKind::Pod,
            GameArg::Lc => GameKind::LazyCollusion,
            GameArg::Dc => GameKind::DiligentCollusion,
            GameArg::PodCollusion => GameKind::PodWithCollusion,
            GameArg::PodCollusionWb => GameKind::PodWithCollusionAndWhistleblower,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DcModeArg {
    /// Evaluate the diligent-collusion payoff table exactly as written.
    TableLiteral,
    /// Slash cheating colluders when independents exist.
    ProofNarrative,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario end to end; writes the event log, summary report and
    /// run manifest into the output directory.
    Simulate {
        /// Scenario file (searched under $WATCHTOWER_SCENARIO_PATH when not
        /// found as given).
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory; created if missing. Nothing is written
        /// elsewhere.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate incentive conditions, dominance, pure equilibria and
    /// Pareto efficiency for one game induced by a scenario.
    Analyze {
        #[arg(long)]
        scenario: PathBuf,
        /// Which game to analyze.
        #[arg(long, value_enum)]
        game: GameArg,
        #[arg(long)]
        out: PathBuf,
        /// Reading of the diligent-collusion cheat column.
        #[arg(long, value_enum, default_value = "table-literal")]
        dc_mode: DcModeArg,
    },
    /// Compute the incentive-parameter bounds for an equal-stake pool and,
    /// when the staking-economics flags are given, the secured-value
    /// estimate.
    Params {
        /// Number of watchtowers.
        #[arg(long)]
        n: usize,
        /// Probability that a party holding all stake wins the bounty.
        #[arg(long)]
        theta: f64,
        /// Cost of executing one batch (c_T).
        #[arg(long, default_value_t = 1.0)]
        cost_per_batch: f64,
        /// Cost of resolving a dispute (c_V).
        #[arg(long)]
        dispute_cost: f64,
        /// Dispute reward used in the stake and deposit bounds; defaults to
        /// its own bound c_T.
        #[arg(long)]
        dispute_reward: Option<f64>,
        /// Bounty reward used in the deposit and whistleblower bounds;
        /// defaults to its own bound c_T / phi(alpha_0).
        #[arg(long)]
        bounty_reward: Option<f64>,
        /// L1 fee per transaction; enables the secured-value estimate.
        #[arg(long)]
        fee_per_tx: Option<f64>,
        /// Transactions per batch.
        #[arg(long, default_value_t = 200)]
        batch_size: u64,
        /// Bounty margin over cost, in units of c_T.
        #[arg(long, default_value_t = 4.0)]
        rb_margin: f64,
        /// Bounty probability used in the estimate.
        #[arg(long, default_value_t = 0.2)]
        phi: f64,
        /// Batches committed per year.
        #[arg(long, default_value_t = 700_000.0)]
        batches_per_year: f64,
        /// Competing annual yield.
        #[arg(long, default_value_t = 0.06)]
        apy: f64,
        /// Off-chain execution cost per batch relative to the L1
        /// per-transaction fee.
        #[arg(long, default_value_t = 0.002)]
        exec_cost_scale: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Simulate { scenario, out } => cmd_simulate(&scenario, &out),
        Command::Analyze {
            scenario,
            game,
            out,
            dc_mode,
        } => cmd_analyze(&scenario, game, &out, dc_mode),
        Command::Params {
            n,
            theta,
            cost_per_batch,
            dispute_cost,
            dispute_reward,
            bounty_reward,
            fee_per_tx,
            batch_size,
            rb_margin,
            phi,
            batches_per_year,
            apy,
            exec_cost_scale,
        } => cmd_params(
            n,
            theta,
            cost_per_batch,
            dispute_cost,
            dispute_reward,
            bounty_reward,
            fee_per_tx,
            batch_size,
            rb_margin,
            phi,
            batches_per_year,
            apy,
            exec_cost_scale,
        ),
    };
    std::process::exit(code);
}

/// Relative scenario paths fall back to $WATCHTOWER_SCENARIO_PATH.
fn resolve_scenario_path(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("WATCHTOWER_SCENARIO_PATH") {
        Some(dir) => {
            let candidate = PathBuf::from(dir).join(path);
            if candidate.exists() {
                candidate
            } else {
                path.to_path_buf()
            }
        }
        None => path.to_path_buf(),
    }
}

fn load_scenario(path: &Path) -> Result<(Scenario, String), i32> {
    let resolved = resolve_scenario_path(path);
    let text = match std::fs::read_to_string(&resolved) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", resolved.display());
            return Err(EXIT_RUNTIME);
        }
    };
    match parse_scenario(&text) {
        Ok(scenario) => Ok((scenario, text)),
        Err(errors) => {
            eprintln!("error: {errors}");
            Err(EXIT_VALIDATION)
        }
    }
}

struct RunManifest {
    command: String,
    scenario_path: String,
    scenario_sha256: String,
    seed: Option<u64>,
    artifacts: Vec<String>,
    duration_ms: u128,
}

impl RunManifest {
    fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("command = {}\n", self.command));
        out.push_str(&format!("scenario = {}\n", self.scenario_path));
        out.push_str(&format!("scenario_sha256 = {}\n", self.scenario_sha256));
        if let Some(seed) = self.seed {
            out.push_str(&format!("seed = {seed}\n"));
        }
        out.push_str(&format!("tool_version = {}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("duration_ms = {}\n", self.duration_ms));
        for a in &self.artifacts {
            out.push_str(&format!("artifact = {a}\n"));
        }
        out
    }
}

/// Hash of the canonical rendering, so semantically equal scenario files
/// share a hash.
fn scenario_hash(scenario: &Scenario) -> String {
    let canonical = render_scenario(scenario);
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    hex::encode(h.finalize())
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<(), i32> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        EXIT_RUNTIME
    })
}

fn cmd_simulate(scenario_path: &Path, out_dir: &Path) -> i32 {
    let start = Instant::now();
    let (scenario, _) = match load_scenario(scenario_path) {
        Ok(v) => v,
        Err(code) => return code,
    };
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_RUNTIME;
    }
    let run = match run_simulation(&scenario) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("error: simulation failed: {e}");
            return EXIT_RUNTIME;
        }
    };
    let summary_json = match serde_json::to_string_pretty(&run.report) {
        Ok(json) => json,
        Err(e) => {
            eprintln!("error: cannot serialize report: {e}");
            return EXIT_RUNTIME;
        }
    };
    if write_artifact(out_dir, "events.log", &run.log.render()).is_err()
        || write_artifact(out_dir, "summary.txt", &run.report.render()).is_err()
        || write_artifact(out_dir, "summary.json", &summary_json).is_err()
    {
        return EXIT_RUNTIME;
    }
    let manifest = RunManifest {
        command: "simulate".to_string(),
        scenario_path: scenario_path.display().to_string(),
        scenario_sha256: scenario_hash(&scenario),
        seed: Some(scenario.seed),
        artifacts: vec![
            "events.log".to_string(),
            "summary.txt".to_string(),
            "summary.json".to_string(),
        ],
        duration_ms: start.elapsed().as_millis(),
    };
    if write_artifact(out_dir, "manifest.txt", &manifest.render()).is_err() {
        return EXIT_RUNTIME;
    }
    println!("{}", run.report.render());
    EXIT_OK
}

fn game_error_exit(e: &GameError) -> i32 {
    match e {
        GameError::EnumerationTooLarge { .. } => {
            eprintln!("error: {e}");
            EXIT_TOO_LARGE
        }
        _ => {
            eprintln!("error: {e}");
            EXIT_VALIDATION
        }
    }
}

fn cmd_analyze(scenario_path: &Path, game: GameArg, out_dir: &Path, dc_mode: DcModeArg) -> i32 {
    let start = Instant::now();
    let (scenario, _) = match load_scenario(scenario_path) {
        Ok(v) => v,
        Err(code) => return code,
    };
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_RUNTIME;
    }
    let kind: GameKind = game.into();
    let mode = match dc_mode {
        DcModeArg::TableLiteral => DcMode::TableLiteral,
        DcModeArg::ProofNarrative => DcMode::ProofNarrative,
    };
    let spec = match GameSpec::new(kind, scenario.params.clone(), scenario.stakes.clone()) {
        Ok(spec) => spec.with_dc_mode(mode),
        Err(e) => return game_error_exit(&e),
    };

    let mut text = String::new();
    let conditions = match check_conditions(&spec.params, &spec.stakes) {
        Ok(c) => c,
        Err(e) => return game_error_exit(&e),
    };
    text.push_str("== incentive conditions ==\n");
    text.push_str(&conditions.render());
    text.push('\n');

    let mut json = serde_json::json!({
        "game": format!("{kind:?}"),
        "conditions": conditions,
    });

    // dominance of the protocol-intended action, where one exists
    let dominance_action = match kind {
        GameKind::Pod => Some(Action::Diligent),
        GameKind::LazyCollusion => Some(Action::Obey),
        _ => None,
    };
    if let Some(action) = dominance_action {
        text.push_str(&format!("== dominance of `{}` ==\n", action.label()));
        let mut verdicts = Vec::new();
        for player in 0..spec.n() {
            match is_dominant(&spec, action, player) {
                Ok(verdict) => {
                    if verdict.dominant {
                        text.push_str(&format!("w{player}: dominant\n"));
                    } else {
                        let ce = verdict.counterexample.as_ref().unwrap();
                        text.push_str(&format!(
                            "w{player}: NOT dominant; against opponents {:?}, `{}` pays {:.6} vs {:.6}\n",
                            ce.opponents.iter().map(|a| a.label()).collect::<Vec<_>>(),
                            ce.alternative.label(),
                            ce.alternative_payoff,
                            ce.candidate_payoff,
                        ));
                    }
                    verdicts.push(verdict);
                }
                Err(e) => return game_error_exit(&e),
            }
        }
        text.push('\n');
        json["dominance"] = serde_json::json!(verdicts);
    }

    if kind == GameKind::DiligentCollusion {
        // both readings of the cheat column are reported; the flag selects
        // which one drives the headline result
        for mode in [DcMode::TableLiteral, DcMode::ProofNarrative] {
            let mode_spec = spec.clone().with_dc_mode(mode);
            let report = match find_pure_nash_dc(&mode_spec) {
                Ok(r) => r,
                Err(e) => return game_error_exit(&e),
            };
            text.push_str(&format!(
                "== pure equilibria, {mode:?} mode ({} profiles checked) ==\n",
                report.profiles_checked
            ));
            if report.equilibria.is_empty() {
                text.push_str("none\n");
            }
            for eq in &report.equilibria {
                text.push_str(&format!(
                    "leader={:?} joins={:?} payoffs={:?}\n",
                    eq.profile.leader_action, eq.profile.joins, eq.payoffs
                ));
            }
            text.push('\n');
            if mode == spec.dc_mode {
                let payoffs: Vec<Vec<f64>> =
                    report.equilibria.iter().map(|e| e.payoffs.clone()).collect();
                json["equilibria"] = serde_json::json!(report);
                json["pareto_efficient"] = serde_json::json!(pareto_efficient_flags(&payoffs));
            } else {
                json["equilibria_other_mode"] = serde_json::json!(report);
            }
        }
    } else {
        let report = match find_pure_nash(&spec) {
            Ok(r) => r,
            Err(e) => return game_error_exit(&e),
        };
        text.push_str(&format!(
            "== pure equilibria ({} profiles checked) ==\n",
            report.profiles_checked
        ));
        for eq in &report.equilibria {
            text.push_str(&format!(
                "profile [{}] payoffs {:?}\n",
                eq.actions.iter().map(|a| a.label()).collect::<Vec<_>>().join(", "),
                eq.payoffs
            ));
        }
        let efficient = pareto_check(&report.equilibria);
        text.push_str("\n== Pareto-efficient equilibria ==\n");
        for eq in &efficient {
            text.push_str(&format!(
                "profile [{}]\n",
                eq.actions.iter().map(|a| a.label()).collect::<Vec<_>>().join(", ")
            ));
        }
        json["equilibria"] = serde_json::json!(report);
        json["pareto_efficient_equilibria"] = serde_json::json!(efficient);
    }

    let json_text = match serde_json::to_string_pretty(&json) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot serialize analysis: {e}");
            return EXIT_RUNTIME;
        }
    };
    if write_artifact(out_dir, "analysis.txt", &text).is_err()
        || write_artifact(out_dir, "analysis.json", &json_text).is_err()
    {
        return EXIT_RUNTIME;
    }
    let manifest = RunManifest {
        command: format!("analyze --game {game:?}"),
        scenario_path: scenario_path.display().to_string(),
        scenario_sha256: scenario_hash(&scenario),
        seed: Some(scenario.seed),
        artifacts: vec!["analysis.txt".to_string(), "analysis.json".to_string()],
        duration_ms: start.elapsed().as_millis(),
    };
    if write_artifact(out_dir, "manifest.txt", &manifest.render()).is_err() {
        return EXIT_RUNTIME;
    }
    print!("{text}");
    EXIT_OK
}

#[allow(clippy::too_many_arguments)]
fn cmd_params(
    n: usize,
    theta: f64,
    cost_per_batch: f64,
    dispute_cost: f64,
    dispute_reward: Option<f64>,
    bounty_reward: Option<f64>,
    fee_per_tx: Option<f64>,
    batch_size: u64,
    rb_margin: f64,
    phi: f64,
    batches_per_year: f64,
    apy: f64,
    exec_cost_scale: f64,
) -> i32 {
    if !(theta > 0.0 && theta < 1.0) {
        eprintln!("error: theta = {theta} outside the open interval (0,1)");
        return EXIT_VALIDATION;
    }
    let r_c = dispute_reward.unwrap_or(cost_per_batch);
    let report = match compute_bounds(n, theta, cost_per_batch, dispute_cost, r_c, bounty_reward) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    print!("{}", report.render());
    if let Some(fee) = fee_per_tx {
        match secured_value_estimate(
            fee,
            batch_size,
            rb_margin,
            phi,
            batches_per_year,
            apy,
            exec_cost_scale,
        ) {
            Ok(estimate) => print!("{}", estimate.render()),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_VALIDATION;
            }
        }
    }
    EXIT_OK
}
