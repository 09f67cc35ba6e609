//! Command-line driver: loads model and utility documents, runs one
//! pipeline, and emits a versioned JSON report plus a text rendering.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use curvature::atlas::{
    bias_safe_window, divergence_report, example1_ladder, example2_ladder, example3, example4, DivergenceReport, Example3Options,
    DEFAULT_LEVELS,
};
use curvature::battery::{identity_battery, BatteryConfig};
use curvature::market::{validate_tree, ArbitrageCertificate, MarketTree, ModelDocument};
use curvature::primal_dual::{first_order_audit, solve_primal, value_curve};
use curvature::report::ResidualTable;
use curvature::sensitivity::{fd_oracle, numeraire_rank_report, oracle_agreement, sensitivity, DEFAULT_LADDER};
use curvature::utility::load_utility;
use curvature::Error;

pub const SCHEMA: u32 = 1;
pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

/// Truncation levels used by `atlas --example 3` when none are given; the
/// default ladder reaches probabilities below the atlas floor there.
pub const EXAMPLE3_LEVELS: [usize; 4] = [12, 14, 16, 20];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    Validate {
        model: PathBuf,
    },
    Solve {
        model: PathBuf,
        utility: PathBuf,
        capital: f64,
        grid: Vec<f64>,
    },
    Sense {
        model: PathBuf,
        utility: PathBuf,
        capital: f64,
        /// Relative finite-difference steps; `None` skips the oracle.
        fd_ladder: Option<Vec<f64>>,
    },
    Audit {
        seed: u64,
        count: usize,
        fd: bool,
    },
    Atlas {
        example: u8,
        levels: Vec<usize>,
        a: f64,
        window: Option<(f64, f64)>,
        points: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self { command, tolerances: BTreeMap::new(), report: None }
    }

    pub fn check(&self) -> Result<(), String> {
        if let Some((k, v)) = self.tolerances.iter().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(format!("tolerance {k} = {v} must be positive"));
        }
        let positive = |name: &str, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(format!("{name} must be positive, got {v}")) };
        match &self.command {
            Command::Solve { capital, grid, .. } => {
                positive("capital", *capital)?;
                if grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) || grid.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err("grid values must be positive and strictly increasing".into());
                }
            }
            Command::Sense { capital, fd_ladder, .. } => {
                positive("capital", *capital)?;
                if let Some(l) = fd_ladder {
                    if l.is_empty() || l.iter().any(|d| !(*d > 0.0 && *d < 1.0)) || l.windows(2).any(|w| !(w[1] < w[0])) {
                        return Err("fd ladder must be strictly decreasing steps in (0, 1)".into());
                    }
                }
            }
            Command::Audit { count, .. } if *count == 0 => return Err("count must be at least 1".into()),
            Command::Atlas { example, levels, window, points, .. } => {
                if !(1..=4).contains(example) {
                    return Err(format!("unknown example {example}"));
                }
                if levels.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err("levels must be strictly increasing".into());
                }
                if *points == 0 {
                    return Err("points must be at least 1".into());
                }
                if let Some((lo, hi)) = window {
                    if !(*lo > 0.0 && lo < hi && *hi < 1.0) {
                        return Err(format!("window [{lo}, {hi}] must satisfy 0 < lo < hi < 1"));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<ArbitrageCertificate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub version: String,
    pub inputs: RunConfig,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<DivergenceReport>,
    pub residuals: ResidualTable,
    /// Tolerance overrides that matched no residual.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub unmatched_tolerances: Vec<String>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
    pub exit_code: i32,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialise")
    }
}

struct Outcome {
    result: Value,
    ladder: Option<DivergenceReport>,
    residuals: ResidualTable,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("engine types always serialise")
}

fn load_model_document(path: &Path) -> curvature::Result<ModelDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load_tree(path: &Path) -> curvature::Result<MarketTree<f64>> {
    load_model_document(path)?.into_tree()
}

fn run_validate(model: &Path) -> curvature::Result<Outcome> {
    let doc = load_model_document(model)?;
    let report = validate_tree(doc.assets.len(), &doc.nodes);
    if !report.is_valid() {
        return Err(Error::InvalidTree(report));
    }
    let tree = doc.into_tree()?;
    let q = tree.find_martingale_measure()?;
    let min_q = q.leaf_prob.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut residuals = ResidualTable::new();
    residuals.at_most("structure.violations", 0.0, 0.0);
    residuals.below("martingale_measure.min_leaf", -min_q, 0.0);
    let result = json!({
        "nodes": tree.n_nodes(),
        "leaves": tree.n_leaves(),
        "horizon": tree.horizon(),
        "assets": tree.assets(),
        "martingale_measure": q.leaf_prob,
    });
    Ok(Outcome { result, ladder: None, residuals })
}

fn run_solve(model: &Path, utility: &Path, capital: f64, grid: &[f64]) -> curvature::Result<Outcome> {
    let tree = load_tree(model)?;
    let util = load_utility(utility)?;
    let sol = solve_primal(&tree, &util, capital)?;
    let mut residuals = first_order_audit(&sol, &tree, &util)?;
    let mut result = json!({
        "utility": util.name,
        "solution": to_value(&sol),
        "terminal_wealth": sol.terminal_wealth(&tree).values,
    });
    if !grid.is_empty() {
        let curve = value_curve(&tree, &util, grid)?;
        residuals.at_most("value_curve.monotone", if curve.monotone { 0.0 } else { 1.0 }, 0.0);
        result["value_curve"] = to_value(&curve);
    }
    Ok(Outcome { result, ladder: None, residuals })
}

fn run_sense(model: &Path, utility: &Path, capital: f64, ladder: Option<&[f64]>) -> curvature::Result<Outcome> {
    let tree = load_tree(model)?;
    let util = load_utility(utility)?;
    let sol = solve_primal(&tree, &util, capital)?;
    let rep = sensitivity(&tree, &util, &sol)?;
    let mut residuals = ResidualTable::new();
    residuals.merge("audit", &first_order_audit(&sol, &tree, &util)?);
    residuals.merge("engine", &rep.residuals);
    let mut result = json!({
        "utility": util.name,
        "x": rep.x,
        "y": rep.y,
        "a": rep.a,
        "b": rep.b,
        "u1": sol.u1,
        "u2": rep.u2,
        "v2": rep.v2,
        "dim_gain": rep.dim_gain,
        "dim_complement": rep.dim_complement,
        "zeta": rep.zeta.values,
        "eta": rep.eta.values,
        "alpha_hat": rep.alpha_hat.values,
        "beta_hat": rep.beta_hat.values,
        "xp_terminal": rep.xp_terminal(&tree).values,
        "yp_terminal": rep.yp_terminal(&tree).values,
        "risk_measure": rep.risk_measure.leaf_prob,
        "ranks": to_value(&numeraire_rank_report(&tree, &sol)?),
    });
    if let Some(steps) = ladder {
        let fd = fd_oracle(&tree, &util, &sol, rep.u2, steps, true)?;
        residuals.merge("fd", &oracle_agreement(&tree, &rep, &fd));
        result["fd"] = to_value(&fd);
    }
    Ok(Outcome { result, ladder: None, residuals })
}

fn run_audit(seed: u64, count: usize, fd: bool) -> curvature::Result<Outcome> {
    let cfg = BatteryConfig { seed, count, fd_power: fd, ..BatteryConfig::default() };
    let rep = identity_battery(&cfg);
    let mut residuals = rep.worst.clone();
    let failed = rep.instances.iter().filter(|s| !s.passed).count();
    residuals.at_most("battery.failed_instances", failed as f64, 0.0);
    Ok(Outcome { result: to_value(&rep), ladder: None, residuals })
}

fn ladder_residuals(residuals: &mut ResidualTable, d: &DivergenceReport, increasing: bool) {
    let monotone = if increasing { d.strictly_increasing } else { d.strictly_decreasing };
    residuals.at_most("ladder.monotone", if monotone { 0.0 } else { 1.0 }, 0.0);
    residuals.at_most("ladder.exponent", (d.exponent - 3.0).abs(), 0.2);
}

fn run_atlas(example: u8, levels: &[usize], a: f64, window: Option<(f64, f64)>, points: usize) -> curvature::Result<Outcome> {
    let mut residuals = ResidualTable::new();
    match example {
        1 | 2 => {
            let levels = if levels.is_empty() { DEFAULT_LEVELS.to_vec() } else { levels.to_vec() };
            let (result, ladder) = if example == 1 {
                let (reports, ladder) = example1_ladder(&levels)?;
                for r in &reports {
                    residuals.merge(&format!("n{}", r.n), &r.residuals);
                }
                (to_value(&reports), ladder)
            } else {
                let (reports, ladder) = example2_ladder(&levels, a)?;
                for r in &reports {
                    residuals.merge(&format!("n{}", r.n), &r.residuals);
                }
                (to_value(&reports), ladder)
            };
            let d = divergence_report(&ladder)?;
            ladder_residuals(&mut residuals, &d, example == 1);
            Ok(Outcome { result, ladder: Some(d), residuals })
        }
        3 => {
            let levels = if levels.is_empty() { EXAMPLE3_LEVELS.to_vec() } else { levels.to_vec() };
            let mut reports = Vec::with_capacity(levels.len());
            for n in levels {
                let e = example3(n, &Example3Options { window, points })?;
                residuals.merge(&format!("n{n}"), &e.report.residuals);
                reports.push(e.report);
            }
            Ok(Outcome { result: to_value(&reports), ladder: None, residuals })
        }
        4 => {
            let e = example4()?;
            residuals.merge("", &e.report.residuals);
            Ok(Outcome { result: to_value(&e.report), ladder: None, residuals })
        }
        other => Err(Error::Precondition(format!("unknown example {other}"))),
    }
}

fn error_info(e: &Error) -> (i32, ErrorInfo) {
    let (code, kind) = match e {
        Error::NonConvergence { .. } => (EXIT_SOLVER, "non_convergence"),
        Error::NotInterior(_) => (EXIT_SOLVER, "not_interior"),
        Error::Arbitrage(_) => (EXIT_INPUT, "arbitrage"),
        Error::InvalidTree(_) => (EXIT_INPUT, "invalid_tree"),
        Error::Parse(_) => (EXIT_INPUT, "parse"),
        Error::Corridor(_) => (EXIT_INPUT, "corridor"),
        _ if e.is_input_error() => (EXIT_INPUT, "input"),
        _ => (EXIT_SOLVER, "numerical"),
    };
    let certificate = match e {
        Error::Arbitrage(c) => Some((**c).clone()),
        _ => None,
    };
    (code, ErrorInfo { kind: kind.into(), message: e.to_string(), certificate })
}

/// Executes the pipeline named by `config`. The exit code is 0 iff every
/// asserted residual passes, 2 on a failing residual, 3 on model, utility
/// or configuration errors and 4 when the solver cannot deliver an interior
/// optimum.
pub fn run(config: &RunConfig) -> Report {
    let mut report = Report {
        schema: SCHEMA,
        version: env!("CARGO_PKG_VERSION").into(),
        inputs: config.clone(),
        result: Value::Null,
        ladder: None,
        residuals: ResidualTable::new(),
        unmatched_tolerances: vec![],
        passed: false,
        error: None,
        exit_code: EXIT_INPUT,
    };
    if let Err(message) = config.check() {
        report.error = Some(ErrorInfo { kind: "config".into(), message, certificate: None });
        return report;
    }
    let outcome = match &config.command {
        Command::Validate { model } => run_validate(model),
        Command::Solve { model, utility, capital, grid } => run_solve(model, utility, *capital, grid),
        Command::Sense { model, utility, capital, fd_ladder } => run_sense(model, utility, *capital, fd_ladder.as_deref()),
        Command::Audit { seed, count, fd } => run_audit(*seed, *count, *fd),
        Command::Atlas { example, levels, a, window, points } => run_atlas(*example, levels, *a, *window, *points),
    };
    match outcome {
        Ok(mut o) => {
            for (name, tol) in &config.tolerances {
                if !o.residuals.set_tol(name, *tol) {
                    report.unmatched_tolerances.push(name.clone());
                }
            }
            report.passed = o.residuals.passed();
            report.exit_code = if report.passed { EXIT_OK } else { EXIT_INVARIANT };
            report.result = o.result;
            report.ladder = o.ladder;
            report.residuals = o.residuals;
        }
        Err(e) => {
            let (code, info) = error_info(&e);
            report.exit_code = code;
            report.error = Some(info);
        }
    }
    report
}

/// Aligned plain-text summary in residual-name order.
pub fn render_table(report: &Report) -> String {
    let mut out = String::new();
    let status = if report.passed { "PASS" } else { "FAIL" };
    let _ = writeln!(out, "schema {}  version {}  {status}  exit {}", report.schema, report.version, report.exit_code);
    if let Some(e) = &report.error {
        let _ = writeln!(out, "error ({}): {}", e.kind, e.message);
    }
    let rows: Vec<(&String, &curvature::report::Residual)> = report.residuals.entries.iter().collect();
    let width = rows.iter().map(|(k, _)| k.chars().count()).chain(["residual".len()]).max().unwrap_or(8);
    let _ = writeln!(out, "{:<width$}  {:>12}  {:>10}  status", "residual", "value", "tolerance");
    for (k, r) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>12.4e}  {:>10.1e}  {}",
            k,
            r.value,
            r.tol,
            if r.pass { "ok" } else { "FAIL" }
        );
    }
    if let Some(d) = &report.ladder {
        let _ = writeln!(out, "\n{:>6}  {:>16}  {:>10}", "N", d.name, "ratio");
        for (i, (n, v)) in d.levels.iter().zip(&d.values).enumerate() {
            let ratio = if i == 0 { String::new() } else { format!("{:.4}", d.ratios[i - 1]) };
            let _ = writeln!(out, "{n:>6}  {v:>16.6}  {ratio:>10}");
        }
        let _ = writeln!(out, "exponent {:.4}", d.exponent);
    }
    for name in &report.unmatched_tolerances {
        let _ = writeln!(out, "warning: --tol {name} matched no residual");
    }
    out
}

#[derive(Debug, Parser)]
#[command(name = "curvature", version, about = "Second-order sensitivities of optimal investment on finite trees")]
pub struct Cli {
    /// Override a residual tolerance, e.g. `--tol engine.reciprocity=1e-8`.
    #[arg(long = "tol", value_name = "NAME=VALUE", value_parser = parse_tol, global = true)]
    pub tol: Vec<(String, f64)>,
    /// Write the JSON report here.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Print the JSON report instead of the text table.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Check tree structure and absence of arbitrage.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Solve the primal and dual problems at one capital.
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        utility: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        capital: f64,
        /// Capitals for the value curve, comma separated.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
    },
    /// Second-order sensitivities and their identities.
    Sense {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        utility: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        capital: f64,
        /// Run the finite-difference oracle; without values the default ladder is used.
        #[arg(long = "fd-ladder", value_delimiter = ',', num_args = 0..)]
        fd_ladder: Option<Vec<f64>>,
    },
    /// Identity battery over random models.
    Audit {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// Cross-check power utilities against the finite-difference oracle.
        #[arg(long)]
        fd: bool,
    },
    /// Counterexample atlas.
    Atlas {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        example: u8,
        #[arg(long, value_delimiter = ',')]
        levels: Vec<usize>,
        /// Strategy slope for the second example's divergence.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// ε-window `lo,hi` for the third example.
        #[arg(long, value_delimiter = ',', value_name = "LO,HI")]
        window: Option<Vec<f64>>,
        /// Use `[2^(7−N), 1e-2]` as the third example's window.
        #[arg(long, conflicts_with = "window")]
        bias_safe: bool,
        #[arg(long, default_value_t = 4)]
        points: usize,
    },
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s}"))?;
    let v: f64 = value.parse().map_err(|e| format!("{value}: {e}"))?;
    Ok((name.to_string(), v))
}

impl Cli {
    pub fn into_config(self) -> Result<RunConfig, String> {
        let command = match self.command {
            CliCommand::Validate { model } => Command::Validate { model },
            CliCommand::Solve { model, utility, capital, grid } => Command::Solve { model, utility, capital, grid },
            CliCommand::Sense { model, utility, capital, fd_ladder } => Command::Sense {
                model,
                utility,
                capital,
                fd_ladder: fd_ladder.map(|l| if l.is_empty() { DEFAULT_LADDER.to_vec() } else { l }),
            },
            CliCommand::Audit { seed, count, fd } => Command::Audit { seed, count, fd },
            CliCommand::Atlas { example, levels, a, window, bias_safe, points } => {
                let window = match (window, bias_safe) {
                    (Some(w), _) if w.len() == 2 => Some((w[0], w[1])),
                    (Some(_), _) => return Err("--window takes exactly two values lo,hi".into()),
                    (None, true) => {
                        if levels.len() > 1 {
                            return Err("--bias-safe takes a single level".into());
                        }
                        let n = levels.first().copied().unwrap_or(EXAMPLE3_LEVELS[EXAMPLE3_LEVELS.len() - 1]);
                        Some(bias_safe_window(n))
                    }
                    (None, false) => None,
                };
                let levels = match (bias_safe, levels.is_empty()) {
                    (true, true) => vec![EXAMPLE3_LEVELS[EXAMPLE3_LEVELS.len() - 1]],
                    _ => levels,
                };
                Command::Atlas { example, levels, a, window, points }
            }
        };
        let mut tolerances = BTreeMap::new();
        for (k, v) in self.tol {
            tolerances.insert(k, v);
        }
        Ok(RunConfig { command, tolerances, report: self.report })
    }
}

/// Parses arguments, runs, writes the report and prints the summary.
/// Returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let json_out = cli.json;
    let config = match cli.into_config() {
        Ok(c) => c,
        Err(message) => {
            eprintln!("error: {message}");
            return EXIT_INPUT;
        }
    };
    let report = run(&config);
    let text = report.to_json();
    if let Some(path) = &config.report {
        if let Err(e) = std::fs::write(path, format!("{text}\n")) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_INPUT;
        }
    }
    if json_out {
        println!("{text}");
    } else {
        print!("{}", render_table(&report));
    }
    report.exit_code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_report() -> Report {
        Report {
            schema: SCHEMA,
            version: "0".into(),
            inputs: RunConfig::new(Command::Audit { seed: 1, count: 1, fd: false }),
            result: Value::Null,
            ladder: None,
            residuals: ResidualTable::new(),
            unmatched_tolerances: vec![],
            passed: true,
            error: None,
            exit_code: 0,
        }
    }

    #[test]
    fn empty_residuals_render_header_only() {
        let text = render_table(&empty_report());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("residual"));
    }

    #[test]
    fn failing_row_is_marked() {
        let mut r = empty_report();
        r.residuals.at_most("bad", 1.0, 0.5);
        r.residuals.at_most("good", 0.0, 0.5);
        let text = render_table(&r);
        assert!(text.lines().any(|l| l.starts_with("bad") && l.ends_with("FAIL")));
        assert!(text.lines().any(|l| l.starts_with("good") && l.ends_with("ok")));
    }

    #[test]
    fn ladder_has_footer() {
        let mut r = empty_report();
        r.ladder = Some(DivergenceReport {
            name: "div1".into(),
            levels: vec![1, 2, 4],
            values: vec![1.0, 8.0, 64.0],
            ratios: vec![8.0, 8.0],
            exponent: 3.0,
            strictly_increasing: true,
            strictly_decreasing: false,
        });
        let text = render_table(&r);
        assert!(text.contains("exponent 3.0000"));
        assert_eq!(text.lines().filter(|l| l.trim_start().starts_with(|c: char| c.is_ascii_digit())).count(), 3);
    }

    #[test]
    fn config_checks() {
        let mut c = RunConfig::new(Command::Solve { model: "m".into(), utility: "u".into(), capital: 1.0, grid: vec![1.0, 0.5] });
        assert!(c.check().is_err());
        c.command = Command::Solve { model: "m".into(), utility: "u".into(), capital: 1.0, grid: vec![0.5, 1.0] };
        assert!(c.check().is_ok());
        c.tolerances.insert("x".into(), -1.0);
        assert!(c.check().is_err());
    }

    #[test]
    fn tol_flag_parses() {
        assert_eq!(parse_tol("engine.reciprocity=1e-8").unwrap(), ("engine.reciprocity".into(), 1e-8));
        assert!(parse_tol("novalue").is_err());
    }
}
