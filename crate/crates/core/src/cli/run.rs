//! Command dispatch, run reports and output files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{build_sub, emit_config, GenConfig, Method, ProblemConfig, ScenarioConfig, TreeConfig};
use crate::analysis::{compare, saddle_audit, saddle_point, solve_linear};
use crate::dynkin::{bruteforce_bounds, game_value_with_terminal, recursive_values};
use crate::error::{Error, Result};
use crate::finprob::{FProcess, GProcess, SubFiltration};
use crate::skorokhod::{iterative_oracle, two_sided_map, two_sided_map_direct, BarrierPair};
use crate::solver::{
    game_representation_bruteforce, k_representation, penalization_sweep, penalty_grid, solve_penalized,
    solve_picard_with, verify_solution,
};
use crate::switching::{best_strategy, decompose, enumerate_strategies, optimal_strategy, profit};

pub const REPORT_VERSION: &str = "crbsde-report/1";

/// Largest step count for which `--check` runs exhaustive oracles.
pub const CHECK_MAX_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Dynkin,
    Skorokhod,
    Switch,
    Compare,
    Saddle,
    PenalizeSweep,
    Gen,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Dynkin => "dynkin",
            Command::Skorokhod => "skorokhod",
            Command::Switch => "switch",
            Command::Compare => "compare",
            Command::Saddle => "saddle",
            Command::PenalizeSweep => "penalize-sweep",
            Command::Gen => "gen",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    pub check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub command: Command,
    pub seed: u64,
    pub wall_clock_seconds: f64,
    pub config: ScenarioConfig,
    pub result: Value,
    /// CSV files written next to the report.
    pub tables: Vec<String>,
}

/// A CSV table held in memory until written.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    /// Rows `(level, id, value)` of a process.
    fn process(name: &str, id: &str, levels: &[Vec<f64>]) -> Self {
        let mut t = Self::new(name, &["level", id, "value"]);
        for (k, level) in levels.iter().enumerate() {
            for (i, v) in level.iter().enumerate() {
                t.rows.push(vec![k as f64, i as f64, *v]);
            }
        }
        t
    }

    fn nodes(name: &str, x: &FProcess) -> Self {
        Self::process(name, "node", x.levels())
    }

    fn atoms(name: &str, x: &GProcess) -> Self {
        Self::process(name, "atom", x.levels())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Output of one run, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub tables: Vec<Table>,
    /// Extra JSON documents, e.g. the scenario written by `gen`.
    pub documents: Vec<(String, String)>,
}

impl RunOutput {
    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("reports always serialize")
    }

    /// Writes `report.json`, the tables and the extra documents into `dir`,
    /// each through a temporary file and a rename.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in &self.tables {
            written.push(write_atomic(dir, &format!("{}.csv", t.name), &t.to_csv()?)?);
        }
        for (name, text) in &self.documents {
            written.push(write_atomic(dir, name, text.as_bytes())?);
        }
        written.push(write_atomic(dir, "report.json", self.report_json().as_bytes())?);
        Ok(written)
    }
}

pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(&target).map_err(|e| Error::Io(e.to_string()))?;
    Ok(target)
}

/// Runs one command. Deterministic given the config and seed; only the
/// wall-clock field of the report varies between runs.
pub fn run(command: Command, cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutput> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut tables = Vec::new();
    let mut documents = Vec::new();
    let result = match command {
        Command::Solve => run_solve(cfg, opts, &mut rng, &mut tables)?,
        Command::Dynkin => run_dynkin(cfg, opts, &mut rng, &mut tables)?,
        Command::Skorokhod => run_skorokhod(cfg, opts, &mut tables)?,
        Command::Switch => run_switch(cfg, opts, &mut rng, &mut tables)?,
        Command::Compare => run_compare(cfg, &mut rng, &mut tables)?,
        Command::Saddle => run_saddle(cfg, &mut rng, &mut tables)?,
        Command::PenalizeSweep => run_sweep(cfg, &mut rng, &mut tables)?,
        Command::Gen => {
            let generated = generate(&cfg.gen, &mut rng);
            let text = emit_config(&generated);
            documents.push(("scenario.json".to_string(), text));
            json!({ "scenario": "scenario.json" })
        }
    };
    let mut names: Vec<String> = tables.iter().map(|t| format!("{}.csv", t.name)).collect();
    names.extend(documents.iter().map(|(n, _)| n.clone()));
    let report = RunReport {
        version: REPORT_VERSION.to_string(),
        command,
        seed: opts.seed,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        config: cfg.clone(),
        result,
        tables: names,
    };
    Ok(RunOutput { report, tables, documents })
}

fn sub_of(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<SubFiltration> {
    let tree = cfg.tree(rng)?;
    build_sub(&cfg.sub, tree, rng)
}

/// Runs an exhaustive oracle when the instance is small enough.
fn small_enough(sub: &SubFiltration, opts: &RunOptions) -> bool {
    opts.check && sub.tree().steps() <= CHECK_MAX_STEPS
}

fn run_solve(cfg: &ScenarioConfig, opts: &RunOptions, rng: &mut ChaCha8Rng, tables: &mut Vec<Table>) -> Result<Value> {
    let sub = sub_of(cfg, rng)?;
    let (p, _) = cfg.problem_config()?.build(&sub)?;
    let s = match cfg.solver.method {
        Method::Picard => solve_picard_with(&p, cfg.solver.tol, cfg.solver.max_iter)?,
        Method::Penalty => solve_penalized(&p, cfg.solver.n.unwrap_or_default())?,
    };
    let diag = verify_solution(&p, &s);
    let mut result = json!({
        "y0": s.y0(),
        "iterations": s.iterations(),
        "history": s.history,
        "lipschitz": p.lipschitz(),
        "diagnostics": diag,
    });
    if cfg.solver.method == Method::Picard {
        let kg = k_representation(&p, &s)?;
        result["k_representation_gap"] = json!(kg.max_abs_diff(&s.k_g(&sub)));
    }
    if small_enough(&sub, opts) {
        let (lo, hi) = game_representation_bruteforce(&p, &s, cfg.solver.enumeration_cap)?;
        let yg = s.y_g(&sub);
        result["check"] = json!({ "game_gap": lo.max_abs_diff(&yg).max(hi.max_abs_diff(&yg)) });
    }
    tables.push(Table::nodes("y", &s.y));
    tables.push(Table::nodes("z", &s.z));
    tables.push(Table::nodes("k_plus", &s.k_plus));
    tables.push(Table::nodes("k_minus", &s.k_minus));
    tables.push(Table::atoms("y_g", &s.y_g(&sub)));
    Ok(result)
}

fn run_dynkin(cfg: &ScenarioConfig, opts: &RunOptions, rng: &mut ChaCha8Rng, tables: &mut Vec<Table>) -> Result<Value> {
    let d = cfg.dynkin.as_ref().ok_or_else(|| Error::Config("missing field `dynkin`".into()))?;
    let sub = sub_of(cfg, rng)?;
    let (lo, hi) = d.rewards(&sub)?;
    let (lo, hi) = (sub.cond_expect_process(&lo), sub.cond_expect_process(&hi));
    let values = recursive_values(&sub, &lo, &hi, d.criterion);
    let mut result = json!({ "criterion": d.criterion, "value0": values.get(0, 0) });
    // the families construction needs equal terminal rewards
    if lo.level(sub.tree().steps()) == hi.level(sub.tree().steps()) {
        let (profile, _) = game_value_with_terminal(&sub, &lo, &hi)?;
        result["fairness_gap"] = json!(profile.fairness_gap());
        result["families_gap"] = json!(profile.families_gap);
        tables.push(Table::atoms("lower_value", &profile.lower));
        tables.push(Table::atoms("upper_value", &profile.upper));
    }
    if small_enough(&sub, opts) {
        let (a, b) = bruteforce_bounds(&sub, &lo, &hi, d.criterion, cfg.solver.enumeration_cap)?;
        result["check"] = json!({ "bruteforce_gap": a.max_abs_diff(&values).max(b.max_abs_diff(&values)) });
    }
    tables.push(Table::atoms("value", &values));
    Ok(result)
}

fn run_skorokhod(cfg: &ScenarioConfig, opts: &RunOptions, tables: &mut Vec<Table>) -> Result<Value> {
    let sk = cfg.skorokhod.as_ref().ok_or_else(|| Error::Config("missing field `skorokhod`".into()))?;
    if sk.x.len() != sk.lower.len() {
        return Err(Error::Config(format!("skorokhod: path has {} points, barriers {}", sk.x.len(), sk.lower.len())));
    }
    let b = BarrierPair::new(sk.lower.clone(), sk.upper.clone())?;
    let out = two_sided_map(&sk.x, &b)?;
    let audit = out.audit(&sk.x, &b);
    let mut result = json!({
        "k_end": out.k.last().copied().unwrap_or(0.0),
        "audit": {
            "decomposition": audit.decomposition,
            "constraint": audit.constraint,
            "flat_off_lower": audit.flat_off_lower,
            "flat_off_upper": audit.flat_off_upper,
            "monotone": audit.monotone,
        },
    });
    if opts.check {
        let direct = two_sided_map_direct(&sk.x, &b)?;
        let oracle = iterative_oracle(&sk.x, &b)?;
        let gap = |o: &crate::skorokhod::ReflectedOutput| o.k.iter().zip(&out.k).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        result["check"] = json!({ "direct_gap": gap(&direct), "oracle_gap": gap(&oracle) });
    }
    let mut t = Table::new("reflection", &["index", "x", "lower", "upper", "y", "k", "k_plus", "k_minus"]);
    for i in 0..sk.x.len() {
        t.rows.push(vec![i as f64, sk.x[i], sk.lower[i], sk.upper[i], out.y[i], out.k[i], out.k_plus[i], out.k_minus[i]]);
    }
    tables.push(t);
    Ok(result)
}

fn run_switch(cfg: &ScenarioConfig, opts: &RunOptions, rng: &mut ChaCha8Rng, tables: &mut Vec<Table>) -> Result<Value> {
    let sc = cfg.switching.as_ref().ok_or_else(|| Error::Config("missing field `switching`".into()))?;
    let sub = sub_of(cfg, rng)?;
    let sp = sc.build(&sub)?;
    let dec = decompose(&sp)?;
    let star = optimal_strategy(&sp, &dec)?;
    let j_star = profit(&sp, &star)?;
    let y10 = dec.y1.get(0, 0);
    let n = sub.tree().steps();
    let mut result = json!({
        "value": y10,
        "closed_value": dec.y2.get(0, 0),
        "optimal_profit": j_star,
        "oracle_gap": (j_star - y10).abs(),
        "decomposition_residual": dec.residual(),
        "max_switches": (0..sub.tree().num_leaves()).map(|l| star.switch_count(l, n)).max().unwrap_or(0),
    });
    if small_enough(&sub, opts) {
        let all = enumerate_strategies(&sp, n, cfg.solver.enumeration_cap)?;
        if let Some((_, best)) = best_strategy(&sp, &all) {
            result["check"] = json!({ "strategies": all.len(), "best_profit": best, "bruteforce_gap": (best - y10).abs() });
        }
    }
    tables.push(Table::nodes("y1", &dec.y1));
    tables.push(Table::nodes("y2", &dec.y2));
    let mut t = Table::new("strategy", &["leaf", "switch", "level"]);
    for leaf in 0..sub.tree().num_leaves() {
        for (m, level) in star.switches_on(leaf, n).into_iter().enumerate() {
            t.rows.push(vec![leaf as f64, (m + 1) as f64, level as f64]);
        }
    }
    tables.push(t);
    Ok(result)
}

fn linear_problem(
    pc: &ProblemConfig,
    sub: &SubFiltration,
    what: &str,
) -> Result<(crate::solver::Problem, crate::analysis::LinearDriver)> {
    let (p, ld) = pc.build(sub)?;
    let ld = ld.ok_or_else(|| Error::Config(format!("{what}: a `linear` driver is required")))?;
    Ok((p, ld))
}

fn run_compare(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng, tables: &mut Vec<Table>) -> Result<Value> {
    let second = &cfg.compare.as_ref().ok_or_else(|| Error::Config("missing field `compare`".into()))?.second;
    let sub = sub_of(cfg, rng)?;
    let (p1, ld1) = linear_problem(cfg.problem_config()?, &sub, "problem")?;
    let (p2, ld2) = linear_problem(second, &sub, "compare.second")?;
    let report = compare(&p1, &ld1, &p2, &ld2)?;
    tables.push(Table::atoms("first_y_g", &report.y1_g));
    tables.push(Table::atoms("second_y_g", &report.y2_g));
    Ok(json!({
        "min_margin": report.min_margin,
        "at": report.at,
        "pointwise_margin": report.pointwise_margin,
    }))
}

fn run_saddle(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng, tables: &mut Vec<Table>) -> Result<Value> {
    let sub = sub_of(cfg, rng)?;
    let (p, ld) = linear_problem(cfg.problem_config()?, &sub, "problem")?;
    let (p, s) = solve_linear(&ld, &p)?;
    let t = cfg.saddle.time;
    let (tau, sigma) = saddle_point(&p, &s, t)?;
    let audit = saddle_audit(&ld, &p, &s, cfg.solver.enumeration_cap)?;
    let mut table = Table::new("saddle", &["leaf", "tau", "sigma"]);
    for leaf in 0..sub.tree().num_leaves() {
        table.rows.push(vec![leaf as f64, tau.at(leaf) as f64, sigma.at(leaf) as f64]);
    }
    tables.push(table);
    Ok(json!({ "time": t, "y0": s.y0(), "audit": audit }))
}

fn run_sweep(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng, tables: &mut Vec<Table>) -> Result<Value> {
    let sub = sub_of(cfg, rng)?;
    let (p, _) = cfg.problem_config()?.build(&sub)?;
    let grid = penalty_grid(sub.tree().dt(), cfg.penalty.lo, cfg.penalty.hi);
    let sweep = penalization_sweep(&p, &grid)?;
    let mut t = Table::new("sweep", &["n", "v", "d"]);
    for r in &sweep.rows {
        t.rows.push(vec![r.n, r.violation, r.distance]);
    }
    tables.push(t);
    Ok(json!({ "violation_slope": sweep.violation_slope, "reference_y0": sweep.reference_y0, "rows": sweep.rows }))
}

fn round(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// A random scenario with a Lipschitz driver `c0 + α y + β z` and a band
/// around a drifting midline, written with rounded coefficients.
pub fn generate(g: &GenConfig, rng: &mut ChaCha8Rng) -> ScenarioConfig {
    let (lo, hi) = if g.width.0 < g.width.1 { g.width } else { (g.width.0, g.width.0 + 1e-3) };
    let lo = lo.max(1e-3);
    let slope = round(rng.gen_range(-0.5..0.5));
    let drift = round(rng.gen_range(-0.5..0.5));
    let half_lo = round(0.5 * rng.gen_range(lo..hi.max(lo + 1e-3))).max(1e-4);
    let half_hi = round(0.5 * rng.gen_range(lo..hi.max(lo + 1e-3))).max(1e-4);
    let mid = format!("{slope} * w + {drift} * t");
    let lower = format!("{mid} - {half_lo}");
    let upper = format!("{mid} + {half_hi}");
    let target = round(rng.gen_range(-1.0..1.0));
    let xi = format!("max({lower}, min({upper}, {target} * w))");
    let lambda = g.lipschitz.max(0.0);
    let (alpha, beta) = (round(lambda * rng.gen_range(-1.0..1.0)), round(lambda * rng.gen_range(-1.0..1.0)));
    let c0 = round(rng.gen_range(-2.0..2.0));
    ScenarioConfig {
        tree: Some(TreeConfig::Binary { steps: g.steps, horizon: g.horizon }),
        sub: g.sub.clone(),
        seed: None,
        problem: Some(ProblemConfig {
            f: Some(format!("{c0} + {alpha} * y + {beta} * z")),
            linear: None,
            lower,
            upper,
            xi,
            lipschitz: None,
        }),
        solver: Default::default(),
        penalty: Default::default(),
        dynkin: None,
        skorokhod: None,
        switching: None,
        compare: None,
        saddle: Default::default(),
        gen: g.clone(),
        output: None,
    }
}
