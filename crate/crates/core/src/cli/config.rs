//! Scenario configuration: JSON schema, validation and problem assembly.

use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::expr::{Expr, Var};
use crate::analysis::LinearDriver;
use crate::dynkin::Criterion;
use crate::error::{Error, Result};
use crate::finprob::{AtomMaps, BranchSpec, FProcess, NodeCtx, ScenarioTree, SubFiltration, TreeSpec};
use crate::solver::{Driver, Problem, PICARD_MAX_ITER, PICARD_TOL};
use crate::switching::SwitchingProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeConfig>,
    #[serde(default)]
    pub sub: SubConfig,
    /// Seed for random trees, subfiltrations and generated scenarios; the
    /// `--seed` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynkin: Option<DynkinConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skorokhod: Option<SkorokhodConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switching: Option<SwitchingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
    #[serde(default)]
    pub saddle: SaddleConfig,
    #[serde(default)]
    pub gen: GenConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TreeConfig {
    /// `p = 1/2`, `ΔB = ±√Δt`.
    Binary {
        steps: usize,
        #[serde(default = "one")]
        horizon: f64,
    },
    /// One child per node with `ΔB = 0`: a deterministic time grid.
    Chain {
        steps: usize,
        #[serde(default = "one")]
        horizon: f64,
    },
    Random {
        steps: usize,
        #[serde(default = "one")]
        horizon: f64,
        branching: usize,
    },
    /// `levels[k]` lists the nodes of level `k + 1` as `(parent, prob, increment)`.
    Explicit {
        #[serde(default = "one")]
        horizon: f64,
        levels: Vec<Vec<BranchSpec>>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SubConfig {
    #[default]
    Full,
    Trivial,
    /// `G_k = F_{max(k-d, 0)}`.
    Delayed { delay: usize },
    Random { max_split: usize },
    /// Node-to-atom map per level.
    Custom { atoms: AtomMaps },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Driver expression in `t, y, z, w`; exclusive with `linear`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    /// Linear driver `a y + b z + c` with coefficients in `t, w`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearConfig>,
    #[serde(rename = "L")]
    pub lower: String,
    #[serde(rename = "U")]
    pub upper: String,
    pub xi: String,
    /// Declared Lipschitz constant; estimated from the expression if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    pub a: String,
    pub b: String,
    pub c: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Picard,
    Penalty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: Method,
    /// Penalty level for `method = "penalty"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Enumeration cap for brute-force oracles.
    #[serde(default = "default_cap")]
    pub enumeration_cap: usize,
}

fn default_tol() -> f64 {
    PICARD_TOL
}

fn default_max_iter() -> usize {
    PICARD_MAX_ITER
}

fn default_cap() -> usize {
    crate::finprob::DEFAULT_ENUMERATION_CAP
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { method: Method::Picard, n: None, tol: default_tol(), max_iter: default_max_iter(), enumeration_cap: default_cap() }
    }
}

/// Penalty grid `2^lo/Δt, ..., 2^hi/Δt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyConfig {
    pub lo: i32,
    pub hi: i32,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self { lo: 4, hi: 12 }
    }
}

/// Rewards in `t, w`, conditioned onto the subfiltration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynkinConfig {
    pub lower: String,
    pub upper: String,
    #[serde(default)]
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkorokhodConfig {
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingConfig {
    pub psi1: String,
    pub psi2: String,
    /// Cost of closing.
    #[serde(rename = "D")]
    pub stop_cost: String,
    /// Cost of reopening.
    pub a: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub second: ProblemConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaddleConfig {
    /// Level at which the saddle point is built and audited.
    #[serde(default)]
    pub time: usize,
}

/// Shape of scenarios produced by `gen`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub steps: usize,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default)]
    pub sub: SubConfig,
    pub lipschitz: f64,
    /// Range of band widths `U - L`.
    pub width: (f64, f64),
}

impl Default for GenConfig {
    fn default() -> Self {
        Self { steps: 4, horizon: 1.0, sub: SubConfig::Full, lipschitz: 0.5, width: (0.2, 1.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

/// Parses and validates a configuration. Schema errors name the offending
/// path; expressions are parsed eagerly so their errors surface here.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            Error::Config(e.into_inner().to_string())
        } else {
            Error::Config(format!("{path}: {}", e.into_inner()))
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn emit_config(cfg: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("configs always serialize")
}

impl ScenarioConfig {
    /// Checks every expression in the config for syntax and variable use.
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.problem {
            p.validate("problem")?;
        }
        if let Some(c) = &self.compare {
            c.second.validate("compare.second")?;
        }
        if let Some(d) = &self.dynkin {
            parse_field("dynkin.lower", &d.lower, false)?;
            parse_field("dynkin.upper", &d.upper, false)?;
        }
        if let Some(s) = &self.switching {
            parse_field("switching.psi1", &s.psi1, false)?;
            parse_field("switching.psi2", &s.psi2, false)?;
            parse_field("switching.D", &s.stop_cost, false)?;
            parse_field("switching.a", &s.a, false)?;
        }
        if self.solver.method == Method::Penalty && self.solver.n.is_none() {
            return Err(Error::Config("solver.n: penalty level required for method \"penalty\"".into()));
        }
        if self.penalty.lo > self.penalty.hi {
            return Err(Error::Config("penalty: lo must not exceed hi".into()));
        }
        Ok(())
    }

    pub fn tree(&self, rng: &mut impl Rng) -> Result<Arc<ScenarioTree>> {
        let t = self.tree.as_ref().ok_or_else(|| Error::Config("missing field `tree`".into()))?;
        build_tree(t, rng)
    }

    pub fn problem_config(&self) -> Result<&ProblemConfig> {
        self.problem.as_ref().ok_or_else(|| Error::Config("missing field `problem`".into()))
    }
}

pub fn build_tree(t: &TreeConfig, rng: &mut impl Rng) -> Result<Arc<ScenarioTree>> {
    let tree = match t {
        TreeConfig::Binary { steps, horizon } => ScenarioTree::binary(*steps, *horizon)?,
        TreeConfig::Chain { steps, horizon } => ScenarioTree::chain(*steps, *horizon)?,
        TreeConfig::Random { steps, horizon, branching } => ScenarioTree::random(*steps, *horizon, *branching, rng)?,
        TreeConfig::Explicit { horizon, levels } => {
            ScenarioTree::from_spec(&TreeSpec { horizon: *horizon, levels: levels.clone() })?
        }
    };
    Ok(Arc::new(tree))
}

pub fn build_sub(s: &SubConfig, tree: Arc<ScenarioTree>, rng: &mut impl Rng) -> Result<SubFiltration> {
    Ok(match s {
        SubConfig::Full => SubFiltration::full(tree),
        SubConfig::Trivial => SubFiltration::trivial(tree),
        SubConfig::Delayed { delay } => SubFiltration::delayed(tree, *delay),
        SubConfig::Random { max_split } => SubFiltration::random(tree, *max_split, rng),
        SubConfig::Custom { atoms } => SubFiltration::new(tree, atoms.clone())?,
    })
}

/// Parses one expression field; `state` allows `y` and `z`.
fn parse_field(path: &str, src: &str, state: bool) -> Result<Expr> {
    let e = Expr::parse(src).map_err(|e| match e {
        Error::Expression { position, message } => Error::Expression { position, message: format!("{path}: {message}") },
        other => other,
    })?;
    if !state && (e.uses(Var::Y) || e.uses(Var::Z)) {
        return Err(Error::Config(format!("{path}: only t and w may appear here")));
    }
    Ok(e)
}

/// Node values of a `(t, w)` expression.
pub fn node_values(tree: &ScenarioTree, e: &Expr) -> FProcess {
    FProcess::from_fn(tree, |c| e.eval(c.time, 0.0, 0.0, c.position))
}

/// Driver given by an expression in `t, y, z, w`.
#[derive(Debug, Clone)]
pub struct ExprDriver {
    expr: Expr,
    lambda: f64,
}

impl ExprDriver {
    pub fn new(expr: Expr, tree: &ScenarioTree, declared: Option<f64>) -> Result<Self> {
        let lambda = match declared {
            Some(l) => l,
            None => {
                let (ly, lz) = expr.lipschitz(tree)?;
                ly.max(lz)
            }
        };
        Ok(Self { expr, lambda })
    }
}

impl Driver for ExprDriver {
    fn eval(&self, ctx: NodeCtx, y: f64, z: f64) -> f64 {
        self.expr.eval(ctx.time, y, z, ctx.position)
    }

    fn lipschitz(&self) -> f64 {
        self.lambda
    }
}

impl ProblemConfig {
    fn validate(&self, path: &str) -> Result<()> {
        match (&self.f, &self.linear) {
            (Some(f), None) => {
                parse_field(&format!("{path}.f"), f, true)?;
            }
            (None, Some(l)) => {
                parse_field(&format!("{path}.linear.a"), &l.a, false)?;
                parse_field(&format!("{path}.linear.b"), &l.b, false)?;
                parse_field(&format!("{path}.linear.c"), &l.c, false)?;
            }
            _ => return Err(Error::Config(format!("{path}: exactly one of `f` and `linear` is required"))),
        }
        parse_field(&format!("{path}.L"), &self.lower, false)?;
        parse_field(&format!("{path}.U"), &self.upper, false)?;
        parse_field(&format!("{path}.xi"), &self.xi, false)?;
        Ok(())
    }

    pub fn linear_driver(&self, tree: &ScenarioTree) -> Result<Option<LinearDriver>> {
        let Some(l) = &self.linear else { return Ok(None) };
        let a = node_values(tree, &parse_field("linear.a", &l.a, false)?);
        let b = node_values(tree, &parse_field("linear.b", &l.b, false)?);
        let c = node_values(tree, &parse_field("linear.c", &l.c, false)?);
        Ok(Some(LinearDriver::new(tree, a, b, c)?))
    }

    /// The problem, and the linear driver when the config gives one.
    pub fn build(&self, sub: &SubFiltration) -> Result<(Problem, Option<LinearDriver>)> {
        let tree = sub.tree();
        let n = tree.steps();
        let lower = node_values(tree, &parse_field("L", &self.lower, false)?);
        let upper = node_values(tree, &parse_field("U", &self.upper, false)?);
        let xi = node_values(tree, &parse_field("xi", &self.xi, false)?).level(n).to_vec();
        let linear = self.linear_driver(tree)?;
        let driver: Arc<dyn Driver> = match (&linear, &self.f) {
            (Some(ld), _) => Arc::new(ld.clone()),
            (None, Some(f)) => Arc::new(ExprDriver::new(parse_field("f", f, true)?, tree, self.lipschitz)?),
            (None, None) => return Err(Error::Config("exactly one of `f` and `linear` is required".into())),
        };
        Ok((Problem::new(sub.clone(), xi, driver, lower, upper)?, linear))
    }
}

impl SwitchingConfig {
    pub fn build(&self, sub: &SubFiltration) -> Result<SwitchingProblem> {
        let tree = sub.tree();
        let v = |path: &str, src: &str| parse_field(path, src, false).map(|e| node_values(tree, &e));
        SwitchingProblem::new(
            sub.clone(),
            v("switching.psi1", &self.psi1)?,
            v("switching.psi2", &self.psi2)?,
            v("switching.D", &self.stop_cost)?,
            v("switching.a", &self.a)?,
        )
    }
}

impl DynkinConfig {
    pub fn rewards(&self, sub: &SubFiltration) -> Result<(FProcess, FProcess)> {
        let tree = sub.tree();
        Ok((
            node_values(tree, &parse_field("dynkin.lower", &self.lower, false)?),
            node_values(tree, &parse_field("dynkin.upper", &self.upper, false)?),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const MINIMAL: &str = r#"{
        "tree": {"kind": "binary", "steps": 2},
        "sub": {"mode": "trivial"},
        "problem": {"f": "0", "L": "-1", "U": "1", "xi": "0"}
    }"#;

    #[test]
    fn minimal_config_builds() {
        let cfg = parse_config(MINIMAL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tree = cfg.tree(&mut rng).unwrap();
        let sub = build_sub(&cfg.sub, tree, &mut rng).unwrap();
        let (p, ld) = cfg.problem_config().unwrap().build(&sub).unwrap();
        assert!(ld.is_none());
        assert_eq!(p.tree().steps(), 2);
        assert_eq!(p.lipschitz(), 0.0);
        assert!(p.lower().levels().iter().flatten().all(|&v| v == -1.0));
    }

    #[test]
    fn missing_obstacle_is_named() {
        let text = MINIMAL.replace(r#", "U": "1""#, "");
        match parse_config(&text) {
            Err(Error::Config(m)) => assert!(m.contains("problem") && m.contains("`U`"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace(r#""sub""#, r#""extra": 1, "sub""#);
        assert!(matches!(parse_config(&text), Err(Error::Config(_))));
        let text = MINIMAL.replace(r#""steps": 2"#, r#""steps": 2, "width": 3"#);
        match parse_config(&text) {
            Err(Error::Config(m)) => assert!(m.contains("tree"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn expression_errors_carry_positions() {
        let text = MINIMAL.replace(r#""f": "0""#, r#""f": "1 + * y""#);
        assert!(matches!(parse_config(&text), Err(Error::Expression { position: 4, .. })));
        let text = MINIMAL.replace(r#""L": "-1""#, r#""L": "y - 1""#);
        assert!(matches!(parse_config(&text), Err(Error::Config(_))));
    }

    #[test]
    fn round_trip() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        cfg.sub = SubConfig::Custom { atoms: AtomMaps(vec![vec![0], vec![0, 1], vec![0, 0, 1, 1]]) };
        cfg.seed = Some(7);
        cfg.solver.method = Method::Penalty;
        cfg.solver.n = Some(0.1 + 0.2);
        cfg.dynkin = Some(DynkinConfig { lower: "-1".into(), upper: "1".into(), criterion: Criterion::UpperOnTies });
        cfg.skorokhod = Some(SkorokhodConfig { x: vec![0.1, 1.0 / 3.0], lower: vec![-1.0, -1.0], upper: vec![1.0, 1e-300] });
        cfg.tree = Some(TreeConfig::Explicit {
            horizon: 0.7,
            levels: vec![vec![BranchSpec { parent: 0, prob: 0.3, increment: 0.1 }, BranchSpec { parent: 0, prob: 0.7, increment: -0.3 / 7.0 }]],
        });
        let back = parse_config(&emit_config(&cfg));
        // the custom atoms no longer match the explicit tree, so validation of
        // the maps is deferred to build time and parsing still succeeds
        assert_eq!(back.unwrap(), cfg);
        assert_eq!(parse_config(&emit_config(&ScenarioConfig::minimal_for_tests())).unwrap(), ScenarioConfig::minimal_for_tests());
    }

    impl ScenarioConfig {
        fn minimal_for_tests() -> Self {
            parse_config(MINIMAL).unwrap()
        }
    }

    #[test]
    fn linear_section() {
        let text = MINIMAL.replace(r#""f": "0""#, r#""linear": {"a": "0.5", "b": "w", "c": "t"}"#);
        let cfg = parse_config(&text).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sub = build_sub(&cfg.sub, cfg.tree(&mut rng).unwrap(), &mut rng).unwrap();
        let (_, ld) = cfg.problem_config().unwrap().build(&sub).unwrap();
        let ld = ld.unwrap();
        assert_eq!(ld.a.get(1, 0), 0.5);
        assert_eq!(ld.b.get(1, 0), sub.tree().node(1, 0).position);
        let both = text.replace(r#""linear""#, r#""f": "0", "linear""#);
        assert!(parse_config(&both).is_err());
    }
}
