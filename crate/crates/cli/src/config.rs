//! Line-oriented `section.key = value` configuration.
//!
//! Values are scalars, `auto`, or lists written as `[a, b]` or `a, b`.
//! Integer lists also accept inclusive ranges such as `1..10`. Unknown and
//! duplicate keys are errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{CliError, CliResult, ConfigIssue};

pub const DEFAULT_THETA: f64 = 0.6;
pub const DEFAULT_SIGMA_W: f64 = 3.0;

/// A value that is either given or resolved from the problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting<T> {
    Auto,
    Value(T),
}

impl<T: Copy> Setting<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Setting::Auto => None,
            Setting::Value(v) => Some(*v),
        }
    }
}

/// Step size: the estimator's own bound, another estimator's bound, or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    Auto,
    AutoOf(EstimatorName),
    Value(f64),
}

impl GammaSpec {
    fn render(&self) -> String {
        match self {
            GammaSpec::Auto => "auto".into(),
            GammaSpec::AutoOf(e) => format!("auto:{e}"),
            GammaSpec::Value(x) => float(*x),
        }
    }

    fn parse(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(GammaSpec::Auto);
        }
        if let Some(name) = s.strip_prefix("auto:") {
            return name.trim().parse().map(GammaSpec::AutoOf);
        }
        parse_f64(s).map(GammaSpec::Value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemConfig {
    Pvb {
        n: usize,
        theta: f64,
        sigma_w: f64,
        seed: u64,
    },
    Quadratic {
        d: usize,
        mu: f64,
        lipschitz: f64,
        seed: u64,
    },
    /// `workers` quadratic blocks of size `d` coupled with strength `lambda`;
    /// worker `m` uses seed `seed + m`.
    Mixing {
        workers: usize,
        lambda: f64,
        d: usize,
        mu: f64,
        lipschitz: f64,
        seed: u64,
    },
}

impl ProblemConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemConfig::Pvb { .. } => "pvb",
            ProblemConfig::Quadratic { .. } => "quadratic",
            ProblemConfig::Mixing { .. } => "mixing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EstimatorName {
    FullDet,
    Noisy,
    Past,
    Vr,
    Coord,
    Quant,
    Qvr,
    Is,
    Local,
    MisCoord,
}

impl EstimatorName {
    pub const ALL: [EstimatorName; 10] = [
        EstimatorName::FullDet,
        EstimatorName::Noisy,
        EstimatorName::Past,
        EstimatorName::Vr,
        EstimatorName::Coord,
        EstimatorName::Quant,
        EstimatorName::Qvr,
        EstimatorName::Is,
        EstimatorName::Local,
        EstimatorName::MisCoord,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorName::FullDet => "fulldet",
            EstimatorName::Noisy => "noisy",
            EstimatorName::Past => "past",
            EstimatorName::Vr => "vr",
            EstimatorName::Coord => "coord",
            EstimatorName::Quant => "quant",
            EstimatorName::Qvr => "qvr",
            EstimatorName::Is => "is",
            EstimatorName::Local => "local",
            EstimatorName::MisCoord => "miscoord",
        }
    }
}

impl fmt::Display for EstimatorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        EstimatorName::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| format!("unknown estimator `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantizerName {
    RandK,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    /// Proportional to the component Lipschitz constants.
    Auto,
    Uniform,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeName {
    StronglyMonotone,
    Monotone,
}

impl RegimeName {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeName::StronglyMonotone => "strongly_monotone",
            RegimeName::Monotone => "monotone",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSection {
    pub estimators: Vec<EstimatorName>,
    /// Oracle noise level for `noisy` and `past`.
    pub sigma: f64,
    pub quantizer: QuantizerName,
    /// RandK keep count; `auto` is `ceil(d / 4)`.
    pub keep: Setting<usize>,
    pub weights: Weights,
    /// Probability of the local branch; `auto` is the recommended `τ`.
    pub split: Setting<f64>,
    pub gamma: GammaSpec,
    pub gamma_mult: Vec<f64>,
    pub tau: Setting<f64>,
    pub iterations: usize,
    pub lyapunov_weight: Setting<f64>,
    pub regime: Setting<RegimeName>,
    pub averaging: bool,
    pub stride: Setting<usize>,
    pub seeds: Vec<u64>,
}

impl SolverSection {
    pub fn new(estimator: EstimatorName, iterations: usize) -> Self {
        SolverSection {
            estimators: vec![estimator],
            sigma: 0.0,
            quantizer: QuantizerName::RandK,
            keep: Setting::Auto,
            weights: Weights::Auto,
            split: Setting::Auto,
            gamma: GammaSpec::Auto,
            gamma_mult: vec![1.0],
            tau: Setting::Auto,
            iterations,
            lyapunov_weight: Setting::Auto,
            regime: Setting::Auto,
            averaging: true,
            stride: Setting::Auto,
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputSection {
    pub trace: Option<String>,
    pub dir: Option<String>,
    pub report: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySection {
    pub estimators: Vec<EstimatorName>,
    /// Oracle noise level used for `noisy` and `past`.
    pub sigma: f64,
    pub n_draws: usize,
    pub states: usize,
    pub pairs: usize,
    pub mc_pairs: usize,
    pub negative_control: bool,
    pub seed: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            estimators: vec![
                EstimatorName::Noisy,
                EstimatorName::Past,
                EstimatorName::Vr,
                EstimatorName::Coord,
                EstimatorName::Quant,
                EstimatorName::Qvr,
                EstimatorName::Is,
                EstimatorName::Local,
            ],
            sigma: 1.0,
            n_draws: 100_000,
            states: 5,
            pairs: 100,
            mc_pairs: 20,
            negative_control: true,
            seed: 0,
        }
    }
}

/// Cost column a sweep comparison is aligned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    FullCalls,
    CompCalls,
    Coords,
    Bits,
    Comms,
    LocalSteps,
    /// Full calls plus component calls divided by `M`.
    Oracle,
}

impl Axis {
    pub const ALL: [Axis; 7] =
        [Axis::FullCalls, Axis::CompCalls, Axis::Coords, Axis::Bits, Axis::Comms, Axis::LocalSteps, Axis::Oracle];

    pub fn as_str(&self) -> &'static str {
        match self {
            Axis::FullCalls => "full_calls",
            Axis::CompCalls => "comp_calls",
            Axis::Coords => "coords",
            Axis::Bits => "bits",
            Axis::Comms => "comms",
            Axis::LocalSteps => "local_steps",
            Axis::Oracle => "oracle",
        }
    }

    /// The axis an estimator's savings show up on.
    pub fn natural(e: EstimatorName) -> Axis {
        match e {
            EstimatorName::Coord | EstimatorName::MisCoord => Axis::Coords,
            EstimatorName::Quant => Axis::Bits,
            EstimatorName::Local => Axis::Comms,
            EstimatorName::Vr | EstimatorName::Is | EstimatorName::Qvr => Axis::Oracle,
            _ => Axis::FullCalls,
        }
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Axis::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| format!("unknown axis `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub axis: Setting<Axis>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub problem: ProblemConfig,
    pub solver: Option<SolverSection>,
    pub output: OutputSection,
    pub verify: Option<VerifySection>,
    pub sweep: Option<SweepSection>,
}

impl Config {
    pub fn new(problem: ProblemConfig) -> Self {
        Config { problem, solver: None, output: OutputSection::default(), verify: None, sweep: None }
    }
}

pub fn parse_config(text: &str) -> CliResult<Config> {
    let mut r = Reader::new(text);
    let config = build(&mut r);
    r.finish();
    if r.issues.is_empty() {
        Ok(config.expect("no issues implies a complete config"))
    } else {
        r.issues.sort_by_key(|i| i.line);
        Err(CliError::Config(r.issues))
    }
}

pub fn render_config(c: &Config) -> String {
    let mut out = String::new();
    for (k, v) in config_entries(c) {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

/// Every `(key, value)` line that [`render_config`] writes, in order.
pub fn config_entries(c: &Config) -> Vec<(String, String)> {
    let mut e: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| e.push((k.to_string(), v));
    put("problem.kind", c.problem.kind().into());
    match &c.problem {
        ProblemConfig::Pvb { n, theta, sigma_w, seed } => {
            put("problem.n", n.to_string());
            put("problem.theta", float(*theta));
            put("problem.sigma_w", float(*sigma_w));
            put("problem.seed", seed.to_string());
        }
        ProblemConfig::Quadratic { d, mu, lipschitz, seed } => {
            put("problem.d", d.to_string());
            put("problem.mu", float(*mu));
            put("problem.L", float(*lipschitz));
            put("problem.seed", seed.to_string());
        }
        ProblemConfig::Mixing { workers, lambda, d, mu, lipschitz, seed } => {
            put("problem.workers", workers.to_string());
            put("problem.lambda", float(*lambda));
            put("problem.d", d.to_string());
            put("problem.mu", float(*mu));
            put("problem.L", float(*lipschitz));
            put("problem.seed", seed.to_string());
        }
    }
    if let Some(s) = &c.solver {
        put("solver.estimator", list(&s.estimators, |e| e.to_string()));
        put("solver.sigma", float(s.sigma));
        put(
            "solver.quantizer",
            match s.quantizer {
                QuantizerName::RandK => "randk".into(),
                QuantizerName::Identity => "identity".into(),
            },
        );
        put("solver.keep", setting(&s.keep, |k| k.to_string()));
        put(
            "solver.weights",
            match &s.weights {
                Weights::Auto => "auto".into(),
                Weights::Uniform => "uniform".into(),
                Weights::Given(w) => list(w, |x| float(*x)),
            },
        );
        put("solver.split", setting(&s.split, |x| float(*x)));
        put("solver.gamma", s.gamma.render());
        put("solver.gamma_mult", list(&s.gamma_mult, |x| float(*x)));
        put("solver.tau", setting(&s.tau, |x| float(*x)));
        put("solver.K", s.iterations.to_string());
        put("solver.T", setting(&s.lyapunov_weight, |x| float(*x)));
        put("solver.regime", setting(&s.regime, |r| r.as_str().into()));
        put("solver.averaging", s.averaging.to_string());
        put("solver.stride", setting(&s.stride, |x| x.to_string()));
        put("solver.seed", list(&s.seeds, |x| x.to_string()));
    }
    if let Some(t) = &c.output.trace {
        put("output.trace", t.clone());
    }
    if let Some(d) = &c.output.dir {
        put("output.dir", d.clone());
    }
    if let Some(r) = &c.output.report {
        put("output.report", r.clone());
    }
    if let Some(v) = &c.verify {
        put("verify.estimators", list(&v.estimators, |e| e.to_string()));
        put("verify.sigma", float(v.sigma));
        put("verify.n_draws", v.n_draws.to_string());
        put("verify.states", v.states.to_string());
        put("verify.pairs", v.pairs.to_string());
        put("verify.mc_pairs", v.mc_pairs.to_string());
        put("verify.negative_control", v.negative_control.to_string());
        put("verify.seed", v.seed.to_string());
    }
    if let Some(s) = &c.sweep {
        put("sweep.axis", setting(&s.axis, |a| a.as_str().into()));
    }
    e
}

/// Shortest decimal that parses back to the same `f64`.
pub fn float(x: f64) -> String {
    format!("{x:?}")
}

fn list<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    format!("[{}]", items.iter().map(f).collect::<Vec<_>>().join(", "))
}

fn setting<T>(s: &Setting<T>, f: impl Fn(&T) -> String) -> String {
    match s {
        Setting::Auto => "auto".into(),
        Setting::Value(v) => f(v),
    }
}

fn build(r: &mut Reader) -> Option<Config> {
    let problem = build_problem(r);
    let solver = if r.has_section("solver") { build_solver(r) } else { Some(None) };
    let output = OutputSection {
        trace: r.opt("output.trace", parse_path).flatten(),
        dir: r.opt("output.dir", parse_path).flatten(),
        report: r.opt("output.report", parse_path).flatten(),
    };
    let verify = if r.has_section("verify") { build_verify(r).map(Some) } else { Some(None) };
    let sweep = if r.has_section("sweep") {
        Some(Some(SweepSection { axis: r.or("sweep.axis", Setting::Auto, auto_or(parse_from_str::<Axis>)) }))
    } else {
        Some(None)
    };
    Some(Config { problem: problem?, solver: solver?, output, verify: verify?, sweep: sweep? })
}

fn build_problem(r: &mut Reader) -> Option<ProblemConfig> {
    let kind: String = r.req("problem.kind", |s| Ok(s.to_string()))?;
    let seed = r.or("problem.seed", 0, parse_u64);
    match kind.as_str() {
        "pvb" => {
            let n = r.req("problem.n", parse_usize);
            let theta = r.or("problem.theta", DEFAULT_THETA, parse_f64);
            let sigma_w = r.or("problem.sigma_w", DEFAULT_SIGMA_W, parse_f64);
            Some(ProblemConfig::Pvb { n: n?, theta, sigma_w, seed })
        }
        "quadratic" => {
            let d = r.req("problem.d", parse_usize);
            let mu = r.req("problem.mu", parse_f64);
            let l = r.req("problem.L", parse_f64);
            Some(ProblemConfig::Quadratic { d: d?, mu: mu?, lipschitz: l?, seed })
        }
        "mixing" => {
            let workers = r.req("problem.workers", parse_usize);
            let lambda = r.req("problem.lambda", parse_f64);
            let d = r.req("problem.d", parse_usize);
            let mu = r.req("problem.mu", parse_f64);
            let l = r.req("problem.L", parse_f64);
            Some(ProblemConfig::Mixing { workers: workers?, lambda: lambda?, d: d?, mu: mu?, lipschitz: l?, seed })
        }
        other => {
            let line = r.line_of("problem.kind");
            r.issue(
                line,
                format!("`problem.kind`: unknown problem kind `{other}` (expected pvb, quadratic or mixing)"),
            );
            None
        }
    }
}

fn build_solver(r: &mut Reader) -> Option<Option<SolverSection>> {
    let estimators = r.req("solver.estimator", list_of(parse_from_str::<EstimatorName>));
    let iterations = r.req("solver.K", parse_usize);
    let sigma = r.or("solver.sigma", 0.0, parse_f64);
    let quantizer = r.or("solver.quantizer", QuantizerName::RandK, |s| match s {
        "randk" => Ok(QuantizerName::RandK),
        "identity" => Ok(QuantizerName::Identity),
        _ => Err(format!("expected randk or identity, got `{s}`")),
    });
    let keep = r.or("solver.keep", Setting::Auto, auto_or(parse_usize));
    let weights = r.or("solver.weights", Weights::Auto, |s| match s {
        "auto" => Ok(Weights::Auto),
        "uniform" => Ok(Weights::Uniform),
        _ => list_of(parse_f64)(s).map(Weights::Given),
    });
    let split = r.or("solver.split", Setting::Auto, auto_or(parse_f64));
    let gamma = r.or("solver.gamma", GammaSpec::Auto, GammaSpec::parse);
    let gamma_mult = r.or("solver.gamma_mult", vec![1.0], list_of(parse_f64));
    let tau = r.or("solver.tau", Setting::Auto, auto_or(parse_f64));
    let lyapunov_weight = r.or("solver.T", Setting::Auto, auto_or(parse_f64));
    let regime = r.or(
        "solver.regime",
        Setting::Auto,
        auto_or(|s| match s {
            "strongly_monotone" => Ok(RegimeName::StronglyMonotone),
            "monotone" => Ok(RegimeName::Monotone),
            _ => Err(format!("expected auto, strongly_monotone or monotone, got `{s}`")),
        }),
    );
    let averaging = r.or("solver.averaging", true, parse_bool);
    let stride = r.or("solver.stride", Setting::Auto, auto_or(parse_usize));
    let seeds = r.or("solver.seed", vec![0], list_of_u64);
    Some(Some(SolverSection {
        estimators: estimators?,
        sigma,
        quantizer,
        keep,
        weights,
        split,
        gamma,
        gamma_mult,
        tau,
        iterations: iterations?,
        lyapunov_weight,
        regime,
        averaging,
        stride,
        seeds,
    }))
}

fn build_verify(r: &mut Reader) -> Option<VerifySection> {
    let d = VerifySection::default();
    Some(VerifySection {
        estimators: r.or("verify.estimators", d.estimators, list_of(parse_from_str::<EstimatorName>)),
        sigma: r.or("verify.sigma", d.sigma, parse_f64),
        n_draws: r.or("verify.n_draws", d.n_draws, parse_usize),
        states: r.or("verify.states", d.states, parse_usize),
        pairs: r.or("verify.pairs", d.pairs, parse_usize),
        mc_pairs: r.or("verify.mc_pairs", d.mc_pairs, parse_usize),
        negative_control: r.or("verify.negative_control", d.negative_control, parse_bool),
        seed: r.or("verify.seed", d.seed, parse_u64),
    })
}

type Parse<T> = Result<T, String>;

fn parse_path(s: &str) -> Parse<String> {
    if s.is_empty() {
        Err("expected a path".into())
    } else {
        Ok(s.to_string())
    }
}

fn parse_usize(s: &str) -> Parse<usize> {
    s.parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
}

fn parse_u64(s: &str) -> Parse<u64> {
    s.parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
}

fn parse_f64(s: &str) -> Parse<f64> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("expected a finite number, got `{s}`")),
    }
}

fn parse_bool(s: &str) -> Parse<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

fn parse_from_str<T: FromStr<Err = String>>(s: &str) -> Parse<T> {
    s.parse()
}

fn auto_or<T>(f: impl Fn(&str) -> Parse<T>) -> impl Fn(&str) -> Parse<Setting<T>> {
    move |s| if s == "auto" { Ok(Setting::Auto) } else { f(s).map(Setting::Value) }
}

fn split_list(s: &str) -> Parse<Vec<&str>> {
    let inner = match (s.strip_prefix('['), s.ends_with(']')) {
        (Some(rest), true) => &rest[..rest.len() - 1],
        (None, false) => s,
        _ => return Err(format!("unbalanced brackets in `{s}`")),
    };
    let items: Vec<&str> = inner.split(',').map(str::trim).collect();
    if items.iter().any(|i| i.is_empty()) {
        return Err(format!("empty list item in `{s}`"));
    }
    Ok(items)
}

fn list_of<T>(f: impl Fn(&str) -> Parse<T>) -> impl Fn(&str) -> Parse<Vec<T>> {
    move |s| split_list(s)?.into_iter().map(&f).collect()
}

fn list_of_u64(s: &str) -> Parse<Vec<u64>> {
    let mut out = Vec::new();
    for item in split_list(s)? {
        match item.split_once("..") {
            Some((lo, hi)) => {
                let (lo, hi) = (parse_u64(lo.trim())?, parse_u64(hi.trim())?);
                if lo > hi {
                    return Err(format!("empty range `{item}`"));
                }
                out.extend(lo..=hi);
            }
            None => out.push(parse_u64(item)?),
        }
    }
    Ok(out)
}

const SECTIONS: [&str; 5] = ["problem", "solver", "output", "verify", "sweep"];

struct Reader {
    entries: BTreeMap<String, (usize, String)>,
    used: BTreeSet<String>,
    issues: Vec<ConfigIssue>,
}

impl Reader {
    fn new(text: &str) -> Self {
        let mut r = Reader { entries: BTreeMap::new(), used: BTreeSet::new(), issues: Vec::new() };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                r.issue(line, format!("expected `section.key = value`, got `{content}`"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            match key.split_once('.') {
                Some((sec, name)) if SECTIONS.contains(&sec) && !name.is_empty() => {}
                _ => {
                    r.issue(line, format!("unknown key `{key}`"));
                    continue;
                }
            }
            if let Some((first, _)) = r.entries.get(key) {
                let first = *first;
                r.issue(line, format!("duplicate key `{key}` (first set on line {first})"));
                continue;
            }
            r.entries.insert(key.to_string(), (line, value.to_string()));
        }
        r
    }

    fn issue(&mut self, line: usize, message: String) {
        self.issues.push(ConfigIssue { line, message });
    }

    fn has_section(&self, sec: &str) -> bool {
        self.entries.keys().any(|k| k.split_once('.').map(|(s, _)| s) == Some(sec))
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |(l, _)| *l)
    }

    fn opt<T>(&mut self, key: &str, f: impl Fn(&str) -> Parse<T>) -> Option<Option<T>> {
        let Some((line, value)) = self.entries.get(key).cloned() else {
            return Some(None);
        };
        self.used.insert(key.to_string());
        match f(&value) {
            Ok(v) => Some(Some(v)),
            Err(msg) => {
                self.issue(line, format!("`{key}`: {msg}"));
                None
            }
        }
    }

    fn req<T>(&mut self, key: &str, f: impl Fn(&str) -> Parse<T>) -> Option<T> {
        match self.opt(key, f) {
            Some(Some(v)) => Some(v),
            Some(None) => {
                self.issue(0, format!("missing required key `{key}`"));
                None
            }
            None => None,
        }
    }

    /// Parsed value or `default`; parse failures are recorded and also yield
    /// `default` so later keys are still checked.
    fn or<T>(&mut self, key: &str, default: T, f: impl Fn(&str) -> Parse<T>) -> T {
        match self.opt(key, f) {
            Some(Some(v)) => v,
            _ => default,
        }
    }

    fn finish(&mut self) {
        let unused: Vec<(usize, String)> = self
            .entries
            .iter()
            .filter(|(k, _)| !self.used.contains(*k))
            .map(|(k, (line, _))| (*line, k.clone()))
            .collect();
        for (line, key) in unused {
            self.issue(line, format!("unknown key `{key}`"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn issues(text: &str) -> Vec<ConfigIssue> {
        match parse_config(text) {
            Err(CliError::Config(i)) => i,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_pvb_uses_defaults() {
        let c =
            parse_config("problem.kind = pvb\nproblem.n = 5\nsolver.estimator = fulldet\nsolver.K = 1000\n").unwrap();
        assert_eq!(c.problem, ProblemConfig::Pvb { n: 5, theta: 0.6, sigma_w: 3.0, seed: 0 });
        assert_eq!(c.solver, Some(SolverSection::new(EstimatorName::FullDet, 1000)));
        assert!(c.verify.is_none() && c.sweep.is_none());
    }

    #[test]
    fn misspelled_key_names_its_line() {
        let i = issues("problem.kind = pvb\nproblem.n = 5\nsolver.estimator = vr\nsolver.gama = 0.1\nsolver.K = 10\n");
        assert_eq!(i.len(), 1);
        assert_eq!(i[0].line, 4);
        assert!(i[0].message.contains("solver.gama"));
    }

    #[test]
    fn reports_every_problem() {
        let i = issues("problem.kind = pvb\nsolver.estimator = sgd\nsolver.K = many\nfoo = 1\n");
        let lines: Vec<usize> = i.iter().map(|x| x.line).collect();
        assert_eq!(lines, vec![0, 2, 3, 4]);
        assert!(i[0].message.contains("problem.n"));
        assert!(i[1].message.contains("unknown estimator"));
    }

    #[test]
    fn key_of_other_problem_kind_is_rejected() {
        let i = issues("problem.kind = quadratic\nproblem.d = 3\nproblem.mu = 1\nproblem.L = 2\nproblem.theta = 0.5\n");
        assert_eq!(i.len(), 1);
        assert_eq!(i[0].line, 5);
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let i = issues("problem.kind = pvb\nproblem.n = 5\nproblem.n = 6\n");
        assert_eq!(i[0].line, 3);
        assert!(i[0].message.contains("duplicate"));
    }

    #[test]
    fn lists_ranges_and_comments() {
        let c = parse_config(
            "# sweep\nproblem.kind = pvb\nproblem.n = 3 # side\nsolver.estimator = [fulldet, past]\n\
             solver.K = 10\nsolver.seed = 1..3, 7\nsolver.gamma_mult = 0.5, 1.0\n",
        )
        .unwrap();
        let s = c.solver.unwrap();
        assert_eq!(s.estimators, vec![EstimatorName::FullDet, EstimatorName::Past]);
        assert_eq!(s.seeds, vec![1, 2, 3, 7]);
        assert_eq!(s.gamma_mult, vec![0.5, 1.0]);
    }

    #[test]
    fn bad_lists_are_rejected() {
        for v in ["[1, 2", "1,,2", "3..1"] {
            let text =
                format!("problem.kind = pvb\nproblem.n = 3\nsolver.estimator = vr\nsolver.K = 1\nsolver.seed = {v}\n");
            assert_eq!(issues(&text)[0].line, 5, "{v}");
        }
    }

    #[test]
    fn verify_section_defaults() {
        let c = parse_config("problem.kind = pvb\nproblem.n = 3\nverify.seed = 4\n").unwrap();
        let v = c.verify.unwrap();
        assert_eq!(v.seed, 4);
        assert_eq!(v.n_draws, 100_000);
        assert_eq!(v.estimators.len(), 8);
    }

    #[test]
    fn render_round_trips_floats() {
        let mut c = Config::new(ProblemConfig::Quadratic { d: 4, mu: 0.1, lipschitz: 1.0 / 3.0, seed: 9 });
        let mut s = SolverSection::new(EstimatorName::Is, 7);
        s.weights = Weights::Given(vec![0.25, 0.75]);
        s.gamma = GammaSpec::Value(1e-7);
        c.solver = Some(s);
        c.sweep = Some(SweepSection { axis: Setting::Value(Axis::Bits) });
        assert_eq!(parse_config(&render_config(&c)).unwrap(), c);
        c.solver.as_mut().unwrap().gamma = GammaSpec::AutoOf(EstimatorName::FullDet);
        assert_eq!(parse_config(&render_config(&c)).unwrap(), c);
    }
}
