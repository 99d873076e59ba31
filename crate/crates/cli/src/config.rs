//! JSON experiment configuration.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use decprox::netgraph::{AlgorithmId, GraphKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

const TOP_KEYS: &[&str] = &[
    "problem",
    "graph",
    "algorithms",
    "lambda",
    "rho",
    "eta",
    "c",
    "iters",
    "record_every",
    "output_dir",
    "data",
    "seeds",
];
const GRAPH_KEYS: &[&str] = &["kind", "K", "seed", "extra_edge_prob"];
const ALGORITHM_KEYS: &[&str] = &["name", "mu", "c"];
const SEED_KEYS: &[&str] = &["data", "partition", "init"];
const SYNTHETIC_KEYS: &[&str] = &["samples", "dim", "flip"];
const LIBSVM_KEYS: &[&str] = &["path", "normalize", "label_map", "dim"];
const COUNTEREXAMPLE_KEYS: &[&str] = &["M"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    LassoQuadratic,
    LogisticL1,
    Counterexample,
}

/// Algorithms the runner knows by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmName {
    ProxEd,
    ProxAtc1,
    ProxAtc2,
    /// general recursion with one of the named triples
    Puda(AlgorithmId),
    PgExtra,
    DlAdmm,
}

impl AlgorithmName {
    pub fn label(self) -> String {
        match self {
            AlgorithmName::ProxEd => "ProxED".into(),
            AlgorithmName::ProxAtc1 => "ProxATC1".into(),
            AlgorithmName::ProxAtc2 => "ProxATC2".into(),
            AlgorithmName::Puda(id) => format!("PUDA-{id}"),
            AlgorithmName::PgExtra => "PGEXTRA".into(),
            AlgorithmName::DlAdmm => "DLADMM".into(),
        }
    }

    pub fn needs_c(self) -> bool {
        matches!(
            self,
            AlgorithmName::Puda(AlgorithmId::Nids | AlgorithmId::Dlm) | AlgorithmName::DlAdmm
        )
    }

    /// Runs with one regularizer per agent.
    pub fn is_separate(self) -> bool {
        matches!(self, AlgorithmName::PgExtra | AlgorithmName::DlAdmm)
    }
}

impl fmt::Display for AlgorithmName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for AlgorithmName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let lower = s.to_ascii_lowercase();
        let named = match lower.as_str() {
            "proxed" | "prox-ed" => Some(AlgorithmName::ProxEd),
            "proxatc1" | "prox-atc1" => Some(AlgorithmName::ProxAtc1),
            "proxatc2" | "prox-atc2" => Some(AlgorithmName::ProxAtc2),
            "pgextra" | "pg-extra" => Some(AlgorithmName::PgExtra),
            "dladmm" | "dl-admm" => Some(AlgorithmName::DlAdmm),
            _ => None,
        };
        if let Some(n) = named {
            return Ok(n);
        }
        let table = lower.strip_prefix("puda-").unwrap_or(&lower);
        AlgorithmId::from_str(table).map(AlgorithmName::Puda).map_err(|_| format!("unknown algorithm {s:?}"))
    }
}

impl Serialize for AlgorithmName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// 0.9 times the theoretical step-size bound
    Auto,
    Fixed(f64),
}

impl Serialize for StepSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            StepSize::Auto => s.serialize_str("auto"),
            StepSize::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmEntry {
    pub name: AlgorithmName,
    pub mu: StepSize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSpec {
    #[serde(serialize_with = "graph_kind_name")]
    pub kind: GraphKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub extra_edge_prob: f64,
}

fn graph_kind_name<S: serde::Serializer>(kind: &GraphKind, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(match kind {
        GraphKind::Ring => "ring",
        GraphKind::Grid => "grid",
        GraphKind::Complete => "complete",
        GraphKind::RandomConnected => "random_connected",
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        samples: usize,
        dim: usize,
        flip: f64,
    },
    Libsvm {
        path: PathBuf,
        normalize: bool,
        label_map: (f64, f64),
        #[serde(skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
    Counterexample {
        #[serde(rename = "M")]
        m: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Seeds {
    pub data: u64,
    pub partition: u64,
    /// zero start when absent
    pub init: Option<u64>,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub graph: GraphSpec,
    pub algorithms: Vec<AlgorithmEntry>,
    pub lambda: f64,
    pub rho: f64,
    pub eta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub iters: usize,
    pub record_every: usize,
    pub output_dir: PathBuf,
    pub data: DataSource,
    pub seeds: Seeds,
}

impl ExperimentConfig {
    /// Two agents on one edge with `R_1`, `R_2` of dimension `m`.
    pub fn counterexample_preset(m: usize, iters: usize) -> Self {
        let mu = 0.005;
        let entry = |name| AlgorithmEntry { name, mu: StepSize::Fixed(mu), c: None };
        ExperimentConfig {
            problem: Problem::Counterexample,
            graph: GraphSpec { kind: GraphKind::Complete, k: 2, seed: 0, extra_edge_prob: 0.0 },
            algorithms: vec![
                entry(AlgorithmName::PgExtra),
                AlgorithmEntry { c: Some(1.0 / (4.0 * mu)), ..entry(AlgorithmName::DlAdmm) },
                entry(AlgorithmName::ProxEd),
            ],
            lambda: 0.0,
            rho: 0.0,
            eta: 1.0,
            c: None,
            iters,
            record_every: 10,
            output_dir: PathBuf::from("counterexample_out"),
            data: DataSource::Counterexample { m },
            seeds: Seeds { data: 0, partition: 0, init: None },
        }
    }

    /// `c` for one algorithm: its own value, else the shared one.
    pub fn c_for(&self, entry: &AlgorithmEntry) -> Option<f64> {
        entry.c.or(self.c)
    }
}

#[derive(Deserialize)]
struct RawGraph {
    kind: Option<String>,
    #[serde(rename = "K")]
    k: Option<usize>,
    seed: Option<u64>,
    extra_edge_prob: Option<f64>,
}

#[derive(Deserialize)]
struct RawAlgorithm {
    name: String,
    mu: Option<Value>,
    c: Option<f64>,
}

#[derive(Deserialize)]
struct RawSeeds {
    data: Option<u64>,
    partition: Option<u64>,
    init: Option<u64>,
}

#[derive(Deserialize)]
struct RawConfig {
    problem: Problem,
    graph: Option<RawGraph>,
    algorithms: Vec<RawAlgorithm>,
    lambda: Option<f64>,
    rho: Option<f64>,
    eta: Option<f64>,
    c: Option<f64>,
    iters: Option<usize>,
    record_every: Option<usize>,
    output_dir: Option<PathBuf>,
    seeds: Option<RawSeeds>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn unknown_keys(v: &Value, allowed: &[&str], path: &str, out: &mut Vec<String>) {
    if let Value::Object(map) = v {
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                out.push(format!("{path}{key}"));
            }
        }
    }
}

fn check_keys(root: &Value) -> Result<(), CliError> {
    if !root.is_object() {
        return Err(bad("configuration must be a JSON object"));
    }
    let mut unknown = Vec::new();
    unknown_keys(root, TOP_KEYS, "", &mut unknown);
    if let Some(g) = root.get("graph") {
        unknown_keys(g, GRAPH_KEYS, "graph.", &mut unknown);
    }
    if let Some(s) = root.get("seeds") {
        unknown_keys(s, SEED_KEYS, "seeds.", &mut unknown);
    }
    if let Some(Value::Array(algs)) = root.get("algorithms") {
        for (i, a) in algs.iter().enumerate() {
            unknown_keys(a, ALGORITHM_KEYS, &format!("algorithms[{i}]."), &mut unknown);
        }
    }
    if let Some(Value::Object(d)) = root.get("data") {
        for (source, body) in d {
            let allowed = match source.as_str() {
                "synthetic" => SYNTHETIC_KEYS,
                "libsvm" => LIBSVM_KEYS,
                "counterexample" => COUNTEREXAMPLE_KEYS,
                _ => {
                    unknown.push(format!("data.{source}"));
                    continue;
                }
            };
            unknown_keys(body, allowed, &format!("data.{source}."), &mut unknown);
        }
    }
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(bad(format!("unknown keys: {}", unknown.join(", "))))
    }
}

fn step_size(v: Option<&Value>, idx: usize) -> Result<StepSize, CliError> {
    match v {
        None => Ok(StepSize::Auto),
        Some(Value::String(s)) if s == "auto" => Ok(StepSize::Auto),
        Some(Value::Number(n)) => {
            let mu = n.as_f64().unwrap_or(f64::NAN);
            if mu > 0.0 && mu.is_finite() {
                Ok(StepSize::Fixed(mu))
            } else {
                Err(bad(format!("algorithms[{idx}].mu must be positive, got {mu}")))
            }
        }
        Some(other) => Err(bad(format!("algorithms[{idx}].mu must be a positive number or \"auto\", got {other}"))),
    }
}

fn data_source(problem: Problem, v: Option<Value>) -> Result<DataSource, CliError> {
    let parse_err = |e: serde_json::Error| bad(format!("data: {e}"));
    let Some(v) = v else {
        return Ok(match problem {
            Problem::Counterexample => DataSource::Counterexample { m: 2000 },
            _ => DataSource::Synthetic { samples: 1000, dim: 20, flip: 0.1 },
        });
    };
    let Value::Object(map) = v else {
        return Err(bad("data must be an object with one of synthetic, libsvm, counterexample"));
    };
    if map.len() != 1 {
        return Err(bad("data must name exactly one source"));
    }
    let (source, body) = map.into_iter().next().expect("one entry");
    let src = match source.as_str() {
        "synthetic" => {
            #[derive(Deserialize)]
            struct S {
                samples: Option<usize>,
                dim: Option<usize>,
                flip: Option<f64>,
            }
            let s: S = serde_json::from_value(body).map_err(parse_err)?;
            let flip = s.flip.unwrap_or(0.1);
            if !(0.0..=1.0).contains(&flip) {
                return Err(bad(format!("data.synthetic.flip must lie in [0, 1], got {flip}")));
            }
            DataSource::Synthetic { samples: s.samples.unwrap_or(1000), dim: s.dim.unwrap_or(20), flip }
        }
        "libsvm" => {
            #[derive(Deserialize)]
            struct L {
                path: PathBuf,
                normalize: Option<bool>,
                label_map: Option<(f64, f64)>,
                dim: Option<usize>,
            }
            let l: L = serde_json::from_value(body).map_err(parse_err)?;
            DataSource::Libsvm {
                path: l.path,
                normalize: l.normalize.unwrap_or(true),
                label_map: l.label_map.unwrap_or((1.0, -1.0)),
                dim: l.dim,
            }
        }
        "counterexample" => {
            #[derive(Deserialize)]
            struct C {
                #[serde(rename = "M")]
                m: usize,
            }
            let c: C = serde_json::from_value(body).map_err(parse_err)?;
            DataSource::Counterexample { m: c.m }
        }
        other => return Err(bad(format!("unknown data source {other:?}"))),
    };
    match (&src, problem) {
        (DataSource::Counterexample { m }, Problem::Counterexample) => {
            if *m < 2 || m % 2 != 0 {
                return Err(bad(format!("data.counterexample.M must be even and at least 2, got {m}")));
            }
        }
        (DataSource::Counterexample { .. }, _) => {
            return Err(bad("counterexample data only fits the counterexample problem"));
        }
        (_, Problem::Counterexample) => return Err(bad("the counterexample problem takes data.counterexample")),
        (DataSource::Synthetic { samples, dim, .. }, _) if *samples == 0 || *dim == 0 => {
            return Err(bad("synthetic data needs positive samples and dim"));
        }
        _ => {}
    }
    Ok(src)
}

/// Reads and resolves a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, CliError> {
    let root: Value = serde_json::from_str(text).map_err(|e| bad(format!("invalid JSON: {e}")))?;
    check_keys(&root)?;
    let data = root.get("data").cloned();
    let raw: RawConfig = serde_json::from_value(root).map_err(|e| bad(e.to_string()))?;
    let problem = raw.problem;
    let counter = problem == Problem::Counterexample;

    if counter {
        for (key, present) in [("graph", raw.graph.is_some()), ("lambda", raw.lambda.is_some()), ("rho", raw.rho.is_some())] {
            if present {
                return Err(bad(format!("{key} does not apply to the counterexample problem")));
            }
        }
    } else if raw.eta.is_some() {
        return Err(bad("eta only applies to the counterexample problem"));
    }

    let graph = if counter {
        GraphSpec { kind: GraphKind::Complete, k: 2, seed: 0, extra_edge_prob: 0.0 }
    } else {
        let g = raw.graph.unwrap_or(RawGraph { kind: None, k: None, seed: None, extra_edge_prob: None });
        let kind = match g.kind {
            Some(k) => GraphKind::from_str(&k).map_err(|e| bad(format!("graph.kind: {e}")))?,
            None => GraphKind::RandomConnected,
        };
        let spec = GraphSpec {
            kind,
            k: g.k.unwrap_or(20),
            seed: g.seed.unwrap_or(0),
            extra_edge_prob: g.extra_edge_prob.unwrap_or(0.2),
        };
        if spec.k < 2 {
            return Err(bad(format!("graph.K must be at least 2, got {}", spec.k)));
        }
        if !(0.0..=1.0).contains(&spec.extra_edge_prob) {
            return Err(bad(format!("graph.extra_edge_prob must lie in [0, 1], got {}", spec.extra_edge_prob)));
        }
        spec
    };

    let lambda = if counter { 0.0 } else { raw.lambda.unwrap_or(1e-4) };
    let rho = if counter { 0.0 } else { raw.rho.unwrap_or(2e-3) };
    let eta = if counter { raw.eta.unwrap_or(1.0) } else { 0.0 };
    if !counter && !(lambda > 0.0 && lambda.is_finite()) {
        return Err(bad(format!("lambda must be positive, got {lambda}")));
    }
    if !counter && !(rho >= 0.0 && rho.is_finite()) {
        return Err(bad(format!("rho must be non-negative, got {rho}")));
    }
    if counter && !(eta > 0.0 && eta.is_finite()) {
        return Err(bad(format!("eta must be positive, got {eta}")));
    }
    if let Some(c) = raw.c {
        if !(c > 0.0 && c.is_finite()) {
            return Err(bad(format!("c must be positive, got {c}")));
        }
    }

    if raw.algorithms.is_empty() {
        return Err(bad("algorithms must list at least one algorithm"));
    }
    let mut algorithms = Vec::with_capacity(raw.algorithms.len());
    let mut seen = BTreeSet::new();
    for (i, a) in raw.algorithms.into_iter().enumerate() {
        let name = AlgorithmName::from_str(&a.name).map_err(|e| bad(format!("algorithms[{i}]: {e}")))?;
        if !seen.insert(name.label()) {
            return Err(bad(format!("algorithms[{i}]: {name} listed twice")));
        }
        let mu = step_size(a.mu.as_ref(), i)?;
        if let Some(c) = a.c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(bad(format!("algorithms[{i}].c must be positive, got {c}")));
            }
        }
        if name.needs_c() && a.c.or(raw.c).is_none() {
            return Err(bad(format!("algorithms[{i}]: {name} needs c")));
        }
        algorithms.push(AlgorithmEntry { name, mu, c: a.c });
    }

    let iters = raw.iters.unwrap_or(if counter { 20000 } else { 5000 });
    let record_every = raw.record_every.unwrap_or(1);
    if iters == 0 || record_every == 0 {
        return Err(bad("iters and record_every must be positive"));
    }
    let seeds = raw.seeds.map_or(Seeds { data: 0, partition: 0, init: None }, |s| Seeds {
        data: s.data.unwrap_or(0),
        partition: s.partition.unwrap_or(0),
        init: s.init,
    });

    Ok(ExperimentConfig {
        problem,
        graph,
        algorithms,
        lambda,
        rho,
        eta,
        c: raw.c,
        iters,
        record_every,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        data: data_source(problem, data)?,
        seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str(r#"{"problem": "lasso_quadratic", "algorithms": [{"name": "ProxED"}]}"#).unwrap();
        assert_eq!(cfg.graph.k, 20);
        assert_eq!(cfg.lambda, 1e-4);
        assert_eq!(cfg.rho, 2e-3);
        assert_eq!(cfg.iters, 5000);
        assert_eq!(cfg.algorithms[0].mu, StepSize::Auto);
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let err = parse_config_str(
            r#"{"problem": "logistic_l1", "algorithms": [{"name": "ProxED", "step": 1}], "colour": 1, "graph": {"size": 3}}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        for key in ["colour", "graph.size", "algorithms[0].step"] {
            assert!(msg.contains(key), "{msg}");
        }
    }

    #[test]
    fn rejects_bad_values() {
        let cases = [
            r#"{"problem": "logistic_l1", "lambda": -1, "algorithms": [{"name": "ProxED"}]}"#,
            r#"{"problem": "logistic_l1", "algorithms": [{"name": "ProxED", "mu": 0}]}"#,
            r#"{"problem": "logistic_l1", "algorithms": [{"name": "Nope"}]}"#,
            r#"{"problem": "logistic_l1", "algorithms": [{"name": "DLM"}]}"#,
            r#"{"problem": "logistic_l1", "algorithms": []}"#,
            r#"{"problem": "counterexample", "lambda": 1, "algorithms": [{"name": "PGEXTRA"}]}"#,
            r#"{"problem": "counterexample", "data": {"counterexample": {"M": 3}}, "algorithms": [{"name": "PGEXTRA"}]}"#,
            r#"{"algorithms": [{"name": "ProxED"}]}"#,
        ];
        for text in cases {
            assert!(matches!(parse_config_str(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn algorithm_names() {
        assert_eq!("proxatc2".parse::<AlgorithmName>().unwrap(), AlgorithmName::ProxAtc2);
        assert_eq!("NIDS".parse::<AlgorithmName>().unwrap(), AlgorithmName::Puda(AlgorithmId::Nids));
        assert_eq!("PUDA-EXTRA".parse::<AlgorithmName>().unwrap(), AlgorithmName::Puda(AlgorithmId::Extra));
    }

    #[test]
    fn counterexample_preset_values() {
        let cfg = ExperimentConfig::counterexample_preset(2000, 20000);
        assert_eq!((cfg.graph.k, cfg.eta), (2, 1.0));
        assert_eq!(cfg.data, DataSource::Counterexample { m: 2000 });
        assert!(cfg.algorithms.iter().all(|a| a.mu == StepSize::Fixed(0.005)));
    }
}
