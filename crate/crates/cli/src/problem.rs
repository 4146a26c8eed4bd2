//! Problem files: JSON documents with the sections
//!
//! - `space`: `probabilities`, optional `labels`
//! - `variables`: optional list of `{name, values}` for `eval` and `dominance`
//! - `objective`: `risk` and a convex `integrand`
//! - `constraint`: a concave `integrand`, `benchmark` values, `interval`, `grid`
//! - `feasible_box`: `lower`, `upper`
//! - `information_partition`: optional list of scenario index blocks
//! - `solver`: optional solver options
//! - `candidate`, `slater_point`, `perturbation_direction`: optional flat
//!   decision vectors
//!
//! `objective`, `constraint` and `feasible_box` come as a group: either all
//! three are present or none is.

use std::path::Path;

use riskcalc_core::{
    AffinePiece, Curvature, DominanceConstraint, FeasibleBox, InfoPartition, MaxAffineIntegrand,
    Orientation, ProbSpace, ProblemSpec, RandomVariable, RiskError, RiskFunctional,
    SolverOptions, SpectralMeasure,
};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::diag::{Code, Diagnostic};

type Parsed<T> = std::result::Result<T, Diagnostic>;

/// A parsed and validated problem file.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub space: ProbSpace,
    pub variables: Vec<(String, RandomVariable)>,
    pub spec: Option<ProblemSpec>,
    pub solver: SolverOptions,
    pub candidate: Option<Vec<f64>>,
    pub slater_point: Option<Vec<f64>>,
    pub perturbation_direction: Option<Vec<f64>>,
    /// Hex SHA-256 of the file contents.
    pub digest: String,
}

impl ProblemFile {
    pub fn spec(&self) -> Parsed<&ProblemSpec> {
        self.spec.as_ref().ok_or_else(|| {
            Diagnostic::new(Code::Missing, "objective", "this command needs objective, constraint and feasible_box")
        })
    }

    pub fn variable(&self, name: &str) -> Option<&RandomVariable> {
        self.variables.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

pub fn parse_problem(path: &Path) -> Parsed<ProblemFile> {
    let bytes = std::fs::read(path)
        .map_err(|e| Diagnostic::new(Code::Io, path.display().to_string(), e.to_string()))?;
    let text = String::from_utf8(bytes)
        .map_err(|e| Diagnostic::new(Code::Json, path.display().to_string(), e.to_string()))?;
    parse_problem_str(&text)
}

pub fn parse_problem_str(text: &str) -> Parsed<ProblemFile> {
    let digest = hex::encode(Sha256::digest(text.as_bytes()));
    let root: Value = serde_json::from_str(text).map_err(|e| {
        let code = if e.to_string().starts_with("number out of range") {
            Code::NonFinite
        } else {
            Code::Json
        };
        let msg = e.to_string();
        let msg = msg.split(" at line").next().unwrap_or(&msg).to_string();
        Diagnostic::new(code, format!("{}:{}", e.line(), e.column()), msg)
    })?;
    let root = Node::root(&root);
    root.expect_object()?;

    let space_node = root.required("space")?;
    let probs = space_node.required("probabilities")?.numbers()?;
    if probs.is_empty() {
        return Err(space_node.field("probabilities").err(Code::Dimension, "at least one scenario is required"));
    }
    let n = probs.len();
    let space = match space_node.optional("labels") {
        Some(labels) => {
            let names = labels.strings()?;
            if names.len() != n {
                return Err(labels.err(Code::Dimension, format!("{} labels for {n} scenarios", names.len())));
            }
            ProbSpace::with_labels(probs, names)
        }
        None => ProbSpace::new(probs),
    }
    .map_err(|e| space_node.field("probabilities").err(Code::Normalization, core_message(e)))?;

    let mut variables = Vec::new();
    if let Some(vars) = root.optional("variables") {
        for (i, item) in vars.items()?.into_iter().enumerate() {
            let name = item.required("name")?.string()?;
            let values = item.required("values")?.numbers()?;
            if values.len() != n {
                return Err(item.field("values").err(
                    Code::Dimension,
                    format!("{} values for {n} scenarios", values.len()),
                ));
            }
            if variables.iter().any(|(existing, _)| *existing == name) {
                return Err(vars.index(i).err(Code::FieldType, format!("duplicate variable name {name:?}")));
            }
            let rv = RandomVariable::new(&space, values).map_err(|e| item.err(Code::Model, core_message(e)))?;
            variables.push((name, rv));
        }
    }

    let info = match root.optional("information_partition") {
        Some(node) => parse_partition(&node, n)?,
        None => InfoPartition::trivial(n),
    };

    let grouped = ["objective", "constraint", "feasible_box"];
    let present: Vec<&str> = grouped.iter().copied().filter(|k| root.optional(k).is_some()).collect();
    let spec = if present.is_empty() {
        None
    } else {
        if let Some(missing) = grouped.iter().find(|k| !present.contains(k)) {
            return Err(Diagnostic::new(
                Code::Missing,
                *missing,
                format!("section {missing:?} is required together with {}", present.join(", ")),
            ));
        }
        Some(parse_spec(&root, &space, info.clone())?)
    };

    let solver = match root.optional("solver") {
        Some(node) => parse_solver(&node)?,
        None => SolverOptions::default(),
    };

    let total = spec.as_ref().map(ProblemSpec::total_dim);
    let point = |key: &str| -> Parsed<Option<Vec<f64>>> {
        let Some(node) = root.optional(key) else {
            return Ok(None);
        };
        let v = node.numbers()?;
        match total {
            None => Err(node.err(Code::Missing, "decision vectors need objective, constraint and feasible_box")),
            Some(t) if v.len() != t => Err(node.err(
                Code::Dimension,
                format!("expected {t} coordinates (dimension × information blocks), got {}", v.len()),
            )),
            Some(_) => Ok(Some(v)),
        }
    };
    let candidate = point("candidate")?;
    let slater_point = point("slater_point")?;
    let perturbation_direction = point("perturbation_direction")?;
    if let (Some(spec), Some(c)) = (&spec, &candidate) {
        let x = spec.decision(c).map_err(|e| Diagnostic::model("candidate", e))?;
        if !spec.in_box(&x) {
            return Err(Diagnostic::new(Code::Box, "candidate", "candidate lies outside the feasible box"));
        }
    }

    Ok(ProblemFile {
        space,
        variables,
        spec,
        solver,
        candidate,
        slater_point,
        perturbation_direction,
        digest,
    })
}

fn core_message(e: RiskError) -> String {
    match e {
        RiskError::Structural(m)
        | RiskError::Domain(m)
        | RiskError::Configuration(m)
        | RiskError::Precondition(m)
        | RiskError::InvariantViolation(m) => m,
    }
}

fn parse_partition(node: &Node, n: usize) -> Parsed<InfoPartition> {
    let mut blocks = Vec::new();
    for block in node.items()? {
        let mut members = Vec::new();
        for item in block.items()? {
            let k = item.index_value()?;
            if k >= n {
                return Err(item.err(Code::Partition, format!("scenario index {k} out of range for {n} scenarios")));
            }
            members.push(k);
        }
        if members.is_empty() {
            return Err(block.err(Code::Partition, "empty block"));
        }
        blocks.push(members);
    }
    InfoPartition::new(n, blocks).map_err(|e| node.err(Code::Partition, core_message(e)))
}

fn parse_integrand(node: &Node, space: &ProbSpace, curvature: Curvature) -> Parsed<MaxAffineIntegrand> {
    let dim_node = node.required("dimension")?;
    let dim = dim_node.index_value()?;
    if dim == 0 {
        return Err(dim_node.err(Code::Dimension, "dimension must be at least 1"));
    }
    let scenarios = node.required("scenarios")?;
    let list = scenarios.items()?;
    if list.len() != space.len() {
        return Err(scenarios.err(
            Code::Dimension,
            format!("{} scenario entries for {} scenarios", list.len(), space.len()),
        ));
    }
    let mut pieces = Vec::with_capacity(list.len());
    for scen in list {
        let items = scen.items()?;
        if items.is_empty() {
            return Err(scen.err(Code::Dimension, "each scenario needs at least one affine piece"));
        }
        let mut row = Vec::with_capacity(items.len());
        for piece in items {
            let slope_node = piece.required("slope")?;
            let slope = slope_node.numbers()?;
            if slope.len() != dim {
                return Err(slope_node.err(
                    Code::Dimension,
                    format!("slope has {} entries in dimension {dim}", slope.len()),
                ));
            }
            let intercept = piece.required("intercept")?.number()?;
            row.push(AffinePiece::new(slope, intercept));
        }
        pieces.push(row);
    }
    MaxAffineIntegrand::new(space, dim, curvature, pieces).map_err(|e| node.err(Code::Model, core_message(e)))
}

fn parse_level(node: &Node) -> Parsed<f64> {
    let p = node.number()?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(node.err(Code::LevelDomain, format!("level {p} outside (0, 1]")));
    }
    Ok(p)
}

fn parse_risk(node: &Node) -> Parsed<RiskFunctional> {
    let kind_node = node.required("kind")?;
    let kind = kind_node.string()?;
    match kind.as_str() {
        "expectation" => Ok(RiskFunctional::Expectation),
        "avar_upper" => {
            let level = parse_level(&node.required("level")?)
                .map_err(|d| Diagnostic { code: Code::RiskSpec, ..d })?;
            RiskFunctional::avar_upper(level).map_err(|e| node.err(Code::RiskSpec, core_message(e)))
        }
        "spectral" => {
            let levels = node.required("levels")?.numbers()?;
            let weights = node.required("weights")?.numbers()?;
            SpectralMeasure::new(levels, weights, Orientation::UpperLoss)
                .map(RiskFunctional::Spectral)
                .map_err(|e| node.err(Code::RiskSpec, core_message(e)))
        }
        other => Err(kind_node.err(
            Code::RiskSpec,
            format!("unknown risk kind {other:?}; expected expectation, avar_upper or spectral"),
        )),
    }
}

fn parse_spec(root: &Node, space: &ProbSpace, info: InfoPartition) -> Parsed<ProblemSpec> {
    let obj = root.required("objective")?;
    let risk = parse_risk(&obj.required("risk")?)?;
    let f = parse_integrand(&obj.required("integrand")?, space, Curvature::Convex)?;

    let con = root.required("constraint")?;
    let g = parse_integrand(&con.required("integrand")?, space, Curvature::Concave)?;
    if g.dim() != f.dim() {
        return Err(con.field("integrand").field("dimension").err(
            Code::Dimension,
            format!("constraint dimension {} differs from objective dimension {}", g.dim(), f.dim()),
        ));
    }
    let bench_node = con.required("benchmark")?;
    let bench = bench_node.numbers()?;
    if bench.len() != space.len() {
        return Err(bench_node.err(
            Code::Dimension,
            format!("{} benchmark values for {} scenarios", bench.len(), space.len()),
        ));
    }
    let benchmark = RandomVariable::new(space, bench).map_err(|e| bench_node.err(Code::Model, core_message(e)))?;
    let interval_node = con.required("interval")?;
    let interval = interval_node.numbers()?;
    if interval.len() != 2 {
        return Err(interval_node.err(Code::Dimension, "interval needs exactly two numbers [alpha, beta]"));
    }
    let grid_node = con.required("grid")?;
    let grid_items = grid_node.items()?;
    let mut grid = Vec::with_capacity(grid_items.len());
    for item in &grid_items {
        grid.push(parse_level(item)?);
    }
    let constraint = DominanceConstraint::new(benchmark, interval[0], interval[1], grid)
        .map_err(|e| con.err(Code::LevelDomain, core_message(e)))?;

    let fb = root.required("feasible_box")?;
    let lower_node = fb.required("lower")?;
    let upper_node = fb.required("upper")?;
    let lower = lower_node.numbers()?;
    let upper = upper_node.numbers()?;
    for (node, v) in [(&lower_node, &lower), (&upper_node, &upper)] {
        if v.len() != f.dim() {
            return Err(node.err(Code::Dimension, format!("{} bounds in dimension {}", v.len(), f.dim())));
        }
    }
    let feasible_box = FeasibleBox::new(lower, upper).map_err(|e| fb.err(Code::Box, core_message(e)))?;

    ProblemSpec::new(risk, f, g, constraint, feasible_box, info).map_err(|e| root.err(Code::Model, core_message(e)))
}

fn parse_solver(node: &Node) -> Parsed<SolverOptions> {
    node.expect_object()?;
    let mut opts = SolverOptions::default();
    if let Some(v) = node.optional("max_iter") {
        opts.max_iter = v.index_value()?;
    }
    if let Some(v) = node.optional("epoch_len") {
        let e = v.index_value()?;
        if e == 0 {
            return Err(v.err(Code::FieldType, "epoch_len must be positive"));
        }
        opts.epoch_len = e;
    }
    if let Some(v) = node.optional("tol_feas") {
        let t = v.number()?;
        if !(t >= 0.0) {
            return Err(v.err(Code::FieldType, "tol_feas must be nonnegative"));
        }
        opts.tol_feas = t;
    }
    if let Some(v) = node.optional("step0") {
        let s = v.number()?;
        if !(s > 0.0) {
            return Err(v.err(Code::FieldType, "step0 must be positive"));
        }
        opts.step0 = Some(s);
    }
    Ok(opts)
}

/// A JSON value with its field path.
struct Node<'a> {
    value: Option<&'a Value>,
    path: String,
}

impl<'a> Node<'a> {
    fn root(value: &'a Value) -> Self {
        Self {
            value: Some(value),
            path: String::new(),
        }
    }

    fn err(&self, code: Code, msg: impl Into<String>) -> Diagnostic {
        let loc = if self.path.is_empty() { "<root>" } else { &self.path };
        Diagnostic::new(code, loc, msg)
    }

    fn child_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn field(&self, key: &str) -> Node<'a> {
        Node {
            value: self.value.and_then(|v| v.get(key)),
            path: self.child_path(key),
        }
    }

    fn index(&self, i: usize) -> Node<'a> {
        Node {
            value: self.value.and_then(|v| v.get(i)),
            path: format!("{}[{i}]", self.path),
        }
    }

    fn get(&self) -> Parsed<&'a Value> {
        self.value.ok_or_else(|| self.err(Code::Missing, "required field is missing"))
    }

    fn expect_object(&self) -> Parsed<()> {
        match self.get()? {
            Value::Object(_) => Ok(()),
            _ => Err(self.err(Code::FieldType, "expected an object")),
        }
    }

    fn required(&self, key: &str) -> Parsed<Node<'a>> {
        self.expect_object()?;
        let child = self.field(key);
        match child.value {
            Some(Value::Null) | None => Err(child.err(Code::Missing, "required field is missing")),
            Some(_) => Ok(child),
        }
    }

    fn optional(&self, key: &str) -> Option<Node<'a>> {
        let child = self.field(key);
        match child.value {
            Some(Value::Null) | None => None,
            Some(_) => Some(child),
        }
    }

    fn items(&self) -> Parsed<Vec<Node<'a>>> {
        match self.get()? {
            Value::Array(a) => Ok((0..a.len()).map(|i| self.index(i)).collect()),
            _ => Err(self.err(Code::FieldType, "expected an array")),
        }
    }

    fn number(&self) -> Parsed<f64> {
        match self.get()? {
            Value::Number(num) => {
                let v = num.as_f64().ok_or_else(|| self.err(Code::FieldType, "expected a number"))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(self.err(Code::NonFinite, "number is not finite"))
                }
            }
            Value::String(s) if is_non_finite_literal(s) => {
                Err(self.err(Code::NonFinite, format!("non-finite value {s:?} is not allowed here")))
            }
            _ => Err(self.err(Code::FieldType, "expected a number")),
        }
    }

    fn numbers(&self) -> Parsed<Vec<f64>> {
        self.items()?.iter().map(Node::number).collect()
    }

    fn index_value(&self) -> Parsed<usize> {
        match self.get()? {
            Value::Number(num) => num
                .as_u64()
                .and_then(|v| usize::try_from(v).ok())
                .ok_or_else(|| self.err(Code::FieldType, "expected a nonnegative integer")),
            _ => Err(self.err(Code::FieldType, "expected a nonnegative integer")),
        }
    }

    fn string(&self) -> Parsed<String> {
        match self.get()? {
            Value::String(s) => Ok(s.clone()),
            _ => Err(self.err(Code::FieldType, "expected a string")),
        }
    }

    fn strings(&self) -> Parsed<Vec<String>> {
        self.items()?.iter().map(Node::string).collect()
    }
}

fn is_non_finite_literal(s: &str) -> bool {
    matches!(s.to_ascii_lowercase().as_str(), "inf" | "+inf" | "-inf" | "infinity" | "+infinity" | "-infinity" | "nan")
}
