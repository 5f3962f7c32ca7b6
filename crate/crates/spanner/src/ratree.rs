//! Relational-algebra query trees over spanner leaves.
//!
//! A query is a tree of projection / union / natural-join / difference nodes
//! whose leaves are placeholders, plus an instantiation assigning each
//! placeholder an inline regex formula, a vset-automaton file, or a
//! degree-bounded external program ("black box"). The planner checks the
//! shared-variable bound `k` at every join and difference node and picks a
//! strategy per node; the evaluator compiles bottom-up and streams the result
//! without duplicates.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::algebra::{join_disjunctive, join_fpt, union_va};
use crate::difference::{difference_adhoc, difference_synchronized};
use crate::enumerate::{enumerate, Enumerator};
use crate::error::{Error, Result};
use crate::model::{Document, Mapping, MappingSet, Span, Variable};
use crate::regex::{infer_alphabet, parse_regex, RESERVED_VAR_PREFIX};
use crate::va::{
    check_functional, compile_regex, extended_configs, mappings_to_va, project,
    va_from_json, va_synchronized_for, Va,
};

// ---------------------------------------------------------------------------
// Trees and instantiations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RaTree {
    Leaf(String),
    Project { vars: BTreeSet<Variable>, child: Box<RaTree> },
    Union(Box<RaTree>, Box<RaTree>),
    Join(Box<RaTree>, Box<RaTree>),
    Difference(Box<RaTree>, Box<RaTree>),
}

impl RaTree {
    pub fn leaf_ids(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk_leaves(&mut out);
        out
    }

    fn walk_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            RaTree::Leaf(id) => out.push(id),
            RaTree::Project { child, .. } => child.walk_leaves(out),
            RaTree::Union(l, r) | RaTree::Join(l, r) | RaTree::Difference(l, r) => {
                l.walk_leaves(out);
                r.walk_leaves(out);
            }
        }
    }
}

/// Parse the RA-tree JSON (`{"op":...}` inner nodes, `{"leaf":"id"}` leaves);
/// errors carry the JSON-pointer path of the offending node.
pub fn parse_ra_tree(text: &str) -> Result<RaTree> {
    let v: serde_json::Value = serde_json::from_str(text)
        .map_err(|source| Error::Json { context: "RA-tree JSON".into(), source })?;
    let tree = parse_tree_node(&v, "")?;
    let ids = tree.leaf_ids();
    let mut seen = BTreeSet::new();
    for id in &ids {
        if !seen.insert(*id) {
            return Err(Error::invalid(format!("duplicate placeholder id `{id}`")));
        }
    }
    Ok(tree)
}

fn parse_tree_node(v: &serde_json::Value, path: &str) -> Result<RaTree> {
    let at = |msg: &str| Error::invalid(format!("{}: {msg}", if path.is_empty() { "/" } else { path }));
    let obj = v.as_object().ok_or_else(|| at("expected a JSON object"))?;
    if let Some(leaf) = obj.get("leaf") {
        let id = leaf.as_str().ok_or_else(|| at("`leaf` must be a string"))?;
        if obj.len() != 1 {
            return Err(at("a leaf node has no other fields"));
        }
        return Ok(RaTree::Leaf(id.to_string()));
    }
    let op = obj
        .get("op")
        .and_then(|o| o.as_str())
        .ok_or_else(|| at("expected `leaf` or a string `op`"))?;
    let child = |name: &str| -> Result<Box<RaTree>> {
        let sub = obj
            .get(name)
            .ok_or_else(|| at(&format!("operator `{op}` requires `{name}`")))?;
        Ok(Box::new(parse_tree_node(sub, &format!("{path}/{name}"))?))
    };
    let no_field = |name: &str| -> Result<()> {
        if obj.contains_key(name) {
            return Err(at(&format!("operator `{op}` does not take `{name}`")));
        }
        Ok(())
    };
    match op {
        "project" => {
            no_field("left")?;
            no_field("right")?;
            let vars = obj
                .get("vars")
                .and_then(|x| x.as_array())
                .ok_or_else(|| at("`project` requires an array `vars`"))?
                .iter()
                .map(|x| {
                    x.as_str()
                        .map(Variable::new)
                        .ok_or_else(|| at("`vars` entries must be strings"))
                })
                .collect::<Result<BTreeSet<Variable>>>()?;
            Ok(RaTree::Project { vars, child: child("child")? })
        }
        "union" | "join" | "difference" => {
            no_field("child")?;
            let (l, r) = (child("left")?, child("right")?);
            Ok(match op {
                "union" => RaTree::Union(l, r),
                "join" => RaTree::Join(l, r),
                _ => RaTree::Difference(l, r),
            })
        }
        other => Err(at(&format!("unknown operator `{other}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlackBoxSpec {
    pub cmd: Vec<String>,
    pub vars: BTreeSet<Variable>,
    /// Maximal cardinality of any output mapping, over all documents.
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LeafSpec {
    Regex(String),
    VaFile(String),
    BlackBox(BlackBoxSpec),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Instantiation {
    specs: BTreeMap<String, LeafSpec>,
}

impl Instantiation {
    pub fn new(specs: BTreeMap<String, LeafSpec>) -> Self {
        Instantiation { specs }
    }

    pub fn get(&self, id: &str) -> Option<&LeafSpec> {
        self.specs.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.specs.keys().map(String::as_str)
    }
}

/// Parse the instantiation JSON: `{"id":{"regex":"..."}}`,
/// `{"id":{"va":"file.json"}}`, or
/// `{"id":{"blackbox":{"cmd":[...],"vars":[...],"degree":n}}}`.
pub fn load_instantiation(text: &str) -> Result<Instantiation> {
    let v: serde_json::Value = serde_json::from_str(text)
        .map_err(|source| Error::Json { context: "instantiation JSON".into(), source })?;
    let obj = v
        .as_object()
        .ok_or_else(|| Error::invalid("/: instantiation must be a JSON object"))?;
    let mut specs = BTreeMap::new();
    for (id, spec) in obj {
        let at = |msg: &str| Error::invalid(format!("/{id}: {msg}"));
        let spec_obj = spec.as_object().ok_or_else(|| at("expected a JSON object"))?;
        if spec_obj.len() != 1 {
            return Err(at("exactly one of `regex`, `va`, `blackbox` is required"));
        }
        let parsed = if let Some(r) = spec_obj.get("regex") {
            LeafSpec::Regex(r.as_str().ok_or_else(|| at("`regex` must be a string"))?.into())
        } else if let Some(p) = spec_obj.get("va") {
            LeafSpec::VaFile(p.as_str().ok_or_else(|| at("`va` must be a file path"))?.into())
        } else if let Some(b) = spec_obj.get("blackbox") {
            let b = b.as_object().ok_or_else(|| at("`blackbox` must be an object"))?;
            let cmd = b
                .get("cmd")
                .and_then(|c| c.as_array())
                .ok_or_else(|| at("`blackbox.cmd` must be an array"))?
                .iter()
                .map(|c| {
                    c.as_str()
                        .map(String::from)
                        .ok_or_else(|| at("`blackbox.cmd` entries must be strings"))
                })
                .collect::<Result<Vec<String>>>()?;
            if cmd.is_empty() {
                return Err(at("`blackbox.cmd` must not be empty"));
            }
            let vars = b
                .get("vars")
                .and_then(|c| c.as_array())
                .ok_or_else(|| at("`blackbox.vars` must be an array"))?
                .iter()
                .map(|c| {
                    c.as_str()
                        .map(Variable::new)
                        .ok_or_else(|| at("`blackbox.vars` entries must be strings"))
                })
                .collect::<Result<BTreeSet<Variable>>>()?;
            if vars.iter().any(|x| x.name().starts_with(RESERVED_VAR_PREFIX)) {
                return Err(at(&format!("variables must not use the `{RESERVED_VAR_PREFIX}` prefix")));
            }
            let degree = b
                .get("degree")
                .and_then(|x| x.as_u64())
                .ok_or_else(|| at("`blackbox.degree` must be a non-negative integer"))?
                as usize;
            if degree > vars.len() {
                return Err(at("`blackbox.degree` exceeds the declared variable count"));
            }
            LeafSpec::BlackBox(BlackBoxSpec { cmd, vars, degree })
        } else {
            return Err(at("expected `regex`, `va`, or `blackbox`"));
        };
        specs.insert(id.clone(), parsed);
    }
    Ok(Instantiation { specs })
}

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct NodeReport {
    pub path: String,
    pub op: String,
    pub shared: usize,
    pub within_bound: bool,
    pub strategy: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanReport {
    pub k: usize,
    pub tractable: bool,
    pub nodes: Vec<NodeReport>,
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Shared-variable bound enforced at every join/difference node.
    pub k: usize,
    /// Explicit alphabet; default is pattern literals plus document symbols.
    pub alphabet: Option<BTreeSet<char>>,
    pub blackbox_timeout: Duration,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { k: 3, alphabet: None, blackbox_timeout: Duration::from_secs(10) }
    }
}

/// Shared-variable counts and strategy choices for every join/difference
/// node, with the tractability verdict against `k`.
pub fn validate_plan(tree: &RaTree, inst: &Instantiation, k: usize) -> Result<PlanReport> {
    QueryEngine::new(tree.clone(), inst.clone(), EvalConfig { k, ..EvalConfig::default() })?
        .plan()
}

/// One-shot evaluation; see [`QueryEngine`] for reuse across documents.
pub fn eval_query(
    tree: &RaTree,
    inst: &Instantiation,
    d: &Document,
    cfg: &EvalConfig,
) -> Result<Enumerator> {
    QueryEngine::new(tree.clone(), inst.clone(), cfg.clone())?.eval(d)
}

// ---------------------------------------------------------------------------
// The engine
// ---------------------------------------------------------------------------

pub struct QueryEngine {
    tree: RaTree,
    inst: Instantiation,
    cfg: EvalConfig,
    /// VA-file leaves, loaded once.
    va_files: HashMap<String, Va>,
    /// Compiled document-independent subtrees, keyed by (alphabet, node path).
    /// Ad-hoc nodes (difference, black boxes) are recompiled per document.
    static_cache: HashMap<(String, String), Vec<Va>>,
}

impl QueryEngine {
    pub fn new(tree: RaTree, inst: Instantiation, cfg: EvalConfig) -> Result<Self> {
        let mut va_files = HashMap::new();
        for id in tree.leaf_ids() {
            match inst.get(id) {
                None => {
                    return Err(Error::invalid(format!(
                        "instantiation is missing placeholder `{id}`"
                    )));
                }
                Some(LeafSpec::VaFile(path)) => {
                    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                        context: format!("reading VA file `{path}` for leaf `{id}`"),
                        source,
                    })?;
                    let v: serde_json::Value =
                        serde_json::from_str(&text).map_err(|source| Error::Json {
                            context: format!("VA file `{path}` for leaf `{id}`"),
                            source,
                        })?;
                    let a = va_from_json(&v)?;
                    if a.vars().iter().any(|x| x.name().starts_with(RESERVED_VAR_PREFIX)) {
                        return Err(Error::invalid(format!(
                            "leaf `{id}`: variables must not use the `{RESERVED_VAR_PREFIX}` prefix"
                        )));
                    }
                    va_files.insert(id.to_string(), a);
                }
                Some(_) => {}
            }
        }
        Ok(QueryEngine { tree, inst, cfg, va_files, static_cache: HashMap::new() })
    }

    fn alphabet_for(&self, d: Option<&Document>) -> Result<BTreeSet<char>> {
        if let Some(a) = &self.cfg.alphabet {
            return Ok(a.clone());
        }
        let mut out = d.map(|d| d.alphabet()).unwrap_or_default();
        for id in self.tree.leaf_ids() {
            if let Some(LeafSpec::Regex(text)) = self.inst.get(id) {
                out = infer_alphabet(text, &out)?;
            }
        }
        Ok(out)
    }

    /// A subtree is static when its compiled automaton does not depend on the
    /// document: no black-box leaves and no (ad-hoc) difference nodes.
    fn is_static(&self, node: &RaTree) -> bool {
        match node {
            RaTree::Leaf(id) => !matches!(self.inst.get(id), Some(LeafSpec::BlackBox(_))),
            RaTree::Project { child, .. } => self.is_static(child),
            RaTree::Union(l, r) | RaTree::Join(l, r) => self.is_static(l) && self.is_static(r),
            RaTree::Difference(..) => false,
        }
    }

    /// Variable set of a subtree's results (projection intersects, the other
    /// operators take the left/both operands' unions).
    fn node_vars(&self, node: &RaTree, alphabet: &BTreeSet<char>) -> Result<BTreeSet<Variable>> {
        Ok(match node {
            RaTree::Leaf(id) => match self.inst.get(id).expect("checked total") {
                LeafSpec::Regex(text) => parse_regex(text, alphabet)?.vars(),
                LeafSpec::VaFile(_) => self.va_files[id.as_str()].vars(),
                LeafSpec::BlackBox(spec) => spec.vars.clone(),
            },
            RaTree::Project { vars, child } => self
                .node_vars(child, alphabet)?
                .intersection(vars)
                .cloned()
                .collect(),
            RaTree::Union(l, r) | RaTree::Join(l, r) => {
                let mut v = self.node_vars(l, alphabet)?;
                v.extend(self.node_vars(r, alphabet)?);
                v
            }
            RaTree::Difference(l, _) => self.node_vars(l, alphabet)?,
        })
    }

    pub fn plan(&mut self) -> Result<PlanReport> {
        let alphabet = self.alphabet_for(None)?;
        let mut nodes = Vec::new();
        self.plan_node(&self.tree.clone(), "", &alphabet, &mut nodes)?;
        let tractable = nodes.iter().all(|n| n.within_bound);
        Ok(PlanReport { k: self.cfg.k, tractable, nodes })
    }

    fn plan_node(
        &mut self,
        node: &RaTree,
        path: &str,
        alphabet: &BTreeSet<char>,
        out: &mut Vec<NodeReport>,
    ) -> Result<()> {
        match node {
            RaTree::Leaf(_) => {}
            RaTree::Project { child, .. } => {
                self.plan_node(child, &format!("{path}/child"), alphabet, out)?;
            }
            RaTree::Union(l, r) => {
                self.plan_node(l, &format!("{path}/left"), alphabet, out)?;
                self.plan_node(r, &format!("{path}/right"), alphabet, out)?;
            }
            RaTree::Join(l, r) | RaTree::Difference(l, r) => {
                let is_join = matches!(node, RaTree::Join(..));
                let shared = self
                    .node_vars(l, alphabet)?
                    .intersection(&self.node_vars(r, alphabet)?)
                    .count();
                // Certification needs compiled operands, which exist at plan
                // time only for static subtrees.
                let compiled = |me: &mut Self, sub: &RaTree, p: String| -> Result<Option<Vec<Va>>> {
                    if me.is_static(sub) {
                        me.compile(sub, &p, alphabet, None).map(Some)
                    } else {
                        Ok(None)
                    }
                };
                let lc = compiled(self, l, format!("{path}/left"))?;
                let rc = compiled(self, r, format!("{path}/right"))?;
                let strategy = if is_join {
                    match (&lc, &rc) {
                        (Some(a), Some(b)) if all_functional(a) && all_functional(b) => {
                            "join_disjunctive"
                        }
                        _ => "join_fpt",
                    }
                } else {
                    match (&lc, &rc) {
                        (Some(a), Some(b))
                            if certify_synchronized(&collapse(a.clone()), &collapse(b.clone())) =>
                        {
                            "difference_synchronized"
                        }
                        _ => "difference_adhoc",
                    }
                };
                self.plan_node(l, &format!("{path}/left"), alphabet, out)?;
                self.plan_node(r, &format!("{path}/right"), alphabet, out)?;
                out.push(NodeReport {
                    path: if path.is_empty() { "/".into() } else { path.into() },
                    op: if is_join { "join".into() } else { "difference".into() },
                    shared,
                    within_bound: shared <= self.cfg.k,
                    strategy: strategy.into(),
                });
            }
        }
        Ok(())
    }

    /// Evaluate on one document; refuses intractable plans.
    pub fn eval(&mut self, d: &Document) -> Result<Enumerator> {
        let report = self.plan()?;
        if !report.tractable {
            let offending: Vec<String> = report
                .nodes
                .iter()
                .filter(|n| !n.within_bound)
                .map(|n| format!("{} at {} shares {} variables (bound {})", n.op, n.path, n.shared, report.k))
                .collect();
            return Err(Error::PlanRefused(offending.join("; ")));
        }
        let alphabet = self.alphabet_for(Some(d))?;
        let comps = self.compile(&self.tree.clone(), "", &alphabet, Some(d))?;
        let a = collapse(comps).trim();
        enumerate(&a, d)
    }

    /// Compile a subtree to union components (kept separate while they are
    /// all functional so joins can use the disjunctive strategy).
    fn compile(
        &mut self,
        node: &RaTree,
        path: &str,
        alphabet: &BTreeSet<char>,
        d: Option<&Document>,
    ) -> Result<Vec<Va>> {
        let alpha_key: String = alphabet.iter().collect();
        let is_static = self.is_static(node);
        if is_static {
            if let Some(hit) = self.static_cache.get(&(alpha_key.clone(), path.to_string())) {
                return Ok(hit.clone());
            }
        }
        let comps = match node {
            RaTree::Leaf(id) => match self.inst.get(id).expect("checked total").clone() {
                LeafSpec::Regex(text) => {
                    let ast = parse_regex(&text, alphabet)?;
                    // Keep functional top-level disjuncts as components.
                    let parts = crate::regex::top_disjuncts(&ast);
                    if parts.len() > 1 && parts.iter().all(|p| crate::regex::is_functional(p)) {
                        parts.into_iter().map(compile_regex).collect()
                    } else {
                        vec![compile_regex(&ast)]
                    }
                }
                LeafSpec::VaFile(_) => vec![self.va_files[id.as_str()].clone()],
                LeafSpec::BlackBox(spec) => {
                    let d = d.ok_or_else(|| {
                        Error::contract("black-box leaves require a document")
                    })?;
                    let set = run_blackbox(&spec, d, self.cfg.blackbox_timeout)
                        .map_err(|e| Error::BlackBox { leaf: id.clone(), msg: e.to_string() })?;
                    vec![mappings_to_va(&set, d, &spec.vars)?]
                }
            },
            RaTree::Project { vars, child } => self
                .compile(child, &format!("{path}/child"), alphabet, d)?
                .iter()
                .map(|c| project(c, vars))
                .collect(),
            RaTree::Union(l, r) => {
                let mut out = self.compile(l, &format!("{path}/left"), alphabet, d)?;
                out.extend(self.compile(r, &format!("{path}/right"), alphabet, d)?);
                out
            }
            RaTree::Join(l, r) => {
                let lc = self.compile(l, &format!("{path}/left"), alphabet, d)?;
                let rc = self.compile(r, &format!("{path}/right"), alphabet, d)?;
                if all_functional(&lc) && all_functional(&rc) {
                    join_disjunctive(&lc, &rc)?
                } else {
                    vec![join_fpt(&collapse(lc), &collapse(rc))?]
                }
            }
            RaTree::Difference(l, r) => {
                let d = d.ok_or_else(|| Error::contract("difference nodes require a document"))?;
                let left = collapse(self.compile(l, &format!("{path}/left"), alphabet, Some(d))?);
                let right = collapse(self.compile(r, &format!("{path}/right"), alphabet, Some(d))?);
                let out = if certify_synchronized(&left, &right) {
                    difference_synchronized(&left, &right, d)?
                } else {
                    difference_adhoc(&left, &right, d, self.cfg.k)?
                };
                vec![out]
            }
        };
        if is_static {
            self.static_cache.insert((alpha_key, path.to_string()), comps.clone());
        }
        Ok(comps)
    }
}

fn all_functional(comps: &[Va]) -> bool {
    comps.iter().all(check_functional)
}

fn collapse(comps: Vec<Va>) -> Va {
    match comps.len() {
        1 => comps.into_iter().next().expect("len checked"),
        _ => union_va(&comps),
    }
}

/// Do the synchronized-difference preconditions hold for these operands?
fn certify_synchronized(left: &Va, right: &Va) -> bool {
    let shared: BTreeSet<Variable> = left.vars().intersection(&right.vars()).cloned().collect();
    let left_ok = matches!(extended_configs(&left.trim(), &shared), Ok(c) if !c.has_done());
    left_ok && matches!(va_synchronized_for(&right.trim(), &shared), Ok(true))
}

// ---------------------------------------------------------------------------
// Black boxes
// ---------------------------------------------------------------------------

/// Execute a black-box spanner: document on standard input (UTF-8), one JSON
/// mapping per output line (`{"x":[1,2],...}`), exit code 0. Output mappings
/// are validated against the declared variables, the degree bound, and the
/// document length; duplicates are removed.
pub fn run_blackbox(spec: &BlackBoxSpec, d: &Document, timeout: Duration) -> Result<MappingSet> {
    let mut child = Command::new(&spec.cmd[0])
        .args(&spec.cmd[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| Error::invalid(format!("cannot start `{}`: {e}", spec.cmd[0])))?;
    let text = d.to_string();
    let mut stdin = child.stdin.take().expect("stdin piped");
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(text.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("stdout piped");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let deadline = Instant::now() + timeout;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(Error::invalid(format!("timed out after {timeout:?}")));
                }
                std::thread::sleep(Duration::from_millis(2));
            }
            Err(e) => return Err(Error::invalid(format!("wait failed: {e}"))),
        }
    };
    let _ = writer.join();
    let output = reader.join().unwrap_or_default();
    if !status.success() {
        return Err(Error::invalid(format!("exited with {status}")));
    }
    let n = d.len();
    let mut out = MappingSet::new();
    for (lineno, line) in output.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: BTreeMap<String, (usize, usize)> = serde_json::from_str(line)
            .map_err(|e| Error::invalid(format!("line {}: malformed mapping: {e}", lineno + 1)))?;
        if parsed.len() > spec.degree {
            return Err(Error::invalid(format!(
                "line {}: mapping binds {} variables, degree bound is {}",
                lineno + 1,
                parsed.len(),
                spec.degree
            )));
        }
        let mut m = Mapping::empty();
        for (name, (start, end)) in parsed {
            let x = Variable::new(name);
            if !spec.vars.contains(&x) {
                return Err(Error::invalid(format!(
                    "line {}: variable `{x}` is not declared",
                    lineno + 1
                )));
            }
            if start < 1 || start > end || end > n + 1 {
                return Err(Error::SpanOutOfRange { span: Span::new(start.max(1), end.max(start.max(1))), len: n });
            }
            m.bind(x, Span::new(start, end));
        }
        out.insert(m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::join_sets;
    use crate::difference::minus_sets;
    use crate::model::restrict;
    use crate::regex::oracle_eval;

    fn students_tree() -> RaTree {
        parse_ra_tree(
            r#"{"op":"project","vars":["stdnt"],
                "child":{"op":"difference",
                    "left":{"op":"join","left":{"leaf":"sm"},"right":{"leaf":"sp"}},
                    "right":{"leaf":"nr"}}}"#,
        )
        .unwrap()
    }

    #[test]
    fn tree_parsing() {
        let t = students_tree();
        assert_eq!(t.leaf_ids(), ["sm", "sp", "nr"]);
        // Unary join: arity error.
        assert!(parse_ra_tree(r#"{"op":"join","left":{"leaf":"a"}}"#).is_err());
        // Duplicate placeholder ids.
        assert!(parse_ra_tree(
            r#"{"op":"union","left":{"leaf":"a"},"right":{"leaf":"a"}}"#
        )
        .is_err());
        // Path in the error message.
        let err = parse_ra_tree(r#"{"op":"union","left":{"leaf":"a"},"right":{"op":"wat"}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("/right"));
    }

    #[test]
    fn instantiation_parsing() {
        let inst = load_instantiation(
            r#"{"sm":{"regex":"x{a}"},
                "nr":{"blackbox":{"cmd":["./posrec"],"vars":["stdnt","rcmnd"],"degree":2}}}"#,
        )
        .unwrap();
        assert!(matches!(inst.get("sm"), Some(LeafSpec::Regex(_))));
        assert!(matches!(inst.get("nr"), Some(LeafSpec::BlackBox(s)) if s.degree == 2));
        // Degree above the declared variable count.
        assert!(load_instantiation(
            r#"{"b":{"blackbox":{"cmd":["x"],"vars":["v"],"degree":2}}}"#
        )
        .is_err());
    }

    fn regex_inst(pairs: &[(&str, &str)]) -> Instantiation {
        Instantiation::new(
            pairs
                .iter()
                .map(|(id, rx)| (id.to_string(), LeafSpec::Regex(rx.to_string())))
                .collect(),
        )
    }

    /// The students query: three leaves sharing only `stdnt` pairwise.
    fn students() -> (RaTree, Instantiation, Document) {
        // Records "<name><grade or recommendation mark>" separated by ';':
        // sm finds a name with a grade, sp the same shape, nr a name with 'r'.
        let inst = regex_inst(&[
            ("sm", ".* stdnt{n n*} g .*"),
            ("sp", ".* stdnt{n n*} g .*"),
            ("nr", ".* stdnt{n n*} r .*"),
        ]);
        // Three records: "ng", "nng", "nr" — students 1 and 2 have grades,
        // only student 3 has a recommendation; 1 and 2 lack one.
        (students_tree(), inst, Document::new("ng;nng;nr"))
    }

    /// Reference composition: plain set operators over oracle leaf sets.
    fn reference(tree: &RaTree, inst: &Instantiation, d: &Document, alphabet: &BTreeSet<char>) -> MappingSet {
        match tree {
            RaTree::Leaf(id) => match inst.get(id).unwrap() {
                LeafSpec::Regex(rx) => oracle_eval(&parse_regex(rx, alphabet).unwrap(), d),
                _ => unreachable!("tests use regex leaves here"),
            },
            RaTree::Project { vars, child } => reference(child, inst, d, alphabet)
                .iter()
                .map(|m| restrict(m, vars))
                .collect(),
            RaTree::Union(l, r) => {
                let mut s = reference(l, inst, d, alphabet);
                s.extend(reference(r, inst, d, alphabet));
                s
            }
            RaTree::Join(l, r) => {
                join_sets(&reference(l, inst, d, alphabet), &reference(r, inst, d, alphabet))
            }
            RaTree::Difference(l, r) => {
                minus_sets(&reference(l, inst, d, alphabet), &reference(r, inst, d, alphabet))
            }
        }
    }

    #[test]
    fn plan_on_students_query() {
        let (tree, inst, _) = students();
        let report = validate_plan(&tree, &inst, 1).unwrap();
        assert!(report.tractable);
        assert_eq!(report.nodes.len(), 2);
        for n in &report.nodes {
            assert_eq!(n.shared, 1, "{}", n.path);
        }
        // k = 0 refuses; monotonicity over k.
        assert!(!validate_plan(&tree, &inst, 0).unwrap().tractable);
        for k in 1..4 {
            assert!(validate_plan(&tree, &inst, k).unwrap().tractable);
        }
    }

    #[test]
    fn plan_reports_strategies() {
        let tree = parse_ra_tree(
            r#"{"op":"difference","left":{"leaf":"l"},"right":{"leaf":"r"}}"#,
        )
        .unwrap();
        // Functional right operand: synchronized difference certifies.
        let inst = regex_inst(&[("l", "x{a}b|ab"), ("r", "x{a}b")]);
        let report = validate_plan(&tree, &inst, 3).unwrap();
        assert_eq!(report.nodes[0].strategy, "difference_synchronized");
        // Right operand binding x ambiguously: falls back to ad hoc.
        let inst = regex_inst(&[("l", "x{a}b"), ("r", "x{a}b|x{ab}")]);
        let report = validate_plan(&tree, &inst, 3).unwrap();
        assert_eq!(report.nodes[0].strategy, "difference_adhoc");
        let tree =
            parse_ra_tree(r#"{"op":"join","left":{"leaf":"l"},"right":{"leaf":"r"}}"#).unwrap();
        let inst = regex_inst(&[("l", "x{a}b|x{ab}"), ("r", "x{.}.*")]);
        let report = validate_plan(&tree, &inst, 3).unwrap();
        assert_eq!(report.nodes[0].strategy, "join_disjunctive");
        // A nested disjunction is not decomposed, so the operand stays a
        // single non-functional component.
        let inst = regex_inst(&[("l", "(x{a}|ab)b"), ("r", "x{.}.*")]);
        let report = validate_plan(&tree, &inst, 3).unwrap();
        assert_eq!(report.nodes[0].strategy, "join_fpt");
    }

    #[test]
    fn eval_students_query() {
        let (tree, inst, d) = students();
        let cfg = EvalConfig::default();
        let got: MappingSet = eval_query(&tree, &inst, &d, &cfg).unwrap().collect();
        let alphabet = QueryEngine::new(tree.clone(), inst.clone(), cfg)
            .unwrap()
            .alphabet_for(Some(&d))
            .unwrap();
        let want = reference(&tree, &inst, &d, &alphabet);
        assert_eq!(got, want);
        // Exactly the two students without recommendations.
        let stdnt = Variable::new("stdnt");
        let names: BTreeSet<String> = got
            .iter()
            .map(|m| crate::model::span_substring(&d, m.get(&stdnt).unwrap()).unwrap())
            .collect();
        assert_eq!(names, BTreeSet::from(["n".to_string(), "nn".to_string()]));
    }

    #[test]
    fn eval_matches_reference_composition() {
        let cases: &[(&str, &[(&str, &str)], &str)] = &[
            (
                r#"{"op":"union","left":{"leaf":"a"},"right":{"leaf":"b"}}"#,
                &[("a", "x{a}.*"), ("b", ".*x{b}")],
                "ab",
            ),
            (
                r#"{"op":"project","vars":["x"],"child":{"op":"join","left":{"leaf":"a"},"right":{"leaf":"b"}}}"#,
                &[("a", "x{a*}y{b*}"), ("b", ".*y{b}")],
                "aab",
            ),
            (
                r#"{"op":"difference","left":{"leaf":"a"},"right":{"leaf":"b"}}"#,
                &[("a", "x{a*}.*"), ("b", "x{a}.*")],
                "aab",
            ),
            (
                r#"{"leaf":"a"}"#,
                &[("a", "x{.}.*|.*")],
                "ab",
            ),
        ];
        let cfg = EvalConfig::default();
        for (tree_json, leaves, text) in cases {
            let tree = parse_ra_tree(tree_json).unwrap();
            let inst = regex_inst(leaves);
            let d = Document::new(text);
            let got: MappingSet = eval_query(&tree, &inst, &d, &cfg).unwrap().collect();
            let alphabet = QueryEngine::new(tree.clone(), inst.clone(), cfg.clone())
                .unwrap()
                .alphabet_for(Some(&d))
                .unwrap();
            assert_eq!(got, reference(&tree, &inst, &d, &alphabet), "{tree_json} on {text}");
        }
    }

    #[test]
    fn difference_with_empty_right_is_left() {
        let tree =
            parse_ra_tree(r#"{"op":"difference","left":{"leaf":"a"},"right":{"leaf":"b"}}"#)
                .unwrap();
        let inst = regex_inst(&[("a", "x{a}|x{aa}"), ("b", "\\0")]);
        let d = Document::new("aa");
        let got: MappingSet =
            eval_query(&tree, &inst, &d, &EvalConfig::default()).unwrap().collect();
        let a = parse_regex("x{a}|x{aa}", &d.alphabet()).unwrap();
        assert_eq!(got, oracle_eval(&a, &d));
    }

    #[test]
    fn plan_refusal() {
        let tree =
            parse_ra_tree(r#"{"op":"join","left":{"leaf":"a"},"right":{"leaf":"b"}}"#).unwrap();
        let inst = regex_inst(&[("a", "x{a}y{a}z{a}w{a}"), ("b", "x{a}y{a}z{a}w{a}")]);
        match eval_query(&tree, &inst, &Document::new("aaaa"), &EvalConfig::default()) {
            Err(Error::PlanRefused(_)) => {}
            Err(e) => panic!("unexpected error: {e}"),
            Ok(_) => panic!("plan should have been refused"),
        }
    }

    fn stub_box(script: &str, vars: &[&str], degree: usize) -> BlackBoxSpec {
        BlackBoxSpec {
            cmd: vec!["sh".into(), "-c".into(), script.into()],
            vars: vars.iter().map(|v| Variable::new(*v)).collect(),
            degree,
        }
    }

    #[test]
    fn blackbox_protocol() {
        let d = Document::new("ab");
        let t = Duration::from_secs(5);
        // Echo-style stub.
        let set = run_blackbox(
            &stub_box(r#"cat >/dev/null; echo '{"x":[1,2]}'"#, &["x"], 1),
            &d,
            t,
        )
        .unwrap();
        assert_eq!(
            set,
            MappingSet::from([Mapping::from_pairs([(Variable::new("x"), Span::new(1, 2))])])
        );
        // Empty output.
        assert!(run_blackbox(&stub_box("cat >/dev/null", &["x"], 1), &d, t).unwrap().is_empty());
        // Degree exceeded.
        assert!(run_blackbox(
            &stub_box(r#"cat >/dev/null; echo '{"x":[1,2],"y":[2,2]}'"#, &["x", "y"], 1),
            &d,
            t,
        )
        .is_err());
        // Undeclared variable, invalid span, nonzero exit, malformed line.
        assert!(run_blackbox(
            &stub_box(r#"cat >/dev/null; echo '{"z":[1,2]}'"#, &["x"], 1),
            &d,
            t
        )
        .is_err());
        assert!(run_blackbox(
            &stub_box(r#"cat >/dev/null; echo '{"x":[1,9]}'"#, &["x"], 1),
            &d,
            t
        )
        .is_err());
        assert!(run_blackbox(&stub_box("cat >/dev/null; exit 3", &["x"], 1), &d, t).is_err());
        assert!(
            run_blackbox(&stub_box("cat >/dev/null; echo nonsense", &["x"], 1), &d, t).is_err()
        );
    }

    #[test]
    fn blackbox_interchangeable_with_regex_leaf() {
        // The stub replays oracle_eval of `.* stdnt{n n*} r .*` on "ng;nng;nr"
        // (single mapping: stdnt ↦ [8,9⟩).
        let tree = students_tree();
        let (_, regex_inst_all, d) = students();
        let mut specs: BTreeMap<String, LeafSpec> = ["sm", "sp"]
            .iter()
            .map(|id| (id.to_string(), regex_inst_all.get(id).unwrap().clone()))
            .collect();
        specs.insert(
            "nr".into(),
            LeafSpec::BlackBox(stub_box(
                r#"cat >/dev/null; echo '{"stdnt":[8,9]}'"#,
                &["stdnt"],
                1,
            )),
        );
        let cfg = EvalConfig::default();
        let via_regex: MappingSet =
            eval_query(&tree, &regex_inst_all, &d, &cfg).unwrap().collect();
        let via_box: MappingSet =
            eval_query(&tree, &Instantiation::new(specs), &d, &cfg).unwrap().collect();
        assert_eq!(via_regex, via_box);
    }

    #[test]
    fn engine_caches_static_subtrees() {
        let (tree, inst, d) = students();
        let mut engine = QueryEngine::new(tree, inst, EvalConfig::default()).unwrap();
        let first: MappingSet = engine.eval(&d).unwrap().collect();
        assert!(!engine.static_cache.is_empty());
        let cached = engine.static_cache.len();
        let second: MappingSet = engine.eval(&d).unwrap().collect();
        assert_eq!(first, second);
        assert_eq!(engine.static_cache.len(), cached);
    }
}
