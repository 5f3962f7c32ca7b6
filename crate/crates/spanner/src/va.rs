//! Vset-automata: NFAs extended with open (⊢x) and close (⊣x) transitions.
//! Provides run semantics, sequential/functional checks, the per-state
//! variable-configuration analysis, semi-functionalization by state splitting,
//! projection, trimming, Thompson compilation from regex formulas, an ad-hoc
//! automaton realizing a fixed mapping set, and the exhaustive VA oracle.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Document, Mapping, MappingSet, Span, Variable};
use crate::regex::RegexFormula;

pub type StateId = usize;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Epsilon,
    Symbol(char),
    Open(Variable),
    Close(Variable),
}

impl Label {
    pub fn variable(&self) -> Option<&Variable> {
        match self {
            Label::Open(x) | Label::Close(x) => Some(x),
            _ => None,
        }
    }

    /// True for ε and variable operations (anything but symbol consumption).
    pub fn is_spontaneous(&self) -> bool {
        !matches!(self, Label::Symbol(_))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Epsilon => write!(f, "eps"),
            Label::Symbol(c) => write!(f, "{c}"),
            Label::Open(x) => write!(f, "open({x})"),
            Label::Close(x) => write!(f, "close({x})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Va {
    num_states: usize,
    initial: StateId,
    accepting: BTreeSet<StateId>,
    transitions: Vec<(StateId, Label, StateId)>,
    /// Provenance tag per state (original id plus construction tag), for
    /// debugging the copy-heavy constructions.
    tags: Vec<String>,
}

impl Va {
    pub fn new(
        num_states: usize,
        initial: StateId,
        accepting: impl IntoIterator<Item = StateId>,
        transitions: Vec<(StateId, Label, StateId)>,
    ) -> Self {
        let accepting: BTreeSet<_> = accepting.into_iter().collect();
        assert!(initial < num_states);
        assert!(accepting.iter().all(|&q| q < num_states));
        assert!(transitions.iter().all(|&(p, _, q)| p < num_states && q < num_states));
        let tags = (0..num_states).map(|q| format!("q{q}")).collect();
        Va { num_states, initial, accepting, transitions, tags }
    }

    pub fn with_tags(mut self, tags: Vec<String>) -> Self {
        assert_eq!(tags.len(), self.num_states);
        self.tags = tags;
        self
    }

    /// Single-state automaton with the empty language.
    pub fn empty_language() -> Self {
        Va::new(1, 0, [], vec![])
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn accepting(&self) -> &BTreeSet<StateId> {
        &self.accepting
    }

    pub fn transitions(&self) -> &[(StateId, Label, StateId)] {
        &self.transitions
    }

    pub fn tag(&self, q: StateId) -> &str {
        &self.tags[q]
    }

    /// Variables mentioned in any transition.
    pub fn vars(&self) -> BTreeSet<Variable> {
        self.transitions
            .iter()
            .filter_map(|(_, l, _)| l.variable().cloned())
            .collect()
    }

    pub fn alphabet(&self) -> BTreeSet<char> {
        self.transitions
            .iter()
            .filter_map(|(_, l, _)| match l {
                Label::Symbol(c) => Some(*c),
                _ => None,
            })
            .collect()
    }

    /// Outgoing transition indices per state.
    pub fn out_adj(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_states];
        for (i, (p, _, _)) in self.transitions.iter().enumerate() {
            adj[*p].push(i);
        }
        adj
    }

    /// Incoming transition indices per state.
    pub fn in_adj(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_states];
        for (i, (_, _, q)) in self.transitions.iter().enumerate() {
            adj[*q].push(i);
        }
        adj
    }

    fn reachable(&self) -> Vec<bool> {
        let adj = self.out_adj();
        let mut seen = vec![false; self.num_states];
        let mut stack = vec![self.initial];
        seen[self.initial] = true;
        while let Some(q) = stack.pop() {
            for &t in &adj[q] {
                let to = self.transitions[t].2;
                if !seen[to] {
                    seen[to] = true;
                    stack.push(to);
                }
            }
        }
        seen
    }

    fn co_reachable(&self) -> Vec<bool> {
        let adj = self.in_adj();
        let mut seen = vec![false; self.num_states];
        let mut stack: Vec<StateId> = self.accepting.iter().copied().collect();
        for &q in &self.accepting {
            seen[q] = true;
        }
        while let Some(q) = stack.pop() {
            for &t in &adj[q] {
                let from = self.transitions[t].0;
                if !seen[from] {
                    seen[from] = true;
                    stack.push(from);
                }
            }
        }
        seen
    }

    /// Keep only states both reachable from the initial state and
    /// co-reachable to an accepting state. An empty-language automaton
    /// collapses to a single non-accepting state.
    pub fn trim(&self) -> Va {
        let reach = self.reachable();
        let co = self.co_reachable();
        let keep: Vec<bool> = (0..self.num_states).map(|q| reach[q] && co[q]).collect();
        if !keep[self.initial] {
            return Va::new(1, 0, [], vec![]).with_tags(vec![self.tags[self.initial].clone()]);
        }
        let mut remap = vec![usize::MAX; self.num_states];
        let mut tags = Vec::new();
        let mut next = 0;
        for q in 0..self.num_states {
            if keep[q] {
                remap[q] = next;
                tags.push(self.tags[q].clone());
                next += 1;
            }
        }
        let transitions = self
            .transitions
            .iter()
            .filter(|&&(p, _, q)| keep[p] && keep[q])
            .map(|(p, l, q)| (remap[*p], l.clone(), remap[*q]))
            .collect();
        let accepting = self.accepting.iter().filter(|&&q| keep[q]).map(|&q| remap[q]);
        Va::new(next, remap[self.initial], accepting, transitions).with_tags(tags)
    }

    /// True when no accepting state is reachable (language empty over all
    /// documents).
    pub fn language_empty(&self) -> bool {
        let reach = self.reachable();
        !self.accepting.iter().any(|&q| reach[q])
    }
}

// ---------------------------------------------------------------------------
// Sequential / functional checks
// ---------------------------------------------------------------------------

/// Per-variable run status used by the check products.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VarStatus {
    Waiting,
    Opened,
    Closed,
    Violated,
}

/// For one variable, the statuses with which each state is reachable from the
/// initial state along arbitrary transition paths (documents quantified away).
fn var_status_reach(a: &Va, x: &Variable) -> Vec<[bool; 4]> {
    use VarStatus::*;
    fn idx(s: VarStatus) -> usize {
        match s {
            Waiting => 0,
            Opened => 1,
            Closed => 2,
            Violated => 3,
        }
    }
    let adj = a.out_adj();
    let mut seen = vec![[false; 4]; a.num_states()];
    let mut queue = VecDeque::new();
    seen[a.initial()][idx(Waiting)] = true;
    queue.push_back((a.initial(), Waiting));
    while let Some((q, s)) = queue.pop_front() {
        for &t in &adj[q] {
            let (_, lab, to) = &a.transitions()[t];
            let s2 = match lab {
                Label::Open(y) if y == x => match s {
                    Waiting => Opened,
                    _ => Violated,
                },
                Label::Close(y) if y == x => match s {
                    Opened => Closed,
                    _ => Violated,
                },
                _ => s,
            };
            if !seen[*to][idx(s2)] {
                seen[*to][idx(s2)] = true;
                queue.push_back((*to, s2));
            }
        }
    }
    seen
}

/// Sequential: every accepting run is valid (each variable opened/closed at
/// most once, in order, and not left open).
pub fn check_sequential(a: &Va) -> bool {
    a.vars().iter().all(|x| {
        let reach = var_status_reach(a, x);
        a.accepting().iter().all(|&q| !reach[q][1] && !reach[q][3])
    })
}

/// Functional: sequential, and every accepting run uses every variable.
pub fn check_functional(a: &Va) -> bool {
    check_sequential(a)
        && a.vars().iter().all(|x| {
            let reach = var_status_reach(a, x);
            a.accepting().iter().all(|&q| !reach[q][0])
        })
}

// ---------------------------------------------------------------------------
// Variable configurations
// ---------------------------------------------------------------------------

/// Per-state, per-variable summary of all runs reaching the state:
/// unseen / open / closed, or `Done` when both unseen and closed histories
/// reach it (the ambiguous status semi-functionalization removes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConfigLabel {
    Unseen,
    Open,
    Closed,
    Done,
}

#[derive(Debug, Clone)]
pub struct ConfigTable {
    /// labels[x][q] for tracked variables x.
    labels: BTreeMap<Variable, Vec<ConfigLabel>>,
}

impl ConfigTable {
    pub fn label(&self, q: StateId, x: &Variable) -> ConfigLabel {
        self.labels[x][q]
    }

    pub fn vars(&self) -> impl Iterator<Item = &Variable> {
        self.labels.keys()
    }

    pub fn has_done(&self) -> bool {
        self.labels.values().any(|col| col.contains(&ConfigLabel::Done))
    }
}

/// Extended variable configurations on a *trimmed* sequential automaton.
/// States outside the trimmed core would not fit the four-case analysis; call
/// on `a.trim()` (the error message says so when a mixed status set shows up).
pub fn extended_configs(a: &Va, xs: &BTreeSet<Variable>) -> Result<ConfigTable> {
    if !check_sequential(a) {
        return Err(Error::contract("extended_configs requires a sequential automaton"));
    }
    let reach = a.reachable();
    let co = a.co_reachable();
    let kept: Vec<bool> = (0..a.num_states()).map(|q| reach[q] && co[q]).collect();
    let adj = a.out_adj();
    let mut labels = BTreeMap::new();
    for x in xs {
        // Forward dataflow of reachable status sets ⊆ {u,o,c}, restricted to
        // the trimmed core where sequentiality rules out illegal operations.
        const U: u8 = 1;
        const O: u8 = 2;
        const C: u8 = 4;
        let mut sets = vec![0u8; a.num_states()];
        if kept[a.initial()] {
            sets[a.initial()] = U;
        }
        let mut queue: VecDeque<StateId> = VecDeque::from([a.initial()]);
        while let Some(q) = queue.pop_front() {
            if !kept[q] {
                continue;
            }
            let cur = sets[q];
            for &t in &adj[q] {
                let (_, lab, to) = &a.transitions()[t];
                if !kept[*to] {
                    continue;
                }
                let img = match lab {
                    Label::Open(y) if y == x => {
                        if cur & (O | C) != 0 {
                            return Err(Error::contract(format!(
                                "extended_configs: reopening of {x} on a live path; \
                                 input not sequential or not trimmed"
                            )));
                        }
                        if cur & U != 0 {
                            O
                        } else {
                            0
                        }
                    }
                    Label::Close(y) if y == x => {
                        if cur & (U | C) != 0 {
                            return Err(Error::contract(format!(
                                "extended_configs: stray close of {x} on a live path; \
                                 input not sequential or not trimmed"
                            )));
                        }
                        if cur & O != 0 {
                            C
                        } else {
                            0
                        }
                    }
                    _ => cur,
                };
                if img & !sets[*to] != 0 {
                    sets[*to] |= img;
                    queue.push_back(*to);
                }
            }
        }
        let col: Vec<ConfigLabel> = (0..a.num_states())
            .map(|q| {
                if !kept[q] {
                    return Ok(ConfigLabel::Unseen);
                }
                match sets[q] {
                    0 | U => Ok(ConfigLabel::Unseen),
                    O => Ok(ConfigLabel::Open),
                    C => Ok(ConfigLabel::Closed),
                    s if s == U | C => Ok(ConfigLabel::Done),
                    s => Err(Error::contract(format!(
                        "extended_configs: state {} has mixed status set {s:#b} for {x}; \
                         trim the automaton first",
                        a.tag(q)
                    ))),
                }
            })
            .collect::<Result<_>>()?;
        labels.insert(x.clone(), col);
    }
    Ok(ConfigTable { labels })
}

/// True iff no state carries the `Done` label for any x ∈ X.
pub fn is_semi_functional(a: &Va, xs: &BTreeSet<Variable>) -> Result<bool> {
    Ok(!extended_configs(a, xs)?.has_done())
}

/// Split `Done` states per variable until the automaton is semi-functional
/// for X. Output is equivalent, trimmed, and has at most 2^|X|·|Q| states.
pub fn to_semi_functional(a: &Va, xs: &BTreeSet<Variable>) -> Result<Va> {
    if !check_sequential(a) {
        return Err(Error::contract("to_semi_functional requires a sequential automaton"));
    }
    let mut cur = a.trim();
    for x in xs {
        let one: BTreeSet<Variable> = [x.clone()].into();
        let cfg = extended_configs(&cur, &one)?;
        if !cfg.has_done() {
            continue;
        }
        cur = split_for_var(&cur, x, &cfg)?.trim();
    }
    Ok(cur)
}

/// One round of the splitting construction: each state labeled Done for `x`
/// becomes an unseen copy and a closed copy; transitions re-route so every
/// path sees a single consistent history for `x`.
fn split_for_var(a: &Va, x: &Variable, cfg: &ConfigTable) -> Result<Va> {
    use ConfigLabel::*;
    // ids: unsplit state q -> (base[q], None); split q -> (base[q] = u-copy,
    // Some(c-copy)).
    let mut base = vec![0usize; a.num_states()];
    let mut c_copy: Vec<Option<usize>> = vec![None; a.num_states()];
    let mut tags = Vec::new();
    let mut next = 0;
    for q in 0..a.num_states() {
        base[q] = next;
        if cfg.label(q, x) == Done {
            tags.push(format!("{}^u", a.tag(q)));
            tags.push(format!("{}^c", a.tag(q)));
            c_copy[q] = Some(next + 1);
            next += 2;
        } else {
            tags.push(a.tag(q).to_string());
            next += 1;
        }
    }
    let mut transitions = Vec::new();
    for (p, lab, q) in a.transitions() {
        let (lp, lq) = (cfg.label(*p, x), cfg.label(*q, x));
        if lq != Done {
            // Target unsplit. A Done source cannot step to a non-Done target
            // in a trimmed sequential automaton.
            if lp == Done {
                return Err(Error::contract(format!(
                    "split_for_var: transition from Done state {} to non-Done {}",
                    a.tag(*p),
                    a.tag(*q)
                )));
            }
            transitions.push((base[*p], lab.clone(), base[*q]));
            continue;
        }
        let qc = c_copy[*q].unwrap();
        match lp {
            Done => {
                // Neutral operation: both copies carry it.
                transitions.push((base[*p], lab.clone(), base[*q]));
                transitions.push((c_copy[*p].unwrap(), lab.clone(), qc));
            }
            Unseen => transitions.push((base[*p], lab.clone(), base[*q])),
            Open => transitions.push((base[*p], lab.clone(), qc)),
            Closed => transitions.push((base[*p], lab.clone(), qc)),
        }
    }
    let mut accepting = Vec::new();
    for &f in a.accepting() {
        accepting.push(base[f]);
        if let Some(fc) = c_copy[f] {
            accepting.push(fc);
        }
    }
    // The initial state keeps its unseen copy.
    Ok(Va::new(next, base[a.initial()], accepting, transitions).with_tags(tags))
}

/// Replace operations on variables outside Y with ε.
pub fn project(a: &Va, ys: &BTreeSet<Variable>) -> Va {
    let transitions = a
        .transitions()
        .iter()
        .map(|(p, lab, q)| {
            let lab = match lab {
                Label::Open(x) | Label::Close(x) if !ys.contains(x) => Label::Epsilon,
                other => other.clone(),
            };
            (*p, lab, *q)
        })
        .collect();
    Va::new(a.num_states(), a.initial(), a.accepting().clone(), transitions)
        .with_tags((0..a.num_states()).map(|q| a.tag(q).to_string()).collect())
}

/// Synchronized for X: on the trimmed automaton, each ⊢x and ⊣x has a unique
/// target state, no state is labeled Done for x, and all accepting states
/// agree on whether x was used.
pub fn va_synchronized_for(a: &Va, xs: &BTreeSet<Variable>) -> Result<bool> {
    if !check_sequential(a) {
        return Err(Error::contract("va_synchronized_for requires a sequential automaton"));
    }
    let t = a.trim();
    let cfg = extended_configs(&t, xs)?;
    for x in xs {
        for want_open in [true, false] {
            let mut target = None;
            for (_, lab, q) in t.transitions() {
                let hit = match lab {
                    Label::Open(y) => want_open && y == x,
                    Label::Close(y) => !want_open && y == x,
                    _ => false,
                };
                if hit {
                    match target {
                        None => target = Some(*q),
                        Some(prev) if prev != *q => return Ok(false),
                        _ => {}
                    }
                }
            }
        }
        let mut acc_labels = t.accepting().iter().map(|&q| cfg.label(q, x));
        if let Some(first) = acc_labels.next() {
            if first == ConfigLabel::Done || acc_labels.any(|l| l != first) {
                return Ok(false);
            }
        }
        if (0..t.num_states()).any(|q| cfg.label(q, x) == ConfigLabel::Done) {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Thompson compilation
// ---------------------------------------------------------------------------

struct Builder {
    transitions: Vec<(StateId, Label, StateId)>,
    count: usize,
}

impl Builder {
    fn state(&mut self) -> StateId {
        self.count += 1;
        self.count - 1
    }

    fn edge(&mut self, p: StateId, lab: Label, q: StateId) {
        self.transitions.push((p, lab, q));
    }

    fn fragment(&mut self, alpha: &RegexFormula) -> (StateId, StateId) {
        let s = self.state();
        let e = self.state();
        match alpha {
            RegexFormula::EmptySet => {}
            RegexFormula::Epsilon => self.edge(s, Label::Epsilon, e),
            RegexFormula::Symbol(c) => self.edge(s, Label::Symbol(*c), e),
            RegexFormula::Disjunction(l, r) => {
                let (ls, le) = self.fragment(l);
                let (rs, re) = self.fragment(r);
                self.edge(s, Label::Epsilon, ls);
                self.edge(s, Label::Epsilon, rs);
                self.edge(le, Label::Epsilon, e);
                self.edge(re, Label::Epsilon, e);
            }
            RegexFormula::Concatenation(l, r) => {
                let (ls, le) = self.fragment(l);
                let (rs, re) = self.fragment(r);
                self.edge(s, Label::Epsilon, ls);
                self.edge(le, Label::Epsilon, rs);
                self.edge(re, Label::Epsilon, e);
            }
            RegexFormula::Star(inner) => {
                let (is, ie) = self.fragment(inner);
                self.edge(s, Label::Epsilon, e);
                self.edge(s, Label::Epsilon, is);
                self.edge(ie, Label::Epsilon, e);
                self.edge(ie, Label::Epsilon, is);
            }
            RegexFormula::Bind(x, inner) => {
                let (is, ie) = self.fragment(inner);
                self.edge(s, Label::Open(x.clone()), is);
                self.edge(ie, Label::Close(x.clone()), e);
            }
        }
        (s, e)
    }
}

/// Thompson construction; x{γ} compiles as ⊢x · γ · ⊣x. Linear size, and it
/// preserves sequentiality and synchronization (each operation of a variable
/// occurs on exactly one transition per binding site).
pub fn compile_regex(alpha: &RegexFormula) -> Va {
    let mut b = Builder { transitions: Vec::new(), count: 0 };
    let (s, e) = b.fragment(alpha);
    Va::new(b.count, s, [e], b.transitions)
}

// ---------------------------------------------------------------------------
// Ad-hoc automaton from a mapping set
// ---------------------------------------------------------------------------

/// One straight-line path per mapping, interleaving the document's symbols
/// with the variable operations at the recorded boundaries; correct for this
/// document only.
pub fn mappings_to_va(ms: &MappingSet, d: &Document, vs: &BTreeSet<Variable>) -> Result<Va> {
    for m in ms {
        if !m.domain().is_subset(vs) {
            return Err(Error::contract(format!(
                "mappings_to_va: mapping {} binds variables outside the declared set",
                m.canonical_text()
            )));
        }
        for (_, s) in m.iter() {
            if !s.valid_for(d) {
                return Err(Error::SpanOutOfRange { span: *s, len: d.len() });
            }
        }
    }
    let n = d.len();
    let mut b = Builder { transitions: Vec::new(), count: 0 };
    let init = b.state();
    let mut accepting = Vec::new();
    for m in ms {
        let mut cur = b.state();
        b.edge(init, Label::Epsilon, cur);
        for pos in 1..=n + 1 {
            // Closes of spans ending here (opened earlier), then opens, with
            // empty spans opened and closed in place.
            for (x, s) in m.iter() {
                if s.end == pos && s.start < pos {
                    let nx = b.state();
                    b.edge(cur, Label::Close(x.clone()), nx);
                    cur = nx;
                }
            }
            for (x, s) in m.iter() {
                if s.start == pos {
                    let nx = b.state();
                    b.edge(cur, Label::Open(x.clone()), nx);
                    cur = nx;
                    if s.end == pos {
                        let nc = b.state();
                        b.edge(cur, Label::Close(x.clone()), nc);
                        cur = nc;
                    }
                }
            }
            if pos <= n {
                let nx = b.state();
                b.edge(cur, Label::Symbol(d.symbol(pos)), nx);
                cur = nx;
            }
        }
        accepting.push(cur);
    }
    if ms.is_empty() {
        return Ok(Va::empty_language());
    }
    Ok(Va::new(b.count, init, accepting, b.transitions))
}

// ---------------------------------------------------------------------------
// Exhaustive oracle
// ---------------------------------------------------------------------------

#[derive(Clone, PartialEq, Eq, Hash)]
enum OracleStatus {
    Waiting,
    OpenAt(usize),
    ClosedAt(usize, usize),
}

/// All μ_ρ over valid accepting runs, by exhaustive memoized search over
/// (state, position, per-variable status). Trusted reference; exponential.
pub fn oracle_eval_va(a: &Va, d: &Document) -> MappingSet {
    let vars: Vec<Variable> = a.vars().into_iter().collect();
    let n = d.len();
    let adj = a.out_adj();
    let mut seen: HashSet<(StateId, usize, Vec<OracleStatus>)> = HashSet::new();
    let mut out = MappingSet::new();
    let start = (a.initial(), 1usize, vec![OracleStatus::Waiting; vars.len()]);
    let mut stack = vec![start.clone()];
    seen.insert(start);
    while let Some((q, pos, st)) = stack.pop() {
        if a.accepting().contains(&q)
            && pos == n + 1
            && st.iter().all(|s| !matches!(s, OracleStatus::OpenAt(_)))
        {
            let mut m = Mapping::empty();
            for (i, s) in st.iter().enumerate() {
                if let OracleStatus::ClosedAt(b, e) = s {
                    m.bind(vars[i].clone(), Span::new(*b, *e));
                }
            }
            out.insert(m);
        }
        for &t in &adj[q] {
            let (_, lab, to) = &a.transitions()[t];
            let next = match lab {
                Label::Epsilon => Some((*to, pos, st.clone())),
                Label::Symbol(c) => {
                    (pos <= n && d.symbol(pos) == *c).then(|| (*to, pos + 1, st.clone()))
                }
                Label::Open(x) => {
                    let i = vars.iter().position(|v| v == x).unwrap();
                    matches!(st[i], OracleStatus::Waiting).then(|| {
                        let mut s2 = st.clone();
                        s2[i] = OracleStatus::OpenAt(pos);
                        (*to, pos, s2)
                    })
                }
                Label::Close(x) => {
                    let i = vars.iter().position(|v| v == x).unwrap();
                    match st[i] {
                        OracleStatus::OpenAt(b) => {
                            let mut s2 = st.clone();
                            s2[i] = OracleStatus::ClosedAt(b, pos);
                            Some((*to, pos, s2))
                        }
                        _ => None,
                    }
                }
            };
            if let Some(node) = next {
                if seen.insert(node.clone()) {
                    stack.push(node);
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// JSON import/export
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LabelJson {
    #[serde(rename = "type")]
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct TransitionJson {
    from: usize,
    label: LabelJson,
    to: usize,
}

#[derive(Serialize, Deserialize)]
struct VaJson {
    states: Vec<usize>,
    initial: usize,
    accepting: Vec<usize>,
    transitions: Vec<TransitionJson>,
}

pub fn va_to_json(a: &Va) -> serde_json::Value {
    let doc = VaJson {
        states: (0..a.num_states()).collect(),
        initial: a.initial(),
        accepting: a.accepting().iter().copied().collect(),
        transitions: a
            .transitions()
            .iter()
            .map(|(p, lab, q)| {
                let (kind, value) = match lab {
                    Label::Epsilon => ("epsilon", None),
                    Label::Symbol(c) => ("symbol", Some(c.to_string())),
                    Label::Open(x) => ("open", Some(x.name().to_string())),
                    Label::Close(x) => ("close", Some(x.name().to_string())),
                };
                TransitionJson {
                    from: *p,
                    label: LabelJson { kind: kind.to_string(), value },
                    to: *q,
                }
            })
            .collect(),
    };
    serde_json::to_value(doc).expect("VA serialization cannot fail")
}

pub fn va_from_json(v: &serde_json::Value) -> Result<Va> {
    let doc: VaJson = serde_json::from_value(v.clone()).map_err(|e| Error::Json {
        context: "parsing VA JSON".into(),
        source: e,
    })?;
    let mut ids: Vec<usize> = doc.states.clone();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != doc.states.len() {
        return Err(Error::invalid("duplicate state ids in VA JSON"));
    }
    let index: HashMap<usize, usize> = ids.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let lookup = |id: usize, what: &str| -> Result<usize> {
        index
            .get(&id)
            .copied()
            .ok_or_else(|| Error::invalid(format!("{what} references unknown state {id}")))
    };
    let initial = lookup(doc.initial, "initial")?;
    let accepting = doc
        .accepting
        .iter()
        .map(|&q| lookup(q, "accepting set"))
        .collect::<Result<Vec<_>>>()?;
    let mut transitions = Vec::new();
    for t in &doc.transitions {
        let lab = match (t.label.kind.as_str(), &t.label.value) {
            ("epsilon", _) => Label::Epsilon,
            ("symbol", Some(v)) => {
                let mut cs = v.chars();
                match (cs.next(), cs.next()) {
                    (Some(c), None) => Label::Symbol(c),
                    _ => return Err(Error::invalid(format!("symbol value {v:?} is not one symbol"))),
                }
            }
            ("open", Some(v)) if !v.is_empty() => Label::Open(Variable::new(v.clone())),
            ("close", Some(v)) if !v.is_empty() => Label::Close(Variable::new(v.clone())),
            (k, _) => return Err(Error::invalid(format!("bad transition label {k:?}"))),
        };
        transitions.push((lookup(t.from, "transition")?, lab, lookup(t.to, "transition")?));
    }
    let tags = ids.iter().map(|id| format!("q{id}")).collect();
    Ok(Va::new(ids.len(), initial, accepting, transitions).with_tags(tags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regex::{oracle_eval, parse_regex};

    fn ab() -> BTreeSet<char> {
        ['a', 'b'].into()
    }

    fn v(n: &str) -> Variable {
        Variable::new(n)
    }

    fn sp(i: usize, j: usize) -> Span {
        Span::new(i, j)
    }

    fn xset(names: &[&str]) -> BTreeSet<Variable> {
        names.iter().map(|n| v(n)).collect()
    }

    /// Three-state automaton with symbol loops on every state, an optional
    /// capture x, and a symbol shortcut from the initial to the accepting
    /// state (sequential but not functional).
    fn optional_capture_va(alphabet: &[char]) -> Va {
        let mut trans = Vec::new();
        for &c in alphabet {
            trans.push((0, Label::Symbol(c), 0));
            trans.push((1, Label::Symbol(c), 1));
            trans.push((2, Label::Symbol(c), 2));
            trans.push((0, Label::Symbol(c), 2));
        }
        trans.push((0, Label::Open(v("x")), 1));
        trans.push((1, Label::Close(v("x")), 2));
        Va::new(3, 0, [2], trans)
    }

    #[test]
    fn checks_on_optional_capture() {
        let a = optional_capture_va(&['a', 'b']);
        assert!(check_sequential(&a));
        assert!(!check_functional(&a));
        // Dropping the shortcut makes it functional.
        let functional = Va::new(
            3,
            0,
            [2],
            a.transitions()
                .iter()
                .filter(|&&(p, ref l, q)| !(p == 0 && q == 2 && matches!(l, Label::Symbol(_))))
                .cloned()
                .collect(),
        );
        assert!(check_functional(&functional));
    }

    #[test]
    fn sequential_vacuous_on_empty_language() {
        let a = Va::new(1, 0, [], vec![(0, Label::Open(v("x")), 0)]);
        assert!(check_sequential(&a.trim()));
        assert!(a.language_empty());
    }

    #[test]
    fn configs_on_optional_capture() {
        let a = optional_capture_va(&['a']);
        let cfg = extended_configs(&a, &xset(&["x"])).unwrap();
        assert_eq!(cfg.label(0, &v("x")), ConfigLabel::Unseen);
        assert_eq!(cfg.label(1, &v("x")), ConfigLabel::Open);
        assert_eq!(cfg.label(2, &v("x")), ConfigLabel::Done);
        assert!(!is_semi_functional(&a, &xset(&["x"])).unwrap());
        assert!(is_semi_functional(&a, &BTreeSet::new()).unwrap());
    }

    #[test]
    fn semi_functionalization_splits_done_state() {
        let a = optional_capture_va(&['a', 'b']);
        let sf = to_semi_functional(&a, &xset(&["x"])).unwrap();
        assert!(is_semi_functional(&sf, &xset(&["x"])).unwrap());
        assert_eq!(sf.num_states(), 4); // accepting state split into ^u/^c
        assert!(sf.num_states() <= 2 * a.num_states());
        for d in ["", "a", "ab", "ba", "aab"] {
            let d = Document::new(d);
            assert_eq!(oracle_eval_va(&sf, &d), oracle_eval_va(&a, &d));
        }
        // Fixpoint: already semi-functional input is untouched up to trim.
        let again = to_semi_functional(&sf, &xset(&["x"])).unwrap();
        assert_eq!(again.num_states(), sf.num_states());
        // X = ∅ is the identity after trimming.
        let same = to_semi_functional(&a, &BTreeSet::new()).unwrap();
        assert_eq!(same.num_states(), a.trim().num_states());
    }

    #[test]
    fn compile_matches_oracle() {
        let alpha = parse_regex("(.* x{.*} .*)|(. .*)", &ab()).unwrap();
        let a = compile_regex(&alpha);
        assert!(check_sequential(&a));
        for text in ["", "a", "b", "ab", "ba", "aa", "abab", "bbbb"] {
            let d = Document::new(text);
            assert_eq!(oracle_eval_va(&a, &d), oracle_eval(&alpha, &d), "doc {text}");
        }
        // And it matches the hand-built automaton.
        let drawn = optional_capture_va(&['a', 'b']);
        for text in ["", "a", "ab", "bab", "aaaa"] {
            let d = Document::new(text);
            assert_eq!(oracle_eval_va(&a, &d), oracle_eval_va(&drawn, &d));
        }
    }

    #[test]
    fn compile_shapes() {
        let a = compile_regex(&parse_regex("x{a}", &ab()).unwrap());
        assert_eq!(a.num_states(), 4);
        assert_eq!(a.transitions().len(), 3);
        let empty = compile_regex(&RegexFormula::EmptySet);
        assert!(empty.language_empty());
        assert!(oracle_eval_va(&empty, &Document::new("a")).is_empty());
    }

    #[test]
    fn trim_examples() {
        let mut trans = vec![(0, Label::Symbol('a'), 1)];
        trans.push((2, Label::Symbol('b'), 1)); // unreachable source
        trans.push((1, Label::Epsilon, 3)); // dead end
        let a = Va::new(4, 0, [1], trans);
        let t = a.trim();
        assert_eq!(t.num_states(), 2);
        assert_eq!(
            oracle_eval_va(&t, &Document::new("a")),
            oracle_eval_va(&a, &Document::new("a"))
        );
        let dead = Va::new(2, 0, [1], vec![]);
        assert_eq!(dead.trim().num_states(), 1);
        assert!(dead.trim().accepting().is_empty());
    }

    #[test]
    fn project_examples() {
        let a = compile_regex(&parse_regex("x{a} y{b}", &ab()).unwrap());
        let p = project(&a, &xset(&["x"]));
        assert_eq!(
            oracle_eval_va(&p, &Document::new("ab")),
            MappingSet::from([Mapping::from_pairs([(v("x"), sp(1, 2))])])
        );
        let all = project(&a, &xset(&["x", "y", "z"]));
        assert_eq!(
            oracle_eval_va(&all, &Document::new("ab")),
            oracle_eval_va(&a, &Document::new("ab"))
        );
        let boolean = project(&a, &BTreeSet::new());
        assert_eq!(
            oracle_eval_va(&boolean, &Document::new("ab")),
            MappingSet::from([Mapping::empty()])
        );
        assert!(oracle_eval_va(&boolean, &Document::new("aa")).is_empty());
    }

    #[test]
    fn synchronized_checks() {
        // (x{Σ*} ∨ ε)·y{Σ*}: unique op targets, but runs disagree on x.
        let f = parse_regex("(x{.*}|\\e)y{.*}", &ab()).unwrap();
        let a = compile_regex(&f);
        assert!(va_synchronized_for(&a, &xset(&["y"])).unwrap());
        assert!(!va_synchronized_for(&a, &xset(&["x"])).unwrap());
        let boolean = compile_regex(&parse_regex(".*", &ab()).unwrap());
        assert!(va_synchronized_for(&boolean, &BTreeSet::new()).unwrap());
        // Disjunction over x: two open targets.
        let g = compile_regex(&parse_regex("x{a}|x{b}", &ab()).unwrap());
        assert!(!va_synchronized_for(&g, &xset(&["x"])).unwrap());
    }

    #[test]
    fn mappings_to_va_round_trip() {
        let d = Document::new("ab");
        let ms = MappingSet::from([
            Mapping::empty(),
            Mapping::from_pairs([(v("x"), sp(2, 2))]),
            Mapping::from_pairs([(v("x"), sp(1, 3)), (v("y"), sp(2, 2))]),
        ]);
        let a = mappings_to_va(&ms, &d, &xset(&["x", "y"])).unwrap();
        assert_eq!(oracle_eval_va(&a, &d), ms);

        let none = mappings_to_va(&MappingSet::new(), &d, &BTreeSet::new()).unwrap();
        assert!(oracle_eval_va(&none, &d).is_empty());

        let bad = MappingSet::from([Mapping::from_pairs([(v("x"), sp(1, 9))])]);
        assert!(mappings_to_va(&bad, &d, &xset(&["x"])).is_err());
    }

    #[test]
    fn json_round_trip() {
        let a = compile_regex(&parse_regex("a x{b*}|\\e", &ab()).unwrap());
        let j = va_to_json(&a);
        let back = va_from_json(&j).unwrap();
        for text in ["", "a", "ab", "abb"] {
            let d = Document::new(text);
            assert_eq!(oracle_eval_va(&back, &d), oracle_eval_va(&a, &d));
        }
        assert!(va_from_json(&serde_json::json!({"states":[0,0],"initial":0,"accepting":[],"transitions":[]})).is_err());
    }
}
