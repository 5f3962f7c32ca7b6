//! The two tractable difference pipelines.
//!
//! `difference_adhoc` handles a bounded number of shared variables: it tags
//! left-hand mappings with dummy variables that encode which shared variables
//! they bind (the "marked extension"), materializes the right-hand side,
//! computes the complement of its projection as an explicit mapping set, and
//! joins. `difference_synchronized` handles right operands that are
//! synchronized for the shared variables: it compiles the right side into a
//! deterministic automaton over per-position variable configurations (the
//! determinized match structure) and runs the left side against it, dropping
//! to an absorbing trap copy exactly when no right-hand run can match.
//!
//! Both are ad hoc: the output automaton is only correct on the given
//! document.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::algebra::{join_fpt, union_va};
use crate::enumerate::{enumerate, nonempty};
use crate::error::{Error, Result};
use crate::model::{
    mappings_compatible, Document, Mapping, MappingSet, Span, Variable,
};
use crate::regex::RESERVED_VAR_PREFIX;
use crate::va::{
    check_functional, check_sequential, extended_configs, mappings_to_va, project,
    to_semi_functional, va_synchronized_for, ConfigLabel, Label, StateId, Va,
};

/// Reference MINUS: left mappings with no compatible right mapping.
pub fn minus_sets(s1: &MappingSet, s2: &MappingSet) -> MappingSet {
    s1.iter()
        .filter(|m1| s2.iter().all(|m2| !mappings_compatible(m1, m2)))
        .cloned()
        .collect()
}

// ---------------------------------------------------------------------------
// Marked extensions
// ---------------------------------------------------------------------------

/// A mapping over V augmented with one dummy variable per element of V whose
/// span encodes domain membership: [1,1⟩ if bound, [n+1,n+1⟩ if not. Distinct
/// marked extensions are pairwise incompatible, which turns MINUS domain
/// bookkeeping into plain join compatibility. Requires n ≥ 1 so the two
/// marker spans differ.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MarkedExtension {
    base: Mapping,
    marked: Mapping,
}

pub fn dummy_var(x: &Variable) -> Variable {
    Variable::new(format!("{RESERVED_VAR_PREFIX}{x}"))
}

pub fn mark(m: &Mapping, v: &BTreeSet<Variable>, d: &Document) -> Result<MarkedExtension> {
    if d.is_empty() {
        return Err(Error::contract("marked extensions are undefined on the empty document"));
    }
    if !m.domain().is_subset(v) {
        return Err(Error::contract("mark: mapping domain exceeds the declared variable set"));
    }
    let n = d.len();
    let mut marked = m.clone();
    for x in v {
        let span = if m.contains(x) { Span::new(1, 1) } else { Span::new(n + 1, n + 1) };
        marked.bind(dummy_var(x), span);
    }
    Ok(MarkedExtension { base: m.clone(), marked })
}

impl MarkedExtension {
    pub fn base(&self) -> &Mapping {
        &self.base
    }

    pub fn marked(&self) -> &Mapping {
        &self.marked
    }
}

/// Inverse of `mark`: drop the dummy variables.
pub fn unmark(m: &Mapping) -> Mapping {
    Mapping::from_pairs(
        m.iter()
            .filter(|(x, _)| !x.name().starts_with(RESERVED_VAR_PREFIX))
            .map(|(x, s)| (x.clone(), *s)),
    )
}

fn assert_no_reserved_vars(a: &Va, which: &str) -> Result<()> {
    if a.vars().iter().any(|x| x.name().starts_with(RESERVED_VAR_PREFIX)) {
        return Err(Error::contract(format!(
            "{which} uses variables in the reserved `{RESERVED_VAR_PREFIX}` namespace"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Ad-hoc difference (bounded shared variables)
// ---------------------------------------------------------------------------

/// ⟦result⟧(d) = { μ1 ∈ ⟦A1⟧(d) : no μ2 ∈ ⟦A2⟧(d) is compatible with μ1 }.
/// Requires both operands sequential and at most `kmax` shared variables.
pub fn difference_adhoc(a1: &Va, a2: &Va, d: &Document, kmax: usize) -> Result<Va> {
    if !check_sequential(a1) || !check_sequential(a2) {
        return Err(Error::contract("difference requires sequential operands"));
    }
    assert_no_reserved_vars(a1, "left operand")?;
    assert_no_reserved_vars(a2, "right operand")?;
    let a1t = a1.trim();
    if a1t.language_empty() {
        return Ok(Va::empty_language());
    }
    if d.is_empty() {
        // On the empty document every pair of mappings is compatible (all
        // spans are [1,1⟩), so the difference is all-or-nothing.
        return Ok(if nonempty(&a2.trim(), d) { Va::empty_language() } else { a1t });
    }
    let a2p = project(a2, &a1t.vars()).trim();
    let v = a2p.vars();
    if v.len() > kmax {
        return Err(Error::SharedBound { actual: v.len(), bound: kmax });
    }
    if a2p.language_empty() {
        return Ok(a1t);
    }
    let a1sf = to_semi_functional(&a1t, &v)?;

    let a = marked_left_side(&a1sf, &v, d)?;

    let s: MappingSet = enumerate(&a2p, d)?.collect();
    let complement = complement_mappings(&s, &v, d);
    let mut marked_set = MappingSet::new();
    let mut all_vars = v.clone();
    for x in &v {
        all_vars.insert(dummy_var(x));
    }
    for nu in &complement {
        marked_set.insert(mark(nu, &v, d)?.marked().clone());
    }
    let b = mappings_to_va(&marked_set, d, &all_vars)?;

    let joined = join_fpt(&a, &b)?;
    Ok(project(&joined, &a1t.vars()).trim())
}

/// One copy of the (semi-functionalized) left operand per domain signature
/// X ⊆ V of its accepting states: a prefix chain opens and closes the dummy
/// of every x ∈ X before any input is read (spans [1,1⟩), and a suffix chain
/// after the accepting state handles V∖X (spans [n+1,n+1⟩ on `d`). The union
/// emits exactly the marked extensions of ⟦A1⟧(d).
fn marked_left_side(a1sf: &Va, v: &BTreeSet<Variable>, _d: &Document) -> Result<Va> {
    let cfg = extended_configs(a1sf, v)?;
    let mut groups: BTreeMap<BTreeSet<Variable>, Vec<StateId>> = BTreeMap::new();
    for &f in a1sf.accepting() {
        let sig: BTreeSet<Variable> =
            v.iter().filter(|x| cfg.label(f, x) == ConfigLabel::Closed).cloned().collect();
        groups.entry(sig).or_default().push(f);
    }
    let mut copies = Vec::new();
    for (sig, finals) in &groups {
        let mut transitions: Vec<(StateId, Label, StateId)> = Vec::new();
        let mut count = a1sf.num_states();
        let mut tags: Vec<String> = (0..count).map(|q| a1sf.tag(q).to_string()).collect();
        for (p, lab, q) in a1sf.transitions() {
            transitions.push((*p, lab.clone(), *q));
        }
        let mut fresh = |tags: &mut Vec<String>, tag: String| {
            tags.push(tag);
            count += 1;
            count - 1
        };
        // Prefix: dummies of the signature, before the first symbol.
        let initial = fresh(&mut tags, "pre".into());
        let mut cur = initial;
        for x in sig {
            let mid = fresh(&mut tags, format!("pre-{x}"));
            let nxt = fresh(&mut tags, format!("pre-{x}'"));
            transitions.push((cur, Label::Open(dummy_var(x)), mid));
            transitions.push((mid, Label::Close(dummy_var(x)), nxt));
            cur = nxt;
        }
        transitions.push((cur, Label::Epsilon, a1sf.initial()));
        // Suffix: the complementary dummies, after the last symbol.
        let complement: Vec<&Variable> = v.iter().filter(|x| !sig.contains(x)).collect();
        let mut accepting = Vec::new();
        for &f in finals {
            let mut cur = f;
            for x in &complement {
                let mid = fresh(&mut tags, format!("suf-{x}"));
                let nxt = fresh(&mut tags, format!("suf-{x}'"));
                transitions.push((cur, Label::Open(dummy_var(x)), mid));
                transitions.push((mid, Label::Close(dummy_var(x)), nxt));
                cur = nxt;
            }
            accepting.push(cur);
        }
        copies.push(Va::new(count, initial, accepting, transitions).with_tags(tags).trim());
    }
    Ok(union_va(&copies))
}

/// All mappings with domain ⊆ V and spans over `d` that are incompatible (at
/// the base level) with every element of `s`. Iterated in lexicographic
/// order for determinism.
fn complement_mappings(s: &MappingSet, v: &BTreeSet<Variable>, d: &Document) -> Vec<Mapping> {
    let n = d.len();
    let mut spans = Vec::new();
    for i in 1..=n + 1 {
        for j in i..=n + 1 {
            spans.push(Span::new(i, j));
        }
    }
    let vars: Vec<&Variable> = v.iter().collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << vars.len()) {
        let chosen: Vec<&Variable> =
            (0..vars.len()).filter(|i| mask & (1 << i) != 0).map(|i| vars[*&i]).collect();
        let mut idx = vec![0usize; chosen.len()];
        loop {
            let m = Mapping::from_pairs(
                chosen.iter().zip(&idx).map(|(x, &i)| ((*x).clone(), spans[i])),
            );
            if s.iter().all(|mu| !mappings_compatible(&m, mu)) {
                out.push(m);
            }
            // Advance the mixed-radix counter.
            let mut k = 0;
            loop {
                if k == idx.len() {
                    break;
                }
                idx[k] += 1;
                if idx[k] < spans.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Match graph / match structure
// ---------------------------------------------------------------------------

/// Per-state variable configuration as a letter: one entry per variable (in
/// sorted order), 0 = not yet opened, 1 = open, 2 = closed.
pub type Letter = Vec<u8>;

const CFG_W: u8 = 0;
const CFG_O: u8 = 1;
const CFG_C: u8 = 2;

/// Document-indexed reachability DAG of a functional automaton: node (i,q)
/// means the automaton can be in state q right before reading symbol i+1
/// (level ℓ = after the whole document, accepting states only). Trimmed so
/// every node lies on a source-to-accepting path.
pub struct MatchGraph {
    vars: Vec<Variable>,
    /// levels[i] = states at level i; empty vec of levels when A rejects d.
    levels: Vec<Vec<StateId>>,
    /// edges[i]: level-i state -> level-(i+1) successors.
    edges: Vec<HashMap<StateId, Vec<StateId>>>,
    letters: HashMap<StateId, Letter>,
    accepting: Vec<StateId>,
}

impl MatchGraph {
    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Number of letters in every accepted configuration word (ℓ+1).
    pub fn word_len(&self) -> usize {
        self.levels.len()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn letter(&self, q: StateId) -> &Letter {
        &self.letters[&q]
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Accepting states at the last level.
    pub fn accepting(&self) -> &[StateId] {
        &self.accepting
    }
}

/// Build the match graph of a functional automaton on `d`.
pub fn match_graph(a: &Va, d: &Document) -> Result<MatchGraph> {
    if !check_functional(a) {
        return Err(Error::contract("match_graph requires a functional automaton"));
    }
    // Normalization: splitting ambiguous states gives every state a
    // well-defined configuration.
    let vars_all = a.vars();
    let a = to_semi_functional(a, &vars_all)?;
    let vars: Vec<Variable> = a.vars().into_iter().collect();
    let empty = MatchGraph {
        vars: vars.clone(),
        levels: vec![],
        edges: vec![],
        letters: HashMap::new(),
        accepting: vec![],
    };
    if a.language_empty() {
        return Ok(empty);
    }
    let var_set: BTreeSet<Variable> = vars.iter().cloned().collect();
    let cfg = extended_configs(&a, &var_set)?;
    let mut letters = HashMap::new();
    for q in 0..a.num_states() {
        let letter: Letter = vars
            .iter()
            .map(|x| match cfg.label(q, x) {
                ConfigLabel::Unseen => CFG_W,
                ConfigLabel::Open => CFG_O,
                ConfigLabel::Closed => CFG_C,
                ConfigLabel::Done => unreachable!("normalized automaton has no ambiguous state"),
            })
            .collect();
        letters.insert(q, letter);
    }
    let adj = a.out_adj();
    // Spontaneous closure (ε and variable operations).
    let closure = |from: &[StateId]| -> Vec<StateId> {
        let mut seen: BTreeSet<StateId> = from.iter().copied().collect();
        let mut stack: Vec<StateId> = from.to_vec();
        while let Some(q) = stack.pop() {
            for &t in &adj[q] {
                let (_, lab, to) = &a.transitions()[t];
                if lab.is_spontaneous() && seen.insert(*to) {
                    stack.push(*to);
                }
            }
        }
        seen.into_iter().collect()
    };
    let n = d.len();
    let mut levels: Vec<Vec<StateId>> = Vec::with_capacity(n + 1);
    levels.push(closure(&[a.initial()]));
    let mut edges: Vec<HashMap<StateId, Vec<StateId>>> = Vec::with_capacity(n);
    for i in 1..=n {
        let c = d.symbol(i);
        let mut level_edges: HashMap<StateId, Vec<StateId>> = HashMap::new();
        let mut next: BTreeSet<StateId> = BTreeSet::new();
        for &p in &levels[i - 1] {
            let mut direct = Vec::new();
            for &t in &adj[p] {
                let (_, lab, to) = &a.transitions()[t];
                if matches!(lab, Label::Symbol(s) if *s == c) {
                    direct.push(*to);
                }
            }
            if direct.is_empty() {
                continue;
            }
            let targets = closure(&direct);
            next.extend(targets.iter().copied());
            level_edges.insert(p, targets);
        }
        levels.push(next.into_iter().collect());
        edges.push(level_edges);
    }
    // Trim backward from the accepting states at the last level.
    let mut live: Vec<BTreeSet<StateId>> = vec![BTreeSet::new(); n + 1];
    live[n] = levels[n].iter().copied().filter(|q| a.accepting().contains(q)).collect();
    for i in (0..n).rev() {
        for (&p, targets) in &edges[i] {
            if targets.iter().any(|q| live[i + 1].contains(q)) {
                live[i].insert(p);
            }
        }
    }
    if live[0].is_empty() {
        return Ok(empty);
    }
    let accepting: Vec<StateId> = live[n].iter().copied().collect();
    let levels: Vec<Vec<StateId>> = live.iter().map(|s| s.iter().copied().collect()).collect();
    let edges: Vec<HashMap<StateId, Vec<StateId>>> = edges
        .iter()
        .enumerate()
        .map(|(i, m)| {
            m.iter()
                .filter(|(p, _)| live[i].contains(p))
                .map(|(&p, ts)| {
                    (p, ts.iter().copied().filter(|q| live[i + 1].contains(q)).collect())
                })
                .collect()
        })
        .collect();
    Ok(MatchGraph { vars, levels, edges, letters, accepting })
}

/// The match graph read as an NFA over configuration letters: entering a node
/// consumes that node's letter, so accepted words are exactly the length
/// ℓ+1 configuration sequences of accepting runs — one per output mapping.
pub struct MatchStructure {
    g: MatchGraph,
}

pub fn match_structure(g: MatchGraph) -> MatchStructure {
    MatchStructure { g }
}

impl MatchStructure {
    pub fn graph(&self) -> &MatchGraph {
        &self.g
    }

    /// All accepted words (deduplicated); for tests — exponential in general.
    pub fn words(&self) -> BTreeSet<Vec<Letter>> {
        let mut out = BTreeSet::new();
        if self.g.is_empty() {
            return out;
        }
        let last = self.g.levels.len() - 1;
        let mut stack: Vec<(usize, StateId, Vec<Letter>)> = self
            .g
            .levels[0]
            .iter()
            .map(|&q| (0, q, vec![self.g.letter(q).clone()]))
            .collect();
        while let Some((i, q, word)) = stack.pop() {
            if i == last {
                out.insert(word);
                continue;
            }
            if let Some(ts) = self.g.edges[i].get(&q) {
                for &to in ts {
                    let mut w = word.clone();
                    w.push(self.g.letter(to).clone());
                    stack.push((i + 1, to, w));
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Determinized match structure
// ---------------------------------------------------------------------------

struct DetState {
    level: usize,
    seg_start: usize,
    letter: usize,
    set: BTreeSet<StateId>,
}

/// Deterministic automaton with the same language as the match structure.
/// Non-initial states are triples (level, segment start, state set) where the
/// set is determined by the triple's key — a property guaranteed by the
/// underlying automaton being synchronized for all its variables, and checked
/// during construction.
pub struct DetMatchStructure {
    letters: Vec<Letter>,
    letter_ids: HashMap<Letter, usize>,
    states: Vec<DetState>, // index 0 is the synthetic initial state
    trans: HashMap<(usize, usize), usize>,
    finals: HashSet<usize>,
    word_len: usize,
}

pub fn determinize_match_structure(m: &MatchStructure) -> Result<DetMatchStructure> {
    let g = &m.g;
    let k = g.vars.len();
    let mut d2 = DetMatchStructure {
        letters: Vec::new(),
        letter_ids: HashMap::new(),
        states: vec![DetState {
            level: usize::MAX,
            seg_start: 0,
            letter: usize::MAX,
            set: BTreeSet::new(),
        }],
        trans: HashMap::new(),
        finals: HashSet::new(),
        word_len: g.word_len(),
    };
    if g.is_empty() {
        return Ok(d2);
    }
    let last = g.levels.len() - 1;
    let letter_id = |d2: &mut DetMatchStructure, l: &Letter| -> usize {
        if let Some(&i) = d2.letter_ids.get(l) {
            return i;
        }
        d2.letters.push(l.clone());
        d2.letter_ids.insert(l.clone(), d2.letters.len() - 1);
        d2.letters.len() - 1
    };
    // Key (level, segment start, letter) must determine the state set.
    let mut key_index: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let intern = |d2: &mut DetMatchStructure,
                      key_index: &mut HashMap<(usize, usize, usize), usize>,
                      work: &mut Vec<usize>,
                      level: usize,
                      seg: usize,
                      letter: usize,
                      set: BTreeSet<StateId>|
     -> Result<usize> {
        if let Some(&i) = key_index.get(&(level, seg, letter)) {
            if d2.states[i].set != set {
                return Err(Error::contract(
                    "determinize_match_structure: two first-entry sets disagree for one \
                     configuration; the automaton is not synchronized for its variables",
                ));
            }
            return Ok(i);
        }
        d2.states.push(DetState { level, seg_start: seg, letter, set });
        let i = d2.states.len() - 1;
        key_index.insert((level, seg, letter), i);
        work.push(i);
        Ok(i)
    };
    // Level-0 states grouped by letter.
    let mut work: Vec<usize> = Vec::new();
    let mut by_letter: BTreeMap<Letter, BTreeSet<StateId>> = BTreeMap::new();
    for &q in &g.levels[0] {
        by_letter.entry(g.letter(q).clone()).or_default().insert(q);
    }
    for (l, set) in by_letter {
        let lid = letter_id(&mut d2, &l);
        let i = intern(&mut d2, &mut key_index, &mut work, 0, 0, lid, set)?;
        d2.trans.insert((0, lid), i);
    }
    while let Some(i) = work.pop() {
        let (level, seg, lid) = (d2.states[i].level, d2.states[i].seg_start, d2.states[i].letter);
        if level == last {
            d2.finals.insert(i);
            continue;
        }
        let mut by_letter: BTreeMap<Letter, BTreeSet<StateId>> = BTreeMap::new();
        for p in d2.states[i].set.clone() {
            if let Some(ts) = g.edges[level].get(&p) {
                for &q in ts {
                    by_letter.entry(g.letter(q).clone()).or_default().insert(q);
                }
            }
        }
        for (l, set) in by_letter {
            let l2 = letter_id(&mut d2, &l);
            // Same letter continues the current segment; a new letter starts
            // a new segment at the next level.
            let seg2 = if l2 == lid { seg } else { level + 1 };
            let j = intern(&mut d2, &mut key_index, &mut work, level + 1, seg2, l2, set)?;
            d2.trans.insert((i, l2), j);
        }
    }
    // Structural size bounds: letters ≤ 2k+1, states ≤ (ℓ+1)²·(2k+1)+1.
    let ell_plus_1 = g.levels.len();
    if d2.letters.len() > 2 * k + 1 {
        return Err(Error::contract(format!(
            "determinize_match_structure: {} distinct configurations exceed the 2k+1 = {} \
             bound; the automaton is not synchronized",
            d2.letters.len(),
            2 * k + 1
        )));
    }
    assert!(
        d2.states.len() - 1 <= ell_plus_1 * ell_plus_1 * (2 * k + 1),
        "determinized match structure exceeds the O(l^2 k) state bound"
    );
    assert!(
        d2.trans.len() <= (d2.states.len()) * (2 * k + 1),
        "determinized match structure exceeds the O(l^2 k^2) transition bound"
    );
    Ok(d2)
}

impl DetMatchStructure {
    pub fn initial(&self) -> usize {
        0
    }

    pub fn num_states(&self) -> usize {
        self.states.len() - 1
    }

    pub fn num_transitions(&self) -> usize {
        self.trans.len()
    }

    pub fn num_letters(&self) -> usize {
        self.letters.len()
    }

    pub fn is_final(&self, s: usize) -> bool {
        self.finals.contains(&s)
    }

    /// Level of a non-initial state: number of symbols consumed so far.
    pub fn level(&self, s: usize) -> Option<usize> {
        (s != 0).then(|| self.states[s].level)
    }

    pub fn step(&self, s: usize, letter: &Letter) -> Option<usize> {
        let lid = *self.letter_ids.get(letter)?;
        self.trans.get(&(s, lid)).copied()
    }

    pub fn accepts(&self, word: &[Letter]) -> bool {
        if word.len() != self.word_len {
            return false;
        }
        let mut s = 0;
        for l in word {
            match self.step(s, l) {
                Some(t) => s = t,
                None => return false,
            }
        }
        self.is_final(s)
    }

    /// All accepted words; for tests.
    pub fn words(&self) -> BTreeSet<Vec<Letter>> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<(usize, Vec<Letter>)> = vec![(0, vec![])];
        while let Some((s, word)) = stack.pop() {
            if word.len() == self.word_len {
                if self.is_final(s) {
                    out.insert(word);
                }
                continue;
            }
            for (&(from, lid), &to) in &self.trans {
                if from == s {
                    let mut w = word.clone();
                    w.push(self.letters[lid].clone());
                    stack.push((to, w));
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Skip decomposition and the synchronized pipeline
// ---------------------------------------------------------------------------

/// Split a sequential automaton that is semi-functional for X into
/// sub-automata whose accepting states all skip (leave unbound) the same
/// subset of X. At most |F| parts; their union is equivalent to the input.
pub fn skip_decompose(a1: &Va, xs: &BTreeSet<Variable>) -> Result<Vec<(BTreeSet<Variable>, Va)>> {
    if !check_sequential(a1) {
        return Err(Error::contract("skip_decompose requires a sequential automaton"));
    }
    let a = a1.trim();
    if a.language_empty() {
        return Ok(vec![]);
    }
    let cfg = extended_configs(&a, xs)?;
    if cfg.has_done() {
        return Err(Error::contract("skip_decompose requires semi-functionality for X"));
    }
    let mut groups: BTreeMap<BTreeSet<Variable>, Vec<StateId>> = BTreeMap::new();
    for &f in a.accepting() {
        let skip: BTreeSet<Variable> =
            xs.iter().filter(|x| cfg.label(f, x) == ConfigLabel::Unseen).cloned().collect();
        groups.entry(skip).or_default().push(f);
    }
    Ok(groups
        .into_iter()
        .map(|(skip, finals)| {
            let part = Va::new(a.num_states(), a.initial(), finals, a.transitions().to_vec())
                .with_tags((0..a.num_states()).map(|q| a.tag(q).to_string()).collect())
                .trim();
            (skip, part)
        })
        .collect())
}

/// Difference where the right operand is synchronized for the shared
/// variables X and the left operand is semi-functional for X. Ad hoc for `d`.
pub fn difference_synchronized(a1: &Va, a2: &Va, d: &Document) -> Result<Va> {
    if !check_sequential(a1) || !check_sequential(a2) {
        return Err(Error::contract("difference requires sequential operands"));
    }
    let shared: BTreeSet<Variable> = a1.vars().intersection(&a2.vars()).cloned().collect();
    let a1t = a1.trim();
    if extended_configs(&a1t, &shared)?.has_done() {
        return Err(Error::contract(
            "difference_synchronized requires the left operand semi-functional for the shared \
             variables",
        ));
    }
    if !va_synchronized_for(a2, &shared)? {
        return Err(Error::contract(
            "difference_synchronized requires the right operand synchronized for the shared \
             variables",
        ));
    }
    if a1t.language_empty() {
        return Ok(Va::empty_language());
    }
    if d.is_empty() {
        return Ok(if nonempty(&a2.trim(), d) { Va::empty_language() } else { a1t });
    }
    // Normalize the right side: only shared variables matter, and only those
    // it always binds constrain compatibility (synchronization makes binding
    // all-or-nothing per variable).
    let a2x = project(a2, &shared).trim();
    if a2x.language_empty() {
        return Ok(a1t);
    }
    let cfg2 = extended_configs(&a2x, &a2x.vars())?;
    let mut x_eff: BTreeSet<Variable> = BTreeSet::new();
    for x in &a2x.vars() {
        let mut labels = a2x.accepting().iter().map(|&f| cfg2.label(f, x));
        let first = labels.next().expect("trimmed nonempty automaton has accepting states");
        if labels.any(|l| l != first) {
            return Err(Error::contract(
                "right operand binds a shared variable on some but not all runs; not \
                 synchronized",
            ));
        }
        if first == ConfigLabel::Closed {
            x_eff.insert(x.clone());
        }
    }
    let a2e = project(&a2x, &x_eff).trim();
    if !check_functional(&a2e) {
        return Err(Error::contract(
            "right operand did not normalize to a functional automaton over the shared variables",
        ));
    }
    let parts = skip_decompose(&a1t, &x_eff)?;
    let mut results = Vec::new();
    for (skip, a1j) in &parts {
        let xj: BTreeSet<Variable> = x_eff.difference(skip).cloned().collect();
        let a2j = project(&a2e, &xj).trim();
        let g = match_graph(&a2j, d)?;
        if g.is_empty() {
            // The right side rejects d entirely: nothing to subtract.
            results.push(a1j.clone());
            continue;
        }
        let d2 = determinize_match_structure(&match_structure(g))?;
        results.push(trap_product(a1j, &xj, &d2, d.len())?);
    }
    Ok(union_va(&results).trim())
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Follow {
    At(usize),
    Trap,
}

/// Run the left sub-automaton against the determinized match structure. The
/// follower consumes the left state's configuration letter at every symbol
/// read (and the final letter at acceptance after the whole document);
/// whenever it has no transition — or ends in a non-final state — the word of
/// the left mapping is not produced by the right side, so the run drops into
/// an absorbing trap copy, and only trap states accept.
fn trap_product(a1j: &Va, xj: &BTreeSet<Variable>, d2: &DetMatchStructure, n: usize) -> Result<Va> {
    let cfg = extended_configs(a1j, xj)?;
    let letter_of = |q: StateId| -> Letter {
        xj.iter()
            .map(|x| match cfg.label(q, x) {
                ConfigLabel::Unseen => CFG_W,
                ConfigLabel::Open => CFG_O,
                ConfigLabel::Closed => CFG_C,
                ConfigLabel::Done => unreachable!("checked semi-functional"),
            })
            .collect()
    };
    let adj = a1j.out_adj();
    let mut index: HashMap<(StateId, Follow), usize> = HashMap::new();
    let mut states: Vec<(StateId, Follow)> = Vec::new();
    let mut transitions: Vec<(usize, Label, usize)> = Vec::new();
    let start = (a1j.initial(), Follow::At(d2.initial()));
    index.insert(start, 0);
    states.push(start);
    let mut work = vec![0usize];
    while let Some(i) = work.pop() {
        let (q1, z) = states[i];
        let reach = |index: &mut HashMap<(StateId, Follow), usize>,
                         states: &mut Vec<(StateId, Follow)>,
                         work: &mut Vec<usize>,
                         to: (StateId, Follow)|
         -> usize {
            *index.entry(to).or_insert_with(|| {
                states.push(to);
                work.push(states.len() - 1);
                states.len() - 1
            })
        };
        for &t in &adj[q1] {
            let (_, lab, to1) = &a1j.transitions()[t];
            let target = match (lab, z) {
                (_, Follow::Trap) => (*to1, Follow::Trap),
                (l, Follow::At(s)) if l.is_spontaneous() => (*to1, Follow::At(s)),
                (_, Follow::At(s)) => match d2.step(s, &letter_of(q1)) {
                    Some(s2) => (*to1, Follow::At(s2)),
                    None => (*to1, Follow::Trap),
                },
            };
            let j = reach(&mut index, &mut states, &mut work, target);
            transitions.push((i, lab.clone(), j));
        }
        // End-of-document check: after all n symbols, an accepting left state
        // escapes to the trap unless the follower accepts the final letter.
        if a1j.accepting().contains(&q1) {
            if let Follow::At(s) = z {
                if d2.level(s) == Some(n - 1) {
                    let matched = d2
                        .step(s, &letter_of(q1))
                        .map(|s2| d2.is_final(s2))
                        .unwrap_or(false);
                    if !matched {
                        let j = reach(&mut index, &mut states, &mut work, (q1, Follow::Trap));
                        transitions.push((i, Label::Epsilon, j));
                    }
                }
            }
        }
    }
    let accepting: Vec<usize> = states
        .iter()
        .enumerate()
        .filter(|&(_, &(q1, z))| z == Follow::Trap && a1j.accepting().contains(&q1))
        .map(|(i, _)| i)
        .collect();
    let tags = states
        .iter()
        .map(|&(q1, z)| match z {
            Follow::At(s) => format!("({},d{})", a1j.tag(q1), s),
            Follow::Trap => format!("({},trap)", a1j.tag(q1)),
        })
        .collect();
    Ok(Va::new(states.len(), 0, accepting, transitions).with_tags(tags).trim())
}
