//! Duplicate-free streaming enumeration of the mappings of a sequential
//! vset-automaton on a document, in the flashlight style: depth-first search
//! over canonical per-position operation choices, pruned by a precomputed
//! feasibility table so that every explored branch yields at least one output.
//! Also: plain nonemptiness, which for sequential automata reduces to
//! (state, position) reachability.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::model::{Document, Mapping, Span, Variable};
use crate::va::{check_sequential, Label, Va};

/// Does the automaton produce at least one mapping on `d`? For sequential
/// automata every accepting run is valid, so this is reachability of
/// (accepting, n+1) in the graph where spontaneous transitions keep the
/// position and symbol transitions must match the document. Callers must
/// ensure sequentiality; on non-sequential input this may overcount.
pub fn nonempty(a: &Va, d: &Document) -> bool {
    let n = d.len();
    let adj = a.out_adj();
    let mut seen = vec![false; a.num_states() * (n + 1)];
    let idx = |q: usize, pos: usize| q * (n + 1) + (pos - 1);
    let mut stack = vec![(a.initial(), 1usize)];
    seen[idx(a.initial(), 1)] = true;
    while let Some((q, pos)) = stack.pop() {
        if pos == n + 1 && a.accepting().contains(&q) {
            return true;
        }
        for &t in &adj[q] {
            let (_, lab, to) = &a.transitions()[t];
            let next = match lab {
                Label::Symbol(c) => (pos <= n && d.symbol(pos) == *c).then_some((*to, pos + 1)),
                _ => Some((*to, pos)),
            };
            if let Some((q2, p2)) = next {
                if !seen[idx(q2, p2)] {
                    seen[idx(q2, p2)] = true;
                    stack.push((q2, p2));
                }
            }
        }
    }
    false
}

const ST_WAITING: u64 = 0;
const ST_OPEN: u64 = 1;
const ST_CLOSED: u64 = 2;

fn st_get(packed: u64, i: usize) -> u64 {
    (packed >> (2 * i)) & 3
}

fn st_set(packed: u64, i: usize, v: u64) -> u64 {
    (packed & !(3 << (2 * i))) | (v << (2 * i))
}

/// What a variable does at one position of the canonical event sequence.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum PosOp {
    Nothing,
    Open,
    OpenClose,
    Close,
}

type Choice = Vec<PosOp>;

/// Compact per-state edge lists with variables resolved to indices.
struct Edges {
    eps: Vec<Vec<usize>>,
    sym: Vec<Vec<(char, usize)>>,
    ops: Vec<Vec<(usize, bool, usize)>>, // (var index, is_open, target)
}

fn build_edges(a: &Va, vars: &[Variable]) -> Edges {
    let n = a.num_states();
    let mut e = Edges { eps: vec![vec![]; n], sym: vec![vec![]; n], ops: vec![vec![]; n] };
    for (p, lab, q) in a.transitions() {
        match lab {
            Label::Epsilon => e.eps[*p].push(*q),
            Label::Symbol(c) => e.sym[*p].push((*c, *q)),
            Label::Open(x) => {
                e.ops[*p].push((vars.iter().position(|v| v == x).unwrap(), true, *q))
            }
            Label::Close(x) => {
                e.ops[*p].push((vars.iter().position(|v| v == x).unwrap(), false, *q))
            }
        }
    }
    e
}

struct Frame {
    pos: usize,
    frontier: Vec<usize>,
    choices: Vec<Choice>,
    next_choice: usize,
    /// Ops applied when this frame was pushed (to revert on pop).
    entry_ops: Vec<(usize, PosOp)>,
}

pub struct Enumerator {
    n: usize,
    symbols: Vec<char>,
    vars: Vec<Variable>,
    edges: Edges,
    /// Triples (pos, state, packed statuses) from which an accepting
    /// completion exists, over the forward-reachable configuration graph.
    live: HashSet<(usize, usize, u64)>,
    /// States from which an accepting state is reachable via ε only.
    acc_eps: Vec<bool>,
    stack: Vec<Frame>,
    open_at: Vec<Option<usize>>,
    close_at: Vec<Option<usize>>,
    visits: u64,
}

/// Streaming enumeration of all mappings of a sequential automaton on `d`,
/// without duplicates. Errors on non-sequential input.
pub fn enumerate(a: &Va, d: &Document) -> Result<Enumerator> {
    if !check_sequential(a) {
        return Err(Error::contract("enumerate requires a sequential automaton"));
    }
    let a = a.trim();
    let vars: Vec<Variable> = a.vars().into_iter().collect();
    if vars.len() > 30 {
        return Err(Error::contract(format!(
            "enumerate supports at most 30 variables, got {}",
            vars.len()
        )));
    }
    let n = d.len();
    let edges = build_edges(&a, &vars);
    let accepting: Vec<bool> = (0..a.num_states()).map(|q| a.accepting().contains(&q)).collect();

    // ε-only co-reachability of accepting states.
    let mut acc_eps = accepting.clone();
    let mut eps_in = vec![Vec::new(); a.num_states()];
    for (p, lab, q) in a.transitions() {
        if matches!(lab, Label::Epsilon) {
            eps_in[*q].push(*p);
        }
    }
    let mut queue: VecDeque<usize> = (0..a.num_states()).filter(|&q| acc_eps[q]).collect();
    while let Some(q) = queue.pop_front() {
        for &p in &eps_in[q] {
            if !acc_eps[p] {
                acc_eps[p] = true;
                queue.push_back(p);
            }
        }
    }

    let live = feasibility_table(&a, d, &vars, &edges, &accepting);

    let mut en = Enumerator {
        n,
        symbols: d.symbols().to_vec(),
        vars,
        edges,
        live,
        acc_eps,
        stack: Vec::new(),
        open_at: Vec::new(),
        close_at: Vec::new(),
        visits: 0,
    };
    en.open_at = vec![None; en.vars.len()];
    en.close_at = vec![None; en.vars.len()];
    if !a.language_empty() {
        let choices = en.gen_choices(1, 0);
        en.stack.push(Frame {
            pos: 1,
            frontier: vec![a.initial()],
            choices,
            next_choice: 0,
            entry_ops: Vec::new(),
        });
    }
    Ok(en)
}

/// Forward pass over (pos, state, statuses) configurations, then a backward
/// pass marking those from which acceptance is still possible.
fn feasibility_table(
    a: &Va,
    d: &Document,
    vars: &[Variable],
    edges: &Edges,
    accepting: &[bool],
) -> HashSet<(usize, usize, u64)> {
    let n = d.len();
    type Node = (usize, usize, u64);
    let mut index: HashMap<Node, usize> = HashMap::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut preds: Vec<Vec<usize>> = Vec::new();
    let intern = |nodes: &mut Vec<Node>,
                      preds: &mut Vec<Vec<usize>>,
                      index: &mut HashMap<Node, usize>,
                      v: Node| {
        *index.entry(v).or_insert_with(|| {
            nodes.push(v);
            preds.push(Vec::new());
            nodes.len() - 1
        })
    };
    let start: Node = (1, a.initial(), 0);
    let s0 = intern(&mut nodes, &mut preds, &mut index, start);
    let mut work = vec![s0];
    while let Some(i) = work.pop() {
        let (pos, q, st) = nodes[i];
        let push = |nodes: &mut Vec<Node>,
                        preds: &mut Vec<Vec<usize>>,
                        index: &mut HashMap<Node, usize>,
                        work: &mut Vec<usize>,
                        v: Node| {
            let before = nodes.len();
            let j = intern(nodes, preds, index, v);
            preds[j].push(i);
            if nodes.len() > before {
                work.push(j);
            }
        };
        for &to in &edges.eps[q] {
            push(&mut nodes, &mut preds, &mut index, &mut work, (pos, to, st));
        }
        for &(x, is_open, to) in &edges.ops[q] {
            let cur = st_get(st, x);
            let next = match (is_open, cur) {
                (true, ST_WAITING) => Some(st_set(st, x, ST_OPEN)),
                (false, ST_OPEN) => Some(st_set(st, x, ST_CLOSED)),
                _ => None,
            };
            if let Some(st2) = next {
                push(&mut nodes, &mut preds, &mut index, &mut work, (pos, to, st2));
            }
        }
        if pos <= n {
            let c = d.symbol(pos);
            for &(sym, to) in &edges.sym[q] {
                if sym == c {
                    push(&mut nodes, &mut preds, &mut index, &mut work, (pos + 1, to, st));
                }
            }
        }
    }
    // Backward from accepting configurations (position n+1, nothing open).
    let mut live = vec![false; nodes.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (i, &(pos, q, st)) in nodes.iter().enumerate() {
        let none_open = (0..vars.len()).all(|x| st_get(st, x) != ST_OPEN);
        if pos == n + 1 && accepting[q] && none_open {
            live[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for &p in &preds[i] {
            if !live[p] {
                live[p] = true;
                queue.push_back(p);
            }
        }
    }
    nodes
        .iter()
        .enumerate()
        .filter(|&(i, _)| live[i])
        .map(|(_, &v)| v)
        .collect()
}

impl Enumerator {
    /// Number of search nodes probed so far; the delay instrumentation.
    pub fn node_visits(&self) -> u64 {
        self.visits
    }

    fn packed_statuses(&self) -> u64 {
        let mut st = 0u64;
        for x in 0..self.vars.len() {
            let v = match (self.open_at[x], self.close_at[x]) {
                (Some(_), None) => ST_OPEN,
                (Some(_), Some(_)) => ST_CLOSED,
                _ => ST_WAITING,
            };
            st = st_set(st, x, v);
        }
        st
    }

    /// All legal operation choices at `pos` given the packed statuses, in a
    /// fixed canonical order (lexicographic per variable).
    fn gen_choices(&self, pos: usize, st: u64) -> Vec<Choice> {
        let last = pos == self.n + 1;
        let mut out: Vec<Choice> = vec![Vec::new()];
        for x in 0..self.vars.len() {
            let opts: &[PosOp] = match st_get(st, x) {
                ST_WAITING if last => &[PosOp::Nothing, PosOp::OpenClose],
                ST_WAITING => &[PosOp::Nothing, PosOp::Open, PosOp::OpenClose],
                ST_OPEN if last => &[PosOp::Close],
                ST_OPEN => &[PosOp::Nothing, PosOp::Close],
                _ => &[PosOp::Nothing],
            };
            out = out
                .into_iter()
                .flat_map(|c| {
                    opts.iter().map(move |&o| {
                        let mut c2 = c.clone();
                        c2.push(o);
                        c2
                    })
                })
                .collect();
        }
        out
    }

    /// States reachable from the frontier by performing exactly the chosen
    /// operations (in any interleaving with ε, opens before their own
    /// closes). Returns the states that have performed all of them.
    fn run_choice(&self, frontier: &[usize], choice: &Choice) -> Vec<usize> {
        // Event bits: per variable, up to an open bit and a close bit.
        let mut open_bit = vec![None; self.vars.len()];
        let mut close_bit = vec![None; self.vars.len()];
        let mut bits = 0;
        for (x, op) in choice.iter().enumerate() {
            match op {
                PosOp::Nothing => {}
                PosOp::Open => {
                    open_bit[x] = Some(bits);
                    bits += 1;
                }
                PosOp::Close => {
                    close_bit[x] = Some(bits);
                    bits += 1;
                }
                PosOp::OpenClose => {
                    open_bit[x] = Some(bits);
                    close_bit[x] = Some(bits + 1);
                    bits += 2;
                }
            }
        }
        let full: u32 = if bits == 32 { u32::MAX } else { (1u32 << bits) - 1 };
        let mut seen: HashSet<(usize, u32)> = frontier.iter().map(|&q| (q, 0)).collect();
        let mut stack: Vec<(usize, u32)> = seen.iter().copied().collect();
        let mut done: Vec<usize> = Vec::new();
        let mut done_set: HashSet<usize> = HashSet::new();
        while let Some((q, mask)) = stack.pop() {
            if mask == full && done_set.insert(q) {
                done.push(q);
            }
            for &to in &self.edges.eps[q] {
                if seen.insert((to, mask)) {
                    stack.push((to, mask));
                }
            }
            for &(x, is_open, to) in &self.edges.ops[q] {
                let bit = if is_open { open_bit[x] } else { close_bit[x] };
                let Some(b) = bit else { continue };
                if mask & (1 << b) != 0 {
                    continue;
                }
                // An open scheduled at this position must precede its close.
                if !is_open {
                    if let Some(ob) = open_bit[x] {
                        if mask & (1 << ob) == 0 {
                            continue;
                        }
                    }
                }
                let m2 = mask | (1 << b);
                if seen.insert((to, m2)) {
                    stack.push((to, m2));
                }
            }
        }
        done
    }

    fn apply_choice(&mut self, pos: usize, choice: &Choice) -> Vec<(usize, PosOp)> {
        let mut applied = Vec::new();
        for (x, &op) in choice.iter().enumerate() {
            match op {
                PosOp::Nothing => continue,
                PosOp::Open => self.open_at[x] = Some(pos),
                PosOp::Close => self.close_at[x] = Some(pos),
                PosOp::OpenClose => {
                    self.open_at[x] = Some(pos);
                    self.close_at[x] = Some(pos);
                }
            }
            applied.push((x, op));
        }
        applied
    }

    fn revert_ops(&mut self, ops: &[(usize, PosOp)]) {
        for &(x, op) in ops {
            match op {
                PosOp::Nothing => {}
                PosOp::Open => self.open_at[x] = None,
                PosOp::Close => self.close_at[x] = None,
                PosOp::OpenClose => {
                    self.open_at[x] = None;
                    self.close_at[x] = None;
                }
            }
        }
    }

    fn current_mapping(&self) -> Mapping {
        let mut m = Mapping::empty();
        for x in 0..self.vars.len() {
            if let (Some(i), Some(j)) = (self.open_at[x], self.close_at[x]) {
                m.bind(self.vars[x].clone(), Span::new(i, j));
            }
        }
        m
    }

    fn status_after(&self, st: u64, choice: &Choice) -> u64 {
        let mut out = st;
        for (x, &op) in choice.iter().enumerate() {
            out = match op {
                PosOp::Nothing => out,
                PosOp::Open => st_set(out, x, ST_OPEN),
                PosOp::Close | PosOp::OpenClose => st_set(out, x, ST_CLOSED),
            };
        }
        out
    }
}

impl Iterator for Enumerator {
    type Item = Mapping;

    fn next(&mut self) -> Option<Mapping> {
        loop {
            let top = self.stack.len().checked_sub(1)?;
            if self.stack[top].next_choice >= self.stack[top].choices.len() {
                let frame = self.stack.pop().unwrap();
                let ops = frame.entry_ops;
                self.revert_ops(&ops);
                continue;
            }
            let pos = self.stack[top].pos;
            let idx = self.stack[top].next_choice;
            self.stack[top].next_choice += 1;
            self.visits += 1;

            let choice = self.stack[top].choices[idx].clone();
            let st = self.packed_statuses();
            let done = {
                let frontier = &self.stack[top].frontier;
                self.run_choice(frontier, &choice)
            };
            if done.is_empty() {
                continue;
            }
            if pos == self.n + 1 {
                if done.iter().any(|&q| self.acc_eps[q]) {
                    let applied = self.apply_choice(pos, &choice);
                    let m = self.current_mapping();
                    self.revert_ops(&applied);
                    return Some(m);
                }
                continue;
            }
            // Seal the position: read the next document symbol and keep only
            // branches from which an accepting completion exists.
            let st_after = self.status_after(st, &choice);
            let c = self.symbols[pos - 1];
            let mut next_frontier: Vec<usize> = Vec::new();
            let mut feasible = false;
            let mut dedup: HashSet<usize> = HashSet::new();
            for &q in &done {
                for &(sym, to) in &self.edges.sym[q] {
                    if sym != c {
                        continue;
                    }
                    if dedup.insert(to) {
                        next_frontier.push(to);
                    }
                    if self.live.contains(&(pos + 1, to, st_after)) {
                        feasible = true;
                    }
                }
            }
            if !feasible {
                continue;
            }
            let entry_ops = self.apply_choice(pos, &choice);
            let choices = self.gen_choices(pos + 1, st_after);
            self.stack.push(Frame {
                pos: pos + 1,
                frontier: next_frontier,
                choices,
                next_choice: 0,
                entry_ops,
            });
        }
    }
}
