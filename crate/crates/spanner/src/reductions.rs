//! CNF-to-spanner instance generators.
//!
//! Each generator turns a CNF formula into a (regex, regex, document) triple
//! whose join or difference is nonempty exactly when the formula is
//! satisfiable (for the weighted generator: satisfiable by an assignment with
//! a prescribed number of true variables). They serve as correctness stress
//! tests — cross-checked against the exhaustive `sat_bruteforce` — and as
//! hard-instance factories for benchmarks.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::Document;
use crate::regex::RegexFormula;

/// A CNF formula over variables 1..=n; a literal is a signed index
/// (`-3` = ¬x3). Clause width is checked by the individual generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Vec<i32>>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i32>>) -> Result<Self> {
        for clause in &clauses {
            if clause.is_empty() {
                return Err(Error::invalid("CNF clause must not be empty"));
            }
            for &lit in clause {
                let v = lit.unsigned_abs() as usize;
                if lit == 0 || v > num_vars {
                    return Err(Error::invalid(format!(
                        "literal {lit} out of range for {num_vars} variables"
                    )));
                }
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<i32>] {
        &self.clauses
    }

    /// Parse DIMACS CNF (`p cnf <vars> <clauses>` header, `c` comments,
    /// zero-terminated clauses possibly spanning lines).
    pub fn from_dimacs(text: &str) -> Result<Self> {
        let mut num_vars = None;
        let mut declared_clauses = 0usize;
        let mut clauses = Vec::new();
        let mut current: Vec<i32> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('p') {
                if num_vars.is_some() {
                    return Err(Error::invalid("duplicate DIMACS problem line"));
                }
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if fields.len() != 3 || fields[0] != "cnf" {
                    return Err(Error::invalid(format!("malformed DIMACS problem line: {line}")));
                }
                num_vars = Some(
                    fields[1]
                        .parse::<usize>()
                        .map_err(|_| Error::invalid("malformed DIMACS variable count"))?,
                );
                declared_clauses = fields[2]
                    .parse::<usize>()
                    .map_err(|_| Error::invalid("malformed DIMACS clause count"))?;
                continue;
            }
            if num_vars.is_none() {
                return Err(Error::invalid("DIMACS clause before problem line"));
            }
            for tok in line.split_whitespace() {
                let lit: i32 =
                    tok.parse().map_err(|_| Error::invalid(format!("bad DIMACS literal {tok}")))?;
                if lit == 0 {
                    if current.is_empty() {
                        return Err(Error::invalid("empty DIMACS clause"));
                    }
                    clauses.push(std::mem::take(&mut current));
                } else {
                    current.push(lit);
                }
            }
        }
        if !current.is_empty() {
            clauses.push(current);
        }
        let num_vars = num_vars.ok_or_else(|| Error::invalid("missing DIMACS problem line"))?;
        if clauses.len() != declared_clauses {
            return Err(Error::invalid(format!(
                "DIMACS header declares {declared_clauses} clauses but {} were given",
                clauses.len()
            )));
        }
        CnfFormula::new(num_vars, clauses)
    }

    fn require_width(&self, lo: usize, hi: usize) -> Result<()> {
        for clause in &self.clauses {
            if clause.len() < lo || clause.len() > hi {
                return Err(Error::invalid(format!(
                    "clause {clause:?} has {} literals; expected {lo}..={hi}",
                    clause.len()
                )));
            }
        }
        Ok(())
    }

    /// Per clause: variable index -> literal sign (true = positive).
    /// Errors on tautological clauses (x and ¬x together), which the
    /// difference generators cannot encode; callers should drop them first.
    fn clause_signs(&self) -> Result<Vec<BTreeMap<usize, bool>>> {
        let mut out = Vec::with_capacity(self.clauses.len());
        for clause in &self.clauses {
            let mut signs: BTreeMap<usize, bool> = BTreeMap::new();
            for &lit in clause {
                let v = lit.unsigned_abs() as usize;
                let sign = lit > 0;
                if let Some(&prev) = signs.get(&v) {
                    if prev != sign {
                        return Err(Error::invalid(format!(
                            "clause {clause:?} is a tautology; drop it before generating"
                        )));
                    }
                } else {
                    signs.insert(v, sign);
                }
            }
            out.push(signs);
        }
        Ok(out)
    }
}

/// Exhaustive satisfiability check, optionally restricted to assignments
/// with exactly `weight` true variables. Capped at 20 variables.
pub fn sat_bruteforce(phi: &CnfFormula, weight: Option<usize>) -> Result<bool> {
    let n = phi.num_vars;
    if n > 20 {
        return Err(Error::invalid(format!("sat_bruteforce supports at most 20 variables, got {n}")));
    }
    for mask in 0u32..(1u32 << n) {
        if let Some(w) = weight {
            if mask.count_ones() as usize != w {
                continue;
            }
        }
        let ok = phi.clauses.iter().all(|clause| {
            clause.iter().any(|&lit| {
                let v = lit.unsigned_abs() as usize;
                (mask >> (v - 1)) & 1 == u32::from(lit > 0)
            })
        });
        if ok {
            return Ok(true);
        }
    }
    Ok(false)
}

fn eps_bind(name: String) -> RegexFormula {
    RegexFormula::bind(name, RegexFormula::Epsilon)
}

/// Capture-variable name for variable i as seen by clause j with polarity t/f.
fn join_var(i: usize, j: usize, positive: bool) -> String {
    format!("x{i}_{j}_{}", if positive { "t" } else { "f" })
}

/// 3SAT → join nonemptiness on the one-letter document "a".
///
/// γ1 forces, per CNF variable, a consistent polarity choice across all
/// clauses (encoded in which ε-capture variables it binds, all at position
/// 1); γ2 starts with the letter, so its ε-captures sit at position 2 and a
/// compatible pair must have disjoint domains. γ2 requires one *satisfied*
/// literal witness per clause, and γ1's branch for variable i occupies
/// exactly the opposite-polarity witnesses — so the join is nonempty iff the
/// formula is satisfiable.
pub fn gen_join_3sat(phi: &CnfFormula) -> Result<(RegexFormula, RegexFormula, Document)> {
    phi.require_width(3, 3)?;
    let n = phi.num_vars;
    let m = phi.clauses.len();
    let gamma1 = RegexFormula::concat_all(
        (1..=n)
            .map(|i| {
                RegexFormula::disjunction(
                    RegexFormula::concat_all((1..=m).map(|j| eps_bind(join_var(i, j, true)))),
                    RegexFormula::concat_all((1..=m).map(|j| eps_bind(join_var(i, j, false)))),
                )
            })
            .chain([RegexFormula::Symbol('a')]),
    );
    let gamma2 = RegexFormula::concat_all([RegexFormula::Symbol('a')].into_iter().chain(
        phi.clauses.iter().enumerate().map(|(j0, clause)| {
            let j = j0 + 1;
            let mut seen = BTreeSet::new();
            RegexFormula::disjunction_all(clause.iter().filter_map(|&lit| {
                let i = lit.unsigned_abs() as usize;
                seen.insert((i, lit > 0)).then(|| eps_bind(join_var(i, j, lit > 0)))
            }))
        }),
    ));
    Ok((gamma1, gamma2, Document::new("a")))
}

/// β_i = (x_i{ε}·a) ∨ x_i{a}: variable i captures either the empty span
/// [i,i⟩ (false) or the i-th letter [i,i+1⟩ (true).
fn beta(i: usize) -> RegexFormula {
    RegexFormula::disjunction(
        RegexFormula::concat(
            RegexFormula::bind(format!("x{i}"), RegexFormula::Epsilon),
            RegexFormula::Symbol('a'),
        ),
        RegexFormula::bind(format!("x{i}"), RegexFormula::Symbol('a')),
    )
}

/// 3SAT → difference nonemptiness on aⁿ with functional operands.
///
/// γ1 enumerates all assignments (one letter per CNF variable, captured for
/// true / skipped for false); γ2 enumerates, per clause, the assignments that
/// falsify it. γ1 ∖ γ2 is then exactly the satisfying assignments.
pub fn gen_diff_3sat(phi: &CnfFormula) -> Result<(RegexFormula, RegexFormula, Document)> {
    phi.require_width(3, 3)?;
    let signs = phi.clause_signs()?;
    let n = phi.num_vars;
    let gamma1 = RegexFormula::concat_all((1..=n).map(beta));
    let gamma2 = RegexFormula::disjunction_all(signs.iter().map(|clause| {
        RegexFormula::concat_all((1..=n).map(|i| match clause.get(&i) {
            // A positive literal is falsified by x_i = false (empty capture);
            // a negative one by x_i = true (capture the letter).
            Some(true) => RegexFormula::concat(
                RegexFormula::bind(format!("x{i}"), RegexFormula::Epsilon),
                RegexFormula::Symbol('a'),
            ),
            Some(false) => RegexFormula::bind(format!("x{i}"), RegexFormula::Symbol('a')),
            None => beta(i),
        }))
    }));
    Ok((gamma1, gamma2, Document::new(&"a".repeat(n))))
}

/// One "bab" literal block as a regex formula.
fn bab() -> RegexFormula {
    RegexFormula::concat_all("bab".chars().map(RegexFormula::Symbol))
}

/// Variant of `gen_diff_3sat` for bounded-occurrence CNF (2–3 literals per
/// clause, every variable in at most 3 clauses) on d = (bab)ⁿ: the left side
/// is disjunction-free (b·x_i{a*}·a*·b blocks) and the right side is a
/// disjunction of disjunction-free formulas in which every variable appears
/// in at most 3 disjuncts.
pub fn gen_diff_bounded_occ(phi: &CnfFormula) -> Result<(RegexFormula, RegexFormula, Document)> {
    phi.require_width(2, 3)?;
    let signs = phi.clause_signs()?;
    let n = phi.num_vars;
    let mut occurrences = vec![0usize; n + 1];
    for clause in &signs {
        for &i in clause.keys() {
            occurrences[i] += 1;
        }
    }
    if let Some(i) = (1..=n).find(|&i| occurrences[i] > 3) {
        return Err(Error::invalid(format!(
            "variable x{i} appears in {} clauses; the bounded-occurrence reduction allows 3",
            occurrences[i]
        )));
    }
    let block = |i: usize| {
        RegexFormula::concat_all([
            RegexFormula::Symbol('b'),
            RegexFormula::bind(format!("x{i}"), RegexFormula::star(RegexFormula::Symbol('a'))),
            RegexFormula::star(RegexFormula::Symbol('a')),
            RegexFormula::Symbol('b'),
        ])
    };
    let gamma1 = RegexFormula::concat_all((1..=n).map(block));
    let gamma2 = RegexFormula::disjunction_all(signs.iter().map(|clause| {
        RegexFormula::concat_all((1..=n).map(|i| match clause.get(&i) {
            // Falsifying value inside the block: b·x{ε}·a·b for a positive
            // literal, b·x{a}·b for a negative one.
            Some(true) => RegexFormula::concat_all([
                RegexFormula::Symbol('b'),
                RegexFormula::bind(format!("x{i}"), RegexFormula::Epsilon),
                RegexFormula::Symbol('a'),
                RegexFormula::Symbol('b'),
            ]),
            Some(false) => RegexFormula::concat_all([
                RegexFormula::Symbol('b'),
                RegexFormula::bind(format!("x{i}"), RegexFormula::Symbol('a')),
                RegexFormula::Symbol('b'),
            ]),
            None => bab(),
        }))
    }));
    Ok((gamma1, gamma2, Document::new(&"bab".repeat(n))))
}

/// Fixed-length pairwise-distinct code words over {a,b} for blocks 1..=n:
/// ⌈log₂ n⌉ + 2 symbols, a leading 'b' then the binary index.
pub fn block_codes(n: usize) -> Vec<String> {
    // ⌈log₂ n⌉ binary digits suffice for indices 0..n-1; one extra digit and
    // the leading marker give the stated ⌈log₂ n⌉ + 2 length.
    let bits = if n <= 1 { 0 } else { (n - 1).ilog2() as usize + 1 };
    (0..n)
        .map(|i| {
            let mut s = String::from("b");
            for k in (0..bits + 1).rev() {
                s.push(if (i >> k) & 1 == 1 { 'b' } else { 'a' });
            }
            s
        })
        .collect()
}

fn word(s: &str) -> RegexFormula {
    RegexFormula::concat_all(s.chars().map(RegexFormula::Symbol))
}

/// 3SAT parameterized by assignment weight → difference nonemptiness with
/// exactly p shared variables.
///
/// The document concatenates n distinct fixed-length block codes (block i
/// stands for CNF variable i). α1 captures p whole blocks in increasing
/// position — an assignment with exactly p true variables. α2, per clause,
/// matches precisely the weight-p assignments falsifying it: no capture on a
/// positive-literal block, and a dedicated capture on every negative-literal
/// block. The difference is nonempty iff some weight-p assignment satisfies
/// the formula.
pub fn gen_diff_weighted(
    phi: &CnfFormula,
    p: usize,
) -> Result<(RegexFormula, RegexFormula, Document)> {
    phi.require_width(3, 3)?;
    let signs = phi.clause_signs()?;
    let n = phi.num_vars;
    if p > n {
        return Err(Error::invalid(format!("weight {p} exceeds the {n} CNF variables")));
    }
    let codes = block_codes(n);
    let any_block = RegexFormula::disjunction_all(codes.iter().map(|s| word(s)));
    let stars = || RegexFormula::star(any_block.clone());
    // α1 = S* y1{S} S* y2{S} ... yp{S} S*
    let alpha1 = RegexFormula::concat_all(
        std::iter::once(stars())
            .chain((1..=p).flat_map(|u| {
                [RegexFormula::bind(format!("y{u}"), any_block.clone()), stars()]
            })),
    );
    let mut disjuncts = Vec::new();
    for clause in &signs {
        let positive: BTreeSet<usize> =
            clause.iter().filter(|(_, &s)| s).map(|(&i, _)| i).collect();
        let negative: Vec<usize> = clause.iter().filter(|(_, &s)| !s).map(|(&i, _)| i).collect();
        // Blocks a falsifying assignment may set to true: everything except
        // the positive-literal blocks.
        let allowed = RegexFormula::disjunction_all(
            codes
                .iter()
                .enumerate()
                .filter(|(i0, _)| !positive.contains(&(i0 + 1)))
                .map(|(_, s)| word(s)),
        );
        // Choose which of the p captures are pinned to the negative-literal
        // blocks (in increasing order on both sides); the rest range over the
        // allowed blocks.
        for pins in choose_increasing(p, negative.len()) {
            let mut parts = vec![stars()];
            let mut pin_iter = pins.iter().zip(&negative);
            let mut next_pin = pin_iter.next();
            for u in 1..=p {
                let body = match next_pin {
                    Some((&pu, &block)) if pu == u => {
                        next_pin = pin_iter.next();
                        word(&codes[block - 1])
                    }
                    _ => allowed.clone(),
                };
                parts.push(RegexFormula::bind(format!("y{u}"), body));
                parts.push(stars());
            }
            disjuncts.push(RegexFormula::concat_all(parts));
        }
    }
    let alpha2 = RegexFormula::disjunction_all(disjuncts);
    Ok((alpha1, alpha2, Document::new(&codes.concat())))
}

/// All strictly increasing sequences of length `take` from 1..=p.
fn choose_increasing(p: usize, take: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, p: usize, take: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if take == 0 {
            out.push(acc.clone());
            return;
        }
        for u in start..=p.saturating_sub(take - 1) {
            acc.push(u);
            go(u + 1, p, take - 1, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    if take <= p {
        go(1, p, take, &mut Vec::new(), &mut out);
    }
    out
}
