//! Regex formulas: regular expressions extended with capture bindings x{α},
//! their concrete text syntax, class membership (functional / sequential /
//! disjunctive functional / disjunction free / synchronized), and the
//! brute-force reference semantics used as the trusted oracle everywhere else.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{Document, Mapping, MappingSet, Span, Variable};

/// Reserved prefix for internally generated variables (difference dummies).
/// User-facing parses reject it so generated names are always fresh.
pub const RESERVED_VAR_PREFIX: &str = "__dummy_";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegexFormula {
    EmptySet,
    Epsilon,
    Symbol(char),
    Disjunction(Box<RegexFormula>, Box<RegexFormula>),
    Concatenation(Box<RegexFormula>, Box<RegexFormula>),
    Star(Box<RegexFormula>),
    Bind(Variable, Box<RegexFormula>),
}

impl RegexFormula {
    pub fn disjunction(l: RegexFormula, r: RegexFormula) -> Self {
        RegexFormula::Disjunction(Box::new(l), Box::new(r))
    }

    pub fn concat(l: RegexFormula, r: RegexFormula) -> Self {
        RegexFormula::Concatenation(Box::new(l), Box::new(r))
    }

    pub fn star(inner: RegexFormula) -> Self {
        RegexFormula::Star(Box::new(inner))
    }

    pub fn bind(x: impl Into<String>, inner: RegexFormula) -> Self {
        RegexFormula::Bind(Variable::new(x), Box::new(inner))
    }

    /// Concatenation of a non-empty sequence; `ε` for the empty sequence.
    pub fn concat_all(parts: impl IntoIterator<Item = RegexFormula>) -> Self {
        let mut it = parts.into_iter();
        match it.next() {
            None => RegexFormula::Epsilon,
            Some(first) => it.fold(first, RegexFormula::concat),
        }
    }

    /// Disjunction of a non-empty sequence; `∅` for the empty sequence.
    pub fn disjunction_all(parts: impl IntoIterator<Item = RegexFormula>) -> Self {
        let mut it = parts.into_iter();
        match it.next() {
            None => RegexFormula::EmptySet,
            Some(first) => it.fold(first, RegexFormula::disjunction),
        }
    }

    /// All variables bound anywhere in the formula.
    pub fn vars(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Variable>) {
        match self {
            RegexFormula::EmptySet | RegexFormula::Epsilon | RegexFormula::Symbol(_) => {}
            RegexFormula::Disjunction(l, r) | RegexFormula::Concatenation(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            RegexFormula::Star(inner) => inner.collect_vars(out),
            RegexFormula::Bind(x, inner) => {
                out.insert(x.clone());
                inner.collect_vars(out);
            }
        }
    }

    /// Alphabet symbols literally occurring in the formula.
    pub fn literal_symbols(&self) -> BTreeSet<char> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<char>) {
        match self {
            RegexFormula::Symbol(c) => {
                out.insert(*c);
            }
            RegexFormula::Disjunction(l, r) | RegexFormula::Concatenation(l, r) => {
                l.collect_symbols(out);
                r.collect_symbols(out);
            }
            RegexFormula::Star(inner) | RegexFormula::Bind(_, inner) => {
                inner.collect_symbols(out)
            }
            _ => {}
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            RegexFormula::EmptySet | RegexFormula::Epsilon | RegexFormula::Symbol(_) => 1,
            RegexFormula::Disjunction(l, r) | RegexFormula::Concatenation(l, r) => {
                1 + l.node_count() + r.node_count()
            }
            RegexFormula::Star(inner) | RegexFormula::Bind(_, inner) => 1 + inner.node_count(),
        }
    }
}

// ---------------------------------------------------------------------------
// Concrete syntax
// ---------------------------------------------------------------------------
//
//   expr := alt
//   alt  := cat ('|' cat)*
//   cat  := rep+
//   rep  := atom '*'*
//   atom := sym | '\e' | '\0' | '.' | ident '{' expr '}' | '(' expr ')'
//   ident := [A-Za-z_][A-Za-z0-9_]*
//
// Whitespace separates tokens and is skipped; use a backslash escape for a
// literal whitespace symbol. An identifier immediately followed by `{` is a
// variable binding; otherwise its characters are ordinary symbols.

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    alphabet: &'a BTreeSet<char>,
    /// Accept literal symbols outside the alphabet (used for alphabet inference).
    permissive: bool,
}

const METACHARS: &[char] = &['|', '*', '(', ')', '{', '}', '\\', '.'];

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { offset: self.pos, msg: msg.into() }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn parse_expr(&mut self) -> Result<RegexFormula> {
        let mut alts = vec![self.parse_cat()?];
        loop {
            self.skip_ws();
            if self.peek() == Some('|') {
                self.bump();
                alts.push(self.parse_cat()?);
            } else {
                break;
            }
        }
        Ok(RegexFormula::disjunction_all(alts))
    }

    fn parse_cat(&mut self) -> Result<RegexFormula> {
        let mut parts = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None | Some('|') | Some(')') | Some('}') => break,
                _ => parts.push(self.parse_rep()?),
            }
        }
        if parts.is_empty() {
            return Err(self.err("expected an atom"));
        }
        Ok(RegexFormula::concat_all(parts))
    }

    fn parse_rep(&mut self) -> Result<RegexFormula> {
        let mut node = self.parse_atom()?;
        loop {
            self.skip_ws();
            if self.peek() == Some('*') {
                self.bump();
                node = RegexFormula::star(node);
            } else {
                break;
            }
        }
        Ok(node)
    }

    fn symbol(&mut self, c: char) -> Result<RegexFormula> {
        if !self.permissive && !self.alphabet.contains(&c) {
            return Err(self.err(format!("symbol '{c}' not in the declared alphabet")));
        }
        Ok(RegexFormula::Symbol(c))
    }

    fn parse_atom(&mut self) -> Result<RegexFormula> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.err("unexpected end of pattern")),
            Some('\\') => {
                self.bump();
                match self.bump() {
                    None => Err(self.err("dangling backslash")),
                    Some('e') => Ok(RegexFormula::Epsilon),
                    Some('0') => Ok(RegexFormula::EmptySet),
                    Some(c) => self.symbol(c),
                }
            }
            Some('.') => {
                self.bump();
                // `.` means "any declared alphabet symbol".
                Ok(RegexFormula::disjunction_all(
                    self.alphabet.iter().map(|&c| RegexFormula::Symbol(c)),
                ))
            }
            Some('(') => {
                self.bump();
                let inner = self.parse_expr()?;
                self.skip_ws();
                if self.bump() != Some(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                // Maximal identifier run; a binding only if '{' follows.
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                if self.peek() == Some('{') {
                    let name: String = self.chars[start..self.pos].iter().collect();
                    if name.starts_with(RESERVED_VAR_PREFIX) {
                        self.pos = start;
                        return Err(self.err(format!(
                            "variable name '{name}' collides with the reserved prefix {RESERVED_VAR_PREFIX}"
                        )));
                    }
                    self.bump(); // '{'
                    let inner = self.parse_expr()?;
                    self.skip_ws();
                    if self.bump() != Some('}') {
                        return Err(self.err("expected '}'"));
                    }
                    Ok(RegexFormula::Bind(Variable::new(name), Box::new(inner)))
                } else {
                    // Not a binding: consume only the first character as a symbol.
                    self.pos = start + 1;
                    self.symbol(c)
                }
            }
            Some(c) if METACHARS.contains(&c) => {
                Err(self.err(format!("unexpected '{c}'")))
            }
            Some(c) => {
                self.bump();
                self.symbol(c)
            }
        }
    }
}

/// Parse the concrete syntax over an explicit alphabet.
pub fn parse_regex(text: &str, alphabet: &BTreeSet<char>) -> Result<RegexFormula> {
    parse_regex_inner(text, alphabet, false)
}

fn parse_regex_inner(
    text: &str,
    alphabet: &BTreeSet<char>,
    permissive: bool,
) -> Result<RegexFormula> {
    let mut p = Parser { chars: text.chars().collect(), pos: 0, alphabet, permissive };
    let ast = p.parse_expr()?;
    p.skip_ws();
    if p.pos != p.chars.len() {
        return Err(p.err("trailing input"));
    }
    Ok(ast)
}

/// Default alphabet for a pattern: its literal symbols plus `base`
/// (typically the document's symbols). Syntax errors still surface.
pub fn infer_alphabet(text: &str, base: &BTreeSet<char>) -> Result<BTreeSet<char>> {
    let ast = parse_regex_inner(text, &BTreeSet::new(), true)?;
    let mut out = ast.literal_symbols();
    out.extend(base.iter().copied());
    Ok(out)
}

// Printing produces text that reparses to the same AST: metacharacters and
// whitespace are escaped, concatenation operands are space separated so a
// symbol never glues onto a following identifier.
impl fmt::Display for RegexFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn prec(node: &RegexFormula) -> u8 {
            match node {
                RegexFormula::Disjunction(..) => 0,
                RegexFormula::Concatenation(..) => 1,
                _ => 2,
            }
        }
        fn show(node: &RegexFormula, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let wrap = prec(node) < min;
            if wrap {
                f.write_str("(")?;
            }
            match node {
                RegexFormula::EmptySet => f.write_str("\\0")?,
                RegexFormula::Epsilon => f.write_str("\\e")?,
                RegexFormula::Symbol(c) => {
                    if METACHARS.contains(c) || c.is_whitespace() {
                        write!(f, "\\{c}")?;
                    } else {
                        write!(f, "{c}")?;
                    }
                }
                RegexFormula::Disjunction(l, r) => {
                    show(l, 0, f)?;
                    f.write_str("|")?;
                    show(r, 1, f)?;
                }
                RegexFormula::Concatenation(l, r) => {
                    show(l, 1, f)?;
                    f.write_str(" ")?;
                    show(r, 2, f)?;
                }
                RegexFormula::Star(inner) => {
                    show(inner, 2, f)?;
                    f.write_str("*")?;
                }
                RegexFormula::Bind(x, inner) => {
                    write!(f, "{x}{{")?;
                    show(inner, 0, f)?;
                    f.write_str("}")?;
                }
            }
            if wrap {
                f.write_str(")")?;
            }
            Ok(())
        }
        show(self, 0, f)
    }
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassReport {
    pub functional: bool,
    pub sequential: bool,
    pub disjunctive_functional: bool,
    pub disjunction_free: bool,
}

/// The unique V such that α is functional for V, if any. By induction the
/// result always equals Vars(α) when it exists.
fn functional_vars(alpha: &RegexFormula) -> Option<BTreeSet<Variable>> {
    match alpha {
        RegexFormula::EmptySet => None,
        RegexFormula::Epsilon | RegexFormula::Symbol(_) => Some(BTreeSet::new()),
        RegexFormula::Disjunction(l, r) => {
            let (a, b) = (functional_vars(l)?, functional_vars(r)?);
            (a == b).then_some(a)
        }
        RegexFormula::Concatenation(l, r) => {
            let (a, b) = (functional_vars(l)?, functional_vars(r)?);
            a.is_disjoint(&b).then(|| a.union(&b).cloned().collect())
        }
        RegexFormula::Star(inner) => {
            functional_vars(inner).filter(|v| v.is_empty())
        }
        RegexFormula::Bind(x, inner) => {
            let mut v = functional_vars(inner)?;
            v.insert(x.clone()).then_some(v)
        }
    }
}

pub fn is_functional(alpha: &RegexFormula) -> bool {
    functional_vars(alpha).is_some()
}

/// Sequential: every concatenation has disjoint variable sets, every starred
/// subformula is variable free, and x does not occur below x{·}.
pub fn is_sequential(alpha: &RegexFormula) -> bool {
    match alpha {
        RegexFormula::EmptySet | RegexFormula::Epsilon | RegexFormula::Symbol(_) => true,
        RegexFormula::Disjunction(l, r) => is_sequential(l) && is_sequential(r),
        RegexFormula::Concatenation(l, r) => {
            is_sequential(l) && is_sequential(r) && l.vars().is_disjoint(&r.vars())
        }
        RegexFormula::Star(inner) => is_sequential(inner) && inner.vars().is_empty(),
        RegexFormula::Bind(x, inner) => is_sequential(inner) && !inner.vars().contains(x),
    }
}

/// Top-level disjuncts of a formula (flattening nested Disjunction).
pub fn top_disjuncts(alpha: &RegexFormula) -> Vec<&RegexFormula> {
    match alpha {
        RegexFormula::Disjunction(l, r) => {
            let mut out = top_disjuncts(l);
            out.extend(top_disjuncts(r));
            out
        }
        _ => vec![alpha],
    }
}

pub fn is_disjunction_free(alpha: &RegexFormula) -> bool {
    match alpha {
        RegexFormula::EmptySet | RegexFormula::Epsilon | RegexFormula::Symbol(_) => true,
        RegexFormula::Disjunction(..) => false,
        RegexFormula::Concatenation(l, r) => is_disjunction_free(l) && is_disjunction_free(r),
        RegexFormula::Star(inner) | RegexFormula::Bind(_, inner) => is_disjunction_free(inner),
    }
}

pub fn classify(alpha: &RegexFormula) -> ClassReport {
    let functional = is_functional(alpha);
    ClassReport {
        functional,
        sequential: is_sequential(alpha),
        disjunctive_functional: functional
            || top_disjuncts(alpha).iter().all(|g| is_functional(g)),
        disjunction_free: is_disjunction_free(alpha),
    }
}

/// Synchronized for X: no disjunction subexpression mentions a variable of X.
pub fn synchronized_for(alpha: &RegexFormula, xs: &BTreeSet<Variable>) -> Result<bool> {
    if !is_sequential(alpha) {
        return Err(Error::contract("synchronized_for requires a sequential formula"));
    }
    fn check(node: &RegexFormula, xs: &BTreeSet<Variable>) -> bool {
        match node {
            RegexFormula::EmptySet | RegexFormula::Epsilon | RegexFormula::Symbol(_) => true,
            RegexFormula::Disjunction(l, r) => {
                node.vars().is_disjoint(xs) && check(l, xs) && check(r, xs)
            }
            RegexFormula::Concatenation(l, r) => check(l, xs) && check(r, xs),
            RegexFormula::Star(inner) | RegexFormula::Bind(_, inner) => check(inner, xs),
        }
    }
    Ok(check(alpha, xs))
}

// ---------------------------------------------------------------------------
// Reference semantics
// ---------------------------------------------------------------------------

/// Per-subformula relation: for each span, the set of mappings the formula
/// produces on that span.
type Rel = BTreeMap<(usize, usize), MappingSet>;

fn epsilon_rel(n: usize) -> Rel {
    (1..=n + 1).map(|i| ((i, i), MappingSet::from([Mapping::empty()]))).collect()
}

/// Concatenation per the grammar rule: split points with disjoint domains.
fn concat_rel(r1: &Rel, r2: &Rel) -> Rel {
    let mut out = Rel::new();
    for (&(i, k), ms1) in r1 {
        for (&(k2, j), ms2) in r2 {
            if k2 != k {
                continue;
            }
            for m1 in ms1 {
                for m2 in ms2 {
                    if m1.domain().is_disjoint(&m2.domain()) {
                        let mut u = m1.clone();
                        for (x, s) in m2.iter() {
                            u.bind(x.clone(), *s);
                        }
                        out.entry((i, j)).or_default().insert(u);
                    }
                }
            }
        }
    }
    out
}

fn union_rel(mut a: Rel, b: Rel) -> Rel {
    for (k, ms) in b {
        a.entry(k).or_default().extend(ms);
    }
    a
}

fn eval_rel(alpha: &RegexFormula, d: &Document) -> Rel {
    let n = d.len();
    match alpha {
        RegexFormula::EmptySet => Rel::new(),
        RegexFormula::Epsilon => epsilon_rel(n),
        RegexFormula::Symbol(c) => (1..=n)
            .filter(|&i| d.symbol(i) == *c)
            .map(|i| ((i, i + 1), MappingSet::from([Mapping::empty()])))
            .collect(),
        RegexFormula::Disjunction(l, r) => union_rel(eval_rel(l, d), eval_rel(r, d)),
        RegexFormula::Concatenation(l, r) => concat_rel(&eval_rel(l, d), &eval_rel(r, d)),
        RegexFormula::Star(inner) => {
            // Least fixed point of R = ε ∪ R·inner; contributions per span
            // stabilize because the mapping sets are finite.
            let base = eval_rel(inner, d);
            let mut r = epsilon_rel(n);
            loop {
                let next = union_rel(epsilon_rel(n), concat_rel(&r, &base));
                if next == r {
                    break r;
                }
                r = next;
            }
        }
        RegexFormula::Bind(x, inner) => {
            let mut out = Rel::new();
            for (&(i, j), ms) in &eval_rel(inner, d) {
                for m in ms {
                    if !m.contains(x) {
                        let mut b = m.clone();
                        b.bind(x.clone(), Span::new(i, j));
                        out.entry((i, j)).or_default().insert(b);
                    }
                }
            }
            out
        }
    }
}

/// The trusted reference semantics: { μ | ([1,n+1⟩, μ) ∈ ⟨α⟩(d) }.
/// Exponential-time by design; use only on desk-scale inputs.
pub fn oracle_eval(alpha: &RegexFormula, d: &Document) -> MappingSet {
    eval_rel(alpha, d).remove(&(1, d.len() + 1)).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> BTreeSet<char> {
        ['a', 'b'].into()
    }

    fn v(n: &str) -> Variable {
        Variable::new(n)
    }

    fn sp(i: usize, j: usize) -> Span {
        Span::new(i, j)
    }

    #[test]
    fn parse_direct() {
        let a = parse_regex("a x{a} ", &ab()).unwrap();
        assert_eq!(
            a,
            RegexFormula::concat(
                RegexFormula::Symbol('a'),
                RegexFormula::bind("x", RegexFormula::Symbol('a'))
            )
        );
        let b = parse_regex("(x{\\e}|y{\\e})", &ab()).unwrap();
        assert_eq!(
            b,
            RegexFormula::disjunction(
                RegexFormula::bind("x", RegexFormula::Epsilon),
                RegexFormula::bind("y", RegexFormula::Epsilon)
            )
        );
    }

    #[test]
    fn parse_errors() {
        match parse_regex("x{a", &ab()) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_regex("c", &ab()).is_err()); // not in alphabet
        assert!(parse_regex("", &ab()).is_err());
        assert!(parse_regex("__dummy_x{a}", &ab()).is_err()); // reserved namespace
    }

    #[test]
    fn maximal_munch_identifier_binding() {
        // "ax{a}" binds variable "ax"; "a x{a}" is symbol then binding.
        let f = parse_regex("ax{a}", &ab()).unwrap();
        assert_eq!(f, RegexFormula::bind("ax", RegexFormula::Symbol('a')));
        // "aa" is two symbols, not an identifier.
        let g = parse_regex("aa", &ab()).unwrap();
        assert_eq!(
            g,
            RegexFormula::concat(RegexFormula::Symbol('a'), RegexFormula::Symbol('a'))
        );
    }

    #[test]
    fn dot_expands_to_alphabet() {
        let f = parse_regex(".", &ab()).unwrap();
        assert_eq!(
            f,
            RegexFormula::disjunction(RegexFormula::Symbol('a'), RegexFormula::Symbol('b'))
        );
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "a x{a}",
            "(x{\\e}|y{\\e})",
            "(a|b)* x{a* b}|y{\\e} b",
            "x{(a|b)*} \\0* \\e",
            "ax{a b*}*",
        ] {
            let ast = parse_regex(text, &ab()).unwrap();
            let printed = ast.to_string();
            let reparsed = parse_regex(&printed, &ab()).unwrap();
            assert_eq!(ast, reparsed, "round trip failed for {text} -> {printed}");
        }
    }

    #[test]
    fn classify_examples() {
        // Miniature of the student-info formula: optional first name and
        // optional phone make it sequential but not functional.
        let info = parse_regex(
            ".* (f{a*} b l{a*}|l{a*}) b ((p{a*} b|\\e) m{a*}) b .*",
            &ab(),
        )
        .unwrap();
        let r = classify(&info);
        assert!(r.sequential && !r.functional);

        let r2 = classify(&parse_regex("z{.*}(x{.*}|y{.*})", &ab()).unwrap());
        assert!(r2.sequential && !r2.disjunctive_functional);

        let r3 = classify(&parse_regex("x{a}x{a}", &ab()).unwrap());
        assert!(!r3.sequential);
    }

    #[test]
    fn classify_invariants() {
        for text in ["x{a}", "x{a}|y{b}", "a*", "x{a*}(y{b}|y{a})", "\\0", "(x{a}|\\e)b"] {
            let r = classify(&parse_regex(text, &ab()).unwrap());
            if r.functional {
                assert!(r.sequential && r.disjunctive_functional);
            }
            if r.disjunctive_functional {
                assert!(r.sequential);
            }
        }
        let dfunc = classify(&parse_regex("x{a}|y{b}", &ab()).unwrap());
        assert!(dfunc.disjunctive_functional && !dfunc.functional);
    }

    #[test]
    fn synchronized_examples() {
        let f = parse_regex("(x{.*}|\\e)y{.*}", &ab()).unwrap();
        assert!(synchronized_for(&f, &[v("y")].into()).unwrap());
        assert!(!synchronized_for(&f, &[v("x")].into()).unwrap());
        let g = parse_regex("(a|b)*", &ab()).unwrap();
        assert!(synchronized_for(&g, &[v("x")].into()).unwrap());
        let h = parse_regex("x{a|b}", &ab()).unwrap();
        assert!(synchronized_for(&h, &[v("x")].into()).unwrap());
        assert!(synchronized_for(&parse_regex("x{a}x{a}", &ab()).unwrap(), &BTreeSet::new())
            .is_err());
    }

    #[test]
    fn oracle_eval_examples() {
        let d = Document::new("aa");
        let f = parse_regex("a x{a}", &ab()).unwrap();
        assert_eq!(
            oracle_eval(&f, &d),
            MappingSet::from([Mapping::from_pairs([(v("x"), sp(2, 3))])])
        );

        assert!(oracle_eval(&RegexFormula::EmptySet, &d).is_empty());

        // Example formula equivalent to the three-state automaton with an
        // optional capture: on "a" it yields the empty mapping plus all three
        // span choices for x.
        let alpha = parse_regex("(.* x{.*} .*)|(. .*)", &ab()).unwrap();
        let got = oracle_eval(&alpha, &Document::new("a"));
        let want = MappingSet::from([
            Mapping::empty(),
            Mapping::from_pairs([(v("x"), sp(1, 1))]),
            Mapping::from_pairs([(v("x"), sp(1, 2))]),
            Mapping::from_pairs([(v("x"), sp(2, 2))]),
        ]);
        assert_eq!(got, want);
    }

    #[test]
    fn oracle_eval_edge_cases() {
        // Empty document: ε accepts, symbols do not, stars accept.
        let empty = Document::new("");
        assert_eq!(oracle_eval(&RegexFormula::Epsilon, &empty).len(), 1);
        assert!(oracle_eval(&RegexFormula::Symbol('a'), &empty).is_empty());
        let star = parse_regex("(a|b)*", &ab()).unwrap();
        assert_eq!(oracle_eval(&star, &empty).len(), 1);

        // Star over a binding: repetition is cut off by the disjoint-domain
        // rule, so x{a}* can use at most one iteration that binds.
        let f = parse_regex("(x{a})* (a|b)*", &ab()).unwrap();
        let got = oracle_eval(&f, &Document::new("aa"));
        assert_eq!(
            got,
            MappingSet::from([
                Mapping::empty(),
                Mapping::from_pairs([(v("x"), sp(1, 2))]),
            ])
        );
    }

    #[test]
    fn functional_domains_cover_vars() {
        let f = parse_regex("x{a} y{b*}", &ab()).unwrap();
        assert!(classify(&f).functional);
        for d in ["ab", "a", "abb"] {
            for m in oracle_eval(&f, &Document::new(d)) {
                assert_eq!(m.domain(), f.vars());
            }
        }
    }

    #[test]
    fn oracle_distributes_over_disjunction() {
        let g1 = parse_regex("x{a} .*", &ab()).unwrap();
        let g2 = parse_regex(".* y{b}", &ab()).unwrap();
        let both = RegexFormula::disjunction(g1.clone(), g2.clone());
        let d = Document::new("ab");
        let mut want = oracle_eval(&g1, &d);
        want.extend(oracle_eval(&g2, &d));
        assert_eq!(oracle_eval(&both, &d), want);
    }
}
