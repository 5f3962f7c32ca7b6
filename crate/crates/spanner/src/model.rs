//! Documents, spans, variables and mappings: the value types every other
//! module computes with. Spans are 1-based and end-exclusive ([i,j⟩), indexing
//! Unicode scalar values, never bytes. A mapping is a *partial* assignment of
//! variables to spans; an unbound variable is simply absent.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// A document: a finite sequence of alphabet symbols (chars).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    symbols: Vec<char>,
}

impl Document {
    pub fn new(text: &str) -> Self {
        Document { symbols: text.chars().collect() }
    }

    /// Number of symbols (not bytes).
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Symbol at 1-based position `i` (1 ≤ i ≤ n).
    pub fn symbol(&self, i: usize) -> char {
        self.symbols[i - 1]
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    /// The set of symbols occurring in the document.
    pub fn alphabet(&self) -> BTreeSet<char> {
        self.symbols.iter().copied().collect()
    }
}

impl fmt::Display for Document {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.symbols {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A span [i,j⟩ with 1 ≤ i ≤ j. [i,i⟩ and [j,j⟩ with i ≠ j are distinct
/// values even though both denote the empty string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        assert!(1 <= start && start <= end, "invalid span [{start},{end})");
        Span { start, end }
    }

    /// Valid against a document of length n iff end ≤ n+1.
    pub fn valid_for(&self, d: &Document) -> bool {
        self.end <= d.len() + 1
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// A capture variable, identified by name. A separate type from alphabet
/// symbols by construction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(pub String);

impl Variable {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(!name.is_empty(), "variable names must be nonempty");
        Variable(name)
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A mapping: finite partial function from variables to spans.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mapping {
    bindings: BTreeMap<Variable, Span>,
}

impl Mapping {
    pub fn empty() -> Self {
        Mapping::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Variable, Span)>) -> Self {
        Mapping { bindings: pairs.into_iter().collect() }
    }

    pub fn bind(&mut self, x: Variable, s: Span) {
        self.bindings.insert(x, s);
    }

    pub fn get(&self, x: &Variable) -> Option<Span> {
        self.bindings.get(x).copied()
    }

    pub fn domain(&self) -> BTreeSet<Variable> {
        self.bindings.keys().cloned().collect()
    }

    pub fn contains(&self, x: &Variable) -> bool {
        self.bindings.contains_key(x)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Span)> {
        self.bindings.iter()
    }

    /// JSON-line form `{"x":[1,2],"y":[2,2]}`, variables sorted.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.bindings
                .iter()
                .map(|(x, s)| (x.to_string(), serde_json::json!([s.start, s.end])))
                .collect(),
        )
    }

    /// Canonical text form `{x=[1,2), y=[2,2)}`, variables sorted.
    pub fn canonical_text(&self) -> String {
        let inner: Vec<String> =
            self.bindings.iter().map(|(x, s)| format!("{x}={s}")).collect();
        format!("{{{}}}", inner.join(", "))
    }
}

/// Substring d[i..j) named by a span; empty when i = j.
pub fn span_substring(d: &Document, s: Span) -> Result<String> {
    if !s.valid_for(d) {
        return Err(Error::SpanOutOfRange { span: s, len: d.len() });
    }
    Ok(d.symbols()[s.start - 1..s.end - 1].iter().collect())
}

/// Two mappings are compatible iff they agree on every common variable.
pub fn mappings_compatible(m1: &Mapping, m2: &Mapping) -> bool {
    let (small, large) = if m1.len() <= m2.len() { (m1, m2) } else { (m2, m1) };
    small.iter().all(|(x, s)| large.get(x).map_or(true, |t| t == *s))
}

/// Union of two compatible mappings.
pub fn mapping_union(m1: &Mapping, m2: &Mapping) -> Result<Mapping> {
    if !mappings_compatible(m1, m2) {
        return Err(Error::contract(format!(
            "mapping_union on incompatible mappings {} and {}",
            m1.canonical_text(),
            m2.canonical_text()
        )));
    }
    let mut out = m1.clone();
    for (x, s) in m2.iter() {
        out.bind(x.clone(), *s);
    }
    Ok(out)
}

/// Restriction of a mapping to a variable set.
pub fn restrict(m: &Mapping, ys: &BTreeSet<Variable>) -> Mapping {
    Mapping {
        bindings: m
            .bindings
            .iter()
            .filter(|(x, _)| ys.contains(x))
            .map(|(x, s)| (x.clone(), *s))
            .collect(),
    }
}

/// A duplicate-free set of mappings (materialized spanner output).
pub type MappingSet = BTreeSet<Mapping>;

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Variable {
        Variable::new(n)
    }

    fn sp(i: usize, j: usize) -> Span {
        Span::new(i, j)
    }

    #[test]
    fn span_substring_examples() {
        let d = Document::new("Rodion Raskolnikov");
        assert_eq!(span_substring(&d, sp(1, 7)).unwrap(), "Rodion");
        let d = Document::new("abc");
        assert_eq!(span_substring(&d, sp(2, 2)).unwrap(), "");
        assert_eq!(span_substring(&d, sp(1, 4)).unwrap(), "abc");
        assert!(span_substring(&d, sp(1, 5)).is_err());
    }

    #[test]
    fn document_counts_symbols_not_bytes() {
        let d = Document::new("a↩b");
        assert_eq!(d.len(), 3);
        assert_eq!(span_substring(&d, sp(2, 3)).unwrap(), "↩");
    }

    #[test]
    fn compatibility_examples() {
        let m1 = Mapping::from_pairs([(v("x"), sp(1, 2))]);
        assert!(mappings_compatible(&m1, &Mapping::empty()));
        let m2 = Mapping::from_pairs([(v("x"), sp(1, 2)), (v("y"), sp(2, 2))]);
        assert!(mappings_compatible(&m1, &m2));
        // Distinct empty spans are different values.
        let a = Mapping::from_pairs([(v("x"), sp(1, 1))]);
        let b = Mapping::from_pairs([(v("x"), sp(2, 2))]);
        assert!(!mappings_compatible(&a, &b));
    }

    #[test]
    fn union_examples() {
        let x = Mapping::from_pairs([(v("x"), sp(1, 2))]);
        let y = Mapping::from_pairs([(v("y"), sp(2, 3))]);
        let u = mapping_union(&x, &y).unwrap();
        assert_eq!(u, Mapping::from_pairs([(v("x"), sp(1, 2)), (v("y"), sp(2, 3))]));
        assert_eq!(mapping_union(&x, &Mapping::empty()).unwrap(), x);
        let xy = Mapping::from_pairs([(v("x"), sp(1, 2)), (v("y"), sp(1, 1))]);
        assert_eq!(mapping_union(&x, &xy).unwrap(), xy);
        let conflicting = Mapping::from_pairs([(v("x"), sp(2, 2))]);
        assert!(mapping_union(&x, &conflicting).is_err());
    }

    #[test]
    fn restrict_examples() {
        let m = Mapping::from_pairs([(v("x"), sp(1, 2)), (v("y"), sp(2, 3))]);
        let only_x: BTreeSet<_> = [v("x")].into();
        assert_eq!(restrict(&m, &only_x), Mapping::from_pairs([(v("x"), sp(1, 2))]));
        assert_eq!(restrict(&m, &BTreeSet::new()), Mapping::empty());
        let z: BTreeSet<_> = [v("z")].into();
        assert_eq!(restrict(&Mapping::from_pairs([(v("x"), sp(1, 2))]), &z), Mapping::empty());
    }

    #[test]
    fn canonical_text_sorts_variables() {
        let m = Mapping::from_pairs([(v("y"), sp(2, 2)), (v("x"), sp(1, 2))]);
        assert_eq!(m.canonical_text(), "{x=[1,2), y=[2,2)}");
        assert_eq!(Mapping::empty().canonical_text(), "{}");
    }

    #[test]
    fn equal_domains_compatible_iff_equal() {
        let a = Mapping::from_pairs([(v("x"), sp(1, 2)), (v("y"), sp(3, 3))]);
        let b = Mapping::from_pairs([(v("x"), sp(1, 2)), (v("y"), sp(3, 4))]);
        assert!(!mappings_compatible(&a, &b));
        assert!(mappings_compatible(&a, &a.clone()));
    }
}
