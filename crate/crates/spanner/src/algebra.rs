//! Spanner algebra on automata: union, natural join under the schemaless
//! semantics (compatible mappings merged, mixed domains allowed), and
//! decomposition of sequential regexes / automata into unions of functional
//! components.
//!
//! The join is a product construction on automata that are semi-functional
//! for the shared variables: a shared operation either fires synchronously in
//! both factors, or solo in one factor while the other factor's state is
//! labeled unseen for that variable (so its run is guaranteed never to bind
//! it). With semi-functional factors those two modes cover exactly the
//! compatible pairs.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::model::{mapping_union, mappings_compatible, MappingSet, Variable};
use crate::regex::{is_functional, is_sequential, RegexFormula};
use crate::va::{
    check_functional, check_sequential, extended_configs, to_semi_functional, ConfigLabel,
    ConfigTable, Label, Va,
};

/// Union: fresh initial state with ε-transitions to each operand's initial.
pub fn union_va(parts: &[Va]) -> Va {
    let mut transitions = Vec::new();
    let mut accepting = Vec::new();
    let mut tags = vec!["u0".to_string()];
    let mut next = 1;
    for (i, a) in parts.iter().enumerate() {
        let base = next;
        next += a.num_states();
        for q in 0..a.num_states() {
            tags.push(format!("{}#{}", a.tag(q), i));
        }
        transitions.push((0, Label::Epsilon, base + a.initial()));
        for (p, lab, q) in a.transitions() {
            transitions.push((base + p, lab.clone(), base + q));
        }
        accepting.extend(a.accepting().iter().map(|&q| base + q));
    }
    Va::new(next, 0, accepting, transitions).with_tags(tags)
}

/// Join of two automata that are already semi-functional for their shared
/// variables. Errors otherwise.
pub fn join_semi_functional(a1: &Va, a2: &Va) -> Result<Va> {
    if !check_sequential(a1) || !check_sequential(a2) {
        return Err(Error::contract("join requires sequential automata"));
    }
    let a1 = a1.trim();
    let a2 = a2.trim();
    let shared: BTreeSet<Variable> = a1.vars().intersection(&a2.vars()).cloned().collect();
    let cfg1 = extended_configs(&a1, &shared)?;
    let cfg2 = extended_configs(&a2, &shared)?;
    if cfg1.has_done() || cfg2.has_done() {
        return Err(Error::contract(
            "join_semi_functional requires both inputs semi-functional for the shared variables",
        ));
    }
    Ok(product(&a1, &a2, &shared, &cfg1, &cfg2))
}

/// Join of arbitrary sequential automata: semi-functionalize both over the
/// shared variables (at most 2^k blowup each for k shared variables), then
/// take the product.
pub fn join_fpt(a1: &Va, a2: &Va) -> Result<Va> {
    let shared: BTreeSet<Variable> = a1.vars().intersection(&a2.vars()).cloned().collect();
    let b1 = to_semi_functional(a1, &shared)?;
    let b2 = to_semi_functional(a2, &shared)?;
    join_semi_functional(&b1, &b2)
}

fn product(a1: &Va, a2: &Va, shared: &BTreeSet<Variable>, cfg1: &ConfigTable, cfg2: &ConfigTable) -> Va {
    let adj1 = a1.out_adj();
    let adj2 = a2.out_adj();
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut states: Vec<(usize, usize)> = Vec::new();
    let mut transitions: Vec<(usize, Label, usize)> = Vec::new();
    let start = (a1.initial(), a2.initial());
    index.insert(start, 0);
    states.push(start);
    let mut work = vec![0usize];
    while let Some(i) = work.pop() {
        let (q1, q2) = states[i];
        let step = |index: &mut HashMap<(usize, usize), usize>,
                        states: &mut Vec<(usize, usize)>,
                        work: &mut Vec<usize>,
                        transitions: &mut Vec<(usize, Label, usize)>,
                        lab: Label,
                        to: (usize, usize)| {
            let j = *index.entry(to).or_insert_with(|| {
                states.push(to);
                work.push(states.len() - 1);
                states.len() - 1
            });
            transitions.push((i, lab, j));
        };
        for &t1 in &adj1[q1] {
            let (_, lab, to1) = &a1.transitions()[t1];
            match lab {
                Label::Epsilon => {
                    step(&mut index, &mut states, &mut work, &mut transitions, Label::Epsilon, (*to1, q2))
                }
                Label::Symbol(c) => {
                    // Symbols synchronize.
                    for &t2 in &adj2[q2] {
                        if let (_, Label::Symbol(c2), to2) = &a2.transitions()[t2] {
                            if c2 == c {
                                step(
                                    &mut index,
                                    &mut states,
                                    &mut work,
                                    &mut transitions,
                                    Label::Symbol(*c),
                                    (*to1, *to2),
                                );
                            }
                        }
                    }
                }
                Label::Open(x) | Label::Close(x) if !shared.contains(x) => {
                    step(&mut index, &mut states, &mut work, &mut transitions, lab.clone(), (*to1, q2))
                }
                Label::Open(x) | Label::Close(x) => {
                    // Synchronous move on a shared variable.
                    for &t2 in &adj2[q2] {
                        let (_, lab2, to2) = &a2.transitions()[t2];
                        if lab2 == lab {
                            step(
                                &mut index,
                                &mut states,
                                &mut work,
                                &mut transitions,
                                lab.clone(),
                                (*to1, *to2),
                            );
                        }
                    }
                    // Solo move, legal only while the other run cannot bind x.
                    if cfg2.label(q2, x) == ConfigLabel::Unseen {
                        step(&mut index, &mut states, &mut work, &mut transitions, lab.clone(), (*to1, q2));
                    }
                }
            }
        }
        for &t2 in &adj2[q2] {
            let (_, lab, to2) = &a2.transitions()[t2];
            match lab {
                Label::Epsilon => {
                    step(&mut index, &mut states, &mut work, &mut transitions, Label::Epsilon, (q1, *to2))
                }
                Label::Symbol(_) => {} // handled from the a1 side
                Label::Open(x) | Label::Close(x) if !shared.contains(x) => {
                    step(&mut index, &mut states, &mut work, &mut transitions, lab.clone(), (q1, *to2))
                }
                Label::Open(x) | Label::Close(x) => {
                    if cfg1.label(q1, x) == ConfigLabel::Unseen {
                        step(&mut index, &mut states, &mut work, &mut transitions, lab.clone(), (q1, *to2));
                    }
                }
            }
        }
    }
    let accepting: Vec<usize> = states
        .iter()
        .enumerate()
        .filter(|&(_, &(q1, q2))| a1.accepting().contains(&q1) && a2.accepting().contains(&q2))
        .map(|(i, _)| i)
        .collect();
    let tags = states
        .iter()
        .map(|&(q1, q2)| format!("({},{})", a1.tag(q1), a2.tag(q2)))
        .collect();
    Va::new(states.len(), 0, accepting, transitions)
        .with_tags(tags)
        .trim()
}

/// Reference join on materialized mapping sets: unions of compatible pairs.
pub fn join_sets(s1: &MappingSet, s2: &MappingSet) -> MappingSet {
    let mut out = MappingSet::new();
    for m1 in s1 {
        for m2 in s2 {
            if mappings_compatible(m1, m2) {
                out.insert(mapping_union(m1, m2).expect("checked compatible"));
            }
        }
    }
    out
}

/// Decompose a sequential regex formula into functional formulas whose union
/// is equivalent. The empty-set formula decomposes to no components.
pub fn regex_to_disjunctive_functional(alpha: &RegexFormula) -> Result<Vec<RegexFormula>> {
    if !is_sequential(alpha) {
        return Err(Error::contract(
            "regex_to_disjunctive_functional requires a sequential formula",
        ));
    }
    fn go(alpha: &RegexFormula) -> Vec<RegexFormula> {
        if is_functional(alpha) {
            return vec![alpha.clone()];
        }
        match alpha {
            RegexFormula::EmptySet => vec![],
            RegexFormula::Disjunction(l, r) => {
                let mut out = go(l);
                for c in go(r) {
                    if !out.contains(&c) {
                        out.push(c);
                    }
                }
                out
            }
            RegexFormula::Concatenation(l, r) => {
                let ls = go(l);
                let rs = go(r);
                let mut out = Vec::new();
                for a in &ls {
                    for b in &rs {
                        let c = RegexFormula::concat(a.clone(), b.clone());
                        if !out.contains(&c) {
                            out.push(c);
                        }
                    }
                }
                out
            }
            RegexFormula::Bind(x, inner) => go(inner)
                .into_iter()
                .map(|c| RegexFormula::bind(x.name(), c))
                .collect(),
            // ε, symbols and (variable-free, hence functional) stars were
            // handled by the functional short-circuit above.
            _ => unreachable!("non-functional leaf in a sequential formula"),
        }
    }
    Ok(go(alpha))
}

/// Decompose a sequential automaton into functional automata whose union is
/// equivalent: semi-functionalize over all variables, then split accepting
/// states by the set of variables their runs bound. At most 2^|Vars|
/// components; empty components are dropped.
pub fn va_to_disjunctive_functional(a: &Va) -> Result<Vec<Va>> {
    let vars = a.vars();
    let sf = to_semi_functional(a, &vars)?;
    if sf.language_empty() {
        return Ok(vec![]);
    }
    let cfg = extended_configs(&sf, &vars)?;
    let mut groups: HashMap<BTreeSet<Variable>, Vec<usize>> = HashMap::new();
    for &f in sf.accepting() {
        let sig: BTreeSet<Variable> =
            vars.iter().filter(|x| cfg.label(f, x) == ConfigLabel::Closed).cloned().collect();
        groups.entry(sig).or_default().push(f);
    }
    let mut sigs: Vec<BTreeSet<Variable>> = groups.keys().cloned().collect();
    sigs.sort();
    let mut out = Vec::new();
    for sig in sigs {
        let accepting = groups[&sig].clone();
        let restricted = Va::new(
            sf.num_states(),
            sf.initial(),
            accepting,
            sf.transitions().to_vec(),
        )
        .with_tags((0..sf.num_states()).map(|q| sf.tag(q).to_string()).collect())
        .trim();
        // Operations on variables outside the signature cannot occur on any
        // run that reaches this accepting group; projecting them away only
        // removes dead transitions.
        let component = crate::va::project(&restricted, &sig).trim();
        if !component.language_empty() {
            out.push(component);
        }
    }
    Ok(out)
}

/// Join of two unions of functional automata: pairwise FPT joins, dropping
/// empty-language results. Every output component is functional.
pub fn join_disjunctive(c1: &[Va], c2: &[Va]) -> Result<Vec<Va>> {
    let mut out = Vec::new();
    for a in c1 {
        for b in c2 {
            if !check_functional(a) || !check_functional(b) {
                return Err(Error::contract("join_disjunctive requires functional components"));
            }
            let j = join_fpt(a, b)?;
            if !j.language_empty() {
                out.push(j);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Document;
    use crate::regex::{oracle_eval, parse_regex};
    use crate::va::{compile_regex, oracle_eval_va};

    fn ab() -> BTreeSet<char> {
        ['a', 'b'].into()
    }

    fn va(pat: &str) -> Va {
        compile_regex(&parse_regex(pat, &ab()).unwrap())
    }

    fn docs() -> Vec<Document> {
        ["", "a", "b", "ab", "ba", "aa", "aba", "abab"]
            .iter()
            .map(|t| Document::new(t))
            .collect()
    }

    #[test]
    fn union_matches_set_union() {
        let a = va("x{a} .*");
        let b = va(".* y{b}");
        let u = union_va(&[a.clone(), b.clone()]);
        for d in docs() {
            let mut want = oracle_eval_va(&a, &d);
            want.extend(oracle_eval_va(&b, &d));
            assert_eq!(oracle_eval_va(&u, &d), want);
        }
    }

    #[test]
    fn join_equal_domains() {
        let a = va("x{a*} .*");
        let b = va(".* x{a*}");
        let j = join_fpt(&a, &b).unwrap();
        assert!(check_sequential(&j));
        for d in docs() {
            let want = join_sets(&oracle_eval_va(&a, &d), &oracle_eval_va(&b, &d));
            assert_eq!(oracle_eval_va(&j, &d), want, "doc {d}");
        }
    }

    #[test]
    fn join_mixed_domains() {
        // Left side binds x optionally; right side binds x and y always.
        let a = va("(x{a}b)|(ab)");
        let b = va("x{.*} y{.*}");
        let j = join_fpt(&a, &b).unwrap();
        for d in docs() {
            let want = join_sets(&oracle_eval_va(&a, &d), &oracle_eval_va(&b, &d));
            assert_eq!(oracle_eval_va(&j, &d), want, "doc {d}");
        }
        // And with optional variables on both sides.
        let c = va("(y{a}.*)|(.*)");
        let j2 = join_fpt(&a, &c).unwrap();
        for d in docs() {
            let want = join_sets(&oracle_eval_va(&a, &d), &oracle_eval_va(&c, &d));
            assert_eq!(oracle_eval_va(&j2, &d), want, "doc {d}");
        }
    }

    #[test]
    fn join_disjoint_domains_is_cross_product() {
        let a = va("x{a} .*");
        let b = va(".* y{b}");
        let j = join_fpt(&a, &b).unwrap();
        for d in docs() {
            let want = join_sets(&oracle_eval_va(&a, &d), &oracle_eval_va(&b, &d));
            assert_eq!(oracle_eval_va(&j, &d), want);
        }
    }

    #[test]
    fn join_distinct_empty_spans_incompatible() {
        let a = va("x{\\e} a");
        let b = va("a x{\\e}");
        let j = join_fpt(&a, &b).unwrap();
        // x=[1,1) vs x=[2,2): no compatible pair.
        assert!(oracle_eval_va(&j, &Document::new("a")).is_empty());
    }

    #[test]
    fn join_semi_functional_rejects_raw_optional() {
        // Optional capture automaton is not semi-functional for x.
        let a = va("(x{a})|a").trim();
        let b = va("x{a}");
        assert!(join_semi_functional(&a, &b).is_err());
        assert!(join_fpt(&a, &b).is_ok());
    }

    #[test]
    fn regex_decomposition() {
        let f = parse_regex("(x{a}|\\e)(y{b}|\\e)", &ab()).unwrap();
        let comps = regex_to_disjunctive_functional(&f).unwrap();
        assert_eq!(comps.len(), 4);
        for c in &comps {
            assert!(is_functional(c), "{c}");
        }
        for d in docs() {
            let mut got = MappingSet::new();
            for c in &comps {
                got.extend(oracle_eval(c, &d));
            }
            assert_eq!(got, oracle_eval(&f, &d));
        }
        // Functional input is returned whole; the empty set has no parts.
        let g = parse_regex("x{a}|y{b}", &ab()).unwrap();
        assert!(!is_functional(&g));
        assert_eq!(regex_to_disjunctive_functional(&g).unwrap().len(), 2);
        let func = parse_regex("x{a}|x{b}", &ab()).unwrap();
        assert_eq!(regex_to_disjunctive_functional(&func).unwrap().len(), 1);
        assert!(regex_to_disjunctive_functional(&RegexFormula::EmptySet).unwrap().is_empty());
    }

    #[test]
    fn va_decomposition() {
        let a = va("(x{a}|\\e)(y{b}|\\e)");
        let comps = va_to_disjunctive_functional(&a).unwrap();
        assert_eq!(comps.len(), 4);
        for c in &comps {
            assert!(check_functional(c), "component not functional");
        }
        for d in docs() {
            let mut got = MappingSet::new();
            for c in &comps {
                got.extend(oracle_eval_va(c, &d));
            }
            assert_eq!(got, oracle_eval_va(&a, &d));
        }
        assert!(va_to_disjunctive_functional(&Va::empty_language()).unwrap().is_empty());
    }

    #[test]
    fn disjunctive_join() {
        let c1 = va_to_disjunctive_functional(&va("(x{a}b)|(ab)")).unwrap();
        let c2 = va_to_disjunctive_functional(&va("x{.*} y{.*}")).unwrap();
        let joined = join_disjunctive(&c1, &c2).unwrap();
        for c in &joined {
            assert!(check_functional(c));
            assert!(!c.language_empty());
        }
        let a = va("(x{a}b)|(ab)");
        let b = va("x{.*} y{.*}");
        for d in docs() {
            let mut got = MappingSet::new();
            for c in &joined {
                got.extend(oracle_eval_va(c, &d));
            }
            let want = join_sets(&oracle_eval_va(&a, &d), &oracle_eval_va(&b, &d));
            assert_eq!(got, want, "doc {d}");
        }
    }
}
