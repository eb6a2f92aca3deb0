//! Finite prefixes of the structure built from a certificate: cells, the
//! relations `t0`, `t1`, `t2`, their transitive closure, and checks of the
//! construction's properties on the prefix.

use std::collections::BTreeSet;
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::basic_reduction::{Basic, BasicSet};
use crate::certificate::{check_conditions, Certificate};
use crate::semantics::{eval, one_types, Structure};

/// A cell `A_{ξ,Π,i}`: index into `Ω` and copy index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellAddress {
    pub xi_pi: usize,
    pub i: usize,
}

/// Provenance of one element `a±_{π,ξ,Π,i}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ElementTag {
    /// Index into the certificate's types.
    pub ty: usize,
    /// Index into [`SynthesizedPrefix::cells`].
    pub cell: usize,
    pub plus: bool,
}

#[derive(Clone, Debug)]
pub struct SynthesizedPrefix {
    pub structure: Structure,
    pub tags: Vec<ElementTag>,
    pub cells: Vec<CellAddress>,
    /// Cell-level `t1` and `t2` edges.
    pub t1: BTreeSet<(usize, usize)>,
    pub t2: BTreeSet<(usize, usize)>,
    pub depth: usize,
}

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("invalid certificate:\n{0}")]
    InvalidCertificate(String),
}

impl SynthesizedPrefix {
    /// Elements of a cell, in construction order.
    pub fn members(&self, cell: usize) -> Vec<usize> {
        (0..self.tags.len()).filter(|&a| self.tags[a].cell == cell).collect()
    }

    /// Structure JSON with an extra `"tags"` block.
    pub fn to_json(&self, c: &Certificate) -> Value {
        let mut v = self.structure.to_json();
        let tags: Vec<Value> = self
            .tags
            .iter()
            .map(|t| {
                let cell = self.cells[t.cell];
                json!({"type": c.types[t.ty].display(&c.sig), "omega": cell.xi_pi, "i": cell.i, "sign": if t.plus { "+" } else { "-" }})
            })
            .collect();
        v["tags"] = Value::from(tags);
        v["depth"] = json!(self.depth);
        v
    }

    /// Recomputes `T` as the closure of `t0 ∪ t1 ∪ t2` from the stored
    /// cell edges.
    pub fn rebuild_t(&mut self, c: &Certificate) {
        let t = self.structure.sig().distinguished().expect("T");
        let n = self.tags.len();
        let mut s = Structure::new(self.structure.sig().clone(), n);
        for p in c.sig.unary().into_iter().filter(|&p| Some(p) != c.sig.that()) {
            for a in 0..n {
                s.set(p, &[a], self.structure.holds(p, &[a]));
            }
        }
        for a in 0..n {
            for b in 0..n {
                let (u, v) = (self.tags[a].cell, self.tags[b].cell);
                let t0 = u == v && !c.is_soliton(&c.omega[self.cells[u].xi_pi].xi);
                if t0 || self.t1.contains(&(u, v)) || self.t2.contains(&(u, v)) {
                    s.set(t, &[a, b], true);
                }
            }
        }
        s.close_transitive();
        self.structure = s;
    }
}

/// Builds the cells with `i ≤ depth` (one cell when `ξ ∩ V ≠ ∅`) and `T` as
/// the closure of `t0 ∪ t1 ∪ t2` on them.
pub fn synthesize(c: &Certificate, depth: usize) -> Result<SynthesizedPrefix, SynthesisError> {
    let report = check_conditions(c);
    if !report.is_empty() {
        return Err(SynthesisError::InvalidCertificate(report.to_string()));
    }
    let mut cells = Vec::new();
    for (k, s) in c.omega.iter().enumerate() {
        let top = if c.meets_v(&s.xi) { 0 } else { depth };
        cells.extend((0..=top).map(|i| CellAddress { xi_pi: k, i }));
    }
    let mut tags = Vec::new();
    for (u, cell) in cells.iter().enumerate() {
        for (&ty, &cnt) in &c.omega[cell.xi_pi].xi.counts {
            for plus in [true, false].into_iter().take(cnt as usize) {
                tags.push(ElementTag { ty, cell: u, plus });
            }
        }
    }
    let mut t1 = BTreeSet::new();
    let mut t2 = BTreeSet::new();
    for (u, cu) in cells.iter().enumerate() {
        let (x, px) = (&c.omega[cu.xi_pi].xi, &c.omega[cu.xi_pi].pi);
        for (w, cw) in cells.iter().enumerate() {
            let (y, py) = (&c.omega[cw.xi_pi].xi, &c.omega[cw.xi_pi].pi);
            let a = y.support().all(|t| px.contains(&t)) && py.is_subset(px);
            let b = c.meets_v(y) || cw.i >= cu.i + 2;
            let cc = !x.support().any(|t| c.v.contains(&t) && py.contains(&t));
            if a && b && cc {
                t1.insert((u, w));
            }
            if u != w && c.ll.iter().any(|&(p, q)| x.contains(p) && y.contains(q)) {
                t2.insert((u, w));
            }
        }
    }
    let mut s = Structure::new(c.sig.clone(), tags.len());
    let that = c.sig.that();
    for (a, tag) in tags.iter().enumerate() {
        for &(p, b) in &c.types[tag.ty].lits {
            if Some(p) != that && b {
                s.set(p, &[a], true);
            }
        }
    }
    let mut p = SynthesizedPrefix { structure: s, tags, cells, t1, t2, depth };
    p.rebuild_t(c);
    Ok(p)
}

/// One failed check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixIssue {
    /// `intra-cell-t1`, `cycle`, `that-diagonal`, `closure`, `type`,
    /// `accumulation`, `universal` or `existential`.
    pub check: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PrefixReport {
    pub issues: Vec<PrefixIssue>,
    /// Existential obligations at elements too close to the boundary.
    pub unchecked: usize,
    /// Existential obligations verified.
    pub checked: usize,
}

impl PrefixReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, check: &str) -> bool {
        self.issues.iter().any(|i| i.check == check)
    }

    fn push(&mut self, check: &'static str, detail: String) {
        self.issues.push(PrefixIssue { check, detail });
    }
}

impl fmt::Display for PrefixReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} issue(s); {} existential obligation(s) checked, {} unchecked", self.issues.len(), self.checked, self.unchecked)?;
        for i in &self.issues {
            writeln!(f, "{}: {}", i.check, i.detail)?;
        }
        Ok(())
    }
}

/// Longest cell path length used for the accumulation check.
const ACCUMULATION_PATH_LEN: usize = 4;

/// Checks the prefix: no intra-cell `t1`, an acyclic cell graph, `That` as the
/// diagonal of `T`, `T` closed, accumulation along cell paths, universal
/// formulas everywhere and existential ones at cells with `i ≤ depth − 2`.
pub fn verify_prefix(p: &SynthesizedPrefix, c: &Certificate, phi: &BasicSet) -> PrefixReport {
    let mut r = PrefixReport::default();
    let s = &p.structure;
    let n = s.size();
    let t = s.sig().distinguished().expect("T");

    for &(u, w) in &p.t1 {
        if u == w {
            r.push("intra-cell-t1", format!("cell {u} {:?}", p.cells[u]));
        }
    }

    let nc = p.cells.len();
    let mut adj = vec![Vec::new(); nc];
    for &(u, w) in p.t1.iter().chain(&p.t2) {
        if u != w {
            adj[u].push(w);
        }
    }
    if let Some(u) = find_cycle(&adj) {
        r.push("cycle", format!("cell {u} {:?} lies on a t1/t2 cycle", p.cells[u]));
    }

    let that = s.sig().that();
    let tys = one_types(s);
    for a in 0..n {
        let want = &c.types[p.tags[a].ty];
        if let Some(h) = that {
            if want.value(h) != Some(s.holds(t, &[a, a])) {
                r.push("that-diagonal", format!("element {a}: type says That={:?}, T(a,a)={}", want.value(h), s.holds(t, &[a, a])));
            }
        }
        if &tys[a] != want {
            r.push("type", format!("element {a} realizes {} instead of {}", tys[a].display(&c.sig), want.display(&c.sig)));
        }
    }

    let mut closed = s.clone();
    closed.close_transitive();
    if (0..n).any(|a| (0..n).any(|b| closed.holds(t, &[a, b]) != s.holds(t, &[a, b]))) {
        r.push("closure", "T is not transitive".into());
    }

    let reach = |u: usize| -> BTreeSet<usize> {
        let o = &c.omega[p.cells[u].xi_pi];
        o.xi.support().chain(o.pi.iter().copied()).collect()
    };
    let mut frontier: Vec<(usize, usize)> = (0..nc).map(|u| (u, u)).collect();
    for _ in 0..ACCUMULATION_PATH_LEN {
        let mut next = BTreeSet::new();
        for &(start, end) in &frontier {
            for &w in &adj[end] {
                let pi0 = &c.omega[p.cells[start].xi_pi].pi;
                if !reach(w).is_subset(pi0) {
                    r.push("accumulation", format!("path from cell {start} to cell {w}"));
                }
                next.insert((start, w));
            }
        }
        frontier = next.into_iter().collect();
    }

    let interior = |a: usize| p.depth >= 2 && p.cells[p.tags[a].cell].i <= p.depth - 2;
    for psi in &phi.formulas {
        match psi {
            Basic::B1 { pi, mu } | Basic::B2 { pi, mu } => {
                let want_t = matches!(psi, Basic::B1 { .. });
                for a in (0..n).filter(|&a| &tys[a] == pi) {
                    if !interior(a) {
                        r.unchecked += 1;
                        continue;
                    }
                    r.checked += 1;
                    if !(0..n).any(|b| b != a && tys[b].entails(mu) && s.holds(t, &[a, b]) == want_t) {
                        r.push("existential", format!("element {a} lacks a witness for {}", psi.to_line(&phi.sig)));
                    }
                }
            }
            Basic::B8 { mu } => {
                r.checked += 1;
                if !tys.iter().any(|x| x.entails(mu)) {
                    r.push("existential", format!("no element for {}", psi.to_line(&phi.sig)));
                }
            }
            _ => {
                if eval(s, &psi.to_formula(&phi.sig), &[]) != Ok(true) {
                    r.push("universal", psi.to_line(&phi.sig));
                }
            }
        }
    }
    r
}

/// Some node on a directed cycle, if any.
fn find_cycle(adj: &[Vec<usize>]) -> Option<usize> {
    // 0 unvisited, 1 on stack, 2 done
    let mut state = vec![0u8; adj.len()];
    for root in 0..adj.len() {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (u, ref mut i)) = stack.last_mut() {
            if *i < adj[u].len() {
                let w = adj[u][*i];
                *i += 1;
                match state[w] {
                    0 => {
                        state[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => return Some(w),
                    _ => {}
                }
            } else {
                state[u] = 2;
                stack.pop();
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::{CliqueSuperType, CliqueType};
    use crate::semantics::FlutedType;
    use crate::syntax::{parse_header, Formula};

    fn minus_cert() -> Certificate {
        let sig = parse_header("sig { } trans { T } eq").unwrap();
        let pm = FlutedType { arity: 1, lits: vec![(sig.that().unwrap(), false)] };
        let omega = vec![CliqueSuperType { xi: CliqueType { counts: [(0, 1)].into() }, pi: [0].into() }];
        Certificate::new(sig, vec![pm], omega, BTreeSet::new(), BTreeSet::new())
    }

    fn minus_phi(c: &Certificate) -> BasicSet {
        let mut phi = BasicSet::new(c.sig.clone()).unwrap();
        let h = c.sig.that().unwrap();
        phi.formulas.push(Basic::B1 { pi: c.types[0].clone(), mu: Formula::True });
        phi.formulas.push(Basic::B7 { mu: Formula::lit(h, false) });
        phi.formulas.push(Basic::B8 { mu: Formula::True });
        phi
    }

    #[test]
    fn soliton_chain_at_depth_four() {
        let c = minus_cert();
        let p = synthesize(&c, 4).unwrap();
        assert_eq!(p.structure.size(), 5);
        let t = p.structure.sig().distinguished().unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(p.structure.holds(t, &[i, j]), j >= i + 2, "({i},{j})");
            }
        }
        let r = verify_prefix(&p, &c, &minus_phi(&c));
        assert!(r.is_clean(), "{r}");
        assert_eq!(r.checked, 4); // B1 at a0..a2, plus B8
    }

    #[test]
    fn two_clique_certificate() {
        let sig = parse_header("sig { } trans { T } eq").unwrap();
        let pp = FlutedType { arity: 1, lits: vec![(sig.that().unwrap(), true)] };
        let omega = vec![CliqueSuperType { xi: CliqueType { counts: [(0, 2)].into() }, pi: BTreeSet::new() }];
        let c = Certificate::new(sig, vec![pp], omega, BTreeSet::new(), [0].into());
        let p = synthesize(&c, 3).unwrap();
        assert_eq!(p.structure.size(), 2);
        let t = p.structure.sig().distinguished().unwrap();
        assert_eq!(p.structure.tuples(t).len(), 4);
    }

    #[test]
    fn depth_zero_has_no_t1() {
        let p = synthesize(&minus_cert(), 0).unwrap();
        assert!(p.t1.is_empty());
    }

    #[test]
    fn injected_intra_cell_edge_is_flagged() {
        let c = minus_cert();
        let mut p = synthesize(&c, 4).unwrap();
        p.t1.insert((2, 2));
        p.rebuild_t(&c);
        let r = verify_prefix(&p, &c, &minus_phi(&c));
        assert!(r.has("intra-cell-t1"));
        assert!(r.has("that-diagonal"));
    }
}
