//! Finite structures, fluted evaluation, fluted types, cliques, kings and
//! structure inflation.
//!
//! Equality is the identity and is never stored. `That` is read off the
//! diagonal of the distinguished transitive relation unless a structure was
//! loaded with an explicit extension, which [`check_wellformed`] then audits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::syntax::{validate, Formula, PredId, PredKind, Signature};

/// A finite interpretation of a signature over the domain `0..size`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Structure {
    sig: Signature,
    size: usize,
    rels: Vec<Vec<bool>>,
    that_override: Option<Vec<bool>>,
}

impl Structure {
    /// Structure with every stored relation empty.
    pub fn new(sig: Signature, size: usize) -> Self {
        let rels = sig
            .preds()
            .iter()
            .map(|p| if p.is_stored() { vec![false; size.pow(p.arity as u32)] } else { Vec::new() })
            .collect();
        Structure { sig, size, rels, that_override: None }
    }

    pub fn sig(&self) -> &Signature {
        &self.sig
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn index(&self, args: &[usize]) -> usize {
        args.iter().fold(0, |acc, &a| acc * self.size + a)
    }

    /// Truth of `p(args)`; `args.len()` must equal the arity of `p`.
    pub fn holds(&self, p: PredId, args: &[usize]) -> bool {
        debug_assert_eq!(args.len(), self.sig.arity(p));
        match self.sig.kind(p) {
            PredKind::Equality => args[0] == args[1],
            PredKind::THat => match &self.that_override {
                Some(v) => v[args[0]],
                None => match self.sig.distinguished() {
                    Some(t) => self.rels[t][args[0] * self.size + args[0]],
                    None => false,
                },
            },
            _ => self.rels[p][self.index(args)],
        }
    }

    /// Sets a stored relation entry. Panics on equality and `That`.
    pub fn set(&mut self, p: PredId, args: &[usize], value: bool) {
        assert!(self.sig.pred(p).is_stored(), "cannot store `{}`", self.sig.name(p));
        let i = self.index(args);
        self.rels[p][i] = value;
    }

    /// All tuples in the extension of a stored relation, in lexicographic order.
    pub fn tuples(&self, p: PredId) -> Vec<Vec<usize>> {
        let k = self.sig.arity(p);
        all_tuples(self.size, k).filter(|t| self.holds(p, t)).collect()
    }

    /// Closes every transitive relation under composition and drops any
    /// explicit `That` extension.
    pub fn close_transitive(&mut self) {
        let n = self.size;
        for t in self.sig.transitive() {
            let r = &mut self.rels[t];
            for k in 0..n {
                for i in 0..n {
                    if r[i * n + k] {
                        for j in 0..n {
                            if r[k * n + j] {
                                r[i * n + j] = true;
                            }
                        }
                    }
                }
            }
        }
        self.that_override = None;
    }

    /// Substructure induced by `elems`, renumbered in the given order.
    pub fn restrict(&self, elems: &[usize]) -> Structure {
        let mut out = Structure::new(self.sig.clone(), elems.len());
        for (p, pr) in self.sig.preds().iter().enumerate() {
            if !pr.is_stored() {
                continue;
            }
            for t in all_tuples(elems.len(), pr.arity) {
                let orig: Vec<usize> = t.iter().map(|&i| elems[i]).collect();
                if self.holds(p, &orig) {
                    out.set(p, &t, true);
                }
            }
        }
        out
    }

    /// Same interpretation over a signature that extends this one by
    /// appending predicates; new predicates start empty.
    pub fn extend_signature(&self, sig: Signature) -> Structure {
        let mut out = Structure::new(sig, self.size);
        for (p, pr) in self.sig.preds().iter().enumerate() {
            assert_eq!(out.sig.pred(p), pr, "signature must extend by appending");
            if pr.is_stored() {
                out.rels[p] = self.rels[p].clone();
            }
        }
        out
    }

    /// JSON rendering with `"format": 1`.
    pub fn to_json(&self) -> Value {
        let mut unary = serde_json::Map::new();
        let mut binary = serde_json::Map::new();
        let mut higher = serde_json::Map::new();
        for (p, pr) in self.sig.preds().iter().enumerate() {
            if !pr.is_stored() {
                continue;
            }
            let tuples = self.tuples(p);
            match pr.arity {
                1 => {
                    unary.insert(pr.name.clone(), json!(tuples.iter().map(|t| t[0]).collect::<Vec<_>>()));
                }
                2 => {
                    binary.insert(pr.name.clone(), json!(tuples));
                }
                _ => {
                    higher.insert(pr.name.clone(), json!(tuples));
                }
            }
        }
        let transitive: Vec<&str> = self.sig.transitive().iter().map(|&t| self.sig.name(t)).collect();
        let mut v = json!({
            "format": 1,
            "size": self.size,
            "unary": unary,
            "binary": binary,
            "transitive": transitive,
        });
        if !higher.is_empty() {
            v["relations"] = Value::Object(higher);
        }
        v
    }

    /// Loads a structure over `sig` from JSON. Unless `repair_closure` is set,
    /// a structure failing [`check_wellformed`] is rejected; with it, the
    /// transitive closure is taken first.
    pub fn from_json(v: &Value, sig: &Signature, repair_closure: bool) -> Result<Structure, StructureError> {
        let size = v["size"].as_u64().ok_or_else(|| StructureError::Json("missing `size`".into()))? as usize;
        let mut s = Structure::new(sig.clone(), size);
        let mut that = None;
        for key in ["unary", "binary", "relations"] {
            let Some(obj) = v.get(key).and_then(Value::as_object) else { continue };
            for (name, tuples) in obj {
                let p = sig.lookup(name).ok_or_else(|| StructureError::UnknownPredicate(name.clone()))?;
                let arity = sig.arity(p);
                let list = tuples.as_array().ok_or_else(|| StructureError::Json(format!("`{name}` is not a list")))?;
                for t in list {
                    let tuple: Vec<usize> = if arity == 1 && t.is_u64() {
                        vec![t.as_u64().unwrap_or(0) as usize]
                    } else {
                        t.as_array()
                            .ok_or_else(|| StructureError::Json(format!("bad tuple in `{name}`")))?
                            .iter()
                            .map(|x| x.as_u64().map(|x| x as usize))
                            .collect::<Option<Vec<_>>>()
                            .ok_or_else(|| StructureError::Json(format!("bad tuple in `{name}`")))?
                    };
                    if tuple.len() != arity || tuple.iter().any(|&a| a >= size) {
                        return Err(StructureError::Json(format!("tuple {tuple:?} out of range for `{name}`")));
                    }
                    match sig.kind(p) {
                        PredKind::THat => that.get_or_insert_with(|| vec![false; size])[tuple[0]] = true,
                        PredKind::Equality => {
                            return Err(StructureError::Json("equality is built in".into()));
                        }
                        _ => s.set(p, &tuple, true),
                    }
                }
            }
        }
        s.that_override = that;
        if repair_closure {
            s.close_transitive();
        }
        let report = check_wellformed(&s);
        if !report.is_empty() {
            return Err(StructureError::NotWellFormed(report));
        }
        s.that_override = None;
        Ok(s)
    }
}

/// Iterator over all `k`-tuples of `0..n` in lexicographic order.
pub fn all_tuples(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = if k == 0 { 1 } else { n.pow(k as u32) };
    (0..total).map(move |mut code| {
        let mut t = vec![0; k];
        for slot in t.iter_mut().rev() {
            *slot = code % n.max(1);
            code /= n.max(1);
        }
        t
    })
}

/// Structure loading and model-checking failures.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("malformed structure JSON: {0}")]
    Json(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("structure is not well formed: {0}")]
    NotWellFormed(WellformedReport),
}

/// Evaluation failures.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("context of length {given} too short: {source}")]
    ContextTooShort { given: usize, source: crate::syntax::ValidationError },
}

/// Violations of the transitivity and `That` invariants.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WellformedReport {
    /// `(relation, a, b, c)` with `R(a,b)`, `R(b,c)` and not `R(a,c)`.
    pub transitivity: Vec<(PredId, usize, usize, usize)>,
    /// Elements where an explicit `That` disagrees with the diagonal.
    pub that_mismatch: Vec<usize>,
}

impl WellformedReport {
    pub fn is_empty(&self) -> bool {
        self.transitivity.is_empty() && self.that_mismatch.is_empty()
    }
}

impl fmt::Display for WellformedReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some((p, a, b, c)) = self.transitivity.first() {
            parts.push(format!(
                "{} transitivity violation(s), first: relation #{p} at ({a},{b},{c})",
                self.transitivity.len()
            ));
        }
        if !self.that_mismatch.is_empty() {
            parts.push(format!("That mismatches at {:?}", self.that_mismatch));
        }
        if parts.is_empty() {
            parts.push("clean".into());
        }
        f.write_str(&parts.join("; "))
    }
}

/// Lists every transitivity violation and `That` mismatch.
pub fn check_wellformed(s: &Structure) -> WellformedReport {
    let n = s.size;
    let mut report = WellformedReport::default();
    for t in s.sig.transitive() {
        for a in 0..n {
            for b in 0..n {
                if !s.holds(t, &[a, b]) {
                    continue;
                }
                for c in 0..n {
                    if s.holds(t, &[b, c]) && !s.holds(t, &[a, c]) {
                        report.transitivity.push((t, a, b, c));
                    }
                }
            }
        }
    }
    if let Some(v) = &s.that_override {
        let diag = |a: usize| s.sig.distinguished().is_some_and(|t| s.rels[t][a * n + a]);
        report.that_mismatch = (0..n).filter(|&a| v[a] != diag(a)).collect();
    }
    report
}

/// Truth of `f` in `s` under `context`; atoms of arity `k` read the last `k`
/// context elements.
pub fn eval(s: &Structure, f: &Formula, context: &[usize]) -> Result<bool, EvalError> {
    validate(&s.sig, f, context.len())
        .map_err(|source| EvalError::ContextTooShort { given: context.len(), source })?;
    let mut ctx = context.to_vec();
    Ok(eval_unchecked(s, f, &mut ctx))
}

/// Evaluation without the up-front arity check.
pub fn eval_unchecked(s: &Structure, f: &Formula, ctx: &mut Vec<usize>) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(p) => {
            let k = s.sig.arity(*p);
            s.holds(*p, &ctx[ctx.len() - k..])
        }
        Formula::Not(g) => !eval_unchecked(s, g, ctx),
        Formula::And(v) => v.iter().all(|g| eval_unchecked(s, g, ctx)),
        Formula::Or(v) => v.iter().any(|g| eval_unchecked(s, g, ctx)),
        Formula::Xor(v) => {
            let mut count = 0;
            for g in v {
                if eval_unchecked(s, g, ctx) {
                    count += 1;
                    if count > 1 {
                        return false;
                    }
                }
            }
            count == 1
        }
        Formula::Implies(a, b) => !eval_unchecked(s, a, ctx) || eval_unchecked(s, b, ctx),
        Formula::Forall(g) => (0..s.size).all(|a| {
            ctx.push(a);
            let r = eval_unchecked(s, g, ctx);
            ctx.pop();
            r
        }),
        Formula::Exists(g) => (0..s.size).any(|a| {
            ctx.push(a);
            let r = eval_unchecked(s, g, ctx);
            ctx.pop();
            r
        }),
    }
}

/// A fluted `m`-type: one literal for every predicate of arity at most `m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlutedType {
    pub arity: usize,
    /// `(predicate, polarity)` sorted by predicate id.
    pub lits: Vec<(PredId, bool)>,
}

impl FlutedType {
    /// Polarity of `p`, if `p` is in the type's vocabulary.
    pub fn value(&self, p: PredId) -> Option<bool> {
        self.lits.binary_search_by_key(&p, |l| l.0).ok().map(|i| self.lits[i].1)
    }

    /// Truth of a quantifier-free formula; `None` if it mentions predicates
    /// outside the type's vocabulary and their value matters.
    pub fn satisfies(&self, f: &Formula) -> Option<bool> {
        f.eval_prop(&mut |p| self.value(p))
    }

    /// `self |= f` for a quantifier-free `f` over the type's vocabulary.
    pub fn entails(&self, f: &Formula) -> bool {
        self.satisfies(f) == Some(true)
    }

    /// The type as a conjunction of literals.
    pub fn to_formula(&self) -> Formula {
        Formula::and(self.lits.iter().map(|&(p, b)| Formula::lit(p, b)).collect())
    }

    /// `{p+, r-, ...}`.
    pub fn display(&self, sig: &Signature) -> String {
        let parts: Vec<String> =
            self.lits.iter().map(|&(p, b)| format!("{}{}", sig.name(p), if b { "+" } else { "-" })).collect();
        format!("{{{}}}", parts.join(", "))
    }

    /// Restriction to the predicates accepted by `keep`.
    pub fn restrict(&self, keep: impl Fn(PredId) -> bool) -> FlutedType {
        FlutedType { arity: self.arity, lits: self.lits.iter().copied().filter(|l| keep(l.0)).collect() }
    }
}

/// The unique fluted type of `tuple` (its length is the type's arity).
pub fn fluted_type_of(s: &Structure, tuple: &[usize]) -> FlutedType {
    let m = tuple.len();
    let lits = s
        .sig
        .eligible(m)
        .into_iter()
        .map(|p| {
            let k = s.sig.arity(p);
            (p, s.holds(p, &tuple[m - k..]))
        })
        .collect();
    FlutedType { arity: m, lits }
}

/// All fluted 1-types of the elements, indexed by element.
pub fn one_types(s: &Structure) -> Vec<FlutedType> {
    (0..s.size).map(|a| fluted_type_of(s, &[a])).collect()
}

/// Set of fluted `m`-types realized by `m`-tuples.
pub fn realized_types(s: &Structure, m: usize) -> BTreeSet<FlutedType> {
    all_tuples(s.size, m).map(|t| fluted_type_of(s, &t)).collect()
}

/// Partition of the domain into cliques of the distinguished relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliquePartition {
    /// Blocks ordered by least element; each block sorted.
    pub blocks: Vec<Vec<usize>>,
    /// Per block: a singleton without a self-loop.
    pub soliton: Vec<bool>,
    /// Block index of every element.
    pub block_of: Vec<usize>,
}

/// Cliques of the distinguished transitive relation (all solitons if the
/// signature has none).
pub fn cliques(s: &Structure) -> CliquePartition {
    let n = s.size;
    let t = s.sig.distinguished();
    let rel = |a: usize, b: usize| t.is_some_and(|t| s.holds(t, &[a, b]));
    let mut block_of = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut soliton = Vec::new();
    for a in 0..n {
        if block_of[a] != usize::MAX {
            continue;
        }
        let id = blocks.len();
        let mut block = vec![a];
        block_of[a] = id;
        for b in a + 1..n {
            if block_of[b] == usize::MAX && rel(a, b) && rel(b, a) {
                block_of[b] = id;
                block.push(b);
            }
        }
        soliton.push(block.len() == 1 && !rel(a, a));
        blocks.push(block);
    }
    CliquePartition { blocks, soliton, block_of }
}

/// Elements whose 1-type is realized exactly once, and those 1-types.
pub fn kings(s: &Structure) -> (Vec<usize>, Vec<FlutedType>) {
    let types = one_types(s);
    let mut count: BTreeMap<&FlutedType, usize> = BTreeMap::new();
    for t in &types {
        *count.entry(t).or_default() += 1;
    }
    let elems: Vec<usize> = (0..s.size).filter(|&a| count[&types[a]] == 1).collect();
    let royal = elems.iter().map(|&a| types[a].clone()).collect();
    (elems, royal)
}

/// Every clique determined by a pair of 1-types is also the unique clique
/// realizing some single 1-type.
pub fn is_quadratic(s: &Structure) -> bool {
    let types = one_types(s);
    let cp = cliques(s);
    let mut ids: BTreeMap<&FlutedType, usize> = BTreeMap::new();
    for t in &types {
        let k = ids.len();
        ids.entry(t).or_insert(k);
    }
    let tid: Vec<usize> = types.iter().map(|t| ids[t]).collect();
    let per_block: Vec<BTreeSet<usize>> =
        cp.blocks.iter().map(|b| b.iter().map(|&a| tid[a]).collect()).collect();
    let mut blocks_of_type: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
    for (u, set) in per_block.iter().enumerate() {
        for &t in set {
            blocks_of_type[t].push(u);
        }
    }
    let pinned = |u: usize| per_block[u].iter().any(|&t| blocks_of_type[t] == [u]);
    for p in 0..ids.len() {
        for q in p + 1..ids.len() {
            let both: Vec<usize> =
                blocks_of_type[p].iter().copied().filter(|u| per_block[*u].contains(&q)).collect();
            if both.len() == 1 && !pinned(both[0]) {
                return false;
            }
        }
    }
    true
}

/// Structure inflation: kings stay put and the non-king part is copied so
/// that the domain becomes the kings plus `copies` disjoint copies of the
/// non-kings.
///
/// Pairs whose originals differ copy the original pair. A pair of distinct
/// copies of the same element `a` takes its binary facts from a realized pair
/// `(u, v)` with `u != v`, `v` of the 1-type of `a`, and each transitive
/// relation fixed to "`a` has a self-loop and a clique-mate". This keeps every
/// transitive relation transitive and realizes no new fluted 2-type.
///
/// Panics if no such template pair exists, which cannot happen for a
/// well-formed structure with at most one transitive relation.
pub fn inflate(s: &Structure, copies: usize) -> Structure {
    assert!(copies >= 1, "inflate needs at least one copy");
    let n = s.size;
    let (king_elems, _) = kings(s);
    let non_kings: Vec<usize> = (0..n).filter(|a| !king_elems.contains(a)).collect();
    let mut orig: Vec<usize> = (0..n).collect();
    for _ in 1..copies {
        orig.extend(non_kings.iter().copied());
    }
    let size = orig.len();
    let sig = s.sig.clone();
    let mut out = Structure::new(sig.clone(), size);
    let types = one_types(s);
    let trans = sig.transitive();

    let mut want: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
    let mut template: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for &a in &non_kings {
        let w: Vec<bool> = trans
            .iter()
            .map(|&t| s.holds(t, &[a, a]) && (0..n).any(|b| b != a && s.holds(t, &[a, b]) && s.holds(t, &[b, a])))
            .collect();
        let found = (0..n)
            .flat_map(|u| (0..n).map(move |v| (u, v)))
            .find(|&(u, v)| {
                u != v && types[v] == types[a] && trans.iter().zip(&w).all(|(&t, &b)| s.holds(t, &[u, v]) == b)
            })
            .expect("inflate: no template pair for a copied element");
        template.insert(a, found);
        want.insert(a, w);
    }

    for (p, pr) in sig.preds().iter().enumerate() {
        if !pr.is_stored() {
            continue;
        }
        for t in all_tuples(size, pr.arity) {
            let o: Vec<usize> = t.iter().map(|&x| orig[x]).collect();
            let value = if pr.arity == 2 && t[0] != t[1] && o[0] == o[1] {
                let a = o[0];
                match trans.iter().position(|&q| q == p) {
                    Some(k) => want[&a][k],
                    None => {
                        let (u, v) = template[&a];
                        s.holds(p, &[u, v])
                    }
                }
            } else {
                s.holds(p, &o)
            };
            if value {
                out.set(p, &t, true);
            }
        }
    }
    out
}
