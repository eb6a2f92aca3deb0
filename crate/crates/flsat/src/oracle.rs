//! Bounded finite-model finder and reference model checker.
//!
//! A sentence is grounded over a domain of size `n` into propositional
//! clauses whose variables are the cells of the stored relations, plus gate
//! variables for subformulas. Transitivity is enforced by closure clauses, so
//! every `T`-edge decision propagates its consequences. Single-model queries
//! without a decision limit go to a CDCL solver. Enumeration uses an
//! exhaustive DPLL that branches only on relation cells, with chronological
//! backtracking and no clause learning; isomorphic models are pruned by
//! requiring the unary rows of consecutive elements to be lexicographically
//! non-decreasing.

use thiserror::Error;

use crate::semantics::{all_tuples, check_wellformed, eval_unchecked, Structure};
use crate::syntax::{validate, Formula, PredId, PredKind, Signature, ValidationError};

/// Default largest domain the oracle accepts.
pub const DEFAULT_BOUND: usize = 6;

/// Whether to search all sizes `1..=n` or only `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    AtMost,
    Exactly,
}

/// Search configuration.
#[derive(Clone, Debug)]
pub struct OracleConfig {
    /// Largest admissible domain size.
    pub bound: usize,
    /// Abort after this many branching decisions per domain size.
    pub decision_limit: Option<u64>,
    /// Prune models whose unary rows are not sorted.
    pub symmetry_breaking: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { bound: DEFAULT_BOUND, decision_limit: None, symmetry_breaking: true }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("domain size {requested} exceeds the oracle bound {bound}")]
    BoundExceeded { requested: usize, bound: usize },
    #[error("not a sentence: {0}")]
    NotASentence(#[from] ValidationError),
    #[error("decision limit of {0} reached")]
    DecisionLimit(u64),
}

/// Search statistics for one domain size.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub variables: usize,
    pub clauses: usize,
    pub decisions: u64,
    pub conflicts: u64,
}

/// A model of `f` of size `n` (mode `Exactly`) or of the least size `≤ n`
/// (mode `AtMost`), or `None` when no such model exists.
pub fn find_model(sig: &Signature, f: &Formula, n: usize, mode: Mode) -> Result<Option<Structure>, OracleError> {
    find_model_with(&OracleConfig::default(), sig, f, n, mode)
}

/// [`find_model`] under an explicit configuration.
pub fn find_model_with(
    cfg: &OracleConfig,
    sig: &Signature,
    f: &Formula,
    n: usize,
    mode: Mode,
) -> Result<Option<Structure>, OracleError> {
    let sizes: Vec<usize> = match mode {
        Mode::AtMost => (1..=n).collect(),
        Mode::Exactly => vec![n],
    };
    for size in sizes {
        if cfg.decision_limit.is_none() {
            if size > cfg.bound {
                return Err(OracleError::BoundExceeded { requested: size, bound: cfg.bound });
            }
            validate(sig, f, 0)?;
            let g = Grounding::build(sig, f, size);
            if g.trivially_unsat {
                continue;
            }
            if let Some(assign) = solve_cdcl(&g) {
                let s = g.decode(sig, &assign);
                debug_assert!(check_model(&s, f), "grounding disagrees with evaluation");
                return Ok(Some(s));
            }
            continue;
        }
        let mut found = None;
        for_each_model_with(cfg, sig, f, size, |s| {
            found = Some(s.clone());
            false
        })?;
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

/// Calls `visit` on models of size `n` until it returns `false`; returns the
/// number of models visited and the search statistics. With symmetry
/// breaking on, every model is isomorphic to at least one visited model.
pub fn for_each_model_with(
    cfg: &OracleConfig,
    sig: &Signature,
    f: &Formula,
    n: usize,
    mut visit: impl FnMut(&Structure) -> bool,
) -> Result<(u64, SearchStats), OracleError> {
    if n > cfg.bound {
        return Err(OracleError::BoundExceeded { requested: n, bound: cfg.bound });
    }
    validate(sig, f, 0)?;
    let g = Grounding::build(sig, f, n);
    let mut stats = SearchStats { variables: g.num_vars, clauses: g.clauses.len(), ..Default::default() };
    let mut count = 0u64;
    if g.trivially_unsat {
        return Ok((0, stats));
    }
    let rows = if cfg.symmetry_breaking { g.rows.clone() } else { Vec::new() };
    let mut solver = Dpll::new(g.num_vars, &g.clauses, g.decision_order.clone(), rows);
    let outcome = solver.run(cfg.decision_limit, &mut |assign| {
        count += 1;
        visit(&g.decode(sig, assign))
    });
    stats.decisions = solver.decisions;
    stats.conflicts = solver.conflicts;
    match outcome {
        RunOutcome::Done => Ok((count, stats)),
        RunOutcome::Limit => Err(OracleError::DecisionLimit(cfg.decision_limit.unwrap_or(0))),
    }
}

/// Number of models of size `n`, counted without symmetry breaking.
pub fn count_models(sig: &Signature, f: &Formula, n: usize) -> Result<u64, OracleError> {
    let cfg = OracleConfig { symmetry_breaking: false, ..OracleConfig::default() };
    Ok(for_each_model_with(&cfg, sig, f, n, |_| true)?.0)
}

/// True iff `s` is well formed and satisfies the sentence `f`.
pub fn check_model(s: &Structure, f: &Formula) -> bool {
    if validate(s.sig(), f, 0).is_err() || !check_wellformed(s).is_empty() {
        return false;
    }
    eval_unchecked(s, f, &mut Vec::new())
}

/// Enumerates every interpretation of size `n` and keeps the well-formed
/// models of `f`. Exponential in the number of relation cells; meant as an
/// independent cross-check on tiny signatures.
pub fn naive_models(sig: &Signature, f: &Formula, n: usize) -> Vec<Structure> {
    let cells: Vec<(PredId, Vec<usize>)> = sig
        .preds()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_stored())
        .flat_map(|(id, p)| all_tuples(n, p.arity).map(move |t| (id, t)))
        .collect();
    assert!(cells.len() <= 24, "naive enumeration over {} cells is too large", cells.len());
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << cells.len()) {
        let mut s = Structure::new(sig.clone(), n);
        for (i, (p, t)) in cells.iter().enumerate() {
            if mask >> i & 1 == 1 {
                s.set(*p, t, true);
            }
        }
        if check_model(&s, f) {
            out.push(s);
        }
    }
    out
}

type Lit = u32;

fn lit(var: u32, positive: bool) -> Lit {
    var << 1 | u32::from(!positive)
}

fn neg(l: Lit) -> Lit {
    l ^ 1
}

#[derive(Clone, Copy)]
enum G {
    Const(bool),
    L(Lit),
}

impl G {
    fn negate(self) -> G {
        match self {
            G::Const(b) => G::Const(!b),
            G::L(l) => G::L(neg(l)),
        }
    }
}

struct Grounding<'a> {
    sig: &'a Signature,
    n: usize,
    num_vars: usize,
    /// First variable of each stored predicate's cell block.
    base: Vec<Option<u32>>,
    clauses: Vec<Vec<Lit>>,
    trivially_unsat: bool,
    decision_order: Vec<u32>,
    rows: Vec<Vec<u32>>,
}

impl<'a> Grounding<'a> {
    fn build(sig: &'a Signature, f: &Formula, n: usize) -> Self {
        let mut base = vec![None; sig.len()];
        let mut next = 0u32;
        for (id, p) in sig.preds().iter().enumerate() {
            if p.is_stored() {
                base[id] = Some(next);
                next += n.pow(p.arity as u32) as u32;
            }
        }
        let mut g = Grounding {
            sig,
            n,
            num_vars: next as usize,
            base,
            clauses: Vec::new(),
            trivially_unsat: false,
            decision_order: Vec::new(),
            rows: Vec::new(),
        };
        g.order_cells();
        for t in sig.transitive() {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        if a != b && b != c {
                            let cl =
                                vec![neg(g.cell(t, &[a, b])), neg(g.cell(t, &[b, c])), g.cell(t, &[a, c])];
                            g.add_clause(cl);
                        }
                    }
                }
            }
        }
        g.assert(f, &mut Vec::new(), true);
        g
    }

    fn order_cells(&mut self) {
        let sig = self.sig;
        let unary: Vec<PredId> = sig.ids_of(PredKind::Ordinary).into_iter().filter(|&p| sig.arity(p) == 1).collect();
        let trans = sig.transitive();
        for a in 0..self.n {
            let mut row: Vec<u32> = unary.iter().map(|&p| self.cell(p, &[a]) >> 1).collect();
            row.extend(trans.iter().map(|&t| self.cell(t, &[a, a]) >> 1));
            self.decision_order.extend(&row);
            self.rows.push(row);
        }
        let mut rest: Vec<(usize, u32)> = Vec::new();
        for (id, p) in sig.preds().iter().enumerate() {
            if !p.is_stored() || p.arity == 0 {
                if p.is_stored() {
                    rest.push((0, self.cell(id, &[]) >> 1));
                }
                continue;
            }
            for t in all_tuples(self.n, p.arity) {
                let v = self.cell(id, &t) >> 1;
                if !self.decision_order.contains(&v) {
                    rest.push((p.arity, v));
                }
            }
        }
        rest.sort_by_key(|&(k, v)| (k, v));
        self.decision_order.extend(rest.into_iter().map(|(_, v)| v));
    }

    fn cell(&self, p: PredId, args: &[usize]) -> Lit {
        let idx = args.iter().fold(0usize, |acc, &a| acc * self.n + a);
        lit(self.base[p].expect("stored predicate") + idx as u32, true)
    }

    fn fresh(&mut self) -> u32 {
        self.num_vars += 1;
        (self.num_vars - 1) as u32
    }

    fn add_clause(&mut self, mut cl: Vec<Lit>) {
        cl.sort_unstable();
        cl.dedup();
        if cl.windows(2).any(|w| w[0] ^ 1 == w[1]) {
            return;
        }
        if cl.is_empty() {
            self.trivially_unsat = true;
        }
        self.clauses.push(cl);
    }

    /// Adds `cl`, a disjunction of grounded subformulas.
    fn add_g_clause(&mut self, cl: Vec<G>) {
        let mut lits = Vec::with_capacity(cl.len());
        for g in cl {
            match g {
                G::Const(true) => return,
                G::Const(false) => {}
                G::L(l) => lits.push(l),
            }
        }
        self.add_clause(lits);
    }

    fn assert(&mut self, f: &Formula, ctx: &mut Vec<usize>, pos: bool) {
        match (f, pos) {
            (Formula::And(fs), true) | (Formula::Or(fs), false) => {
                for c in fs {
                    self.assert(c, ctx, pos);
                }
            }
            (Formula::Forall(b), true) | (Formula::Exists(b), false) => {
                for a in 0..self.n {
                    ctx.push(a);
                    self.assert(b, ctx, pos);
                    ctx.pop();
                }
            }
            (Formula::Not(b), _) => self.assert(b, ctx, !pos),
            (Formula::Implies(a, b), false) => {
                self.assert(a, ctx, true);
                self.assert(b, ctx, false);
            }
            (Formula::Implies(a, b), true) => {
                let cl = vec![self.ground(a, ctx).negate(), self.ground(b, ctx)];
                self.add_g_clause(cl);
            }
            (Formula::Or(fs), true) | (Formula::And(fs), false) => {
                let cl = fs.iter().map(|c| self.ground_signed(c, ctx, pos)).collect();
                self.add_g_clause(cl);
            }
            (Formula::Exists(b), true) | (Formula::Forall(b), false) => {
                let mut cl = Vec::with_capacity(self.n);
                for a in 0..self.n {
                    ctx.push(a);
                    cl.push(self.ground_signed(b, ctx, pos));
                    ctx.pop();
                }
                self.add_g_clause(cl);
            }
            _ => {
                let g = self.ground_signed(f, ctx, pos);
                self.add_g_clause(vec![g]);
            }
        }
    }

    fn ground_signed(&mut self, f: &Formula, ctx: &mut Vec<usize>, pos: bool) -> G {
        let g = self.ground(f, ctx);
        if pos {
            g
        } else {
            g.negate()
        }
    }

    fn ground(&mut self, f: &Formula, ctx: &mut Vec<usize>) -> G {
        match f {
            Formula::True => G::Const(true),
            Formula::False => G::Const(false),
            Formula::Atom(p) => {
                let k = self.sig.arity(*p);
                let args = &ctx[ctx.len() - k..];
                match self.sig.kind(*p) {
                    PredKind::Equality => G::Const(args[0] == args[1]),
                    PredKind::THat => match self.sig.distinguished() {
                        Some(t) => G::L(self.cell(t, &[args[0], args[0]])),
                        None => G::Const(false),
                    },
                    _ => G::L(self.cell(*p, args)),
                }
            }
            Formula::Not(b) => self.ground(b, ctx).negate(),
            Formula::And(fs) => {
                let gs: Vec<G> = fs.iter().map(|c| self.ground(c, ctx)).collect();
                self.gate_and(gs)
            }
            Formula::Or(fs) => {
                let gs: Vec<G> = fs.iter().map(|c| self.ground(c, ctx).negate()).collect();
                self.gate_and(gs).negate()
            }
            Formula::Implies(a, b) => {
                let gs = vec![self.ground(a, ctx), self.ground(b, ctx).negate()];
                self.gate_and(gs).negate()
            }
            Formula::Xor(fs) => {
                let gs: Vec<G> = fs.iter().map(|c| self.ground(c, ctx)).collect();
                self.gate_exactly_one(gs)
            }
            Formula::Forall(b) | Formula::Exists(b) => {
                let universal = matches!(f, Formula::Forall(_));
                let mut gs = Vec::with_capacity(self.n);
                for a in 0..self.n {
                    ctx.push(a);
                    let g = self.ground(b, ctx);
                    ctx.pop();
                    gs.push(if universal { g } else { g.negate() });
                }
                let g = self.gate_and(gs);
                if universal {
                    g
                } else {
                    g.negate()
                }
            }
        }
    }

    fn gate_and(&mut self, gs: Vec<G>) -> G {
        let mut lits = Vec::with_capacity(gs.len());
        for g in gs {
            match g {
                G::Const(false) => return G::Const(false),
                G::Const(true) => {}
                G::L(l) => lits.push(l),
            }
        }
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0] ^ 1 == w[1]) {
            return G::Const(false);
        }
        match lits.len() {
            0 => G::Const(true),
            1 => G::L(lits[0]),
            _ => {
                let v = lit(self.fresh(), true);
                for &l in &lits {
                    self.add_clause(vec![neg(v), l]);
                }
                let mut big: Vec<Lit> = lits.iter().map(|&l| neg(l)).collect();
                big.push(v);
                self.add_clause(big);
                G::L(v)
            }
        }
    }

    fn gate_exactly_one(&mut self, gs: Vec<G>) -> G {
        let trues = gs.iter().filter(|g| matches!(g, G::Const(true))).count();
        let lits: Vec<Lit> = gs.iter().filter_map(|g| if let G::L(l) = g { Some(*l) } else { None }).collect();
        match trues {
            0 => {}
            1 => return self.gate_and(lits.into_iter().map(|l| G::L(neg(l))).collect()),
            _ => return G::Const(false),
        }
        match lits.len() {
            0 => G::Const(false),
            1 => G::L(lits[0]),
            _ => {
                let v = lit(self.fresh(), true);
                let mut some: Vec<Lit> = lits.clone();
                some.push(neg(v));
                self.add_clause(some);
                for i in 0..lits.len() {
                    for j in i + 1..lits.len() {
                        self.add_clause(vec![neg(v), neg(lits[i]), neg(lits[j])]);
                    }
                    let mut only: Vec<Lit> = vec![v, neg(lits[i])];
                    only.extend(lits.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &l)| l));
                    self.add_clause(only);
                }
                G::L(v)
            }
        }
    }

    fn decode(&self, sig: &Signature, assign: &[i8]) -> Structure {
        let mut s = Structure::new(sig.clone(), self.n);
        for (id, p) in sig.preds().iter().enumerate() {
            if !p.is_stored() {
                continue;
            }
            for t in all_tuples(self.n, p.arity) {
                if assign[(self.cell(id, &t) >> 1) as usize] == 1 {
                    s.set(id, &t, true);
                }
            }
        }
        s
    }
}

/// One satisfying assignment of the grounding (`1` true, `-1` false).
fn solve_cdcl(g: &Grounding) -> Option<Vec<i8>> {
    use varisat::ExtendFormula;
    let mut solver = varisat::Solver::new();
    let to = |l: Lit| varisat::Lit::from_index((l >> 1) as usize, l & 1 == 0);
    for cl in &g.clauses {
        let lits: Vec<varisat::Lit> = cl.iter().map(|&l| to(l)).collect();
        solver.add_clause(&lits);
    }
    if !solver.solve().expect("in-memory solving cannot fail") {
        return None;
    }
    let mut assign = vec![-1i8; g.num_vars];
    for l in solver.model().unwrap_or_default() {
        if l.is_positive() && l.index() < assign.len() {
            assign[l.index()] = 1;
        }
    }
    Some(assign)
}

enum RunOutcome {
    Done,
    Limit,
}

/// Exhaustive DPLL with two watched literals per clause.
struct Dpll {
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    /// 1 true, -1 false, 0 unassigned.
    assign: Vec<i8>,
    trail: Vec<Lit>,
    /// Per decision level: trail length before the decision, the decision
    /// literal and whether its other branch was already explored.
    levels: Vec<(usize, Lit, bool)>,
    qhead: usize,
    order: Vec<u32>,
    rows: Vec<Vec<u32>>,
    units: Vec<Lit>,
    root_conflict: bool,
    decisions: u64,
    conflicts: u64,
}

impl Dpll {
    fn new(num_vars: usize, clauses: &[Vec<Lit>], order: Vec<u32>, rows: Vec<Vec<u32>>) -> Self {
        let mut s = Dpll {
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * num_vars],
            assign: vec![0; num_vars],
            trail: Vec::new(),
            levels: Vec::new(),
            qhead: 0,
            order,
            rows,
            units: Vec::new(),
            root_conflict: false,
            decisions: 0,
            conflicts: 0,
        };
        for cl in clauses {
            match cl.len() {
                0 => s.root_conflict = true,
                1 => s.units.push(cl[0]),
                _ => {
                    let i = s.clauses.len();
                    s.watches[neg(cl[0]) as usize].push(i);
                    s.watches[neg(cl[1]) as usize].push(i);
                    s.clauses.push(cl.clone());
                }
            }
        }
        s
    }

    fn value(&self, l: Lit) -> i8 {
        let v = self.assign[(l >> 1) as usize];
        if l & 1 == 1 {
            -v
        } else {
            v
        }
    }

    fn enqueue(&mut self, l: Lit) -> bool {
        match self.value(l) {
            1 => true,
            -1 => false,
            _ => {
                self.assign[(l >> 1) as usize] = if l & 1 == 1 { -1 } else { 1 };
                self.trail.push(l);
                true
            }
        }
    }

    /// Unit propagation; `false` on conflict.
    fn propagate(&mut self) -> bool {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            // Clauses watching the literal that `p` just falsified.
            let mut ws = std::mem::take(&mut self.watches[p as usize]);
            let mut i = 0;
            let mut ok = true;
            while i < ws.len() {
                let ci = ws[i];
                let false_lit = neg(p);
                let cl = &mut self.clauses[ci];
                if cl[0] == false_lit {
                    cl.swap(0, 1);
                }
                let first = cl[0];
                let first_val = {
                    let v = self.assign[(first >> 1) as usize];
                    if first & 1 == 1 {
                        -v
                    } else {
                        v
                    }
                };
                if first_val == 1 {
                    i += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..cl.len() {
                    let l = cl[k];
                    let v = self.assign[(l >> 1) as usize];
                    let lv = if l & 1 == 1 { -v } else { v };
                    if lv != -1 {
                        cl.swap(1, k);
                        let nw = neg(cl[1]) as usize;
                        self.watches[nw].push(ci);
                        ws.swap_remove(i);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                i += 1;
                if !self.enqueue(first) {
                    ok = false;
                    break;
                }
            }
            self.watches[p as usize].append(&mut ws);
            if !ok {
                return false;
            }
        }
        true
    }

    fn rows_sorted(&self) -> bool {
        for w in self.rows.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            for (x, y) in a.iter().zip(b) {
                let (vx, vy) = (self.assign[*x as usize], self.assign[*y as usize]);
                if vx == 0 || vy == 0 {
                    break;
                }
                if vx != vy {
                    if vx > vy {
                        return false;
                    }
                    break;
                }
            }
        }
        true
    }

    fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            let l = self.trail.pop().unwrap();
            self.assign[(l >> 1) as usize] = 0;
        }
        self.qhead = len;
    }

    /// Flips the deepest unexplored decision; `false` when none is left.
    fn backtrack(&mut self) -> bool {
        while let Some((len, d, flipped)) = self.levels.pop() {
            self.undo_to(len);
            if !flipped {
                self.levels.push((len, neg(d), true));
                self.enqueue(neg(d));
                return true;
            }
        }
        false
    }

    fn run(&mut self, limit: Option<u64>, on_model: &mut impl FnMut(&[i8]) -> bool) -> RunOutcome {
        if self.root_conflict {
            return RunOutcome::Done;
        }
        for l in std::mem::take(&mut self.units) {
            if !self.enqueue(l) {
                return RunOutcome::Done;
            }
        }
        let mut cursor = 0usize;
        loop {
            let ok = self.propagate() && self.rows_sorted();
            if !ok {
                self.conflicts += 1;
                if !self.backtrack() {
                    return RunOutcome::Done;
                }
                cursor = 0;
                continue;
            }
            while cursor < self.order.len() && self.assign[self.order[cursor] as usize] != 0 {
                cursor += 1;
            }
            let next = if cursor < self.order.len() {
                Some(self.order[cursor])
            } else {
                (0..self.assign.len() as u32).find(|&v| self.assign[v as usize] == 0)
            };
            match next {
                Some(v) => {
                    self.decisions += 1;
                    if limit.is_some_and(|l| self.decisions > l) {
                        return RunOutcome::Limit;
                    }
                    let d = lit(v, false);
                    self.levels.push((self.trail.len(), d, false));
                    self.enqueue(d);
                }
                None => {
                    if !on_model(&self.assign) || !self.backtrack() {
                        return RunOutcome::Done;
                    }
                    cursor = 0;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, parse_file};

    #[test]
    fn planted_two_element_model() {
        let (sig, f) = parse_file("sig { p/1, q/1 } trans { T } eq\n(exists p & forall (p -> exists (T & q)))").unwrap();
        assert!(find_model(&sig, &f, 1, Mode::Exactly).unwrap().is_some_and(|s| check_model(&s, &f)));
        let m = find_model(&sig, &f, 2, Mode::AtMost).unwrap().unwrap();
        assert!(check_model(&m, &f));
    }

    #[test]
    fn phi1_has_no_small_model() {
        let (sig, f) = parse_file("sig { } trans { T } eq\n(forall exists T & forall forall (T -> !=))").unwrap();
        assert_eq!(find_model(&sig, &f, 5, Mode::AtMost).unwrap(), None);
    }

    #[test]
    fn bound_and_sentence_errors() {
        let sig = crate::syntax::parse_header("sig { p/1 } trans { T } eq").unwrap();
        let f = parse("true", &sig).unwrap();
        assert_eq!(
            find_model(&sig, &f, 7, Mode::Exactly),
            Err(OracleError::BoundExceeded { requested: 7, bound: 6 })
        );
        let open = parse("p", &sig).unwrap();
        assert!(matches!(find_model(&sig, &open, 1, Mode::Exactly), Err(OracleError::NotASentence(_))));
    }

    #[test]
    fn counts_agree_with_naive_enumeration() {
        let texts = [
            "sig { p/1, r/2 } trans { T } eq\nforall (p -> exists (r & !T))",
            "sig { p/1 } trans { T } eq\n(forall forall (T | =) & exists That)",
            "sig { p/1 } trans { T } eq\nforall (p ^ That ^ exists (T & !=))",
            "sig { p/1 } trans { T, U } eq\nforall forall ((T | U) -> !(T & U))",
        ];
        for t in texts {
            let (sig, f) = parse_file(t).unwrap();
            for n in 1..=3 {
                let naive = naive_models(&sig, &f, n);
                assert_eq!(count_models(&sig, &f, n).unwrap(), naive.len() as u64, "{t} at {n}");
                let sb = find_model(&sig, &f, n, Mode::Exactly).unwrap();
                assert_eq!(sb.is_some(), !naive.is_empty());
            }
        }
    }

    #[test]
    fn check_model_rejects_ill_formed() {
        let sig = crate::syntax::parse_header("sig { } trans { T } eq").unwrap();
        let mut s = Structure::new(sig.clone(), 3);
        s.set(0, &[0, 1], true);
        s.set(0, &[1, 2], true);
        let t = parse("true", &sig).unwrap();
        assert!(!check_model(&s, &t));
        s.close_transitive();
        assert!(check_model(&s, &t));
    }
}
