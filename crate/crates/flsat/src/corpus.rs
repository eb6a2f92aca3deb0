//! Corpus formulas and their intended structures: the two introductory
//! examples, the tiling encodings with two and three transitive relations,
//! the grid and torus models of the two-relation encoding, and the
//! boustrophedon prefix of the three-relation encoding.
//!
//! Every emitted conjunct carries its display number so that callers can
//! select families (for instance the generation rules 44–52).

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::semantics::{eval_unchecked, Structure};
use crate::syntax::{Formula, PredId, Signature, SignatureError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("the tiling system has no initial tile")]
    MissingInitialTile,
    #[error("the finite variant needs both an initial and a final tile")]
    MissingTiles,
    #[error("the tiling system declares no tiles")]
    NoTiles,
    #[error("tile `{0}` is not declared")]
    UnknownTile(String),
    #[error(transparent)]
    Signature(#[from] SignatureError),
}

/// Tiles with horizontal and vertical adjacency constraints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingSystem {
    pub tiles: Vec<String>,
    #[serde(default)]
    pub h: Vec<(String, String)>,
    #[serde(default)]
    pub v: Vec<(String, String)>,
    #[serde(default)]
    pub initial: Option<String>,
    #[serde(default, rename = "final")]
    pub final_tile: Option<String>,
}

impl TilingSystem {
    /// One tile compatible with itself in both directions; it is also the
    /// initial and the final tile.
    pub fn single(name: &str) -> Self {
        let pair = (name.to_string(), name.to_string());
        TilingSystem {
            tiles: vec![name.to_string()],
            h: vec![pair.clone()],
            v: vec![pair],
            initial: Some(name.to_string()),
            final_tile: Some(name.to_string()),
        }
    }

    /// Checks that the system is non-empty and every named tile is declared.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.tiles.is_empty() {
            return Err(CorpusError::NoTiles);
        }
        let known: BTreeSet<&str> = self.tiles.iter().map(String::as_str).collect();
        let named = self
            .h
            .iter()
            .chain(&self.v)
            .flat_map(|(a, b)| [a, b])
            .chain(self.initial.iter())
            .chain(self.final_tile.iter());
        for t in named {
            if !known.contains(t.as_str()) {
                return Err(CorpusError::UnknownTile(t.clone()));
            }
        }
        Ok(())
    }

    fn successors<'a>(rel: &'a [(String, String)], tile: &'a str) -> impl Iterator<Item = &'a str> {
        rel.iter().filter(move |(a, _)| a == tile).map(|(_, b)| b.as_str())
    }

    fn predecessors<'a>(rel: &'a [(String, String)], tile: &'a str) -> impl Iterator<Item = &'a str> {
        rel.iter().filter(move |(_, b)| b == tile).map(|(a, _)| a.as_str())
    }
}

/// One emitted conjunct with its display number and rule name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Conjunct {
    pub number: u8,
    pub rule: &'static str,
    pub formula: Formula,
}

/// A conjunction of numbered conjuncts over its signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoding {
    pub sig: Signature,
    pub conjuncts: Vec<Conjunct>,
}

impl Encoding {
    pub fn formula(&self) -> Formula {
        Formula::and(self.conjuncts.iter().map(|c| c.formula.clone()).collect())
    }

    /// Number of conjuncts carrying display number `number`.
    pub fn count(&self, number: u8) -> usize {
        self.conjuncts.iter().filter(|c| c.number == number).count()
    }

    pub fn numbered(&self, number: u8) -> impl Iterator<Item = &Conjunct> {
        self.conjuncts.iter().filter(move |c| c.number == number)
    }
}

fn tile_preds(sig: &mut Signature, ts: &TilingSystem) -> Result<HashMap<String, PredId>, CorpusError> {
    ts.validate()?;
    ts.tiles.iter().map(|t| Ok((t.clone(), sig.add_ordinary(t, 1)?))).collect()
}

fn tile_or<'a>(tiles: &HashMap<String, PredId>, names: impl Iterator<Item = &'a str>) -> Formula {
    let set: BTreeSet<PredId> = names.map(|n| tiles[n]).collect();
    Formula::or(set.into_iter().map(Formula::atom).collect())
}

/// `∀(⋁C ∧ ⋀_{C≠D}(¬C ∨ ¬D) ∧ extra)`.
fn exactly_one_tile(ts: &TilingSystem, tiles: &HashMap<String, PredId>, extra: Option<Formula>) -> Formula {
    let ids: Vec<PredId> = ts.tiles.iter().map(|t| tiles[t]).collect();
    let mut parts = vec![Formula::or(ids.iter().map(|&c| Formula::atom(c)).collect())];
    for (k, &a) in ids.iter().enumerate() {
        for &b in &ids[k + 1..] {
            parts.push(Formula::or(vec![Formula::lit(a, false), Formula::lit(b, false)]));
        }
    }
    parts.extend(extra);
    Formula::forall(Formula::and(parts))
}

// ---------------------------------------------------------------------------
// Examples

/// A sentence together with its signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub sig: Signature,
    pub formula: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Examples {
    pub phi1: Example,
    pub phi2: Example,
}

fn example2_signature() -> Signature {
    let mut sig = Signature::new();
    for p in ["p0", "p1", "p2"] {
        sig.add_ordinary(p, 1).expect("fresh name");
    }
    sig.add_transitive("T1").expect("fresh name");
    sig.add_transitive("T2").expect("fresh name");
    sig
}

/// `φ₁ = ∀∃T₁ ∧ ∀∀(T₁ → ¬=)` and `φ₂`, the three-colour cycle over two
/// disjoint transitive relations. Both are satisfiable without finite models.
pub fn example_formulas() -> Examples {
    let mut sig1 = Signature::new();
    let t = sig1.add_transitive("T1").expect("fresh name");
    let eq = sig1.enable_equality();
    let phi1 = Formula::and(vec![
        Formula::forall(Formula::exists(Formula::atom(t))),
        Formula::forall_n(2, Formula::implies(Formula::atom(t), Formula::not(Formula::atom(eq)))),
    ]);

    let sig2 = example2_signature();
    let p = |i: usize| sig2.lookup(&format!("p{}", i % 3)).expect("declared");
    let (t1, t2) = (sig2.lookup("T1").expect("declared"), sig2.lookup("T2").expect("declared"));
    let either = || Formula::or(vec![Formula::atom(t1), Formula::atom(t2)]);
    let mut parts = vec![
        Formula::exists(Formula::atom(p(0))),
        Formula::forall(Formula::Xor((0..3).map(|i| Formula::atom(p(i))).collect())),
        Formula::forall_n(2, Formula::not(Formula::and(vec![Formula::atom(t1), Formula::atom(t2)]))),
    ];
    for i in 0..3 {
        parts.push(Formula::forall(Formula::implies(
            Formula::atom(p(i)),
            Formula::and(vec![
                Formula::exists(Formula::and(vec![Formula::atom(p(i + 1)), Formula::not(either())])),
                Formula::forall(Formula::implies(Formula::atom(p(i + 2)), either())),
            ]),
        )));
    }
    Examples { phi1: Example { sig: sig1, formula: phi1 }, phi2: Example { sig: sig2, formula: Formula::and(parts) } }
}

/// The first `n` naturals with `pᵢ(k)` iff `k mod 3 = i`,
/// `T₁ = {(a,b): a+1 < b}` and `T₂ = {(a,b): a > b}`.
pub fn example2_prefix(n: usize) -> Structure {
    let sig = example2_signature();
    let (t1, t2) = (sig.lookup("T1").expect("declared"), sig.lookup("T2").expect("declared"));
    let mut s = Structure::new(sig, n);
    for k in 0..n {
        s.set(k % 3, &[k], true);
        for b in 0..n {
            if k + 1 < b {
                s.set(t1, &[k, b], true);
            }
            if k > b {
                s.set(t2, &[k, b], true);
            }
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Two transitive relations: the grid encoding

/// Predicates of the two-relation grid formula.
#[derive(Clone, Debug)]
struct Grid2 {
    c: [[PredId; 4]; 4],
    t1: PredId,
    t2: PredId,
    eq: PredId,
}

impl Grid2 {
    fn signature() -> (Signature, Grid2) {
        let mut sig = Signature::new();
        let mut c = [[0; 4]; 4];
        for (i, row) in c.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = sig.add_ordinary(&format!("c{i}{j}"), 1).expect("fresh name");
            }
        }
        let t1 = sig.add_transitive("T1").expect("fresh name");
        let t2 = sig.add_transitive("T2").expect("fresh name");
        let eq = sig.enable_equality();
        (sig, Grid2 { c, t1, t2, eq })
    }

    fn addr(&self, i: i64, j: i64) -> PredId {
        self.c[i.rem_euclid(4) as usize][j.rem_euclid(4) as usize]
    }

    fn colour(&self, even: bool) -> PredId {
        if even {
            self.t1
        } else {
            self.t2
        }
    }

    /// `h_{i,j}`: the right neighbour.
    fn h(&self, i: i64, j: i64) -> Formula {
        Formula::and(vec![Formula::atom(self.colour(i.rem_euclid(2) == 0)), Formula::atom(self.addr(i + 1, j))])
    }

    /// `v_{i,j}`: the upper neighbour.
    fn v(&self, i: i64, j: i64) -> Formula {
        Formula::and(vec![Formula::atom(self.colour(j.rem_euclid(2) == 0)), Formula::atom(self.addr(i, j + 1))])
    }

    fn either(&self) -> Formula {
        Formula::or(vec![Formula::atom(self.t1), Formula::atom(self.t2)])
    }

    /// The address pairs of conjuncts 35–38: an element with address `x`
    /// joined to one with an address in `ys` by either relation is joined
    /// by both.
    fn crossing_rules() -> Vec<(u8, (i64, i64), [(i64, i64); 2])> {
        let mut out = Vec::new();
        for i in [0, 2] {
            out.push((35, (i, i), [(i, i - 1), (i - 1, i)]));
        }
        for i in [1, 3] {
            out.push((36, (i, i), [(i, i + 1), (i + 1, i)]));
        }
        for i in [0, 2] {
            out.push((37, (i, i + 1), [(i, i + 2), (i - 1, i + 1)]));
        }
        for i in [1, 3] {
            out.push((38, (i, i - 1), [(i, i), (i, i - 2)]));
        }
        out
    }

    fn conjuncts(&self) -> Vec<Conjunct> {
        let a = |i: i64, j: i64| Formula::atom(self.addr(i, j));
        let mut out = vec![
            Conjunct { number: 30, rule: "initial", formula: Formula::exists(a(0, 0)) },
            Conjunct {
                number: 31,
                rule: "partition",
                formula: Formula::forall(Formula::Xor(
                    (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| a(i, j)).collect(),
                )),
            },
        ];
        for i in 0..4 {
            for j in 0..4 {
                out.push(Conjunct {
                    number: 32,
                    rule: "clique",
                    formula: Formula::forall(Formula::implies(
                        a(i, j),
                        Formula::forall(Formula::implies(
                            Formula::and(vec![self.either(), a(i, j)]),
                            Formula::atom(self.eq),
                        )),
                    )),
                });
            }
        }
        for (number, rule, t, base) in [(33, "cliqueBlue", self.t1, [0, 2]), (34, "cliqueRed", self.t2, [1, 3])] {
            for i in base {
                for j in base {
                    let step = |from: (i64, i64), to: (i64, i64)| {
                        Formula::implies(
                            a(from.0, from.1),
                            Formula::exists(Formula::and(vec![Formula::atom(t), a(to.0, to.1)])),
                        )
                    };
                    let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                    let steps = (0..4).map(|k| step(corners[k], corners[(k + 1) % 4])).collect();
                    out.push(Conjunct { number, rule, formula: Formula::forall(Formula::and(steps)) });
                }
            }
        }
        for (number, x, ys) in Self::crossing_rules() {
            let both = Formula::and(vec![Formula::atom(self.t1), Formula::atom(self.t2)]);
            out.push(Conjunct {
                number,
                rule: "crossing",
                formula: Formula::forall(Formula::implies(
                    a(x.0, x.1),
                    Formula::forall(Formula::implies(
                        Formula::and(vec![self.either(), Formula::or(ys.iter().map(|&(i, j)| a(i, j)).collect())]),
                        both,
                    )),
                )),
            });
        }
        out
    }
}

/// The grid formula with two transitive relations (conjuncts 30–38).
pub fn phi_grid_2t() -> Encoding {
    let (sig, g) = Grid2::signature();
    Encoding { sig, conjuncts: g.conjuncts() }
}

/// `η_𝒞`: the grid formula plus the tile conjuncts 40–41. The system must
/// name an initial tile.
#[allow(non_snake_case)]
pub fn encode_2T(ts: &TilingSystem) -> Result<Encoding, CorpusError> {
    ts.validate()?;
    if ts.initial.is_none() {
        return Err(CorpusError::MissingInitialTile);
    }
    let (mut sig, g) = Grid2::signature();
    let tiles = tile_preds(&mut sig, ts)?;
    let mut conjuncts = g.conjuncts();
    conjuncts.push(Conjunct { number: 40, rule: "tilePartition", formula: exactly_one_tile(ts, &tiles, None) });
    for name in &ts.tiles {
        let hs = tile_or(&tiles, TilingSystem::successors(&ts.h, name));
        let vs = tile_or(&tiles, TilingSystem::successors(&ts.v, name));
        for i in 0..4 {
            for j in 0..4 {
                conjuncts.push(Conjunct {
                    number: 41,
                    rule: "tileAdjacent",
                    formula: Formula::forall(Formula::implies(
                        Formula::and(vec![Formula::atom(tiles[name]), Formula::atom(g.addr(i, j))]),
                        Formula::forall(Formula::and(vec![
                            Formula::implies(g.h(i, j), hs.clone()),
                            Formula::implies(g.v(i, j), vs.clone()),
                        ])),
                    )),
                });
            }
        }
    }
    Ok(Encoding { sig, conjuncts })
}

/// Closed form for the number of conjuncts of [`encode_2T`] with `tiles` tiles.
pub fn encode_2t_conjunct_count(tiles: usize) -> usize {
    // initial, partition, 16 clique bounds, 4 + 4 cliques, 8 crossing rules
    2 + 16 + 8 + 8 + 1 + 16 * tiles
}

fn build_grid2(width: usize, height: usize, wrap: bool) -> Structure {
    let (sig, g) = Grid2::signature();
    let n = width * height;
    let mut s = Structure::new(sig, n);
    let index = |x: i64, y: i64| -> Option<usize> {
        if wrap {
            Some(y.rem_euclid(height as i64) as usize * width + x.rem_euclid(width as i64) as usize)
        } else if (0..width as i64).contains(&x) && (0..height as i64).contains(&y) {
            Some(y as usize * width + x as usize)
        } else {
            None
        }
    };
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            s.set(g.addr(x, y), &[index(x, y).expect("in range")], true);
        }
    }
    // Blue blocks have even lower-left corners, red blocks odd ones.
    for (t, parity) in [(g.t1, 0), (g.t2, 1)] {
        for by in (parity - 2..height as i64).step_by(2) {
            for bx in (parity - 2..width as i64).step_by(2) {
                let cells: BTreeSet<usize> =
                    [(0, 0), (1, 0), (1, 1), (0, 1)].iter().filter_map(|(dx, dy)| index(bx + dx, by + dy)).collect();
                for &a in &cells {
                    for &b in &cells {
                        s.set(t, &[a, b], true);
                    }
                }
            }
        }
    }
    // Crossing links of the figure: T₁ arrows between neighbouring blue
    // blocks, drawn around the odd-odd points.
    let mut arrows = Vec::new();
    for y in -1..height as i64 + 1 {
        for x in -1..width as i64 + 1 {
            let out = match (x.rem_euclid(4), y.rem_euclid(4)) {
                (1, 1) | (3, 3) => true,
                (1, 3) | (3, 1) => false,
                _ => continue,
            };
            for (a, b) in [((x, y), (x + 1, y)), ((x, y), (x, y + 1)), ((x - 1, y), (x - 1, y + 1)), ((x, y - 1), (x + 1, y - 1))] {
                arrows.push(if out { (a, b) } else { (b, a) });
            }
        }
    }
    for ((ax, ay), (bx, by)) in arrows {
        if let (Some(a), Some(b)) = (index(ax, ay), index(bx, by)) {
            s.set(g.t1, &[a, b], true);
        }
    }
    s.close_transitive();
    s
}

/// The expansion of the `width × height` grid drawn in the figure:
/// addresses by coordinates mod 4, blue `T₁` and red `T₂` blocks, the drawn
/// `T₁` arrows between blue blocks, and transitive closure. Element
/// `(x, y)` has index `y·width + x`.
#[allow(non_snake_case)]
pub fn build_2T_grid(width: usize, height: usize) -> Structure {
    build_grid2(width, height, false)
}

/// The same expansion on the torus `ℤ_{4m} × ℤ_{4m}`, then closed under the
/// crossing conjuncts 35–38 and transitivity. The drawn arrows alone miss
/// the `T₂` links that conjunct 38 forces inside blue blocks.
#[allow(non_snake_case)]
pub fn build_2T_torus(m: usize) -> Structure {
    let mut s = build_grid2(4 * m, 4 * m, true);
    close_crossing(&mut s);
    s
}

/// Least extension of a structure over the grid signature that satisfies
/// the crossing conjuncts 35–38 and keeps both relations transitive.
pub fn close_crossing(s: &mut Structure) {
    let (_, g) = Grid2::signature();
    let n = s.size();
    let addr_of: Vec<Option<(i64, i64)>> = (0..n)
        .map(|e| (0..16).find(|&k| s.holds(g.c[k / 4][k % 4], &[e])).map(|k| ((k / 4) as i64, (k % 4) as i64)))
        .collect();
    let norm = |(i, j): (i64, i64)| Some((i.rem_euclid(4), j.rem_euclid(4)));
    let rules = Grid2::crossing_rules();
    s.close_transitive();
    loop {
        let mut changed = false;
        for (_, x, ys) in &rules {
            let ys: Vec<Option<(i64, i64)>> = ys.iter().map(|&y| norm(y)).collect();
            for a in (0..n).filter(|&a| addr_of[a] == norm(*x)) {
                for b in (0..n).filter(|&b| ys.contains(&addr_of[b])) {
                    let (r1, r2) = (s.holds(g.t1, &[a, b]), s.holds(g.t2, &[a, b]));
                    if r1 != r2 {
                        s.set(g.t1, &[a, b], true);
                        s.set(g.t2, &[a, b], true);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
        s.close_transitive();
    }
}

/// Outcome of checking the two clauses of the grid lemma on a grid.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GridLemmaReport {
    pub propagate_checked: usize,
    /// Interior elements lacking a right or upper neighbour.
    pub propagate_failures: Vec<usize>,
    pub confluence_checked: usize,
    /// Quadruples `(a, b, a', b')` violating confluence.
    pub confluence_failures: Vec<[usize; 4]>,
}

impl GridLemmaReport {
    pub fn is_clean(&self) -> bool {
        self.propagate_failures.is_empty() && self.confluence_failures.is_empty()
    }
}

/// Checks the neighbour clauses on a structure from [`build_2T_grid`]:
/// every interior element has an `h` and a `v` witness, and every
/// quadruple `c_{i,j}[a] ∧ h_{i,j}[a,b] ∧ v_{i,j}[a,a'] ∧ v_{i+1,j}[b,b']`
/// satisfies `h_{i,j+1}[a',b']`.
pub fn check_grid_lemma(s: &Structure, width: usize, height: usize) -> GridLemmaReport {
    let (_, g) = Grid2::signature();
    let n = s.size();
    let holds2 = |f: &Formula, a: usize, b: usize| eval_unchecked(s, f, &mut vec![a, b]);
    let addr: Vec<(i64, i64)> = (0..n)
        .map(|e| {
            let p = (0..16).find(|&k| s.holds(g.c[k / 4][k % 4], &[e])).expect("partitioned");
            ((p / 4) as i64, (p % 4) as i64)
        })
        .collect();
    let mut report = GridLemmaReport::default();
    for a in 0..n {
        let (i, j) = addr[a];
        let (h, v) = (g.h(i, j), g.v(i, j));
        if a % width + 1 < width && a / width + 1 < height {
            report.propagate_checked += 1;
            let right = (0..n).any(|b| holds2(&h, a, b));
            let up = (0..n).any(|b| holds2(&v, a, b));
            if !right || !up {
                report.propagate_failures.push(a);
            }
        }
        let (v_right, h_up) = (g.v(i + 1, j), g.h(i, j + 1));
        for b in (0..n).filter(|&b| holds2(&h, a, b)) {
            for a2 in (0..n).filter(|&x| holds2(&v, a, x)) {
                for b2 in (0..n).filter(|&x| holds2(&v_right, b, x)) {
                    report.confluence_checked += 1;
                    if !holds2(&h_up, a2, b2) {
                        report.confluence_failures.push([a, b, a2, b2]);
                    }
                }
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Three transitive relations: the boustrophedon encoding

/// `x mod 6` for possibly negative `x`.
pub fn mod6(x: i64) -> usize {
    x.rem_euclid(6) as usize
}

/// `x mod 3` for possibly negative `x`.
pub fn mod3(x: i64) -> usize {
    x.rem_euclid(3) as usize
}

/// `⌊x/2⌋`.
pub fn half(x: i64) -> i64 {
    x.div_euclid(2)
}

/// Primary and secondary colour of conjunct 46 (upward, even column) at row `j`.
pub fn colours_46(j: usize) -> (usize, usize) {
    let j = j as i64;
    (mod3(half(j)), mod3(half(j + 1) + 1))
}

/// Primary and secondary colour of conjunct 47 (downward, odd column) at row `j`.
pub fn colours_47(j: usize) -> (usize, usize) {
    let j = j as i64;
    (mod3(half(j) + 1), mod3(half(j + 1) - 1))
}

/// Primary and secondary colour of conjunct 49 (leftward, even row) at column `i`.
pub fn colours_49(i: usize) -> (usize, usize) {
    let i = i as i64;
    (mod3(half(i) - 1), mod3(half(i + 1)))
}

/// Primary and secondary colour of conjunct 50 (rightward, odd row) at column `i`.
pub fn colours_50(i: usize) -> (usize, usize) {
    let i = i as i64;
    (mod3(half(i) + 1), mod3(half(i + 1) - 1))
}

/// The printed colour table: for conjuncts 46, 47, 49 and 50 (in that
/// order), the primary and secondary colour for index 0..5.
pub const COLOUR_TABLE: [(u8, [(usize, usize); 6]); 4] = [
    (46, [(0, 1), (0, 2), (1, 2), (1, 0), (2, 0), (2, 1)]),
    (47, [(1, 2), (0, 2), (0, 1), (2, 1), (2, 0), (1, 0)]),
    (49, [(2, 0), (1, 0), (1, 2), (0, 2), (0, 1), (2, 1)]),
    (50, [(1, 2), (1, 0), (2, 0), (2, 1), (0, 1), (0, 2)]),
];

/// A row where the emitted colours differ from [`COLOUR_TABLE`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ColourMismatch {
    pub conjunct: u8,
    pub index: usize,
    pub emitted: (usize, usize),
    pub table: (usize, usize),
}

/// Emitted colours of conjuncts 46/47/49/50, read off the generation rules.
pub fn emitted_colours() -> Vec<(u8, usize, (usize, usize))> {
    generation_rules(false)
        .into_iter()
        .filter(|r| matches!(r.number, 46 | 47 | 49 | 50))
        .map(|r| {
            let index = match (r.number, r.premise) {
                (46 | 47, Some(Address::D(_, j))) => j,
                (49 | 50, Some(Address::C(i, _))) => i,
                _ => unreachable!("colour-table rules have an address premise"),
            };
            (r.number, index, (r.colours[0], r.colours[1]))
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Compares [`emitted_colours`] against [`COLOUR_TABLE`] row by row.
pub fn colour_table_mismatches() -> Vec<ColourMismatch> {
    let emitted = emitted_colours();
    let mut out = Vec::new();
    for (conjunct, rows) in COLOUR_TABLE {
        for (index, &table) in rows.iter().enumerate() {
            let got: BTreeSet<(usize, usize)> =
                emitted.iter().filter(|e| e.0 == conjunct && e.1 == index).map(|e| e.2).collect();
            for &emitted in &got {
                if emitted != table {
                    out.push(ColourMismatch { conjunct, index, emitted, table });
                }
            }
        }
    }
    out
}

/// Local address `c_{i,j}` (above the diagonal) or `d_{i,j}`, indices mod 6.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Address {
    C(usize, usize),
    D(usize, usize),
}

impl Address {
    fn c(i: i64, j: i64) -> Self {
        Address::C(mod6(i), mod6(j))
    }

    fn d(i: i64, j: i64) -> Self {
        Address::D(mod6(i), mod6(j))
    }

    /// The address of grid point `(x, y)`.
    pub fn of(x: usize, y: usize) -> Self {
        if x < y {
            Address::C(x % 6, y % 6)
        } else {
            Address::D(x % 6, y % 6)
        }
    }
}

/// Control predicates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Control {
    Bt,
    Lf,
    Dg,
    DgPlus,
    Rt,
}

impl Control {
    pub const ALL: [Control; 5] = [Control::Bt, Control::Lf, Control::Dg, Control::DgPlus, Control::Rt];

    /// Whether the interaction conjuncts (43, and 70 for `rt`) allow this
    /// control on an element with address `a`.
    fn allowed(self, a: Address) -> bool {
        match (self, a) {
            (Control::Bt, Address::D(_, 0)) => true,
            (Control::Lf, Address::C(0, _)) => true,
            (Control::Dg, Address::D(i, j)) => i == j,
            (Control::DgPlus, Address::C(i, j)) => j == (i + 1) % 6,
            (Control::Rt, Address::D(i, _)) => i % 2 == 0,
            _ => false,
        }
    }
}

/// Truth values of the control predicates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Controls {
    pub bt: bool,
    pub lf: bool,
    pub dg: bool,
    pub dg_plus: bool,
    pub rt: bool,
}

impl Controls {
    pub fn get(&self, c: Control) -> bool {
        match c {
            Control::Bt => self.bt,
            Control::Lf => self.lf,
            Control::Dg => self.dg,
            Control::DgPlus => self.dg_plus,
            Control::Rt => self.rt,
        }
    }

    pub fn set(&mut self, c: Control, value: bool) {
        match c {
            Control::Bt => self.bt = value,
            Control::Lf => self.lf = value,
            Control::Dg => self.dg = value,
            Control::DgPlus => self.dg_plus = value,
            Control::Rt => self.rt = value,
        }
    }

    /// The controls grid point `(x, y)` should carry.
    pub fn of(x: usize, y: usize) -> Self {
        Controls { bt: y == 0, lf: x == 0 && y > 0, dg: x == y, dg_plus: y == x + 1, rt: false }
    }
}

/// A generation rule `∀(premise → ∃(conclusion ∧ colours))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerationRule {
    pub number: u8,
    pub rule: &'static str,
    /// `None` for conjunct 45, whose premise is controls only.
    pub premise: Option<Address>,
    pub premise_controls: Vec<(Control, bool)>,
    pub conclusion: Address,
    pub conclusion_controls: Vec<(Control, bool)>,
    /// Primary colour first.
    pub colours: Vec<usize>,
}

/// The generation rules 45–52; with `finite`, conjunct 48's bottom step is
/// replaced by its `rt`-guarded version 73.
pub fn generation_rules(finite: bool) -> Vec<GenerationRule> {
    use Control::*;
    let mut out = vec![GenerationRule {
        number: 45,
        rule: "dGenC",
        premise: None,
        premise_controls: vec![(Bt, true), (Dg, true)],
        conclusion: Address::C(0, 1),
        conclusion_controls: vec![(DgPlus, true), (Lf, true)],
        colours: vec![1],
    }];
    for i in (0..6).step_by(2) {
        for j in 0..6 {
            let (p, s) = colours_46(j as usize);
            out.push(GenerationRule {
                number: 46,
                rule: "dGenA",
                premise: Some(Address::d(i, j)),
                premise_controls: vec![(Dg, false)],
                conclusion: Address::d(i, j + 1),
                conclusion_controls: vec![(Bt, false)],
                colours: vec![p, s],
            });
        }
    }
    for i in (1..6).step_by(2) {
        for j in 0..6 {
            let (p, s) = colours_47(j as usize);
            out.push(GenerationRule {
                number: 47,
                rule: "dGenB",
                premise: Some(Address::d(i, j)),
                premise_controls: vec![(Bt, false)],
                conclusion: Address::d(i, j - 1),
                conclusion_controls: vec![(Dg, false)],
                colours: vec![p, s],
            });
        }
    }
    for i in (1..6).step_by(2) {
        let mut premise_controls = vec![(Bt, true), (Dg, false)];
        if finite {
            premise_controls.push((Rt, false));
        }
        out.push(GenerationRule {
            number: if finite { 73 } else { 48 },
            rule: if finite { "dGenDRight" } else { "dGenD" },
            premise: Some(Address::d(i, 0)),
            premise_controls,
            conclusion: Address::d(i + 1, 0),
            conclusion_controls: vec![(Bt, true), (Dg, false)],
            colours: vec![0],
        });
    }
    for i in (0..6).step_by(2) {
        out.push(GenerationRule {
            number: 48,
            rule: "dGenE",
            premise: Some(Address::d(i, i)),
            premise_controls: vec![(Bt, false), (Dg, true)],
            conclusion: Address::c(i - 1, i),
            conclusion_controls: vec![(DgPlus, true), (Lf, false)],
            colours: vec![mod3(half(i) - 1), mod3(half(i))],
        });
    }
    for j in (0..6).step_by(2) {
        for i in 0..6 {
            let (p, s) = colours_49(i as usize);
            out.push(GenerationRule {
                number: 49,
                rule: "cGenB",
                premise: Some(Address::c(i, j)),
                premise_controls: vec![(Lf, false)],
                conclusion: Address::c(i - 1, j),
                conclusion_controls: vec![(DgPlus, false)],
                colours: vec![p, s],
            });
        }
    }
    for j in (1..6).step_by(2) {
        for i in 0..6 {
            let (p, s) = colours_50(i as usize);
            out.push(GenerationRule {
                number: 50,
                rule: "cGenA",
                premise: Some(Address::c(i, j)),
                premise_controls: vec![(DgPlus, false)],
                conclusion: Address::c(i + 1, j),
                conclusion_controls: vec![(Lf, false)],
                colours: vec![p, s],
            });
        }
    }
    for j in (0..6).step_by(2) {
        out.push(GenerationRule {
            number: 51,
            rule: "cGenD",
            premise: Some(Address::c(0, j)),
            premise_controls: vec![(Lf, true)],
            conclusion: Address::c(0, j + 1),
            conclusion_controls: vec![(Lf, true), (DgPlus, false)],
            colours: vec![1],
        });
    }
    for j in (1..6).step_by(2) {
        out.push(GenerationRule {
            number: 52,
            rule: "cGenE",
            premise: Some(Address::c(j - 1, j)),
            premise_controls: vec![(DgPlus, true)],
            conclusion: Address::d(j, j),
            conclusion_controls: vec![(Dg, true), (Bt, false)],
            colours: vec![mod3(half(j + 1)), mod3(half(j + 3))],
        });
    }
    out
}

/// A transfer formula `∀(from ∧ [dg] → ∀(to ∧ T_premise → T_conclusion))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransferRule {
    pub number: u8,
    pub rule: &'static str,
    pub from: Address,
    pub from_dg: bool,
    pub to: Address,
    pub premise: usize,
    pub conclusion: usize,
}

/// The transfer formulas 53–58.
pub fn transfer_rules() -> Vec<TransferRule> {
    let mut out = Vec::new();
    let rule = |number, rule, from, from_dg, to, premise, conclusion| TransferRule {
        number,
        rule,
        from,
        from_dg,
        to,
        premise,
        conclusion,
    };
    for i in (1..6).step_by(2) {
        for j in (0..6).step_by(2) {
            out.push(rule(53, "dTransfer1", Address::d(i, j), false, Address::d(i + 1, j), mod3(half(j) - 1), mod3(half(j))));
        }
    }
    for i in (0..6).step_by(2) {
        for j in (1..6).step_by(2) {
            out.push(rule(
                54,
                "dConvTransfer2",
                Address::d(i, j),
                false,
                Address::d(i + 1, j),
                mod3(half(j) - 1),
                mod3(half(j) + 1),
            ));
        }
    }
    for i in (0..6).step_by(2) {
        out.push(rule(55, "TransferDC1", Address::d(i, i), true, Address::c(i, i + 1), mod3(half(i)), mod3(half(i) + 1)));
    }
    for i in (1..6).step_by(2) {
        out.push(rule(56, "TransferDC2", Address::d(i, i), true, Address::c(i, i + 1), mod3(half(i)), mod3(half(i) - 1)));
    }
    for i in (0..6).step_by(2) {
        for j in (0..6).step_by(2) {
            out.push(rule(57, "cTransfer1", Address::c(i, j), false, Address::c(i, j + 1), mod3(half(i)), mod3(half(i) + 1)));
        }
    }
    for i in (1..6).step_by(2) {
        for j in (1..6).step_by(2) {
            out.push(rule(58, "cTransfer2", Address::c(i, j), false, Address::c(i, j + 1), mod3(half(i)), mod3(half(i) - 1)));
        }
    }
    out
}

/// A control formula pair `∀(from ∧ ±P → ∀(T_⋄ ∧ to → ±P))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ControlRule {
    pub number: u8,
    pub rule: &'static str,
    pub from: Address,
    pub to: Address,
    pub control: Control,
}

/// The control formulas 59–62, plus 71 with `finite`.
pub fn control_rules(finite: bool) -> Vec<ControlRule> {
    let mut out = Vec::new();
    for i in 0..6 {
        out.push(ControlRule {
            number: 59,
            rule: "dControl1",
            from: Address::d(i, i),
            to: Address::d(i + 1, i + 1),
            control: Control::Dg,
        });
    }
    for i in 0..6 {
        out.push(ControlRule {
            number: 60,
            rule: "dControl2",
            from: Address::d(i, 0),
            to: Address::d(i + 1, 0),
            control: Control::Bt,
        });
    }
    for j in 0..6 {
        out.push(ControlRule {
            number: 61,
            rule: "cControl1",
            from: Address::c(j - 1, j),
            to: Address::c(j, j + 1),
            control: Control::DgPlus,
        });
    }
    for j in 0..6 {
        out.push(ControlRule {
            number: 62,
            rule: "cControl2",
            from: Address::c(0, j),
            to: Address::c(0, j + 1),
            control: Control::Lf,
        });
    }
    if finite {
        for i in 0..6 {
            for j in 0..6 {
                out.push(ControlRule {
                    number: 71,
                    rule: "ControlRight",
                    from: Address::d(i, j),
                    to: Address::d(i, j - 1),
                    control: Control::Rt,
                });
            }
        }
    }
    out
}

/// Predicates of the three-relation grid formula.
#[derive(Clone, Debug)]
struct Grid3 {
    c: [[PredId; 6]; 6],
    d: [[PredId; 6]; 6],
    bt: PredId,
    lf: PredId,
    dg: PredId,
    dg_plus: PredId,
    rt: Option<PredId>,
    t: [PredId; 3],
}

impl Grid3 {
    fn signature(finite: bool) -> (Signature, Grid3) {
        let mut sig = Signature::new();
        let mut table = |prefix: char| {
            let mut out = [[0; 6]; 6];
            for (i, row) in out.iter_mut().enumerate() {
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = sig.add_ordinary(&format!("{prefix}{i}{j}"), 1).expect("fresh name");
                }
            }
            out
        };
        let c = table('c');
        let d = table('d');
        let mut unary = |name: &str| sig.add_ordinary(name, 1).expect("fresh name");
        let (bt, lf, dg, dg_plus) = (unary("bt"), unary("lf"), unary("dg"), unary("dgp"));
        let rt = finite.then(|| unary("rt"));
        let t = ["T0", "T1", "T2"].map(|n| sig.add_transitive(n).expect("fresh name"));
        (sig, Grid3 { c, d, bt, lf, dg, dg_plus, rt, t })
    }

    fn addr_pred(&self, a: Address) -> PredId {
        match a {
            Address::C(i, j) => self.c[i][j],
            Address::D(i, j) => self.d[i][j],
        }
    }

    fn addr(&self, a: Address) -> Formula {
        Formula::atom(self.addr_pred(a))
    }

    fn control(&self, c: Control) -> PredId {
        match c {
            Control::Bt => self.bt,
            Control::Lf => self.lf,
            Control::Dg => self.dg,
            Control::DgPlus => self.dg_plus,
            Control::Rt => self.rt.expect("rt belongs to the finite variant"),
        }
    }

    fn lits(&self, cs: &[(Control, bool)]) -> impl Iterator<Item = Formula> + '_ {
        cs.iter().map(|&(c, v)| Formula::lit(self.control(c), v)).collect::<Vec<_>>().into_iter()
    }

    /// `T_⋄ = T₀ ∨ T₁ ∨ T₂`.
    fn any_colour(&self) -> Formula {
        Formula::or(self.t.iter().map(|&t| Formula::atom(t)).collect())
    }

    fn conjuncts(&self, finite: bool) -> Vec<Conjunct> {
        let all_addresses: Vec<Address> = (0..6)
            .flat_map(|i| (0..6).map(move |j| Address::C(i, j)))
            .chain((0..6).flat_map(|i| (0..6).map(move |j| Address::D(i, j))))
            .collect();
        let mut out = vec![Conjunct {
            number: 42,
            rule: "partition",
            formula: Formula::forall(Formula::Xor(all_addresses.iter().map(|&a| self.addr(a)).collect())),
        }];
        let interact = |ctrl: PredId, addrs: Vec<Address>| Conjunct {
            number: 43,
            rule: "interact",
            formula: Formula::forall(Formula::implies(
                Formula::atom(ctrl),
                Formula::or(addrs.into_iter().map(|a| self.addr(a)).collect()),
            )),
        };
        out.push(interact(self.bt, (0..6).map(|i| Address::D(i, 0)).collect()));
        out.push(interact(self.lf, (0..6).map(|j| Address::C(0, j)).collect()));
        out.push(interact(self.dg, (0..6).map(|i| Address::D(i, i)).collect()));
        out.push(interact(self.dg_plus, (0..6).map(|j| Address::C(j, (j + 1) % 6)).collect()));
        if let Some(rt) = self.rt {
            out.push(Conjunct {
                number: 70,
                rule: "interactRight",
                formula: Formula::forall(Formula::implies(
                    Formula::atom(rt),
                    Formula::or(
                        (0..6).step_by(2).flat_map(|i| (0..6).map(move |j| Address::D(i, j))).map(|a| self.addr(a)).collect(),
                    ),
                )),
            });
        }
        let mut initial = vec![self.addr(Address::D(0, 0)), Formula::atom(self.dg), Formula::atom(self.bt)];
        if let Some(rt) = self.rt {
            initial.push(Formula::lit(rt, false));
        }
        out.push(Conjunct {
            number: if finite { 72 } else { 44 },
            rule: if finite { "initialRight" } else { "initial" },
            formula: Formula::exists(Formula::and(initial)),
        });
        for r in generation_rules(finite) {
            let premise: Vec<Formula> = r.premise.map(|a| self.addr(a)).into_iter().chain(self.lits(&r.premise_controls)).collect();
            let conclusion: Vec<Formula> = std::iter::once(self.addr(r.conclusion))
                .chain(self.lits(&r.conclusion_controls))
                .chain(r.colours.iter().map(|&k| Formula::atom(self.t[k])))
                .collect();
            out.push(Conjunct {
                number: r.number,
                rule: r.rule,
                formula: Formula::forall(Formula::implies(
                    Formula::and(premise),
                    Formula::exists(Formula::and(conclusion)),
                )),
            });
        }
        for r in transfer_rules() {
            let mut from = vec![self.addr(r.from)];
            if r.from_dg {
                from.push(Formula::atom(self.dg));
            }
            out.push(Conjunct {
                number: r.number,
                rule: r.rule,
                formula: Formula::forall(Formula::implies(
                    Formula::and(from),
                    Formula::forall(Formula::implies(
                        Formula::and(vec![self.addr(r.to), Formula::atom(self.t[r.premise])]),
                        Formula::atom(self.t[r.conclusion]),
                    )),
                )),
            });
        }
        for r in control_rules(finite) {
            for sign in [true, false] {
                let p = self.control(r.control);
                out.push(Conjunct {
                    number: r.number,
                    rule: r.rule,
                    formula: Formula::forall(Formula::implies(
                        Formula::and(vec![self.addr(r.from), Formula::lit(p, sign)]),
                        Formula::forall(Formula::implies(
                            Formula::and(vec![self.any_colour(), self.addr(r.to)]),
                            Formula::lit(p, sign),
                        )),
                    )),
                });
            }
        }
        out.sort_by_key(|c| c.number);
        out
    }
}

/// The three-relation grid formula (conjuncts 42–62), or its finite-square
/// variant (with 70–73 in place of 44 and the bottom step of 48).
pub fn phi_grid_3t(finite: bool) -> Encoding {
    let (sig, g) = Grid3::signature(finite);
    Encoding { sig, conjuncts: g.conjuncts(finite) }
}

fn encode_3t_with(ts: &TilingSystem, finite: bool) -> Result<Encoding, CorpusError> {
    ts.validate()?;
    let initial = match (&ts.initial, &ts.final_tile, finite) {
        (Some(i), Some(_), true) | (Some(i), _, false) => i.clone(),
        (_, _, true) => return Err(CorpusError::MissingTiles),
        (None, _, false) => return Err(CorpusError::MissingInitialTile),
    };
    let (mut sig, g) = Grid3::signature(finite);
    let tiles = tile_preds(&mut sig, ts)?;
    let mut conjuncts = g.conjuncts(finite);
    let start = Formula::implies(
        Formula::and(vec![Formula::atom(g.lf), Formula::atom(g.dg)]),
        Formula::atom(tiles[&initial]),
    );
    conjuncts.push(Conjunct { number: 63, rule: "tilePartition", formula: exactly_one_tile(ts, &tiles, Some(start)) });
    let any = g.any_colour();
    let either = |i: i64, j: i64| Formula::or(vec![g.addr(Address::c(i, j)), g.addr(Address::d(i, j))]);
    let guard = |tile: PredId, at: Formula, to: Formula, allowed: Formula| {
        Formula::forall(Formula::implies(
            Formula::and(vec![Formula::atom(tile), at]),
            Formula::forall(Formula::implies(Formula::and(vec![any.clone(), to]), allowed)),
        ))
    };
    for name in &ts.tiles {
        let tile = tiles[name];
        let h_succ = tile_or(&tiles, TilingSystem::successors(&ts.h, name));
        let h_pred = tile_or(&tiles, TilingSystem::predecessors(&ts.h, name));
        let v_succ = tile_or(&tiles, TilingSystem::successors(&ts.v, name));
        let v_pred = tile_or(&tiles, TilingSystem::predecessors(&ts.v, name));
        let mut push = |number, rule, formula| conjuncts.push(Conjunct { number, rule, formula });
        for i in 0..6 {
            for j in 0..6 {
                push(64, "horD", guard(tile, g.addr(Address::d(i, j)), g.addr(Address::d(i + 1, j)), h_succ.clone()));
            }
        }
        for i in 0..6 {
            for j in (1..6).step_by(2) {
                push(65, "horCRight", guard(tile, g.addr(Address::c(i, j)), either(i + 1, j), h_succ.clone()));
            }
        }
        for i in 0..6 {
            for j in (0..6).step_by(2) {
                push(66, "horCLeft", guard(tile, either(i, j), g.addr(Address::c(i - 1, j)), h_pred.clone()));
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                push(67, "verC", guard(tile, either(i, j), g.addr(Address::c(i, j + 1)), v_succ.clone()));
            }
        }
        for i in (0..6).step_by(2) {
            for j in 0..6 {
                push(68, "verDup", guard(tile, g.addr(Address::d(i, j)), g.addr(Address::d(i, j + 1)), v_succ.clone()));
            }
        }
        for i in (1..6).step_by(2) {
            for j in 0..6 {
                push(69, "verDdown", guard(tile, g.addr(Address::d(i, j)), g.addr(Address::d(i, j - 1)), v_pred.clone()));
            }
        }
    }
    if finite {
        let final_tile = tiles[ts.final_tile.as_ref().expect("checked above")];
        conjuncts.push(Conjunct {
            number: 74,
            rule: "final",
            formula: Formula::forall(Formula::implies(
                Formula::and(vec![Formula::atom(g.dg), Formula::atom(g.rt.expect("finite"))]),
                Formula::atom(final_tile),
            )),
        });
    }
    Ok(Encoding { sig, conjuncts })
}

/// `η_𝒞` for three transitive relations: the grid formula plus the tile
/// conjuncts 63–69. The system must name an initial tile.
#[allow(non_snake_case)]
pub fn encode_3T(ts: &TilingSystem) -> Result<Encoding, CorpusError> {
    encode_3t_with(ts, false)
}

/// The finite-square variant with the final-tile conjunct 74. The system
/// must name both an initial and a final tile.
#[allow(non_snake_case)]
pub fn encode_3T_finite(ts: &TilingSystem) -> Result<Encoding, CorpusError> {
    encode_3t_with(ts, true)
}

/// One step of the boustrophedon with the predicates its coordinates demand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BoustrophedonState {
    pub t: usize,
    pub coords: (usize, usize),
    pub address: Address,
    pub controls: Controls,
}

/// The first `steps` points of the boustrophedon: shell `k` runs up column
/// `k` and left along row `k` when `k` is even, right along row `k` and
/// down column `k` when `k` is odd.
pub fn boustrophedon_coords(steps: usize) -> Vec<(usize, usize)> {
    let mut out = vec![(0, 0)];
    let mut k = 1;
    while out.len() < steps {
        if k % 2 == 1 {
            out.extend((0..=k).map(|x| (x, k)));
            out.extend((0..k).rev().map(|y| (k, y)));
        } else {
            out.extend((0..=k).map(|y| (k, y)));
            out.extend((0..k).rev().map(|x| (x, k)));
        }
        k += 1;
    }
    out.truncate(steps);
    out
}

/// The boustrophedon states with the addresses and controls their
/// coordinates demand.
pub fn boustrophedon(steps: usize) -> Vec<BoustrophedonState> {
    boustrophedon_coords(steps)
        .into_iter()
        .enumerate()
        .map(|(t, (x, y))| BoustrophedonState { t, coords: (x, y), address: Address::of(x, y), controls: Controls::of(x, y) })
        .collect()
}

/// Colour edges of a growing prefix, kept closed under transitivity and the
/// transfer formulas.
struct ColourGraph {
    cap: usize,
    bits: Vec<u8>,
    queue: Vec<(usize, usize, usize)>,
}

impl ColourGraph {
    fn new(cap: usize) -> Self {
        ColourGraph { cap, bits: vec![0; cap * cap], queue: Vec::new() }
    }

    fn has(&self, k: usize, x: usize, y: usize) -> bool {
        self.bits[x * self.cap + y] >> k & 1 == 1
    }

    fn any(&self, x: usize, y: usize) -> bool {
        self.bits[x * self.cap + y] != 0
    }

    fn add(&mut self, k: usize, x: usize, y: usize) {
        if !self.has(k, x, y) {
            self.bits[x * self.cap + y] |= 1 << k;
            self.queue.push((k, x, y));
        }
    }

    /// Processes queued edges among the first `n` elements.
    fn saturate(&mut self, n: usize, addr: &[Address], ctrl: &[Controls], transfers: &[TransferRule]) {
        while let Some((k, x, y)) = self.queue.pop() {
            for r in transfers {
                if r.premise == k && r.from == addr[x] && r.to == addr[y] && (!r.from_dg || ctrl[x].dg) {
                    self.add(r.conclusion, x, y);
                }
            }
            for u in 0..n {
                if self.has(k, u, x) {
                    self.add(k, u, y);
                }
            }
            for v in 0..n {
                if self.has(k, y, v) {
                    self.add(k, x, v);
                }
            }
        }
    }
}

/// Verification outcome for a boustrophedon prefix.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BoustrophedonReport {
    pub steps: usize,
    /// Steps where not exactly one generation rule applies.
    pub generation_failures: Vec<usize>,
    /// Controls of the new element fixed by no conjunct (set to false).
    pub unforced_controls: Vec<(usize, Control)>,
    /// Steps whose address differs from the coordinates' (P1).
    pub p1_failures: Vec<usize>,
    /// Steps whose controls differ from the coordinates' (P2).
    pub p2_failures: Vec<usize>,
    pub p3_checked: usize,
    /// Neighbour pairs required by (H1)/(H2) but not joined by any colour (P3).
    pub p3_failures: Vec<((usize, usize), (usize, usize))>,
    pub coordinates_distinct: bool,
    /// `(conjunct, element)` pairs where a universal conjunct fails.
    pub universal_failures: Vec<(u8, usize)>,
    /// `(conjunct, element)` pairs whose generation witness is not the next step.
    pub witness_failures: Vec<(u8, usize)>,
    /// Elements whose generation witness lies beyond the prefix.
    pub unchecked: usize,
}

impl BoustrophedonReport {
    pub fn is_clean(&self) -> bool {
        self.generation_failures.is_empty()
            && self.unforced_controls.is_empty()
            && self.p1_failures.is_empty()
            && self.p2_failures.is_empty()
            && self.p3_failures.is_empty()
            && self.coordinates_distinct
            && self.universal_failures.is_empty()
            && self.witness_failures.is_empty()
    }
}

/// Runs the generation rules from the initial element for `steps` elements.
/// Each new element receives the conclusion of the unique applicable rule
/// and the rule's colours to its predecessor; colour edges are then closed
/// under transitivity and the transfer formulas, and the remaining controls
/// of the new element are read off the interaction and control formulas.
fn simulate(steps: usize) -> (Vec<Address>, Vec<Controls>, ColourGraph, BoustrophedonReport) {
    let gens = generation_rules(false);
    let transfers = transfer_rules();
    let controls = control_rules(false);
    let mut report = BoustrophedonReport { steps, ..Default::default() };
    let mut addr = vec![Address::D(0, 0)];
    let mut ctrl = vec![Controls { bt: true, dg: true, ..Default::default() }];
    let mut graph = ColourGraph::new(steps);
    for t in 0..steps.saturating_sub(1) {
        let applicable: Vec<&GenerationRule> = gens
            .iter()
            .filter(|r| {
                r.premise.is_none_or(|a| a == addr[t]) && r.premise_controls.iter().all(|&(c, v)| ctrl[t].get(c) == v)
            })
            .collect();
        let [rule] = applicable[..] else {
            report.generation_failures.push(t);
            break;
        };
        let z = t + 1;
        addr.push(rule.conclusion);
        let mut fixed: HashMap<Control, bool> = rule.conclusion_controls.iter().copied().collect();
        ctrl.push(Controls::default());
        for &k in &rule.colours {
            graph.add(k, t, z);
        }
        graph.saturate(z + 1, &addr, &ctrl, &transfers);
        for c in Control::ALL.into_iter().filter(|&c| c != Control::Rt) {
            let mut seen = BTreeSet::new();
            if !c.allowed(addr[z]) {
                seen.insert(false);
            }
            for r in controls.iter().filter(|r| r.control == c && r.to == addr[z]) {
                for x in (0..z).filter(|&x| addr[x] == r.from && graph.any(x, z)) {
                    seen.insert(ctrl[x].get(c));
                }
            }
            if let Some(&v) = fixed.get(&c) {
                seen.insert(v);
            }
            match seen.len() {
                0 => {
                    report.unforced_controls.push((z, c));
                    fixed.insert(c, false);
                }
                1 => {
                    fixed.insert(c, *seen.iter().next().expect("one value"));
                }
                _ => {
                    report.generation_failures.push(z);
                    fixed.insert(c, false);
                }
            }
        }
        let mut cz = Controls::default();
        for (c, v) in fixed {
            cz.set(c, v);
        }
        ctrl[z] = cz;
    }
    (addr, ctrl, graph, report)
}

fn prefix_structure(addr: &[Address], ctrl: &[Controls], graph: &ColourGraph) -> Structure {
    let (sig, g) = Grid3::signature(false);
    let n = addr.len();
    let mut s = Structure::new(sig, n);
    for x in 0..n {
        s.set(g.addr_pred(addr[x]), &[x], true);
        for c in Control::ALL.into_iter().filter(|&c| c != Control::Rt) {
            if ctrl[x].get(c) {
                s.set(g.control(c), &[x], true);
            }
        }
        for y in 0..n {
            for k in 0..3 {
                if graph.has(k, x, y) {
                    s.set(g.t[k], &[x, y], true);
                }
            }
        }
    }
    s
}

/// The structure generated by the rules of [`phi_grid_3t`] along the first
/// `steps` boustrophedon steps: element `t` is the `t`-th generated witness.
#[allow(non_snake_case)]
pub fn intended_3T_prefix(steps: usize) -> Structure {
    let (addr, ctrl, graph, _) = simulate(steps.max(1));
    prefix_structure(&addr, &ctrl, &graph)
}

/// Generates the prefix and checks it against the boustrophedon: addresses
/// (P1), controls (P2), the neighbour links (H1)/(H2) (P3), distinct
/// coordinates, the universal conjuncts 42, 43 and 53–62, and that every
/// generation existential is witnessed by the next step.
pub fn verify_3t_prefix(steps: usize) -> (Structure, BoustrophedonReport) {
    let steps = steps.max(1);
    let (addr, ctrl, graph, mut report) = simulate(steps);
    let s = prefix_structure(&addr, &ctrl, &graph);
    let n = addr.len();
    let states = boustrophedon(steps);
    for (t, st) in states.iter().enumerate().take(n) {
        if addr[t] != st.address {
            report.p1_failures.push(t);
        }
        if ctrl[t] != st.controls {
            report.p2_failures.push(t);
        }
    }
    let at: HashMap<(usize, usize), usize> = states.iter().take(n).map(|st| (st.coords, st.t)).collect();
    report.coordinates_distinct = at.len() == states.len();
    for st in &states {
        let (x, y) = st.coords;
        let mut links = Vec::new();
        if x >= y {
            links.push(((x, y), (x + 1, y)));
            // On the diagonal the transfer rules link upwards in every column.
            links.push(if x % 2 == 0 || x == y { ((x, y), (x, y + 1)) } else { ((x, y + 1), (x, y)) });
        } else {
            links.push(((x, y), (x, y + 1)));
            links.push(if y % 2 == 0 { ((x + 1, y), (x, y)) } else { ((x, y), (x + 1, y)) });
        }
        for (a, b) in links {
            if let (Some(&p), Some(&q)) = (at.get(&a), at.get(&b)) {
                report.p3_checked += 1;
                if !graph.any(p, q) {
                    report.p3_failures.push((a, b));
                }
            }
        }
    }
    let enc = phi_grid_3t(false);
    for c in &enc.conjuncts {
        match (c.number, &c.formula) {
            (44, f) => {
                if !eval_unchecked(&s, f, &mut Vec::new()) {
                    report.universal_failures.push((44, 0));
                }
            }
            (45..=52, Formula::Forall(body)) => {
                let Formula::Implies(premise, exist) = body.as_ref() else { unreachable!("generation shape") };
                let Formula::Exists(witness) = exist.as_ref() else { unreachable!("generation shape") };
                for x in 0..n {
                    if !eval_unchecked(&s, premise, &mut vec![x]) {
                        continue;
                    }
                    if x + 1 == n {
                        report.unchecked += 1;
                    } else if !eval_unchecked(&s, witness, &mut vec![x, x + 1]) {
                        report.witness_failures.push((c.number, x));
                    }
                }
            }
            (_, Formula::Forall(body)) => {
                for x in 0..n {
                    if !eval_unchecked(&s, body, &mut vec![x]) {
                        report.universal_failures.push((c.number, x));
                    }
                }
            }
            _ => unreachable!("every grid conjunct is universal or initial"),
        }
    }
    (s, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::check_model;
    use crate::semantics::check_wellformed;
    use crate::syntax::{parse, print, validate};

    #[test]
    fn examples_have_the_stated_shape() {
        let ex = example_formulas();
        assert_eq!(validate(&ex.phi1.sig, &ex.phi1.formula, 0).unwrap().variable_bound, 2);
        assert!(ex.phi1.sig.equality().is_some());
        assert_eq!(ex.phi2.sig.transitive().len(), 2);
        assert!(ex.phi2.sig.equality().is_none());
        let xor = ex.phi2.formula.conjuncts()[1].clone();
        assert!(matches!(xor, Formula::Forall(b) if matches!(b.as_ref(), Formula::Xor(v) if v.len() == 3)));
    }

    #[test]
    fn example2_prefix_is_well_formed() {
        for n in 1..=50 {
            assert!(check_wellformed(&example2_prefix(n)).is_empty(), "n = {n}");
        }
        let one = example2_prefix(1);
        assert!(one.holds(0, &[0]));
    }

    #[test]
    fn torus_models_the_one_tile_system() {
        let ts = TilingSystem::single("w");
        let enc = encode_2T(&ts).unwrap();
        let torus = build_2T_torus(1);
        assert!(check_model(&torus, &phi_grid_2t().formula()));
        let mut s = torus.extend_signature(enc.sig.clone());
        let w = enc.sig.lookup("w").unwrap();
        for e in 0..s.size() {
            s.set(w, &[e], true);
        }
        assert!(check_model(&s, &enc.formula()));
    }

    #[test]
    fn larger_torus_joins_equal_addresses() {
        // Closing under the crossing conjuncts links blocks four apart, which
        // only coincide when m = 1.
        let s = build_2T_torus(2);
        let failing: BTreeSet<u8> = phi_grid_2t()
            .conjuncts
            .iter()
            .filter(|c| !eval_unchecked(&s, &c.formula, &mut Vec::new()))
            .map(|c| c.number)
            .collect();
        assert_eq!(failing, BTreeSet::from([32]));
    }

    #[test]
    fn drawn_grid_fails_only_border_and_crossing_conjuncts() {
        let s = build_2T_grid(8, 8);
        let failing: BTreeSet<u8> = phi_grid_2t()
            .conjuncts
            .iter()
            .filter(|c| !eval_unchecked(&s, &c.formula, &mut Vec::new()))
            .map(|c| c.number)
            .collect();
        // Red blocks are cut at the border (34) and the drawn arrows omit
        // the links the crossing conjuncts force (35–38).
        assert_eq!(failing, BTreeSet::from([34, 35, 36, 37, 38]));
    }

    #[test]
    fn grid_satisfies_the_neighbour_clauses() {
        let s = build_2T_grid(8, 8);
        let report = check_grid_lemma(&s, 8, 8);
        assert!(report.is_clean(), "{report:?}");
        assert_eq!(report.propagate_checked, 49);
        assert_eq!(report.confluence_checked, 49);
    }

    #[test]
    fn conjunct_count_matches_closed_form() {
        for k in 1..4 {
            let tiles: Vec<String> = (0..k).map(|i| format!("t{i}")).collect();
            let ts = TilingSystem { tiles: tiles.clone(), h: vec![], v: vec![], initial: Some(tiles[0].clone()), final_tile: None };
            assert_eq!(encode_2T(&ts).unwrap().conjuncts.len(), encode_2t_conjunct_count(k));
        }
    }

    #[test]
    fn missing_tiles_are_reported() {
        let mut ts = TilingSystem::single("w");
        ts.final_tile = None;
        assert!(encode_3T(&ts).is_ok());
        assert_eq!(encode_3T_finite(&ts).unwrap_err(), CorpusError::MissingTiles);
        ts.initial = None;
        assert_eq!(encode_2T(&ts).unwrap_err(), CorpusError::MissingInitialTile);
        ts.h.push(("w".into(), "x".into()));
        assert_eq!(encode_3T(&ts).unwrap_err(), CorpusError::UnknownTile("x".into()));
    }

    #[test]
    fn index_helpers_use_floor_and_euclidean_mod() {
        assert_eq!(mod6(-1), 5);
        assert_eq!(mod3(-1), 2);
        assert_eq!(half(5), 2);
        assert_eq!(half(-1), -1);
    }

    #[test]
    fn colours_agree_with_the_table_except_recorded_rows() {
        for j in 0..6 {
            assert_eq!(colours_46(j), COLOUR_TABLE[0].1[j]);
            assert_eq!(colours_50(j), COLOUR_TABLE[3].1[j]);
        }
        let rows: Vec<(u8, usize)> = colour_table_mismatches().iter().map(|m| (m.conjunct, m.index)).collect();
        assert_eq!(rows, vec![(47, 1), (47, 2), (47, 4), (47, 5), (49, 1), (49, 2), (49, 4), (49, 5)]);
    }

    #[test]
    fn encode_3t_round_trips_and_validates() {
        let enc = encode_3T(&TilingSystem::single("w")).unwrap();
        let f = enc.formula();
        assert_eq!(validate(&enc.sig, &f, 0).unwrap().variable_bound, 2);
        assert_eq!(enc.sig.transitive().len(), 3);
        assert!(enc.sig.equality().is_none());
        let back = parse(&print(&f, &enc.sig), &enc.sig).unwrap();
        assert_eq!(print(&back, &enc.sig), print(&f, &enc.sig));
    }

    #[test]
    fn finite_variant_swaps_the_bottom_rule() {
        let ts = TilingSystem::single("w");
        let inf = encode_3T(&ts).unwrap();
        let fin = encode_3T_finite(&ts).unwrap();
        assert_eq!(inf.conjuncts.iter().filter(|c| c.rule == "dGenD").count(), 3);
        assert_eq!(fin.conjuncts.iter().filter(|c| c.rule == "dGenD").count(), 0);
        assert_eq!(fin.count(73), 3);
        assert_eq!(fin.count(72), 1);
        assert_eq!(fin.count(44), 0);
        assert_eq!(fin.count(70), 1);
        assert_eq!(fin.count(71), 72);
        assert_eq!(fin.count(74), 1);
    }

    #[test]
    fn boustrophedon_starts_as_drawn() {
        let b = boustrophedon(17);
        let coords: Vec<(usize, usize)> = b.iter().map(|s| s.coords).collect();
        assert_eq!(
            coords,
            vec![
                (0, 0), (0, 1), (1, 1), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2),
                (0, 3), (1, 3), (2, 3), (3, 3), (3, 2), (3, 1), (3, 0), (4, 0)
            ]
        );
        assert_eq!(b[0].address, Address::D(0, 0));
        assert_eq!(b[0].controls, Controls { bt: true, dg: true, ..Default::default() });
        assert_eq!(b[1].address, Address::C(0, 1));
        assert_eq!(b[1].controls, Controls { lf: true, dg_plus: true, ..Default::default() });
    }

    #[test]
    fn short_prefix_is_clean() {
        let (s, report) = verify_3t_prefix(60);
        assert!(report.is_clean(), "{report:?}");
        assert!(check_wellformed(&s).is_empty());
    }
}
