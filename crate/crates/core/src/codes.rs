//! Families of graphs as subsets of F2^N, forbidden-difference checks, and
//! exact extremal search by branch and bound on the conflict graph.
//!
//! Two code notions share one engine. For plain codes the conflict graph is a
//! Cayley graph: x conflicts with x + d for every placement d of a forbidden
//! graph. For the comparable-pair variant, x conflicts with x | c for every
//! placement c disjoint from x. Extremal families are maximum independent
//! sets; densities are exact dyadic rationals throughout.

use crate::delsarte;
use crate::error::{Error, Result};
use crate::f2space::{butterfly_i64, EdgeIndexSet, ValueTable};
use crate::graphs::{enumerate_placements, ForbiddenFamily};
use crate::rational::Dyadic;
use num_complex::Complex64;

/// Hard size cap for the search: adjacency bitsets at 2^14 vertices cost
/// 32 MB. Results are guaranteed exact for N <= 10 under default budgets.
pub const MAX_SEARCH_BITS: u32 = 14;

/// Tree-search slice tried before the bound-and-construction phases kick in.
/// Spaces up to 2^6 points settle well inside this many nodes.
const QUICK_TREE_NODES: u64 = 200_000;

// ===========================================================================
// CodeFamily: a subset of F2^N as a packed bit table
// ===========================================================================

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeFamily {
    space: EdgeIndexSet,
    blocks: Vec<u64>,
    card: u64,
}

fn block_count(len: u64) -> usize {
    ((len + 63) / 64) as usize
}

impl CodeFamily {
    pub fn empty(space: EdgeIndexSet) -> Result<Self> {
        let len = space.table_len()? as u64;
        Ok(CodeFamily { space, blocks: vec![0; block_count(len)], card: 0 })
    }

    pub fn full(space: EdgeIndexSet) -> Result<Self> {
        let len = space.table_len()? as u64;
        let mut fam = CodeFamily::empty(space)?;
        for x in 0..len {
            fam.set(x, true);
        }
        Ok(fam)
    }

    pub fn from_members(space: EdgeIndexSet, members: &[u64]) -> Result<Self> {
        let len = space.table_len()? as u64;
        let mut fam = CodeFamily::empty(space)?;
        for &x in members {
            if x >= len {
                return Err(Error::PositionOutOfRange(x.min(u32::MAX as u64) as u32));
            }
            fam.set(x, true);
        }
        Ok(fam)
    }

    pub fn from_fn(space: EdgeIndexSet, mut pred: impl FnMut(u64) -> bool) -> Result<Self> {
        let len = space.table_len()? as u64;
        let mut fam = CodeFamily::empty(space)?;
        for x in 0..len {
            if pred(x) {
                fam.set(x, true);
            }
        }
        Ok(fam)
    }

    /// Rebuild from a packed bit table (LSB-first within each block); tail
    /// bits beyond 2^N must be zero.
    pub fn from_blocks(space: EdgeIndexSet, blocks: Vec<u64>) -> Result<Self> {
        let len = space.table_len()? as u64;
        if blocks.len() != block_count(len) {
            return Err(Error::Malformed("bit table has the wrong block count".into()));
        }
        let tail = (len % 64) as u32;
        if tail != 0 && blocks.last().map_or(false, |&b| b >> tail != 0) {
            return Err(Error::Malformed("bit table has nonzero tail bits".into()));
        }
        let card = blocks.iter().map(|b| b.count_ones() as u64).sum();
        Ok(CodeFamily { space, blocks, card })
    }

    pub fn space(&self) -> EdgeIndexSet {
        self.space
    }

    pub fn len_points(&self) -> u64 {
        self.space.table_len().expect("validated at construction") as u64
    }

    #[inline]
    pub fn contains(&self, x: u64) -> bool {
        self.blocks[(x / 64) as usize] >> (x % 64) & 1 == 1
    }

    pub fn set(&mut self, x: u64, member: bool) {
        let (w, b) = ((x / 64) as usize, x % 64);
        let old = self.blocks[w] >> b & 1 == 1;
        if member && !old {
            self.blocks[w] |= 1 << b;
            self.card += 1;
        } else if !member && old {
            self.blocks[w] &= !(1 << b);
            self.card -= 1;
        }
    }

    pub fn cardinality(&self) -> u64 {
        self.card
    }

    /// |family| / 2^N, exact.
    pub fn density(&self) -> Dyadic {
        Dyadic::over_pow2(self.card as i64, self.space.len() as u64)
    }

    pub fn members(&self) -> impl Iterator<Item = u64> + '_ {
        let len = self.len_points();
        (0..len).filter(move |&x| self.contains(x))
    }

    pub fn blocks(&self) -> &[u64] {
        &self.blocks
    }

    /// 0/1 indicator as a value table.
    pub fn indicator_table(&self) -> ValueTable {
        ValueTable::from_fn(self.space, |x| {
            Complex64::new(if self.contains(x) { 1.0 } else { 0.0 }, 0.0)
        })
        .expect("table size validated at construction")
    }

    /// Indicator minus its mean (the mean is exact; the table is float).
    pub fn centered_table(&self) -> ValueTable {
        let mean = self.density().to_f64();
        ValueTable::from_fn(self.space, |x| {
            Complex64::new(if self.contains(x) { 1.0 } else { 0.0 } - mean, 0.0)
        })
        .expect("table size validated at construction")
    }

    /// Exact integer character sums t(xi) = sum_x 1(x) (-1)^{|x & xi|}.
    /// The indicator's transform is t(xi) / 2^N exactly.
    pub fn character_sums(&self) -> Vec<i64> {
        let len = self.len_points() as usize;
        let mut t: Vec<i64> = (0..len as u64).map(|x| self.contains(x) as i64).collect();
        butterfly_i64(&mut t);
        t
    }

    /// Fix the listed positions to the listed bits and restrict to the
    /// remaining positions, ascending, over a Generic space.
    pub fn section_restrict(&self, fixed: &[(u32, bool)]) -> Result<CodeFamily> {
        let n_bits = self.space.len();
        let mut is_fixed = vec![false; n_bits as usize];
        let mut fixed_bits = 0u64;
        for &(pos, bit) in fixed {
            if pos >= n_bits {
                return Err(Error::PositionOutOfRange(pos));
            }
            if is_fixed[pos as usize] {
                return Err(Error::Malformed("position fixed twice".into()));
            }
            is_fixed[pos as usize] = true;
            if bit {
                fixed_bits |= 1 << pos;
            }
        }
        let free: Vec<u32> = (0..n_bits).filter(|&p| !is_fixed[p as usize]).collect();
        let sub = EdgeIndexSet::generic(free.len() as u32)?;
        CodeFamily::from_fn(sub, |y| {
            let mut x = fixed_bits;
            for (i, &p) in free.iter().enumerate() {
                if y >> i & 1 == 1 {
                    x |= 1 << p;
                }
            }
            self.contains(x)
        })
    }
}

// ===========================================================================
// Code checking
// ===========================================================================

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeKind {
    /// Forbid x + y isomorphic to a member, for any distinct members x, y.
    Code,
    /// Forbid y = x | c with c a member placement disjoint from x.
    HjCode,
}

/// None if the family is a code; otherwise the first violating pair in
/// ascending (x, y) order.
pub fn is_code(
    fam: &CodeFamily,
    forb: &ForbiddenFamily,
    kind: CodeKind,
) -> Result<Option<(u64, u64)>> {
    let placements = enumerate_placements(fam.space(), forb)?;
    let mut best: Option<(u64, u64)> = None;
    for x in fam.members() {
        let mut min_y = u64::MAX;
        for &c in &placements {
            let y = match kind {
                CodeKind::Code => x ^ c,
                CodeKind::HjCode => {
                    if x & c != 0 {
                        continue;
                    }
                    x | c
                }
            };
            if y > x && fam.contains(y) && y < min_y {
                min_y = y;
            }
        }
        if min_y != u64::MAX {
            best = Some((x, min_y));
            break;
        }
    }
    Ok(best)
}

// ===========================================================================
// Conflict graph and branch-and-bound maximum independent set
// ===========================================================================

#[derive(Clone, Copy, Debug)]
pub struct SearchBudget {
    pub max_nodes: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_nodes: 50_000_000 }
    }
}

struct ConflictGraph {
    n: usize,
    words: usize,
    adj: Vec<u64>,
}

impl ConflictGraph {
    fn build(space: EdgeIndexSet, placements: &[u64], kind: CodeKind) -> Result<Self> {
        let len = space.table_len()? as u64;
        if space.len() > MAX_SEARCH_BITS {
            return Err(Error::TooLarge(format!(
                "exact search supports at most {MAX_SEARCH_BITS} positions, got {}",
                space.len()
            )));
        }
        let n = len as usize;
        let words = block_count(len);
        let mut adj = vec![0u64; n * words];
        let mut add = |a: usize, b: usize| {
            adj[a * words + b / 64] |= 1 << (b % 64);
            adj[b * words + a / 64] |= 1 << (a % 64);
        };
        for x in 0..len {
            for &c in placements {
                match kind {
                    CodeKind::Code => {
                        let y = x ^ c;
                        if y > x {
                            add(x as usize, y as usize);
                        }
                    }
                    CodeKind::HjCode => {
                        if x & c == 0 {
                            add(x as usize, (x | c) as usize);
                        }
                    }
                }
            }
        }
        Ok(ConflictGraph { n, words, adj })
    }

    #[inline]
    fn row(&self, v: usize) -> &[u64] {
        &self.adj[v * self.words..(v + 1) * self.words]
    }

    fn degree(&self, v: usize) -> u32 {
        self.row(v).iter().map(|w| w.count_ones()).sum()
    }
}

fn popcnt(set: &[u64]) -> u32 {
    set.iter().map(|w| w.count_ones()).sum()
}

pub(crate) fn lowest_bit(set: &[u64]) -> Option<usize> {
    for (wi, &w) in set.iter().enumerate() {
        if w != 0 {
            return Some(wi * 64 + w.trailing_zeros() as usize);
        }
    }
    None
}

/// Independent-set branch and bound. Vertices are searched in descending
/// conflict degree; the candidate-set clique-cover bound prunes. All state is
/// deterministic, so results are reproducible bit for bit.
struct Mis<'a> {
    g: &'a ConflictGraph,
    order: Vec<usize>,
    pos_mask: Vec<u64>, // permuted adjacency, row-major in order-index space
    nodes: u64,
    max_nodes: u64,
    truncated: bool,
    floor: usize,
}

enum Walk {
    Done,
    Abort,
}

impl<'a> Mis<'a> {
    fn new(g: &'a ConflictGraph, budget: &SearchBudget) -> Self {
        let mut order: Vec<usize> = (0..g.n).collect();
        order.sort_by_key(|&v| std::cmp::Reverse(g.degree(v)));
        let words = g.words;
        let mut pos_mask = vec![0u64; g.n * words];
        let mut inv = vec![0usize; g.n];
        for (i, &v) in order.iter().enumerate() {
            inv[v] = i;
        }
        for (i, &v) in order.iter().enumerate() {
            for wi in 0..words {
                let mut w = g.row(v)[wi];
                while w != 0 {
                    let u = wi * 64 + w.trailing_zeros() as usize;
                    w &= w - 1;
                    let j = inv[u];
                    pos_mask[i * words + j / 64] |= 1 << (j % 64);
                }
            }
        }
        Mis { g, order, pos_mask, nodes: 0, max_nodes: budget.max_nodes, truncated: false, floor: 0 }
    }

    #[inline]
    fn mask(&self, i: usize) -> &[u64] {
        &self.pos_mask[i * self.g.words..(i + 1) * self.g.words]
    }

    fn full_candidates(&self) -> Vec<u64> {
        let mut cand = vec![!0u64; self.g.words];
        let tail = self.g.n % 64;
        if tail != 0 {
            cand[self.g.words - 1] = (1u64 << tail) - 1;
        }
        cand
    }

    /// Clique-cover bound: candidates are greedily split into classes that
    /// are pairwise adjacent... each class is built by repeatedly taking the
    /// lowest vertex and deleting its non-neighbors? No: classes here are
    /// independent in the conflict graph's complement sense. See below.
    fn color_bound(&self, cand: &[u64]) -> u32 {
        // Greedy clique cover of the candidate set: each class is a clique
        // of the conflict graph, so an independent set meets it at most once.
        let words = self.g.words;
        let mut remaining = cand.to_vec();
        let mut classes = 0u32;
        while let Some(v0) = lowest_bit(&remaining) {
            classes += 1;
            remaining[v0 / 64] &= !(1 << (v0 % 64));
            // grow a clique through common neighborhoods
            let mut common: Vec<u64> =
                remaining.iter().zip(self.mask(v0)).map(|(r, m)| r & m).collect();
            while let Some(u) = lowest_bit(&common) {
                remaining[u / 64] &= !(1 << (u % 64));
                for wi in 0..words {
                    common[wi] &= self.mask(u)[wi];
                    common[wi] &= remaining[wi];
                }
            }
        }
        classes
    }

    /// Maximum independent set extending `forced_in` while avoiding
    /// `forced_out`. Returns original-label members, sorted.
    fn maximum(
        &mut self,
        fix_first: Option<usize>,
        budget_pool: &mut u64,
    ) -> (Vec<u64>, bool) {
        self.maximum_with_floor(fix_first, 0, budget_pool)
    }

    /// Like `maximum`, but prunes against a known lower bound: only families
    /// strictly larger than `floor` are reported. Completing the tree while
    /// finding none proves a floor-sized incumbent maximum.
    fn maximum_with_floor(
        &mut self,
        fix_first: Option<usize>,
        floor: usize,
        budget_pool: &mut u64,
    ) -> (Vec<u64>, bool) {
        let words = self.g.words;
        let mut cand = self.full_candidates();
        let mut cur: Vec<usize> = Vec::new();
        if let Some(v) = fix_first {
            let i = self.order.iter().position(|&o| o == v).expect("vertex present");
            cur.push(i);
            cand[i / 64] &= !(1 << (i % 64));
            for wi in 0..words {
                cand[wi] &= !self.mask(i)[wi];
            }
        }
        self.max_nodes = *budget_pool;
        self.nodes = 0;
        self.truncated = false;
        self.floor = floor;
        let mut best: Vec<usize> = Vec::new();
        let _ = self.expand_max(&mut cur, &mut cand, &mut best);
        self.floor = 0;
        *budget_pool = budget_pool.saturating_sub(self.nodes);
        let mut out: Vec<u64> = best.iter().map(|&i| self.order[i] as u64).collect();
        out.sort_unstable();
        (out, !self.truncated)
    }

    fn expand_max(
        &mut self,
        cur: &mut Vec<usize>,
        cand: &mut [u64],
        best: &mut Vec<usize>,
    ) -> std::result::Result<(), Walk> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            self.truncated = true;
            return Err(Walk::Abort);
        }
        let cutoff = best.len().max(self.floor);
        let k = popcnt(cand);
        if cur.len() + k as usize <= cutoff {
            return Ok(());
        }
        if k == 0 {
            if cur.len() > cutoff {
                *best = cur.clone();
            }
            return Ok(());
        }
        if cur.len() + self.color_bound(cand) as usize <= cutoff {
            return Ok(());
        }
        let v = lowest_bit(cand).expect("nonempty");
        let words = self.g.words;
        let mut sub = cand.to_vec();
        sub[v / 64] &= !(1 << (v % 64));
        for wi in 0..words {
            sub[wi] &= !self.mask(v)[wi];
        }
        cur.push(v);
        self.expand_max(cur, &mut sub, best)?;
        cur.pop();
        cand[v / 64] &= !(1 << (v % 64));
        self.expand_max(cur, cand, best)
    }

    /// Does an independent set of size `target` exist containing every
    /// vertex of `forced_in` and avoiding `forced_out`? (Original labels.)
    fn decision(
        &mut self,
        forced_in: &[u64],
        forced_out: &[u64],
        target: usize,
        budget_pool: &mut u64,
    ) -> Option<bool> {
        let words = self.g.words;
        let mut inv = vec![0usize; self.g.n];
        for (i, &v) in self.order.iter().enumerate() {
            inv[v] = i;
        }
        let mut cand = self.full_candidates();
        let mut cur: Vec<usize> = Vec::new();
        for &v in forced_in {
            let i = inv[v as usize];
            if cand[i / 64] >> (i % 64) & 1 == 0 {
                return Some(false); // conflicts with an earlier forced vertex
            }
            cur.push(i);
            cand[i / 64] &= !(1 << (i % 64));
            for wi in 0..words {
                cand[wi] &= !self.mask(i)[wi];
            }
        }
        for &v in forced_out {
            let i = inv[v as usize];
            cand[i / 64] &= !(1 << (i % 64));
        }
        self.max_nodes = *budget_pool;
        self.nodes = 0;
        self.truncated = false;
        let found = self.expand_decide(&mut cur, &mut cand, target);
        *budget_pool = budget_pool.saturating_sub(self.nodes);
        match found {
            Ok(hit) => Some(hit),
            Err(Walk::Abort) => None,
            Err(Walk::Done) => Some(true),
        }
    }

    fn expand_decide(
        &mut self,
        cur: &mut Vec<usize>,
        cand: &mut [u64],
        target: usize,
    ) -> std::result::Result<bool, Walk> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            self.truncated = true;
            return Err(Walk::Abort);
        }
        if cur.len() >= target {
            return Ok(true);
        }
        let k = popcnt(cand);
        if cur.len() + (k as usize) < target {
            return Ok(false);
        }
        if k == 0 {
            return Ok(false);
        }
        if cur.len() + (self.color_bound(cand) as usize) < target {
            return Ok(false);
        }
        let v = lowest_bit(cand).expect("nonempty");
        let words = self.g.words;
        let mut sub = cand.to_vec();
        sub[v / 64] &= !(1 << (v % 64));
        for wi in 0..words {
            sub[wi] &= !self.mask(v)[wi];
        }
        cur.push(v);
        if self.expand_decide(cur, &mut sub, target)? {
            return Ok(true);
        }
        cur.pop();
        cand[v / 64] &= !(1 << (v % 64));
        self.expand_decide(cur, cand, target)
    }

    /// Visit every maximum independent set of size `target`, up to `cap`
    /// many. Returns (complete, sets).
    fn enumerate(
        &mut self,
        target: usize,
        cap: usize,
        budget_pool: &mut u64,
    ) -> (Vec<Vec<u64>>, bool) {
        let mut cand = self.full_candidates();
        let mut cur: Vec<usize> = Vec::new();
        let mut out: Vec<Vec<u64>> = Vec::new();
        self.max_nodes = *budget_pool;
        self.nodes = 0;
        self.truncated = false;
        let complete =
            self.expand_enum(&mut cur, &mut cand, target, cap, &mut out).is_ok() && !self.truncated;
        *budget_pool = budget_pool.saturating_sub(self.nodes);
        for s in &mut out {
            s.sort_unstable();
        }
        out.sort();
        (out, complete)
    }

    fn expand_enum(
        &mut self,
        cur: &mut Vec<usize>,
        cand: &mut [u64],
        target: usize,
        cap: usize,
        out: &mut Vec<Vec<u64>>,
    ) -> std::result::Result<(), Walk> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            self.truncated = true;
            return Err(Walk::Abort);
        }
        if cur.len() == target {
            out.push(cur.iter().map(|&i| self.order[i] as u64).collect());
            if out.len() >= cap {
                return Err(Walk::Done);
            }
            return Ok(());
        }
        let k = popcnt(cand);
        if cur.len() + (k as usize) < target {
            return Ok(());
        }
        if cur.len() + (self.color_bound(cand) as usize) < target {
            return Ok(());
        }
        let v = lowest_bit(cand).expect("nonempty by k bound");
        let words = self.g.words;
        let mut sub = cand.to_vec();
        sub[v / 64] &= !(1 << (v % 64));
        for wi in 0..words {
            sub[wi] &= !self.mask(v)[wi];
        }
        cur.push(v);
        self.expand_enum(cur, &mut sub, target, cap, out)?;
        cur.pop();
        cand[v / 64] &= !(1 << (v % 64));
        self.expand_enum(cur, cand, target, cap, out)
    }
}

// ===========================================================================
// Extremal search
// ===========================================================================

#[derive(Clone, Debug)]
pub struct ExtremalResult {
    /// Maximum density, exact when `exact` holds.
    pub density: Dyadic,
    pub cardinality: u64,
    pub witness: CodeFamily,
    /// Whether the bound was proven optimal within budget.
    pub exact: bool,
    /// Whether the witness is the lexicographically least membership table
    /// among maximum families (refinement can be cut off by the budget).
    pub canonical_witness: bool,
    pub node_count: u64,
}

/// Find a maximum family avoiding the forbidden differences, with an exact
/// optimality proof when the budget allows. Ties between maximum families are
/// broken toward the lexicographically least membership table.
pub fn extremal_search(
    space: EdgeIndexSet,
    forb: &ForbiddenFamily,
    kind: CodeKind,
    budget: &SearchBudget,
) -> Result<ExtremalResult> {
    let placements = enumerate_placements(space, forb)?;
    let len = space.table_len()? as u64;
    if placements.is_empty() {
        // nothing is forbidden: the full space is the unique maximum
        return Ok(ExtremalResult {
            density: Dyadic::one(),
            cardinality: len,
            witness: CodeFamily::full(space)?,
            exact: true,
            canonical_witness: true,
            node_count: 0,
        });
    }
    let graph = ConflictGraph::build(space, &placements, kind)?;
    let mut mis = Mis::new(&graph, budget);
    let mut pool = budget.max_nodes;

    // Plain codes live on a Cayley conflict graph: translating a maximum
    // family by one of its members produces an equally large family through
    // the origin, so the size search may pin the empty graph.
    let fix = match kind {
        CodeKind::Code => Some(0usize),
        CodeKind::HjCode => None,
    };

    // Phase 1: a bounded slice of tree search. Small spaces finish here.
    let quick = pool.min(QUICK_TREE_NODES);
    let mut slice = quick;
    let (mut witness_members, mut proven) = mis.maximum(fix, &mut slice);
    pool -= quick - slice;
    let mut tree_complete = proven;

    // Phase 2: on translation-invariant instances, an exact rational upper
    // bound plus an exact rotation-symmetric construction can settle spaces
    // the tree cannot: when the two meet, the value is proven.
    if !proven && kind == CodeKind::Code {
        if let Some(bound) = delsarte::spectral_bound(space, &placements)? {
            let ceiling = bound.floor().to_integer();
            if let Some(inv) =
                delsarte::rotation_invariant_maximum(space, &placements, &mut pool)?
            {
                if inv.len() > witness_members.len() {
                    witness_members = inv;
                }
            }
            if num_bigint::BigInt::from(witness_members.len() as u64) == ceiling {
                proven = true;
            }
        }
    }

    // Phase 3: spend whatever pool is left on the full tree, pruned by the
    // best incumbent so far. Completing the tree without finding a larger
    // family proves the incumbent maximum.
    if !proven {
        let floor = witness_members.len();
        let (members, complete) = mis.maximum_with_floor(fix, floor, &mut pool);
        if members.len() > floor {
            witness_members = members;
        }
        proven = complete;
        tree_complete = complete;
    }

    let alpha = witness_members.len();
    let mut result = ExtremalResult {
        density: Dyadic::over_pow2(alpha as i64, space.len() as u64),
        cardinality: alpha as u64,
        witness: CodeFamily::from_members(space, &witness_members)?,
        exact: proven,
        canonical_witness: false,
        node_count: budget.max_nodes - pool,
    };
    if !tree_complete {
        // either unproven, or proven by the bound-meets-construction pair:
        // in both cases per-position decision searches are out of reach
        return Ok(result);
    }

    // Lexicographic refinement: walk positions in ascending order, excluding
    // each one whenever a maximum family without it still exists.
    let mut forced_in: Vec<u64> = Vec::new();
    let mut forced_out: Vec<u64> = Vec::new();
    let mut complete = true;
    for x in 0..len {
        if forced_in.len() == alpha {
            break;
        }
        forced_out.push(x);
        match mis.decision(&forced_in, &forced_out, alpha, &mut pool) {
            Some(true) => {}
            Some(false) => {
                forced_out.pop();
                forced_in.push(x);
            }
            None => {
                complete = false;
                break;
            }
        }
    }
    if complete {
        debug_assert_eq!(forced_in.len(), alpha);
        result.witness = CodeFamily::from_members(space, &forced_in)?;
        result.canonical_witness = true;
    }
    result.node_count = budget.max_nodes - pool;
    Ok(result)
}

#[derive(Clone, Debug)]
pub struct WitnessEnumeration {
    pub cardinality: u64,
    pub witnesses: Vec<CodeFamily>,
    /// False when the cap or budget cut the enumeration short.
    pub complete: bool,
    pub node_count: u64,
}

/// Enumerate all maximum families (no symmetry fixing), sorted by member
/// list, up to `cap` many.
pub fn extremal_witnesses(
    space: EdgeIndexSet,
    forb: &ForbiddenFamily,
    kind: CodeKind,
    budget: &SearchBudget,
    cap: usize,
) -> Result<WitnessEnumeration> {
    let placements = enumerate_placements(space, forb)?;
    let len = space.table_len()? as u64;
    if placements.is_empty() {
        return Ok(WitnessEnumeration {
            cardinality: len,
            witnesses: vec![CodeFamily::full(space)?],
            complete: true,
            node_count: 0,
        });
    }
    let graph = ConflictGraph::build(space, &placements, kind)?;
    let mut mis = Mis::new(&graph, budget);
    let mut pool = budget.max_nodes;
    let (members, proven) = mis.maximum(
        match kind {
            CodeKind::Code => Some(0),
            CodeKind::HjCode => None,
        },
        &mut pool,
    );
    if !proven {
        return Err(Error::BudgetExceeded("size phase ran out of nodes".into()));
    }
    let alpha = members.len();
    let (sets, complete) = mis.enumerate(alpha, cap, &mut pool);
    let witnesses = sets
        .into_iter()
        .map(|s| CodeFamily::from_members(space, &s))
        .collect::<Result<Vec<_>>>()?;
    Ok(WitnessEnumeration {
        cardinality: alpha as u64,
        witnesses,
        complete,
        node_count: budget.max_nodes - pool,
    })
}

/// Reference oracle: scan every one of the 2^(2^N) subsets. Only for tiny
/// spaces (2^N <= 16); returns the exact maximum density and all maximum
/// families in ascending table order.
pub fn extremal_by_enumeration(
    space: EdgeIndexSet,
    forb: &ForbiddenFamily,
    kind: CodeKind,
) -> Result<(Dyadic, Vec<CodeFamily>)> {
    let len = space.table_len()? as u64;
    if len > 16 {
        return Err(Error::TooLarge("enumeration oracle capped at 2^N <= 16".into()));
    }
    let placements = enumerate_placements(space, forb)?;
    let conflict = |s: u64| -> bool {
        for x in 0..len {
            if s >> x & 1 == 0 {
                continue;
            }
            for &c in &placements {
                let y = match kind {
                    CodeKind::Code => x ^ c,
                    CodeKind::HjCode => {
                        if x & c != 0 {
                            continue;
                        }
                        x | c
                    }
                };
                if y != x && s >> y & 1 == 1 {
                    return true;
                }
            }
        }
        false
    };
    let mut best = 0u32;
    let mut witnesses: Vec<u64> = Vec::new();
    for s in 0u64..1 << len {
        if conflict(s) {
            continue;
        }
        let k = s.count_ones();
        if k > best {
            best = k;
            witnesses.clear();
        }
        if k == best {
            witnesses.push(s);
        }
    }
    let fams = witnesses
        .into_iter()
        .map(|s| {
            let members: Vec<u64> = (0..len).filter(|&x| s >> x & 1 == 1).collect();
            CodeFamily::from_members(space, &members)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Dyadic::over_pow2(best as i64, space.len() as u64), fams))
}

#[derive(Clone, Debug)]
pub struct DensityRow {
    pub n: u16,
    pub density: Dyadic,
    pub exact: bool,
}

/// Extremal densities across a range of vertex counts, verifying that exact
/// entries never increase with n.
pub fn monotonicity_table(
    forb: &ForbiddenFamily,
    kind: CodeKind,
    loops: bool,
    n_range: std::ops::RangeInclusive<u16>,
    budget: &SearchBudget,
) -> Result<Vec<DensityRow>> {
    let mut rows: Vec<DensityRow> = Vec::new();
    for n in n_range {
        let space =
            if loops { EdgeIndexSet::pairs_loops(n)? } else { EdgeIndexSet::pairs(n)? };
        let r = extremal_search(space, forb, kind, budget)?;
        if let Some(prev) = rows.last() {
            if prev.exact && r.exact && r.density > prev.density {
                return Err(Error::MonotonicityViolated(prev.n, n));
            }
        }
        rows.push(DensityRow { n, density: r.density, exact: r.exact });
    }
    Ok(rows)
}
