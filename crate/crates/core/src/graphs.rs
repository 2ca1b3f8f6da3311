//! Graphs with optional self-loops: symmetric difference, isomorphism via
//! canonical forms, and membership in the built-in clique families.
//!
//! A graph is a point of F2^I for I = Pairs(n) or PairsLoops(n); its spanning
//! vertex set is the union of its present indices. Isomorphism is a bijection
//! of spanning sets preserving edges and loops separately: a loop never maps
//! to an edge.

use crate::error::{Error, Result};
use crate::f2space::{EdgeIndexSet, GraphPoint, SpaceKind};

/// Spanning-vertex cap for canonical forms; 11! permutations is past desk scale.
pub const MAX_CANON_VERTICES: u16 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Graph {
    point: GraphPoint,
}

impl Graph {
    pub fn new(point: GraphPoint) -> Result<Self> {
        if point.space().kind() == SpaceKind::Generic {
            return Err(Error::Malformed("graphs need a Pairs or PairsLoops space".into()));
        }
        Ok(Graph { point })
    }

    pub fn empty(space: EdgeIndexSet) -> Result<Self> {
        Graph::new(GraphPoint::zero(space))
    }

    /// Build from explicit index sets: a 2-element set is an edge, a
    /// 1-element set a loop. Loops require `loops = true`.
    pub fn from_edges(n: u16, loops: bool, edges: &[&[u16]]) -> Result<Self> {
        let space = if loops { EdgeIndexSet::pairs_loops(n)? } else { EdgeIndexSet::pairs(n)? };
        let mut point = GraphPoint::zero(space);
        for e in edges {
            point = point.with_bit(space.position(e)?, true);
        }
        Graph::new(point)
    }

    /// The complete loopless graph on the given vertices.
    pub fn complete_on(space: EdgeIndexSet, vertices: &[u16]) -> Result<Self> {
        let mut point = GraphPoint::zero(space);
        for (a, &i) in vertices.iter().enumerate() {
            for &j in &vertices[a + 1..] {
                point = point.with_bit(space.position(&[i, j])?, true);
            }
        }
        Graph::new(point)
    }

    /// All loops and edges on the given vertices (the looped clique).
    pub fn complete_looped_on(space: EdgeIndexSet, vertices: &[u16]) -> Result<Self> {
        let mut g = Graph::complete_on(space, vertices)?;
        for &i in vertices {
            g.point = g.point.with_bit(space.position(&[i])?, true);
        }
        Ok(g)
    }

    pub fn point(&self) -> GraphPoint {
        self.point
    }

    pub fn space(&self) -> EdgeIndexSet {
        self.point.space()
    }

    pub fn n(&self) -> u16 {
        self.space().n()
    }

    pub fn is_empty(&self) -> bool {
        self.point.bits() == 0
    }

    /// The spanning vertex set: every vertex incident to an edge or loop.
    pub fn spanning_vertices(&self) -> Vec<u16> {
        let space = self.space();
        let mut present = vec![false; space.n() as usize + 1];
        for pos in 0..space.len() {
            if self.point.get(pos) {
                let (i, j) = space.key_at(pos).expect("key");
                present[i as usize] = true;
                present[j as usize] = true;
            }
        }
        (1..=space.n()).filter(|&v| present[v as usize]).collect()
    }

    pub fn edge_count(&self) -> u32 {
        let space = self.space();
        (0..space.len())
            .filter(|&p| {
                self.point.get(p) && {
                    let (i, j) = space.key_at(p).expect("key");
                    i != j
                }
            })
            .count() as u32
    }

    pub fn loop_count(&self) -> u32 {
        self.point.weight() - self.edge_count()
    }

    pub fn has_loops(&self) -> bool {
        self.loop_count() > 0
    }

    /// Present indices as vertex sets, loops as singletons, position order.
    pub fn index_sets(&self) -> Vec<Vec<u16>> {
        let space = self.space();
        (0..space.len())
            .filter(|&p| self.point.get(p))
            .map(|p| {
                let (i, j) = space.key_at(p).expect("key");
                if i == j {
                    vec![i]
                } else {
                    vec![i, j]
                }
            })
            .collect()
    }
}

/// G1 + G2: the exclusive or of the bit vectors. When G1 contains G2 this is
/// the set difference.
pub fn symmetric_difference(g1: &Graph, g2: &Graph) -> Result<Graph> {
    Graph::new(g1.point.xor(&g2.point)?)
}

/// A byte string identifying the isomorphism class of a graph restricted to
/// its spanning vertex set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalForm(Vec<u8>);

impl CanonicalForm {
    pub fn bytes(&self) -> &[u8] {
        &self.0
    }
}

/// Adjacency of the spanning set in local labels 0..k-1.
struct Local {
    k: usize,
    adj: Vec<Vec<bool>>, // k x k symmetric; diagonal = loops
}

impl Local {
    fn build(g: &Graph) -> Local {
        let verts = g.spanning_vertices();
        let k = verts.len();
        let space = g.space();
        let mut adj = vec![vec![false; k]; k];
        let back: std::collections::HashMap<u16, usize> =
            verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        for pos in 0..space.len() {
            if g.point.get(pos) {
                let (i, j) = space.key_at(pos).expect("key");
                let (a, b) = (back[&i], back[&j]);
                adj[a][b] = true;
                adj[b][a] = true;
            }
        }
        Local { k, adj }
    }

    /// Packed lower-triangle-with-diagonal encoding under a relabeling perm:
    /// perm[slot] = local vertex placed at that slot.
    fn encode(&self, perm: &[usize]) -> u64 {
        let mut bits = 0u64;
        let mut pos = 0;
        for a in 0..self.k {
            for b in a..self.k {
                if self.adj[perm[a]][perm[b]] {
                    bits |= 1 << pos;
                }
                pos += 1;
            }
        }
        bits
    }
}

/// Minimum, over permutations of the spanning set, of the packed
/// adjacency-with-loops encoding. Vertices are first partitioned into
/// refinement classes (degree, loop, then neighbor-class multisets); only
/// class-preserving permutations are enumerated, which keeps the minimum
/// isomorphism-invariant while pruning the factorial blowup.
pub fn canonical_form(g: &Graph) -> Result<CanonicalForm> {
    let verts = g.spanning_vertices();
    let k = verts.len();
    if k as u16 > MAX_CANON_VERTICES {
        return Err(Error::TooManyVertices(MAX_CANON_VERTICES));
    }
    if k == 0 {
        return Ok(CanonicalForm(vec![0]));
    }
    let local = Local::build(g);

    // Iterated refinement: start from (loop, degree), then fold in the sorted
    // multiset of neighbor classes until stable.
    let mut class = vec![0usize; k];
    {
        let mut sig: Vec<(bool, usize)> = (0..k)
            .map(|v| (local.adj[v][v], (0..k).filter(|&u| u != v && local.adj[v][u]).count()))
            .collect();
        let mut sorted: Vec<(bool, usize)> = sig.clone();
        sorted.sort();
        sorted.dedup();
        for v in 0..k {
            class[v] = sorted.binary_search(&sig[v]).unwrap();
        }
        loop {
            let mut next_sig: Vec<(usize, Vec<usize>)> = Vec::with_capacity(k);
            for v in 0..k {
                let mut nb: Vec<usize> =
                    (0..k).filter(|&u| u != v && local.adj[v][u]).map(|u| class[u]).collect();
                nb.sort_unstable();
                next_sig.push((class[v], nb));
            }
            let mut sorted = next_sig.clone();
            sorted.sort();
            sorted.dedup();
            let next: Vec<usize> =
                (0..k).map(|v| sorted.binary_search(&next_sig[v]).unwrap()).collect();
            if next == class {
                break;
            }
            class = next;
        }
        let _ = &mut sig;
    }

    // Enumerate class-preserving permutations: slots are grouped by class id
    // in ascending order; vertices of each class permute within their block.
    let mut by_class: Vec<Vec<usize>> = Vec::new();
    let nclasses = class.iter().max().unwrap() + 1;
    for c in 0..nclasses {
        by_class.push((0..k).filter(|&v| class[v] == c).collect());
    }
    let mut perm: Vec<usize> = by_class.concat();
    let block_starts: Vec<usize> = {
        let mut starts = vec![0];
        for b in &by_class {
            starts.push(starts.last().unwrap() + b.len());
        }
        starts
    };
    let mut best = u64::MAX;
    permute_blocks(&mut perm, &block_starts, 0, &local, &mut best);

    // Form bytes: vertex count, per-slot class sizes, then the packed bits.
    let mut bytes = vec![k as u8];
    for b in &by_class {
        bytes.push(b.len() as u8);
    }
    bytes.push(0xff); // class/bits separator
    bytes.extend_from_slice(&best.to_le_bytes());
    Ok(CanonicalForm(bytes))
}

fn permute_blocks(
    perm: &mut Vec<usize>,
    starts: &[usize],
    block: usize,
    local: &Local,
    best: &mut u64,
) {
    if block + 1 >= starts.len() {
        let enc = local.encode(perm);
        if enc < *best {
            *best = enc;
        }
        return;
    }
    let (lo, hi) = (starts[block], starts[block + 1]);
    permute_range(perm, lo, hi, starts, block, local, best);
}

fn permute_range(
    perm: &mut Vec<usize>,
    lo: usize,
    hi: usize,
    starts: &[usize],
    block: usize,
    local: &Local,
    best: &mut u64,
) {
    if lo + 1 >= hi {
        permute_blocks(perm, starts, block + 1, local, best);
        return;
    }
    for i in lo..hi {
        perm.swap(lo, i);
        permute_range(perm, lo + 1, hi, starts, block, local, best);
        perm.swap(lo, i);
    }
}

/// Are two graphs isomorphic (spanning sets in bijection preserving edges and
/// loops)?
pub fn is_isomorphic(g1: &Graph, g2: &Graph) -> Result<bool> {
    Ok(canonical_form(g1)? == canonical_form(g2)?)
}

/// A family of nonempty forbidden graphs.
#[derive(Clone, Debug)]
pub enum ForbiddenFamily {
    Explicit(Vec<Graph>),
    /// All loopless complete graphs K_r, r >= 2.
    Cliques,
    /// All fully looped cliques: loops plus edges on r vertices, r >= 1.
    CliquesLooped,
}

impl ForbiddenFamily {
    pub fn explicit(members: Vec<Graph>) -> Result<Self> {
        if members.is_empty() || members.iter().any(|g| g.is_empty()) {
            return Err(Error::Malformed("explicit family needs nonempty members".into()));
        }
        Ok(ForbiddenFamily::Explicit(members))
    }
}

/// Is g isomorphic to a member of the family? The empty graph never is.
pub fn is_isomorphic_to_member(g: &Graph, fam: &ForbiddenFamily) -> Result<bool> {
    if g.is_empty() {
        return Ok(false);
    }
    let verts = g.spanning_vertices();
    match fam {
        ForbiddenFamily::Cliques => {
            if g.has_loops() || verts.len() < 2 {
                return Ok(false);
            }
            let want = verts.len() as u32 * (verts.len() as u32 - 1) / 2;
            Ok(g.edge_count() == want)
        }
        ForbiddenFamily::CliquesLooped => {
            if g.space().kind() != SpaceKind::PairsLoops {
                return Ok(false);
            }
            let k = verts.len() as u32;
            Ok(g.loop_count() == k && g.edge_count() == k * (k - 1) / 2)
        }
        ForbiddenFamily::Explicit(members) => {
            let form = canonical_form(g)?;
            for m in members {
                if canonical_form(m)? == form {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

/// All bit patterns over `space` isomorphic to some family member: the
/// forbidden-difference set. Enumerated by placing members injectively, never
/// by scanning 2^N points.
pub fn enumerate_placements(space: EdgeIndexSet, fam: &ForbiddenFamily) -> Result<Vec<u64>> {
    let n = space.n();
    let mut out: std::collections::BTreeSet<u64> = std::collections::BTreeSet::new();
    match fam {
        ForbiddenFamily::Cliques => {
            for r in 2..=n {
                for verts in subsets_of_size(n, r) {
                    out.insert(Graph::complete_on(space, &verts)?.point().bits());
                }
            }
        }
        ForbiddenFamily::CliquesLooped => {
            if space.kind() != SpaceKind::PairsLoops {
                return Ok(vec![]);
            }
            for r in 1..=n {
                for verts in subsets_of_size(n, r) {
                    out.insert(Graph::complete_looped_on(space, &verts)?.point().bits());
                }
            }
        }
        ForbiddenFamily::Explicit(members) => {
            for m in members {
                let mverts = m.spanning_vertices();
                let k = mverts.len();
                if k > n as usize {
                    continue;
                }
                if m.has_loops() && space.kind() == SpaceKind::Pairs {
                    continue; // loops are not representable here
                }
                // All injective relabelings of the member's spanning set.
                let mspace = m.space();
                let mut pairs: Vec<(usize, usize)> = Vec::new(); // local index pairs
                let back: std::collections::HashMap<u16, usize> =
                    mverts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
                for pos in 0..mspace.len() {
                    if m.point().get(pos) {
                        let (i, j) = mspace.key_at(pos).expect("key");
                        pairs.push((back[&i], back[&j]));
                    }
                }
                for target in subsets_of_size(n, k as u16) {
                    permute_into(&target, &mut |image: &[u16]| {
                        let mut bits = 0u64;
                        for &(a, b) in &pairs {
                            let pos = if a == b {
                                space.position(&[image[a]])
                            } else {
                                space.position(&[image[a], image[b]])
                            };
                            bits |= 1 << pos.expect("placement in range");
                        }
                        out.insert(bits);
                    });
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// All r-subsets of [n], ascending.
pub fn subsets_of_size(n: u16, r: u16) -> Vec<Vec<u16>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r as usize);
    fn rec(n: u16, r: u16, start: u16, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if cur.len() == r as usize {
            out.push(cur.clone());
            return;
        }
        for v in start..=n {
            cur.push(v);
            rec(n, r, v + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, r, 1, &mut cur, &mut out);
    out
}

fn permute_into(target: &[u16], f: &mut impl FnMut(&[u16])) {
    let mut perm: Vec<u16> = target.to_vec();
    fn rec(perm: &mut Vec<u16>, lo: usize, f: &mut impl FnMut(&[u16])) {
        if lo + 1 >= perm.len() {
            f(perm);
            return;
        }
        for i in lo..perm.len() {
            perm.swap(lo, i);
            rec(perm, lo + 1, f);
            perm.swap(lo, i);
        }
    }
    if perm.is_empty() {
        return;
    }
    rec(&mut perm, 0, f);
}

// ===========================================================================
// JSON form: {"n": 4, "loops": true, "edges": [[1,2],[3],[2,4]]}
// ===========================================================================

#[derive(serde::Serialize, serde::Deserialize)]
struct GraphJson {
    n: u16,
    loops: bool,
    edges: Vec<Vec<u16>>,
}

pub fn graph_to_json(g: &Graph) -> String {
    let j = GraphJson {
        n: g.n(),
        loops: g.space().kind() == SpaceKind::PairsLoops,
        edges: g.index_sets(),
    };
    serde_json::to_string(&j).expect("serialize")
}

pub fn graph_from_json(s: &str) -> Result<Graph> {
    let j: GraphJson = serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))?;
    let sets: Vec<&[u16]> = j.edges.iter().map(|e| e.as_slice()).collect();
    Graph::from_edges(j.n, j.loops, &sets)
}
