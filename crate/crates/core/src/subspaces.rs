//! Affine embeddings of small graph spaces into larger ones.
//!
//! Two families are provided. A central embedding sends a loopless space
//! into a larger loopless space: a support set I picks out which vertices
//! carry the image, the map copies edge bits through the unique increasing
//! relabeling, and a constant part fills in the bits outside I. An HJ
//! embedding sends a looped space into a larger looped space: each domain
//! vertex expands to a wildcard set of target vertices, a domain loop
//! turns on everything inside its wildcard set, a domain edge turns on
//! every edge crossing between its two wildcard sets, and a constant part
//! fills the rest. Images of these maps are the subspaces along which
//! codes and polynomials are restricted elsewhere in the crate.
//!
//! Both kinds validate their shape at construction and are immutable
//! afterwards, so a value that exists is well formed.

use crate::codes::CodeFamily;
use crate::error::{Error, Result};
use crate::f2space::{EdgeIndexSet, GraphPoint, SpaceKind};
use crate::graphs::{graph_from_json, graph_to_json, Graph};

/// Affine injection of a loopless space Pairs(m) into Pairs(n), given by a
/// support set and a constant part vanishing on the support's pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CentralEmbedding {
    support: Vec<u16>,
    constant: GraphPoint,
    domain: EdgeIndexSet,
    // domain position -> codomain position, through the increasing relabeling
    pos_map: Vec<u32>,
    // codomain positions with both endpoints in the support
    inside_mask: u64,
}

impl CentralEmbedding {
    pub fn new(support: &[u16], constant: GraphPoint) -> Result<Self> {
        let space = constant.space();
        if space.kind() != SpaceKind::Pairs {
            return Err(Error::SpaceMismatch);
        }
        let n = space.n();
        if support.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !support.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Malformed("support must be strictly increasing".into()));
        }
        for &v in support {
            if v < 1 || v > n {
                return Err(Error::VertexOutOfRange(v));
            }
        }
        let m = support.len() as u16;
        let domain = EdgeIndexSet::pairs(m)?;
        let mut pos_map = Vec::with_capacity(domain.len() as usize);
        let mut inside_mask = 0u64;
        for d in 0..domain.len() {
            let (a, b) = domain.key_at(d).expect("in range");
            let target =
                space.position(&[support[a as usize - 1], support[b as usize - 1]])?;
            pos_map.push(target);
            inside_mask |= 1 << target;
        }
        if constant.bits() & inside_mask != 0 {
            return Err(Error::Malformed("constant part must vanish on the support pairs".into()));
        }
        Ok(CentralEmbedding { support: support.to_vec(), constant, domain, pos_map, inside_mask })
    }

    pub fn dim(&self) -> u16 {
        self.support.len() as u16
    }

    pub fn support(&self) -> &[u16] {
        &self.support
    }

    pub fn constant(&self) -> &GraphPoint {
        &self.constant
    }

    pub fn domain(&self) -> EdgeIndexSet {
        self.domain
    }

    pub fn codomain(&self) -> EdgeIndexSet {
        self.constant.space()
    }

    /// Image of x: support pairs carry x through the relabeling, everything
    /// else equals the constant part.
    pub fn apply(&self, x: &GraphPoint) -> Result<GraphPoint> {
        if x.space() != self.domain {
            return Err(Error::SpaceMismatch);
        }
        let mut bits = self.constant.bits();
        for (d, &target) in self.pos_map.iter().enumerate() {
            if x.bits() >> d & 1 == 1 {
                bits |= 1 << target;
            }
        }
        GraphPoint::from_bits(self.codomain(), bits)
    }

    /// The unique preimage of z, or None when z is outside the image.
    pub fn preimage_point(&self, z: &GraphPoint) -> Result<Option<GraphPoint>> {
        if z.space() != self.codomain() {
            return Err(Error::SpaceMismatch);
        }
        if (z.bits() ^ self.constant.bits()) & !self.inside_mask != 0 {
            return Ok(None);
        }
        let mut bits = 0u64;
        for (d, &target) in self.pos_map.iter().enumerate() {
            bits |= (z.bits() >> target & 1) << d;
        }
        Ok(Some(GraphPoint::from_bits(self.domain, bits)?))
    }

    /// Pull a family back through the embedding: y is a member of the result
    /// exactly when its image is a member of fam.
    pub fn preimage_family(&self, fam: &CodeFamily) -> Result<CodeFamily> {
        if fam.space() != self.codomain() {
            return Err(Error::SpaceMismatch);
        }
        let mut out = CodeFamily::empty(self.domain)?;
        for y in 0..self.domain.table_len()? as u64 {
            let image = self.apply(&GraphPoint::from_bits(self.domain, y)?)?;
            out.set(y, fam.contains(image.bits()));
        }
        Ok(out)
    }
}

/// The member of the section partition selected by the assignment x: the
/// embedding supported on a whose image is the coset of points agreeing
/// with x outside a's pairs. As x ranges over all assignments vanishing
/// inside those pairs, the images partition the whole space.
pub fn central_partition_of_section(a: &[u16], x: &GraphPoint) -> Result<CentralEmbedding> {
    if a.len() < 2 {
        return Err(Error::Malformed("section needs at least two vertices".into()));
    }
    CentralEmbedding::new(a, x.clone())
}

/// Affine injection of a looped space PairsLoops(m) into PairsLoops(n).
/// Domain vertex i owns the wildcard set I_i; the sets are pairwise
/// disjoint and listed in increasing order of their minima.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HjEmbedding {
    wildcards: Vec<Vec<u16>>,
    constant: GraphPoint,
    domain: EdgeIndexSet,
    // domain position q -> mask of the codomain positions tied to q: for a
    // loop q = {i} everything inside I_i, for an edge q = {i,j} every edge
    // crossing between I_i and I_j
    var_sets: Vec<u64>,
    block: bool,
}

impl HjEmbedding {
    pub fn new(wildcards: &[Vec<u16>], constant: GraphPoint) -> Result<Self> {
        let space = constant.space();
        if space.kind() != SpaceKind::PairsLoops {
            return Err(Error::SpaceMismatch);
        }
        let n = space.n();
        if wildcards.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut owner = vec![usize::MAX; n as usize + 1];
        for (i, set) in wildcards.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::EmptyInput);
            }
            if !set.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Malformed("wildcard set must be strictly increasing".into()));
            }
            for &v in set {
                if v < 1 || v > n {
                    return Err(Error::VertexOutOfRange(v));
                }
                if owner[v as usize] != usize::MAX {
                    return Err(Error::Malformed("wildcard sets must be pairwise disjoint".into()));
                }
                owner[v as usize] = i;
            }
        }
        if !wildcards.windows(2).all(|w| w[0][0] < w[1][0]) {
            return Err(Error::Malformed("wildcard sets must be ordered by their minima".into()));
        }
        let m = wildcards.len() as u16;
        let domain = EdgeIndexSet::pairs_loops(m)?;
        let mut var_sets = vec![0u64; domain.len() as usize];
        for p in 0..space.len() {
            let (u, v) = space.key_at(p).expect("in range");
            let (i, j) = (owner[u as usize], owner[v as usize]);
            if i == usize::MAX || j == usize::MAX {
                continue;
            }
            let q = if i == j {
                domain.position(&[i as u16 + 1])?
            } else {
                domain.position(&[i as u16 + 1, j as u16 + 1])?
            };
            var_sets[q as usize] |= 1 << p;
        }
        let span: u64 = var_sets.iter().fold(0, |acc, m| acc | m);
        if constant.bits() & span != 0 {
            return Err(Error::Malformed("constant part must vanish on the wildcard span".into()));
        }
        let block = wildcards
            .windows(2)
            .all(|w| w[0].last().unwrap() < w[1].first().unwrap());
        Ok(HjEmbedding { wildcards: wildcards.to_vec(), constant, domain, var_sets, block })
    }

    /// The identity map of a looped space: every vertex is its own
    /// singleton wildcard set and the constant part is zero.
    pub fn identity(space: EdgeIndexSet) -> Result<Self> {
        let sets: Vec<Vec<u16>> = (1..=space.n()).map(|v| vec![v]).collect();
        HjEmbedding::new(&sets, GraphPoint::zero(space))
    }

    pub fn dim(&self) -> u16 {
        self.wildcards.len() as u16
    }

    pub fn wildcards(&self) -> &[Vec<u16>] {
        &self.wildcards
    }

    pub fn constant(&self) -> &GraphPoint {
        &self.constant
    }

    pub fn domain(&self) -> EdgeIndexSet {
        self.domain
    }

    pub fn codomain(&self) -> EdgeIndexSet {
        self.constant.space()
    }

    /// Mask of codomain positions controlled by the domain position q.
    pub fn var_set(&self, q: u32) -> Option<u64> {
        self.var_sets.get(q as usize).copied()
    }

    /// True when consecutive wildcard sets occupy disjoint increasing
    /// vertex ranges.
    pub fn is_block(&self) -> bool {
        self.block
    }

    /// Image of x: every domain bit that is set floods its var set, the
    /// rest of the point equals the constant part.
    pub fn apply(&self, x: &GraphPoint) -> Result<GraphPoint> {
        if x.space() != self.domain {
            return Err(Error::SpaceMismatch);
        }
        let mut bits = self.constant.bits();
        for (q, &mask) in self.var_sets.iter().enumerate() {
            if x.bits() >> q & 1 == 1 {
                bits |= mask;
            }
        }
        GraphPoint::from_bits(self.codomain(), bits)
    }

    /// The unique preimage of z, or None when z is outside the image: z
    /// must agree with the constant part off the var sets and be constant
    /// on each var set.
    pub fn preimage_point(&self, z: &GraphPoint) -> Result<Option<GraphPoint>> {
        if z.space() != self.codomain() {
            return Err(Error::SpaceMismatch);
        }
        let span: u64 = self.var_sets.iter().fold(0, |acc, m| acc | m);
        if (z.bits() ^ self.constant.bits()) & !span != 0 {
            return Ok(None);
        }
        let mut bits = 0u64;
        for (q, &mask) in self.var_sets.iter().enumerate() {
            let on = z.bits() & mask;
            if on == mask {
                bits |= 1 << q;
            } else if on != 0 {
                return Ok(None);
            }
        }
        Ok(Some(GraphPoint::from_bits(self.domain, bits)?))
    }

    /// Pull a family back through the embedding: y is a member of the result
    /// exactly when its image is a member of fam. The result's density
    /// equals the conditional density of fam on the embedding's image.
    pub fn preimage_family(&self, fam: &CodeFamily) -> Result<CodeFamily> {
        if fam.space() != self.codomain() {
            return Err(Error::SpaceMismatch);
        }
        let mut out = CodeFamily::empty(self.domain)?;
        for y in 0..self.domain.table_len()? as u64 {
            let image = self.apply(&GraphPoint::from_bits(self.domain, y)?)?;
            out.set(y, fam.contains(image.bits()));
        }
        Ok(out)
    }
}

/// Composite of two embeddings, outer after inner. The wildcard set of
/// domain vertex t is the union of the outer sets picked out by inner's
/// t-th set, and the constant part is the outer image of inner's constant.
/// Ordering by minima survives composition because the minimum of a union
/// of outer sets is the minimum of the first one picked.
pub fn compose(outer: &HjEmbedding, inner: &HjEmbedding) -> Result<HjEmbedding> {
    if inner.codomain() != outer.domain() {
        return Err(Error::SpaceMismatch);
    }
    let mut sets = Vec::with_capacity(inner.dim() as usize);
    for group in inner.wildcards() {
        let mut merged: Vec<u16> = group
            .iter()
            .flat_map(|&i| outer.wildcards()[i as usize - 1].iter().copied())
            .collect();
        merged.sort_unstable();
        sets.push(merged);
    }
    HjEmbedding::new(&sets, outer.apply(inner.constant())?)
}

// ===========================================================================
// JSON form: {"n": 6, "wildcards": [[1,2],[4]], "constant": {...graph...}}
// ===========================================================================

#[derive(serde::Serialize, serde::Deserialize)]
struct HjEmbeddingJson {
    n: u16,
    wildcards: Vec<Vec<u16>>,
    constant: serde_json::Value,
}

pub fn hj_embedding_to_json(e: &HjEmbedding) -> String {
    let constant = graph_to_json(&Graph::new(e.constant().clone()).expect("valid point"));
    let j = HjEmbeddingJson {
        n: e.codomain().n(),
        wildcards: e.wildcards().to_vec(),
        constant: serde_json::from_str(&constant).expect("graph json"),
    };
    serde_json::to_string(&j).expect("serialize")
}

pub fn hj_embedding_from_json(s: &str) -> Result<HjEmbedding> {
    let j: HjEmbeddingJson = serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))?;
    let constant = graph_from_json(&j.constant.to_string())?;
    if constant.space() != EdgeIndexSet::pairs_loops(j.n)? {
        return Err(Error::Malformed("constant graph does not live on n looped vertices".into()));
    }
    HjEmbedding::new(&j.wildcards, constant.point())
}
