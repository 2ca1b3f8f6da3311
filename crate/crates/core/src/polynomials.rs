//! Polynomials on looped graph spaces with exact arithmetic: dyadic
//! torus-valued polynomials and their discrete derivatives, integer
//! polynomials mod 2^k, restriction to affine subspaces, coefficient
//! canonicalization by order type, degree lowering on block subspaces,
//! and a partitioning pipeline that cuts the space into subspaces on
//! which a given polynomial is constant.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::f2space::{EdgeIndexSet, GraphPoint, SpaceKind};
use crate::graphs::subsets_of_size;
use crate::rational::Dyadic;
use crate::subspaces::{compose, HjEmbedding};

/// Recursion nodes allowed in one partitioning run before giving up.
const PARTITION_NODE_BUDGET: u64 = 100_000;

/// Largest exponent a accepted when reporting stage counts for 2^-a
/// cover fractions; beyond this the interval arithmetic gets slow
/// without being any more illuminating.
const MAX_ETA1_EXPONENT: u128 = 32_768;

// ===========================================================================
// Dyadic torus values
// ===========================================================================

/// An element j/2^a of the circle group R/Z, stored reduced: either
/// j = 0, a = 0, or j odd with 0 < j < 2^a. Addition is exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicTorus {
    j: u64,
    a: u32,
}

impl DyadicTorus {
    pub fn new(j: u64, a: u32) -> Result<Self> {
        if a > 62 {
            return Err(Error::UnsupportedExponent);
        }
        let mut j = j & ((1u64 << a) - 1);
        let mut a = a;
        while j != 0 && j & 1 == 0 {
            j >>= 1;
            a -= 1;
        }
        if j == 0 {
            a = 0;
        }
        Ok(DyadicTorus { j, a })
    }

    pub fn zero() -> Self {
        DyadicTorus { j: 0, a: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.j == 0
    }

    pub fn numerator(&self) -> u64 {
        self.j
    }

    pub fn exponent(&self) -> u32 {
        self.a
    }

    /// Integer multiple t·(j/2^a) on the circle.
    pub fn times(&self, t: u64) -> Self {
        if self.a == 0 {
            return DyadicTorus::zero();
        }
        let modulus = 1u128 << self.a;
        let prod = (self.j as u128 * (t as u128 % modulus)) % modulus;
        DyadicTorus::new(prod as u64, self.a).expect("exponent already in range")
    }

    pub fn to_f64(&self) -> f64 {
        self.j as f64 / 2f64.powi(self.a as i32)
    }
}

impl Add for DyadicTorus {
    type Output = DyadicTorus;
    fn add(self, rhs: DyadicTorus) -> DyadicTorus {
        let a = self.a.max(rhs.a);
        let x = self.j << (a - self.a);
        let y = rhs.j << (a - rhs.a);
        let modulus = if a == 0 { 1 } else { 1u64 << a };
        DyadicTorus::new((x + y) % modulus, a).expect("exponent already in range")
    }
}

impl Neg for DyadicTorus {
    type Output = DyadicTorus;
    fn neg(self) -> DyadicTorus {
        if self.j == 0 {
            return self;
        }
        DyadicTorus::new((1u64 << self.a) - self.j, self.a).expect("exponent already in range")
    }
}

impl Sub for DyadicTorus {
    type Output = DyadicTorus;
    fn sub(self, rhs: DyadicTorus) -> DyadicTorus {
        self + (-rhs)
    }
}

impl fmt::Display for DyadicTorus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.j == 0 {
            write!(f, "0")
        } else {
            write!(f, "{}/2^{}", self.j, self.a)
        }
    }
}

// ===========================================================================
// Torus-valued polynomials
// ===========================================================================

/// A function F₂^N -> R/Z of the shape
///     P(x) = alpha + sum over S of lambda_S * prod_{i in S} x(i)   (mod 1)
/// with every lambda_S of the form j/2^{d-|S|+1}. Functions of this
/// shape are exactly those whose (d+1)-fold differences vanish, and the
/// multilinear representation above is unique, so the true degree of P
/// can be read off the reduced coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NonclassicalPoly {
    space: EdgeIndexSet,
    d: u32,
    alpha: DyadicTorus,
    coeffs: BTreeMap<Vec<u32>, DyadicTorus>,
}

impl NonclassicalPoly {
    pub fn new(
        space: EdgeIndexSet,
        d: u32,
        alpha: DyadicTorus,
        coeffs: &[(Vec<u32>, DyadicTorus)],
    ) -> Result<Self> {
        if space.kind() != SpaceKind::PairsLoops {
            return Err(Error::SpaceMismatch);
        }
        let mut map = BTreeMap::new();
        for (s, lam) in coeffs {
            if s.is_empty() {
                return Err(Error::EmptyInput);
            }
            if !s.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Malformed("monomial indices must be strictly increasing".into()));
            }
            for &p in s {
                if p >= space.len() {
                    return Err(Error::PositionOutOfRange(p));
                }
            }
            if lam.is_zero() {
                continue;
            }
            let size = s.len();
            if size as u32 > d || lam.exponent() > d - size as u32 + 1 {
                return Err(Error::MalformedCoefficient { size, exp: lam.exponent() });
            }
            if map.insert(s.clone(), *lam).is_some() {
                return Err(Error::Malformed("duplicate monomial".into()));
            }
        }
        Ok(NonclassicalPoly { space, d, alpha, coeffs: map })
    }

    pub fn space(&self) -> EdgeIndexSet {
        self.space
    }

    pub fn degree_bound(&self) -> u32 {
        self.d
    }

    pub fn alpha(&self) -> DyadicTorus {
        self.alpha
    }

    pub fn coeffs(&self) -> &BTreeMap<Vec<u32>, DyadicTorus> {
        &self.coeffs
    }

    pub fn eval(&self, x: &GraphPoint) -> Result<DyadicTorus> {
        if x.space() != self.space {
            return Err(Error::SpaceMismatch);
        }
        let mut acc = self.alpha;
        for (s, lam) in &self.coeffs {
            if s.iter().all(|&p| x.bits() >> p & 1 == 1) {
                acc = acc + *lam;
            }
        }
        Ok(acc)
    }

    /// The degree of the monomial lambda_S x^S with lambda_S = j/2^c
    /// reduced is |S| + c - 1; the true degree of P is the largest such
    /// value, and 0 for a constant.
    pub fn true_degree(&self) -> u32 {
        self.coeffs
            .iter()
            .map(|(s, lam)| s.len() as u32 + lam.exponent() - 1)
            .max()
            .unwrap_or(0)
    }

    /// Full value table, indexed by the bit pattern of the point.
    pub fn value_table(&self) -> Result<Vec<DyadicTorus>> {
        let len = self.space.table_len()?;
        let mut table = vec![DyadicTorus::zero(); len];
        table[0] = self.alpha;
        for (s, lam) in &self.coeffs {
            let mask: usize = s.iter().fold(0, |m, &p| m | 1usize << p);
            table[mask] = table[mask] + *lam;
        }
        for i in 0..self.space.len() {
            let bit = 1usize << i;
            for x in 0..len {
                if x & bit != 0 {
                    table[x] = table[x] + table[x ^ bit];
                }
            }
        }
        Ok(table)
    }

    /// Recover the unique multilinear representation from a value table
    /// by inverting the subset-sum transform one coordinate at a time.
    pub fn from_values(space: EdgeIndexSet, values: &[DyadicTorus]) -> Result<Self> {
        if space.kind() != SpaceKind::PairsLoops {
            return Err(Error::SpaceMismatch);
        }
        let len = space.table_len()?;
        if values.len() != len {
            return Err(Error::Malformed(format!(
                "value table has {} entries, the space needs {}",
                values.len(),
                len
            )));
        }
        let mut t = values.to_vec();
        for i in 0..space.len() {
            let bit = 1usize << i;
            for x in 0..len {
                if x & bit != 0 {
                    t[x] = t[x] - t[x ^ bit];
                }
            }
        }
        let alpha = t[0];
        let mut coeffs = Vec::new();
        let mut d = 0u32;
        for (mask, lam) in t.iter().enumerate().skip(1) {
            if lam.is_zero() {
                continue;
            }
            let s: Vec<u32> = (0..space.len()).filter(|&p| mask >> p & 1 == 1).collect();
            d = d.max(s.len() as u32 + lam.exponent() - 1);
            coeffs.push((s, *lam));
        }
        NonclassicalPoly::new(space, d, alpha, &coeffs)
    }

    /// Difference in direction h: x -> P(x + h) - P(x). The result's
    /// true degree is strictly below the input's unless P is constant,
    /// and this is asserted rather than assumed.
    pub fn derivative(&self, h: &GraphPoint) -> Result<NonclassicalPoly> {
        if h.space() != self.space {
            return Err(Error::SpaceMismatch);
        }
        let table = self.value_table()?;
        let mut diff = vec![DyadicTorus::zero(); table.len()];
        for (x, item) in diff.iter_mut().enumerate() {
            *item = table[x ^ h.bits() as usize] - table[x];
        }
        let out = NonclassicalPoly::from_values(self.space, &diff)?;
        if self.true_degree() == 0 {
            assert!(
                out.true_degree() == 0 && out.alpha.is_zero() && out.coeffs.is_empty(),
                "difference of a constant must vanish"
            );
        } else {
            assert!(
                out.true_degree() < self.true_degree(),
                "a difference must lower the true degree"
            );
        }
        Ok(out)
    }
}

/// Spelled-out form of `NonclassicalPoly::eval`.
pub fn eval_nonclassical(p: &NonclassicalPoly, x: &GraphPoint) -> Result<DyadicTorus> {
    p.eval(x)
}

// ===========================================================================
// Integer polynomials mod 2^k
// ===========================================================================

/// A function F₂^N -> Z_{2^k} of the shape
///     Q(x) = alpha + sum over F of lambda_F * prod_{e in F} x(e)   (mod 2^k)
/// with F ranging over nonempty sets of at most d coordinates. The
/// multilinear representation mod 2^k is unique, so the true degree is
/// the largest |F| with a nonzero reduced coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerPoly {
    space: EdgeIndexSet,
    k: u32,
    d: u32,
    alpha: u64,
    coeffs: BTreeMap<Vec<u32>, u64>,
}

impl IntegerPoly {
    pub fn new(
        space: EdgeIndexSet,
        k: u32,
        d: u32,
        alpha: u64,
        coeffs: &[(Vec<u32>, u64)],
    ) -> Result<Self> {
        if space.kind() != SpaceKind::PairsLoops {
            return Err(Error::SpaceMismatch);
        }
        if k == 0 || k > 32 {
            return Err(Error::UnsupportedExponent);
        }
        let mask = (1u64 << k) - 1;
        let mut map = BTreeMap::new();
        for (f, lam) in coeffs {
            if f.is_empty() {
                return Err(Error::EmptyInput);
            }
            if !f.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Malformed("monomial indices must be strictly increasing".into()));
            }
            for &p in f {
                if p >= space.len() {
                    return Err(Error::PositionOutOfRange(p));
                }
            }
            if f.len() as u32 > d {
                return Err(Error::MalformedCoefficient { size: f.len(), exp: k });
            }
            let reduced = lam & mask;
            if reduced == 0 {
                continue;
            }
            if map.insert(f.clone(), reduced).is_some() {
                return Err(Error::Malformed("duplicate monomial".into()));
            }
        }
        Ok(IntegerPoly { space, k, d, alpha: alpha & mask, coeffs: map })
    }

    pub fn space(&self) -> EdgeIndexSet {
        self.space
    }

    pub fn modulus_exponent(&self) -> u32 {
        self.k
    }

    pub fn degree_bound(&self) -> u32 {
        self.d
    }

    pub fn alpha(&self) -> u64 {
        self.alpha
    }

    pub fn coeffs(&self) -> &BTreeMap<Vec<u32>, u64> {
        &self.coeffs
    }

    /// Largest monomial size with a nonzero reduced coefficient.
    pub fn true_degree(&self) -> u32 {
        self.coeffs.keys().map(|f| f.len() as u32).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &GraphPoint) -> Result<u64> {
        if x.space() != self.space {
            return Err(Error::SpaceMismatch);
        }
        let mut acc = self.alpha;
        for (f, lam) in &self.coeffs {
            if f.iter().all(|&p| x.bits() >> p & 1 == 1) {
                acc = acc.wrapping_add(*lam);
            }
        }
        Ok(acc & ((1u64 << self.k) - 1))
    }

    pub fn value_table(&self) -> Result<Vec<u64>> {
        let len = self.space.table_len()?;
        let mask = (1u64 << self.k) - 1;
        let mut table = vec![0u64; len];
        table[0] = self.alpha;
        for (f, lam) in &self.coeffs {
            let m: usize = f.iter().fold(0, |acc, &p| acc | 1usize << p);
            table[m] = (table[m] + lam) & mask;
        }
        for i in 0..self.space.len() {
            let bit = 1usize << i;
            for x in 0..len {
                if x & bit != 0 {
                    table[x] = (table[x] + table[x ^ bit]) & mask;
                }
            }
        }
        Ok(table)
    }

    /// Recover the unique multilinear representation mod 2^k from a
    /// value table.
    pub fn from_values(space: EdgeIndexSet, k: u32, values: &[u64]) -> Result<Self> {
        if space.kind() != SpaceKind::PairsLoops {
            return Err(Error::SpaceMismatch);
        }
        if k == 0 || k > 32 {
            return Err(Error::UnsupportedExponent);
        }
        let len = space.table_len()?;
        if values.len() != len {
            return Err(Error::Malformed(format!(
                "value table has {} entries, the space needs {}",
                values.len(),
                len
            )));
        }
        let mask = (1u64 << k) - 1;
        let mut t: Vec<u64> = values.iter().map(|v| v & mask).collect();
        for i in 0..space.len() {
            let bit = 1usize << i;
            for x in 0..len {
                if x & bit != 0 {
                    t[x] = t[x].wrapping_sub(t[x ^ bit]) & mask;
                }
            }
        }
        let alpha = t[0];
        let mut coeffs = Vec::new();
        let mut d = 0u32;
        for (m, &lam) in t.iter().enumerate().skip(1) {
            if lam == 0 {
                continue;
            }
            let f: Vec<u32> = (0..space.len()).filter(|&p| m >> p & 1 == 1).collect();
            d = d.max(f.len() as u32);
            coeffs.push((f, lam));
        }
        IntegerPoly::new(space, k, d.max(1), alpha, &coeffs)
    }

    /// Pull back through an affine embedding: the returned polynomial R
    /// on the embedding's domain satisfies R(y) = Q(e(y)) everywhere.
    /// Monomials entirely inside the constant region feed the new alpha;
    /// monomials touching a coordinate that is neither constant-one nor
    /// controlled by a wildcard vanish; the rest accumulate on the set T
    /// of domain coordinates they touch. The degree bound carries over.
    pub fn restrict_to_hj(&self, e: &HjEmbedding) -> Result<IntegerPoly> {
        if e.codomain() != self.space {
            return Err(Error::SpaceMismatch);
        }
        let dom = e.domain();
        let mut owner: Vec<Option<u32>> = vec![None; self.space.len() as usize];
        for q in 0..dom.len() {
            let mask = e.var_set(q).expect("domain position in range");
            for p in 0..self.space.len() {
                if mask >> p & 1 == 1 {
                    owner[p as usize] = Some(q);
                }
            }
        }
        let cbits = e.constant().bits();
        let modmask = (1u64 << self.k) - 1;
        let mut alpha = self.alpha;
        let mut buckets: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
        'monomials: for (f, lam) in &self.coeffs {
            let mut hits: BTreeSet<u32> = BTreeSet::new();
            for &p in f {
                if cbits >> p & 1 == 1 {
                    continue;
                }
                match owner[p as usize] {
                    Some(q) => {
                        hits.insert(q);
                    }
                    None => continue 'monomials,
                }
            }
            if hits.is_empty() {
                alpha = (alpha + lam) & modmask;
            } else {
                let t: Vec<u32> = hits.into_iter().collect();
                let slot = buckets.entry(t).or_insert(0);
                *slot = (*slot + lam) & modmask;
            }
        }
        let coeffs: Vec<(Vec<u32>, u64)> =
            buckets.into_iter().filter(|(_, lam)| *lam != 0).collect();
        IntegerPoly::new(dom, self.k, self.d, alpha, &coeffs)
    }
}

/// Spelled-out form of `IntegerPoly::restrict_to_hj`.
pub fn restrict_to_hj(q: &IntegerPoly, e: &HjEmbedding) -> Result<IntegerPoly> {
    q.restrict_to_hj(e)
}

/// Rewrite a torus-valued polynomial of degree bound d as an integer
/// polynomial mod 2^d: each lambda_S = j/2^c becomes j·2^{d-c}, and
///     P(x) = alpha + Q(x)/2^d   (mod 1)
/// holds pointwise. A constant input yields the zero polynomial mod 2.
pub fn to_integer_poly(p: &NonclassicalPoly) -> Result<(IntegerPoly, DyadicTorus)> {
    let d = p.degree_bound();
    let k = d.max(1);
    let mut coeffs = Vec::new();
    for (s, lam) in p.coeffs() {
        if lam.exponent() > d {
            return Err(Error::MalformedCoefficient { size: s.len(), exp: lam.exponent() });
        }
        coeffs.push((s.clone(), lam.numerator() << (d - lam.exponent())));
    }
    let q = IntegerPoly::new(p.space(), k, d.max(1), 0, &coeffs)?;
    Ok((q, p.alpha()))
}

// ===========================================================================
// Order types of monomials and canonical coefficient patterns
// ===========================================================================

/// Order-isomorphism class of a set F of vertex sets: ell is the size
/// of the union, and the pattern records each member as the set of
/// ranks its vertices occupy inside the sorted union. Two F's get the
/// same signature exactly when the increasing bijection between their
/// unions carries one onto the other.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeSignature {
    pub ell: usize,
    pub pattern: BTreeSet<Vec<usize>>,
}

/// Signature of a set of nonempty vertex sets.
pub fn type_of(f: &[Vec<u16>]) -> Result<TypeSignature> {
    if f.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut members: BTreeSet<Vec<u16>> = BTreeSet::new();
    let mut union: BTreeSet<u16> = BTreeSet::new();
    for member in f {
        if member.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut m = member.clone();
        m.sort_unstable();
        m.dedup();
        union.extend(m.iter().copied());
        members.insert(m);
    }
    let rank: HashMap<u16, usize> =
        union.iter().enumerate().map(|(i, &v)| (v, i + 1)).collect();
    let pattern = members
        .into_iter()
        .map(|m| m.into_iter().map(|v| rank[&v]).collect::<Vec<usize>>())
        .collect();
    Ok(TypeSignature { ell: union.len(), pattern })
}

fn key_as_vertex_set(space: EdgeIndexSet, p: u32) -> Result<Vec<u16>> {
    let (u, v) = space.key_at(p).ok_or(Error::PositionOutOfRange(p))?;
    Ok(if u == v { vec![u] } else { vec![u, v] })
}

/// Visit every subset of the given size, in lexicographic order.
fn for_each_subset<F: FnMut(&[u32]) -> Result<bool>>(
    items: &[u32],
    size: usize,
    f: &mut F,
) -> Result<bool> {
    fn rec<F: FnMut(&[u32]) -> Result<bool>>(
        items: &[u32],
        size: usize,
        start: usize,
        picked: &mut Vec<u32>,
        f: &mut F,
    ) -> Result<bool> {
        if picked.len() == size {
            return f(picked);
        }
        let remaining = size - picked.len();
        let mut i = start;
        while i + remaining <= items.len() {
            picked.push(items[i]);
            if !rec(items, size, i + 1, picked, f)? {
                picked.pop();
                return Ok(false);
            }
            picked.pop();
            i += 1;
        }
        Ok(true)
    }
    rec(items, size, 0, &mut Vec::with_capacity(size), f)
}

/// Whether the coefficient pattern of q is constant on order types
/// inside X: all monomials supported on coordinates with both endpoints
/// in X, of equal type and size at most the degree bound, must carry
/// the same coefficient; absent monomials count as zero.
pub fn is_canonical_in(q: &IntegerPoly, x_set: &[u16]) -> Result<bool> {
    let space = q.space();
    let n = space.n();
    if !x_set.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Malformed("vertex set must be strictly increasing".into()));
    }
    for &v in x_set {
        if v < 1 || v > n {
            return Err(Error::VertexOutOfRange(v));
        }
    }
    let inside: Vec<bool> = {
        let mut m = vec![false; n as usize + 1];
        for &v in x_set {
            m[v as usize] = true;
        }
        m
    };
    let coords: Vec<u32> = (0..space.len())
        .filter(|&p| {
            let (u, v) = space.key_at(p).expect("in range");
            inside[u as usize] && inside[v as usize]
        })
        .collect();
    let mut seen: HashMap<TypeSignature, u64> = HashMap::new();
    for size in 1..=q.degree_bound() as usize {
        if size > coords.len() {
            break;
        }
        let mut ok = true;
        for_each_subset(&coords, size, &mut |f| {
            let lam = q.coeffs().get(f).copied().unwrap_or(0);
            let sets: Vec<Vec<u16>> = f
                .iter()
                .map(|&p| key_as_vertex_set(space, p))
                .collect::<Result<_>>()?;
            let sig = type_of(&sets)?;
            match seen.get(&sig) {
                Some(&prev) if prev != lam => {
                    ok = false;
                    Ok(false)
                }
                Some(_) => Ok(true),
                None => {
                    seen.insert(sig, lam);
                    Ok(true)
                }
            }
        })?;
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// How to look for a canonical vertex set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CanonicalStrategy {
    /// Scan all r-subsets of the vertices in lexicographic order.
    Exhaustive,
    /// Grow the set one vertex at a time, keeping a vertex only if the
    /// set stays canonical. Fast, but can miss sets the scan would find.
    Greedy,
}

/// A vertex set of the requested size on which q's coefficients are
/// canonical, or None when the search exhausts its options. At small n
/// a miss is a legitimate outcome, not an error: the guarantee that a
/// canonical set exists only kicks in at Ramsey-sized n.
pub fn find_canonical_set(
    q: &IntegerPoly,
    r: u16,
    strategy: CanonicalStrategy,
) -> Result<Option<Vec<u16>>> {
    let n = q.space().n();
    if r > n {
        return Err(Error::Malformed(format!(
            "requested a canonical set of {r} vertices in a {n}-vertex space"
        )));
    }
    match strategy {
        CanonicalStrategy::Exhaustive => {
            for cand in subsets_of_size(n, r) {
                if is_canonical_in(q, &cand)? {
                    return Ok(Some(cand));
                }
            }
            Ok(None)
        }
        CanonicalStrategy::Greedy => {
            let mut x: Vec<u16> = Vec::with_capacity(r as usize);
            for v in 1..=n {
                x.push(v);
                if !is_canonical_in(q, &x)? {
                    x.pop();
                }
                if x.len() == r as usize {
                    return Ok(Some(x));
                }
            }
            Ok(None)
        }
    }
}

// ===========================================================================
// Distributed types
// ===========================================================================

/// Position data of a monomial F relative to a wildcard profile
/// I_1, ..., I_m: dlp_i is the part of the union of F inside I_i, dsg_i
/// its size, and dt_i records, for each member of F in lexicographic
/// order, which ranks inside dlp_i that member occupies. Monomials are
/// grouped by dt alone when counting: dt determines the order type, and
/// the number of monomials sharing a dt value is what the divisibility
/// argument controls. dlp pins the concrete vertices and differs within
/// a group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistributedType {
    pub dlp: Vec<Vec<u16>>,
    pub dsg: Vec<usize>,
    pub dt: Vec<Vec<Vec<usize>>>,
}

/// Distributed type of F (a lexicographically sorted list of vertex
/// sets) with respect to pairwise disjoint wildcard sets.
pub fn distributed_type(f: &[Vec<u16>], wildcards: &[Vec<u16>]) -> Result<DistributedType> {
    if f.is_empty() || wildcards.is_empty() {
        return Err(Error::EmptyInput);
    }
    for member in f {
        if member.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !member.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Malformed("each member must be strictly increasing".into()));
        }
    }
    if !f.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Malformed(
            "members must be listed in increasing lexicographic order".into(),
        ));
    }
    let mut owner: HashMap<u16, usize> = HashMap::new();
    for (i, set) in wildcards.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !set.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Malformed("wildcard sets must be strictly increasing".into()));
        }
        for &v in set {
            if owner.insert(v, i).is_some() {
                return Err(Error::Malformed("wildcard sets must be pairwise disjoint".into()));
            }
        }
    }
    let mut union: BTreeSet<u16> = BTreeSet::new();
    for member in f {
        for &v in member {
            if !owner.contains_key(&v) {
                return Err(Error::OutsideWildcards);
            }
            union.insert(v);
        }
    }
    let m = wildcards.len();
    let mut dlp: Vec<Vec<u16>> = vec![Vec::new(); m];
    for &v in &union {
        dlp[owner[&v]].push(v);
    }
    let dsg: Vec<usize> = dlp.iter().map(|d| d.len()).collect();
    let mut rank: HashMap<u16, (usize, usize)> = HashMap::new();
    for (i, part) in dlp.iter().enumerate() {
        for (r, &v) in part.iter().enumerate() {
            rank.insert(v, (i, r + 1));
        }
    }
    let mut dt: Vec<Vec<Vec<usize>>> = vec![Vec::new(); m];
    for member in f {
        let mut per_wild: Vec<Vec<usize>> = vec![Vec::new(); m];
        for &v in member {
            let (i, r) = rank[&v];
            per_wild[i].push(r);
        }
        for (i, mut ranks) in per_wild.into_iter().enumerate() {
            ranks.sort_unstable();
            dt[i].push(ranks);
        }
    }
    Ok(DistributedType { dlp, dsg, dt })
}

// ===========================================================================
// Degree lowering
// ===========================================================================

fn checked_factorial(v: u32) -> Result<u64> {
    let mut acc = 1u64;
    for t in 2..=v as u64 {
        acc = acc
            .checked_mul(t)
            .ok_or_else(|| Error::TooLarge("factorial exceeds 64 bits".into()))?;
    }
    Ok(acc)
}

/// Block size that forces the degree to drop: (d+1)! * 2^k.
pub fn lowering_block_size(d: u32, k: u32) -> Result<u64> {
    if k > 32 {
        return Err(Error::UnsupportedExponent);
    }
    checked_factorial(d + 1)?
        .checked_mul(1u64 << k)
        .ok_or_else(|| Error::TooLarge("block size exceeds 64 bits".into()))
}

/// Restrict q through a block embedding whose wildcard sets live inside
/// a vertex set X where q's coefficients are canonical, each of size
/// (d+1)!·2^k for d the true degree. Under these hypotheses the top
/// coefficients cancel in groups of size divisible by 2^k, so the true
/// degree strictly drops; the drop is asserted, not assumed.
pub fn degree_lowering_restrict(
    q: &IntegerPoly,
    x_set: &[u16],
    e: &HjEmbedding,
) -> Result<IntegerPoly> {
    let d = q.true_degree();
    if d == 0 {
        return Err(Error::Malformed("the polynomial must have degree at least one".into()));
    }
    if e.codomain() != q.space() {
        return Err(Error::SpaceMismatch);
    }
    if !e.is_block() {
        return Err(Error::NotBlock);
    }
    let want = lowering_block_size(d, q.modulus_exponent())? as usize;
    let in_x: BTreeSet<u16> = x_set.iter().copied().collect();
    for set in e.wildcards() {
        if set.len() != want {
            return Err(Error::WrongBlockSize { got: set.len(), want });
        }
        if !set.iter().all(|v| in_x.contains(v)) {
            return Err(Error::Malformed("wildcard sets must lie inside the canonical set".into()));
        }
    }
    if !is_canonical_in(q, x_set)? {
        return Err(Error::NotCanonical);
    }
    let restricted = q.restrict_to_hj(e)?;
    assert!(
        restricted.true_degree() < d,
        "canonical coefficients with block size {want} must lower the degree"
    );
    Ok(restricted)
}

// ===========================================================================
// Stage counts and exact cover fractions
// ===========================================================================

/// Exact parameters for a partitioning run: the cover fraction eta1
/// collected by one stage, the number of stages needed to push the
/// leftover below eta, the block size, the vertex budget r, and the
/// symbolic Ramsey-type bound on n that the full guarantee demands.
#[derive(Clone, Debug)]
pub struct PartitionParams {
    pub eta: Dyadic,
    pub m: u32,
    pub k: u32,
    pub d: u32,
    pub eta1: Dyadic,
    pub ell: BigInt,
    pub block_size: u64,
    pub r: BigInt,
    pub ramsey_symbol: String,
}

/// Minimal ell with (1 - 2^-a)^ell < eta, by exact repeated
/// multiplication. Returns None when the estimated count is too large
/// for this route.
fn stage_count_iterative(eta: &Dyadic, a: u64) -> Option<BigInt> {
    // ln(1/eta) <= den_exp * ln 2, so ell <= den_exp * ln2 * 2^a + 1.
    let rough = (eta.den_exp() as f64) * 0.6932 * 2f64.powi(a as i32);
    if !(rough <= 20_000.0) {
        return None;
    }
    let base = &Dyadic::one() - &Dyadic::pow2(-(a as i64));
    let mut p = Dyadic::one();
    let mut ell: u64 = 0;
    loop {
        if p < *eta {
            return Some(BigInt::from(ell));
        }
        ell += 1;
        p = &p * &base;
        if ell > 50_000 {
            return None;
        }
    }
}

struct Interval {
    lo: BigInt,
    hi: BigInt,
}

/// Bounds on ln(u/v) for u/v in [1, 2), as fixed-point integers scaled
/// by 2^prec, via the odd series for 2·atanh(z) with z = (u-v)/(u+v)
/// in [0, 1/3]. All roundings are directed so the interval is rigorous.
fn ln_bounds_in_unit_range(u: &BigInt, v: &BigInt, prec: u64) -> Interval {
    let num = u - v;
    if num.is_zero() {
        return Interval { lo: BigInt::zero(), hi: BigInt::zero() };
    }
    let den = u + v;
    let z_lo = (&num << prec as usize) / &den;
    let z_hi = ((&num << prec as usize) + (&den - 1)) / &den;
    let zsq_lo = (&z_lo * &z_lo) >> prec as usize;
    let round = (BigInt::from(1) << prec as usize) - 1;
    let zsq_hi = (&z_hi * &z_hi + &round) >> prec as usize;
    let mut pow_lo = z_lo;
    let mut pow_hi = z_hi;
    let mut sum_lo = BigInt::zero();
    let mut sum_hi = BigInt::zero();
    let mut t: u64 = 0;
    loop {
        let odd = BigInt::from(2 * t + 1);
        sum_lo += &pow_lo / &odd;
        sum_hi += (&pow_hi + (&odd - 1)) / &odd;
        pow_lo = (&pow_lo * &zsq_lo) >> prec as usize;
        pow_hi = (&pow_hi * &zsq_hi + &round) >> prec as usize;
        t += 1;
        if pow_hi < BigInt::from(2) {
            break;
        }
    }
    // remaining terms are bounded by pow_hi / (1 - z^2) <= 9/8 * pow_hi
    let tail = (BigInt::from(9) * &pow_hi) / 8 + 1;
    Interval { lo: sum_lo << 1, hi: (sum_hi + tail) << 1 }
}

fn ln2_bounds(prec: u64) -> Interval {
    ln_bounds_in_unit_range(&BigInt::from(2), &BigInt::from(1), prec)
}

/// Bounds on -ln(1 - 2^-a) = sum over t >= 1 of 2^-at / t.
fn neg_ln_one_minus_pow2(a: u64, prec: u64) -> Interval {
    let mut lo = BigInt::zero();
    let mut hi = BigInt::zero();
    let mut t: u64 = 1;
    while a * t <= prec {
        let term = BigInt::from(1) << (prec - a * t) as usize;
        let tt = BigInt::from(t);
        lo += &term / &tt;
        hi += (&term + (&tt - 1)) / &tt;
        t += 1;
    }
    // the dropped tail is below 2 * 2^{prec - a(t+1)} <= 2
    Interval { lo, hi: hi + 2 }
}

/// Bounds on ln(1/eta) > 0 for 0 < eta < 1.
fn ln_inverse_bounds(eta: &Dyadic, prec: u64) -> Interval {
    let j = eta.num().clone();
    let b = eta.den_exp();
    let ln2 = ln2_bounds(prec);
    if j == BigInt::from(1) {
        return Interval { lo: &ln2.lo * b, hi: &ln2.hi * b };
    }
    let e = j.bits() - 1;
    let lnx = ln_bounds_in_unit_range(&j, &(BigInt::from(1) << e as usize), prec);
    let scale = BigInt::from(b - e);
    Interval { lo: &scale * &ln2.lo - lnx.hi, hi: &scale * &ln2.hi - lnx.lo }
}

/// Minimal ell with (1 - 2^-a)^ell < eta via rigorous fixed-point
/// logarithms: the ratio ln(1/eta) / -ln(1-2^-a) is bracketed with
/// directed rounding, and ell is its floor plus one. Precision doubles
/// until the bracket pins a single integer.
fn stage_count_by_logs(eta: &Dyadic, a: u64) -> Result<BigInt> {
    if eta.den_exp() > 1 << 20 {
        return Err(Error::TooLarge("the leftover target is too fine to report on".into()));
    }
    let mut prec: u64 = a + eta.den_exp() + 96;
    for _ in 0..4 {
        let num = ln_inverse_bounds(eta, prec);
        if num.lo.is_positive() {
            let den = neg_ln_one_minus_pow2(a, prec);
            let rho_lo = (&num.lo << prec as usize) / &den.hi;
            let rho_hi = ((&num.hi << prec as usize) + (&den.lo - 1)) / &den.lo;
            let floor_lo = &rho_lo >> prec as usize;
            let floor_hi = &rho_hi >> prec as usize;
            if floor_lo == floor_hi {
                return Ok(floor_lo + 1);
            }
        }
        prec *= 2;
    }
    Err(Error::TooLarge("the stage count sits too close to an integer to pin down".into()))
}

/// Exact stage parameters for degree d, modulus 2^k, dimension m, and
/// leftover target eta. The one-stage cover fraction is
/// eta1 = 2^{(m(m+1) - sm(sm+1))/2} with s = 2^k (d+1)! and sm = s·m;
/// ell is the least number of stages with (1-eta1)^ell < eta, certified
/// either by exact rational powering or by the interval logarithm; and
/// the guarantee needs n at least a Ramsey-type tower, reported as a
/// symbol since no computation at that size is possible.
pub fn paper_params(eta: &Dyadic, m: u32, k: u32, d: u32) -> Result<PartitionParams> {
    if m == 0 || d == 0 {
        return Err(Error::Malformed("dimension and degree must be positive".into()));
    }
    if eta.is_zero() || eta.is_negative() || *eta >= Dyadic::one() {
        return Err(Error::Malformed("the leftover target must lie strictly between 0 and 1".into()));
    }
    let s = lowering_block_size(d, k)?;
    let sm = (s as u128) * (m as u128);
    let a = (sm * (sm + 1) - (m as u128) * (m as u128 + 1)) / 2;
    if a > MAX_ETA1_EXPONENT {
        return Err(Error::TooLarge(format!(
            "one stage covers only 2^-{a} of the space; counting stages at this size is pointless"
        )));
    }
    let a = a as u64;
    let eta1 = Dyadic::pow2(-(a as i64));
    let ell = match stage_count_iterative(eta, a) {
        Some(ell) => {
            // certify minimality with exact powers
            let base = &Dyadic::one() - &eta1;
            let e = ell.to_u64().expect("iterative counts are small");
            debug_assert!(base.pow(e) < *eta);
            debug_assert!(e == 0 || base.pow(e - 1) >= *eta);
            ell
        }
        None => stage_count_by_logs(eta, a)?,
    };
    let r = BigInt::from(s) * m * &ell;
    let tower = BigInt::from(k) << (2 * (d as usize) * (d as usize) + d as usize);
    let ramsey_symbol =
        format!("R({}, {}, 2^{})", 2 * d, &r + (2 * d - 1), tower);
    Ok(PartitionParams {
        eta: eta.clone(),
        m,
        k,
        d,
        eta1,
        ell,
        block_size: s,
        r,
        ramsey_symbol,
    })
}

// ===========================================================================
// Stage construction
// ===========================================================================

/// One round of stages: stage j holds the subspaces whose points are
/// constant on the j-th block's coordinate groups but on no earlier
/// block's, so the stages are pairwise disjoint and their measures
/// decay geometrically.
#[derive(Clone, Debug)]
pub struct PartitionStages {
    pub stages: Vec<Vec<HjEmbedding>>,
    pub eta1: Dyadic,
    pub stage_measures: Vec<Dyadic>,
    pub leftover: Dyadic,
}

/// Carve ell stages of m-dimensional block subspaces out of the first
/// s·m·ell vertices of X. Block j uses vertices (j-1)·s·m+1 .. j·s·m of
/// X, split into m wildcard sets of size s. A point belongs to stage j
/// when its bits are constant on each of block j's coordinate groups
/// and non-constant on some group of every earlier block; each stage-j
/// subspace keeps one choice of the off-block bits as its constant
/// part. The measure identities are exact and asserted.
pub fn partition_stage(
    space: EdgeIndexSet,
    x_set: &[u16],
    m: u32,
    s: u32,
    ell: u32,
) -> Result<PartitionStages> {
    if space.kind() != SpaceKind::PairsLoops {
        return Err(Error::SpaceMismatch);
    }
    if m == 0 || s == 0 || ell == 0 {
        return Err(Error::Malformed("dimension, block size, and stage count must be positive".into()));
    }
    let n = space.n();
    if !x_set.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Malformed("vertex set must be strictly increasing".into()));
    }
    for &v in x_set {
        if v < 1 || v > n {
            return Err(Error::VertexOutOfRange(v));
        }
    }
    let need = (s as usize) * (m as usize) * (ell as usize);
    if x_set.len() < need {
        return Err(Error::InsufficientRoom { need, have: x_set.len() });
    }
    let table = space.table_len()?;
    let sm = (s * m) as usize;

    // per-block wildcard profiles and their coordinate groups
    let mut block_sets: Vec<Vec<Vec<u16>>> = Vec::with_capacity(ell as usize);
    let mut block_vars: Vec<Vec<u64>> = Vec::with_capacity(ell as usize);
    let mut block_span: Vec<u64> = Vec::with_capacity(ell as usize);
    for j in 0..ell as usize {
        let chunk = &x_set[j * sm..(j + 1) * sm];
        let sets: Vec<Vec<u16>> =
            (0..m as usize).map(|i| chunk[i * s as usize..(i + 1) * s as usize].to_vec()).collect();
        let probe = HjEmbedding::new(&sets, GraphPoint::zero(space))?;
        let vars: Vec<u64> =
            (0..probe.domain().len()).map(|q| probe.var_set(q).expect("in range")).collect();
        block_span.push(vars.iter().fold(0, |acc, v| acc | v));
        block_sets.push(sets);
        block_vars.push(vars);
    }
    let constant_on_block = |bits: u64, j: usize| -> bool {
        block_vars[j].iter().all(|&mask| {
            let on = bits & mask;
            on == 0 || on == mask
        })
    };

    let eta1 = {
        let m = m as i64;
        let sm = sm as i64;
        Dyadic::pow2((m * (m + 1) - sm * (sm + 1)) / 2)
    };
    let dim_positions = (m as u64) * (m as u64 + 1) / 2;
    let mut stages = Vec::with_capacity(ell as usize);
    let mut stage_measures = Vec::with_capacity(ell as usize);
    for j in 0..ell as usize {
        let mut members = Vec::new();
        for c in 0..table as u64 {
            if c & block_span[j] != 0 {
                continue;
            }
            if (0..j).any(|t| constant_on_block(c, t)) {
                continue;
            }
            members.push(HjEmbedding::new(&block_sets[j], GraphPoint::from_bits(space, c)?)?);
        }
        let measure = Dyadic::new(
            BigInt::from(members.len()) << dim_positions as usize,
            space.len() as u64,
        );
        let expected = &eta1 * &(&Dyadic::one() - &eta1).pow(j as u64);
        assert_eq!(measure, expected, "stage measure must match the geometric formula");
        stage_measures.push(measure);
        stages.push(members);
    }
    let leftover = (&Dyadic::one() - &eta1).pow(ell as u64);
    let total = stage_measures.iter().fold(leftover.clone(), |acc, m| &acc + m);
    assert_eq!(total, Dyadic::one(), "stage measures and leftover must tile the space");
    Ok(PartitionStages { stages, eta1, stage_measures, leftover })
}

// ===========================================================================
// Partitioning a polynomial
// ===========================================================================

/// Where a partitioning run gets its shape parameters.
#[derive(Clone, Debug)]
pub enum PartitionMode {
    /// Use the exact published parameters. These demand a Ramsey-sized
    /// vertex count, so at any real scale the run reports the bound and
    /// refuses.
    PaperParams,
    /// Caller-supplied block size and stage count, with a choice of
    /// canonical-set search. Degree drops are no longer guaranteed;
    /// regions where the machinery stalls are surrendered to the
    /// leftover and noted in the log.
    DeskParams { block_size: u32, stages: u32, strategy: CanonicalStrategy },
}

/// One cell of a partition: an embedding of a small space into the
/// original one, the polynomial pulled back to that cell, and its value
/// when the pullback is constant.
#[derive(Clone, Debug)]
pub struct PartitionPiece {
    pub embedding: HjEmbedding,
    pub restricted: IntegerPoly,
    pub constant: Option<u64>,
}

/// The outcome of a partitioning run: cells with the polynomial
/// constant on each, the exact measure of the uncovered region, and a
/// log of what happened stage by stage.
#[derive(Clone, Debug)]
pub struct PartitionPlan {
    pub pieces: Vec<PartitionPiece>,
    pub leftover_measure: Dyadic,
    pub stage_log: Vec<String>,
}

fn target_dim(remaining_degree: u32, m: u64, s: u64, ell: u64) -> Result<u64> {
    let mut dim = m as u128;
    for _ in 1..remaining_degree {
        dim = dim
            .checked_mul(s as u128)
            .and_then(|x| x.checked_mul(ell as u128))
            .filter(|&x| x <= u64::MAX as u128)
            .ok_or_else(|| Error::TooLarge("intermediate dimension exceeds 64 bits".into()))?;
    }
    Ok(dim as u64)
}

struct PartitionCtx {
    root_positions: i64,
    m: u64,
    s: u64,
    ell: u64,
    strategy: CanonicalStrategy,
    nodes: u64,
    pieces: Vec<PartitionPiece>,
    leftover: Dyadic,
    log: Vec<String>,
}

impl PartitionCtx {
    fn region_measure(&self, chain: &HjEmbedding) -> Dyadic {
        Dyadic::pow2(chain.domain().len() as i64 - self.root_positions)
    }
}

fn descend(
    ctx: &mut PartitionCtx,
    q: &IntegerPoly,
    chain: &HjEmbedding,
    depth: u32,
) -> Result<()> {
    ctx.nodes += 1;
    if ctx.nodes > PARTITION_NODE_BUDGET {
        return Err(Error::RecursionBudgetExceeded);
    }
    let dv = q.true_degree();
    if dv == 0 {
        ctx.pieces.push(PartitionPiece {
            embedding: chain.clone(),
            restricted: q.clone(),
            constant: Some(q.alpha()),
        });
        return Ok(());
    }
    let nv = q.space().n() as u128;
    let mdim = target_dim(dv, ctx.m, ctx.s, ctx.ell)?;
    let r = (ctx.s as u128) * (mdim as u128) * (ctx.ell as u128);
    if r > nv {
        if depth == 0 {
            return Err(Error::InsufficientRoom { need: r as usize, have: nv as usize });
        }
        ctx.leftover = &ctx.leftover + &ctx.region_measure(chain);
        ctx.log.push(format!(
            "depth {depth}: a degree-{dv} cell needs {r} vertices but has {nv}; cell surrendered"
        ));
        return Ok(());
    }
    let x = match find_canonical_set(q, r as u16, ctx.strategy)? {
        Some(x) => x,
        None => {
            if depth == 0 {
                return Err(Error::CanonicalSetNotFound(r as usize));
            }
            ctx.leftover = &ctx.leftover + &ctx.region_measure(chain);
            ctx.log.push(format!(
                "depth {depth}: no canonical set of {r} vertices in a degree-{dv} cell; cell surrendered"
            ));
            return Ok(());
        }
    };
    let staged = partition_stage(q.space(), &x, mdim as u32, ctx.s as u32, ctx.ell as u32)?;
    ctx.leftover = &ctx.leftover + &(&staged.leftover * &ctx.region_measure(chain));
    ctx.log.push(format!(
        "depth {depth}: degree {dv}, {} stages over {} vertices, cells {}, stage leftover {}",
        staged.stages.len(),
        x.len(),
        staged.stages.iter().map(|s| s.len()).sum::<usize>(),
        staged.leftover,
    ));
    let mut stuck: u64 = 0;
    for stage in &staged.stages {
        for e in stage {
            let composed = compose(chain, e)?;
            let pulled = q.restrict_to_hj(e)?;
            if pulled.true_degree() < dv {
                descend(ctx, &pulled, &composed, depth + 1)?;
            } else {
                ctx.leftover = &ctx.leftover + &ctx.region_measure(&composed);
                stuck += 1;
            }
        }
    }
    if stuck > 0 {
        ctx.log.push(format!(
            "depth {depth}: degree stuck at {dv} on {stuck} cells (block size {} does not force a drop); cells surrendered",
            ctx.s,
        ));
    }
    Ok(())
}

/// Split the space into cells on which q is constant, plus a leftover
/// region of exactly known measure. With published parameters the
/// required vertex count is astronomically large, so that mode reports
/// the bound and refuses; desk parameters run the same machinery at
/// caller-chosen sizes, surrendering cells where the degree refuses to
/// drop.
pub fn partition_polynomial(
    q: &IntegerPoly,
    eta: &Dyadic,
    m: u32,
    mode: &PartitionMode,
) -> Result<PartitionPlan> {
    if m == 0 {
        return Err(Error::Malformed("dimension must be positive".into()));
    }
    if eta.is_zero() || eta.is_negative() || *eta > Dyadic::one() {
        return Err(Error::Malformed("the leftover target must lie in (0, 1]".into()));
    }
    if q.true_degree() == 0 {
        let identity = HjEmbedding::identity(q.space())?;
        return Ok(PartitionPlan {
            pieces: vec![PartitionPiece {
                embedding: identity,
                restricted: q.clone(),
                constant: Some(q.alpha()),
            }],
            leftover_measure: Dyadic::zero(),
            stage_log: vec!["constant polynomial: the whole space is one cell".into()],
        });
    }
    match mode {
        PartitionMode::PaperParams => {
            let params = paper_params(eta, m, q.modulus_exponent(), q.true_degree())?;
            Err(Error::TooLarge(format!(
                "the guarantee needs at least {} vertices; rerun with desk parameters",
                params.ramsey_symbol
            )))
        }
        PartitionMode::DeskParams { block_size, stages, strategy } => {
            if *block_size == 0 || *stages == 0 {
                return Err(Error::Malformed("block size and stage count must be positive".into()));
            }
            let mut ctx = PartitionCtx {
                root_positions: q.space().len() as i64,
                m: m as u64,
                s: *block_size as u64,
                ell: *stages as u64,
                strategy: *strategy,
                nodes: 0,
                pieces: Vec::new(),
                leftover: Dyadic::zero(),
                log: Vec::new(),
            };
            let identity = HjEmbedding::identity(q.space())?;
            descend(&mut ctx, q, &identity, 0)?;
            let met = if ctx.leftover <= *eta { "within" } else { "above" };
            ctx.log.push(format!(
                "leftover {} is {} the target {}",
                ctx.leftover, met, eta
            ));
            Ok(PartitionPlan {
                pieces: ctx.pieces,
                leftover_measure: ctx.leftover,
                stage_log: ctx.log,
            })
        }
    }
}

/// Partition the level sets of a torus-valued polynomial: convert to an
/// integer polynomial, partition that, and return the plan together
/// with the additive constant; on every cell the original polynomial is
/// constant with value alpha + q_value / 2^d.
pub fn partition_nonclassical(
    p: &NonclassicalPoly,
    eta: &Dyadic,
    m: u32,
    mode: &PartitionMode,
) -> Result<(PartitionPlan, DyadicTorus)> {
    let (q, alpha) = to_integer_poly(p)?;
    let plan = partition_polynomial(&q, eta, m, mode)?;
    Ok((plan, alpha))
}

/// Re-check a finished plan against the polynomial it partitions: cells
/// must be pairwise disjoint, the polynomial must be constant on each
/// cell and agree with the recorded pullback, and the uncovered measure
/// must match the leftover exactly.
pub fn audit_plan(q: &IntegerPoly, plan: &PartitionPlan) -> Result<()> {
    let table = q.space().table_len()?;
    let mut covered = vec![false; table];
    let mut count: usize = 0;
    for (idx, piece) in plan.pieces.iter().enumerate() {
        if piece.embedding.codomain() != q.space() {
            return Err(Error::SpaceMismatch);
        }
        let dom = piece.embedding.domain();
        for y in 0..dom.table_len()? as u64 {
            let yp = GraphPoint::from_bits(dom, y)?;
            let z = piece.embedding.apply(&yp)?;
            let slot = &mut covered[z.bits() as usize];
            if *slot {
                return Err(Error::Malformed(format!("cell {idx} overlaps an earlier cell")));
            }
            *slot = true;
            count += 1;
            let direct = q.eval(&z)?;
            if piece.restricted.eval(&yp)? != direct {
                return Err(Error::Malformed(format!(
                    "cell {idx}: pullback disagrees with the ambient polynomial"
                )));
            }
            if let Some(c) = piece.constant {
                if direct != c {
                    return Err(Error::Malformed(format!(
                        "cell {idx}: polynomial is not constant at the recorded value"
                    )));
                }
            }
        }
    }
    let uncovered = Dyadic::new(BigInt::from(table - count), q.space().len() as u64);
    if uncovered != plan.leftover_measure {
        return Err(Error::Malformed(format!(
            "uncovered measure {} does not match the recorded leftover {}",
            uncovered, plan.leftover_measure
        )));
    }
    Ok(())
}

// ===========================================================================
// JSON forms
// ===========================================================================

/// {"n":4,"k":2,"d":2,"alpha":1,"coeffs":[{"F":[[1,2],[3]],"lambda":3},...]}
/// with each monomial written as a list of vertex pairs and loops.
pub fn integer_poly_to_json(q: &IntegerPoly) -> String {
    let coeffs: Vec<serde_json::Value> = q
        .coeffs()
        .iter()
        .map(|(f, lam)| {
            let sets: Vec<Vec<u16>> = f
                .iter()
                .map(|&p| key_as_vertex_set(q.space(), p).expect("stored positions are valid"))
                .collect();
            serde_json::json!({ "F": sets, "lambda": lam })
        })
        .collect();
    serde_json::json!({
        "n": q.space().n(),
        "k": q.modulus_exponent(),
        "d": q.degree_bound(),
        "alpha": q.alpha(),
        "coeffs": coeffs,
    })
    .to_string()
}

pub fn integer_poly_from_json(s: &str) -> Result<IntegerPoly> {
    let v: serde_json::Value =
        serde_json::from_str(s).map_err(|e| Error::Malformed(format!("bad JSON: {e}")))?;
    let n = v["n"].as_u64().ok_or_else(|| Error::Malformed("missing n".into()))? as u16;
    let k = v["k"].as_u64().ok_or_else(|| Error::Malformed("missing k".into()))? as u32;
    let d = v["d"].as_u64().ok_or_else(|| Error::Malformed("missing d".into()))? as u32;
    let alpha = v["alpha"].as_u64().ok_or_else(|| Error::Malformed("missing alpha".into()))?;
    let space = EdgeIndexSet::pairs_loops(n)?;
    let mut coeffs = Vec::new();
    if let Some(list) = v["coeffs"].as_array() {
        for entry in list {
            let lam = entry["lambda"]
                .as_u64()
                .ok_or_else(|| Error::Malformed("missing lambda".into()))?;
            let sets = entry["F"]
                .as_array()
                .ok_or_else(|| Error::Malformed("missing F".into()))?;
            let mut f = Vec::with_capacity(sets.len());
            for set in sets {
                let verts: Vec<u16> = set
                    .as_array()
                    .ok_or_else(|| Error::Malformed("each member of F must be a list".into()))?
                    .iter()
                    .map(|x| {
                        x.as_u64()
                            .map(|v| v as u16)
                            .ok_or_else(|| Error::Malformed("vertices must be integers".into()))
                    })
                    .collect::<Result<_>>()?;
                f.push(space.position(&verts)?);
            }
            f.sort_unstable();
            coeffs.push((f, lam));
        }
    }
    IntegerPoly::new(space, k, d, alpha, &coeffs)
}

/// {"pieces":[{"embedding":{...},"constant":0},...],
///  "leftover":{"num":...,"den_exp":...},"log":[...]}
pub fn partition_plan_to_json(plan: &PartitionPlan) -> String {
    let pieces: Vec<serde_json::Value> = plan
        .pieces
        .iter()
        .map(|p| {
            let emb: serde_json::Value =
                serde_json::from_str(&crate::subspaces::hj_embedding_to_json(&p.embedding))
                    .expect("embedding JSON is well formed");
            serde_json::json!({ "embedding": emb, "constant": p.constant })
        })
        .collect();
    serde_json::json!({
        "pieces": pieces,
        "leftover": serde_json::to_value(&plan.leftover_measure).expect("serializable"),
        "log": plan.stage_log,
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pl(n: u16) -> EdgeIndexSet {
        EdgeIndexSet::pairs_loops(n).unwrap()
    }

    fn pt(space: EdgeIndexSet, bits: u64) -> GraphPoint {
        GraphPoint::from_bits(space, bits).unwrap()
    }

    fn tor(j: u64, a: u32) -> DyadicTorus {
        DyadicTorus::new(j, a).unwrap()
    }

    /// Random torus polynomial with degree bound d, dense over all
    /// admissible monomials with random (possibly zero) coefficients.
    fn random_torus_poly(space: EdgeIndexSet, d: u32, rng: &mut ChaCha8Rng) -> NonclassicalPoly {
        let npos = space.len();
        let mut coeffs = Vec::new();
        for mask in 1u64..(1 << npos) {
            let size = mask.count_ones();
            if size > d {
                continue;
            }
            let max_exp = d - size + 1;
            let a = rng.gen_range(0..=max_exp);
            if a == 0 {
                continue;
            }
            let j = rng.gen_range(0..(1u64 << a));
            if j == 0 {
                continue;
            }
            let s: Vec<u32> = (0..npos).filter(|&p| mask >> p & 1 == 1).collect();
            coeffs.push((s, tor(j, a)));
        }
        let alpha = tor(rng.gen_range(0..16), 4);
        NonclassicalPoly::new(space, d, alpha, &coeffs).unwrap()
    }

    /// Random integer polynomial mod 2^k with degree bound d.
    fn random_integer_poly(
        space: EdgeIndexSet,
        k: u32,
        d: u32,
        rng: &mut ChaCha8Rng,
    ) -> IntegerPoly {
        let npos = space.len();
        let mut coeffs = Vec::new();
        for _ in 0..10 {
            let size = rng.gen_range(1..=d.min(npos)) as usize;
            let mut f: Vec<u32> = (0..size).map(|_| rng.gen_range(0..npos)).collect();
            f.sort_unstable();
            f.dedup();
            let lam = rng.gen_range(0..(1u64 << k));
            if coeffs.iter().any(|(g, _)| *g == f) {
                continue;
            }
            coeffs.push((f, lam));
        }
        IntegerPoly::new(space, k, d, rng.gen_range(0..(1u64 << k)), &coeffs).unwrap()
    }

    /// Random embedding of PairsLoops(m) into the given looped space.
    fn random_embedding(space: EdgeIndexSet, m: u16, rng: &mut ChaCha8Rng) -> HjEmbedding {
        let n = space.n();
        let mut verts: Vec<u16> = (1..=n).collect();
        for i in (1..verts.len()).rev() {
            let j = rng.gen_range(0..=i);
            verts.swap(i, j);
        }
        let mut sets: Vec<Vec<u16>> = Vec::with_capacity(m as usize);
        let mut used = 0usize;
        for i in 0..m as usize {
            let left = n as usize - used;
            let remaining_sets = m as usize - i;
            let take = rng.gen_range(1..=left - (remaining_sets - 1));
            let mut set: Vec<u16> = verts[used..used + take].to_vec();
            set.sort_unstable();
            sets.push(set);
            used += take;
        }
        sets.sort_by_key(|s| s[0]);
        let probe = HjEmbedding::new(&sets, GraphPoint::zero(space)).unwrap();
        let span: u64 = (0..probe.domain().len()).fold(0, |acc, q| acc | probe.var_set(q).unwrap());
        let table = space.table_len().unwrap() as u64;
        let cbits = rng.gen_range(0..table) & !span;
        HjEmbedding::new(&sets, pt(space, cbits)).unwrap()
    }

    #[test]
    fn torus_values_reduce_and_add_exactly() {
        assert_eq!(tor(4, 3), tor(1, 1));
        assert_eq!(tor(0, 7), DyadicTorus::zero());
        assert_eq!(tor(8, 3), DyadicTorus::zero());
        assert_eq!(tor(1, 1) + tor(1, 1), DyadicTorus::zero());
        assert_eq!(tor(1, 2) + tor(1, 2), tor(1, 1));
        assert_eq!(tor(3, 3) + tor(3, 2), tor(9, 3));
        assert_eq!(-tor(1, 3), tor(7, 3));
        assert_eq!(tor(3, 3) - tor(3, 3), DyadicTorus::zero());
        assert_eq!(tor(5, 4).times(3), tor(15, 4));
        assert_eq!(tor(1, 2).times(4), DyadicTorus::zero());
        assert_eq!(tor(5, 3).to_string(), "5/2^3");
        assert_eq!(DyadicTorus::zero().to_string(), "0");
        assert!(DyadicTorus::new(1, 63).is_err());
        // exponent 62 is the ceiling and must survive a round trip
        assert_eq!(tor(1, 62) + tor(1, 62), tor(1, 61));
    }

    #[test]
    fn polynomial_values_match_their_multilinear_fit() {
        let s2 = pl(2);
        // constant: alpha everywhere
        let c = NonclassicalPoly::new(s2, 0, tor(3, 2), &[]).unwrap();
        for x in 0..8u64 {
            assert_eq!(c.eval(&pt(s2, x)).unwrap(), tor(3, 2));
        }
        assert_eq!(c.true_degree(), 0);
        // half times an indicator
        let p = NonclassicalPoly::new(s2, 1, DyadicTorus::zero(), &[(vec![0], tor(1, 1))]).unwrap();
        for x in 0..8u64 {
            let expect = if x & 1 == 1 { tor(1, 1) } else { DyadicTorus::zero() };
            assert_eq!(p.eval(&pt(s2, x)).unwrap(), expect);
        }
        assert_eq!(p.true_degree(), 1);
        // a quarter on a singleton has monomial degree 2
        let q = NonclassicalPoly::new(s2, 2, DyadicTorus::zero(), &[(vec![1], tor(1, 2))]).unwrap();
        assert_eq!(q.true_degree(), 2);
        // the multilinear representation is unique: value table round trips
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let p = random_torus_poly(s2, 2, &mut rng);
            let table = p.value_table().unwrap();
            for (x, want) in table.iter().enumerate() {
                assert_eq!(p.eval(&pt(s2, x as u64)).unwrap(), *want);
            }
            let back = NonclassicalPoly::from_values(s2, &table).unwrap();
            assert_eq!(back.alpha(), p.alpha());
            assert_eq!(back.coeffs(), p.coeffs());
        }
        // malformed inputs are rejected
        assert!(matches!(
            NonclassicalPoly::new(s2, 1, DyadicTorus::zero(), &[(vec![], tor(1, 1))]),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            NonclassicalPoly::new(s2, 1, DyadicTorus::zero(), &[(vec![0], tor(1, 2))]),
            Err(Error::MalformedCoefficient { size: 1, exp: 2 })
        ));
        assert!(matches!(
            NonclassicalPoly::new(s2, 1, DyadicTorus::zero(), &[(vec![0, 0], tor(1, 1))]),
            Err(Error::Malformed(_))
        ));
        assert!(matches!(
            NonclassicalPoly::new(s2, 1, DyadicTorus::zero(), &[(vec![9], tor(1, 1))]),
            Err(Error::PositionOutOfRange(9))
        ));
    }

    #[test]
    fn differences_vanish_beyond_the_degree() {
        let s2 = pl(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_torus_poly(s2, 2, &mut rng);
        // zero direction: identically zero difference
        let z = p.derivative(&pt(s2, 0)).unwrap();
        assert_eq!(z.true_degree(), 0);
        assert!(z.alpha().is_zero() && z.coeffs().is_empty());
        // one difference of a classical linear polynomial is constant
        let lin =
            NonclassicalPoly::new(s2, 1, DyadicTorus::zero(), &[(vec![0], tor(1, 1))]).unwrap();
        for h in 0..8u64 {
            let d = lin.derivative(&pt(s2, h)).unwrap();
            assert!(d.coeffs().is_empty(), "difference of a linear map is constant");
            let expect = if h & 1 == 1 { tor(1, 1) } else { DyadicTorus::zero() };
            assert_eq!(d.alpha(), expect);
        }
        // three differences kill anything of degree at most two,
        // exhaustively over all direction triples
        for h1 in 0..8u64 {
            let d1 = p.derivative(&pt(s2, h1)).unwrap();
            for h2 in 0..8u64 {
                let d2 = d1.derivative(&pt(s2, h2)).unwrap();
                for h3 in 0..8u64 {
                    let d3 = d2.derivative(&pt(s2, h3)).unwrap();
                    assert_eq!(d3.true_degree(), 0);
                    assert!(d3.alpha().is_zero() && d3.coeffs().is_empty());
                }
            }
        }
        // space mismatch is rejected
        assert!(matches!(p.derivative(&pt(pl(3), 0)), Err(Error::SpaceMismatch)));
    }

    #[test]
    fn conversion_satisfies_the_composition_identity() {
        // zero polynomial: zero output, alpha preserved
        let s2 = pl(2);
        let zero = NonclassicalPoly::new(s2, 2, tor(1, 3), &[]).unwrap();
        let (q0, a0) = to_integer_poly(&zero).unwrap();
        assert_eq!(a0, tor(1, 3));
        assert_eq!(q0.true_degree(), 0);
        assert_eq!(q0.alpha(), 0);
        // degree one: 1/2 becomes 1 mod 2
        let p1 =
            NonclassicalPoly::new(s2, 1, DyadicTorus::zero(), &[(vec![2], tor(1, 1))]).unwrap();
        let (q1, _) = to_integer_poly(&p1).unwrap();
        assert_eq!(q1.modulus_exponent(), 1);
        assert_eq!(q1.coeffs().get(&vec![2u32]).copied(), Some(1));
        // random polynomials: P(x) = alpha + Q(x)/2^d at every point
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 2..=3u16 {
            let space = pl(n);
            let dmax = if n == 2 { 3 } else { 2 };
            for d in 1..=dmax {
                for _ in 0..10 {
                    let p = random_torus_poly(space, d, &mut rng);
                    let (q, alpha) = to_integer_poly(&p).unwrap();
                    assert_eq!(q.modulus_exponent(), d.max(1));
                    for x in 0..space.table_len().unwrap() as u64 {
                        let xp = pt(space, x);
                        let direct = p.eval(&xp).unwrap();
                        let composed = alpha + tor(q.eval(&xp).unwrap(), d);
                        assert_eq!(direct, composed, "n={n} d={d} x={x}");
                    }
                }
            }
        }
    }

    #[test]
    fn integer_polynomials_evaluate_and_fit_exactly() {
        let s2 = pl(2);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..30 {
            let q = random_integer_poly(s2, 3, 2, &mut rng);
            let table = q.value_table().unwrap();
            for (x, want) in table.iter().enumerate() {
                assert_eq!(q.eval(&pt(s2, x as u64)).unwrap(), *want);
            }
            let back = IntegerPoly::from_values(s2, 3, &table).unwrap();
            assert_eq!(back.alpha(), q.alpha());
            assert_eq!(back.coeffs(), q.coeffs());
        }
        // arbitrary value tables are polynomials too: fit then re-evaluate
        for _ in 0..10 {
            let values: Vec<u64> = (0..8).map(|_| rng.gen_range(0..4)).collect();
            let q = IntegerPoly::from_values(s2, 2, &values).unwrap();
            for (x, want) in values.iter().enumerate() {
                assert_eq!(q.eval(&pt(s2, x as u64)).unwrap(), *want);
            }
        }
        assert!(matches!(
            IntegerPoly::new(s2, 0, 1, 0, &[]),
            Err(Error::UnsupportedExponent)
        ));
        assert!(matches!(
            IntegerPoly::new(s2, 1, 1, 0, &[(vec![0, 1], 1)]),
            Err(Error::MalformedCoefficient { size: 2, exp: 1 })
        ));
    }

    #[test]
    fn restriction_matches_pointwise_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // identity embedding returns the polynomial itself
        let s3 = pl(3);
        let q = random_integer_poly(s3, 2, 2, &mut rng);
        let id = HjEmbedding::identity(s3).unwrap();
        assert_eq!(q.restrict_to_hj(&id).unwrap(), q);
        // a constant polynomial stays constant
        let c = IntegerPoly::new(s3, 2, 1, 3, &[]).unwrap();
        let e = HjEmbedding::new(&[vec![1], vec![2]], GraphPoint::zero(s3)).unwrap();
        let cr = c.restrict_to_hj(&e).unwrap();
        assert_eq!(cr.alpha(), 3);
        assert_eq!(cr.true_degree(), 0);
        // random polynomial against random embedding, all points
        for trial in 0..50 {
            let n = rng.gen_range(2..=5u16);
            let m = rng.gen_range(1..=3u16.min(n));
            let space = pl(n);
            let k = rng.gen_range(1..=3);
            let d = rng.gen_range(1..=3);
            let q = random_integer_poly(space, k, d, &mut rng);
            let e = random_embedding(space, m, &mut rng);
            let r = q.restrict_to_hj(&e).unwrap();
            assert!(r.true_degree() <= q.true_degree(), "degree must not increase");
            let dom = e.domain();
            for y in 0..dom.table_len().unwrap() as u64 {
                let yp = pt(dom, y);
                let z = e.apply(&yp).unwrap();
                assert_eq!(
                    r.eval(&yp).unwrap(),
                    q.eval(&z).unwrap(),
                    "trial {trial}: restriction must agree with composition"
                );
            }
        }
        // mismatched spaces are rejected
        let e4 = HjEmbedding::identity(pl(4)).unwrap();
        assert!(matches!(q.restrict_to_hj(&e4), Err(Error::SpaceMismatch)));
    }

    #[test]
    fn order_types_capture_order_isomorphism() {
        let t1 = type_of(&[vec![3, 7]]).unwrap();
        assert_eq!(t1.ell, 2);
        assert_eq!(t1.pattern, BTreeSet::from([vec![1, 2]]));
        let t2 = type_of(&[vec![2, 5], vec![5, 9]]).unwrap();
        let t3 = type_of(&[vec![1, 3], vec![3, 4]]).unwrap();
        assert_eq!(t2, t3);
        let t4 = type_of(&[vec![1, 2], vec![3, 4]]).unwrap();
        let t5 = type_of(&[vec![1, 3], vec![2, 4]]).unwrap();
        assert_ne!(t4, t5);
        assert_eq!(t4.pattern, BTreeSet::from([vec![1, 2], vec![3, 4]]));
        assert_eq!(t5.pattern, BTreeSet::from([vec![1, 3], vec![2, 4]]));
        assert!(matches!(type_of(&[]), Err(Error::EmptyInput)));
        assert!(matches!(type_of(&[vec![]]), Err(Error::EmptyInput)));
    }

    #[test]
    fn canonical_search_finds_witnesses() {
        let s5 = pl(5);
        // all coefficients equal: canonical everywhere
        let all: Vec<(Vec<u32>, u64)> = (0..s5.len()).map(|p| (vec![p], 1)).collect();
        let q = IntegerPoly::new(s5, 1, 1, 0, &all).unwrap();
        assert!(is_canonical_in(&q, &[1, 2, 3, 4, 5]).unwrap());
        let x = find_canonical_set(&q, 3, CanonicalStrategy::Exhaustive).unwrap().unwrap();
        assert_eq!(x.len(), 3);
        // loop and edge coefficients differing by type: still canonical
        let mut typed = Vec::new();
        for p in 0..s5.len() {
            let (u, v) = s5.key_at(p).unwrap();
            typed.push((vec![p], if u == v { 1 } else { 0 }));
        }
        let q2 = IntegerPoly::new(s5, 1, 1, 0, &typed).unwrap();
        assert!(is_canonical_in(&q2, &[1, 2, 3, 4, 5]).unwrap());
        // a single deviant edge coefficient: the search must avoid
        // having both its endpoints
        let deviant = s5.position(&[4, 5]).unwrap();
        let q3 = IntegerPoly::new(s5, 1, 1, 0, &[(vec![deviant], 1)]).unwrap();
        assert!(!is_canonical_in(&q3, &[1, 2, 3, 4, 5]).unwrap());
        assert!(!is_canonical_in(&q3, &[3, 4, 5]).unwrap());
        for strategy in [CanonicalStrategy::Exhaustive, CanonicalStrategy::Greedy] {
            let x = find_canonical_set(&q3, 4, strategy).unwrap().unwrap();
            assert!(is_canonical_in(&q3, &x).unwrap());
            assert!(
                !(x.contains(&4) && x.contains(&5)),
                "a canonical set cannot see the deviant edge"
            );
        }
        // the guarantee of existence only holds at huge n: small
        // adversarial instances legitimately come up empty
        let mixed: Vec<(Vec<u32>, u64)> =
            (1..=5u16).map(|v| (vec![s5.position(&[v]).unwrap()], u64::from(v >= 4))).collect();
        let q4 = IntegerPoly::new(s5, 1, 1, 0, &mixed).unwrap();
        assert_eq!(find_canonical_set(&q4, 4, CanonicalStrategy::Exhaustive).unwrap(), None);
        // size zero is trivially canonical, oversize is a caller bug
        assert_eq!(
            find_canonical_set(&q3, 0, CanonicalStrategy::Exhaustive).unwrap(),
            Some(vec![])
        );
        assert!(find_canonical_set(&q3, 6, CanonicalStrategy::Exhaustive).is_err());
    }

    #[test]
    fn distributed_types_track_relative_positions() {
        let wilds = vec![vec![1u16, 2, 3, 4], vec![5, 6, 7, 8], vec![9, 10]];
        // a single loop in the second set
        let dt = distributed_type(&[vec![6]], &wilds).unwrap();
        assert_eq!(dt.dsg, vec![0, 1, 0]);
        assert_eq!(dt.dlp, vec![vec![], vec![6], vec![]]);
        assert_eq!(dt.dt, vec![vec![vec![]], vec![vec![1]], vec![vec![]]]);
        // shifting everything through the increasing bijection onto a
        // second profile leaves the distributed type unchanged
        let wilds2 = vec![vec![11u16, 12, 13, 14], vec![15, 16, 17, 18], vec![19, 20]];
        let f1 = vec![vec![2u16, 6], vec![3, 4], vec![6]];
        let f2 = vec![vec![12u16, 16], vec![13, 14], vec![16]];
        let mut f1s = f1.clone();
        f1s.sort();
        let mut f2s = f2.clone();
        f2s.sort();
        let a = distributed_type(&f1s, &wilds).unwrap();
        let b = distributed_type(&f2s, &wilds2).unwrap();
        assert_eq!(a.dt, b.dt);
        assert_eq!(a.dsg, b.dsg);
        assert_ne!(a.dlp, b.dlp);
        // escaping the wildcards is an error, as is unsorted input
        assert!(matches!(distributed_type(&[vec![99]], &wilds), Err(Error::OutsideWildcards)));
        assert!(matches!(
            distributed_type(&[vec![3, 4], vec![2, 6]], &wilds),
            Err(Error::Malformed(_))
        ));
    }

    fn sets_within(block: &[u16]) -> Vec<Vec<u16>> {
        let mut out: Vec<Vec<u16>> = block.iter().map(|&v| vec![v]).collect();
        for i in 0..block.len() {
            for j in i + 1..block.len() {
                out.push(vec![block[i], block[j]]);
            }
        }
        out
    }

    fn sets_between(a: &[u16], b: &[u16]) -> Vec<Vec<u16>> {
        let mut out = Vec::new();
        for &u in a {
            for &v in b {
                let mut e = vec![u, v];
                e.sort_unstable();
                out.push(e);
            }
        }
        out
    }

    /// Bucket two-member monomials drawn from the given catalogs by
    /// distributed type and return the bucket sizes.
    fn bucket_pairs(
        left: &[Vec<u16>],
        right: &[Vec<u16>],
        wilds: &[Vec<u16>],
    ) -> Vec<u64> {
        let mut buckets: HashMap<Vec<Vec<Vec<usize>>>, u64> = HashMap::new();
        for p in left {
            for q in right {
                if p == q {
                    continue;
                }
                let mut f = vec![p.clone(), q.clone()];
                f.sort();
                let dt = distributed_type(&f, wilds).unwrap();
                *buckets.entry(dt.dt).or_insert(0) += 1;
            }
        }
        buckets.into_values().collect()
    }

    #[test]
    fn hitting_counts_are_divisible_by_the_modulus() {
        // degree 1, modulus 2: blocks of (1+1)!*2 = 4. Monomials are
        // single coordinates; bucketing by distributed type must give
        // even classes for every full-degree target.
        let wilds = vec![vec![1u16, 2, 3, 4], vec![5, 6, 7, 8]];
        for block in [&wilds[0], &wilds[1]] {
            let mut buckets: HashMap<Vec<Vec<Vec<usize>>>, u64> = HashMap::new();
            for p in sets_within(block) {
                let dt = distributed_type(&[p], &wilds).unwrap();
                *buckets.entry(dt.dt).or_insert(0) += 1;
            }
            let sizes: Vec<u64> = buckets.into_values().collect();
            assert_eq!(sizes.iter().sum::<u64>(), 10);
            for s in &sizes {
                assert_eq!(s % 2, 0, "single-coordinate class sizes must be even");
            }
        }
        {
            let mut buckets: HashMap<Vec<Vec<Vec<usize>>>, u64> = HashMap::new();
            for p in sets_between(&wilds[0], &wilds[1]) {
                let dt = distributed_type(&[p], &wilds).unwrap();
                *buckets.entry(dt.dt).or_insert(0) += 1;
            }
            for s in buckets.values() {
                assert_eq!(s % 2, 0);
            }
        }
        // degree 1, modulus 4: blocks of 8; classes divisible by 4
        let big = vec![(1u16..=8).collect::<Vec<_>>(), (9u16..=16).collect::<Vec<_>>()];
        let mut buckets: HashMap<Vec<Vec<Vec<usize>>>, u64> = HashMap::new();
        for p in sets_within(&big[0]).into_iter().chain(sets_between(&big[0], &big[1])) {
            let dt = distributed_type(&[p], &big).unwrap();
            *buckets.entry(dt.dt).or_insert(0) += 1;
        }
        for s in buckets.values() {
            assert_eq!(s % 4, 0, "modulus-4 class sizes must be divisible by 4");
        }
        // degree 2, modulus 2: blocks of (2+1)!*2 = 12. Pairs of
        // coordinates hitting two distinct targets, bucketed by
        // distributed type; every class must be even. This is pure
        // combinatorics on vertex sets, no ambient space involved.
        let w2 = vec![(1u16..=12).collect::<Vec<_>>(), (13u16..=24).collect::<Vec<_>>()];
        let in1 = sets_within(&w2[0]);
        let in2 = sets_within(&w2[1]);
        let cross = sets_between(&w2[0], &w2[1]);
        assert_eq!(in1.len(), 78);
        assert_eq!(cross.len(), 144);
        for (label, sizes) in [
            ("loop1-loop2", bucket_pairs(&in1, &in2, &w2)),
            ("loop1-cross", bucket_pairs(&in1, &cross, &w2)),
            ("loop2-cross", bucket_pairs(&in2, &cross, &w2)),
        ] {
            assert!(!sizes.is_empty());
            for s in &sizes {
                assert_eq!(s % 2, 0, "{label}: class of size {s} is not even");
            }
        }
    }

    #[test]
    fn block_restriction_lowers_the_degree() {
        // modulus 2, degree 1, forcing block size 4: restricting onto a
        // block with type-constant coefficients kills the degree
        let s4 = pl(4);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x4: Vec<u16> = vec![1, 2, 3, 4];
        let e4 = HjEmbedding::new(&[vec![1, 2, 3, 4]], GraphPoint::zero(s4)).unwrap();
        for _ in 0..20 {
            let cl = rng.gen_range(0..2u64);
            let ce = rng.gen_range(0..2u64);
            let alpha = rng.gen_range(0..2u64);
            let coeffs: Vec<(Vec<u32>, u64)> = (0..s4.len())
                .map(|p| {
                    let (u, v) = s4.key_at(p).unwrap();
                    (vec![p], if u == v { cl } else { ce })
                })
                .collect();
            let q = IntegerPoly::new(s4, 1, 1, alpha, &coeffs).unwrap();
            if q.true_degree() == 0 {
                continue;
            }
            let r = degree_lowering_restrict(&q, &x4, &e4).unwrap();
            assert_eq!(r.true_degree(), 0);
            // exhaustive check over the whole domain
            for y in 0..2u64 {
                let yp = pt(e4.domain(), y);
                assert_eq!(
                    r.eval(&yp).unwrap(),
                    q.eval(&e4.apply(&yp).unwrap()).unwrap()
                );
                assert_eq!(r.eval(&yp).unwrap(), r.alpha());
            }
        }
        // modulus 4, degree 1, forcing block size 8
        let s8 = pl(8);
        let x8: Vec<u16> = (1..=8).collect();
        let e8 = HjEmbedding::new(&[(1..=8).collect::<Vec<u16>>()], GraphPoint::zero(s8)).unwrap();
        for _ in 0..10 {
            let cl = rng.gen_range(0..4u64);
            let ce = rng.gen_range(0..4u64);
            let coeffs: Vec<(Vec<u32>, u64)> = (0..s8.len())
                .map(|p| {
                    let (u, v) = s8.key_at(p).unwrap();
                    (vec![p], if u == v { cl } else { ce })
                })
                .collect();
            let q = IntegerPoly::new(s8, 2, 1, rng.gen_range(0..4), &coeffs).unwrap();
            if q.true_degree() == 0 {
                continue;
            }
            let r = degree_lowering_restrict(&q, &x8, &e8).unwrap();
            assert_eq!(r.true_degree(), 0);
        }
        // two blocks of four: the cross coefficients must also cancel
        let e44 = HjEmbedding::new(
            &[vec![1, 2, 3, 4], vec![5, 6, 7, 8]],
            GraphPoint::zero(s8),
        )
        .unwrap();
        for _ in 0..10 {
            let cl = rng.gen_range(0..2u64);
            let ce = rng.gen_range(0..2u64);
            let coeffs: Vec<(Vec<u32>, u64)> = (0..s8.len())
                .map(|p| {
                    let (u, v) = s8.key_at(p).unwrap();
                    (vec![p], if u == v { cl } else { ce })
                })
                .collect();
            let q = IntegerPoly::new(s8, 1, 1, 0, &coeffs).unwrap();
            if q.true_degree() == 0 {
                continue;
            }
            let r = degree_lowering_restrict(&q, &x8, &e44).unwrap();
            assert_eq!(r.true_degree(), 0);
            for y in 0..8u64 {
                let yp = pt(e44.domain(), y);
                assert_eq!(
                    r.eval(&yp).unwrap(),
                    q.eval(&e44.apply(&yp).unwrap()).unwrap()
                );
            }
        }
        // hypothesis violations are called out one by one
        let all_one: Vec<(Vec<u32>, u64)> = (0..s8.len()).map(|p| (vec![p], 1)).collect();
        let q = IntegerPoly::new(s8, 1, 1, 0, &all_one).unwrap();
        let constant = IntegerPoly::new(s8, 1, 1, 1, &[]).unwrap();
        assert!(matches!(
            degree_lowering_restrict(&constant, &x8, &e44),
            Err(Error::Malformed(_))
        ));
        let interleaved = HjEmbedding::new(
            &[vec![1, 3, 5, 7], vec![2, 4, 6, 8]],
            GraphPoint::zero(s8),
        )
        .unwrap();
        assert!(matches!(
            degree_lowering_restrict(&q, &x8, &interleaved),
            Err(Error::NotBlock)
        ));
        let undersized = HjEmbedding::new(
            &[vec![1, 2], vec![3, 4]],
            GraphPoint::zero(s8),
        )
        .unwrap();
        assert!(matches!(
            degree_lowering_restrict(&q, &x8, &undersized),
            Err(Error::WrongBlockSize { got: 2, want: 4 })
        ));
        let deviant_pos = s8.position(&[1, 2]).unwrap();
        let q_dev = IntegerPoly::new(s8, 1, 1, 0, &[(vec![deviant_pos], 1)]).unwrap();
        assert!(matches!(
            degree_lowering_restrict(&q_dev, &x8, &e44),
            Err(Error::NotCanonical)
        ));
        let x_small: Vec<u16> = vec![1, 2, 3, 4];
        assert!(matches!(
            degree_lowering_restrict(&q, &x_small, &e44),
            Err(Error::Malformed(_))
        ));
    }

    #[test]
    fn stage_parameters_match_the_closed_forms() {
        // one-stage cover fraction for m=1, k=1, d=1: blocks of 4, so
        // 2^{(1*2 - 4*5)/2} = 2^-9
        let half = Dyadic::over_pow2(1, 1);
        let p = paper_params(&half, 1, 1, 1).unwrap();
        assert_eq!(p.eta1, Dyadic::over_pow2(1, 9));
        assert_eq!(p.block_size, 4);
        assert_eq!(p.ell, BigInt::from(355));
        assert_eq!(p.r, BigInt::from(1420));
        assert_eq!(p.ramsey_symbol, "R(2, 1421, 2^8)");
        // minimality at the boundary, as exact rational powers
        let base = &Dyadic::one() - &Dyadic::over_pow2(1, 9);
        assert!(base.pow(355) < half);
        assert!(base.pow(354) >= half);
        let quarter = Dyadic::over_pow2(1, 2);
        assert_eq!(paper_params(&quarter, 1, 1, 1).unwrap().ell, BigInt::from(710));
        // the interval-logarithm route agrees with exact powering
        assert_eq!(stage_count_by_logs(&half, 9).unwrap(), BigInt::from(355));
        assert_eq!(stage_count_by_logs(&quarter, 9).unwrap(), BigInt::from(710));
        // degree 2 pushes the stage count beyond any iteration: blocks
        // of 12, cover fraction 2^-77 per stage
        let p2 = paper_params(&half, 1, 1, 2).unwrap();
        assert_eq!(p2.eta1, Dyadic::over_pow2(1, 77));
        assert_eq!(p2.ell, "104745440421500155164989".parse::<BigInt>().unwrap());
        let p2q = paper_params(&quarter, 1, 1, 2).unwrap();
        assert_eq!(p2q.ell, "209490880843000310329977".parse::<BigInt>().unwrap());
        assert!(p2.ramsey_symbol.starts_with("R(4, "));
        // out-of-range requests are refused
        assert!(paper_params(&Dyadic::one(), 1, 1, 1).is_err());
        assert!(paper_params(&Dyadic::zero(), 1, 1, 1).is_err());
        assert!(paper_params(&half, 0, 1, 1).is_err());
        assert!(paper_params(&half, 1, 1, 0).is_err());
        assert!(matches!(paper_params(&half, 1, 1, 5), Err(Error::TooLarge(_))));
    }

    #[test]
    fn stage_construction_tiles_exactly() {
        // two stages of one-dimensional blocks of two vertices in a
        // four-vertex space: cover fractions 1/4 then 3/16, leftover 9/16
        let s4 = pl(4);
        let st = partition_stage(s4, &[1, 2, 3, 4], 1, 2, 2).unwrap();
        assert_eq!(st.eta1, Dyadic::over_pow2(1, 2));
        assert_eq!(st.stage_measures, vec![Dyadic::over_pow2(1, 2), Dyadic::over_pow2(3, 4)]);
        assert_eq!(st.leftover, Dyadic::over_pow2(9, 4));
        assert_eq!(st.stages[0].len(), 128);
        assert_eq!(st.stages[1].len(), 96);
        // every member is a one-dimensional block subspace; images are
        // pairwise disjoint across all stages and tile the measure
        let table = s4.table_len().unwrap();
        let mut covered = vec![false; table];
        let mut count = 0usize;
        for stage in &st.stages {
            for e in stage {
                assert_eq!(e.dim(), 1);
                assert!(e.is_block());
                for y in 0..e.domain().table_len().unwrap() as u64 {
                    let z = e.apply(&pt(e.domain(), y)).unwrap();
                    assert!(!covered[z.bits() as usize], "stage images must not overlap");
                    covered[z.bits() as usize] = true;
                    count += 1;
                }
            }
        }
        assert_eq!(count, 256 + 192);
        // stage one uses the first block, stage two the second
        assert_eq!(st.stages[0][0].wildcards(), &[vec![1, 2]]);
        assert_eq!(st.stages[1][0].wildcards(), &[vec![3, 4]]);
        // singleton blocks have cover fraction one: everything lands in
        // the first stage and later stages are empty
        let s6 = pl(6);
        let st2 = partition_stage(s6, &[1, 2, 3, 4, 5, 6], 2, 1, 3).unwrap();
        assert_eq!(st2.eta1, Dyadic::one());
        assert_eq!(
            st2.stage_measures,
            vec![Dyadic::one(), Dyadic::zero(), Dyadic::zero()]
        );
        assert_eq!(st2.leftover, Dyadic::zero());
        assert_eq!(st2.stages[0].len(), 1 << 18);
        assert!(st2.stages[1].is_empty() && st2.stages[2].is_empty());
        let mut seen = vec![false; s6.table_len().unwrap()];
        let mut total = 0usize;
        for e in &st2.stages[0] {
            assert_eq!(e.dim(), 2);
            for y in 0..e.domain().table_len().unwrap() as u64 {
                let z = e.apply(&pt(e.domain(), y)).unwrap();
                assert!(!seen[z.bits() as usize]);
                seen[z.bits() as usize] = true;
                total += 1;
            }
        }
        assert_eq!(total, s6.table_len().unwrap(), "singleton blocks cover everything");
        // the smallest possible run: one vertex, one stage, full cover
        let s1 = pl(1);
        let st3 = partition_stage(s1, &[1], 1, 1, 1).unwrap();
        assert_eq!(st3.eta1, Dyadic::one());
        assert_eq!(st3.leftover, Dyadic::zero());
        assert_eq!(st3.stages[0].len(), 1);
        // not enough vertices is an error with exact numbers
        assert!(matches!(
            partition_stage(s4, &[1, 2, 3], 1, 2, 2),
            Err(Error::InsufficientRoom { need: 4, have: 3 })
        ));
    }

    #[test]
    fn partition_plans_cover_with_constant_cells() {
        // a constant polynomial needs no work in either mode
        let s3 = pl(3);
        let c = IntegerPoly::new(s3, 1, 1, 1, &[]).unwrap();
        for mode in [
            PartitionMode::PaperParams,
            PartitionMode::DeskParams { block_size: 2, stages: 1, strategy: CanonicalStrategy::Exhaustive },
        ] {
            let plan = partition_polynomial(&c, &Dyadic::over_pow2(1, 1), 1, &mode).unwrap();
            assert_eq!(plan.pieces.len(), 1);
            assert_eq!(plan.pieces[0].constant, Some(1));
            assert_eq!(plan.leftover_measure, Dyadic::zero());
            audit_plan(&c, &plan).unwrap();
        }
        // five vertices, all-ones linear polynomial: one stage of
        // four-vertex blocks leaves 2^-10 of the space per cell, and the
        // restriction drops to a constant on every cell
        let s5 = pl(5);
        let all_one: Vec<(Vec<u32>, u64)> = (0..s5.len()).map(|p| (vec![p], 1)).collect();
        let q = IntegerPoly::new(s5, 1, 1, 0, &all_one).unwrap();
        let eta = Dyadic::over_pow2(1023, 10);
        let plan = partition_polynomial(
            &q,
            &eta,
            1,
            &PartitionMode::DeskParams { block_size: 4, stages: 1, strategy: CanonicalStrategy::Exhaustive },
        )
        .unwrap();
        assert_eq!(plan.pieces.len(), 32);
        for piece in &plan.pieces {
            assert!(piece.constant.is_some());
            assert_eq!(piece.restricted.true_degree(), 0);
        }
        assert_eq!(plan.leftover_measure, Dyadic::over_pow2(511, 9));
        assert!(plan.leftover_measure <= eta);
        audit_plan(&q, &plan).unwrap();
        assert!(plan.stage_log.last().unwrap().contains("within"));
        // the guaranteed parameters refuse to run at desk scale and the
        // message names the tower that would be required
        let err = partition_polynomial(&q, &Dyadic::over_pow2(1, 1), 1, &PartitionMode::PaperParams)
            .unwrap_err();
        match err {
            Error::TooLarge(msg) => assert!(msg.contains("R(2,"), "{msg}"),
            other => panic!("expected TooLarge, got {other:?}"),
        }
        // blocks of two never force a degree drop here: 2*lam_loop +
        // lam_edge = 3 is odd, so every cell stays stuck and the whole
        // space is surrendered
        let stuck = partition_polynomial(
            &q,
            &Dyadic::over_pow2(1, 1),
            1,
            &PartitionMode::DeskParams { block_size: 2, stages: 1, strategy: CanonicalStrategy::Exhaustive },
        )
        .unwrap();
        assert!(stuck.pieces.is_empty());
        assert_eq!(stuck.leftover_measure, Dyadic::one());
        assert!(stuck.stage_log.iter().any(|l| l.contains("stuck")));
        // a polynomial with no canonical window of the required size
        let loops_only: Vec<(Vec<u32>, u64)> = [4u16, 5]
            .iter()
            .map(|&v| (vec![s5.position(&[v]).unwrap()], 1))
            .collect();
        let q_bad = IntegerPoly::new(s5, 1, 1, 0, &loops_only).unwrap();
        assert!(matches!(
            partition_polynomial(
                &q_bad,
                &Dyadic::over_pow2(1, 1),
                1,
                &PartitionMode::DeskParams { block_size: 4, stages: 1, strategy: CanonicalStrategy::Exhaustive },
            ),
            Err(Error::CanonicalSetNotFound(4))
        ));
        // degenerate requests are refused
        assert!(partition_polynomial(&q, &Dyadic::over_pow2(1, 1), 0, &PartitionMode::PaperParams).is_err());
        assert!(partition_polynomial(&q, &Dyadic::zero(), 1, &PartitionMode::PaperParams).is_err());
    }

    #[test]
    fn torus_partition_keeps_the_phase_constant() {
        // same shape through the torus wrapper: phase 1/2 on every
        // coordinate plus a global shift of 1/4
        let s5 = pl(5);
        let coeffs: Vec<(Vec<u32>, DyadicTorus)> =
            (0..s5.len()).map(|p| (vec![p], tor(1, 1))).collect();
        let p = NonclassicalPoly::new(s5, 1, tor(1, 2), &coeffs).unwrap();
        let (plan, shift) = partition_nonclassical(
            &p,
            &Dyadic::over_pow2(1023, 10),
            1,
            &PartitionMode::DeskParams { block_size: 4, stages: 1, strategy: CanonicalStrategy::Exhaustive },
        )
        .unwrap();
        assert_eq!(shift, tor(1, 2));
        assert_eq!(plan.pieces.len(), 32);
        for piece in &plan.pieces {
            let e = &piece.embedding;
            let dom = e.domain();
            let first = p.eval(&e.apply(&pt(dom, 0)).unwrap()).unwrap();
            for y in 0..dom.table_len().unwrap() as u64 {
                let z = e.apply(&pt(dom, y)).unwrap();
                assert_eq!(p.eval(&z).unwrap(), first, "phase must be constant on each cell");
            }
        }
    }

    #[test]
    fn polynomial_json_round_trips() {
        let s5 = pl(5);
        let e_pos = s5.position(&[1, 2]).unwrap();
        let l_pos = s5.position(&[3]).unwrap();
        let q = IntegerPoly::new(s5, 2, 2, 1, &[(vec![e_pos], 3), (vec![e_pos, l_pos], 2)]).unwrap();
        let text = integer_poly_to_json(&q);
        assert!(text.contains("\"lambda\":3"));
        let back = integer_poly_from_json(&text).unwrap();
        assert_eq!(back.modulus_exponent(), 2);
        assert_eq!(back.degree_bound(), 2);
        assert_eq!(back.alpha(), q.alpha());
        assert_eq!(back.coeffs(), q.coeffs());
        for trial in 0..64u64 {
            let x = pt(s5, trial.wrapping_mul(0x9e37_79b9_7f4a_7c15) & ((1 << s5.len()) - 1));
            assert_eq!(back.eval(&x).unwrap(), q.eval(&x).unwrap());
        }
        // malformed documents are rejected with parse errors
        for bad in [
            "{}",
            "{\"n\": 5, \"k\": 0, \"d\": 1, \"alpha\": 0, \"coeffs\": []}",
            "{\"n\": 5, \"k\": 1, \"d\": 1, \"alpha\": 0, \"coeffs\": [{\"F\": [[1, 2, 3]], \"lambda\": 1}]}",
        ] {
            assert!(integer_poly_from_json(bad).is_err(), "{bad}");
        }
        // plan export carries every piece and the exact leftover
        let all_one: Vec<(Vec<u32>, u64)> = (0..s5.len()).map(|p| (vec![p], 1)).collect();
        let q1 = IntegerPoly::new(s5, 1, 1, 0, &all_one).unwrap();
        let plan = partition_polynomial(
            &q1,
            &Dyadic::over_pow2(1023, 10),
            1,
            &PartitionMode::DeskParams { block_size: 4, stages: 1, strategy: CanonicalStrategy::Exhaustive },
        )
        .unwrap();
        let text = partition_plan_to_json(&plan);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["pieces"].as_array().unwrap().len(), 32);
        assert_eq!(v["leftover"]["den_exp"], 9);
        assert!(v["log"].as_array().unwrap().len() >= 1);
    }
}
