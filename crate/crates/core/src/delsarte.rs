//! Exact upper bounds and symmetric constructions for translation-invariant
//! conflict graphs on graph spaces.
//!
//! A family whose pairwise XOR differences avoid a set D is an independent
//! set in the Cayley graph of F_2^N generated by D. Its normalized
//! autocorrelation f(x) = |S ∩ (S+x)|/|S| satisfies f(0) = 1, f ≥ 0,
//! f = 0 on D, and has nonnegative Walsh spectrum, while summing to |S|.
//! Maximizing the sum over all such f is therefore an upper bound for |S|,
//! and the maximum may be taken over vertex-permutation-symmetric f because
//! averaging over relabelings preserves every constraint when D is closed
//! under them. The program collapses to one variable per relabeling orbit,
//! small enough to solve in exact rational arithmetic.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::f2space::{EdgeIndexSet, GraphPoint, SpaceKind};
use crate::graphs::{canonical_form, Graph, MAX_CANON_VERTICES};

fn br(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

// ===========================================================================
// Vertex-relabeling orbits of table points
// ===========================================================================

pub(crate) struct PointOrbits {
    /// Orbit id of every table point.
    pub id: Vec<u32>,
    /// First point seen in each orbit, in discovery (ascending-point) order.
    pub reps: Vec<u64>,
    pub sizes: Vec<u64>,
}

impl PointOrbits {
    pub fn count(&self) -> usize {
        self.reps.len()
    }
}

/// Group the table points of a graph space by isomorphism type. None for
/// generic spaces (no vertex structure) and for spaces too large to
/// canonicalize.
pub(crate) fn point_orbits(space: EdgeIndexSet) -> Result<Option<PointOrbits>> {
    if matches!(space.kind(), SpaceKind::Generic) || space.n() > MAX_CANON_VERTICES {
        return Ok(None);
    }
    let len = space.table_len()?;
    let mut id = vec![0u32; len];
    let mut map: BTreeMap<crate::graphs::CanonicalForm, u32> = BTreeMap::new();
    let mut reps: Vec<u64> = Vec::new();
    let mut sizes: Vec<u64> = Vec::new();
    for x in 0..len as u64 {
        let g = Graph::new(GraphPoint::from_bits(space, x)?)?;
        let form = canonical_form(&g)?;
        let next = reps.len() as u32;
        let o = *map.entry(form).or_insert(next);
        if o == next {
            reps.push(x);
            sizes.push(0);
        }
        id[x as usize] = o;
        sizes[o as usize] += 1;
    }
    Ok(Some(PointOrbits { id, reps, sizes }))
}

// ===========================================================================
// Exact spectral upper bound
// ===========================================================================

/// Exact upper bound for the cardinality of a family whose pairwise XOR
/// differences avoid `diffs`, computed by the orbit-collapsed autocorrelation
/// program in exact rational arithmetic. None when the space has no vertex
/// structure or `diffs` is not closed under vertex relabeling (the bound
/// argument needs both).
pub(crate) fn spectral_bound(
    space: EdgeIndexSet,
    diffs: &[u64],
) -> Result<Option<BigRational>> {
    let Some(orbits) = point_orbits(space)? else {
        return Ok(None);
    };
    let k = orbits.count();
    let dset: BTreeSet<u64> = diffs.iter().copied().collect();
    if dset.contains(&0) {
        return Ok(None);
    }
    let mut is_d = vec![false; k];
    for &d in &dset {
        is_d[orbits.id[d as usize] as usize] = true;
    }
    // soundness requires D to be a union of whole orbits
    for x in 0..orbits.id.len() as u64 {
        if is_d[orbits.id[x as usize] as usize] != dset.contains(&x) {
            return Ok(None);
        }
    }
    let zero_orbit = orbits.id[0] as usize;
    debug_assert_eq!(orbits.sizes[zero_orbit], 1, "the empty point is alone in its orbit");

    // character sums: kmat[r][o] = sum over x in orbit o of (-1)^{|x & rep_r|};
    // well defined per orbit pair because relabeling preserves the pairing
    let mut kmat = vec![vec![0i64; k]; k];
    for x in 0..orbits.id.len() as u64 {
        let o = orbits.id[x as usize] as usize;
        for (r, &xi) in orbits.reps.iter().enumerate() {
            kmat[r][o] += if (x & xi).count_ones() % 2 == 0 { 1 } else { -1 };
        }
    }

    // maximize sum_o size_o * f_o with f_{zero} = 1, f = 0 on D-orbits,
    // f >= 0, and every character-sum row nonnegative; in <=-standard form
    // the fixed f_{zero} moves to the right-hand side
    let free: Vec<usize> = (0..k).filter(|&o| o != zero_orbit && !is_d[o]).collect();
    let fixed_term = br(orbits.sizes[zero_orbit] as i64);
    if free.is_empty() {
        return Ok(Some(fixed_term));
    }
    let a: Vec<Vec<BigRational>> = (0..k)
        .map(|r| free.iter().map(|&j| br(-kmat[r][j])).collect())
        .collect();
    let b: Vec<BigRational> = (0..k).map(|r| br(kmat[r][zero_orbit])).collect();
    for rhs in &b {
        assert!(
            !rhs.is_negative(),
            "zero-point column keeps the slack basis feasible"
        );
    }
    let c: Vec<BigRational> = free.iter().map(|&j| br(orbits.sizes[j] as i64)).collect();
    let opt = simplex_max(&a, &b, &c)?;
    Ok(Some(opt + fixed_term))
}

/// Dense primal simplex for max c'x subject to Ax <= b, x >= 0, with b >= 0
/// so the slack basis starts feasible. Bland's rule on both choices prevents
/// cycling. The optimum is certified before returning: the primal solution is
/// rechecked against every constraint, the dual read off the final tableau is
/// rechecked for feasibility, and the two objective values must agree.
fn simplex_max(
    a: &[Vec<BigRational>],
    b: &[BigRational],
    c: &[BigRational],
) -> Result<BigRational> {
    let m = a.len();
    let nv = c.len();
    let cols = nv + m + 1;
    let mut rows: Vec<Vec<BigRational>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = Vec::with_capacity(cols);
        row.extend(a[i].iter().cloned());
        for j in 0..m {
            row.push(if i == j { BigRational::one() } else { BigRational::zero() });
        }
        row.push(b[i].clone());
        rows.push(row);
    }
    let mut obj: Vec<BigRational> = Vec::with_capacity(cols);
    obj.extend(c.iter().cloned());
    obj.resize(cols, BigRational::zero());
    let mut basis: Vec<usize> = (nv..nv + m).collect();

    loop {
        let Some(enter) = (0..nv + m).find(|&j| obj[j].is_positive()) else {
            break;
        };
        let mut leave: Option<usize> = None;
        for i in 0..m {
            if !rows[i][enter].is_positive() {
                continue;
            }
            let better = match leave {
                None => true,
                Some(l) => {
                    let cand = &rows[i][cols - 1] / &rows[i][enter];
                    let cur = &rows[l][cols - 1] / &rows[l][enter];
                    cand < cur || (cand == cur && basis[i] < basis[l])
                }
            };
            if better {
                leave = Some(i);
            }
        }
        let Some(li) = leave else {
            return Err(Error::Malformed("unbounded spectral program".into()));
        };
        let piv = rows[li][enter].clone();
        for v in rows[li].iter_mut() {
            *v /= &piv;
        }
        for i in 0..m {
            if i != li && !rows[i][enter].is_zero() {
                let f = rows[i][enter].clone();
                for j in 0..cols {
                    let d = &rows[li][j] * &f;
                    rows[i][j] -= d;
                }
            }
        }
        if !obj[enter].is_zero() {
            let f = obj[enter].clone();
            for j in 0..cols {
                let d = &rows[li][j] * &f;
                obj[j] -= d;
            }
        }
        basis[li] = enter;
    }

    // primal solution
    let mut x = vec![BigRational::zero(); nv];
    for i in 0..m {
        if basis[i] < nv {
            x[basis[i]] = rows[i][cols - 1].clone();
        }
    }
    // dual solution: negated reduced costs of the slack columns
    let y: Vec<BigRational> = (0..m).map(|i| -obj[nv + i].clone()).collect();

    // certify against the original data
    let mut primal_obj = BigRational::zero();
    for j in 0..nv {
        assert!(!x[j].is_negative(), "primal variable went negative");
        primal_obj += &c[j] * &x[j];
    }
    for i in 0..m {
        let mut lhs = BigRational::zero();
        for j in 0..nv {
            lhs += &a[i][j] * &x[j];
        }
        assert!(lhs <= b[i], "primal constraint violated after pivoting");
    }
    let mut dual_obj = BigRational::zero();
    for i in 0..m {
        assert!(!y[i].is_negative(), "dual variable went negative");
        dual_obj += &y[i] * &b[i];
    }
    for j in 0..nv {
        let mut lhs = BigRational::zero();
        for i in 0..m {
            lhs += &y[i] * &a[i][j];
        }
        assert!(lhs >= c[j], "dual constraint violated, bound would be unsafe");
    }
    assert_eq!(primal_obj, dual_obj, "objective gap at claimed optimum");
    Ok(primal_obj)
}

// ===========================================================================
// Rotation-invariant exact construction
// ===========================================================================

/// Exact maximum cardinality among families that are invariant under the
/// cyclic vertex rotation 1→2→…→n→1 and avoid XOR differences in `diffs`.
/// The quotient by rotation orbits is small, so a weighted branch and bound
/// settles it completely; the returned member list is a genuine family of
/// the full space, hence a lower-bound witness for the unrestricted maximum.
/// None for generic spaces, on rotation-asymmetric difference sets, or when
/// the node pool runs dry.
pub(crate) fn rotation_invariant_maximum(
    space: EdgeIndexSet,
    diffs: &[u64],
    pool: &mut u64,
) -> Result<Option<Vec<u64>>> {
    if matches!(space.kind(), SpaceKind::Generic) || space.n() < 2 {
        return Ok(None);
    }
    let n = space.n();
    let len = space.table_len()? as u64;
    let npos = space.len();
    // position image under the rotation
    let mut pos_map = vec![0u32; npos as usize];
    for p in 0..npos {
        let (i, j) = space.key_at(p).expect("position in range");
        let (a, b) = (i % n + 1, j % n + 1);
        pos_map[p as usize] = space.position(&[a.min(b), a.max(b)])?;
    }
    let rotate = |x: u64| -> u64 {
        let mut z = 0u64;
        for p in 0..npos {
            if x >> p & 1 == 1 {
                z |= 1 << pos_map[p as usize];
            }
        }
        z
    };
    let dset: BTreeSet<u64> = diffs.iter().copied().collect();
    for &d in &dset {
        if !dset.contains(&rotate(d)) {
            return Ok(None);
        }
    }

    // orbits of table points under the rotation
    let mut orbit_of = vec![u32::MAX; len as usize];
    let mut members: Vec<Vec<u64>> = Vec::new();
    for x in 0..len {
        if orbit_of[x as usize] != u32::MAX {
            continue;
        }
        let id = members.len() as u32;
        let mut orb = Vec::new();
        let mut y = x;
        loop {
            orbit_of[y as usize] = id;
            orb.push(y);
            y = rotate(y);
            if y == x {
                break;
            }
        }
        members.push(orb);
    }

    // an orbit is usable when no two of its points conflict
    let usable: Vec<usize> = (0..members.len())
        .filter(|&o| {
            members[o]
                .iter()
                .all(|&x| members[o].iter().all(|&y| y == x || !dset.contains(&(x ^ y))))
        })
        .collect();
    if usable.is_empty() {
        return Ok(Some(Vec::new()));
    }
    let index_of: BTreeMap<usize, usize> =
        usable.iter().enumerate().map(|(i, &o)| (o, i)).collect();
    let nu = usable.len();
    let words = nu.div_ceil(64);
    let mut adj = vec![0u64; nu * words];
    let mut add = |a: usize, b: usize| {
        adj[a * words + b / 64] |= 1 << (b % 64);
        adj[b * words + a / 64] |= 1 << (a % 64);
    };
    for (i, &o) in usable.iter().enumerate() {
        for &x in &members[o] {
            for &d in &dset {
                let t = orbit_of[(x ^ d) as usize] as usize;
                if t != o {
                    if let Some(&j) = index_of.get(&t) {
                        if j > i {
                            add(i, j);
                        }
                    }
                }
            }
        }
    }
    let weights: Vec<u64> = usable.iter().map(|&o| members[o].len() as u64).collect();

    let mut solver = WeightedMis {
        words,
        adj: &adj,
        weights: &weights,
        order: {
            let mut ord: Vec<usize> = (0..nu).collect();
            ord.sort_by_key(|&v| std::cmp::Reverse(weights[v]));
            ord
        },
        nodes: 0,
        max_nodes: *pool,
    };
    let picked = solver.run();
    *pool = pool.saturating_sub(solver.nodes);
    let Some(picked) = picked else {
        return Ok(None);
    };
    let mut out: Vec<u64> = Vec::new();
    for v in picked {
        out.extend(&members[usable[v]]);
    }
    out.sort_unstable();
    Ok(Some(out))
}

/// Branch and bound for the maximum-weight independent set of a small dense
/// graph. The pruning bound covers the candidates by greedy cliques and adds
/// each clique's heaviest weight, which no independent set can exceed.
struct WeightedMis<'a> {
    words: usize,
    adj: &'a [u64],
    weights: &'a [u64],
    order: Vec<usize>,
    nodes: u64,
    max_nodes: u64,
}

impl<'a> WeightedMis<'a> {
    fn row(&self, v: usize) -> &[u64] {
        &self.adj[v * self.words..(v + 1) * self.words]
    }

    fn run(&mut self) -> Option<Vec<usize>> {
        let n = self.weights.len();
        let mut cand = vec![!0u64; self.words];
        let tail = n % 64;
        if tail != 0 {
            cand[self.words - 1] = (1u64 << tail) - 1;
        }
        let mut cur = Vec::new();
        let mut best = Vec::new();
        let mut best_w = 0u64;
        let complete = self.expand(&mut cur, 0, &mut cand, &mut best, &mut best_w);
        complete.then_some(best)
    }

    fn weight_bound(&self, cand: &[u64]) -> u64 {
        let mut remaining = cand.to_vec();
        let mut bound = 0u64;
        while let Some(v0) = super::codes::lowest_bit(&remaining) {
            remaining[v0 / 64] &= !(1 << (v0 % 64));
            let mut heaviest = self.weights[v0];
            let mut common: Vec<u64> =
                remaining.iter().zip(self.row(v0)).map(|(r, m)| r & m).collect();
            while let Some(u) = super::codes::lowest_bit(&common) {
                remaining[u / 64] &= !(1 << (u % 64));
                heaviest = heaviest.max(self.weights[u]);
                for wi in 0..self.words {
                    common[wi] &= self.row(u)[wi];
                    common[wi] &= remaining[wi];
                }
            }
            bound += heaviest;
        }
        bound
    }

    fn expand(
        &mut self,
        cur: &mut Vec<usize>,
        cur_w: u64,
        cand: &mut [u64],
        best: &mut Vec<usize>,
        best_w: &mut u64,
    ) -> bool {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return false;
        }
        if cur_w > *best_w {
            *best_w = cur_w;
            *best = cur.clone();
        }
        let sub_bound = self.weight_bound(cand);
        if cur_w + sub_bound <= *best_w {
            return true;
        }
        // branch on the heaviest remaining candidate
        let v = *self
            .order
            .iter()
            .find(|&&v| cand[v / 64] >> (v % 64) & 1 == 1)
            .expect("bound positive, so a candidate exists");
        let mut sub = cand.to_vec();
        sub[v / 64] &= !(1 << (v % 64));
        for wi in 0..self.words {
            sub[wi] &= !self.row(v)[wi];
        }
        cur.push(v);
        let ok = self.expand(cur, cur_w + self.weights[v], &mut sub, best, best_w);
        cur.pop();
        if !ok {
            return false;
        }
        cand[v / 64] &= !(1 << (v % 64));
        self.expand(cur, cur_w, cand, best, best_w)
    }
}
