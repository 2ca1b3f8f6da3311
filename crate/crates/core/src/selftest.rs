//! The acceptance checklist: one callable check per shipped guarantee,
//! shared by the acceptance test target and the command-line selftest.
//!
//! Each check panics on failure and returns a one-line summary on
//! success; the runner catches panics and turns them into FAIL rows, so
//! a single broken guarantee never hides the others.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

use crate::codes::{
    extremal_by_enumeration, extremal_search, extremal_witnesses, is_code, monotonicity_table,
    CodeFamily, CodeKind, SearchBudget,
};
use crate::dphj::{code_to_word_set, conditional_concentration, is_line_free, word_set_to_code, SquareWord};
use crate::f2space::{
    ellp_norm, gowers_norm, inverse_walsh, lp_norm, walsh_transform, EdgeIndexSet, GowersMethod,
    GraphPoint, PNorm, ValueTable,
};
use crate::graphs::{subsets_of_size, ForbiddenFamily, Graph};
use crate::polynomials::{
    audit_plan, degree_lowering_restrict, distributed_type, paper_params, partition_polynomial,
    partition_stage, to_integer_poly, CanonicalStrategy, DyadicTorus, IntegerPoly,
    NonclassicalPoly, PartitionMode,
};
use crate::rational::Dyadic;
use crate::subspaces::HjEmbedding;
use crate::uniformity::{
    fourier_boost, level_set_decomposition, subspace_density_bound_check, BoostWitness, MonoCase,
};
use crate::Error;

#[derive(Clone, Debug)]
pub struct CriterionOutcome {
    pub index: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const CRITERIA: [(&str, fn() -> String); 13] = [
    ("walsh involution, energy identity, fourth-moment norm", c01_fourier_backbone),
    ("second-order norm sandwich and order monotonicity", c02_norm_sandwich),
    ("exact extremal densities and their monotonicity", c03_extremal_densities),
    ("spectral peak boost on extremal codes", c04_peak_boost),
    ("torus phase splits into shift plus scaled integer part", c05_phase_split),
    ("subspace restriction agrees with composition", c06_restriction_composition),
    ("block restriction lowers the degree", c07_degree_lowering),
    ("partition stages tile with exact measures", c08_partition_stages),
    ("stage count closed forms and coverage bound", c09_stage_counts),
    ("level sets tile, balance, and locate a dense level", c10_level_sets),
    ("one-dimensional subspace density bound", c11_subspace_bound),
    ("word-set reduction preserves codes and density", c12_word_reduction),
    ("concentration scan returns verified blocks", c13_concentration),
];

pub fn run_one(index: usize) -> CriterionOutcome {
    let (name, check) = CRITERIA[index - 1];
    match std::panic::catch_unwind(check) {
        Ok(detail) => CriterionOutcome { index, name, passed: true, detail },
        Err(payload) => {
            let text = if let Some(s) = payload.downcast_ref::<&str>() {
                (*s).to_string()
            } else if let Some(s) = payload.downcast_ref::<String>() {
                s.clone()
            } else {
                "check panicked".to_string()
            };
            CriterionOutcome { index, name, passed: false, detail: text }
        }
    }
}

pub fn run_all() -> Vec<CriterionOutcome> {
    (1..=CRITERIA.len()).map(run_one).collect()
}

// ===========================================================================
// Shared generators
// ===========================================================================

fn pt(space: EdgeIndexSet, bits: u64) -> GraphPoint {
    GraphPoint::from_bits(space, bits).unwrap()
}

fn tor(j: u64, a: u32) -> DyadicTorus {
    DyadicTorus::new(j, a).unwrap()
}

fn p2_family() -> ForbiddenFamily {
    let p2 = Graph::from_edges(3, false, &[&[1, 2], &[2, 3]]).unwrap();
    ForbiddenFamily::explicit(vec![p2]).unwrap()
}

fn random_complex_table(space: EdgeIndexSet, rng: &mut ChaCha8Rng) -> ValueTable {
    let len = space.table_len().unwrap();
    let vals: Vec<Complex64> = (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
        .collect();
    ValueTable::from_fn(space, |x| vals[x as usize]).unwrap()
}

fn random_real_table(space: EdgeIndexSet, rng: &mut ChaCha8Rng) -> ValueTable {
    let len = space.table_len().unwrap();
    let vals: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    ValueTable::from_fn(space, |x| Complex64::new(vals[x as usize], 0.0)).unwrap()
}

/// Random torus polynomial with degree bound d, dense over all admissible
/// monomials with random coefficients.
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
fn random_integer_poly(space: EdgeIndexSet, k: u32, d: u32, rng: &mut ChaCha8Rng) -> IntegerPoly {
    let npos = space.len();
    let mut coeffs: Vec<(Vec<u32>, u64)> = Vec::new();
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

/// Random embedding of a smaller looped space into the given one.
fn random_embedding(space: EdgeIndexSet, m: u16, rng: &mut ChaCha8Rng) -> HjEmbedding {
    let n = space.n();
    let mut verts: Vec<u16> = (1..=n).collect();
    verts.shuffle(rng);
    let mut sets: Vec<Vec<u16>> = Vec::with_capacity(m as usize);
    let mut used = 0usize;
    for i in 0..m as usize {
        let left = n as usize - used;
        let remaining = m as usize - i;
        let take = rng.gen_range(1..=left - (remaining - 1));
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

fn rational(d: &Dyadic) -> BigRational {
    BigRational::new(d.num().clone(), BigInt::from(1) << d.den_exp() as usize)
}

// ===========================================================================
// Checks
// ===========================================================================

fn c01_fourier_backbone() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    let mut max_inv = 0.0f64;
    let mut max_energy = 0.0f64;
    for trial in 0..200 {
        let n = trial % 16 + 1;
        let space = EdgeIndexSet::generic(n as u32).unwrap();
        let f = random_complex_table(space, &mut rng);
        let spec = walsh_transform(&f);
        let back = inverse_walsh(&spec);
        for (a, b) in f.values().iter().zip(back.values()) {
            max_inv = max_inv.max((a - b).norm());
        }
        let l2 = lp_norm(&f, PNorm::Two);
        let e2 = ellp_norm(&spec, PNorm::Two);
        max_energy = max_energy.max((l2 * l2 - e2 * e2).abs());
    }
    assert!(max_inv < 1e-10, "involution drift {max_inv}");
    assert!(max_energy < 1e-10, "energy identity drift {max_energy}");

    let mut max_naive = 0.0f64;
    for n in 1..=6u32 {
        let space = EdgeIndexSet::generic(n).unwrap();
        for _ in 0..3 {
            let f = random_real_table(space, &mut rng);
            let l4 = ellp_norm(&walsh_transform(&f), PNorm::Four);
            let u2 = gowers_norm(&f, 2, GowersMethod::Naive).unwrap();
            max_naive = max_naive.max((u2 - l4).abs());
        }
    }
    assert!(max_naive < 1e-9, "naive fourth-moment drift {max_naive}");
    let mut max_rec = 0.0f64;
    for n in 1..=12u32 {
        let space = EdgeIndexSet::generic(n).unwrap();
        for _ in 0..3 {
            let f = random_real_table(space, &mut rng);
            let l4 = ellp_norm(&walsh_transform(&f), PNorm::Four);
            let u2 = gowers_norm(&f, 2, GowersMethod::Recursive).unwrap();
            max_rec = max_rec.max((u2 - l4).abs());
        }
    }
    assert!(max_rec < 1e-9, "recursive fourth-moment drift {max_rec}");
    format!(
        "200 tables: involution {max_inv:.1e}, energy {max_energy:.1e}; fourth moment naive {max_naive:.1e}, recursive {max_rec:.1e}"
    )
}

fn c02_norm_sandwich() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA2);
    let mut checked = 0usize;
    for n in [6u32, 10] {
        let space = EdgeIndexSet::generic(n).unwrap();
        for _ in 0..50 {
            let raw = random_real_table(space, &mut rng);
            let l2 = lp_norm(&raw, PNorm::Two);
            let scale = if l2 > 1.0 { 1.0 / l2 } else { 1.0 };
            let vals: Vec<Complex64> = raw.values().iter().map(|v| v * scale).collect();
            let f = ValueTable::from_fn(space, |x| vals[x as usize]).unwrap();
            let linf = ellp_norm(&walsh_transform(&f), PNorm::Inf);
            let u2 = gowers_norm(&f, 2, GowersMethod::Recursive).unwrap();
            assert!(linf <= u2 + 1e-9, "peak {linf} above norm {u2}");
            assert!(u2 <= linf.sqrt() + 1e-9, "norm {u2} above root peak {linf}");
            checked += 1;
        }
    }
    let mut chains = 0usize;
    for (n, reps) in [(4u32, 3usize), (6, 3), (8, 1)] {
        let space = EdgeIndexSet::generic(n).unwrap();
        for _ in 0..reps {
            let f = random_real_table(space, &mut rng);
            let u2 = gowers_norm(&f, 2, GowersMethod::Naive).unwrap();
            let m3 = if 4 * n <= 26 { GowersMethod::Naive } else { GowersMethod::Recursive };
            let u3 = gowers_norm(&f, 3, m3).unwrap();
            let m4 = if 5 * n <= 26 { GowersMethod::Naive } else { GowersMethod::Recursive };
            let u4 = gowers_norm(&f, 4, m4).unwrap();
            assert!(u2 <= u3 + 1e-9, "order two {u2} above order three {u3}");
            assert!(u3 <= u4 + 1e-9, "order three {u3} above order four {u4}");
            chains += 1;
        }
    }
    format!("{checked} sandwiches at 6 and 10 bits, {chains} monotone chains up to order four")
}

fn c03_extremal_densities() -> String {
    let budget = SearchBudget::default();
    let forb = p2_family();
    let quarter = Dyadic::over_pow2(1, 2);
    let half = Dyadic::over_pow2(1, 1);

    let r3 = extremal_search(EdgeIndexSet::pairs(3).unwrap(), &forb, CodeKind::Code, &budget)
        .unwrap();
    assert!(r3.exact);
    assert_eq!(r3.density, quarter);
    let (d3, fams3) =
        extremal_by_enumeration(EdgeIndexSet::pairs(3).unwrap(), &forb, CodeKind::Code).unwrap();
    assert_eq!(d3, quarter);
    assert!(!fams3.is_empty());

    let looped = ForbiddenFamily::CliquesLooped;
    let r1 = extremal_search(
        EdgeIndexSet::pairs_loops(1).unwrap(),
        &looped,
        CodeKind::HjCode,
        &budget,
    )
    .unwrap();
    assert!(r1.exact);
    assert_eq!(r1.density, half);
    let (d1, fams1) =
        extremal_by_enumeration(EdgeIndexSet::pairs_loops(1).unwrap(), &looped, CodeKind::HjCode)
            .unwrap();
    assert_eq!(d1, half);
    assert!(!fams1.is_empty());

    let rows = monotonicity_table(&forb, CodeKind::Code, false, 3..=5, &budget).unwrap();
    let got: Vec<Dyadic> = rows.iter().map(|r| r.density.clone()).collect();
    assert!(rows.iter().all(|r| r.exact));
    assert_eq!(got, vec![quarter.clone(), quarter, Dyadic::over_pow2(3, 4)]);
    let rows = monotonicity_table(&looped, CodeKind::HjCode, true, 1..=3, &budget).unwrap();
    assert!(rows.iter().all(|r| r.exact));
    let got: Vec<Dyadic> = rows.iter().map(|r| r.density.clone()).collect();
    assert_eq!(got, vec![half.clone(), half.clone(), half]);
    "two exact maxima cross-checked by enumeration, both density chains non-increasing".into()
}

fn audit_boost(fam: &CodeFamily, forb: &ForbiddenFamily, w: &BoostWitness) {
    let space = fam.space();
    // the recorded peak is the exact spectral maximum at the least frequency
    let sums = fam.character_sums();
    let n_exp = space.len() as u64;
    let best = sums.iter().skip(1).map(|t| t.abs()).max().unwrap();
    assert_eq!(w.linf_fourier, Dyadic::over_pow2(best, n_exp));
    let least = (1..sums.len()).find(|&xi| sums[xi].abs() == best).unwrap();
    assert_eq!(w.g0.bits(), least as u64);
    // the density splits into the two parity classes and the peak is half
    // their gap
    let odd = fam.members().filter(|&x| (x & w.g0.bits()).count_ones() % 2 == 1).count() as i64;
    let even = fam.cardinality() as i64 - odd;
    let half_exp = n_exp - 1;
    let d0 = Dyadic::over_pow2(even, half_exp);
    let d1 = Dyadic::over_pow2(odd, half_exp);
    let half = Dyadic::over_pow2(1, 1);
    assert_eq!(&half * &(&d0 + &d1), fam.density());
    let gap = if w.i0 == 0 { &d0 - &d1 } else { &d1 - &d0 };
    assert_eq!(&half * &gap, w.linf_fourier);
    // the vertex set is monochromatic in the recorded direction and the
    // section constant leaves its pairs free
    let mut inside = 0u64;
    for i in 0..w.a.len() {
        for j in i + 1..w.a.len() {
            inside |= 1 << space.position(&[w.a[i], w.a[j]]).unwrap();
        }
    }
    match w.case {
        MonoCase::Disjoint => assert_eq!(inside & w.g0.bits(), 0),
        MonoCase::Contained => assert_eq!(inside & w.g0.bits(), inside),
    }
    assert_eq!(w.x0.bits() & inside, 0);
    assert_eq!(w.subspace.support(), &w.a[..]);
    assert_eq!(w.subspace.constant().bits(), w.x0.bits());
    // the boosted family is a code and reaches the claimed density
    assert!(is_code(&w.boosted, forb, CodeKind::Code).unwrap().is_none());
    assert_eq!(w.achieved_density, w.boosted.density());
    assert!(w.achieved_density >= &fam.density() + &w.linf_fourier);
    let float_gap = (&w.achieved_density - &fam.density()).to_f64();
    assert!(w.linf_fourier.to_f64() <= float_gap + 1e-9);

    if w.case == MonoCase::Contained {
        // the doubled family upstairs: one half inside the selected parity
        // class, the other its shift by the least inside edge, halves
        // disjoint because every cross difference meets the peak oddly
        let dom = w.subspace.domain();
        let ups: Vec<u64> = (0..w.boosted.len_points())
            .filter(|&y| w.boosted.contains(y))
            .map(|y| w.subspace.apply(&pt(dom, y)).unwrap().bits())
            .collect();
        let e_bit = 1u64 << inside.trailing_zeros();
        let xi = w.g0.bits();
        assert_eq!(e_bit & xi, e_bit, "the shift edge lies inside the peak");
        let mut first_half = Vec::new();
        let mut shifted_half = Vec::new();
        for &z in &ups {
            if fam.contains(z) && (z & xi).count_ones() % 2 == w.i0 as u32 {
                first_half.push(z);
            } else {
                assert_eq!((z & xi).count_ones() % 2, (w.i0 as u32 + 1) % 2);
                shifted_half.push(z);
            }
            assert!(ups.contains(&(z ^ e_bit)), "shift partner must be present");
        }
        assert!(!first_half.is_empty());
        assert_eq!(first_half.len(), shifted_half.len());
        for &x in &first_half {
            for &y in &shifted_half {
                assert_eq!(((x ^ y) & xi).count_ones() % 2, 1);
            }
        }
    }
}

fn c04_peak_boost() -> String {
    let space = EdgeIndexSet::pairs(4).unwrap();
    let forb = p2_family();
    let found =
        extremal_witnesses(space, &forb, CodeKind::Code, &SearchBudget::default(), 4096).unwrap();
    assert!(found.complete, "the witness enumeration must finish");
    assert_eq!(found.cardinality, 16);
    let mut boosted = 0usize;
    let mut contained = 0usize;
    let mut skipped = 0usize;
    for fam in &found.witnesses {
        for m in [2u16, 3] {
            match fourier_boost(fam, &forb, m) {
                Ok(Some(w)) => {
                    audit_boost(fam, &forb, &w);
                    if w.case == MonoCase::Contained {
                        contained += 1;
                    }
                    boosted += 1;
                }
                Ok(None) => panic!("extremal codes at this size have nonzero peaks"),
                // a peak like a four-cycle has neither a triangle nor an
                // independent triple, so three vertices can fail where
                // two cannot
                Err(Error::NoMonochromaticSet) => {
                    assert_eq!(m, 3);
                    skipped += 1;
                }
                Err(other) => panic!("unexpected failure: {other:?}"),
            }
        }
    }
    assert!(boosted > 0, "at least some witnesses must boost");
    format!(
        "{} witnesses: {boosted} boosted ({contained} by the doubling case), {skipped} without a monochromatic triple",
        found.witnesses.len()
    )
}

fn c05_phase_split() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA5);
    let mut points = 0usize;
    for n in 1..=2u16 {
        let space = EdgeIndexSet::pairs_loops(n).unwrap();
        for d in 1..=3u32 {
            for _ in 0..10 {
                let p = random_torus_poly(space, d, &mut rng);
                let (q, alpha) = to_integer_poly(&p).unwrap();
                assert_eq!(q.modulus_exponent(), d.max(1));
                for x in 0..space.table_len().unwrap() as u64 {
                    let xp = pt(space, x);
                    let direct = p.eval(&xp).unwrap();
                    let composed = alpha + tor(q.eval(&xp).unwrap(), d);
                    assert_eq!(direct, composed, "n={n} d={d} x={x}");
                    points += 1;
                }
            }
        }
    }
    format!("60 polynomials split exactly at {points} points")
}

fn c06_restriction_composition() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA6);
    let mut points = 0usize;
    for trial in 0..200 {
        let n = rng.gen_range(2..=5u16);
        let m = rng.gen_range(1..=3u16.min(n));
        let space = EdgeIndexSet::pairs_loops(n).unwrap();
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
            assert_eq!(r.eval(&yp).unwrap(), q.eval(&z).unwrap(), "trial {trial}");
            points += 1;
        }
    }
    format!("200 restrictions agree with composition at {points} points")
}

fn c07_degree_lowering() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA7);
    let mut dropped = 0usize;
    // modulus 2: blocks of four vertices
    let s4 = EdgeIndexSet::pairs_loops(4).unwrap();
    let x4: Vec<u16> = vec![1, 2, 3, 4];
    let e4 = HjEmbedding::new(&[x4.clone()], GraphPoint::zero(s4)).unwrap();
    for _ in 0..50 {
        let (cl, ce) = loop {
            let pair = (rng.gen_range(0..2u64), rng.gen_range(0..2u64));
            if pair != (0, 0) {
                break pair;
            }
        };
        let coeffs: Vec<(Vec<u32>, u64)> = (0..s4.len())
            .map(|p| {
                let (u, v) = s4.key_at(p).unwrap();
                (vec![p], if u == v { cl } else { ce })
            })
            .collect();
        let q = IntegerPoly::new(s4, 1, 1, rng.gen_range(0..2), &coeffs).unwrap();
        assert_eq!(q.true_degree(), 1);
        let r = degree_lowering_restrict(&q, &x4, &e4).unwrap();
        assert!(r.true_degree() < q.true_degree());
        for y in 0..e4.domain().table_len().unwrap() as u64 {
            let yp = pt(e4.domain(), y);
            assert_eq!(r.eval(&yp).unwrap(), q.eval(&e4.apply(&yp).unwrap()).unwrap());
            assert_eq!(r.eval(&yp).unwrap(), r.alpha());
        }
        dropped += 1;
    }
    // modulus 4: blocks of eight vertices
    let s8 = EdgeIndexSet::pairs_loops(8).unwrap();
    let x8: Vec<u16> = (1..=8).collect();
    let e8 = HjEmbedding::new(&[x8.clone()], GraphPoint::zero(s8)).unwrap();
    for _ in 0..50 {
        let (cl, ce) = loop {
            let pair = (rng.gen_range(0..4u64), rng.gen_range(0..4u64));
            if pair != (0, 0) {
                break pair;
            }
        };
        let coeffs: Vec<(Vec<u32>, u64)> = (0..s8.len())
            .map(|p| {
                let (u, v) = s8.key_at(p).unwrap();
                (vec![p], if u == v { cl } else { ce })
            })
            .collect();
        let q = IntegerPoly::new(s8, 2, 1, rng.gen_range(0..4), &coeffs).unwrap();
        assert_eq!(q.true_degree(), 1);
        let r = degree_lowering_restrict(&q, &x8, &e8).unwrap();
        assert!(r.true_degree() < q.true_degree());
        dropped += 1;
    }
    assert_eq!(dropped, 100);

    // the counting congruence behind the drop: single-coordinate
    // monomials bucketed by relative position, class sizes divisible by
    // the modulus
    let sets_within = |block: &[u16]| -> Vec<Vec<u16>> {
        let mut out: Vec<Vec<u16>> = block.iter().map(|&v| vec![v]).collect();
        for i in 0..block.len() {
            for j in i + 1..block.len() {
                out.push(vec![block[i], block[j]]);
            }
        }
        out
    };
    let mut buckets_even = 0usize;
    let wilds = vec![vec![1u16, 2, 3, 4], vec![5, 6, 7, 8]];
    for block in [&wilds[0], &wilds[1]] {
        let mut buckets: HashMap<Vec<Vec<Vec<usize>>>, u64> = HashMap::new();
        for p in sets_within(block) {
            let dt = distributed_type(&[p], &wilds).unwrap();
            *buckets.entry(dt.dt).or_insert(0) += 1;
        }
        for s in buckets.values() {
            assert_eq!(s % 2, 0, "modulus-2 class sizes must be even");
            buckets_even += 1;
        }
    }
    let mut cross: Vec<Vec<u16>> = Vec::new();
    for &u in &wilds[0] {
        for &v in &wilds[1] {
            cross.push(vec![u.min(v), u.max(v)]);
        }
    }
    {
        let mut buckets: HashMap<Vec<Vec<Vec<usize>>>, u64> = HashMap::new();
        for p in cross {
            let dt = distributed_type(&[p], &wilds).unwrap();
            *buckets.entry(dt.dt).or_insert(0) += 1;
        }
        for s in buckets.values() {
            assert_eq!(s % 2, 0);
            buckets_even += 1;
        }
    }
    let big = vec![(1u16..=8).collect::<Vec<_>>(), (9u16..=16).collect::<Vec<_>>()];
    let mut between: Vec<Vec<u16>> = Vec::new();
    for &u in &big[0] {
        for &v in &big[1] {
            between.push(vec![u, v]);
        }
    }
    let mut buckets: HashMap<Vec<Vec<Vec<usize>>>, u64> = HashMap::new();
    for p in sets_within(&big[0]).into_iter().chain(between) {
        let dt = distributed_type(&[p], &big).unwrap();
        *buckets.entry(dt.dt).or_insert(0) += 1;
    }
    for s in buckets.values() {
        assert_eq!(s % 4, 0, "modulus-4 class sizes must be divisible by 4");
        buckets_even += 1;
    }
    format!("100 of 100 restrictions dropped degree, {buckets_even} position classes divisible")
}

fn c08_partition_stages() -> String {
    // two stages of one-dimensional two-vertex blocks in a four-vertex
    // space, with the closed-form geometric measures
    let s4 = EdgeIndexSet::pairs_loops(4).unwrap();
    let st = partition_stage(s4, &[1, 2, 3, 4], 1, 2, 2).unwrap();
    assert_eq!(st.eta1, Dyadic::over_pow2(1, 2));
    let survive = &Dyadic::one() - &st.eta1;
    for (j, measure) in st.stage_measures.iter().enumerate() {
        assert_eq!(*measure, &st.eta1 * &survive.pow(j as u64));
    }
    assert_eq!(st.leftover, survive.pow(st.stage_measures.len() as u64));
    assert_eq!(st.stage_measures, vec![Dyadic::over_pow2(1, 2), Dyadic::over_pow2(3, 4)]);
    assert_eq!(st.leftover, Dyadic::over_pow2(9, 4));
    // images are disjoint one-dimensional blocks tiling the stated measure
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

    // singleton blocks cover everything in the first stage
    let s6 = EdgeIndexSet::pairs_loops(6).unwrap();
    let st2 = partition_stage(s6, &[1, 2, 3, 4, 5, 6], 2, 1, 3).unwrap();
    assert_eq!(st2.eta1, Dyadic::one());
    assert_eq!(st2.stage_measures, vec![Dyadic::one(), Dyadic::zero(), Dyadic::zero()]);
    assert_eq!(st2.leftover, Dyadic::zero());
    assert_eq!(st2.stages[0].len(), 1 << 18);
    assert!(st2.stages[1].is_empty() && st2.stages[2].is_empty());

    // a full run on a linear polynomial: every piece constant, leftover
    // within the requested bound
    let s5 = EdgeIndexSet::pairs_loops(5).unwrap();
    let all_one: Vec<(Vec<u32>, u64)> = (0..s5.len()).map(|p| (vec![p], 1)).collect();
    let q = IntegerPoly::new(s5, 1, 1, 0, &all_one).unwrap();
    let eta = Dyadic::over_pow2(1023, 10);
    let mode = PartitionMode::DeskParams {
        block_size: 4,
        stages: 1,
        strategy: CanonicalStrategy::Exhaustive,
    };
    let plan = partition_polynomial(&q, &eta, 1, &mode).unwrap();
    assert_eq!(plan.pieces.len(), 32);
    for piece in &plan.pieces {
        assert!(piece.constant.is_some());
        assert_eq!(piece.restricted.true_degree(), 0);
    }
    assert_eq!(plan.leftover_measure, Dyadic::over_pow2(511, 9));
    assert!(plan.leftover_measure <= eta);
    audit_plan(&q, &plan).unwrap();
    "geometric stage measures exact, 448 disjoint cells audited, 32 constant pieces".into()
}

fn c09_stage_counts() -> String {
    let half = Dyadic::over_pow2(1, 1);
    let quarter = Dyadic::over_pow2(1, 2);
    let p = paper_params(&half, 1, 1, 1).unwrap();
    assert_eq!(p.eta1, Dyadic::over_pow2(1, 9));
    assert_eq!(p.block_size, 4);
    assert_eq!(p.ell, BigInt::from(355));
    let base = &Dyadic::one() - &p.eta1;
    assert!(base.pow(355) < half);
    assert!(base.pow(354) >= half);
    let pq = paper_params(&quarter, 1, 1, 1).unwrap();
    assert_eq!(pq.ell, BigInt::from(710));
    assert!(base.pow(710) < quarter);
    assert!(base.pow(709) >= quarter);
    "one-stage fraction 2^-9; 355 and 710 stages beat the halving and quartering targets exactly"
        .into()
}

fn c10_level_sets() -> String {
    let s2 = EdgeIndexSet::pairs_loops(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAA);
    let mut located = 0usize;
    for _ in 0..100 {
        let fam = CodeFamily::from_fn(s2, |_| rng.gen_bool(0.5)).unwrap();
        let d = rng.gen_range(1..=2u32);
        let p = random_torus_poly(s2, d, &mut rng);
        let delta = Dyadic::over_pow2(1, 3);
        let dec = level_set_decomposition(&fam, &p, &delta).unwrap();
        let ell = dec.phases.len();
        assert!(ell <= 1 << d, "at most 2^d phase values");
        assert_eq!(dec.i_plus.len() + dec.i_minus.len(), ell);
        let mut mass = Dyadic::zero();
        let mut balance = BigRational::from_integer(BigInt::from(0));
        let dens = rational(&fam.density());
        for i in 0..ell {
            mass = &mass + &dec.mu[i];
            balance += (&dec.lambda[i] - &dens) * rational(&dec.mu[i]);
        }
        assert_eq!(mass, Dyadic::one(), "level masses must tile");
        assert_eq!(balance, BigRational::from_integer(BigInt::from(0)), "excess must balance");
        if let Some(i) = dec.i0 {
            assert!(dec.correlation.norm() >= delta.to_f64());
            let floor = &delta * &Dyadic::pow2(-(d as i64 + 2));
            assert!(dec.mu[i] >= floor, "selected level too light");
            let needed = &dens + &rational(&(&delta * &Dyadic::pow2(-2)));
            assert!(dec.lambda[i] >= needed, "selected level not dense enough");
            located += 1;
        }
    }
    format!("100 decompositions tile and balance exactly, {located} located a dense level")
}

fn c11_subspace_bound() -> String {
    let s3 = EdgeIndexSet::pairs_loops(3).unwrap();
    let looped = ForbiddenFamily::CliquesLooped;
    let reference = Dyadic::over_pow2(1, 1);
    // all one-dimensional embeddings: every wildcard set with every
    // constant vanishing on its span
    let mut embeddings = Vec::new();
    for size in 1..=3u16 {
        for set in subsets_of_size(3, size) {
            let probe = HjEmbedding::new(&[set.clone()], GraphPoint::zero(s3)).unwrap();
            let span = probe.var_set(0).unwrap();
            let free: Vec<u32> = (0..s3.len()).filter(|p| span >> p & 1 == 0).collect();
            for packed in 0..1u64 << free.len() {
                let mut bits = 0u64;
                for (k, &pos) in free.iter().enumerate() {
                    bits |= (packed >> k & 1) << pos;
                }
                embeddings.push(HjEmbedding::new(&[set.clone()], pt(s3, bits)).unwrap());
            }
        }
    }
    assert_eq!(embeddings.len(), 121);

    let mut rng = ChaCha8Rng::seed_from_u64(0xAB);
    let table = s3.table_len().unwrap() as u64;
    for _ in 0..100 {
        // random maximal code by greedy insertion in shuffled order
        let mut order: Vec<u64> = (0..table).collect();
        order.shuffle(&mut rng);
        let mut fam = CodeFamily::empty(s3).unwrap();
        for z in order {
            fam.set(z, true);
            if is_code(&fam, &looped, CodeKind::HjCode).unwrap().is_some() {
                fam.set(z, false);
            }
        }
        assert!(is_code(&fam, &looped, CodeKind::HjCode).unwrap().is_none());
        assert!(fam.cardinality() > 0);
        for e in &embeddings {
            assert!(
                subspace_density_bound_check(&fam, e, &reference).unwrap(),
                "conditional density above one half"
            );
        }
    }
    "100 random codes stay at or below density one half on all 121 one-dimensional subspaces"
        .into()
}

fn c12_word_reduction() -> String {
    let looped = ForbiddenFamily::CliquesLooped;
    // side 2: every family
    let s2 = EdgeIndexSet::pairs_loops(2).unwrap();
    let mut with_lines = 0usize;
    for bits in 0u64..256 {
        let fam = CodeFamily::from_fn(s2, |x| bits >> x & 1 == 1).unwrap();
        let words = code_to_word_set(&fam).unwrap();
        assert_eq!(words.density(), fam.density());
        let verdict = is_code(&fam, &looped, CodeKind::HjCode).unwrap();
        match is_line_free(&words).unwrap() {
            None => assert!(verdict.is_none()),
            Some(line) => {
                assert!(verdict.is_some());
                let (a, b) = line.completions();
                assert!(words.contains(a.bits()) && words.contains(b.bits()));
                with_lines += 1;
            }
        }
        let symmetric_part = CodeFamily::from_fn(words.space(), |x| {
            SquareWord::new(2, x).unwrap().is_symmetric() && words.contains(x)
        })
        .unwrap();
        assert_eq!(symmetric_part.cardinality(), fam.cardinality());
        let back = word_set_to_code(&symmetric_part).unwrap();
        assert_eq!(back.blocks(), fam.blocks());
        assert_eq!(back.density(), fam.density());
    }
    assert!(with_lines > 0);
    // side 3: random families
    let s3 = EdgeIndexSet::pairs_loops(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC);
    for _ in 0..200 {
        let fam = CodeFamily::from_fn(s3, |_| rng.gen_bool(0.5)).unwrap();
        let words = code_to_word_set(&fam).unwrap();
        assert_eq!(words.density(), fam.density());
        let verdict = is_code(&fam, &looped, CodeKind::HjCode).unwrap();
        assert_eq!(is_line_free(&words).unwrap().is_none(), verdict.is_none());
        let symmetric_part = CodeFamily::from_fn(words.space(), |x| {
            SquareWord::new(3, x).unwrap().is_symmetric() && words.contains(x)
        })
        .unwrap();
        let back = word_set_to_code(&symmetric_part).unwrap();
        assert_eq!(back.blocks(), fam.blocks());
    }
    format!("256 exhaustive and 200 random families agree; {with_lines} exhaustive lines found; round trips exact")
}

fn c13_concentration() -> String {
    let ten = EdgeIndexSet::generic(10).unwrap();
    let blocks: Vec<Vec<u32>> = (0..8).map(|i| vec![i]).collect();
    let eps = Dyadic::over_pow2(1, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0xAD);
    for _ in 0..100 {
        let fam = CodeFamily::from_fn(ten, |_| rng.gen_bool(0.5)).unwrap();
        let scan = conditional_concentration(&fam, &blocks, &eps).unwrap();
        assert!(!scan.hypothesis_met, "eight blocks are below the guarantee threshold");
        let i0 = scan.i0.expect("a concentrated block");
        let block = &blocks[i0 - 1];
        let dens = fam.density();
        for section in 0..2u64 {
            let mut count = 0i64;
            for x in 0..1u64 << 10 {
                if x >> block[0] & 1 == section && fam.contains(x) {
                    count += 1;
                }
            }
            let cond = Dyadic::over_pow2(count, 9);
            assert!(
                cond <= &dens + &eps && dens <= &cond + &eps,
                "returned block fails the re-check"
            );
        }
    }
    "100 random sets: every returned block survives the exhaustive section re-check".into()
}
