//! Fourier-peak boosting for extremal codes and level-set analysis of
//! polynomial phases.
//!
//! The boost construction conditions an extremal code on the parity class
//! of its largest nontrivial Fourier coefficient and passes to a central
//! subspace on a vertex set where the peak frequency is monochromatic. In
//! the disjoint case the best section already has the boosted density; in
//! the contained case the doubled family built from an odd shift does, and
//! remains a code because the shift flips the edge-count parity. All
//! densities and the peak itself are exact dyadic rationals; floats enter
//! only through the norm reports.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rayon::prelude::*;

use crate::codes::{is_code, CodeFamily, CodeKind};
use crate::error::{Error, Result};
use crate::f2space::{
    gowers_norm, pool, GowersMethod, GraphPoint, SpaceKind, ValueTable,
};
use crate::graphs::{subsets_of_size, ForbiddenFamily};
use crate::polynomials::{DyadicTorus, NonclassicalPoly};
use crate::rational::Dyadic;
use crate::subspaces::{CentralEmbedding, HjEmbedding};

/// How the chosen vertex set meets the peak frequency: none of its pairs
/// lie in the peak graph, or all of them do.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonoCase {
    Disjoint,
    Contained,
}

/// The output of one boost step: the peak, the parity class, the vertex
/// set, the selected section, and the denser family living on it.
#[derive(Clone, Debug)]
pub struct BoostWitness {
    /// Frequency attaining the largest centered Fourier coefficient,
    /// lexicographically least among ties.
    pub g0: GraphPoint,
    /// Parity class with the larger conditional density.
    pub i0: u8,
    /// Vertex set on which g0 is monochromatic.
    pub a: Vec<u16>,
    pub case: MonoCase,
    /// The winning outside assignment; vanishes on the pairs within `a`.
    pub x0: GraphPoint,
    /// Central embedding with support `a` and constant part `x0`.
    pub subspace: CentralEmbedding,
    /// The boosted family, pulled back to the small space.
    pub boosted: CodeFamily,
    pub achieved_density: Dyadic,
    /// The peak magnitude itself; exact because the centered transform of
    /// an indicator is an integer over a power of two.
    pub linf_fourier: Dyadic,
}

/// Reject forbidden families outside the parity hypothesis: every member
/// must be loopless with an even number of edges.
fn check_parity_hypothesis(forb: &ForbiddenFamily) -> Result<()> {
    match forb {
        ForbiddenFamily::Explicit(members) => {
            for g in members {
                if g.has_loops() || g.edge_count() % 2 != 0 {
                    return Err(Error::ParityViolation);
                }
            }
            Ok(())
        }
        // K_2 has one edge; the looped family is not even loopless.
        ForbiddenFamily::Cliques | ForbiddenFamily::CliquesLooped => {
            Err(Error::ParityViolation)
        }
    }
}

/// Find a vertex set of size m whose pairs all avoid or all hit g0. Scans
/// the size-m subsets in lexicographic order and returns the first
/// monochromatic one, so the outcome is deterministic; the scan is an
/// exact clique / independent-set search at the requested size.
pub fn monochromatic_set(g0: &GraphPoint, m: u16) -> Result<Option<(Vec<u16>, MonoCase)>> {
    let space = g0.space();
    if space.kind() != SpaceKind::Pairs {
        return Err(Error::Malformed("peak must live in a loopless space".into()));
    }
    if m < 2 {
        return Err(Error::Malformed("vertex set must have at least two members".into()));
    }
    for subset in subsets_of_size(space.n(), m) {
        let mut hits = 0u32;
        let total = (m as u32) * (m as u32 - 1) / 2;
        for i in 0..subset.len() {
            for j in i + 1..subset.len() {
                if g0.get(space.position(&[subset[i], subset[j]])?) {
                    hits += 1;
                }
            }
        }
        if hits == 0 {
            return Ok(Some((subset, MonoCase::Disjoint)));
        }
        if hits == total {
            return Ok(Some((subset, MonoCase::Contained)));
        }
    }
    Ok(None)
}

/// Enumerate the assignments of the positions outside `inside_mask` and
/// return the one maximizing `score`, ties to the smallest bit pattern.
/// The score is an exact member count, so the argmax has no float noise.
fn best_outside_assignment(
    outside: &[u32],
    filter_parity: Option<(u64, u64)>,
    score: impl Fn(u64) -> u64 + Sync,
) -> (u64, u64) {
    let total = 1u64 << outside.len();
    pool().install(|| {
        (0..total)
            .into_par_iter()
            .filter_map(|packed| {
                let mut bits = 0u64;
                for (k, &pos) in outside.iter().enumerate() {
                    bits |= (packed >> k & 1) << pos;
                }
                if let Some((mask, want)) = filter_parity {
                    if (bits & mask).count_ones() as u64 % 2 != want {
                        return None;
                    }
                }
                Some((score(bits), bits))
            })
            .reduce(
                || (0, u64::MAX),
                |a, b| {
                    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                        b
                    } else {
                        a
                    }
                },
            )
    })
}

/// One boost step on an extremal code: locate the Fourier peak, condition
/// on its parity class, and pass to the best section over a vertex set
/// where the peak is monochromatic. Returns None exactly when the centered
/// spectrum vanishes off zero, so there is nothing to boost.
pub fn fourier_boost(
    fam: &CodeFamily,
    forb: &ForbiddenFamily,
    m: u16,
) -> Result<Option<BoostWitness>> {
    let space = fam.space();
    if space.kind() != SpaceKind::Pairs {
        return Err(Error::Malformed("boosting runs on loopless spaces".into()));
    }
    if m < 2 || m > space.n() {
        return Err(Error::Malformed("section size must satisfy 2 <= m <= n".into()));
    }
    check_parity_hypothesis(forb)?;
    if let Some((x, y)) = is_code(fam, forb, CodeKind::Code)? {
        return Err(Error::NotACode(x, y));
    }

    // the centered transform at xi != 0 is t(xi) / 2^N with integer t
    let sums = fam.character_sums();
    let mut peak_abs = 0i64;
    let mut peak_xi = 0u64;
    for (xi, &t) in sums.iter().enumerate().skip(1) {
        if t.abs() > peak_abs {
            peak_abs = t.abs();
            peak_xi = xi as u64;
        }
    }
    if peak_abs == 0 {
        return Ok(None);
    }
    let g0 = GraphPoint::from_bits(space, peak_xi)?;
    let linf = Dyadic::over_pow2(peak_abs, space.len() as u64);

    // split by the parity of the intersection with the peak; the class
    // with more members realizes density + peak exactly
    let n1 = fam
        .members()
        .filter(|&x| (x & peak_xi).count_ones() % 2 == 1)
        .count() as u64;
    let n0 = fam.cardinality() - n1;
    let i0: u8 = (n1 > n0) as u8;

    let (a, case) = monochromatic_set(&g0, m)?.ok_or(Error::NoMonochromaticSet)?;
    let mut inside_mask = 0u64;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            inside_mask |= 1 << space.position(&[a[i], a[j]])?;
        }
    }
    let outside: Vec<u32> =
        (0..space.len()).filter(|p| inside_mask >> p & 1 == 0).collect();

    let x0_bits = match case {
        MonoCase::Disjoint => {
            // sections partition the parity class; the best one has at
            // least its average density
            let (_, bits) = best_outside_assignment(
                &outside,
                Some((peak_xi, i0 as u64)),
                |x| {
                    let mut count = 0u64;
                    let mut y = inside_mask;
                    loop {
                        count += fam.contains(x | y) as u64;
                        if y == 0 {
                            break;
                        }
                        y = (y - 1) & inside_mask;
                    }
                    count
                },
            );
            bits
        }
        MonoCase::Contained => {
            // sections partition everything; score by members of the
            // parity class inside the section
            let (_, bits) = best_outside_assignment(&outside, None, |x| {
                let mut count = 0u64;
                let mut y = inside_mask;
                loop {
                    let z = x | y;
                    if fam.contains(z) && (z & peak_xi).count_ones() as u64 % 2 == i0 as u64 {
                        count += 1;
                    }
                    if y == 0 {
                        break;
                    }
                    y = (y - 1) & inside_mask;
                }
                count
            });
            bits
        }
    };
    let x0 = GraphPoint::from_bits(space, x0_bits)?;
    let subspace = CentralEmbedding::new(&a, x0.clone())?;

    let boosted = match case {
        MonoCase::Disjoint => subspace.preimage_family(fam)?,
        MonoCase::Contained => {
            // double the parity-class members by an odd shift; the shift
            // flips edge-count parity, so the two halves cannot collide
            // and no difference within the union is an even graph we
            // have not already excluded
            let e_bit = 1u64 << inside_mask.trailing_zeros();
            let mut union = CodeFamily::empty(space)?;
            let mut y = inside_mask;
            loop {
                let z = x0_bits | y;
                if fam.contains(z) && (z & peak_xi).count_ones() as u64 % 2 == i0 as u64 {
                    debug_assert!(!union.contains(z ^ e_bit), "odd shift must not collide");
                    union.set(z, true);
                    union.set(z ^ e_bit, true);
                }
                if y == 0 {
                    break;
                }
                y = (y - 1) & inside_mask;
            }
            subspace.preimage_family(&union)?
        }
    };
    let achieved_density = boosted.density();
    debug_assert!(
        achieved_density >= &fam.density() + &linf,
        "boost must reach density plus peak"
    );
    debug_assert!(
        is_code(&boosted, forb, CodeKind::Code).map_or(false, |v| v.is_none()),
        "boosted family must stay a code"
    );
    Ok(Some(BoostWitness {
        g0,
        i0,
        a,
        case,
        x0,
        subspace,
        boosted,
        achieved_density,
        linf_fourier: linf,
    }))
}

// ===========================================================================
// Uniformity reports
// ===========================================================================

/// Norm summary for a family: exact density, the centered Fourier peak,
/// and the requested uniformity norms of the centered indicator.
#[derive(Clone, Debug)]
pub struct UniformityReport {
    pub density: Dyadic,
    pub linf_fourier: f64,
    pub gowers: Vec<(u32, f64)>,
}

fn gowers_auto(f: &ValueTable, d: u32) -> Result<f64> {
    if d == 2 {
        return gowers_norm(f, d, GowersMethod::Spectral);
    }
    if (d + 1) * f.space().len() <= 26 {
        return gowers_norm(f, d, GowersMethod::Naive);
    }
    gowers_norm(f, d, GowersMethod::Recursive)
}

/// Density, Fourier peak and uniformity norms of the centered indicator.
pub fn uniformity_report(fam: &CodeFamily, orders: &[u32]) -> Result<UniformityReport> {
    let scale = (fam.len_points() as f64).recip();
    let linf = fam
        .character_sums()
        .iter()
        .skip(1)
        .map(|t| t.abs())
        .max()
        .unwrap_or(0) as f64
        * scale;
    let centered = fam.centered_table();
    let mut gowers = Vec::with_capacity(orders.len());
    for &d in orders {
        gowers.push((d, gowers_auto(&centered, d)?));
    }
    Ok(UniformityReport { density: fam.density(), linf_fourier: linf, gowers })
}

pub fn report_to_json(r: &UniformityReport) -> String {
    let gowers: serde_json::Map<String, serde_json::Value> = r
        .gowers
        .iter()
        .map(|&(d, v)| (d.to_string(), serde_json::json!(v)))
        .collect();
    serde_json::json!({
        "density": r.density,
        "linf_fourier": r.linf_fourier,
        "gowers": gowers,
    })
    .to_string()
}

// ===========================================================================
// Level sets of a polynomial phase
// ===========================================================================

/// The level structure of exp(2 pi i P) against a family: one entry per
/// attained phase, ordered by increasing phase in [0, 1), with exact
/// masses and conditional densities.
#[derive(Clone, Debug)]
pub struct LevelSetDecomposition {
    /// Phases of the attained unit-circle values, ascending.
    pub phases: Vec<DyadicTorus>,
    /// The level sets, as families over the same space.
    pub level_sets: Vec<CodeFamily>,
    /// Exact masses; they sum to one.
    pub mu: Vec<Dyadic>,
    /// Exact conditional densities of the family on each level set.
    pub lambda: Vec<BigRational>,
    /// Levels at least as dense as the whole family, and the rest.
    pub i_plus: Vec<usize>,
    pub i_minus: Vec<usize>,
    /// A level with mass at least delta / 2^(d+2) and excess density at
    /// least delta / 4, when the correlation modulus reaches delta.
    pub i0: Option<usize>,
    /// E[(indicator - density) exp(2 pi i P)], as a float summary.
    pub correlation: Complex64,
}

impl LevelSetDecomposition {
    /// The attained values themselves.
    pub fn values(&self) -> Vec<Complex64> {
        self.phases
            .iter()
            .map(|t| {
                let theta = 2.0 * std::f64::consts::PI * t.to_f64();
                Complex64::new(theta.cos(), theta.sin())
            })
            .collect()
    }
}

fn dyadic_to_rational(d: &Dyadic) -> BigRational {
    BigRational::new(d.num().clone(), BigInt::from(1) << d.den_exp())
}

/// Decompose the space by the value of exp(2 pi i P) and measure the
/// family on each piece. The masses and conditional densities are exact;
/// only the correlation is a float. The level count never exceeds 2^d for
/// a degree bound d.
pub fn level_set_decomposition(
    fam: &CodeFamily,
    p: &NonclassicalPoly,
    delta: &Dyadic,
) -> Result<LevelSetDecomposition> {
    if fam.space() != p.space() {
        return Err(Error::SpaceMismatch);
    }
    if delta.is_negative() {
        return Err(Error::Malformed("threshold must be nonnegative".into()));
    }
    let space = fam.space();
    let table = space.table_len()? as u64;

    let mut groups: Vec<(DyadicTorus, Vec<u64>)> = Vec::new();
    for x in 0..table {
        let v = p.eval(&GraphPoint::from_bits(space, x)?)?;
        match groups.iter_mut().find(|(t, _)| *t == v) {
            Some((_, members)) => members.push(x),
            None => groups.push((v, vec![x])),
        }
    }
    // ascending phase order
    groups.sort_by_key(|(t, _)| (t.numerator() as u128) << (64 - t.exponent()));
    let ell = groups.len();
    let d = p.degree_bound();
    assert!(d >= 27 || ell <= 1usize << d, "a degree-{d} phase attains at most 2^{d} values");

    let density = fam.density();
    let density_q = dyadic_to_rational(&density);
    let mut phases = Vec::with_capacity(ell);
    let mut level_sets = Vec::with_capacity(ell);
    let mut mu = Vec::with_capacity(ell);
    let mut lambda = Vec::with_capacity(ell);
    let mut i_plus = Vec::new();
    let mut i_minus = Vec::new();
    let mut mass_total = Dyadic::zero();
    let mut balance = BigRational::from_integer(BigInt::from(0));
    let mut correlation = Complex64::new(0.0, 0.0);
    for (i, (t, members)) in groups.iter().enumerate() {
        let gamma = CodeFamily::from_members(space, members)?;
        let hits = members.iter().filter(|&&x| fam.contains(x)).count() as i64;
        let size = members.len() as i64;
        let mass = Dyadic::over_pow2(size, space.len() as u64);
        let cond = BigRational::new(BigInt::from(hits), BigInt::from(size));
        if cond >= density_q {
            i_plus.push(i);
        } else {
            i_minus.push(i);
        }
        let excess = &cond - &density_q;
        balance += &excess * dyadic_to_rational(&mass);
        let theta = 2.0 * std::f64::consts::PI * t.to_f64();
        let z = Complex64::new(theta.cos(), theta.sin());
        // (lambda_i - density) mu_i, exact, then one rounding to float
        let coef = {
            let q = &excess * dyadic_to_rational(&mass);
            let num: f64 = q.numer().to_string().parse().expect("decimal integer");
            let den: f64 = q.denom().to_string().parse().expect("decimal integer");
            num / den
        };
        correlation += z * coef;
        mass_total = &mass_total + &mass;
        phases.push(*t);
        level_sets.push(gamma);
        mu.push(mass);
        lambda.push(cond);
    }
    assert!(mass_total == Dyadic::one(), "level sets must tile the space");
    assert!(balance == BigRational::from_integer(BigInt::from(0)), "excess mass must balance");

    // selection per the correlation bound: among levels with enough mass,
    // the largest excess wins, earliest index on ties
    let mut i0 = None;
    if correlation.norm() >= delta.to_f64() && !delta.is_zero() {
        let mass_floor = delta * &Dyadic::pow2(-((d as i64) + 2));
        let mut best: Option<(usize, &BigRational)> = None;
        for i in 0..ell {
            if mu[i] >= mass_floor && best.map_or(true, |(_, l)| lambda[i] > *l) {
                best = Some((i, &lambda[i]));
            }
        }
        if let Some((i, l)) = best {
            let needed = &density_q + &dyadic_to_rational(&(delta * &Dyadic::pow2(-2)));
            if *l >= needed {
                i0 = Some(i);
            }
        }
    }

    Ok(LevelSetDecomposition {
        phases,
        level_sets,
        mu,
        lambda,
        i_plus,
        i_minus,
        i0,
        correlation,
    })
}

/// Is the conditional density of the family on the image of e at most the
/// reference density? The comparison is exact.
pub fn subspace_density_bound_check(
    fam: &CodeFamily,
    e: &HjEmbedding,
    reference: &Dyadic,
) -> Result<bool> {
    if fam.space() != e.codomain() {
        return Err(Error::SpaceMismatch);
    }
    let table = e.domain().table_len()? as u64;
    let mut hits = 0i64;
    for y in 0..table {
        let z = e.apply(&GraphPoint::from_bits(e.domain(), y)?)?;
        hits += fam.contains(z.bits()) as i64;
    }
    Ok(Dyadic::over_pow2(hits, e.domain().len() as u64) <= *reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{extremal_search, extremal_witnesses, SearchBudget};
    use crate::f2space::EdgeIndexSet;
    use crate::graphs::Graph;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pr(n: u16) -> EdgeIndexSet {
        EdgeIndexSet::pairs(n).unwrap()
    }

    fn pl(n: u16) -> EdgeIndexSet {
        EdgeIndexSet::pairs_loops(n).unwrap()
    }

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

    fn c4_family() -> ForbiddenFamily {
        let c4 = Graph::from_edges(4, false, &[&[1, 2], &[2, 3], &[3, 4], &[1, 4]]).unwrap();
        ForbiddenFamily::explicit(vec![c4]).unwrap()
    }

    #[test]
    fn report_vanishes_on_the_full_space() {
        let fam = CodeFamily::full(pr(3)).unwrap();
        let r = uniformity_report(&fam, &[2, 3]).unwrap();
        assert_eq!(r.density, Dyadic::one());
        assert_eq!(r.linf_fourier, 0.0);
        for &(_, v) in &r.gowers {
            assert!(v.abs() < 1e-9, "centered norms of the full space must vanish");
        }
        let text = report_to_json(&r);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["density"]["num"], 1);
        assert_eq!(v["density"]["den_exp"], 0);
        assert!(v["gowers"]["2"].as_f64().unwrap().abs() < 1e-9);
        assert!(v["gowers"]["3"].is_number());
    }

    #[test]
    fn even_edge_family_is_not_second_order_uniform() {
        // the even-edge indicator is (1 + w_K3) / 2, so the centered
        // spectrum is a single coefficient of magnitude one half
        let s3 = pr(3);
        let fam = CodeFamily::from_fn(s3, |x| x.count_ones() % 2 == 0).unwrap();
        let r = uniformity_report(&fam, &[2]).unwrap();
        assert_eq!(r.density, Dyadic::over_pow2(1, 1));
        assert!((r.linf_fourier - 0.5).abs() < 1e-12);
        let u2 = r.gowers[0].1;
        assert!(u2 >= 0.5 - 1e-9, "second-order norm must be at least one half");
        assert!((u2 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn reports_for_every_extremal_code() {
        let s4 = pr(4);
        let forb = p2_family();
        let found = extremal_witnesses(s4, &forb, CodeKind::Code, &SearchBudget::default(), 512)
            .unwrap();
        assert_eq!(found.cardinality, 16, "density one quarter at four vertices");
        assert!(!found.witnesses.is_empty());
        for w in &found.witnesses {
            let r = uniformity_report(w, &[2, 3]).unwrap();
            assert_eq!(r.density, Dyadic::over_pow2(1, 2));
            assert!(r.linf_fourier > 0.0, "a tiny extremal code is not yet uniform");
            let u2 = r.gowers[0].1;
            let u3 = r.gowers[1].1;
            // the spectral sandwich around the peak
            assert!(u2 >= r.linf_fourier - 1e-9);
            assert!(u2 <= r.linf_fourier.sqrt() + 1e-9);
            assert!(u3 > 0.0);
        }
    }

    #[test]
    fn boost_returns_nothing_when_the_spectrum_vanishes() {
        // the forbidden path does not fit on two vertices, so the full
        // space is a code with identically zero centered transform
        let full2 = CodeFamily::full(pr(2)).unwrap();
        assert!(fourier_boost(&full2, &p2_family(), 2).unwrap().is_none());
        // same at three vertices when the forbidden graph needs four
        let full3 = CodeFamily::full(pr(3)).unwrap();
        assert!(fourier_boost(&full3, &c4_family(), 2).unwrap().is_none());
        // violations are reported before any spectrum is taken
        assert!(matches!(
            fourier_boost(&full3, &p2_family(), 2),
            Err(Error::NotACode(_, _))
        ));
        let k3 = Graph::from_edges(3, false, &[&[1, 2], &[1, 3], &[2, 3]]).unwrap();
        let odd = ForbiddenFamily::explicit(vec![k3]).unwrap();
        assert!(matches!(fourier_boost(&full3, &odd, 2), Err(Error::ParityViolation)));
        assert!(matches!(
            fourier_boost(&full3, &ForbiddenFamily::Cliques, 2),
            Err(Error::ParityViolation)
        ));
        assert!(matches!(
            fourier_boost(&full3, &ForbiddenFamily::CliquesLooped, 2),
            Err(Error::ParityViolation)
        ));
        assert!(fourier_boost(&full3, &c4_family(), 1).is_err());
        assert!(fourier_boost(&full3, &c4_family(), 4).is_err());
    }

    /// Exact split of the density across the two parity classes of g0.
    fn split_densities(fam: &CodeFamily, g0: &GraphPoint) -> (Dyadic, Dyadic) {
        let n1 = fam
            .members()
            .filter(|&x| (x & g0.bits()).count_ones() % 2 == 1)
            .count() as i64;
        let n0 = fam.cardinality() as i64 - n1;
        let half = fam.space().len() as u64 - 1;
        (Dyadic::over_pow2(n0, half), Dyadic::over_pow2(n1, half))
    }

    fn audit_witness(fam: &CodeFamily, forb: &ForbiddenFamily, w: &BoostWitness) {
        let space = fam.space();
        // the recorded peak is the exact maximum of the centered spectrum,
        // attained at the least frequency
        let sums = fam.character_sums();
        let n_exp = space.len() as u64;
        let best = sums.iter().skip(1).map(|t| t.abs()).max().unwrap();
        assert_eq!(w.linf_fourier, Dyadic::over_pow2(best, n_exp));
        let least = (1..sums.len()).find(|&xi| sums[xi].abs() == best).unwrap();
        assert_eq!(w.g0.bits(), least as u64);
        // split identity: the density is the average of the two class
        // densities and the peak is half their gap
        let (d0, d1) = split_densities(fam, &w.g0);
        let half = Dyadic::over_pow2(1, 1);
        assert_eq!(&half * &(&d0 + &d1), fam.density());
        let gap = if w.i0 == 0 { &d0 - &d1 } else { &d1 - &d0 };
        assert_eq!(&half * &gap, w.linf_fourier);
        // the vertex set is monochromatic in the recorded direction
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
        // the outside assignment leaves the section pairs free
        assert_eq!(w.x0.bits() & inside, 0);
        if w.case == MonoCase::Disjoint {
            assert_eq!(
                (w.x0.bits() & w.g0.bits()).count_ones() % 2,
                w.i0 as u32,
                "the section must sit in the selected parity class"
            );
        }
        assert_eq!(w.subspace.support(), &w.a[..]);
        assert_eq!(w.subspace.constant().bits(), w.x0.bits());
        // the boosted family is still a code and reaches the boosted density
        assert!(is_code(&w.boosted, forb, CodeKind::Code).unwrap().is_none());
        assert_eq!(w.achieved_density, w.boosted.density());
        assert!(w.achieved_density >= &fam.density() + &w.linf_fourier);
        // float view of the same comparison, with the documented tolerance
        let gap = (&w.achieved_density - &fam.density()).to_f64();
        assert!(w.linf_fourier.to_f64() <= gap + 1e-9);
    }

    #[test]
    fn boost_raises_the_density_of_extremal_codes() {
        let s4 = pr(4);
        let forb = p2_family();
        let found = extremal_witnesses(s4, &forb, CodeKind::Code, &SearchBudget::default(), 512)
            .unwrap();
        let mut boosted_runs = 0usize;
        for fam in &found.witnesses {
            for m in [2u16, 3] {
                match fourier_boost(fam, &forb, m) {
                    Ok(Some(w)) => {
                        assert_eq!(w.a.len(), m as usize);
                        audit_witness(fam, &forb, &w);
                        boosted_runs += 1;
                    }
                    Ok(None) => panic!("extremal codes at this size have nonzero peaks"),
                    Err(Error::NoMonochromaticSet) => {
                        // possible only at m = 3: a peak like a four-cycle
                        // has no triangle and no independent triple
                        assert_eq!(m, 3);
                    }
                    Err(other) => panic!("unexpected failure: {other:?}"),
                }
            }
        }
        assert!(boosted_runs > 0, "at least some witnesses must boost");
    }

    #[test]
    fn boost_case_split_is_audited_on_crafted_families() {
        let s3 = pr(3);
        let forb = c4_family();
        // contained case: the even-edge family peaks at the triangle, so
        // the first pair of vertices lies inside the peak
        let even = CodeFamily::from_fn(s3, |x| x.count_ones() % 2 == 0).unwrap();
        let w = fourier_boost(&even, &forb, 2).unwrap().unwrap();
        assert_eq!(w.case, MonoCase::Contained);
        assert_eq!(w.g0.bits(), 0b111);
        assert_eq!(w.i0, 0);
        assert_eq!(w.a, vec![1, 2]);
        assert_eq!(w.x0.bits(), 0);
        assert_eq!(w.linf_fourier, Dyadic::over_pow2(1, 1));
        assert_eq!(w.achieved_density, Dyadic::one());
        audit_witness(&even, &forb, &w);
        // parity audit of the doubled family: the members alternate edge
        // count mod two along the odd shift and never collide
        let e_bit = 1u64 << s3.position(&[1, 2]).unwrap();
        let members: Vec<u64> = (0..w.boosted.len_points())
            .filter(|&y| w.boosted.contains(y))
            .map(|y| w.subspace.apply(&pt(w.subspace.domain(), y)).unwrap().bits())
            .collect();
        assert_eq!(members.len(), 2);
        let j0 = (w.i0 as u32 + (w.x0.bits() & !w.g0.bits()).count_ones()) % 2;
        let mut in_g0 = Vec::new();
        let mut in_g1 = Vec::new();
        for &z in &members {
            if even.contains(z) && (z & w.g0.bits()).count_ones() % 2 == w.i0 as u32 {
                in_g0.push(z);
                assert_eq!(z.count_ones() % 2, j0);
            } else {
                in_g1.push(z);
                assert_eq!(z.count_ones() % 2, (j0 + 1) % 2);
                assert!(members.contains(&(z ^ e_bit)), "shift partner must be present");
            }
        }
        assert!(!in_g0.is_empty() && !in_g1.is_empty());
        assert!(in_g0.iter().all(|z| !in_g1.contains(z)), "halves must be disjoint");
        // disjoint case: peak at a single far edge leaves the first pair
        // outside, and the best section keeps every member
        let e23 = 1u64 << s3.position(&[2, 3]).unwrap();
        let edge_fam = CodeFamily::from_fn(s3, |x| x & e23 != 0).unwrap();
        let w = fourier_boost(&edge_fam, &forb, 2).unwrap().unwrap();
        assert_eq!(w.case, MonoCase::Disjoint);
        assert_eq!(w.g0.bits(), e23);
        assert_eq!(w.i0, 1);
        assert_eq!(w.a, vec![1, 2]);
        assert_eq!(w.x0.bits(), e23);
        assert_eq!(w.achieved_density, Dyadic::one());
        audit_witness(&edge_fam, &forb, &w);
    }

    #[test]
    fn monochromatic_sets_match_brute_force() {
        let s5 = pr(5);
        // the empty peak makes every set independent; the complete peak
        // makes every set a clique
        let (a, case) = monochromatic_set(&pt(s5, 0), 3).unwrap().unwrap();
        assert_eq!((a, case), (vec![1, 2, 3], MonoCase::Disjoint));
        let full = (1u64 << s5.len()) - 1;
        let (a, case) = monochromatic_set(&pt(s5, full), 4).unwrap().unwrap();
        assert_eq!((a, case), (vec![1, 2, 3, 4], MonoCase::Contained));
        // the five-cycle has clique number two and independence number
        // two, so no triple is monochromatic; checked against all ten
        let cycle = [[1u16, 2], [2, 3], [3, 4], [4, 5], [1, 5]];
        let mut bits = 0u64;
        for e in &cycle {
            bits |= 1 << s5.position(e).unwrap();
        }
        let c5 = pt(s5, bits);
        assert!(monochromatic_set(&c5, 3).unwrap().is_none());
        for triple in crate::graphs::subsets_of_size(5, 3) {
            let mut hits = 0;
            for i in 0..3 {
                for j in i + 1..3 {
                    hits += c5.get(s5.position(&[triple[i], triple[j]]).unwrap()) as u32;
                }
            }
            assert!(hits > 0 && hits < 3, "every triple of the cycle is mixed");
        }
        // pairs always classify
        let (_, case) = monochromatic_set(&c5, 2).unwrap().unwrap();
        assert_eq!(case, MonoCase::Contained);
        assert!(monochromatic_set(&c5, 1).is_err());
        assert!(monochromatic_set(&c5, 6).unwrap().is_none());
    }

    #[test]
    fn level_sets_tile_and_balance() {
        let s2 = pl(2);
        // constant phase: one level carrying everything
        let fam = CodeFamily::from_members(s2, &[0, 3, 5]).unwrap();
        let p = NonclassicalPoly::new(s2, 1, tor(3, 3), &[]).unwrap();
        let d = level_set_decomposition(&fam, &p, &Dyadic::over_pow2(1, 2)).unwrap();
        assert_eq!(d.phases, vec![tor(3, 3)]);
        assert_eq!(d.mu, vec![Dyadic::one()]);
        assert_eq!(d.lambda[0], BigRational::new(BigInt::from(3), BigInt::from(8)));
        assert!(d.correlation.norm() < 1e-12);
        assert_eq!(d.i0, None);
        assert_eq!(d.i_plus, vec![0]);
        // a two-valued phase splits the space in half; pinning the family
        // to the zero level makes the correlation exactly the mass product
        // times the chord length
        let pos0 = s2.position(&[1]).unwrap();
        let p = NonclassicalPoly::new(s2, 1, DyadicTorus::zero(), &[(vec![pos0], tor(1, 1))])
            .unwrap();
        let fam = CodeFamily::from_fn(s2, |x| x >> pos0 & 1 == 0).unwrap();
        let delta = Dyadic::over_pow2(1, 2);
        let d = level_set_decomposition(&fam, &p, &delta).unwrap();
        assert_eq!(d.phases, vec![DyadicTorus::zero(), tor(1, 1)]);
        assert_eq!(d.mu, vec![Dyadic::over_pow2(1, 1), Dyadic::over_pow2(1, 1)]);
        assert_eq!(d.lambda[0], BigRational::from_integer(BigInt::from(1)));
        assert_eq!(d.lambda[1], BigRational::from_integer(BigInt::from(0)));
        let z = d.values();
        let chord = (z[0] - z[1]).norm();
        let product = d.mu[0].to_f64() * d.mu[1].to_f64();
        assert!((d.correlation.norm() - product * chord).abs() < 1e-12);
        assert!((d.correlation.norm() - 0.5).abs() < 1e-12);
        assert_eq!(d.i0, Some(0), "the dense level wins the selection");
        assert_eq!(d.i_plus, vec![0]);
        assert_eq!(d.i_minus, vec![1]);
    }

    #[test]
    fn random_level_sets_keep_the_exact_identities() {
        let s2 = pl(2);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let table = s2.table_len().unwrap() as u64;
        for _ in 0..40 {
            // random family and a random degree-two phase
            let fam = CodeFamily::from_fn(s2, |_| rng.gen_bool(0.5)).unwrap();
            let mut coeffs = Vec::new();
            for size in 1..=2usize {
                for subset in subsets_of_size(s2.len() as u16, size as u16) {
                    let positions: Vec<u32> =
                        subset.iter().map(|&v| v as u32 - 1).collect();
                    let exp = rng.gen_range(0..=(2 - size as u32) + 1);
                    if exp == 0 {
                        continue;
                    }
                    let j = rng.gen_range(0..1u64 << exp);
                    coeffs.push((positions, tor(j, exp)));
                }
            }
            let alpha = tor(rng.gen_range(0..16), 4);
            let p = NonclassicalPoly::new(s2, 2, alpha, &coeffs).unwrap();
            let delta = Dyadic::over_pow2(1, 3);
            let d = level_set_decomposition(&fam, &p, &delta).unwrap();
            let ell = d.phases.len();
            assert!(ell <= 4, "a degree-two phase attains at most four values");
            assert_eq!(&d.i_plus.len() + &d.i_minus.len(), ell);
            // exact identities, recomputed here
            let mut mass = Dyadic::zero();
            let mut balance = BigRational::from_integer(BigInt::from(0));
            let dens = dyadic_to_rational(&fam.density());
            for i in 0..ell {
                mass = &mass + &d.mu[i];
                balance += (&d.lambda[i] - &dens) * dyadic_to_rational(&d.mu[i]);
            }
            assert_eq!(mass, Dyadic::one());
            assert_eq!(balance, BigRational::from_integer(BigInt::from(0)));
            // the float correlation matches a brute-force average
            let mut brute = Complex64::new(0.0, 0.0);
            let mean = fam.density().to_f64();
            for x in 0..table {
                let theta = 2.0 * std::f64::consts::PI
                    * p.eval(&pt(s2, x)).unwrap().to_f64();
                let f = if fam.contains(x) { 1.0 - mean } else { -mean };
                brute += Complex64::new(theta.cos(), theta.sin()) * f;
            }
            brute /= table as f64;
            assert!((brute - d.correlation).norm() < 1e-9);
            // any selected level satisfies both bounds
            if let Some(i) = d.i0 {
                let floor = &delta * &Dyadic::pow2(-4);
                assert!(d.mu[i] >= floor);
                let needed = &dens + &dyadic_to_rational(&(&delta * &Dyadic::pow2(-2)));
                assert!(d.lambda[i] >= needed);
                assert!(d.correlation.norm() >= delta.to_f64());
            }
        }
    }

    #[test]
    fn subspace_densities_stay_below_the_reference() {
        let s3 = pl(3);
        // the empty family passes any bound
        let empty = CodeFamily::empty(s3).unwrap();
        let id = HjEmbedding::identity(s3).unwrap();
        assert!(subspace_density_bound_check(&empty, &id, &Dyadic::zero()).unwrap());
        // an extremal looped-clique code stays below the one-dimensional
        // reference of one half on every one-dimensional subspace
        let found = extremal_search(
            s3,
            &ForbiddenFamily::CliquesLooped,
            CodeKind::HjCode,
            &SearchBudget::default(),
        )
        .unwrap();
        assert!(found.exact);
        assert_eq!(found.density, Dyadic::over_pow2(1, 1));
        let reference = Dyadic::over_pow2(1, 1);
        let full = CodeFamily::full(s3).unwrap();
        let mut embeddings = 0usize;
        let mut full_violations = 0usize;
        for size in 1..=3u16 {
            for set in subsets_of_size(3, size) {
                let probe = HjEmbedding::new(&[set.clone()], GraphPoint::zero(s3)).unwrap();
                let span = probe.var_set(0).unwrap();
                // every constant part vanishing on the span
                let free: Vec<u32> =
                    (0..s3.len()).filter(|p| span >> p & 1 == 0).collect();
                for packed in 0..1u64 << free.len() {
                    let mut bits = 0u64;
                    for (k, &pos) in free.iter().enumerate() {
                        bits |= (packed >> k & 1) << pos;
                    }
                    let e = HjEmbedding::new(&[set.clone()], pt(s3, bits)).unwrap();
                    assert!(
                        subspace_density_bound_check(&found.witness, &e, &reference).unwrap()
                    );
                    full_violations +=
                        !subspace_density_bound_check(&full, &e, &reference).unwrap() as usize;
                    embeddings += 1;
                }
            }
        }
        assert_eq!(embeddings, 121, "all one-dimensional subspaces enumerated");
        assert_eq!(full_violations, 121, "the full space violates the bound everywhere");
        // mismatched spaces are rejected
        let fam4 = CodeFamily::empty(pl(4)).unwrap();
        assert!(matches!(
            subspace_density_bound_check(&fam4, &id, &Dyadic::one()),
            Err(Error::SpaceMismatch)
        ));
    }
}
