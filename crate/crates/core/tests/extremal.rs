use f2lab_core::codes::{
    extremal_by_enumeration, extremal_search, is_code, monotonicity_table, CodeKind, SearchBudget,
};
use f2lab_core::graphs::{ForbiddenFamily, Graph};
use f2lab_core::{Dyadic, EdgeIndexSet};

fn path_family() -> ForbiddenFamily {
    let p2 = Graph::from_edges(3, false, &[&[1, 2], &[2, 3]]).unwrap();
    ForbiddenFamily::explicit(vec![p2]).unwrap()
}

#[test]
fn path_code_density_is_settled_through_five_vertices() {
    let rows = monotonicity_table(&path_family(), CodeKind::Code, false, 3..=5, &SearchBudget::default())
        .unwrap();
    assert!(rows.iter().all(|r| r.exact));
    assert_eq!(rows[0].density, Dyadic::over_pow2(1, 2));
    assert_eq!(rows[1].density, Dyadic::over_pow2(1, 2));
    // the five-vertex value drops below 1/4: the tree search alone cannot
    // close this space, the spectral bound meets the symmetric construction
    assert_eq!(rows[2].density, Dyadic::over_pow2(3, 4));
    for w in rows.windows(2) {
        assert!(w[1].density <= w[0].density);
    }
}

#[test]
fn five_vertex_witness_is_extremal_and_valid() {
    let space = EdgeIndexSet::pairs(5).unwrap();
    let r = extremal_search(space, &path_family(), CodeKind::Code, &SearchBudget::default())
        .unwrap();
    assert!(r.exact);
    assert_eq!(r.cardinality, 192);
    assert_eq!(r.density, Dyadic::over_pow2(3, 4));
    // proven by bound-meets-construction, so no lex-least refinement ran
    assert!(!r.canonical_witness);
    assert!(is_code(&r.witness, &path_family(), CodeKind::Code).unwrap().is_none());
    assert_eq!(r.witness.cardinality(), 192);
}

#[test]
fn looped_clique_density_is_one_half_through_three_vertices() {
    let rows = monotonicity_table(
        &ForbiddenFamily::CliquesLooped,
        CodeKind::HjCode,
        true,
        1..=3,
        &SearchBudget::default(),
    )
    .unwrap();
    assert!(rows.iter().all(|r| r.exact));
    for row in &rows {
        assert_eq!(row.density, Dyadic::over_pow2(1, 1));
    }
}

#[test]
fn conflict_kinds_disagree_on_looped_spaces() {
    // under containment conflicts half the table survives; under translation
    // conflicts the same forbidden family cuts deeper
    let space = EdgeIndexSet::pairs_loops(3).unwrap();
    let hj = extremal_search(space, &ForbiddenFamily::CliquesLooped, CodeKind::HjCode, &SearchBudget::default())
        .unwrap();
    let xor = extremal_search(space, &ForbiddenFamily::CliquesLooped, CodeKind::Code, &SearchBudget::default())
        .unwrap();
    assert!(hj.exact && xor.exact);
    assert_eq!(hj.cardinality, 32);
    assert_eq!(xor.cardinality, 22);
    assert!(is_code(&hj.witness, &ForbiddenFamily::CliquesLooped, CodeKind::HjCode).unwrap().is_none());
    assert!(is_code(&xor.witness, &ForbiddenFamily::CliquesLooped, CodeKind::Code).unwrap().is_none());
}

#[test]
fn search_agrees_with_full_enumeration_on_small_spaces() {
    // every space with at most 16 table points, checked against a scan of
    // all 2^(2^N) candidate families
    let spaces = [
        EdgeIndexSet::pairs(2).unwrap(),
        EdgeIndexSet::pairs(3).unwrap(),
        EdgeIndexSet::pairs_loops(1).unwrap(),
        EdgeIndexSet::pairs_loops(2).unwrap(),
        EdgeIndexSet::generic(3).unwrap(),
        EdgeIndexSet::generic(4).unwrap(),
    ];
    let single_edge = ForbiddenFamily::explicit(vec![Graph::from_edges(2, false, &[&[1, 2]]).unwrap()])
        .unwrap();
    let families = [path_family(), ForbiddenFamily::CliquesLooped, single_edge];
    for space in spaces {
        for fam in &families {
            for kind in [CodeKind::Code, CodeKind::HjCode] {
                let (brute, brute_all) = extremal_by_enumeration(space, fam, kind).unwrap();
                let r = extremal_search(space, fam, kind, &SearchBudget::default()).unwrap();
                assert!(r.exact, "{space:?} {kind:?} must settle");
                assert_eq!(r.density, brute, "{space:?} {kind:?}");
                assert!(brute_all.contains(&r.witness), "{space:?} {kind:?}");
                assert!(is_code(&r.witness, fam, kind).unwrap().is_none());
            }
        }
    }
}
