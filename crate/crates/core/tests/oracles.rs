//! Cross-module property suites: growth rates against stratum eigenvalues,
//! sink soundness at scale, fiber invariance, flare monotonicity.

use fgadyn::extension::{flare_probe, LiftAssignment};
use fgadyn::freegroup::{canonical_classes, Automorphism, ComposeOrder, Word};
use fgadyn::graphmap::{check_rtt, filtration, GraphMap, RTT_PATH_BOUND};
use fgadyn::growth::{classify_growth, GrowthClass, GrowthConfig};
use fgadyn::sink::sink_approx;
use fgadyn::stallings::fiber_subgroup;

fn phi() -> Automorphism {
    Automorphism::from_strs(4, &["ad", "a", "b", "c"])
        .unwrap()
        .into_verified()
        .unwrap()
}

#[test]
fn growth_rate_matches_stratum_eigenvalue() {
    // single EG stratum, train-track checks pass: exponential estimates of
    // classes crossing the stratum agree with the eigenvalue within 2%
    let f = phi();
    let m = GraphMap::rose_map(&f);
    let filt = filtration(&m);
    assert_eq!(filt.eg_count(), 1);
    assert!(check_rtt(&m, &filt, RTT_PATH_BOUND).passed);
    let lambda = filt.strata[0].pf_eigenvalue.unwrap();
    let cfg = GrowthConfig::default();
    let mut checked = 0;
    for class in canonical_classes(4, 3) {
        let rep = classify_growth(&f, &class.as_word(), 30, &cfg).unwrap();
        if let GrowthClass::Exponential { lambda: est } = rep.class {
            assert!(
                (est - lambda).abs() / lambda < 0.02,
                "class {class}: estimate {est} vs λ {lambda}"
            );
            checked += 1;
        }
    }
    assert!(checked > 10, "expected many exponential classes");
}

#[test]
fn sink_soundness_at_scale() {
    // carried by the sink system ⟺ classified non-exponential, over all
    // classes up to the scale bound
    let f = Automorphism::from_strs(5, &["ad", "a", "b", "c", "e"])
        .unwrap()
        .into_verified()
        .unwrap();
    let cfg = GrowthConfig::default();
    let (l, n) = (4usize, 25usize);
    let sink = sink_approx(&f, l, n, &cfg).unwrap();
    assert!(sink.residual.is_empty());
    for class in canonical_classes(5, l) {
        let rep = classify_growth(&f, &class.as_word(), n, &cfg).unwrap();
        let non_exp = !rep.class.is_exponential();
        let carried = sink.system.carries_class(&class);
        assert_eq!(
            non_exp, carried,
            "class {class}: non_exp={non_exp} carried={carried}"
        );
    }
}

#[test]
fn fiber_closure_is_invariant_when_stabilized() {
    let f = phi();
    let psi = Automorphism::from_strs(4, &["ac", "a", "b", "db"])
        .unwrap()
        .into_verified()
        .unwrap();
    let comp = Automorphism::compose_all(
        &[f.inverse_automorphism().unwrap(), psi],
        ComposeOrder::RightToLeft,
    )
    .unwrap()
    .into_verified()
    .unwrap();
    let seeds = vec![Word::parse("b").unwrap(), Word::parse("c").unwrap()];
    let res = fiber_subgroup(&comp, &seeds, 10).unwrap();
    assert!(res.stabilized_at.is_some());
    let root = res.graph.membership_root();
    let finv = comp.inverse_automorphism().unwrap();
    for loop_word in res.graph.loop_basis(root) {
        let fwd = comp.apply(&loop_word).unwrap();
        let bwd = finv.apply(&loop_word).unwrap();
        assert!(res.graph.contains(&fwd), "f(generator) must stay inside");
        assert!(res.graph.contains(&bwd), "f⁻¹(generator) must stay inside");
    }
}

#[test]
fn flare_pass_set_monotone_in_power() {
    let lifts = LiftAssignment::new(4, vec![phi()]).unwrap();
    let lo = flare_probe(&lifts, 1.3, 2, 4);
    let hi = flare_probe(&lifts, 1.3, 4, 4);
    // failing pairs can only shrink when the power grows by 2
    for pair in &hi.failing {
        assert!(
            lo.failing.contains(pair),
            "pair {pair:?} fails at m=4 but passed at m=2"
        );
    }
    assert!(hi.pass_fraction >= lo.pass_fraction);
}
