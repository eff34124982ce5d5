//! Desk-scale approximation of the nonattracting sink of an automorphism.
//!
//! The sink is approximated from growth data: collect the non-exponential
//! canonical classes up to a length bound, build the core graphs of the
//! cyclic subgroups they generate, and merge components with nontrivial
//! pullbacks to closure. The result is checked for φ-invariance and
//! malnormality; inconclusive classes are always surfaced, never dropped.

use crate::freegroup::{Automorphism, CyclicWord, FreeGroupError};
use crate::growth::{non_exponential_classes, GrowthConfig};
use crate::stallings::{
    dedup_components, is_malnormal, pullback, CoreGraph, MalnormalityVerdict, SubgroupSystem,
    SystemComponent, TriState,
};
use crate::whitehead;
use serde::Serialize;

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct SinkScale {
    pub l: usize,
    pub n: usize,
    pub config: GrowthConfig,
}

#[derive(Clone, Debug)]
pub struct SinkApproximation {
    pub system: SubgroupSystem,
    pub scale: SinkScale,
    pub phi_invariant: bool,
    pub malnormal: bool,
    /// Classes the growth classifier could not settle at this scale.
    pub residual: Vec<CyclicWord>,
    /// Whole-group convention: no class grew exponentially at this scale.
    pub whole_group: bool,
    /// Components of rank ≥ 2 need manual review at small scales.
    pub needs_review: Vec<usize>,
}

impl SinkApproximation {
    pub fn is_empty(&self) -> bool {
        self.system.is_empty() && !self.whole_group
    }

    pub fn component_summaries(&self) -> Vec<String> {
        self.system
            .components
            .iter()
            .map(|c| {
                let gens: Vec<String> = c.gens.iter().map(|g| g.to_string()).collect();
                format!("[<{}>]", gens.join(","))
            })
            .collect()
    }
}

/// Approximate the nonattracting sink of `f` at scale `(l, n)`.
///
/// If no class of length ≤ l grows exponentially, the automorphism looks
/// non-exponentially-growing at this scale and the sink is the whole group
/// by convention.
pub fn sink_approx(
    f: &Automorphism,
    l: usize,
    n: usize,
    config: &GrowthConfig,
) -> Result<SinkApproximation, FreeGroupError> {
    let scale = SinkScale { l, n, config: *config };
    let (non_exp, residual, total) = non_exponential_classes(f, l, n, config)?;
    if non_exp.len() + residual.len() == total {
        return Ok(SinkApproximation {
            system: SubgroupSystem::whole_group(f.rank()),
            scale,
            phi_invariant: true,
            malnormal: true,
            residual,
            whole_group: true,
            needs_review: Vec::new(),
        });
    }
    // cyclic subgroup per class, merged to pullback-closure
    let mut components: Vec<SystemComponent> = non_exp
        .iter()
        .filter_map(|c| SystemComponent::from_generators(f.rank(), vec![c.as_word()]))
        .collect();
    dedup_components(&mut components);
    merge_to_closure(&mut components, f.rank());

    let mut system = SubgroupSystem {
        rank: f.rank(),
        components,
        malnormal: TriState::Unknown,
        free_factor: TriState::Unknown,
    };

    // φ-invariance: the image subgroup must be conjugate to its source,
    // checked exactly through canonical cores.
    let phi_invariant = system.components.iter().all(|c| {
        let image_gens: Vec<_> = c
            .gens
            .iter()
            .map(|g| f.apply(g).expect("rank fixed"))
            .collect();
        match SystemComponent::from_generators(f.rank(), image_gens) {
            Some(img) => img.graph == c.graph,
            None => false,
        }
    });

    let malnormal = matches!(is_malnormal(&system), MalnormalityVerdict::Yes);
    system.malnormal = if malnormal { TriState::Yes } else { TriState::No };
    system.free_factor = free_factor_probe(&system);

    let needs_review = system
        .components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.graph.subgroup_rank() >= 2)
        .map(|(i, _)| i)
        .collect();

    Ok(SinkApproximation {
        system,
        scale,
        phi_invariant,
        malnormal,
        residual,
        whole_group: false,
        needs_review,
    })
}

/// Merge components with nontrivial pullbacks until nothing changes.
/// Conservative: the merged component is generated by both generator sets.
fn merge_to_closure(components: &mut Vec<SystemComponent>, rank: usize) {
    loop {
        let mut merged = None;
        'search: for i in 0..components.len() {
            for j in i + 1..components.len() {
                let gi = components[i].based_graph(rank);
                let gj = components[j].based_graph(rank);
                if !pullback(&gi, &gj).is_empty() {
                    merged = Some((i, j));
                    break 'search;
                }
            }
        }
        let Some((i, j)) = merged else { break };
        let mut gens = components[i].gens.clone();
        gens.extend(components[j].gens.clone());
        components.remove(j);
        components.remove(i);
        // re-express the merged subgroup by a basis of loops at the common
        // basepoint, so later merges keep folding the same representative
        let based = CoreGraph::fold(rank, &gens);
        let basis = based.loop_basis(based.membership_root());
        if let Some(c) = SystemComponent::from_generators(rank, basis) {
            components.push(c);
        }
        dedup_components(components);
    }
}

/// Cheap free-factor detection: a single cyclic component is a rank-1 free
/// factor system iff its generator is primitive.
fn free_factor_probe(system: &SubgroupSystem) -> TriState {
    if system.components.is_empty() {
        return TriState::Yes;
    }
    if system.components.len() == 1 && system.components[0].graph.subgroup_rank() == 1 {
        let gens = &system.components[0].gens;
        if gens.len() == 1 {
            return match whitehead::is_primitive(&gens[0], system.rank, whitehead::DEFAULT_LENGTH_CAP)
            {
                Ok(true) => TriState::Yes,
                Ok(false) => TriState::No,
                Err(_) => TriState::Unknown,
            };
        }
    }
    TriState::Unknown
}

/// Component-wise conjugate equality of two sink approximations.
/// Comparing different scales is allowed but should be flagged by callers.
pub fn sinks_equal(s1: &SinkApproximation, s2: &SinkApproximation) -> bool {
    if s1.whole_group || s2.whole_group {
        return s1.whole_group == s2.whole_group;
    }
    s1.system.equals(&s2.system)
}

#[derive(Clone, Debug, Serialize)]
pub struct PerAutomorphismReport {
    pub name: String,
    /// Length bound used for the fixed-primitive-class probe.
    pub fixed_probe_l: usize,
    pub sink_components: Vec<String>,
    pub sink_empty: bool,
    pub sink_whole_group: bool,
    pub sink_malnormal: bool,
    pub sink_phi_invariant: bool,
    pub residual_classes: Vec<String>,
    pub atoroidal: crate::growth::AtoroidalVerdict,
    pub eg_strata: usize,
    pub rtt_passed: bool,
    pub fixed_primitive_classes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairReport {
    pub pair: (String, String),
    pub sinks_equal: bool,
    pub common_fixed_primitive_classes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub scale: SinkScale,
    pub probe_period_bound: usize,
    pub per_automorphism: Vec<PerAutomorphismReport>,
    pub pairs: Vec<PairReport>,
    pub verdicts: Vec<String>,
}

/// Check the sink-based hypotheses for a collection of automorphisms.
/// Predictions only, never proofs: every verdict line carries its bounds.
pub fn hyperbolicity_hypothesis_check(
    auts: &[(String, Automorphism)],
    l: usize,
    n: usize,
    p: usize,
    config: &GrowthConfig,
) -> Result<HypothesisReport, FreeGroupError> {
    let mut per = Vec::new();
    let mut sinks = Vec::new();
    let mut fixed_prims: Vec<Vec<String>> = Vec::new();
    for (name, f) in auts {
        let sink = sink_approx(f, l, n, config)?;
        let atoroidal = crate::growth::atoroidal_probe(f, l, p);
        let m = crate::graphmap::GraphMap::rose_map(f);
        let filt = crate::graphmap::filtration(&m);
        let rtt = crate::graphmap::check_rtt(&m, &filt, crate::graphmap::RTT_PATH_BOUND);
        let fixed_probe_l = l.min(4);
        let fixed = whitehead::fixed_rank1_factor_probe(f, fixed_probe_l, p)
            .expect("probe classes stay under the cap");
        let fixed_strs: Vec<String> = fixed.iter().map(|c| c.to_string()).collect();
        per.push(PerAutomorphismReport {
            name: name.clone(),
            fixed_probe_l,
            sink_components: sink.component_summaries(),
            sink_empty: sink.is_empty(),
            sink_whole_group: sink.whole_group,
            sink_malnormal: sink.malnormal,
            sink_phi_invariant: sink.phi_invariant,
            residual_classes: sink.residual.iter().map(|c| c.to_string()).collect(),
            atoroidal,
            eg_strata: filt.eg_count(),
            rtt_passed: rtt.passed,
            fixed_primitive_classes: fixed_strs.clone(),
        });
        sinks.push(sink);
        fixed_prims.push(fixed_strs);
    }
    let mut pairs = Vec::new();
    for i in 0..auts.len() {
        for j in i + 1..auts.len() {
            let common: Vec<String> = fixed_prims[i]
                .iter()
                .filter(|c| fixed_prims[j].contains(c))
                .cloned()
                .collect();
            pairs.push(PairReport {
                pair: (auts[i].0.clone(), auts[j].0.clone()),
                sinks_equal: sinks_equal(&sinks[i], &sinks[j]),
                common_fixed_primitive_classes: common,
            });
        }
    }
    let mut verdicts = Vec::new();
    let bounds = format!("L={l}, n={n}, P={p}");
    let all_empty = sinks.iter().all(|s| s.is_empty());
    let all_atoroidal = per.iter().all(|r| r.atoroidal.is_clean());
    let any_common_fixed = pairs.iter().any(|pr| !pr.common_fixed_primitive_classes.is_empty());
    if auts.len() < 2 {
        verdicts.push(format!(
            "degenerate report: fewer than two automorphisms (bounds {bounds})"
        ));
    } else if all_empty && all_atoroidal && !any_common_fixed {
        verdicts.push(format!(
            "consistent with a hyperbolic extension for high powers: all sinks empty \
             and no short periodic classes at scale ({bounds})"
        ));
    } else {
        for (i, s) in sinks.iter().enumerate() {
            if !s.is_empty() {
                verdicts.push(format!(
                    "obstruction found: sink({}) = {:?} is nonempty at scale ({bounds})",
                    auts[i].0,
                    s.component_summaries()
                ));
            }
        }
        for pr in &pairs {
            if !pr.common_fixed_primitive_classes.is_empty() {
                verdicts.push(format!(
                    "obstruction found: {} and {} share fixed primitive classes {:?} (bounds {bounds})",
                    pr.pair.0, pr.pair.1, pr.common_fixed_primitive_classes
                ));
            }
        }
        let nonempty: Vec<usize> = (0..sinks.len()).filter(|&i| !sinks[i].is_empty()).collect();
        if !nonempty.is_empty() {
            let all_equal = pairs.iter().all(|pr| pr.sinks_equal);
            if all_equal && nonempty.len() == sinks.len() {
                verdicts.push(format!(
                    "cusp-preserving relatively hyperbolic structure predicted only if sinks \
                     are equal: they are equal at scale ({bounds})"
                ));
            } else {
                verdicts.push(format!(
                    "cusp-preserving relatively hyperbolic structure predicted only if sinks \
                     are equal: they differ at scale ({bounds})"
                ));
            }
        }
    }
    Ok(HypothesisReport {
        scale: SinkScale { l, n, config: *config },
        probe_period_bound: p,
        per_automorphism: per,
        pairs,
        verdicts,
    })
}
