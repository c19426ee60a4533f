//! Property-based invariants: parser round trips, symmetry and
//! idempotence of graph operations, and invariance of the identified
//! effect under relabelings that cannot matter.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeSet;

use taueff::criteria::RoleSpec;
use taueff::dsl::GraphDocument;
use taueff::fixtures;
use taueff::graph::VertexId;
use taueff::identify::{identify_tau_sq, Settings};
use taueff::sim::{random_dag, random_unit_sem};

fn arb_dag() -> impl Strategy<Value = taueff::graph::PathDiagram> {
    (2usize..=8, 0.0f64..0.9, any::<u64>()).prop_map(|(n, p, seed)| {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        random_dag(&mut rng, n, p)
    })
}

fn vertex_subsets(
    g: &taueff::graph::PathDiagram,
    seed: u64,
) -> (BTreeSet<VertexId>, BTreeSet<VertexId>, BTreeSet<VertexId>) {
    // deterministic pseudo-random disjoint subsets keyed on the seed
    let vs: Vec<VertexId> = g.vertices().cloned().collect();
    let mut a = BTreeSet::new();
    let mut b = BTreeSet::new();
    let mut c = BTreeSet::new();
    for (i, v) in vs.iter().enumerate() {
        match (seed >> (2 * (i % 32))) & 3 {
            0 => {
                a.insert(v.clone());
            }
            1 => {
                b.insert(v.clone());
            }
            2 => {
                c.insert(v.clone());
            }
            _ => {}
        }
    }
    (a, b, c)
}

proptest! {
    #[test]
    fn print_parse_round_trip(g in arb_dag(), seed in any::<u64>()) {
        // annotate some edges with coefficients so the optional clause is
        // exercised too
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let doc = match random_unit_sem(&mut rng, &g, 5) {
            Some(sem) => GraphDocument {
                diagram: g.clone(),
                coefficients: sem.coefficients().clone(),
                error_covariances: Default::default(),
            },
            None => GraphDocument {
                diagram: g.clone(),
                coefficients: Default::default(),
                error_covariances: Default::default(),
            },
        };
        let reparsed = GraphDocument::parse(&doc.print()).unwrap();
        prop_assert_eq!(doc, reparsed);
    }

    #[test]
    fn d_separation_is_symmetric(g in arb_dag(), seed in any::<u64>()) {
        let (a, b, c) = vertex_subsets(&g, seed);
        let ab = g.d_separates(&a, &b, &c).unwrap();
        let ba = g.d_separates(&b, &a, &c).unwrap();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn delete_outgoing_is_idempotent(g in arb_dag(), seed in any::<u64>()) {
        let (a, _, _) = vertex_subsets(&g, seed);
        let once = g.delete_outgoing(&a).unwrap();
        let twice = once.delete_outgoing(&a).unwrap();
        prop_assert_eq!(once, twice);
    }
}

#[test]
fn identification_is_invariant_under_label_permutation() {
    for f in fixtures::all() {
        let cov = f.sem.observed_covariance();
        let mut order: Vec<VertexId> = cov.labels().to_vec();
        order.reverse();
        let permuted = cov.permuted(&order).unwrap();
        let a = identify_tau_sq(&cov, f.graph(), &f.roles, f.strategy, &Settings::exact())
            .unwrap();
        let b = identify_tau_sq(
            &permuted,
            f.graph(),
            &f.roles,
            f.strategy,
            &Settings::exact(),
        )
        .unwrap();
        assert!(
            (a.tau_squared - b.tau_squared).abs() < 1e-12,
            "fixture {}: permutation changed the result",
            f.name
        );
    }
}

#[test]
fn identification_is_invariant_under_surrogate_swap() {
    for f in fixtures::all() {
        let RoleSpec::Single(roles) = &f.roles else {
            continue;
        };
        let mut swapped = roles.clone();
        std::mem::swap(&mut swapped.u, &mut swapped.w);
        let cov = f.sem.observed_covariance();
        let a = identify_tau_sq(&cov, f.graph(), &f.roles, f.strategy, &Settings::exact())
            .unwrap();
        let b = identify_tau_sq(
            &cov,
            f.graph(),
            &RoleSpec::Single(swapped),
            f.strategy,
            &Settings::exact(),
        )
        .unwrap();
        assert!(
            (a.tau_squared - b.tau_squared).abs() < 1e-9,
            "fixture {}: u/w swap changed the result",
            f.name
        );
    }
}
