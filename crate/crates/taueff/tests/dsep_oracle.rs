//! Agreement between graphical d-separation and the Gaussian
//! conditional-independence oracle on random models. Soundness must be
//! exact; the converse holds on generically drawn coefficients for these
//! fixed seeds.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeSet;

use taueff::graph::VertexId;
use taueff::sim::{ci_oracle, random_dag, random_unit_sem};

#[test]
fn dsep_matches_gaussian_ci_on_random_models() {
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let mut queries = 0usize;
    while queries < 1000 {
        let n = rng.random_range(3..=8);
        let g = random_dag(&mut rng, n, 0.35);
        let Some(sem) = random_unit_sem(&mut rng, &g, 20) else {
            continue;
        };
        let cov = sem.implied_covariance();
        let labels: Vec<VertexId> = cov.labels().to_vec();

        for _ in 0..10 {
            if queries >= 1000 {
                break;
            }
            let mut pool = labels.clone();
            for i in (1..pool.len()).rev() {
                let j = rng.random_range(0..=i);
                pool.swap(i, j);
            }
            let a = pool.pop().unwrap();
            let b = pool.pop().unwrap();
            let c_len = rng.random_range(0..=pool.len());
            let c: Vec<VertexId> = pool.drain(..c_len).collect();

            let sep = g
                .d_separates(
                    &BTreeSet::from([a.clone()]),
                    &BTreeSet::from([b.clone()]),
                    &c.iter().cloned().collect(),
                )
                .unwrap();
            let ci = ci_oracle(&cov, &a, &b, &c, 1e-7).unwrap();
            assert_eq!(
                sep, ci,
                "disagreement for {a} _||_ {b} | {c:?} (d-sep {sep}, partial covariance oracle {ci})"
            );
            queries += 1;
        }
    }
}
