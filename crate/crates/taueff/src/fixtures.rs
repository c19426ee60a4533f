//! Built-in example models, one per identification strategy. Each carries
//! the path diagram, a unit-variance model, the canonical role assignment,
//! the source text for the graph format, and the true squared total effect
//! computed from the path coefficients.

use std::collections::BTreeMap;

use crate::criteria::{
    DoubleRoleAssignment, LatentRole, RoleAssignment, RoleSpec, Strategy,
};
use crate::graph::{Observability, PathDiagram, VertexId};
use crate::sim::LinearSEM;

/// One worked example: model, roles, strategy, and ground truth.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub sem: LinearSEM,
    pub roles: RoleSpec,
    pub strategy: Strategy,
    pub source: &'static str,
    pub tau_squared: f64,
}

impl Fixture {
    pub fn graph(&self) -> &PathDiagram {
        self.sem.graph()
    }
}

fn v(name: &str) -> VertexId {
    VertexId::new(name).expect("fixture vertex names are valid")
}

fn diagram(
    observed: &[&str],
    latent: &[&str],
    directed: &[(&str, &str)],
    bidirected: &[(&str, &str)],
) -> PathDiagram {
    let vertices = observed
        .iter()
        .map(|n| (v(n), Observability::Observed))
        .chain(latent.iter().map(|n| (v(n), Observability::Latent)));
    PathDiagram::new(
        vertices,
        directed.iter().map(|(a, b)| (v(a), v(b))),
        bidirected.iter().map(|(a, b)| (v(a), v(b))),
    )
    .expect("fixture diagrams are valid")
}

fn coefficients(edges: &[(&str, &str, f64)]) -> BTreeMap<(VertexId, VertexId), f64> {
    edges
        .iter()
        .map(|(a, b, c)| ((v(a), v(b)), *c))
        .collect()
}

fn set(names: &[&str]) -> std::collections::BTreeSet<VertexId> {
    names.iter().map(|n| v(n)).collect()
}

const SOURCE_A: &str = "\
# latent response Y observed through surrogates U, W, T
observed Z X U W T
latent Y

Z -> X : 0.5
Z -> Y : 0.4
X -> Y : 0.7
Y -> U : 0.8
Y -> W : 0.6
Y -> T : 0.5
";

/// Latent response, back-door adjustment through `Z`. True effect of `X`
/// on `Y` is 0.7, so τ² = 0.49.
pub fn fixture_a() -> Fixture {
    let g = diagram(
        &["Z", "X", "U", "W", "T"],
        &["Y"],
        &[
            ("Z", "X"),
            ("Z", "Y"),
            ("X", "Y"),
            ("Y", "U"),
            ("Y", "W"),
            ("Y", "T"),
        ],
        &[],
    );
    let sem = LinearSEM::with_unit_variances(
        g,
        coefficients(&[
            ("Z", "X", 0.5),
            ("Z", "Y", 0.4),
            ("X", "Y", 0.7),
            ("Y", "U", 0.8),
            ("Y", "W", 0.6),
            ("Y", "T", 0.5),
        ]),
        BTreeMap::new(),
    )
    .expect("fixture A admits unit variances");
    Fixture {
        name: "A",
        sem,
        roles: RoleSpec::Single(RoleAssignment {
            x: v("X"),
            y: v("Y"),
            u: v("U"),
            w: v("W"),
            z: set(&["Z"]),
            t: set(&["T"]),
            latent_role: LatentRole::Response,
        }),
        strategy: Strategy::BackdoorLatentResponse,
        source: SOURCE_A,
        tau_squared: 0.49,
    }
}

const SOURCE_B: &str = "\
# latent treatment Y observed through surrogates U, W, T
observed Z X U W T
latent Y

Z -> Y : 0.6
Z -> X : 0.3
Y -> X : 0.7
Y -> U : 0.8
Y -> W : 0.6
Y -> T : 0.5
";

/// Latent treatment, back-door adjustment through `Z`. True effect of `Y`
/// on `X` is 0.7, so τ² = 0.49.
pub fn fixture_b() -> Fixture {
    let g = diagram(
        &["Z", "X", "U", "W", "T"],
        &["Y"],
        &[
            ("Z", "Y"),
            ("Z", "X"),
            ("Y", "X"),
            ("Y", "U"),
            ("Y", "W"),
            ("Y", "T"),
        ],
        &[],
    );
    let sem = LinearSEM::with_unit_variances(
        g,
        coefficients(&[
            ("Z", "Y", 0.6),
            ("Z", "X", 0.3),
            ("Y", "X", 0.7),
            ("Y", "U", 0.8),
            ("Y", "W", 0.6),
            ("Y", "T", 0.5),
        ]),
        BTreeMap::new(),
    )
    .expect("fixture B admits unit variances");
    Fixture {
        name: "B",
        sem,
        roles: RoleSpec::Single(RoleAssignment {
            x: v("X"),
            y: v("Y"),
            u: v("U"),
            w: v("W"),
            z: set(&["Z"]),
            t: set(&["T"]),
            latent_role: LatentRole::Treatment,
        }),
        strategy: Strategy::BackdoorLatentTreatment,
        source: SOURCE_B,
        tau_squared: 0.49,
    }
}

const SOURCE_C: &str = "\
# latent response with treatment-response confounding; Z is an
# instrument for X -> Y once T is held fixed
observed T Z X U W
latent Y

T -> Z : 0.5
T -> Y : 0.4
Z -> X : 0.6
X -> Y : 0.7
X <-> Y : 0.1
Y -> U : 0.8
Y -> W : 0.5
";

/// Conditional instrumental variable with latent response and a
/// treatment-response confounder. True effect of `X` on `Y` is 0.7, so
/// τ² = 0.49.
pub fn fixture_c() -> Fixture {
    let g = diagram(
        &["T", "Z", "X", "U", "W"],
        &["Y"],
        &[
            ("T", "Z"),
            ("T", "Y"),
            ("Z", "X"),
            ("X", "Y"),
            ("Y", "U"),
            ("Y", "W"),
        ],
        &[("X", "Y")],
    );
    let sem = LinearSEM::with_unit_variances(
        g,
        coefficients(&[
            ("T", "Z", 0.5),
            ("T", "Y", 0.4),
            ("Z", "X", 0.6),
            ("X", "Y", 0.7),
            ("Y", "U", 0.8),
            ("Y", "W", 0.5),
        ]),
        BTreeMap::from([((v("X"), v("Y")), 0.1)]),
    )
    .expect("fixture C admits unit variances");
    Fixture {
        name: "C",
        sem,
        roles: RoleSpec::Single(RoleAssignment {
            x: v("X"),
            y: v("Y"),
            u: v("U"),
            w: v("W"),
            z: set(&["Z"]),
            t: set(&["T"]),
            latent_role: LatentRole::Response,
        }),
        strategy: Strategy::CivLatentResponse,
        source: SOURCE_C,
        tau_squared: 0.49,
    }
}

const SOURCE_D: &str = "\
# both treatment X1 and response X2 latent, each with two surrogates
observed Z U1 W1 U2 W2
latent X1 X2

Z -> X1 : 0.5
Z -> X2 : 0.3
X1 -> X2 : 0.6
X1 -> U1 : 0.8
X1 -> W1 : 0.7
X2 -> U2 : 0.8
X2 -> W2 : 0.6
";

/// Both treatment and response latent. The target is the squared
/// coefficient of `X2` on `X1` given `Z`: 0.6² = 0.36.
pub fn fixture_d() -> Fixture {
    let g = diagram(
        &["Z", "U1", "W1", "U2", "W2"],
        &["X1", "X2"],
        &[
            ("Z", "X1"),
            ("Z", "X2"),
            ("X1", "X2"),
            ("X1", "U1"),
            ("X1", "W1"),
            ("X2", "U2"),
            ("X2", "W2"),
        ],
        &[],
    );
    let sem = LinearSEM::with_unit_variances(
        g,
        coefficients(&[
            ("Z", "X1", 0.5),
            ("Z", "X2", 0.3),
            ("X1", "X2", 0.6),
            ("X1", "U1", 0.8),
            ("X1", "W1", 0.7),
            ("X2", "U2", 0.8),
            ("X2", "W2", 0.6),
        ]),
        BTreeMap::new(),
    )
    .expect("fixture D admits unit variances");
    Fixture {
        name: "D",
        sem,
        roles: RoleSpec::Double(DoubleRoleAssignment {
            x1: v("X1"),
            x2: v("X2"),
            u1: v("U1"),
            w1: v("W1"),
            u2: v("U2"),
            w2: v("W2"),
            z: set(&["Z"]),
            t1: set(&[]),
            t2: set(&[]),
        }),
        strategy: Strategy::DoubleLatent,
        source: SOURCE_D,
        tau_squared: 0.36,
    }
}

/// All four fixtures, in order.
pub fn all() -> Vec<Fixture> {
    vec![fixture_a(), fixture_b(), fixture_c(), fixture_d()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_unit_implied_variances() {
        for f in all() {
            let cov = f.sem.implied_covariance();
            assert!(
                cov.max_abs_diag_deviation() < 1e-12,
                "fixture {} is not standardized",
                f.name
            );
        }
    }

    #[test]
    fn fixture_a_known_covariances() {
        let f = fixture_a();
        let cov = f.sem.implied_covariance();
        let (x, y, z) = (v("X"), v("Y"), v("Z"));
        assert!((cov.get(&x, &y).unwrap() - 0.9).abs() < 1e-12);
        assert!((cov.get(&z, &y).unwrap() - 0.75).abs() < 1e-12);
        assert!((cov.sigma(&x, &y, &[z]).unwrap() - 0.525).abs() < 1e-12);
    }

    #[test]
    fn fixture_truths_match_path_product_oracle() {
        let a = fixture_a();
        let tau = a.sem.total_effect_oracle(&v("X"), &v("Y")).unwrap();
        assert!((tau * tau - a.tau_squared).abs() < 1e-12);

        let b = fixture_b();
        let tau = b.sem.total_effect_oracle(&v("Y"), &v("X")).unwrap();
        assert!((tau * tau - b.tau_squared).abs() < 1e-12);

        let c = fixture_c();
        let tau = c.sem.total_effect_oracle(&v("X"), &v("Y")).unwrap();
        assert!((tau * tau - c.tau_squared).abs() < 1e-12);

        // fixture D targets a conditional coefficient, not a total effect:
        // here it coincides with the single edge X1 -> X2
        let d = fixture_d();
        let alpha = d.sem.coefficient(&v("X1"), &v("X2")).unwrap();
        assert!((alpha * alpha - d.tau_squared).abs() < 1e-12);
    }

    #[test]
    fn fixture_roles_validate() {
        for f in all() {
            match &f.roles {
                RoleSpec::Single(r) => r.validate(f.graph()).unwrap(),
                RoleSpec::Double(r) => r.validate(f.graph()).unwrap(),
            }
        }
    }
}
