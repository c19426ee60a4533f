//! Ground-truth machinery: linear SEMs over path diagrams, exact implied
//! covariances, standardization, seeded Gaussian sampling, and the
//! total-effect and conditional-independence oracles.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::cov::LabeledCovariance;
use crate::error::SemError;
use crate::graph::{Observability, PathDiagram, VertexId};

const MIN_ERROR_VARIANCE: f64 = 1e-9;

/// A path diagram with path coefficients and error (co)variances.
/// Off-diagonal error covariances are allowed exactly for bidirected pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSEM {
    graph: PathDiagram,
    coefficients: BTreeMap<(VertexId, VertexId), f64>,
    error_variances: BTreeMap<VertexId, f64>,
    error_covariances: BTreeMap<(VertexId, VertexId), f64>,
}

impl LinearSEM {
    pub fn new(
        graph: PathDiagram,
        coefficients: BTreeMap<(VertexId, VertexId), f64>,
        error_variances: BTreeMap<VertexId, f64>,
        error_covariances: BTreeMap<(VertexId, VertexId), f64>,
    ) -> Result<Self, SemError> {
        for (a, b) in coefficients.keys() {
            if !graph.has_directed_edge(a, b) {
                return Err(SemError::UnknownEdge(a.to_string(), b.to_string()));
            }
        }
        for (a, b) in graph.directed_edges() {
            match coefficients.get(&(a.clone(), b.clone())) {
                None => return Err(SemError::MissingCoefficient(a.to_string(), b.to_string())),
                Some(c) if *c == 0.0 => {
                    return Err(SemError::ZeroCoefficient(a.to_string(), b.to_string()))
                }
                _ => {}
            }
        }
        for (a, b) in error_covariances.keys() {
            if !graph.has_bidirected_edge(a, b) {
                return Err(SemError::UnknownErrorCovariance(
                    a.to_string(),
                    b.to_string(),
                ));
            }
        }
        for v in graph.vertices() {
            match error_variances.get(v) {
                Some(w) if *w > 0.0 => {}
                _ => return Err(SemError::InfeasibleVariance(
                    v.to_string(),
                    error_variances.get(v).copied().unwrap_or(f64::NAN),
                )),
            }
        }
        let sem = LinearSEM {
            graph,
            coefficients,
            error_variances,
            error_covariances,
        };
        let (order, _) = sem.structure();
        let omega = sem.omega(&order);
        if omega.clone().cholesky().is_none() {
            return Err(SemError::ErrorCovNotPositiveDefinite);
        }
        Ok(sem)
    }

    /// Builds a model whose implied variances are all exactly 1 by solving
    /// the error variances in topological order. Fails when a variance
    /// constraint is infeasible for the given coefficients.
    pub fn with_unit_variances(
        graph: PathDiagram,
        coefficients: BTreeMap<(VertexId, VertexId), f64>,
        error_covariances: BTreeMap<(VertexId, VertexId), f64>,
    ) -> Result<Self, SemError> {
        let order = graph.topological_order().ok_or(SemError::Graph(
            crate::error::GraphError::Cycle,
        ))?;
        let n = order.len();
        let pos: BTreeMap<&VertexId, usize> =
            order.iter().enumerate().map(|(i, v)| (v, i)).collect();

        let mut a = DMatrix::zeros(n, n);
        for ((from, to), alpha) in &coefficients {
            if !graph.has_directed_edge(from, to) {
                return Err(SemError::UnknownEdge(from.to_string(), to.to_string()));
            }
            a[(pos[to], pos[from])] = *alpha;
        }
        let m = (DMatrix::identity(n, n) - &a)
            .try_inverse()
            .expect("I - A is unit triangular in topological order");

        let mut omega = DMatrix::zeros(n, n);
        for ((x, y), w) in &error_covariances {
            if !graph.has_bidirected_edge(x, y) {
                return Err(SemError::UnknownErrorCovariance(
                    x.to_string(),
                    y.to_string(),
                ));
            }
            omega[(pos[x], pos[y])] = *w;
            omega[(pos[y], pos[x])] = *w;
        }
        // Sigma_ii depends on omega_ii with unit weight and only on entries
        // of earlier vertices, so the diagonal solves forward.
        let mut variances = BTreeMap::new();
        for (i, v) in order.iter().enumerate() {
            let row = m.row(i);
            let partial = (row * &omega * row.transpose())[(0, 0)];
            let w = 1.0 - partial;
            if w <= MIN_ERROR_VARIANCE {
                return Err(SemError::InfeasibleVariance(v.to_string(), w));
            }
            omega[(i, i)] = w;
            variances.insert(v.clone(), w);
        }
        LinearSEM::new(graph, coefficients, variances, error_covariances)
    }

    pub fn graph(&self) -> &PathDiagram {
        &self.graph
    }

    pub fn coefficient(&self, from: &VertexId, to: &VertexId) -> Option<f64> {
        self.coefficients.get(&(from.clone(), to.clone())).copied()
    }

    pub fn coefficients(&self) -> &BTreeMap<(VertexId, VertexId), f64> {
        &self.coefficients
    }

    pub fn error_variance(&self, v: &VertexId) -> Option<f64> {
        self.error_variances.get(v).copied()
    }

    /// Topological vertex order and the coefficient matrix `A` in that
    /// order (`A[i][j] = α` for the edge `order[j] -> order[i]`).
    fn structure(&self) -> (Vec<VertexId>, DMatrix<f64>) {
        let order = self
            .graph
            .topological_order()
            .expect("validated acyclic at construction");
        let pos: BTreeMap<&VertexId, usize> =
            order.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let n = order.len();
        let mut a = DMatrix::zeros(n, n);
        for ((from, to), alpha) in &self.coefficients {
            a[(pos[to], pos[from])] = *alpha;
        }
        (order, a)
    }

    fn omega(&self, order: &[VertexId]) -> DMatrix<f64> {
        let pos: BTreeMap<&VertexId, usize> =
            order.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let n = order.len();
        let mut omega = DMatrix::zeros(n, n);
        for (v, w) in &self.error_variances {
            omega[(pos[v], pos[v])] = *w;
        }
        for ((x, y), w) in &self.error_covariances {
            omega[(pos[x], pos[y])] = *w;
            omega[(pos[y], pos[x])] = *w;
        }
        omega
    }

    /// Exact implied covariance `Σ = (I − A)⁻¹ Ω (I − A)⁻ᵀ` over all
    /// vertices, latent included, with labels in sorted name order.
    pub fn implied_covariance(&self) -> LabeledCovariance {
        let (order, a) = self.structure();
        let n = order.len();
        let m = (DMatrix::identity(n, n) - a)
            .try_inverse()
            .expect("I - A is unit triangular in topological order");
        let sigma = &m * self.omega(&order) * m.transpose();
        let full = LabeledCovariance::new(order.clone(), sigma)
            .expect("implied covariance of a valid model is SPD");
        let mut sorted: Vec<VertexId> = order;
        sorted.sort();
        full.permuted(&sorted).expect("labels unchanged")
    }

    /// Implied covariance restricted to the observed vertices.
    pub fn observed_covariance(&self) -> LabeledCovariance {
        let obs: Vec<VertexId> = self.graph.observed_vertices().into_iter().collect();
        self.implied_covariance()
            .restricted(&obs)
            .expect("observed labels exist")
    }

    /// Rescales every variable to unit implied variance. Coefficients
    /// transform as `α'_{ij} = α_{ij} s_j / s_i`, error covariances as
    /// `ω'_{ij} = ω_{ij} / (s_i s_j)`.
    pub fn standardize(&self) -> LinearSEM {
        let sigma = self.implied_covariance();
        let sd = |v: &VertexId| sigma.get(v, v).unwrap().sqrt();
        let coefficients = self
            .coefficients
            .iter()
            .map(|((from, to), alpha)| {
                ((from.clone(), to.clone()), alpha * sd(from) / sd(to))
            })
            .collect();
        let error_variances = self
            .error_variances
            .iter()
            .map(|(v, w)| (v.clone(), w / (sd(v) * sd(v))))
            .collect();
        let error_covariances = self
            .error_covariances
            .iter()
            .map(|((x, y), w)| ((x.clone(), y.clone()), w / (sd(x) * sd(y))))
            .collect();
        LinearSEM::new(
            self.graph.clone(),
            coefficients,
            error_variances,
            error_covariances,
        )
        .expect("rescaling preserves validity")
    }

    /// Sum over all directed paths from `x` to `y` of the products of path
    /// coefficients. Cross-validated against the `(y, x)` entry of
    /// `(I − A)⁻¹`. Returns 0 when no directed path exists.
    pub fn total_effect_oracle(
        &self,
        x: &VertexId,
        y: &VertexId,
    ) -> Result<f64, crate::error::GraphError> {
        let (order, a) = self.structure();
        let pos: BTreeMap<&VertexId, usize> =
            order.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let xi = *pos
            .get(x)
            .ok_or_else(|| crate::error::GraphError::UnknownVertex(x.to_string()))?;
        let yi = *pos
            .get(y)
            .ok_or_else(|| crate::error::GraphError::UnknownVertex(y.to_string()))?;
        // dynamic program over the topological order: effect[v] = total
        // effect of x on v; path products accumulate along edges.
        let n = order.len();
        let mut effect = vec![0.0f64; n];
        effect[xi] = 1.0;
        for i in xi + 1..n {
            let mut acc = 0.0;
            for j in xi..i {
                if a[(i, j)] != 0.0 {
                    acc += a[(i, j)] * effect[j];
                }
            }
            effect[i] = acc;
        }
        let path_product = if xi == yi { 1.0 } else { effect[yi] };
        let m = (DMatrix::identity(n, n) - a)
            .try_inverse()
            .expect("I - A is unit triangular in topological order");
        assert!(
            (path_product - m[(yi, xi)]).abs() <= 1e-12 * (1.0 + m[(yi, xi)].abs()),
            "path-product and matrix-inverse total effects disagree"
        );
        Ok(path_product)
    }

    /// Seeded Gaussian sampling of the structural equations; returns the
    /// sample covariance of the observed variables only. Deterministic for
    /// a fixed seed.
    pub fn sample_covariance(&self, n: usize, seed: u64) -> Result<LabeledCovariance, SemError> {
        let (order, a) = self.structure();
        let dim = order.len();
        let obs: Vec<VertexId> = self.graph.observed_vertices().into_iter().collect();
        if n < obs.len() + 1 {
            return Err(SemError::SampleTooSmall(n, obs.len()));
        }
        let omega = self.omega(&order);
        let chol = omega
            .cholesky()
            .ok_or(SemError::ErrorCovNotPositiveDefinite)?;
        let l = chol.l();

        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut sum = DVector::<f64>::zeros(dim);
        let mut cross = DMatrix::<f64>::zeros(dim, dim);
        let mut x = DVector::<f64>::zeros(dim);
        for _ in 0..n {
            let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let eps = &l * z;
            for i in 0..dim {
                let mut val = eps[i];
                for j in 0..i {
                    let w = a[(i, j)];
                    if w != 0.0 {
                        val += w * x[j];
                    }
                }
                x[i] = val;
            }
            sum += &x;
            cross.syger(1.0, &x, &x, 1.0);
        }
        let nf = n as f64;
        let mean = sum / nf;
        let mut cov = (cross - nf * &mean * mean.transpose()) / (nf - 1.0);
        // syger fills the lower triangle; mirror it
        for i in 0..dim {
            for j in i + 1..dim {
                cov[(i, j)] = cov[(j, i)];
            }
        }
        let full = LabeledCovariance::new(order, cov)?;
        Ok(full.restricted(&obs)?)
    }
}

/// Gaussian conditional-independence oracle: `a ⟂ b | c` iff the partial
/// covariance is below `tol` in absolute value.
pub fn ci_oracle(
    cov: &LabeledCovariance,
    a: &VertexId,
    b: &VertexId,
    c: &[VertexId],
    tol: f64,
) -> Result<bool, crate::error::CovError> {
    Ok(cov.sigma(a, b, c)?.abs() < tol)
}

/// Derives a replicate stream seed from a base seed (one splitmix64 step
/// per index).
pub fn replicate_seed(seed: u64, replicate: u64) -> u64 {
    let mut z = seed
        .wrapping_add(replicate.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random DAG over `n` observed vertices `V1..Vn` with independent edge
/// probability `p` along a random topological order.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, p: f64) -> PathDiagram {
    let mut names: Vec<VertexId> = (1..=n)
        .map(|i| VertexId::new(&format!("V{i}")).unwrap())
        .collect();
    // random topological order
    for i in (1..names.len()).rev() {
        let j = rng.random_range(0..=i);
        names.swap(i, j);
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((names[i].clone(), names[j].clone()));
            }
        }
    }
    PathDiagram::new(
        names.into_iter().map(|v| (v, Observability::Observed)),
        edges,
        [],
    )
    .unwrap()
}

/// Coefficient draw bounded away from zero: uniform on `±[lo, hi]`.
pub fn draw_coefficient<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let mag = rng.random_range(lo..hi);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// Random standardized SEM over a fixed graph: coefficients from
/// `±[0.2, 0.9]` (bidirected weights likewise), error variances solved for
/// unit implied variances, infeasible draws rejected. `None` after
/// `max_tries` rejections.
pub fn random_unit_sem<R: Rng>(
    rng: &mut R,
    graph: &PathDiagram,
    max_tries: usize,
) -> Option<LinearSEM> {
    random_unit_sem_in(rng, graph, 0.2, 0.9, max_tries)
}

pub fn random_unit_sem_in<R: Rng>(
    rng: &mut R,
    graph: &PathDiagram,
    lo: f64,
    hi: f64,
    max_tries: usize,
) -> Option<LinearSEM> {
    for _ in 0..max_tries {
        let coefficients: BTreeMap<(VertexId, VertexId), f64> = graph
            .directed_edges()
            .map(|e| (e.clone(), draw_coefficient(rng, lo, hi)))
            .collect();
        let error_covariances: BTreeMap<(VertexId, VertexId), f64> = graph
            .bidirected_edges()
            .map(|e| (e.clone(), draw_coefficient(rng, lo, hi)))
            .collect();
        if let Ok(sem) = LinearSEM::with_unit_variances(
            graph.clone(),
            coefficients,
            error_covariances,
        ) {
            return Some(sem);
        }
    }
    None
}
