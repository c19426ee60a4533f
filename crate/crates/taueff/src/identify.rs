//! Covariance-side identification: rank-one recovery of the latent factor
//! loading from the observed concentration matrix, deflation back to the
//! latent-conditional covariance, and the four squared-total-effect
//! strategies.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cov::{condition_number, spd_inverse, LabeledCovariance, LabeledMatrix};
use crate::criteria::{
    back_door, conditional_iv, theorem1_check, theorem2_check, CriterionCertificate,
    LatentRole, R2PivotKind, RoleAssignment, RoleSpec, Strategy,
};
use crate::error::IdentifyError;
use crate::graph::{PathDiagram, VertexId};

/// Numeric tolerances. Exact population covariances and sample covariances
/// live in very different noise regimes, so the misfit threshold is
/// settable separately.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Settings {
    /// Zero/nonzero decisions on concentration entries and denominators.
    pub zero_tol: f64,
    /// Redundant-pivot disagreement and zero-pattern residual threshold,
    /// relative to the scale of the concentration matrix.
    pub misfit_tol: f64,
    /// Allowed deviation of the covariance diagonal from 1.
    pub standardized_tol: f64,
}

impl Settings {
    /// Defaults for exact implied covariances.
    pub fn exact() -> Self {
        Settings {
            zero_tol: 1e-8,
            misfit_tol: 1e-8,
            standardized_tol: 1e-6,
        }
    }

    /// Defaults for sample covariances: a relative misfit tolerance
    /// (default 1e-2) and the same structural zero tolerance.
    pub fn sampled(misfit_tol: f64) -> Self {
        Settings {
            zero_tol: 1e-8,
            misfit_tol,
            standardized_tol: 1e-6,
        }
    }
}

impl Default for Settings {
    fn default() -> Self {
        Settings::exact()
    }
}

/// Which case formulas produced the covariate blocks of the loading.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PivotRecord {
    pub r1_pivot: Option<VertexId>,
    pub r2_pivot: R2PivotKind,
}

/// The recovered rank-one term `λλ'` of the concentration split
/// `Σ_ss⁻¹ = Σ_ss·y⁻¹ − λλ'`, with diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaDecomposition {
    labels: Vec<VertexId>,
    lambda: DVector<f64>,
    pub pivots: PivotRecord,
    /// Max absolute disagreement among redundant pivot recoveries.
    pub consistency_residual: f64,
    /// Max absolute entry of `K + λλ'` over the positions the certificate
    /// forces to zero.
    pub zero_pattern_residual: f64,
}

impl LambdaDecomposition {
    pub fn labels(&self) -> &[VertexId] {
        &self.labels
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    /// `λλ'`; invariant under a global sign flip of `λ`.
    pub fn lambda_outer(&self) -> DMatrix<f64> {
        &self.lambda * self.lambda.transpose()
    }
}

/// Estimated products `σ_ay σ_yb` over `S`, under the convention
/// `σ_yy = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossProducts {
    inner: LabeledMatrix,
}

impl CrossProducts {
    pub fn labels(&self) -> &[VertexId] {
        self.inner.labels()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.inner.matrix()
    }

    pub fn get(&self, a: &VertexId, b: &VertexId) -> Result<f64, IdentifyError> {
        Ok(self.inner.get(a, b)?)
    }

    pub fn block(
        &self,
        rows: &[VertexId],
        cols: &[VertexId],
    ) -> Result<DMatrix<f64>, IdentifyError> {
        Ok(self.inner.block(rows, cols)?)
    }

    /// Ratio of the second-largest to largest eigenvalue magnitude; small
    /// for a clean rank-one matrix.
    pub fn rank_one_residual(&self) -> f64 {
        let eig = self.inner.matrix().clone().symmetric_eigen();
        let mut mags: Vec<f64> = eig.eigenvalues.iter().map(|e| e.abs()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if mags.len() < 2 || mags[0] == 0.0 {
            0.0
        } else {
            mags[1] / mags[0]
        }
    }
}

/// Numeric diagnostics carried by an identification result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub consistency_residual: f64,
    pub zero_pattern_residual: f64,
    /// Condition numbers of the matrices that were inverted, keyed by a
    /// short description.
    pub condition_numbers: BTreeMap<String, f64>,
}

/// Outcome of a successful identification run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentificationResult {
    pub strategy: Strategy,
    pub tau_squared: f64,
    pub certificate: CriterionCertificate,
    pub diagnostics: Diagnostics,
}

fn matrix_scale(k: &DMatrix<f64>) -> f64 {
    k.iter().fold(1.0f64, |a, b| a.max(b.abs()))
}

/// Recovers the rank-one loading `λ` from the concentration matrix over
/// `S = {x, u, w} ∪ z ∪ t` using the certificate's witnesses.
///
/// The surrogate-trio components come from the closed forms
/// `λ1² = −K_xu K_xw / K_uw` (sign fixed to `+√`), `λ2 = −K_xu/λ1`,
/// `λ3 = −K_xw/λ1`. The `t` block is read off any pivot row in `R1`
/// (priority x, u, w), the `z` block off any pivot in `R2` (priority x, u,
/// w, then the whole `t` block). Redundant pivots are cross-checked, never
/// averaged; disagreement beyond tolerance is a model-misfit error.
pub fn recover_lambda(
    cov: &LabeledCovariance,
    roles: &RoleAssignment,
    cert: &CriterionCertificate,
    settings: &Settings,
) -> Result<LambdaDecomposition, IdentifyError> {
    if !cert.satisfied {
        return Err(IdentifyError::CriterionNotSatisfied(
            cert.failed_condition
                .clone()
                .unwrap_or_else(|| "certificate not satisfied".into()),
        ));
    }
    let witnesses = cert
        .witnesses
        .as_ref()
        .ok_or_else(|| IdentifyError::MalformedRoles("certificate carries no witnesses".into()))?;

    let s = roles.s_labels();
    let k = cov.concentration(&s)?;
    let k_scale = matrix_scale(k.matrix());
    let misfit_limit = settings.misfit_tol * k_scale;

    let (x, u, w) = (&roles.x, &roles.u, &roles.w);
    let k_xu = k.get(x, u)?;
    let k_xw = k.get(x, w)?;
    let k_uw = k.get(u, w)?;
    for (name, val) in [("xu", k_xu), ("xw", k_xw), ("uw", k_uw)] {
        if val.abs() <= settings.zero_tol * k_scale {
            return Err(IdentifyError::NearZeroConcentration(format!(
                "|K_{name}| = {:e}",
                val.abs()
            )));
        }
    }
    let lam1_sq = -k_xu * k_xw / k_uw;
    if lam1_sq <= settings.zero_tol {
        return Err(IdentifyError::NonFactorizable);
    }
    let lam1 = lam1_sq.sqrt();
    let lam2 = -k_xu / lam1;
    let lam3 = -k_xw / lam1;

    let n = s.len();
    let mut lambda = DVector::zeros(n);
    lambda[0] = lam1;
    lambda[1] = lam2;
    lambda[2] = lam3;
    let trio_lambda =
        |p: &VertexId| -> f64 {
            if p == x {
                lam1
            } else if p == u {
                lam2
            } else {
                lam3
            }
        };

    let z_labels: Vec<VertexId> = roles.z.iter().cloned().collect();
    let t_labels: Vec<VertexId> = roles.t.iter().cloned().collect();
    let z_offset = 3;
    let t_offset = 3 + z_labels.len();

    let mut consistency = 0.0f64;
    let mut r1_pivot = None;

    // t block (λ5) from R1
    if !t_labels.is_empty() {
        let pivots: Vec<&VertexId> = [x, u, w]
            .into_iter()
            .filter(|p| witnesses.r1.contains(*p) && trio_lambda(p).abs() > settings.zero_tol)
            .collect();
        if pivots.is_empty() {
            return Err(IdentifyError::EmptyPivot(
                "no usable R1 row for the t block".into(),
            ));
        }
        let candidates: Vec<DVector<f64>> = pivots
            .iter()
            .map(|p| {
                let col = k.block(&t_labels, std::slice::from_ref(p))?;
                Ok(DVector::from_fn(t_labels.len(), |i, _| {
                    -col[(i, 0)] / trio_lambda(p)
                }))
            })
            .collect::<Result<_, IdentifyError>>()?;
        for cand in &candidates[1..] {
            consistency = consistency.max((cand - &candidates[0]).abs().max());
        }
        for (i, val) in candidates[0].iter().enumerate() {
            lambda[t_offset + i] = *val;
        }
        r1_pivot = Some(pivots[0].clone());
    }

    // z block (λ4) from R2
    let mut r2_pivot = R2PivotKind::Unused;
    if !z_labels.is_empty() {
        let named: Vec<&VertexId> = [x, u, w]
            .into_iter()
            .filter(|p| witnesses.r2.contains(*p) && trio_lambda(p).abs() > settings.zero_tol)
            .collect();
        let r2_t: Vec<VertexId> = t_labels
            .iter()
            .filter(|p| witnesses.r2.contains(*p))
            .cloned()
            .collect();
        let mut candidates: Vec<(R2PivotKind, DVector<f64>)> = Vec::new();
        for p in &named {
            let col = k.block(&z_labels, std::slice::from_ref(p))?;
            candidates.push((
                R2PivotKind::Named((*p).clone()),
                DVector::from_fn(z_labels.len(), |i, _| -col[(i, 0)] / trio_lambda(p)),
            ));
        }
        if !r2_t.is_empty() {
            let lam5_sub = DVector::from_fn(r2_t.len(), |i, _| {
                let pos = t_labels.iter().position(|l| l == &r2_t[i]).unwrap();
                lambda[t_offset + pos]
            });
            let norm_sq = lam5_sub.dot(&lam5_sub);
            if norm_sq > settings.zero_tol {
                let kzt = k.block(&z_labels, &r2_t)?;
                candidates.push((R2PivotKind::TBlock, -(kzt * lam5_sub) / norm_sq));
            }
        }
        if candidates.is_empty() {
            return Err(IdentifyError::EmptyPivot(
                "no usable R2 row for the z block".into(),
            ));
        }
        for (_, cand) in &candidates[1..] {
            consistency = consistency.max((cand - &candidates[0].1).abs().max());
        }
        for (i, val) in candidates[0].1.iter().enumerate() {
            lambda[z_offset + i] = *val;
        }
        r2_pivot = candidates[0].0.clone();
    }

    // zero pattern of K + λλ' at the certificate's mandated positions
    let reconstructed = k.matrix() + &lambda * lambda.transpose();
    let pos_of = |v: &VertexId| s.iter().position(|l| l == v).unwrap();
    let mut zero_positions: Vec<(usize, usize)> =
        vec![(0, 1), (0, 2), (1, 2)];
    for r in &witnesses.r1 {
        for t in &t_labels {
            zero_positions.push((pos_of(r), pos_of(t)));
        }
    }
    for r in &witnesses.r2 {
        for z in &z_labels {
            zero_positions.push((pos_of(r), pos_of(z)));
        }
    }
    let zero_pattern_residual = zero_positions
        .iter()
        .fold(0.0f64, |acc, (i, j)| acc.max(reconstructed[(*i, *j)].abs()));

    if consistency > misfit_limit {
        return Err(IdentifyError::ModelMisfit(format!(
            "redundant pivots disagree by {consistency:e}"
        )));
    }
    if zero_pattern_residual > misfit_limit {
        return Err(IdentifyError::ModelMisfit(format!(
            "zero-pattern residual {zero_pattern_residual:e}"
        )));
    }

    Ok(LambdaDecomposition {
        labels: s,
        lambda,
        pivots: PivotRecord {
            r1_pivot,
            r2_pivot,
        },
        consistency_residual: consistency,
        zero_pattern_residual,
    })
}

/// Deflates the observed covariance over `S`: returns the
/// latent-conditional covariance `Σ_ss·y = (Σ_ss⁻¹ + λλ')⁻¹` and the
/// cross products `Σ_sy Σ_ys = Σ_ss − Σ_ss·y` (with `σ_yy = 1`).
pub fn deflate(
    cov: &LabeledCovariance,
    lam: &LambdaDecomposition,
) -> Result<(LabeledMatrix, CrossProducts), IdentifyError> {
    let s = lam.labels();
    let sigma_ss = cov.block(s, s)?;
    let k = spd_inverse(&sigma_ss)?;
    let deflated_inv = k + lam.lambda_outer();
    let sigma_ssy = deflated_inv
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| {
            IdentifyError::ModelMisfit("deflated concentration is not positive definite".into())
        })?;
    let cross = &sigma_ss - &sigma_ssy;
    Ok((
        LabeledMatrix::new(s.to_vec(), sigma_ssy)?,
        CrossProducts {
            inner: LabeledMatrix::new(s.to_vec(), cross)?,
        },
    ))
}

/// Squared conditional covariance with the latent:
/// `σ²_xy·z = σ²_xy − 2 σ_xy Σ_yz Σ_zz⁻¹ Σ_zx + Σ_xz Σ_zz⁻¹ Σ_zy Σ_yz Σ_zz⁻¹ Σ_zx`,
/// assembled from cross products. Small negatives are clamped to zero.
pub fn sq_cond_cov_latent(
    cp: &CrossProducts,
    cov: &LabeledCovariance,
    x: &VertexId,
    z: &[VertexId],
    settings: &Settings,
) -> Result<f64, IdentifyError> {
    let direct = cp.get(x, x)?;
    let val = if z.is_empty() {
        direct
    } else {
        let szz_inv = spd_inverse(&cov.block(z, z)?)?;
        let szx = cov.block(z, std::slice::from_ref(x))?;
        let cp_xz = cp.block(std::slice::from_ref(x), z)?;
        let cp_zz = cp.block(z, z)?;
        let proj = &szz_inv * &szx;
        let cross_term = (cp_xz * &proj)[(0, 0)];
        let quad_term = (proj.transpose() * cp_zz * &proj)[(0, 0)];
        direct - 2.0 * cross_term + quad_term
    };
    let scale = 1.0f64.max(direct.abs());
    if val < -settings.misfit_tol * scale {
        return Err(IdentifyError::ModelMisfit(format!(
            "squared conditional covariance is negative: {val:e}"
        )));
    }
    Ok(val.max(0.0))
}

/// Latent conditional variance `σ_yy·z = 1 − tr(Σ_zz⁻¹ Σ_zy Σ_yz)` under
/// the unit-latent-variance convention.
pub fn cond_var_latent(
    cp: &CrossProducts,
    cov: &LabeledCovariance,
    z: &[VertexId],
    settings: &Settings,
) -> Result<f64, IdentifyError> {
    let val = if z.is_empty() {
        1.0
    } else {
        let szz_inv = spd_inverse(&cov.block(z, z)?)?;
        let cp_zz = cp.block(z, z)?;
        1.0 - (szz_inv * cp_zz).trace()
    };
    if val <= settings.zero_tol {
        return Err(IdentifyError::ModelMisfit(format!(
            "latent conditional variance is not positive: {val:e}"
        )));
    }
    Ok(val)
}

fn check_standardized(
    cov: &LabeledCovariance,
    settings: &Settings,
) -> Result<(), IdentifyError> {
    let dev = cov.max_abs_diag_deviation();
    if dev > settings.standardized_tol {
        return Err(IdentifyError::NotStandardized(format!(
            "diagonal deviates from 1 by {dev:e}"
        )));
    }
    Ok(())
}

fn run_single_latent(
    cov: &LabeledCovariance,
    roles: &RoleAssignment,
    cert: &CriterionCertificate,
    settings: &Settings,
) -> Result<(LambdaDecomposition, CrossProducts), IdentifyError> {
    let lam = recover_lambda(cov, roles, cert, settings)?;
    let (_, cp) = deflate(cov, &lam)?;
    Ok((lam, cp))
}

/// Identifies the squared total effect for one strategy from the observed
/// covariance. Requires a standardized (unit-diagonal) covariance; the
/// result is in standardized units.
pub fn identify_tau_sq(
    cov: &LabeledCovariance,
    g: &PathDiagram,
    roles: &RoleSpec,
    strategy: Strategy,
    settings: &Settings,
) -> Result<IdentificationResult, IdentifyError> {
    check_standardized(cov, settings)?;
    let mut condition_numbers = BTreeMap::new();

    match (strategy, roles) {
        (Strategy::BackdoorLatentResponse, RoleSpec::Single(r)) => {
            if r.latent_role != LatentRole::Response {
                return Err(IdentifyError::MalformedRoles(
                    "strategy needs a latent-response assignment".into(),
                ));
            }
            let cert = theorem1_check(g, r)?;
            if !cert.satisfied {
                return Err(IdentifyError::CriterionNotSatisfied(
                    cert.failed_condition.unwrap_or_default(),
                ));
            }
            if !back_door(g, &r.x, &r.y, &r.z)? {
                return Err(IdentifyError::CriterionNotSatisfied(
                    "back-door criterion fails for (x, y) with z".into(),
                ));
            }
            let z: Vec<VertexId> = r.z.iter().cloned().collect();
            let (lam, cp) = run_single_latent(cov, r, &cert, settings)?;
            let num = sq_cond_cov_latent(&cp, cov, &r.x, &z, settings)?;
            let sxx = cov.sigma(&r.x, &r.x, &z)?;
            if sxx.abs() <= settings.zero_tol {
                return Err(IdentifyError::DegenerateDenominator(format!(
                    "σ_xx·z = {sxx:e}"
                )));
            }
            condition_numbers.insert("sigma_zz".into(), condition_number(&cov.block(&z, &z)?));
            condition_numbers.insert(
                "sigma_ss".into(),
                condition_number(&cov.block(&r.s_labels(), &r.s_labels())?),
            );
            finish(strategy, num / (sxx * sxx), cert, &lam, None, condition_numbers)
        }
        (Strategy::BackdoorLatentTreatment, RoleSpec::Single(r)) => {
            if r.latent_role != LatentRole::Treatment {
                return Err(IdentifyError::MalformedRoles(
                    "strategy needs a latent-treatment assignment".into(),
                ));
            }
            let cert = theorem1_check(g, r)?;
            if !cert.satisfied {
                return Err(IdentifyError::CriterionNotSatisfied(
                    cert.failed_condition.unwrap_or_default(),
                ));
            }
            // latent treatment: back-door for (y, x) with adjustment z
            if !back_door(g, &r.y, &r.x, &r.z)? {
                return Err(IdentifyError::CriterionNotSatisfied(
                    "back-door criterion fails for (y, x) with z".into(),
                ));
            }
            let z: Vec<VertexId> = r.z.iter().cloned().collect();
            let (lam, cp) = run_single_latent(cov, r, &cert, settings)?;
            let num = sq_cond_cov_latent(&cp, cov, &r.x, &z, settings)?;
            let syy = cond_var_latent(&cp, cov, &z, settings)?;
            if syy.abs() <= settings.zero_tol {
                return Err(IdentifyError::DegenerateDenominator(format!(
                    "σ_yy·z = {syy:e}"
                )));
            }
            condition_numbers.insert("sigma_zz".into(), condition_number(&cov.block(&z, &z)?));
            condition_numbers.insert(
                "sigma_ss".into(),
                condition_number(&cov.block(&r.s_labels(), &r.s_labels())?),
            );
            finish(strategy, num / (syy * syy), cert, &lam, None, condition_numbers)
        }
        (Strategy::CivLatentResponse, RoleSpec::Single(r)) => {
            if r.latent_role != LatentRole::Response {
                return Err(IdentifyError::MalformedRoles(
                    "strategy needs a latent-response assignment".into(),
                ));
            }
            if r.z.len() != 1 {
                return Err(IdentifyError::MalformedRoles(
                    "conditional-IV strategy needs a single instrument in z".into(),
                ));
            }
            let instrument = r.z.iter().next().unwrap().clone();
            let cert = theorem1_check(g, r)?;
            if !cert.satisfied {
                return Err(IdentifyError::CriterionNotSatisfied(
                    cert.failed_condition.unwrap_or_default(),
                ));
            }
            if !conditional_iv(g, &r.x, &r.y, &instrument, &r.t)? {
                return Err(IdentifyError::CriterionNotSatisfied(
                    "conditional-IV criterion fails for (x, y) with z given t".into(),
                ));
            }
            let t: Vec<VertexId> = r.t.iter().cloned().collect();
            let (lam, cp) = run_single_latent(cov, r, &cert, settings)?;
            let num = sq_cond_cov_latent(&cp, cov, &instrument, &t, settings)?;
            let sxz = cov.sigma(&r.x, &instrument, &t)?;
            if sxz.abs() <= settings.zero_tol {
                return Err(IdentifyError::DegenerateDenominator(format!(
                    "σ_xz·t = {sxz:e}"
                )));
            }
            condition_numbers.insert("sigma_tt".into(), condition_number(&cov.block(&t, &t)?));
            condition_numbers.insert(
                "sigma_ss".into(),
                condition_number(&cov.block(&r.s_labels(), &r.s_labels())?),
            );
            finish(strategy, num / (sxz * sxz), cert, &lam, None, condition_numbers)
        }
        (Strategy::DoubleLatent, RoleSpec::Double(r)) => {
            let cert = theorem2_check(g, r)?;
            if !cert.satisfied {
                return Err(IdentifyError::CriterionNotSatisfied(
                    cert.failed_condition.clone().unwrap_or_default(),
                ));
            }
            let (first, second) = r.embeddings();
            let cert1 = &cert.sub_certificates[0];
            let cert2 = &cert.sub_certificates[1];
            let z: Vec<VertexId> = r.z.iter().cloned().collect();
            let (lam1, cp1) = run_single_latent(cov, &first, cert1, settings)?;
            let (lam2, cp2) = run_single_latent(cov, &second, cert2, settings)?;
            let num = sq_cond_cov_latent(&cp2, cov, &r.u1, &z, settings)?;
            let den = sq_cond_cov_latent(&cp1, cov, &r.u1, &z, settings)?;
            if den <= settings.zero_tol {
                return Err(IdentifyError::DegenerateDenominator(format!(
                    "σ²_x1u1·z = {den:e}"
                )));
            }
            condition_numbers.insert("sigma_zz".into(), condition_number(&cov.block(&z, &z)?));
            for (name, emb) in [("sigma_s1", &first), ("sigma_s2", &second)] {
                condition_numbers.insert(
                    name.into(),
                    condition_number(&cov.block(&emb.s_labels(), &emb.s_labels())?),
                );
            }
            finish(
                strategy,
                num / den,
                cert,
                &lam1,
                Some(&lam2),
                condition_numbers,
            )
        }
        _ => Err(IdentifyError::MalformedRoles(
            "role assignment kind does not match the strategy".into(),
        )),
    }
}

fn finish(
    strategy: Strategy,
    tau_squared: f64,
    certificate: CriterionCertificate,
    lam: &LambdaDecomposition,
    lam2: Option<&LambdaDecomposition>,
    condition_numbers: BTreeMap<String, f64>,
) -> Result<IdentificationResult, IdentifyError> {
    let mut consistency = lam.consistency_residual;
    let mut zero_pattern = lam.zero_pattern_residual;
    if let Some(l2) = lam2 {
        consistency = consistency.max(l2.consistency_residual);
        zero_pattern = zero_pattern.max(l2.zero_pattern_residual);
    }
    Ok(IdentificationResult {
        strategy,
        tau_squared,
        certificate,
        diagnostics: Diagnostics {
            consistency_residual: consistency,
            zero_pattern_residual: zero_pattern,
            condition_numbers,
        },
    })
}
