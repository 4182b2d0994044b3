//! Constrained covariance updates from weighted scattering matrices.
//!
//! Given per-component scattering matrices `W_g` and effective sizes `n_g`,
//! each structure's update minimizes
//! `F({Σ_g}) = Σ_g [ n_g ln|Σ_g| + tr(W_g Σ_g⁻¹) ]`
//! subject to the structure's equality pattern. Most patterns have closed
//! forms; shared-orientation patterns (EVE, VVE) alternate exact
//! volume/shape steps with a majorization-minimization step on the shared
//! orientation, and the volume/shape couplings of VEI, VEV, and VEE use short
//! fixed-point iterations with exact block updates.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{
    decompose_matrix, geometric_mean, sym_eigen_desc, EigenDecomposition, ScatterSet, StructureId,
};
use crate::error::{Error, Result};

/// Stop the inner iteration once the objective improves by less than this.
const INNER_TOL: f64 = 1e-8;
/// Hard cap on inner iterations; exceeding it sets `inner_converged = false`.
const INNER_CAP: usize = 100;
/// Relative ridge applied to degenerate scattering matrices.
const SCATTER_RIDGE: f64 = 1e-8;

/// Result of a constrained covariance update.
#[derive(Debug, Clone)]
pub struct SigmaUpdate {
    /// Updated decompositions, one per component, satisfying the pattern.
    pub decompositions: Vec<EigenDecomposition>,
    /// False when an inner iteration hit its cap before the objective
    /// stabilized; the best iterate is still returned.
    pub inner_converged: bool,
    /// True when one or more scattering matrices needed a ridge.
    pub regularized: bool,
}

/// Minimizes the scatter objective over covariances constrained to
/// `structure`'s pattern.
///
/// `prev` supplies warm starts for the iterative patterns; pass the previous
/// iteration's decompositions during a fit so the inner search resumes from a
/// feasible point and the objective can only improve on it.
pub fn update_sigmas(
    structure: StructureId,
    scatter: &ScatterSet,
    prev: Option<&[EigenDecomposition]>,
) -> Result<SigmaUpdate> {
    let p = scatter.p();
    let mut w: Vec<DMatrix<f64>> = scatter.w().to_vec();
    let mut regularized = false;
    for g in 0..scatter.g() {
        // Fewer effective points than dimensions cannot determine a full-rank
        // scatter; ridge before anything downstream divides by it.
        if scatter.sizes()[g] < p as f64 {
            add_ridge(&mut w[g], g)?;
            regularized = true;
        }
    }
    let prev = prev.filter(|d| d.len() == scatter.g() && d.iter().all(|e| e.dim() == p));
    match run_update(structure, &w, scatter.sizes(), prev) {
        Ok((decompositions, inner_converged)) => Ok(SigmaUpdate {
            decompositions,
            inner_converged,
            regularized,
        }),
        Err(_) => {
            for (g, wg) in w.iter_mut().enumerate() {
                add_ridge(wg, g)?;
            }
            let (decompositions, inner_converged) =
                run_update(structure, &w, scatter.sizes(), prev)?;
            Ok(SigmaUpdate {
                decompositions,
                inner_converged,
                regularized: true,
            })
        }
    }
}

fn add_ridge(w: &mut DMatrix<f64>, component: usize) -> Result<()> {
    let p = w.nrows();
    let tr = w.trace();
    if !(tr > 0.0) {
        return Err(Error::DegenerateScatter { component });
    }
    let ridge = SCATTER_RIDGE * tr / p as f64;
    for i in 0..p {
        w[(i, i)] += ridge;
    }
    Ok(())
}

fn run_update(
    structure: StructureId,
    w: &[DMatrix<f64>],
    sizes: &[f64],
    prev: Option<&[EigenDecomposition]>,
) -> Result<(Vec<EigenDecomposition>, bool)> {
    let p = w[0].nrows();
    let n_total: f64 = sizes.iter().sum();
    match structure {
        StructureId::Eii => update_eii(w, sizes, p, n_total),
        StructureId::Vii => update_vii(w, sizes, p),
        StructureId::Eei => update_eei(w, p, n_total),
        StructureId::Vei => update_vei(w, sizes, p),
        StructureId::Evi => update_evi(w, p, n_total),
        StructureId::Vvi => update_vvi(w, sizes, p),
        StructureId::Eee => update_eee(w, n_total),
        StructureId::Vee => update_vee(w, sizes, p, prev),
        StructureId::Eve => update_shared_orientation(w, sizes, p, n_total, prev, true),
        StructureId::Eev => update_eev(w, p, n_total),
        StructureId::Vve => update_shared_orientation(w, sizes, p, n_total, prev, false),
        StructureId::Vev => update_vev(w, sizes, p),
        StructureId::Evv => update_evv(w, p, n_total),
        StructureId::Vvv => update_vvv(w, sizes),
    }
}

fn unit_shape(v: DVector<f64>) -> (f64, DVector<f64>) {
    let c = geometric_mean(&v);
    (c, v / c)
}

// ---- spherical family -------------------------------------------------

fn update_eii(
    w: &[DMatrix<f64>],
    _sizes: &[f64],
    p: usize,
    n_total: f64,
) -> Result<(Vec<EigenDecomposition>, bool)> {
    let lambda = w.iter().map(|m| m.trace()).sum::<f64>() / (p as f64 * n_total);
    let shared = EigenDecomposition::isotropic(p, lambda)?;
    Ok((vec![shared; w.len()], true))
}

fn update_vii(
    w: &[DMatrix<f64>],
    sizes: &[f64],
    p: usize,
) -> Result<(Vec<EigenDecomposition>, bool)> {
    let decs = w
        .iter()
        .zip(sizes)
        .map(|(m, n_g)| EigenDecomposition::isotropic(p, m.trace() / (p as f64 * n_g)))
        .collect::<Result<Vec<_>>>()?;
    Ok((decs, true))
}

// ---- diagonal family ---------------------------------------------------

fn update_eei(
    w: &[DMatrix<f64>],
    p: usize,
    n_total: f64,
) -> Result<(Vec<EigenDecomposition>, bool)> {
    let mut pooled = DVector::zeros(p);
    for m in w {
        pooled += m.diagonal();
    }
    let (lambda, delta) = unit_shape(pooled / n_total);
    let eye = DMatrix::identity(p, p);
    let shared = EigenDecomposition::new(lambda, delta, eye)?;
    Ok((vec![shared; w.len()], true))
}

fn update_evi(
    w: &[DMatrix<f64>],
    p: usize,
    n_total: f64,
) -> Result<(Vec<EigenDecomposition>, bool)> {
    let eye = DMatrix::<f64>::identity(p, p);
    let split: Vec<(f64, DVector<f64>)> = w.iter().map(|m| unit_shape(m.diagonal())).collect();
    let lambda = split.iter().map(|(c, _)| c).sum::<f64>() / n_total;
    let decs = split
        .into_iter()
        .map(|(_, delta)| EigenDecomposition::new(lambda, delta, eye.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok((decs, true))
}

fn update_vvi(
    w: &[DMatrix<f64>],
    sizes: &[f64],
    p: usize,
) -> Result<(Vec<EigenDecomposition>, bool)> {
    let eye = DMatrix::<f64>::identity(p, p);
    let decs = w
        .iter()
        .zip(sizes)
        .map(|(m, n_g)| {
            let (lambda, delta) = unit_shape(m.diagonal() / *n_g);
            EigenDecomposition::new(lambda, delta, eye.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((decs, true))
}

fn update_vei(
    w: &[DMatrix<f64>],
    sizes: &[f64],
    p: usize,
) -> Result<(Vec<EigenDecomposition>, bool)> {
    let diags: Vec<DVector<f64>> = w.iter().map(|m| m.diagonal()).collect();
    let mut pooled = DVector::zeros(p);
    for d in &diags {
        pooled += d;
    }
    let (_, mut delta) = unit_shape(pooled);
    let (lambdas, converged) = volume_shape_fixed_point(&diags, sizes, p, &mut delta);
    let eye = DMatrix::<f64>::identity(p, p);
    let decs = lambdas
        .into_iter()
        .map(|l| EigenDecomposition::new(l, delta.clone(), eye.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok((decs, converged))
}

/// Alternates exact updates of per-component volumes and a shared unit-
/// determinant shape against fixed per-component "diagonal loadings" `d_g`
/// (diagonals of W_g for VEI, eigenvalues of W_g for VEV). Returns the
/// volumes; the shape is updated in place.
fn volume_shape_fixed_point(
    loadings: &[DVector<f64>],
    sizes: &[f64],
    p: usize,
    delta: &mut DVector<f64>,
) -> (Vec<f64>, bool) {
    let pf = p as f64;
    let mut lambdas = vec![1.0; loadings.len()];
    let mut prev_obj = f64::INFINITY;
    let mut converged = false;
    for iter in 0..=INNER_CAP {
        for (g, d) in loadings.iter().enumerate() {
            let weighted: f64 = d.iter().zip(delta.iter()).map(|(x, dl)| x / dl).sum();
            lambdas[g] = weighted / (sizes[g] * pf);
        }
        let obj: f64 = loadings
            .iter()
            .enumerate()
            .map(|(g, d)| {
                sizes[g] * pf * lambdas[g].ln()
                    + d.iter()
                        .zip(delta.iter())
                        .map(|(x, dl)| x / (lambdas[g] * dl))
                        .sum::<f64>()
            })
            .sum();
        if prev_obj - obj < INNER_TOL && iter > 0 {
            converged = true;
            break;
        }
        if iter == INNER_CAP {
            break;
        }
        prev_obj = obj;
        let mut pooled = DVector::zeros(p);
        for (g, d) in loadings.iter().enumerate() {
            pooled += d / lambdas[g];
        }
        let (_, new_delta) = unit_shape(pooled);
        *delta = new_delta;
    }
    (lambdas, converged)
}

// ---- general family ----------------------------------------------------

fn update_eee(w: &[DMatrix<f64>], n_total: f64) -> Result<(Vec<EigenDecomposition>, bool)> {
    let mut pooled = DMatrix::zeros(w[0].nrows(), w[0].ncols());
    for m in w {
        pooled += m;
    }
    pooled /= n_total;
    let shared = decompose_matrix(&pooled)?;
    Ok((vec![shared; w.len()], true))
}

fn update_vvv(w: &[DMatrix<f64>], sizes: &[f64]) -> Result<(Vec<EigenDecomposition>, bool)> {
    let decs = w
        .iter()
        .zip(sizes)
        .map(|(m, n_g)| decompose_matrix(&(m / *n_g)))
        .collect::<Result<Vec<_>>>()?;
    Ok((decs, true))
}

fn update_eev(
    w: &[DMatrix<f64>],
    p: usize,
    n_total: f64,
) -> Result<(Vec<EigenDecomposition>, bool)> {
    let eigs: Vec<(DVector<f64>, DMatrix<f64>)> = w.iter().map(sym_eigen_desc).collect();
    ensure_positive_values(&eigs)?;
    let mut pooled = DVector::zeros(p);
    for (vals, _) in &eigs {
        pooled += vals;
    }
    let (c, delta) = unit_shape(pooled);
    let lambda = c / n_total;
    let decs = eigs
        .into_iter()
        .map(|(_, vecs)| EigenDecomposition::new(lambda, delta.clone(), vecs))
        .collect::<Result<Vec<_>>>()?;
    Ok((decs, true))
}

fn update_vev(
    w: &[DMatrix<f64>],
    sizes: &[f64],
    p: usize,
) -> Result<(Vec<EigenDecomposition>, bool)> {
    let eigs: Vec<(DVector<f64>, DMatrix<f64>)> = w.iter().map(sym_eigen_desc).collect();
    ensure_positive_values(&eigs)?;
    let loadings: Vec<DVector<f64>> = eigs.iter().map(|(vals, _)| vals.clone()).collect();
    let mut pooled = DVector::zeros(p);
    for d in &loadings {
        pooled += d;
    }
    let (_, mut delta) = unit_shape(pooled);
    let (lambdas, converged) = volume_shape_fixed_point(&loadings, sizes, p, &mut delta);
    let decs = eigs
        .into_iter()
        .zip(lambdas)
        .map(|((_, vecs), l)| EigenDecomposition::new(l, delta.clone(), vecs))
        .collect::<Result<Vec<_>>>()?;
    Ok((decs, converged))
}

fn update_evv(
    w: &[DMatrix<f64>],
    _p: usize,
    n_total: f64,
) -> Result<(Vec<EigenDecomposition>, bool)> {
    let eigs: Vec<(DVector<f64>, DMatrix<f64>)> = w.iter().map(sym_eigen_desc).collect();
    ensure_positive_values(&eigs)?;
    let split: Vec<(f64, DVector<f64>, DMatrix<f64>)> = eigs
        .into_iter()
        .map(|(vals, vecs)| {
            let (c, delta) = unit_shape(vals);
            (c, delta, vecs)
        })
        .collect();
    let lambda = split.iter().map(|(c, _, _)| c).sum::<f64>() / n_total;
    let decs = split
        .into_iter()
        .map(|(_, delta, vecs)| EigenDecomposition::new(lambda, delta, vecs))
        .collect::<Result<Vec<_>>>()?;
    Ok((decs, true))
}

fn update_vee(
    w: &[DMatrix<f64>],
    sizes: &[f64],
    p: usize,
    prev: Option<&[EigenDecomposition]>,
) -> Result<(Vec<EigenDecomposition>, bool)> {
    let pf = p as f64;
    let g = w.len();
    let mut lambdas: Vec<f64> = match prev {
        Some(decs) => decs.iter().map(|d| d.lambda()).collect(),
        None => w
            .iter()
            .zip(sizes)
            .map(|(m, n_g)| m.trace() / (pf * n_g))
            .collect(),
    };
    let mut shared = DMatrix::<f64>::identity(p, p);
    let mut prev_obj = f64::INFINITY;
    let mut converged = false;
    for iter in 0..=INNER_CAP {
        let mut pooled = DMatrix::zeros(p, p);
        for (m, l) in w.iter().zip(&lambdas) {
            pooled += m / *l;
        }
        let chol = Cholesky::new(pooled.clone()).ok_or(Error::NotPositiveDefinite)?;
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        shared = pooled / (log_det / pf).exp();
        let chol_c = Cholesky::new(shared.clone()).ok_or(Error::NotPositiveDefinite)?;
        let traces: Vec<f64> = w.iter().map(|m| chol_c.solve(m).trace()).collect();
        for (l, (tr, n_g)) in lambdas.iter_mut().zip(traces.iter().zip(sizes)) {
            *l = tr / (pf * n_g);
        }
        let obj: f64 = (0..g)
            .map(|k| sizes[k] * pf * lambdas[k].ln() + traces[k] / lambdas[k])
            .sum();
        if prev_obj - obj < INNER_TOL && iter > 0 {
            converged = true;
            break;
        }
        if iter == INNER_CAP {
            break;
        }
        prev_obj = obj;
    }
    let base = decompose_matrix(&shared)?;
    let decs = lambdas
        .into_iter()
        .map(|l| {
            EigenDecomposition::new(l * base.lambda(), base.delta().clone(), base.gamma().clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((decs, converged))
}

/// EVE (`equal_volume = true`) and VVE: shared orientation with free shapes.
/// Volumes and shapes have exact block updates; the orientation moves by a
/// majorization-minimization step per sweep and never increases its
/// subproblem objective.
fn update_shared_orientation(
    w: &[DMatrix<f64>],
    sizes: &[f64],
    p: usize,
    n_total: f64,
    prev: Option<&[EigenDecomposition]>,
    equal_volume: bool,
) -> Result<(Vec<EigenDecomposition>, bool)> {
    let pf = p as f64;
    let g = w.len();
    let mut gamma = match prev {
        Some(decs) => decs[0].gamma().clone(),
        None => {
            let mut pooled = DMatrix::zeros(p, p);
            for m in w {
                pooled += m;
            }
            sym_eigen_desc(&pooled).1
        }
    };
    let mut shapes: Vec<DVector<f64>> = vec![DVector::repeat(p, 1.0); g];
    let mut lambdas = vec![1.0; g];
    let mut prev_obj = f64::INFINITY;
    let mut converged = false;
    for iter in 0..=INNER_CAP {
        let mut vols = Vec::with_capacity(g);
        for k in 0..g {
            let t = (gamma.transpose() * &w[k] * &gamma).diagonal();
            if t.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::DegenerateScatter { component: k });
            }
            let (c, shape) = unit_shape(t);
            vols.push(c);
            shapes[k] = shape;
        }
        let obj;
        if equal_volume {
            let lambda = vols.iter().sum::<f64>() / n_total;
            lambdas = vec![lambda; g];
            obj = n_total * pf * lambda.ln()
                + vols.iter().map(|c| pf * c / lambda).sum::<f64>();
        } else {
            for k in 0..g {
                lambdas[k] = vols[k] / sizes[k];
            }
            obj = (0..g)
                .map(|k| sizes[k] * pf * (lambdas[k].ln() + 1.0))
                .sum();
        }
        if prev_obj - obj < INNER_TOL && iter > 0 {
            converged = true;
            break;
        }
        if iter == INNER_CAP {
            break;
        }
        prev_obj = obj;
        // Orientation step on Σ_g tr(ΓᵀA_gΓ Δ_g⁻¹) with A_g = W_g
        // (volume factors are constant inside this block).
        if p > 1 {
            let scaled: Vec<DMatrix<f64>> = if equal_volume {
                w.to_vec()
            } else {
                w.iter().zip(&lambdas).map(|(m, l)| m / *l).collect()
            };
            let dinv: Vec<DVector<f64>> = shapes
                .iter()
                .map(|s| DVector::from_iterator(p, s.iter().map(|x| 1.0 / x)))
                .collect();
            let candidate = mm_orientation_step(&scaled, &dinv, &gamma);
            if orientation_objective(&scaled, &dinv, &candidate)
                <= orientation_objective(&scaled, &dinv, &gamma)
            {
                gamma = candidate;
            }
        }
    }
    let decs = (0..g)
        .map(|k| EigenDecomposition::new(lambdas[k], shapes[k].clone(), gamma.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok((decs, converged))
}

fn orientation_objective(a: &[DMatrix<f64>], dinv: &[DVector<f64>], gamma: &DMatrix<f64>) -> f64 {
    let p = gamma.nrows();
    a.iter()
        .zip(dinv)
        .map(|(m, d)| {
            let rotated = gamma.transpose() * m * gamma;
            (0..p).map(|j| rotated[(j, j)] * d[j]).sum::<f64>()
        })
        .sum()
}

/// One majorization-minimization step for
/// `min_Γ Σ_g tr(Γᵀ A_g Γ diag(dinv_g))` over orthogonal Γ.
///
/// Each concave term `tr(Γᵀ(A_g − ω_g I)Γ D_g)` (with `ω_g` the largest
/// eigenvalue of `A_g`) is majorized by its tangent at the current Γ, leaving
/// a linear problem solved exactly by a polar factor from the SVD.
fn mm_orientation_step(
    a: &[DMatrix<f64>],
    dinv: &[DVector<f64>],
    gamma: &DMatrix<f64>,
) -> DMatrix<f64> {
    let p = gamma.nrows();
    let mut f = DMatrix::<f64>::zeros(p, p);
    for (m, d) in a.iter().zip(dinv) {
        let omega = m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut shifted = m.clone();
        for i in 0..p {
            shifted[(i, i)] -= omega;
        }
        f += shifted * gamma * DMatrix::from_diagonal(d);
    }
    let svd = f.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return gamma.clone();
    };
    -(u * v_t)
}

fn ensure_positive_values(eigs: &[(DVector<f64>, DMatrix<f64>)]) -> Result<()> {
    for (g, (vals, _)) in eigs.iter().enumerate() {
        if vals.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::DegenerateScatter { component: g });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{pattern_satisfied, scatter_objective};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_scatter(rng: &mut StdRng, g: usize, p: usize) -> ScatterSet {
        let mut ws = Vec::new();
        let mut sizes = Vec::new();
        for _ in 0..g {
            let k = p + 3;
            let a = DMatrix::from_fn(p, k, |_, _| rng.gen_range(-1.0..1.0));
            let w = &a * a.transpose() * rng.gen_range(0.5..4.0);
            ws.push(w);
            sizes.push(rng.gen_range(5.0..60.0));
        }
        ScatterSet::new(ws, sizes).unwrap()
    }

    #[test]
    fn vvv_is_scatter_over_size() {
        let mut rng = StdRng::seed_from_u64(7);
        let scatter = random_scatter(&mut rng, 2, 3);
        let update = update_sigmas(StructureId::Vvv, &scatter, None).unwrap();
        for (g, dec) in update.decompositions.iter().enumerate() {
            let expected = &scatter.w()[g] / scatter.sizes()[g];
            assert_relative_eq!((dec.matrix() - expected).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn eee_is_pooled_scatter_over_total_size() {
        let mut rng = StdRng::seed_from_u64(8);
        let scatter = random_scatter(&mut rng, 3, 2);
        let update = update_sigmas(StructureId::Eee, &scatter, None).unwrap();
        let pooled = (scatter.w()[0].clone() + &scatter.w()[1] + &scatter.w()[2])
            / scatter.total_size();
        assert_relative_eq!(
            (update.decompositions[0].matrix() - pooled).norm(),
            0.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn eii_matches_one_dimensional_grid_search() {
        let mut rng = StdRng::seed_from_u64(9);
        let scatter = random_scatter(&mut rng, 2, 2);
        let update = update_sigmas(StructureId::Eii, &scatter, None).unwrap();
        let lambda_hat = update.decompositions[0].lambda();
        let expected =
            scatter.w().iter().map(|m| m.trace()).sum::<f64>() / (2.0 * scatter.total_size());
        assert_relative_eq!(lambda_hat, expected, epsilon = 1e-12);

        // Grid oracle: F restricted to λI must be minimized at λ̂.
        let f_at = |l: f64| {
            let decs = vec![EigenDecomposition::isotropic(2, l).unwrap(); 2];
            scatter_objective(&scatter, &decs)
        };
        let f_hat = f_at(lambda_hat);
        for step in 1..=200 {
            let l = lambda_hat * (0.5 + step as f64 / 200.0);
            assert!(f_at(l) >= f_hat - 1e-9);
        }
    }

    #[test]
    fn all_structures_return_their_exact_pattern() {
        let mut rng = StdRng::seed_from_u64(10);
        for trial in 0..5 {
            let scatter = random_scatter(&mut rng, 3, if trial % 2 == 0 { 2 } else { 3 });
            for s in StructureId::ALL {
                let update = update_sigmas(s, &scatter, None).unwrap();
                assert!(
                    pattern_satisfied(s, &update.decompositions),
                    "{s} violated its pattern"
                );
                assert_eq!(update.decompositions.len(), scatter.g());
            }
        }
    }

    #[test]
    fn objective_nesting_holds_for_every_structure() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..10 {
            let scatter = random_scatter(&mut rng, 2, 2);
            let f_vvv = scatter_objective(
                &scatter,
                &update_sigmas(StructureId::Vvv, &scatter, None)
                    .unwrap()
                    .decompositions,
            );
            let f_eii = scatter_objective(
                &scatter,
                &update_sigmas(StructureId::Eii, &scatter, None)
                    .unwrap()
                    .decompositions,
            );
            for s in StructureId::ALL {
                let f_s = scatter_objective(
                    &scatter,
                    &update_sigmas(s, &scatter, None).unwrap().decompositions,
                );
                assert!(
                    f_vvv <= f_s + 1e-7 && f_s <= f_eii + 1e-7,
                    "nesting violated for {s}: VVV {f_vvv:.6} <= {f_s:.6} <= EII {f_eii:.6}"
                );
            }
        }
    }

    #[test]
    fn variable_orientation_gammas_diagonalize_their_scatter() {
        let mut rng = StdRng::seed_from_u64(12);
        let scatter = random_scatter(&mut rng, 2, 3);
        for s in [StructureId::Eev, StructureId::Vev] {
            let update = update_sigmas(s, &scatter, None).unwrap();
            for (g, dec) in update.decompositions.iter().enumerate() {
                let rotated = dec.gamma().transpose() * &scatter.w()[g] * dec.gamma();
                for i in 0..3 {
                    for j in 0..3 {
                        if i != j {
                            assert!(
                                rotated[(i, j)].abs() < 1e-8 * rotated.trace(),
                                "{s}: off-diagonal {i},{j} = {}",
                                rotated[(i, j)]
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn iterative_structures_beat_their_tighter_relaxations() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..10 {
            let scatter = random_scatter(&mut rng, 2, 2);
            let objective_of = |s: StructureId| {
                scatter_objective(
                    &scatter,
                    &update_sigmas(s, &scatter, None).unwrap().decompositions,
                )
            };
            // Each feasible set contains the one of the more constrained
            // structure, so its optimum can only be lower.
            assert!(objective_of(StructureId::Eve) <= objective_of(StructureId::Eee) + 1e-6);
            assert!(objective_of(StructureId::Vee) <= objective_of(StructureId::Eee) + 1e-6);
            assert!(objective_of(StructureId::Vve) <= objective_of(StructureId::Vee) + 1e-6);
            assert!(objective_of(StructureId::Evv) <= objective_of(StructureId::Eev) + 1e-6);
        }
    }

    #[test]
    fn warm_start_never_worsens_the_objective() {
        let mut rng = StdRng::seed_from_u64(14);
        let scatter = random_scatter(&mut rng, 3, 2);
        for s in [
            StructureId::Eve,
            StructureId::Vve,
            StructureId::Vee,
            StructureId::Evv,
        ] {
            let cold = update_sigmas(s, &scatter, None).unwrap();
            let f_cold = scatter_objective(&scatter, &cold.decompositions);
            let warm = update_sigmas(s, &scatter, Some(&cold.decompositions)).unwrap();
            let f_warm = scatter_objective(&scatter, &warm.decompositions);
            assert!(f_warm <= f_cold + 1e-8, "{s}: warm {f_warm} vs cold {f_cold}");
        }
    }

    #[test]
    fn tiny_components_are_ridged_not_fatal() {
        // One component with effective size below p.
        let w1 = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0]);
        let w2 = DMatrix::from_row_slice(2, 2, &[0.01, 0.0, 0.0, 0.0]);
        let scatter = ScatterSet::new(vec![w1, w2], vec![40.0, 1.5]).unwrap();
        let update = update_sigmas(StructureId::Vvv, &scatter, None).unwrap();
        assert!(update.regularized);
        assert!(update.decompositions[1].lambda() > 0.0);
    }
}
