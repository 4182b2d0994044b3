//! Eigen-decomposed covariance matrices and the fourteen constraint patterns.
//!
//! Every component covariance is carried as `Σ = λ Γ Δ Γᵀ`, where the scalar
//! `λ = |Σ|^{1/p}` controls volume, the unit-determinant diagonal `Δ` controls
//! shape, and the orthogonal `Γ` controls orientation. Constraining each of
//! the three factors to be shared across components, spherical/axis-aligned,
//! or free yields fourteen named structures, from the one-parameter `EII`
//! (shared spherical) to the unconstrained `VVV`.

mod update;

pub use update::{update_sigmas, SigmaUpdate};

use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gaussian::CovMatrix;

/// How a covariance factor varies across mixture components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorConstraint {
    /// One shared value for all components.
    Equal,
    /// A free value per component.
    Variable,
    /// Fixed to the trivial factor (identity shape or axis-aligned
    /// orientation).
    Fixed,
}

/// One of the fourteen covariance structure codes.
///
/// The three letters give the constraint on volume, shape, and orientation in
/// that order: `E` shared across components, `V` free per component, `I`
/// trivial (spherical shape / axis-aligned orientation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StructureId {
    Eii,
    Vii,
    Eei,
    Vei,
    Evi,
    Vvi,
    Eee,
    Vee,
    Eve,
    Eev,
    Vve,
    Vev,
    Evv,
    Vvv,
}

impl StructureId {
    /// All fourteen structures, least to most parameterized family-wise.
    pub const ALL: [StructureId; 14] = [
        StructureId::Eii,
        StructureId::Vii,
        StructureId::Eei,
        StructureId::Vei,
        StructureId::Evi,
        StructureId::Vvi,
        StructureId::Eee,
        StructureId::Vee,
        StructureId::Eve,
        StructureId::Eev,
        StructureId::Vve,
        StructureId::Vev,
        StructureId::Evv,
        StructureId::Vvv,
    ];

    /// The three-letter code, e.g. `"EVE"`.
    pub fn code(self) -> &'static str {
        match self {
            StructureId::Eii => "EII",
            StructureId::Vii => "VII",
            StructureId::Eei => "EEI",
            StructureId::Vei => "VEI",
            StructureId::Evi => "EVI",
            StructureId::Vvi => "VVI",
            StructureId::Eee => "EEE",
            StructureId::Vee => "VEE",
            StructureId::Eve => "EVE",
            StructureId::Eev => "EEV",
            StructureId::Vve => "VVE",
            StructureId::Vev => "VEV",
            StructureId::Evv => "EVV",
            StructureId::Vvv => "VVV",
        }
    }

    /// Volume constraint (first letter).
    pub fn volume(self) -> FactorConstraint {
        match self.code().as_bytes()[0] {
            b'E' => FactorConstraint::Equal,
            _ => FactorConstraint::Variable,
        }
    }

    /// Shape constraint (second letter).
    pub fn shape(self) -> FactorConstraint {
        match self.code().as_bytes()[1] {
            b'E' => FactorConstraint::Equal,
            b'V' => FactorConstraint::Variable,
            _ => FactorConstraint::Fixed,
        }
    }

    /// Orientation constraint (third letter).
    pub fn orientation(self) -> FactorConstraint {
        match self.code().as_bytes()[2] {
            b'E' => FactorConstraint::Equal,
            b'V' => FactorConstraint::Variable,
            _ => FactorConstraint::Fixed,
        }
    }

    /// Number of free parameters in the component covariances Σ₁, …, Σ_G.
    pub fn sigma_param_count(self, g: usize, p: usize) -> usize {
        let rot = p * (p - 1) / 2;
        match self {
            StructureId::Eii => 1,
            StructureId::Vii => g,
            StructureId::Eei => p,
            StructureId::Vei => g + p - 1,
            StructureId::Evi => 1 + g * (p - 1),
            StructureId::Vvi => g * p,
            StructureId::Eee => p * (p + 1) / 2,
            StructureId::Vee => g + p - 1 + rot,
            StructureId::Eve => 1 + g * (p - 1) + rot,
            StructureId::Eev => p + g * rot,
            StructureId::Vve => g * p + rot,
            StructureId::Vev => g + p - 1 + g * rot,
            StructureId::Evv => 1 + g * (p - 1) + g * rot,
            StructureId::Vvv => g * p * (p + 1) / 2,
        }
    }

    /// Whether the constrained covariance update needs an inner iteration
    /// (shared-orientation or shared-shape couplings without a closed form).
    pub fn is_iterative(self) -> bool {
        matches!(
            self,
            StructureId::Vei
                | StructureId::Vev
                | StructureId::Vee
                | StructureId::Eve
                | StructureId::Vve
        )
    }
}

impl fmt::Display for StructureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for StructureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        StructureId::ALL
            .into_iter()
            .find(|c| c.code() == up)
            .ok_or_else(|| Error::InvalidParameter {
                name: "structure",
                reason: format!("unknown structure code `{s}`"),
            })
    }
}

/// The volume/shape/orientation factorization of one covariance matrix.
///
/// Invariants enforced at construction: `lambda > 0`, all shape entries
/// positive with product 1 (within 1e-8), and `gamma` orthogonal (within
/// 1e-10). [`decompose`] additionally returns the shape sorted in decreasing
/// order; decompositions produced by the constrained updates may instead keep
/// the shape in the basis of a shared orientation, where sorting would break
/// the sharing.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    lambda: f64,
    delta: DVector<f64>,
    gamma: DMatrix<f64>,
}

impl EigenDecomposition {
    /// Validates the factor invariants.
    pub fn new(lambda: f64, delta: DVector<f64>, gamma: DMatrix<f64>) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("volume must be positive and finite, got {lambda}"),
            });
        }
        let p = delta.len();
        if p == 0 {
            return Err(Error::EmptyData);
        }
        if gamma.nrows() != p || gamma.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: gamma.nrows().max(gamma.ncols()),
            });
        }
        if delta.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: "shape entries must be positive and finite".into(),
            });
        }
        let log_prod: f64 = delta.iter().map(|d| d.ln()).sum();
        if (log_prod.exp() - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!(
                    "shape determinant must be 1, got {}",
                    log_prod.exp()
                ),
            });
        }
        let gtg = gamma.transpose() * &gamma;
        let dev = (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .map(|(i, j)| (gtg[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0f64, f64::max);
        if dev > 1e-10 {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("orientation must be orthogonal (deviation {dev:.3e})"),
            });
        }
        Ok(Self {
            lambda,
            delta,
            gamma,
        })
    }

    /// A spherical decomposition `λ I`.
    pub fn isotropic(p: usize, lambda: f64) -> Result<Self> {
        Self::new(lambda, DVector::repeat(p, 1.0), DMatrix::identity(p, p))
    }

    /// Volume λ.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Shape diagonal Δ (unit determinant).
    pub fn delta(&self) -> &DVector<f64> {
        &self.delta
    }

    /// Orientation Γ.
    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// Dimension p.
    pub fn dim(&self) -> usize {
        self.delta.len()
    }

    /// The composed matrix λ Γ Δ Γᵀ, symmetrized against round-off.
    pub fn matrix(&self) -> DMatrix<f64> {
        let scaled = &self.gamma * DMatrix::from_diagonal(&(&self.delta * self.lambda));
        let m = scaled * self.gamma.transpose();
        symmetrize(m)
    }

    /// Composes into a factorized covariance matrix.
    pub fn compose(&self) -> Result<CovMatrix> {
        CovMatrix::new(self.matrix())
    }
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let p = m.nrows();
    for i in 0..p {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

/// Symmetric eigen-pairs sorted by decreasing eigenvalue with deterministic
/// tie-breaking: each eigenvector's first non-negligible entry is made
/// positive, and equal eigenvalues order their vectors lexicographically
/// (descending).
pub(crate) fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let p = m.nrows();
    let eig = symmetrize(m.clone()).symmetric_eigen();
    let mut cols: Vec<(f64, DVector<f64>)> = (0..p)
        .map(|j| {
            let mut col = eig.eigenvectors.column(j).clone_owned();
            if let Some(first) = col.iter().find(|e| e.abs() > 1e-12) {
                if *first < 0.0 {
                    col.neg_mut();
                }
            }
            (eig.eigenvalues[j], col)
        })
        .collect();
    let scale = cols
        .iter()
        .map(|(v, _)| v.abs())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    cols.sort_by(|(va, ca), (vb, cb)| {
        if (va - vb).abs() > 1e-12 * scale {
            vb.partial_cmp(va).unwrap()
        } else {
            // Tie: lexicographically descending columns.
            cb.iter()
                .zip(ca.iter())
                .map(|(b, a)| b.partial_cmp(a).unwrap())
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        }
    });
    let values = DVector::from_iterator(p, cols.iter().map(|(v, _)| *v));
    let vectors = DMatrix::from_columns(&cols.iter().map(|(_, c)| c.clone()).collect::<Vec<_>>());
    (values, vectors)
}

/// Geometric mean of a positive vector, computed in log space.
pub(crate) fn geometric_mean(v: &DVector<f64>) -> f64 {
    (v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64).exp()
}

pub(crate) fn decompose_matrix(m: &DMatrix<f64>) -> Result<EigenDecomposition> {
    let (values, vectors) = sym_eigen_desc(m);
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    let lambda = geometric_mean(&values);
    let delta = values / lambda;
    EigenDecomposition::new(lambda, delta, vectors)
}

/// Splits a covariance matrix into volume, shape, and orientation.
///
/// The returned shape is sorted in decreasing order and eigenvector signs are
/// canonicalized, so `decompose(compose(d))` reproduces `d` whenever `d` is
/// itself in this canonical form.
pub fn decompose(sigma: &CovMatrix) -> Result<EigenDecomposition> {
    decompose_matrix(sigma.matrix())
}

/// A set of weighted scattering matrices: one symmetric PSD `W_g` plus an
/// effective size `n_g` per component. This is the sufficient statistic the
/// constrained covariance updates consume.
#[derive(Debug, Clone)]
pub struct ScatterSet {
    w: Vec<DMatrix<f64>>,
    sizes: Vec<f64>,
}

impl ScatterSet {
    pub fn new(w: Vec<DMatrix<f64>>, sizes: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::EmptyData);
        }
        if w.len() != sizes.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                found: sizes.len(),
            });
        }
        let p = w[0].nrows();
        if p == 0 {
            return Err(Error::EmptyData);
        }
        for (g, m) in w.iter().enumerate() {
            if m.nrows() != p || m.ncols() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: m.nrows().max(m.ncols()),
                });
            }
            let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
            for i in 0..p {
                if m[(i, i)] < -1e-10 * scale {
                    return Err(Error::DegenerateScatter { component: g });
                }
                for j in 0..i {
                    if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                        return Err(Error::NotSymmetric {
                            max_asymmetry: (m[(i, j)] - m[(j, i)]).abs() / scale,
                        });
                    }
                }
            }
        }
        if sizes.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sizes",
                reason: "effective sizes must be positive and finite".into(),
            });
        }
        Ok(Self { w, sizes })
    }

    /// Number of components G.
    pub fn g(&self) -> usize {
        self.w.len()
    }

    /// Dimension p.
    pub fn p(&self) -> usize {
        self.w[0].nrows()
    }

    /// The scattering matrices.
    pub fn w(&self) -> &[DMatrix<f64>] {
        &self.w
    }

    /// The effective sizes.
    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    /// Total effective size Σ_g n_g.
    pub fn total_size(&self) -> f64 {
        self.sizes.iter().sum()
    }
}

/// The covariance-update objective
/// `F({Σ_g}) = Σ_g [ n_g ln|Σ_g| + tr(W_g Σ_g⁻¹) ]`,
/// evaluated through the factorized form (no matrix inversion).
pub fn scatter_objective(scatter: &ScatterSet, decs: &[EigenDecomposition]) -> f64 {
    let p = scatter.p() as f64;
    let mut total = 0.0;
    for (g, dec) in decs.iter().enumerate() {
        let w = &scatter.w()[g];
        let n_g = scatter.sizes()[g];
        // tr(W Σ⁻¹) = Σ_j (Γᵀ W Γ)_jj / (λ δ_j)
        let rotated = dec.gamma().transpose() * w * dec.gamma();
        let trace: f64 = (0..dec.dim())
            .map(|j| rotated[(j, j)] / (dec.lambda() * dec.delta()[j]))
            .sum();
        total += n_g * p * dec.lambda().ln() + trace;
    }
    total
}

/// Checks that a parameter set satisfies a structure's equality pattern
/// exactly: shared factors must be bit-identical across components, spherical
/// shapes exactly one, and axis-aligned orientations exactly the identity.
pub fn pattern_satisfied(structure: StructureId, decs: &[EigenDecomposition]) -> bool {
    if decs.is_empty() {
        return false;
    }
    let first = &decs[0];
    let volume_ok = match structure.volume() {
        FactorConstraint::Equal => decs.iter().all(|d| d.lambda() == first.lambda()),
        _ => true,
    };
    let shape_ok = match structure.shape() {
        FactorConstraint::Equal => decs.iter().all(|d| d.delta() == first.delta()),
        FactorConstraint::Fixed => decs
            .iter()
            .all(|d| d.delta().iter().all(|x| *x == 1.0)),
        FactorConstraint::Variable => true,
    };
    let orientation_ok = match structure.orientation() {
        FactorConstraint::Equal => decs.iter().all(|d| d.gamma() == first.gamma()),
        FactorConstraint::Fixed => {
            let eye = DMatrix::<f64>::identity(first.dim(), first.dim());
            // Spherical structures are orientation-free; anything else marked
            // axis-aligned must compose to a diagonal matrix, which the
            // updates express with an identity orientation.
            structure.shape() == FactorConstraint::Fixed || decs.iter().all(|d| *d.gamma() == eye)
        }
        FactorConstraint::Variable => true,
    };
    volume_ok && shape_ok && orientation_ok
}

/// Projects arbitrary decompositions onto a structure's constraint pattern by
/// averaging whichever factors the pattern shares. Used to canonicalize warm
/// starts; the result always passes [`pattern_satisfied`].
pub fn project_structure(
    structure: StructureId,
    decs: &[EigenDecomposition],
) -> Result<Vec<EigenDecomposition>> {
    if decs.is_empty() {
        return Err(Error::EmptyData);
    }
    let p = decs[0].dim();
    let g = decs.len();
    if decs.iter().any(|d| d.dim() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: decs.iter().map(|d| d.dim()).find(|d| *d != p).unwrap(),
        });
    }
    let mean_lambda = decs.iter().map(|d| d.lambda()).sum::<f64>() / g as f64;

    let out = match structure {
        StructureId::Vvv => decs.to_vec(),
        StructureId::Eii => {
            let shared = EigenDecomposition::isotropic(p, mean_lambda)?;
            vec![shared; g]
        }
        StructureId::Vii => decs
            .iter()
            .map(|d| EigenDecomposition::isotropic(p, d.lambda()))
            .collect::<Result<Vec<_>>>()?,
        StructureId::Eei | StructureId::Vei | StructureId::Evi | StructureId::Vvi => {
            // Nearest diagonal matrix is the diagonal of the composed matrix.
            let eye = DMatrix::identity(p, p);
            let diags: Vec<DVector<f64>> =
                decs.iter().map(|d| d.matrix().diagonal()).collect();
            let vols: Vec<f64> = diags.iter().map(geometric_mean).collect();
            let shapes: Vec<DVector<f64>> = diags
                .iter()
                .zip(&vols)
                .map(|(b, c)| b / *c)
                .collect();
            let mean_vol = vols.iter().sum::<f64>() / g as f64;
            let mean_shape = {
                let mut acc = DVector::zeros(p);
                for s in &shapes {
                    acc += s;
                }
                acc /= g as f64;
                let c = geometric_mean(&acc);
                acc / c
            };
            (0..g)
                .map(|k| {
                    let lambda = match structure.volume() {
                        FactorConstraint::Equal => mean_vol,
                        _ => vols[k],
                    };
                    let delta = match structure.shape() {
                        FactorConstraint::Equal => mean_shape.clone(),
                        _ => shapes[k].clone(),
                    };
                    EigenDecomposition::new(lambda, delta, eye.clone())
                })
                .collect::<Result<Vec<_>>>()?
        }
        StructureId::Eee => {
            let mut pooled = DMatrix::zeros(p, p);
            for d in decs {
                pooled += d.matrix();
            }
            pooled /= g as f64;
            let shared = decompose_matrix(&pooled)?;
            vec![shared; g]
        }
        StructureId::Vee => {
            let mut pooled = DMatrix::zeros(p, p);
            for d in decs {
                pooled += d.matrix() / d.lambda();
            }
            pooled /= g as f64;
            let shared = decompose_matrix(&pooled)?;
            decs.iter()
                .map(|d| {
                    EigenDecomposition::new(
                        d.lambda() * shared.lambda(),
                        shared.delta().clone(),
                        shared.gamma().clone(),
                    )
                })
                .collect::<Result<Vec<_>>>()?
        }
        StructureId::Eve | StructureId::Vve => {
            let mut pooled = DMatrix::zeros(p, p);
            for d in decs {
                pooled += d.matrix();
            }
            let gamma = decompose_matrix(&pooled)?.gamma().clone();
            let mut vols = Vec::with_capacity(g);
            let mut shapes = Vec::with_capacity(g);
            for d in decs {
                let t = (gamma.transpose() * d.matrix() * &gamma).diagonal();
                let c = geometric_mean(&t);
                vols.push(c);
                shapes.push(t / c);
            }
            let mean_vol = vols.iter().sum::<f64>() / g as f64;
            (0..g)
                .map(|k| {
                    let lambda = if structure == StructureId::Eve {
                        mean_vol
                    } else {
                        vols[k]
                    };
                    EigenDecomposition::new(lambda, shapes[k].clone(), gamma.clone())
                })
                .collect::<Result<Vec<_>>>()?
        }
        StructureId::Eev | StructureId::Vev => {
            let canonical: Vec<EigenDecomposition> = decs
                .iter()
                .map(|d| decompose_matrix(&d.matrix()))
                .collect::<Result<Vec<_>>>()?;
            let mean_shape = {
                let mut acc = DVector::zeros(p);
                for d in &canonical {
                    acc += d.delta();
                }
                acc /= g as f64;
                let c = geometric_mean(&acc);
                acc / c
            };
            canonical
                .iter()
                .map(|d| {
                    let lambda = if structure == StructureId::Eev {
                        mean_lambda
                    } else {
                        d.lambda()
                    };
                    EigenDecomposition::new(lambda, mean_shape.clone(), d.gamma().clone())
                })
                .collect::<Result<Vec<_>>>()?
        }
        StructureId::Evv => decs
            .iter()
            .map(|d| {
                EigenDecomposition::new(mean_lambda, d.delta().clone(), d.gamma().clone())
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table2_gamma() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[3.0f64.sqrt() / 2.0, 0.5, -0.5, 3.0f64.sqrt() / 2.0],
        )
    }

    #[test]
    fn codes_round_trip_and_cover_all_fourteen() {
        assert_eq!(StructureId::ALL.len(), 14);
        for s in StructureId::ALL {
            assert_eq!(s.code().parse::<StructureId>().unwrap(), s);
            assert_eq!(s.code().to_lowercase().parse::<StructureId>().unwrap(), s);
        }
        assert!("XYZ".parse::<StructureId>().is_err());
    }

    #[test]
    fn sigma_param_counts_match_the_catalogue() {
        assert_eq!(StructureId::Vvv.sigma_param_count(3, 2), 9);
        assert_eq!(StructureId::Eii.sigma_param_count(5, 7), 1);
        assert_eq!(StructureId::Vee.sigma_param_count(2, 3), 7);
        assert_eq!(StructureId::Eee.sigma_param_count(4, 3), 6);
        assert_eq!(StructureId::Eev.sigma_param_count(2, 3), 9);
        assert_eq!(StructureId::Eve.sigma_param_count(2, 3), 8);
        assert_eq!(StructureId::Vvi.sigma_param_count(2, 4), 8);
    }

    #[test]
    fn decompose_identity_uses_canonical_tie_break() {
        let sigma = CovMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let dec = decompose(&sigma).unwrap();
        assert_relative_eq!(dec.lambda(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(dec.delta()[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(dec.delta()[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            (dec.gamma() - DMatrix::<f64>::identity(2, 2)).norm(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn decompose_diagonal_splits_volume_and_shape() {
        let sigma = CovMatrix::new(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0])).unwrap();
        let dec = decompose(&sigma).unwrap();
        assert_relative_eq!(dec.lambda(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(dec.delta()[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(dec.delta()[1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(
            (dec.gamma() - DMatrix::<f64>::identity(2, 2)).norm(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn compose_then_decompose_recovers_rotated_ellipse() {
        // Shared-orientation component: volume 1, shape (1/0.7, 0.7),
        // 30-degree rotation.
        let delta = DVector::from_vec(vec![1.0 / 0.7, 0.7]);
        let dec = EigenDecomposition::new(1.0, delta.clone(), table2_gamma()).unwrap();
        let rec = decompose(&dec.compose().unwrap()).unwrap();
        assert_relative_eq!(rec.lambda(), 1.0, epsilon = 1e-8);
        assert_relative_eq!((rec.delta() - delta).norm(), 0.0, epsilon = 1e-8);
        assert_relative_eq!((rec.gamma() - table2_gamma()).norm(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn compose_unit_volume_has_unit_determinant() {
        let delta = DVector::from_vec(vec![1.0 / 0.3, 0.3]);
        let dec = EigenDecomposition::new(1.0, delta, table2_gamma()).unwrap();
        let m = dec.matrix();
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        assert_relative_eq!(det, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn identity_composes_to_identity() {
        let dec = EigenDecomposition::isotropic(3, 1.0).unwrap();
        assert_relative_eq!(
            (dec.matrix() - DMatrix::<f64>::identity(3, 3)).norm(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn constructor_rejects_invalid_factors() {
        let eye = DMatrix::identity(2, 2);
        let good = DVector::from_vec(vec![2.0, 0.5]);
        assert!(EigenDecomposition::new(-1.0, good.clone(), eye.clone()).is_err());
        assert!(
            EigenDecomposition::new(1.0, DVector::from_vec(vec![2.0, 1.0]), eye.clone()).is_err()
        );
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(EigenDecomposition::new(1.0, good, skew).is_err());
    }

    #[test]
    fn project_vvv_is_identity() {
        let d1 = EigenDecomposition::new(
            2.0,
            DVector::from_vec(vec![4.0, 0.25]),
            table2_gamma(),
        )
        .unwrap();
        let d2 = EigenDecomposition::isotropic(2, 0.5).unwrap();
        let out = project_structure(StructureId::Vvv, &[d1.clone(), d2.clone()]).unwrap();
        assert_eq!(out[0], d1);
        assert_eq!(out[1], d2);
    }

    #[test]
    fn project_eee_pools_and_shares() {
        let d1 = decompose_matrix(&DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 1.0])).unwrap();
        let d2 = decompose_matrix(&DMatrix::from_row_slice(2, 2, &[1.0, -0.2, -0.2, 2.0])).unwrap();
        let out = project_structure(StructureId::Eee, &[d1.clone(), d2.clone()]).unwrap();
        assert!(pattern_satisfied(StructureId::Eee, &out));
        let pooled = (d1.matrix() + d2.matrix()) / 2.0;
        assert_relative_eq!((out[0].matrix() - pooled).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn project_spherical_averages_volumes() {
        let d1 = EigenDecomposition::isotropic(2, 1.0).unwrap();
        let d2 = EigenDecomposition::isotropic(2, 3.0).unwrap();
        let out = project_structure(StructureId::Eii, &[d1, d2]).unwrap();
        assert!(pattern_satisfied(StructureId::Eii, &out));
        assert_relative_eq!(out[0].lambda(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn project_always_lands_on_the_pattern() {
        let d1 = EigenDecomposition::new(
            1.3,
            DVector::from_vec(vec![2.0, 0.5]),
            table2_gamma(),
        )
        .unwrap();
        let d2 = decompose_matrix(&DMatrix::from_row_slice(2, 2, &[5.0, 1.0, 1.0, 1.0])).unwrap();
        for s in StructureId::ALL {
            let out = project_structure(s, &[d1.clone(), d2.clone()]).unwrap();
            assert!(pattern_satisfied(s, &out), "{s} projection infeasible");
        }
    }
}
