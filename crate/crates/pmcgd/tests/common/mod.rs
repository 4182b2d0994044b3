//! Shared oracles for the integration suites. Everything here is written
//! against plain matrices and closed formulas, independent of the library's
//! own factorizations and update rules, so it can act as a cross-check.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::Rng;

/// Deterministic derivative-free minimizer (Nelder-Mead) for small smooth
/// problems. Returns the best vertex and its value.
pub fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    scale: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += scale;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];
        if (values[worst] - values[best]).abs() < 1e-13 {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|j| {
                order[..dim]
                    .iter()
                    .map(|&i| simplex[i][j])
                    .sum::<f64>()
                    / dim as f64
            })
            .collect();
        let reflect: Vec<f64> = (0..dim)
            .map(|j| centroid[j] + (centroid[j] - simplex[worst][j]))
            .collect();
        let f_reflect = f(&reflect);
        if f_reflect < values[best] {
            let expand: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + 2.0 * (centroid[j] - simplex[worst][j]))
                .collect();
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                values[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                values[worst] = f_reflect;
            }
        } else if f_reflect < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = f_reflect;
        } else {
            let contract: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + 0.5 * (simplex[worst][j] - centroid[j]))
                .collect();
            let f_contract = f(&contract);
            if f_contract < values[worst] {
                simplex[worst] = contract;
                values[worst] = f_contract;
            } else {
                // Shrink toward the best vertex.
                let best_vertex = simplex[best].clone();
                for i in 0..simplex.len() {
                    if i == best {
                        continue;
                    }
                    for j in 0..dim {
                        simplex[i][j] = best_vertex[j] + 0.5 * (simplex[i][j] - best_vertex[j]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best_idx = 0;
    for i in 1..values.len() {
        if values[i] < values[best_idx] {
            best_idx = i;
        }
    }
    (simplex[best_idx].clone(), values[best_idx])
}

/// Trisection search for the maximum of a unimodal function on [lo, hi].
///
/// The function is supplied as a pairwise difference `diff(a, b) = f(a) -
/// f(b)` so that callers can cancel the large common terms analytically;
/// a plain value-level search loses the maximum's position once the
/// objective goes flat relative to its own magnitude.
pub fn trisection_max(diff: &dyn Fn(f64, f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let third = (hi - lo) / 3.0;
        let m1 = lo + third;
        let m2 = hi - third;
        if diff(m1, m2) < 0.0 {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    0.5 * (lo + hi)
}

/// A standalone Gaussian-mixture EM (unconstrained covariances) used as the
/// reference for the degenerate-reduction check. Densities go through a
/// direct matrix inverse, not the library's factorizations.
pub struct PlainGmm {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

impl PlainGmm {
    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let p = x.len() as f64;
        let mut terms = Vec::with_capacity(self.weights.len());
        for ((w, mu), cov) in self.weights.iter().zip(&self.means).zip(&self.covs) {
            let inv = cov.clone().try_inverse().expect("oracle covariance invertible");
            let det = cov.determinant();
            let d = x - mu;
            let quad = (inv * &d).dot(&d);
            terms.push(
                w.ln() - 0.5 * (p * (2.0 * std::f64::consts::PI).ln() + det.ln() + quad),
            );
        }
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    pub fn loglik(&self, data: &[DVector<f64>]) -> f64 {
        data.iter().map(|x| self.log_density(x)).sum()
    }

    /// EM to (near) stationarity from the given start.
    pub fn fit(mut self, data: &[DVector<f64>], max_iter: usize) -> (Self, f64) {
        let n = data.len();
        let g = self.weights.len();
        let p = data[0].len();
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..max_iter {
            // E-step.
            let mut resp = vec![vec![0.0; g]; n];
            for (i, x) in data.iter().enumerate() {
                let mut terms = Vec::with_capacity(g);
                for k in 0..g {
                    let inv = self.covs[k].clone().try_inverse().unwrap();
                    let det = self.covs[k].determinant();
                    let d = x - &self.means[k];
                    let quad = (inv * &d).dot(&d);
                    terms.push(
                        self.weights[k].ln()
                            - 0.5
                                * (p as f64 * (2.0 * std::f64::consts::PI).ln()
                                    + det.ln()
                                    + quad),
                    );
                }
                let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
                for k in 0..g {
                    resp[i][k] = (terms[k] - lse).exp();
                }
            }
            // M-step.
            for k in 0..g {
                let nk: f64 = (0..n).map(|i| resp[i][k]).sum();
                self.weights[k] = nk / n as f64;
                let mut mu = DVector::zeros(p);
                for (i, x) in data.iter().enumerate() {
                    mu += x * resp[i][k];
                }
                mu /= nk;
                let mut cov = DMatrix::zeros(p, p);
                for (i, x) in data.iter().enumerate() {
                    let d = x - &mu;
                    cov.ger(resp[i][k], &d, &d, 1.0);
                }
                cov /= nk;
                self.means[k] = mu;
                self.covs[k] = cov;
            }
            let ll = self.loglik(data);
            if ll - prev < 1e-12 && prev.is_finite() {
                break;
            }
            prev = ll;
        }
        let ll = self.loglik(data);
        (self, ll)
    }
}

/// Well-separated Gaussian blobs with ground-truth labels; shared by the
/// monotonicity, dominance, and reduction checks.
pub struct BlobSpec {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    pub sizes: Vec<usize>,
}

pub fn random_blobs(rng: &mut StdRng, n: usize, p: usize, g: usize, separation: f64) -> (Vec<Vec<f64>>, Vec<usize>, BlobSpec) {
    let mut means = Vec::with_capacity(g);
    let mut covs = Vec::with_capacity(g);
    for k in 0..g {
        let mut mean = DVector::zeros(p);
        for j in 0..p {
            mean[j] = separation * (k as f64 - (g as f64 - 1.0) / 2.0) * if j % 2 == 0 { 1.0 } else { -1.0 }
                + rng.gen_range(-0.5..0.5);
        }
        let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-0.4..0.4));
        let cov = &a * a.transpose() + DMatrix::identity(p, p) * rng.gen_range(0.4..1.2);
        means.push(mean);
        covs.push(cov);
    }
    let mut sizes = vec![n / g; g];
    sizes[0] += n - (n / g) * g;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..g {
        let chol = covs[k].clone().cholesky().expect("blob covariance PD").l();
        for _ in 0..sizes[k] {
            let zvec = DVector::from_fn(p, |_, _| {
                // Box-Muller from two uniforms.
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            });
            let x = &means[k] + &chol * zvec;
            rows.push(x.iter().cloned().collect());
            labels.push(k);
        }
    }
    (rows, labels, BlobSpec { means, covs, sizes })
}
