//! Seeded generators for benchmark scenarios and property tests: Gaussian
//! mixtures with eigen-decomposed covariances, uniform background noise,
//! single-cell perturbations, and contaminated-mixture sampling.

use std::io::{self, Write};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::covariance::EigenDecomposition;
use crate::data::DataMatrix;
use crate::ecm::ModelParams;
use crate::error::{Error, Result};

/// One Gaussian cluster to generate: mean, factorized covariance, and size.
#[derive(Debug, Clone)]
pub struct GaussianComponentSpec {
    pub mean: DVector<f64>,
    pub cov: EigenDecomposition,
    pub size: usize,
}

/// A full synthetic scenario: Gaussian clusters plus a uniform noise box.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub components: Vec<GaussianComponentSpec>,
    pub noise_count: usize,
    /// Per-dimension (low, high) bounds of the noise box.
    pub noise_bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::EmptyData);
        }
        let p = self.components[0].mean.len();
        for c in &self.components {
            if c.size == 0 {
                return Err(Error::InvalidParameter {
                    name: "size",
                    reason: "component sizes must be at least 1".into(),
                });
            }
            if c.mean.len() != p || c.cov.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: c.mean.len().max(c.cov.dim()),
                });
            }
        }
        if self.noise_count > 0 {
            validate_bounds(&self.noise_bounds, p)?;
        }
        Ok(())
    }

    /// The standard two-cluster benchmark: 90 + 90 points from two rotated
    /// ellipses of unit volume sharing a 30-degree orientation (shapes
    /// diag(1/0.7, 0.7) and diag(1/0.3, 0.3), means (−2, −2) and (2, 2)),
    /// plus 20 uniform noise points on [−10, 10]².
    pub fn two_ellipses_with_noise(seed: u64) -> Self {
        let gamma = nalgebra::DMatrix::from_row_slice(
            2,
            2,
            &[3.0f64.sqrt() / 2.0, 0.5, -0.5, 3.0f64.sqrt() / 2.0],
        );
        let component = |mean: [f64; 2], shape_ratio: f64| GaussianComponentSpec {
            mean: DVector::from_row_slice(&mean),
            cov: EigenDecomposition::new(
                1.0,
                DVector::from_vec(vec![1.0 / shape_ratio, shape_ratio]),
                gamma.clone(),
            )
            .expect("valid benchmark decomposition"),
            size: 90,
        };
        Self {
            components: vec![component([-2.0, -2.0], 0.7), component([2.0, 2.0], 0.3)],
            noise_count: 20,
            noise_bounds: vec![(-10.0, 10.0), (-10.0, 10.0)],
            seed,
        }
    }
}

fn validate_bounds(bounds: &[(f64, f64)], p: usize) -> Result<()> {
    if bounds.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: bounds.len(),
        });
    }
    for (lo, hi) in bounds {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter {
                name: "noise_bounds",
                reason: format!("invalid interval ({lo}, {hi})"),
            });
        }
    }
    Ok(())
}

/// A generated data matrix with its ground truth: the generating component
/// per row (0 means background noise) and a bad-point flag.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub data: DataMatrix,
    pub true_component: Vec<usize>,
    pub true_bad: Vec<bool>,
}

impl LabeledSample {
    pub fn n(&self) -> usize {
        self.data.n_rows()
    }

    /// Writes `x1,…,xp,true_component,true_bad` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let p = self.data.n_cols();
        let header: Vec<String> = (1..=p)
            .map(|j| format!("x{j}"))
            .chain(["true_component".into(), "true_bad".into()])
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.n() {
            let mut fields: Vec<String> = (0..p)
                .map(|j| format!("{}", self.data.values()[(i, j)]))
                .collect();
            fields.push(self.true_component[i].to_string());
            fields.push(if self.true_bad[i] { "1" } else { "0" }.to_string());
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

fn standard_normal_vector(rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
    DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draws the Gaussian clusters of a scenario (no noise); rows are grouped by
/// component, labeled 1-based, all good.
pub fn sample_gpcm(spec: &ScenarioSpec) -> Result<LabeledSample> {
    spec.validate()?;
    let p = spec.components[0].mean.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::new();
    let mut true_component = Vec::new();
    for (k, comp) in spec.components.iter().enumerate() {
        let factor = comp.cov.compose()?.factor_l();
        for _ in 0..comp.size {
            let x = &comp.mean + &factor * standard_normal_vector(&mut rng, p);
            rows.push(x.iter().cloned().collect::<Vec<f64>>());
            true_component.push(k + 1);
        }
    }
    let n = rows.len();
    Ok(LabeledSample {
        data: DataMatrix::from_rows(&rows)?,
        true_component,
        true_bad: vec![false; n],
    })
}

/// Draws a scenario including its uniform noise points; noise rows carry
/// component 0 and a bad flag.
pub fn sample_scenario(spec: &ScenarioSpec) -> Result<LabeledSample> {
    let clusters = sample_gpcm(spec)?;
    if spec.noise_count == 0 {
        return Ok(clusters);
    }
    add_uniform_noise(
        &clusters,
        spec.noise_count,
        &spec.noise_bounds,
        spec.seed.wrapping_add(1),
    )
}

/// Appends `count` i.i.d. uniform draws from the given box. Appended rows
/// get fresh row identifiers, component 0, and a bad flag.
pub fn add_uniform_noise(
    sample: &LabeledSample,
    count: usize,
    bounds: &[(f64, f64)],
    seed: u64,
) -> Result<LabeledSample> {
    if count == 0 {
        return Ok(sample.clone());
    }
    let p = sample.data.n_cols();
    validate_bounds(bounds, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = (0..sample.n())
        .map(|i| sample.data.values().row(i).iter().cloned().collect())
        .collect();
    let mut ids = sample.data.row_ids().to_vec();
    let mut next_id = ids.iter().max().map_or(0, |m| m + 1);
    let mut true_component = sample.true_component.clone();
    let mut true_bad = sample.true_bad.clone();
    for _ in 0..count {
        rows.push(bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)).collect());
        ids.push(next_id);
        next_id += 1;
        true_component.push(0);
        true_bad.push(true);
    }
    let values = nalgebra::DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    Ok(LabeledSample {
        data: DataMatrix::with_row_ids(values, ids)?,
        true_component,
        true_bad,
    })
}

/// Copy of `x` with one cell replaced; the original is untouched.
pub fn perturb_observation(x: &DataMatrix, row: usize, dim: usize, value: f64) -> Result<DataMatrix> {
    x.with_cell(row, dim, value)
}

/// Samples n observations from a contaminated mixture: component by weight,
/// then good with probability α (covariance Σ) or bad (covariance ηΣ).
pub fn sample_contaminated(psi: &ModelParams, n: usize, seed: u64) -> Result<LabeledSample> {
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let p = psi.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors: Vec<_> = psi
        .components()
        .iter()
        .map(|c| c.cov.compose().map(|cov| cov.factor_l()))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(n);
    let mut true_component = Vec::with_capacity(n);
    let mut true_bad = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut k = psi.g() - 1;
        for (idx, c) in psi.components().iter().enumerate() {
            acc += c.pi;
            if u < acc {
                k = idx;
                break;
            }
        }
        let comp = &psi.components()[k];
        let bad = rng.gen::<f64>() >= comp.alpha;
        let scale = if bad { comp.eta.sqrt() } else { 1.0 };
        let x = &comp.mu + (&factors[k] * standard_normal_vector(&mut rng, p)) * scale;
        rows.push(x.iter().cloned().collect::<Vec<f64>>());
        true_component.push(k + 1);
        true_bad.push(bad);
    }
    Ok(LabeledSample {
        data: DataMatrix::from_rows(&rows)?,
        true_component,
        true_bad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::StructureId;
    use crate::ecm::MixtureComponent;
    use nalgebra::DMatrix;

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let spec = ScenarioSpec::two_ellipses_with_noise(42);
        let a = sample_scenario(&spec).unwrap();
        let b = sample_scenario(&spec).unwrap();
        assert_eq!(a.data.values(), b.data.values());
        assert_eq!(a.true_component, b.true_component);

        let other = sample_scenario(&ScenarioSpec {
            seed: 43,
            ..ScenarioSpec::two_ellipses_with_noise(42)
        })
        .unwrap();
        assert_ne!(a.data.values(), other.data.values());
    }

    #[test]
    fn benchmark_scenario_counts_and_labels() {
        let sample = sample_scenario(&ScenarioSpec::two_ellipses_with_noise(7)).unwrap();
        assert_eq!(sample.n(), 200);
        assert_eq!(sample.true_component.iter().filter(|c| **c == 1).count(), 90);
        assert_eq!(sample.true_component.iter().filter(|c| **c == 2).count(), 90);
        assert_eq!(sample.true_component.iter().filter(|c| **c == 0).count(), 20);
        for i in 0..sample.n() {
            assert_eq!(sample.true_bad[i], sample.true_component[i] == 0);
            if sample.true_component[i] == 0 {
                for j in 0..2 {
                    let v = sample.data.values()[(i, j)];
                    assert!((-10.0..10.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn sample_covariance_approaches_the_composed_matrix() {
        let mut spec = ScenarioSpec::two_ellipses_with_noise(3);
        spec.components.truncate(1);
        spec.components[0].size = 5000;
        spec.noise_count = 0;
        let sample = sample_gpcm(&spec).unwrap();
        let x = sample.data.values();
        let mean = x.row_mean();
        let mut cov = DMatrix::zeros(2, 2);
        for i in 0..x.nrows() {
            let d = (x.row(i) - &mean).transpose();
            cov.ger(1.0, &d, &d, 1.0);
        }
        cov /= x.nrows() as f64;
        let target = spec.components[0].cov.matrix();
        assert!(
            (cov - target).norm() < 0.15,
            "sample covariance too far from target"
        );
    }

    #[test]
    fn noise_mean_is_near_the_box_center() {
        let base = sample_gpcm(&ScenarioSpec {
            components: vec![GaussianComponentSpec {
                mean: DVector::from_vec(vec![0.0, 0.0]),
                cov: EigenDecomposition::isotropic(2, 1.0).unwrap(),
                size: 1,
            }],
            noise_count: 0,
            noise_bounds: vec![],
            seed: 5,
        })
        .unwrap();
        let n_noise = 100_000;
        let with_noise =
            add_uniform_noise(&base, n_noise, &[(2.0, 6.0), (-3.0, 1.0)], 6).unwrap();
        assert_eq!(with_noise.n(), 1 + n_noise);
        let mut mean = [0.0f64; 2];
        for i in 1..with_noise.n() {
            mean[0] += with_noise.data.values()[(i, 0)];
            mean[1] += with_noise.data.values()[(i, 1)];
        }
        mean[0] /= n_noise as f64;
        mean[1] /= n_noise as f64;
        // Uniform on (lo, hi): sd of the mean is (hi-lo)/sqrt(12 n).
        let se = 4.0 / (12.0 * n_noise as f64).sqrt();
        assert!((mean[0] - 4.0).abs() < 3.0 * se, "mean {mean:?}");
        assert!((mean[1] + 1.0).abs() < 3.0 * se, "mean {mean:?}");
    }

    #[test]
    fn perturb_is_a_copy() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let y = perturb_observation(&x, 1, 1, -15.0).unwrap();
        assert_eq!(y.values()[(1, 1)], -15.0);
        assert_eq!(x.values()[(1, 1)], 4.0);
        assert!(perturb_observation(&x, 9, 0, 0.0).is_err());
    }

    fn contaminated_model(alpha: f64, eta: f64) -> ModelParams {
        let mk = |pi: f64, mu: [f64; 2]| MixtureComponent {
            pi,
            alpha,
            mu: DVector::from_row_slice(&mu),
            cov: EigenDecomposition::isotropic(2, 1.0).unwrap(),
            eta,
        };
        ModelParams::new(
            StructureId::Vvv,
            vec![mk(0.4, [0.0, 0.0]), mk(0.6, [8.0, 8.0])],
        )
        .unwrap()
    }

    #[test]
    fn contaminated_sampling_hits_the_expected_bad_fraction() {
        let psi = contaminated_model(0.8, 16.0);
        let n = 100_000;
        let sample = sample_contaminated(&psi, n, 11).unwrap();
        let bad = sample.true_bad.iter().filter(|b| **b).count() as f64 / n as f64;
        let expect = 0.2;
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((bad - expect).abs() < 3.0 * se, "bad fraction {bad}");
    }

    #[test]
    fn contamination_preserves_component_means() {
        let psi = contaminated_model(0.5, 9.0);
        let sample = sample_contaminated(&psi, 60_000, 13).unwrap();
        // Mean of the bad draws in component 1 should still be near (0, 0);
        // their spread is sqrt(9) times wider.
        let mut sum = [0.0f64; 2];
        let mut count = 0usize;
        for i in 0..sample.n() {
            if sample.true_component[i] == 1 && sample.true_bad[i] {
                sum[0] += sample.data.values()[(i, 0)];
                sum[1] += sample.data.values()[(i, 1)];
                count += 1;
            }
        }
        let se = 3.0 / (count as f64).sqrt();
        assert!(count > 5000);
        assert!((sum[0] / count as f64).abs() < 3.0 * se);
        assert!((sum[1] / count as f64).abs() < 3.0 * se);
    }

    #[test]
    fn bad_draw_covariance_is_inflated() {
        let psi = contaminated_model(0.5, 9.0);
        let sample = sample_contaminated(&psi, 80_000, 17).unwrap();
        let mut acc = DMatrix::zeros(2, 2);
        let mut count = 0.0;
        for i in 0..sample.n() {
            if sample.true_component[i] == 2 && sample.true_bad[i] {
                let d = sample.data.row(i) - DVector::from_vec(vec![8.0, 8.0]);
                acc.ger(1.0, &d, &d, 1.0);
                count += 1.0;
            }
        }
        acc /= count;
        let target = DMatrix::identity(2, 2) * 9.0;
        assert!((acc - target).norm() < 0.5, "empirical bad covariance off");
    }

    #[test]
    fn csv_emission_has_header_and_labels() {
        let sample = sample_scenario(&ScenarioSpec {
            components: vec![GaussianComponentSpec {
                mean: DVector::from_vec(vec![1.0, 2.0]),
                cov: EigenDecomposition::isotropic(2, 1.0).unwrap(),
                size: 3,
            }],
            noise_count: 2,
            noise_bounds: vec![(-1.0, 1.0), (-1.0, 1.0)],
            seed: 1,
        })
        .unwrap();
        let mut buf = Vec::new();
        sample.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,x2,true_component,true_bad");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].ends_with(",1,0"));
        assert!(lines[5].ends_with(",0,1"));
    }
}
