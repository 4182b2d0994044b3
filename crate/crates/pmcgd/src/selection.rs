//! Free-parameter accounting, BIC, and the sweep over structures and G.

use rayon::prelude::*;

use crate::covariance::StructureId;
use crate::data::DataMatrix;
use crate::ecm::{fit, fit_gpcm, FitConfig, FitResult};
use crate::error::{Error, Result};

/// Overall free-parameter count of a contaminated model: covariance
/// parameters plus G·p means, G − 1 weights, G good proportions, and G
/// inflations.
pub fn count_free_params(structure: StructureId, g: usize, p: usize) -> usize {
    structure.sigma_param_count(g, p) + g * p + (g - 1) + 2 * g
}

/// Free-parameter count of the plain Gaussian mixture (no good proportions
/// or inflations), used when ranking initializer fits.
pub fn gpcm_free_params(structure: StructureId, g: usize, p: usize) -> usize {
    structure.sigma_param_count(g, p) + g * p + (g - 1)
}

/// Bayesian information criterion, `2 l − m ln n`; larger is better.
pub fn bic(loglik: f64, m: usize, n: usize) -> f64 {
    2.0 * loglik - m as f64 * (n as f64).ln()
}

/// The grid of (structure, G) pairs a sweep fits, with one shared
/// configuration.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub structures: Vec<StructureId>,
    pub g_values: Vec<usize>,
    pub config: FitConfig,
}

impl SweepGrid {
    pub fn new(
        structures: Vec<StructureId>,
        g_values: Vec<usize>,
        config: FitConfig,
    ) -> Result<Self> {
        let grid = Self {
            structures,
            g_values,
            config,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// All fourteen structures over `g_min..=g_max`.
    pub fn all_structures(g_min: usize, g_max: usize, config: FitConfig) -> Result<Self> {
        Self::new(
            StructureId::ALL.to_vec(),
            (g_min..=g_max).collect(),
            config,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.structures.is_empty() {
            return Err(Error::InvalidParameter {
                name: "structures",
                reason: "at least one structure is required".into(),
            });
        }
        if self.g_values.is_empty() || self.g_values.contains(&0) {
            return Err(Error::InvalidParameter {
                name: "g_values",
                reason: "component counts must be a non-empty list of values >= 1".into(),
            });
        }
        self.config.validate()
    }
}

/// One successful fit in a ranking.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub structure: StructureId,
    pub g: usize,
    pub result: FitResult,
    /// Overall free-parameter count m.
    pub m: usize,
    /// `bic(result.final_loglik(), m, n)`, cached at fit time.
    pub bic: f64,
}

/// A (structure, G) pair whose fit failed, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct FailedFit {
    pub structure: StructureId,
    pub g: usize,
    pub message: String,
}

/// All sweep outcomes, successful fits sorted by BIC (best first).
#[derive(Debug, Clone)]
pub struct RankedResults {
    entries: Vec<SweepEntry>,
    failures: Vec<FailedFit>,
}

impl RankedResults {
    /// Successful fits, best BIC first; ties keep grid order.
    pub fn entries(&self) -> &[SweepEntry] {
        &self.entries
    }

    pub fn failures(&self) -> &[FailedFit] {
        &self.failures
    }

    /// The BIC-best fit.
    pub fn best(&self) -> &SweepEntry {
        &self.entries[0]
    }
}

fn sweep_impl(x: &DataMatrix, grid: &SweepGrid, gaussian: bool) -> Result<RankedResults> {
    grid.validate()?;
    let pairs: Vec<(StructureId, usize)> = grid
        .structures
        .iter()
        .flat_map(|s| grid.g_values.iter().map(move |g| (*s, *g)))
        .collect();
    let attempted = pairs.len();
    // Parallel fits; collect keeps grid order, and each fit derives its
    // own random stream from the shared seed, so the outcome does not
    // depend on scheduling.
    let outcomes: Vec<(StructureId, usize, Result<FitResult>)> = pairs
        .par_iter()
        .map(|(s, g)| {
            let fitted = if gaussian {
                fit_gpcm(x, *s, *g, &grid.config)
            } else {
                fit(x, *s, *g, &grid.config)
            };
            (*s, *g, fitted)
        })
        .collect();

    let n = x.n_rows();
    let p = x.n_cols();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (structure, g, outcome) in outcomes {
        match outcome {
            Ok(result) => {
                let m = if gaussian {
                    gpcm_free_params(structure, g, p)
                } else {
                    count_free_params(structure, g, p)
                };
                let score = bic(result.final_loglik(), m, n);
                if score.is_finite() {
                    entries.push(SweepEntry {
                        structure,
                        g,
                        result,
                        m,
                        bic: score,
                    });
                } else {
                    failures.push(FailedFit {
                        structure,
                        g,
                        message: format!("non-finite BIC ({score})"),
                    });
                }
            }
            Err(e) => failures.push(FailedFit {
                structure,
                g,
                message: e.to_string(),
            }),
        }
    }
    if entries.is_empty() {
        return Err(Error::AllFitsFailed { attempted });
    }
    entries.sort_by(|a, b| b.bic.partial_cmp(&a.bic).expect("finite BICs"));
    Ok(RankedResults { entries, failures })
}

/// Fits every (structure, G) pair of the grid and ranks the successes by
/// BIC. Failed fits are recorded, not fatal, unless everything fails.
pub fn sweep(x: &DataMatrix, grid: &SweepGrid) -> Result<RankedResults> {
    sweep_impl(x, grid, false)
}

/// Same sweep over the plain Gaussian family, ranked with the Gaussian
/// parameter count.
pub fn sweep_gpcm(x: &DataMatrix, grid: &SweepGrid) -> Result<RankedResults> {
    sweep_impl(x, grid, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn free_param_examples() {
        // VVV, G = 2, p = 2: 6 covariance + 4 means + 1 weight + 2 α + 2 η.
        assert_eq!(count_free_params(StructureId::Vvv, 2, 2), 15);
        assert_eq!(count_free_params(StructureId::Eii, 1, 3), 6);
        assert_eq!(gpcm_free_params(StructureId::Vvv, 2, 2), 11);
    }

    #[test]
    fn free_params_strictly_increase_in_g() {
        for s in StructureId::ALL {
            for p in [1usize, 2, 5] {
                let mut prev = 0;
                for g in 1..=6 {
                    let m = count_free_params(s, g, p);
                    assert!(m > prev || g == 1, "{s} p={p} g={g}");
                    prev = m;
                }
            }
        }
    }

    #[test]
    fn bic_formula() {
        assert_relative_eq!(
            bic(-100.0, 15, 100),
            -200.0 - 15.0 * 100.0f64.ln(),
            epsilon = 1e-12
        );
        assert_relative_eq!(bic(-42.5, 0, 7), -85.0, epsilon = 1e-12);
        assert_relative_eq!(bic(-42.5, 9, 1), -85.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(SweepGrid::new(vec![], vec![1], FitConfig::default()).is_err());
        assert!(SweepGrid::new(vec![StructureId::Vvv], vec![], FitConfig::default()).is_err());
        assert!(SweepGrid::new(vec![StructureId::Vvv], vec![0], FitConfig::default()).is_err());
        let grid = SweepGrid::all_structures(1, 3, FitConfig::default()).unwrap();
        assert_eq!(grid.structures.len(), 14);
        assert_eq!(grid.g_values, vec![1, 2, 3]);
    }

    fn blobby_data() -> DataMatrix {
        DataMatrix::from_rows(
            &(0..40)
                .map(|i| {
                    let base = if i % 2 == 0 { -3.0 } else { 3.0 };
                    vec![
                        base + (i as f64 * 0.7).sin() * 0.8,
                        base + (i as f64 * 1.3).cos() * 0.8,
                    ]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn single_pair_grid_ranks_one_entry() {
        let x = blobby_data();
        let grid = SweepGrid::new(
            vec![StructureId::Vii],
            vec![2],
            FitConfig {
                restarts: 3,
                ..FitConfig::default()
            },
        )
        .unwrap();
        let ranked = sweep(&x, &grid).unwrap();
        assert_eq!(ranked.entries().len(), 1);
        assert!(ranked.failures().is_empty());
        let e = ranked.best();
        assert_relative_eq!(
            e.bic,
            bic(e.result.final_loglik(), e.m, x.n_rows()),
            epsilon = 0.0
        );
    }

    #[test]
    fn ranking_is_sorted_and_recomputable() {
        let x = blobby_data();
        let grid = SweepGrid::new(
            vec![StructureId::Eii, StructureId::Vii, StructureId::Eee],
            vec![1, 2],
            FitConfig {
                restarts: 2,
                ..FitConfig::default()
            },
        )
        .unwrap();
        let ranked = sweep(&x, &grid).unwrap();
        assert_eq!(ranked.entries().len() + ranked.failures().len(), 6);
        for pair in ranked.entries().windows(2) {
            assert!(pair[0].bic >= pair[1].bic);
        }
        for e in ranked.entries() {
            // Bit-for-bit: the cached value is the same expression re-run.
            assert_eq!(e.bic, bic(e.result.final_loglik(), e.m, x.n_rows()));
        }
    }

    #[test]
    fn single_gaussian_data_prefers_one_component() {
        // One Gaussian blob; the BIC penalty should veto a second component.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut gauss = || {
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        let x = DataMatrix::from_rows(
            &(0..150)
                .map(|_| vec![gauss(), 0.6 * gauss()])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let grid = SweepGrid::new(
            vec![StructureId::Vvv],
            vec![1, 2],
            FitConfig {
                restarts: 4,
                seed: 3,
                ..FitConfig::default()
            },
        )
        .unwrap();
        let ranked = sweep(&x, &grid).unwrap();
        assert_eq!(ranked.best().g, 1);
    }

    #[test]
    fn sweep_is_deterministic_across_runs() {
        let x = blobby_data();
        let grid = SweepGrid::new(
            vec![StructureId::Vvi, StructureId::Eee],
            vec![1, 2],
            FitConfig {
                restarts: 2,
                seed: 11,
                ..FitConfig::default()
            },
        )
        .unwrap();
        let a = sweep(&x, &grid).unwrap();
        let b = sweep(&x, &grid).unwrap();
        let key = |r: &RankedResults| {
            r.entries()
                .iter()
                .map(|e| (e.structure, e.g, e.bic))
                .collect::<Vec<_>>()
        };
        assert_eq!(key(&a), key(&b));
    }
}
