//! Property tests for the core invariants: density reductions, round-trip
//! decompositions, pattern exactness, and posterior normalization.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use pmcgd::covariance::{
    decompose, pattern_satisfied, scatter_objective, update_sigmas, EigenDecomposition,
    ScatterSet, StructureId,
};
use pmcgd::data::DataMatrix;
use pmcgd::ecm::{e_step, MixtureComponent, ModelParams};
use pmcgd::gaussian::{contaminated_log_pdf, log_gaussian_pdf, mixture_log_pdf, ComponentParams};
use pmcgd::CovMatrix;

fn unit_vector(angle: f64) -> (f64, f64) {
    (angle.cos(), angle.sin())
}

/// A well-scaled random 2x2 SPD matrix from an angle and two log-eigenvalues.
fn spd2(angle: f64, l1: f64, l2: f64) -> DMatrix<f64> {
    let (c, s) = unit_vector(angle);
    let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![l1.exp(), l2.exp()]));
    let m = &rot * diag * rot.transpose();
    // Exact symmetry for the strict constructor.
    let mut out = m.clone();
    let avg = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    out[(0, 1)] = avg;
    out[(1, 0)] = avg;
    out
}

fn component_strategy() -> impl Strategy<Value = (f64, f64, (f64, f64), (f64, f64, f64), f64)> {
    (
        0.05f64..0.95,            // pi fraction (normalized later)
        0.55f64..0.999,           // alpha
        (-3.0f64..3.0, -3.0f64..3.0), // mean
        (0.0f64..std::f64::consts::PI, -1.2f64..1.2, -1.2f64..1.2), // covariance
        1.1f64..60.0,             // eta
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The mixture log-density equals the log of the naive sum over all 2G
    /// weighted Gaussian terms.
    #[test]
    fn mixture_matches_naive_two_g_sum(
        comps in proptest::collection::vec(component_strategy(), 1..4),
        x0 in -4.0f64..4.0,
        x1 in -4.0f64..4.0,
    ) {
        let total: f64 = comps.iter().map(|c| c.0).sum();
        let components: Vec<ComponentParams> = comps
            .iter()
            .map(|(pi, alpha, mean, cov, eta)| {
                ComponentParams::new(
                    pi / total,
                    *alpha,
                    DVector::from_vec(vec![mean.0, mean.1]),
                    CovMatrix::new(spd2(cov.0, cov.1, cov.2)).unwrap(),
                    *eta,
                )
                .unwrap()
            })
            .collect();
        // Weights renormalized from floats may miss 1.0 by single ulps;
        // nudge the first weight to satisfy the strict precondition.
        let mut components = components;
        let sum: f64 = components.iter().map(|c| c.pi).sum();
        components[0].pi += 1.0 - sum;

        let x = DVector::from_vec(vec![x0, x1]);
        let ours = mixture_log_pdf(&x, &components).unwrap();
        let mut naive = 0.0f64;
        for c in &components {
            let good = log_gaussian_pdf(&x, &c.mu, &c.sigma).unwrap().exp();
            let bad_cov = CovMatrix::new(c.sigma.matrix() * c.eta).unwrap();
            let bad = log_gaussian_pdf(&x, &c.mu, &bad_cov).unwrap().exp();
            naive += c.pi * (c.alpha * good + (1.0 - c.alpha) * bad);
        }
        prop_assert!((ours - naive.ln()).abs() < 1e-12);
    }

    /// decompose(compose(d)) reproduces canonical decompositions.
    #[test]
    fn decompose_compose_round_trip(
        angle in 0.01f64..1.5,
        log_lambda in -2.0f64..2.0,
        shape in 1.05f64..8.0,
    ) {
        let (c, s) = unit_vector(angle);
        // Column signs chosen so the first row is positive: canonical form.
        let gamma = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        let delta = DVector::from_vec(vec![shape.sqrt(), 1.0 / shape.sqrt()]);
        let dec = EigenDecomposition::new(log_lambda.exp(), delta, gamma).unwrap();
        let rec = decompose(&dec.compose().unwrap()).unwrap();
        prop_assert!((rec.lambda() - dec.lambda()).abs() / dec.lambda() < 1e-8);
        prop_assert!((rec.delta() - dec.delta()).norm() < 1e-8);
        prop_assert!((rec.gamma() - dec.gamma()).norm() < 1e-8);
    }

    /// Every structure update satisfies its pattern exactly and the
    /// objectives nest between the unconstrained and the most constrained
    /// structure.
    #[test]
    fn updates_honor_patterns_and_nesting(
        seeds in proptest::collection::vec((0.0f64..std::f64::consts::PI, -1.0f64..1.5, -1.0f64..1.5, 4.0f64..40.0), 2..4),
    ) {
        let w: Vec<DMatrix<f64>> = seeds
            .iter()
            .map(|(a, l1, l2, n)| spd2(*a, *l1, *l2) * *n)
            .collect();
        let sizes: Vec<f64> = seeds.iter().map(|(_, _, _, n)| *n).collect();
        let scatter = ScatterSet::new(w, sizes).unwrap();
        let f_vvv = scatter_objective(
            &scatter,
            &update_sigmas(StructureId::Vvv, &scatter, None).unwrap().decompositions,
        );
        let f_eii = scatter_objective(
            &scatter,
            &update_sigmas(StructureId::Eii, &scatter, None).unwrap().decompositions,
        );
        for structure in StructureId::ALL {
            let update = update_sigmas(structure, &scatter, None).unwrap();
            prop_assert!(pattern_satisfied(structure, &update.decompositions));
            let f = scatter_objective(&scatter, &update.decompositions);
            prop_assert!(f_vvv <= f + 1e-7 && f <= f_eii + 1e-7);
        }
    }

    /// E-step posteriors are normalized for arbitrary valid parameters:
    /// responsibilities sum to one per row and good probabilities stay in
    /// [0, 1].
    #[test]
    fn e_step_posteriors_are_normalized(
        comps in proptest::collection::vec(component_strategy(), 1..4),
        rows in proptest::collection::vec((-8.0f64..8.0, -8.0f64..8.0), 5..30),
    ) {
        let total: f64 = comps.iter().map(|c| c.0).sum();
        let mut components: Vec<MixtureComponent> = comps
            .iter()
            .map(|(pi, alpha, mean, cov, eta)| {
                let sigma = CovMatrix::new(spd2(cov.0, cov.1, cov.2)).unwrap();
                MixtureComponent {
                    pi: pi / total,
                    alpha: *alpha,
                    mu: DVector::from_vec(vec![mean.0, mean.1]),
                    cov: decompose(&sigma).unwrap(),
                    eta: *eta,
                }
            })
            .collect();
        let sum: f64 = components.iter().map(|c| c.pi).sum();
        components[0].pi += 1.0 - sum;
        let psi = ModelParams::new(StructureId::Vvv, components).unwrap();
        let x = DataMatrix::from_rows(
            &rows.iter().map(|(a, b)| vec![*a, *b]).collect::<Vec<_>>(),
        )
        .unwrap();
        let (post, loglik) = e_step(&x, &psi).unwrap();
        prop_assert!(loglik.is_finite());
        for i in 0..post.n() {
            let row_sum: f64 = post.z().row(i).iter().sum();
            prop_assert!((row_sum - 1.0).abs() < 1e-10);
            for k in 0..post.g() {
                let v = post.v()[(i, k)];
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    /// The contaminated density strictly decreases along rays out of the
    /// mean.
    #[test]
    fn contaminated_density_is_unimodal_on_rays(
        alpha in 0.55f64..0.999,
        eta in 1.1f64..50.0,
        cov in (0.0f64..std::f64::consts::PI, -1.0f64..1.0, -1.0f64..1.0),
        direction in 0.0f64..std::f64::consts::TAU,
    ) {
        let comp = ComponentParams::new(
            1.0,
            alpha,
            DVector::from_vec(vec![0.5, -0.5]),
            CovMatrix::new(spd2(cov.0, cov.1, cov.2)).unwrap(),
            eta,
        )
        .unwrap();
        let (dx, dy) = unit_vector(direction);
        let mut prev = f64::INFINITY;
        for step in 0..12 {
            let t = step as f64 * 0.7;
            let x = DVector::from_vec(vec![0.5 + t * dx, -0.5 + t * dy]);
            let lp = contaminated_log_pdf(&x, &comp).unwrap();
            prop_assert!(lp < prev + 1e-12);
            prev = lp;
        }
    }
}
