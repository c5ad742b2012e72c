use proptest::prelude::*;
use switchsynth::certify::{classify, compute_mu, GridConfig, Verdict};
use switchsynth::dataset::{build_psi, build_psi_default, to_matrix, CompanionModel, PsiMatrix};
use switchsynth::linalg::{
    cholesky, eigh_jacobi, lambda_max, solve_linear, spectral_radius_bisect, DenseMatrix,
};
use switchsynth::lmi::{
    solve_feasibility, verify_certificate, FeasibilityOptions, LyapunovCertificate,
};
use switchsynth::simulate::simulate_model;

/// Companion model of dimension 2..=4 with coefficients in [−1, 1], and an
/// initial state in [−1, 1]^d.
fn system() -> impl Strategy<Value = (CompanionModel, Vec<f64>)> {
    (2..=4usize).prop_flat_map(|d| {
        (
            prop::collection::vec(-1.0f64..1.0, d).prop_map(|c| CompanionModel::new(1, c)),
            prop::collection::vec(-1.0f64..1.0, d),
        )
    })
}

fn rho_squared(model: &CompanionModel) -> f64 {
    spectral_radius_bisect(&to_matrix(model), 1e-10)
        .unwrap()
        .powi(2)
}

fn psi_of(model: &CompanionModel, x0: &[f64], steps: usize) -> Option<PsiMatrix> {
    build_psi_default(&simulate_model(model, x0, steps)).ok()
}

/// Smallest default-grid λ at least 0.02 above ρ².
fn feasible_grid_lambda(r2: f64) -> Option<f64> {
    let cfg = GridConfig::default();
    cfg.stable_lambdas()
        .into_iter()
        .chain(cfg.unstable_lambdas())
        .filter(|l| *l >= r2 + 0.02)
        .min_by(f64::total_cmp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn psi_round_trip((model, x0) in system(), extra in 0usize..3) {
        let d = model.dimension();
        let trace = simulate_model(&model, &x0, d + extra);
        let Ok(psi) = build_psi_default(&trace) else { return Ok(()) };
        let start: Vec<f64> = psi.x_now.column(0);
        let again = simulate_model(&model, &start, d + extra - psi.offset);
        for (a, b) in again.samples.iter().zip(&trace.samples[psi.offset..]) {
            for (u, v) in a.iter().zip(b) {
                prop_assert!((u - v).abs() <= 1e-9 * (1.0 + v.abs()));
            }
        }
        prop_assert_eq!(build_psi(&trace, 1e-8).unwrap().offset, psi.offset);
    }

    #[test]
    fn shift_identity((model, x0) in system()) {
        let Some(psi) = psi_of(&model, &x0, model.dimension()) else { return Ok(()) };
        let predicted = to_matrix(&model).matmul(&psi.x_now);
        prop_assert!(predicted.sub(&psi.x_next).max_abs() <= 1e-9 * (1.0 + psi.x_next.max_abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn certificates_hold_for_the_generating_matrix((model, x0) in system()) {
        let r2 = rho_squared(&model);
        let Some(lambda) = feasible_grid_lambda(r2) else { return Ok(()) };
        let Some(psi) = psi_of(&model, &x0, model.dimension() + 1) else { return Ok(()) };
        let f = solve_feasibility(&psi, lambda, &FeasibilityOptions::default()).unwrap();
        let Some(cert) = f.certificate() else {
            return Err(TestCaseError::fail(format!("lambda {lambda} infeasible with rho^2 {r2}")));
        };
        let a = to_matrix(&model);
        let decrease = a.congruence(&cert.p).sub(&cert.p.scale(lambda)).symmetrize();
        prop_assert!(lambda_max(&decrease).unwrap() < 0.0);
        let trace = simulate_model(&model, &x0, model.dimension() + 1);
        prop_assert!(verify_certificate(cert, &psi, &trace).passed());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn certificates_are_scale_invariant((model, x0) in system(), log_c in -6.0f64..6.0) {
        let Some(lambda) = feasible_grid_lambda(rho_squared(&model)) else { return Ok(()) };
        let trace = simulate_model(&model, &x0, model.dimension() + 1);
        let Ok(psi) = build_psi_default(&trace) else { return Ok(()) };
        let Some(cert) = solve_feasibility(&psi, lambda, &FeasibilityOptions::default()).unwrap().into_certificate() else {
            return Err(TestCaseError::fail("feasible lambda rejected"));
        };
        let scaled = LyapunovCertificate { p: cert.p.scale(10f64.powf(log_c)), ..cert };
        prop_assert!(verify_certificate(&scaled, &psi, &trace).passed());
    }

    #[test]
    fn gains_are_tight(
        (a, b) in (2..=5usize).prop_flat_map(|d| (
            prop::collection::vec(-1.0f64..1.0, d * d),
            prop::collection::vec(-1.0f64..1.0, d * d),
        )),
        samples in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 1000),
    ) {
        let d = (a.len() as f64).sqrt() as usize;
        let make = |v: Vec<f64>| {
            let m = DenseMatrix::from_vec(d, d, v).unwrap();
            m.transpose().matmul(&m).add(&DenseMatrix::identity(d).scale(0.1))
        };
        let cert = |p: DenseMatrix| LyapunovCertificate { subsystem_id: 1, lambda: 0.5, p, margin_pd: 0.0, margin_decrease: 0.0 };
        let (ci, cj) = (cert(make(a)), cert(make(b)));
        let mu = compute_mu(&ci, &cj).unwrap();

        // Maximizer: ξ = L⁻ᵀw for the top eigenvector w of L⁻¹·P_j·L⁻ᵀ.
        let l = cholesky(&ci.p).unwrap();
        let l_inv = solve_linear(&l, &DenseMatrix::identity(d)).unwrap();
        let w = eigh_jacobi(&l_inv.matmul(&cj.p).matmul(&l_inv.transpose()).symmetrize()).unwrap().top_vector();
        let maximizer = l_inv.transpose().mul_vec(&w);

        let mut best = 0.0f64;
        for xi in samples.iter().map(|s| s[..d].to_vec()).chain(std::iter::once(maximizer)) {
            let ratio = cj.value(&xi) / ci.value(&xi);
            prop_assert!(ratio <= mu * (1.0 + 1e-9));
            best = best.max(ratio);
        }
        prop_assert!(best >= mu * (1.0 - 1e-2));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn feasibility_is_monotone_on_the_stable_grid((model, x0) in system()) {
        let Some(psi) = psi_of(&model, &x0, model.dimension() + 1) else { return Ok(()) };
        let verdicts: Vec<bool> = GridConfig::default()
            .stable_lambdas()
            .into_iter()
            .map(|l| solve_feasibility(&psi, l, &FeasibilityOptions::default()).unwrap().is_feasible())
            .collect();
        let first = verdicts.iter().position(|v| *v).unwrap_or(verdicts.len());
        prop_assert!(verdicts[first..].iter().all(|v| *v), "{:?}", verdicts);
    }

    #[test]
    fn classification_matches_spectral_radius((model, x0) in system()) {
        let rho = rho_squared(&model).sqrt();
        prop_assume!(!(0.98..=1.02).contains(&rho));
        let Some(psi) = psi_of(&model, &x0, model.dimension() + 1) else { return Ok(()) };
        let (verdict, certs) = classify(&psi, &GridConfig::default()).unwrap();
        if rho < 1.0 {
            // Stable models whose ρ² sits within 0.02 of the top grid value
            // may legitimately fall through to the unstable grid.
            if rho * rho <= 0.88 {
                prop_assert_eq!(verdict, Verdict::Stable);
            }
        } else if rho * rho < 100.0 - 0.02 {
            prop_assert_eq!(verdict, Verdict::Unstable);
        }
        prop_assert!(certs.iter().all(|c| c.lambda > rho * rho));
    }
}
