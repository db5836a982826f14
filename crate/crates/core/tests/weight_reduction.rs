use mimo_crossing::crossing::{q_weighted, reduce_weighted};
use mimo_crossing::input::{ConditionalInput, MixtureInput};
use mimo_crossing::linalg::SymMatrix;
use mimo_crossing::mmse::{mmse_matrix, EstimatorConfig};
use nalgebra::DMatrix;

fn weight() -> SymMatrix {
    SymMatrix::from_rows(&[vec![2.0, 0.6], vec![0.6, 0.5]]).unwrap()
}

fn mixture() -> MixtureInput {
    MixtureInput::seeded_random_mixture(2, 3, 41)
}

#[test]
fn weighted_gap_factors_through_the_reduced_vector() {
    let a = weight();
    let m = mixture();
    let r = reduce_weighted(&a, &m).unwrap();
    let prod = &r.a_bar * r.a_bar.transpose() * r.alpha;
    assert!((prod - a.matrix()).norm() < 1e-12);
    assert!(((&r.a_bar * r.a_bar.transpose()).trace() - 2.0).abs() < 1e-12);

    let cfg = EstimatorConfig::default();
    let cond: ConditionalInput = m.clone().into();
    for (sigma2, gamma) in [(0.5, 0.3), (1.0, 2.0), (0.3, 7.5)] {
        let q = q_weighted(&cond, sigma2, gamma, &a, &cfg).unwrap();
        // error of x̂ = Āᵀx estimated from the original observation
        let h = DMatrix::identity(2, 2) * f64::sqrt(gamma);
        let e = mmse_matrix(&m, &h, &cfg).unwrap().matrix;
        let e_hat = e.congruence(&r.a_bar.transpose());
        let q_hat = 2.0 * sigma2 / (1.0 + sigma2 * gamma) - e_hat.trace();
        let diff = (q.value - r.alpha * q_hat).abs();
        assert!(diff <= 1e-10 + 3.0 * q.err, "γ={gamma}: {} vs {}", q.value, r.alpha * q_hat);
    }
}

#[test]
fn fresh_observation_of_the_reduced_vector_is_a_different_quantity() {
    let a = weight();
    let m = mixture();
    let r = reduce_weighted(&a, &m).unwrap();
    let cfg = EstimatorConfig::default();
    let gamma = 2.0;
    let h = DMatrix::identity(2, 2) * f64::sqrt(gamma);
    let own = mmse_matrix(&m, &h, &cfg).unwrap().matrix.congruence(&r.a_bar.transpose()).trace();
    let fresh = mmse_matrix(&r.transformed, &h, &cfg).unwrap().matrix.trace();
    assert!((own - fresh).abs() > 1e-3, "{own} vs {fresh}");
}

#[test]
fn negative_weight_mirrors_the_positive_scan() {
    let a = weight();
    let cond: ConditionalInput = mixture().into();
    let cfg = EstimatorConfig::default();
    let p = q_weighted(&cond, 0.7, 1.3, &a, &cfg).unwrap();
    let n = q_weighted(&cond, 0.7, 1.3, &a.scale(-1.0), &cfg).unwrap();
    assert_eq!(p.value, -n.value);
    let indefinite = SymMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
    assert!(q_weighted(&cond, 0.7, 1.3, &indefinite, &cfg).is_err());
}
