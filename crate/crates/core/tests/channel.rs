mod common;

use common::*;

use ifp_core::channel::{
    build_precoder, coupling_input_matrix, estimate_channel, estimation_error_variance,
    sample_rayleigh, snr_from_db,
};
use ifp_core::{CsiModel, Error, IntegerMatrix, PrecoderKind};

#[test]
fn rayleigh_gains_have_unit_mean_square() {
    let h = sample_rayleigh(100, 1000, 77);
    let ms = h.matrix().iter().map(|v| v * v).sum::<f64>() / 1e5;
    assert!((ms - 1.0).abs() <= 0.02, "mean square {ms}");
    assert!(h.matrix().iter().all(|&v| v >= 0.0));
}

#[test]
fn estimation_error_has_the_model_variance() {
    let h = sample_rayleigh(100, 100, 3);
    let se2 = estimation_error_variance(4, 0.1, 20.0, 2.0).unwrap();
    assert!((se2 - 0.01).abs() < 1e-15);
    for csi in [
        CsiModel::Mmse { sigma_e2: se2 },
        CsiModel::Ml {
            sigma_h2: 1.0,
            sigma_e2: se2,
        },
    ] {
        let est = estimate_channel(&h, csi, 99).unwrap();
        let diff = est.matrix() - h.matrix();
        let n = diff.len() as f64;
        let mu = diff.sum() / n;
        let var = diff.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1.0);
        assert!((var / se2 - 1.0).abs() <= 0.03, "{csi}: variance {var}");
        assert_eq!(estimate_channel(&h, csi, 99).unwrap(), est);
    }
}

#[test]
fn ml_precoder_tends_to_perfect_csi() {
    let mut r = rng(5);
    let h = ifp_core::Channel::new(gaussian_matrix(&mut r, 3, 4)).unwrap();
    let d = random_power(&mut r, 3, 1.0);
    let a = IntegerMatrix::from_row_slice(3, &[1, 1, 0, 0, 1, 0, 0, 1, 1]);
    let rho = snr_from_db(20.0);
    for kind in [PrecoderKind::Dif, PrecoderKind::Rif] {
        let perfect = build_precoder(&h, &d, &a, kind, CsiModel::Perfect, rho).unwrap();
        let near = build_precoder(
            &h,
            &d,
            &a,
            kind,
            CsiModel::Ml {
                sigma_h2: 1.0,
                sigma_e2: 1e-12,
            },
            rho,
        )
        .unwrap();
        assert!((&perfect - &near).amax() <= 1e-6);
        let mmse0 =
            build_precoder(&h, &d, &a, kind, CsiModel::Mmse { sigma_e2: 0.0 }, rho).unwrap();
        assert!((&perfect - &mmse0).amax() <= 1e-12);
    }
}

#[test]
fn dif_needs_enough_antennas() {
    let h = sample_rayleigh(4, 2, 1);
    let rho = snr_from_db(10.0);
    assert!(matches!(
        coupling_input_matrix(&h, PrecoderKind::Dif, rho, CsiModel::Perfect),
        Err(Error::SingularGram { .. })
    ));
    assert!(coupling_input_matrix(&h, PrecoderKind::Rif, rho, CsiModel::Perfect).is_ok());
}
