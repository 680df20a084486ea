use l1ksvd::synth::{generate_instance, laplace_quantile, realized_snr_db, sample_laplacian, NoiseKind, SynthSpec};
use l1ksvd::RngSeed;

#[test]
fn laplacian_moments() {
    let b = 1.7;
    let x = sample_laplacian(1_000_000, 1, b, RngSeed(42)).unwrap();
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() <= 0.01 * b, "mean {mean}");
    assert!((var / (2.0 * b * b) - 1.0).abs() <= 0.02, "variance {var}");
    assert_eq!(laplace_quantile(0.5, b), 0.0);
}

#[test]
fn instances_have_exact_snr_and_supports() {
    for noise in [NoiseKind::Gaussian, NoiseKind::Laplacian] {
        let inst = generate_instance(&SynthSpec { noise, seed: RngSeed(5), ..Default::default() }).unwrap();
        assert!((realized_snr_db(&inst.clean, &inst.noisy) - 20.0).abs() <= 1e-9);
        for n in 0..inst.codes.n_examples() {
            assert_eq!(inst.codes.column(n).iter().filter(|v| **v != 0.0).count(), 3);
        }
        for j in 0..50 {
            let norm = inst.dictionary.atom(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn negligible_noise_at_high_snr() {
    let inst = generate_instance(&SynthSpec { snr_db: 300.0, ..Default::default() }).unwrap();
    let diff: f64 = inst.noisy.examples().iter().zip(inst.clean.examples().iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let clean: f64 = inst.clean.examples().iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(diff / clean <= 1e-14);
}
