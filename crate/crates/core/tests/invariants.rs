use ihqgan::config::RunConfig;
use ihqgan::image::{ImageTensor, PIXELS, SIDE};
use ihqgan::losses::ssim;
use ihqgan::metrics::psnr;
use ihqgan::postprocess::post_process;
use ihqgan::qgen::{decode_probs_to_pixels, DecodeRule};
use ihqgan::qsim::{self, measure_probs};
use ihqgan::tensor_io::{decode_tensors, encode_tensors, Tensor};
use proptest::prelude::*;

fn image() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, PIXELS)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn post_process_is_idempotent_and_keeps_interior(px in image()) {
        let img = ImageTensor::from_vec(px).unwrap();
        let once = post_process(&img);
        prop_assert_eq!(&post_process(&once), &once);
        for r in 8..26 {
            prop_assert_eq!(once.row(r), img.row(r));
        }
        prop_assert!(once.row(0).iter().chain(once.row(SIDE - 1)).all(|&v| v == 0.0));
    }

    #[test]
    fn ssim_is_symmetric_and_bounded(a in image(), b in image()) {
        let (ab, ba) = (ssim(&a, &b), ssim(&b, &a));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12 && ab >= -1.0 - 1e-12);
        prop_assert!((ssim(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_of_unit_range_images_is_non_negative(a in image(), b in image()) {
        prop_assert!(psnr(&a, &b, 1.0) >= 0.0);
    }

    #[test]
    fn encoding_and_measurement_conserve_probability(patch in prop::collection::vec(0.0..=1.0f64, 32)) {
        let state = qsim::amplitude_encode(&patch).unwrap();
        prop_assert!((state.norm() - 1.0).abs() < 1e-12);
        let probs = measure_probs(&state);
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for rule in [DecodeRule::MaxNorm, DecodeRule::SumNorm] {
            let px = decode_probs_to_pixels(&probs, rule);
            prop_assert!(px.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let max_px = decode_probs_to_pixels(&probs, DecodeRule::MaxNorm);
        prop_assert!(max_px.iter().any(|&v| v == 1.0));
    }

    #[test]
    fn tensor_files_round_trip(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let data: Vec<f64> = (0..rows * cols).map(|i| f64::from_bits(seed.wrapping_mul(i as u64 + 1) >> 2)).collect();
        let t = Tensor::new(vec![rows, cols], data).unwrap();
        let back = decode_tensors(&encode_tensors(std::slice::from_ref(&t))).unwrap();
        prop_assert_eq!(back, vec![t]);
    }

    #[test]
    fn config_text_round_trips(eta in 0.0..1e3f64, lr in 1e-6..1.0f64, epochs in 1usize..500, seed in any::<u64>()) {
        let mut cfg = RunConfig::default();
        cfg.train.weights.eta = eta;
        cfg.train.lr_gen = lr;
        cfg.train.epochs = epochs;
        cfg.train.seed = seed;
        prop_assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }
}
