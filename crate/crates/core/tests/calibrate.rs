//! Manual calibration probe for the 2-class vs 3-class comparison.
//! Run with: cargo test -p skyrm-core --test calibrate -- --ignored --nocapture

use std::time::Instant;

use skyrm_core::activation::ActivationKind;
use skyrm_core::augment::AugmentSpec;
use skyrm_core::components::{speckle_count, Connectivity};
use skyrm_core::loss::LossConfig;
use skyrm_core::metrics::mcc;
use skyrm_core::probe::greyscale_probe;
use skyrm_core::synth::{synth_generate, SynthSpec};
use skyrm_core::train::{fit, validation_counts, TrainConfig};
use skyrm_core::unet::{self, UNetConfig};

#[test]
#[ignore]
fn two_vs_three_class_gap() {
    let spec = SynthSpec {
        train_images: 300,
        val_images: 60,
        test_images: 20,
        classes: 3,
        ..Default::default()
    };
    let t0 = Instant::now();
    let data3 = synth_generate(&spec, 2024).unwrap();
    let data2 = data3.collapse_to_2class();
    println!("synth: {:.1}s", t0.elapsed().as_secs_f64());

    let train_cfg = TrainConfig {
        epochs: 12,
        batch_size: 8,
        early_stop_patience: 3,
        plateau_patience: 3,
        ..Default::default()
    };
    let loss_cfg = LossConfig::default();
    let aug = AugmentSpec::default();

    let mut results = Vec::new();
    for (name, classes, data) in [("2-class", 2usize, &data2), ("3-class", 3usize, &data3)] {
        let config = UNetConfig {
            depth: 2,
            base_channels: 8,
            num_classes: classes,
            activation: ActivationKind::Relu,
            dropout_rate: 0.05,
            input_size: (128, 128),
        };
        let t = Instant::now();
        let (report, best) = fit(
            &config,
            &data.train,
            &data.val,
            &train_cfg,
            &loss_cfg,
            &aug,
            0,
        )
        .unwrap();
        let dt = t.elapsed().as_secs_f64();
        println!(
            "{name}: best val MCC {:.4} at epoch {} ({} epochs, {:.1}s, {:.1}s/epoch)",
            report.best_val_mcc,
            report.best_epoch,
            report.epochs_ran,
            dt,
            dt / report.epochs_ran as f64
        );
        for row in &report.rows {
            println!("  epoch {:2}: loss {:.5} val_mcc {:.4} lr {}", row.epoch, row.train_loss, row.val_mcc, row.lr);
        }

        // Speckles on high-noise images.
        let noisy_spec = SynthSpec {
            train_images: 0,
            val_images: 0,
            test_images: 20,
            classes,
            noise_min: 0.15,
            noise_max: 0.25,
            ..Default::default()
        };
        let noisy = synth_generate(&noisy_spec, 777).unwrap();
        let mut speckles = Vec::new();
        for s in &noisy.test {
            let pred = unet::predict(&best.params, &config, s.image.to_tensor()).unwrap();
            speckles.push(speckle_count(&pred, 1, Connectivity::Eight, 10).unwrap());
        }
        speckles.sort_unstable();
        println!("{name}: speckle counts {:?} (median {})", speckles, speckles[speckles.len() / 2]);

        if classes == 2 {
            let probe = greyscale_probe(&best.params, &config, (64, 64)).unwrap();
            println!(
                "{name}: probe transitions at {:?}, dominant at 0 = {}, at 255 = {}",
                probe.transitions,
                probe.rows[0].dominant_class,
                probe.rows[255].dominant_class
            );
        }
        let test_mcc = mcc(&validation_counts(&best.params, &config, &data.test).unwrap());
        println!("{name}: test MCC {test_mcc:.4}");
        if classes == 3 {
            use skyrm_core::components::{size_histogram, uniform_bins};
            let edges = uniform_bins(25.0, 2000.0);
            let preds: Vec<_> = data.test.iter()
                .map(|s| unet::predict(&best.params, &config, s.image.to_tensor()).unwrap())
                .collect();
            let pred_refs: Vec<_> = preds.iter().collect();
            let truth_refs: Vec<_> = data.test.iter().map(|s| &s.mask).collect();
            let ph = size_histogram(&pred_refs, 1, skyrm_core::components::Connectivity::Eight, &edges).unwrap();
            let th = size_histogram(&truth_refs, 1, skyrm_core::components::Connectivity::Eight, &edges).unwrap();
            println!("{name}: size mean pred {:?} truth {:?}", ph.mean, th.mean);
        }
        results.push(report.best_val_mcc);
    }
    println!(
        "gap (3-class - 2-class) = {:.4}",
        results[1] - results[0]
    );
}
