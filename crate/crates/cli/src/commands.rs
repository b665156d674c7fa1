//! Subcommand implementations. Every command resolves a [`RunConfig`],
//! creates a timestamped run directory under the output root, echoes the
//! fully resolved config there, and writes its artifacts inside it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use skyrm_core::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use skyrm_core::components::{connected_components, size_histogram, speckle_count, uniform_bins};
use skyrm_core::dataset::{load_dataset, save_dataset, split_summary};
use skyrm_core::error::{Error, Result};
use skyrm_core::imageio;
use skyrm_core::mask::{ClassMask, CLASS_DEFECT, CLASS_SKYRMION};
use skyrm_core::metrics::{confusion_from_masks, mcc, ConfusionCounts, PositiveRule};
use skyrm_core::probe::{greyscale_probe, inversion_experiment, probe_csv};
use skyrm_core::synth::synth_generate;
use skyrm_core::train::{multi_run, report_csv};
use skyrm_core::tta::tta_predict;
use skyrm_core::unet;

use crate::config::RunConfig;
use crate::plot;

/// Create `<out_root>/<run_name>/` and drop the echoed config inside.
/// Auto names are timestamped; explicit names must be fresh.
pub fn create_run_dir(cfg: &RunConfig, command: &str) -> Result<PathBuf> {
    let root = cfg.out_root();
    let dir = match cfg.get("run_name") {
        "auto" => {
            let base = format!(
                "{command}-{}",
                chrono::Local::now().format("%Y%m%d-%H%M%S")
            );
            let mut dir = root.join(&base);
            let mut n = 1;
            while dir.exists() {
                n += 1;
                dir = root.join(format!("{base}-{n}"));
            }
            dir
        }
        name => {
            let dir = root.join(name);
            if dir.exists() {
                return Err(Error::Config(format!(
                    "run directory {} already exists",
                    dir.display()
                )));
            }
            dir
        }
    };
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.txt"), cfg.echo())?;
    println!("run_dir: {}", dir.display());
    Ok(dir)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let unet_config = cfg.unet_config()?;
    let train_cfg = cfg.train_config()?;
    let loss_cfg = cfg.loss_config()?;
    let augment = cfg.augment_spec()?;
    let data_dir = cfg.require_path("data_dir")?;
    let data = load_dataset(&data_dir, unet_config.num_classes)?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::Data(format!(
            "dataset {} needs non-empty train/ and val/ splits",
            data_dir.display()
        )));
    }
    let run_dir = create_run_dir(cfg, "train")?;

    let (mut report, checkpoints) = multi_run(
        &unet_config,
        &data.train,
        &data.val,
        &train_cfg,
        &loss_cfg,
        &augment,
    )?;
    for (run, ckpt) in report.runs.iter_mut().zip(&checkpoints) {
        let path = run_dir.join(format!("run{}_best.skrm", run.run));
        save_checkpoint(&path, ckpt)?;
        run.checkpoint_path = Some(path.display().to_string());
        println!(
            "run {}: best val MCC {:.4} at epoch {} -> {}",
            run.run,
            run.best_val_mcc,
            run.best_epoch,
            path.display()
        );
    }
    std::fs::write(run_dir.join("train_report.csv"), report_csv(&report))?;
    std::fs::write(
        run_dir.join("train_report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    println!(
        "validation MCC over {} run(s): mean {:.4}, SD {:.4}",
        report.runs.len(),
        report.mean_mcc,
        report.sd_mcc
    );
    if report.partial {
        for f in &report.failed_runs {
            eprintln!("aborted: {f}");
        }
        return Err(Error::Internal(format!(
            "{} of {} runs aborted; aggregate is partial",
            report.failed_runs.len(),
            train_cfg.runs
        )));
    }
    Ok(())
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Data(format!(
            "input directory {} does not exist",
            dir.display()
        )));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()),
                Some(ref e) if e == "pgm" || e == "png"
            )
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!(
            "no .pgm/.png images under {}",
            dir.display()
        )));
    }
    Ok(files)
}

fn load_checkpoint_checked(cfg: &RunConfig) -> Result<Checkpoint> {
    let path = cfg.require_path("checkpoint")?;
    if !path.is_file() {
        return Err(Error::Data(format!(
            "checkpoint {} does not exist",
            path.display()
        )));
    }
    load_checkpoint(&path)
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<()> {
    let ckpt = load_checkpoint_checked(cfg)?;
    let input_dir = cfg.require_path("input_dir")?;
    let images = list_images(&input_dir)?;
    let use_tta = cfg.parse_bool("tta")?;

    let run_dir = create_run_dir(cfg, "predict")?;
    let masks_dir = run_dir.join("masks");
    std::fs::create_dir_all(&masks_dir)?;
    for path in &images {
        let image = imageio::load_image(path)?;
        let mask = if use_tta {
            tta_predict(&ckpt.params, &ckpt.config, &image)?.1
        } else {
            unet::predict(&ckpt.params, &ckpt.config, image.to_tensor())?
        };
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mask");
        imageio::save_mask(&masks_dir.join(format!("{stem}.png")), &mask)?;
    }
    println!(
        "predicted {} mask(s) into {}",
        images.len(),
        masks_dir.display()
    );
    Ok(())
}

fn masks_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut map = BTreeMap::new();
    for path in list_images(dir)? {
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            map.insert(stem.to_string(), path.clone());
        }
    }
    Ok(map)
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let pred_dir = cfg.require_path("pred_dir")?;
    let truth_dir = cfg.require_path("truth_dir")?;
    let connectivity = cfg.connectivity()?;
    let speckle_max: usize = cfg.parse("speckle_max_size")?;
    let bin_width: f64 = cfg.parse("hist_bin_width")?;
    let hist_max: f64 = cfg.parse("hist_max")?;

    let preds = masks_by_stem(&pred_dir)?;
    let truths = masks_by_stem(&truth_dir)?;
    let run_dir = create_run_dir(cfg, "eval")?;

    let rule = PositiveRule::default();
    let mut csv = String::from("file,tp,tn,fp,fn,mcc,speckles\n");
    let mut pooled = ConfusionCounts::default();
    let mut pred_masks = Vec::new();
    let mut truth_masks = Vec::new();
    for (stem, pred_path) in &preds {
        let truth_path = truths.get(stem).ok_or_else(|| {
            Error::Data(format!(
                "no ground-truth mask for {} under {}",
                pred_path.display(),
                truth_dir.display()
            ))
        })?;
        let pred = imageio::load_mask(pred_path, 3)?;
        let truth = imageio::load_mask(truth_path, 3)?;
        if pred.dims() != truth.dims() {
            return Err(Error::Shape(format!(
                "{} is {}x{} but {} is {}x{}",
                pred_path.display(),
                pred.dims().0,
                pred.dims().1,
                truth_path.display(),
                truth.dims().0,
                truth.dims().1
            )));
        }
        let counts = confusion_from_masks(&pred, &truth, &rule)?;
        let speckles = speckle_count(&pred, CLASS_SKYRMION, connectivity, speckle_max)?;
        csv.push_str(&format!(
            "{stem},{},{},{},{},{},{speckles}\n",
            counts.tp,
            counts.tn,
            counts.fp,
            counts.fn_,
            mcc(&counts)
        ));
        pooled.merge(&counts);
        pred_masks.push(pred);
        truth_masks.push(truth);
    }
    std::fs::write(run_dir.join("metrics.csv"), csv)?;

    let edges = uniform_bins(bin_width, hist_max);
    let pred_refs: Vec<&ClassMask> = pred_masks.iter().collect();
    let truth_refs: Vec<&ClassMask> = truth_masks.iter().collect();
    let pred_hist = size_histogram(&pred_refs, CLASS_SKYRMION, connectivity, &edges)?;
    let truth_hist = size_histogram(&truth_refs, CLASS_SKYRMION, connectivity, &edges)?;
    for (name, hist) in [("histogram.csv", &pred_hist), ("truth_histogram.csv", &truth_hist)] {
        let mut s = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in hist.counts.iter().enumerate() {
            s.push_str(&format!("{},{},{c}\n", hist.edges[i], hist.edges[i + 1]));
        }
        std::fs::write(run_dir.join(name), s)?;
    }

    let pooled_mcc = mcc(&pooled);
    let summary = serde_json::json!({
        "images": preds.len(),
        "pooled": pooled,
        "pooled_mcc": pooled_mcc,
        "pred_size_mean": pred_hist.mean,
        "truth_size_mean": truth_hist.mean,
        "pred_secondary_mode": pred_hist.secondary_mode,
    });
    std::fs::write(
        run_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    println!("evaluated {} image(s): pooled MCC {pooled_mcc:.4}", preds.len());
    Ok(())
}

pub fn cmd_probe(cfg: &RunConfig) -> Result<()> {
    let ckpt = load_checkpoint_checked(cfg)?;
    let probe_size = cfg.parse_size("probe_size")?;
    let factor = ckpt.config.pool_factor();
    if probe_size.0 % factor != 0 || probe_size.1 % factor != 0 {
        return Err(Error::Config(format!(
            "probe_size {}x{} not divisible by the checkpoint's 2^depth = {factor}",
            probe_size.0, probe_size.1
        )));
    }
    let run_dir = create_run_dir(cfg, "probe")?;
    let report = greyscale_probe(&ckpt.params, &ckpt.config, probe_size)?;
    std::fs::write(
        run_dir.join("probe.csv"),
        probe_csv(&report, ckpt.config.num_classes),
    )?;
    let summary = serde_json::json!({
        "transitions": report.transitions,
        "dominant_at_0": report.rows[0].dominant_class,
        "dominant_at_255": report.rows[255].dominant_class,
    });
    std::fs::write(
        run_dir.join("probe_summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    println!(
        "probe: dominant class {} at level 0, {} at level 255, transitions at {:?}",
        report.rows[0].dominant_class, report.rows[255].dominant_class, report.transitions
    );

    let image_path = cfg.get("image");
    if !image_path.is_empty() {
        let image = imageio::load_image(Path::new(image_path))?;
        let inv = inversion_experiment(&ckpt.params, &ckpt.config, &image)?;
        std::fs::write(
            run_dir.join("inversion.json"),
            serde_json::to_string_pretty(&inv).expect("report serializes"),
        )?;
        println!(
            "inversion: agreement {:.4}, original fractions {:?}, inverted {:?}",
            inv.agreement, inv.original_fractions, inv.inverted_fractions
        );
    }
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let spec = cfg.synth_spec()?;
    let seed: u64 = cfg.parse("seed")?;
    let run_dir = create_run_dir(cfg, "synth")?;
    let dataset_dir = match cfg.get("data_dir") {
        "" => run_dir.join("dataset"),
        explicit => PathBuf::from(explicit),
    };
    let data = synth_generate(&spec, seed)?;
    save_dataset(&dataset_dir, &data)?;
    let summary = split_summary(&data);
    std::fs::write(
        run_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    println!(
        "dataset: {} train / {} val / {} test images at {} -> {}",
        data.train.len(),
        data.val.len(),
        data.test.len(),
        cfg.get("synth_size"),
        dataset_dir.display()
    );
    println!(
        "train skyrmion pixel fraction {:.3}, {} instances",
        summary.train.skyrmion_pixel_fraction, summary.train.skyrmion_instances
    );
    Ok(())
}

pub fn cmd_bootstrap(cfg: &RunConfig) -> Result<()> {
    let ckpt = load_checkpoint_checked(cfg)?;
    if ckpt.config.num_classes != 3 {
        return Err(Error::Config(format!(
            "bootstrap needs a 3-class (defect-aware) checkpoint, this one has {} classes",
            ckpt.config.num_classes
        )));
    }
    let input_dir = cfg.require_path("input_dir")?;
    let min_defect_size: usize = cfg.parse("min_defect_size")?;
    let connectivity = cfg.connectivity()?;
    let images_dir = input_dir.join("images");
    let masks_dir = input_dir.join("masks");
    let images = list_images(&images_dir)?;

    let run_dir = create_run_dir(cfg, "bootstrap")?;
    let out_masks = run_dir.join("masks");
    std::fs::create_dir_all(&out_masks)?;

    let mut relabeled_pixels = 0usize;
    for path in &images {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Data(format!("bad image name {}", path.display())))?;
        let mask_path = ["png", "pgm"]
            .iter()
            .map(|ext| masks_dir.join(format!("{stem}.{ext}")))
            .find(|p| p.is_file())
            .ok_or_else(|| {
                Error::Data(format!(
                    "no 2-class mask for {} under {}",
                    path.display(),
                    masks_dir.display()
                ))
            })?;
        let image = imageio::load_image(path)?;
        // Existing labels, read in the 2-class view.
        let labels = imageio::load_mask(&mask_path, 2)?;
        if labels.dims() != image.dims() {
            return Err(Error::Shape(format!(
                "{} is {}x{} but {} is {}x{}",
                path.display(),
                image.dims().0,
                image.dims().1,
                mask_path.display(),
                labels.dims().0,
                labels.dims().1
            )));
        }
        let pred = unet::predict(&ckpt.params, &ckpt.config, image.to_tensor())?;
        // Merge predicted defect components that pass the size filter;
        // existing skyrmion labels win over predicted defects.
        let mut merged = labels.clone();
        for comp in connected_components(&pred, CLASS_DEFECT, connectivity)? {
            if comp.size < min_defect_size {
                continue;
            }
            for (y, x) in comp.pixels {
                if merged.at(y, x) != CLASS_SKYRMION {
                    merged.set(y, x, CLASS_DEFECT);
                    relabeled_pixels += 1;
                }
            }
        }
        imageio::save_mask(&out_masks.join(format!("{stem}.png")), &merged)?;
    }
    println!(
        "bootstrapped {} mask(s) into {} ({} pixels relabeled as defect)",
        images.len(),
        out_masks.display(),
        relabeled_pixels
    );
    Ok(())
}

pub fn cmd_report(cfg: &RunConfig, run: &Path) -> Result<()> {
    if !run.is_dir() {
        return Err(Error::Data(format!(
            "run directory {} does not exist",
            run.display()
        )));
    }
    let _ = cfg;
    let mut produced = 0;
    let report_path = run.join("train_report.json");
    if report_path.is_file() {
        let text = std::fs::read_to_string(&report_path)?;
        let json: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", report_path.display())))?;
        let mean = json["mean_mcc"].as_f64().unwrap_or(f64::NAN);
        let sd = json["sd_mcc"].as_f64().unwrap_or(f64::NAN);
        let n = json["runs"].as_array().map(|a| a.len()).unwrap_or(0);
        println!("training: {n} run(s), validation MCC mean {mean:.4} ± {sd:.4} SD");
        produced += 1;
    }
    for (csv_name, png_name, title) in [
        ("histogram.csv", "histogram.png", "predicted skyrmion sizes"),
        ("truth_histogram.csv", "truth_histogram.png", "true skyrmion sizes"),
    ] {
        let csv_path = run.join(csv_name);
        if csv_path.is_file() {
            let png_path = run.join(png_name);
            plot::histogram_png(&csv_path, &png_path, title)?;
            println!("wrote {}", png_path.display());
            produced += 1;
        }
    }
    let probe_path = run.join("probe.csv");
    if probe_path.is_file() {
        let png_path = run.join("probe.png");
        plot::probe_png(&probe_path, &png_path)?;
        println!("wrote {}", png_path.display());
        produced += 1;
    }
    if produced == 0 {
        return Err(Error::Data(format!(
            "{} holds no train_report.json, histogram.csv or probe.csv to report on",
            run.display()
        )));
    }
    Ok(())
}
