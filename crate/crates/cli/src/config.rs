//! Run configuration: a flat key=value view over every knob, resolved with
//! precedence built-in defaults < preset < config file < command line, and
//! echoed to the run directory for reproducibility.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use skyrm_core::activation::ActivationKind;
use skyrm_core::augment::AugmentSpec;
use skyrm_core::error::{Error, Result};
use skyrm_core::loss::LossConfig;
use skyrm_core::synth::SynthSpec;
use skyrm_core::train::TrainConfig;
use skyrm_core::unet::UNetConfig;

/// Canonical key list with built-in defaults. The defaults equal the
/// `benchmark3` preset expansion, which is the default preset.
const DEFAULTS: &[(&str, &str)] = &[
    ("preset", "benchmark3"),
    // network
    ("depth", "3"),
    ("base_channels", "16"),
    ("num_classes", "3"),
    ("activation", "relu"),
    ("dropout", "0.05"),
    ("input_size", "128x128"),
    // training
    ("epochs", "15"),
    ("batch_size", "8"),
    ("learning_rate", "0.001"),
    ("early_stop_patience", "3"),
    ("plateau_patience", "3"),
    ("plateau_factor", "0.5"),
    ("min_lr", "1e-6"),
    ("runs", "1"),
    ("seed", "42"),
    ("threads", "0"),
    // loss
    ("label_smoothing", "0.2"),
    ("class_weights", ""),
    // augmentation
    ("aug_rot90", "false"),
    ("aug_noise", "false"),
    ("aug_noise_sigma", "0.05"),
    ("aug_shift", "false"),
    ("aug_shift_fraction", "0.1"),
    ("aug_scale", "false"),
    ("aug_scale_factor", "0.2"),
    ("aug_contrast", "false"),
    ("aug_contrast_limit", "0.3"),
    ("aug_brightness", "false"),
    ("aug_brightness_limit", "0.3"),
    ("aug_inversion", "false"),
    // prediction
    ("tta", "false"),
    // synthetic data generation
    ("synth_train", "80"),
    ("synth_val", "20"),
    ("synth_test", "20"),
    ("synth_size", "128x128"),
    ("synth_skyrmion_fraction", "0.19"),
    ("synth_radius_min", "4"),
    ("synth_radius_max", "20"),
    ("synth_defects_max", "2"),
    ("synth_noise_min", "0.02"),
    ("synth_noise_max", "0.22"),
    ("synth_gradient_max", "0.15"),
    // paths
    ("data_dir", ""),
    ("input_dir", ""),
    ("pred_dir", ""),
    ("truth_dir", ""),
    ("checkpoint", ""),
    ("image", ""),
    ("out", ""),
    ("run_name", "auto"),
    // evaluation
    ("speckle_max_size", "10"),
    ("connectivity", "8"),
    ("hist_bin_width", "25"),
    ("hist_max", "2000"),
    ("min_defect_size", "20"),
    ("probe_size", "64x64"),
];

/// Presets encode the benchmark and optimized model rows. Expanded over the
/// defaults before file and command-line values apply.
const PRESETS: &[(&str, &[(&str, &str)])] = &[
    ("benchmark2", &[
        ("num_classes", "2"),
        ("dropout", "0.05"),
        ("label_smoothing", "0.2"),
        ("activation", "relu"),
    ]),
    ("benchmark3", &[
        ("num_classes", "3"),
        ("dropout", "0.05"),
        ("label_smoothing", "0.2"),
        ("activation", "relu"),
    ]),
    ("master", &[
        ("num_classes", "3"),
        ("dropout", "0.10"),
        ("label_smoothing", "0.2"),
        ("activation", "relu"),
        ("aug_rot90", "true"),
        ("aug_noise", "true"),
        ("aug_shift", "true"),
        ("aug_scale", "true"),
        ("aug_contrast", "true"),
        ("aug_brightness", "true"),
        ("aug_inversion", "false"),
    ]),
    ("inversion", &[
        ("num_classes", "3"),
        ("dropout", "0.10"),
        ("label_smoothing", "0.2"),
        ("activation", "relu"),
        ("aug_rot90", "true"),
        ("aug_noise", "true"),
        ("aug_shift", "true"),
        ("aug_scale", "true"),
        ("aug_contrast", "true"),
        ("aug_brightness", "true"),
        ("aug_inversion", "true"),
    ]),
];

#[derive(Clone, Debug)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn known_key(key: &str) -> bool {
    DEFAULTS.iter().any(|(k, _)| *k == key)
}

impl RunConfig {
    /// Resolve the four layers. `file` and each override are `key=value`
    /// pairs; unknown keys are rejected by name.
    pub fn resolve(
        file: Option<&Path>,
        preset_flag: Option<&str>,
        overrides: &[(String, String)],
    ) -> Result<RunConfig> {
        let file_entries = match file {
            Some(path) => parse_config_file(path)?,
            None => Vec::new(),
        };
        for (key, _) in &file_entries {
            if !known_key(key) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
        }
        for (key, _) in overrides {
            if !known_key(key) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
        }

        // Preset name: --preset flag > --set override > config file > default.
        let preset_name = preset_flag
            .map(|s| s.to_string())
            .or_else(|| {
                overrides
                    .iter()
                    .rev()
                    .find(|(k, _)| k == "preset")
                    .map(|(_, v)| v.clone())
            })
            .or_else(|| {
                file_entries
                    .iter()
                    .rev()
                    .find(|(k, _)| k == "preset")
                    .map(|(_, v)| v.clone())
            })
            .unwrap_or_else(|| "benchmark3".to_string());
        let preset = PRESETS
            .iter()
            .find(|(name, _)| *name == preset_name)
            .map(|(_, kv)| *kv)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset `{preset_name}` (available: benchmark2, benchmark3, master, inversion)"
                ))
            })?;

        let mut values: BTreeMap<String, String> = DEFAULTS
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        values.insert("preset".into(), preset_name.clone());
        for (k, v) in preset {
            values.insert(k.to_string(), v.to_string());
        }
        for (k, v) in file_entries {
            values.insert(k, v);
        }
        for (k, v) in overrides {
            values.insert(k.clone(), v.clone());
        }
        // The preset name itself must not be silently overwritten by layering.
        values.insert("preset".into(), preset_name);
        Ok(RunConfig { values })
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(|s| s.as_str())
            .unwrap_or_else(|| panic!("unknown config key `{key}` requested"))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key);
        raw.parse().map_err(|_| {
            Error::Config(format!("cannot parse `{key}` from value `{raw}`"))
        })
    }

    pub fn parse_bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" | "1" | "yes" | "on" => Ok(true),
            "false" | "0" | "no" | "off" => Ok(false),
            other => Err(Error::Config(format!(
                "cannot parse `{key}` from value `{other}` (expected true/false)"
            ))),
        }
    }

    /// "HxW" pairs such as `128x128`.
    pub fn parse_size(&self, key: &str) -> Result<(usize, usize)> {
        let raw = self.get(key);
        let (h, w) = raw
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::Config(format!("`{key}` must look like 128x128, got `{raw}`")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("`{key}` must look like 128x128, got `{raw}`")))
        };
        Ok((parse(h)?, parse(w)?))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        let raw = self.get(key);
        if raw.is_empty() {
            return Err(Error::Config(format!(
                "`{key}` is required for this command"
            )));
        }
        Ok(PathBuf::from(raw))
    }

    /// Canonical echo, one key per line in fixed order.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (key, _) in DEFAULTS {
            s.push_str(&format!("{key} = {}\n", self.get(key)));
        }
        s
    }

    pub fn unet_config(&self) -> Result<UNetConfig> {
        let config = UNetConfig {
            depth: self.parse("depth")?,
            base_channels: self.parse("base_channels")?,
            num_classes: self.parse("num_classes")?,
            activation: ActivationKind::parse(self.get("activation")).ok_or_else(|| {
                Error::Config(format!(
                    "unknown activation `{}` (relu, prelu, tanh, mish)",
                    self.get("activation")
                ))
            })?,
            dropout_rate: self.parse("dropout")?,
            input_size: self.parse_size("input_size")?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let config = TrainConfig {
            epochs: self.parse("epochs")?,
            batch_size: self.parse("batch_size")?,
            learning_rate: self.parse("learning_rate")?,
            early_stop_patience: self.parse("early_stop_patience")?,
            plateau_patience: self.parse("plateau_patience")?,
            plateau_factor: self.parse("plateau_factor")?,
            min_lr: self.parse("min_lr")?,
            runs: self.parse("runs")?,
            base_seed: self.parse("seed")?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn loss_config(&self) -> Result<LossConfig> {
        let weights_raw = self.get("class_weights");
        let class_weights = if weights_raw.is_empty() {
            None
        } else {
            let parsed: std::result::Result<Vec<f64>, _> = weights_raw
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect();
            Some(parsed.map_err(|_| {
                Error::Config(format!(
                    "cannot parse `class_weights` from value `{weights_raw}`"
                ))
            })?)
        };
        Ok(LossConfig {
            smoothing_alpha: self.parse("label_smoothing")?,
            class_weights,
        })
    }

    pub fn augment_spec(&self) -> Result<AugmentSpec> {
        Ok(AugmentSpec {
            rot90: self.parse_bool("aug_rot90")?,
            noise: self.parse_bool("aug_noise")?,
            noise_sigma_max: self.parse("aug_noise_sigma")?,
            shift: self.parse_bool("aug_shift")?,
            shift_max_fraction: self.parse("aug_shift_fraction")?,
            scale: self.parse_bool("aug_scale")?,
            scale_max_factor: self.parse("aug_scale_factor")?,
            contrast: self.parse_bool("aug_contrast")?,
            contrast_limit: self.parse("aug_contrast_limit")?,
            brightness: self.parse_bool("aug_brightness")?,
            brightness_limit: self.parse("aug_brightness_limit")?,
            inversion: self.parse_bool("aug_inversion")?,
        })
    }

    pub fn synth_spec(&self) -> Result<SynthSpec> {
        let (h, w) = self.parse_size("synth_size")?;
        let spec = SynthSpec {
            train_images: self.parse("synth_train")?,
            val_images: self.parse("synth_val")?,
            test_images: self.parse("synth_test")?,
            height: h,
            width: w,
            classes: 3,
            skyrmion_fraction: self.parse("synth_skyrmion_fraction")?,
            radius_min: self.parse("synth_radius_min")?,
            radius_max: self.parse("synth_radius_max")?,
            eccentricity_max: 1.5,
            defects_max: self.parse("synth_defects_max")?,
            noise_min: self.parse("synth_noise_min")?,
            noise_max: self.parse("synth_noise_max")?,
            gradient_max: self.parse("synth_gradient_max")?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn connectivity(&self) -> Result<skyrm_core::components::Connectivity> {
        match self.get("connectivity") {
            "8" => Ok(skyrm_core::components::Connectivity::Eight),
            "4" => Ok(skyrm_core::components::Connectivity::Four),
            other => Err(Error::Config(format!(
                "connectivity must be 4 or 8, got `{other}`"
            ))),
        }
    }

    /// Output root: `out` key, then $SKYRM_OUT, then ./runs.
    pub fn out_root(&self) -> PathBuf {
        let raw = self.get("out");
        if !raw.is_empty() {
            return PathBuf::from(raw);
        }
        if let Ok(env) = std::env::var("SKYRM_OUT") {
            if !env.is_empty() {
                return PathBuf::from(env);
            }
        }
        PathBuf::from("runs")
    }
}

/// Plain-text config: one `key = value` per line, `#` comments.
pub fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    let mut out = Vec::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{}:{}: expected `key = value`, got `{raw_line}`",
                path.display(),
                lineno + 1
            ))
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Parse a `KEY=VALUE` command-line override.
pub fn parse_override(raw: &str) -> Result<(String, String)> {
    let (k, v) = raw
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{raw}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}
