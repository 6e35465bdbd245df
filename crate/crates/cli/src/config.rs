//! Line-oriented `key = value` pipeline configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys and malformed
//! values are errors. Keys that are not given keep their defaults, except
//! that `sigma_theta` follows `n_orients` unless set explicitly.

use anyhow::{anyhow, bail, Context, Result};

use filer::energy::Rectification;
use filer::filterbank::{default_sigma_theta, ExponentForm};
use filer::matcher::{Compensation, PipelineConfig};

/// Every accepted key with a one-line description, in file order.
pub const KEYS: &[(&str, &str)] = &[
    ("n_scales", "filter bank scales"),
    ("n_orients", "filter bank orientations"),
    ("min_wavelength", "finest wavelength in pixels"),
    ("scale_mult", "wavelength ratio between scales"),
    ("sigma_f_ratio", "radial bandwidth sigma_f / f0"),
    ("sigma_theta", "angular bandwidth in radians"),
    ("exponent_form", "squared | literal"),
    ("k_noise", "noise threshold in Rayleigh standard deviations"),
    ("spread_cutoff", "frequency spread sigmoid cutoff"),
    ("spread_gain", "frequency spread sigmoid gain"),
    ("energy_epsilon", "amplitude normalisation floor"),
    ("rectification", "clamp | absolute"),
    ("guided_sigma_s", "guided filter spatial sigma"),
    (
        "guided_sigma_r_fraction",
        "guided filter range sigma over the energy range",
    ),
    ("guided_window_radius", "guided filter window radius"),
    ("fast_threshold", "segment test threshold on the rescaled structure map"),
    ("nonmax_radius", "non-maximum suppression radius"),
    ("max_features", "strongest features kept per image"),
    ("border_margin", "detector border margin"),
    ("weighting_sigma", "spatial sigma of the orientation weighting"),
    ("normalize_epsilon", "orientation stack normalisation floor"),
    ("radius", "descriptor radius in pixels"),
    ("direction_bins", "main direction histogram bins"),
    ("delta", "final consensus inlier bound in pixels"),
    ("max_iterations", "consensus iteration cap"),
    ("seed", "consensus rng seed"),
    ("min_inliers", "fewest inliers accepted"),
    ("coarse_delta", "coarse rotation inlier bound in pixels"),
    ("coarse_max_features", "features per image in the coarse stage"),
    ("coarse_both_polarities", "also match B at main direction + pi"),
    ("rotation_compensation", "estimate and compensate rotation"),
    ("compensation", "steer | bin-shift"),
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow!("{key}: cannot parse {v:?}: {e}"))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("{key}: expected true or false, got {v:?}"),
    }
}

pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let mut c = PipelineConfig::default();
    let mut sigma_theta_set = false;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
        let (key, v) = (key.trim(), value.trim());
        let fb = &mut c.filter_bank;
        match key {
            "n_scales" => fb.n_scales = num(key, v)?,
            "n_orients" => fb.n_orients = num(key, v)?,
            "min_wavelength" => fb.min_wavelength = num(key, v)?,
            "scale_mult" => fb.scale_mult = num(key, v)?,
            "sigma_f_ratio" => fb.sigma_f_ratio = num(key, v)?,
            "sigma_theta" => {
                fb.sigma_theta = num(key, v)?;
                sigma_theta_set = true;
            }
            "exponent_form" => {
                fb.exponent_form = match v {
                    "squared" => ExponentForm::Squared,
                    "literal" => ExponentForm::Literal,
                    _ => bail!("exponent_form: expected squared or literal, got {v:?}"),
                }
            }
            "k_noise" => c.energy.k_noise = num(key, v)?,
            "spread_cutoff" => c.energy.spread_cutoff = num(key, v)?,
            "spread_gain" => c.energy.spread_gain = num(key, v)?,
            "energy_epsilon" => c.energy.epsilon = num(key, v)?,
            "rectification" => {
                c.energy.rectification = match v {
                    "clamp" => Rectification::Clamp,
                    "absolute" => Rectification::Absolute,
                    _ => bail!("rectification: expected clamp or absolute, got {v:?}"),
                }
            }
            "guided_sigma_s" => c.guided_sigma_s = num(key, v)?,
            "guided_sigma_r_fraction" => c.guided_sigma_r_fraction = num(key, v)?,
            "guided_window_radius" => c.guided_window_radius = num(key, v)?,
            "fast_threshold" => c.detector.fast_threshold = num(key, v)?,
            "nonmax_radius" => c.detector.nonmax_radius = num(key, v)?,
            "max_features" => c.detector.max_features = num(key, v)?,
            "border_margin" => c.detector.border_margin = num(key, v)?,
            "weighting_sigma" => c.weighting_sigma = num(key, v)?,
            "normalize_epsilon" => c.normalize_epsilon = num(key, v)?,
            "radius" => c.descriptor_radius = num(key, v)?,
            "direction_bins" => c.direction_bins = num(key, v)?,
            "delta" => c.consensus.delta = num(key, v)?,
            "max_iterations" => c.consensus.max_iterations = num(key, v)?,
            "seed" => c.consensus.rng_seed = num(key, v)?,
            "min_inliers" => c.consensus.min_inliers = num(key, v)?,
            "coarse_delta" => c.coarse_delta = num(key, v)?,
            "coarse_max_features" => c.coarse_max_features = num(key, v)?,
            "coarse_both_polarities" => c.coarse_both_polarities = flag(key, v)?,
            "rotation_compensation" => c.rotation_compensation = flag(key, v)?,
            "compensation" => {
                c.compensation = match v {
                    "steer" => Compensation::SteerFilters,
                    "bin-shift" => Compensation::BinShift,
                    _ => bail!("compensation: expected steer or bin-shift, got {v:?}"),
                }
            }
            _ => bail!("line {}: unknown key {key:?}", n + 1),
        }
    }
    if !sigma_theta_set {
        c.filter_bank.sigma_theta = default_sigma_theta(c.filter_bank.n_orients);
    }
    c.validate()?;
    Ok(c)
}

pub fn load_config(path: Option<&std::path::Path>) -> Result<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            parse_config(&text).with_context(|| format!("in config {}", p.display()))
        }
    }
}

/// The configuration as a commented file that parses back to itself.
pub fn render_config(c: &PipelineConfig) -> String {
    let fb = &c.filter_bank;
    let values: Vec<String> = vec![
        fb.n_scales.to_string(),
        fb.n_orients.to_string(),
        fb.min_wavelength.to_string(),
        fb.scale_mult.to_string(),
        fb.sigma_f_ratio.to_string(),
        fb.sigma_theta.to_string(),
        match fb.exponent_form {
            ExponentForm::Squared => "squared",
            ExponentForm::Literal => "literal",
        }
        .into(),
        c.energy.k_noise.to_string(),
        c.energy.spread_cutoff.to_string(),
        c.energy.spread_gain.to_string(),
        c.energy.epsilon.to_string(),
        match c.energy.rectification {
            Rectification::Clamp => "clamp",
            Rectification::Absolute => "absolute",
        }
        .into(),
        c.guided_sigma_s.to_string(),
        c.guided_sigma_r_fraction.to_string(),
        c.guided_window_radius.to_string(),
        c.detector.fast_threshold.to_string(),
        c.detector.nonmax_radius.to_string(),
        c.detector.max_features.to_string(),
        c.detector.border_margin.to_string(),
        c.weighting_sigma.to_string(),
        c.normalize_epsilon.to_string(),
        c.descriptor_radius.to_string(),
        c.direction_bins.to_string(),
        c.consensus.delta.to_string(),
        c.consensus.max_iterations.to_string(),
        c.consensus.rng_seed.to_string(),
        c.consensus.min_inliers.to_string(),
        c.coarse_delta.to_string(),
        c.coarse_max_features.to_string(),
        c.coarse_both_polarities.to_string(),
        c.rotation_compensation.to_string(),
        match c.compensation {
            Compensation::SteerFilters => "steer",
            Compensation::BinShift => "bin-shift",
        }
        .into(),
    ];
    let mut out = String::new();
    for ((key, doc), value) in KEYS.iter().zip(values) {
        out.push_str(&format!("# {doc}\n{key} = {value}\n"));
    }
    out
}
