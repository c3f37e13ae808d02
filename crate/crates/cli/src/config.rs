//! Flat key=value config files plus flag/config/default precedence.

use crate::args::{InferenceOpts, Toggle};
use anyhow::{bail, Context, Result};
use osbm_core::mcmc::{Beta, ChainConfig};
use osbm_core::ModelVariant;
use std::collections::HashMap;
use std::path::Path;

/// Parse `key = value` lines; '#' starts a comment, blank lines are
/// ignored, keys are case-sensitive and use the flag spelling
/// (e.g. `burn-in = 200`).
pub fn parse_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected 'key = value'", path.display(), lineno + 1);
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

const KNOWN_KEYS: &[&str] = &[
    "model",
    "seed",
    "sweeps",
    "burn-in",
    "thin",
    "restarts",
    "beta",
    "explore",
    "q-cap",
    "edge-guided",
    "merge-split",
    "relocate",
    "gibbs-scans",
];

/// Everything an inference command needs, after precedence resolution.
pub struct Resolved {
    pub variant: ModelVariant,
    pub chain: ChainConfig,
    pub q_cap: u64,
}

pub fn resolve(opts: &InferenceOpts) -> Result<Resolved> {
    let file = match &opts.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };
    for key in file.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            bail!("unknown config key {key:?} (known: {})", KNOWN_KEYS.join(", "));
        }
    }
    fn pick<T, F>(flag: &Option<T>, file: &HashMap<String, String>, key: &str, parse: F, default: T) -> Result<T>
    where
        T: Clone,
        F: Fn(&str) -> Result<T>,
    {
        if let Some(v) = flag {
            return Ok(v.clone());
        }
        if let Some(raw) = file.get(key) {
            return parse(raw).with_context(|| format!("config key {key:?}"));
        }
        Ok(default)
    }
    let parse_u64 = |s: &str| s.parse::<u64>().map_err(Into::into);
    let parse_u32 = |s: &str| s.parse::<u32>().map_err(Into::into);
    let parse_f64 = |s: &str| s.parse::<f64>().map_err(Into::into);

    let defaults = ChainConfig::default();
    let model_name = pick(&opts.model, &file, "model", |s| Ok(s.to_string()), "dc-osbm".into())?;
    let mut variant = ModelVariant::from_name(&model_name)
        .with_context(|| format!("unknown model {model_name:?} (expected sbm, dc-sbm, osbm, dc-osbm)"))?;
    if let Some(toggle) = opts.degree_correction {
        variant.degree_corrected = toggle == Toggle::On;
    }
    let beta_str = pick(&opts.beta, &file, "beta", |s| Ok(s.to_string()), "1".into())?;
    let beta: Beta = beta_str.parse().map_err(|e: String| anyhow::anyhow!(e))?;

    let chain = ChainConfig {
        seed: pick(&opts.seed, &file, "seed", parse_u64, 0)?,
        beta,
        sweeps: pick(&opts.sweeps, &file, "sweeps", parse_u64, defaults.sweeps)?,
        burn_in: pick(&opts.burn_in, &file, "burn-in", parse_u64, defaults.burn_in)?,
        thinning: pick(&opts.thinning, &file, "thin", parse_u64, defaults.thinning)?,
        init: Default::default(),
        edge_guided: pick(&opts.edge_guided, &file, "edge-guided", parse_f64, defaults.edge_guided)?,
        merge_split_per_sweep: pick(&opts.merge_split, &file, "merge-split", parse_u32, defaults.merge_split_per_sweep)?,
        relocate_per_sweep: pick(&opts.relocate, &file, "relocate", parse_u32, defaults.relocate_per_sweep)?,
        gibbs_scans: pick(&opts.gibbs_scans, &file, "gibbs-scans", parse_u32, defaults.gibbs_scans)?,
        restarts: pick(&opts.restarts, &file, "restarts", parse_u32, defaults.restarts)?,
        explore_sweeps: pick(&opts.explore, &file, "explore", parse_u64, defaults.explore_sweeps)?,
        shadow_check: false,
    };
    chain.validate().map_err(|e| anyhow::anyhow!(e))?;
    let q_cap = pick(&opts.q_cap, &file, "q-cap", parse_u64, osbm_core::DEFAULT_Q_CAP)?;
    Ok(Resolved { variant, chain, q_cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn config_file_parses_and_flags_win() {
        let mut tmp = tempfile::NamedTempFile::new().unwrap();
        writeln!(tmp, "# comment\nsweeps = 42\nmodel = sbm\nbeta = 2.5").unwrap();
        let opts = InferenceOpts {
            model: Some("dc-sbm".into()),
            seed: None,
            sweeps: None,
            burn_in: None,
            thinning: None,
            restarts: None,
            beta: None,
            explore: None,
            degree_correction: None,
            q_cap: None,
            edge_guided: None,
            merge_split: None,
            relocate: None,
            gibbs_scans: None,
            integer_ids: false,
            config: Some(tmp.path().to_path_buf()),
            output: None,
            format: None,
        };
        let r = resolve(&opts).unwrap();
        assert_eq!(r.variant, ModelVariant::DC_SBM); // flag beats config
        assert_eq!(r.chain.sweeps, 42); // config beats default
        assert_eq!(r.chain.beta, Beta::Finite(2.5));
    }

    #[test]
    fn unknown_config_key_is_an_error() {
        let mut tmp = tempfile::NamedTempFile::new().unwrap();
        writeln!(tmp, "swops = 42").unwrap();
        let opts = InferenceOpts {
            model: None,
            seed: None,
            sweeps: None,
            burn_in: None,
            thinning: None,
            restarts: None,
            beta: None,
            explore: None,
            degree_correction: None,
            q_cap: None,
            edge_guided: None,
            merge_split: None,
            relocate: None,
            gibbs_scans: None,
            integer_ids: false,
            config: Some(tmp.path().to_path_buf()),
            output: None,
            format: None,
        };
        assert!(resolve(&opts).is_err());
    }
}
