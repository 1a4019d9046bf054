//! Flat `key = value` configuration files.
//!
//! Lines are `key = value`; `#` starts a comment. Lists are comma separated and
//! per-level lists run over levels `-1..J-1` (Gamma) or parent levels `0..J-2`
//! (Beta transitions). Unset keys keep their defaults. Every key can also be set
//! through the environment as `TURBO_AMP_<KEY>` (upper case), which takes
//! precedence over the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::denoiser::SignalModel;
use crate::error::{Error, Result};
use crate::learning::{BetaPrior, GammaPrior, HyperParams};
use crate::turbo::{SupportRule, TurboConfig};
use crate::wavelet::QuadTreeIndex;

pub const ENV_PREFIX: &str = "TURBO_AMP_";

/// Recognized keys.
pub const KEYS: &[&str] = &[
    "model",
    "levels",
    "max_turbo",
    "turbo_tol",
    "max_amp",
    "amp_tol",
    "seed",
    "c_init_factor",
    "llr_clamp",
    "learn",
    "support",
    "signal_scale",
    "gamma_noise",
    "gamma_level_a",
    "gamma_level_b",
    "gamma_small_a",
    "gamma_small_b",
    "beta_root",
    "beta_approx",
    "beta_trans11_c",
    "beta_trans11_d",
    "beta_trans00_c",
    "beta_trans00_d",
    "pi00_mean",
];

pub const DEFAULT_LEVELS: usize = 4;

/// Images are 8-bit, so the unit-range hyperparameter defaults apply after
/// dividing by the largest pixel value.
pub const DEFAULT_SIGNAL_SCALE: f64 = 255.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{v}` for key `{key}`")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|t| parse_num(key, t)).collect()
}

fn parse_pair(key: &str, v: &str) -> Result<(f64, f64)> {
    match parse_list(key, v)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::Config(format!("key `{key}` takes two comma-separated numbers"))),
    }
}

pub fn parse_model(v: &str) -> Result<SignalModel> {
    match v.trim().to_ascii_lowercase().as_str() {
        "bg" => Ok(SignalModel::BernoulliGaussian),
        "gm" => Ok(SignalModel::GaussianMixture),
        other => Err(Error::Config(format!("unknown model `{other}` (expected bg or gm)"))),
    }
}

pub fn parse_support(v: &str) -> Result<SupportRule> {
    match v.trim().to_ascii_lowercase().as_str() {
        "extrinsic" => Ok(SupportRule::Extrinsic),
        "posterior" => Ok(SupportRule::Posterior),
        other => Err(Error::Config(format!(
            "unknown support rule `{other}` (expected extrinsic or posterior)"
        ))),
    }
}

fn support_name(s: SupportRule) -> &'static str {
    match s {
        SupportRule::Extrinsic => "extrinsic",
        SupportRule::Posterior => "posterior",
    }
}

pub fn model_name(m: SignalModel) -> &'static str {
    match m {
        SignalModel::BernoulliGaussian => "bg",
        SignalModel::GaussianMixture => "gm",
    }
}

fn join(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim().to_string();
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", i + 1)));
            }
            entries.insert(k, v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Adds `TURBO_AMP_<KEY>` variables found in `vars`, overriding existing entries.
    pub fn with_env<I: IntoIterator<Item = (String, String)>>(mut self, vars: I) -> Self {
        for (name, value) in vars {
            if let Some(k) = name.strip_prefix(ENV_PREFIX) {
                let k = k.to_ascii_lowercase();
                if KEYS.contains(&k.as_str()) {
                    self.entries.insert(k, value);
                }
            }
        }
        self
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn levels(&self) -> Result<usize> {
        self.get("levels")
            .map_or(Ok(DEFAULT_LEVELS), |v| parse_num("levels", v))
    }

    /// Settings applied over [`TurboConfig::default`] with hyperparameters
    /// resolved for `tree`.
    pub fn turbo_config(&self, tree: &QuadTreeIndex) -> Result<TurboConfig> {
        let mut cfg = TurboConfig {
            signal_scale: DEFAULT_SIGNAL_SCALE,
            ..TurboConfig::default()
        };
        let mut hyper = match self.get("pi00_mean") {
            Some(v) => HyperParams::defaults_with_pi00(tree, parse_num("pi00_mean", v)?),
            None => HyperParams::defaults(tree),
        };
        for (k, v) in &self.entries {
            let k = k.as_str();
            match k {
                "model" => cfg.model = parse_model(v)?,
                "levels" | "pi00_mean" => {}
                "max_turbo" => cfg.max_turbo = parse_num(k, v)?,
                "turbo_tol" => cfg.turbo_tol = parse_num(k, v)?,
                "max_amp" => cfg.max_amp = parse_num(k, v)?,
                "amp_tol" => cfg.amp_tol = parse_num(k, v)?,
                "seed" => cfg.seed = parse_num(k, v)?,
                "c_init_factor" => cfg.c_init_factor = parse_num(k, v)?,
                "llr_clamp" => cfg.llr_clamp = parse_num(k, v)?,
                "learn" => cfg.learn = parse_num(k, v)?,
                "support" => cfg.support = parse_support(v)?,
                "signal_scale" => cfg.signal_scale = parse_num(k, v)?,
                "gamma_noise" => {
                    let (a, b) = parse_pair(k, v)?;
                    hyper.gamma_noise = GammaPrior::new(a, b);
                }
                "beta_root" => {
                    let (c, d) = parse_pair(k, v)?;
                    hyper.beta_root = BetaPrior::new(c, d);
                }
                "beta_approx" => {
                    let (c, d) = parse_pair(k, v)?;
                    hyper.beta_approx = BetaPrior::new(c, d);
                }
                "gamma_level_a" => set_list(k, &mut hyper.gamma_level, v, |g, x| g.a = x)?,
                "gamma_level_b" => set_list(k, &mut hyper.gamma_level, v, |g, x| g.b = x)?,
                "gamma_small_a" => set_list(k, &mut hyper.gamma_small, v, |g, x| g.a = x)?,
                "gamma_small_b" => set_list(k, &mut hyper.gamma_small, v, |g, x| g.b = x)?,
                "beta_trans11_c" => set_list(k, &mut hyper.beta_trans11, v, |b, x| b.c = x)?,
                "beta_trans11_d" => set_list(k, &mut hyper.beta_trans11, v, |b, x| b.d = x)?,
                "beta_trans00_c" => set_list(k, &mut hyper.beta_trans00, v, |b, x| b.c = x)?,
                "beta_trans00_d" => set_list(k, &mut hyper.beta_trans00, v, |b, x| b.d = x)?,
                _ => unreachable!("keys are checked on insertion"),
            }
        }
        hyper.validate(tree.depth())?;
        cfg.hyper = Some(hyper);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set_list<T>(key: &str, dst: &mut [T], v: &str, f: impl Fn(&mut T, f64)) -> Result<()> {
    let list = parse_list(key, v)?;
    if list.len() != dst.len() {
        return Err(Error::Config(format!(
            "key `{key}` needs {} values, got {}",
            dst.len(),
            list.len()
        )));
    }
    for (p, x) in dst.iter_mut().zip(list) {
        f(p, x);
    }
    Ok(())
}

/// Renders a configuration that [`ConfigFile::turbo_config`] reads back exactly.
pub fn render(cfg: &TurboConfig, hyper: &HyperParams, levels: usize) -> String {
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    put("model", model_name(cfg.model).into());
    put("levels", levels.to_string());
    put("max_turbo", cfg.max_turbo.to_string());
    put("turbo_tol", format!("{:e}", cfg.turbo_tol));
    put("max_amp", cfg.max_amp.to_string());
    put("amp_tol", format!("{:e}", cfg.amp_tol));
    put("seed", cfg.seed.to_string());
    put("c_init_factor", format!("{:e}", cfg.c_init_factor));
    put("llr_clamp", format!("{:e}", cfg.llr_clamp));
    put("learn", cfg.learn.to_string());
    put("support", support_name(cfg.support).into());
    put("signal_scale", format!("{:e}", cfg.signal_scale));
    put("gamma_noise", join([hyper.gamma_noise.a, hyper.gamma_noise.b]));
    put("gamma_level_a", join(hyper.gamma_level.iter().map(|g| g.a)));
    put("gamma_level_b", join(hyper.gamma_level.iter().map(|g| g.b)));
    put("gamma_small_a", join(hyper.gamma_small.iter().map(|g| g.a)));
    put("gamma_small_b", join(hyper.gamma_small.iter().map(|g| g.b)));
    put("beta_root", join([hyper.beta_root.c, hyper.beta_root.d]));
    put("beta_approx", join([hyper.beta_approx.c, hyper.beta_approx.d]));
    put("beta_trans11_c", join(hyper.beta_trans11.iter().map(|b| b.c)));
    put("beta_trans11_d", join(hyper.beta_trans11.iter().map(|b| b.d)));
    put("beta_trans00_c", join(hyper.beta_trans00.iter().map(|b| b.c)));
    put("beta_trans00_d", join(hyper.beta_trans00.iter().map(|b| b.d)));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::build_tree_index;

    #[test]
    fn defaults_round_trip_through_text() {
        let tree = build_tree_index(32, 3).unwrap();
        let cfg = ConfigFile::default().turbo_config(&tree).unwrap();
        let hyper = cfg.hyper.clone().unwrap();
        assert_eq!(hyper, HyperParams::defaults(&tree));
        let text = render(&cfg, &hyper, 3);
        let back = ConfigFile::parse(&text).unwrap();
        assert_eq!(back.levels().unwrap(), 3);
        assert_eq!(back.turbo_config(&tree).unwrap(), cfg);
    }

    #[test]
    fn overrides_and_env() {
        let tree = build_tree_index(32, 3).unwrap();
        let f = ConfigFile::parse("# comment\nmodel = gm\nmax_turbo = 3  # trailing\ngamma_level_b = 5,1,1,0.2\n")
            .unwrap()
            .with_env([
                ("TURBO_AMP_MAX_TURBO".to_string(), "4".to_string()),
                ("OTHER".to_string(), "1".to_string()),
            ]);
        let cfg = f.turbo_config(&tree).unwrap();
        assert_eq!(cfg.model, SignalModel::GaussianMixture);
        assert_eq!(cfg.max_turbo, 4);
        assert_eq!(cfg.hyper.unwrap().gamma_level[0].b, 5.0);
        assert_eq!(cfg.signal_scale, DEFAULT_SIGNAL_SCALE);
        let e = ConfigFile::parse("support = extrinsic\nsignal_scale = 1").unwrap();
        let cfg = e.turbo_config(&tree).unwrap();
        assert_eq!((cfg.support, cfg.signal_scale), (SupportRule::Extrinsic, 1.0));
    }

    #[test]
    fn literal_pi00_mean_is_configurable() {
        let tree = build_tree_index(32, 3).unwrap();
        let f = ConfigFile::parse("pi00_mean = 0.0009765625").unwrap();
        let h = f.turbo_config(&tree).unwrap().hyper.unwrap();
        assert!((h.beta_trans00[0].mean() - 1.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn errors_are_actionable() {
        let tree = build_tree_index(32, 3).unwrap();
        assert!(ConfigFile::parse("nonsense = 1").is_err());
        assert!(ConfigFile::parse("model").is_err());
        let bad = ConfigFile::parse("gamma_level_b = 1,2").unwrap();
        let msg = bad.turbo_config(&tree).unwrap_err().to_string();
        assert!(msg.contains("needs 4 values"), "{msg}");
        assert!(ConfigFile::parse("model = xx").unwrap().turbo_config(&tree).is_err());
        assert!(ConfigFile::parse("max_amp = 0").unwrap().turbo_config(&tree).is_err());
        assert!(ConfigFile::parse("signal_scale = 0").unwrap().turbo_config(&tree).is_err());
        assert!(ConfigFile::parse("support = maybe").unwrap().turbo_config(&tree).is_err());
    }
}
