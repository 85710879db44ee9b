//! Run configuration file.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use sphwave::optcore;
use sphwave::waveletopt::{Init, WaveletOptConfig};
use sphwave::CostWeights;

pub const SEED_ENV: &str = "SPHWAVE_SEED";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub family: FamilySection,
    #[serde(default)]
    pub weights: BTreeMap<String, WeightsSection>,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub levels: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    pub levels: Option<usize>,
    pub alpha_lambda: Option<f64>,
    pub alpha_p1: Option<f64>,
    pub alpha_p2: Option<f64>,
    pub alpha_neg: Option<f64>,
    pub exact_pressure: Option<bool>,
    /// `sint` or `random`
    pub init: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub alpha_p: Option<f64>,
    pub alpha_vr: Option<f64>,
    pub alpha_vt: Option<f64>,
    pub alpha_e: Option<f64>,
    pub alpha_ir: Option<f64>,
    pub alpha_it: Option<f64>,
    pub alpha_ph: Option<f64>,
    pub beta: Option<f64>,
    pub d_tilde_deg: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub max_iter: Option<usize>,
    pub max_inner: Option<usize>,
    pub tol_c: Option<f64>,
    pub tol_g: Option<f64>,
    pub penalty_growth: Option<f64>,
    pub initial_penalty: Option<f64>,
    pub memory: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub plane: Option<String>,
    pub n: Option<usize>,
}

fn check_finite(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !x.is_finite() => bail!("config value `{name}` must be finite"),
        _ => Ok(()),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("in {}", p.display()))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let f = &self.family;
        for (n, v) in [
            ("family.alpha_lambda", f.alpha_lambda),
            ("family.alpha_p1", f.alpha_p1),
            ("family.alpha_p2", f.alpha_p2),
            ("family.alpha_neg", f.alpha_neg),
            ("optimizer.tol_c", self.optimizer.tol_c),
            ("optimizer.tol_g", self.optimizer.tol_g),
            ("optimizer.penalty_growth", self.optimizer.penalty_growth),
            ("optimizer.initial_penalty", self.optimizer.initial_penalty),
        ] {
            check_finite(n, v)?;
        }
        for (preset, w) in &self.weights {
            for (n, v) in [
                ("alpha_p", w.alpha_p),
                ("alpha_vr", w.alpha_vr),
                ("alpha_vt", w.alpha_vt),
                ("alpha_e", w.alpha_e),
                ("alpha_ir", w.alpha_ir),
                ("alpha_it", w.alpha_it),
                ("alpha_ph", w.alpha_ph),
                ("beta", w.beta),
                ("d_tilde_deg", w.d_tilde_deg),
            ] {
                check_finite(&format!("weights.{preset}.{n}"), v)?;
            }
        }
        if let Some(init) = &f.init {
            if init != "sint" && init != "random" {
                bail!("family.init must be `sint` or `random`, got `{init}`");
            }
        }
        Ok(())
    }

    /// Seed precedence: command line, then the environment, then the file.
    pub fn seed(&self, cli: Option<u64>) -> Result<u64> {
        if let Some(s) = cli {
            return Ok(s);
        }
        if let Ok(v) = std::env::var(SEED_ENV) {
            return v
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV} must be an unsigned integer, got `{v}`"));
        }
        Ok(self.optimizer.seed.unwrap_or(0))
    }

    pub fn optimizer(&self, seed: u64) -> optcore::Options {
        let o = &self.optimizer;
        let d = optcore::Options::default();
        optcore::Options {
            max_iter: o.max_iter.unwrap_or(d.max_iter),
            max_inner: o.max_inner.unwrap_or(d.max_inner),
            tol_c: o.tol_c.unwrap_or(d.tol_c),
            tol_g: o.tol_g.unwrap_or(d.tol_g),
            penalty_growth: o.penalty_growth.unwrap_or(d.penalty_growth),
            initial_penalty: o.initial_penalty.unwrap_or(d.initial_penalty),
            memory: o.memory.unwrap_or(d.memory),
            seed,
        }
    }

    pub fn wavelet_opt(&self, seed: u64) -> WaveletOptConfig {
        let f = &self.family;
        let d = WaveletOptConfig::default();
        WaveletOptConfig {
            alpha_lambda: f.alpha_lambda.unwrap_or(d.alpha_lambda),
            alpha_p1: f.alpha_p1.unwrap_or(d.alpha_p1),
            alpha_p2: f.alpha_p2.unwrap_or(d.alpha_p2),
            alpha_neg: f.alpha_neg.unwrap_or(d.alpha_neg),
            exact_pressure: f.exact_pressure.unwrap_or(d.exact_pressure),
            init: match f.init.as_deref() {
                Some("random") => Init::Random { seed },
                _ => Init::Sint,
            },
            optimizer: self.optimizer(seed),
        }
    }

    /// Named preset with overrides from `[weights.<name>]`. Names that are
    /// not built in start from all-zero weights.
    pub fn weights(&self, name: &str) -> Result<CostWeights> {
        let section = self.weights.get(name);
        let mut w = match CostWeights::preset(name) {
            Ok(w) => w,
            Err(e) if section.is_none() => return Err(e.into()),
            Err(_) => CostWeights {
                preset: name.to_string(),
                ..CostWeights::default()
            },
        };
        if let Some(s) = section {
            let set = |dst: &mut f64, v: Option<f64>| {
                if let Some(v) = v {
                    *dst = v;
                }
            };
            set(&mut w.alpha_p, s.alpha_p);
            set(&mut w.alpha_vr, s.alpha_vr);
            set(&mut w.alpha_vt, s.alpha_vt);
            set(&mut w.alpha_e, s.alpha_e);
            set(&mut w.alpha_ir, s.alpha_ir);
            set(&mut w.alpha_it, s.alpha_it);
            set(&mut w.alpha_ph, s.alpha_ph);
            set(&mut w.beta, s.beta);
            if let Some(d) = s.d_tilde_deg {
                w.d_tilde = Some(d.to_radians());
            }
        }
        w.validate()?;
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(
            c.optimizer(3),
            optcore::Options {
                seed: 3,
                ..Default::default()
            }
        );
        assert_eq!(
            c.weights("smooth").unwrap(),
            CostWeights::preset("smooth").unwrap()
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("[mesh]\nlevel = 2\n").is_err());
        assert!(RunConfig::parse("[bogus]\n").is_err());
        assert!(RunConfig::parse("[weights.smooth]\nalpha_q = 1.0\n").is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(RunConfig::parse("[optimizer]\ntol_g = nan\n").is_err());
        assert!(RunConfig::parse("[weights.focus]\nalpha_e = inf\n").is_err());
    }

    #[test]
    fn weight_overrides_and_custom_presets() {
        let c = RunConfig::parse(
            "[weights.smooth]\nalpha_e = 2.0\nd_tilde_deg = 90.0\n[weights.mine]\nalpha_ir = 1.0\n",
        )
        .unwrap();
        let w = c.weights("smooth").unwrap();
        assert_eq!(w.alpha_e, 2.0);
        assert_eq!(w.alpha_ir, 1.0);
        assert!((w.d_tilde.unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(c.weights("mine").unwrap().alpha_ir, 1.0);
        assert!(c.weights("nope").is_err());
    }

    #[test]
    fn wavelet_section() {
        let c = RunConfig::parse("[family]\nalpha_neg = 5.0\ninit = \"random\"\n").unwrap();
        let w = c.wavelet_opt(7);
        assert_eq!(w.alpha_neg, 5.0);
        assert_eq!(w.init, Init::Random { seed: 7 });
        assert!(RunConfig::parse("[family]\ninit = \"lazy\"\n").is_err());
    }
}
