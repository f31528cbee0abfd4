use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use critreg_core::lattice::MAX_DIM;
use critreg_core::num::{parse_exponent, Exponent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Lemma1,
    Boxes,
    ChainB,
    ChainFf,
    Identity,
    Dynamics,
}

impl Kind {
    pub fn label(&self) -> &'static str {
        match self {
            Kind::Lemma1 => "lemma1",
            Kind::Boxes => "boxes",
            Kind::ChainB => "chain-b",
            Kind::ChainFf => "chain-ff",
            Kind::Identity => "identity",
            Kind::Dynamics => "dynamics",
        }
    }

    fn stochastic(&self) -> bool {
        matches!(self, Kind::Lemma1 | Kind::Identity)
    }
}

/// Everything a run can be configured with. Every field is optional here;
/// [`ExperimentConfig::resolve`] fills in defaults per kind and validates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    pub d: Option<usize>,
    /// Comma-separated rationals, e.g. "1/2,1/2".
    pub alpha: Option<String>,
    pub family: Option<String>,
    pub family_file: Option<PathBuf>,
    pub n: Option<Vec<usize>>,
    pub n_max: Option<usize>,
    pub k_max: Option<u32>,
    pub seed: Option<u64>,
    pub samples: Option<u32>,
    pub out: Option<PathBuf>,
    /// Box sequence for `boxes`: b-d2, b-general or ff.
    pub sequence: Option<String>,
    /// Chain kind: b-d2, b-d3, b-general, ff-d3, ff-general.
    pub chain: Option<String>,
    pub lambda: Option<String>,
    /// translation or ff.
    pub model: Option<String>,
    pub map: Option<String>,
    pub param: Option<f64>,
    pub x0: Option<f64>,
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field,
        message: message.into(),
    }
}

/// A validated configuration with every default made explicit. This is what
/// the report echoes, so two runs agree on it exactly when they agree on
/// the experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Resolved {
    pub kind: Kind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", serialize_with = "exponents")]
    pub alpha: Vec<Exponent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequence: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn exponents<S: serde::Serializer>(v: &[Exponent], s: S) -> Result<S::Ok, S::Error> {
    let parts: Vec<String> = v.iter().map(|e| e.to_string()).collect();
    s.serialize_str(&parts.join(","))
}

pub fn parse_alpha(s: &str) -> Result<Vec<Exponent>, ConfigError> {
    s.split(',')
        .map(|p| parse_exponent(p.trim()).map_err(|e| err("alpha", e.to_string())))
        .collect()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig, ConfigError> {
        serde_json::from_str(text).map_err(|e| err("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("config", format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text)
    }

    /// Fields set in `over` win.
    pub fn overridden_by(self, over: ExperimentConfig) -> ExperimentConfig {
        macro_rules! pick {
            ($($f:ident),*) => {
                ExperimentConfig { $($f: over.$f.or(self.$f)),* }
            };
        }
        pick!(
            kind,
            d,
            alpha,
            family,
            family_file,
            n,
            n_max,
            k_max,
            seed,
            samples,
            out,
            sequence,
            chain,
            lambda,
            model,
            map,
            param,
            x0,
            grid
        )
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let kind = self
            .kind
            .ok_or_else(|| err("kind", "missing experiment kind"))?;
        if kind.stochastic() && self.seed.is_none() {
            return Err(err(
                "seed",
                format!("{} runs are seeded; pass --seed", kind.label()),
            ));
        }
        if let Some(d) = self.d {
            if !(1..=MAX_DIM).contains(&d) {
                return Err(err("d", format!("{d} is outside 1..={MAX_DIM}")));
            }
        }
        if let Some(f) = &self.family {
            if !["geometric", "symmetric-geometric", "custom-file"].contains(&f.as_str()) {
                return Err(err("family", format!("unknown family {f:?}")));
            }
            if f == "custom-file" && self.family_file.is_none() {
                return Err(err("family-file", "custom-file needs --family-file"));
            }
        }
        let mut r = Resolved {
            kind,
            d: None,
            alpha: Vec::new(),
            family: None,
            family_file: None,
            n: Vec::new(),
            n_max: None,
            k_max: None,
            seed: None,
            samples: None,
            sequence: None,
            chain: None,
            lambda: None,
            model: None,
            map: None,
            param: None,
            x0: None,
            grid: None,
            out: self.out.clone(),
        };
        let family = |default: &str| {
            let f = self.family.clone().unwrap_or_else(|| default.to_string());
            let file = (f == "custom-file")
                .then(|| self.family_file.clone())
                .flatten();
            (Some(f), file)
        };
        match kind {
            Kind::Lemma1 => {
                let d = self.d.unwrap_or(2);
                r.d = Some(d);
                (r.family, r.family_file) = family("geometric");
                r.n = self.n.clone().unwrap_or_else(|| vec![100]);
                if r.n.contains(&0) {
                    return Err(err("n", "path lengths must be positive"));
                }
                r.seed = self.seed;
                r.samples = Some(positive_u32(self.samples, 10_000, "samples")?);
            }
            Kind::Boxes => {
                let seq = self.sequence.clone().unwrap_or_else(|| "b-d2".into());
                let d = self.d.unwrap_or(match seq.as_str() {
                    "ff" => 3,
                    "b-general" => 3,
                    _ => 2,
                });
                if seq == "ff" && d < 3 {
                    return Err(err("d", "FF boxes need d ≥ 3"));
                }
                if seq == "b-d2" && d != 2 {
                    return Err(err("d", "b-d2 boxes need d = 2"));
                }
                r.d = Some(d);
                if seq != "ff" {
                    r.alpha = self.alpha_or_uniform(d)?;
                }
                r.sequence = Some(seq);
                r.n_max = Some(self.n_max.unwrap_or(20));
            }
            Kind::ChainB | Kind::ChainFf => {
                let ff = kind == Kind::ChainFf;
                let d = self.d.unwrap_or(if ff { 3 } else { 2 });
                let chain = self.chain.clone().unwrap_or_else(|| {
                    match (ff, d) {
                        (false, 2) => "b-d2",
                        (false, 3) => "b-d3",
                        (false, _) => "b-general",
                        (true, 3) => "ff-d3",
                        (true, _) => "ff-general",
                    }
                    .into()
                });
                if chain.starts_with("ff") != ff {
                    return Err(err(
                        "chain",
                        format!("{chain} does not belong to {}", kind.label()),
                    ));
                }
                r.d = Some(d);
                if !ff {
                    r.alpha = self.alpha_or_uniform(d)?;
                }
                (r.family, r.family_file) = family(if ff {
                    "symmetric-geometric"
                } else {
                    "geometric"
                });
                let default_n = match chain.as_str() {
                    "b-d2" => 15,
                    "b-general" => 3,
                    _ => 8,
                };
                r.n_max = Some(self.n_max.unwrap_or(default_n));
                r.chain = Some(chain);
                if let Some(l) = &self.lambda {
                    critreg_core::num::parse_rational(l)
                        .map_err(|e| err("lambda", e.to_string()))?;
                    r.lambda = Some(l.clone());
                }
            }
            Kind::Identity => {
                let model = self.model.clone().unwrap_or_else(|| "ff".into());
                if model != "ff" && model != "translation" {
                    return Err(err("model", format!("unknown model {model:?}")));
                }
                let d = self.d.unwrap_or(3);
                if d < 2 {
                    return Err(err("d", "the identity needs d ≥ 2"));
                }
                r.d = Some(d);
                r.alpha = match &self.alpha {
                    Some(a) => parse_alpha(a)?,
                    None if model == "ff" => vec![Exponent::new(2, (d * (d - 1)) as i64)],
                    None => vec![Exponent::new(1, d as i64)],
                };
                r.model = Some(model);
                let k = self.k_max.unwrap_or(5);
                if !(1..=64).contains(&k) {
                    return Err(err("k-max", "powers of g must lie in 1..=64"));
                }
                r.k_max = Some(k);
                r.seed = self.seed;
                r.samples = Some(positive_u32(self.samples, 1000, "samples")?);
            }
            Kind::Dynamics => {
                r.map = Some(self.map.clone().unwrap_or_else(|| "parabolic".into()));
                r.param = Some(self.param.unwrap_or(1.0));
                let alpha = match &self.alpha {
                    Some(a) => parse_alpha(a)?,
                    None => vec![Exponent::new(1, 2)],
                };
                if alpha
                    .iter()
                    .any(|a| *a <= Exponent::from_integer(0) || *a >= Exponent::from_integer(1))
                {
                    return Err(err("alpha", "Hölder exponents must lie in (0,1)"));
                }
                r.alpha = alpha;
                r.k_max = Some(self.k_max.unwrap_or(10_000));
                r.x0 = Some(self.x0.unwrap_or(0.5));
                let grid = self.grid.unwrap_or(10_000);
                if !(2..=1_000_000).contains(&grid) {
                    return Err(err("grid", "grid size must lie in 2..=10^6"));
                }
                r.grid = Some(grid);
            }
        }
        Ok(r)
    }

    fn alpha_or_uniform(&self, d: usize) -> Result<Vec<Exponent>, ConfigError> {
        let a = match &self.alpha {
            Some(s) => parse_alpha(s)?,
            None => vec![Exponent::new(1, d as i64); d],
        };
        if a.len() != d {
            return Err(err("alpha", format!("need {d} exponents, got {}", a.len())));
        }
        Ok(a)
    }
}

fn positive_u32(v: Option<u32>, default: u32, field: &'static str) -> Result<u32, ConfigError> {
    match v.unwrap_or(default) {
        0 => Err(err(field, "must be positive")),
        x => Ok(x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file =
            ExperimentConfig::from_json(r#"{"kind":"lemma1","d":3,"seed":1,"n":[10]}"#).unwrap();
        let flags = ExperimentConfig {
            d: Some(2),
            ..Default::default()
        };
        let r = file.overridden_by(flags).resolve().unwrap();
        assert_eq!(r.d, Some(2));
        assert_eq!(r.n, vec![10]);
        assert_eq!(r.samples, Some(10_000));
    }

    #[test]
    fn field_level_errors() {
        let e = ExperimentConfig::from_json(r#"{"kind":"lemma1"}"#)
            .unwrap()
            .resolve()
            .unwrap_err();
        assert_eq!(e.field, "seed");
        let e = ExperimentConfig::from_json(r#"{"kind":"boxes","alpha":"1/2"}"#)
            .unwrap()
            .resolve()
            .unwrap_err();
        assert_eq!(e.field, "alpha");
        assert!(ExperimentConfig::from_json(r#"{"kind":"boxes","colour":1}"#).is_err());
        let e = ExperimentConfig::from_json(r#"{"kind":"chain-ff","chain":"b-d2"}"#)
            .unwrap()
            .resolve()
            .unwrap_err();
        assert_eq!(e.field, "chain");
    }

    #[test]
    fn defaults_are_explicit() {
        let r = ExperimentConfig {
            kind: Some(Kind::ChainFf),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(r.chain.as_deref(), Some("ff-d3"));
        assert_eq!(r.family.as_deref(), Some("symmetric-geometric"));
        let j = serde_json::to_string(&r).unwrap();
        assert!(!j.contains("out"));
    }
}
