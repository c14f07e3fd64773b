//! Flat `key = value` experiment configuration.
//!
//! Recognized keys: `name`, `gammas`, `sizes`, `replicates`, `walks`,
//! `substeps`, `seed`, `out`, and tolerance overrides `tol.<name>`. Lists are
//! comma separated; `#` starts a comment. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub gammas: Vec<f64>,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub walks: usize,
    pub substeps: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub tolerances: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    /// Defaults for a named experiment; see [`super::EXPERIMENTS`].
    pub fn defaults(name: &str) -> Result<Self> {
        let spec = super::find(name)?;
        Ok(ExperimentConfig {
            name: name.to_string(),
            gammas: spec.gammas.to_vec(),
            sizes: spec.sizes.to_vec(),
            replicates: spec.replicates,
            walks: spec.walks,
            substeps: 16,
            seed: 1,
            out: PathBuf::from("out"),
            tolerances: BTreeMap::new(),
        })
    }

    /// Parses a config file; `name` may be omitted when `fallback_name` is given.
    pub fn parse(text: &str, fallback_name: Option<&str>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: idx + 1, msg: "expected `key = value`".into() })?;
            pairs.push((idx + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let name = pairs
            .iter()
            .find(|(_, k, _)| k == "name")
            .map(|(_, _, v)| v.clone())
            .or_else(|| fallback_name.map(str::to_string))
            .ok_or_else(|| Error::Parse { line: 0, msg: "missing `name`".into() })?;
        let mut cfg = Self::defaults(&name)?;
        for (line, key, value) in pairs {
            let perr = |msg: &str| Error::Parse { line, msg: format!("{key}: {msg}") };
            match key.as_str() {
                "name" => {}
                "gammas" => cfg.gammas = parse_list(&value).map_err(|_| perr("bad number list"))?,
                "sizes" => cfg.sizes = parse_list(&value).map_err(|_| perr("bad integer list"))?,
                "replicates" => cfg.replicates = value.parse().map_err(|_| perr("bad integer"))?,
                "walks" => cfg.walks = value.parse().map_err(|_| perr("bad integer"))?,
                "substeps" => cfg.substeps = value.parse().map_err(|_| perr("bad integer"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| perr("bad integer"))?,
                "out" => cfg.out = PathBuf::from(value),
                k if k.starts_with("tol.") => {
                    let v: f64 = value.parse().map_err(|_| perr("bad number"))?;
                    cfg.tolerances.insert(k["tol.".len()..].to_string(), v);
                }
                _ => return Err(Error::Parse { line, msg: format!("unknown key `{key}`") }),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.gammas.is_empty() || self.sizes.is_empty() {
            return bad("gamma and size lists must be nonempty");
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sizes must be strictly ascending");
        }
        if self.gammas.iter().any(|&g| !(g > 0.0 && g < 2.0)) {
            return bad("gammas must lie in (0, 2)");
        }
        if self.replicates == 0 || self.substeps == 0 {
            return bad("replicates and substeps must be positive");
        }
        Ok(())
    }

    pub fn tolerance(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }

    /// Echo in the config-file syntax.
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let mut s = format!(
            "name = {}\ngammas = {}\nsizes = {}\nreplicates = {}\nwalks = {}\nsubsteps = {}\nseed = {}\nout = {}\n",
            self.name,
            join(self.gammas.iter().map(f64::to_string).collect()),
            join(self.sizes.iter().map(usize::to_string).collect()),
            self.replicates,
            self.walks,
            self.substeps,
            self.seed,
            self.out.display()
        );
        for (k, v) in &self.tolerances {
            s.push_str(&format!("tol.{k} = {v}\n"));
        }
        s
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, T::Err> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_echo() {
        let text = "name = degree\n# comment\ngammas = 0.5, 1.7\nsizes = 100, 200\nseed = 9\ntol.mean = 0.2\n";
        let cfg = ExperimentConfig::parse(text, None).unwrap();
        assert_eq!(cfg.gammas, vec![0.5, 1.7]);
        assert_eq!(cfg.sizes, vec![100, 200]);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.tolerance("mean", 0.1), 0.2);
        assert_eq!(ExperimentConfig::parse(&cfg.to_text(), None).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::parse("name = degree\nbogus = 1\n", None).is_err());
        assert!(ExperimentConfig::parse("name = degree\nsizes = 200, 100\n", None).is_err());
        assert!(ExperimentConfig::parse("name = degree\ngammas =\n", None).is_err());
        assert!(ExperimentConfig::parse("name = nope\n", None).is_err());
        assert!(ExperimentConfig::parse("sizes = 1\n", None).is_err());
        assert!(ExperimentConfig::parse("sizes = 10\n", Some("degree")).is_ok());
    }
}
