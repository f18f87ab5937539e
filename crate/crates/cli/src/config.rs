//! `key = value` configuration files. Relative paths resolve against the
//! directory holding the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub triples: Vec<PathBuf>,
    pub templates: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub ner_model: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub threshold: Option<f64>,
    pub use_crf: Option<bool>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`", i + 1);
            };
            let (key, value) = (key.trim(), value.trim());
            let path = || base.join(value);
            match key {
                "triples" => cfg.triples.push(path()),
                "templates" => cfg.templates = Some(path()),
                "embeddings" => cfg.embeddings = Some(path()),
                "ner_model" => cfg.ner_model = Some(path()),
                "alpha" => cfg.alpha = Some(parse_num(value, i)?),
                "threshold" => cfg.threshold = Some(parse_num(value, i)?),
                "use_crf" => {
                    cfg.use_crf = Some(match value {
                        "true" => true,
                        "false" => false,
                        _ => bail!("line {}: use_crf must be true or false", i + 1),
                    })
                }
                _ => bail!("line {}: unknown key {key:?}", i + 1),
            }
        }
        check_ranges(cfg.alpha, cfg.threshold)?;
        Ok(cfg)
    }
}

fn parse_num(value: &str, line: usize) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => bail!("line {}: {value:?} is not a number", line + 1),
    }
}

pub fn check_ranges(alpha: Option<f64>, threshold: Option<f64>) -> Result<()> {
    if let Some(a) = alpha {
        if !(0.0..=1.0).contains(&a) {
            bail!("alpha must lie in [0, 1], got {a}");
        }
    }
    if let Some(t) = threshold {
        if !(-1.0..=1.0).contains(&t) {
            bail!("threshold must lie in [-1, 1], got {t}");
        }
    }
    Ok(())
}
