use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::counterfactual::FlowConfig;
use crate::error::{Error, Result};
use crate::scm::FitConfig;

/// `--config` file. Relative paths are taken relative to the file itself.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub data: Option<PathBuf>,
    pub specs: Option<PathBuf>,
    pub dag: Option<PathBuf>,
    pub knowledge: Option<PathBuf>,
    pub outcome: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub generator: Option<PathBuf>,
    pub intervene: Option<String>,
    pub curve: Option<String>,
    pub rows: Option<usize>,
    pub trials: Option<usize>,
    pub max_parents: Option<usize>,
    pub fit: Option<FitConfig>,
    pub flow: Option<FlowConfig>,
}

impl RunFile {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut f: RunFile = toml::from_str(text).map_err(|e| Error::format("run configuration", e.to_string()))?;
        for p in [
            &mut f.data,
            &mut f.specs,
            &mut f.dag,
            &mut f.knowledge,
            &mut f.out,
            &mut f.model,
            &mut f.generator,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }
}
