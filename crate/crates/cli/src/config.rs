use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use statefuzz_core::detector::Finding;
use statefuzz_core::fuzzer::{CampaignConfig, CaseRecord};
use statefuzz_core::learner::EquivalenceConfig;
use statefuzz_core::sulsim::{ClusterConfig, Vulnerability};

pub const CASE_SCHEMA_VERSION: u32 = 1;

/// Everything one run needs. Every section is optional in the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cluster: ClusterConfig,
    pub learner: EquivalenceConfig,
    pub fuzz: CampaignConfig,
    /// `host:port` of a served simulator; in-process when absent.
    pub connect: Option<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.cluster.validate()?;
        Ok(cfg)
    }
}

/// Parses `--vulns`: a comma list of class names, `all`, or `none`.
pub fn parse_vulns(list: &str) -> Result<BTreeSet<Vulnerability>> {
    let list = list.trim();
    match list {
        "all" => return Ok(Vulnerability::ALL.into_iter().collect()),
        "" | "none" => return Ok(BTreeSet::new()),
        _ => {}
    }
    let mut out = BTreeSet::new();
    for name in list.split(',').map(str::trim) {
        if name.is_empty() {
            bail!("empty entry in vulnerability list {list:?}");
        }
        out.insert(name.parse::<Vulnerability>()?);
    }
    Ok(out)
}

/// A stored finding case: the case and verdict plus the cluster it ran on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFile {
    pub schema_version: u32,
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub connect: Option<String>,
    pub record: CaseRecord,
}

impl CaseFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading case {}", path.display()))?;
        let file: CaseFile = serde_json::from_str(&text).with_context(|| format!("parsing case {}", path.display()))?;
        if file.schema_version != CASE_SCHEMA_VERSION {
            bail!("case schema version {} is not supported", file.schema_version);
        }
        file.cluster.validate()?;
        Ok(file)
    }

    pub fn findings(&self) -> &[Finding] {
        &self.record.findings
    }
}
