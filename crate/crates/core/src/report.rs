//! Risk report document and its canonical JSON rendering.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::purify::PurifyConfig;
use crate::risk::{PromptVerdict, TiePolicy, TieRule, TokenRisk, DEFAULT_BLOCK_THRESHOLD};
use crate::subspace::DEFAULT_REL_TOL;

pub const SCHEMA_VERSION: &str = "1";

/// Effective settings of a run; echoed into every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunConfig {
    pub rel_tol: f64,
    pub tie_policy: TiePolicy,
    pub tie_epsilon: f64,
    pub block_threshold: f64,
    pub purify: PurifyConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            tie_policy: TiePolicy::RiskyOnTie,
            tie_epsilon: TieRule::DEFAULT_EPSILON,
            block_threshold: DEFAULT_BLOCK_THRESHOLD,
            purify: PurifyConfig::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn tie_rule(&self) -> TieRule {
        TieRule { policy: self.tie_policy, epsilon: self.tie_epsilon }
    }
}

/// What `purify` did with the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    /// Safe prompt, embeddings copied unchanged.
    Passthrough,
    /// Risky prompt, risky tokens replaced.
    Purified,
    /// Unsafe prompt, nothing written.
    Filtered,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReportDocument {
    pub schema_version: &'static str,
    pub config: RunConfig,
    pub bundle_fingerprint: Option<String>,
    pub tokens: Vec<TokenRisk>,
    pub verdict: PromptVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
}

impl RiskReportDocument {
    pub fn new(config: RunConfig, bundle_fingerprint: Option<String>, tokens: Vec<TokenRisk>, verdict: PromptVerdict) -> Self {
        Self { schema_version: SCHEMA_VERSION, config, bundle_fingerprint, tokens, verdict, action: None }
    }

    /// Sorted keys, shortest round-trip floats, two-space indent, trailing
    /// newline.
    pub fn to_canonical_json(&self) -> Result<String> {
        let value = serde_json::to_value(self).map_err(|e| Error::Format(e.to_string()))?;
        let mut s = serde_json::to_string_pretty(&value).map_err(|e| Error::Format(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}
