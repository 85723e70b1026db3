//! Dual-space purification and token-wise substitution.
//!
//! A risky token `p` is replaced by `(I - V) p + P_R p`: the first term drops
//! everything inside the toxic span, the second adds the token's shadow on the
//! clean span. Safe tokens are copied through unchanged.

use serde::{Deserialize, Serialize};

use crate::concepts::TokenizedPrompt;
use crate::error::{Error, Result};
use crate::matrix::norm;
use crate::risk::{ProjectorBundle, TokenLabel, TokenRisk};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurifyMode {
    /// `(I - V) p + P_R p`.
    #[default]
    PaperSum,
    /// Half of the sum.
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroFallback {
    /// Leave a vanished token as the zero vector.
    #[default]
    Keep,
    /// Substitute the clean centroid scaled to the input norm.
    CleanCentroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PurifyConfig {
    pub mode: PurifyMode,
    pub preserve_norm: bool,
    pub zero_fallback: ZeroFallback,
}

impl ProjectorBundle {
    /// Applies the dual-space transform to one embedding.
    pub fn purify_embedding(&self, p: &[f64], cfg: PurifyConfig) -> Result<Vec<f64>> {
        if p.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: p.len() });
        }
        let mut out = self.transform().matvec(p);
        if cfg.mode == PurifyMode::Averaged {
            out.iter_mut().for_each(|x| *x *= 0.5);
        }
        let in_norm = norm(p);
        let out_norm = norm(&out);
        if out_norm <= 1e-9 * in_norm.max(1.0) {
            if cfg.zero_fallback == ZeroFallback::CleanCentroid {
                let c = self.clean_centroid();
                let cn = norm(c);
                if cn > 0.0 {
                    return Ok(c.iter().map(|x| x * in_norm / cn).collect());
                }
            }
            return Ok(out);
        }
        if cfg.preserve_norm {
            let s = in_norm / out_norm;
            out.iter_mut().for_each(|x| *x *= s);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PurifiedToken {
    pub index: usize,
    pub embedding: Vec<f32>,
    pub substituted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PurifiedPrompt {
    pub dim: usize,
    pub tokens: Vec<PurifiedToken>,
}

impl PurifiedPrompt {
    pub fn embeddings(&self) -> Vec<Vec<f32>> {
        self.tokens.iter().map(|t| t.embedding.clone()).collect()
    }

    pub fn substituted_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.substituted).count()
    }
}

/// Replaces the risky tokens of `prompt` with their purified embeddings.
/// `risks` must line up index-for-index with the prompt tokens.
pub fn purify_prompt(
    bundle: &ProjectorBundle,
    prompt: &TokenizedPrompt,
    risks: &[TokenRisk],
    cfg: PurifyConfig,
) -> Result<PurifiedPrompt> {
    if risks.len() != prompt.len() {
        return Err(Error::InvalidData(format!(
            "{} risk entries for {} tokens",
            risks.len(),
            prompt.len()
        )));
    }
    if prompt.dim() != bundle.dim() {
        return Err(Error::Dimension { expected: bundle.dim(), got: prompt.dim() });
    }
    let tokens = prompt
        .tokens()
        .iter()
        .zip(risks)
        .enumerate()
        .map(|(index, (tok, risk))| {
            if risk.index != index {
                return Err(Error::InvalidData(format!(
                    "risk entry {index} refers to token {}",
                    risk.index
                )));
            }
            if risk.label == TokenLabel::Safe {
                return Ok(PurifiedToken { index, embedding: tok.embedding.clone(), substituted: false });
            }
            let p: Vec<f64> = tok.embedding.iter().map(|&x| f64::from(x)).collect();
            let out = bundle.purify_embedding(&p, cfg)?;
            Ok(PurifiedToken {
                index,
                embedding: out.iter().map(|&x| x as f32).collect(),
                substituted: true,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PurifiedPrompt { dim: prompt.dim(), tokens })
}
