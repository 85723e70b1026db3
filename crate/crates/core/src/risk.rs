//! Complementary distances, token labels and prompt verdicts.
//!
//! For a concept matrix `M` with range projector `P_M`, the distance of a
//! token `p` is `||(I - P_M) p||_2`: the part of `p` that the concept span
//! cannot explain. A token is risky when its toxic residual is no larger than
//! its clean residual.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::concepts::{ConceptList, Role, TokenizedPrompt};
use crate::error::{Error, Result};
use crate::matrix::{norm, Matrix};
use crate::subspace::{complement_projector, range_projector, Projector};

/// Cached projectors for one (toxic, clean) pair of concept lists.
#[derive(Debug, Clone)]
pub struct ProjectorBundle {
    toxic: Projector,
    clean: Projector,
    rel_tol: f64,
    fingerprint: Option<[u8; 32]>,
    clean_centroid: Vec<f64>,
    toxic_complement: Matrix,
    clean_complement: Matrix,
    /// `(I - V) + P_R`.
    transform: Matrix,
}

impl ProjectorBundle {
    pub fn build(toxic: &ConceptList, clean: &ConceptList, rel_tol: f64) -> Result<Self> {
        if toxic.role() != Role::Toxic || clean.role() != Role::Clean {
            return Err(Error::InvalidInput("expected a toxic list and a clean list".into()));
        }
        if toxic.dim() != clean.dim() {
            return Err(Error::Dimension { expected: toxic.dim(), got: clean.dim() });
        }
        if toxic.is_empty() || clean.is_empty() {
            return Err(Error::InvalidData("concept lists must be non-empty".into()));
        }
        let toxic_p = range_projector(&toxic.assemble_matrix(), rel_tol)?;
        let clean_p = range_projector(&clean.assemble_matrix(), rel_tol)?;
        let k = clean.len() as f64;
        let mut centroid = vec![0.0; clean.dim()];
        for c in clean.entries() {
            for (acc, v) in centroid.iter_mut().zip(&c.embedding) {
                *acc += f64::from(*v);
            }
        }
        centroid.iter_mut().for_each(|x| *x /= k);
        Self::from_parts(toxic_p, clean_p, rel_tol, Some(fingerprint(toxic, clean)), centroid)
    }

    pub(crate) fn from_parts(
        toxic: Projector,
        clean: Projector,
        rel_tol: f64,
        fingerprint: Option<[u8; 32]>,
        clean_centroid: Vec<f64>,
    ) -> Result<Self> {
        let dim = toxic.dim();
        if clean.dim() != dim {
            return Err(Error::Dimension { expected: dim, got: clean.dim() });
        }
        if clean_centroid.len() != dim {
            return Err(Error::Dimension { expected: dim, got: clean_centroid.len() });
        }
        let toxic_complement = complement_projector(&toxic).matrix().clone();
        let clean_complement = complement_projector(&clean).matrix().clone();
        let transform = toxic_complement.add(clean.matrix());
        Ok(Self {
            toxic,
            clean,
            rel_tol,
            fingerprint,
            clean_centroid,
            toxic_complement,
            clean_complement,
            transform,
        })
    }

    pub fn dim(&self) -> usize {
        self.toxic.dim()
    }

    pub fn toxic_projector(&self) -> &Projector {
        &self.toxic
    }

    pub fn clean_projector(&self) -> &Projector {
        &self.clean
    }

    pub fn toxic_rank(&self) -> usize {
        self.toxic.rank()
    }

    pub fn clean_rank(&self) -> usize {
        self.clean.rank()
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    pub fn fingerprint(&self) -> Option<&[u8; 32]> {
        self.fingerprint.as_ref()
    }

    pub fn fingerprint_hex(&self) -> Option<String> {
        self.fingerprint.map(|f| f.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Mean of the clean concept vectors.
    pub fn clean_centroid(&self) -> &[f64] {
        &self.clean_centroid
    }

    /// The precomputed dual-space map `(I - V) + P_R`.
    pub fn transform(&self) -> &Matrix {
        &self.transform
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: len });
        }
        Ok(())
    }

    /// `(||(I - P_C) p||, ||(I - P_R) p||)`.
    pub fn token_distances(&self, p: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(p.len())?;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("token embedding has non-finite values".into()));
        }
        let d_toxic = norm(&self.toxic_complement.matvec(p));
        let d_clean = norm(&self.clean_complement.matvec(p));
        Ok((d_toxic, d_clean))
    }

    /// Distances and labels for every token, in prompt order.
    pub fn assess(&self, prompt: &TokenizedPrompt, rule: TieRule) -> Result<Vec<TokenRisk>> {
        self.check_dim(prompt.dim())?;
        prompt
            .tokens()
            .iter()
            .enumerate()
            .map(|(index, t)| {
                let p: Vec<f64> = t.embedding.iter().map(|&x| f64::from(x)).collect();
                let (d_toxic, d_clean) = self.token_distances(&p)?;
                Ok(TokenRisk {
                    index,
                    token_text: t.text.clone(),
                    d_toxic,
                    d_clean,
                    label: classify_token(d_toxic, d_clean, rule),
                })
            })
            .collect()
    }
}

/// SHA-256 over both lists' roles, labels and f32 bit patterns.
pub fn fingerprint(toxic: &ConceptList, clean: &ConceptList) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"purify-concepts-v1");
    for list in [toxic, clean] {
        h.update([match list.role() {
            Role::Toxic => 0u8,
            Role::Clean => 1u8,
        }]);
        h.update((list.dim() as u64).to_le_bytes());
        h.update((list.len() as u64).to_le_bytes());
        for c in list.entries() {
            h.update((c.label.len() as u64).to_le_bytes());
            h.update(c.label.as_bytes());
            for v in &c.embedding {
                h.update(v.to_bits().to_le_bytes());
            }
        }
    }
    h.finalize().into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenLabel {
    Risky,
    Safe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiePolicy {
    /// Equal distances count as risky, matching `d_toxic <= d_clean`.
    #[default]
    RiskyOnTie,
    SafeOnTie,
}

/// How equal distances are decided. Two distances are tied when they differ
/// by at most `epsilon` times the larger one, which keeps the rule invariant
/// under rescaling of the token.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TieRule {
    pub policy: TiePolicy,
    pub epsilon: f64,
}

impl TieRule {
    pub const DEFAULT_EPSILON: f64 = 1e-9;

    pub fn new(policy: TiePolicy) -> Self {
        Self { policy, epsilon: Self::DEFAULT_EPSILON }
    }
}

impl Default for TieRule {
    fn default() -> Self {
        Self::new(TiePolicy::default())
    }
}

pub fn classify_token(d_toxic: f64, d_clean: f64, rule: TieRule) -> TokenLabel {
    let tied = (d_toxic - d_clean).abs() <= rule.epsilon * d_toxic.max(d_clean);
    let risky = if tied {
        rule.policy == TiePolicy::RiskyOnTie
    } else {
        d_toxic < d_clean
    };
    if risky {
        TokenLabel::Risky
    } else {
        TokenLabel::Safe
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenRisk {
    pub index: usize,
    pub token_text: Option<String>,
    pub d_toxic: f64,
    pub d_clean: f64,
    pub label: TokenLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Safe,
    Risky,
    Unsafe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PromptVerdict {
    pub verdict: Verdict,
    pub risky_fraction: f64,
    pub block_threshold: f64,
}

pub const DEFAULT_BLOCK_THRESHOLD: f64 = 0.5;

/// Safe with no risky tokens, unsafe once the risky fraction reaches
/// `block_threshold`, risky in between.
pub fn classify_prompt(labels: &[TokenLabel], block_threshold: f64) -> Result<PromptVerdict> {
    if labels.is_empty() {
        return Err(Error::InvalidData("cannot classify an empty prompt".into()));
    }
    if !(block_threshold > 0.0 && block_threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "block threshold must lie in (0, 1], got {block_threshold}"
        )));
    }
    let risky = labels.iter().filter(|l| **l == TokenLabel::Risky).count();
    let risky_fraction = risky as f64 / labels.len() as f64;
    let verdict = if risky == 0 {
        Verdict::Safe
    } else if risky_fraction >= block_threshold {
        Verdict::Unsafe
    } else {
        Verdict::Risky
    };
    Ok(PromptVerdict { verdict, risky_fraction, block_threshold })
}
