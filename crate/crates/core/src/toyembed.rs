//! Deterministic model-free embedder.
//!
//! Text is lowercased and split on whitespace. Tokens found in the lexicon
//! take their anchor vector. Every other token gets a pseudo-random unit
//! vector: a SplitMix64 stream seeded with `seed ^ fnv1a64(token)` yields
//! coordinates uniform in `[-1, 1)` (53-bit mantissas), and the vector is
//! normalized. Only IEEE-exact operations (`+`, `*`, `/`, `sqrt`) are used,
//! so output bits are identical on every platform.

use std::collections::BTreeMap;
use std::path::Path;

use crate::concepts::{load_embeddings, EmbeddingFile, Token, TokenizedPrompt};
use crate::error::{Error, Result};

/// Version tag written into files produced by this embedder.
pub const GENERATOR_TAG: &str = "toyembed/v1 splitmix64 fnv1a64";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 (Steele, Lea and Flood).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[-1, 1)`.
    pub fn next_signed_unit(&mut self) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        2.0 * u - 1.0
    }
}

/// Unit vector for a token not in the lexicon.
pub fn hashed_unit_vector(token: &str, dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = SplitMix64::new(seed ^ fnv1a64(token.as_bytes()));
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.next_signed_unit()).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // Near-zero draws would amplify rounding; redraw.
        if n > 1e-3 {
            return v.iter().map(|x| (x / n) as f32).collect();
        }
    }
}

/// Fixed token vectors, normalized to unit length on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyLexicon {
    dim: usize,
    anchors: BTreeMap<String, Vec<f32>>,
}

impl ToyLexicon {
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (String, Vec<f32>)>) -> Result<Self> {
        let mut anchors = BTreeMap::new();
        for (word, v) in entries {
            if v.len() != dim {
                return Err(Error::Dimension { expected: dim, got: v.len() });
            }
            let n = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
            if !(n.is_finite() && n > 0.0) {
                return Err(Error::InvalidData(format!("lexicon anchor {word:?} has zero or non-finite norm")));
            }
            let unit = v.iter().map(|&x| (f64::from(x) / n) as f32).collect();
            if anchors.insert(word.to_lowercase(), unit).is_some() {
                return Err(Error::InvalidData(format!("duplicate lexicon entry {word:?}")));
            }
        }
        Ok(Self { dim, anchors })
    }

    /// Labels are the token strings.
    pub fn from_file(file: &EmbeddingFile) -> Result<Self> {
        let labels = file
            .labels
            .as_ref()
            .ok_or_else(|| Error::InvalidData("lexicon files must carry labels".into()))?;
        Self::new(file.dim, labels.iter().cloned().zip(file.vectors.iter().cloned()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_file(&load_embeddings(path)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.anchors.get(token).map(Vec::as_slice)
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

pub fn embed_tokens(text: &str, dim: usize, seed: u64, lexicon: Option<&ToyLexicon>) -> Result<TokenizedPrompt> {
    if dim < 2 {
        return Err(Error::InvalidInput(format!("dim must be at least 2, got {dim}")));
    }
    if let Some(lex) = lexicon {
        if lex.dim() != dim {
            return Err(Error::Dimension { expected: dim, got: lex.dim() });
        }
    }
    let words = tokenize(text);
    if words.is_empty() {
        return Err(Error::InvalidData("text has no tokens".into()));
    }
    let tokens = words
        .into_iter()
        .map(|w| {
            let embedding = match lexicon.and_then(|l| l.get(&w)) {
                Some(anchor) => anchor.to_vec(),
                None => hashed_unit_vector(&w, dim, seed),
            };
            Token { text: Some(w), embedding }
        })
        .collect();
    TokenizedPrompt::new(dim, tokens)
}

/// Embeds `text` and packages it as an `EMB1-JSON` file tagged with the
/// generator version.
pub fn embed_to_file(text: &str, dim: usize, seed: u64, lexicon: Option<&ToyLexicon>) -> Result<EmbeddingFile> {
    let mut file = embed_tokens(text, dim, seed, lexicon)?.to_file();
    file.generator = Some(format!("{GENERATOR_TAG} seed={seed}"));
    Ok(file)
}
