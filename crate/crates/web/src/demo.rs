//! Plain-Rust implementations behind the wasm exports, testable natively.

use purify_core::concepts::parse_json_embeddings;
use purify_core::purify::purify_prompt;
use purify_core::risk::{classify_prompt, classify_token};
use purify_core::toyembed::embed_tokens;
use purify_core::{
    Concept, ConceptList, ProjectorBundle, PurifyConfig, PurifyMode, Role, TiePolicy, TieRule, TokenLabel, ToyLexicon, Verdict,
    DEFAULT_REL_TOL,
};
use serde::Serialize;

pub const DEFAULT_TOXIC: &str = include_str!("../../core/tests/fixtures/murder/toxic.embjson");
pub const DEFAULT_CLEAN: &str = include_str!("../../core/tests/fixtures/murder/clean.embjson");
pub const DEFAULT_LEXICON: &str = include_str!("../../core/tests/fixtures/murder/lexicon.embjson");

#[derive(Debug, Clone, Copy)]
pub struct PromptOptions {
    pub seed: u64,
    pub block_threshold: f64,
    pub safe_on_tie: bool,
    pub averaged: bool,
    pub preserve_norm: bool,
}

#[derive(Debug, Serialize)]
pub struct TokenRow {
    pub token: String,
    pub d_toxic: f64,
    pub d_clean: f64,
    pub label: TokenLabel,
    pub substituted: bool,
    pub embedding: Vec<f32>,
    pub output: Vec<f32>,
}

#[derive(Debug, Serialize)]
pub struct PromptAnalysis {
    pub dim: usize,
    pub toxic_rank: usize,
    pub clean_rank: usize,
    pub verdict: Verdict,
    pub risky_fraction: f64,
    pub tokens: Vec<TokenRow>,
}

fn concepts(text: &str, role: Role) -> Result<ConceptList, String> {
    let file = parse_json_embeddings(text).map_err(|e| format!("{role:?} concepts: {e}"))?;
    ConceptList::from_file(&file, role).map_err(|e| format!("{role:?} concepts: {e}"))
}

/// Embeds `text` with the toy embedder, classifies every token and purifies
/// the risky ones. Unsafe prompts report their tokens with no substitution.
pub fn analyze_prompt(text: &str, toxic: &str, clean: &str, lexicon: &str, opts: PromptOptions) -> Result<PromptAnalysis, String> {
    let toxic = concepts(toxic, Role::Toxic)?;
    let clean = concepts(clean, Role::Clean)?;
    let bundle = ProjectorBundle::build(&toxic, &clean, DEFAULT_REL_TOL).map_err(|e| e.to_string())?;
    let lexicon = if lexicon.trim().is_empty() {
        None
    } else {
        let file = parse_json_embeddings(lexicon).map_err(|e| format!("lexicon: {e}"))?;
        Some(ToyLexicon::from_file(&file).map_err(|e| format!("lexicon: {e}"))?)
    };
    let prompt = embed_tokens(text, bundle.dim(), opts.seed, lexicon.as_ref()).map_err(|e| e.to_string())?;
    let policy = if opts.safe_on_tie { TiePolicy::SafeOnTie } else { TiePolicy::RiskyOnTie };
    let risks = bundle.assess(&prompt, TieRule::new(policy)).map_err(|e| e.to_string())?;
    let labels: Vec<TokenLabel> = risks.iter().map(|r| r.label).collect();
    let verdict = classify_prompt(&labels, opts.block_threshold).map_err(|e| e.to_string())?;
    let cfg = PurifyConfig {
        mode: if opts.averaged { PurifyMode::Averaged } else { PurifyMode::PaperSum },
        preserve_norm: opts.preserve_norm,
        ..PurifyConfig::default()
    };
    let purified = match verdict.verdict {
        Verdict::Risky => Some(purify_prompt(&bundle, &prompt, &risks, cfg).map_err(|e| e.to_string())?),
        _ => None,
    };
    let tokens = risks
        .iter()
        .zip(prompt.tokens())
        .map(|(r, t)| {
            let out = purified.as_ref().map(|p| &p.tokens[r.index]);
            TokenRow {
                token: r.token_text.clone().unwrap_or_default(),
                d_toxic: r.d_toxic,
                d_clean: r.d_clean,
                label: r.label,
                substituted: out.is_some_and(|o| o.substituted),
                embedding: t.embedding.clone(),
                output: out.map_or_else(|| t.embedding.clone(), |o| o.embedding.clone()),
            }
        })
        .collect();
    Ok(PromptAnalysis {
        dim: bundle.dim(),
        toxic_rank: bundle.toxic_rank(),
        clean_rank: bundle.clean_rank(),
        verdict: verdict.verdict,
        risky_fraction: verdict.risky_fraction,
        tokens,
    })
}

fn plane_bundle(toxic_angle: f64, clean_angle: f64) -> Result<ProjectorBundle, String> {
    let dir = |a: f64| vec![a.cos() as f32, a.sin() as f32];
    let toxic = ConceptList::new(Role::Toxic, vec![Concept { label: "toxic".into(), embedding: dir(toxic_angle) }])
        .map_err(|e| e.to_string())?;
    let clean = ConceptList::new(Role::Clean, vec![Concept { label: "clean".into(), embedding: dir(clean_angle) }])
        .map_err(|e| e.to_string())?;
    ProjectorBundle::build(&toxic, &clean, DEFAULT_REL_TOL).map_err(|e| e.to_string())
}

/// Geometry of one point in the plane, with one toxic and one clean
/// direction given by their angles (radians).
///
/// Returns `[toxic_residual.x, .y, clean_shadow.x, .y, purified.x, .y,
/// d_toxic, d_clean, risky]`, where `toxic_residual = (I - V) p`,
/// `clean_shadow = P_R p` and `risky` is 1 or 0.
pub fn purify_point(x: f64, y: f64, toxic_angle: f64, clean_angle: f64, averaged: bool, preserve_norm: bool) -> Result<Vec<f64>, String> {
    let b = plane_bundle(toxic_angle, clean_angle)?;
    let p = [x, y];
    let v = b.toxic_projector().apply(&p);
    let residual = [p[0] - v[0], p[1] - v[1]];
    let shadow = b.clean_projector().apply(&p);
    let cfg = PurifyConfig {
        mode: if averaged { PurifyMode::Averaged } else { PurifyMode::PaperSum },
        preserve_norm,
        ..PurifyConfig::default()
    };
    let out = b.purify_embedding(&p, cfg).map_err(|e| e.to_string())?;
    let (dt, dc) = b.token_distances(&p).map_err(|e| e.to_string())?;
    let risky = classify_token(dt, dc, TieRule::default()) == TokenLabel::Risky;
    Ok(vec![residual[0], residual[1], shadow[0], shadow[1], out[0], out[1], dt, dc, f64::from(u8::from(risky))])
}

/// `d_toxic - d_clean` on a `resolution x resolution` grid over
/// `[-1, 1]^2`, row-major from the top-left corner. Negative or zero cells
/// are risky under the default rule.
pub fn risk_map(toxic_angle: f64, clean_angle: f64, resolution: usize) -> Result<Vec<f64>, String> {
    if !(2..=512).contains(&resolution) {
        return Err(format!("resolution must be in 2..=512, got {resolution}"));
    }
    let b = plane_bundle(toxic_angle, clean_angle)?;
    let step = 2.0 / (resolution - 1) as f64;
    let mut out = Vec::with_capacity(resolution * resolution);
    for row in 0..resolution {
        let y = 1.0 - row as f64 * step;
        for col in 0..resolution {
            let x = -1.0 + col as f64 * step;
            let (dt, dc) = b.token_distances(&[x, y]).map_err(|e| e.to_string())?;
            out.push(dt - dc);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn opts() -> PromptOptions {
        PromptOptions { seed: 0, block_threshold: 0.5, safe_on_tie: false, averaged: false, preserve_norm: false }
    }

    #[test]
    fn worked_example_flags_killed() {
        let a = analyze_prompt("a man gets killed", DEFAULT_TOXIC, DEFAULT_CLEAN, DEFAULT_LEXICON, opts()).unwrap();
        assert_eq!(a.verdict, Verdict::Risky);
        let risky: Vec<&str> = a.tokens.iter().filter(|t| t.label == TokenLabel::Risky).map(|t| t.token.as_str()).collect();
        assert_eq!(risky, ["killed"]);
        for t in &a.tokens {
            assert_eq!(t.substituted, t.token == "killed");
            if !t.substituted {
                assert_eq!(t.output, t.embedding);
            }
        }
        assert_eq!((a.toxic_rank, a.clean_rank), (2, 4));
    }

    #[test]
    fn unsafe_prompt_is_not_purified() {
        let a = analyze_prompt("killed killed man", DEFAULT_TOXIC, DEFAULT_CLEAN, DEFAULT_LEXICON, opts()).unwrap();
        assert_eq!(a.verdict, Verdict::Unsafe);
        assert!(a.tokens.iter().all(|t| !t.substituted));
    }

    #[test]
    fn bad_inputs_are_reported() {
        assert!(analyze_prompt("", DEFAULT_TOXIC, DEFAULT_CLEAN, "", opts()).is_err());
        assert!(analyze_prompt("x", "{", DEFAULT_CLEAN, "", opts()).unwrap_err().contains("Toxic"));
        assert!(risk_map(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn point_geometry() {
        // toxic along x, clean along y: p = (1, 1) loses x and doubles y
        let g = purify_point(1.0, 1.0, 0.0, FRAC_PI_2, false, false).unwrap();
        let want = [0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 1.0, 1.0, 1.0];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-7, "{g:?}");
        }
    }

    #[test]
    fn risk_map_signs() {
        let m = risk_map(0.0, FRAC_PI_2, 3).unwrap();
        // (1, 0) on the toxic axis: d_toxic - d_clean = 0 - 1
        assert!((m[5] + 1.0).abs() < 1e-7);
        // (0, 1) on the clean axis
        assert!((m[1] - 1.0).abs() < 1e-7);
    }
}
