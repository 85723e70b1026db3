//! wasm-bindgen bindings for the browser demo in `www/`.

pub mod demo;

use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub fn default_toxic_concepts() -> String {
    demo::DEFAULT_TOXIC.to_string()
}

#[wasm_bindgen]
pub fn default_clean_concepts() -> String {
    demo::DEFAULT_CLEAN.to_string()
}

#[wasm_bindgen]
pub fn default_lexicon() -> String {
    demo::DEFAULT_LEXICON.to_string()
}

/// Returns the analysis as a JSON string.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn analyze_prompt(
    text: &str,
    toxic: &str,
    clean: &str,
    lexicon: &str,
    seed: u32,
    block_threshold: f64,
    safe_on_tie: bool,
    averaged: bool,
    preserve_norm: bool,
) -> Result<String, JsError> {
    let opts = demo::PromptOptions { seed: u64::from(seed), block_threshold, safe_on_tie, averaged, preserve_norm };
    let analysis = demo::analyze_prompt(text, toxic, clean, lexicon, opts).map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&analysis).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn purify_point(x: f64, y: f64, toxic_angle: f64, clean_angle: f64, averaged: bool, preserve_norm: bool) -> Result<Vec<f64>, JsError> {
    demo::purify_point(x, y, toxic_angle, clean_angle, averaged, preserve_norm).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn risk_map(toxic_angle: f64, clean_angle: f64, resolution: usize) -> Result<Vec<f64>, JsError> {
    demo::risk_map(toxic_angle, clean_angle, resolution).map_err(|e| JsError::new(&e))
}
