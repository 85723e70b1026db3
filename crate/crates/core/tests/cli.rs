mod common;

use std::fs;
use std::path::Path;

use common::*;
use purify_core::bundle_file;
use purify_core::concepts::load_embeddings;

fn build(dir: &Path) -> std::path::PathBuf {
    let (toxic, clean) = write_basis_concepts(dir);
    let bundle = dir.join("b.pgb");
    let out = purify_bin(&["build", "--toxic", p(&toxic), "--clean", p(&clean), "--out", p(&bundle)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    bundle
}

fn prompt(dir: &Path, name: &str, vectors: &[Vec<f32>]) -> std::path::PathBuf {
    let path = dir.join(name);
    write_json_embeddings(&path, vectors[0].len(), vectors, None);
    path
}

const E1: [f32; 3] = [1.0, 0.0, 0.0];
const E2: [f32; 3] = [0.0, 1.0, 0.0];

#[test]
fn build_writes_deterministic_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = build(dir.path());
    let b = bundle_file::load(&bundle).unwrap();
    assert_eq!((b.dim(), b.toxic_rank(), b.clean_rank()), (3, 1, 1));
    let first = fs::read(&bundle).unwrap();
    build(dir.path());
    assert_eq!(fs::read(&bundle).unwrap(), first);
}

#[test]
fn build_dimension_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let toxic = dir.path().join("t.embjson");
    let clean = dir.path().join("c.embjson");
    write_json_embeddings(&toxic, 3, &[E1.to_vec()], Some(&["t"]));
    write_json_embeddings(&clean, 4, &[vec![0.0, 1.0, 0.0, 0.0]], Some(&["c"]));
    let out_path = dir.path().join("b.pgb");
    let out = purify_bin(&["build", "--toxic", p(&toxic), "--clean", p(&clean), "--out", p(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_path.exists());
}

#[test]
fn unreadable_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.embjson");
    let out = purify_bin(&["build", "--toxic", p(&missing), "--clean", p(&missing), "--out", p(&dir.path().join("b"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.embjson"));
}

#[test]
fn usage_errors_are_distinct() {
    assert_eq!(purify_bin(&["classify"]).status.code(), Some(64));
    assert_eq!(purify_bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn classify_verdict_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = build(dir.path());
    let cases: [(&[[f32; 3]], i32, &str); 3] = [
        (&[E2], 0, "safe"),
        (&[E1, E1], 4, "unsafe"),
        (&[E2, E2, E2, E1], 3, "risky"),
    ];
    for (i, (vectors, code, verdict)) in cases.iter().enumerate() {
        let vs: Vec<Vec<f32>> = vectors.iter().map(|v| v.to_vec()).collect();
        let prompt = prompt(dir.path(), &format!("p{i}.embjson"), &vs);
        let report = dir.path().join(format!("r{i}.json"));
        let out = purify_bin(&["classify", "--bundle", p(&bundle), "--prompt", p(&prompt), "--out", p(&report)]);
        assert_eq!(out.status.code(), Some(*code));
        let doc: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
        assert_eq!(doc["verdict"]["verdict"], *verdict);
        assert_eq!(doc["schema_version"], "1");
        assert_eq!(doc["tokens"].as_array().unwrap().len(), vs.len());
        assert_eq!(doc["config"]["block_threshold"].as_f64(), Some(0.5));
    }
}

#[test]
fn classify_flags_change_the_decision() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = build(dir.path());
    let prompt = prompt(dir.path(), "p.embjson", &[vec![0.0, 0.0, 1.0], E2.to_vec(), E2.to_vec(), E2.to_vec()]);
    let report = dir.path().join("r.json");
    // e3 ties at (1, 1): risky by default, safe under safe-on-tie
    let out = purify_bin(&["classify", "--bundle", p(&bundle), "--prompt", p(&prompt), "--out", p(&report)]);
    assert_eq!(out.status.code(), Some(3));
    let out = purify_bin(&[
        "classify", "--bundle", p(&bundle), "--prompt", p(&prompt), "--out", p(&report), "--tie-policy", "safe-on-tie",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = purify_bin(&[
        "classify", "--bundle", p(&bundle), "--prompt", p(&prompt), "--out", p(&report), "--block-threshold", "0.25",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn classify_dimension_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = build(dir.path());
    let prompt = prompt(dir.path(), "p.embjson", &[vec![1.0, 0.0, 0.0, 0.0]]);
    let report = dir.path().join("r.json");
    let out = purify_bin(&["classify", "--bundle", p(&bundle), "--prompt", p(&prompt), "--out", p(&report)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!report.exists());
}

#[test]
fn purify_safe_prompt_passes_through() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = build(dir.path());
    let vs = vec![vec![0.1f32, 0.9, 0.3], vec![-0.2, 0.7, 0.05]];
    let prompt = prompt(dir.path(), "p.embjson", &vs);
    let out_path = dir.path().join("o.emb");
    let report = dir.path().join("r.json");
    let out = purify_bin(&["purify", "--bundle", p(&bundle), "--prompt", p(&prompt), "--out", p(&out_path), "--report", p(&report)]);
    assert_eq!(out.status.code(), Some(0));
    let back = load_embeddings(&out_path).unwrap();
    let bits = |v: &[Vec<f32>]| v.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back.vectors), bits(&vs));
    assert!(dir.path().join("o.emb.json").exists());
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(doc["action"], "passthrough");
}

#[test]
fn purify_unsafe_prompt_is_filtered() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = build(dir.path());
    let prompt = prompt(dir.path(), "p.embjson", &[E1.to_vec(), E1.to_vec()]);
    let out_path = dir.path().join("o.embjson");
    let report = dir.path().join("r.json");
    let out = purify_bin(&["purify", "--bundle", p(&bundle), "--prompt", p(&prompt), "--out", p(&out_path), "--report", p(&report)]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!out_path.exists());
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(doc["action"], "filtered");
    assert_eq!(doc["verdict"]["risky_fraction"].as_f64(), Some(1.0));
}

/// The risky 4-token fixture against a bundle with non-axis-aligned spans:
/// exactly one vector changes, and it matches `(I - P_C) p + P_R p` computed
/// with nalgebra from the normal equations `P = M (M^T M)^-1 M^T`.
#[test]
fn purify_risky_prompt_matches_dense_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let toxic_vs = vec![vec![0.8f32, 0.1, 0.0, 0.2], vec![0.1, 0.9, 0.1, 0.0]];
    let clean_vs = vec![vec![0.0f32, 0.1, 1.0, 0.3]];
    let toxic = dir.path().join("t.embjson");
    let clean = dir.path().join("c.embjson");
    write_json_embeddings(&toxic, 4, &toxic_vs, Some(&["a", "b"]));
    write_json_embeddings(&clean, 4, &clean_vs, Some(&["c"]));
    let bundle = dir.path().join("b.pgb");
    assert_eq!(purify_bin(&["build", "--toxic", p(&toxic), "--clean", p(&clean), "--out", p(&bundle)]).status.code(), Some(0));

    let vs = vec![
        vec![0.0f32, 0.1, 0.9, 0.2],
        vec![0.1, 0.0, 1.0, 0.4],
        vec![0.7, 0.3, 0.1, 0.1],
        vec![0.0, 0.0, 0.8, 0.1],
    ];
    let prompt = prompt(dir.path(), "p.embjson", &vs);
    let out_path = dir.path().join("o.embjson");
    let report = dir.path().join("r.json");
    let out = purify_bin(&["purify", "--bundle", p(&bundle), "--prompt", p(&prompt), "--out", p(&out_path), "--report", p(&report)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
    let got = load_embeddings(&out_path).unwrap().vectors;

    let projector = |cols: &[Vec<f32>]| {
        let m = nalgebra::DMatrix::from_fn(4, cols.len(), |i, j| f64::from(cols[j][i]));
        let gram_inv = (m.transpose() * &m).try_inverse().unwrap();
        &m * gram_inv * m.transpose()
    };
    let pc = projector(&toxic_vs);
    let pr = projector(&clean_vs);
    let transform = nalgebra::DMatrix::identity(4, 4) - pc + pr;

    let changed: Vec<usize> = (0..4).filter(|&i| got[i] != vs[i]).collect();
    assert_eq!(changed, vec![2]);
    let x = nalgebra::DVector::from_iterator(4, vs[2].iter().map(|&v| f64::from(v)));
    let expected = &transform * x;
    for (g, e) in got[2].iter().zip(expected.iter()) {
        assert!((f64::from(*g) - e).abs() <= 1e-5, "{g} vs {e}");
    }
}

#[test]
fn embed_toy_is_deterministic_and_labeled() {
    let dir = tempfile::tempdir().unwrap();
    let lexicon = fixtures_dir().join("murder").join("lexicon.embjson");
    let a = dir.path().join("a.embjson");
    let b = dir.path().join("b.embjson");
    for out in [&a, &b] {
        let o = purify_bin(&["embed-toy", "--text", "a man gets killed", "--dim", "8", "--seed", "0", "--lexicon", p(&lexicon), "--out", p(out)]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let f = load_embeddings(&a).unwrap();
    assert_eq!(f.labels.unwrap(), ["a", "man", "gets", "killed"]);
    assert!(f.generator.unwrap().starts_with("toyembed/v1"));
}

#[test]
fn embed_toy_rejects_empty_text() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("a.embjson");
    let o = purify_bin(&["embed-toy", "--text", "  ", "--dim", "8", "--out", p(&out_path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out_path.exists());
}

#[test]
fn bundle_without_fingerprint_warns() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = build(dir.path());
    // clear the fingerprint flag and drop its 32 bytes
    let mut bytes = fs::read(&bundle).unwrap();
    bytes[24] = 0;
    bytes.drain(25..57);
    fs::write(&bundle, bytes).unwrap();
    let prompt = prompt(dir.path(), "p.embjson", &[E2.to_vec()]);
    let report = dir.path().join("r.json");
    let out = purify_bin(&["classify", "--bundle", p(&bundle), "--prompt", p(&prompt), "--out", p(&report)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert!(doc["bundle_fingerprint"].is_null());
}
