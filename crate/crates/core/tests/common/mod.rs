#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use purify_core::concepts::{save_embeddings, Concept};
use purify_core::{ConceptList, EmbeddingFile, EmbeddingFormat, Matrix, Role};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// `rows x cols` matrix of rank at most `rank`, as a product of random factors.
pub fn random_low_rank(rng: &mut ChaCha8Rng, rows: usize, cols: usize, rank: usize) -> Matrix {
    random_matrix(rng, rows, rank).matmul(&random_matrix(rng, rank, cols))
}

/// Orthonormal vectors from nalgebra's QR of a random matrix. Used to build
/// test spans with known geometry, independent of the crate's own SVD.
pub fn orthonormal_basis(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> Vec<Vec<f64>> {
    let m = nalgebra::DMatrix::from_fn(dim, count, |_, _| rng.gen_range(-1.0..1.0));
    let q = m.qr().q();
    (0..count).map(|j| q.column(j).iter().copied().collect()).collect()
}

pub fn concept_list(role: Role, vectors: &[Vec<f64>]) -> ConceptList {
    let entries = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| Concept { label: format!("{role:?}-{i}"), embedding: v.iter().map(|&x| x as f32).collect() })
        .collect();
    ConceptList::new(role, entries).unwrap()
}

pub fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn combo(basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let dim = basis[0].len();
    let mut out = vec![0.0; dim];
    for (b, c) in basis.iter().zip(coeffs) {
        for (o, x) in out.iter_mut().zip(b) {
            *o += c * x;
        }
    }
    out
}

pub fn unit_vectors(dim: usize, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter()
        .map(|&i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn write_json_embeddings(path: &Path, dim: usize, vectors: &[Vec<f32>], labels: Option<&[&str]>) {
    let file = EmbeddingFile::new(dim, vectors.to_vec(), labels.map(|l| l.iter().map(|s| s.to_string()).collect()));
    save_embeddings(&file, path, EmbeddingFormat::Json).unwrap();
}

/// Writes the e1-toxic / e2-clean concept fixtures (dim 3) into `dir`.
pub fn write_basis_concepts(dir: &Path) -> (PathBuf, PathBuf) {
    let toxic = dir.join("toxic.embjson");
    let clean = dir.join("clean.embjson");
    write_json_embeddings(&toxic, 3, &[vec![1.0, 0.0, 0.0]], Some(&["nudity"]));
    write_json_embeddings(&clean, 3, &[vec![0.0, 1.0, 0.0]], Some(&["modesty"]));
    (toxic, clean)
}

pub fn purify_bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_purify")).args(args).output().expect("spawn purify")
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
