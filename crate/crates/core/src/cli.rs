//! The `purify` command-line tool.
//!
//! Exit codes: 0 safe, 3 risky, 4 unsafe, 2 dimension mismatch, 1 any other
//! error (I/O, format, invalid data), 64 bad command-line usage.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::bundle_file;
use crate::concepts::{load_embeddings, save_embeddings, write_atomic, ConceptList, EmbeddingFile, EmbeddingFormat, Role, TokenizedPrompt};
use crate::error::{Error, Result};
use crate::purify::{purify_prompt, PurifyConfig, PurifyMode, ZeroFallback};
use crate::report::{Action, RiskReportDocument, RunConfig};
use crate::risk::{classify_prompt, ProjectorBundle, TiePolicy, TokenRisk, Verdict, DEFAULT_BLOCK_THRESHOLD};
use crate::subspace::DEFAULT_REL_TOL;
use crate::toyembed::{embed_to_file, ToyLexicon};

pub const EXIT_SAFE: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_DIMENSION: i32 = 2;
pub const EXIT_RISKY: i32 = 3;
pub const EXIT_UNSAFE: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "purify", version, about = "Screen and purify prompt token embeddings against toxic/clean concept subspaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Precompute the projector bundle from toxic and clean concept files.
    Build {
        #[arg(long)]
        toxic: PathBuf,
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_REL_TOL)]
        rel_tol: f64,
    },
    /// Label every prompt token and write a risk report.
    Classify {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        prompt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        decision: DecisionArgs,
    },
    /// Classify, then copy, purify or filter the prompt embeddings.
    Purify {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        prompt: PathBuf,
        /// Output embeddings; `.embjson` writes EMB1-JSON, anything else EMB1.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[command(flatten)]
        decision: DecisionArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::PaperSum)]
        mode: ModeArg,
        #[arg(long)]
        preserve_norm: bool,
        #[arg(long, value_enum, default_value_t = FallbackArg::Keep)]
        zero_fallback: FallbackArg,
    },
    /// Embed text with the deterministic toy embedder.
    EmbedToy {
        #[arg(long)]
        text: String,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct DecisionArgs {
    #[arg(long, value_enum, default_value_t = TieArg::RiskyOnTie)]
    tie_policy: TieArg,
    #[arg(long, default_value_t = DEFAULT_BLOCK_THRESHOLD)]
    block_threshold: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TieArg {
    RiskyOnTie,
    SafeOnTie,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    PaperSum,
    Averaged,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FallbackArg {
    Keep,
    CleanCentroid,
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Dimension { .. } => EXIT_DIMENSION,
        _ => EXIT_ERROR,
    }
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Safe => EXIT_SAFE,
        Verdict::Risky => EXIT_RISKY,
        Verdict::Unsafe => EXIT_UNSAFE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_SAFE };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

pub fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Build { toxic, clean, out, rel_tol } => cmd_build(&toxic, &clean, &out, rel_tol),
        Command::Classify { bundle, prompt, out, decision } => {
            let config = decision.into_config(PurifyConfig::default());
            cmd_classify(&bundle, &prompt, &out, config)
        }
        Command::Purify { bundle, prompt, out, report, decision, mode, preserve_norm, zero_fallback } => {
            let purify = PurifyConfig {
                mode: match mode {
                    ModeArg::PaperSum => PurifyMode::PaperSum,
                    ModeArg::Averaged => PurifyMode::Averaged,
                },
                preserve_norm,
                zero_fallback: match zero_fallback {
                    FallbackArg::Keep => ZeroFallback::Keep,
                    FallbackArg::CleanCentroid => ZeroFallback::CleanCentroid,
                },
            };
            cmd_purify(&bundle, &prompt, &out, &report, decision.into_config(purify))
        }
        Command::EmbedToy { text, dim, seed, lexicon, out } => cmd_embed_toy(&text, dim, seed, lexicon.as_deref(), &out),
    }
}

impl DecisionArgs {
    fn into_config(self, purify: PurifyConfig) -> RunConfig {
        RunConfig {
            tie_policy: match self.tie_policy {
                TieArg::RiskyOnTie => TiePolicy::RiskyOnTie,
                TieArg::SafeOnTie => TiePolicy::SafeOnTie,
            },
            block_threshold: self.block_threshold,
            purify,
            ..RunConfig::default()
        }
    }
}

pub fn cmd_build(toxic: &Path, clean: &Path, out: &Path, rel_tol: f64) -> Result<i32> {
    let toxic = ConceptList::load(toxic, Role::Toxic)?;
    let clean = ConceptList::load(clean, Role::Clean)?;
    let bundle = ProjectorBundle::build(&toxic, &clean, rel_tol)?;
    bundle_file::save(&bundle, out)?;
    println!(
        "bundle: dim {} toxic rank {} clean rank {} -> {}",
        bundle.dim(),
        bundle.toxic_rank(),
        bundle.clean_rank(),
        out.display()
    );
    Ok(EXIT_SAFE)
}

struct Assessment {
    bundle: ProjectorBundle,
    prompt_file: EmbeddingFile,
    prompt: TokenizedPrompt,
    risks: Vec<TokenRisk>,
    report: RiskReportDocument,
}

fn assess(bundle_path: &Path, prompt_path: &Path, mut config: RunConfig) -> Result<Assessment> {
    let bundle = bundle_file::load(bundle_path)?;
    if bundle.fingerprint().is_none() {
        eprintln!("warning: {} carries no concept fingerprint", bundle_path.display());
    }
    let prompt_file = load_embeddings(prompt_path)?;
    let prompt = TokenizedPrompt::from_file(&prompt_file)?;
    if prompt.dim() != bundle.dim() {
        return Err(Error::Dimension { expected: bundle.dim(), got: prompt.dim() });
    }
    config.rel_tol = bundle.rel_tol();
    let risks = bundle.assess(&prompt, config.tie_rule())?;
    let labels: Vec<_> = risks.iter().map(|r| r.label).collect();
    let verdict = classify_prompt(&labels, config.block_threshold)?;
    let report = RiskReportDocument::new(config, bundle.fingerprint_hex(), risks.clone(), verdict);
    Ok(Assessment { bundle, prompt_file, prompt, risks, report })
}

fn write_report(report: &RiskReportDocument, path: &Path) -> Result<()> {
    write_atomic(path, report.to_canonical_json()?.as_bytes())
}

fn summarize(report: &RiskReportDocument) {
    let mut out = std::io::stdout().lock();
    for t in &report.tokens {
        let _ = writeln!(
            out,
            "{:>4} {:<16} d_toxic={:.6} d_clean={:.6} {:?}",
            t.index,
            t.token_text.as_deref().unwrap_or("-"),
            t.d_toxic,
            t.d_clean,
            t.label
        );
    }
    let _ = writeln!(
        out,
        "verdict: {:?} (risky fraction {:.4}, block threshold {})",
        report.verdict.verdict, report.verdict.risky_fraction, report.verdict.block_threshold
    );
}

pub fn cmd_classify(bundle: &Path, prompt: &Path, out: &Path, config: RunConfig) -> Result<i32> {
    let a = assess(bundle, prompt, config)?;
    write_report(&a.report, out)?;
    summarize(&a.report);
    Ok(verdict_code(a.report.verdict.verdict))
}

pub fn cmd_purify(bundle: &Path, prompt: &Path, out: &Path, report_path: &Path, config: RunConfig) -> Result<i32> {
    let Assessment { bundle, prompt_file, prompt, risks, mut report } = assess(bundle, prompt, config)?;
    let verdict = report.verdict.verdict;
    let variant = EmbeddingFormat::from_path(out);
    match verdict {
        Verdict::Unsafe => {
            report.action = Some(Action::Filtered);
        }
        Verdict::Safe => {
            report.action = Some(Action::Passthrough);
            save_embeddings(&prompt_file, out, variant)?;
        }
        Verdict::Risky => {
            report.action = Some(Action::Purified);
            let purified = purify_prompt(&bundle, &prompt, &risks, config.purify)?;
            let mut file = prompt_file.clone();
            file.vectors = purified.embeddings();
            save_embeddings(&file, out, variant)?;
        }
    }
    write_report(&report, report_path)?;
    summarize(&report);
    Ok(verdict_code(verdict))
}

pub fn cmd_embed_toy(text: &str, dim: usize, seed: u64, lexicon: Option<&Path>, out: &Path) -> Result<i32> {
    let lexicon = lexicon.map(ToyLexicon::load).transpose()?;
    let file = embed_to_file(text, dim, seed, lexicon.as_ref())?;
    save_embeddings(&file, out, EmbeddingFormat::from_path(out))?;
    println!("{} tokens, dim {} -> {}", file.count(), dim, out.display());
    Ok(EXIT_SAFE)
}
