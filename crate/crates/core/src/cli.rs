//! Command-line front end: `compare`, `evaluate` and `synth`.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::diff::{compare_documents, render_annotation, report_to_json, write_atomic, DiffConfig, DocumentInput, Mode};
use crate::error::{Error, Result, Stage};
use crate::eval::{generate_pair, run_experiment, CategoryRow, Corpus, Experiment, SynthSpec};
use crate::raster::load_image;

#[derive(Debug, Parser)]
#[command(name = "docdiff", version, about = "Find modifications between a reference document image and a test copy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare two page images. Exit 0: no modification, 1: modifications, 2: error.
    Compare {
        reference: PathBuf,
        test: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score the tool on a corpus directory with ground truth.
    Evaluate {
        corpus: PathBuf,
        /// Directory receiving pairs.csv, table.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Generate a synthetic corpus from a TOML or JSON spec.
    Synth { spec: PathBuf, out_dir: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    OcrOnly,
    Combined,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::OcrOnly => Mode::OcrOnly,
            ModeArg::Combined => Mode::Combined,
        }
    }
}

/// Flags shared by `compare` and `evaluate`. Any flag given overrides the
/// config file, which overrides the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML (or `.json`) file with the same keys as the configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub word_ocr_simil: Option<f64>,
    #[arg(long)]
    pub line_simil: Option<f64>,
    #[arg(long)]
    pub word_pixel_coeff: Option<f64>,
    /// Pixel shifts searched in each direction (±N).
    #[arg(long, value_name = "N")]
    pub shift_range: Option<i32>,
    /// Rotation searched in each direction, in degrees (±A).
    #[arg(long, value_name = "A")]
    pub alpha_range: Option<f64>,
    /// Recognized text for the reference, instead of running the OCR engine.
    #[arg(long)]
    pub hocr_ref: Option<PathBuf>,
    #[arg(long)]
    pub hocr_test: Option<PathBuf>,
    /// Write a side-by-side annotated PNG.
    #[arg(long, value_name = "OUT.png")]
    pub annotate: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "OUT.json")]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Minimum IoU for a finding to match a ground-truth box.
    #[arg(long)]
    pub iou: Option<f64>,
    /// More output on stderr; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[arg(short, long, conflicts_with = "verbose")]
    pub quiet: bool,
}

/// Resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CliConfig {
    #[serde(flatten)]
    pub diff: DiffConfig,
    pub iou: f64,
    pub jobs: Option<usize>,
    pub report: Option<PathBuf>,
    pub annotate: Option<PathBuf>,
    pub hocr_ref: Option<PathBuf>,
    pub hocr_test: Option<PathBuf>,
    /// 0 quiet, 1 normal, 2 and above verbose.
    pub verbosity: u8,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            diff: DiffConfig::default(),
            iou: 0.5,
            jobs: None,
            report: None,
            annotate: None,
            hocr_ref: None,
            hocr_test: None,
            verbosity: 1,
        }
    }
}

impl CliConfig {
    pub fn validate(&self) -> Result<()> {
        self.diff.validate()?;
        if !(self.iou > 0.0 && self.iou <= 1.0) {
            return Err(Error::InvalidConfig(format!("iou must be in (0, 1], got {}", self.iou)));
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn read_structured<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    if is_json(path) {
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }
}

/// Builds the run configuration from defaults, the config file and the flags,
/// in that order of precedence, and validates it.
pub fn resolve_config(args: &ConfigArgs) -> Result<CliConfig> {
    let mut cfg = match &args.config {
        Some(path) => read_structured::<CliConfig>(path)?,
        None => CliConfig::default(),
    };
    let d = &mut cfg.diff;
    if let Some(m) = args.mode {
        d.mode = m.into();
    }
    if let Some(v) = args.word_ocr_simil {
        d.matching.word_ocr_simil = v;
    }
    if let Some(v) = args.line_simil {
        d.matching.line_simil = v;
    }
    if let Some(v) = args.word_pixel_coeff {
        d.pixel.word_pixel_coeff = v;
    }
    if let Some(n) = args.shift_range {
        if n < 0 {
            return Err(Error::InvalidConfig(format!("shift range must be non-negative, got {n}")));
        }
        let r = &mut d.pixel.range;
        (r.x_min, r.x_max, r.y_min, r.y_max) = (-n, n, -n, n);
    }
    if let Some(a) = args.alpha_range {
        if !(a >= 0.0) {
            return Err(Error::InvalidConfig(format!("alpha range must be non-negative, got {a}")));
        }
        let r = &mut d.pixel.range;
        (r.alpha_min, r.alpha_max) = (-a, a);
    }
    if let Some(v) = args.iou {
        cfg.iou = v;
    }
    if args.jobs.is_some() {
        cfg.jobs = args.jobs;
    }
    for (slot, flag) in [
        (&mut cfg.report, &args.report),
        (&mut cfg.annotate, &args.annotate),
        (&mut cfg.hocr_ref, &args.hocr_ref),
        (&mut cfg.hocr_test, &args.hocr_test),
    ] {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
    if args.quiet {
        cfg.verbosity = 0;
    } else if args.verbose > 0 {
        cfg.verbosity = 1 + args.verbose;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Spec of a generated corpus: pair `i` uses `seed + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub pairs: usize,
    #[serde(flatten)]
    pub base: SynthSpec,
}

impl CorpusSpec {
    pub fn specs(&self) -> Vec<SynthSpec> {
        (0..self.pairs)
            .map(|i| SynthSpec {
                seed: self.base.seed.wrapping_add(i as u64),
                ..self.base.clone()
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(Error::InvalidConfig("pairs must be at least 1".into()));
        }
        self.base.validate()
    }
}

pub fn load_corpus_spec(path: &Path) -> Result<CorpusSpec> {
    let spec: CorpusSpec = read_structured(path)?;
    spec.validate()?;
    Ok(spec)
}

fn png_bytes(img: image::DynamicImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| Error::CorruptImage(e.to_string()))?;
    Ok(buf.into_inner())
}

/// Writes the pairs of `spec` under `out_dir` in the layout `evaluate` reads.
pub fn write_corpus(spec: &CorpusSpec, out_dir: &Path) -> Result<()> {
    for (i, s) in spec.specs().iter().enumerate() {
        let pair = generate_pair(s)?;
        let dir = out_dir.join(format!("pair_{i:04}"));
        std::fs::create_dir_all(&dir)?;
        write_atomic(&dir.join("ref.png"), &png_bytes(pair.ref_img.to_image().into())?)?;
        write_atomic(&dir.join("test.png"), &png_bytes(pair.test_img.to_image().into())?)?;
        write_atomic(&dir.join("ref.hocr"), pair.ref_hocr.as_bytes())?;
        write_atomic(&dir.join("test.hocr"), pair.test_hocr.as_bytes())?;
        write_atomic(&dir.join("truth.json"), pair.truth.to_json().as_bytes())?;
    }
    Ok(())
}

fn csv_bytes(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn fmt_ratio(v: f64) -> String {
    format!("{v:.4}")
}

fn category_record(r: &CategoryRow) -> Vec<String> {
    vec![
        r.category.clone(),
        r.pairs.to_string(),
        r.errored.to_string(),
        r.tp.to_string(),
        r.fp.to_string(),
        r.fn_.to_string(),
        fmt_ratio(r.precision),
        fmt_ratio(r.recall),
    ]
}

/// Writes `pairs.csv`, `table.csv` and `summary.json` for an experiment.
pub fn write_experiment(exp: &Experiment, cfg: &CliConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let pairs = csv_bytes(|w| {
        w.write_record(["pair", "category", "status", "tp", "fp", "fn", "precision", "recall", "error"])?;
        for p in &exp.pairs {
            match &p.outcome {
                Ok(e) => w.write_record([
                    p.name.as_str(),
                    &p.category,
                    "ok",
                    &e.tp.to_string(),
                    &e.fp.to_string(),
                    &e.fn_.to_string(),
                    &fmt_ratio(e.precision),
                    &fmt_ratio(e.recall),
                    "",
                ])?,
                Err(msg) => w.write_record([p.name.as_str(), &p.category, "error", "", "", "", "", "", msg])?,
            }
        }
        let a = &exp.aggregate;
        w.write_record([
            "aggregate",
            &a.category,
            "",
            &a.tp.to_string(),
            &a.fp.to_string(),
            &a.fn_.to_string(),
            &fmt_ratio(a.precision),
            &fmt_ratio(a.recall),
            "",
        ])
    })?;
    let table = csv_bytes(|w| {
        w.write_record(["category", "pairs", "errored", "tp", "fp", "fn", "precision", "recall"])?;
        for row in exp.categories.iter().chain(std::iter::once(&exp.aggregate)) {
            w.write_record(category_record(row))?;
        }
        Ok(())
    })?;
    let failed: Vec<serde_json::Value> = exp
        .pairs
        .iter()
        .filter_map(|p| p.outcome.as_ref().err().map(|e| serde_json::json!({"pair": p.name, "error": e})))
        .collect();
    let summary = serde_json::json!({
        "averaging": "micro",
        "iou": cfg.iou,
        "mode": cfg.diff.mode,
        "config": cfg.diff,
        "aggregate": exp.aggregate,
        "categories": exp.categories,
        "failed": failed,
    });
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write_atomic(&out.join("pairs.csv"), &pairs)?;
    write_atomic(&out.join("table.csv"), &table)?;
    write_atomic(&out.join("summary.json"), json.as_bytes())
}

fn input(image: &Path, hocr: &Option<PathBuf>) -> DocumentInput {
    DocumentInput {
        image: image.to_path_buf(),
        hocr: hocr.clone(),
    }
}

fn cmd_compare(reference: &Path, test: &Path, args: &ConfigArgs) -> Result<i32> {
    let cfg = resolve_config(args)?;
    let report = compare_documents(&input(reference, &cfg.hocr_ref), &input(test, &cfg.hocr_test), &cfg.diff)?;
    let json = report_to_json(&report);
    match &cfg.report {
        Some(path) => write_atomic(path, json.as_bytes()).map_err(|e| e.at(Stage::Report))?,
        None => print!("{json}"),
    }
    if let Some(path) = &cfg.annotate {
        let r = load_image(reference).map_err(|e| e.at(Stage::LoadReference))?;
        let t = load_image(test).map_err(|e| e.at(Stage::LoadTest))?;
        let png = png_bytes(render_annotation(&r, &t, &report).into()).map_err(|e| e.at(Stage::Report))?;
        write_atomic(path, &png).map_err(|e| e.at(Stage::Report))?;
    }
    if cfg.verbosity >= 2 {
        eprintln!(
            "{} coordinated, {} modifications",
            report.coordinated_count,
            report.modifications.len()
        );
    }
    Ok(if report.modifications.is_empty() { 0 } else { 1 })
}

fn cmd_evaluate(corpus: &Path, out: &Path, args: &ConfigArgs) -> Result<i32> {
    let cfg = resolve_config(args)?;
    let exp = run_experiment(&Corpus::Directory(corpus.to_path_buf()), &cfg.diff, cfg.iou, cfg.jobs)?;
    write_experiment(&exp, &cfg, out)?;
    if cfg.verbosity >= 1 {
        let a = &exp.aggregate;
        eprintln!(
            "{} pairs ({} errored): precision {:.4}, recall {:.4}",
            a.pairs + a.errored,
            a.errored,
            a.precision,
            a.recall
        );
    }
    Ok(0)
}

fn cmd_synth(spec: &Path, out_dir: &Path) -> Result<i32> {
    let spec = load_corpus_spec(spec)?;
    write_corpus(&spec, out_dir)?;
    Ok(0)
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Compare { reference, test, config } => cmd_compare(reference, test, config),
        Command::Evaluate { corpus, out, config } => cmd_evaluate(corpus, out, config),
        Command::Synth { spec, out_dir } => cmd_synth(spec, out_dir),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("docdiff: {e}");
            2
        }
    }
}

/// Entry point of the binary: parses `std::env::args` and runs.
pub fn run() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => execute(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}
