use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};

use cephforge::ait::{rasterize_batch, RasterStyle};
use cephforge::anatomy::{load_schema, AnatomySchema, LandmarkSet};
use cephforge::metrics::{evaluate, format_table, EvalOptions, SdMode};
use cephforge::mira::{mira_generate, AugmentConfig};
use cephforge::pdg::{enumerate_valid, generate_prompts_with, PromptLexicon, PromptOptions};
use cephforge::pipeline::{
    build_bundles, ingest, json_files, read_manifest, render_stub_xray, split_dataset,
    synthetic_pool, verify_manifest, BundleConfig,
};
use cephforge::CephError;

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "cephforge", version, about = "Cephalometric landmark augmentation, conditioning images and evaluation")]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Anatomy schema JSON (default: the bundled 38-landmark schema).
    #[arg(long, global = true, env = "CEPHFORGE_SCHEMA")]
    schema: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct AugmentArgs {
    /// Number of sets to generate.
    #[arg(long)]
    count: usize,
    /// JSON file with augmentation settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict augmentation to these constraint names (comma separated).
    #[arg(long, value_delimiter = ',')]
    constraints: Vec<String>,
    #[arg(long)]
    min_constraints: Option<usize>,
    #[arg(long)]
    max_constraints: Option<usize>,
}

#[derive(Args, Clone)]
struct StyleArgs {
    #[arg(long, default_value_t = 512)]
    size: u32,
    #[arg(long, default_value_t = 4)]
    radius: u32,
    #[arg(long, default_value_t = 2)]
    thickness: u32,
}

impl StyleArgs {
    fn style(&self) -> RasterStyle {
        RasterStyle { size: self.size, node_radius: self.radius, edge_thickness: self.thickness, ..RasterStyle::default() }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Expand a pool of annotations into augmented landmark sets.
    Augment {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        aug: AugmentArgs,
    },
    /// Render topology conditioning PNGs for an annotation file or directory.
    Rasterize {
        #[arg(long, alias = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        style: StyleArgs,
    },
    /// Generate rule-clean text prompts.
    Prompts {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Sample without replacement.
        #[arg(long)]
        distinct: bool,
        /// Print the number of valid prompts and exit.
        #[arg(long)]
        enumerate: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a conditioning bundle (images, landmarks, prompts, manifest).
    Bundle {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[command(flatten)]
        aug: AugmentArgs,
        #[command(flatten)]
        style: StyleArgs,
    },
    /// Split record ids into train/val/test.
    Split {
        /// Annotation directory or bundle directory (with manifest.jsonl).
        #[arg(long)]
        input: PathBuf,
        /// Sizes as TRAIN,VAL,TEST.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against ground truth (files matched by name).
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,2.5,3,4")]
        thresholds: Vec<f64>,
        #[arg(long)]
        by_tag: bool,
        /// Use the N-1 standard deviation.
        #[arg(long)]
        sample_sd: bool,
        /// Count `error < t` instead of `error <= t` as a success.
        #[arg(long)]
        exclusive: bool,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check a bundle directory for integrity defects.
    VerifyManifest {
        dir: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Render the procedural grayscale test image for an annotation.
    StubRender {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 512)]
        size: u32,
    },
    /// Write a pool of synthetic valid annotations.
    SynthPool {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure carrying its exit code.
struct Fail(u8, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Fail {
    fn from(e: E) -> Self {
        let e = e.into();
        Fail(exit_code(&e), e)
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<CephError>() {
        Some(CephError::Io { .. }) | Some(CephError::Parse { .. }) => EXIT_IO,
        Some(CephError::Config(_)) | Some(CephError::Invariant { .. }) | Some(CephError::Infeasible(_)) => EXIT_CONFIG,
        Some(_) => EXIT_VALIDATION,
        None if e.downcast_ref::<std::io::Error>().is_some() => EXIT_IO,
        None if e.downcast_ref::<serde_json::Error>().is_some() => EXIT_CONFIG,
        None => EXIT_VALIDATION,
    }
}

fn config_fail(msg: impl Into<String>) -> Fail {
    Fail(EXIT_CONFIG, anyhow::anyhow!(msg.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn load_lexicon(path: Option<&Path>) -> Result<PromptLexicon, Fail> {
    Ok(match path {
        Some(p) => PromptLexicon::load(p)?,
        None => PromptLexicon::default_lexicon(),
    })
}

fn augment_config(args: &AugmentArgs, seed: u64, schema: &AnatomySchema) -> Result<AugmentConfig, Fail> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CephError::Io { path: p.clone(), source: e })?;
            serde_json::from_str(&text)
                .map_err(|e| config_fail(format!("{}: {e}", p.display())))?
        }
        None => AugmentConfig::for_schema(schema),
    };
    cfg.count = args.count;
    cfg.seed = seed;
    if let Some(v) = args.min_constraints {
        cfg.anatomical_min = v;
    }
    if let Some(v) = args.max_constraints {
        cfg.anatomical_max = v;
    }
    let n = schema.constraints().len();
    if args.config.is_none() {
        cfg.anatomical_min = cfg.anatomical_min.min(n);
        cfg.anatomical_max = cfg.anatomical_max.min(n);
    }
    cfg.validate(schema)?;
    Ok(cfg)
}

fn restrict(schema: AnatomySchema, names: &[String]) -> Result<AnatomySchema, Fail> {
    if names.is_empty() {
        return Ok(schema);
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Ok(schema.with_constraints(&refs)?)
}

fn ingest_pool(dir: &Path, schema: &AnatomySchema) -> Result<Vec<LandmarkSet>, Fail> {
    let got = ingest(dir, schema)?;
    for r in &got.rejected {
        eprintln!("rejected {}: {}", r.path.display(), r.reason);
    }
    Ok(got.sets)
}

fn create_dir(path: &Path) -> Result<(), Fail> {
    std::fs::create_dir_all(path).map_err(|e| CephError::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Fail> {
    std::fs::write(path, bytes).map_err(|e| CephError::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Fail> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(config_fail("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")
            .map_err(|e| Fail(EXIT_CONFIG, e))?;
    }
    let schema = match &cli.schema {
        Some(p) => load_schema(p)?,
        None => AnatomySchema::default_schema(),
    };
    let seed = cli.seed;

    match cli.command {
        Command::Augment { pool, out, aug } => {
            let pool = ingest_pool(&pool, &schema)?;
            let schema = restrict(schema, &aug.constraints)?;
            let cfg = augment_config(&aug, seed, &schema)?;
            let sets = mira_generate(&pool, &cfg, &schema)?;
            create_dir(&out)?;
            let mut provenance = String::new();
            for a in &sets {
                let id = a.set.id.as_deref().unwrap_or("set");
                a.set.save(&out.join(format!("{id}.json")))?;
                provenance.push_str(&serde_json::to_string(&serde_json::json!({ "id": id, "provenance": a.provenance }))?);
                provenance.push('\n');
            }
            write_file(&out.join("provenance.jsonl"), provenance)?;
            println!("wrote {} augmented sets to {}", sets.len(), out.display());
        }
        Command::Rasterize { input, out, style } => {
            let files = if input.is_dir() { json_files(&input)? } else { vec![input.clone()] };
            let sets = files.iter().map(|f| LandmarkSet::load(f)).collect::<Result<Vec<_>, _>>()?;
            let images = rasterize_batch(&sets, &schema, &style.style())?;
            create_dir(&out)?;
            for (file, img) in files.iter().zip(&images) {
                let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                img.save_png(&out.join(format!("{stem}.png")))?;
            }
            println!("wrote {} images to {}", images.len(), out.display());
        }
        Command::Prompts { count, lexicon, distinct, enumerate, out } => {
            let lex = load_lexicon(lexicon.as_deref())?;
            if enumerate {
                println!("{}", enumerate_valid(&lex));
                return Ok(());
            }
            let prompts = generate_prompts_with(&lex, count, seed, PromptOptions { distinct })?;
            let mut text = String::new();
            for p in &prompts {
                text.push_str(&p.text);
                text.push('\n');
            }
            match out {
                Some(path) => write_file(&path, text)?,
                None => std::io::stdout().write_all(text.as_bytes()).context("writing stdout")?,
            }
        }
        Command::Bundle { pool, out, lexicon, aug, style } => {
            let lex = load_lexicon(lexicon.as_deref())?;
            let pool = ingest_pool(&pool, &schema)?;
            let schema = restrict(schema, &aug.constraints)?;
            let cfg = BundleConfig { augment: augment_config(&aug, seed, &schema)?, style: style.style() };
            let records = build_bundles(&pool, &schema, &cfg, &lex, &out)?;
            println!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Split { input, sizes, out } => {
            let ids: Vec<String> = if input.join("manifest.jsonl").exists() {
                read_manifest(&input)?.into_iter().map(|r| r.id).collect()
            } else {
                ingest_pool(&input, &schema)?.into_iter().filter_map(|s| s.id).collect()
            };
            let [train, val, test] = sizes[..] else {
                return Err(config_fail(format!("--sizes needs TRAIN,VAL,TEST, got {} values", sizes.len())));
            };
            let split = split_dataset(&ids, (train, val, test), seed)?;
            let mut text = serde_json::to_string_pretty(&split)?;
            text.push('\n');
            match out {
                Some(path) => write_file(&path, text)?,
                None => print!("{text}"),
            }
        }
        Command::Evaluate { pred, gt, thresholds, by_tag, sample_sd, exclusive, json } => {
            let opts = EvalOptions {
                thresholds_mm: thresholds,
                sd_mode: if sample_sd { SdMode::Sample } else { SdMode::Population },
                inclusive: !exclusive,
                by_tag,
            };
            let names = |dir: &Path| -> Result<BTreeMap<String, PathBuf>, Fail> {
                Ok(json_files(dir)?
                    .into_iter()
                    .filter_map(|p| Some((p.file_name()?.to_string_lossy().into_owned(), p)))
                    .collect())
            };
            let (pred_files, gt_files) = (names(&pred)?, names(&gt)?);
            let mut pairs = Vec::new();
            for (name, gt_path) in &gt_files {
                let Some(pred_path) = pred_files.get(name) else {
                    return Err(Fail(EXIT_VALIDATION, anyhow::anyhow!("no prediction for {name}")));
                };
                pairs.push((LandmarkSet::load(pred_path)?, LandmarkSet::load(gt_path)?));
            }
            let report = evaluate(&pairs, &opts)?;
            print!("{}", format_table(&report));
            if let Some(path) = json {
                write_file(&path, report.to_json())?;
            }
        }
        Command::VerifyManifest { dir, lexicon } => {
            let lex = load_lexicon(lexicon.as_deref())?;
            let defects = verify_manifest(&dir, &schema, &lex)?;
            let n = read_manifest(&dir)?.len();
            for d in &defects {
                println!("{d}");
            }
            println!("{n} records, {} defects", defects.len());
            if !defects.is_empty() {
                return Err(Fail(EXIT_VALIDATION, anyhow::anyhow!("manifest has {} defects", defects.len())));
            }
        }
        Command::StubRender { input, out, size } => {
            let set = LandmarkSet::load(&input)?;
            render_stub_xray(&set, &schema, size)?.save_png(&out)?;
        }
        Command::SynthPool { count, out } => {
            let sets = synthetic_pool(count, seed, &schema)?;
            create_dir(&out)?;
            for s in &sets {
                s.save(&out.join(format!("{}.json", s.id.as_deref().unwrap_or("case"))))?;
            }
            println!("wrote {} annotations to {}", sets.len(), out.display());
        }
    }
    Ok(())
}
