use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tkg_core::checkpoint;
use tkg_core::config::{RunConfig, SubsetKind};
use tkg_core::dataset::{
    extract_inverse_subset, extract_symmetric_subset, load_bundle, save_bundle, PatternKind,
    PatternSubset, Quadruple, TkgDataset,
};
use tkg_core::eval::{
    evaluate, evaluate_pattern_subsets, random_baseline, random_baseline_expectation, ranks_csv,
    Evaluation,
};
use tkg_core::synth::{generate, SynthRole};
use tkg_core::{gradsuite, temporal, train, Error, Result};

#[derive(Parser)]
#[command(name = "tkg", version, about = "Fully-inductive temporal knowledge graph link prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; every section is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the configured split files into a dataset bundle.
    Ingest {
        #[command(flatten)]
        common: Common,
    },
    /// Generate planted-rule datasets `a` (source) and `b` (target).
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Train from scratch and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset bundle; defaults to the configured split files.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Checkpoint path (default: OUT/model.ckpt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset it has never seen, with a random
    /// baseline for reference.
    Transfer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Check the temporal-encoding identities.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Mine symmetric and inverse subsets, optionally scoring them.
    Patterns {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Finite-difference checks of every differentiable op.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut c = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        c.train.seed = s;
        c.verify.seed = s;
    }
    Ok(c)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn load_dataset(bundle: Option<&Path>, config: &RunConfig) -> Result<TkgDataset> {
    let d = match bundle {
        Some(dir) => load_bundle(dir)?,
        None => config.data.ingest()?,
    };
    d.augment_inverses()
}

fn stats(d: &TkgDataset) -> String {
    format!(
        "entities={} relations={} timestamps={} train={} observed={} valid={} test={}",
        d.entity_count(),
        d.base_relation_count(),
        d.time_count(),
        d.base().split(tkg_core::dataset::Split::Train).len(),
        d.base().split(tkg_core::dataset::Split::Observed).len(),
        d.base().split(tkg_core::dataset::Split::Valid).len(),
        d.base().split(tkg_core::dataset::Split::Test).len(),
    )
}

fn write_evaluation(out: &Path, stem: &str, ev: &Evaluation, ranks: bool) -> Result<()> {
    write(&out.join(format!("{stem}.txt")), ev.report.to_key_values())?;
    if ranks {
        write(&out.join(format!("{stem}_ranks.csv")), ranks_csv(&ev.ranks))?;
    }
    Ok(())
}

fn quads_text(facts: &[Quadruple]) -> String {
    facts
        .iter()
        .map(|q| format!("{} {} {} {}\n", q.head, q.relation, q.tail, q.time))
        .collect()
}

fn subset_name(kind: PatternKind) -> &'static str {
    match kind {
        PatternKind::Symmetric => "symmetric",
        PatternKind::Inverse => "inverse",
    }
}

fn mine(dataset: &TkgDataset, config: &RunConfig, kinds: &[SubsetKind]) -> Result<Vec<PatternSubset>> {
    let split = config.eval.split()?;
    Ok(kinds
        .iter()
        .map(|k| match k {
            SubsetKind::Symmetric => extract_symmetric_subset(dataset, split),
            SubsetKind::Inverse => extract_inverse_subset(dataset, split, config.eval.min_confidence),
        })
        .collect())
}

fn evaluate_command(
    common: &Common,
    checkpoint_path: &Path,
    dataset: Option<&Path>,
    baseline: bool,
) -> Result<()> {
    let config = load_config(common)?;
    let ckpt = checkpoint::load(checkpoint_path)?;
    let data = load_dataset(dataset, &config)?;
    println!("{}", stats(&data));
    let mode = config.eval.mode();
    let ev = evaluate(&ckpt.params, &data, config.eval.split()?, mode)?;
    write_evaluation(&common.out, "metrics", &ev, config.eval.write_ranks)?;
    print!("{}", ev.report.to_key_values());
    let subsets = mine(&data, &config, &config.eval.subsets)?;
    for (kind, sub) in evaluate_pattern_subsets(&ckpt.params, &data, &subsets, mode)? {
        let stem = format!("metrics_{}", subset_name(kind));
        write_evaluation(&common.out, &stem, &sub, config.eval.write_ranks)?;
        println!("[{}] {}", subset_name(kind), sub.report.to_key_values().replace('\n', " ").trim_end());
    }
    if baseline {
        let facts = data.split(config.eval.split()?);
        let rand = random_baseline(&data, facts, config.train.seed)?;
        let expected = random_baseline_expectation(&data, facts)?;
        let text = format!("{}expected_mrr={expected:.6}\n", rand.to_key_values());
        write(&common.out.join("baseline.txt"), &text)?;
        println!("random baseline: {}", text.replace('\n', " ").trim_end());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { common } => {
            let config = load_config(&common)?;
            let d = config.data.ingest()?;
            save_bundle(&d, &common.out)?;
            println!("{}", stats(&d));
        }
        Command::Synth { common } => {
            let config = load_config(&common)?;
            let seed = config.train.seed;
            let a = generate(&config.synth.a, SynthRole::Source, seed)?;
            let b = generate(&config.synth.b, SynthRole::Target, seed.wrapping_add(1))?;
            for (name, s) in [("a", &a), ("b", &b)] {
                let dir = common.out.join(name);
                save_bundle(&s.dataset, &dir)?;
                let names = s.dataset.relation_names();
                let [p1, p2, p3] = s.rule_relations.map(|r| names[r].as_str());
                write(&dir.join("rule.txt"), format!("{p1}\t{p2}\t{p3}\n"))?;
                println!("{name}: {} rule_heads={}", stats(&s.dataset), s.rule_heads.len());
            }
        }
        Command::Train {
            common,
            dataset,
            checkpoint: ckpt_path,
            epochs,
        } => {
            let mut config = load_config(&common)?;
            if let Some(e) = epochs {
                config.train.epochs = e;
            }
            config.validate()?;
            let data = load_dataset(dataset.as_deref(), &config)?;
            println!("{}", stats(&data));
            let log_path = common.out.join("train.log");
            write(&log_path, "")?;
            let mut log = fs::OpenOptions::new()
                .append(true)
                .open(&log_path)
                .map_err(|e| Error::io(&log_path, e))?;
            let mut log_err = None;
            let outcome = train::train(&data, &config.model, &config.train, |entry, _| {
                println!("{entry}");
                if let Err(e) = writeln!(log, "{entry}") {
                    log_err = Some(Error::io(&log_path, e));
                    return false;
                }
                true
            })?;
            if let Some(e) = log_err {
                return Err(e);
            }
            let path = ckpt_path.unwrap_or_else(|| common.out.join("model.ckpt"));
            checkpoint::save(&outcome.params, config.train.seed, &path)?;
            write(&common.out.join("config.toml"), config.to_toml())?;
            println!(
                "saved {} ({} parameters)",
                path.display(),
                outcome.params.parameter_count()
            );
        }
        Command::Eval {
            common,
            checkpoint,
            dataset,
        } => evaluate_command(&common, &checkpoint, dataset.as_deref(), false)?,
        Command::Transfer {
            common,
            checkpoint,
            dataset,
        } => evaluate_command(&common, &checkpoint, dataset.as_deref(), true)?,
        Command::Verify { common } => {
            let config = load_config(&common)?;
            let report = temporal::verify::run(&config.verify)?;
            print!("{}", report.to_text());
            write(&common.out.join("verify_report.txt"), report.to_text())?;
            write(&common.out.join("verify.txt"), report.to_key_values())?;
        }
        Command::Patterns {
            common,
            dataset,
            checkpoint: ckpt,
        } => {
            let config = load_config(&common)?;
            let data = load_dataset(dataset.as_deref(), &config)?;
            let subsets = mine(&data, &config, &[SubsetKind::Symmetric, SubsetKind::Inverse])?;
            for s in &subsets {
                let name = subset_name(s.kind);
                write(&common.out.join(format!("{name}.quads")), quads_text(&s.quadruples))?;
                println!("{name}: {} quadruples", s.quadruples.len());
            }
            let support: String = subsets
                .iter()
                .flat_map(|s| s.support.iter())
                .map(|(&(p, q), c)| format!("{}\t{}\t{c:.6}\n", data.relation_label(p), data.relation_label(q)))
                .collect();
            write(&common.out.join("inverse_support.txt"), support)?;
            if let Some(path) = ckpt {
                let ckpt = checkpoint::load(&path)?;
                let mode = config.eval.mode();
                for (kind, ev) in evaluate_pattern_subsets(&ckpt.params, &data, &subsets, mode)? {
                    let name = subset_name(kind);
                    write_evaluation(&common.out, &format!("metrics_{name}"), &ev, config.eval.write_ranks)?;
                    println!("[{name}] {}", ev.report.to_key_values().replace('\n', " ").trim_end());
                }
            }
        }
        Command::Gradcheck { common } => {
            let config = load_config(&common)?;
            let entries = gradsuite::run(&config.gradcheck)?;
            let text = gradsuite::report_text(&entries);
            print!("{text}");
            write(&common.out.join("gradcheck.txt"), text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            // Usage errors share the configuration exit code.
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
