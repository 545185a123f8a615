//! Run configuration: a sectioned TOML file (`[data]`, `[model]`, `[train]`,
//! `[eval]`, `[synth]`, `[verify]`, `[gradcheck]`). Every section is optional and falls back to the
//! defaults; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{parse_quadruples, RawSplits, Split, TimestampOrdering, TkgDataset};
use crate::error::{Error, Result};
use crate::eval::EvalMode;
use crate::gradsuite::GradSuiteConfig;
use crate::model::ModelConfig;
use crate::synth::SynthConfig;
use crate::temporal::verify::VerifyConfig;
use crate::train::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train: Option<PathBuf>,
    pub observed: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

impl DataPaths {
    fn get(&self, split: Split) -> Option<&PathBuf> {
        match split {
            Split::Train => self.train.as_ref(),
            Split::Observed => self.observed.as_ref(),
            Split::Valid => self.valid.as_ref(),
            Split::Test => self.test.as_ref(),
        }
    }
}

fn d_separator() -> String {
    "tab".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub paths: DataPaths,
    /// A single character, or `tab` / `space` / `comma`.
    #[serde(default = "d_separator")]
    pub separator: String,
    #[serde(default)]
    pub timestamp_ordering: TimestampOrdering,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            paths: DataPaths::default(),
            separator: d_separator(),
            timestamp_ordering: TimestampOrdering::default(),
        }
    }
}

impl DataConfig {
    pub fn separator_char(&self) -> Result<char> {
        match self.separator.as_str() {
            "tab" => Ok('\t'),
            "space" => Ok(' '),
            "comma" => Ok(','),
            s => {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(Error::Config(format!("bad separator {s:?}"))),
                }
            }
        }
    }

    /// Parse the configured split files into a dataset. Absent splits are
    /// empty.
    pub fn ingest(&self) -> Result<TkgDataset> {
        let sep = self.separator_char()?;
        let mut raw = RawSplits::default();
        let mut any = false;
        for split in Split::ALL {
            if let Some(path) = self.paths.get(split) {
                let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
                let reader = std::io::BufReader::new(file);
                *raw.get_mut(split) = parse_quadruples(reader, sep).map_err(|e| match e {
                    Error::MalformedLine { line, .. } => Error::format(path, format!("malformed line {line}")),
                    other => other,
                })?;
                any = true;
            }
        }
        if !any {
            return Err(Error::Config("data.paths names no split file".into()));
        }
        TkgDataset::build(&raw, self.timestamp_ordering)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalModeName {
    #[default]
    Standard,
    SingleStep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetKind {
    Symmetric,
    Inverse,
}

fn d_split() -> String {
    "test".into()
}

fn d_min_confidence() -> f64 {
    0.9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default)]
    pub mode: EvalModeName,
    /// single_step only: include same-timestamp facts in the context.
    #[serde(default)]
    pub inclusive: bool,
    #[serde(default = "d_split")]
    pub split: String,
    #[serde(default)]
    pub subsets: Vec<SubsetKind>,
    #[serde(default = "d_min_confidence")]
    pub min_confidence: f64,
    /// Also write a per-query rank CSV.
    #[serde(default = "yes")]
    pub write_ranks: bool,
}

fn yes() -> bool {
    true
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mode: EvalModeName::Standard,
            inclusive: false,
            split: d_split(),
            subsets: Vec::new(),
            min_confidence: d_min_confidence(),
            write_ranks: true,
        }
    }
}

impl EvalConfig {
    pub fn mode(&self) -> EvalMode {
        match self.mode {
            EvalModeName::Standard => EvalMode::Standard,
            EvalModeName::SingleStep => EvalMode::SingleStep {
                inclusive: self.inclusive,
            },
        }
    }

    pub fn split(&self) -> Result<Split> {
        self.split.parse()
    }

    pub fn validate(&self) -> Result<()> {
        self.split()?;
        if !(self.min_confidence > 0.0 && self.min_confidence <= 1.0) {
            return Err(Error::Config("eval.min_confidence must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Source and target generator settings for `synth`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthPair {
    pub a: SynthConfig,
    pub b: SynthConfig,
}

impl Default for SynthPair {
    fn default() -> Self {
        Self {
            a: SynthConfig {
                entities: 50,
                relations: 8,
                timestamps: 40,
                rule_instances: 150,
                noise_facts: 100,
                delta: 1,
                test_fraction: 0.2,
                label_prefix: "a/".into(),
                time_offset: 1000,
            },
            b: SynthConfig {
                entities: 60,
                relations: 8,
                timestamps: 55,
                rule_instances: 175,
                noise_facts: 120,
                // Same-time composition on the target; both rule spans fit
                // the default k = 1 window.
                delta: 0,
                test_fraction: 0.2,
                label_prefix: "b/".into(),
                time_offset: 5000,
            },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub synth: SynthPair,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub gradcheck: GradSuiteConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    /// Read a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut c.data.paths.train,
            &mut c.data.paths.observed,
            &mut c.data.paths.valid,
            &mut c.data.paths.test,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.data.separator_char()?;
        self.model.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        self.synth.a.validate()?;
        self.synth.b.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
