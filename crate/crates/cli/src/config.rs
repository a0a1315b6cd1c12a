//! `key = value` run configuration shared by every subcommand.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use inn_core::centrality::{AblationMask, Column, Scaling};
use inn_core::corpus::{read_keyword_spec_file, Rule, SynthConfig, TokenizerOptions};
use inn_core::nn::{TrainConfig, Variant};
use inn_core::pipeline::{ExperimentConfig, Preprocessing};
use inn_core::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSettings {
    pub docs: usize,
    pub vocab: usize,
    pub rule: String,
    pub rule_param: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub min_keywords: usize,
    pub max_keywords: usize,
    pub balance: f64,
    pub tolerance: f64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            docs: 400,
            vocab: 2000,
            rule: "proximity".into(),
            rule_param: 5,
            min_len: 50,
            max_len: 500,
            min_keywords: 2,
            max_keywords: 4,
            balance: 0.5,
            tolerance: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub window: usize,
    pub scaling: Scaling,
    pub seq_len: usize,
    pub embedding_dim: usize,
    pub min_freq: usize,
    pub tokenizer: TokenizerOptions,
    pub variant: Variant,
    pub mask: AblationMask,
    pub train: TrainConfig,
    pub seed: u64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub fractions: Vec<f64>,
    pub synth: SynthSettings,
    /// Directory relative paths are resolved against.
    base: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            keywords: None,
            model: None,
            output_dir: PathBuf::from("out"),
            embeddings: None,
            window: inn_core::graph::DEFAULT_WINDOW,
            scaling: Scaling::default(),
            seq_len: inn_core::embedding::DEFAULT_SEQ_LEN,
            embedding_dim: inn_core::embedding::DEFAULT_DIM,
            min_freq: inn_core::embedding::DEFAULT_MIN_FREQ,
            tokenizer: TokenizerOptions::default(),
            variant: Variant::Inn,
            mask: AblationMask::none(),
            train: TrainConfig::default(),
            seed: 0,
            train_fraction: 0.9,
            val_fraction: 0.1,
            fractions: vec![0.01, 0.05, 0.1, 0.3, 0.5, 1.0],
            synth: SynthSettings::default(),
            base: PathBuf::from("."),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

impl RunConfig {
    /// Reads a config file. Relative paths in it, later `--set` paths and the
    /// default output directory are all taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let defaults = RunConfig::default();
        let mut cfg = RunConfig { output_dir: base.join(&defaults.output_dir), base, ..defaults };
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected key = value, got {line:?}") })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// `key=value` from the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    fn path(&self, value: &str) -> PathBuf {
        let p = PathBuf::from(value);
        if p.is_absolute() {
            p
        } else {
            self.base.join(p)
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "corpus" => self.corpus = Some(self.path(value)),
            "keywords" => self.keywords = Some(self.path(value)),
            "model" => self.model = Some(self.path(value)),
            "output_dir" => self.output_dir = self.path(value),
            "embeddings" => self.embeddings = (!value.is_empty()).then(|| self.path(value)),
            "window" => self.window = parse(key, value)?,
            "scaling" => self.scaling = value.parse()?,
            "seq_len" | "m" => self.seq_len = parse(key, value)?,
            "embedding_dim" | "n" => self.embedding_dim = parse(key, value)?,
            "min_freq" => self.min_freq = parse(key, value)?,
            "stem" => self.tokenizer.stem = parse_bool(key, value)?,
            "remove_stopwords" => self.tokenizer.remove_stopwords = parse_bool(key, value)?,
            "variant" => self.variant = value.parse()?,
            "mask" => {
                let cols: Vec<Column> = parse_list(key, value)?;
                self.mask = AblationMask::zero(cols);
            }
            "learning_rate" => self.train.learning_rate = parse(key, value)?,
            "epochs" => self.train.epochs = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "patience" => self.train.patience = parse(key, value)?,
            "threshold" => self.train.threshold = parse(key, value)?,
            "dropout_input" => self.train.dropout.input = parse(key, value)?,
            "dropout_text" => self.train.dropout.text_banks = parse_list(key, value)?,
            "dropout_knowledge" => self.train.dropout.knowledge = parse(key, value)?,
            "dropout_dense" => self.train.dropout.dense = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "val_fraction" => self.val_fraction = parse(key, value)?,
            "fractions" => self.fractions = parse_list(key, value)?,
            "synth_docs" => self.synth.docs = parse(key, value)?,
            "synth_vocab" => self.synth.vocab = parse(key, value)?,
            "synth_rule" => self.synth.rule = value.to_string(),
            "synth_rule_param" => self.synth.rule_param = parse(key, value)?,
            "synth_min_len" => self.synth.min_len = parse(key, value)?,
            "synth_max_len" => self.synth.max_len = parse(key, value)?,
            "synth_min_keywords" => self.synth.min_keywords = parse(key, value)?,
            "synth_max_keywords" => self.synth.max_keywords = parse(key, value)?,
            "synth_balance" => self.synth.balance = parse(key, value)?,
            "synth_tolerance" => self.synth.tolerance = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Numeric ranges that do not depend on the input files.
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction {} outside (0, 1)", self.train_fraction)));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!("val_fraction {} outside [0, 1)", self.val_fraction)));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(Error::Config(format!("sweep fraction {f} outside (0, 1]")));
        }
        if !self.mask.is_empty() && self.variant == Variant::TextOnly {
            return Err(Error::Config("a column mask needs a variant with the knowledge branch".into()));
        }
        let arch = inn_core::nn::Architecture::standard(self.embedding_dim, self.seq_len, 3);
        self.train.validate(&arch)
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        let path = value.as_deref().ok_or_else(|| Error::Config(format!("{key} is not set")))?;
        Ok(path)
    }

    pub fn require_existing<'a>(&self, value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        let path = self.require(value, key)?;
        if !path.exists() {
            return Err(Error::Config(format!("{key} {} does not exist", path.display())));
        }
        Ok(path)
    }

    pub fn preprocessing(&self) -> Result<Preprocessing> {
        let spec = read_keyword_spec_file(self.require_existing(&self.keywords, "keywords")?)?;
        let pre = Preprocessing {
            spec,
            window: self.window,
            scaling: self.scaling,
            seq_len: self.seq_len,
            embedding_dim: self.embedding_dim,
            min_freq: self.min_freq,
            tokenizer: self.tokenizer,
        };
        pre.validate()?;
        Ok(pre)
    }

    pub fn experiment(&self, variant: Variant, mask: AblationMask) -> ExperimentConfig {
        ExperimentConfig {
            variant,
            mask,
            train: TrainConfig { seed: self.seed, ..self.train.clone() },
            val_fraction: self.val_fraction,
            seed: self.seed,
            arch: None,
        }
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        let spec = read_keyword_spec_file(self.require_existing(&self.keywords, "keywords")?)?;
        let s = &self.synth;
        Ok(SynthConfig {
            n_docs: s.docs,
            vocab_size: s.vocab,
            keywords: spec,
            rule: Rule::parse(&s.rule, s.rule_param)?,
            seed: self.seed,
            balance: s.balance,
            balance_tolerance: s.tolerance,
            min_len: s.min_len,
            max_len: s.max_len,
            min_keywords: s.min_keywords,
            max_keywords: s.max_keywords,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let mut c = RunConfig::default();
        c.apply_text("window = 7  # wider\nvariant=IKOM\nmask = kc, bc\nfractions=0.1,1.0\n").unwrap();
        assert_eq!(c.window, 7);
        assert_eq!(c.variant, Variant::Ikom);
        assert_eq!(c.mask, AblationMask::zero([Column::Kc, Column::Bc]));
        assert_eq!(c.fractions, [0.1, 1.0]);
    }

    #[test]
    fn overrides_win() {
        let mut c = RunConfig::default();
        c.apply_text("epochs = 10\n").unwrap();
        c.apply_override("epochs=3").unwrap();
        assert_eq!(c.train.epochs, 3);
    }

    #[test]
    fn unknown_key_is_config_error() {
        let mut c = RunConfig::default();
        assert!(matches!(c.apply_text("colour = blue\n"), Err(Error::Config(_))));
        assert!(matches!(c.apply_override("epochs"), Err(Error::Config(_))));
        assert!(matches!(c.apply_text("window = wide\n"), Err(Error::Config(_))));
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut c = RunConfig { base: PathBuf::from("/data/run"), ..Default::default() };
        c.apply_text("corpus = docs.jsonl\nmodel = /abs/m.bin\n").unwrap();
        assert_eq!(c.corpus.unwrap(), PathBuf::from("/data/run/docs.jsonl"));
        assert_eq!(c.model.unwrap(), PathBuf::from("/abs/m.bin"));
    }

    #[test]
    fn ranges_checked() {
        let c = RunConfig { train_fraction: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = RunConfig { fractions: vec![0.0], ..Default::default() };
        assert!(c.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
