//! Pipeline parameters shared by every entry point.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{Criterion, TrainOptions};
use crate::error::{Error, Result};
use crate::store::DEFAULT_SAMPLING;
use crate::text::{SectionWeights, StopList, TextPipeline};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub title_w: f64,
    pub abstract_w: f64,
    pub body_w: f64,
    pub keyword_w: f64,
    /// Minimum document frequency of an n-gram phrase.
    pub min_df: usize,
    /// Longest phrase length (2 or 3).
    pub max_n: usize,
    /// Terms in more than this fraction of documents are dropped.
    pub theta: f64,
    /// Stop-word file; the bundled English list when unset.
    pub stoplist: Option<PathBuf>,
    pub sim_threshold: f64,
    pub topk: Option<usize>,
    pub match_threshold: f64,
    pub cap: usize,
    pub n: usize,
    pub folds: usize,
    pub criterion: Criterion,
    pub seed: u64,
    /// Length of the auxiliary top-N lists.
    pub top_n: usize,
    /// Sparse-index sampling interval for sorted containers.
    pub index_interval: usize,
    /// Write auxiliary term statistics next to tfidf output.
    pub aux_dir: Option<PathBuf>,
}

impl Default for Params {
    fn default() -> Self {
        let w = SectionWeights::default();
        Params {
            title_w: w.title_w,
            abstract_w: w.abstract_w,
            body_w: w.body_w,
            keyword_w: w.keyword_w,
            min_df: 5,
            max_n: 3,
            theta: 0.5,
            stoplist: None,
            sim_threshold: 0.0,
            topk: None,
            match_threshold: 0.5,
            cap: 100,
            n: 10,
            folds: 5,
            criterion: Criterion::F1,
            seed: 0,
            top_n: 10,
            index_interval: DEFAULT_SAMPLING,
            aux_dir: None,
        }
    }
}

impl Params {
    pub fn from_json(v: serde_json::Value) -> Result<Self> {
        serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(v)
    }

    /// Overlay the keys of `overrides` on top of these parameters.
    pub fn merged(&self, overrides: &serde_json::Map<String, serde_json::Value>) -> Result<Self> {
        let mut base = serde_json::to_value(self)?;
        let obj = base.as_object_mut().expect("Params serializes to an object");
        for (k, v) in overrides {
            obj.insert(k.clone(), v.clone());
        }
        Self::from_json(base)
    }

    pub fn section_weights(&self) -> SectionWeights {
        SectionWeights {
            title_w: self.title_w,
            abstract_w: self.abstract_w,
            body_w: self.body_w,
            keyword_w: self.keyword_w,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            n: self.n,
            folds: self.folds,
            criterion: self.criterion,
            seed: self.seed,
        }
    }

    pub fn text_pipeline(&self) -> Result<TextPipeline> {
        let stoplist = match &self.stoplist {
            Some(p) => StopList::load(p)?,
            None => StopList::english(),
        };
        Ok(TextPipeline {
            weights: self.section_weights(),
            stoplist,
            min_df: self.min_df,
            max_n: self.max_n,
            theta: self.theta,
        })
    }
}
