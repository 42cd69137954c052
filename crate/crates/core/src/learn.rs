//! The learning phase end to end: corpora, skip-gram embeddings, the
//! recursive autoencoder, fragment similarity tables and identifier clusters.

use petit::Program;

use crate::codesim::{build_table, SimilarityTable};
use crate::corpus::{extract_corpora, Corpora};
use crate::embed::{train_skipgram, Dictionary, SkipGramConfig};
use crate::lexclust::{cluster_identifiers, ClusterMap};
use crate::rae::{train_rae, EncoderParams, RaeConfig};
use crate::repair::Learned;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub skipgram: SkipGramConfig,
    pub rae: RaeConfig,
    /// Seed for k-means and annealing.
    pub cluster_seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            skipgram: SkipGramConfig::default(),
            rae: RaeConfig::default(),
            cluster_seed: 1,
        }
    }
}

impl LearnConfig {
    /// Same seed everywhere, embedding size `dim`.
    pub fn with(dim: usize, seed: u64) -> LearnConfig {
        let mut c = LearnConfig::default();
        c.skipgram.dim = dim;
        c.skipgram.seed = seed;
        c.rae.seed = seed;
        c.cluster_seed = seed;
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    /// Normalized corpora.
    pub corpora: Corpora,
    /// Skip-gram output, the autoencoder's starting embeddings.
    pub dictionary: Dictionary,
    pub encoder: EncoderParams,
    pub types: SimilarityTable,
    pub execs: SimilarityTable,
    pub clusters: ClusterMap,
}

impl Artifacts {
    /// What the repair loop needs. Identifier distances come from the
    /// autoencoder's fine-tuned embeddings, the same space the clusters
    /// were built in.
    pub fn learned(&self) -> Learned {
        Learned {
            exec_table: self.execs.clone(),
            type_table: self.types.clone(),
            clusters: self.clusters.clone(),
            dict: self.encoder.to_dictionary(),
        }
    }
}

/// Train everything on the file-level corpus of `program` and encode its
/// types and executables.
pub fn learn(program: &Program, config: &LearnConfig) -> Result<Artifacts> {
    let corpora = extract_corpora(program).normalized();
    learn_from_corpora(corpora, config)
}

pub fn learn_from_corpora(corpora: Corpora, config: &LearnConfig) -> Result<Artifacts> {
    if corpora.files.entries.iter().all(|e| e.tokens.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    let dictionary = train_skipgram(&corpora.files, &config.skipgram)?;
    let encoder = train_rae(&corpora.files, &dictionary, &config.rae)?.params;
    let types = build_table(&corpora.types, &encoder)?;
    let execs = build_table(&corpora.execs, &encoder)?;
    let clusters = cluster_identifiers(&encoder.to_dictionary(), config.cluster_seed)?;
    Ok(Artifacts {
        corpora,
        dictionary,
        encoder,
        types,
        execs,
        clusters,
    })
}
