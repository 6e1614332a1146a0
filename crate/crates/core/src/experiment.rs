//! End-to-end desk experiment on a synthetic collection: entity-enabled
//! versus plain re-ranking over the same BM25 candidates.

use crate::alignment::{self, AlignedEntities, AlignmentMatrix, TokenTable};
use crate::embeddings::{self, EmbeddingConfig, JointEmbeddingTable};
use crate::encoder::{EncoderConfig, EncoderWeights, TrainOptions};
use crate::error::Result;
use crate::eval::{self, CategoryReport, EvalReport};
use crate::pipeline::{self, Featurizer, FineTuned, FoldLogEntry, Run, StagePlan};
use crate::retrieval::InvertedIndex;
use crate::synth::{self, SynthConfig, SynthData};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    pub embedding: EmbeddingConfig,
    /// `vocab_size` is replaced by the generated vocabulary's piece count.
    pub encoder: EncoderConfig,
    pub stage1: TrainOptions,
    pub stage2: TrainOptions,
    pub batch_size: usize,
    pub first_stage_depth: usize,
    pub rerank_depth: usize,
    /// Seed whole-word token rows from the joint word vectors before the
    /// alignment fit.
    pub warm_start: bool,
}

impl ExperimentConfig {
    /// Small enough to train both modes in well under a minute.
    pub fn desk(seed: u64) -> Self {
        ExperimentConfig {
            synth: SynthConfig {
                seed,
                ..Default::default()
            },
            embedding: EmbeddingConfig {
                dim: 16,
                epochs: 10,
                seed,
                ..Default::default()
            },
            encoder: EncoderConfig {
                d_model: 32,
                n_layers: 2,
                n_heads: 4,
                d_ff: 64,
                max_positions: 128,
                vocab_size: 0,
                dropout: 0.0,
                seed,
            },
            stage1: TrainOptions {
                learning_rate: 0.05,
                epochs: 3,
                warmup_steps: 10,
                seed,
            },
            stage2: TrainOptions {
                learning_rate: 0.05,
                epochs: 3,
                warmup_steps: 0,
                seed,
            },
            batch_size: 8,
            first_stage_depth: 100,
            rerank_depth: 20,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModeOutcome {
    pub models: FineTuned,
    pub run: Run,
    pub report: EvalReport,
    pub log: Vec<FoldLogEntry>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub data: SynthData,
    pub table: JointEmbeddingTable,
    pub alignment: AlignmentMatrix,
    pub aligned: AlignedEntities,
    pub first_stage: Run,
    pub first_stage_report: EvalReport,
    pub entity: ModeOutcome,
    pub plain: ModeOutcome,
    /// Entity-enabled run as `a`, plain run as `b`, at NDCG@10.
    pub categories: CategoryReport,
}

pub const CUTOFFS: [usize; 2] = [10, 100];

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let data = synth::generate(&cfg.synth)?;
    let (table, _) =
        embeddings::train_joint_embeddings(data.embedding_corpus(), &data.graph, &cfg.embedding)?;

    let enc_cfg = EncoderConfig {
        vocab_size: data.vocab.num_pieces(),
        ..cfg.encoder.clone()
    };
    let mut init = EncoderWeights::init(&enc_cfg)?;
    if cfg.warm_start {
        alignment::warm_start_tokens(
            &mut init.token_embeddings,
            enc_cfg.d_model,
            &data.vocab,
            &table,
            enc_cfg.seed,
        );
    }
    let tokens = TokenTable {
        vocab: &data.vocab,
        rows: &init.token_embeddings,
        dim: enc_cfg.d_model,
    };
    let w = alignment::fit_alignment(&table, &tokens, None)?;
    let aligned = AlignedEntities::new(&data.vocab, &table, &w);

    let index = InvertedIndex::from_documents(data.collection.docs())?;
    let first_stage =
        pipeline::first_stage_run(&index, &data.collection, cfg.first_stage_depth, "bm25")?;
    let qrels = data.collection.qrel_map();
    let first_stage_report = eval::evaluate_run(&first_stage, &qrels, &CUTOFFS);

    let plan = StagePlan {
        triples: data.triples.clone(),
        folds: data.collection.folds().to_vec(),
        stage1: cfg.stage1,
        stage2: cfg.stage2,
        batch_size: cfg.batch_size,
        seed: cfg.synth.seed,
    };
    let run_mode = |featurizer: Featurizer<'_>, tag: &str| -> Result<ModeOutcome> {
        let models = pipeline::two_stage_finetune(
            &init,
            &plan,
            &data.general,
            &data.collection,
            &featurizer,
        )?;
        let (run, log) = pipeline::rerank_folds(
            &first_stage,
            &plan.folds,
            &models.folds,
            &featurizer,
            &data.collection,
            cfg.rerank_depth,
            tag,
        )?;
        pipeline::check_fold_isolation(&log)?;
        let report = eval::evaluate_run(&run, &qrels, &CUTOFFS);
        Ok(ModeOutcome {
            models,
            run,
            report,
            log,
        })
    };
    let entity = run_mode(Featurizer::with_entities(&data.vocab, &aligned), "em-bert")?;
    let plain = run_mode(Featurizer::plain(&data.vocab), "mono-bert")?;
    let categories = eval::category_report(
        &entity.run,
        &plain.run,
        &data.collection,
        &data.vocab,
        &qrels,
        10,
    );
    Ok(ExperimentOutcome {
        data,
        table,
        alignment: w,
        aligned,
        first_stage,
        first_stage_report,
        entity,
        plain,
        categories,
    })
}

/// Mean NDCG@10 of (entity, plain) runs over queries whose category has
/// split mentions.
pub fn split_mention_means(out: &ExperimentOutcome) -> (f64, f64) {
    let cats = eval::query_categories(&out.data.collection, &out.data.vocab);
    let split: Vec<&String> = cats
        .iter()
        .filter(|(_, c)| c.is_split())
        .map(|(q, _)| q)
        .collect();
    let mean = |r: &EvalReport| {
        split
            .iter()
            .map(|q| r.value(q, 10).unwrap_or(0.0))
            .sum::<f64>()
            / split.len().max(1) as f64
    };
    (mean(&out.entity.report), mean(&out.plain.report))
}
