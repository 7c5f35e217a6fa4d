use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::io::{read_json, read_jsonl, write_json, write_jsonl};
use crate::candidates::{
    build_name_index, candidate_stats, read_candidates, retrieve_all, write_candidates, CandidateSets,
    CandidateStats,
};
use crate::citegraph::{build_graph, read_tuples, sample_tuples, write_tuples, ContrastiveTuple};
use crate::corpus::{build_vocabulary, load_corpus, load_labels, Corpus, CorpusStats, LabelSpace};
use crate::encoder::{train, EmbeddingOverrides, ScorerModel};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricsReport};
use crate::ranker::{read_scores, score_corpus, write_scores, ScoredCorpus};
use crate::selftrain::{
    final_ranking, fit_classifier, l2_normalize, pseudo_labels, tfidf_vector, LabelTreeClassifier,
};
use crate::encoder::SparseVec;

pub const INGEST_REPORT: &str = "ingest.json";
pub const CANDIDATES: &str = "candidates.jsonl";
pub const TUPLES: &str = "tuples.jsonl";
pub const MODEL: &str = "model.json";
pub const LOSSES: &str = "losses.json";
pub const SCORES: &str = "scores.jsonl";
pub const CALLS: &str = "calls.json";
pub const CLASSIFIER: &str = "classifier.json";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const METRICS: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Ingest,
    Candidates,
    SampleTuples,
    TrainEncoder,
    Score,
    SelfTrain,
    Predict,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Candidates,
        Stage::SampleTuples,
        Stage::TrainEncoder,
        Stage::Score,
        Stage::SelfTrain,
        Stage::Predict,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Candidates => "candidates",
            Stage::SampleTuples => "sample-tuples",
            Stage::TrainEncoder => "train-encoder",
            Stage::Score => "score",
            Stage::SelfTrain => "self-train",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|stage| stage.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage `{s}`")))
    }
}

/// Corpus, labels and optional external embeddings.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub corpus: Corpus,
    pub labels: LabelSpace,
    pub overrides: EmbeddingOverrides,
}

pub fn load_inputs(config: &PipelineConfig) -> Result<Inputs> {
    let corpus = load_corpus(&config.paths.corpus, config.min_paragraph_words)?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let labels = load_labels(&config.paths.labels)?;
    let overrides = match &config.paths.embeddings {
        Some(path) => EmbeddingOverrides::load(path)?,
        None => EmbeddingOverrides::default(),
    };
    Ok(Inputs {
        corpus,
        labels,
        overrides,
    })
}

/// Model invocation counts of the scoring stage next to the counts the
/// candidate sets and corpus predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallReport {
    pub cross_scores: u64,
    pub bi_embeds: u64,
    /// Sum of candidate set sizes.
    pub expected_cross_scores: u64,
    /// Paragraph count plus empty-paper fallbacks (or one title+abstract
    /// embedding per paper without hierarchy), plus the label count.
    pub expected_bi_embeds: u64,
}

pub fn expected_calls(corpus: &Corpus, labels: &LabelSpace, candidates: &CandidateSets, hierarchy: bool) -> (u64, u64) {
    let cross = candidates.sets.iter().map(|s| s.len() as u64).sum();
    let papers: u64 = if hierarchy {
        corpus
            .papers
            .iter()
            .map(|p| if p.is_empty() { 1 } else { p.paragraph_count() as u64 })
            .sum()
    } else {
        corpus.len() as u64
    };
    (cross, papers + labels.len() as u64)
}

pub fn run_candidates(config: &PipelineConfig, inputs: &Inputs) -> CandidateSets {
    let index = build_name_index(&inputs.labels);
    retrieve_all(&inputs.corpus, &index, config.candidates)
}

pub fn run_sample_tuples(config: &PipelineConfig, corpus: &Corpus) -> Result<Vec<ContrastiveTuple>> {
    let graph = build_graph(corpus);
    sample_tuples(
        &graph,
        corpus,
        &config.tuples.meta_path,
        config.tuples.count,
        config.seed_for(Stage::SampleTuples.name()),
    )
}

pub fn initial_model(config: &PipelineConfig) -> ScorerModel {
    let mut training = config.encoder.training;
    training.seed = config.seed_for("train-order");
    ScorerModel::new(
        config.encoder.featurizer(),
        config.encoder.embed_dim,
        training,
        config.seed_for("encoder-init"),
    )
}

pub fn run_train_encoder(
    config: &PipelineConfig,
    corpus: &Corpus,
    tuples: &[ContrastiveTuple],
) -> Result<(ScorerModel, Vec<f64>)> {
    let outcome = train(initial_model(config), tuples, corpus)?;
    Ok((outcome.model, outcome.losses))
}

pub fn run_score(
    config: &PipelineConfig,
    model: &ScorerModel,
    inputs: &Inputs,
    candidates: &CandidateSets,
) -> Result<(ScoredCorpus, CallReport)> {
    model.counts().reset();
    let scored = score_corpus(
        model,
        &inputs.corpus,
        &inputs.labels,
        candidates,
        &inputs.overrides,
        config.ranker,
    )?;
    let (expected_cross_scores, expected_bi_embeds) =
        expected_calls(&inputs.corpus, &inputs.labels, candidates, config.ranker.hierarchy);
    let report = CallReport {
        cross_scores: model.counts().cross_scores(),
        bi_embeds: model.counts().bi_embeds(),
        expected_cross_scores,
        expected_bi_embeds,
    };
    Ok((scored, report))
}

/// L2-normalized full-text tf-idf rows and their dimension.
pub fn tfidf_features(config: &PipelineConfig, corpus: &Corpus) -> Result<(Vec<SparseVec>, usize)> {
    let vocab = build_vocabulary(corpus, config.self_train.params.min_df)?;
    let rows = corpus
        .papers
        .par_iter()
        .map(|p| l2_normalize(tfidf_vector(p, &vocab)))
        .collect();
    Ok((rows, vocab.len()))
}

pub fn run_self_train(
    config: &PipelineConfig,
    corpus: &Corpus,
    labels: &LabelSpace,
    scored: &ScoredCorpus,
) -> Result<LabelTreeClassifier> {
    let (features, dim) = tfidf_features(config, corpus)?;
    let targets = pseudo_labels(scored, config.self_train.params.n_pseudo);
    let mut params = config.self_train.params;
    params.seed = config.seed_for(Stage::SelfTrain.name());
    fit_classifier(&features, &targets, labels.len(), dim, &params)
}

/// A full ranking over the label space with one score per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub ranking: Vec<usize>,
    pub scores: Vec<f64>,
}

/// With a classifier: fused top labels pinned, the rest by probability,
/// scores are probabilities. Without: candidates in fused order, then the
/// remaining labels by index, scores are the fused values (0 outside the
/// candidates).
pub fn run_predict(
    config: &PipelineConfig,
    corpus: &Corpus,
    labels: &LabelSpace,
    scored: &ScoredCorpus,
    classifier: Option<&LabelTreeClassifier>,
) -> Result<Vec<Prediction>> {
    let n = config.self_train.params.n_pseudo;
    match classifier {
        Some(clf) => {
            let (features, dim) = tfidf_features(config, corpus)?;
            if dim != clf.dim || labels.len() != clf.num_labels {
                return Err(Error::Checkpoint("classifier does not match corpus or labels".into()));
            }
            Ok(features
                .par_iter()
                .zip(&scored.papers)
                .map(|(x, scores)| {
                    let probs = clf.predict_proba(x, clf.beam);
                    let ranking = final_ranking(scores, &probs, n);
                    let scores = ranking.iter().map(|&l| probs[l]).collect();
                    Prediction { ranking, scores }
                })
                .collect())
        }
        None => Ok(scored
            .papers
            .iter()
            .map(|scores| {
                let mut fused = vec![0.0; labels.len()];
                let mut ranking: Vec<usize> = scores.iter().map(|s| s.label).collect();
                for s in scores {
                    fused[s.label] = s.mrr;
                }
                let mut seen = vec![false; labels.len()];
                ranking.iter().for_each(|&l| seen[l] = true);
                ranking.extend((0..labels.len()).filter(|&l| !seen[l]));
                let scores = ranking.iter().map(|&l| fused[l]).collect();
                Prediction { ranking, scores }
            })
            .collect()),
    }
}

/// Gold label indices per paper, or `None` when no paper carries any.
pub fn gold_sets(corpus: &Corpus, labels: &LabelSpace) -> Result<Option<Vec<Vec<usize>>>> {
    if corpus.papers.iter().all(|p| p.gold_labels.is_none()) {
        return Ok(None);
    }
    corpus
        .papers
        .iter()
        .map(|p| {
            p.gold_labels
                .iter()
                .flatten()
                .map(|id| labels.position(id).ok_or_else(|| Error::UnknownLabel(id.clone())))
                .collect()
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

pub fn run_evaluate(
    config: &PipelineConfig,
    corpus: &Corpus,
    labels: &LabelSpace,
    rankings: &[Vec<usize>],
    candidates: &CandidateSets,
) -> Result<Option<MetricsReport>> {
    let Some(gold) = gold_sets(corpus, labels)? else {
        log::warn!("corpus has no gold labels; skipping evaluation");
        return Ok(None);
    };
    let lambda = candidate_stats(candidates).lambda;
    evaluate(rankings, &gold, labels.len(), lambda, &config.metrics).map(Some)
}

/// Everything an in-process run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub candidates: CandidateSets,
    pub tuples: Vec<ContrastiveTuple>,
    pub model: ScorerModel,
    pub losses: Vec<f64>,
    pub scored: ScoredCorpus,
    pub calls: CallReport,
    pub classifier: Option<LabelTreeClassifier>,
    pub predictions: Vec<Prediction>,
    pub metrics: Option<MetricsReport>,
}

/// Runs every stage in memory on already loaded inputs.
pub fn run_pipeline(config: &PipelineConfig, inputs: &Inputs) -> Result<PipelineOutput> {
    config.validate()?;
    let candidates = run_candidates(config, inputs);
    let tuples = run_sample_tuples(config, &inputs.corpus).map_err(|e| e.in_stage(Stage::SampleTuples.name()))?;
    let (model, losses) =
        run_train_encoder(config, &inputs.corpus, &tuples).map_err(|e| e.in_stage(Stage::TrainEncoder.name()))?;
    let (scored, calls) =
        run_score(config, &model, inputs, &candidates).map_err(|e| e.in_stage(Stage::Score.name()))?;
    let classifier = if config.self_train.enabled {
        Some(
            run_self_train(config, &inputs.corpus, &inputs.labels, &scored)
                .map_err(|e| e.in_stage(Stage::SelfTrain.name()))?,
        )
    } else {
        None
    };
    let predictions = run_predict(config, &inputs.corpus, &inputs.labels, &scored, classifier.as_ref())
        .map_err(|e| e.in_stage(Stage::Predict.name()))?;
    let rankings: Vec<Vec<usize>> = predictions.iter().map(|p| p.ranking.clone()).collect();
    let metrics = run_evaluate(config, &inputs.corpus, &inputs.labels, &rankings, &candidates)
        .map_err(|e| e.in_stage(Stage::Evaluate.name()))?;
    Ok(PipelineOutput {
        candidates,
        tuples,
        model,
        losses,
        scored,
        calls,
        classifier,
        predictions,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub corpus: CorpusStats,
    pub labels: usize,
    pub citation_edges: usize,
    pub dangling_refs: usize,
    pub self_loops: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub paper_id: String,
    pub ranking: Vec<String>,
    pub top_k_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    #[serde(flatten)]
    pub report: MetricsReport,
    pub candidates: CandidateStats,
}

/// What a stage produced, for the caller to display.
#[derive(Debug, Clone, PartialEq)]
pub enum StageOutcome {
    Done,
    Metrics(Option<MetricsFile>),
}

pub fn write_predictions(
    config: &PipelineConfig,
    corpus: &Corpus,
    labels: &LabelSpace,
    predictions: &[Prediction],
) -> Result<()> {
    let k = config.predict.top_k;
    let records = corpus.papers.iter().zip(predictions).map(|(paper, pred)| PredictionRecord {
        paper_id: paper.id.clone(),
        ranking: pred.ranking.iter().take(k).map(|&l| labels.get(l).id.clone()).collect(),
        top_k_scores: pred.scores.iter().take(k).copied().collect(),
    });
    write_jsonl(&config.artifact(PREDICTIONS), records)
}

/// Rankings from a predictions file, aligned with `corpus`.
pub fn read_predictions(path: &std::path::Path, corpus: &Corpus, labels: &LabelSpace) -> Result<Vec<Vec<usize>>> {
    let records: Vec<PredictionRecord> = read_jsonl(path)?;
    let mut rankings = vec![None; corpus.len()];
    for r in records {
        let pos = corpus
            .position(&r.paper_id)
            .ok_or_else(|| Error::UnknownPaper(r.paper_id.clone()))?;
        let ranking = r
            .ranking
            .iter()
            .map(|id| labels.position(id).ok_or_else(|| Error::UnknownLabel(id.clone())))
            .collect::<Result<Vec<_>>>()?;
        rankings[pos] = Some(ranking);
    }
    rankings
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| Error::Checkpoint(format!("no prediction for paper `{}`", corpus.papers[i].id))))
        .collect()
}

fn stage_body(stage: Stage, config: &PipelineConfig) -> Result<StageOutcome> {
    let dir = &config.paths.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let inputs = load_inputs(config)?;
    let Inputs { corpus, labels, .. } = &inputs;
    match stage {
        Stage::Ingest => {
            let graph = build_graph(corpus);
            let report = IngestReport {
                corpus: corpus.stats(),
                labels: labels.len(),
                citation_edges: graph.edge_count(),
                dangling_refs: graph.dangling_refs,
                self_loops: graph.self_loops,
            };
            write_json(&config.artifact(INGEST_REPORT), &report)?;
        }
        Stage::Candidates => {
            let candidates = run_candidates(config, &inputs);
            write_candidates(config.artifact(CANDIDATES), corpus, labels, &candidates)?;
        }
        Stage::SampleTuples => {
            let tuples = run_sample_tuples(config, corpus)?;
            write_tuples(config.artifact(TUPLES), &tuples)?;
        }
        Stage::TrainEncoder => {
            let tuples = read_tuples(config.artifact(TUPLES))?;
            let (model, losses) = run_train_encoder(config, corpus, &tuples)?;
            model.save(config.artifact(MODEL))?;
            write_json(&config.artifact(LOSSES), &losses)?;
        }
        Stage::Score => {
            let model = ScorerModel::load(config.artifact(MODEL))?;
            let candidates = read_candidates(config.artifact(CANDIDATES), corpus, labels)?;
            let (scored, calls) = run_score(config, &model, &inputs, &candidates)?;
            write_scores(config.artifact(SCORES), corpus, labels, &scored)?;
            write_json(&config.artifact(CALLS), &calls)?;
        }
        Stage::SelfTrain => {
            if config.self_train.enabled {
                let scored = read_scores(config.artifact(SCORES), corpus, labels)?;
                run_self_train(config, corpus, labels, &scored)?.save(config.artifact(CLASSIFIER))?;
            } else {
                log::info!("self-training disabled");
            }
        }
        Stage::Predict => {
            let scored = read_scores(config.artifact(SCORES), corpus, labels)?;
            let classifier = if config.self_train.enabled {
                Some(LabelTreeClassifier::load(config.artifact(CLASSIFIER))?)
            } else {
                None
            };
            let predictions = run_predict(config, corpus, labels, &scored, classifier.as_ref())?;
            write_predictions(config, corpus, labels, &predictions)?;
        }
        Stage::Evaluate => {
            let rankings = read_predictions(&config.artifact(PREDICTIONS), corpus, labels)?;
            let candidates = read_candidates(config.artifact(CANDIDATES), corpus, labels)?;
            let report = run_evaluate(config, corpus, labels, &rankings, &candidates)?;
            let file = report.map(|report| MetricsFile {
                report,
                candidates: candidate_stats(&candidates),
            });
            if let Some(f) = &file {
                write_json(&config.artifact(METRICS), f)?;
                let csv = format!("{}\n{}\n", f.report.csv_header(), f.report.csv_row());
                let path = config.artifact(METRICS_CSV);
                std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
            }
            return Ok(StageOutcome::Metrics(file));
        }
    }
    Ok(StageOutcome::Done)
}

/// Runs one stage against the artifacts in the output directory. Errors
/// carry the stage name; artifacts of earlier stages are left in place.
pub fn run_stage(stage: Stage, config: &PipelineConfig) -> Result<StageOutcome> {
    config.validate()?;
    log::info!("stage {stage}");
    stage_body(stage, config).map_err(|e| e.in_stage(stage.name()))
}

/// Every stage in order through the on-disk artifacts; returns the
/// evaluation outcome.
pub fn run_all(config: &PipelineConfig) -> Result<StageOutcome> {
    let mut last = StageOutcome::Done;
    for stage in Stage::ALL {
        last = run_stage(stage, config)?;
    }
    Ok(last)
}

/// Reads a metrics file written by the evaluate stage.
pub fn read_metrics(config: &PipelineConfig) -> Result<MetricsFile> {
    read_json(&config.artifact(METRICS))
}
