//! Experiment sweeps, corpora and checkpoints.

pub mod checkpoint;
pub mod corpus;
pub mod experiment;
pub mod plot;

pub use checkpoint::{config_hash, Checkpoint};
pub use corpus::{
    compute_corpus_stats, corpus_stats, detect_spam, detect_spam_record, ingest_external_corpus, read_game_log,
    write_game_log, write_game_log_file, CorpusFormat, CorpusStats, ExternalGame, StatRecord,
};
pub use experiment::{
    eval_metrics, run_experiment, seed_mean, within_binomial_band, EvalMetrics, ExperimentConfig, ResultRow,
    ResultTable, RlSettings, StrategyKind,
};
pub use plot::{aggregate, emit_plot_data, PlotRow, METRICS};
