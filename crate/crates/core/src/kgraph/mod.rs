//! Knowledge-graph link prediction: linear model zoo, Adam trainer, ranking and
//! classification evaluation, and the relation-type diagnostics (symmetry, hierarchy,
//! eigenvalue profiles, translation norms).

pub mod diagnostics;
pub mod eval;
pub mod graph;
pub mod model;
pub mod train;

pub use diagnostics::{
    build_report, khs, relation_spectrum, relation_symmetry, relation_vector_norms, symmetry_score,
    validate_report_json, KgReport, KhsReport, RelationRecord, REPORT_FIELDS,
};
pub use eval::{classify_eval, rank_eval, ClassifyReport, ClassifyStats, RankOptions, RankReport, RankStats, TiePolicy};
pub use graph::{
    builtin_relation_types, load_relation_types, normalize_relation_name, parse_relation_types, split_nell,
    KnowledgeGraph, LoadReport, RelationType, Split, Triple,
};
pub use model::{KgModel, ModelKind, Scorer};
pub use train::{train_kg, train_kg_with, KgTrainConfig, TrainReport};
