//! Letter-layout enumeration and scoring, cluster fitting, and selection.

pub mod cluster;
pub mod disambiguation;
pub mod enumerate;
pub mod gmm;
pub mod scoring;
pub mod sweep;

pub use cluster::{cluster_layout_from_gmm, fit_cluster_layouts, ClusterCandidate, ClusterFile};
pub use disambiguation::{disambiguation_score, DisambiguationScore, DisambiguationScorer};
pub use enumerate::{layout_count, layout_count_range, LayoutEnumerator};
pub use gmm::{fit_gmm_1d, GmmComponent, GmmModel, GmmParams};
pub use scoring::{
    joint_and_final_scores, select_keyboard, spatial_match_score, ScoreRecord, ScoreTable, Selection,
    SelectionPolicy,
};
pub use sweep::{run_sweep, top_layout_candidates, CandidateSet, LayoutCandidate, SweepConfig, SweepControl};
