//! Label repair, convergence diagnostics and posterior summaries.

mod diagnostics;
mod relabel;
mod summary;

pub use diagnostics::{
    convergence_columns, convergence_report, multivariate_psrf, psrf, ConvergenceReport, CONVERGENCE_THRESHOLD,
};
pub use relabel::{
    best_permutation, order_changepoint_labels, order_state_changepoints, permutations, permute_classes,
    relabel_classes_ecr,
};
pub use summary::{
    dic, percentile_sorted, plug_in_state, summarize, ClassSummary, Dic, Estimate, ParamSummary, PosteriorSummary,
    SubjectSummary,
};

use crate::sampler::ChainDraws;

/// Order changepoints within every chain, then relabel classes jointly.
pub fn postprocess_chains(chains: &[ChainDraws]) -> Vec<ChainDraws> {
    let ordered: Vec<ChainDraws> = chains.iter().map(order_changepoint_labels).collect();
    relabel_classes_ecr(&ordered)
}
