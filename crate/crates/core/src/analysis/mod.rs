//! Post-processing of finished runs.

pub mod anova;
pub mod community;
pub mod metrics;
pub mod untraceability;

pub use anova::{
    anova_one_way, f_cdf, f_survival, regularized_incomplete_beta, AnovaError, AnovaResult,
};
pub use community::{
    collinearity_residual, detect_communities, detect_communities_within, Community, CommunityError,
};
pub use metrics::{
    percentage_sensing_area, rand_index, spearman, swarm_specific_area, synergy_time,
};
pub use untraceability::{
    untraceability_report, untraceability_report_from, RunTrace, UntraceabilityReport,
};
