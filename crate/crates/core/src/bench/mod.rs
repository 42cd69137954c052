//! Bug seeding, strategy-comparison campaigns and their statistics.

mod campaign;
mod seed;
pub mod stats;

pub use campaign::{run_campaign, Bug, CampaignConfig, CampaignResult, Run};
pub use seed::{seed_bugs, MutationKind, SeededBug, PROPOSALS_PER_BUG};
pub use stats::{bonferroni, mann_whitney_u, wilcoxon_signed_rank, MannWhitney, Wilcoxon};
