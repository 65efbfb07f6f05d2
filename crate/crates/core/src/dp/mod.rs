//! Exact dynamic programming on tabular MDPs.

pub mod checks;
pub mod gradient;
pub mod lambda;
pub mod loss;
pub mod policies;
pub mod tables;
pub mod values;

pub use checks::{check_lambda_pdl, check_noneven_pdl, check_pdl, is_improvable, lambda_advantage_geometric};
pub use gradient::{exact_gradient, exact_policy_gradient, loss_finite_difference, max_relative_error};
pub use lambda::{i_step_advantage, lambda_advantage_exact};
pub use loss::{online_loss_exact, reduction_diagnostics, ReductionDiagnostics};
pub use policies::{best_oracle_index, gpi_policy, max_aggregation_policy, max_following_policy, optimal_policy};
pub use tables::{AdvantageTable, StateDistributionTable, TabularPolicy, ValueTable};
pub use values::{
    advantage_wrt_f, fmax_baseline, optimal_value, policy_q_values, policy_return, policy_value, q_from_baseline,
    state_distributions,
};
