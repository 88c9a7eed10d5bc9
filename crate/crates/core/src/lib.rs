//! Federated gradient tree boosting over vertically partitioned data.
//!
//! One *active party* (AP) holds the labels and therefore the per-instance
//! gradients and hessians; any number of *passive parties* (PPs) hold feature
//! columns for the same instances. Trees are grown jointly without moving raw
//! features or raw gradient vectors across the party boundary. Three split
//! finding protocols are provided next to a plain centralized baseline:
//!
//! * `smm1` — the AP masks candidate aggregation through null-space
//!   projections of its gradient/hessian matrix (lossless),
//! * `smm2` — the PPs mask their splitting matrices behind quasi-secure
//!   augmentation and the AP answers through the same projection trick
//!   (lossless, stronger deniability),
//! * `ldp` — the AP releases locally differentially private gradients and
//!   the PPs score candidates with a first-order surrogate (perturbed).
//!
//! The crate is a simulator: all parties live in one process and exchange
//! typed messages through an auditable in-memory transport.

pub mod boosting;
pub mod config;
pub mod data;
pub mod error;
pub mod federation;
pub mod ldp;
pub mod linalg;
pub mod model;
pub mod secure;
pub mod split;
pub mod types;

pub use boosting::{
    compute_grad_hess, first_order_leaf_weight, optimal_leaf_weight, predict,
    split_score_first_order, split_score_second_order, Ensemble, GradHessVectors, LossFunction,
    RegressionTree, Side, SplitRef, TreeNode,
};
pub use config::RunConfig;
pub use data::{
    align_and_partition, generate_synthetic, load_csv, partition_slice, CsvSchema, DatasetSlice,
    MissingPolicy, SyntheticTask, VerticalPartitionSpec,
};
pub use error::{Error, Result};
pub use federation::{
    federated_predict, train_ensemble, Federation, Mode, ProtocolParams, TrainedModel,
};
pub use ldp::{clip, duchi_perturb, laplace_perturb, Mechanism, PrivacyBudget};
pub use linalg::{RealMatrix, RealVector};
pub use secure::{
    detect_sparsity_leak, kernel_basis, secure_kernel, secure_response, smm_protocol, KernelBasis,
    QuasiSecureMatrix, SecureKernelConfig,
};
pub use split::{
    aggregate, merge_feature_matrices, propose_candidates, split_operator, ColumnMeta,
    NodeAggregates, SplitCandidateSet, SplittingMatrix,
};
pub use types::{InstanceId, PartyId, RecordId};
