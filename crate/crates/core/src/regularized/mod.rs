//! Regularized and architectural training methods: the constrained-fitting
//! objective family, the variational latent regularizer, and the denoising
//! and masked autoencoders.

pub mod dae;
pub mod objective;
pub mod variational;

pub use dae::{
    train_dae, train_masked, Corruption, DaeEpoch, DaeOutcome, DenoisingAe, MaskedAe,
    MaskedEpoch, MaskedOutcome,
};
pub use objective::{
    fit_bottleneck, fit_kmeans, fit_pca, fit_sparse, ista, BottleneckAe, KMeansModel, PcaModel,
    RegularizedObjective, SparseCoding,
};
pub use variational::{variational_loss, variational_loss_grad, VariationalLatent, VariationalLoss};
