//! Counterfactual inference: flow-based abduction of per-individual
//! residuals, do-operations on a fitted model, and prediction in the
//! intervened world with the residuals held fixed.

mod flow;
mod intervention;
mod mlp;
mod vae;

pub use flow::{flow_forward, u_hat, PlanarLayer, INVERTIBILITY_MARGIN};
pub use intervention::{
    abduct_all, intervene, predict_counterfactual, transition_matrix, Abduction, CounterfactualReport,
    EpsStore, InterventionKind, InterventionSpec,
};
pub use mlp::Mlp;
pub use vae::{
    abduct, fit_fvae, latent_samples, reparameterize, ElboParts, FlowConfig, FlowEpoch, FlowFit, FlowVae,
};
