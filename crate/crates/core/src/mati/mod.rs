//! The multi-aspect temporal influence model: chained conditional slab
//! tables per (user, POI) trained by EM, and the mixture of shared slab
//! activity with the latent joint depth.

pub mod em;
pub mod layout;
pub mod score;

pub use em::{
    e_step, joint_prob, log_likelihood, m_step, observed_pairs, posterior, run_em, EmConfig, EmInit, EmReport,
    MatiParams, ObservedPair, PrNu,
};
pub use layout::{chain_distribution, chain_factorization, tables_from_distribution, ChainLayout, ChainTables};
pub use score::{mati_score, psi_shared_activity, DepthSupport, MatiComponents, MatiConfig, MatiScorer};
