//! Access to the ground-truth MDP, separated from what algorithms may see.
//!
//! Algorithms receive a [`MdpTemplate`] and a dataset. Anything that needs
//! true returns goes through [`GroundTruth`], which is only ever passed as an
//! optional logger.

use crate::mdp::{policy_return, MdpTemplate, TabularMdp, TabularPolicy};

pub trait GroundTruth {
    fn template(&self) -> MdpTemplate;
    /// `J(π, M)`.
    fn true_return(&self, policy: &TabularPolicy) -> f64;
}

impl GroundTruth for TabularMdp {
    fn template(&self) -> MdpTemplate {
        TabularMdp::template(self)
    }

    fn true_return(&self, policy: &TabularPolicy) -> f64 {
        policy_return(self, policy).unwrap_or(f64::NAN)
    }
}

/// Exposes only the template; any attempt to read returns panics.
pub struct PoisonedTruth {
    template: MdpTemplate,
}

impl PoisonedTruth {
    pub fn new(template: MdpTemplate) -> Self {
        Self { template }
    }
}

impl GroundTruth for PoisonedTruth {
    fn template(&self) -> MdpTemplate {
        self.template.clone()
    }

    fn true_return(&self, _: &TabularPolicy) -> f64 {
        panic!("poisoned ground truth: true dynamics accessed");
    }
}
