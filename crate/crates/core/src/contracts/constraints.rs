use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::amount::BASIS_POINTS;

/// End-user constraints the owner delegates into a constraint-based contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintTerms {
    #[serde(default)]
    pub gdpr_required: bool,
    /// Empty means any region.
    #[serde(default)]
    pub allowed_regions: BTreeSet<String>,
    #[serde(default = "identity_multiplier")]
    pub price_multiplier_bp: u32,
}

fn identity_multiplier() -> u32 {
    BASIS_POINTS as u32
}

impl Default for ConstraintTerms {
    fn default() -> Self {
        ConstraintTerms {
            gdpr_required: false,
            allowed_regions: BTreeSet::new(),
            price_multiplier_bp: identity_multiplier(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderOffer {
    pub region: String,
    pub gdpr_compliant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConstraintEvaluation {
    pub admissible: bool,
    pub price_multiplier_bp: u32,
}

pub fn evaluate_constraints(terms: &ConstraintTerms, offer: &ProviderOffer) -> ConstraintEvaluation {
    let gdpr_ok = !terms.gdpr_required || offer.gdpr_compliant;
    let region_ok = terms.allowed_regions.is_empty() || terms.allowed_regions.contains(&offer.region);
    ConstraintEvaluation {
        admissible: gdpr_ok && region_ok,
        price_multiplier_bp: terms.price_multiplier_bp,
    }
}
