//! Bundled networks.

use crate::network::{parse_network, BayesNet};

pub const CHEST_CLINIC_JSON: &str = include_str!("../fixtures/chest_clinic.json");

/// The 8-variable chest clinic (asia) network.
pub fn chest_clinic() -> BayesNet {
    parse_network(CHEST_CLINIC_JSON).expect("bundled chest clinic fixture is valid")
}
