//! Context-aware route discovery for multi-hop cognitive cellular networks:
//! tessellation, primary-channel availability, the absorbing-chain analysis
//! of route discovery, resource planning, security, trading and a Monte
//! Carlo cross-check of all of it.

// `!(x > 0.0)` style checks reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod export;
pub mod grid;
pub mod market;
pub mod qos;
pub mod router;
pub mod security;
pub mod simkit;
pub mod spectrum;

pub use error::{Error, Result};
pub use grid::{HexGrid, RadioParams};
pub use market::{Market, PricingParams, RouteReport};
pub use qos::{QosRequest, SwitchPlan};
pub use router::{AbsorbingChain, RelayModel, RoutingMode};
pub use security::SecurityEnv;
pub use simkit::McEstimate;
pub use spectrum::{PrimaryTraffic, SecondaryDemand};
