//! Seeded, reproducible training stack for joint relay selection and
//! continuous power allocation in a two-hop amplify-and-forward relay
//! network. A deterministic-policy-gradient agent with prioritized experience
//! replay learns to minimize outage probability; plain-replay, discrete
//! value-based and random baselines run against the same environment and
//! seeding interfaces.

pub mod agents;
pub mod env;
pub mod harness;
pub mod nn;
pub mod replay;
pub mod selfcheck;
