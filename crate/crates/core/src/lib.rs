//! Exact solvers for finite-horizon decentralized stochastic control where agents
//! share observations and actions by word of mouth over a delayed network.

pub mod belief;
pub mod bundled;
pub mod error;
pub mod infostruct;
pub mod netgraph;
pub mod prescription;
pub mod solver;
pub mod space;
pub mod sysmodel;

pub use error::{Error, Result};
