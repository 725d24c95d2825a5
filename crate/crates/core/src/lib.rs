//! Consensus-coordinated multi-agent response network.
//!
//! Agents propose transmit-power allocations for a false-base-station
//! defense problem, a Byzantine voting protocol picks one, and the winner is
//! committed to a hash-chained ledger replicated on every node.

pub mod consensus;
pub mod digest;
pub mod harness;
pub mod ledger;
pub mod netsim;
pub mod node;
pub mod responders;
pub mod scenario;

pub use digest::Digest32;
pub use node::NodeId;
