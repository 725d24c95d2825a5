use std::fmt;

use serde::{Deserialize, Serialize};

/// Index of a participating node in `[0, n)`. Each responder is also a full
/// consensus node, so the same id names both roles.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }

    /// `[0, n)` as ids.
    pub fn range(n: usize) -> Vec<NodeId> {
        (0..n).map(NodeId).collect()
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node-{}", self.0)
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i)
    }
}
