//! Equilibrium measures for complex polynomial external fields
//! `V(z) = z^{2p}/2p + sum_j t_j z^j / j`.

pub mod branch;
pub mod endpoint;
pub mod error;
pub mod eta;
pub mod graph;
pub mod laurent;
pub mod mask;
pub mod measure;
pub mod poly;
pub mod quad;
pub mod regime;
pub mod seeds;
pub mod teichmuller;
pub mod trace;

pub use branch::{BranchedSqrtR, EndpointSet, Side};
pub use error::{EqmError, Result};
pub use poly::{Potential, C64};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/endpoints.md")]
    mod endpoints {}
    #[doc = include_str!("../../../book/src/measure.md")]
    mod measure {}
    #[doc = include_str!("../../../book/src/graph.md")]
    mod graph {}
    #[doc = include_str!("../../../book/src/regime.md")]
    mod regime {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
