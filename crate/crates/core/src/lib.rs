pub mod cli;
pub mod error;
pub mod exact;
pub mod gibbs;
pub mod graph;
pub mod mcmc;
pub mod observables;
pub mod pd;
pub mod spin_oracle;
pub mod stats;
pub mod wires;

pub use error::{Error, Result};
