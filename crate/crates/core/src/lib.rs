//! Chain-of-thought validation toolkit.
//!
//! * [`corpus`] loads corpora, reasoning-chain triples and embedding tables.
//! * [`etm`] fits an embedded topic model with a word-pair similarity penalty.
//! * [`causal`] trains a shared projection head with a two-case contrastive loss.
//! * [`rank`] scores chains and truncates the low tail by order statistics.
//! * [`pipeline`] wires the stages together over files.

pub mod causal;
pub mod corpus;
pub mod error;
pub mod etm;
pub mod matrix;
pub mod pipeline;
pub mod rank;
pub mod special;
pub mod synthetic;

pub use error::{EccotError, Result};
pub use matrix::Matrix;
