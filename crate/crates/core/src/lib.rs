//! Joint caching and updating of contents across neighbouring cells, with
//! age-of-information costs, solved by column generation over per-pair
//! caching schedules and repeated rounding.

// index loops mirror the (server, content, slot) notation in the LP code
#![allow(clippy::needless_range_loop)]

pub mod baselines;
pub mod bench;
pub mod cli;
pub mod column;
pub mod cost;
pub mod driver;
pub mod error;
pub mod instance;
pub mod lp;
pub mod pricing;
pub mod rmp;
pub mod rounding;
pub mod verify;

pub use error::{McspError, Result};
