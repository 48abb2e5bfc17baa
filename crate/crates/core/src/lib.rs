//! Tsetlin Machine inference on Y-Flash memristive crossbars.
//!
//! The crate holds a bit-exact digital golden model of Coalesced Tsetlin
//! Machine inference, a trainer, a behavioural Y-Flash device model, analog
//! crossbar tiles, the program-and-verify mapper, and energy/area accounting.

pub mod cotm;
pub mod crossbar;
pub mod data;
pub mod device;
pub mod error;
pub mod mapper;
pub mod metrics;
pub mod model_file;
pub mod pipeline;
pub mod rng;
pub mod trainer;

pub use cotm::{ActionMatrix, ClassScores, ClauseVector, CotmModel, LiteralVector, SignedWeightMatrix};
pub use error::{Error, Result};
pub use rng::{SeedTree, Stream};
