pub mod combinat;
pub mod cumulant_alg;
pub mod densities;
pub mod error;
pub mod exact;
pub mod exec;
pub mod haar_expect;
pub mod rmt_sim;
pub mod second_order;
pub mod syntax;
pub mod verify;
pub mod weingarten;

pub use error::{Error, Result};
