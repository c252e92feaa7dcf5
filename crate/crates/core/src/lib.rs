#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Classical and quantum Cramér-Rao bounds for continuous-variable Gaussian states.

pub mod channels;
pub mod classical;
pub mod cli;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod measurements;
pub mod numkit;
pub mod qfi;
pub mod scenarios;

pub use error::{Error, Result};
