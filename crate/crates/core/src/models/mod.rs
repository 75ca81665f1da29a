//! The three reference chains: mean-field Ising Glauber dynamics, the
//! supermarket jump chain (with its fluid limit), and the linear-extension
//! walk.

pub mod fluid;
pub mod ising;
pub mod linext;
pub mod supermarket;
