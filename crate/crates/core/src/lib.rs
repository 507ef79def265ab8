// SPDX-License-Identifier: Apache-2.0

//! Static energy-consumption bounds for a small hardware-multithreaded ISA.

pub mod analysis;
pub mod annotations;
pub mod cfg;
pub mod cli;
pub mod energy_model;
pub mod error;
pub mod exec;
pub mod gen;
pub mod ilp;
pub mod ipet;
pub mod ir;
pub mod isa;
pub mod mapping;
pub mod multithread;
pub mod num;
pub mod regression;
pub mod sim;

pub use error::{Error, Result};
