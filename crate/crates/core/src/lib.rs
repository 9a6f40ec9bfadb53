//! Run-time search-based testing of simulated multi-agent sensor devices.
//!
//! A testing agent evolves test inputs with a GA (or a (1+1) EA) guided by a
//! weighted failure/novelty fitness, ships them over a simulated serial link
//! to an agent under test, and feeds the returned verdicts back into the next
//! generation.

pub mod agent;
pub mod catalog;
pub mod config;
pub mod genome;
pub mod orchestrator;
pub mod runlog;
pub mod search;
pub mod wire;
