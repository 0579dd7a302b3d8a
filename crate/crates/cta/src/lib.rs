//! Verification toolkit for networks of discrete-time communicating timed
//! automata exchanging aged messages over FIFO channels.

pub mod bmps;
pub mod cli;
pub mod gadgets;
pub mod model;
pub mod oca;
pub mod regions;
pub mod semantics;
