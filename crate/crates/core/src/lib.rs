//! Allocation-only building blocks for turning digitized newspaper text into
//! bank-distress episodes and estimating the panel regressions built on them.
//!
//! Everything here is deterministic and free of IO; the `bankrun` crate adds
//! files, HTTP and the command line.
#![no_std]
extern crate alloc;

pub mod corpus;
pub mod dates;
pub mod digest;
pub mod entities;
pub mod episodes;
pub mod llmgate;
pub mod textfilter;
pub mod metrics;
pub mod panel;
