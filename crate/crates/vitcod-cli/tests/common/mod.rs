//! Shared test oracles, independent of the library's analytic paths.

pub mod event_sim;
