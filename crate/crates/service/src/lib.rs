//! Scenario files, the on-disk session store, and the two front ends built
//! on them: the `flexnet` command line and a JSON API.

pub mod api;
pub mod cli;
pub mod ops;
pub mod scenario;
pub mod store;
