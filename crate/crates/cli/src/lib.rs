//! Library half of the `npforest` binary: argument definitions, graph file
//! formats and run manifests.

pub mod commands;
pub mod formats;
pub mod output;
