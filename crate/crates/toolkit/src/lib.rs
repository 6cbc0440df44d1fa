//! Std companion of `code-rationales-core`: tree-sitter concept mapping,
//! testbeds, versioned file formats, the remote model client and the
//! staged pipeline behind the `code-rationales` command.

pub mod backend;
pub mod formats;
pub mod pipeline;
pub mod remote;
pub mod syntax;
pub mod taxonomy;
pub mod testbed;

pub use code_rationales_core as core;
