//! Issue-driven fail-to-pass test generation for Python repositories, plus the
//! harness that scores generated tests.

pub mod diff;
pub mod distance;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod generator;
pub mod config;
pub mod llm;
pub mod localizer;
pub mod pipeline;
pub mod planner;
pub mod python;
pub mod repo_model;
pub mod runner;
