//! Synthetic training data for custom guardrail classifiers.
//!
//! A task is a natural-language criterion, a label set and a few unlabeled
//! seed inputs. [`pipeline::run`] decomposes the task into dimensions of
//! variation, generates boundary cases along them, validates each one with
//! an Advocate-versus-judges debate, refines rejected samples from the
//! judges' objections, and returns the accepted dataset with full lineage.
//!
//! Every model call goes through [`gateway::Gateway`]; the scripted backend in
//! [`gateway::mock`] makes whole runs offline and byte-reproducible.

pub mod analytics;
pub mod cli;
pub mod dataset;
pub mod debate;
pub mod dimension;
pub mod gateway;
pub mod generator;
pub mod pipeline;
pub mod task;
