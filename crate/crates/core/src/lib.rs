//! Analytics for organizational email thread corpora.
//!
//! The crate covers the full pipeline from raw thread files to findings:
//! participant gender resolution from first-name statistics, interaction-pair
//! extraction against an organizational hierarchy, dialog-structure feature
//! computation, factorial statistical analysis, and supervised prediction of
//! the direction of power between interacting pairs.
//!
//! Modules follow the pipeline order:
//!
//! - [`model`]: canonical in-memory corpus types (threads, messages, hierarchy, splits)
//! - [`ingest`]: parsers for every external file format
//! - [`gender`]: name-statistics gender assignment and coverage reporting
//! - [`pairs`]: interacting-pair extraction, power labels, gender environments
//! - [`features`]: per-pair dialog-structure feature vectors and ngram extraction
//! - [`stats`]: t-tests, two-way ANOVA, Tukey HSD, Bonferroni, McNemar
//! - [`learn`]: max-margin power-direction classifier and ablation harness

pub mod features;
pub mod gender;
pub mod ingest;
pub mod learn;
pub mod model;
pub mod pairs;
pub mod stats;
