//! Experiment harness around the solver library: synthetic problem
//! generation, seeded multi-trial orchestration, and CSV/SVG reporting.

pub mod experiment;
pub mod output;
pub mod rates;
pub mod synth;
