//! Experiment orchestration for the segmentation NAS benchmark suite: runs,
//! summaries, sampling, timing, and the evaluation protocol server.

pub mod bench;
pub mod config;
pub mod data;
pub mod report;
pub mod runner;
pub mod sample;
pub mod serve;
