pub mod cli;
pub mod config;
pub mod correlator;
pub mod emitter;
pub mod field;
pub mod fit;
pub mod interferometer;
pub mod measured;
pub mod pipeline;
pub mod report;
pub mod reproduce;
pub mod rng;
pub mod timetag;
pub mod units;
