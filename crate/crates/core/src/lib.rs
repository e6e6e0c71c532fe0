pub mod datasets;
pub mod distributions;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod features;
pub mod neuralnet;
pub mod normality;
pub mod rng;
pub mod special;
