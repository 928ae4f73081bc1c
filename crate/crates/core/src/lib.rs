pub mod command;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod gateway;
pub mod lexicon;
pub mod normalizer;
pub mod segmenter;
pub mod session;
pub mod sim;
pub mod transport;
