pub mod config;
pub mod eval;
pub mod gam;
pub mod geometry;
pub mod matcher;
pub mod pipeline;
pub mod sam;
pub mod semantic;
pub mod synth;
