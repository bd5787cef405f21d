pub mod detector;
pub mod event;
pub mod harness;
pub mod hypergraph;
pub mod regex;
pub mod similarity;
pub mod synth;
pub mod trainer;
