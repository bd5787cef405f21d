pub mod bench;
pub mod generate;
pub mod metrics;
pub mod motivating;
pub mod perturb;
pub mod sweep;
