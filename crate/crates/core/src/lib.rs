pub mod bernstein;
pub mod bracketing;
pub mod class;
pub mod cli;
pub mod distribution;
pub mod ep_bounds;
pub mod experiments;
pub mod error;
pub mod finite_max;
pub mod numeric;
pub mod orlicz;
pub mod report;
pub mod sim;
pub mod tree;
