pub mod error;
pub mod geometry;
pub mod randwalk;
pub mod stats;
pub mod topology;
pub mod census;
pub mod cylinder;
pub mod exponents;
