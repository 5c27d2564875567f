pub mod bt;
pub mod constraint;
pub mod csubbt;
pub mod domain;
pub mod geom;
pub mod harness;
pub mod samplers;
pub mod sim;
