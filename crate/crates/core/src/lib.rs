pub mod dataset;
pub mod geom;
pub mod learner;
pub mod sandfield;
pub mod servo;
pub mod session;
pub mod strategies;
pub mod vision;
