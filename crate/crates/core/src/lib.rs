pub mod composer;
pub mod corpus;
pub mod detector;
pub mod eval;
pub mod geometry;
pub mod par;
pub mod pipeline;
pub(crate) mod proc;
pub mod raster;
pub mod recognizer;
pub mod speech;
pub mod synthetic;
