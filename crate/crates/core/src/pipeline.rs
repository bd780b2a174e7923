//! Pass pipeline.
pub struct ObfConfig;
pub fn run_pipeline() {}
