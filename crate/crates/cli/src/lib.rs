pub mod experiment;
pub mod plots;
pub mod report;
