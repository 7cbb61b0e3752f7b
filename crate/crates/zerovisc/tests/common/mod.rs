#![allow(dead_code)]

use zerovisc::study::StudyConfig;

pub const TINY: &str = include_str!("tiny.toml");

/// Coarse three-eps configuration that runs in about a second.
pub fn tiny() -> StudyConfig {
    StudyConfig::from_toml(TINY).expect("tiny config")
}
