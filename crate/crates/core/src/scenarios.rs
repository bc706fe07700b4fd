//! Scenarios shipped with the crate.

use crate::error::Result;
use crate::trafficgen::ScenarioSpec;

/// Training half of the default scenario pair.
pub const TRAIN_TOML: &str = include_str!("../scenarios/train.toml");
/// Held-out half of the default scenario pair.
pub const TEST_TOML: &str = include_str!("../scenarios/test.toml");
/// Short scenario containing every class.
pub const DEMO_TOML: &str = include_str!("../scenarios/demo.toml");

pub fn default_train() -> Result<ScenarioSpec> {
    ScenarioSpec::from_toml(TRAIN_TOML)
}

pub fn default_test() -> Result<ScenarioSpec> {
    ScenarioSpec::from_toml(TEST_TOML)
}

pub fn demo() -> Result<ScenarioSpec> {
    ScenarioSpec::from_toml(DEMO_TOML)
}
