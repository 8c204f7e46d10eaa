//! Named run configurations shipped with the library.

use super::RunConfig;
use crate::{Error, Result};

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        /// `(name, json)` for every bundled preset.
        pub const PRESETS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../presets/", $name, ".json")))),*
        ];
    };
}

presets!(
    "rebrac-gym-defaults",
    "rebrac-antmaze-defaults",
    "iql-gym-defaults",
    "iql-antmaze-defaults",
    "lbsac-gym-defaults",
    "pointmass-rebrac-mse",
    "pointmass-rebrac-ce",
    "pointmass-iql-mse",
    "pointmass-iql-ce",
    "pointmass-lbsac-mse",
    "pointmass-lbsac-ce",
);

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}; known: {}", names().collect::<Vec<_>>().join(", "))))?;
    RunConfig::from_json(text)
}
