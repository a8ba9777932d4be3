//! Bundled example models.

use crate::dsl::{load, Model};

pub const THERMOSTAT: &str = include_str!("../models/thermostat.btm");
pub const KITCHEN_LAMP: &str = include_str!("../models/kitchen_lamp.btm");
pub const PENDULUM: &str = include_str!("../models/pendulum.btm");

/// `(file name, source)` of every bundled model.
pub const ALL: [(&str, &str); 3] = [
    ("thermostat.btm", THERMOSTAT),
    ("kitchen_lamp.btm", KITCHEN_LAMP),
    ("pendulum.btm", PENDULUM),
];

pub fn thermostat() -> Model {
    load(THERMOSTAT).expect("bundled model is valid")
}

pub fn kitchen_lamp() -> Model {
    load(KITCHEN_LAMP).expect("bundled model is valid")
}

pub fn pendulum() -> Model {
    load(PENDULUM).expect("bundled model is valid")
}
