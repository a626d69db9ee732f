//! Built-in example networks, stored as network files under `fixtures/`.
//!
//! The Manhattan grid has zero damping on its corner rows (nodes 5–9 and 21–25);
//! this is allowed since only `D ≥ 0` is required.

use crate::error::{Error, Result};
use crate::network::{parse_network, DispatchProblem};

macro_rules! catalog {
    ($($name:literal),* $(,)?) => {
        /// `(name, file contents)` for every fixture.
        pub const FIXTURES: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../fixtures/", $name, ".json")))),*
        ];
    };
}

catalog!(
    "eight_node",
    "eight_node_plus_line_2_4",
    "eight_node_doubled_3_4",
    "eight_node_noise_1_2",
    "eight_node_demand_59",
    "ring_symmetric",
    "ring_asymmetric",
    "manhattan_symmetric",
    "manhattan_asymmetric_demand",
    "manhattan_asymmetric_noise",
);

pub fn fixture_names() -> impl Iterator<Item = &'static str> {
    FIXTURES.iter().map(|(n, _)| *n)
}

pub fn fixture_source(name: &str) -> Result<&'static str> {
    FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| Error::UnknownFixture(name.to_string()))
}

pub fn fixture(name: &str) -> Result<DispatchProblem> {
    parse_network(fixture_source(name)?)
}
