//! Shared fixtures for the kernel benchmarks.

use skewflow::{BasePoint, GridPreset, GridSpec, Scenario, StateVector};

pub struct Fixture {
    pub scenario: Scenario,
    pub grid: GridSpec,
    pub points: Vec<BasePoint>,
    pub probes: Vec<StateVector>,
}

/// The default scenario on the default grid with the default probe set.
pub fn default_fixture() -> Fixture {
    let scenario = Scenario::by_name("example2").expect("built-in scenario");
    let grid = GridPreset::Default.spec();
    let points = scenario.sample_points(&grid).expect("sample points");
    let probes = scenario.probes(7, 8).expect("probe set");
    Fixture { scenario, grid, points, probes }
}
