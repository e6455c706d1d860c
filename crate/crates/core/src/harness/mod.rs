//! Scenario configuration, execution and critical-mass bracketing.

pub mod bracket;
pub mod config;
pub mod scenario;

pub use bracket::{bracket_critical_mass, BracketOptions, BracketReport, Classification};
pub use config::{parse_config, render_config, ScenarioConfig};
pub use scenario::{run_scenario, Scenario, ScenarioReport, CSV_HEADER};

/// Built-in scenarios as `(name, config text)`.
pub const PRESETS: &[(&str, &str)] = &[
    ("subcritical", include_str!("../../presets/subcritical.cfg")),
    ("critical_radial", include_str!("../../presets/critical_radial.cfg")),
    ("critical_supersolution", include_str!("../../presets/critical_supersolution.cfg")),
    ("supercritical_blowup", include_str!("../../presets/supercritical_blowup.cfg")),
    ("positive_energy_blowup", include_str!("../../presets/positive_energy_blowup.cfg")),
    ("barenblatt_validation", include_str!("../../presets/barenblatt_validation.cfg")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|&(_, text)| text)
}
