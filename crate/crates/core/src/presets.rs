//! Experiment presets shipped with the crate, one TOML file per figure setup.

use crate::config::{parse_config, ExperimentConfig};
use crate::error::{Error, Result};

const PRESETS: [(&str, &str); 7] = [
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig7", include_str!("../presets/fig7.toml")),
    ("fig8", include_str!("../presets/fig8.toml")),
    ("fig9", include_str!("../presets/fig9.toml")),
    ("fig10", include_str!("../presets/fig10.toml")),
    ("fig11", include_str!("../presets/fig11.toml")),
    ("fig12", include_str!("../presets/fig12.toml")),
];

/// Preset ids in listing order.
pub fn preset_ids() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(id, _)| *id)
}

/// Raw TOML text of a preset.
pub fn preset_text(id: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(p, _)| *p == id)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let known: Vec<_> = preset_ids().collect();
            Error::Usage(format!("unknown preset '{id}' (known: {})", known.join(", ")))
        })
}

pub fn load_preset(id: &str) -> Result<ExperimentConfig> {
    parse_config(preset_text(id)?)
}
