//! The three named weight configurations.

use std::fmt;
use std::str::FromStr;

use crate::num::Real;
use crate::objectives::{Term, WeightConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Ergonomic terms only.
    UserCentric,
    /// Adds interaction suitability.
    SurfaceAdapt,
    /// Adds both overlay and interaction suitability.
    SituationAdapt,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::UserCentric, Preset::SurfaceAdapt, Preset::SituationAdapt];

    pub fn name(self) -> &'static str {
        match self {
            Preset::UserCentric => "user-centric",
            Preset::SurfaceAdapt => "surface-adapt",
            Preset::SituationAdapt => "situation-adapt",
        }
    }

    /// Non-zero weights in term order.
    pub fn table(self) -> &'static [(Term, f64)] {
        use Term::*;
        match self {
            Preset::UserCentric => &[
                (Occlusion, 0.3),
                (LookTowards, 0.1),
                (Distance, 0.15),
                (FieldOfView, 0.3),
                (ConstantViewSize, 0.15),
            ],
            Preset::SurfaceAdapt => &[
                (Occlusion, 0.2),
                (LookTowards, 0.1),
                (Distance, 0.1),
                (FieldOfView, 0.2),
                (ConstantViewSize, 0.1),
                (InteractionSuitability, 0.3),
            ],
            Preset::SituationAdapt => &[
                (Occlusion, 0.2),
                (LookTowards, 0.05),
                (Distance, 0.1),
                (FieldOfView, 0.2),
                (ConstantViewSize, 0.1),
                (OverlaySuitability, 0.15),
                (InteractionSuitability, 0.2),
            ],
        }
    }

    pub fn weights<T: Real>(self) -> WeightConfig<T> {
        WeightConfig::new(self.table().iter().map(|(t, w)| (*t, T::lit(*w)))).expect("preset weights are valid")
    }

    /// The shipped weights file for this preset.
    pub fn json(self) -> &'static str {
        match self {
            Preset::UserCentric => include_str!("../presets/user-centric.json"),
            Preset::SurfaceAdapt => include_str!("../presets/surface-adapt.json"),
            Preset::SituationAdapt => include_str!("../presets/situation-adapt.json"),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected user-centric, surface-adapt or situation-adapt)"))
    }
}
