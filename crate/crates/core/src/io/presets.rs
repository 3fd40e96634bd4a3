//! Built-in molecular species. Constants are ratios only: `b_m` is relative
//! to ³⁹K³⁷Cl and `dv_over_bm` is dimensionless.

use crate::model::MoleculeSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub b_m: f64,
    pub dv_over_bm: f64,
    pub description: &'static str,
}

impl Preset {
    pub fn molecule(&self) -> MoleculeSpec {
        MoleculeSpec::new(self.name, self.b_m, self.dv_over_bm)
            .expect("built-in presets are valid")
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "KCl-39-37",
        b_m: 1.0,
        dv_over_bm: 8.21e-7,
        description: "39K37Cl, reference species (B_M = 1)",
    },
    Preset {
        name: "KCl-39-35",
        b_m: 1.03,
        dv_over_bm: 8.45e-7,
        description: "39K35Cl, B_M 1.03 times that of 39K37Cl",
    },
    Preset {
        name: "rigid-rotor",
        b_m: 1.0,
        dv_over_bm: 0.0,
        description: "undistorted rotor, fully resonant with a synchronized train",
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name.eq_ignore_ascii_case(name))
}
