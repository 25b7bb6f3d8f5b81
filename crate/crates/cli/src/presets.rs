//! Built-in experiment presets.

use heatlab_core::estimates::{
    DgConfig, DueConfig, MvConfig, PmvConfig, TailConfig, TcConfig, TwoStepConfig, UeConfig,
};
use heatlab_core::generators::GeneratorSpec;
use heatlab_core::isoperimetry::FamilyBudget;
use heatlab_core::kernel::SanityConfig;

use crate::{CheckSpec, CliError, ExperimentPreset, IsoKind, Target};

pub const NAMES: [&str; 5] = ["lattice-z1", "lattice-z2", "vicsek", "weighted-vicsek", "paper-section-5"];

pub fn preset(name: &str) -> Result<ExperimentPreset, CliError> {
    let p = match name {
        "lattice-z1" => lattice_z1(),
        "lattice-z2" => lattice_z2(),
        "vicsek" => vicsek(),
        "weighted-vicsek" => weighted_vicsek(),
        "paper-section-5" => stretched_vicsek(),
        _ => return Err(CliError::UnknownPreset(name.into(), NAMES.join(", "))),
    };
    Ok(p)
}

fn base(name: &str, graph: GeneratorSpec, profile_radius: usize, checks: Vec<CheckSpec>) -> ExperimentPreset {
    ExperimentPreset {
        name: name.into(),
        graph,
        center: None,
        profile_radius,
        q: 1.0,
        ball_factor: 3,
        seed: 7,
        checks,
    }
}

fn lattice_z1() -> ExperimentPreset {
    base(
        "lattice-z1",
        GeneratorSpec::LatticeBox { dim: 1, side: 13001 },
        128,
        vec![
            CheckSpec::Volume {
                radii: vec![4, 8, 16, 32, 64],
            },
            CheckSpec::KernelSanity {
                graph: Some(GeneratorSpec::LatticeBox { dim: 1, side: 101 }),
                config: SanityConfig::default(),
            },
            CheckSpec::Due {
                config: DueConfig {
                    n_min: 4,
                    n_max: 2000,
                    ..DueConfig::default()
                },
            },
            CheckSpec::Ue {
                targets: vec![Target::Distance(0), Target::Distance(20), Target::Distance(40)],
                n_grid: vec![50, 100, 400, 1600],
                config: UeConfig::default(),
            },
            CheckSpec::Dg {
                ball_radius: 5,
                distances: vec![20, 40, 80],
                config: DgConfig::default(),
            },
            CheckSpec::ExitTail {
                radii: vec![8, 16, 32],
                config: TailConfig::default(),
            },
            CheckSpec::Pmv {
                radius: 8,
                config: PmvConfig::default(),
            },
            CheckSpec::Mv {
                radius: 8,
                config: MvConfig::default(),
            },
            CheckSpec::Tc {
                radii: vec![8, 16, 32],
                config: TcConfig {
                    y_samples: 0,
                    ..TcConfig::default()
                },
            },
        ],
    )
}

fn lattice_z2() -> ExperimentPreset {
    let budget = FamilyBudget {
        max_exhaustive_size: 6,
        samples: 100,
        seed: 7,
    };
    base(
        "lattice-z2",
        GeneratorSpec::LatticeBox { dim: 2, side: 151 },
        75,
        vec![
            CheckSpec::P0,
            CheckSpec::Volume {
                radii: vec![4, 8, 16, 32],
            },
            CheckSpec::Due {
                config: DueConfig {
                    n_min: 2,
                    n_max: 2000,
                    band_limit: 6.0,
                    finite: true,
                },
            },
            CheckSpec::Isoperimetry {
                kind: IsoKind::E,
                radius: 4,
                budget,
            },
            CheckSpec::Isoperimetry {
                kind: IsoKind::Fk,
                radius: 4,
                budget,
            },
            CheckSpec::Pmv {
                radius: 6,
                config: PmvConfig::default(),
            },
            CheckSpec::Mv {
                radius: 8,
                config: MvConfig::default(),
            },
            CheckSpec::Tc {
                radii: vec![4, 8, 16],
                config: TcConfig {
                    y_samples: 16,
                    ..TcConfig::default()
                },
            },
            CheckSpec::TwoStep {
                radii: vec![4, 8, 16],
                config: TwoStepConfig {
                    sets: 50,
                    ..TwoStepConfig::default()
                },
            },
        ],
    )
}

fn vicsek() -> ExperimentPreset {
    let budget = FamilyBudget {
        max_exhaustive_size: 8,
        samples: 100,
        seed: 7,
    };
    base(
        "vicsek",
        GeneratorSpec::Vicsek { level: 4 },
        160,
        vec![
            CheckSpec::P0,
            CheckSpec::Volume {
                radii: vec![2, 6, 18],
            },
            CheckSpec::Profile { r_max: 160 },
            CheckSpec::ExitScales { radii: vec![2, 6, 18] },
            CheckSpec::Isoperimetry {
                kind: IsoKind::E,
                radius: 8,
                budget,
            },
            CheckSpec::Isoperimetry {
                kind: IsoKind::Fk,
                radius: 8,
                budget,
            },
            CheckSpec::Isoperimetry {
                kind: IsoKind::Rho,
                radius: 8,
                budget,
            },
            CheckSpec::Lemmas { radius: 8, budget },
            CheckSpec::Due {
                config: DueConfig {
                    n_max: 160,
                    ..DueConfig::default()
                },
            },
            CheckSpec::ExitTail {
                radii: vec![6, 18],
                config: TailConfig {
                    n_exponent: 1.5,
                    ..TailConfig::default()
                },
            },
            CheckSpec::Tc {
                radii: vec![2, 6, 18],
                config: TcConfig::default(),
            },
            CheckSpec::Lvv {
                targets: vec![Target::CutVertex(0), Target::CutVertex(2)],
                n_grid: vec![10, 40, 160],
                eps_grid: vec![0.25, 0.5, 1.0],
            },
            CheckSpec::TwoStep {
                radii: vec![2, 6, 18],
                config: TwoStepConfig {
                    sets: 50,
                    ..TwoStepConfig::default()
                },
            },
        ],
    )
}

fn weighted_vicsek() -> ExperimentPreset {
    let budget = FamilyBudget {
        max_exhaustive_size: 6,
        samples: 60,
        seed: 7,
    };
    base(
        "weighted-vicsek",
        GeneratorSpec::WeightedVicsek {
            level: 3,
            weights: None,
        },
        54,
        vec![
            CheckSpec::P0,
            CheckSpec::Volume { radii: vec![2, 6] },
            CheckSpec::ExitScales { radii: vec![2, 6] },
            CheckSpec::Isoperimetry {
                kind: IsoKind::E,
                radius: 6,
                budget,
            },
            CheckSpec::Lemmas { radius: 6, budget },
            CheckSpec::Due {
                config: DueConfig {
                    n_max: 54,
                    ..DueConfig::default()
                },
            },
            CheckSpec::Tc {
                radii: vec![2, 6],
                config: TcConfig::default(),
            },
        ],
    )
}

/// Stretched Vicsek tree: doubling volume and a uniform time comparison, but
/// no single walk exponent.
fn stretched_vicsek() -> ExperimentPreset {
    base(
        "paper-section-5",
        GeneratorSpec::StretchedVicsek { level: 5 },
        1024,
        vec![
            CheckSpec::P0,
            CheckSpec::Volume {
                radii: vec![64, 128, 256],
            },
            CheckSpec::Profile { r_max: 1024 },
            CheckSpec::Tc {
                radii: vec![64, 128, 256],
                config: TcConfig {
                    y_samples: 16,
                    stability_limit: 4.0,
                },
            },
            CheckSpec::Due {
                config: DueConfig {
                    n_min: 2,
                    n_max: 2000,
                    band_limit: 10.0,
                    finite: false,
                },
            },
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for name in NAMES {
            let p = preset(name).unwrap();
            assert_eq!(p.name, name);
            let text = serde_json::to_string(&p).unwrap();
            let back: ExperimentPreset = serde_json::from_str(&text).unwrap();
            assert_eq!(back, p);
        }
        assert!(matches!(preset("nope"), Err(CliError::UnknownPreset(..))));
    }
}
