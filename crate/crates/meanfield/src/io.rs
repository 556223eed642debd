//! File formats shared with the command-line runner.
//!
//! - point clouds: CSV with header `weight,z1,...,zd`;
//! - trajectories: CSV with header `t,particle_index,z_1,...,z_d`;
//! - measure ensembles: a directory of member point-cloud CSVs plus a
//!   JSON manifest with weights and the seed.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! written file reads back to bitwise-identical values and reruns produce
//! byte-identical bodies.

use crate::dynamics::Trajectory;
use crate::ensembles::MeasureEnsemble;
use crate::error::{Error, Result};
use crate::transport::DiscreteMeasure;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Render a measure as `weight,z1,...,zd` CSV text.
pub fn measure_to_csv(mu: &DiscreteMeasure) -> String {
    let d = mu.dim();
    let mut out = String::from("weight");
    for i in 1..=d {
        let _ = write!(out, ",z{i}");
    }
    out.push('\n');
    for i in 0..mu.len() {
        let _ = write!(out, "{}", mu.weight(i));
        for x in mu.point(i) {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

pub fn write_measure_csv(path: &Path, mu: &DiscreteMeasure) -> Result<()> {
    std::fs::write(path, measure_to_csv(mu))?;
    Ok(())
}

pub fn read_measure_csv(path: &Path) -> Result<DiscreteMeasure> {
    let text = std::fs::read_to_string(path)?;
    parse_measure_csv(&text).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_measure_csv(text: &str) -> Result<DiscreteMeasure> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format("empty point-cloud file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"weight") || cols.len() < 2 {
        return Err(Error::Format(format!(
            "expected header 'weight,z1,...', got '{header}'"
        )));
    }
    let d = cols.len() - 1;
    let mut weights = Vec::new();
    let mut points = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(Error::Format(format!(
                "line {}: expected {} fields, got {}",
                lineno + 1,
                d + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("line {}: bad number '{s}'", lineno + 1)))
        };
        weights.push(parse(fields[0])?);
        for f in &fields[1..] {
            points.push(parse(f)?);
        }
    }
    DiscreteMeasure::new(points, d, weights)
}

/// Render a trajectory as `t,particle_index,z_1,...,z_d` CSV text.
pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let d = traj.states.first().map_or(0, |s| s.dim());
    let mut out = String::from("t,particle_index");
    for i in 1..=d {
        let _ = write!(out, ",z_{i}");
    }
    out.push('\n');
    for (t, state) in traj.times.iter().zip(&traj.states) {
        for k in 0..state.count() {
            let _ = write!(out, "{t},{k}");
            for x in state.point(k) {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    std::fs::write(path, trajectory_to_csv(traj))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct EnsembleManifest {
    seed: u64,
    time: f64,
    weights: Vec<f64>,
    members: Vec<String>,
}

/// Write a measure ensemble as a directory of member CSVs plus
/// `manifest.json`.
pub fn write_measure_ensemble_dir(dir: &Path, ens: &MeasureEnsemble) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = EnsembleManifest {
        seed: ens.seed,
        time: ens.time,
        weights: Vec::with_capacity(ens.len()),
        members: Vec::with_capacity(ens.len()),
    };
    for i in 0..ens.len() {
        let name = format!("member_{i:04}.csv");
        write_measure_csv(&dir.join(&name), ens.member(i))?;
        manifest.weights.push(ens.weight(i));
        manifest.members.push(name);
    }
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format(format!("manifest serialization: {e}")))?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

pub fn read_measure_ensemble_dir(dir: &Path) -> Result<MeasureEnsemble> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: EnsembleManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("manifest parse: {e}")))?;
    if manifest.weights.len() != manifest.members.len() {
        return Err(Error::Format(
            "manifest weights and members length mismatch".into(),
        ));
    }
    let mut members = Vec::with_capacity(manifest.members.len());
    for (name, w) in manifest.members.iter().zip(&manifest.weights) {
        members.push((read_measure_csv(&dir.join(name))?, *w));
    }
    let mut ens = MeasureEnsemble::new(members, manifest.seed)?;
    ens.time = manifest.time;
    Ok(ens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::DensitySpec;
    use crate::dynamics::{integrate_flow_trajectory, FlowParams, ParticleConfiguration};
    use crate::kernels::InteractionKernel;

    #[test]
    fn measure_round_trips_bitwise() {
        let mu = DensitySpec::standard_gaussian(2).sample_measure(17, 9).unwrap();
        let text = measure_to_csv(&mu);
        let back = parse_measure_csv(&text).unwrap();
        assert_eq!(mu.points_flat(), back.points_flat());
        assert_eq!(mu.weights(), back.weights());
    }

    #[test]
    fn malformed_header_is_rejected() {
        assert!(parse_measure_csv("mass,z1\n1.0,0.0\n").is_err());
        assert!(parse_measure_csv("").is_err());
        assert!(parse_measure_csv("weight,z1\n0.5,1.0,2.0\n").is_err());
        assert!(parse_measure_csv("weight,z1\nnot_a_number,1\n").is_err());
    }

    #[test]
    fn trajectory_csv_has_expected_shape() {
        let k = InteractionKernel::Linear { dim: 1, c: -1.0 };
        let z = ParticleConfiguration::from_flat(vec![1.0, -1.0], 1).unwrap();
        let traj = integrate_flow_trajectory(
            &z0_params(&k),
            &z,
            &FlowParams::new(0.01, 1e-3).unwrap(),
            5,
        )
        .unwrap();
        let text = trajectory_to_csv(&traj);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,particle_index,z_1");
        // initial state + saved rows, two particles each.
        assert!(text.lines().count() >= 5);
    }

    fn z0_params(k: &InteractionKernel) -> InteractionKernel {
        k.clone()
    }

    #[test]
    fn ensemble_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let members = vec![
            (
                DensitySpec::standard_gaussian(1).sample_measure(8, 1).unwrap(),
                0.25,
            ),
            (
                DensitySpec::standard_gaussian(1).sample_measure(8, 2).unwrap(),
                0.75,
            ),
        ];
        let ens = MeasureEnsemble::new(members, 77).unwrap();
        write_measure_ensemble_dir(dir.path(), &ens).unwrap();
        let back = read_measure_ensemble_dir(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.seed, 77);
        assert_eq!(back.weight(1), 0.75);
        assert_eq!(back.member(0).points_flat(), ens.member(0).points_flat());
    }
}
