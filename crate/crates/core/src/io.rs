//! On-disk formats.
//!
//! An instance is a map text file plus a JSON sidecar:
//!
//! ```json
//! {"map": "s0007.map", "seed": 7, "k_max": 64, "difficulty": 31,
//!  "agents": [{"id": 0, "start": [1, 2], "goal": [14, 9]}]}
//! ```
//!
//! A suite manifest lists sidecar paths (relative to the manifest) together
//! with the generator parameters that produced them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_world::{AgentSpec, GridMap};
use crate::map_forge::{difficulty_score, Instance, MapGenerator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    /// Map file, relative to the sidecar's directory.
    pub map: String,
    pub agents: Vec<AgentSpec>,
    pub seed: u64,
    pub k_max: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<MapGenerator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_agents: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_seeds: Option<usize>,
    /// Sidecar paths relative to the manifest.
    pub instances: Vec<String>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_map(path: &Path) -> Result<GridMap> {
    GridMap::parse(&read_text(path)?)
}

/// Writes `<dir>/<name>.map` and `<dir>/<name>.json`; returns the sidecar path.
pub fn write_instance(dir: &Path, name: &str, instance: &Instance, k_max: u32) -> Result<PathBuf> {
    let map_name = format!("{name}.map");
    write_text(&dir.join(&map_name), &instance.map.to_string())?;
    let sidecar = InstanceFile {
        map: map_name,
        agents: instance.agents.clone(),
        seed: instance.seed,
        k_max,
        difficulty: Some(instance.difficulty),
    };
    let path = dir.join(format!("{name}.json"));
    write_text(&path, &(serde_json::to_string_pretty(&sidecar)? + "\n"))?;
    Ok(path)
}

/// Loads an instance from its sidecar. Returns the instance and its step limit.
pub fn read_instance(sidecar: &Path) -> Result<(Instance, u32)> {
    let file: InstanceFile = serde_json::from_str(&read_text(sidecar)?)?;
    let dir = sidecar.parent().unwrap_or(Path::new("."));
    let map = read_map(&dir.join(&file.map))?;
    crate::grid_world::World::new(map.clone(), file.agents.clone(), file.k_max)?;
    let difficulty = match file.difficulty {
        Some(d) => d,
        None => difficulty_score(&map, &file.agents)?,
    };
    Ok((
        Instance {
            map,
            agents: file.agents,
            seed: file.seed,
            difficulty,
        },
        file.k_max,
    ))
}

pub fn write_manifest(path: &Path, manifest: &SuiteManifest) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(manifest)? + "\n"))
}

pub fn read_manifest(path: &Path) -> Result<SuiteManifest> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

/// Loads every instance of a manifest as `(id, instance)`, the id being the sidecar's file stem.
pub fn load_suite(manifest_path: &Path) -> Result<Vec<(String, Instance)>> {
    let manifest = read_manifest(manifest_path)?;
    if manifest.instances.is_empty() {
        return Err(Error::Validation(format!(
            "manifest {} lists no instances",
            manifest_path.display()
        )));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    manifest
        .instances
        .iter()
        .map(|rel| {
            let path = dir.join(rel);
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| rel.clone());
            read_instance(&path).map(|(inst, _)| (id, inst))
        })
        .collect()
}

/// Writes instances as `<dir>/s<seed>.{map,json}` plus `<dir>/manifest.json`.
pub fn write_suite(
    dir: &Path,
    instances: &[Instance],
    k_max: u32,
    generator: Option<MapGenerator>,
    n_seeds: Option<usize>,
) -> Result<PathBuf> {
    let mut names = Vec::with_capacity(instances.len());
    for inst in instances {
        let name = format!("s{:04}", inst.seed);
        write_instance(dir, &name, inst, k_max)?;
        names.push(format!("{name}.json"));
    }
    let manifest = SuiteManifest {
        generator,
        n_agents: instances.first().map(|i| i.agents.len()),
        n_seeds,
        instances: names,
    };
    let path = dir.join("manifest.json");
    write_manifest(&path, &manifest)?;
    Ok(path)
}
