//! Artifact emission: CSV tables, JSON reports, the binary field cache,
//! and the run manifest. All outputs are byte-deterministic for fixed
//! inputs (shortest-roundtrip float formatting, declaration-ordered JSON).

use std::collections::BTreeMap;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dpp::{Policy, ProblemKind, ValueField};
use crate::error::{LabError, Result};
use crate::model::{GameSpec, Grid};

/// Hex SHA-256 of the raw config text, truncated to 16 characters: the
/// cache and output-directory key.
pub fn config_hash(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let file = std::fs::File::create(path)?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)
        .map_err(|e| LabError::Config(format!("json write failed: {e}")))?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Value field as CSV: slice index, time, node coordinates, value, z
/// components, and the chosen control labels when policies are given.
pub fn write_field_csv(
    path: &Path,
    spec: &GameSpec,
    grid: &Grid,
    field: &ValueField,
    policies: Option<(&Policy, &Policy)>,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let d = grid.spatial_dim;

    let mut header = String::from("slice,t");
    for k in 0..d {
        header.push_str(&format!(",x{}", k + 1));
    }
    if grid.has_aug() {
        header.push_str(",stat");
    }
    header.push_str(",value");
    for k in 0..d {
        header.push_str(&format!(",z{}", k + 1));
    }
    if policies.is_some() {
        header.push_str(",u,v");
    }
    writeln!(w, "{header}")?;

    let mut coords = vec![0.0f64; grid.n_axes()];
    for slice in 0..=grid.n_t {
        let t = grid.time(slice);
        for node in grid.nodes() {
            grid.coords_into(node, &mut coords);
            let mut row = format!("{slice},{t}");
            for c in &coords {
                row.push_str(&format!(",{c}"));
            }
            row.push_str(&format!(",{}", field.slices[slice][node]));
            for k in 0..d {
                let z = if slice < grid.n_t {
                    field.z_slices[slice][node * d + k]
                } else {
                    0.0
                };
                row.push_str(&format!(",{z}"));
            }
            if let Some((u_pol, v_pol)) = policies {
                let i = slice.min(grid.n_t - 1);
                row.push_str(&format!(
                    ",{},{}",
                    spec.u_set.label(u_pol.choices[i][node] as usize),
                    spec.v_set.label(v_pol.choices[i][node] as usize)
                ));
            }
            writeln!(w, "{row}")?;
        }
    }
    Ok(())
}

/// Generic sample-cloud CSV (distance, gap) for plotting.
pub fn write_samples_csv(
    path: &Path,
    header: &str,
    samples: impl Iterator<Item = (f64, f64)>,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}")?;
    for (a, b) in samples {
        writeln!(w, "{a},{b}")?;
    }
    Ok(())
}

const CACHE_MAGIC: &[u8; 8] = b"ISLBFLD1";

/// Compact binary cache of a value field, keyed by the config hash.
/// Layout: magic, hash (16 bytes ascii), problem kind, n_slices, n_nodes,
/// d, value data, z data; all integers and floats little-endian.
pub fn write_field_cache(path: &Path, hash: &str, field: &ValueField) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(CACHE_MAGIC)?;
    let mut hash_bytes = [0u8; 16];
    let src = hash.as_bytes();
    hash_bytes[..src.len().min(16)].copy_from_slice(&src[..src.len().min(16)]);
    w.write_all(&hash_bytes)?;
    let kind: u8 = match field.problem {
        ProblemKind::Lower => 0,
        ProblemKind::Upper => 1,
        ProblemKind::FixedPolicy => 2,
    };
    w.write_all(&[kind])?;
    let n_slices = field.slices.len() as u32;
    let n_nodes = field.slices.first().map_or(0, |s| s.len()) as u32;
    let d = if field.z_slices.is_empty() || n_nodes == 0 {
        0u32
    } else {
        (field.z_slices[0].len() / n_nodes as usize) as u32
    };
    w.write_all(&n_slices.to_le_bytes())?;
    w.write_all(&n_nodes.to_le_bytes())?;
    w.write_all(&d.to_le_bytes())?;
    for slice in &field.slices {
        for v in slice {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    for slice in &field.z_slices {
        for v in slice {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a cache back; returns the stored hash and the field.
pub fn read_field_cache(path: &Path) -> Result<(String, ValueField)> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(LabError::Config(format!(
            "not a field cache: bad magic in {}",
            path.display()
        )));
    }
    let mut hash_bytes = [0u8; 16];
    file.read_exact(&mut hash_bytes)?;
    let hash = String::from_utf8_lossy(&hash_bytes)
        .trim_end_matches('\0')
        .to_string();
    let mut kind = [0u8; 1];
    file.read_exact(&mut kind)?;
    let mut u32buf = [0u8; 4];
    file.read_exact(&mut u32buf)?;
    let n_slices = u32::from_le_bytes(u32buf) as usize;
    file.read_exact(&mut u32buf)?;
    let n_nodes = u32::from_le_bytes(u32buf) as usize;
    file.read_exact(&mut u32buf)?;
    let d = u32::from_le_bytes(u32buf) as usize;

    let mut read_slice = |len: usize| -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; len * 8];
        file.read_exact(&mut bytes)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let mut slices = Vec::with_capacity(n_slices);
    for _ in 0..n_slices {
        slices.push(read_slice(n_nodes)?);
    }
    let n_z = n_slices.saturating_sub(1);
    let mut z_slices = Vec::with_capacity(n_z);
    for _ in 0..n_z {
        z_slices.push(read_slice(n_nodes * d)?);
    }
    let problem = match kind[0] {
        0 => ProblemKind::Lower,
        1 => ProblemKind::Upper,
        _ => ProblemKind::FixedPolicy,
    };
    Ok((
        hash,
        ValueField {
            problem,
            slices,
            z_slices,
            z_fallback_nodes: 0,
            sigma_degenerate: false,
        },
    ))
}

/// Record of one CLI run: enough to reproduce the outputs byte-for-byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub subcommand: String,
    pub parameters: BTreeMap<String, String>,
    pub artifacts: Vec<String>,
    pub wall_clock_seconds: f64,
    pub solver_version: String,
}

impl RunManifest {
    pub fn new(config_hash: String, subcommand: &str) -> Self {
        RunManifest {
            config_hash,
            subcommand: subcommand.to_string(),
            parameters: BTreeMap::new(),
            artifacts: Vec::new(),
            wall_clock_seconds: 0.0,
            solver_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn artifact(&mut self, path: &Path) -> &mut Self {
        self.artifacts.push(path.display().to_string());
        self
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| LabError::Config(format!("manifest parse failed: {e}")))
    }
}
