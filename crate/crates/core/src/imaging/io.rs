//! File formats: a JSON header plus raw little-endian arrays in sibling files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BoxelKind, ComboGrid, NormalStatus, PhaseImage};
use crate::error::{Error, Result};
use crate::tensor::Vec3;

pub const ORDER: &str = "C, k fastest";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageHeader {
    pub dims: [usize; 3],
    pub lengths: [f64; 3],
    pub dtype: String,
    pub order: String,
    pub data: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub dims: [usize; 3],
    pub factors: [usize; 3],
    pub lengths: [f64; 3],
    pub order: String,
    pub composite_count: usize,
    pub inclusion_fraction: f64,
    pub kind: String,
    pub c_plus: String,
    pub normal: String,
    /// Boxels whose normal came from a fallback.
    #[serde(default)]
    pub flagged: Vec<(usize, NormalStatus)>,
}

fn sibling(header: &Path, suffix: &str) -> PathBuf {
    let stem = header.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    header.with_file_name(format!("{stem}{suffix}"))
}

fn file_name(p: &Path) -> String {
    p.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string()
}

fn read_file(p: &Path) -> Result<Vec<u8>> {
    if !p.exists() {
        return Err(Error::UpstreamArtifactMissing(p.to_path_buf()));
    }
    Ok(fs::read(p)?)
}

pub fn write_f64s(p: &Path, v: impl IntoIterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = v.into_iter().flat_map(f64::to_le_bytes).collect();
    fs::write(p, bytes)?;
    Ok(())
}

pub fn read_f64s(p: &Path) -> Result<Vec<f64>> {
    let b = read_file(p)?;
    if b.len() % 8 != 0 {
        return Err(Error::Format(format!("{} is not a whole number of f64 values", p.display())));
    }
    Ok(b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Writes `header` (JSON) and the voxel bytes to `<stem>.raw` next to it.
pub fn write_phase_image(img: &PhaseImage, header: &Path) -> Result<()> {
    let raw = sibling(header, ".raw");
    let h = ImageHeader { dims: img.dims(), lengths: img.lengths(), dtype: "u8".into(), order: ORDER.into(), data: file_name(&raw) };
    fs::write(header, serde_json::to_string_pretty(&h)?)?;
    fs::write(raw, img.data())?;
    Ok(())
}

pub fn read_phase_image(header: &Path) -> Result<PhaseImage> {
    let h: ImageHeader = serde_json::from_slice(&read_file(header)?)?;
    if h.dtype != "u8" || h.order != ORDER {
        return Err(Error::Format(format!("unsupported dtype/order {}/{}", h.dtype, h.order)));
    }
    let data = read_file(&header.with_file_name(&h.data))?;
    PhaseImage::new(h.dims, h.lengths, data)
}

pub fn write_combo_grid(g: &ComboGrid, header: &Path) -> Result<()> {
    let kind = sibling(header, ".kind.raw");
    let cplus = sibling(header, ".cplus.raw");
    let normal = sibling(header, ".normal.raw");
    let flagged = (0..g.len())
        .filter(|&b| matches!(g.status[b], NormalStatus::DegenerateBarycenters | NormalStatus::TooFewInterfaceVoxels))
        .map(|b| (b, g.status[b]))
        .collect();
    let h = GridHeader {
        dims: g.dims,
        factors: g.factors,
        lengths: g.lengths,
        order: ORDER.into(),
        composite_count: g.composite_count(),
        inclusion_fraction: g.inclusion_fraction(),
        kind: file_name(&kind),
        c_plus: file_name(&cplus),
        normal: file_name(&normal),
        flagged,
    };
    fs::write(header, serde_json::to_string_pretty(&h)?)?;
    fs::write(kind, g.kinds.iter().map(|&k| k as u8).collect::<Vec<u8>>())?;
    write_f64s(&cplus, g.c_plus.iter().copied())?;
    write_f64s(&normal, g.normals.iter().flat_map(|n| [n.x, n.y, n.z]))?;
    Ok(())
}

pub fn read_combo_grid(header: &Path) -> Result<ComboGrid> {
    let h: GridHeader = serde_json::from_slice(&read_file(header)?)?;
    let nb: usize = h.dims.iter().product();
    let kinds = read_file(&header.with_file_name(&h.kind))?.into_iter().map(BoxelKind::from_u8).collect::<Result<Vec<_>>>()?;
    let c_plus = read_f64s(&header.with_file_name(&h.c_plus))?;
    let nflat = read_f64s(&header.with_file_name(&h.normal))?;
    if kinds.len() != nb || c_plus.len() != nb || nflat.len() != 3 * nb {
        return Err(Error::Format("boxel array lengths do not match the header".into()));
    }
    let vol = h.factors.iter().product::<usize>() as f64;
    let counts = c_plus.iter().map(|&c| (c * vol).round() as u32).collect();
    let normals: Vec<Vec3> = nflat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
    let mut status: Vec<NormalStatus> =
        normals.iter().map(|n| if n.norm() > 0.0 { NormalStatus::Ok } else { NormalStatus::Unset }).collect();
    for (b, s) in h.flagged {
        if b < nb {
            status[b] = s;
        }
    }
    Ok(ComboGrid { dims: h.dims, factors: h.factors, lengths: h.lengths, kinds, counts, c_plus, normals, status })
}
