//! Output directory with hashed file inventory. All numeric output is
//! written with 17 significant digits so byte-identical reruns are the
//! expected behavior, not an accident.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::manifest::FileEntry;
use crate::CliResult;

pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

/// `{:.16e}`: one leading digit plus sixteen fractional digits.
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes)?;
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: format!("{:x}", hasher.finalize()),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn into_files(self) -> Vec<FileEntry> {
        self.files
    }
}

/// CSV of a potential along the positive x axis (y = z = 0).
pub fn potential_axis_csv(phi: &borneq_core::GridFunction) -> String {
    let grid = phi.grid();
    let m = grid.points_per_axis();
    let mid = m / 2;
    let mut out = String::from("x,phi\n");
    for i in mid..m {
        let x = grid.axis_coord(i);
        let v = phi.values()[grid.node_index(i, mid, mid)];
        out.push_str(&format!("{},{}\n", fmt_full(x), fmt_full(v)));
    }
    out
}

/// CSV of a radial profile: r, displacement, slope, potential.
pub fn radial_profile_csv(profile: &borneq_core::radial::RadialProfile) -> String {
    let mut out = String::from("r,displacement,slope,phi\n");
    for j in 0..profile.radii.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_full(profile.radii[j]),
            fmt_full(profile.displacement[j]),
            fmt_full(profile.slope[j]),
            fmt_full(profile.potential[j]),
        ));
    }
    out
}

/// CSV rows of per-point boundary densities (x, y, z, density).
pub fn density_csv(mesh: &borneq_core::BoundaryMesh, densities: &[f64]) -> String {
    let mut out = String::from("x,y,z,density\n");
    for (p, d) in mesh.points.iter().zip(densities.iter()) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_full(p[0]),
            fmt_full(p[1]),
            fmt_full(p[2]),
            fmt_full(*d)
        ));
    }
    out
}
