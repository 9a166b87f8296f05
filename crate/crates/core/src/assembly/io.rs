use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AssemblyError, AssemblyParams, LinearSystem, Result};
use crate::sparse::{mm_read, mm_write};

/// Side-car description written next to an exported matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMetadata {
    pub params: AssemblyParams,
    pub cloud_hash: String,
    pub n: usize,
    pub nnz: usize,
    pub mean_interior_nnz: f64,
    pub mean_pivots: f64,
    /// Point classification, needed to recover Dirichlet rows on import.
    pub kinds: Vec<crate::geometry::PointKind>,
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

impl LinearSystem {
    pub fn metadata(&self) -> SystemMetadata {
        SystemMetadata {
            params: self.params,
            cloud_hash: self.cloud_hash.clone(),
            n: self.n(),
            nnz: self.a.nnz(),
            mean_interior_nnz: self.mean_interior_nnz(),
            mean_pivots: self.stats.mean_pivots(),
            kinds: self.kinds.clone(),
        }
    }

    /// Writes `<prefix>.mtx`, `<prefix>.rhs` (one value per line) and
    /// `<prefix>.json`.
    pub fn export(&self, prefix: impl AsRef<Path>) -> Result<()> {
        let prefix = prefix.as_ref();
        mm_write(with_ext(prefix, ".mtx"), &self.a)?;
        let mut w = BufWriter::new(File::create(with_ext(prefix, ".rhs"))?);
        for v in &self.rhs {
            writeln!(w, "{v:.16e}")?;
        }
        w.flush()?;
        let meta = File::create(with_ext(prefix, ".json"))?;
        serde_json::to_writer_pretty(BufWriter::new(meta), &self.metadata())?;
        Ok(())
    }

    /// Reads back what [`LinearSystem::export`] wrote. Per-row statistics
    /// are not preserved.
    pub fn import(prefix: impl AsRef<Path>) -> Result<Self> {
        let prefix = prefix.as_ref();
        let a = mm_read(with_ext(prefix, ".mtx"))?;
        let mut rhs = Vec::new();
        for line in BufReader::new(File::open(with_ext(prefix, ".rhs"))?).lines() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            rhs.push(t.parse::<f64>().map_err(|e| {
                AssemblyError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
            })?);
        }
        let meta: SystemMetadata =
            serde_json::from_reader(BufReader::new(File::open(with_ext(prefix, ".json"))?))?;
        if rhs.len() != a.n_rows() || meta.kinds.len() != a.n_rows() {
            return Err(AssemblyError::Io(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "matrix, rhs and metadata sizes disagree",
            )));
        }
        Ok(Self {
            a,
            rhs,
            kinds: meta.kinds,
            params: meta.params,
            cloud_hash: meta.cloud_hash,
            stats: Default::default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::geometry::{BcKind, BoxSpec, DomainSpec, Fill};

    #[test]
    fn export_round_trip() {
        let c = DomainSpec::Box(BoxSpec::unit(2, Fill::Spacing { h: 0.25, jitter: 0.0 }, BcKind::Dirichlet))
            .generate()
            .unwrap()
            .with_boundary_data(|p| p[0] - p[1] / 3.0, |_, _| 0.0);
        let sys = assemble(&c, &AssemblyParams::l1_radius(0.4), |p| p[0].sin()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("sys");
        sys.export(&prefix).unwrap();
        let back = LinearSystem::import(&prefix).unwrap();
        assert_eq!(back.a, sys.a);
        assert_eq!(back.rhs, sys.rhs);
        assert_eq!(back.kinds, sys.kinds);
        assert_eq!(back.cloud_hash, c.content_hash());
    }
}
