//! Binary dataset/statistics files and the per-sample CSV export.
//!
//! Dataset file ("NDS1", little-endian): magic, version u32, case_id u32,
//! split u32, N u64, n u64, N_p u32, seed u64, X row-major f64[N*n],
//! Y row-major f64[N*n]. Stats file ("NST1"): magic, n u64, mean f64[n],
//! var f64[n], epsilon f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::{Dataset, DatasetMeta, Dataspace, NormStats, Split};
use crate::dynamics::HarmonicLoad;
use crate::error::{Error, Result};
use crate::util::{LeReader, LeWriter};

const DATASET_MAGIC: &[u8; 4] = b"NDS1";
const STATS_MAGIC: &[u8; 4] = b"NST1";
const DATASET_VERSION: u32 = 1;

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = LeWriter::new(BufWriter::new(File::create(path)?));
    w.magic(DATASET_MAGIC)?;
    w.u32(DATASET_VERSION)?;
    w.u32(ds.meta.case_number)?;
    w.u32(ds.meta.split.tag())?;
    w.u64(ds.n_samples() as u64)?;
    w.u64(ds.n_points() as u64)?;
    w.u32(ds.meta.n_terms as u32)?;
    w.u64(ds.meta.seed)?;
    w.f64_slice(ds.x.as_slice().expect("row-major X"))?;
    w.f64_slice(ds.y.as_slice().expect("row-major Y"))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut r = LeReader::new(BufReader::new(File::open(path)?));
    r.magic(DATASET_MAGIC)?;
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let case_number = r.u32()?;
    let split = Split::from_tag(r.u32()?)?;
    let n_samples = r.u64()? as usize;
    let n_points = r.u64()? as usize;
    let n_terms = r.u32()? as usize;
    let seed = r.u64()?;
    let len = n_samples
        .checked_mul(n_points)
        .ok_or_else(|| Error::Truncated("dataset dimensions overflow".into()))?;
    let x = r.f64_vec(len, "X payload")?;
    let y = r.f64_vec(len, "Y payload")?;
    let x = Array2::from_shape_vec((n_samples, n_points), x)
        .map_err(|e| Error::Truncated(format!("X shape: {e}")))?;
    let y = Array2::from_shape_vec((n_samples, n_points), y)
        .map_err(|e| Error::Truncated(format!("Y shape: {e}")))?;
    Ok(Dataset {
        x,
        y,
        meta: DatasetMeta {
            case_number,
            split,
            seed,
            n_terms,
        },
    })
}

pub fn write_norm_stats(path: &Path, stats: &NormStats) -> Result<()> {
    let mut w = LeWriter::new(BufWriter::new(File::create(path)?));
    w.magic(STATS_MAGIC)?;
    w.u64(stats.len() as u64)?;
    w.f64_slice(&stats.mean)?;
    w.f64_slice(&stats.var)?;
    w.f64(stats.epsilon)?;
    Ok(())
}

pub fn read_norm_stats(path: &Path) -> Result<NormStats> {
    let mut r = LeReader::new(BufReader::new(File::open(path)?));
    r.magic(STATS_MAGIC)?;
    let n = r.u64()? as usize;
    let mean = r.f64_vec(n, "stats mean")?;
    let var = r.f64_vec(n, "stats variance")?;
    let epsilon = r.f64()?;
    Ok(NormStats { mean, var, epsilon })
}

/// CSV trace of one sample: columns t, p, u, a, with both response kinds
/// computed by the dataspace's exact solver.
pub fn write_sample_csv(path: &Path, space: &Dataspace, load: &HarmonicLoad) -> Result<()> {
    let response = super::dataset::solve_response(space, load)?;
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "t,p,u,a")?;
    for k in 0..space.grid.n_points() {
        let t = k as f64 * space.grid.obs_step;
        writeln!(
            f,
            "{},{},{},{}",
            t,
            load.eval(t),
            response.displacement[k],
            response.acceleration[k]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{generate_dataset, CaseId, ResponseKind};

    fn small_dataset() -> Dataset {
        let space = Dataspace::standard(CaseId::Case1, ResponseKind::Displacement, 0.0).unwrap();
        generate_dataset(&space, Split::Train, 42, Some(3)).unwrap()
    }

    #[test]
    fn dataset_round_trip_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.nds");
        let ds = small_dataset();
        write_dataset(&path, &ds).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn wrong_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.nds");
        std::fs::write(&path, b"XXXXrest-of-file").unwrap();
        match read_dataset(&path) {
            Err(Error::BadMagic { .. }) => {}
            other => panic!("expected BadMagic, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.nds");
        let ds = small_dataset();
        write_dataset(&path, &ds).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 16]).unwrap();
        match read_dataset(&path) {
            Err(Error::Truncated(_)) => {}
            other => panic!("expected Truncated, got {other:?}"),
        }
    }

    #[test]
    fn stats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.nst");
        let stats = NormStats {
            mean: vec![1.0, -2.0],
            var: vec![0.5, 0.0],
            epsilon: 1e-8,
        };
        write_norm_stats(&path, &stats).unwrap();
        assert_eq!(read_norm_stats(&path).unwrap(), stats);
    }
}
