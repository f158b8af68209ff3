//! Small shared helpers: seeded stream derivation, a dense linear solve for
//! the 6x6 systems in the Newmark integrator, and little-endian file I/O.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// splitmix64 finalizer; used to combine seeds and counters into
/// statistically independent stream seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Combines a base seed with labeled counters into one stream seed.
pub fn stream_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut h = mix64(seed);
    for &t in tags {
        h = mix64(h ^ t);
    }
    h
}

pub fn seeded_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, tags))
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// Intended for the small (<= 6x6) systems in the time integrators.
pub fn solve_dense(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "solve_dense: {}x{} matrix with rhs {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[[r, col]].abs() > m[[piv, col]].abs() {
                piv = r;
            }
        }
        if m[[piv, col]].abs() < 1e-300 {
            return Err(Error::InvalidParam("singular matrix in solve_dense".into()));
        }
        if piv != col {
            for c in 0..n {
                m.swap([col, c], [piv, c]);
            }
            x.swap(col, piv);
        }
        let d = m[[col, col]];
        for r in col + 1..n {
            let f = m[[r, col]] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[[r, c]] -= f * m[[col, c]];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for c in col + 1..n {
            s -= m[[col, c]] * x[c];
        }
        x[col] = s / m[[col, col]];
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Little-endian binary I/O
// ---------------------------------------------------------------------------

pub struct LeWriter<W: Write> {
    inner: W,
}

impl<W: Write> LeWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn magic(&mut self, m: &[u8; 4]) -> Result<()> {
        self.inner.write_all(m)?;
        Ok(())
    }

    pub fn u8(&mut self, v: u8) -> Result<()> {
        self.inner.write_all(&[v])?;
        Ok(())
    }

    pub fn u16(&mut self, v: u16) -> Result<()> {
        self.inner.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        self.inner.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.inner.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn f64(&mut self, v: f64) -> Result<()> {
        self.inner.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn f64_slice(&mut self, vs: &[f64]) -> Result<()> {
        for &v in vs {
            self.f64(v)?;
        }
        Ok(())
    }

    pub fn bytes(&mut self, bs: &[u8]) -> Result<()> {
        self.inner.write_all(bs)?;
        Ok(())
    }
}

pub struct LeReader<R: Read> {
    inner: R,
}

impl<R: Read> LeReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner }
    }

    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        self.inner
            .read_exact(buf)
            .map_err(|_| Error::Truncated(format!("while reading {what}")))
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let mut found = [0u8; 4];
        self.fill(&mut found, "magic bytes")?;
        if &found != expected {
            return Err(Error::BadMagic {
                expected: *expected,
                found,
            });
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.fill(&mut b, "u8")?;
        Ok(b[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        let mut b = [0u8; 2];
        self.fill(&mut b, "u16")?;
        Ok(u16::from_le_bytes(b))
    }

    /// Reads a u16, returning None at a clean end of input.
    pub fn maybe_u16(&mut self) -> Result<Option<u16>> {
        let mut b = [0u8; 2];
        match self.inner.read_exact(&mut b) {
            Ok(()) => Ok(Some(u16::from_le_bytes(b))),
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Ok(None),
            Err(_) => Err(Error::Truncated("while reading u16".into())),
        }
    }

    pub fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b, "u32")?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.fill(&mut b, "u64")?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.fill(&mut b, "f64")?;
        Ok(f64::from_le_bytes(b))
    }

    pub fn f64_vec(&mut self, len: usize, what: &str) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(
                self.f64()
                    .map_err(|_| Error::Truncated(format!("while reading {what}")))?,
            );
        }
        Ok(out)
    }

    pub fn bytes(&mut self, len: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; len];
        self.fill(&mut buf, what)?;
        Ok(buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solve_dense_recovers_solution() {
        let a = array![[4.0, 1.0, 0.0], [1.0, 3.0, -1.0], [0.0, -1.0, 2.0]];
        let x_true = array![1.0, -2.0, 0.5];
        let b = a.dot(&x_true);
        let x = solve_dense(&a, &b).unwrap();
        for i in 0..3 {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn stream_seed_distinguishes_tags() {
        assert_ne!(stream_seed(7, &[0, 1]), stream_seed(7, &[1, 0]));
        assert_eq!(stream_seed(7, &[3]), stream_seed(7, &[3]));
    }
}
