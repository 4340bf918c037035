//! Uniform Cartesian grids and multi-mode wavefunctions.
//!
//! A mode lives on a symmetric 1-D grid of `n` points spanning `[-extent,
//! extent)` with spacing `dq = 2 extent / n`; the right endpoint is excluded
//! so the grid is exactly periodic for FFT work. A state over `M` modes is a
//! dense rank-`M` array of complex amplitudes in row-major mode order, with
//! inner products taken as Riemann sums weighted by the volume element.
//!
//! All reductions over amplitudes run in a fixed chunk order, so results are
//! bit-identical regardless of thread count.

use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::states::EigenTag;

/// One mode's coordinate grid: `n` points `-extent + i*dq`, `dq = 2*extent/n`.
#[derive(Clone, Copy, Debug)]
pub struct Grid1D {
    n: usize,
    extent: f64,
}

impl Grid1D {
    /// A power-of-two grid (`n >= 8`) on `[-extent, extent)`.
    pub fn new(n: usize, extent: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::BadGridSize(n));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::BadExtent(extent));
        }
        Ok(Grid1D { n, extent })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn dq(&self) -> f64 {
        2.0 * self.extent / self.n as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.dq()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Angular wavenumber of FFT bin `j` in the standard layout
    /// (`0..n/2` nonnegative, then negative frequencies).
    pub fn wavenumber(&self, j: usize) -> f64 {
        let m = if j <= self.n / 2 { j as i64 } else { j as i64 - self.n as i64 };
        std::f64::consts::PI * m as f64 / self.extent
    }
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.extent.to_bits() == other.extent.to_bits()
    }
}

/// Fixed chunk size for deterministic parallel reductions.
const SUM_CHUNK: usize = 8192;

/// Sums complex values chunk-by-chunk in index order. The chunk boundaries
/// are independent of thread count, so the result is reproducible.
pub fn det_sum(values: &[C64]) -> C64 {
    values
        .par_chunks(SUM_CHUNK)
        .map(|chunk| chunk.iter().fold(C64::new(0.0, 0.0), |acc, v| acc + v))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(C64::new(0.0, 0.0), |acc, v| acc + v)
}

/// Deterministic chunked sum of a mapped slice pair, used for inner products.
fn det_sum_zip(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.par_chunks(SUM_CHUNK)
        .zip(b.par_chunks(SUM_CHUNK))
        .map(|(ca, cb)| {
            ca.iter()
                .zip(cb)
                .fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(C64::new(0.0, 0.0), |acc, v| acc + v)
}

/// A multi-mode wavefunction sampled on the tensor grid of its modes.
#[derive(Clone, Debug)]
pub struct GridState {
    grids: Vec<Grid1D>,
    amps: ArrayD<C64>,
    normalized: bool,
    /// Set when the amplitudes come from a closed-form eigenstate; transforms
    /// that preserve the family update it, everything else clears it.
    pub(crate) eigen_tag: Option<EigenTag>,
}

impl GridState {
    /// Wraps raw amplitudes, validating shape and finiteness.
    pub fn new(grids: Vec<Grid1D>, amps: ArrayD<C64>) -> Result<Self> {
        if grids.is_empty() || grids.len() > 4 {
            return Err(Error::BadModeCount(grids.len()));
        }
        let shape: Vec<usize> = grids.iter().map(|g| g.n()).collect();
        if amps.shape() != shape.as_slice() {
            return Err(Error::GridMismatch("amplitude shape does not match grids"));
        }
        if amps.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFiniteAmplitude);
        }
        Ok(GridState { grids, amps, normalized: false, eigen_tag: None })
    }

    /// Evaluates `f` at every grid point in parallel (row-major order).
    pub fn from_fn<F>(grids: Vec<Grid1D>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> C64 + Sync,
    {
        if grids.is_empty() || grids.len() > 4 {
            return Err(Error::BadModeCount(grids.len()));
        }
        let shape: Vec<usize> = grids.iter().map(|g| g.n()).collect();
        let len: usize = shape.iter().product();
        let points: Vec<Vec<f64>> = grids.iter().map(|g| g.points()).collect();
        let data: Vec<C64> = (0..len)
            .into_par_iter()
            .map(|flat| {
                let mut rem = flat;
                let mut coords = [0.0f64; 4];
                for (ax, &dim) in shape.iter().enumerate().rev() {
                    coords[ax] = points[ax][rem % dim];
                    rem /= dim;
                }
                f(&coords[..shape.len()])
            })
            .collect();
        let amps = ArrayD::from_shape_vec(IxDyn(&shape), data)
            .expect("shape/product mismatch is impossible");
        GridState::new(grids, amps)
    }

    pub fn modes(&self) -> usize {
        self.grids.len()
    }

    pub fn grid(&self, mode: usize) -> &Grid1D {
        &self.grids[mode]
    }

    pub fn grids(&self) -> &[Grid1D] {
        &self.grids
    }

    pub fn amps(&self) -> &ArrayD<C64> {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut ArrayD<C64> {
        self.normalized = false;
        self.eigen_tag = None;
        &mut self.amps
    }

    /// Product of mode spacings; the Riemann weight of one lattice site.
    pub fn volume_element(&self) -> f64 {
        self.grids.iter().map(|g| g.dq()).product()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn eigen_tag(&self) -> Option<&EigenTag> {
        self.eigen_tag.as_ref()
    }

    pub(crate) fn with_tag(mut self, tag: EigenTag) -> Self {
        self.eigen_tag = Some(tag);
        self
    }

    fn check_same_grids(&self, other: &GridState) -> Result<()> {
        if self.grids != other.grids {
            return Err(Error::GridMismatch("states live on different grids"));
        }
        Ok(())
    }

    /// Riemann-sum inner product `<self|other>` (conjugate-linear on the left).
    pub fn inner_product(&self, other: &GridState) -> Result<C64> {
        self.check_same_grids(other)?;
        let a = self.amps.as_slice().expect("states are standard layout");
        let b = other.amps.as_slice().expect("states are standard layout");
        Ok(det_sum_zip(a, b) * self.volume_element())
    }

    pub fn norm_squared(&self) -> f64 {
        let a = self.amps.as_slice().expect("states are standard layout");
        let s: f64 = a
            .par_chunks(SUM_CHUNK)
            .map(|chunk| chunk.iter().fold(0.0, |acc, v| acc + v.norm_sqr()))
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        s * self.volume_element()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Rescales to unit norm. Idempotent up to rounding; zero states are
    /// rejected rather than producing NaNs.
    pub fn normalize(&self) -> Result<GridState> {
        let n = self.norm();
        if !(n > 1e-300) || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let scale = 1.0 / n;
        let mut out = self.clone();
        out.amps.mapv_inplace(|v| v * scale);
        out.normalized = true;
        Ok(out)
    }

    /// Pointwise linear combination `self + c * other` on matching grids.
    pub fn add_scaled(&self, c: C64, other: &GridState) -> Result<GridState> {
        self.check_same_grids(other)?;
        let mut out = self.clone();
        out.normalized = false;
        out.eigen_tag = None;
        ndarray::Zip::from(&mut out.amps)
            .and(&other.amps)
            .for_each(|dst, &src| *dst += c * src);
        Ok(out)
    }

    pub fn scaled(&self, c: C64) -> GridState {
        let mut out = self.clone();
        out.normalized = false;
        out.eigen_tag = None;
        out.amps.mapv_inplace(|v| v * c);
        out
    }

    /// Multiplies amplitudes by the coordinate of `mode` (the position
    /// operator on that mode).
    pub fn multiply_coordinate(&self, mode: usize) -> Result<GridState> {
        if mode >= self.modes() {
            return Err(Error::BadModeIndex { index: mode, modes: self.modes() });
        }
        let points = self.grids[mode].points();
        let mut out = self.clone();
        out.normalized = false;
        out.eigen_tag = None;
        for mut lane in out.amps.lanes_mut(Axis(mode)) {
            for (v, &q) in lane.iter_mut().zip(&points) {
                *v *= q;
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Binary container and CSV export.
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"CVG1";
const FORMAT_VERSION: u32 = 1;

impl GridState {
    /// Writes the state in the binary container format: a fixed header
    /// (magic, version, mode count, normalization flag, per-mode `n` and
    /// extent) followed by interleaved re/im `f64` amplitudes, all
    /// little-endian, row-major in mode order.
    pub fn write_binary<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.grids.len() as u32).to_le_bytes())?;
        w.write_all(&[self.normalized as u8])?;
        for g in &self.grids {
            w.write_all(&(g.n() as u64).to_le_bytes())?;
            w.write_all(&g.extent().to_le_bytes())?;
        }
        let amps = self.amps.as_slice().expect("states are standard layout");
        let mut buf = Vec::with_capacity(16 * 4096);
        for chunk in amps.chunks(4096) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.re.to_le_bytes());
                buf.extend_from_slice(&v.im.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_binary<R: std::io::Read>(r: &mut R) -> Result<GridState> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::BadStateFile("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != FORMAT_VERSION {
            return Err(Error::BadStateFile(format!("unsupported version {version}")));
        }
        r.read_exact(&mut u32buf)?;
        let modes = u32::from_le_bytes(u32buf) as usize;
        if modes == 0 || modes > 4 {
            return Err(Error::BadStateFile(format!("mode count {modes} out of range")));
        }
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let normalized = match flag[0] {
            0 => false,
            1 => true,
            other => return Err(Error::BadStateFile(format!("bad norm flag {other}"))),
        };
        let mut grids = Vec::with_capacity(modes);
        let mut u64buf = [0u8; 8];
        for _ in 0..modes {
            r.read_exact(&mut u64buf)?;
            let n = u64::from_le_bytes(u64buf) as usize;
            r.read_exact(&mut u64buf)?;
            let extent = f64::from_le_bytes(u64buf);
            grids.push(Grid1D::new(n, extent)?);
        }
        let len: usize = grids.iter().map(|g| g.n()).product();
        let mut data = vec![C64::new(0.0, 0.0); len];
        let mut buf = vec![0u8; 16 * 4096];
        let mut filled = 0usize;
        while filled < len {
            let take = (len - filled).min(4096);
            let bytes = &mut buf[..16 * take];
            r.read_exact(bytes)?;
            for (k, v) in data[filled..filled + take].iter_mut().enumerate() {
                let off = 16 * k;
                let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
                let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
                *v = C64::new(re, im);
            }
            filled += take;
        }
        let shape: Vec<usize> = grids.iter().map(|g| g.n()).collect();
        let amps = ArrayD::from_shape_vec(IxDyn(&shape), data)
            .map_err(|e| Error::BadStateFile(e.to_string()))?;
        let mut st = GridState::new(grids, amps)?;
        st.normalized = normalized;
        Ok(st)
    }

    pub fn save<P: AsRef<std::path::Path>>(&self, path: P) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(&mut w)
    }

    pub fn load<P: AsRef<std::path::Path>>(path: P) -> Result<GridState> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        GridState::read_binary(&mut r)
    }

    /// Plain-text export: one row per grid point with coordinates and the
    /// complex amplitude, row-major in mode order.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        let m = self.modes();
        for i in 0..m {
            write!(w, "q{},", i + 1)?;
        }
        write!(w, "re,im\r\n")?;
        let shape: Vec<usize> = self.grids.iter().map(|g| g.n()).collect();
        let points: Vec<Vec<f64>> = self.grids.iter().map(|g| g.points()).collect();
        let amps = self.amps.as_slice().expect("states are standard layout");
        let mut idx = vec![0usize; m];
        for v in amps {
            for ax in 0..m {
                write!(w, "{},", points[ax][idx[ax]])?;
            }
            write!(w, "{},{}\r\n", v.re, v.im)?;
            for ax in (0..m).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Ok(())
    }
}
