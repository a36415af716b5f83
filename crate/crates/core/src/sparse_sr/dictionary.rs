use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::features::FEATURE_OP_ID;
use super::SparseError;

pub const DICTIONARY_MAGIC: &[u8; 8] = b"WSRDICT\0";
pub const DICTIONARY_VERSION: u32 = 1;

/// Dense column-major matrix; columns are dictionary atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, SparseError> {
        if data.len() != rows * cols {
            return Err(SparseError::Shape(format!("{} values for {rows}x{cols}", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self, SparseError> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            if c.len() != rows {
                return Err(SparseError::Shape(format!("column of length {} for {rows} rows", c.len())));
            }
            data.extend_from_slice(c);
        }
        Ok(Self { rows, cols: columns.len(), data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn col(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    /// `A^T v`.
    pub fn t_mul(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        (0..self.cols).map(|c| dot(self.col(c), v)).collect()
    }

    /// `A^T A`, row-major (symmetric anyway).
    pub fn gram(&self) -> Vec<f64> {
        let k = self.cols;
        let mut g = vec![0.0; k * k];
        for i in 0..k {
            for j in i..k {
                let v = dot(self.col(i), self.col(j));
                g[i * k + j] = v;
                g[j * k + i] = v;
            }
        }
        g
    }

    fn remove_cols(&mut self, keep: &[bool]) {
        let rows = self.rows;
        let mut data = Vec::with_capacity(self.data.len());
        for (c, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
            data.extend_from_slice(&self.data[c * rows..(c + 1) * rows]);
        }
        self.cols = data.len() / rows.max(1);
        self.data = data;
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// What the HR half of a dictionary models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HrTarget {
    /// `HR - ULR` over the patch; synthesis adds the ULR patch back.
    #[default]
    Residual,
    /// Mean-removed HR patch; synthesis adds the ULR patch mean.
    MeanRemoved,
}

impl HrTarget {
    fn code(self) -> u32 {
        match self {
            HrTarget::Residual => 0,
            HrTarget::MeanRemoved => 1,
        }
    }

    fn from_code(c: u32) -> Result<Self, SparseError> {
        match c {
            0 => Ok(HrTarget::Residual),
            1 => Ok(HrTarget::MeanRemoved),
            other => Err(SparseError::Format(format!("unknown HR target {other}"))),
        }
    }
}

impl std::str::FromStr for HrTarget {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "residual" => Ok(HrTarget::Residual),
            "mean" => Ok(HrTarget::MeanRemoved),
            other => Err(format!("unknown HR target '{other}' (expected residual|mean)")),
        }
    }
}

/// Coupled HR/LR dictionaries sharing one code space.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryPair {
    /// `n_h x K`, `n_h = patch_size^2`.
    pub dh: Mat,
    /// `n_l x K`, `n_l = 4 patch_size^2`.
    pub dl: Mat,
    pub patch_size: usize,
    pub upscale: u32,
    pub feature_op_id: u32,
    pub target: HrTarget,
}

impl DictionaryPair {
    pub fn new(dh: Mat, dl: Mat, patch_size: usize, upscale: u32, target: HrTarget) -> Result<Self, SparseError> {
        let pair = Self { dh, dl, patch_size, upscale, feature_op_id: FEATURE_OP_ID, target };
        pair.check_shapes()?;
        Ok(pair)
    }

    fn check_shapes(&self) -> Result<(), SparseError> {
        let p2 = self.patch_size * self.patch_size;
        if self.dh.cols != self.dl.cols {
            return Err(SparseError::Shape(format!("K differs: {} vs {}", self.dh.cols, self.dl.cols)));
        }
        if self.dh.rows != p2 || self.dl.rows != 4 * p2 {
            return Err(SparseError::Shape(format!(
                "patch {} needs n_h = {p2}, n_l = {}; got {} and {}",
                self.patch_size,
                4 * p2,
                self.dh.rows,
                self.dl.rows
            )));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.dl.cols
    }

    pub fn n_h(&self) -> usize {
        self.dh.rows
    }

    pub fn n_l(&self) -> usize {
        self.dl.rows
    }

    /// Scales every `Dl` column to unit norm and its `Dh` partner by the same
    /// factor. Zero `Dl` columns are dropped from both halves.
    pub fn normalize(mut self) -> Self {
        let mut keep = vec![true; self.k()];
        for (c, kc) in keep.iter_mut().enumerate() {
            let n = dot(self.dl.col(c), self.dl.col(c)).sqrt();
            if n == 0.0 || !n.is_finite() {
                *kc = false;
                continue;
            }
            self.dl.col_mut(c).iter_mut().for_each(|v| *v /= n);
            self.dh.col_mut(c).iter_mut().for_each(|v| *v /= n);
        }
        let dropped = keep.iter().filter(|&&k| !k).count();
        if dropped > 0 {
            log::warn!("dropping {dropped} zero dictionary atoms");
            self.dl.remove_cols(&keep);
            self.dh.remove_cols(&keep);
        }
        self
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), SparseError> {
        w.write_all(DICTIONARY_MAGIC)?;
        for v in [
            DICTIONARY_VERSION,
            self.k() as u32,
            self.n_h() as u32,
            self.n_l() as u32,
            self.patch_size as u32,
            self.upscale,
            self.feature_op_id,
            self.target.code(),
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in self.dh.data.iter().chain(&self.dl.data) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, SparseError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DICTIONARY_MAGIC {
            return Err(SparseError::Format("bad magic".into()));
        }
        let mut header = [0u32; 8];
        for h in header.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *h = u32::from_le_bytes(b);
        }
        let [version, k, n_h, n_l, patch_size, upscale, feature_op_id, target] = header;
        if version != DICTIONARY_VERSION {
            return Err(SparseError::Format(format!("unsupported version {version}")));
        }
        if feature_op_id != FEATURE_OP_ID {
            return Err(SparseError::Format(format!(
                "feature extractor {feature_op_id} is not the current one ({FEATURE_OP_ID})"
            )));
        }
        let (k, n_h, n_l) = (k as usize, n_h as usize, n_l as usize);
        let mut read_mat = |rows: usize| -> Result<Mat, SparseError> {
            let mut bytes = vec![0u8; rows * k * 8];
            r.read_exact(&mut bytes)?;
            let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            Mat::from_col_major(rows, k, data)
        };
        let dh = read_mat(n_h)?;
        let dl = read_mat(n_l)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(SparseError::Format("trailing bytes".into()));
        }
        let pair = Self {
            dh,
            dl,
            patch_size: patch_size as usize,
            upscale,
            feature_op_id,
            target: HrTarget::from_code(target)?,
        };
        pair.check_shapes()?;
        Ok(pair)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SparseError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SparseError> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}
