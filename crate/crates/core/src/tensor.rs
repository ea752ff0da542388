//! Dense complex multilinear algebra for order-3 tensors.
//!
//! Storage is column-major over modes: element `(i1, i2, i3)` lives at
//! `i1 + I1 * (i2 + I2 * i3)`. Unfoldings follow the same convention, so for a
//! Tucker tensor `G x1 A1 x2 A2 x3 A3`:
//!
//! ```text
//! unfold_1 = A1 * unfold_1(G) * (A3 kron A2)^T
//! unfold_2 = A2 * unfold_2(G) * (A3 kron A1)^T
//! unfold_3 = A3 * unfold_3(G) * (A2 kron A1)^T
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
/// Column-major dense complex matrix.
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative singular-value cutoff used by [`pinv`] inside the estimators.
pub const PINV_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<C64>,
}

fn check_mode(mode: usize) -> Result<()> {
    if (1..=3).contains(&mode) {
        Ok(())
    } else {
        Err(Error::argument(format!("tensor mode must be 1, 2 or 3, got {mode}")))
    }
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![C64::new(0.0, 0.0); dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<C64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::argument(format!(
                "tensor of dims {dims:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for i3 in 0..dims[2] {
            for i2 in 0..dims[1] {
                for i1 in 0..dims[0] {
                    data.push(f(i1, i2, i3));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Raw storage, `i1` fastest.
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    fn offset(&self, i1: usize, i2: usize, i3: usize) -> usize {
        i1 + self.dims[0] * (i2 + self.dims[1] * i3)
    }

    #[inline]
    pub fn get(&self, i1: usize, i2: usize, i3: usize) -> C64 {
        self.data[self.offset(i1, i2, i3)]
    }

    #[inline]
    pub fn set(&mut self, i1: usize, i2: usize, i3: usize, value: C64) {
        let k = self.offset(i1, i2, i3);
        self.data[k] = value;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Squared Frobenius distance to another tensor of the same dims.
    pub fn distance_sqr(&self, other: &Tensor3) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::argument(format!(
                "tensor dims differ: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum())
    }

    /// Mode-n unfolding, `mode` in {1, 2, 3}.
    pub fn unfold(&self, mode: usize) -> Result<CMatrix> {
        check_mode(mode)?;
        let [d1, d2, d3] = self.dims;
        Ok(match mode {
            // the storage order already is the mode-1 unfolding
            1 => CMatrix::from_column_slice(d1, d2 * d3, &self.data),
            2 => CMatrix::from_fn(d2, d1 * d3, |i2, j| self.get(j % d1, i2, j / d1)),
            _ => CMatrix::from_column_slice(d1 * d2, d3, &self.data).transpose(),
        })
    }

    /// Inverse of [`Tensor3::unfold`].
    pub fn fold(matrix: &CMatrix, mode: usize, dims: [usize; 3]) -> Result<Self> {
        check_mode(mode)?;
        let [d1, d2, d3] = dims;
        let expected = match mode {
            1 => (d1, d2 * d3),
            2 => (d2, d1 * d3),
            _ => (d3, d1 * d2),
        };
        if matrix.shape() != expected {
            return Err(Error::argument(format!(
                "cannot fold a {}x{} matrix along mode {mode} into dims {dims:?} (expected {}x{})",
                matrix.nrows(),
                matrix.ncols(),
                expected.0,
                expected.1
            )));
        }
        Ok(match mode {
            1 => Self {
                dims,
                data: matrix.as_slice().to_vec(),
            },
            2 => Self::from_fn(dims, |i1, i2, i3| matrix[(i2, i1 + d1 * i3)]),
            _ => Self {
                dims,
                data: matrix.transpose().as_slice().to_vec(),
            },
        })
    }

    /// n-mode product `X x_n M`: replaces dimension `mode` by `M.nrows()`.
    pub fn nmode_product(&self, matrix: &CMatrix, mode: usize) -> Result<Self> {
        check_mode(mode)?;
        let inner = self.dims[mode - 1];
        if matrix.ncols() != inner {
            return Err(Error::argument(format!(
                "mode-{mode} product needs a matrix with {inner} columns, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let mut dims = self.dims;
        dims[mode - 1] = matrix.nrows();
        let product = matrix * self.unfold(mode)?;
        Self::fold(&product, mode, dims)
    }

    /// `G x1 a1 x2 a2 x3 a3`.
    pub fn tucker_product(&self, a1: &CMatrix, a2: &CMatrix, a3: &CMatrix) -> Result<Self> {
        self.nmode_product(a1, 1)?
            .nmode_product(a2, 2)?
            .nmode_product(a3, 3)
    }
}

/// Kronecker product; block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-wise Kronecker product: column `r` is `a_r kron b_r`.
pub fn khatri_rao(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::argument(format!(
            "Khatri-Rao product needs equal column counts, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ra, rb) = (a.nrows(), b.nrows());
    Ok(CMatrix::from_fn(ra * rb, a.ncols(), |i, r| {
        a[(i / rb, r)] * b[(i % rb, r)]
    }))
}

/// Column stacking.
pub fn vec(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &CVector, rows: usize, cols: usize) -> Result<CMatrix> {
    if v.len() != rows * cols {
        return Err(Error::argument(format!(
            "cannot reshape a vector of length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Diagonal-structured core of size `l1 x l2 x (l1*l2)`:
/// entry `(a, b, a + l1*b)` holds `f[a + l1*b]`, every other entry is zero,
/// so that `unfold_3` of the result is `diag(f)`.
pub fn build_core_tensor(f: &CVector, l1: usize, l2: usize) -> Result<Tensor3> {
    if f.len() != l1 * l2 {
        return Err(Error::argument(format!(
            "core vector must have length {}, got {}",
            l1 * l2,
            f.len()
        )));
    }
    let mut core = Tensor3::zeros([l1, l2, l1 * l2]);
    for b in 0..l2 {
        for a in 0..l1 {
            let k = a + l1 * b;
            core.set(a, b, k, f[k]);
        }
    }
    Ok(core)
}

#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: CMatrix,
    /// Non-increasing.
    pub s: Vec<f64>,
    pub v: CMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> CMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.adjoint()
    }
}

/// Thin SVD sorted by decreasing singular value.
///
/// Backed by faer: nalgebra's complex SVD returns inconsistent factors on some
/// exactly rank-deficient inputs.
pub fn svd(a: &CMatrix) -> SvdResult {
    let (rows, cols) = a.shape();
    let k = rows.min(cols);
    if k == 0 {
        return SvdResult {
            u: CMatrix::zeros(rows, 0),
            s: Vec::new(),
            v: CMatrix::zeros(cols, 0),
        };
    }
    let mat = faer::Mat::<C64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    let dec = mat
        .thin_svd()
        .expect("SVD of a finite matrix converges");
    let (fu, fv, fs) = (dec.U(), dec.V(), dec.S().column_vector());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| fs[j].re.total_cmp(&fs[i].re));
    SvdResult {
        u: CMatrix::from_fn(rows, k, |i, j| fu[(i, order[j])]),
        s: order.iter().map(|&i| fs[i].re).collect(),
        v: CMatrix::from_fn(cols, k, |i, j| fv[(i, order[j])]),
    }
}

/// Leading `rank` singular triplets of `a`.
pub fn truncated_svd(a: &CMatrix, rank: usize) -> Result<SvdResult> {
    let max = a.nrows().min(a.ncols());
    if rank == 0 || rank > max {
        return Err(Error::argument(format!(
            "truncation rank must lie in 1..={max} for a {}x{} matrix, got {rank}",
            a.nrows(),
            a.ncols()
        )));
    }
    let full = svd(a);
    Ok(SvdResult {
        u: full.u.columns(0, rank).into_owned(),
        s: full.s[..rank].to_vec(),
        v: full.v.columns(0, rank).into_owned(),
    })
}

/// Moore-Penrose pseudo-inverse; singular values below `rcond * s_max` are
/// treated as zero.
pub fn pinv(a: &CMatrix, rcond: f64) -> CMatrix {
    let dec = svd(a);
    let cutoff = dec.s.first().copied().unwrap_or(0.0) * rcond;
    let mut v_scaled = dec.v.clone();
    for (j, &s) in dec.s.iter().enumerate() {
        let inv = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        v_scaled.column_mut(j).scale_mut(inv);
    }
    v_scaled * dec.u.adjoint()
}

pub fn diag(values: &CVector) -> CMatrix {
    CMatrix::from_diagonal(values)
}

/// Relative Frobenius error `|a - b| / |b|`.
pub fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm()
}
