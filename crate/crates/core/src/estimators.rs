//! Pilot design, received-signal simulation and the four combined-channel
//! estimators (LS, KRF, Tucker-ALS, Tucker-HOSVD).
//!
//! The sensing operator `Omega = W kron I_M` with `W = (S Khatri-Rao Z)^T` is
//! never formed. With `U = unvec_{M x QN}(vec R)`, the noiseless received block
//! is `Y = U W^T` (column `t` is the slot-`t` observation) and the adjoint is
//! `U = Y conj(W)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{complex_gaussian_mat, ChannelRealization, SystemConfig};
use crate::error::{Error, Result};
use crate::sim::complexity::{ComplexityModel, Dims};
use crate::tensor::{
    self, build_core_tensor, khatri_rao, kron, pinv, truncated_svd, CMatrix, CVector, Tensor3,
    C64, PINV_RCOND,
};

/// Relative tolerance when testing `W^H W = c I`.
const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PilotDesign {
    /// IRS phase shifts, N x T, unit modulus.
    pub s: CMatrix,
    /// Pilot symbols, Q x T.
    pub z: CMatrix,
    /// `(S Khatri-Rao Z)^T`, T x (Q*N).
    pub w: CMatrix,
    /// `c` with `W^H W = c I`, when the design is orthogonal.
    pub orthogonal_gain: Option<f64>,
}

impl PilotDesign {
    /// Builds the design from explicit phase-shift and pilot matrices.
    pub fn from_parts(s: CMatrix, z: CMatrix) -> Result<Self> {
        if s.ncols() != z.ncols() {
            return Err(Error::argument(format!(
                "S has {} slots but Z has {}",
                s.ncols(),
                z.ncols()
            )));
        }
        if s.iter().any(|x| (x.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::argument("IRS phase shifts must have unit modulus"));
        }
        let w = khatri_rao(&s, &z)?.transpose();
        let gram = w.adjoint() * &w;
        let c = gram.diagonal().iter().map(|d| d.re).sum::<f64>() / gram.nrows() as f64;
        let target = CMatrix::identity(gram.nrows(), gram.ncols()) * C64::new(c, 0.0);
        let orthogonal_gain =
            (c > 0.0 && (&gram - &target).norm() <= ORTHOGONALITY_TOL * target.norm()).then_some(c);
        Ok(Self {
            s,
            z,
            w,
            orthogonal_gain,
        })
    }

    pub fn slots(&self) -> usize {
        self.w.nrows()
    }
}

/// Sylvester Hadamard matrix of order `n` (a power of two).
pub fn hadamard(n: usize) -> Result<CMatrix> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::config(format!(
            "no Hadamard pilot matrix of order T = {n}; T must be a power of two"
        )));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        C64::new(sign, 0.0)
    }))
}

/// Hadamard pilots (first Q rows) and DFT phase shifts (first N rows,
/// entry `exp(-j 2 pi n t / T)`).
pub fn design_pilots(cfg: &SystemConfig) -> Result<PilotDesign> {
    let (q, n, t) = (cfg.ue_antennas, cfg.irs_elements, cfg.slots);
    if t < q * n {
        return Err(Error::config(format!(
            "violated T >= Q*N: T = {t}, Q*N = {}",
            q * n
        )));
    }
    let z = hadamard(t)?.rows(0, q).into_owned();
    let s = CMatrix::from_fn(n, t, |row, col| {
        let phase = -2.0 * std::f64::consts::PI * ((row * col) % t) as f64 / t as f64;
        C64::from_polar(1.0, phase)
    });
    PilotDesign::from_parts(s, z)
}

/// Stacked observations of one training block.
#[derive(Debug, Clone)]
pub struct ReceivedPilots {
    /// M x T; column `t` is the slot-`t` observation.
    pub y: CMatrix,
    pub noise_variance: f64,
}

impl ReceivedPilots {
    /// `[y_1; ...; y_T]`, length M*T.
    pub fn stacked(&self) -> CVector {
        tensor::vec(&self.y)
    }
}

/// `U W^T`, the noiseless observation block for combined channel `R`.
fn apply_sensing(r: &CMatrix, pd: &PilotDesign, m: usize) -> Result<CMatrix> {
    if r.nrows() % m != 0 || (r.nrows() / m) * r.ncols() != pd.w.ncols() {
        return Err(Error::argument(format!(
            "combined channel {}x{} does not match a design with {} columns for M = {m}",
            r.nrows(),
            r.ncols(),
            pd.w.ncols()
        )));
    }
    let u = CMatrix::from_column_slice(m, pd.w.ncols(), r.as_slice());
    Ok(u * pd.w.transpose())
}

/// Noisy pilot observations at the given training SNR (`+inf` disables noise).
/// The noise variance is `|Omega u|^2 / (M T 10^(snr/10))`.
pub fn simulate_rx(
    ch: &ChannelRealization,
    pd: &PilotDesign,
    snr_db: f64,
    rng: &mut impl Rng,
) -> Result<ReceivedPilots> {
    let m = ch.g.nrows();
    let clean = apply_sensing(&ch.r, pd, m)?;
    if snr_db == f64::INFINITY {
        return Ok(ReceivedPilots {
            y: clean,
            noise_variance: 0.0,
        });
    }
    let noise_variance =
        clean.norm_squared() / (clean.len() as f64 * 10f64.powf(snr_db / 10.0));
    let scale = (noise_variance / 2.0).sqrt();
    let y = clean.map(|x| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        x + C64::new(re, im) * scale
    });
    Ok(ReceivedPilots { y, noise_variance })
}

/// Factor estimates of the Tucker model `core x1 A_rx x2 conj(A_tx) x3 P_B`.
#[derive(Debug, Clone)]
pub struct TuckerFactors {
    pub a_rx: CMatrix,
    /// Stored unconjugated; the mode-2 factor is `conj(a_tx)`.
    pub a_tx: CMatrix,
    pub p_b: CMatrix,
    /// Diagonal path-gain vector of the structured core.
    pub f: CVector,
    /// Core used for the reconstruction.
    pub core: Tensor3,
}

impl TuckerFactors {
    pub fn reconstruct(&self) -> Result<Tensor3> {
        self.core
            .tucker_product(&self.a_rx, &self.a_tx.conjugate(), &self.p_b)
    }
}

#[derive(Debug, Clone)]
pub enum Factors {
    Tucker(TuckerFactors),
    /// Per-column rank-one split: `R[:, n] = h_n kron g_n` with `g` M x N and
    /// `h` N x Q (row `n` is `h_n^T`), each up to a complex scale per column.
    KhatriRao { g: CMatrix, h: CMatrix },
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    /// Combined-channel estimate, (M*Q) x N.
    pub r_hat: CMatrix,
    pub factors: Option<Factors>,
    /// 0 for non-iterative methods.
    pub iterations: usize,
    /// Reconstruction error `|R - R_hat(i)|_F^2` after each ALS iteration.
    pub error_trace: Vec<f64>,
    pub converged: bool,
    /// Model flop count of the stages this call performed.
    pub flops: u64,
}

impl EstimateResult {
    fn closed_form(r_hat: CMatrix, factors: Option<Factors>, flops: u64) -> Self {
        Self {
            r_hat,
            factors,
            iterations: 0,
            error_trace: Vec::new(),
            converged: true,
            flops,
        }
    }

    pub fn r_tensor(&self, m: usize, q: usize) -> Result<Tensor3> {
        to_tensor(&self.r_hat, m, q)
    }
}

/// Reshapes an (M*Q) x N combined channel into the M x Q x N tensor.
pub fn to_tensor(r: &CMatrix, m: usize, q: usize) -> Result<Tensor3> {
    if r.nrows() != m * q {
        return Err(Error::argument(format!(
            "combined channel has {} rows, expected M*Q = {}",
            r.nrows(),
            m * q
        )));
    }
    Tensor3::from_vec([m, q, r.ncols()], r.as_slice().to_vec())
}

/// Inverse of [`to_tensor`].
pub fn from_tensor(x: &Tensor3) -> CMatrix {
    let [m, q, n] = x.dims();
    CMatrix::from_column_slice(m * q, n, x.data())
}

/// Least-squares combined-channel estimate. Uses `conj(W) / c` when the
/// design is orthogonal and a pseudo-inverse otherwise.
pub fn ls_estimate(y: &CVector, pd: &PilotDesign, m: usize) -> Result<EstimateResult> {
    let t = pd.slots();
    let qn = pd.w.ncols();
    if t < qn {
        return Err(Error::config(format!(
            "violated T >= Q*N: T = {t}, Q*N = {qn}"
        )));
    }
    if m == 0 || y.len() != m * t {
        return Err(Error::argument(format!(
            "received vector has length {}, expected M*T = {}",
            y.len(),
            m * t
        )));
    }
    let y = tensor::unvec(y, m, t)?;
    let u = match pd.orthogonal_gain {
        Some(c) => (y * pd.w.conjugate()) / C64::new(c, 0.0),
        None => y * pinv(&pd.w, PINV_RCOND).transpose(),
    };
    let q = pd.z.nrows();
    let n = pd.s.nrows();
    let r_hat = CMatrix::from_column_slice(m * q, n, u.as_slice());
    let dims = Dims {
        m,
        q,
        n,
        t,
        l1: 0,
        l2: 0,
    };
    let model = ComplexityModel {
        orthogonal_pilots: pd.orthogonal_gain.is_some(),
    };
    Ok(EstimateResult::closed_form(r_hat, None, model.ls_cost(&dims)))
}

/// LS followed by a best rank-one fit of every unvec'd column.
pub fn krf_estimate(
    y: &CVector,
    pd: &PilotDesign,
    m: usize,
    q: usize,
    n: usize,
) -> Result<EstimateResult> {
    if pd.z.nrows() != q || pd.s.nrows() != n {
        return Err(Error::argument(format!(
            "pilot design is for Q = {}, N = {}, got Q = {q}, N = {n}",
            pd.z.nrows(),
            pd.s.nrows()
        )));
    }
    let ls = ls_estimate(y, pd, m)?;
    let mut est = krf_denoise(&ls.r_hat, m, q)?;
    est.flops += ls.flops;
    Ok(est)
}

/// Rank-one projection of each column of an (M*Q) x N combined channel.
pub fn krf_denoise(r: &CMatrix, m: usize, q: usize) -> Result<EstimateResult> {
    if r.nrows() != m * q {
        return Err(Error::argument(format!(
            "combined channel has {} rows, expected M*Q = {}",
            r.nrows(),
            m * q
        )));
    }
    let n = r.ncols();
    let mut r_hat = CMatrix::zeros(m * q, n);
    let mut g = CMatrix::zeros(m, n);
    let mut h = CMatrix::zeros(n, q);
    for col in 0..n {
        let block = CMatrix::from_column_slice(m, q, r.column(col).as_slice());
        let top = truncated_svd(&block, 1)?;
        // fix the phase so the first entry of u is real and non-negative
        let lead = top.u[(0, 0)];
        let rot = if lead.norm() > 0.0 {
            lead.conj() / lead.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let u = top.u.column(0) * rot;
        let v = top.v.column(0) * rot;
        let g_col = &u * C64::new(top.s[0], 0.0);
        let h_row = v.conjugate();
        let rank_one = &g_col * h_row.transpose();
        r_hat.set_column(col, &CVector::from_column_slice(rank_one.as_slice()));
        g.set_column(col, &g_col);
        h.set_row(col, &h_row.transpose());
    }
    let flops = ComplexityModel::default().krf_extra(m, q, n);
    Ok(EstimateResult::closed_form(
        r_hat,
        Some(Factors::KhatriRao { g, h }),
        flops,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsOptions {
    /// Stop once `|e(i) - e(i-1)| <= epsilon`.
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for AlsOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            max_iter: 500,
        }
    }
}

fn check_als_ranks(dims: [usize; 3], l1: usize, l2: usize) -> Result<()> {
    let [m, q, n] = dims;
    if l1 == 0 || l2 == 0 {
        return Err(Error::config("path counts L1 and L2 must be at least 1"));
    }
    let rules = [
        ("Q*N >= L1", q * n, l1),
        ("M*N >= L2", m * n, l2),
        ("M*Q >= L1*L2", m * q, l1 * l2),
        ("N*M*Q >= L1*L2", n * m * q, l1 * l2),
    ];
    let broken: Vec<String> = rules
        .iter()
        .filter(|(_, lhs, rhs)| lhs < rhs)
        .map(|(rule, lhs, rhs)| format!("violated {rule}: {lhs} < {rhs}"))
        .collect();
    if broken.is_empty() {
        Ok(())
    } else {
        Err(Error::config(broken.join("; ")))
    }
}

/// Least-squares fit of the path-gain vector given the three factors:
/// `f = [(C kron A) Khatri-Rao P]^+ vec(unfold_3(X))`, with `C` the mode-2 factor.
fn fit_core_vector(
    x_unfold3: &CMatrix,
    a: &CMatrix,
    c: &CMatrix,
    p: &CMatrix,
) -> Result<CVector> {
    let design = khatri_rao(&kron(c, a), p)?;
    Ok(pinv(&design, PINV_RCOND) * tensor::vec(x_unfold3))
}

/// Alternating least squares on the structured Tucker model
/// `X ~ F(f) x1 A_rx x2 conj(A_tx) x3 P_B`, updating A_rx, A_tx, P_B then f.
pub fn tucker_als(
    x: &Tensor3,
    l1: usize,
    l2: usize,
    opts: &AlsOptions,
    rng: &mut impl Rng,
) -> Result<EstimateResult> {
    let dims = x.dims();
    check_als_ranks(dims, l1, l2)?;
    let [m, q, n] = dims;
    let unf: Vec<CMatrix> = (1..=3).map(|k| x.unfold(k)).collect::<Result<_>>()?;

    let mut a = complex_gaussian_mat(m, l1, rng);
    // mode-2 factor, i.e. the conjugated UE steering estimate
    let mut c = complex_gaussian_mat(q, l2, rng);
    let mut p = complex_gaussian_mat(n, l1 * l2, rng);
    let mut f = fit_core_vector(&unf[2], &a, &c, &p)?;
    let mut core = build_core_tensor(&f, l1, l2)?;

    let mut trace = Vec::new();
    let mut converged = false;
    let mut estimate = core.tucker_product(&a, &c, &p)?;
    for iter in 1..=opts.max_iter.max(1) {
        let z1 = core.nmode_product(&c, 2)?.nmode_product(&p, 3)?.unfold(1)?;
        a = &unf[0] * pinv(&z1, PINV_RCOND);
        let z2 = core.nmode_product(&a, 1)?.nmode_product(&p, 3)?.unfold(2)?;
        c = &unf[1] * pinv(&z2, PINV_RCOND);
        let z3 = core.nmode_product(&a, 1)?.nmode_product(&c, 2)?.unfold(3)?;
        p = &unf[2] * pinv(&z3, PINV_RCOND);
        f = fit_core_vector(&unf[2], &a, &c, &p)?;
        core = build_core_tensor(&f, l1, l2)?;

        estimate = core.tucker_product(&a, &c, &p)?;
        let err = x.distance_sqr(&estimate)?;
        let done = trace
            .last()
            .is_some_and(|prev: &f64| (err - prev).abs() <= opts.epsilon);
        trace.push(err);
        if done {
            converged = true;
            debug_assert_eq!(trace.len(), iter);
            break;
        }
    }

    let iterations = trace.len();
    let flops = ComplexityModel::default().als_iteration_cost(&Dims {
        m,
        q,
        n,
        t: 0,
        l1,
        l2,
    }) * iterations as u64;
    Ok(EstimateResult {
        r_hat: from_tensor(&estimate),
        factors: Some(Factors::Tucker(TuckerFactors {
            a_rx: a,
            a_tx: c.conjugate(),
            p_b: p,
            f,
            core,
        })),
        iterations,
        error_trace: trace,
        converged,
        flops,
    })
}

/// Truncated HOSVD with multilinear rank `(L1, L2, L1*L2)`.
///
/// The factors are the leading left singular vectors of each unfolding. The
/// reconstruction uses the full projected core `X x1 U1^H x2 U2^H x3 U3^H`;
/// a diagonal core is not generally reachable in the singular-vector bases, so
/// the fitted path-gain vector `f` is reported alongside but not used.
pub fn tucker_hosvd(x: &Tensor3, l1: usize, l2: usize) -> Result<EstimateResult> {
    let [m, q, n] = x.dims();
    if l1 == 0 || l2 == 0 {
        return Err(Error::config("path counts L1 and L2 must be at least 1"));
    }
    let ranks = [
        ("L1 <= min(M, Q*N)", l1, m.min(q * n)),
        ("L2 <= min(Q, M*N)", l2, q.min(m * n)),
        ("L1*L2 <= min(N, M*Q)", l1 * l2, n.min(m * q)),
    ];
    let broken: Vec<String> = ranks
        .iter()
        .filter(|(_, r, max)| r > max)
        .map(|(rule, r, max)| format!("violated {rule}: {r} > {max}"))
        .collect();
    if !broken.is_empty() {
        return Err(Error::config(broken.join("; ")));
    }

    let unf: Vec<CMatrix> = (1..=3).map(|k| x.unfold(k)).collect::<Result<_>>()?;
    let u1 = truncated_svd(&unf[0], l1)?.u;
    let u2 = truncated_svd(&unf[1], l2)?.u;
    let u3 = truncated_svd(&unf[2], l1 * l2)?.u;

    let core = x.tucker_product(&u1.adjoint(), &u2.adjoint(), &u3.adjoint())?;
    let estimate = core.tucker_product(&u1, &u2, &u3)?;
    let f = fit_core_vector(&unf[2], &u1, &u2, &u3)?;

    let flops = ComplexityModel::default().hosvd_extra(&Dims {
        m,
        q,
        n,
        t: 0,
        l1,
        l2,
    });
    Ok(EstimateResult::closed_form(
        from_tensor(&estimate),
        Some(Factors::Tucker(TuckerFactors {
            a_rx: u1,
            a_tx: u2.conjugate(),
            p_b: u3,
            f,
            core,
        })),
        flops,
    ))
}
