//! Geometric channel synthesis for the BS-IRS-UE link.
//!
//! The BS and UE use uniform linear arrays, the IRS a uniform rectangular
//! array whose response is the Kronecker product of two linear responses.
//! Both hops mix one LOS path (path index 0) with NLOS paths through the
//! Rician factor; the mixing scalars are folded into the path gains so that
//! `G = A_rx diag(alpha_mixed) B_tx^H` and `H = B_rx diag(beta_mixed) A_tx^H`
//! hold exactly.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{self, CMatrix, CVector, Tensor3, C64};

/// Scenario dimensions and link parameters.
///
/// Serialized field names are descriptive; the single-letter names used in the
/// literature (`M`, `Q`, `N`, `T`, `L1`, `L2`, ...) are accepted as aliases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// BS receive antennas (M).
    #[serde(alias = "M")]
    pub bs_antennas: usize,
    /// UE transmit antennas (Q).
    #[serde(alias = "Q")]
    pub ue_antennas: usize,
    /// IRS elements (N).
    #[serde(alias = "N")]
    pub irs_elements: usize,
    /// IRS grid rows (N_h); defaults to sqrt(N) when N is a perfect square.
    #[serde(alias = "N_h", default, skip_serializing_if = "Option::is_none")]
    pub irs_rows: Option<usize>,
    /// IRS grid columns (N_v).
    #[serde(alias = "N_v", default, skip_serializing_if = "Option::is_none")]
    pub irs_cols: Option<usize>,
    /// Training time slots (T).
    #[serde(alias = "T")]
    pub slots: usize,
    /// BS-IRS paths (L1).
    #[serde(alias = "L1")]
    pub bs_paths: usize,
    /// IRS-UE paths (L2).
    #[serde(alias = "L2")]
    pub ue_paths: usize,
    #[serde(alias = "K_G_db")]
    pub rician_g_db: f64,
    #[serde(alias = "K_H_db")]
    pub rician_h_db: f64,
    /// Training SNR in dB; `inf` disables noise.
    pub snr_db: f64,
    pub seed: u64,
}

impl SystemConfig {
    /// M=Q=4, N=16 (4x4 grid), T=64, L1=1, L2=4, K_G=10 dB, K_H=-10 dB, 30 dB SNR.
    pub fn base() -> Self {
        Self {
            bs_antennas: 4,
            ue_antennas: 4,
            irs_elements: 16,
            irs_rows: None,
            irs_cols: None,
            slots: 64,
            bs_paths: 1,
            ue_paths: 4,
            rician_g_db: 10.0,
            rician_h_db: -10.0,
            snr_db: 30.0,
            seed: 0,
        }
    }

    /// Resolved IRS grid `(N_h, N_v)`, if one can be determined.
    pub fn irs_grid(&self) -> Option<(usize, usize)> {
        match (self.irs_rows, self.irs_cols) {
            (Some(h), Some(v)) => Some((h, v)),
            (Some(h), None) if h > 0 && self.irs_elements % h == 0 => {
                Some((h, self.irs_elements / h))
            }
            (None, Some(v)) if v > 0 && self.irs_elements % v == 0 => {
                Some((self.irs_elements / v, v))
            }
            (None, None) => {
                let root = (self.irs_elements as f64).sqrt().round() as usize;
                (root * root == self.irs_elements).then_some((root, root))
            }
            _ => None,
        }
    }

    /// Every violated constraint, empty when the scenario is usable.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let (m, q, n, t, l1, l2) = (
            self.bs_antennas,
            self.ue_antennas,
            self.irs_elements,
            self.slots,
            self.bs_paths,
            self.ue_paths,
        );
        for (name, v) in [("M", m), ("Q", q), ("N", n), ("T", t), ("L1", l1), ("L2", l2)] {
            if v == 0 {
                out.push(Violation::new(format!("{name} >= 1"), format!("{name} = 0")));
            }
        }
        match self.irs_grid() {
            Some((h, v)) if h * v == n && h > 0 && v > 0 => {}
            Some((h, v)) => out.push(Violation::new(
                "N_h*N_v = N",
                format!("N_h*N_v = {h}*{v} = {} but N = {n}", h * v),
            )),
            None => out.push(Violation::new(
                "N_h*N_v = N",
                format!("N = {n} is not a perfect square; supply both irs_rows and irs_cols"),
            )),
        }
        let checks = [
            ("T >= Q*N", "combined-channel LS", t, q * n, format!("T = {t}, Q*N = {}", q * n)),
            ("Q*N >= L1", "BS steering update", q * n, l1, format!("Q*N = {}, L1 = {l1}", q * n)),
            ("M*N >= L2", "UE steering update", m * n, l2, format!("M*N = {}, L2 = {l2}", m * n)),
            (
                "M*Q >= L1*L2",
                "IRS geometry update",
                m * q,
                l1 * l2,
                format!("M*Q = {}, L1*L2 = {}", m * q, l1 * l2),
            ),
            (
                "N*M*Q >= L1*L2",
                "path-gain update",
                n * m * q,
                l1 * l2,
                format!("N*M*Q = {}, L1*L2 = {}", n * m * q, l1 * l2),
            ),
        ];
        for (rule, stage, lhs, rhs, detail) in checks {
            if lhs < rhs {
                out.push(Violation::new(rule, format!("{detail} ({stage} is underdetermined)")));
            }
        }
        if !self.snr_db.is_finite() && self.snr_db != f64::INFINITY {
            out.push(Violation::new("snr_db finite or +inf", format!("snr_db = {}", self.snr_db)));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::config(
                v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
            ))
        }
    }
}

/// A violated constraint and the values that broke it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: String,
    pub detail: String,
}

impl Violation {
    pub fn new(rule: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            rule: rule.into(),
            detail: detail.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "violated {}: {}", self.rule, self.detail)
    }
}

/// Angles in radians for every path end.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathAngles {
    /// BS angle of arrival, one per BS-IRS path.
    pub phi_bs: Vec<f64>,
    /// UE angle of departure, one per IRS-UE path.
    pub phi_ue: Vec<f64>,
    /// IRS azimuth/elevation of arrival, one per IRS-UE path.
    pub phi_irs_arrival: Vec<f64>,
    pub theta_irs_arrival: Vec<f64>,
    /// IRS azimuth/elevation of departure, one per BS-IRS path.
    pub phi_irs_departure: Vec<f64>,
    pub theta_irs_departure: Vec<f64>,
}

impl PathAngles {
    /// Linear-array angles uniform on [-pi, pi], IRS angles uniform on [-pi/2, pi/2].
    pub fn random(l1: usize, l2: usize, rng: &mut impl Rng) -> Self {
        let full = Uniform::new_inclusive(-PI, PI).expect("valid range");
        let half = Uniform::new_inclusive(-PI / 2.0, PI / 2.0).expect("valid range");
        let mut draw = |d: &Uniform<f64>, k: usize| -> Vec<f64> { (0..k).map(|_| d.sample(rng)).collect() };
        let phi_bs = draw(&full, l1);
        let phi_ue = draw(&full, l2);
        let phi_irs_arrival = draw(&half, l2);
        let theta_irs_arrival = draw(&half, l2);
        let phi_irs_departure = draw(&half, l1);
        let theta_irs_departure = draw(&half, l1);
        Self {
            phi_bs,
            phi_ue,
            phi_irs_arrival,
            theta_irs_arrival,
            phi_irs_departure,
            theta_irs_departure,
        }
    }
}

/// Spatial frequencies derived from [`PathAngles`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialFrequencies {
    pub mu_bs: Vec<f64>,
    pub mu_ue: Vec<f64>,
    /// Horizontal / vertical IRS frequencies on the arrival side.
    pub mu_irs_arrival: Vec<f64>,
    pub psi_irs_arrival: Vec<f64>,
    pub mu_irs_departure: Vec<f64>,
    pub psi_irs_departure: Vec<f64>,
}

/// `pi*cos(phi)` for the linear arrays; `(pi*cos(phi)*sin(theta), pi*cos(phi))`
/// for the IRS.
pub fn spatial_frequencies(angles: &PathAngles) -> SpatialFrequencies {
    let lin = |phi: &[f64]| phi.iter().map(|p| PI * p.cos()).collect::<Vec<_>>();
    let irs_mu = |phi: &[f64], theta: &[f64]| {
        phi.iter()
            .zip(theta)
            .map(|(p, t)| PI * p.cos() * t.sin())
            .collect::<Vec<_>>()
    };
    SpatialFrequencies {
        mu_bs: lin(&angles.phi_bs),
        mu_ue: lin(&angles.phi_ue),
        mu_irs_arrival: irs_mu(&angles.phi_irs_arrival, &angles.theta_irs_arrival),
        psi_irs_arrival: lin(&angles.phi_irs_arrival),
        mu_irs_departure: irs_mu(&angles.phi_irs_departure, &angles.theta_irs_departure),
        psi_irs_departure: lin(&angles.phi_irs_departure),
    }
}

/// Linear-array response: entry `m` is `exp(-j*m*mu)`.
pub fn ula_steering(mu: f64, size: usize) -> CVector {
    CVector::from_fn(size, |m, _| C64::from_polar(1.0, -(m as f64) * mu))
}

/// Rectangular-array response `ula(mu, rows) kron ula(psi, cols)`.
pub fn ura_steering(mu: f64, psi: f64, rows: usize, cols: usize) -> CVector {
    let h = ula_steering(mu, rows);
    let v = ula_steering(psi, cols);
    CVector::from_fn(rows * cols, |i, _| h[i / cols] * v[i % cols])
}

/// One draw of both hops together with every intermediate factor.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// BS-IRS channel, M x N.
    pub g: CMatrix,
    /// IRS-UE channel, N x Q.
    pub h: CMatrix,
    /// Raw CN(0,1) path gains before Rician scaling.
    pub alpha: CVector,
    pub beta: CVector,
    /// Path gains with the Rician LOS/NLOS scalars applied.
    pub alpha_mixed: CVector,
    pub beta_mixed: CVector,
    pub angles: PathAngles,
    /// M x L1
    pub a_rx: CMatrix,
    /// Q x L2
    pub a_tx: CMatrix,
    /// N x L2
    pub b_rx: CMatrix,
    /// N x L1
    pub b_tx: CMatrix,
    /// IRS geometry matrix N x (L1*L2); row n is `b_rx[n,:] kron conj(b_tx[n,:])`.
    pub p_b: CMatrix,
    /// Combined channel `H^T (Khatri-Rao) G`, (M*Q) x N.
    pub r: CMatrix,
    /// The combined channel as an M x Q x N tensor.
    pub r_tensor: Tensor3,
}

impl ChannelRealization {
    /// `f = beta_mixed kron alpha_mixed`, the diagonal of the Tucker core.
    pub fn core_vector(&self) -> CVector {
        let (l1, l2) = (self.alpha_mixed.len(), self.beta_mixed.len());
        CVector::from_fn(l1 * l2, |k, _| self.beta_mixed[k / l1] * self.alpha_mixed[k % l1])
    }
}

fn standard_complex(rng: &mut impl Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub(crate) fn complex_gaussian_vec(len: usize, rng: &mut impl Rng) -> CVector {
    CVector::from_fn(len, |_, _| standard_complex(rng))
}

pub(crate) fn complex_gaussian_mat(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| standard_complex(rng))
}

/// Applies `sqrt(K/(K+1))` to the LOS gain (index 0) and `sqrt(1/(K+1))` to
/// the rest. With a single path the NLOS part is empty.
fn rician_mix(gains: &CVector, k_db: f64) -> CVector {
    let k = 10f64.powf(k_db / 10.0);
    let los = (k / (k + 1.0)).sqrt();
    let nlos = (1.0 / (k + 1.0)).sqrt();
    CVector::from_fn(gains.len(), |i, _| gains[i] * if i == 0 { los } else { nlos })
}

/// Draws angles and gains, then builds every channel quantity.
pub fn synthesize_channels(cfg: &SystemConfig, rng: &mut impl Rng) -> Result<ChannelRealization> {
    cfg.validate()?;
    let (rows, cols) = cfg.irs_grid().expect("validated grid");
    let (m, q, l1, l2) = (cfg.bs_antennas, cfg.ue_antennas, cfg.bs_paths, cfg.ue_paths);

    let angles = PathAngles::random(l1, l2, rng);
    let alpha = complex_gaussian_vec(l1, rng);
    let beta = complex_gaussian_vec(l2, rng);
    let freq = spatial_frequencies(&angles);

    let columns = |k: usize, f: &dyn Fn(usize) -> CVector| {
        let cols: Vec<CVector> = (0..k).map(f).collect();
        CMatrix::from_columns(&cols)
    };
    let a_rx = columns(l1, &|l| ula_steering(freq.mu_bs[l], m));
    let a_tx = columns(l2, &|l| ula_steering(freq.mu_ue[l], q));
    let b_rx = columns(l2, &|l| {
        ura_steering(freq.mu_irs_arrival[l], freq.psi_irs_arrival[l], rows, cols)
    });
    let b_tx = columns(l1, &|l| {
        ura_steering(freq.mu_irs_departure[l], freq.psi_irs_departure[l], rows, cols)
    });

    let alpha_mixed = rician_mix(&alpha, cfg.rician_g_db);
    let beta_mixed = rician_mix(&beta, cfg.rician_h_db);

    let g = &a_rx * tensor::diag(&alpha_mixed) * b_tx.adjoint();
    let h = &b_rx * tensor::diag(&beta_mixed) * a_tx.adjoint();
    let p_b = tensor::khatri_rao(&b_rx.transpose(), &b_tx.adjoint())?.transpose();
    let (r, r_tensor) = combined_channel(&g, &h)?;

    Ok(ChannelRealization {
        g,
        h,
        alpha,
        beta,
        alpha_mixed,
        beta_mixed,
        angles,
        a_rx,
        a_tx,
        b_rx,
        b_tx,
        p_b,
        r,
        r_tensor,
    })
}

/// `R = H^T (Khatri-Rao) G` and its M x Q x N tensorization.
pub fn combined_channel(g: &CMatrix, h: &CMatrix) -> Result<(CMatrix, Tensor3)> {
    if g.ncols() != h.nrows() {
        return Err(Error::argument(format!(
            "G is {}x{} but H is {}x{}; IRS dimensions must agree",
            g.nrows(),
            g.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    let r = tensor::khatri_rao(&h.transpose(), g)?;
    let r_tensor = Tensor3::from_vec([g.nrows(), h.ncols(), g.ncols()], r.as_slice().to_vec())?;
    Ok((r, r_tensor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::testutil::*;
    use crate::tensor::{build_core_tensor, rel_err, truncated_svd};

    #[test]
    fn ula_cases() {
        let v = ula_steering(0.0, 4);
        assert!(v.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
        let v = ula_steering(PI, 2);
        assert!((v[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((v[1] - C64::new(-1.0, 0.0)).norm() < 1e-15);
        let v = ula_steering(1.234, 7);
        assert!((v.norm_squared() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn ura_cases() {
        assert!(ura_steering(0.0, 0.0, 4, 4)
            .iter()
            .all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
        let degenerate = ura_steering(0.7, -1.1, 1, 5);
        assert!((degenerate - ula_steering(-1.1, 5)).norm() < 1e-15);
        let (mu, psi) = (0.4, -2.2);
        let b = ura_steering(mu, psi, 3, 4);
        for i in 0..3 {
            for j in 0..4 {
                let expected = C64::from_polar(1.0, -(i as f64) * mu - (j as f64) * psi);
                assert!((b[i * 4 + j] - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn spatial_frequency_cases() {
        let angles = PathAngles {
            phi_bs: vec![PI / 2.0],
            phi_ue: vec![0.0],
            phi_irs_arrival: vec![0.0],
            theta_irs_arrival: vec![PI / 2.0],
            phi_irs_departure: vec![PI / 3.0],
            theta_irs_departure: vec![PI / 6.0],
        };
        let f = spatial_frequencies(&angles);
        assert!(f.mu_bs[0].abs() < 1e-15);
        assert!((f.mu_ue[0] - PI).abs() < 1e-15);
        assert!((f.mu_irs_arrival[0] - PI).abs() < 1e-15);
        assert!((f.psi_irs_arrival[0] - PI).abs() < 1e-15);
        assert!((f.mu_irs_departure[0] - PI * 0.25).abs() < 1e-15);
    }

    #[test]
    fn base_shapes_and_factor_identities() {
        let cfg = SystemConfig::base();
        let ch = synthesize_channels(&cfg, &mut rng(11)).unwrap();
        assert_eq!(ch.g.shape(), (4, 16));
        assert_eq!(ch.h.shape(), (16, 4));
        assert_eq!(ch.r.shape(), (16, 16));
        assert_eq!(ch.r_tensor.dims(), [4, 4, 16]);
        assert_eq!(ch.p_b.shape(), (16, 4));

        let g = &ch.a_rx * tensor::diag(&ch.alpha_mixed) * ch.b_tx.adjoint();
        let h = &ch.b_rx * tensor::diag(&ch.beta_mixed) * ch.a_tx.adjoint();
        assert!(rel_err(&ch.g, &g) < 1e-12);
        assert!(rel_err(&ch.h, &h) < 1e-12);
        assert!(rel_err(&ch.r, &tensor::khatri_rao(&ch.h.transpose(), &ch.g).unwrap()) < 1e-12);
        for m in 0..4 {
            for q in 0..4 {
                for n in 0..16 {
                    let want = ch.h[(n, q)] * ch.g[(m, n)];
                    assert!((ch.r_tensor.get(m, q, n) - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn tucker_structure_of_combined_channel() {
        let mut cfg = SystemConfig::base();
        cfg.bs_paths = 2;
        cfg.ue_paths = 3;
        let ch = synthesize_channels(&cfg, &mut rng(12)).unwrap();
        let f = ch.core_vector();
        let lhs = kron(&ch.a_tx.conjugate(), &ch.a_rx) * tensor::diag(&f) * ch.p_b.transpose();
        assert!(rel_err(&ch.r, &lhs) < 1e-10);

        let core = build_core_tensor(&f, 2, 3).unwrap();
        let x = core.tucker_product(&ch.a_rx, &ch.a_tx.conjugate(), &ch.p_b).unwrap();
        let err = x.distance_sqr(&ch.r_tensor).unwrap().sqrt() / ch.r_tensor.norm_sqr().sqrt();
        assert!(err < 1e-10);
    }

    use crate::tensor::kron;

    #[test]
    fn strong_los_single_path_is_rank_one() {
        let mut cfg = SystemConfig::base();
        cfg.rician_g_db = 100.0;
        let ch = synthesize_channels(&cfg, &mut rng(13)).unwrap();
        let s = truncated_svd(&ch.g, 2).unwrap().s;
        assert!(s[1] < 1e-3 * s[0]);
        let los = ch.a_rx.column(0) * ch.b_tx.column(0).adjoint() * ch.alpha[0];
        assert!(rel_err(&ch.g, &los) < 1e-3);
    }

    #[test]
    fn seeded_synthesis_is_deterministic() {
        let cfg = SystemConfig::base();
        let a = synthesize_channels(&cfg, &mut rng(5)).unwrap();
        let b = synthesize_channels(&cfg, &mut rng(5)).unwrap();
        assert_eq!(a.g, b.g);
        assert_eq!(a.h, b.h);
    }

    #[test]
    fn combined_channel_cases() {
        let g = CMatrix::from_element(1, 1, C64::new(2.0, 1.0));
        let h = CMatrix::from_element(1, 1, C64::new(-1.0, 3.0));
        let (r, _) = combined_channel(&g, &h).unwrap();
        assert_eq!(r[(0, 0)], g[(0, 0)] * h[(0, 0)]);

        let mut r_ = rng(14);
        let g = random_matrix(&mut r_, 3, 5);
        let h = random_matrix(&mut r_, 5, 2);
        let (r, t) = combined_channel(&g, &h).unwrap();
        for n in 0..5 {
            let col = kron(&h.transpose().columns(n, 1).into_owned(), &g.columns(n, 1).into_owned());
            assert_eq!(r.column(n).into_owned(), col.column(0).into_owned());
        }
        assert_eq!(t.unfold(3).unwrap(), r.transpose());
        assert!(matches!(
            combined_channel(&g, &random_matrix(&mut r_, 4, 2)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn grid_resolution_and_violations() {
        let mut cfg = SystemConfig::base();
        assert_eq!(cfg.irs_grid(), Some((4, 4)));
        assert!(cfg.violations().is_empty());
        cfg.irs_elements = 32;
        cfg.slots = 128;
        assert!(cfg.violations().iter().any(|v| v.rule == "N_h*N_v = N"));
        cfg.irs_rows = Some(4);
        assert_eq!(cfg.irs_grid(), Some((4, 8)));
        assert!(cfg.violations().is_empty());

        let mut cfg = SystemConfig::base();
        cfg.slots = 63;
        let v = cfg.violations();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "T >= Q*N");

        let mut cfg = SystemConfig::base();
        cfg.bs_antennas = 1;
        cfg.ue_antennas = 2;
        cfg.slots = 64;
        cfg.bs_paths = 2;
        cfg.ue_paths = 2;
        assert!(cfg.violations().iter().any(|v| v.rule == "M*Q >= L1*L2"));
    }
}
