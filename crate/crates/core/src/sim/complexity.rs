//! Analytical flop model.
//!
//! Built from two primitive costs with unit constants: the pseudo-inverse of
//! an `I x J` matrix (`I >= J`) costs `I*J^2`, and a rank-`R` truncated SVD of
//! an `I x J` matrix costs `I*J*R`. Counts are model-derived, not measured.

use serde::{Deserialize, Serialize};

use super::Algorithm;

/// Scenario sizes the cost formulas depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub m: usize,
    pub q: usize,
    pub n: usize,
    pub t: usize,
    pub l1: usize,
    pub l2: usize,
}

impl From<&crate::channel::SystemConfig> for Dims {
    fn from(cfg: &crate::channel::SystemConfig) -> Self {
        Self {
            m: cfg.bs_antennas,
            q: cfg.ue_antennas,
            n: cfg.irs_elements,
            t: cfg.slots,
            l1: cfg.bs_paths,
            l2: cfg.ue_paths,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityModel {
    /// With an orthogonal design the LS step is a single adjoint application
    /// instead of a pseudo-inverse.
    pub orthogonal_pilots: bool,
}

impl Default for ComplexityModel {
    fn default() -> Self {
        Self {
            orthogonal_pilots: true,
        }
    }
}

fn pinv_cost(rows: usize, cols: usize) -> u64 {
    let (big, small) = (rows.max(cols) as u64, rows.min(cols) as u64);
    big * small * small
}

fn svd_cost(rows: usize, cols: usize, rank: usize) -> u64 {
    (rows * cols * rank) as u64
}

impl ComplexityModel {
    /// LS step on the `MT x MQN` sensing operator.
    pub fn ls_cost(&self, d: &Dims) -> u64 {
        let (rows, cols) = (d.m * d.t, d.m * d.q * d.n);
        let apply = (rows * cols) as u64;
        if self.orthogonal_pilots {
            apply
        } else {
            pinv_cost(rows, cols) + apply
        }
    }

    /// N rank-one SVDs of M x Q blocks.
    pub fn krf_extra(&self, m: usize, q: usize, n: usize) -> u64 {
        n as u64 * svd_cost(m, q, 1)
    }

    /// Three truncated SVDs plus the path-gain pseudo-inverse.
    pub fn hosvd_extra(&self, d: &Dims) -> u64 {
        let l = d.l1 * d.l2;
        svd_cost(d.m, d.q * d.n, d.l1)
            + svd_cost(d.q, d.m * d.n, d.l2)
            + svd_cost(d.n, d.m * d.q, l)
            + pinv_cost(d.m * d.q * d.n, l)
    }

    /// The four least-squares updates of one ALS sweep.
    pub fn als_iteration_cost(&self, d: &Dims) -> u64 {
        let l = d.l1 * d.l2;
        pinv_cost(d.q * d.n, d.l1)
            + pinv_cost(d.m * d.n, d.l2)
            + pinv_cost(d.m * d.q, l)
            + pinv_cost(d.m * d.q * d.n, l)
    }

    /// Total model cost of one estimate, LS step included.
    pub fn flops(&self, algorithm: Algorithm, d: &Dims, als_iters: usize) -> u64 {
        let ls = self.ls_cost(d);
        ls + match algorithm {
            Algorithm::Ls => 0,
            Algorithm::Krf => self.krf_extra(d.m, d.q, d.n),
            Algorithm::Als => self.als_iteration_cost(d) * als_iters as u64,
            Algorithm::Hosvd => self.hosvd_extra(d),
        }
    }
}

/// Free-function form of [`ComplexityModel::flops`].
pub fn complexity_flops(
    model: &ComplexityModel,
    algorithm: Algorithm,
    dims: &Dims,
    als_iters: usize,
) -> u64 {
    model.flops(algorithm, dims, als_iters)
}
