//! Weighted sum rate and its two fractional-programming reformulations.
//!
//! All functions take the per-user channels `H_k` directly so that the same
//! code evaluates perturbed layouts during finite-difference checks.

use serde::{Deserialize, Serialize};

use crate::channel::{PathGeometry, SystemDims};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, identity, identity_plus, logdet_hpd, solve_hpd, trace, CMat};

/// Beamformers plus the power budget, rate weights and noise powers they are judged by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformerSet {
    #[serde(with = "crate::linalg::serde_cmats")]
    pub w: Vec<CMat>,
    /// Total transmit power budget in watts.
    pub p_max: f64,
    pub weights: Vec<f64>,
    /// Per-user noise power in watts.
    pub noise: Vec<f64>,
}

impl BeamformerSet {
    pub fn users(&self) -> usize {
        self.w.len()
    }

    /// `Σ_k tr(W_k W_kᴴ)`.
    pub fn power(&self) -> f64 {
        total_power(&self.w)
    }

    pub fn with_w(&self, w: Vec<CMat>) -> Self {
        Self { w, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.w.len();
        if self.weights.len() != k || self.noise.len() != k {
            return Err(Error::invalid(format!(
                "{k} beamformers but {} weights and {} noise powers",
                self.weights.len(),
                self.noise.len()
            )));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::invalid(format!("power budget must be positive, got {}", self.p_max)));
        }
        if self.weights.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("rate weights must be positive"));
        }
        if self.noise.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("noise powers must be positive"));
        }
        Ok(())
    }
}

pub fn total_power(w: &[CMat]) -> f64 {
    w.iter().map(frobenius_sq).sum()
}

/// Auxiliary variables of the FP reformulation and the beamformer history used
/// by the extrapolated inverse-free update.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryState {
    pub gamma: Vec<CMat>,
    pub phi: Vec<CMat>,
    /// Non-homogeneous auxiliary; equals the previous beamformers at its optimum.
    pub psi: Vec<CMat>,
    pub w_prev: Vec<CMat>,
    pub w_prev2: Vec<CMat>,
    pub eta: f64,
}

impl AuxiliaryState {
    /// Zero auxiliaries with the extrapolation memory set to `w`.
    pub fn new(w: &[CMat], rx_antennas: usize) -> Self {
        let d = w.first().map_or(0, |x| x.ncols());
        let k = w.len();
        Self {
            gamma: vec![CMat::zeros(d, d); k],
            phi: vec![CMat::zeros(rx_antennas, d); k],
            psi: w.to_vec(),
            w_prev: w.to_vec(),
            w_prev2: w.to_vec(),
            eta: 0.0,
        }
    }

    /// Shifts the beamformer history after a new `W` was accepted.
    pub fn push_history(&mut self, w: &[CMat]) {
        self.w_prev2 = std::mem::replace(&mut self.w_prev, w.to_vec());
    }
}

/// `hw[k][j] = H_k W_j`.
pub fn received_products(h: &[CMat], w: &[CMat]) -> Vec<Vec<CMat>> {
    h.iter().map(|hk| w.iter().map(|wj| hk * wj).collect()).collect()
}

fn check_inputs(h: &[CMat], beams: &BeamformerSet) -> Result<()> {
    if h.len() != beams.users() {
        return Err(Error::invalid(format!("{} channels but {} beamformers", h.len(), beams.users())));
    }
    if h.iter().any(|x| !crate::linalg::is_finite(x)) {
        return Err(Error::invalid("channel has non-finite entries"));
    }
    Ok(())
}

/// `Σ_{j∈js} (H_k W_j)(H_k W_j)ᴴ + σ² I`.
fn covariance<'a>(hw_k: impl Iterator<Item = &'a CMat>, n: usize, noise: f64) -> CMat {
    let mut m = identity(n).scale(noise);
    for x in hw_k {
        m += x * x.adjoint();
    }
    crate::linalg::hermitize(&m)
}

/// Interference-plus-noise matrix `M_k` from precomputed products.
pub fn interference_from_products(hw: &[Vec<CMat>], noise: f64, k: usize) -> CMat {
    let n = hw[k][k].nrows();
    covariance(hw[k].iter().enumerate().filter(|(j, _)| *j != k).map(|(_, x)| x), n, noise)
}

/// Total received covariance `Σ_j H_k W_j W_jᴴ H_kᴴ + σ² I`.
pub fn total_covariance_from_products(hw: &[Vec<CMat>], noise: f64, k: usize) -> CMat {
    let n = hw[k][k].nrows();
    covariance(hw[k].iter(), n, noise)
}

/// `M_k = Σ_{j≠k} H_k W_j W_jᴴ H_kᴴ + σ_k² I`.
pub fn interference_matrix(h: &[CMat], beams: &BeamformerSet, k: usize) -> Result<CMat> {
    check_inputs(h, beams)?;
    if k >= h.len() {
        return Err(Error::invalid(format!("user index {k} out of range")));
    }
    let hw: Vec<CMat> = beams.w.iter().map(|wj| &h[k] * wj).collect();
    let n = h[k].nrows();
    Ok(covariance(
        hw.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, x)| x),
        n,
        beams.noise[k],
    ))
}

/// `Γ_k = (H_k W_k)ᴴ M_k⁻¹ (H_k W_k)`, computed from the products.
pub fn sinr_matrix(hw: &[Vec<CMat>], noise: f64, k: usize) -> Result<CMat> {
    let m = interference_from_products(hw, noise, k);
    let s = &hw[k][k];
    Ok(crate::linalg::hermitize(&(s.adjoint() * solve_hpd(&m, s)?)))
}

/// Per-user rates `log det(I + Γ_k)` in nats (unweighted).
pub fn user_rates(h: &[CMat], beams: &BeamformerSet) -> Result<Vec<f64>> {
    check_inputs(h, beams)?;
    let hw = received_products(h, &beams.w);
    (0..h.len())
        .map(|k| logdet_hpd(&identity_plus(&sinr_matrix(&hw, beams.noise[k], k)?)))
        .collect()
}

/// Weighted sum rate in nats.
pub fn wsr(h: &[CMat], beams: &BeamformerSet) -> Result<f64> {
    Ok(user_rates(h, beams)?
        .iter()
        .zip(&beams.weights)
        .map(|(r, a)| a * r)
        .sum())
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

fn check_aux(gamma: &[CMat], users: usize) -> Result<()> {
    if gamma.len() != users {
        return Err(Error::invalid(format!("{} auxiliaries for {users} users", gamma.len())));
    }
    Ok(())
}

/// Lagrangian-dual objective.
pub fn f_lag(h: &[CMat], beams: &BeamformerSet, gamma: &[CMat]) -> Result<f64> {
    check_inputs(h, beams)?;
    check_aux(gamma, h.len())?;
    let hw = received_products(h, &beams.w);
    let mut total = 0.0;
    for k in 0..h.len() {
        let ipg = identity_plus(&gamma[k]);
        let omega = total_covariance_from_products(&hw, beams.noise[k], k);
        let s = &hw[k][k];
        let quad = s.adjoint() * solve_hpd(&omega, s).map_err(|e| e.context(format!("user {k}")))?;
        let term = logdet_hpd(&ipg)? - trace(&gamma[k]).re + trace(&(&ipg * quad)).re;
        total += beams.weights[k] * term;
    }
    Ok(total)
}

/// Per-user terms of the quadratic-transform objective, from precomputed products.
pub fn f_quad_terms_from_products(
    hw: &[Vec<CMat>],
    beams: &BeamformerSet,
    gamma: &[CMat],
    phi: &[CMat],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(hw.len());
    for k in 0..hw.len() {
        let a = beams.weights[k];
        let ipg = identity_plus(&gamma[k]);
        let omega = total_covariance_from_products(hw, beams.noise[k], k);
        let cross = phi[k].adjoint() * &hw[k][k];
        let inner = (&cross + cross.adjoint()).scale(a.sqrt()) - phi[k].adjoint() * omega * &phi[k];
        let term = a * (logdet_hpd(&ipg)? - trace(&gamma[k]).re) + trace(&(&ipg * inner)).re;
        out.push(term);
    }
    Ok(out)
}

/// Quadratic-transform objective.
pub fn f_quad(h: &[CMat], beams: &BeamformerSet, gamma: &[CMat], phi: &[CMat]) -> Result<f64> {
    check_inputs(h, beams)?;
    check_aux(gamma, h.len())?;
    check_aux(phi, h.len())?;
    let hw = received_products(h, &beams.w);
    Ok(f_quad_terms_from_products(&hw, beams, gamma, phi)?.iter().sum())
}

/// Finite upper bound on the WSR, scaled by the largest PRM energy so it stays
/// valid for arbitrary pathloss.
pub fn r_max_bound(dims: &SystemDims, geometry: &[PathGeometry], beams: &BeamformerSet) -> f64 {
    let scale = geometry.iter().map(|g| frobenius_sq(&g.prm)).fold(0.0, f64::max);
    let m = dims.tx_antennas as f64;
    let n = dims.rx_antennas as f64;
    let d = dims.streams as f64;
    geometry
        .iter()
        .zip(beams.weights.iter().zip(&beams.noise))
        .map(|(g, (a, s2))| {
            let l = (g.aod.len() * g.aoa.len()) as f64;
            a * (m * n.powf(1.5) * l * l * scale * beams.p_max / s2).ln_1p()
        })
        .sum::<f64>()
        * d
}
