//! Decentralized baseband processing.
//!
//! The transmit array is split into `C` contiguous clusters, each owned by a
//! distributed unit (DU). A DU stores its antennas' positions, beamformer rows
//! and transmit FRM columns. The central unit (CU) only ever sees reductions
//! `Σ_c (A^c)ᴴ B^c` whose sizes depend on `d`, `N` and the path counts, never
//! on `M`.
//!
//! This module holds the shard-level and CU-level building blocks plus
//! sequential reference versions of each distributed step. The threaded
//! message-passing run lives in [`fabric`].

pub mod fabric;

pub use fabric::{dec_solve, DecReport, DecTiming, LogEntry, MessageKind, MessageLog, Node, RoundStat, Step};

use crate::channel::{field_response_matrix, Cuboid, PathGeometry, Position, Side};
use crate::error::{Error, Result};
use crate::fp::{nesterov_weight, power_scale, update_phi_from_products};
use crate::linalg::{frobenius_sq, hermitian_eigen, hermitize, identity_plus, logdet_hpd, psd_norm, real, row_norm, CMat};
use crate::mm::{mm_loop, mm_step, user_constant, MmConfig, MmOutcome, RxSubproblem};
use crate::objective::{interference_from_products, sinr_matrix, total_covariance_from_products};

/// Contiguous partition of the `M` transmit antennas into `C` equal blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPlan {
    offsets: Vec<usize>,
}

impl ClusterPlan {
    pub fn new(antennas: usize, clusters: usize) -> Result<Self> {
        if clusters == 0 || antennas == 0 || antennas % clusters != 0 {
            return Err(Error::invalid(format!(
                "cannot split M = {antennas} antennas into C = {clusters} equal clusters"
            )));
        }
        let size = antennas / clusters;
        Ok(Self {
            offsets: (0..=clusters).map(|c| c * size).collect(),
        })
    }

    pub fn clusters(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn antennas(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn range(&self, c: usize) -> std::ops::Range<usize> {
        self.offsets[c]..self.offsets[c + 1]
    }

    pub fn cluster_of(&self, antenna: usize) -> Option<usize> {
        (0..self.clusters()).find(|&c| self.range(c).contains(&antenna))
    }

    pub fn shard_rows(&self, a: &CMat) -> Vec<CMat> {
        (0..self.clusters())
            .map(|c| {
                let r = self.range(c);
                a.rows(r.start, r.len()).into_owned()
            })
            .collect()
    }

    pub fn shard_slice<T: Clone>(&self, v: &[T]) -> Vec<Vec<T>> {
        (0..self.clusters()).map(|c| v[self.range(c)].to_vec()).collect()
    }

    pub fn gather_rows(&self, shards: &[CMat]) -> CMat {
        crate::linalg::vstack(shards)
    }
}

/// `Σ_c (A^c)ᴴ B^c`, summed in cluster order.
pub fn mul_reduce(a: &[CMat], b: &[CMat]) -> Result<CMat> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::invalid(format!("mul_reduce needs matching shard lists ({} vs {})", a.len(), b.len())));
    }
    let (ca, cb) = (a[0].ncols(), b[0].ncols());
    let mut out = CMat::zeros(ca, cb);
    for (c, (x, y)) in a.iter().zip(b).enumerate() {
        if x.nrows() != y.nrows() || x.ncols() != ca || y.ncols() != cb {
            return Err(Error::invalid(format!(
                "mul_reduce shard {c}: {}x{} against {}x{}",
                x.nrows(),
                x.ncols(),
                y.nrows(),
                y.ncols()
            )));
        }
        out += x.adjoint() * y;
    }
    Ok(out)
}

/// Element-wise sum of per-cluster partial blocks, in cluster order.
pub fn reduce_blocks(parts: &[Vec<Vec<CMat>>]) -> Vec<Vec<CMat>> {
    let mut out = parts[0].clone();
    for p in &parts[1..] {
        for (row, prow) in out.iter_mut().zip(p) {
            for (x, y) in row.iter_mut().zip(prow) {
                *x += y;
            }
        }
    }
    out
}

pub fn flatten_blocks(blocks: &[Vec<CMat>]) -> Vec<CMat> {
    blocks.iter().flatten().cloned().collect()
}

pub fn nest_blocks(flat: Vec<CMat>, outer: usize) -> Result<Vec<Vec<CMat>>> {
    if outer == 0 || flat.len() % outer != 0 {
        return Err(Error::protocol(format!("{} blocks cannot form {outer} rows", flat.len())));
    }
    let inner = flat.len() / outer;
    let mut it = flat.into_iter();
    Ok((0..outer).map(|_| it.by_ref().take(inner).collect()).collect())
}

/// Transmit path directions and wavenumbers of every user: the only geometry
/// a DU needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TxPaths {
    pub dirs: Vec<Vec<Position>>,
    pub k0: Vec<f64>,
}

impl TxPaths {
    pub fn from_geometry(geometry: &[PathGeometry]) -> Self {
        Self {
            dirs: geometry.iter().map(|g| g.directions(Side::Tx)).collect(),
            k0: geometry.iter().map(PathGeometry::wavenumber).collect(),
        }
    }

    /// `[K, L_1, …, L_K, k0_1, …, k0_K, dirs…]`.
    pub fn to_reals(&self) -> Vec<f64> {
        let mut out = vec![self.dirs.len() as f64];
        out.extend(self.dirs.iter().map(|d| d.len() as f64));
        out.extend(&self.k0);
        for d in self.dirs.iter().flatten() {
            out.extend(d.iter());
        }
        out
    }

    pub fn from_reals(v: &[f64]) -> Result<Self> {
        let bad = || Error::protocol("malformed path description");
        let k = *v.first().ok_or_else(bad)? as usize;
        let lens: Vec<usize> = v.get(1..1 + k).ok_or_else(bad)?.iter().map(|&x| x as usize).collect();
        let k0 = v.get(1 + k..1 + 2 * k).ok_or_else(bad)?.to_vec();
        let mut rest = v.get(1 + 2 * k..).ok_or_else(bad)?;
        let mut dirs = Vec::with_capacity(k);
        for l in lens {
            if rest.len() < 3 * l {
                return Err(bad());
            }
            dirs.push(rest[..3 * l].chunks(3).map(|p| Position::new(p[0], p[1], p[2])).collect());
            rest = &rest[3 * l..];
        }
        if !rest.is_empty() {
            return Err(bad());
        }
        Ok(Self { dirs, k0 })
    }

    pub fn users(&self) -> usize {
        self.dirs.len()
    }
}

/// Transmit-side state owned by one DU.
#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    pub cluster: usize,
    pub positions: Vec<Position>,
    pub boxes: Vec<Cuboid>,
    /// Current beamformer rows `W̄_k^c`.
    pub w: Vec<CMat>,
    /// Beamformer rows one update earlier.
    pub w_prev: Vec<CMat>,
    /// Transmit FRM columns `G_k^c`.
    pub g: Vec<CMat>,
}

impl Shard {
    pub fn new(cluster: usize, positions: Vec<Position>, boxes: Vec<Cuboid>, w: Vec<CMat>, paths: &TxPaths) -> Self {
        let mut s = Self {
            cluster,
            positions,
            boxes,
            w_prev: w.clone(),
            w,
            g: Vec::new(),
        };
        s.refresh_frms(paths);
        s
    }

    /// Splits a full layout and beamformer set across the plan.
    pub fn split(plan: &ClusterPlan, positions: &[Position], boxes: &[Cuboid], w: &[CMat], paths: &TxPaths) -> Vec<Shard> {
        let pos = plan.shard_slice(positions);
        let bx = plan.shard_slice(boxes);
        let ws: Vec<Vec<CMat>> = w.iter().map(|wk| plan.shard_rows(wk)).collect();
        (0..plan.clusters())
            .map(|c| {
                let wc = ws.iter().map(|s| s[c].clone()).collect();
                Shard::new(c, pos[c].clone(), bx[c].clone(), wc, paths)
            })
            .collect()
    }

    pub fn refresh_frms(&mut self, paths: &TxPaths) {
        self.g = paths
            .dirs
            .iter()
            .zip(&paths.k0)
            .map(|(d, k0)| field_response_matrix(d, *k0, &self.positions))
            .collect();
    }

    /// `[k][j] = G_k^c W_j^c`.
    pub fn products(&self) -> Vec<Vec<CMat>> {
        self.g.iter().map(|g| self.w.iter().map(|w| g * w).collect()).collect()
    }

    /// `[t][s] = (W_t^c)ᴴ W_s^c`.
    pub fn w_gram(&self) -> Vec<Vec<CMat>> {
        self.w.iter().map(|a| self.w.iter().map(|b| a.adjoint() * b).collect()).collect()
    }

    /// `Σ_{m ∈ c} ‖[W_t]_m‖` for every user `t`.
    pub fn row_norm_sums(&self) -> Vec<f64> {
        self.w.iter().map(|w| (0..w.nrows()).map(|i| row_norm(w, i)).sum()).collect()
    }

    /// Local Gram blocks `(P_k^c)ᴴ P_j^c` with `P_k^c = (G_k^c)ᴴ V_k`.
    pub fn eta_gram(&self, factors: &[CMat]) -> Vec<Vec<CMat>> {
        let p: Vec<CMat> = self.g.iter().zip(factors).map(|(g, v)| g.adjoint() * v).collect();
        p.iter().map(|a| p.iter().map(|b| a.adjoint() * b).collect()).collect()
    }

    pub fn extrapolate(&self, nu: f64) -> Vec<CMat> {
        crate::fp::extrapolate(&self.w, &self.w_prev, nu)
    }

    /// `[j][k] = G_j^c Υ_k^c`.
    pub fn extrapolated_products(&self, ups: &[CMat]) -> Vec<Vec<CMat>> {
        self.g.iter().map(|g| ups.iter().map(|u| g * u).collect()).collect()
    }

    /// `Q_k^c = Υ_k^c + ((G_k^c)ᴴ Y_k − Σ_j (G_j^c)ᴴ Z_jk) / η`.
    pub fn correction(&self, ups: &[CMat], y: &[CMat], z: &[Vec<CMat>], eta: f64) -> Vec<CMat> {
        ups.iter()
            .enumerate()
            .map(|(k, u)| {
                let mut au = CMat::zeros(u.nrows(), u.ncols());
                for (j, g) in self.g.iter().enumerate() {
                    au += g.adjoint() * &z[j][k];
                }
                u + (self.g[k].adjoint() * &y[k] - au).unscale(eta)
            })
            .collect()
    }

    /// Accepts new beamformer rows and shifts the history.
    pub fn accept(&mut self, w: Vec<CMat>) {
        self.w_prev = std::mem::replace(&mut self.w, w);
    }

    /// Rows of `D_k^Tx` owned by this cluster: `W_k^c Y_kᴴ − Σ_j W_j^c S_kj`
    /// with `S_kj = G̃_kjᴴ Σ̂_k`.
    pub fn tx_derivative(&self, y: &[CMat], s: &[Vec<CMat>]) -> Vec<CMat> {
        (0..self.w.len())
            .map(|k| {
                let mut d = &self.w[k] * y[k].adjoint();
                for (wj, skj) in self.w.iter().zip(&s[k]) {
                    d -= wj * skj;
                }
                d
            })
            .collect()
    }

    pub fn tx_gradient(&self, derivative: &[CMat], paths: &TxPaths) -> Vec<Position> {
        let mut grad = vec![Position::zeros(); self.positions.len()];
        for (k, d) in derivative.iter().enumerate() {
            let g = &self.g[k];
            let k0 = paths.k0[k];
            for (m, gm) in grad.iter_mut().enumerate() {
                for (q, dir) in paths.dirs[k].iter().enumerate() {
                    *gm -= dir * (2.0 * k0 * (d[(m, q)] * g[(q, m)]).im);
                }
            }
        }
        grad
    }

    /// Largest per-antenna curvature bound of this cluster, using row-norm
    /// sums in place of the unavailable `Σ_j |[Ŵ]_mj|`.
    pub fn curvature_partial(&self, input: &CurvatureInput, paths: &TxPaths) -> f64 {
        let linear: Vec<CMat> = self.w.iter().zip(&input.y).map(|(w, y)| w * y.adjoint()).collect();
        let sqrt_m = (input.antennas as f64).sqrt();
        (0..self.positions.len())
            .map(|m| {
                let rows: Vec<CMat> = self.w.iter().map(|w| w.rows(m, 1).into_owned()).collect();
                let row_sum: f64 = rows
                    .iter()
                    .zip(&input.row_norm_totals)
                    .map(|(r, total)| crate::linalg::frobenius(r) * total)
                    .sum();
                let mut what_sq = 0.0;
                for (t, rt) in rows.iter().enumerate() {
                    for (s, rs) in rows.iter().enumerate() {
                        what_sq += crate::linalg::trace(&(rt * &input.w_gram[t][s] * rs.adjoint())).re;
                    }
                }
                let shared = row_sum + sqrt_m * what_sq.max(0.0).sqrt();
                (0..self.w.len())
                    .map(|k| {
                        let l = paths.dirs[k].len() as f64;
                        6.0 * paths.k0[k].powi(2)
                            * l
                            * (shared * input.sigma_norms[k] + row_norm(&linear[k], m) / l.sqrt())
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Projected MM step; a zero curvature leaves the shard in place.
    pub fn step(&mut self, grad: &[Position], delta: f64, paths: &TxPaths) -> Result<()> {
        if delta > 0.0 {
            self.positions = mm_step(&self.positions, grad, delta, &self.boxes)?;
            self.refresh_frms(paths);
        }
        Ok(())
    }
}

/// Reduced quantities a DU needs for its curvature bound.
#[derive(Debug, Clone)]
pub struct CurvatureInput {
    pub antennas: usize,
    pub y: Vec<CMat>,
    pub w_gram: Vec<Vec<CMat>>,
    pub row_norm_totals: Vec<f64>,
    pub sigma_norms: Vec<f64>,
}

/// Receive-side data kept at the CU.
#[derive(Debug, Clone)]
pub struct CuSide {
    pub prm: Vec<CMat>,
    pub rx_dirs: Vec<Vec<Position>>,
    pub k0: Vec<f64>,
    pub weights: Vec<f64>,
    pub noise: Vec<f64>,
    /// Receive FRMs `F_k`.
    pub f: Vec<CMat>,
}

impl CuSide {
    pub fn new(geometry: &[PathGeometry], rx_positions: &[Vec<Position>], weights: &[f64], noise: &[f64]) -> Self {
        let rx_dirs: Vec<Vec<Position>> = geometry.iter().map(|g| g.directions(Side::Rx)).collect();
        let k0: Vec<f64> = geometry.iter().map(PathGeometry::wavenumber).collect();
        let f = rx_dirs
            .iter()
            .zip(&k0)
            .zip(rx_positions)
            .map(|((d, k), r)| field_response_matrix(d, *k, r))
            .collect();
        Self {
            prm: geometry.iter().map(|g| g.prm.clone()).collect(),
            rx_dirs,
            k0,
            weights: weights.to_vec(),
            noise: noise.to_vec(),
            f,
        }
    }

    pub fn set_rx_positions(&mut self, k: usize, positions: &[Position]) {
        self.f[k] = field_response_matrix(&self.rx_dirs[k], self.k0[k], positions);
    }

    /// `H_k W_j = F_kᴴ Σ_k G̃_kj`.
    pub fn received(&self, g_tilde: &[Vec<CMat>]) -> Vec<Vec<CMat>> {
        g_tilde
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let fs = self.f[k].adjoint() * &self.prm[k];
                row.iter().map(|x| &fs * x).collect()
            })
            .collect()
    }
}

/// Objective quantities computed at the CU.
#[derive(Debug, Clone)]
pub struct DecObjective {
    /// Interference-plus-noise covariances `M_k`.
    pub interference: Vec<CMat>,
    pub wsr: f64,
    pub f_quad: f64,
}

pub fn dec_update_aux(hw: &[Vec<CMat>], weights: &[f64], noise: &[f64]) -> Result<(Vec<CMat>, Vec<CMat>)> {
    let mut gamma = Vec::with_capacity(hw.len());
    let mut phi = Vec::with_capacity(hw.len());
    for k in 0..hw.len() {
        gamma.push(sinr_matrix(hw, noise[k], k).map_err(|e| e.context(format!("Γ of user {k}")))?);
        phi.push(update_phi_from_products(hw, weights[k], noise[k], k).map_err(|e| e.context(format!("Φ of user {k}")))?);
    }
    Ok((gamma, phi))
}

/// WSR and `f_quad` from reduced products.
pub fn dec_objective(hw: &[Vec<CMat>], gamma: &[CMat], phi: &[CMat], weights: &[f64], noise: &[f64]) -> Result<DecObjective> {
    let mut interference = Vec::with_capacity(hw.len());
    let mut wsr = 0.0;
    let mut f_quad = 0.0;
    for k in 0..hw.len() {
        let a = weights[k];
        interference.push(interference_from_products(hw, noise[k], k));
        wsr += a * logdet_hpd(&identity_plus(&sinr_matrix(hw, noise[k], k)?))?;
        let e = identity_plus(&gamma[k]);
        let omega = total_covariance_from_products(hw, noise[k], k);
        let cross = phi[k].adjoint() * &hw[k][k];
        let inner = (&cross + cross.adjoint()).scale(a.sqrt()) - phi[k].adjoint() * omega * &phi[k];
        f_quad += a * (logdet_hpd(&e)? - crate::linalg::trace(&gamma[k]).re) + crate::linalg::trace(&(&e * inner)).re;
    }
    Ok(DecObjective {
        interference,
        wsr,
        f_quad,
    })
}

/// Per-user factors formed at the CU once `Γ` and `Φ` are known.
#[derive(Debug, Clone)]
pub struct CuFactors {
    /// `V_k Ξ_k √Λ_k` with `V_k = Σ_kᴴ F_k Φ_k` and `I + Γ_k = Ξ_k Λ_k Ξ_kᴴ`.
    pub eta: Vec<CMat>,
    /// `Y_k = √α_k V_k (I + Γ_k)`.
    pub y: Vec<CMat>,
    /// `Σ̂_k = V_k (I + Γ_k) V_kᴴ`.
    pub sigma_hat: Vec<CMat>,
}

pub fn cu_factors(cu: &CuSide, gamma: &[CMat], phi: &[CMat]) -> Result<CuFactors> {
    let k_users = gamma.len();
    let mut out = CuFactors {
        eta: Vec::with_capacity(k_users),
        y: Vec::with_capacity(k_users),
        sigma_hat: Vec::with_capacity(k_users),
    };
    for k in 0..k_users {
        let e = identity_plus(&gamma[k]);
        let v = cu.prm[k].adjoint() * &cu.f[k] * &phi[k];
        let (vals, vecs) = hermitian_eigen(&e);
        if vals.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::numerical(format!("I + Γ of user {k} is not positive definite")));
        }
        let sqrt = CMat::from_diagonal(&vals.map(|x| real(x.sqrt())));
        out.eta.push(&v * vecs * sqrt);
        out.y.push((&v * &e).scale(cu.weights[k].sqrt()));
        out.sigma_hat.push(hermitize(&(&v * &e * v.adjoint())));
    }
    Ok(out)
}

pub fn eta_from_reduced(gram: &[Vec<CMat>]) -> f64 {
    gram.iter().flatten().map(frobenius_sq).sum::<f64>().sqrt()
}

/// `η` through per-cluster Gram partials.
pub fn dec_eta(shards: &[Shard], factors: &CuFactors) -> f64 {
    let parts: Vec<_> = shards.iter().map(|s| s.eta_gram(&factors.eta)).collect();
    eta_from_reduced(&reduce_blocks(&parts))
}

/// `Z_jk = Σ̂_j Υ̃_jk`.
pub fn correction_blocks(factors: &CuFactors, ups_tilde: &[Vec<CMat>]) -> Vec<Vec<CMat>> {
    ups_tilde
        .iter()
        .zip(&factors.sigma_hat)
        .map(|(row, s)| row.iter().map(|x| s * x).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecBeamOutcome {
    pub eta: f64,
    pub nu: f64,
    pub p_q: f64,
    pub scale: f64,
}

/// Inverse-free beamformer step over the shards, sequentially.
pub fn dec_update_w(shards: &mut [Shard], factors: &CuFactors, iteration: usize, p_max: f64) -> Result<DecBeamOutcome> {
    let eta = dec_eta(shards, factors);
    if !(eta > 0.0) {
        return Err(Error::precondition("η = 0: every Φ_k vanishes, the inverse-free step is undefined"));
    }
    let nu = nesterov_weight(iteration);
    let ups: Vec<Vec<CMat>> = shards.iter().map(|s| s.extrapolate(nu)).collect();
    let parts: Vec<_> = shards.iter().zip(&ups).map(|(s, u)| s.extrapolated_products(u)).collect();
    let z = correction_blocks(factors, &reduce_blocks(&parts));
    let q: Vec<Vec<CMat>> = shards
        .iter()
        .zip(&ups)
        .map(|(s, u)| s.correction(u, &factors.y, &z, eta))
        .collect();
    let p_q: f64 = q.iter().map(|qc| qc.iter().map(frobenius_sq).sum::<f64>()).sum();
    let scale = power_scale(p_q, p_max);
    for (s, qc) in shards.iter_mut().zip(q) {
        s.accept(qc.into_iter().map(|x| x.scale(scale)).collect());
    }
    Ok(DecBeamOutcome { eta, nu, p_q, scale })
}

/// `S_kj = G̃_kjᴴ Σ̂_k`.
pub fn tx_blocks(g_tilde: &[Vec<CMat>], factors: &CuFactors) -> Vec<Vec<CMat>> {
    g_tilde
        .iter()
        .zip(&factors.sigma_hat)
        .map(|(row, s)| row.iter().map(|x| x.adjoint() * s).collect())
        .collect()
}

/// Transmit surrogate objective evaluated from reduced products.
pub fn tx_value(g_tilde: &[Vec<CMat>], factors: &CuFactors, constant: f64) -> f64 {
    let mut total = constant;
    for (k, row) in g_tilde.iter().enumerate() {
        total += 2.0 * crate::linalg::trace(&(factors.y[k].adjoint() * &row[k])).re;
        for x in row {
            total -= crate::linalg::trace(&(x.adjoint() * &factors.sigma_hat[k] * x)).re;
        }
    }
    total
}

pub fn tx_constant(gamma: &[CMat], phi: &[CMat], weights: &[f64], noise: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..gamma.len() {
        total += user_constant(&gamma[k], &phi[k], weights[k], noise[k])?;
    }
    Ok(total)
}

pub fn curvature_input(shards: &[Shard], factors: &CuFactors, antennas: usize) -> CurvatureInput {
    let grams: Vec<_> = shards.iter().map(Shard::w_gram).collect();
    let k = factors.y.len();
    let mut totals = vec![0.0; k];
    for s in shards {
        for (t, v) in totals.iter_mut().zip(s.row_norm_sums()) {
            *t += v;
        }
    }
    CurvatureInput {
        antennas,
        y: factors.y.clone(),
        w_gram: reduce_blocks(&grams),
        row_norm_totals: totals,
        sigma_norms: factors.sigma_hat.iter().map(psd_norm).collect(),
    }
}

/// Per-cluster transmit derivative rows, gradients, and the common curvature.
#[derive(Debug, Clone)]
pub struct TxGradient {
    pub derivative: Vec<Vec<CMat>>,
    pub gradient: Vec<Vec<Position>>,
    pub delta: f64,
}

pub fn dec_grad_delta_tx(shards: &[Shard], factors: &CuFactors, paths: &TxPaths) -> TxGradient {
    let parts: Vec<_> = shards.iter().map(Shard::products).collect();
    let s = tx_blocks(&reduce_blocks(&parts), factors);
    let antennas = shards.iter().map(|x| x.positions.len()).sum();
    let input = curvature_input(shards, factors, antennas);
    let derivative: Vec<Vec<CMat>> = shards.iter().map(|x| x.tx_derivative(&factors.y, &s)).collect();
    let gradient = shards.iter().zip(&derivative).map(|(x, d)| x.tx_gradient(d, paths)).collect();
    let delta = shards
        .iter()
        .map(|x| x.curvature_partial(&input, paths))
        .fold(0.0, f64::max);
    TxGradient {
        derivative,
        gradient,
        delta,
    }
}

/// Receive subproblem of user `k` built from reduced products only.
pub fn rx_subproblem(cu: &CuSide, k: usize, g_tilde_k: &[CMat], gamma: &CMat, phi: &CMat) -> Result<RxSubproblem> {
    let sigma = &cu.prm[k];
    let e = identity_plus(gamma);
    let u = sigma * &g_tilde_k[k];
    let linear = (phi * &e * u.adjoint()).scale(cu.weights[k].sqrt());
    let p = hermitize(&(phi * &e * phi.adjoint()));
    let mut sigma_hat = CMat::zeros(sigma.nrows(), sigma.nrows());
    for x in g_tilde_k {
        let v = sigma * x;
        sigma_hat += &v * v.adjoint();
    }
    RxSubproblem::from_parts(
        cu.rx_dirs[k].clone(),
        cu.k0[k],
        linear,
        p,
        hermitize(&sigma_hat),
        user_constant(gamma, phi, cu.weights[k], cu.noise[k])?,
    )
}

/// MM update of user `k`'s receive positions at the CU.
#[allow(clippy::too_many_arguments)]
pub fn dec_update_rx(
    cu: &mut CuSide,
    k: usize,
    g_tilde_k: &[CMat],
    gamma: &CMat,
    phi: &CMat,
    positions: &[Position],
    boxes: &[Cuboid],
    cfg: &MmConfig,
) -> Result<MmOutcome> {
    let sub = rx_subproblem(cu, k, g_tilde_k, gamma, phi)?;
    let out = mm_loop(&sub, positions, boxes, cfg)?;
    cu.set_rx_positions(k, &out.positions);
    Ok(out)
}
