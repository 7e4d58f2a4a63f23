//! Majorization–maximization of `f_quad` over antenna positions.
//!
//! With the beamformers and auxiliaries frozen, `f_quad` depends on the
//! transmit positions only through the FRMs `G_k` and on the receive positions
//! of user `k` only through `F_k`. Each subproblem below freezes everything
//! else and exposes the value, the analytic gradient and a curvature constant
//! `δ` that dominates the Hessian for every layout, so that
//! `h(T|T̄) = f(T̄) + ∇f(T̄)ᵀ(T − T̄) − δ/2 ‖T − T̄‖²` is a global lower bound.

use serde::{Deserialize, Serialize};

use crate::channel::{field_response_matrix, Cuboid, PathGeometry, Position, Side};
use crate::error::{Error, Result};
use crate::linalg::{identity_plus, logdet_hpd, psd_norm, row_norm, trace, CMat};

/// Which bound is used for `Σ_j |Ŵ_mj|` in the transmit curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TxCurvature {
    /// Exact row sums of `Ŵ = Σ_k W_k W_kᴴ`.
    #[default]
    Exact,
    /// `Σ_t ‖w_tm‖ Σ_j ‖w_tj‖`, computable from per-cluster row norms.
    RowNormBound,
}

/// Frozen data shared by the position subproblems.
pub struct FrozenState<'a> {
    pub geometry: &'a [PathGeometry],
    pub w: &'a [CMat],
    pub gamma: &'a [CMat],
    pub phi: &'a [CMat],
    pub weights: &'a [f64],
    pub noise: &'a [f64],
}

impl FrozenState<'_> {
    fn constant(&self, k: usize) -> Result<f64> {
        user_constant(&self.gamma[k], &self.phi[k], self.weights[k], self.noise[k])
    }

    fn w_hat(&self) -> CMat {
        let m = self.w[0].nrows();
        let mut out = CMat::zeros(m, m);
        for w in self.w {
            out += w * w.adjoint();
        }
        crate::linalg::hermitize(&out)
    }
}

/// Position-independent part of one user's `f_quad` term.
pub fn user_constant(gamma: &CMat, phi: &CMat, weight: f64, noise: f64) -> Result<f64> {
    let e = identity_plus(gamma);
    Ok(weight * (logdet_hpd(&e)? - trace(gamma).re) - noise * trace(&(&e * phi.adjoint() * phi)).re)
}

/// A smooth function of antenna positions with a global curvature bound.
pub trait PositionObjective {
    fn value(&self, positions: &[Position]) -> f64;
    /// Gradient with respect to each position.
    fn gradient(&self, positions: &[Position]) -> Vec<Position>;
    /// Curvature constant valid for every layout.
    fn delta(&self) -> f64;
}

/// `Im(D_mq · G_qm)` summed against the path directions, scaled by `−2k₀`.
fn accumulate_gradient(grad: &mut [Position], d: &CMat, frm: &CMat, dirs: &[Position], k0: f64) {
    for (m, g) in grad.iter_mut().enumerate() {
        for (q, dir) in dirs.iter().enumerate() {
            *g -= dir * (2.0 * k0 * (d[(m, q)] * frm[(q, m)]).im);
        }
    }
}

/// The transmit-position subproblem.
pub struct TxSubproblem {
    dirs: Vec<Vec<Position>>,
    k0: Vec<f64>,
    /// `√α_k W_k (I + Γ_k) Φ_kᴴ F_kᴴ Σ_k`, `M × L_tx`.
    linear: Vec<CMat>,
    /// `Σ̂_k = Σ_kᴴ F_k Φ_k (I + Γ_k) Φ_kᴴ F_kᴴ Σ_k`.
    sigma_hat: Vec<CMat>,
    w: Vec<CMat>,
    w_hat: CMat,
    constant: f64,
    delta: f64,
}

impl TxSubproblem {
    /// `f` are the receive FRMs at the current receive layout.
    pub fn new(state: &FrozenState, f: &[CMat], curvature: TxCurvature) -> Result<Self> {
        let k_users = state.w.len();
        let mut linear = Vec::with_capacity(k_users);
        let mut sigma_hat = Vec::with_capacity(k_users);
        let mut constant = 0.0;
        for k in 0..k_users {
            let e = identity_plus(&state.gamma[k]);
            let v = state.geometry[k].prm.adjoint() * &f[k] * &state.phi[k];
            linear.push((&state.w[k] * &e * v.adjoint()).scale(state.weights[k].sqrt()));
            sigma_hat.push(crate::linalg::hermitize(&(&v * &e * v.adjoint())));
            constant += state.constant(k)?;
        }
        let w_hat = state.w_hat();
        let mut sub = Self {
            dirs: state.geometry.iter().map(|g| g.directions(Side::Tx)).collect(),
            k0: state.geometry.iter().map(PathGeometry::wavenumber).collect(),
            linear,
            sigma_hat,
            w: state.w.to_vec(),
            w_hat,
            constant,
            delta: 0.0,
        };
        sub.delta = sub.curvature(curvature);
        Ok(sub)
    }

    pub fn frms(&self, positions: &[Position]) -> Vec<CMat> {
        self.dirs
            .iter()
            .zip(&self.k0)
            .map(|(d, k0)| field_response_matrix(d, *k0, positions))
            .collect()
    }

    /// `D_k = (∂f/∂G_k)ᵀ = √α_k W_k(I+Γ_k)Φ_kᴴF_kᴴΣ_k − Ŵ G_kᴴ Σ̂_k`, with
    /// `Ŵ G_kᴴ` formed as `Σ_j W_j (G_k W_j)ᴴ`.
    pub fn derivative(&self, k: usize, g: &CMat) -> CMat {
        let mut d = self.linear[k].clone();
        for wj in &self.w {
            d -= wj * ((g * wj).adjoint() * &self.sigma_hat[k]);
        }
        d
    }

    pub fn w_hat(&self) -> &CMat {
        &self.w_hat
    }

    /// Transmit curvature constant; see [`TxCurvature`] for the row-sum term.
    fn curvature(&self, mode: TxCurvature) -> f64 {
        let m = self.w_hat.nrows();
        let sqrt_m = (m as f64).sqrt();
        let row_sums: Vec<f64> = match mode {
            TxCurvature::Exact => (0..m).map(|i| self.w_hat.row(i).iter().map(|z| z.norm()).sum()).collect(),
            TxCurvature::RowNormBound => {
                let norms: Vec<Vec<f64>> = self.w.iter().map(|w| (0..m).map(|i| row_norm(w, i)).collect()).collect();
                let totals: Vec<f64> = norms.iter().map(|n| n.iter().sum()).collect();
                (0..m).map(|i| norms.iter().zip(&totals).map(|(n, t)| n[i] * t).sum()).collect()
            }
        };
        let sig_norms: Vec<f64> = self.sigma_hat.iter().map(psd_norm).collect();
        (0..m)
            .map(|i| {
                let shared = row_sums[i] + sqrt_m * row_norm(&self.w_hat, i);
                (0..self.w.len())
                    .map(|k| {
                        let l = self.dirs[k].len() as f64;
                        6.0 * self.k0[k].powi(2) * l * (shared * sig_norms[k] + row_norm(&self.linear[k], i) / l.sqrt())
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

impl PositionObjective for TxSubproblem {
    fn value(&self, positions: &[Position]) -> f64 {
        let mut total = self.constant;
        for (k, g) in self.frms(positions).iter().enumerate() {
            total += 2.0 * trace(&(&self.linear[k] * g)).re;
            for wj in &self.w {
                let gw = g * wj;
                total -= trace(&(gw.adjoint() * &self.sigma_hat[k] * &gw)).re;
            }
        }
        total
    }

    fn gradient(&self, positions: &[Position]) -> Vec<Position> {
        let mut grad = vec![Position::zeros(); positions.len()];
        for (k, g) in self.frms(positions).iter().enumerate() {
            let d = self.derivative(k, g);
            accumulate_gradient(&mut grad, &d, g, &self.dirs[k], self.k0[k]);
        }
        grad
    }

    fn delta(&self) -> f64 {
        self.delta
    }
}

/// The receive-position subproblem of one user.
pub struct RxSubproblem {
    dirs: Vec<Position>,
    k0: f64,
    /// `√α_k Φ_k (I + Γ_k) W_kᴴ G_kᴴ Σ_kᴴ`, `N × L_rx`.
    linear: CMat,
    /// `Φ_k (I + Γ_k) Φ_kᴴ`.
    p: CMat,
    /// `Σ̂ᴿˣ_k = Σ_k G_k Ŵ G_kᴴ Σ_kᴴ`.
    sigma_hat: CMat,
    constant: f64,
    delta: f64,
}

impl RxSubproblem {
    /// Builds user `k`'s subproblem from its transmit FRM `g` at the current transmit layout.
    pub fn new(state: &FrozenState, k: usize, g: &CMat) -> Result<Self> {
        let sigma = &state.geometry[k].prm;
        let e = identity_plus(&state.gamma[k]);
        let u = sigma * g * &state.w[k];
        let linear = (&state.phi[k] * &e * u.adjoint()).scale(state.weights[k].sqrt());
        let p = crate::linalg::hermitize(&(&state.phi[k] * &e * state.phi[k].adjoint()));
        let mut sigma_hat = CMat::zeros(sigma.nrows(), sigma.nrows());
        for wj in state.w {
            let x = sigma * (g * wj);
            sigma_hat += &x * x.adjoint();
        }
        Self::from_parts(
            state.geometry[k].directions(Side::Rx),
            state.geometry[k].wavenumber(),
            linear,
            p,
            crate::linalg::hermitize(&sigma_hat),
            state.constant(k)?,
        )
    }

    /// Assembles the subproblem from already reduced blocks.
    pub fn from_parts(dirs: Vec<Position>, k0: f64, linear: CMat, p: CMat, sigma_hat: CMat, constant: f64) -> Result<Self> {
        if linear.ncols() != dirs.len() || sigma_hat.nrows() != dirs.len() || p.nrows() != linear.nrows() {
            return Err(Error::invalid("receive subproblem blocks have inconsistent shapes"));
        }
        let mut sub = Self {
            dirs,
            k0,
            linear,
            p,
            sigma_hat,
            constant,
            delta: 0.0,
        };
        sub.delta = sub.curvature();
        Ok(sub)
    }

    pub fn frm(&self, positions: &[Position]) -> CMat {
        field_response_matrix(&self.dirs, self.k0, positions)
    }

    /// `D_kᴿˣ = √α_k Φ_k(I+Γ_k)W_kᴴG_kᴴΣ_kᴴ − Φ_k(I+Γ_k)Φ_kᴴ F_kᴴ Σ̂ᴿˣ_k`.
    pub fn derivative(&self, f: &CMat) -> CMat {
        &self.linear - &self.p * f.adjoint() * &self.sigma_hat
    }

    fn curvature(&self) -> f64 {
        let n = self.p.nrows();
        let l = self.dirs.len() as f64;
        let sig = psd_norm(&self.sigma_hat);
        (0..n)
            .map(|i| {
                let row_sum: f64 = self.p.row(i).iter().map(|z| z.norm()).sum();
                let shared = row_sum + (n as f64).sqrt() * row_norm(&self.p, i);
                6.0 * self.k0.powi(2) * l * (shared * sig + row_norm(&self.linear, i) / l.sqrt())
            })
            .fold(0.0, f64::max)
    }
}

impl PositionObjective for RxSubproblem {
    fn value(&self, positions: &[Position]) -> f64 {
        let f = self.frm(positions);
        self.constant + 2.0 * trace(&(&self.linear * &f)).re
            - trace(&(&self.p * f.adjoint() * &self.sigma_hat * &f)).re
    }

    fn gradient(&self, positions: &[Position]) -> Vec<Position> {
        let f = self.frm(positions);
        let d = self.derivative(&f);
        let mut grad = vec![Position::zeros(); positions.len()];
        accumulate_gradient(&mut grad, &d, &f, &self.dirs, self.k0);
        grad
    }

    fn delta(&self) -> f64 {
        self.delta
    }
}

/// Flattens per-antenna 3-vectors into `[x_1, y_1, z_1, x_2, ...]`.
pub fn flatten(v: &[Position]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

/// Value of the quadratic minorizer `h(T | T̄)`.
pub fn surrogate_value(anchor_value: f64, anchor: &[Position], grad: &[Position], delta: f64, at: &[Position]) -> f64 {
    let mut lin = 0.0;
    let mut sq = 0.0;
    for ((t, a), g) in at.iter().zip(anchor).zip(grad) {
        let d = t - a;
        lin += g.dot(&d);
        sq += d.norm_squared();
    }
    anchor_value + lin - 0.5 * delta * sq
}

/// Step of one antenna: unconstrained surrogate maximizer projected onto its box.
pub fn mm_step_single(anchor: &Position, grad: &Position, delta: f64, region: &Cuboid) -> Position {
    region.clamp(&(anchor + grad / delta))
}

/// Closed-form surrogate maximizer, projected onto the boxes.
pub fn mm_step(anchor: &[Position], grad: &[Position], delta: f64, boxes: &[Cuboid]) -> Result<Vec<Position>> {
    if anchor.len() != grad.len() || anchor.len() != boxes.len() {
        return Err(Error::invalid("positions, gradient and boxes differ in length"));
    }
    if !(delta > 0.0) {
        if grad.iter().all(|g| g.norm() == 0.0) {
            return Ok(anchor.to_vec());
        }
        return Err(Error::precondition(format!("curvature δ = {delta} with a nonzero gradient")));
    }
    Ok(anchor
        .iter()
        .zip(grad)
        .zip(boxes)
        .map(|((a, g), b)| mm_step_single(a, g, delta, b))
        .collect())
}

/// Stopping rule of the inner MM loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmConfig {
    /// Relative improvement below which the loop stops.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for MmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MmOutcome {
    pub positions: Vec<Position>,
    /// Objective value before the first step and after every step.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

/// Repeats gradient and projected step until the relative improvement of the
/// objective falls below `cfg.tol`.
pub fn mm_loop<P: PositionObjective + ?Sized>(
    problem: &P,
    start: &[Position],
    boxes: &[Cuboid],
    cfg: &MmConfig,
) -> Result<MmOutcome> {
    let mut positions = start.to_vec();
    let mut value = problem.value(&positions);
    let mut trace = vec![value];
    let delta = problem.delta();
    if !(delta > 0.0) {
        return Ok(MmOutcome {
            positions,
            trace,
            iterations: 0,
        });
    }
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        let grad = problem.gradient(&positions);
        let next = mm_step(&positions, &grad, delta, boxes)?;
        let next_value = problem.value(&next);
        iterations += 1;
        positions = next;
        trace.push(next_value);
        let improvement = next_value - value;
        value = next_value;
        if improvement <= cfg.tol * value.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(MmOutcome {
        positions,
        trace,
        iterations,
    })
}

/// A pair of antennas whose linearized separation falls below `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationViolation {
    pub first: usize,
    pub second: usize,
    pub linearized: f64,
}

/// Checks `(t̄_m − t̄_m')ᵀ(t_m − t_m') / ‖t̄_m − t̄_m'‖ ≥ D` for all pairs.
pub fn linearized_separation_check(
    positions: &[Position],
    anchor: &[Position],
    min_sep: f64,
) -> Result<(bool, Vec<SeparationViolation>)> {
    if positions.len() != anchor.len() {
        return Err(Error::invalid("layout and anchor differ in length"));
    }
    let mut violations = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let a = anchor[i] - anchor[j];
            let norm = a.norm();
            if norm == 0.0 {
                return Err(Error::invalid(format!("anchor antennas {i} and {j} coincide")));
            }
            let lin = a.dot(&(positions[i] - positions[j])) / norm;
            if lin < min_sep {
                violations.push(SeparationViolation {
                    first: i,
                    second: j,
                    linearized: lin,
                });
            }
        }
    }
    Ok((violations.is_empty(), violations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fp::update_auxiliaries;
    use crate::objective::f_quad;
    use crate::testkit::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Frozen {
        inst: Instance,
        gamma: Vec<CMat>,
        phi: Vec<CMat>,
    }

    fn frozen(seed: u64, m: usize, n: usize, k: usize, d: usize) -> Frozen {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, m, n, k, d);
        let (gamma, phi) = update_auxiliaries(&inst.channels.h, &inst.beams).unwrap();
        Frozen { inst, gamma, phi }
    }

    impl Frozen {
        fn state(&self) -> FrozenState<'_> {
            FrozenState {
                geometry: &self.inst.geometry,
                w: &self.inst.beams.w,
                gamma: &self.gamma,
                phi: &self.phi,
                weights: &self.inst.beams.weights,
                noise: &self.inst.beams.noise,
            }
        }

        fn tx(&self) -> TxSubproblem {
            TxSubproblem::new(&self.state(), &self.inst.channels.f, TxCurvature::Exact).unwrap()
        }

        fn f_quad_at_tx(&self, t: &[Position]) -> f64 {
            let mut inst = self.inst.clone();
            inst.layout.tx.positions = t.to_vec();
            inst.refresh();
            f_quad(&inst.channels.h, &inst.beams, &self.gamma, &self.phi).unwrap()
        }
    }

    #[test]
    fn tx_value_matches_full_objective() {
        let fz = frozen(1, 4, 2, 2, 2);
        let tx = fz.tx();
        let t = &fz.inst.layout.tx.positions;
        let full = fz.f_quad_at_tx(t);
        assert!((tx.value(t) - full).abs() < 1e-10 * (1.0 + full.abs()));
    }

    #[test]
    fn rx_values_sum_to_full_objective() {
        let fz = frozen(2, 4, 3, 3, 2);
        let full = f_quad(&fz.inst.channels.h, &fz.inst.beams, &fz.gamma, &fz.phi).unwrap();
        let total: f64 = (0..3)
            .map(|k| {
                let rx = RxSubproblem::new(&fz.state(), k, &fz.inst.channels.g[k]).unwrap();
                rx.value(&fz.inst.layout.rx[k].positions)
            })
            .sum();
        assert!((total - full).abs() < 1e-10 * (1.0 + full.abs()));
    }

    fn central_difference<P: PositionObjective>(p: &P, at: &[Position], h: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for m in 0..at.len() {
            for axis in 0..3 {
                let mut up = at.to_vec();
                up[m][axis] += h;
                let mut dn = at.to_vec();
                dn[m][axis] -= h;
                out.push((p.value(&up) - p.value(&dn)) / (2.0 * h));
            }
        }
        out
    }

    fn rel_inf_error(a: &[f64], b: &[f64]) -> f64 {
        let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let den = b.iter().map(|x| x.abs()).fold(0.0, f64::max);
        num / den
    }

    #[test]
    fn tx_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let fz = frozen(10 + seed, 4, 2, 2, 2);
            let tx = fz.tx();
            let t = &fz.inst.layout.tx.positions;
            let fd = central_difference(&tx, t, 1e-6 * LAMBDA);
            let g = flatten(&tx.gradient(t));
            assert!(rel_inf_error(&g, &fd) < 1e-5, "seed {seed}: {}", rel_inf_error(&g, &fd));
        }
    }

    #[test]
    fn rx_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let fz = frozen(20 + seed, 4, 2, 2, 2);
            for k in 0..2 {
                let rx = RxSubproblem::new(&fz.state(), k, &fz.inst.channels.g[k]).unwrap();
                let r = &fz.inst.layout.rx[k].positions;
                let fd = central_difference(&rx, r, 1e-6 * LAMBDA);
                let g = flatten(&rx.gradient(r));
                assert!(rel_inf_error(&g, &fd) < 1e-5);
            }
        }
    }

    #[test]
    fn zero_beams_give_zero_gradient_and_curvature() {
        let mut fz = frozen(3, 4, 2, 2, 2);
        fz.inst.beams.w.iter_mut().for_each(|w| w.fill(crate::linalg::ZERO));
        fz.phi.iter_mut().for_each(|p| p.fill(crate::linalg::ZERO));
        let tx = fz.tx();
        assert_eq!(tx.delta(), 0.0);
        assert!(tx.gradient(&fz.inst.layout.tx.positions).iter().all(|g| g.norm() == 0.0));
        let rx = RxSubproblem::new(&fz.state(), 0, &fz.inst.channels.g[0]).unwrap();
        assert_eq!(rx.delta(), 0.0);
    }

    #[test]
    fn row_norm_bound_dominates_exact_curvature() {
        for seed in 0..20 {
            let fz = frozen(30 + seed, 6, 2, 3, 2);
            let exact = fz.tx().delta();
            let loose = TxSubproblem::new(&fz.state(), &fz.inst.channels.f, TxCurvature::RowNormBound)
                .unwrap()
                .delta();
            assert!(loose >= exact * (1.0 - 1e-12));
        }
    }

    #[test]
    fn majorization_and_ascent() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let fz = frozen(41, 4, 2, 2, 2);
        let tx = fz.tx();
        let anchor = fz.inst.layout.tx.positions.clone();
        let f0 = tx.value(&anchor);
        let grad = tx.gradient(&anchor);
        let delta = tx.delta();
        assert!((surrogate_value(f0, &anchor, &grad, delta, &anchor) - f0).abs() < 1e-12);
        for _ in 0..100 {
            let t = positions_in_boxes(&mut rng, &fz.inst.layout.tx);
            let f = tx.value(&t);
            assert!(f >= surrogate_value(f0, &anchor, &grad, delta, &t) - 1e-9 * (1.0 + f.abs()));
        }
        let next = mm_step(&anchor, &grad, delta, &fz.inst.layout.tx.boxes).unwrap();
        let h_next = surrogate_value(f0, &anchor, &grad, delta, &next);
        assert!(tx.value(&next) >= h_next - 1e-12 && h_next >= f0 - 1e-12);
    }

    #[test]
    fn step_fixed_point_and_passthrough() {
        let boxes = vec![Cuboid::new([-1.0; 3], [1.0; 3]); 2];
        let anchor = vec![Position::zeros(), Position::new(0.1, 0.2, 0.3)];
        let zero = vec![Position::zeros(); 2];
        assert_eq!(mm_step(&anchor, &zero, 2.0, &boxes).unwrap(), anchor);
        let g = vec![Position::new(0.2, 0.0, 0.0), Position::new(0.0, -0.2, 0.0)];
        let next = mm_step(&anchor, &g, 2.0, &boxes).unwrap();
        assert_eq!(next[0], Position::new(0.1, 0.0, 0.0));
        assert_eq!(next[1], Position::new(0.1, 0.1, 0.3));
        assert!(matches!(mm_step(&anchor, &g, 0.0, &boxes), Err(Error::PreconditionViolation(_))));
    }

    #[test]
    fn parallel_step_equals_per_antenna_steps() {
        let fz = frozen(50, 6, 2, 2, 2);
        let tx = fz.tx();
        let anchor = &fz.inst.layout.tx.positions;
        let grad = tx.gradient(anchor);
        let all = mm_step(anchor, &grad, tx.delta(), &fz.inst.layout.tx.boxes).unwrap();
        for m in 0..anchor.len() {
            assert_eq!(all[m], mm_step_single(&anchor[m], &grad[m], tx.delta(), &fz.inst.layout.tx.boxes[m]));
        }
    }

    #[test]
    fn mm_loop_trace_is_monotone() {
        for seed in 0..10 {
            let fz = frozen(60 + seed, 4, 2, 2, 2);
            let tx = fz.tx();
            let out = mm_loop(&tx, &fz.inst.layout.tx.positions, &fz.inst.layout.tx.boxes, &MmConfig::default()).unwrap();
            for w in out.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()));
            }
            assert!(out.positions.iter().zip(&fz.inst.layout.tx.boxes).all(|(p, b)| b.contains(p)));
        }
    }

    #[test]
    fn separation_check_cases() {
        let d = 1.0;
        let layout = vec![Position::zeros(), Position::new(1.5, 0.0, 0.0), Position::new(0.0, 2.0, 0.0)];
        assert!(linearized_separation_check(&layout, &layout, d).unwrap().0);
        let close = vec![Position::zeros(), Position::new(d - 0.01, 0.0, 0.0)];
        let anchor = vec![Position::zeros(), Position::new(0.5, 0.0, 0.0)];
        let (ok, v) = linearized_separation_check(&close, &anchor, d).unwrap();
        assert!(!ok && v.len() == 1 && v[0].first == 0 && v[0].second == 1);
        let same = vec![Position::zeros(); 2];
        assert!(linearized_separation_check(&close, &same, d).is_err());
    }

    #[test]
    fn rx_gradient_ignores_other_users_layouts() {
        let fz = frozen(70, 4, 2, 3, 1);
        let rx = RxSubproblem::new(&fz.state(), 0, &fz.inst.channels.g[0]).unwrap();
        let before = rx.gradient(&fz.inst.layout.rx[0].positions);
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let mut moved = fz.inst.clone();
        moved.layout.rx[1].positions = positions_in_boxes(&mut rng, &moved.layout.rx[1]);
        moved.refresh();
        let fz2 = Frozen {
            inst: moved,
            gamma: fz.gamma.clone(),
            phi: fz.phi.clone(),
        };
        let rx2 = RxSubproblem::new(&fz2.state(), 0, &fz2.inst.channels.g[0]).unwrap();
        assert_eq!(before, rx2.gradient(&fz2.inst.layout.rx[0].positions));
    }
}
