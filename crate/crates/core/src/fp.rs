//! Closed-form block updates of the FP reformulation: the auxiliaries `Γ`, `Φ`
//! and the beamformers, either exactly (bisection on the power multiplier) or
//! through the inverse-free non-homogeneous step with Nesterov extrapolation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, hermitian_eigen, identity_plus, solve_hpd, CMat};
use crate::objective::{received_products, sinr_matrix, total_covariance_from_products, total_power, BeamformerSet};

/// `Φ_k = √α_k Ω_k⁻¹ H_k W_k` with `Ω_k` the total received covariance.
pub fn update_phi_from_products(hw: &[Vec<CMat>], weight: f64, noise: f64, k: usize) -> Result<CMat> {
    let omega = total_covariance_from_products(hw, noise, k);
    Ok(solve_hpd(&omega, &hw[k][k])?.scale(weight.sqrt()))
}

pub fn update_phi(h: &[CMat], beams: &BeamformerSet, k: usize) -> Result<CMat> {
    let hw = received_products(h, &beams.w);
    update_phi_from_products(&hw, beams.weights[k], beams.noise[k], k)
}

/// `Γ_k = W_kᴴ H_kᴴ M_k⁻¹ H_k W_k`.
pub fn update_gamma(h: &[CMat], beams: &BeamformerSet, k: usize) -> Result<CMat> {
    let hw = received_products(h, &beams.w);
    sinr_matrix(&hw, beams.noise[k], k)
}

/// Both auxiliaries for every user, evaluated at the same beamformers.
pub fn update_auxiliaries(h: &[CMat], beams: &BeamformerSet) -> Result<(Vec<CMat>, Vec<CMat>)> {
    let hw = received_products(h, &beams.w);
    let mut gamma = Vec::with_capacity(h.len());
    let mut phi = Vec::with_capacity(h.len());
    for k in 0..h.len() {
        gamma.push(sinr_matrix(&hw, beams.noise[k], k).map_err(|e| e.context(format!("Γ of user {k}")))?);
        phi.push(
            update_phi_from_products(&hw, beams.weights[k], beams.noise[k], k)
                .map_err(|e| e.context(format!("Φ of user {k}")))?,
        );
    }
    Ok((gamma, phi))
}

/// Per-user pieces of the beamformer subproblem: `X_k = H_kᴴ Φ_k`,
/// `E_k = I + Γ_k` and the linear term `B_k = √α_k X_k E_k`.
struct Coefficients {
    x: Vec<CMat>,
    e: Vec<CMat>,
    b: Vec<CMat>,
}

fn coefficients(h: &[CMat], weights: &[f64], gamma: &[CMat], phi: &[CMat]) -> Coefficients {
    let x: Vec<CMat> = h.iter().zip(phi).map(|(hk, pk)| hk.adjoint() * pk).collect();
    let e: Vec<CMat> = gamma.iter().map(identity_plus).collect();
    let b = x
        .iter()
        .zip(&e)
        .zip(weights)
        .map(|((xk, ek), a)| (xk * ek).scale(a.sqrt()))
        .collect();
    Coefficients { x, e, b }
}

/// Quadratic coefficient matrix `A = Σ_j H_jᴴ Φ_j (I + Γ_j) Φ_jᴴ H_j` (M × M).
pub fn quadratic_coefficient(h: &[CMat], gamma: &[CMat], phi: &[CMat]) -> CMat {
    let m = h.first().map_or(0, |x| x.ncols());
    let mut a = CMat::zeros(m, m);
    for ((hj, gj), pj) in h.iter().zip(gamma).zip(phi) {
        let x = hj.adjoint() * pj;
        a += &x * identity_plus(gj) * x.adjoint();
    }
    crate::linalg::hermitize(&a)
}

/// Outcome of the exact beamformer update.
#[derive(Debug, Clone, Serialize)]
pub struct BisectionOutcome {
    #[serde(skip)]
    pub w: Vec<CMat>,
    /// Power multiplier; zero when the budget is slack.
    pub mu: f64,
    pub power: f64,
    pub iterations: usize,
}

/// Tolerances of the multiplier search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct BisectionConfig {
    /// Stop when `(P_max − P(μ)) / P_max` drops below this.
    pub rel_power_tol: f64,
    pub max_iterations: usize,
    pub max_doublings: usize,
    /// Eigenvalues of `A` below `null_tol · λ_max` are treated as exact zeros.
    pub null_tol: f64,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self {
            rel_power_tol: 1e-10,
            max_iterations: 200,
            max_doublings: 200,
            null_tol: 1e-12,
        }
    }
}

/// Exact maximizer of `f_quad` over the beamformers under the power budget:
/// `W_k = (A + μI)⁻¹ √α_k H_kᴴ Φ_k (I + Γ_k)`, with `μ` found by bisection.
///
/// One eigendecomposition of `A` makes every evaluation of `P(μ)` cheap.
pub fn update_w_bisection(
    h: &[CMat],
    weights: &[f64],
    gamma: &[CMat],
    phi: &[CMat],
    p_max: f64,
    cfg: &BisectionConfig,
) -> Result<BisectionOutcome> {
    if !(p_max > 0.0) {
        return Err(Error::invalid(format!("power budget must be positive, got {p_max}")));
    }
    let coef = coefficients(h, weights, gamma, phi);
    let m = h.first().map_or(0, |x| x.ncols());
    let mut a = CMat::zeros(m, m);
    for (x, e) in coef.x.iter().zip(&coef.e) {
        a += x * e * x.adjoint();
    }
    let (vals, vecs) = hermitian_eigen(&a);
    let a_max = vals.max().max(0.0);
    let keep: Vec<bool> = vals.iter().map(|&v| v > cfg.null_tol * a_max && v > 0.0).collect();
    // Rotated linear terms with null-space components removed.
    let rotated: Vec<CMat> = coef
        .b
        .iter()
        .map(|b| {
            let mut c = vecs.adjoint() * b;
            for (i, &k) in keep.iter().enumerate() {
                if !k {
                    c.row_mut(i).fill(crate::linalg::ZERO);
                }
            }
            c
        })
        .collect();
    let row_energy: Vec<f64> = (0..m)
        .map(|i| rotated.iter().map(|c| c.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum())
        .collect();
    let power_at = |mu: f64| -> f64 {
        (0..m)
            .filter(|&i| keep[i])
            .map(|i| row_energy[i] / (vals[i] + mu).powi(2))
            .sum()
    };
    let build = |mu: f64| -> Vec<CMat> {
        rotated
            .iter()
            .map(|c| {
                let mut scaled = c.clone();
                for i in 0..m {
                    let s = if keep[i] { 1.0 / (vals[i] + mu) } else { 0.0 };
                    scaled.row_mut(i).scale_mut(s);
                }
                &vecs * scaled
            })
            .collect()
    };

    let p0 = power_at(0.0);
    if !p0.is_finite() {
        return Err(Error::numerical("beamformer power is not finite at μ = 0"));
    }
    if p0 <= p_max {
        return Ok(BisectionOutcome {
            w: build(0.0),
            mu: 0.0,
            power: p0,
            iterations: 0,
        });
    }

    // P(μ) ≤ ‖C‖²/μ² and P(μ) ≥ ‖C‖²/(λ_max + μ)² bracket the root.
    let energy: f64 = row_energy.iter().sum();
    let mut hi = (energy / p_max).sqrt();
    let mut lo = (hi - a_max).max(0.0);
    let mut doublings = 0;
    while power_at(hi) > p_max {
        if doublings == cfg.max_doublings {
            return Err(Error::numerical(format!(
                "power multiplier not bracketed after {doublings} doublings"
            )));
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
    }
    let mut p_hi = power_at(hi);
    let mut iterations = 0;
    while (p_max - p_hi) / p_max >= cfg.rel_power_tol && iterations < cfg.max_iterations {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let p_mid = power_at(mid);
        if p_mid > p_max {
            lo = mid;
        } else {
            hi = mid;
            p_hi = p_mid;
        }
        iterations += 1;
    }
    let mut w = build(hi);
    let mut power = total_power(&w);
    if power > p_max {
        let s = (p_max / power).sqrt();
        w.iter_mut().for_each(|x| x.scale_mut(s));
        power = total_power(&w);
    }
    Ok(BisectionOutcome {
        w,
        mu: hi,
        power,
        iterations,
    })
}

/// `η = ‖A‖_F`, formed explicitly.
pub fn nonhomogeneous_eta(h: &[CMat], gamma: &[CMat], phi: &[CMat]) -> f64 {
    crate::linalg::frobenius(&quadratic_coefficient(h, gamma, phi))
}

/// Factors `P_k = H_kᴴ Φ_k Ξ_k √Λ_k` with `I + Γ_k = Ξ_k Λ_k Ξ_kᴴ`, so that `A = Σ_k P_k P_kᴴ`.
pub fn eta_factors(x: &[CMat], gamma: &[CMat]) -> Result<Vec<CMat>> {
    x.iter()
        .zip(gamma)
        .map(|(xk, gk)| {
            let (vals, vecs) = hermitian_eigen(&identity_plus(gk));
            if vals.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::numerical("I + Γ is not positive definite"));
            }
            let sqrt = CMat::from_diagonal(&vals.map(|v| crate::linalg::real(v.sqrt())));
            Ok(xk * vecs * sqrt)
        })
        .collect()
}

/// `η` from the Gram blocks of the factors: `η² = Σ_{j,k} ‖P_kᴴ P_j‖_F²`.
pub fn eta_from_gram(gram: &[Vec<CMat>]) -> f64 {
    gram.iter().flatten().map(frobenius_sq).sum::<f64>().sqrt()
}

/// `η` through the eigendecomposition of `I + Γ_k`; never forms an M × M matrix.
pub fn eta_via_evd(h: &[CMat], gamma: &[CMat], phi: &[CMat]) -> Result<f64> {
    let x: Vec<CMat> = h.iter().zip(phi).map(|(hk, pk)| hk.adjoint() * pk).collect();
    let p = eta_factors(&x, gamma)?;
    let gram: Vec<Vec<CMat>> = p.iter().map(|pk| p.iter().map(|pj| pk.adjoint() * pj).collect()).collect();
    Ok(eta_from_gram(&gram))
}

/// Extrapolation weight `max((i − 2)/(i + 1), 0)` for outer iteration `i ≥ 1`.
pub fn nesterov_weight(iteration: usize) -> f64 {
    ((iteration as f64 - 2.0) / (iteration as f64 + 1.0)).max(0.0)
}

/// `Υ_k = W̄_k + ν (W̄_k − W̿_k)`.
pub fn extrapolate(current: &[CMat], previous: &[CMat], nu: f64) -> Vec<CMat> {
    current
        .iter()
        .zip(previous)
        .map(|(w, w2)| w + (w - w2).scale(nu))
        .collect()
}

/// Scale that maps unconstrained beamformers onto the power budget.
pub fn power_scale(p_q: f64, p_max: f64) -> f64 {
    if p_q <= p_max {
        1.0
    } else {
        (p_max / p_q).sqrt()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InverseFreeOutcome {
    #[serde(skip)]
    pub w: Vec<CMat>,
    pub eta: f64,
    pub nu: f64,
    pub p_q: f64,
    pub scale: f64,
}

/// Inverse-free beamformer step: `Q_k = Υ_k + (B_k − A Υ_k)/η`, then a
/// common rescaling onto the power budget.
///
/// `current` are the beamformers the auxiliaries were computed at, `previous`
/// the ones before them; `iteration` counts outer iterations from 1.
pub fn update_w_inverse_free(
    h: &[CMat],
    weights: &[f64],
    gamma: &[CMat],
    phi: &[CMat],
    current: &[CMat],
    previous: &[CMat],
    iteration: usize,
    p_max: f64,
) -> Result<InverseFreeOutcome> {
    let coef = coefficients(h, weights, gamma, phi);
    let p = eta_factors(&coef.x, gamma)?;
    let gram: Vec<Vec<CMat>> = p.iter().map(|pk| p.iter().map(|pj| pk.adjoint() * pj).collect()).collect();
    let eta = eta_from_gram(&gram);
    if !(eta > 0.0) {
        return Err(Error::precondition("η = 0: every Φ_k vanishes, the inverse-free step is undefined"));
    }
    let nu = nesterov_weight(iteration);
    let ups = extrapolate(current, previous, nu);
    let q: Vec<CMat> = ups
        .iter()
        .zip(&coef.b)
        .map(|(u, b)| {
            let mut au = CMat::zeros(u.nrows(), u.ncols());
            for ((hj, pj), (xj, ej)) in h.iter().zip(phi).zip(coef.x.iter().zip(&coef.e)) {
                au += xj * (ej * (pj.adjoint() * (hj * u)));
            }
            u + (b - au).unscale(eta)
        })
        .collect();
    let p_q = total_power(&q);
    let scale = power_scale(p_q, p_max);
    let w = q.into_iter().map(|x| x.scale(scale)).collect();
    Ok(InverseFreeOutcome { w, eta, nu, p_q, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs_diff, min_eigenvalue, real, C64};
    use crate::objective::{f_lag, f_quad, wsr};
    use crate::testkit::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar() -> (Vec<CMat>, BeamformerSet) {
        let p = 4.0f64;
        (
            vec![CMat::from_element(1, 1, real(1.0))],
            BeamformerSet {
                w: vec![CMat::from_element(1, 1, real(p.sqrt()))],
                p_max: p,
                weights: vec![1.0],
                noise: vec![1.0],
            },
        )
    }

    #[test]
    fn scalar_auxiliaries() {
        let (h, b) = scalar();
        let phi = update_phi(&h, &b, 0).unwrap();
        assert!((phi[(0, 0)] - real(2.0 / 5.0)).norm() < 1e-15);
        let gamma = update_gamma(&h, &b, 0).unwrap();
        assert!((gamma[(0, 0)] - real(4.0)).norm() < 1e-14);
    }

    #[test]
    fn zero_beam_auxiliaries_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut inst = random_instance(&mut rng, 3, 2, 2, 2);
        inst.beams.w[1].fill(c(0.0, 0.0));
        let (g, p) = update_auxiliaries(&inst.channels.h, &inst.beams).unwrap();
        assert!(g[1].iter().all(|z| z.norm() == 0.0));
        assert!(p[1].iter().all(|z| z.norm() == 0.0));
    }

    fn perturb(m: &CMat, r: usize, col: usize, dz: C64) -> CMat {
        let mut out = m.clone();
        out[(r, col)] += dz;
        out
    }

    #[test]
    fn phi_update_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = random_instance(&mut rng, 4, 2, 2, 2);
        let h = &inst.channels.h;
        let (gamma, phi) = update_auxiliaries(h, &inst.beams).unwrap();
        let step = 1e-5;
        for k in 0..2 {
            for r in 0..2 {
                for col in 0..2 {
                    for dz in [c(step, 0.0), c(0.0, step)] {
                        let mut up = phi.clone();
                        up[k] = perturb(&phi[k], r, col, dz);
                        let mut dn = phi.clone();
                        dn[k] = perturb(&phi[k], r, col, -dz);
                        let g = (f_quad(h, &inst.beams, &gamma, &up).unwrap()
                            - f_quad(h, &inst.beams, &gamma, &dn).unwrap())
                            / (2.0 * step);
                        assert!(g.abs() < 1e-6, "dΦ gradient {g}");
                    }
                }
            }
        }
    }

    #[test]
    fn tightness_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let inst = random_instance(&mut rng, 4, 3, 3, 2);
            let h = &inst.channels.h;
            let (gamma, phi) = update_auxiliaries(h, &inst.beams).unwrap();
            let r = wsr(h, &inst.beams).unwrap();
            let lag = f_lag(h, &inst.beams, &gamma).unwrap();
            let quad = f_quad(h, &inst.beams, &gamma, &phi).unwrap();
            assert!((lag - r).abs() <= 1e-9 * (1.0 + r.abs()));
            assert!((quad - lag).abs() <= 1e-9 * (1.0 + lag.abs()));
            // Per-user term check: α_k log det(I + Γ_k) equals the weighted rate.
            let rates = crate::objective::user_rates(h, &inst.beams).unwrap();
            for k in 0..3 {
                let ld = crate::linalg::logdet_hpd(&identity_plus(&gamma[k])).unwrap();
                assert!((ld - rates[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn random_phi_quad_below_lag() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = random_instance(&mut rng, 4, 3, 3, 2);
        let h = &inst.channels.h;
        let (gamma, _) = update_auxiliaries(h, &inst.beams).unwrap();
        let lag = f_lag(h, &inst.beams, &gamma).unwrap();
        for _ in 0..100 {
            let phi: Vec<CMat> = (0..3).map(|_| random_cmat(&mut rng, 3, 2).scale(0.3)).collect();
            assert!(f_quad(h, &inst.beams, &gamma, &phi).unwrap() <= lag + 1e-9 * (1.0 + lag.abs()));
        }
    }

    #[test]
    fn bisection_slack_branch_returns_zero_multiplier() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = random_instance(&mut rng, 4, 2, 2, 2);
        let h = &inst.channels.h;
        let (gamma, phi) = update_auxiliaries(h, &inst.beams).unwrap();
        let out = update_w_bisection(h, &inst.beams.weights, &gamma, &phi, 1e12, &BisectionConfig::default()).unwrap();
        assert_eq!(out.mu, 0.0);
        assert!(out.power <= 1e12);
    }

    #[test]
    fn bisection_meets_budget_and_ascends() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let inst = random_instance(&mut rng, 4, 2, 3, 2);
            let h = &inst.channels.h;
            let (gamma, phi) = update_auxiliaries(h, &inst.beams).unwrap();
            let before = f_quad(h, &inst.beams, &gamma, &phi).unwrap();
            let p = inst.beams.p_max;
            let out = update_w_bisection(h, &inst.beams.weights, &gamma, &phi, p, &BisectionConfig::default()).unwrap();
            if out.mu > 0.0 {
                assert!(out.power >= p * (1.0 - 1e-6) && out.power <= p, "{} vs {p}", out.power);
            } else {
                assert!(out.power <= p);
            }
            let after = f_quad(h, &inst.beams.with_w(out.w), &gamma, &phi).unwrap();
            assert!(after >= before - 1e-8 * (1.0 + before.abs()), "{after} < {before}");
        }
    }

    #[test]
    fn bisection_update_is_stationary_for_lagrangian() {
        // Unequal weights make the placement of √α observable.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let mut inst = random_instance(&mut rng, 4, 2, 3, 2);
            inst.beams.weights = vec![0.3, 1.0, 2.5];
            let h = &inst.channels.h;
            let (gamma, phi) = update_auxiliaries(h, &inst.beams).unwrap();
            let out = update_w_bisection(h, &inst.beams.weights, &gamma, &phi, inst.beams.p_max, &BisectionConfig::default())
                .unwrap();
            let lagrangian = |w: &[CMat]| {
                f_quad(h, &inst.beams.with_w(w.to_vec()), &gamma, &phi).unwrap()
                    - out.mu * (total_power(w) - inst.beams.p_max)
            };
            let step = 1e-5;
            let mut worst: f64 = 0.0;
            for k in 0..3 {
                for r in 0..4 {
                    for col in 0..2 {
                        for dz in [c(step, 0.0), c(0.0, step)] {
                            let mut up = out.w.clone();
                            up[k] = perturb(&out.w[k], r, col, dz);
                            let mut dn = out.w.clone();
                            dn[k] = perturb(&out.w[k], r, col, -dz);
                            worst = worst.max(((lagrangian(&up) - lagrangian(&dn)) / (2.0 * step)).abs());
                        }
                    }
                }
            }
            assert!(worst <= 1e-6, "Lagrangian gradient {worst}");
        }
    }

    #[test]
    fn eta_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inst = random_instance(&mut rng, 4, 2, 2, 2);
        let h = &inst.channels.h;
        let zeros = vec![CMat::zeros(2, 2); 2];
        assert_eq!(nonhomogeneous_eta(h, &zeros, &zeros), 0.0);

        // Scalar chain: K = 1, d = 1, N = 1.
        let hv = random_cmat(&mut rng, 1, 3);
        let phi = c(0.4, -0.3);
        let gamma = 1.7f64;
        let eta = nonhomogeneous_eta(
            &[hv.clone()],
            &[CMat::from_element(1, 1, real(gamma))],
            &[CMat::from_element(1, 1, phi)],
        );
        let hand = phi.norm_sqr() * (1.0 + gamma) * frobenius_sq(&hv);
        assert!((eta - hand).abs() < 1e-12 * hand);

        for _ in 0..20 {
            let inst = random_instance(&mut rng, 5, 3, 3, 2);
            let h = &inst.channels.h;
            let (gamma, phi) = update_auxiliaries(h, &inst.beams).unwrap();
            let a = nonhomogeneous_eta(h, &gamma, &phi);
            let b = eta_via_evd(h, &gamma, &phi).unwrap();
            assert!((a - b).abs() <= 1e-10 * a);
            let q = quadratic_coefficient(h, &gamma, &phi);
            let gap = crate::linalg::identity(5).scale(a) - q;
            assert!(min_eigenvalue(&gap) >= -1e-9 * a);
        }
    }

    #[test]
    fn nesterov_weights() {
        assert_eq!(nesterov_weight(1), 0.0);
        assert_eq!(nesterov_weight(2), 0.0);
        assert_eq!(nesterov_weight(5), 0.5);
    }

    #[test]
    fn inverse_free_without_extrapolation_ascends() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let inst = random_instance(&mut rng, 4, 2, 3, 2);
            let h = &inst.channels.h;
            let (gamma, phi) = update_auxiliaries(h, &inst.beams).unwrap();
            let before = f_quad(h, &inst.beams, &gamma, &phi).unwrap();
            let out = update_w_inverse_free(
                h,
                &inst.beams.weights,
                &gamma,
                &phi,
                &inst.beams.w,
                &inst.beams.w,
                1,
                inst.beams.p_max,
            )
            .unwrap();
            assert_eq!(out.nu, 0.0);
            assert!(total_power(&out.w) <= inst.beams.p_max * (1.0 + 1e-12));
            let after = f_quad(h, &inst.beams.with_w(out.w), &gamma, &phi).unwrap();
            assert!(after >= before - 1e-9 * (1.0 + before.abs()));
        }
    }

    #[test]
    fn inverse_free_keeps_q_when_under_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let inst = random_instance(&mut rng, 4, 2, 2, 2);
        let h = &inst.channels.h;
        let (gamma, phi) = update_auxiliaries(h, &inst.beams).unwrap();
        let out = update_w_inverse_free(h, &inst.beams.weights, &gamma, &phi, &inst.beams.w, &inst.beams.w, 3, 1e12).unwrap();
        assert_eq!(out.scale, 1.0);
        // Recompute Q directly with the explicit A.
        let a = quadratic_coefficient(h, &gamma, &phi);
        for k in 0..2 {
            let b = (h[k].adjoint() * &phi[k] * identity_plus(&gamma[k])).scale(inst.beams.weights[k].sqrt());
            let q = &inst.beams.w[k] + (b - &a * &inst.beams.w[k]).unscale(out.eta);
            assert!(max_abs_diff(&q, &out.w[k]) < 1e-10 * (1.0 + crate::linalg::frobenius(&q)));
        }
    }

    #[test]
    fn inverse_free_rejects_zero_eta() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
    let inst = random_instance(&mut rng, 3, 2, 2, 1);
        let zg = vec![CMat::zeros(1, 1); 2];
        let zp = vec![CMat::zeros(2, 1); 2];
        let r = update_w_inverse_free(&inst.channels.h, &inst.beams.weights, &zg, &zp, &inst.beams.w, &inst.beams.w, 1, 1.0);
        assert!(matches!(r, Err(Error::PreconditionViolation(_))));
    }
}
