//! Seeded invariant suites: gradients against finite differences, the MM
//! lower bound, curvature dominance, the FP tightness chain and the
//! distributed reduction.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::Position;
use crate::dbp::mul_reduce;
use crate::error::{Error, Result};
use crate::fp::update_auxiliaries;
use crate::linalg::{rel_frobenius_error, CMat};
use crate::mm::{flatten, surrogate_value, FrozenState, PositionObjective, RxSubproblem, TxCurvature, TxSubproblem};
use crate::objective::{f_lag, f_quad, r_max_bound, wsr};
use crate::testkit::{positions_in_boxes, random_cmat, random_instance, Instance, LAMBDA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    GradTx,
    GradRx,
    Majorization,
    Delta,
    Tightness,
    Mul,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::GradTx,
        Suite::GradRx,
        Suite::Majorization,
        Suite::Delta,
        Suite::Tightness,
        Suite::Mul,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::GradTx => "grad-tx",
            Suite::GradRx => "grad-rx",
            Suite::Majorization => "majorization",
            Suite::Delta => "delta",
            Suite::Tightness => "tightness",
            Suite::Mul => "mul",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown suite '{s}'")))
    }
}

/// Outcome of one suite. `margin` is the worst observed value of the checked
/// quantity; the suite passes when it is on the right side of `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub suite: Suite,
    pub passed: bool,
    pub cases: usize,
    pub margin: f64,
    pub threshold: f64,
    pub detail: String,
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<13} {} cases={} margin={:.3e} threshold={:.1e} {}",
            self.suite.name(),
            if self.passed { "PASS" } else { "FAIL" },
            self.cases,
            self.margin,
            self.threshold,
            self.detail
        )
    }
}

/// Instance with auxiliaries taken at the current beamformers.
pub struct Frozen {
    pub inst: Instance,
    pub gamma: Vec<CMat>,
    pub phi: Vec<CMat>,
}

impl Frozen {
    pub fn new(seed: u64, m: usize, n: usize, k: usize, d: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, m, n, k, d);
        let (gamma, phi) = update_auxiliaries(&inst.channels.h, &inst.beams)?;
        Ok(Self { inst, gamma, phi })
    }

    pub fn state(&self) -> FrozenState<'_> {
        FrozenState {
            geometry: &self.inst.geometry,
            w: &self.inst.beams.w,
            gamma: &self.gamma,
            phi: &self.phi,
            weights: &self.inst.beams.weights,
            noise: &self.inst.beams.noise,
        }
    }

    pub fn tx(&self, curvature: TxCurvature) -> Result<TxSubproblem> {
        TxSubproblem::new(&self.state(), &self.inst.channels.f, curvature)
    }

    pub fn rx(&self, k: usize) -> Result<RxSubproblem> {
        RxSubproblem::new(&self.state(), k, &self.inst.channels.g[k])
    }
}

/// Central differences of `p` at `at`, one entry per coordinate.
pub fn central_difference<P: PositionObjective + ?Sized>(p: &P, at: &[Position], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * at.len());
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

/// Symmetrized finite-difference Hessian built from the analytic gradient.
pub fn fd_hessian<P: PositionObjective + ?Sized>(p: &P, at: &[Position], h: f64) -> DMatrix<f64> {
    let n = 3 * at.len();
    let mut hess = DMatrix::zeros(n, n);
    for a in 0..n {
        let mut up = at.to_vec();
        up[a / 3][a % 3] += h;
        let mut dn = at.to_vec();
        dn[a / 3][a % 3] -= h;
        let (gu, gd) = (flatten(&p.gradient(&up)), flatten(&p.gradient(&dn)));
        for b in 0..n {
            hess[(b, a)] = (gu[b] - gd[b]) / (2.0 * h);
        }
    }
    (&hess + hess.transpose()) * 0.5
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigenvalues().iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `max |a − b| / max |b|`.
pub fn rel_inf_error(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

const FD_STEP: f64 = 1e-6 * LAMBDA;
const SMALL: (usize, usize, usize, usize) = (4, 2, 2, 2);

fn small(seed: u64) -> Result<Frozen> {
    let (m, n, k, d) = SMALL;
    Frozen::new(seed, m, n, k, d)
}

fn seed_for(seed: u64, suite: Suite, case: u64) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(suite as u64 * 100_000 + case)
}

fn grad_tx(seed: u64) -> Result<SuiteResult> {
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let fz = small(seed_for(seed, Suite::GradTx, case))?;
        let tx = fz.tx(TxCurvature::Exact)?;
        let t = &fz.inst.layout.tx.positions;
        let fd = central_difference(&tx, t, FD_STEP);
        worst = worst.max(rel_inf_error(&flatten(&tx.gradient(t)), &fd));
    }
    Ok(upper(Suite::GradTx, 20, worst, 1e-5, "max relative FD error"))
}

fn grad_rx(seed: u64) -> Result<SuiteResult> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for case in 0..20 {
        let fz = small(seed_for(seed, Suite::GradRx, case))?;
        for k in 0..fz.inst.dims.users {
            let rx = fz.rx(k)?;
            let r = &fz.inst.layout.rx[k].positions;
            let fd = central_difference(&rx, r, FD_STEP);
            worst = worst.max(rel_inf_error(&flatten(&rx.gradient(r)), &fd));
            cases += 1;
        }
    }
    Ok(upper(Suite::GradRx, cases, worst, 1e-5, "max relative FD error"))
}

/// Smallest relative slack `(f − h)/(1 + |f|)` over random feasible points, and
/// the tangency gap at the anchor.
fn bound_slack<P: PositionObjective, R: Rng>(
    p: &P,
    anchor: &[Position],
    mut sample: impl FnMut(&mut R) -> Vec<Position>,
    rng: &mut R,
    points: usize,
) -> (f64, f64) {
    let f0 = p.value(anchor);
    let grad = p.gradient(anchor);
    let delta = p.delta();
    let tangency = (surrogate_value(f0, anchor, &grad, delta, anchor) - f0).abs() / (1.0 + f0.abs());
    let mut slack = f64::INFINITY;
    for _ in 0..points {
        let at = sample(rng);
        let f = p.value(&at);
        slack = slack.min((f - surrogate_value(f0, anchor, &grad, delta, &at)) / (1.0 + f.abs()));
    }
    (slack, tangency)
}

fn majorization(seed: u64) -> Result<SuiteResult> {
    let mut slack = f64::INFINITY;
    let mut tangency: f64 = 0.0;
    let mut cases = 0;
    for case in 0..10 {
        let s = seed_for(seed, Suite::Majorization, case);
        let fz = small(s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x5eed);
        let tx_layout = fz.inst.layout.tx.clone();
        for curvature in [TxCurvature::Exact, TxCurvature::RowNormBound] {
            let tx = fz.tx(curvature)?;
            let (sl, tg) = bound_slack(&tx, &tx_layout.positions, |r| positions_in_boxes(r, &tx_layout), &mut rng, 100);
            slack = slack.min(sl);
            tangency = tangency.max(tg);
            cases += 1;
        }
        for k in 0..fz.inst.dims.users {
            let rx = fz.rx(k)?;
            let arr = fz.inst.layout.rx[k].clone();
            let (sl, tg) = bound_slack(&rx, &arr.positions, |r| positions_in_boxes(r, &arr), &mut rng, 100);
            slack = slack.min(sl);
            tangency = tangency.max(tg);
            cases += 1;
        }
    }
    let passed = slack >= -1e-9 && tangency <= 1e-12;
    Ok(SuiteResult {
        suite: Suite::Majorization,
        passed,
        cases,
        margin: slack,
        threshold: -1e-9,
        detail: format!("min slack over 100 points per case, tangency gap {tangency:.1e}"),
    })
}

/// Minimum over cases of `δ / ρ(∇²f)`, for the centralized transmit, receive
/// and decentralized transmit constants, and whether the decentralized
/// constant always dominates the centralized one.
pub fn delta_ratios(seed: u64, cases: u64) -> Result<([f64; 3], bool)> {
    let h = 1e-5 * LAMBDA;
    let mut ratios = [f64::INFINITY; 3];
    let mut ordered = true;
    for case in 0..cases {
        let s = seed_for(seed, Suite::Delta, case);
        let fz = small(s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0xde17a);
        let tx = fz.tx(TxCurvature::Exact)?;
        let dec = fz.tx(TxCurvature::RowNormBound)?;
        let t = positions_in_boxes(&mut rng, &fz.inst.layout.tx);
        let rho_tx = spectral_radius(&fd_hessian(&tx, &t, h));
        ratios[0] = ratios[0].min(tx.delta() / rho_tx);
        ratios[2] = ratios[2].min(dec.delta() / rho_tx);
        ordered &= dec.delta() >= tx.delta() * (1.0 - 1e-12);
        for k in 0..fz.inst.dims.users {
            let rx = fz.rx(k)?;
            let r = positions_in_boxes(&mut rng, &fz.inst.layout.rx[k]);
            ratios[1] = ratios[1].min(rx.delta() / spectral_radius(&fd_hessian(&rx, &r, h)));
        }
    }
    Ok((ratios, ordered))
}

fn delta(seed: u64) -> Result<SuiteResult> {
    let (ratios, ordered) = delta_ratios(seed, 20)?;
    let margin = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SuiteResult {
        suite: Suite::Delta,
        passed: margin >= 1.0 && ordered,
        cases: 20,
        margin,
        threshold: 1.0,
        detail: format!(
            "min delta/|Hessian|: tx {:.2} rx {:.2} dec {:.2}; dec >= tx: {ordered}",
            ratios[0], ratios[1], ratios[2]
        ),
    })
}

fn tightness(seed: u64) -> Result<SuiteResult> {
    let mut gap: f64 = 0.0;
    for case in 0..50 {
        let fz = small(seed_for(seed, Suite::Tightness, case))?;
        let h = &fz.inst.channels.h;
        let beams = &fz.inst.beams;
        let r = wsr(h, beams)?;
        let lag = f_lag(h, beams, &fz.gamma)?;
        let quad = f_quad(h, beams, &fz.gamma, &fz.phi)?;
        let scale = r.abs().max(1e-300);
        gap = gap.max((quad - lag).abs() / scale).max((lag - r).abs() / scale);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(seed, Suite::Tightness, 999));
    let mut bound_ratio: f64 = 0.0;
    for _ in 0..1000 {
        let (m, n, k, d) = (rng.random_range(1..=6), rng.random_range(1..=3), rng.random_range(1..=3), 1);
        let d = rng.random_range(d..=n.min(2));
        let inst = random_instance(&mut rng, m, n, k, d);
        let r = wsr(&inst.channels.h, &inst.beams)?;
        bound_ratio = bound_ratio.max(r / r_max_bound(&inst.dims, &inst.geometry, &inst.beams));
    }
    Ok(SuiteResult {
        suite: Suite::Tightness,
        passed: gap <= 1e-8 && bound_ratio <= 1.0,
        cases: 1050,
        margin: gap,
        threshold: 1e-8,
        detail: format!("max R/R_max over 1000 draws {bound_ratio:.3e}"),
    })
}

fn mul(seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(seed, Suite::Mul, 0));
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.random_range(1..=64);
        let (p, q) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let a = random_cmat(&mut rng, m, p);
        let b = random_cmat(&mut rng, m, q);
        let mut cuts: Vec<usize> = (0..rng.random_range(0..m.min(8))).map(|_| rng.random_range(1..m.max(2))).collect();
        cuts.retain(|&c| c < m);
        cuts.extend([0, m]);
        cuts.sort_unstable();
        cuts.dedup();
        let shard = |x: &CMat| -> Vec<CMat> { cuts.windows(2).map(|w| x.rows(w[0], w[1] - w[0]).into_owned()).collect() };
        let reduced = mul_reduce(&shard(&a), &shard(&b))?;
        worst = worst.max(rel_frobenius_error(&reduced, &(a.adjoint() * &b)));
    }
    Ok(upper(Suite::Mul, 100, worst, 1e-12, "max relative error against the unsharded product"))
}

fn upper(suite: Suite, cases: usize, margin: f64, threshold: f64, detail: &str) -> SuiteResult {
    SuiteResult {
        suite,
        passed: margin <= threshold,
        cases,
        margin,
        threshold,
        detail: detail.to_string(),
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteResult> {
    match suite {
        Suite::GradTx => grad_tx(seed),
        Suite::GradRx => grad_rx(seed),
        Suite::Majorization => majorization(seed),
        Suite::Delta => delta(seed),
        Suite::Tightness => tightness(seed),
        Suite::Mul => mul(seed),
    }
}

pub fn run_all(seed: u64) -> Result<Vec<SuiteResult>> {
    Suite::ALL.into_iter().map(|s| run_suite(s, seed)).collect()
}
