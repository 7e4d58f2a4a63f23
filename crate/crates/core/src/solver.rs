//! Centralized block coordinate ascent: auxiliaries, beamformers, transmit
//! positions and receive positions, updated cyclically until the weighted sum
//! rate settles.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::{assemble_channels, AntennaLayout, ChannelSet, PathGeometry, Position, SystemDims};
use crate::error::{Error, Result};
use crate::fp::{update_auxiliaries, update_w_bisection, update_w_inverse_free, BisectionConfig};
use crate::linalg::{CMat, MatrixRecord};
use crate::mm::{mm_loop, FrozenState, MmConfig, RxSubproblem, TxCurvature, TxSubproblem};
use crate::objective::{f_quad, nats_to_bits, r_max_bound, total_power, wsr, AuxiliaryState, BeamformerSet};

/// How the beamformer block is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BeamformerMode {
    /// Exact update with a bisection search over the power multiplier.
    #[default]
    Bisection,
    /// Non-homogeneous inverse-free step with Nesterov extrapolation.
    InverseFree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_outer: usize,
    /// Relative WSR change that counts as converged.
    pub tol_outer: f64,
    pub mm: MmConfig,
    pub bisection: BisectionConfig,
    pub optimize_t: bool,
    pub optimize_r: bool,
    pub beamformer: BeamformerMode,
    pub tx_curvature: TxCurvature,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer: 80,
            tol_outer: 1e-4,
            mm: MmConfig::default(),
            bisection: BisectionConfig::default(),
            optimize_t: true,
            optimize_r: true,
            beamformer: BeamformerMode::Bisection,
            tx_curvature: TxCurvature::Exact,
        }
    }
}

impl SolverConfig {
    /// The centralized counterpart of the decentralized algorithm:
    /// inverse-free beamformers and the row-norm curvature bound.
    pub fn decentralized_reference() -> Self {
        Self {
            beamformer: BeamformerMode::InverseFree,
            tx_curvature: TxCurvature::RowNormBound,
            ..Self::default()
        }
    }

    /// Same, with a single MM step per position block.
    pub fn single_step(self) -> Self {
        Self {
            mm: MmConfig {
                max_iterations: 1,
                ..self.mm
            },
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 || self.mm.max_iterations == 0 {
            return Err(Error::invalid("iteration limits must be at least 1"));
        }
        if !(self.tol_outer > 0.0 && self.mm.tol > 0.0 && self.bisection.rel_power_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        Ok(())
    }
}

/// One concrete optimization problem: geometry, starting layout and power model.
#[derive(Debug, Clone)]
pub struct Problem {
    pub dims: SystemDims,
    pub geometry: Vec<PathGeometry>,
    pub layout: AntennaLayout,
    pub p_max: f64,
    pub weights: Vec<f64>,
    pub noise: Vec<f64>,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        let k = self.dims.users;
        if self.geometry.len() != k || self.layout.rx.len() != k || self.weights.len() != k || self.noise.len() != k {
            return Err(Error::invalid(format!("problem data does not match K = {k} users")));
        }
        if self.layout.tx.len() != self.dims.tx_antennas || self.layout.rx.iter().any(|r| r.len() != self.dims.rx_antennas)
        {
            return Err(Error::invalid("layout sizes do not match M and N"));
        }
        for g in &self.geometry {
            g.validate()?;
        }
        self.layout.validate()
    }

    /// `W_k = √(P/(K d)) [I_d; 0]` for every user.
    pub fn initial_beams(&self) -> BeamformerSet {
        let SystemDims {
            tx_antennas: m,
            users: k,
            streams: d,
            ..
        } = self.dims;
        let amp = (self.p_max / (k * d) as f64).sqrt();
        let w = CMat::from_fn(m, d, |r, c| if r == c { crate::linalg::real(amp) } else { crate::linalg::ZERO });
        BeamformerSet {
            w: vec![w; k],
            p_max: self.p_max,
            weights: self.weights.clone(),
            noise: self.noise.clone(),
        }
    }
}

/// Everything the iterations carry forward.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub beams: BeamformerSet,
    pub layout: AntennaLayout,
    pub channels: ChannelSet,
    pub aux: AuxiliaryState,
    pub wsr: f64,
}

/// Initial beamformers and layout, with the auxiliaries from one update.
pub fn initialize(problem: &Problem) -> Result<SolverState> {
    problem.validate()?;
    let beams = problem.initial_beams();
    let channels = assemble_channels(&problem.geometry, &problem.layout)?;
    let mut aux = AuxiliaryState::new(&beams.w, problem.dims.rx_antennas);
    let (gamma, phi) = update_auxiliaries(&channels.h, &beams)?;
    aux.gamma = gamma;
    aux.phi = phi;
    let wsr = wsr(&channels.h, &beams)?;
    Ok(SolverState {
        beams,
        layout: problem.layout.clone(),
        channels,
        aux,
        wsr,
    })
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub wsr_nats: f64,
    pub wsr_bits: f64,
    /// `f_quad` right after the auxiliary update (equals the previous WSR).
    pub f_quad_aux: f64,
    /// `f_quad` after the last block of the iteration.
    pub f_quad: f64,
    pub power: f64,
    /// Power multiplier of the bisection step; `None` for the inverse-free step.
    pub mu: Option<f64>,
    pub mm_steps_t: usize,
    pub mm_steps_r: usize,
    /// Wall time of the auxiliary, beamformer, transmit and receive blocks.
    pub block_times_ms: [f64; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverReport {
    pub converged: bool,
    pub iterations: usize,
    pub initial_wsr_nats: f64,
    pub final_wsr_nats: f64,
    pub final_wsr_bits: f64,
    pub r_max_nats: f64,
    pub trace: Vec<IterationRecord>,
    pub total_time_ms: f64,
    pub tx_positions: Vec<[f64; 3]>,
    pub rx_positions: Vec<Vec<[f64; 3]>>,
    pub beamformers: Vec<MatrixRecord>,
}

impl SolverReport {
    pub fn wsr_trace_nats(&self) -> Vec<f64> {
        std::iter::once(self.initial_wsr_nats)
            .chain(self.trace.iter().map(|r| r.wsr_nats))
            .collect()
    }

    /// Largest relative drop between consecutive WSR values (0 when monotone).
    pub fn worst_relative_drop(&self) -> f64 {
        self.wsr_trace_nats()
            .windows(2)
            .map(|w| ((w[0] - w[1]) / w[0].abs().max(f64::MIN_POSITIVE)).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn beams(&self) -> Result<Vec<CMat>> {
        self.beamformers.iter().map(MatrixRecord::to_matrix).collect()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,wsr_nats,wsr_bits,f_quad,power,block_times_ms\n");
        for r in &self.trace {
            let times: Vec<String> = r.block_times_ms.iter().map(|t| format!("{t:.3}")).collect();
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
                r.iteration,
                r.wsr_nats,
                r.wsr_bits,
                r.f_quad,
                r.power,
                times.join(";")
            ));
        }
        out
    }

    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.trace_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn positions_to_arrays(p: &[Position]) -> Vec<[f64; 3]> {
    p.iter().map(|x| [x.x, x.y, x.z]).collect()
}

pub(crate) fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub(crate) fn relative_change(prev: f64, next: f64) -> f64 {
    (next - prev).abs() / prev.abs().max(f64::MIN_POSITIVE)
}

/// Runs one full iteration in place and returns its record.
pub fn iterate(problem: &Problem, config: &SolverConfig, state: &mut SolverState, iteration: usize) -> Result<IterationRecord> {
    let mut times = [0.0; 4];

    let t = Instant::now();
    let (gamma, phi) = update_auxiliaries(&state.channels.h, &state.beams)?;
    state.aux.gamma = gamma;
    state.aux.phi = phi;
    let f_quad_aux = f_quad(&state.channels.h, &state.beams, &state.aux.gamma, &state.aux.phi)?;
    times[0] = elapsed_ms(t);

    let t = Instant::now();
    let mu = match config.beamformer {
        BeamformerMode::Bisection => {
            let out = update_w_bisection(
                &state.channels.h,
                &state.beams.weights,
                &state.aux.gamma,
                &state.aux.phi,
                problem.p_max,
                &config.bisection,
            )?;
            state.beams.w = out.w;
            Some(out.mu)
        }
        BeamformerMode::InverseFree => {
            let out = update_w_inverse_free(
                &state.channels.h,
                &state.beams.weights,
                &state.aux.gamma,
                &state.aux.phi,
                &state.aux.w_prev,
                &state.aux.w_prev2,
                iteration,
                problem.p_max,
            )?;
            state.aux.psi = state.aux.w_prev.clone();
            state.aux.eta = out.eta;
            state.beams.w = out.w;
            None
        }
    };
    state.aux.push_history(&state.beams.w);
    times[1] = elapsed_ms(t);

    let frozen = FrozenState {
        geometry: &problem.geometry,
        w: &state.beams.w,
        gamma: &state.aux.gamma,
        phi: &state.aux.phi,
        weights: &problem.weights,
        noise: &problem.noise,
    };

    let t = Instant::now();
    let mut mm_steps_t = 0;
    if config.optimize_t {
        let sub = TxSubproblem::new(&frozen, &state.channels.f, config.tx_curvature)?;
        let out = mm_loop(&sub, &state.layout.tx.positions, &state.layout.tx.boxes, &config.mm)?;
        mm_steps_t = out.iterations;
        state.layout.tx.positions = out.positions;
    }
    times[2] = elapsed_ms(t);

    let t = Instant::now();
    let mut mm_steps_r = 0;
    let g = if config.optimize_t {
        crate::channel::transmit_frms(&problem.geometry, &state.layout.tx.positions)
    } else {
        state.channels.g.clone()
    };
    if config.optimize_r {
        for k in 0..problem.dims.users {
            let sub = RxSubproblem::new(&frozen, k, &g[k])?;
            let rx = &mut state.layout.rx[k];
            let out = mm_loop(&sub, &rx.positions, &rx.boxes, &config.mm)?;
            mm_steps_r = mm_steps_r.max(out.iterations);
            rx.positions = out.positions;
        }
    }
    times[3] = elapsed_ms(t);

    state.channels = assemble_channels(&problem.geometry, &state.layout)?;
    let f_quad_end = f_quad(&state.channels.h, &state.beams, &state.aux.gamma, &state.aux.phi)?;
    state.wsr = wsr(&state.channels.h, &state.beams)?;
    Ok(IterationRecord {
        iteration,
        wsr_nats: state.wsr,
        wsr_bits: nats_to_bits(state.wsr),
        f_quad_aux,
        f_quad: f_quad_end,
        power: total_power(&state.beams.w),
        mu,
        mm_steps_t,
        mm_steps_r,
        block_times_ms: times,
    })
}

/// Final state plus report.
pub struct SolveOutcome {
    pub report: SolverReport,
    pub state: SolverState,
}

pub fn solve_with_state(problem: &Problem, config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate()?;
    let start = Instant::now();
    let mut state = initialize(problem)?;
    let initial = state.wsr;
    let mut trace = Vec::new();
    let mut converged = false;
    for i in 1..=config.max_outer {
        let prev = state.wsr;
        let rec = iterate(problem, config, &mut state, i).map_err(|e| e.context(format!("outer iteration {i}")))?;
        trace.push(rec);
        if relative_change(prev, state.wsr) < config.tol_outer {
            converged = true;
            break;
        }
    }
    let beams = BeamformerSet {
        w: state.beams.w.clone(),
        ..problem.initial_beams()
    };
    let report = SolverReport {
        converged,
        iterations: trace.len(),
        initial_wsr_nats: initial,
        final_wsr_nats: state.wsr,
        final_wsr_bits: nats_to_bits(state.wsr),
        r_max_nats: r_max_bound(&problem.dims, &problem.geometry, &beams),
        trace,
        total_time_ms: elapsed_ms(start),
        tx_positions: positions_to_arrays(&state.layout.tx.positions),
        rx_positions: state.layout.rx.iter().map(|r| positions_to_arrays(&r.positions)).collect(),
        beamformers: state.beams.w.iter().map(MatrixRecord::from).collect(),
    };
    Ok(SolveOutcome { report, state })
}

pub fn solve(problem: &Problem, config: &SolverConfig) -> Result<SolverReport> {
    Ok(solve_with_state(problem, config)?.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ArrayLayout;
    use crate::testkit::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn problem(seed: u64) -> Problem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 8, 2, 3, 2);
        let min_sep = LAMBDA / 2.0;
        let grid = |n| ArrayLayout::movable_grid(n, LAMBDA, 2.0, min_sep).unwrap();
        Problem {
            dims: inst.dims,
            geometry: inst.geometry,
            layout: AntennaLayout {
                tx: grid(8),
                rx: (0..3).map(|_| grid(2)).collect(),
                min_sep,
            },
            p_max: inst.beams.p_max,
            weights: inst.beams.weights,
            noise: inst.beams.noise,
        }
    }

    #[test]
    fn initial_power_is_budget() {
        let p = problem(1);
        let b = p.initial_beams();
        assert!((b.power() - p.p_max).abs() < 1e-12 * p.p_max);
        let s = initialize(&p).unwrap();
        assert!(s.wsr > 0.0 && s.wsr.is_finite());
        assert!(s.layout.tx.min_pairwise_distance() >= p.layout.min_sep);
    }

    #[test]
    fn trace_is_monotone_and_feasible() {
        for seed in 0..3 {
            let p = problem(seed);
            let out = solve_with_state(&p, &SolverConfig::default()).unwrap();
            let r = &out.report;
            assert!(r.worst_relative_drop() <= 1e-8, "drop {}", r.worst_relative_drop());
            for rec in &r.trace {
                assert!(rec.f_quad >= rec.f_quad_aux - 1e-9 * rec.f_quad_aux.abs());
                assert!(rec.power <= p.p_max * (1.0 + 1e-9));
            }
            assert!(out.state.layout.tx.all_inside());
            assert!(r.final_wsr_nats <= r.r_max_nats);
        }
    }

    #[test]
    fn fixed_positions_reduce_to_beamforming_only() {
        let p = problem(5);
        let cfg = SolverConfig {
            optimize_t: false,
            optimize_r: false,
            ..SolverConfig::default()
        };
        let out = solve_with_state(&p, &cfg).unwrap();
        assert_eq!(out.state.layout, p.layout);
        assert!(out.report.trace.iter().all(|r| r.mm_steps_t == 0 && r.mm_steps_r == 0));
    }

    #[test]
    fn tightness_after_auxiliary_update() {
        let p = problem(6);
        let r = solve(&p, &SolverConfig::default()).unwrap();
        let wsrs = r.wsr_trace_nats();
        for (rec, prev) in r.trace.iter().zip(&wsrs) {
            assert!((rec.f_quad_aux - prev).abs() <= 1e-8 * (1.0 + prev.abs()));
        }
    }
}
