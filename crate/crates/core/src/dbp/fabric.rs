//! In-process CU/DU fabric: one thread per DU, bounded FIFO links, and a log
//! of every message the CU sends or receives.
//!
//! One outer iteration exchanges, per DU, six broadcasts, four gathers and
//! three scalar reductions:
//!
//! | round | CU → DU        | DU → CU                      |
//! |-------|----------------|------------------------------|
//! | 1     | `EtaFactors`   | `EtaGram`                    |
//! | 2     | `BeamFactors`  | `Extrapolated`               |
//! | 3     | `Correction`   | `PowerPartial` (scalar)      |
//! | 4     | `PowerScale`   | `Products`, `RowNorms` (scalar) |
//! | 5     | `TxFactors`    | `CurvaturePartial` (scalar)  |
//! | 6     | `Curvature`    | `MovedProducts`              |
//!
//! Rounds 5 and 6 repeat once per transmit MM step, stopping under the same
//! rule as the centralized MM loop, and are skipped when the transmit array is
//! fixed. Setup adds one `Setup`/`InitialProducts` round and
//! the run ends with a `Stop` broadcast.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use crossbeam::channel::{bounded, Receiver, Sender};
use serde::Serialize;

use super::*;
use crate::linalg::MatrixRecord;
use crate::objective::nats_to_bits;
use crate::solver::{elapsed_ms, positions_to_arrays, relative_change, IterationRecord, Problem, SolverConfig, SolverReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Node {
    Cu,
    Du(usize),
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Cu => f.write_str("cu"),
            Node::Du(c) => write!(f, "du{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    Broadcast,
    Gather,
    ScalarReduce,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Broadcast => "broadcast",
            MessageKind::Gather => "gather",
            MessageKind::ScalarReduce => "scalar-reduce",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Step {
    Setup,
    InitialProducts,
    EtaFactors,
    EtaGram,
    BeamFactors,
    Extrapolated,
    Correction,
    PowerPartial,
    PowerScale,
    Products,
    RowNorms,
    TxFactors,
    CurvaturePartial,
    Curvature,
    MovedProducts,
    Stop,
}

impl Step {
    pub fn kind(self) -> MessageKind {
        use Step::*;
        match self {
            Setup | EtaFactors | BeamFactors | Correction | PowerScale | TxFactors | Curvature | Stop => MessageKind::Broadcast,
            InitialProducts | EtaGram | Extrapolated | Products | MovedProducts => MessageKind::Gather,
            PowerPartial | RowNorms | CurvaturePartial => MessageKind::ScalarReduce,
        }
    }
}

/// One immutable message on a CU/DU link.
#[derive(Debug, Clone)]
struct Message {
    step: Step,
    src: Node,
    dst: Node,
    seq: u64,
    round: u64,
    complex: Vec<CMat>,
    real: Vec<f64>,
}

impl Message {
    fn bytes(&self) -> u64 {
        let c: usize = self.complex.iter().map(|m| m.len()).sum();
        (c * 16 + self.real.len() * 8) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub round: u64,
    pub kind: MessageKind,
    pub step: Step,
    pub src: Node,
    pub dst: Node,
    pub seq: u64,
    pub bytes: u64,
    /// Shapes of the complex payload blocks.
    pub shapes: Vec<(usize, usize)>,
    pub reals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundStat {
    pub round: u64,
    pub messages: usize,
    pub bytes: u64,
    pub max_message_bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MessageLog {
    pub entries: Vec<LogEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogSummary {
    pub messages: usize,
    pub total_bytes: u64,
    pub rounds: Vec<RoundStat>,
}

impl MessageLog {
    fn record(&mut self, m: &Message) {
        self.entries.push(LogEntry {
            round: m.round,
            kind: m.step.kind(),
            step: m.step,
            src: m.src,
            dst: m.dst,
            seq: m.seq,
            bytes: m.bytes(),
            shapes: m.complex.iter().map(|x| (x.nrows(), x.ncols())).collect(),
            reals: m.real.len(),
        });
    }

    pub fn total_bytes(&self) -> u64 {
        self.entries.iter().map(|e| e.bytes).sum()
    }

    pub fn rounds(&self) -> Vec<RoundStat> {
        let mut out: Vec<RoundStat> = Vec::new();
        for e in &self.entries {
            match out.last_mut() {
                Some(r) if r.round == e.round => {
                    r.messages += 1;
                    r.bytes += e.bytes;
                    r.max_message_bytes = r.max_message_bytes.max(e.bytes);
                }
                _ => out.push(RoundStat {
                    round: e.round,
                    messages: 1,
                    bytes: e.bytes,
                    max_message_bytes: e.bytes,
                }),
            }
        }
        out
    }

    pub fn summary(&self) -> LogSummary {
        LogSummary {
            messages: self.entries.len(),
            total_bytes: self.total_bytes(),
            rounds: self.rounds(),
        }
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("round,kind,step,src,dst,seq,bytes\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{:?},{},{},{},{}\n",
                e.round,
                e.kind.as_str(),
                e.step,
                e.src,
                e.dst,
                e.seq,
                e.bytes
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.csv().as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.summary())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Entries between the `n`-th and `(n+1)`-th `EtaFactors` broadcast to DU 0,
    /// i.e. the traffic of outer iteration `n` (1-based).
    pub fn iteration(&self, n: usize) -> &[LogEntry] {
        let starts: Vec<usize> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.step == Step::EtaFactors && e.dst == Node::Du(0))
            .map(|(i, _)| i)
            .collect();
        let Some(&start) = starts.get(n.wrapping_sub(1)) else {
            return &[];
        };
        let end = starts.get(n).copied().unwrap_or_else(|| {
            self.entries
                .iter()
                .position(|e| e.step == Step::Stop)
                .unwrap_or(self.entries.len())
        });
        &self.entries[start..end]
    }
}

/// Payload shapes allowed on the fabric: built from `d`, `N` and the path
/// counts only.
#[derive(Debug, Clone)]
struct PayloadRule {
    dims: Vec<usize>,
    max_reals: usize,
}

impl PayloadRule {
    fn new(problem: &Problem) -> Self {
        let mut dims = vec![1, problem.dims.streams, problem.dims.rx_antennas];
        let mut lsum = 0;
        for g in &problem.geometry {
            dims.push(g.paths(Side::Tx));
            dims.push(g.paths(Side::Rx));
            lsum += g.paths(Side::Tx);
        }
        let k = problem.dims.users;
        Self {
            dims,
            max_reals: 1 + 2 * k + 3 * lsum,
        }
    }

    fn check(&self, m: &Message) -> Result<()> {
        for x in &m.complex {
            if !self.dims.contains(&x.nrows()) || !self.dims.contains(&x.ncols()) {
                return Err(Error::protocol(format!(
                    "{:?} from {} carries a {}x{} block whose size is not M-independent",
                    m.step,
                    m.src,
                    x.nrows(),
                    x.ncols()
                )));
            }
        }
        if m.real.len() > self.max_reals {
            return Err(Error::protocol(format!("{:?} from {} carries {} reals", m.step, m.src, m.real.len())));
        }
        Ok(())
    }
}

/// One end of a CU/DU link with per-direction sequence numbers.
struct Endpoint {
    me: Node,
    peer: Node,
    tx: Sender<Message>,
    rx: Receiver<Message>,
    sent: u64,
    received: u64,
    rule: PayloadRule,
}

impl Endpoint {
    fn send(&mut self, step: Step, round: u64, complex: Vec<CMat>, real: Vec<f64>) -> Result<Message> {
        let msg = Message {
            step,
            src: self.me,
            dst: self.peer,
            seq: self.sent,
            round,
            complex,
            real,
        };
        self.rule.check(&msg)?;
        self.sent += 1;
        self.tx
            .send(msg.clone())
            .map_err(|_| Error::protocol(format!("{} hung up on {}", self.peer, self.me)))?;
        Ok(msg)
    }

    fn recv(&mut self) -> Result<Message> {
        let msg = self
            .rx
            .recv()
            .map_err(|_| Error::protocol(format!("{} hung up on {}", self.peer, self.me)))?;
        if msg.seq != self.received || msg.src != self.peer || msg.dst != self.me {
            return Err(Error::protocol(format!(
                "{} expected message {} from {}, got {} from {}",
                self.me, self.received, self.peer, msg.seq, msg.src
            )));
        }
        self.received += 1;
        Ok(msg)
    }

    fn expect(&mut self, step: Step) -> Result<Message> {
        let msg = self.recv()?;
        if msg.step != step {
            return Err(Error::protocol(format!(
                "{} expected {step:?} from {}, got {:?}",
                self.me, self.peer, msg.step
            )));
        }
        Ok(msg)
    }
}

fn link(a: Node, b: Node, capacity: usize, rule: &PayloadRule) -> (Endpoint, Endpoint) {
    let (atx, brx) = bounded(capacity);
    let (btx, arx) = bounded(capacity);
    (
        Endpoint {
            me: a,
            peer: b,
            tx: atx,
            rx: arx,
            sent: 0,
            received: 0,
            rule: rule.clone(),
        },
        Endpoint {
            me: b,
            peer: a,
            tx: btx,
            rx: brx,
            sent: 0,
            received: 0,
            rule: rule.clone(),
        },
    )
}

fn scalar(msg: &Message, index: usize) -> Result<f64> {
    msg.real
        .get(index)
        .copied()
        .ok_or_else(|| Error::protocol(format!("{:?} is missing scalar {index}", msg.step)))
}

/// Final DU state and its compute time.
struct DuResult {
    shard: Shard,
    compute_ms: f64,
}

/// Which steps a DU accepts next.
fn allowed_after(prev: Step) -> &'static [Step] {
    use Step::*;
    match prev {
        Setup => &[EtaFactors, Stop],
        EtaFactors => &[BeamFactors],
        BeamFactors => &[Correction],
        Correction => &[PowerScale],
        PowerScale | Curvature => &[TxFactors, EtaFactors, Stop],
        TxFactors => &[Curvature],
        _ => &[],
    }
}

fn du_main(mut ep: Endpoint, mut shard: Shard, antennas: usize) -> Result<DuResult> {
    let mut busy = 0.0;
    let setup = ep.expect(Step::Setup)?;
    let t = Instant::now();
    let paths = TxPaths::from_reals(&setup.real)?;
    let k = paths.users();
    shard.refresh_frms(&paths);
    let products = flatten_blocks(&shard.products());
    busy += elapsed_ms(t);
    ep.send(Step::InitialProducts, setup.round, products, vec![])?;

    let mut prev = Step::Setup;
    let mut y: Vec<CMat> = Vec::new();
    let mut eta = 0.0;
    let mut ups: Vec<CMat> = Vec::new();
    let mut q: Vec<CMat> = Vec::new();
    let mut grad: Vec<Position> = Vec::new();
    loop {
        let msg = ep.recv()?;
        if !allowed_after(prev).contains(&msg.step) {
            return Err(Error::protocol(format!("{} received {:?} after {prev:?}", ep.me, msg.step)));
        }
        prev = msg.step;
        let t = Instant::now();
        let round = msg.round;
        match msg.step {
            Step::Stop => break,
            Step::EtaFactors => {
                let gram = flatten_blocks(&shard.eta_gram(&msg.complex));
                busy += elapsed_ms(t);
                ep.send(Step::EtaGram, round, gram, vec![])?;
            }
            Step::BeamFactors => {
                eta = scalar(&msg, 0)?;
                let nu = scalar(&msg, 1)?;
                y = msg.complex;
                ups = shard.extrapolate(nu);
                let part = flatten_blocks(&shard.extrapolated_products(&ups));
                busy += elapsed_ms(t);
                ep.send(Step::Extrapolated, round, part, vec![])?;
            }
            Step::Correction => {
                let z = nest_blocks(msg.complex, k)?;
                q = shard.correction(&ups, &y, &z, eta);
                let p: f64 = q.iter().map(frobenius_sq).sum();
                busy += elapsed_ms(t);
                ep.send(Step::PowerPartial, round, vec![], vec![p])?;
            }
            Step::PowerScale => {
                let s = scalar(&msg, 0)?;
                shard.accept(std::mem::take(&mut q).into_iter().map(|x| x.scale(s)).collect());
                let mut blocks = flatten_blocks(&shard.products());
                blocks.extend(flatten_blocks(&shard.w_gram()));
                let norms = shard.row_norm_sums();
                busy += elapsed_ms(t);
                ep.send(Step::Products, round, blocks, vec![])?;
                ep.send(Step::RowNorms, round, vec![], norms)?;
            }
            Step::TxFactors => {
                let mut blocks = msg.complex;
                let gram_flat = blocks.split_off(k * k);
                let s = nest_blocks(blocks, k)?;
                let input = CurvatureInput {
                    antennas,
                    y: y.clone(),
                    w_gram: nest_blocks(gram_flat, k)?,
                    row_norm_totals: msg.real.get(..k).ok_or_else(|| Error::protocol("short TxFactors"))?.to_vec(),
                    sigma_norms: msg.real.get(k..2 * k).ok_or_else(|| Error::protocol("short TxFactors"))?.to_vec(),
                };
                let d = shard.tx_derivative(&y, &s);
                grad = shard.tx_gradient(&d, &paths);
                let delta = shard.curvature_partial(&input, &paths);
                busy += elapsed_ms(t);
                ep.send(Step::CurvaturePartial, round, vec![], vec![delta])?;
            }
            Step::Curvature => {
                let delta = scalar(&msg, 0)?;
                shard.step(&grad, delta, &paths)?;
                let products = flatten_blocks(&shard.products());
                busy += elapsed_ms(t);
                ep.send(Step::MovedProducts, round, products, vec![])?;
            }
            other => return Err(Error::protocol(format!("{} cannot handle {other:?}", ep.me))),
        }
    }
    Ok(DuResult { shard, compute_ms: busy })
}

/// Compute-time accounting of a decentralized run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecTiming {
    pub cu_ms: f64,
    pub du_ms: Vec<f64>,
    /// CU time plus the slowest DU.
    pub decentralized_ms: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecReport {
    pub clusters: usize,
    pub report: SolverReport,
    pub timing: DecTiming,
    #[serde(skip)]
    pub log: MessageLog,
}

struct Cu {
    links: Vec<Endpoint>,
    log: MessageLog,
    round: u64,
    busy: f64,
}

impl Cu {
    fn broadcast(&mut self, step: Step, complex: Vec<CMat>, real: Vec<f64>) -> Result<()> {
        for ep in &mut self.links {
            let m = ep.send(step, self.round, complex.clone(), real.clone())?;
            self.log.record(&m);
        }
        Ok(())
    }

    fn gather(&mut self, step: Step) -> Result<Vec<Message>> {
        let mut out = Vec::with_capacity(self.links.len());
        for ep in &mut self.links {
            let m = ep.expect(step).map_err(|e| e.context(format!("waiting for {}", ep.peer)))?;
            self.log.record(&m);
            out.push(m);
        }
        Ok(out)
    }

    fn gather_blocks(&mut self, step: Step, k: usize) -> Result<Vec<Vec<Vec<CMat>>>> {
        self.gather(step)?
            .into_iter()
            .map(|m| nest_blocks(m.complex, k))
            .collect()
    }

    fn timed<T>(&mut self, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f();
        self.busy += elapsed_ms(t);
        out
    }

    fn next_round(&mut self) {
        self.round += 1;
    }
}

/// Runs the decentralized algorithm with `clusters` DUs. The beamformer block
/// always uses the inverse-free step and the transmit curvature always uses
/// the row-norm bound, so `config.beamformer` and `config.tx_curvature` are
/// ignored.
pub fn dec_solve(problem: &Problem, config: &SolverConfig, clusters: usize) -> Result<DecReport> {
    config.validate()?;
    problem.validate()?;
    let start = Instant::now();
    let plan = ClusterPlan::new(problem.dims.tx_antennas, clusters)?;
    let paths = TxPaths::from_geometry(&problem.geometry);
    let rule = PayloadRule::new(problem);
    let beams0 = problem.initial_beams();
    let shards = Shard::split(
        &plan,
        &problem.layout.tx.positions,
        &problem.layout.tx.boxes,
        &beams0.w,
        &paths,
    );
    let mut cu_links = Vec::with_capacity(clusters);
    let mut du_links = Vec::with_capacity(clusters);
    for c in 0..clusters {
        let (a, b) = link(Node::Cu, Node::Du(c), 4, &rule);
        cu_links.push(a);
        du_links.push(b);
    }
    let antennas = problem.dims.tx_antennas;

    std::thread::scope(|scope| {
        let handles: Vec<_> = du_links
            .into_iter()
            .zip(shards)
            .map(|(ep, shard)| scope.spawn(move || du_main(ep, shard, antennas)))
            .collect();
        let cu = Cu {
            links: cu_links,
            log: MessageLog::default(),
            round: 0,
            busy: 0.0,
        };
        let outcome = cu_main(cu, problem, config, &paths);
        let mut du_results = Vec::with_capacity(clusters);
        let mut du_error = None;
        for (c, h) in handles.into_iter().enumerate() {
            match h.join() {
                Ok(Ok(r)) => du_results.push(r),
                Ok(Err(e)) => {
                    du_error.get_or_insert(e.context(format!("DU {c}")));
                }
                Err(_) => {
                    du_error.get_or_insert(Error::protocol(format!("DU {c} panicked")));
                }
            }
        }
        let (mut report, log, cu_ms) = match (outcome, du_error) {
            (Ok(x), None) => x,
            (Err(e), _) => return Err(e),
            (Ok(_), Some(e)) => return Err(e),
        };
        let tx_positions: Vec<Position> = du_results.iter().flat_map(|r| r.shard.positions.clone()).collect();
        let w: Vec<CMat> = (0..problem.dims.users)
            .map(|k| plan.gather_rows(&du_results.iter().map(|r| r.shard.w[k].clone()).collect::<Vec<_>>()))
            .collect();
        report.tx_positions = positions_to_arrays(&tx_positions);
        report.beamformers = w.iter().map(MatrixRecord::from).collect();
        report.r_max_nats = crate::objective::r_max_bound(&problem.dims, &problem.geometry, &beams0.with_w(w));
        let du_ms: Vec<f64> = du_results.iter().map(|r| r.compute_ms).collect();
        let max_du = du_ms.iter().cloned().fold(0.0, f64::max);
        let wall = elapsed_ms(start);
        report.total_time_ms = wall;
        Ok(DecReport {
            clusters,
            report,
            timing: DecTiming {
                cu_ms,
                decentralized_ms: cu_ms + max_du,
                du_ms,
                wall_ms: wall,
            },
            log,
        })
    })
}

fn cu_main(mut cu: Cu, problem: &Problem, config: &SolverConfig, paths: &TxPaths) -> Result<(SolverReport, MessageLog, f64)> {
    let k = problem.dims.users;
    let mut rx_layout = problem.layout.rx.clone();
    let mut side = CuSide::new(
        &problem.geometry,
        &rx_layout.iter().map(|r| r.positions.clone()).collect::<Vec<_>>(),
        &problem.weights,
        &problem.noise,
    );

    cu.broadcast(Step::Setup, vec![], paths.to_reals())?;
    let parts = cu.gather_blocks(Step::InitialProducts, k)?;
    let mut g_tilde = cu.timed(|| Ok(reduce_blocks(&parts)))?;
    let mut hw = side.received(&g_tilde);
    let mut wsr = cu.timed(|| {
        let (gamma, phi) = dec_update_aux(&hw, &side.weights, &side.noise)?;
        Ok(dec_objective(&hw, &gamma, &phi, &side.weights, &side.noise)?.wsr)
    })?;
    let initial = wsr;
    let mut trace = Vec::new();
    let mut converged = false;

    for i in 1..=config.max_outer {
        let prev = wsr;
        let mut times = [0.0; 4];

        let t = Instant::now();
        let (gamma, phi, f_quad_aux, factors) = cu
            .timed(|| {
                let (gamma, phi) = dec_update_aux(&hw, &side.weights, &side.noise)?;
                let f_quad_aux = dec_objective(&hw, &gamma, &phi, &side.weights, &side.noise)?.f_quad;
                let factors = cu_factors(&side, &gamma, &phi)?;
                Ok((gamma, phi, f_quad_aux, factors))
            })
            .map_err(|e| e.context(format!("outer iteration {i}")))?;
        times[0] = elapsed_ms(t);

        let t = Instant::now();
        cu.next_round();
        cu.broadcast(Step::EtaFactors, factors.eta.clone(), vec![])?;
        let parts = cu.gather_blocks(Step::EtaGram, k)?;
        let eta = cu.timed(|| Ok(eta_from_reduced(&reduce_blocks(&parts))))?;
        if !(eta > 0.0) {
            return Err(Error::precondition("η = 0: every Φ_k vanishes, the inverse-free step is undefined")
                .context(format!("outer iteration {i}")));
        }
        cu.next_round();
        cu.broadcast(Step::BeamFactors, factors.y.clone(), vec![eta, nesterov_weight(i)])?;
        let parts = cu.gather_blocks(Step::Extrapolated, k)?;
        let z = cu.timed(|| Ok(flatten_blocks(&correction_blocks(&factors, &reduce_blocks(&parts)))))?;
        cu.next_round();
        cu.broadcast(Step::Correction, z, vec![])?;
        let partials = cu.gather(Step::PowerPartial)?;
        let p_q: f64 = partials.iter().map(|m| scalar(m, 0)).sum::<Result<f64>>()?;
        let scale = power_scale(p_q, problem.p_max);
        cu.next_round();
        cu.broadcast(Step::PowerScale, vec![], vec![scale])?;
        let products = cu.gather(Step::Products)?;
        let norms = cu.gather(Step::RowNorms)?;
        let (gt, w_gram, row_totals) = cu.timed(|| {
            let mut gparts = Vec::with_capacity(products.len());
            let mut wparts = Vec::with_capacity(products.len());
            for m in products {
                let mut blocks = m.complex;
                let w = blocks.split_off(k * k);
                gparts.push(nest_blocks(blocks, k)?);
                wparts.push(nest_blocks(w, k)?);
            }
            let mut totals = vec![0.0; k];
            for m in &norms {
                for (t, v) in totals.iter_mut().zip(&m.real) {
                    *t += v;
                }
            }
            Ok((reduce_blocks(&gparts), reduce_blocks(&wparts), totals))
        })?;
        g_tilde = gt;
        let power = p_q * scale * scale;
        times[1] = elapsed_ms(t);

        let t = Instant::now();
        let mut mm_steps_t = 0;
        if config.optimize_t {
            let sigma_norms: Vec<f64> = factors.sigma_hat.iter().map(psd_norm).collect();
            let constant = cu.timed(|| tx_constant(&gamma, &phi, &side.weights, &side.noise))?;
            let mut value = tx_value(&g_tilde, &factors, constant);
            while mm_steps_t < config.mm.max_iterations {
                let blocks = cu.timed(|| {
                    let mut b = flatten_blocks(&tx_blocks(&g_tilde, &factors));
                    b.extend(flatten_blocks(&w_gram));
                    Ok(b)
                })?;
                let mut reals = row_totals.clone();
                reals.extend(&sigma_norms);
                cu.next_round();
                cu.broadcast(Step::TxFactors, blocks, reals)?;
                let partials = cu.gather(Step::CurvaturePartial)?;
                let mut delta: f64 = 0.0;
                for m in &partials {
                    delta = delta.max(scalar(m, 0)?);
                }
                cu.next_round();
                cu.broadcast(Step::Curvature, vec![], vec![delta])?;
                let parts = cu.gather_blocks(Step::MovedProducts, k)?;
                if !(delta > 0.0) {
                    break;
                }
                let next = cu.timed(|| {
                    g_tilde = reduce_blocks(&parts);
                    Ok(tx_value(&g_tilde, &factors, constant))
                })?;
                mm_steps_t += 1;
                let improvement = next - value;
                value = next;
                if improvement <= config.mm.tol * value.abs().max(f64::MIN_POSITIVE) {
                    break;
                }
            }
        }
        times[2] = elapsed_ms(t);

        let t = Instant::now();
        let mut mm_steps_r = 0;
        if config.optimize_r {
            let steps = cu.timed(|| {
                let mut steps = 0;
                for (kk, rx) in rx_layout.iter_mut().enumerate() {
                    let out = dec_update_rx(&mut side, kk, &g_tilde[kk], &gamma[kk], &phi[kk], &rx.positions, &rx.boxes, &config.mm)
                        .map_err(|e| e.context(format!("receive update of user {kk}")))?;
                    steps = steps.max(out.iterations);
                    rx.positions = out.positions;
                }
                Ok(steps)
            })?;
            mm_steps_r = steps;
        }
        times[3] = elapsed_ms(t);

        let (next_hw, f_quad_end, next_wsr) = cu.timed(|| {
            let hw = side.received(&g_tilde);
            let f_quad_end = dec_objective(&hw, &gamma, &phi, &side.weights, &side.noise)?.f_quad;
            let (g2, p2) = dec_update_aux(&hw, &side.weights, &side.noise)?;
            let wsr = dec_objective(&hw, &g2, &p2, &side.weights, &side.noise)?.wsr;
            Ok((hw, f_quad_end, wsr))
        })?;
        hw = next_hw;
        wsr = next_wsr;
        trace.push(IterationRecord {
            iteration: i,
            wsr_nats: wsr,
            wsr_bits: nats_to_bits(wsr),
            f_quad_aux,
            f_quad: f_quad_end,
            power,
            mu: None,
            mm_steps_t,
            mm_steps_r,
            block_times_ms: times,
        });
        if relative_change(prev, wsr) < config.tol_outer {
            converged = true;
            break;
        }
    }
    cu.next_round();
    cu.broadcast(Step::Stop, vec![], vec![])?;

    let report = SolverReport {
        converged,
        iterations: trace.len(),
        initial_wsr_nats: initial,
        final_wsr_nats: wsr,
        final_wsr_bits: nats_to_bits(wsr),
        r_max_nats: 0.0,
        trace,
        total_time_ms: 0.0,
        tx_positions: Vec::new(),
        rx_positions: rx_layout.iter().map(|r| positions_to_arrays(&r.positions)).collect(),
        beamformers: Vec::new(),
    };
    let busy = cu.busy;
    Ok((report, cu.log, busy))
}
