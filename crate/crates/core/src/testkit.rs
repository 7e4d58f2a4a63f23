//! Random well-conditioned problem instances for property checks, the `verify`
//! command and the integration tests.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{assemble_channels, AntennaLayout, Angles, ArrayLayout, ChannelSet, PathGeometry, Position, SystemDims};
use crate::linalg::{c, frobenius_sq, CMat, C64};
use crate::objective::BeamformerSet;

/// Wavelength used by the random instances (28 GHz).
pub const LAMBDA: f64 = 299_792_458.0 / 28e9;

#[derive(Debug, Clone)]
pub struct Instance {
    pub dims: SystemDims,
    pub geometry: Vec<PathGeometry>,
    pub layout: AntennaLayout,
    pub channels: ChannelSet,
    pub beams: BeamformerSet,
}

impl Instance {
    /// Rebuilds the channels after the layout changed.
    pub fn refresh(&mut self) {
        self.channels = assemble_channels(&self.geometry, &self.layout).expect("consistent instance");
    }
}

pub fn cn<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    c(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal))
}

/// Matrix with i.i.d. `CN(0, 1)` entries.
pub fn random_cmat<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cn(rng, 1.0))
}

/// Haar-ish unitary from the QR factor of a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    random_cmat(rng, n, n).qr().q()
}

/// Hermitian PSD matrix with trace about `scale`.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> CMat {
    let a = random_cmat(rng, n, n);
    crate::linalg::hermitize(&(&a * a.adjoint())).scale(scale / (n * n) as f64)
}

pub fn random_geometry<R: Rng + ?Sized>(rng: &mut R, ltx: usize, lrx: usize, gain: f64) -> PathGeometry {
    let mut angles = |n: usize| -> Vec<Angles> {
        (0..n)
            .map(|_| Angles::new(rng.random_range(0.0..std::f64::consts::PI), rng.random_range(0.0..std::f64::consts::PI)))
            .collect()
    };
    let aod = angles(ltx);
    let aoa = angles(lrx);
    let l = ltx.max(lrx) as f64;
    PathGeometry {
        aod,
        aoa,
        prm: CMat::from_fn(lrx, ltx, |_, _| cn(rng, gain / l)),
        wavelength: LAMBDA,
    }
}

/// Uniform positions inside each antenna's box.
pub fn positions_in_boxes<R: Rng + ?Sized>(rng: &mut R, arr: &ArrayLayout) -> Vec<Position> {
    arr.boxes
        .iter()
        .map(|b| Position::from_fn(|i, _| if b.max[i] > b.min[i] { rng.random_range(b.min[i]..=b.max[i]) } else { b.min[i] }))
        .collect()
}

/// Random beamformers using a fraction of the budget.
pub fn random_beams<R: Rng + ?Sized>(rng: &mut R, m: usize, k: usize, d: usize, p_max: f64) -> Vec<CMat> {
    let w: Vec<CMat> = (0..k).map(|_| random_cmat(rng, m, d)).collect();
    let p: f64 = w.iter().map(frobenius_sq).sum();
    let target = p_max * rng.random_range(0.3..1.0);
    w.into_iter().map(|x| x.scale((target / p).sqrt())).collect()
}

/// Random instance with unit-order channel gains, `L = 3` paths per side and
/// antennas placed uniformly inside box-mode regions.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize, k: usize, d: usize) -> Instance {
    random_instance_with_paths(rng, m, n, k, d, 3, 3)
}

pub fn random_instance_with_paths<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    n: usize,
    k: usize,
    d: usize,
    ltx: usize,
    lrx: usize,
) -> Instance {
    let dims = SystemDims::new(m, n, k, d, 1);
    let geometry: Vec<_> = (0..k).map(|_| random_geometry(rng, ltx, lrx, 1.0)).collect();
    let min_sep = LAMBDA / 2.0;
    let mut tx = ArrayLayout::movable_grid(m, LAMBDA, 2.0, min_sep).expect("valid grid");
    tx.positions = positions_in_boxes(rng, &tx);
    let rx = (0..k)
        .map(|_| {
            let mut a = ArrayLayout::movable_grid(n, LAMBDA, 2.0, min_sep).expect("valid grid");
            a.positions = positions_in_boxes(rng, &a);
            a
        })
        .collect();
    let layout = AntennaLayout { tx, rx, min_sep };
    let channels = assemble_channels(&geometry, &layout).expect("consistent instance");
    let p_max = 10.0;
    let beams = BeamformerSet {
        w: random_beams(rng, m, k, d, p_max),
        p_max,
        weights: (0..k).map(|_| rng.random_range(0.5..1.5)).collect(),
        noise: (0..k).map(|_| rng.random_range(0.2..1.0)).collect(),
    };
    Instance {
        dims,
        geometry,
        layout,
        channels,
        beams,
    }
}
