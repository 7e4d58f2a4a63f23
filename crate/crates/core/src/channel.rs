//! Far-field geometric channel model for fluid-antenna arrays.
//!
//! Every path is described by a direction vector; an antenna at position `p`
//! sees the path with phase `2π/λ · gᵀp`. Stacking those phases over paths and
//! antennas gives the field-response matrices, and the channel of user `k` is
//! `H_k = F_kᴴ Σ_k G_k`.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};

pub type Position = Vector3<f64>;

/// Problem dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDims {
    /// Transmit fluid antennas at the base station (`M`).
    pub tx_antennas: usize,
    /// Receive fluid antennas per user (`N`).
    pub rx_antennas: usize,
    pub users: usize,
    /// Data streams per user (`d`).
    pub streams: usize,
    /// Distributed units the transmit array is split across (`C`).
    pub clusters: usize,
}

impl SystemDims {
    pub fn new(tx_antennas: usize, rx_antennas: usize, users: usize, streams: usize, clusters: usize) -> Self {
        Self {
            tx_antennas,
            rx_antennas,
            users,
            streams,
            clusters,
        }
    }

    /// Antennas per cluster (`M_c`).
    pub fn per_cluster(&self) -> usize {
        self.tx_antennas / self.clusters.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let SystemDims {
            tx_antennas: m,
            rx_antennas: n,
            users: k,
            streams: d,
            clusters: c,
        } = *self;
        if m == 0 || n == 0 || k == 0 || d == 0 || c == 0 {
            return Err(Error::invalid(format!("all dimensions must be >= 1, got {self:?}")));
        }
        if d > m.min(n) {
            return Err(Error::invalid(format!("streams d={d} exceed min(M={m}, N={n})")));
        }
        if m % c != 0 {
            return Err(Error::invalid(format!("M={m} is not divisible by C={c}")));
        }
        Ok(())
    }
}

/// Elevation/azimuth pair in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    pub elevation: f64,
    pub azimuth: f64,
}

impl Angles {
    pub fn new(elevation: f64, azimuth: f64) -> Self {
        Self { elevation, azimuth }
    }
}

/// Which end of the link a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Tx,
    Rx,
}

/// `[cosθ cosφ, cosθ sinφ, sinθ]`.
pub fn direction_vector(elevation: f64, azimuth: f64) -> Result<Position> {
    if !elevation.is_finite() || !azimuth.is_finite() {
        return Err(Error::invalid(format!(
            "non-finite path angle (elevation={elevation}, azimuth={azimuth})"
        )));
    }
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    Ok(Position::new(ce * ca, ce * sa, se))
}

/// Path-length difference of an antenna at `position` relative to the array origin.
#[inline]
pub fn projected_distance(direction: &Position, position: &Position) -> f64 {
    direction.dot(position)
}

/// Angles and path-response matrix between the base station and one user.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGeometry {
    /// Angles of departure, one per transmit path.
    pub aod: Vec<Angles>,
    /// Angles of arrival, one per receive path.
    pub aoa: Vec<Angles>,
    /// Path-response matrix `Σ_k`, `L_rx × L_tx`.
    pub prm: CMat,
    pub wavelength: f64,
}

impl PathGeometry {
    pub fn paths(&self, side: Side) -> usize {
        match side {
            Side::Tx => self.aod.len(),
            Side::Rx => self.aoa.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::invalid(format!("wavelength must be positive, got {}", self.wavelength)));
        }
        if self.aod.is_empty() || self.aoa.is_empty() {
            return Err(Error::invalid("each user needs at least one transmit and one receive path"));
        }
        if self.prm.nrows() != self.aoa.len() || self.prm.ncols() != self.aod.len() {
            return Err(Error::invalid(format!(
                "PRM is {}x{} but there are {} receive and {} transmit paths",
                self.prm.nrows(),
                self.prm.ncols(),
                self.aoa.len(),
                self.aod.len()
            )));
        }
        for a in self.aod.iter().chain(&self.aoa) {
            direction_vector(a.elevation, a.azimuth)?;
        }
        if !crate::linalg::is_finite(&self.prm) {
            return Err(Error::invalid("PRM has non-finite entries"));
        }
        Ok(())
    }

    pub fn directions(&self, side: Side) -> Vec<Position> {
        let angles = match side {
            Side::Tx => &self.aod,
            Side::Rx => &self.aoa,
        };
        angles
            .iter()
            .map(|a| {
                let (se, ce) = a.elevation.sin_cos();
                let (sa, ca) = a.azimuth.sin_cos();
                Position::new(ce * ca, ce * sa, se)
            })
            .collect()
    }

    /// Wavenumber `2π/λ`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
}

/// Field-response vector of one antenna: entry `q` is `exp(j·2π/λ·ρ_q(position))`.
pub fn field_response_vector(geometry: &PathGeometry, side: Side, position: &Position) -> CVec {
    let k0 = geometry.wavenumber();
    let dirs = geometry.directions(side);
    CVec::from_iterator(
        dirs.len(),
        dirs.iter()
            .map(|g| C64::from_polar(1.0, k0 * projected_distance(g, position))),
    )
}

/// Field-response matrix: one column per antenna position, one row per path.
pub fn field_response_matrix(directions: &[Position], wavenumber: f64, positions: &[Position]) -> CMat {
    CMat::from_fn(directions.len(), positions.len(), |q, m| {
        C64::from_polar(1.0, wavenumber * projected_distance(&directions[q], &positions[m]))
    })
}

/// Axis-aligned movable region of one antenna.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Cuboid {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    /// A degenerate box pinning an antenna to one point.
    pub fn point(p: &Position) -> Self {
        Self {
            min: [p.x, p.y, p.z],
            max: [p.x, p.y, p.z],
        }
    }

    pub fn center(&self) -> Position {
        Position::from_fn(|i, _| 0.5 * (self.min[i] + self.max[i]))
    }

    pub fn contains(&self, p: &Position) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Coordinate-wise projection onto the box.
    pub fn clamp(&self, p: &Position) -> Position {
        Position::from_fn(|i, _| p[i].max(self.min[i]).min(self.max[i]))
    }

    /// Gap between two boxes in the x–y plane (0 when their footprints overlap).
    pub fn planar_gap(&self, other: &Cuboid) -> f64 {
        let gx = (other.min[0] - self.max[0]).max(self.min[0] - other.max[0]).max(0.0);
        let gy = (other.min[1] - self.max[1]).max(self.min[1] - other.max[1]).max(0.0);
        gx.hypot(gy)
    }

    pub fn is_degenerate(&self) -> bool {
        (0..3).all(|i| self.min[i] == self.max[i])
    }
}

/// Positions and movable regions of one antenna array.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLayout {
    pub positions: Vec<Position>,
    pub boxes: Vec<Cuboid>,
}

fn grid_centers(count: usize, pitch: f64) -> Vec<Position> {
    let side = (count as f64).sqrt().ceil() as usize;
    let offset = (side as f64 - 1.0) / 2.0;
    (0..count)
        .map(|i| {
            let (row, col) = (i / side, i % side);
            Position::new((col as f64 - offset) * pitch, (row as f64 - offset) * pitch, 0.0)
        })
        .collect()
}

impl ArrayLayout {
    /// Box-mode array: antennas on a `⌈√n⌉ × ⌈√n⌉` grid with pitch `ρλ`; each
    /// box spans `ρλ − D` in x and y and `[−ρλ, ρλ]` in z, and every antenna
    /// starts at its box center.
    pub fn movable_grid(count: usize, wavelength: f64, rho: f64, min_sep: f64) -> Result<Self> {
        let pitch = rho * wavelength;
        if !(pitch >= min_sep && min_sep >= 0.0) {
            return Err(Error::invalid(format!(
                "grid pitch ρλ={pitch} must be at least the minimum separation D={min_sep}"
            )));
        }
        let half = 0.5 * (pitch - min_sep);
        let positions = grid_centers(count, pitch);
        let boxes = positions
            .iter()
            .map(|c| Cuboid::new([c.x - half, c.y - half, -pitch], [c.x + half, c.y + half, pitch]))
            .collect();
        Ok(Self { positions, boxes })
    }

    /// Fixed uniform planar array with the given spacing; boxes are single points.
    pub fn fixed_upa(count: usize, spacing: f64) -> Self {
        let positions = grid_centers(count, spacing);
        let boxes = positions.iter().map(Cuboid::point).collect();
        Self { positions, boxes }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn project(&self, positions: &[Position]) -> Vec<Position> {
        positions.iter().zip(&self.boxes).map(|(p, b)| b.clamp(p)).collect()
    }

    pub fn all_inside(&self) -> bool {
        self.positions.iter().zip(&self.boxes).all(|(p, b)| b.contains(p))
    }

    /// Smallest 3-D distance between any two antennas.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.positions.len() {
            for j in i + 1..self.positions.len() {
                best = best.min((self.positions[i] - self.positions[j]).norm());
            }
        }
        best
    }

    /// Smallest x–y gap between distinct boxes.
    pub fn min_box_gap(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.boxes.len() {
            for j in i + 1..self.boxes.len() {
                best = best.min(self.boxes[i].planar_gap(&self.boxes[j]));
            }
        }
        best
    }
}

/// Transmit and receive arrays of the whole network.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaLayout {
    pub tx: ArrayLayout,
    pub rx: Vec<ArrayLayout>,
    /// Minimum antenna separation `D` in meters.
    pub min_sep: f64,
}

impl AntennaLayout {
    /// Checks box membership and the box-mode separation guarantee.
    pub fn validate(&self) -> Result<()> {
        let tol = 1e-12 * self.min_sep.max(1e-3);
        for (name, arr) in std::iter::once(("transmit", &self.tx)).chain(self.rx.iter().map(|a| ("receive", a))) {
            if arr.positions.len() != arr.boxes.len() {
                return Err(Error::invalid(format!("{name} array has mismatched boxes")));
            }
            if !arr.all_inside() {
                return Err(Error::invalid(format!("{name} antenna outside its movable region")));
            }
            let gap = arr.min_box_gap();
            let fixed = arr.boxes.iter().all(Cuboid::is_degenerate);
            let ok = if fixed {
                arr.min_pairwise_distance() >= self.min_sep - tol
            } else {
                gap >= self.min_sep - tol
            };
            if !ok {
                return Err(Error::invalid(format!(
                    "{name} array violates the minimum separation D={}",
                    self.min_sep
                )));
            }
        }
        Ok(())
    }
}

/// Channels and field-response matrices for every user.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// `H_k`, `N × M`.
    pub h: Vec<CMat>,
    /// Transmit FRMs `G_k`, `L_tx × M`.
    pub g: Vec<CMat>,
    /// Receive FRMs `F_k`, `L_rx × N`.
    pub f: Vec<CMat>,
}

impl ChannelSet {
    pub fn users(&self) -> usize {
        self.h.len()
    }
}

/// Builds `H_k = F_kᴴ Σ_k G_k` for every user.
pub fn assemble_channels(geometry: &[PathGeometry], layout: &AntennaLayout) -> Result<ChannelSet> {
    if geometry.len() != layout.rx.len() {
        return Err(Error::invalid(format!(
            "{} path geometries but {} receive arrays",
            geometry.len(),
            layout.rx.len()
        )));
    }
    let mut out = ChannelSet {
        h: Vec::with_capacity(geometry.len()),
        g: Vec::with_capacity(geometry.len()),
        f: Vec::with_capacity(geometry.len()),
    };
    for (geo, rx) in geometry.iter().zip(&layout.rx) {
        if geo.prm.nrows() != geo.aoa.len() || geo.prm.ncols() != geo.aod.len() {
            return Err(Error::invalid("PRM shape does not match the path counts"));
        }
        let k0 = geo.wavenumber();
        let g = field_response_matrix(&geo.directions(Side::Tx), k0, &layout.tx.positions);
        let f = field_response_matrix(&geo.directions(Side::Rx), k0, &rx.positions);
        out.h.push(f.adjoint() * &geo.prm * &g);
        out.g.push(g);
        out.f.push(f);
    }
    Ok(out)
}

/// Transmit FRMs only, for a subset of antenna positions.
pub fn transmit_frms(geometry: &[PathGeometry], positions: &[Position]) -> Vec<CMat> {
    geometry
        .iter()
        .map(|geo| field_response_matrix(&geo.directions(Side::Tx), geo.wavenumber(), positions))
        .collect()
}

/// Large-scale gain `T0 · (d/d0)^(−ϱ)`.
pub fn pathloss(distance: f64, exponent: f64, reference_loss: f64, reference_distance: f64) -> Result<f64> {
    if !(reference_distance > 0.0) || !(distance >= reference_distance) {
        return Err(Error::invalid(format!(
            "pathloss needs distance >= d0 > 0 (distance={distance}, d0={reference_distance})"
        )));
    }
    Ok(reference_loss * (distance / reference_distance).powf(-exponent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, real};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 0.0107;

    fn random_geometry(rng: &mut ChaCha8Rng, ltx: usize, lrx: usize) -> PathGeometry {
        let angles = |rng: &mut ChaCha8Rng, n: usize| {
            (0..n)
                .map(|_| Angles::new(rng.random_range(0.0..PI), rng.random_range(0.0..PI)))
                .collect::<Vec<_>>()
        };
        PathGeometry {
            aod: angles(rng, ltx),
            aoa: angles(rng, lrx),
            prm: CMat::from_fn(lrx, ltx, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))),
            wavelength: LAMBDA,
        }
    }

    fn random_positions(rng: &mut ChaCha8Rng, n: usize) -> Vec<Position> {
        (0..n)
            .map(|_| Position::from_fn(|_, _| rng.random_range(-2.0 * LAMBDA..2.0 * LAMBDA)))
            .collect()
    }

    #[test]
    fn direction_vector_axes() {
        let close = |a: Position, b: [f64; 3]| (a - Position::from(b)).norm() < 1e-15;
        assert!(close(direction_vector(0.0, 0.0).unwrap(), [1.0, 0.0, 0.0]));
        assert!(close(direction_vector(PI / 2.0, 0.0).unwrap(), [0.0, 0.0, 1.0]));
        assert!(close(direction_vector(0.0, PI / 2.0).unwrap(), [0.0, 1.0, 0.0]));
    }

    #[test]
    fn direction_vector_rejects_nan() {
        assert!(matches!(direction_vector(f64::NAN, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(direction_vector(0.0, f64::INFINITY), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn direction_vectors_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let g = direction_vector(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)).unwrap();
            assert!((g.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn projected_distance_cases() {
        let x = Position::new(1.0, 0.0, 0.0);
        assert_eq!(projected_distance(&x, &Position::new(0.5 * LAMBDA, 0.0, 0.0)), 0.5 * LAMBDA);
        assert_eq!(projected_distance(&Position::new(0.3, 0.4, 0.5), &Position::zeros()), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let g = direction_vector(rng.random_range(0.0..PI), rng.random_range(0.0..PI)).unwrap();
            let t = Position::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let mut acc = 0.0;
            for i in 0..3 {
                acc += g[i] * t[i];
            }
            assert!((projected_distance(&g, &t) - acc).abs() < 1e-15);
        }
    }

    #[test]
    fn frv_at_origin_is_all_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let geo = random_geometry(&mut rng, 3, 2);
        let v = field_response_vector(&geo, Side::Tx, &Position::zeros());
        assert!(v.iter().all(|z| (z - real(1.0)).norm() < 1e-15));
    }

    #[test]
    fn frv_half_wavelength_gives_minus_one() {
        let geo = PathGeometry {
            aod: vec![Angles::new(0.0, 0.0)],
            aoa: vec![Angles::new(0.0, 0.0)],
            prm: CMat::from_element(1, 1, real(1.0)),
            wavelength: LAMBDA,
        };
        let v = field_response_vector(&geo, Side::Tx, &Position::new(LAMBDA / 2.0, 0.0, 0.0));
        assert!((v[0] - real(-1.0)).norm() < 1e-12);
    }

    #[test]
    fn frv_matches_scalar_exponentials_and_is_unit_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let geo = random_geometry(&mut rng, 3, 3);
        let p = random_positions(&mut rng, 1)[0];
        let v = field_response_vector(&geo, Side::Rx, &p);
        for (q, a) in geo.aoa.iter().enumerate() {
            let rho = a.elevation.cos() * a.azimuth.cos() * p.x
                + a.elevation.cos() * a.azimuth.sin() * p.y
                + a.elevation.sin() * p.z;
            let phase = 2.0 * PI / LAMBDA * rho;
            let expected = c(phase.cos(), phase.sin());
            assert!((v[q] - expected).norm() < 1e-12);
            assert!((v[q].norm() - 1.0).abs() < 1e-12);
        }
    }

    fn layout_from(tx: Vec<Position>, rx: Vec<Vec<Position>>) -> AntennaLayout {
        let arr = |p: Vec<Position>| ArrayLayout {
            boxes: p.iter().map(Cuboid::point).collect(),
            positions: p,
        };
        AntennaLayout {
            tx: arr(tx),
            rx: rx.into_iter().map(arr).collect(),
            min_sep: 0.0,
        }
    }

    #[test]
    fn single_path_at_origin_gives_constant_channel() {
        let s = c(0.3, -0.7);
        let geo = PathGeometry {
            aod: vec![Angles::new(0.4, 1.1)],
            aoa: vec![Angles::new(0.9, 0.2)],
            prm: CMat::from_element(1, 1, s),
            wavelength: LAMBDA,
        };
        let layout = layout_from(vec![Position::zeros(); 3], vec![vec![Position::zeros(); 2]]);
        let ch = assemble_channels(&[geo], &layout).unwrap();
        assert!(ch.h[0].iter().all(|z| (z - s).norm() < 1e-15));
        assert_eq!(ch.h[0].shape(), (2, 3));
    }

    #[test]
    fn assembled_channel_matches_nested_loop_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let (m, n) = (rng.random_range(1..=4), rng.random_range(1..=4));
            let (ltx, lrx) = (rng.random_range(1..=3), rng.random_range(1..=3));
            let geo = random_geometry(&mut rng, ltx, lrx);
            let layout = layout_from(random_positions(&mut rng, m), vec![random_positions(&mut rng, n)]);
            let ch = assemble_channels(std::slice::from_ref(&geo), &layout).unwrap();
            let k0 = 2.0 * PI / LAMBDA;
            let mut oracle = CMat::zeros(n, m);
            for r in 0..n {
                for t in 0..m {
                    let mut acc = c(0.0, 0.0);
                    for p in 0..lrx {
                        let fa = direction_vector(geo.aoa[p].elevation, geo.aoa[p].azimuth).unwrap();
                        let fph = C64::from_polar(1.0, k0 * fa.dot(&layout.rx[0].positions[r]));
                        for q in 0..ltx {
                            let ga = direction_vector(geo.aod[q].elevation, geo.aod[q].azimuth).unwrap();
                            let gph = C64::from_polar(1.0, k0 * ga.dot(&layout.tx.positions[t]));
                            acc += fph.conj() * geo.prm[(p, q)] * gph;
                        }
                    }
                    oracle[(r, t)] = acc;
                }
            }
            assert!(crate::linalg::rel_frobenius_error(&ch.h[0], &oracle) < 1e-12);
        }
    }

    #[test]
    fn moving_one_antenna_changes_only_its_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let geos: Vec<_> = (0..2).map(|_| random_geometry(&mut rng, 3, 3)).collect();
        let tx = random_positions(&mut rng, 4);
        let rx = vec![random_positions(&mut rng, 2), random_positions(&mut rng, 2)];
        let base = assemble_channels(&geos, &layout_from(tx.clone(), rx.clone())).unwrap();
        let mut moved = tx.clone();
        moved[2] += Position::new(1e-3, -2e-3, 5e-4);
        let after = assemble_channels(&geos, &layout_from(moved, rx)).unwrap();
        for k in 0..2 {
            for m in 0..4 {
                let same = base.g[k].column(m) == after.g[k].column(m);
                assert_eq!(same, m != 2, "user {k} column {m}");
            }
        }
    }

    #[test]
    fn shift_along_path_direction_rotates_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let geo = random_geometry(&mut rng, 3, 1);
        let t = random_positions(&mut rng, 1)[0];
        let dirs = geo.directions(Side::Tx);
        let delta = 0.37 * LAMBDA;
        for (q, g) in dirs.iter().enumerate() {
            let before = field_response_vector(&geo, Side::Tx, &t)[q];
            let after = field_response_vector(&geo, Side::Tx, &(t + g * delta))[q];
            let expected = before * C64::from_polar(1.0, 2.0 * PI * delta / LAMBDA);
            assert!((after - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn assemble_rejects_mismatched_users() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let geo = random_geometry(&mut rng, 2, 2);
        let layout = layout_from(random_positions(&mut rng, 2), vec![]);
        assert!(matches!(assemble_channels(&[geo], &layout), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pathloss_reference_and_decades() {
        let t0 = 10f64.powf(-61.4 / 10.0);
        assert_eq!(pathloss(1.0, 3.67, t0, 1.0).unwrap(), t0);
        let db = |g: f64| 10.0 * g.log10();
        assert!((db(t0) - db(pathloss(10.0, 3.67, t0, 1.0).unwrap()) - 36.7).abs() < 1e-9);
        assert!((db(t0) - db(pathloss(100.0, 3.67, t0, 1.0).unwrap()) - 73.4).abs() < 1e-9);
        assert!(matches!(pathloss(0.5, 3.67, t0, 1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn movable_grid_boxes_keep_min_separation() {
        for &(count, rho) in &[(16usize, 2.0), (64, 2.0), (4, 1.0), (9, 0.5), (6, 1.5)] {
            let arr = ArrayLayout::movable_grid(count, LAMBDA, rho, LAMBDA / 2.0).unwrap();
            assert!(arr.min_box_gap() >= LAMBDA / 2.0 - 1e-15);
            assert!(arr.all_inside());
            assert!(arr.min_pairwise_distance() >= LAMBDA / 2.0 - 1e-15);
        }
        assert!(ArrayLayout::movable_grid(4, LAMBDA, 0.25, LAMBDA / 2.0).is_err());
    }

    #[test]
    fn clamp_projects_coordinatewise() {
        let b = Cuboid::new([0.0, 0.0, -1.0], [1.0, 1.0, 1.0]);
        let p = b.clamp(&Position::new(2.0, -1.0, 0.5));
        assert_eq!(p, Position::new(1.0, 0.0, 0.5));
        assert!(b.contains(&p));
    }
}
