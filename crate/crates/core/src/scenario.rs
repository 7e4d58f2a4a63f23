//! Scenario parameters, channel realizations, baselines and CSI perturbations.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::channel::{pathloss, Angles, AntennaLayout, ArrayLayout, PathGeometry, SystemDims};
use crate::error::{Error, Result};
use crate::linalg::{CMat, ZERO};
use crate::solver::Problem;
use crate::testkit::{cn, positions_in_boxes};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Geometry = 0,
    RandomPositions = 1,
    Perturbation = 2,
}

const PURPOSES: u64 = 3;

/// ChaCha generator for one (realization, purpose) pair.
pub fn stream_rng(seed: u64, realization: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(realization as u64 * PURPOSES + purpose as u64);
    rng
}

/// System and propagation parameters; every field has a default and can be
/// overridden from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub users: usize,
    pub streams: usize,
    pub clusters: usize,
    pub carrier_hz: f64,
    /// Minimum antenna spacing as a multiple of the wavelength.
    pub min_sep_wavelengths: f64,
    pub noise_dbm: f64,
    pub power_dbm: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub pathloss_exponent: f64,
    pub reference_loss_db: f64,
    pub reference_distance: f64,
    pub paths: usize,
    /// Movable-box pitch in wavelengths.
    pub rho: f64,
    pub realizations: usize,
    pub seed: u64,
    /// User priorities; all ones when absent.
    pub weights: Option<Vec<f64>>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            tx_antennas: 16,
            rx_antennas: 4,
            users: 6,
            streams: 4,
            clusters: 4,
            carrier_hz: 28e9,
            min_sep_wavelengths: 0.5,
            noise_dbm: -90.0,
            power_dbm: 30.0,
            d_min: 100.0,
            d_max: 300.0,
            pathloss_exponent: 3.67,
            reference_loss_db: -61.4,
            reference_distance: 1.0,
            paths: 3,
            rho: 2.0,
            realizations: 50,
            seed: 1,
            weights: None,
        }
    }
}

impl ScenarioSpec {
    /// Full-size parameters: `M = 64`, `S = 200`.
    pub fn full_scale() -> Self {
        Self {
            tx_antennas: 64,
            realizations: 200,
            ..Self::default()
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn min_sep(&self) -> f64 {
        self.min_sep_wavelengths * self.wavelength()
    }

    pub fn noise_watt(&self) -> f64 {
        dbm_to_watt(self.noise_dbm)
    }

    pub fn p_max_watt(&self) -> f64 {
        dbm_to_watt(self.power_dbm)
    }

    pub fn dims(&self) -> SystemDims {
        SystemDims::new(self.tx_antennas, self.rx_antennas, self.users, self.streams, self.clusters)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.weights.clone().unwrap_or_else(|| vec![1.0; self.users])
    }

    pub fn validate(&self) -> Result<()> {
        self.dims().validate()?;
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("min_sep_wavelengths", self.min_sep_wavelengths),
            ("d_min", self.d_min),
            ("pathloss_exponent", self.pathloss_exponent),
            ("reference_distance", self.reference_distance),
            ("rho", self.rho),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.d_max >= self.d_min && self.d_min >= self.reference_distance) {
            return Err(Error::invalid("need reference_distance <= d_min <= d_max"));
        }
        if !self.noise_dbm.is_finite() || !self.power_dbm.is_finite() || !self.reference_loss_db.is_finite() {
            return Err(Error::invalid("power levels must be finite"));
        }
        if self.paths == 0 {
            return Err(Error::invalid("need at least one path"));
        }
        if self.rho < self.min_sep_wavelengths {
            return Err(Error::invalid(format!(
                "rho = {} is smaller than the minimum spacing of {} wavelengths",
                self.rho, self.min_sep_wavelengths
            )));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.users || w.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                return Err(Error::invalid("weights must be K positive numbers"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(format!("reading scenario {}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario spec serializes")
    }

    pub fn pathloss(&self, distance: f64) -> Result<f64> {
        pathloss(
            distance,
            self.pathloss_exponent,
            db_to_linear(self.reference_loss_db),
            self.reference_distance,
        )
    }
}

/// One channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub index: usize,
    pub geometry: Vec<PathGeometry>,
    pub distances: Vec<f64>,
}

pub fn sample_scenario(spec: &ScenarioSpec, index: usize) -> Result<Realization> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, index, Purpose::Geometry);
    let lambda = spec.wavelength();
    let l = spec.paths;
    let pi = std::f64::consts::PI;
    let mut geometry = Vec::with_capacity(spec.users);
    let mut distances = Vec::with_capacity(spec.users);
    for _ in 0..spec.users {
        let d2 = rng.random_range(spec.d_min * spec.d_min..=spec.d_max * spec.d_max);
        let d = d2.sqrt();
        let kappa = spec.pathloss(d)?;
        let mut angles = |n| -> Vec<Angles> {
            (0..n)
                .map(|_| Angles::new(rng.random_range(0.0..pi), rng.random_range(0.0..pi)))
                .collect()
        };
        let aod = angles(l);
        let aoa = angles(l);
        let prm = CMat::from_fn(l, l, |r, c| if r == c { cn(&mut rng, kappa / l as f64) } else { ZERO });
        geometry.push(PathGeometry {
            aod,
            aoa,
            prm,
            wavelength: lambda,
        });
        distances.push(d);
    }
    Ok(Realization {
        index,
        geometry,
        distances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Fpa,
    Rpa,
    Tfa,
    Rfa,
    Trfa,
}

impl Baseline {
    pub const ALL: [Baseline; 5] = [Baseline::Fpa, Baseline::Rpa, Baseline::Tfa, Baseline::Rfa, Baseline::Trfa];

    pub fn optimize_t(self) -> bool {
        matches!(self, Baseline::Tfa | Baseline::Trfa)
    }

    pub fn optimize_r(self) -> bool {
        matches!(self, Baseline::Rfa | Baseline::Trfa)
    }

    fn tx_in_boxes(self) -> bool {
        matches!(self, Baseline::Rpa | Baseline::Tfa | Baseline::Trfa)
    }

    fn rx_in_boxes(self) -> bool {
        matches!(self, Baseline::Rpa | Baseline::Rfa | Baseline::Trfa)
    }

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Fpa => "FPA",
            Baseline::Rpa => "RPA",
            Baseline::Tfa => "TFA",
            Baseline::Rfa => "RFA",
            Baseline::Trfa => "TRFA",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown baseline '{s}' (expected fpa, rpa, tfa, rfa or trfa)")))
    }
}

/// Starting layout of a baseline: box grids for movable or random arrays,
/// half-wavelength UPAs for fixed ones. RPA draws uniform positions per
/// realization.
pub fn baseline_layout(spec: &ScenarioSpec, baseline: Baseline, realization: usize) -> Result<AntennaLayout> {
    let lambda = spec.wavelength();
    let min_sep = spec.min_sep();
    let array = |count, boxed| -> Result<ArrayLayout> {
        if boxed {
            ArrayLayout::movable_grid(count, lambda, spec.rho, min_sep)
        } else {
            Ok(ArrayLayout::fixed_upa(count, lambda / 2.0))
        }
    };
    let mut tx = array(spec.tx_antennas, baseline.tx_in_boxes())?;
    let mut rx = (0..spec.users)
        .map(|_| array(spec.rx_antennas, baseline.rx_in_boxes()))
        .collect::<Result<Vec<_>>>()?;
    if baseline == Baseline::Rpa {
        let mut rng = stream_rng(spec.seed, realization, Purpose::RandomPositions);
        tx.positions = positions_in_boxes(&mut rng, &tx);
        for r in &mut rx {
            r.positions = positions_in_boxes(&mut rng, r);
        }
    }
    let layout = AntennaLayout { tx, rx, min_sep };
    layout.validate()?;
    Ok(layout)
}

/// Problem for one baseline on the given (possibly estimated) geometry.
pub fn build_problem(spec: &ScenarioSpec, baseline: Baseline, realization: usize, geometry: Vec<PathGeometry>) -> Result<Problem> {
    let problem = Problem {
        dims: spec.dims(),
        geometry,
        layout: baseline_layout(spec, baseline, realization)?,
        p_max: spec.p_max_watt(),
        weights: spec.weights(),
        noise: vec![spec.noise_watt(); spec.users],
    };
    problem.validate()?;
    Ok(problem)
}

/// CSI error model: uniform angle offsets and relative CSCG PRM errors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// Maximum absolute angle error in radians.
    pub angle_error: f64,
    /// Variance of the relative PRM error.
    pub prm_error: f64,
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.angle_error >= 0.0 && self.prm_error >= 0.0 && self.angle_error.is_finite() && self.prm_error.is_finite()) {
            return Err(Error::invalid("perturbation magnitudes must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.angle_error == 0.0 && self.prm_error == 0.0
    }
}

/// Estimated geometry used for optimization. Evaluation always uses the truth.
pub fn apply_perturbation<R: Rng + ?Sized>(
    geometry: &[PathGeometry],
    perturbation: &PerturbationSpec,
    rng: &mut R,
) -> Result<Vec<PathGeometry>> {
    perturbation.validate()?;
    if perturbation.is_zero() {
        return Ok(geometry.to_vec());
    }
    let mu = perturbation.angle_error;
    let mut jitter = |a: &Angles| -> Angles {
        if mu == 0.0 {
            return *a;
        }
        Angles::new(a.elevation + rng.random_range(-mu..=mu), a.azimuth + rng.random_range(-mu..=mu))
    };
    let mut out = Vec::with_capacity(geometry.len());
    for g in geometry {
        let aod = g.aod.iter().map(&mut jitter).collect();
        let aoa = g.aoa.iter().map(&mut jitter).collect();
        out.push(PathGeometry {
            aod,
            aoa,
            prm: g.prm.clone(),
            wavelength: g.wavelength,
        });
    }
    if perturbation.prm_error > 0.0 {
        for (est, g) in out.iter_mut().zip(geometry) {
            for (e, s) in est.prm.iter_mut().zip(g.prm.iter()) {
                if s.norm() > 0.0 {
                    *e = s + cn(rng, perturbation.prm_error) * s.norm();
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_conversions() {
        assert_eq!(dbm_to_watt(30.0), 1.0);
        assert!((dbm_to_watt(-90.0) - 1e-12).abs() < 1e-27);
        assert!((db_to_linear(-61.4) - 10f64.powf(-6.14)).abs() < 1e-22);
    }

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let s = ScenarioSpec::default();
        s.validate().unwrap();
        assert!((s.wavelength() - 0.0107).abs() < 1e-4);
        let back = ScenarioSpec::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let partial = ScenarioSpec::from_json(r#"{"tx_antennas": 64, "seed": 9}"#).unwrap();
        assert_eq!(partial.tx_antennas, 64);
        assert_eq!(partial.users, 6);
        assert!(ScenarioSpec::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(ScenarioSpec::from_json(r#"{"rho": 0.2}"#).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = ScenarioSpec::default();
        let a = sample_scenario(&s, 3).unwrap();
        let b = sample_scenario(&s, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_scenario(&s, 4).unwrap());
    }

    #[test]
    fn distances_and_angles_in_range() {
        let s = ScenarioSpec::default();
        for i in 0..50 {
            let r = sample_scenario(&s, i).unwrap();
            for (d, g) in r.distances.iter().zip(&r.geometry) {
                assert!((100.0..=300.0).contains(d));
                for a in g.aod.iter().chain(&g.aoa) {
                    assert!((0.0..std::f64::consts::PI).contains(&a.elevation));
                    assert!((0.0..std::f64::consts::PI).contains(&a.azimuth));
                }
                for r in 0..3 {
                    for c in 0..3 {
                        if r != c {
                            assert_eq!(g.prm[(r, c)], ZERO);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn prm_power_matches_pathloss() {
        let s = ScenarioSpec {
            users: 1,
            ..ScenarioSpec::default()
        };
        let mut acc = 0.0;
        let n = 10_000;
        for i in 0..n {
            let r = sample_scenario(&s, i).unwrap();
            let kappa = s.pathloss(r.distances[0]).unwrap();
            let g = &r.geometry[0];
            acc += (0..3).map(|q| g.prm[(q, q)].norm_sqr()).sum::<f64>() / 3.0 / (kappa / 3.0);
        }
        let mean = acc / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "normalized mean {mean}");
    }

    #[test]
    fn baseline_layouts() {
        let s = ScenarioSpec::default();
        let lambda = s.wavelength();
        let fpa = baseline_layout(&s, Baseline::Fpa, 0).unwrap();
        assert!(fpa.tx.boxes.iter().all(|b| b.is_degenerate()));
        assert!((fpa.tx.min_pairwise_distance() - lambda / 2.0).abs() < 1e-12);
        let tfa = baseline_layout(&s, Baseline::Tfa, 0).unwrap();
        assert!(!tfa.tx.boxes[0].is_degenerate());
        assert!(tfa.rx[0].boxes[0].is_degenerate());
        let rpa0 = baseline_layout(&s, Baseline::Rpa, 0).unwrap();
        let rpa1 = baseline_layout(&s, Baseline::Rpa, 1).unwrap();
        assert_ne!(rpa0.tx.positions, rpa1.tx.positions);
        assert_eq!(rpa0, baseline_layout(&s, Baseline::Rpa, 0).unwrap());
        assert!(rpa0.tx.all_inside());
        for b in Baseline::ALL {
            assert_eq!(b.name().to_lowercase().parse::<Baseline>().unwrap(), b);
        }
        assert!("xyz".parse::<Baseline>().is_err());
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let s = ScenarioSpec::default();
        let r = sample_scenario(&s, 0).unwrap();
        let mut rng = stream_rng(1, 0, Purpose::Perturbation);
        let same = apply_perturbation(&r.geometry, &PerturbationSpec::default(), &mut rng).unwrap();
        assert_eq!(same, r.geometry);
    }

    #[test]
    fn angle_errors_are_bounded() {
        let s = ScenarioSpec::default();
        let r = sample_scenario(&s, 0).unwrap();
        let mut rng = stream_rng(1, 0, Purpose::Perturbation);
        let p = PerturbationSpec {
            angle_error: 0.05,
            prm_error: 0.0,
        };
        for _ in 0..20 {
            let est = apply_perturbation(&r.geometry, &p, &mut rng).unwrap();
            for (e, g) in est.iter().zip(&r.geometry) {
                assert_eq!(e.prm, g.prm);
                for (a, b) in e.aod.iter().chain(&e.aoa).zip(g.aod.iter().chain(&g.aoa)) {
                    assert!((a.elevation - b.elevation).abs() <= 0.05);
                    assert!((a.azimuth - b.azimuth).abs() <= 0.05);
                }
            }
        }
        assert!(apply_perturbation(&r.geometry, &PerturbationSpec { angle_error: -1.0, prm_error: 0.0 }, &mut rng).is_err());
    }

    #[test]
    fn prm_errors_keep_support() {
        let s = ScenarioSpec::default();
        let r = sample_scenario(&s, 2).unwrap();
        let mut rng = stream_rng(1, 2, Purpose::Perturbation);
        let p = PerturbationSpec {
            angle_error: 0.0,
            prm_error: 1.0,
        };
        let est = apply_perturbation(&r.geometry, &p, &mut rng).unwrap();
        for (e, g) in est.iter().zip(&r.geometry) {
            assert_eq!(e.aod, g.aod);
            assert_ne!(e.prm, g.prm);
            assert_eq!(e.prm[(0, 1)], ZERO);
        }
    }
}
