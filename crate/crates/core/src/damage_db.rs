//! Synthetic damage database: direct-path baselines plus a point-scatterer echo.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atom::{make_tone_burst, BurstSpec};
use crate::dispersion::{propagate, ModeSet, PlateModel};
use crate::error::{invalid, Result};
use crate::signal::{read_signal_csv, write_signal_csv, Signal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub pzt_positions: Vec<(f64, f64)>,
    pub actuator_index: usize,
    /// Plate extent along x and y in metres.
    pub plate_size_m: (f64, f64),
}

impl Default for SensorLayout {
    /// Four PZTs 50 mm in from the corners of a 300 mm square plate plus one
    /// at the middle of the bottom row; the bottom-left one fires.
    fn default() -> Self {
        Self {
            pzt_positions: vec![
                (0.05, 0.05),
                (0.25, 0.05),
                (0.25, 0.25),
                (0.05, 0.25),
                (0.15, 0.05),
            ],
            actuator_index: 0,
            plate_size_m: (0.3, 0.3),
        }
    }
}

impl SensorLayout {
    pub fn validate(&self) -> Result<()> {
        if self.pzt_positions.len() < 2 {
            return Err(invalid("pzt_positions", "need at least two PZTs"));
        }
        if self.actuator_index >= self.pzt_positions.len() {
            return Err(invalid("actuator_index", "out of range"));
        }
        for p in &self.pzt_positions {
            if !self.contains(*p) {
                return Err(invalid("pzt_positions", format!("{p:?} outside the plate")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, (x, y): (f64, f64)) -> bool {
        (0.0..=self.plate_size_m.0).contains(&x) && (0.0..=self.plate_size_m.1).contains(&y)
    }

    pub fn actuator(&self) -> (f64, f64) {
        self.pzt_positions[self.actuator_index]
    }

    /// Receiving PZT indices, in layout order.
    pub fn sensors(&self) -> Vec<usize> {
        (0..self.pzt_positions.len())
            .filter(|i| *i != self.actuator_index)
            .collect()
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageCase {
    pub x_m: f64,
    pub y_m: f64,
    pub reflection_coeff: f64,
    pub label: String,
}

impl DamageCase {
    pub fn new(x_m: f64, y_m: f64, reflection_coeff: f64) -> Self {
        Self {
            x_m,
            y_m,
            reflection_coeff,
            label: format!("x{:03.0}_y{:03.0}", x_m * 1e3, y_m * 1e3),
        }
    }
}

/// Every combination of the given damage coordinates, x-major.
pub fn damage_grid(xs_m: &[f64], ys_m: &[f64], reflection_coeff: f64) -> Vec<DamageCase> {
    xs_m.iter()
        .flat_map(|x| {
            ys_m.iter()
                .map(move |y| DamageCase::new(*x, *y, reflection_coeff))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PathRecord {
    pub actuator: usize,
    pub sensor: usize,
    pub baseline: Signal,
    pub damaged: Signal,
    /// `damaged − baseline`, each with its own noise realization.
    pub residual: Signal,
    pub snr_db: Option<f64>,
}

/// Direct actuator to sensor signal for a burst already padded to the window.
pub fn gen_baseline(
    layout: &SensorLayout,
    sensor: usize,
    plate: &PlateModel,
    burst: &Signal,
) -> Result<Signal> {
    let d = dist(layout.actuator(), pzt(layout, sensor)?);
    if d <= 0.0 {
        return Err(invalid("sensor", "coincides with the actuator"));
    }
    propagate(burst, d, plate, ModeSet::both())
}

/// Baseline plus the echo scattered by `damage`.
pub fn gen_damaged(
    layout: &SensorLayout,
    sensor: usize,
    damage: &DamageCase,
    plate: &PlateModel,
    burst: &Signal,
) -> Result<Signal> {
    let baseline = gen_baseline(layout, sensor, plate, burst)?;
    add_echo(&baseline, layout, sensor, damage, plate, burst)
}

fn pzt(layout: &SensorLayout, i: usize) -> Result<(f64, f64)> {
    layout
        .pzt_positions
        .get(i)
        .copied()
        .ok_or_else(|| invalid("sensor", format!("index {i} out of range")))
}

fn add_echo(
    baseline: &Signal,
    layout: &SensorLayout,
    sensor: usize,
    damage: &DamageCase,
    plate: &PlateModel,
    burst: &Signal,
) -> Result<Signal> {
    let at = (damage.x_m, damage.y_m);
    if !layout.contains(at) {
        return Err(invalid("damage", format!("{at:?} outside the plate")));
    }
    if damage.reflection_coeff == 0.0 {
        return Ok(baseline.clone());
    }
    let d = dist(layout.actuator(), at) + dist(at, pzt(layout, sensor)?);
    let echo = propagate(burst, d, plate, ModeSet::both())?;
    baseline.add(&echo.scaled(damage.reflection_coeff)?)
}

/// Adds white Gaussian noise with power `mean(x²) · 10^(−snr/10)`.
pub fn add_noise(x: &Signal, snr_db: f64, rng: &mut ChaCha8Rng) -> Result<Signal> {
    if snr_db.is_nan() {
        return Err(invalid("snr_db", "is NaN"));
    }
    let power = x.samples().iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let sigma = (power * 10f64.powf(-snr_db / 10.0)).sqrt();
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid("snr_db", e.to_string()))?;
    let noisy = x.samples().iter().map(|v| v + normal.sample(rng)).collect();
    Signal::new(noisy, x.sample_rate_hz())
}

/// Noise generator for one signal of one case, independent of scheduling order.
pub fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbConfig {
    pub layout: SensorLayout,
    pub plate: PlateModel,
    pub burst: BurstSpec,
    pub window_len: usize,
    pub damage_x_m: Vec<f64>,
    pub damage_y_m: Vec<f64>,
    pub reflection_coeff: f64,
    /// `None` disables the noise.
    pub snr_db: Option<f64>,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for DbConfig {
    fn default() -> Self {
        Self {
            layout: SensorLayout::default(),
            plate: PlateModel {
                e_pa: 60e9,
                nu: 0.3,
                rho: 1554.0,
                h_m: 2.4e-3,
                a0_form: Default::default(),
            },
            burst: BurstSpec {
                f0_hz: 200e3,
                n_cycles: 5,
                sample_rate_hz: 1.0 / 0.3e-6,
                amplitude: 1.0,
            },
            window_len: 1024,
            damage_x_m: (0..7).map(|i| 0.05 + 0.025 * i as f64).collect(),
            damage_y_m: (0..6).map(|i| 0.125 + 0.005 * i as f64).collect(),
            reflection_coeff: 0.1,
            snr_db: Some(150.0),
            n_test: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseRecord {
    pub case: DamageCase,
    pub split: Split,
    pub paths: Vec<PathRecord>,
}

#[derive(Debug, Clone)]
pub struct Database {
    pub config: DbConfig,
    pub cases: Vec<CaseRecord>,
}

/// Seeded train/test assignment of `n` cases with `n_test` test cases.
pub fn split_cases(n: usize, n_test: usize, seed: u64) -> Result<Vec<Split>> {
    if n_test >= n {
        return Err(invalid(
            "n_test",
            format!("{n_test} leaves no training case out of {n}"),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut noise_rng(seed, u64::MAX));
    let mut split = vec![Split::Train; n];
    for &i in &order[n - n_test..] {
        split[i] = Split::Test;
    }
    Ok(split)
}

pub fn gen_database(config: &DbConfig) -> Result<Database> {
    config.layout.validate()?;
    config.plate.validate()?;
    if !(config.reflection_coeff > 0.0 && config.reflection_coeff <= 1.0) {
        return Err(invalid("reflection_coeff", "must be in (0, 1]"));
    }
    let burst = make_tone_burst(&config.burst)?;
    if config.window_len < burst.len() {
        return Err(invalid("window_len", "shorter than the burst"));
    }
    let burst = burst.resized(config.window_len)?;
    let cases = damage_grid(
        &config.damage_x_m,
        &config.damage_y_m,
        config.reflection_coeff,
    );
    if cases.is_empty() {
        return Err(invalid("damage grid", "is empty"));
    }
    let splits = split_cases(cases.len(), config.n_test, config.seed)?;
    let sensors = config.layout.sensors();
    let baselines: Vec<Signal> = sensors
        .iter()
        .map(|s| gen_baseline(&config.layout, *s, &config.plate, &burst))
        .collect::<Result<_>>()?;
    let per_case = 2 * sensors.len() as u64;

    let records = cases
        .into_par_iter()
        .zip(splits)
        .enumerate()
        .map(|(ci, (case, split))| {
            let paths = sensors
                .iter()
                .zip(&baselines)
                .enumerate()
                .map(|(si, (&sensor, clean))| {
                    let damaged =
                        add_echo(clean, &config.layout, sensor, &case, &config.plate, &burst)?;
                    let (baseline, damaged) = match config.snr_db {
                        Some(snr) => {
                            let stream = ci as u64 * per_case + 2 * si as u64;
                            (
                                add_noise(clean, snr, &mut noise_rng(config.seed, stream))?,
                                add_noise(&damaged, snr, &mut noise_rng(config.seed, stream + 1))?,
                            )
                        }
                        None => (clean.clone(), damaged),
                    };
                    let residual = damaged.sub(&baseline)?;
                    Ok(PathRecord {
                        actuator: config.layout.actuator_index,
                        sensor,
                        baseline,
                        damaged,
                        residual,
                        snr_db: config.snr_db,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CaseRecord { case, split, paths })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Database {
        config: config.clone(),
        cases: records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPath {
    pub actuator: usize,
    pub sensor: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCase {
    pub label: String,
    pub x_m: f64,
    pub y_m: f64,
    pub reflection_coeff: f64,
    pub split: Split,
    pub paths: Vec<ManifestPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: DbConfig,
    pub cases: Vec<ManifestCase>,
}

/// Writes residual CSVs as `<dir>/<label>/<actuator>-<sensor>.csv` and `<dir>/manifest.json`.
pub fn write_database(db: &Database, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut cases = Vec::with_capacity(db.cases.len());
    for rec in &db.cases {
        let case_dir = dir.join(&rec.case.label);
        fs::create_dir_all(&case_dir)?;
        let mut paths = Vec::new();
        for p in &rec.paths {
            let file = format!("{}/{}-{}.csv", rec.case.label, p.actuator, p.sensor);
            write_signal_csv(dir.join(&file), &p.residual)?;
            paths.push(ManifestPath {
                actuator: p.actuator,
                sensor: p.sensor,
                file,
            });
        }
        cases.push(ManifestCase {
            label: rec.case.label.clone(),
            x_m: rec.case.x_m,
            y_m: rec.case.y_m,
            reflection_coeff: rec.case.reflection_coeff,
            split: rec.split,
            paths,
        });
    }
    let manifest = Manifest {
        config: db.config.clone(),
        cases,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// Residual signals of a written database, per case in manifest order.
pub fn read_database(dir: impl AsRef<Path>) -> Result<(Manifest, Vec<Vec<Signal>>)> {
    let dir = dir.as_ref();
    let path: PathBuf = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&path)?)?;
    let residuals = manifest
        .cases
        .iter()
        .map(|c| {
            c.paths
                .iter()
                .map(|p| read_signal_csv(dir.join(&p.file)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, residuals))
}

impl Database {
    pub fn residuals(&self) -> Vec<Vec<Signal>> {
        self.cases
            .iter()
            .map(|c| c.paths.iter().map(|p| p.residual.clone()).collect())
            .collect()
    }

    pub fn targets(&self) -> Vec<(f64, f64)> {
        self.cases
            .iter()
            .map(|c| (c.case.x_m, c.case.y_m))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::norm_time;

    fn setup() -> (DbConfig, Signal) {
        let cfg = DbConfig::default();
        let burst = make_tone_burst(&cfg.burst)
            .unwrap()
            .resized(cfg.window_len)
            .unwrap();
        (cfg, burst)
    }

    #[test]
    fn default_layout_is_valid() {
        let l = SensorLayout::default();
        l.validate().unwrap();
        assert_eq!(l.sensors(), vec![1, 2, 3, 4]);
        let bad = SensorLayout {
            pzt_positions: vec![(0.1, 0.1), (0.4, 0.1)],
            ..SensorLayout::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn symmetric_sensors_share_baselines() {
        let (cfg, burst) = setup();
        let layout = SensorLayout {
            pzt_positions: vec![(0.15, 0.15), (0.25, 0.15), (0.15, 0.25)],
            ..SensorLayout::default()
        };
        let a = gen_baseline(&layout, 1, &cfg.plate, &burst).unwrap();
        let b = gen_baseline(&layout, 2, &cfg.plate, &burst).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x - y).abs() < 1e-12);
        }
        let e = norm_time(&burst);
        assert!(norm_time(&a) > 0.5 * e);
        assert!(gen_baseline(&layout, 0, &cfg.plate, &burst).is_err());
    }

    fn onset(x: &Signal, thresh: f64) -> usize {
        let peak = x.samples().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        x.samples()
            .iter()
            .position(|v| v.abs() > thresh * peak)
            .unwrap()
    }

    #[test]
    fn echo_delay_follows_path_length() {
        let (cfg, burst) = setup();
        let layout = &cfg.layout;
        let c = cfg.plate.s0_speed();
        let fs = cfg.burst.sample_rate_hz;
        let echo = |x: f64| {
            let case = DamageCase::new(x, 0.125, 0.1);
            let d = gen_damaged(layout, 1, &case, &cfg.plate, &burst).unwrap();
            let b = gen_baseline(layout, 1, &cfg.plate, &burst).unwrap();
            d.sub(&b).unwrap()
        };
        let near = onset(&echo(0.10), 1e-3);
        let far = onset(&echo(0.125), 1e-3);
        let path = |x: f64| dist((0.05, 0.05), (x, 0.125)) + dist((x, 0.125), (0.25, 0.05));
        let expected = (path(0.125) - path(0.10)) / c * fs;
        assert!(
            (far as f64 - near as f64 - expected).abs() <= 2.0,
            "{near} {far} {expected}"
        );
        // triangle inequality: no echo energy before the direct S0 arrival
        let direct = gen_baseline(layout, 1, &cfg.plate, &burst).unwrap();
        assert!(near >= onset(&direct, 1e-3));
    }

    #[test]
    fn zero_reflection_gives_baseline() {
        let (cfg, burst) = setup();
        let case = DamageCase::new(0.1, 0.13, 0.0);
        let d = gen_damaged(&cfg.layout, 2, &case, &cfg.plate, &burst).unwrap();
        let b = gen_baseline(&cfg.layout, 2, &cfg.plate, &burst).unwrap();
        assert_eq!(d.samples(), b.samples());
    }

    #[test]
    fn noise_level_and_determinism() {
        let (cfg, burst) = setup();
        let b = gen_baseline(&cfg.layout, 1, &cfg.plate, &burst).unwrap();
        let x = add_noise(&b, 20.0, &mut noise_rng(7, 3)).unwrap();
        let y = add_noise(&b, 20.0, &mut noise_rng(7, 3)).unwrap();
        assert_eq!(x.samples(), y.samples());
        let noise = x.sub(&b).unwrap();
        let snr = 10.0 * (b.energy() / noise.energy()).log10();
        assert!((snr - 20.0).abs() < 0.5, "{snr}");
        let quiet = add_noise(&b, 150.0, &mut noise_rng(7, 3)).unwrap();
        let ratio = quiet.sub(&b).unwrap().energy() / b.energy();
        assert!(ratio > 1e-16 && ratio < 1e-14, "{ratio}");
    }

    #[test]
    fn database_shape_and_split() {
        let cfg = DbConfig::default();
        let db = gen_database(&cfg).unwrap();
        assert_eq!(db.cases.len(), 42);
        let test = db.cases.iter().filter(|c| c.split == Split::Test).count();
        assert_eq!(test, 5);
        assert!(db.cases.iter().all(|c| c.paths.len() == 4));
        let again = gen_database(&cfg).unwrap();
        for (a, b) in db.cases.iter().zip(&again.cases) {
            assert_eq!(a.split, b.split);
            for (p, q) in a.paths.iter().zip(&b.paths) {
                assert_eq!(p.residual.samples(), q.residual.samples());
            }
        }
    }

    #[test]
    fn noiseless_residual_vanishes_without_echo() {
        let cfg = DbConfig {
            snr_db: None,
            reflection_coeff: 1e-300,
            ..DbConfig::default()
        };
        let db = gen_database(&cfg).unwrap();
        for c in &db.cases {
            for p in &c.paths {
                assert!(p.residual.samples().iter().all(|v| v.abs() < 1e-290));
            }
        }
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = DbConfig {
            damage_x_m: vec![0.05, 0.1],
            damage_y_m: vec![0.125, 0.13],
            n_test: 1,
            ..DbConfig::default()
        };
        let db = gen_database(&cfg).unwrap();
        let m = write_database(&db, dir.path()).unwrap();
        assert_eq!(m.cases.len(), 4);
        assert!(dir.path().join("x050_y125/0-1.csv").exists());
        let (m2, res) = read_database(dir.path()).unwrap();
        assert_eq!(m, m2);
        assert_eq!(res.len(), 4);
        assert_eq!(res[0][0].samples(), db.cases[0].paths[0].residual.samples());
    }
}
