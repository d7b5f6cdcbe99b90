//! The excitation atom: a sine tone burst under a half-sine window.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{read_signal_csv, Signal};

/// Parameters of a windowed tone burst.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstSpec {
    pub f0_hz: f64,
    pub n_cycles: u32,
    pub sample_rate_hz: f64,
    pub amplitude: f64,
}

impl BurstSpec {
    /// 100 kHz, 5 cycles, sampled at 2 MHz, unit amplitude.
    pub fn reference() -> Self {
        Self {
            f0_hz: 100e3,
            n_cycles: 5,
            sample_rate_hz: 2e6,
            amplitude: 1.0,
        }
    }

    pub fn duration_s(&self) -> f64 {
        f64::from(self.n_cycles) / self.f0_hz
    }

    /// `ceil(T_b · fs) + 1` samples, so that both window endpoints are covered.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        // guard against ceil(100.00000000000001)
        let span = self.duration_s() * self.sample_rate_hz;
        (span - 1e-9).ceil() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0_hz.is_finite() && self.f0_hz > 0.0) {
            return Err(invalid("f0_hz", format!("{} is not > 0", self.f0_hz)));
        }
        if self.n_cycles == 0 {
            return Err(invalid("n_cycles", "must be >= 1"));
        }
        if !self.amplitude.is_finite() {
            return Err(invalid("amplitude", "not finite"));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 2.0 * self.f0_hz) {
            return Err(Error::Nyquist {
                f0_hz: self.f0_hz,
                sample_rate_hz: self.sample_rate_hz,
            });
        }
        Ok(())
    }
}

/// `A · sin(2π f0 t) · sin(π t / T_b)` on `[0, T_b]`, zero afterwards.
pub fn make_tone_burst(spec: &BurstSpec) -> Result<Signal> {
    spec.validate()?;
    let tb = spec.duration_s();
    let dt = 1.0 / spec.sample_rate_hz;
    let samples = (0..spec.len())
        .map(|i| {
            let t = i as f64 * dt;
            if t >= tb * (1.0 - 1e-12) {
                0.0
            } else {
                spec.amplitude * (2.0 * PI * spec.f0_hz * t).sin() * (PI * t / tb).sin()
            }
        })
        .collect();
    Signal::new(samples, spec.sample_rate_hz)
}

/// Loads a user-supplied atom from a `time_s,value` CSV.
pub fn load_atom(path: impl AsRef<Path>) -> Result<Signal> {
    let atom = read_signal_csv(path)?;
    if atom.support_len() == 0 {
        return Err(Error::ZeroEnergyAtom);
    }
    Ok(atom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{forward_transform, norm_time, write_signal_csv};
    use rustfft::num_complex::Complex64;
    use std::io::Write;

    #[test]
    fn reference_burst_shape() {
        let spec = BurstSpec::reference();
        assert!((spec.duration_s() - 50e-6).abs() < 1e-18);
        let x = make_tone_burst(&spec).unwrap();
        assert_eq!(x.len(), 101);
        assert_eq!(x.samples()[0], 0.0);
        assert_eq!(x.samples()[100], 0.0);
    }

    #[test]
    fn off_grid_duration_still_ends_at_zero() {
        let spec = BurstSpec {
            f0_hz: 200e3,
            n_cycles: 5,
            sample_rate_hz: 1.0 / 0.3e-6,
            amplitude: 1.0,
        };
        let x = make_tone_burst(&spec).unwrap();
        assert_eq!(x.len(), 85);
        assert_eq!(*x.samples().last().unwrap(), 0.0);
    }

    #[test]
    fn nyquist_is_enforced() {
        let spec = BurstSpec {
            sample_rate_hz: 150e3,
            ..BurstSpec::reference()
        };
        assert!(matches!(make_tone_burst(&spec), Err(Error::Nyquist { .. })));
    }

    #[test]
    fn energy_scales_quadratically() {
        let base = norm_time(&make_tone_burst(&BurstSpec::reference()).unwrap()).powi(2);
        assert!(base > 0.0);
        let loud = BurstSpec {
            amplitude: 3.5,
            ..BurstSpec::reference()
        };
        let e = norm_time(&make_tone_burst(&loud).unwrap()).powi(2);
        assert!((e / base - 3.5 * 3.5).abs() / (3.5 * 3.5) < 1e-12);
    }

    #[test]
    fn envelope_peaks_mid_burst() {
        // analytic signal by zeroing negative frequencies
        let x = make_tone_burst(&BurstSpec::reference()).unwrap();
        let n = 4096;
        let spec = forward_transform(&x, n).unwrap();
        let mut bins: Vec<Complex64> = spec.bins().to_vec();
        for (k, b) in bins.iter_mut().enumerate() {
            if k > 0 && k < n / 2 {
                *b *= 2.0;
            } else if k > n / 2 {
                *b = Complex64::new(0.0, 0.0);
            }
        }
        let mut planner = rustfft::FftPlanner::new();
        planner.plan_fft_inverse(n).process(&mut bins);
        let (argmax, _) = bins[..x.len()]
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm()))
            .fold((0, 0.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        assert!((argmax as i64 - 50).abs() <= 1, "argmax {argmax}");
    }

    #[test]
    fn spectral_peak_near_centre_frequency() {
        let spec = BurstSpec::reference();
        let x = make_tone_burst(&spec).unwrap();
        let n = 8192;
        let s = forward_transform(&x, n).unwrap();
        let (k, _) = s.bins()[..n / 2]
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm()))
            .fold((0, 0.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        let f = k as f64 * spec.sample_rate_hz / n as f64;
        assert!((f - spec.f0_hz).abs() <= spec.f0_hz / f64::from(spec.n_cycles));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("atom.csv");
        let x = make_tone_burst(&BurstSpec::reference()).unwrap();
        write_signal_csv(&path, &x).unwrap();
        let y = load_atom(&path).unwrap();
        assert_eq!(x.samples(), y.samples());
        assert!((y.sample_rate_hz() - 2e6).abs() < 1e-3);
    }

    #[test]
    fn missing_header_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "0,1\n1e-6,2\n2e-6,3").unwrap();
        assert!(matches!(load_atom(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn uneven_time_column_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("uneven.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "time_s,value\n0,1\n1e-6,2\n2.5e-6,3\n3e-6,1").unwrap();
        assert!(matches!(
            load_atom(&path),
            Err(Error::NonUniformSpacing { .. })
        ));
    }
}
