//! Sampled signals, their spectra, and the delay operator.
//!
//! Continuous integrals are realized as Riemann sums: the time norm carries a
//! `Δt` weight and the frequency norm the matching `Δt / P` weight (P = padded
//! transform length), so that the discrete Parseval identity
//! `norm_time(x) == norm_freq(forward_transform(x, len(x)))` holds to round-off.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(buf.len())
        } else {
            p.plan_fft_forward(buf.len())
        }
    });
    plan.process(buf);
    if inverse {
        let scale = 1.0 / buf.len() as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

/// Uniformly sampled real time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSignal("no samples".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal(format!("sample {i} is not finite")));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(invalid(
                "sample_rate_hz",
                format!("{sample_rate_hz} is not > 0"),
            ));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate_hz)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Sampling step `Δt = 1 / fs`.
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 * self.dt()
    }

    /// Number of samples up to and including the last nonzero one.
    pub fn support_len(&self) -> usize {
        self.samples
            .iter()
            .rposition(|v| *v != 0.0)
            .map_or(0, |i| i + 1)
    }

    /// Truncates or zero-extends to `len` samples.
    pub fn resized(&self, len: usize) -> Result<Self> {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Self::new(samples, self.sample_rate_hz)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|v| v * factor).collect(),
            self.sample_rate_hz,
        )
    }

    /// Energy `Σ x² Δt`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() * self.dt()
    }

    pub(crate) fn check_rate(&self, other: &Signal) -> Result<()> {
        check_rates(self.sample_rate_hz, other.sample_rate_hz)
    }

    /// Element-wise difference, both signals must share length and rate.
    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        self.check_rate(other)?;
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Signal::new(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a - b)
                .collect(),
            self.sample_rate_hz,
        )
    }

    /// Element-wise sum, both signals must share length and rate.
    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.sub(&other.scaled(-1.0)?)
    }
}

pub(crate) fn check_rates(left: f64, right: f64) -> Result<()> {
    if (left - right).abs() > 1e-9 * left.abs().max(right.abs()) {
        return Err(Error::SampleRateMismatch { left, right });
    }
    Ok(())
}

/// Complex spectrum of a zero-padded [`Signal`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    bins: Vec<Complex64>,
    source_len: usize,
    sample_rate_hz: f64,
}

impl Spectrum {
    pub fn new(bins: Vec<Complex64>, source_len: usize, sample_rate_hz: f64) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::InvalidSignal("spectrum has no bins".into()));
        }
        if source_len == 0 || source_len > bins.len() {
            return Err(invalid(
                "source_len",
                format!("{source_len} not in 1..={}", bins.len()),
            ));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(invalid(
                "sample_rate_hz",
                format!("{sample_rate_hz} is not > 0"),
            ));
        }
        Ok(Self {
            bins,
            source_len,
            sample_rate_hz,
        })
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn pad_len(&self) -> usize {
        self.bins.len()
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    /// Signed angular frequency of bin `k` (negative frequencies in the upper half).
    pub fn omega(&self, k: usize) -> f64 {
        bin_omega(k, self.pad_len(), self.sample_rate_hz)
    }

    /// Ratio of imaginary to real energy after an inverse transform.
    pub fn imaginary_residue(&self) -> f64 {
        let mut buf = self.bins.clone();
        fft_in_place(&mut buf, true);
        let re: f64 = buf.iter().map(|c| c.re * c.re).sum();
        let im: f64 = buf.iter().map(|c| c.im * c.im).sum();
        if re == 0.0 {
            if im == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (im / re).sqrt()
        }
    }

    pub(crate) fn check_compatible(&self, other: &Spectrum) -> Result<()> {
        check_rates(self.sample_rate_hz, other.sample_rate_hz)?;
        if self.pad_len() != other.pad_len() {
            return Err(Error::DimensionMismatch {
                expected: self.pad_len(),
                got: other.pad_len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn bin_omega(k: usize, pad_len: usize, sample_rate_hz: f64) -> f64 {
    let signed = if 2 * k < pad_len {
        k as f64
    } else {
        k as f64 - pad_len as f64
    };
    2.0 * PI * signed * sample_rate_hz / pad_len as f64
}

/// DFT of `x` zero-padded to `pad_len` samples.
pub fn forward_transform(x: &Signal, pad_len: usize) -> Result<Spectrum> {
    if pad_len < x.len() {
        return Err(Error::Precondition(format!(
            "pad length {pad_len} shorter than signal length {}",
            x.len()
        )));
    }
    let mut buf: Vec<Complex64> = x.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(pad_len, Complex64::new(0.0, 0.0));
    fft_in_place(&mut buf, false);
    Spectrum::new(buf, x.len(), x.sample_rate_hz)
}

/// Inverse DFT over the full padded length; the real part is returned.
pub fn inverse_transform(spec: &Spectrum) -> Result<Signal> {
    let mut buf = spec.bins.clone();
    fft_in_place(&mut buf, true);
    Signal::new(buf.into_iter().map(|c| c.re).collect(), spec.sample_rate_hz)
}

/// `sqrt(Σ x² Δt)`.
pub fn norm_time(x: &Signal) -> f64 {
    x.energy().sqrt()
}

/// `sqrt(Σ |X_k|² Δt / P)`, the discrete Parseval counterpart of [`norm_time`].
pub fn norm_freq(spec: &Spectrum) -> f64 {
    let sum: f64 = spec.bins.iter().map(|c| c.norm_sqr()).sum();
    (sum * spec.dt() / spec.pad_len() as f64).sqrt()
}

/// Multiplies every bin by `exp(-j ω_k τ)`.
///
/// The shifted content must stay inside the padded length, otherwise it would
/// wrap around into the observation window.
pub fn apply_delay(spec: &Spectrum, tau_s: f64) -> Result<Spectrum> {
    if !tau_s.is_finite() {
        return Err(invalid("tau_s", "not finite"));
    }
    let delay_samples = tau_s * spec.sample_rate_hz;
    let extent = delay_samples.abs().ceil() as usize;
    if extent + spec.source_len > spec.pad_len() {
        return Err(Error::InsufficientPadding {
            delay_samples,
            source_len: spec.source_len,
            pad_len: spec.pad_len(),
        });
    }
    let bins = spec
        .bins
        .iter()
        .enumerate()
        .map(|(k, b)| b * Complex64::from_polar(1.0, -spec.omega(k) * tau_s))
        .collect();
    let source_len = if tau_s > 0.0 {
        spec.source_len + extent
    } else {
        spec.source_len
    };
    Spectrum::new(bins, source_len, spec.sample_rate_hz)
}

/// Discrete search domain for delays, restricted to integer multiples of `step_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayGrid {
    pub min_delay_s: f64,
    pub max_delay_s: f64,
    pub step_s: f64,
}

impl DelayGrid {
    pub fn new(min_delay_s: f64, max_delay_s: f64, step_s: f64) -> Result<Self> {
        if !(step_s.is_finite() && step_s > 0.0) {
            return Err(invalid("step_s", format!("{step_s} is not > 0")));
        }
        if !(min_delay_s >= 0.0 && min_delay_s <= max_delay_s && max_delay_s.is_finite()) {
            return Err(invalid(
                "delay bounds",
                format!("need 0 <= {min_delay_s} <= {max_delay_s}"),
            ));
        }
        Ok(Self {
            min_delay_s,
            max_delay_s,
            step_s,
        })
    }

    /// Every delay at which an atom of `atom_len` samples fits entirely inside
    /// a window of `signal_len` samples.
    pub fn full(signal_len: usize, atom_len: usize, sample_rate_hz: f64) -> Result<Self> {
        if atom_len == 0 || atom_len > signal_len {
            return Err(Error::Precondition(format!(
                "atom support of {atom_len} samples does not fit in {signal_len} samples"
            )));
        }
        let step = 1.0 / sample_rate_hz;
        Self::new(0.0, (signal_len - atom_len) as f64 * step, step)
    }

    /// Inclusive range of sample indices covered by the grid.
    pub fn index_range(&self) -> std::ops::RangeInclusive<usize> {
        let lo = (self.min_delay_s / self.step_s - 1e-9).ceil().max(0.0) as usize;
        let hi = (self.max_delay_s / self.step_s + 1e-9).floor() as usize;
        lo..=hi
    }

    pub fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        self.index_range().map(move |i| i as f64 * self.step_s)
    }

    pub fn len(&self) -> usize {
        let r = self.index_range();
        if r.start() > r.end() {
            0
        } else {
            r.end() - r.start() + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks that an atom of `atom_len` samples fits inside `signal_len`
    /// samples at every grid delay.
    pub(crate) fn check_fits(&self, signal_len: usize, atom_len: usize) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Precondition("delay grid is empty".into()));
        }
        let hi = *self.index_range().end();
        if hi + atom_len > signal_len {
            return Err(Error::DelayOutOfWindow {
                tau_s: hi as f64 * self.step_s,
                window_s: signal_len as f64 * self.step_s,
            });
        }
        Ok(())
    }
}

/// Reads a two-column `time_s,value` CSV; the sample rate is inferred from the
/// time column, whose spacing must be uniform to 1e-9 relative.
pub fn read_signal_csv(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    let fmt = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| fmt(e.to_string()))?;
    let headers = reader.headers().map_err(|e| fmt(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "time_s" || &headers[1] != "value" {
        return Err(fmt(format!(
            "expected header `time_s,value`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fmt(e.to_string()))?;
        let parse = |i: usize| -> Result<f64> {
            record
                .get(i)
                .ok_or_else(|| fmt(format!("row {}: missing column {i}", row + 1)))?
                .parse::<f64>()
                .map_err(|e| fmt(format!("row {}: {e}", row + 1)))
        };
        times.push(parse(0)?);
        values.push(parse(1)?);
    }
    if times.len() < 2 {
        return Err(fmt("need at least two rows to infer the sample rate".into()));
    }
    let n = times.len();
    let step = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(step > 0.0) {
        return Err(fmt("time column must be increasing".into()));
    }
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > 1e-9 * step {
            return Err(Error::NonUniformSpacing {
                path: path.to_path_buf(),
                row: i + 2,
            });
        }
    }
    Signal::new(values, 1.0 / step)
}

/// Writes a signal as `time_s,value` rows.
pub fn write_signal_csv(path: impl AsRef<Path>, x: &Signal) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let io = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    w.write_record(["time_s", "value"]).map_err(io)?;
    let dt = x.dt();
    for (i, v) in x.samples().iter().enumerate() {
        w.write_record([(i as f64 * dt).to_string(), v.to_string()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(rng: &mut ChaCha8Rng, n: usize, fs: f64) -> Signal {
        Signal::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), fs).unwrap()
    }

    fn direct_dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                        Complex64::from_polar(v, ang)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn constant_signal_is_dc_only() {
        let x = Signal::new(vec![1.0; 4], 1.0).unwrap();
        let s = forward_transform(&x, 4).unwrap();
        assert!((s.bins()[0] - Complex64::new(4.0, 0.0)).norm() < 1e-14);
        for b in &s.bins()[1..] {
            assert!(b.norm() < 1e-14);
        }
        let back = inverse_transform(&s).unwrap();
        for v in back.samples() {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_signal_round_trips_to_zero() {
        let x = Signal::zeros(16, 10.0).unwrap();
        let s = forward_transform(&x, 32).unwrap();
        assert!(s.bins().iter().all(|b| b.norm() == 0.0));
        assert_eq!(norm_freq(&s), 0.0);
        let back = inverse_transform(&s).unwrap();
        assert!(back.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn matches_direct_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_signal(&mut rng, 64, 1.0);
        let fast = forward_transform(&x, 64).unwrap();
        let slow = direct_dft(x.samples());
        let scale = slow.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in fast.bins().iter().zip(&slow) {
            assert!((a - b).norm() / scale < 1e-10);
        }
    }

    #[test]
    fn short_pad_is_rejected() {
        let x = Signal::zeros(8, 1.0).unwrap();
        assert!(matches!(
            forward_transform(&x, 4),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn unit_impulse_norms() {
        let mut v = vec![0.0; 9];
        v[4] = 1.0;
        let x = Signal::new(v, 1.0).unwrap();
        assert!((norm_time(&x) - 1.0).abs() < 1e-15);
        let s = forward_transform(&x, 9).unwrap();
        assert!((norm_freq(&s) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn parseval_over_random_signals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(1..300);
            let x = random_signal(&mut rng, n, 2e6);
            let t = norm_time(&x);
            let f = norm_freq(&forward_transform(&x, n).unwrap());
            assert!((t - f).abs() / t < 1e-10, "{t} vs {f}");
        }
    }

    #[test]
    fn zero_delay_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_signal(&mut rng, 32, 4.0);
        let s = forward_transform(&x, 64).unwrap();
        let d = apply_delay(&s, 0.0).unwrap();
        assert_eq!(s.bins(), d.bins());
    }

    #[test]
    fn integer_delay_shifts_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fs = 1e3;
        let x = random_signal(&mut rng, 40, fs);
        let s = forward_transform(&x, 128).unwrap();
        let shifted = inverse_transform(&apply_delay(&s, 13.0 / fs).unwrap()).unwrap();
        let y = shifted.samples();
        for v in &y[..13] {
            assert!(v.abs() < 1e-12);
        }
        for (i, v) in x.samples().iter().enumerate() {
            assert!((y[i + 13] - v).abs() < 1e-12);
        }
        for v in &y[53..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn delay_composition_returns_original() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fs = 1.0;
        let x = random_signal(&mut rng, 50, fs);
        let s = forward_transform(&x, 128).unwrap();
        let there = apply_delay(&s, 17.3).unwrap();
        let back = apply_delay(&there, -17.3).unwrap();
        let scale = s.bins().iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in s.bins().iter().zip(back.bins()) {
            assert!((a - b).norm() / scale < 1e-12);
        }
    }

    #[test]
    fn delay_beyond_padding_fails() {
        let x = Signal::new(vec![1.0; 10], 1.0).unwrap();
        let s = forward_transform(&x, 16).unwrap();
        assert!(matches!(
            apply_delay(&s, 7.0),
            Err(Error::InsufficientPadding { .. })
        ));
        assert!(apply_delay(&s, 6.0).is_ok());
    }

    #[test]
    fn grid_indices() {
        let g = DelayGrid::full(100, 21, 10.0).unwrap();
        assert_eq!(g.index_range(), 0..=79);
        assert_eq!(g.len(), 80);
        let g = DelayGrid::new(0.25, 0.5, 0.1).unwrap();
        assert_eq!(g.index_range(), 3..=5);
        assert!(DelayGrid::new(0.5, 0.25, 0.1).is_err());
        assert!(DelayGrid::new(-1.0, 0.25, 0.1).is_err());
    }

    #[test]
    fn rejects_bad_signals() {
        assert!(Signal::new(vec![], 1.0).is_err());
        assert!(Signal::new(vec![f64::NAN], 1.0).is_err());
        assert!(Signal::new(vec![1.0], 0.0).is_err());
    }
}
