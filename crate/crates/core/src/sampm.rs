//! Single-atom matching pursuit.
//!
//! Each greedy step picks the delay maximizing the gain
//! `G(τ) = [Re ∫ (Ψ̂ e^{-jωτ})* ŝ_res dω]² / ∫ |Ψ̂|² dω`
//! and the matching least-squares amplitude, then subtracts the scaled,
//! delayed atom from the residual in the time domain.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{fft_in_place, forward_transform, norm_time, DelayGrid, Signal, Spectrum};

/// Relative gain below which the greedy loop is considered stalled.
pub const STAGNATION_RELATIVE_GAIN: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampmTerm {
    pub tau_s: f64,
    pub alpha: f64,
}

impl SampmTerm {
    /// `α Ψ(t − τ)` over a window of `len` samples.
    pub fn waveform(&self, atom: &Signal, len: usize) -> Result<Signal> {
        let k = delay_index(self.tau_s, atom.sample_rate_hz());
        let mut out = vec![0.0; len];
        for (i, v) in atom.samples().iter().enumerate() {
            if let Some(o) = out.get_mut(k + i) {
                *o = self.alpha * v;
            }
        }
        Signal::new(out, atom.sample_rate_hz())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxTerms,
    Stagnation,
}

/// Greedy loop settings shared by both pursuits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PursuitConfig {
    pub max_terms: usize,
    /// Stop once the relative error drops to this percentage; 0 disables it.
    pub tol_pct: f64,
    /// Delay search domain, defaults to every delay where the atom fits.
    pub grid: Option<DelayGrid>,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        Self {
            max_terms: 50,
            tol_pct: 10.0,
            grid: None,
        }
    }
}

impl PursuitConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_terms == 0 {
            return Err(invalid("max_terms", "must be >= 1"));
        }
        if !(0.0..100.0).contains(&self.tol_pct) {
            return Err(invalid(
                "tol_pct",
                format!("{} not in [0, 100)", self.tol_pct),
            ));
        }
        Ok(())
    }
}

/// Summary of the atom a decomposition was computed with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomMeta {
    pub sample_rate_hz: f64,
    pub len: usize,
    pub energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl AtomMeta {
    pub fn of(atom: &Signal, source: Option<String>) -> Self {
        Self {
            sample_rate_hz: atom.sample_rate_hz(),
            len: atom.len(),
            energy: atom.energy(),
            source,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampmDecomposition {
    pub atom: Signal,
    pub terms: Vec<SampmTerm>,
    pub error_history_pct: Vec<f64>,
    pub tol_pct: f64,
    pub max_terms: usize,
    pub stop: StopReason,
    /// Residual left after the last accepted term.
    pub residual: Signal,
}

/// On-disk form of a [`SampmDecomposition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampmFile {
    pub method: String,
    pub atom_meta: AtomMeta,
    pub terms: Vec<SampmTerm>,
    pub error_history_pct: Vec<f64>,
    pub tol_pct: f64,
    pub max_terms: usize,
    pub stop: StopReason,
}

impl SampmDecomposition {
    pub fn to_file(&self, atom_source: Option<String>) -> SampmFile {
        SampmFile {
            method: "sampm".into(),
            atom_meta: AtomMeta::of(&self.atom, atom_source),
            terms: self.terms.clone(),
            error_history_pct: self.error_history_pct.clone(),
            tol_pct: self.tol_pct,
            max_terms: self.max_terms,
            stop: self.stop,
        }
    }

    pub fn final_error_pct(&self) -> Option<f64> {
        self.error_history_pct.last().copied()
    }

    /// Number of terms needed to reach `tol_pct`, if it was reached.
    pub fn terms_to(&self, tol_pct: f64) -> Option<usize> {
        terms_to(&self.error_history_pct, tol_pct)
    }

    pub fn term_waveforms(&self) -> Result<Vec<Signal>> {
        let n = self.residual.len();
        self.terms
            .iter()
            .map(|t| t.waveform(&self.atom, n))
            .collect()
    }

    /// `Σ α_i Ψ(t − τ_i)`.
    pub fn reconstruction(&self) -> Result<Signal> {
        let n = self.residual.len();
        let mut acc = vec![0.0; n];
        for w in self.term_waveforms()? {
            for (a, v) in acc.iter_mut().zip(w.samples()) {
                *a += v;
            }
        }
        Signal::new(acc, self.residual.sample_rate_hz())
    }
}

pub(crate) fn terms_to(history: &[f64], tol_pct: f64) -> Option<usize> {
    history.iter().position(|e| *e <= tol_pct).map(|i| i + 1)
}

pub(crate) fn delay_index(tau_s: f64, sample_rate_hz: f64) -> usize {
    (tau_s * sample_rate_hz).round().max(0.0) as usize
}

fn check_delay_fits(atom_spec: &Spectrum, tau_s: f64) -> Result<()> {
    let delay_samples = tau_s * atom_spec.sample_rate_hz();
    if delay_samples < 0.0
        || delay_samples.ceil() as usize + atom_spec.source_len() > atom_spec.pad_len()
    {
        return Err(Error::InsufficientPadding {
            delay_samples,
            source_len: atom_spec.source_len(),
            pad_len: atom_spec.pad_len(),
        });
    }
    Ok(())
}

fn atom_bin_energy(atom_spec: &Spectrum) -> Result<f64> {
    let den: f64 = atom_spec.bins().iter().map(|c| c.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::ZeroEnergyAtom);
    }
    Ok(den)
}

/// `Re Σ_k (Ψ̂_k e^{-jω_k τ})* ŝ_k`, the unnormalized correlation at `τ`.
fn correlation_direct(atom_spec: &Spectrum, residual_spec: &Spectrum, tau_s: f64) -> f64 {
    atom_spec
        .bins()
        .iter()
        .zip(residual_spec.bins())
        .enumerate()
        .map(|(k, (a, r))| {
            let shifted = a * Complex64::from_polar(1.0, -atom_spec.omega(k) * tau_s);
            (shifted.conj() * r).re
        })
        .sum()
}

/// Least-squares amplitude of the atom delayed by `tau_s` against the residual.
pub fn optimal_amplitude(
    atom_spec: &Spectrum,
    residual_spec: &Spectrum,
    tau_s: f64,
) -> Result<f64> {
    atom_spec.check_compatible(residual_spec)?;
    check_delay_fits(atom_spec, tau_s)?;
    let den = atom_bin_energy(atom_spec)?;
    Ok(correlation_direct(atom_spec, residual_spec, tau_s) / den)
}

/// Gain `G(τ)` evaluated bin by bin, one delay at a time.
pub fn gain_direct(atom_spec: &Spectrum, residual_spec: &Spectrum, tau_s: f64) -> Result<f64> {
    atom_spec.check_compatible(residual_spec)?;
    check_delay_fits(atom_spec, tau_s)?;
    let den = atom_bin_energy(atom_spec)?;
    let num = correlation_direct(atom_spec, residual_spec, tau_s);
    // Δt / P weights of both integrals
    let w = atom_spec.dt() / atom_spec.pad_len() as f64;
    Ok(num * num * w / den)
}

/// Correlation `c[k] = Σ_n Ψ[n] r[n + k]` for every lag via one inverse transform.
fn correlation_all(atom_spec: &Spectrum, residual_spec: &Spectrum) -> Vec<f64> {
    let mut buf: Vec<Complex64> = atom_spec
        .bins()
        .iter()
        .zip(residual_spec.bins())
        .map(|(a, r)| a.conj() * r)
        .collect();
    fft_in_place(&mut buf, true);
    buf.into_iter().map(|c| c.re).collect()
}

/// `G(τ)` at every grid delay, computed from a single fast cross-correlation.
pub fn gain_function(
    atom_spec: &Spectrum,
    residual_spec: &Spectrum,
    grid: &DelayGrid,
) -> Result<Vec<(f64, f64)>> {
    atom_spec.check_compatible(residual_spec)?;
    let den = atom_bin_energy(atom_spec)?;
    if grid.is_empty() {
        return Err(Error::Precondition("delay grid is empty".into()));
    }
    let hi = *grid.index_range().end();
    check_delay_fits(atom_spec, hi as f64 / atom_spec.sample_rate_hz())?;
    let corr = correlation_all(atom_spec, residual_spec);
    // c[k] equals Σ_k-bins / P, G = (c Δt)² / (den Δt / P)
    let p = atom_spec.pad_len() as f64;
    let dt = atom_spec.dt();
    Ok(grid
        .index_range()
        .map(|k| {
            let c = corr[k];
            (k as f64 * grid.step_s, c * c * dt * p / den)
        })
        .collect())
}

/// Precomputed atom spectrum and delay domain for repeated greedy steps.
pub(crate) struct DelaySearch {
    pub atom: Signal,
    pub atom_spec: Spectrum,
    pub grid: DelayGrid,
    pub pad_len: usize,
}

impl DelaySearch {
    pub fn new(atom: &Signal, signal_len: usize, grid: Option<DelayGrid>) -> Result<Self> {
        let support = atom.support_len();
        if support == 0 {
            return Err(Error::ZeroEnergyAtom);
        }
        let atom = atom.resized(support)?;
        let grid = match grid {
            Some(g) => g,
            None => DelayGrid::full(signal_len, support, atom.sample_rate_hz())?,
        };
        crate::signal::check_rates(grid.step_s, 1.0 / atom.sample_rate_hz())
            .map_err(|_| invalid("grid.step_s", "must equal the sampling step"))?;
        grid.check_fits(signal_len, support)?;
        let pad_len = (2 * signal_len.max(support)).next_power_of_two();
        let atom_spec = forward_transform(&atom, pad_len)?;
        Ok(Self {
            atom,
            atom_spec,
            grid,
            pad_len,
        })
    }

    /// Best grid delay index and its gain; ties resolve to the smallest delay.
    pub fn best(&self, residual: &Signal) -> Result<(usize, f64, Spectrum)> {
        let spec = forward_transform(residual, self.pad_len)?;
        let gains = gain_function(&self.atom_spec, &spec, &self.grid)?;
        let first = *self.grid.index_range().start();
        let mut best = (first, f64::NEG_INFINITY);
        for (i, (_, g)) in gains.iter().enumerate() {
            if *g > best.1 {
                best = (first + i, *g);
            }
        }
        Ok((best.0, best.1, spec))
    }
}

/// One greedy step: the grid delay maximizing the gain and its optimal amplitude.
pub fn sampm_step(residual: &Signal, atom: &Signal, grid: &DelayGrid) -> Result<SampmTerm> {
    residual.check_rate(atom)?;
    let search = DelaySearch::new(atom, residual.len(), Some(*grid))?;
    let (k, _, spec) = search.best(residual)?;
    let tau_s = k as f64 / residual.sample_rate_hz();
    let alpha = optimal_amplitude(&search.atom_spec, &spec, tau_s)?;
    Ok(SampmTerm { tau_s, alpha })
}

/// Greedy decomposition `s ≈ Σ α_i Ψ(t − τ_i)`.
pub fn sampm_decompose(
    s: &Signal,
    atom: &Signal,
    config: &PursuitConfig,
) -> Result<SampmDecomposition> {
    config.validate()?;
    s.check_rate(atom)?;
    let s_norm = norm_time(s);
    if s_norm == 0.0 {
        return Err(Error::ZeroEnergySignal);
    }
    let search = DelaySearch::new(atom, s.len(), config.grid)?;
    let fs = s.sample_rate_hz();
    let mut residual = s.clone().into_samples();
    let mut terms = Vec::new();
    let mut history = Vec::new();
    let mut stop = StopReason::MaxTerms;
    let mut energy = s_norm * s_norm;

    while terms.len() < config.max_terms {
        let current = Signal::new(residual.clone(), fs)?;
        let (k, gain, spec) = search.best(&current)?;
        if !(gain > STAGNATION_RELATIVE_GAIN * energy) {
            stop = StopReason::Stagnation;
            break;
        }
        let tau_s = k as f64 / fs;
        let alpha = optimal_amplitude(&search.atom_spec, &spec, tau_s)?;
        for (r, a) in residual[k..].iter_mut().zip(search.atom.samples()) {
            *r -= alpha * a;
        }
        terms.push(SampmTerm { tau_s, alpha });
        let r_sig = Signal::new(residual.clone(), fs)?;
        let r_norm = norm_time(&r_sig);
        energy = r_norm * r_norm;
        let xi = 100.0 * r_norm / s_norm;
        history.push(xi);
        if xi <= config.tol_pct {
            stop = StopReason::Tolerance;
            break;
        }
    }

    Ok(SampmDecomposition {
        atom: search.atom,
        terms,
        error_history_pct: history,
        tol_pct: config.tol_pct,
        max_terms: config.max_terms,
        stop,
        residual: Signal::new(residual, fs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::{make_tone_burst, BurstSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn burst() -> Signal {
        make_tone_burst(&BurstSpec::reference()).unwrap()
    }

    fn place(atom: &Signal, n: usize, echoes: &[(usize, f64)]) -> Signal {
        let mut v = vec![0.0; n];
        for &(k, a) in echoes {
            for (i, x) in atom.samples().iter().enumerate() {
                v[k + i] += a * x;
            }
        }
        Signal::new(v, atom.sample_rate_hz()).unwrap()
    }

    fn spectra(atom: &Signal, r: &Signal, pad: usize) -> (Spectrum, Spectrum) {
        (
            forward_transform(atom, pad).unwrap(),
            forward_transform(r, pad).unwrap(),
        )
    }

    #[test]
    fn amplitude_of_exact_echo() {
        let atom = burst();
        let r = place(&atom, 512, &[(40, 3.0)]);
        let (a, s) = spectra(&atom, &r, 1024);
        let alpha = optimal_amplitude(&a, &s, 40.0 / 2e6).unwrap();
        assert!((alpha - 3.0).abs() < 1e-10);
    }

    #[test]
    fn amplitude_vanishes_on_disjoint_support() {
        let atom = burst();
        let r = place(&atom, 512, &[(300, 1.0)]);
        let (a, s) = spectra(&atom, &r, 1024);
        let alpha = optimal_amplitude(&a, &s, 10.0 / 2e6).unwrap();
        assert!(alpha.abs() < 1e-10);
    }

    #[test]
    fn amplitude_matches_time_domain_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let atom = burst();
        for _ in 0..10 {
            let r =
                Signal::new((0..400).map(|_| rng.random_range(-1.0..1.0)).collect(), 2e6).unwrap();
            let k = rng.random_range(0..300);
            let (a, s) = spectra(&atom, &r, 1024);
            let alpha = optimal_amplitude(&a, &s, k as f64 / 2e6).unwrap();
            let num: f64 = atom
                .samples()
                .iter()
                .enumerate()
                .map(|(i, p)| p * r.samples()[k + i])
                .sum();
            let den: f64 = atom.samples().iter().map(|p| p * p).sum();
            let oracle = num / den;
            assert!((alpha - oracle).abs() <= 1e-8 * oracle.abs().max(1e-3));
        }
    }

    #[test]
    fn zero_atom_is_rejected() {
        let z = Signal::zeros(8, 1.0).unwrap();
        let (a, s) = spectra(&z, &z, 16);
        assert!(matches!(
            optimal_amplitude(&a, &s, 0.0),
            Err(Error::ZeroEnergyAtom)
        ));
        assert!(matches!(
            gain_direct(&a, &s, 0.0),
            Err(Error::ZeroEnergyAtom)
        ));
    }

    #[test]
    fn fast_gain_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let atom = burst();
        let r = Signal::new((0..300).map(|_| rng.random_range(-1.0..1.0)).collect(), 2e6).unwrap();
        let (a, s) = spectra(&atom, &r, 1024);
        let grid = DelayGrid::full(300, 101, 2e6).unwrap();
        let fast = gain_function(&a, &s, &grid).unwrap();
        let scale = fast.iter().map(|g| g.1).fold(0.0, f64::max);
        for (tau, g) in fast {
            let d = gain_direct(&a, &s, tau).unwrap();
            assert!((g - d).abs() <= 1e-9 * scale, "tau {tau}: {g} vs {d}");
        }
    }

    #[test]
    fn gain_peaks_at_echo_regardless_of_sign() {
        let atom = burst();
        let grid = DelayGrid::full(512, 101, 2e6).unwrap();
        for sign in [1.0, -1.0] {
            let r = place(&atom, 512, &[(77, sign)]);
            let term = sampm_step(&r, &atom, &grid).unwrap();
            assert!((term.tau_s - 77.0 / 2e6).abs() < 1e-15);
            assert!((term.alpha - sign).abs() < 1e-10);
        }
    }

    #[test]
    fn stronger_echo_wins() {
        let atom = burst();
        let r = place(&atom, 600, &[(30, 1.0), (300, 2.0)]);
        let (a, s) = spectra(&atom, &r, 2048);
        let grid = DelayGrid::full(600, 101, 2e6).unwrap();
        // brute force over the grid with the direct formula
        let best = grid
            .delays()
            .map(|t| (t, gain_direct(&a, &s, t).unwrap()))
            .fold(
                (0.0, f64::NEG_INFINITY),
                |acc, v| if v.1 > acc.1 { v } else { acc },
            );
        assert!((best.0 - 300.0 / 2e6).abs() < 1e-15);
        let term = sampm_step(&r, &atom, &grid).unwrap();
        assert_eq!(term.tau_s, best.0);
    }

    #[test]
    fn step_on_scaled_echo() {
        let atom = burst();
        let r = place(&atom, 256, &[(10, 2.0)]);
        let grid = DelayGrid::full(256, 101, 2e6).unwrap();
        let t = sampm_step(&r, &atom, &grid).unwrap();
        assert!((t.tau_s - 10.0 / 2e6).abs() < 1e-15);
        assert!((t.alpha - 2.0).abs() < 1e-10);
    }

    #[test]
    fn step_on_zero_residual_is_a_no_op() {
        let atom = burst();
        let r = Signal::zeros(256, 2e6).unwrap();
        let grid = DelayGrid::full(256, 101, 2e6).unwrap();
        let t = sampm_step(&r, &atom, &grid).unwrap();
        assert_eq!(t.alpha, 0.0);
        assert_eq!(t.tau_s, 0.0);
    }

    #[test]
    fn recovers_three_disjoint_echoes() {
        let atom = burst();
        let truth = [(20, 1.5), (250, -0.7), (600, 0.3)];
        let s = place(&atom, 1024, &truth);
        let cfg = PursuitConfig {
            max_terms: 10,
            tol_pct: 0.1,
            grid: None,
        };
        let d = sampm_decompose(&s, &atom, &cfg).unwrap();
        assert_eq!(d.terms.len(), 3);
        let mut got: Vec<_> = d.terms.iter().map(|t| (t.tau_s, t.alpha)).collect();
        got.sort_by(|a, b| a.0.total_cmp(&b.0));
        for ((k, a), (tau, alpha)) in truth.iter().zip(got) {
            assert_eq!(tau, *k as f64 / 2e6);
            assert!((alpha - a).abs() < 1e-10);
        }
        assert!(d.final_error_pct().unwrap() < 1e-6);
        assert_eq!(d.stop, StopReason::Tolerance);
    }

    #[test]
    fn atom_itself_needs_one_term() {
        let atom = burst();
        let s = atom.resized(400).unwrap();
        let d = sampm_decompose(&s, &atom, &PursuitConfig::default()).unwrap();
        assert_eq!(d.terms.len(), 1);
        assert_eq!(d.terms[0].tau_s, 0.0);
        assert!((d.terms[0].alpha - 1.0).abs() < 1e-12);
        assert!(d.error_history_pct[0] < 1e-10);
    }

    #[test]
    fn zero_signal_and_bad_config_fail() {
        let atom = burst();
        let z = Signal::zeros(300, 2e6).unwrap();
        assert!(matches!(
            sampm_decompose(&z, &atom, &PursuitConfig::default()),
            Err(Error::ZeroEnergySignal)
        ));
        let s = atom.resized(300).unwrap();
        let bad = PursuitConfig {
            max_terms: 0,
            ..PursuitConfig::default()
        };
        assert!(sampm_decompose(&s, &atom, &bad).is_err());
        let other_rate = Signal::new(s.samples().to_vec(), 1e6).unwrap();
        assert!(matches!(
            sampm_decompose(&other_rate, &atom, &PursuitConfig::default()),
            Err(Error::SampleRateMismatch { .. })
        ));
    }

    #[test]
    fn grid_past_window_is_rejected() {
        let atom = burst();
        let s = atom.resized(300).unwrap();
        let grid = DelayGrid::new(0.0, 250.0 / 2e6, 1.0 / 2e6).unwrap();
        assert!(matches!(
            sampm_step(&s, &atom, &grid),
            Err(Error::DelayOutOfWindow { .. })
        ));
    }
}
