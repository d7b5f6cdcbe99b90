//! Analytic S0/A0 Lamb-wave model of an isotropic plate and frequency-domain propagation.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{fft_in_place, Signal, Spectrum};

/// Which form of the A0 wavenumber to evaluate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum A0Form {
    /// Flexural (Mindlin plate) branch, with `ρh / (π² f² I Q)` under the inner root.
    #[default]
    Mindlin,
    /// Inner term `(ρ + ρ/(IQ)) / (π f²)`. Dimensionally inconsistent and gives
    /// A0 speeds near 100 m/s for a 2 mm aluminium-like plate.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateModel {
    pub e_pa: f64,
    pub nu: f64,
    pub rho: f64,
    pub h_m: f64,
    #[serde(default)]
    pub a0_form: A0Form,
}

impl PlateModel {
    pub fn new(e_pa: f64, nu: f64, rho: f64, h_m: f64) -> Result<Self> {
        let p = Self {
            e_pa,
            nu,
            rho,
            h_m,
            a0_form: A0Form::default(),
        };
        p.validate()?;
        Ok(p)
    }

    /// E = 70 GPa, ν = 0.3, ρ = 1500 kg/m³, h = 2 mm.
    pub fn reference() -> Self {
        Self {
            e_pa: 70e9,
            nu: 0.3,
            rho: 1500.0,
            h_m: 2e-3,
            a0_form: A0Form::Mindlin,
        }
    }

    pub fn with_a0_form(mut self, form: A0Form) -> Self {
        self.a0_form = form;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_pa.is_finite() && self.e_pa > 0.0) {
            return Err(invalid("e_pa", format!("{} is not > 0", self.e_pa)));
        }
        if !(self.nu > 0.0 && self.nu < 0.5) {
            return Err(invalid("nu", format!("{} not in (0, 0.5)", self.nu)));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(invalid("rho", format!("{} is not > 0", self.rho)));
        }
        if !(self.h_m.is_finite() && self.h_m > 0.0) {
            return Err(invalid("h_m", format!("{} is not > 0", self.h_m)));
        }
        Ok(())
    }

    /// Shear modulus `E / (2(1 + ν))`.
    pub fn g(&self) -> f64 {
        self.e_pa / (2.0 * (1.0 + self.nu))
    }

    /// Plate modulus `E / (1 − ν²)`.
    pub fn q(&self) -> f64 {
        self.e_pa / (1.0 - self.nu * self.nu)
    }

    /// Shear correction factor `π² / 12`.
    pub fn xi(&self) -> f64 {
        PI * PI / 12.0
    }

    /// `h³ / 12`.
    pub fn i(&self) -> f64 {
        self.h_m.powi(3) / 12.0
    }

    /// Low-frequency S0 speed `sqrt(Q / ρ)`.
    pub fn s0_speed(&self) -> f64 {
        (self.q() / self.rho).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    S0,
    A0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSet {
    pub s0: bool,
    pub a0: bool,
}

impl ModeSet {
    pub fn new(s0: bool, a0: bool) -> Result<Self> {
        if !(s0 || a0) {
            return Err(invalid("modes", "at least one mode must be enabled"));
        }
        Ok(Self { s0, a0 })
    }

    pub fn both() -> Self {
        Self { s0: true, a0: true }
    }

    pub fn only(mode: Mode) -> Self {
        match mode {
            Mode::S0 => Self {
                s0: true,
                a0: false,
            },
            Mode::A0 => Self {
                s0: false,
                a0: true,
            },
        }
    }

    /// Parses a comma separated list such as `s0,a0`.
    pub fn parse(list: &str) -> Result<Self> {
        let (mut s0, mut a0) = (false, false);
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.to_ascii_lowercase().as_str() {
                "s0" => s0 = true,
                "a0" => a0 = true,
                other => return Err(invalid("modes", format!("unknown mode `{other}`"))),
            }
        }
        Self::new(s0, a0)
    }

    pub fn modes(&self) -> Vec<Mode> {
        let mut v = Vec::with_capacity(2);
        if self.s0 {
            v.push(Mode::S0);
        }
        if self.a0 {
            v.push(Mode::A0);
        }
        v
    }

    pub fn count(&self) -> usize {
        usize::from(self.s0) + usize::from(self.a0)
    }
}

/// `2πf sqrt(ρ/Q)`.
pub fn k_s0(f_hz: f64, plate: &PlateModel) -> f64 {
    2.0 * PI * f_hz * (plate.rho / plate.q()).sqrt()
}

pub fn k_a0(f_hz: f64, plate: &PlateModel) -> Result<f64> {
    if !(f_hz > 0.0 && f_hz.is_finite()) {
        return Err(Error::Domain { f_hz });
    }
    let a = plate.rho / plate.q();
    let b = plate.rho / (plate.g() * plate.xi());
    let extra = match plate.a0_form {
        A0Form::Mindlin => plate.rho * plate.h_m / (PI * PI * f_hz * f_hz * plate.i() * plate.q()),
        A0Form::AsPrinted => (plate.rho + plate.rho / (plate.i() * plate.q())) / (PI * f_hz * f_hz),
    };
    let inner = (a - b).powi(2) + extra;
    if !(inner >= 0.0) {
        return Err(Error::Domain { f_hz });
    }
    let outer = a + b + inner.sqrt();
    if !(outer >= 0.0) {
        return Err(Error::Domain { f_hz });
    }
    Ok(2.0 * PI * f_hz / SQRT_2 * outer.sqrt())
}

pub fn wavenumber(f_hz: f64, plate: &PlateModel, mode: Mode) -> Result<f64> {
    match mode {
        Mode::S0 => Ok(k_s0(f_hz, plate)),
        Mode::A0 => k_a0(f_hz, plate),
    }
}

/// Relative frequency step of the central difference behind the group velocity.
pub const GROUP_VELOCITY_STEP: f64 = 1e-4;

/// Phase and group velocity in m/s.
pub fn velocities(f_hz: f64, plate: &PlateModel, mode: Mode) -> Result<(f64, f64)> {
    velocities_with_step(f_hz, plate, mode, GROUP_VELOCITY_STEP)
}

pub fn velocities_with_step(
    f_hz: f64,
    plate: &PlateModel,
    mode: Mode,
    rel_step: f64,
) -> Result<(f64, f64)> {
    let k = wavenumber(f_hz, plate, mode)?;
    let df = rel_step * f_hz;
    let dk = wavenumber(f_hz + df, plate, mode)? - wavenumber(f_hz - df, plate, mode)?;
    Ok((2.0 * PI * f_hz / k, 2.0 * PI * 2.0 * df / dk))
}

/// One row of the dispersion-curve table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    pub f_hz: f64,
    pub k_s0: f64,
    pub k_a0: f64,
    pub cp_s0: f64,
    pub cp_a0: f64,
    pub cg_s0: f64,
    pub cg_a0: f64,
}

pub fn dispersion_curves(plate: &PlateModel, freqs_hz: &[f64]) -> Result<Vec<DispersionPoint>> {
    freqs_hz
        .iter()
        .map(|&f| {
            let (cp_s0, cg_s0) = velocities(f, plate, Mode::S0)?;
            let (cp_a0, cg_a0) = velocities(f, plate, Mode::A0)?;
            Ok(DispersionPoint {
                f_hz: f,
                k_s0: k_s0(f, plate),
                k_a0: k_a0(f, plate)?,
                cp_s0,
                cp_a0,
                cg_s0,
                cg_a0,
            })
        })
        .collect()
}

pub fn write_dispersion_csv(path: impl AsRef<Path>, points: &[DispersionPoint]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    for p in points {
        w.serialize(p).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Bins holding at least this fraction of the peak magnitude count as signal content.
const SIGNIFICANT_BIN: f64 = 1e-2;

/// Window length needed for the slowest significant component of `x` to arrive within it.
pub fn required_len(x: &Signal, d_m: f64, plate: &PlateModel, modes: ModeSet) -> Result<usize> {
    let n = x.len();
    let mut bins: Vec<Complex64> = x
        .samples()
        .iter()
        .map(|v| Complex64::new(*v, 0.0))
        .collect();
    fft_in_place(&mut bins, false);
    let half = n / 2;
    let peak = bins[1..=half].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut slowest = f64::INFINITY;
    if peak > 0.0 {
        for (k, b) in bins.iter().enumerate().take(half + 1).skip(1) {
            if b.norm() < SIGNIFICANT_BIN * peak {
                continue;
            }
            let f = k as f64 * x.sample_rate_hz() / n as f64;
            for mode in modes.modes() {
                let (_, cg) = velocities(f, plate, mode)?;
                slowest = slowest.min(cg);
            }
        }
    }
    let travel = if slowest.is_finite() {
        d_m / slowest
    } else {
        0.0
    };
    Ok(((travel + x.support_len() as f64 * x.dt()) * x.sample_rate_hz()).ceil() as usize)
}

/// Spectrum of `x` after travelling `d_m`, on the circular grid of `len(x)` bins.
///
/// Each enabled mode carries the full input amplitude. Negative frequencies get
/// the conjugate phase, the Nyquist bin the real part of it, and the DC bin passes
/// once per mode.
pub fn propagated_spectrum(
    x: &Signal,
    d_m: f64,
    plate: &PlateModel,
    modes: ModeSet,
) -> Result<Spectrum> {
    plate.validate()?;
    if !(d_m >= 0.0 && d_m.is_finite()) {
        return Err(invalid("d_m", format!("{d_m} is not >= 0")));
    }
    if modes.count() == 0 {
        return Err(invalid("modes", "at least one mode must be enabled"));
    }
    let n = x.len();
    let fs = x.sample_rate_hz();
    let mut bins: Vec<Complex64> = x
        .samples()
        .iter()
        .map(|v| Complex64::new(*v, 0.0))
        .collect();
    fft_in_place(&mut bins, false);
    bins[0] *= modes.count() as f64;
    for k in 1..=n / 2 {
        let f = k as f64 * fs / n as f64;
        let mut phase = Complex64::new(0.0, 0.0);
        for mode in modes.modes() {
            phase += Complex64::from_polar(1.0, -wavenumber(f, plate, mode)? * d_m);
        }
        if 2 * k == n {
            bins[k] *= phase.re;
        } else {
            bins[k] *= phase;
            bins[n - k] *= phase.conj();
        }
    }
    Spectrum::new(bins, n, fs)
}

/// Propagation on the circular grid of `len(x)` without an arrival check.
pub fn propagate_circular(
    x: &Signal,
    d_m: f64,
    plate: &PlateModel,
    modes: ModeSet,
) -> Result<Signal> {
    let spec = propagated_spectrum(x, d_m, plate, modes)?;
    let mut bins = spec.bins().to_vec();
    fft_in_place(&mut bins, true);
    Signal::new(bins.into_iter().map(|c| c.re).collect(), x.sample_rate_hz())
}

/// Signal received at distance `d_m` from a source emitting `x`.
///
/// `x` should already be zero-padded to the output window; fails with
/// [`Error::WindowTooShort`] when the slowest packet would wrap around.
pub fn propagate(x: &Signal, d_m: f64, plate: &PlateModel, modes: ModeSet) -> Result<Signal> {
    let required = required_len(x, d_m, plate, modes)?;
    if required > x.len() {
        return Err(Error::WindowTooShort {
            len: x.len(),
            required_len: required,
        });
    }
    propagate_circular(x, d_m, plate, modes)
}
