//! Single-atom convolutional matching pursuit.
//!
//! Each term is `α_m(t) * Ψ(t − τ_m)` where the impulse response
//! `α_m(t) = Σ_i U_{i−1}(2t/L − 1) β_i` lives on the atom support `[0, L]`.
//! The delay is chosen with the scalar-amplitude gain of [`crate::sampm`];
//! the coefficients then solve the Galerkin system `M β = F` with
//! `M = ∫ B Bᵀ dt`, `F = ∫ B r dt` and `B(t) = [N(t) * Ψ(t − τ)](t)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sampm::{
    delay_index, terms_to, AtomMeta, DelaySearch, PursuitConfig, StopReason,
    STAGNATION_RELATIVE_GAIN,
};
use crate::signal::{check_rates, norm_time, DelayGrid, Signal};

/// Chebyshev polynomials of the second kind mapped affinely from `[0, support_s]` onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevBasis {
    pub n_funcs: usize,
    pub support_s: f64,
    pub sample_rate_hz: f64,
}

impl ChebyshevBasis {
    pub fn new(n_funcs: usize, support_s: f64, sample_rate_hz: f64) -> Result<Self> {
        if n_funcs == 0 {
            return Err(invalid("n_funcs", "must be >= 1"));
        }
        if !(support_s.is_finite() && support_s > 0.0) {
            return Err(invalid("support_s", format!("{support_s} is not > 0")));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(invalid(
                "sample_rate_hz",
                format!("{sample_rate_hz} is not > 0"),
            ));
        }
        Ok(Self {
            n_funcs,
            support_s,
            sample_rate_hz,
        })
    }

    /// Basis spanning the full duration of `atom`.
    pub fn for_atom(n_funcs: usize, atom: &Signal) -> Result<Self> {
        if atom.len() < 2 {
            return Err(invalid("atom", "must span at least two samples"));
        }
        Self::new(
            n_funcs,
            (atom.len() - 1) as f64 * atom.dt(),
            atom.sample_rate_hz(),
        )
    }

    /// Samples on `[0, support_s]`, endpoints included.
    pub fn support_len(&self) -> usize {
        (self.support_s * self.sample_rate_hz).round() as usize + 1
    }
}

/// Row `i` holds `U_i(2t/L − 1)` sampled at `t = 0, Δt, …, L`.
pub fn eval_basis(basis: &ChebyshevBasis) -> DMatrix<f64> {
    let len = basis.support_len();
    let span = (len - 1).max(1) as f64;
    let mut m = DMatrix::zeros(basis.n_funcs, len);
    for j in 0..len {
        let x = 2.0 * j as f64 / span - 1.0;
        let (mut prev, mut cur) = (0.0, 1.0);
        for i in 0..basis.n_funcs {
            m[(i, j)] = cur;
            let next = 2.0 * x * cur - prev;
            prev = cur;
            cur = next;
        }
    }
    m
}

/// Linear convolution scaled by `Δt`, of length `len(a) + len(b) − 1`.
pub fn convolve(a: &Signal, b: &Signal) -> Result<Signal> {
    a.check_rate(b)?;
    Signal::new(
        convolve_raw(a.samples(), b.samples(), a.dt()),
        a.sample_rate_hz(),
    )
}

fn convolve_raw(a: &[f64], b: &[f64], dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (o, y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    for o in &mut out {
        *o *= dt;
    }
    out
}

/// `N(t) * Ψ(t)` before any delay; row `i` starts at sample 0.
fn base_rows(atom: &Signal, basis: &ChebyshevBasis) -> Result<DMatrix<f64>> {
    check_rates(atom.sample_rate_hz(), basis.sample_rate_hz)?;
    let support = atom.support_len();
    if support == 0 {
        return Err(Error::ZeroEnergyAtom);
    }
    let psi = &atom.samples()[..support];
    let n = eval_basis(basis);
    let width = n.ncols() + support - 1;
    let mut rows = DMatrix::zeros(basis.n_funcs, width);
    for i in 0..basis.n_funcs {
        let row: Vec<f64> = n.row(i).iter().copied().collect();
        for (j, v) in convolve_raw(&row, psi, atom.dt()).into_iter().enumerate() {
            rows[(i, j)] = v;
        }
    }
    Ok(rows)
}

/// `B(t) = [N(t) * Ψ(t − τ)](t)` over a window of `out_len` samples.
pub fn build_b(
    atom: &Signal,
    tau_s: f64,
    basis: &ChebyshevBasis,
    out_len: usize,
) -> Result<DMatrix<f64>> {
    if !(tau_s >= 0.0) {
        return Err(invalid("tau_s", "must be >= 0"));
    }
    let k = delay_index(tau_s, atom.sample_rate_hz());
    if k >= out_len {
        return Err(Error::DelayOutOfWindow {
            tau_s,
            window_s: out_len as f64 * atom.dt(),
        });
    }
    let base = base_rows(atom, basis)?;
    let w = base.ncols().min(out_len - k);
    let mut b = DMatrix::zeros(basis.n_funcs, out_len);
    b.view_mut((0, k), (basis.n_funcs, w))
        .copy_from(&base.view((0, 0), (basis.n_funcs, w)));
    Ok(b)
}

/// Galerkin operators `M = B Bᵀ Δt` and `F = B r Δt`.
pub fn assemble_system(
    b: &DMatrix<f64>,
    residual: &Signal,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if b.ncols() != residual.len() {
        return Err(Error::DimensionMismatch {
            expected: b.ncols(),
            got: residual.len(),
        });
    }
    let r = DVector::from_column_slice(residual.samples());
    Ok(assemble_raw(&b.as_view(), &r.as_view(), residual.dt()))
}

fn assemble_raw(
    b: &nalgebra::DMatrixView<'_, f64>,
    r: &nalgebra::DVectorView<'_, f64>,
    dt: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut m = b * b.transpose() * dt;
    // exact symmetry
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let f = b * r * dt;
    (m, f)
}

/// Solves `(M + λ tr(M)/N · I) β = F`.
pub fn solve_beta(m: &DMatrix<f64>, f: &DVector<f64>, ridge_lambda: f64) -> Result<DVector<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.ncols(),
        });
    }
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    if !(ridge_lambda >= 0.0 && ridge_lambda.is_finite()) {
        return Err(invalid(
            "ridge_lambda",
            format!("{ridge_lambda} is not >= 0"),
        ));
    }
    if f.iter().all(|v| *v == 0.0) {
        return Ok(DVector::zeros(n));
    }
    let trace = m.trace();
    if !(trace > 0.0) {
        return Err(Error::SingularSystem);
    }
    let mut a = m.clone();
    let shift = ridge_lambda * trace / n as f64;
    for i in 0..n {
        a[(i, i)] += shift;
    }
    let chol = a.cholesky().ok_or(Error::SingularSystem)?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| {
        (lo.min(*d), hi.max(*d))
    });
    // squared pivot ratio estimates the reciprocal condition number
    if (lo / hi).powi(2) < 1e-15 {
        return Err(Error::SingularSystem);
    }
    Ok(chol.solve(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacmpmTerm {
    pub tau_s: f64,
    pub beta: Vec<f64>,
}

impl SacmpmTerm {
    /// Sampled impulse response `α(t) = N(t)ᵀ β` on the basis support.
    pub fn impulse_response(&self, basis: &ChebyshevBasis) -> Vec<f64> {
        let n = eval_basis(basis);
        let beta = DVector::from_column_slice(&self.beta);
        (n.transpose() * beta).iter().copied().collect()
    }

    /// `[α(t) * Ψ(t − τ)](t)` over a window of `len` samples.
    pub fn waveform(&self, atom: &Signal, basis: &ChebyshevBasis, len: usize) -> Result<Signal> {
        let b = build_b(atom, self.tau_s, basis, len)?;
        let beta = DVector::from_column_slice(&self.beta);
        let w = b.transpose() * beta;
        Signal::new(w.iter().copied().collect(), atom.sample_rate_hz())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SacmpmConfig {
    pub pursuit: PursuitConfig,
    pub n_funcs: usize,
    pub ridge_lambda: f64,
}

impl Default for SacmpmConfig {
    fn default() -> Self {
        Self {
            pursuit: PursuitConfig::default(),
            n_funcs: 40,
            ridge_lambda: 1e-2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SacmpmDecomposition {
    pub atom: Signal,
    pub basis: ChebyshevBasis,
    pub terms: Vec<SacmpmTerm>,
    pub error_history_pct: Vec<f64>,
    pub ridge_lambda: f64,
    pub tol_pct: f64,
    pub max_terms: usize,
    pub stop: StopReason,
    pub residual: Signal,
}

/// On-disk form of a [`SacmpmDecomposition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacmpmFile {
    pub method: String,
    #[serde(rename = "N")]
    pub n_funcs: usize,
    pub support_s: f64,
    pub ridge_lambda: f64,
    pub atom_meta: AtomMeta,
    pub terms: Vec<SacmpmTerm>,
    pub error_history_pct: Vec<f64>,
    pub tol_pct: f64,
    pub max_terms: usize,
    pub stop: StopReason,
}

impl SacmpmDecomposition {
    pub fn to_file(&self, atom_source: Option<String>) -> SacmpmFile {
        SacmpmFile {
            method: "sacmpm".into(),
            n_funcs: self.basis.n_funcs,
            support_s: self.basis.support_s,
            ridge_lambda: self.ridge_lambda,
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

    pub fn terms_to(&self, tol_pct: f64) -> Option<usize> {
        terms_to(&self.error_history_pct, tol_pct)
    }

    pub fn term_waveforms(&self) -> Result<Vec<Signal>> {
        let n = self.residual.len();
        self.terms
            .iter()
            .map(|t| t.waveform(&self.atom, &self.basis, n))
            .collect()
    }

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

/// Delay search plus the precomputed, undelayed `B` rows.
struct ConvSearch {
    delays: DelaySearch,
    base: DMatrix<f64>,
    dt: f64,
}

impl ConvSearch {
    fn new(
        atom: &Signal,
        basis: &ChebyshevBasis,
        signal_len: usize,
        grid: Option<DelayGrid>,
    ) -> Result<Self> {
        let delays = DelaySearch::new(atom, signal_len, grid)?;
        let base = base_rows(&delays.atom, basis)?;
        Ok(Self {
            delays,
            base,
            dt: atom.dt(),
        })
    }

    /// Selects τ, solves for β and returns the term with the window it touches.
    fn step(
        &self,
        residual: &[f64],
        fs: f64,
        ridge_lambda: f64,
    ) -> Result<Option<(usize, DVector<f64>, usize)>> {
        let current = Signal::new(residual.to_vec(), fs)?;
        let energy = current.energy();
        let (k, gain, _) = self.delays.best(&current)?;
        if !(gain > STAGNATION_RELATIVE_GAIN * energy) {
            return Ok(None);
        }
        let w = self.base.ncols().min(residual.len() - k);
        let b = self.base.view((0, 0), (self.base.nrows(), w));
        let r = nalgebra::DVectorView::from_slice(&residual[k..k + w], w);
        let (m, f) = assemble_raw(&b, &r, self.dt);
        let beta = solve_beta(&m, &f, ridge_lambda)?;
        Ok(Some((k, beta, w)))
    }

    fn subtract(&self, residual: &mut [f64], k: usize, w: usize, beta: &DVector<f64>) {
        let b = self.base.view((0, 0), (self.base.nrows(), w));
        let contrib = b.transpose() * beta;
        for (r, c) in residual[k..k + w].iter_mut().zip(contrib.iter()) {
            *r -= c;
        }
    }
}

/// One greedy step: scalar-gain delay, then Galerkin coefficients at that delay.
pub fn sacmpm_step(
    residual: &Signal,
    atom: &Signal,
    basis: &ChebyshevBasis,
    grid: &DelayGrid,
    ridge_lambda: f64,
) -> Result<SacmpmTerm> {
    residual.check_rate(atom)?;
    let search = ConvSearch::new(atom, basis, residual.len(), Some(*grid))?;
    let fs = residual.sample_rate_hz();
    match search.step(residual.samples(), fs, ridge_lambda)? {
        Some((k, beta, _)) => Ok(SacmpmTerm {
            tau_s: k as f64 / fs,
            beta: beta.iter().copied().collect(),
        }),
        None => {
            let (k, _, _) = search.delays.best(residual)?;
            Ok(SacmpmTerm {
                tau_s: k as f64 / fs,
                beta: vec![0.0; basis.n_funcs],
            })
        }
    }
}

/// Greedy decomposition `s ≈ Σ [α_i(t) * Ψ(t − τ_i)](t)`.
pub fn sacmpm_decompose(
    s: &Signal,
    atom: &Signal,
    config: &SacmpmConfig,
) -> Result<SacmpmDecomposition> {
    config.pursuit.validate()?;
    if !(config.ridge_lambda >= 0.0 && config.ridge_lambda.is_finite()) {
        return Err(invalid("ridge_lambda", "must be >= 0"));
    }
    s.check_rate(atom)?;
    let s_norm = norm_time(s);
    if s_norm == 0.0 {
        return Err(Error::ZeroEnergySignal);
    }
    let basis = ChebyshevBasis::for_atom(config.n_funcs, atom)?;
    let search = ConvSearch::new(atom, &basis, s.len(), config.pursuit.grid)?;
    let fs = s.sample_rate_hz();
    let mut residual = s.clone().into_samples();
    let mut terms = Vec::new();
    let mut history = Vec::new();
    let mut stop = StopReason::MaxTerms;
    let mut energy: f64 = s.energy();

    while terms.len() < config.pursuit.max_terms {
        let Some((k, beta, w)) = search.step(&residual, fs, config.ridge_lambda)? else {
            stop = StopReason::Stagnation;
            break;
        };
        let mut next = residual.clone();
        search.subtract(&mut next, k, w, &beta);
        let next_energy: f64 = next.iter().map(|v| v * v).sum::<f64>() * search.dt;
        if !(next_energy < energy * (1.0 - STAGNATION_RELATIVE_GAIN)) {
            stop = StopReason::Stagnation;
            break;
        }
        residual = next;
        energy = next_energy;
        terms.push(SacmpmTerm {
            tau_s: k as f64 / fs,
            beta: beta.iter().copied().collect(),
        });
        let xi = 100.0 * energy.sqrt() / s_norm;
        history.push(xi);
        if xi <= config.pursuit.tol_pct {
            stop = StopReason::Tolerance;
            break;
        }
    }

    Ok(SacmpmDecomposition {
        atom: search.delays.atom.clone(),
        basis,
        terms,
        error_history_pct: history,
        ridge_lambda: config.ridge_lambda,
        tol_pct: config.pursuit.tol_pct,
        max_terms: config.pursuit.max_terms,
        stop,
        residual: Signal::new(residual, fs)?,
    })
}
