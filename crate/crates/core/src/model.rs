//! Parameterization of the lambda system, the instantaneous Bloch state,
//! the dark/bright basis, the dark-state pumping law, and the reduction of
//! a four-level Raman scheme to an effective lambda system.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRACE_TOL: f64 = 1e-12;
pub const POPULATION_TOL: f64 = 1e-10;
pub const COHERENCE_TOL: f64 = 1e-10;

/// Decay exposure `gamma * decay_fraction * (dt - t1)` above which a
/// relaxation gap erases the optical coherences well below every tolerance
/// used here (residual factor e^-10 ~ 5e-5 on amplitudes that are already
/// first order in the probe).
pub const FULL_RELAXATION_MIN_DECAY: f64 = 10.0;

// Layout of the real state vector used throughout the crate:
// [Re s13, Im s13, Re s12, Im s12, Re s23, Im s23, p11, p22, p33, pl]
pub(crate) const R13: usize = 0;
pub(crate) const I13: usize = 1;
pub(crate) const R12: usize = 2;
pub(crate) const I12: usize = 3;
pub(crate) const R23: usize = 4;
pub(crate) const I23: usize = 5;
pub(crate) const P11: usize = 6;
pub(crate) const P22: usize = 7;
pub(crate) const P33: usize = 8;
pub(crate) const PL: usize = 9;

/// Physical constants of the driven lambda system. All angular (rad/s).
///
/// `omega1` is the Rabi frequency on |1>-|3> (probe side), `omega2` on
/// |2>-|3> (control side), `delta` the two-photon detuning carried by
/// field 1, `gamma` the gated decay rate out of |3> (per ground-state
/// channel, so the excited population decays at 2*gamma when the gate is
/// open), `gamma0` the ground-state dephasing rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaParams {
    pub omega1: f64,
    pub omega2: f64,
    pub delta: f64,
    pub gamma: f64,
    pub gamma0: f64,
}

impl LambdaParams {
    pub fn new(omega1: f64, omega2: f64, delta: f64, gamma: f64, gamma0: f64) -> Result<Self> {
        let p = LambdaParams { omega1, omega2, delta, gamma, gamma0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("gamma0", self.gamma0),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameters(format!("{name} must be finite, got {v}")));
            }
        }
        if self.omega1 < 0.0 {
            return Err(Error::InvalidParameters(format!("omega1 must be >= 0, got {}", self.omega1)));
        }
        if self.omega2 <= 0.0 {
            return Err(Error::InvalidParameters(format!("omega2 must be > 0, got {}", self.omega2)));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParameters(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.gamma0 < 0.0 {
            return Err(Error::InvalidParameters(format!("gamma0 must be >= 0, got {}", self.gamma0)));
        }
        Ok(())
    }

    /// Total ground-state Rabi frequency Omega = sqrt(omega1^2 + omega2^2).
    pub fn omega(&self) -> f64 {
        self.omega1.hypot(self.omega2)
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..*self }
    }
}

/// Timing of the pulsed protocol: `n_pulses` periods of length `dt`, each
/// opening with a drive pulse of length `t1` and closing with a relaxation
/// gap of `dt - t1`. The decay gate is open for the first `decay_fraction`
/// of the gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub n_pulses: usize,
    pub dt: f64,
    pub t1: f64,
    #[serde(default = "default_decay_fraction")]
    pub decay_fraction: f64,
}

fn default_decay_fraction() -> f64 {
    1.0
}

impl PulseSequence {
    pub fn new(n_pulses: usize, dt: f64, t1: f64) -> Result<Self> {
        let s = PulseSequence { n_pulses, dt, t1, decay_fraction: 1.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn with_decay_fraction(mut self, decay_fraction: f64) -> Result<Self> {
        self.decay_fraction = decay_fraction;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses < 1 {
            return Err(Error::InvalidParameters("n_pulses must be >= 1".into()));
        }
        if !(self.dt.is_finite() && self.t1.is_finite() && self.decay_fraction.is_finite()) {
            return Err(Error::InvalidParameters("dt, t1, decay_fraction must be finite".into()));
        }
        if !(self.t1 > 0.0 && self.t1 < self.dt) {
            return Err(Error::InvalidParameters(format!(
                "need 0 < t1 < dt, got t1 = {}, dt = {}",
                self.t1, self.dt
            )));
        }
        if !(self.decay_fraction > 0.0 && self.decay_fraction <= 1.0) {
            return Err(Error::InvalidParameters(format!(
                "decay_fraction must be in (0, 1], got {}",
                self.decay_fraction
            )));
        }
        Ok(())
    }

    /// Pulse area A = Omega * t1.
    pub fn area(&self, params: &LambdaParams) -> f64 {
        params.omega() * self.t1
    }

    pub fn total_time(&self) -> f64 {
        self.n_pulses as f64 * self.dt
    }

    pub fn gap(&self) -> f64 {
        self.dt - self.t1
    }

    /// Whether the gap erases optical coherences to working precision,
    /// which is what the closed-form treatment assumes.
    pub fn full_relaxation(&self, params: &LambdaParams) -> bool {
        params.gamma * self.decay_fraction * self.gap() >= FULL_RELAXATION_MIN_DECAY
    }
}

/// Instantaneous state of the three-level density matrix, plus the running
/// photoluminescence integral of the trajectory that produced it.
///
/// Coherences are `s_ij = <i|rho|j>`; populations `p_ii` are real.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochState {
    pub(crate) v: [f64; 10],
}

impl BlochState {
    pub fn pure_ground1() -> Self {
        let mut v = [0.0; 10];
        v[P11] = 1.0;
        BlochState { v }
    }

    pub fn pure_ground2() -> Self {
        let mut v = [0.0; 10];
        v[P22] = 1.0;
        BlochState { v }
    }

    pub fn pure_excited() -> Self {
        let mut v = [0.0; 10];
        v[P33] = 1.0;
        BlochState { v }
    }

    /// Incoherent 50/50 mixture of the two ground states.
    pub fn thermal_ground() -> Self {
        let mut v = [0.0; 10];
        v[P11] = 0.5;
        v[P22] = 0.5;
        BlochState { v }
    }

    /// Pure dark state |D> = (omega2 |1> - omega1 |2>) / Omega.
    pub fn dark(params: &LambdaParams) -> Result<Self> {
        let oo = params.omega1 * params.omega1 + params.omega2 * params.omega2;
        if oo <= 0.0 {
            return Err(Error::InvalidParameters("dark state undefined for Omega = 0".into()));
        }
        let mut v = [0.0; 10];
        v[P11] = params.omega2 * params.omega2 / oo;
        v[P22] = params.omega1 * params.omega1 / oo;
        v[R12] = -params.omega1 * params.omega2 / oo;
        Ok(BlochState { v })
    }

    /// Pure bright state |B> = (omega1 |1> + omega2 |2>) / Omega.
    pub fn bright(params: &LambdaParams) -> Result<Self> {
        let oo = params.omega1 * params.omega1 + params.omega2 * params.omega2;
        if oo <= 0.0 {
            return Err(Error::InvalidParameters("bright state undefined for Omega = 0".into()));
        }
        let mut v = [0.0; 10];
        v[P11] = params.omega1 * params.omega1 / oo;
        v[P22] = params.omega2 * params.omega2 / oo;
        v[R12] = params.omega1 * params.omega2 / oo;
        Ok(BlochState { v })
    }

    pub fn from_components(
        s13: Complex64,
        s12: Complex64,
        s23: Complex64,
        p11: f64,
        p22: f64,
        p33: f64,
    ) -> Result<Self> {
        let v = [s13.re, s13.im, s12.re, s12.im, s23.re, s23.im, p11, p22, p33, 0.0];
        let s = BlochState { v };
        s.check(COHERENCE_TOL)?;
        Ok(s)
    }

    pub fn s13(&self) -> Complex64 {
        Complex64::new(self.v[R13], self.v[I13])
    }

    pub fn s12(&self) -> Complex64 {
        Complex64::new(self.v[R12], self.v[I12])
    }

    pub fn s23(&self) -> Complex64 {
        Complex64::new(self.v[R23], self.v[I23])
    }

    pub fn p11(&self) -> f64 {
        self.v[P11]
    }

    pub fn p22(&self) -> f64 {
        self.v[P22]
    }

    pub fn p33(&self) -> f64 {
        self.v[P33]
    }

    /// Photoluminescence integral of 2*gamma*p33 over the windows where the
    /// trajectory counted emission. Zero for freshly constructed states.
    pub fn pl(&self) -> f64 {
        self.v[PL]
    }

    pub fn trace(&self) -> f64 {
        self.v[P11] + self.v[P22] + self.v[P33]
    }

    /// Population of the dark state |D> in this state.
    pub fn dark_population(&self, params: &LambdaParams) -> Result<f64> {
        let oo = params.omega1 * params.omega1 + params.omega2 * params.omega2;
        if oo <= 0.0 {
            return Err(Error::InvalidParameters("dark state undefined for Omega = 0".into()));
        }
        let (o1, o2) = (params.omega1, params.omega2);
        // <D|rho|D> with |D> = (o2|1> - o1|2>)/Omega
        Ok((o2 * o2 * self.p11() + o1 * o1 * self.p22() - 2.0 * o1 * o2 * self.s12().re) / oo)
    }

    /// Validates trace, population bounds, and the Cauchy-Schwarz proxy
    /// |s_ij|^2 <= p_ii p_jj + coherence_tol.
    pub fn check(&self, coherence_tol: f64) -> Result<()> {
        for (i, x) in self.v.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::Numeric(format!("non-finite state component {i}: {x}")));
            }
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::Numeric(format!("trace deviates from 1 by {:.3e}", (tr - 1.0).abs())));
        }
        for (name, p) in [("p11", self.p11()), ("p22", self.p22()), ("p33", self.p33())] {
            if !(-POPULATION_TOL..=1.0 + POPULATION_TOL).contains(&p) {
                return Err(Error::Numeric(format!("population {name} = {p} out of [0, 1]")));
            }
        }
        let pairs = [
            ("s13", self.s13().norm_sqr(), self.p11() * self.p33()),
            ("s12", self.s12().norm_sqr(), self.p11() * self.p22()),
            ("s23", self.s23().norm_sqr(), self.p22() * self.p33()),
        ];
        for (name, m2, bound) in pairs {
            if m2 > bound + coherence_tol {
                return Err(Error::Numeric(format!(
                    "coherence bound violated for {name}: |s|^2 - p_ii p_jj = {:.3e}",
                    m2 - bound
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn from_vector(v: [f64; 10]) -> Self {
        BlochState { v }
    }

    pub(crate) fn vector(&self) -> &[f64; 10] {
        &self.v
    }
}

/// Projects ground-state amplitudes (c1, c2) onto the dark/bright basis.
/// Returns (dark, bright) amplitudes; preserves the norm.
pub fn dark_bright_decompose(
    params: &LambdaParams,
    ground_amplitudes: (Complex64, Complex64),
) -> Result<(Complex64, Complex64)> {
    let omega = params.omega();
    if omega <= 0.0 {
        return Err(Error::InvalidParameters("dark/bright basis undefined for Omega = 0".into()));
    }
    let (c1, c2) = ground_amplitudes;
    let dark = (params.omega2 * c1 - params.omega1 * c2) / omega;
    let bright = (params.omega1 * c1 + params.omega2 * c2) / omega;
    Ok((dark, bright))
}

fn pump_fraction(area: f64) -> f64 {
    let s = (area / 2.0).sin();
    0.5 * s * s
}

fn validate_pumping_inputs(area: f64, sigma_d0: f64) -> Result<()> {
    if !area.is_finite() {
        return Err(Error::InvalidParameters(format!("area must be finite, got {area}")));
    }
    if !(0.0..=1.0).contains(&sigma_d0) {
        return Err(Error::InvalidParameters(format!(
            "sigma_d0 must be in [0, 1], got {sigma_d0}"
        )));
    }
    Ok(())
}

/// Dark-state population after `n` pulse+decay steps, from the recursion
/// sigma_D <- sigma_D + (1/2) sin^2(A/2) (1 - sigma_D).
///
/// Each pulse moves the bright population through the excited state, and
/// the decay window returns half of the excited share to the dark state.
pub fn dark_population_after_n(area: f64, sigma_d0: f64, n: usize) -> Result<f64> {
    validate_pumping_inputs(area, sigma_d0)?;
    let q = pump_fraction(area);
    let mut s = sigma_d0;
    for _ in 0..n {
        s += q * (1.0 - s);
    }
    Ok(s)
}

/// Closed-form solution of the same recursion:
/// sigma_D^n = 1 - (1 - (1/2) sin^2(A/2))^n (1 - sigma_D^0).
pub fn dark_population_closed_form(area: f64, sigma_d0: f64, n: usize) -> Result<f64> {
    validate_pumping_inputs(area, sigma_d0)?;
    let q = pump_fraction(area);
    Ok(1.0 - (1.0 - q).powf(n as f64) * (1.0 - sigma_d0))
}

const STEPS_CAP: usize = 100_000_000;

/// Smallest n with dark_population_after_n(area, sigma_d0, n) >= threshold.
pub fn steps_to_threshold(area: f64, sigma_d0: f64, threshold: f64) -> Result<usize> {
    validate_pumping_inputs(area, sigma_d0)?;
    if !(threshold > sigma_d0 && threshold < 1.0) {
        return Err(Error::InvalidParameters(format!(
            "need sigma_d0 < threshold < 1, got sigma_d0 = {sigma_d0}, threshold = {threshold}"
        )));
    }
    let q = pump_fraction(area);
    if q <= 0.0 {
        return Err(Error::NeverConverges(format!(
            "pulse area {area} transfers no population per step"
        )));
    }
    let mut s = sigma_d0;
    for n in 1..=STEPS_CAP {
        s += q * (1.0 - s);
        if s >= threshold {
            return Ok(n);
        }
    }
    Err(Error::NeverConverges(format!(
        "threshold {threshold} not reached within {STEPS_CAP} steps"
    )))
}

/// Four-level Raman configuration: two legs per effective transition, with
/// one-photon detunings delta1, delta2 from the common upper level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourLevelConfig {
    pub omega_raman: [f64; 4],
    pub delta1: f64,
    pub delta2: f64,
}

impl FourLevelConfig {
    pub fn new(omega_raman: [f64; 4], delta1: f64, delta2: f64) -> Result<Self> {
        let c = FourLevelConfig { omega_raman, delta1, delta2 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, o) in self.omega_raman.iter().enumerate() {
            if !o.is_finite() || *o < 0.0 {
                return Err(Error::InvalidParameters(format!(
                    "raman rabi frequency {} must be finite and >= 0, got {o}",
                    i + 1
                )));
            }
        }
        for (name, d) in [("delta1", self.delta1), ("delta2", self.delta2)] {
            if !d.is_finite() || d == 0.0 {
                return Err(Error::InvalidParameters(format!("{name} must be finite and nonzero, got {d}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveLambda {
    pub omega_p: f64,
    pub omega_c: f64,
    /// True iff the two Raman resonances are separated well enough for the
    /// lambda reduction to hold: |delta1 - delta2| >= factor * max rate.
    pub valid: bool,
}

pub fn effective_lambda(cfg: &FourLevelConfig) -> Result<EffectiveLambda> {
    effective_lambda_with_factor(cfg, 10.0)
}

pub fn effective_lambda_with_factor(cfg: &FourLevelConfig, factor: f64) -> Result<EffectiveLambda> {
    cfg.validate()?;
    let [o1, o2, o3, o4] = cfg.omega_raman;
    let omega_p = o1 * o2 / cfg.delta1;
    let omega_c = o3 * o4 / cfg.delta2;
    let sep = (cfg.delta1 - cfg.delta2).abs();
    let valid = sep >= factor * omega_p.abs().max(omega_c.abs());
    Ok(EffectiveLambda { omega_p, omega_c, valid })
}
