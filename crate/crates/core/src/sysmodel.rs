//! Physical parameters and the couplings of the fourth-order Josephson expansion.
//!
//! With `H_J = −E_J cos~(φ_q(q+q†) + φ_c(c+c†) + φ_f(f+f†))`, normal ordering the
//! non-rotating quartic terms gives
//!
//! ```text
//! α    = E_J φ_q⁴ / 2
//! χ_ij = E_J φ_i² φ_j²
//! ```
//!
//! and the driven three-wave term yields a longitudinal coupling
//! `|ζ| = E_J φ_q³ φ_c |ξ| = √(2αχ_qc) |ξ|`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

/// Participations above this are flagged: sixth-order terms exceed a few
/// percent of the quartic ones.
pub const PHI_WARN: f64 = 0.2;
/// Participations at or above this are rejected by [`SystemParams::validate`].
pub const PHI_MAX: f64 = 0.5;

/// Default Josephson energy `E_J / 2π` used when only couplings are known.
pub const DEFAULT_E_J_HZ: f64 = 25e9;

pub fn hz_to_rad(f_hz: f64) -> f64 {
    TWO_PI * f_hz
}

pub fn rad_to_hz(omega: f64) -> f64 {
    omega / TWO_PI
}

/// Raw physical parameters, all in rad/s (rates, frequencies, `E_J/ħ`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub e_j: f64,
    pub phi_q: f64,
    pub phi_c: f64,
    pub phi_f: f64,
    pub omega_q: f64,
    pub omega_c: f64,
    pub omega_f: f64,
    /// Readout cavity energy decay rate.
    pub kappa: f64,
    /// Filter mode energy decay rate, `1/T_f`.
    pub kappa_filter_decay: f64,
    /// Qubit relaxation rate, `1/T₁`.
    pub gamma1: f64,
    /// Qubit pure dephasing rate, `1/T₂ − 1/(2T₁)`.
    pub gamma_phi: f64,
    /// Detection efficiency in (0, 1].
    pub eta: f64,
}

impl SystemParams {
    /// Device parameters of the three-mode sample (target qubit, post cavity,
    /// stripline filter), with participations fitted at the default `E_J`.
    pub fn reference_device() -> Self {
        SystemConfig::reference_device().to_params().expect("reference device parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("e_j", self.e_j),
            ("omega_q", self.omega_q),
            ("omega_c", self.omega_c),
            ("omega_f", self.omega_f),
            ("kappa", self.kappa),
            ("kappa_filter_decay", self.kappa_filter_decay),
            ("gamma1", self.gamma1),
            ("gamma_phi", self.gamma_phi),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(field, format!("must be finite and > 0, got {v}")));
            }
        }
        for (field, v) in [("phi_q", self.phi_q), ("phi_c", self.phi_c), ("phi_f", self.phi_f)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(field, format!("must be > 0, got {v}")));
            }
            if v >= PHI_MAX {
                return Err(Error::validation(field, format!("must be < {PHI_MAX}, got {v}")));
            }
            if v > PHI_WARN {
                log::warn!("{field} = {v} exceeds {PHI_WARN}; fourth-order expansion is inaccurate");
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::validation("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        if self.omega_c == self.omega_q {
            return Err(Error::validation("omega_q", "cavity and qubit are degenerate"));
        }
        if self.omega_c == self.omega_f {
            return Err(Error::validation("omega_f", "cavity and filter are degenerate"));
        }
        Ok(())
    }

    /// `Δ = ω_c − ω_q`.
    pub fn detuning(&self) -> f64 {
        self.omega_c - self.omega_q
    }

    /// `Δ_f = ω_c − ω_f`.
    pub fn filter_detuning(&self) -> f64 {
        self.omega_c - self.omega_f
    }
}

/// Hamiltonian coefficients derived from [`SystemParams`], in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedCouplings {
    pub alpha: f64,
    pub chi_qc: f64,
    pub chi_qf: f64,
    /// Single-mode Purcell bound on the qubit lifetime through the filter (s).
    pub purcell_limit: f64,
}

impl DerivedCouplings {
    /// `√(2 α χ_qc)`: longitudinal coupling per unit displacement `|ξ|`.
    pub fn zeta_per_xi(&self) -> f64 {
        (2.0 * self.alpha * self.chi_qc).sqrt()
    }

    /// `√(χ_qf χ_qc)`: the same quantity when the drive enters through the filter.
    pub fn zeta_per_xi_filter(&self) -> f64 {
        (self.chi_qf * self.chi_qc).sqrt()
    }
}

pub fn derive_couplings(params: &SystemParams) -> Result<DerivedCouplings> {
    for (field, v) in [("e_j", params.e_j), ("phi_q", params.phi_q), ("phi_c", params.phi_c), ("phi_f", params.phi_f)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::validation(field, format!("must be > 0, got {v}")));
        }
    }
    let SystemParams { e_j, phi_q, phi_c, phi_f, .. } = *params;
    let alpha = 0.5 * e_j * phi_q.powi(4);
    let chi_qc = e_j * phi_q.powi(2) * phi_c.powi(2);
    let chi_qf = e_j * phi_q.powi(2) * phi_f.powi(2);
    let purcell_limit = alpha / (chi_qf * params.kappa_filter_decay);
    Ok(DerivedCouplings { alpha, chi_qc, chi_qf, purcell_limit })
}

/// Zero-point phase participations of qubit, cavity and filter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Participations {
    pub phi_q: f64,
    pub phi_c: f64,
    pub phi_f: f64,
}

impl Participations {
    /// True when any participation is above [`PHI_WARN`].
    pub fn outside_validity(&self) -> bool {
        [self.phi_q, self.phi_c, self.phi_f].iter().any(|&p| p > PHI_WARN)
    }
}

/// Inverts [`derive_couplings`]: participations that reproduce measured
/// `(α, χ_qc, χ_qf)` for a chosen `E_J`.
pub fn fit_participations(alpha: f64, chi_qc: f64, chi_qf: f64, e_j: f64) -> Result<Participations> {
    const OP: &str = "fit_participations";
    if !(e_j.is_finite() && e_j > 0.0) {
        return Err(Error::domain(OP, format!("E_J must be > 0, got {e_j}")));
    }
    for (name, v) in [("alpha", alpha), ("chi_qc", chi_qc), ("chi_qf", chi_qf)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::domain(OP, format!("{name} target must be > 0, got {v}")));
        }
    }
    let phi_q = (2.0 * alpha / e_j).powf(0.25);
    let p = Participations { phi_q, phi_c: (chi_qc / e_j).sqrt() / phi_q, phi_f: (chi_qf / e_j).sqrt() / phi_q };
    if p.outside_validity() {
        log::warn!("fitted participations {p:?} exceed {PHI_WARN}; E_J is too small for these couplings");
    }
    Ok(p)
}

fn default_e_j_hz() -> f64 {
    DEFAULT_E_J_HZ
}

fn default_eta() -> f64 {
    1.0
}

/// User-facing system block: frequencies in Hz (`ω/2π`), times in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default = "default_e_j_hz")]
    pub e_j_hz: f64,
    pub alpha_hz: f64,
    pub chi_qc_hz: f64,
    pub chi_qf_hz: f64,
    pub qubit_freq_hz: f64,
    pub cavity_freq_hz: f64,
    pub filter_freq_hz: f64,
    /// Cavity decay rate over 2π; `1.5915e6` means `κ = 10⁷ rad/s`.
    pub kappa_hz: f64,
    pub filter_t1_s: f64,
    pub t1_s: f64,
    pub t2_s: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
}

impl SystemConfig {
    pub fn reference_device() -> Self {
        SystemConfig {
            e_j_hz: DEFAULT_E_J_HZ,
            alpha_hz: 221e6,
            chi_qc_hz: 0.1e6,
            chi_qf_hz: 2.5e6,
            qubit_freq_hz: 4.982e9,
            cavity_freq_hz: 7.995e9,
            filter_freq_hz: 6.339e9,
            kappa_hz: 1e7 / TWO_PI,
            filter_t1_s: 19e-6,
            t1_s: 90e-6,
            t2_s: 30e-6,
            eta: 0.6,
        }
    }

    pub fn to_params(&self) -> Result<SystemParams> {
        let positive = [
            ("e_j_hz", self.e_j_hz),
            ("alpha_hz", self.alpha_hz),
            ("chi_qc_hz", self.chi_qc_hz),
            ("chi_qf_hz", self.chi_qf_hz),
            ("qubit_freq_hz", self.qubit_freq_hz),
            ("cavity_freq_hz", self.cavity_freq_hz),
            ("filter_freq_hz", self.filter_freq_hz),
            ("kappa_hz", self.kappa_hz),
            ("filter_t1_s", self.filter_t1_s),
            ("t1_s", self.t1_s),
            ("t2_s", self.t2_s),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(field, format!("must be finite and > 0, got {v}")));
            }
        }
        let gamma1 = 1.0 / self.t1_s;
        let gamma_phi = 1.0 / self.t2_s - 0.5 * gamma1;
        if gamma_phi <= 0.0 {
            return Err(Error::validation("t2_s", "T2 must be below 2·T1"));
        }
        let e_j = hz_to_rad(self.e_j_hz);
        let p = fit_participations(hz_to_rad(self.alpha_hz), hz_to_rad(self.chi_qc_hz), hz_to_rad(self.chi_qf_hz), e_j)
            .map_err(|e| Error::validation("e_j_hz", e.to_string()))?;
        let params = SystemParams {
            e_j,
            phi_q: p.phi_q,
            phi_c: p.phi_c,
            phi_f: p.phi_f,
            omega_q: hz_to_rad(self.qubit_freq_hz),
            omega_c: hz_to_rad(self.cavity_freq_hz),
            omega_f: hz_to_rad(self.filter_freq_hz),
            kappa: hz_to_rad(self.kappa_hz),
            kappa_filter_decay: 1.0 / self.filter_t1_s,
            gamma1,
            gamma_phi,
            eta: self.eta,
        };
        params.validate()?;
        Ok(params)
    }
}
