//! Net-output accounting identities with human capital.
//!
//! Without human capital, net output is capital growth plus consumption. With
//! it, consumption splits into an invested part `C_s` and a pure part `C_p`,
//! and human capital grows by invested consumption plus self-invested work
//! less human depreciation. Substituting the second pair of relations into
//! the extended output identity gives `Y = ΔK + C + W_s - D(H)`;
//! [`check_b4`] verifies that the two routes agree for a given ledger.
//!
//! All inputs are synthetic: nothing here is estimated from data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for unit-scale ledgers.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IdentityError {
    #[error("ledger violates {relation}: lhs {lhs}, rhs {rhs}")]
    InvariantViolation {
        relation: &'static str,
        lhs: f64,
        rhs: f64,
    },
    #[error("ledger entry `{0}` is not finite")]
    NonFinite(&'static str),
}

/// `Y = ΔK + C`, neglecting human capital.
pub fn net_output_simple(d_k: f64, c: f64) -> f64 {
    d_k + c
}

/// `Y = ΔK + ΔH + C_p`, allowing human capital.
pub fn net_output_extended(d_k: f64, d_h: f64, c_p: f64) -> f64 {
    d_k + d_h + c_p
}

/// `ΔH = C_s + W_s - D(H)`.
pub fn human_capital_delta(c_s: f64, w_s: f64, d_h_depreciation: f64) -> f64 {
    c_s + w_s - d_h_depreciation
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityLedger {
    /// Capital growth `ΔK`.
    pub d_k: f64,
    /// Total consumption `C`.
    pub c: f64,
    /// Invested consumption `C_s`.
    pub c_s: f64,
    /// Pure consumption `C_p`.
    pub c_p: f64,
    /// Self-invested work `W_s`.
    pub w_s: f64,
    /// Human depreciation `D(H)`.
    pub depreciation: f64,
    /// Human-capital growth `ΔH`.
    pub d_h: f64,
    /// Net output `Y`.
    pub y: f64,
}

impl IdentityLedger {
    /// Complete a ledger from its independent flows so that the consumption
    /// split, the human-capital law of motion and the extended output
    /// identity all hold.
    pub fn from_flows(d_k: f64, c_s: f64, c_p: f64, w_s: f64, depreciation: f64) -> Self {
        let d_h = human_capital_delta(c_s, w_s, depreciation);
        Self {
            d_k,
            c: c_s + c_p,
            c_s,
            c_p,
            w_s,
            depreciation,
            d_h,
            y: net_output_extended(d_k, d_h, c_p),
        }
    }

    fn entries(&self) -> [(&'static str, f64); 8] {
        [
            ("dK", self.d_k),
            ("C", self.c),
            ("C_s", self.c_s),
            ("C_p", self.c_p),
            ("W_s", self.w_s),
            ("D_H", self.depreciation),
            ("dH", self.d_h),
            ("Y", self.y),
        ]
    }

    /// Largest absolute entry, floored at one.
    pub fn scale(&self) -> f64 {
        self.entries().iter().map(|(_, v)| v.abs()).fold(1.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `ΔK + ΔH + C_p`.
    pub y_extended: f64,
    /// `ΔK + C + W_s - D(H)`.
    pub y_substituted: f64,
    pub residual: f64,
    /// Tolerance after scaling by the largest ledger entry.
    pub tolerance: f64,
    pub pass: bool,
}

/// Check that the substituted output identity agrees with the extended one.
///
/// `tol` is absolute for unit-scale ledgers and scales with the largest
/// absolute entry. A ledger that breaks the consumption split, the
/// human-capital law of motion or its own `Y` is rejected, not repaired.
pub fn check_b4(ledger: &IdentityLedger, tol: f64) -> Result<IdentityReport, IdentityError> {
    for (name, v) in ledger.entries() {
        if !v.is_finite() {
            return Err(IdentityError::NonFinite(name));
        }
    }
    let tolerance = tol * ledger.scale();
    let relations = [
        ("C = C_s + C_p", ledger.c, ledger.c_s + ledger.c_p),
        (
            "dH = C_s + W_s - D_H",
            ledger.d_h,
            human_capital_delta(ledger.c_s, ledger.w_s, ledger.depreciation),
        ),
        ("Y = dK + dH + C_p", ledger.y, net_output_extended(ledger.d_k, ledger.d_h, ledger.c_p)),
    ];
    for (relation, lhs, rhs) in relations {
        if (lhs - rhs).abs() > tolerance {
            return Err(IdentityError::InvariantViolation { relation, lhs, rhs });
        }
    }

    let y_extended = net_output_extended(ledger.d_k, ledger.d_h, ledger.c_p);
    let y_substituted = ledger.d_k + ledger.c + ledger.w_s - ledger.depreciation;
    let residual = y_extended - y_substituted;
    Ok(IdentityReport {
        y_extended,
        y_substituted,
        residual,
        tolerance,
        pass: residual.abs() <= tolerance,
    })
}
