//! Exact and fluid-limit profit-sharing payoffs for peer-assisted
//! content-distribution games.
//!
//! The crate has two arithmetic regimes:
//!
//! * **Finite games** ([`game_core`], [`peer_worth`], [`dynamics`]) use exact
//!   arbitrary-precision rationals throughout — payoff tables, core checks,
//!   blocking coalitions, and coalition-structure dynamics are all decided by
//!   exact comparison, never by tolerance.
//! * **Fluid limits** ([`fluid_payoffs`], [`dtn_app`]) use IEEE doubles with
//!   adaptive quadrature: the Aumann-Drèze payoff integrals over random
//!   arrival orders, the χ (chi) outside-option value, the constrained cost
//!   minimization `M_Ω`, and the peer-indifference equilibrium between two
//!   providers.
//!
//! Cost curves are written in a small expression language ([`expr`]) and
//! shared by both regimes: the finite builder evaluates them at rational
//! grid points, the fluid solvers evaluate them as doubles.
//!
//! # Quick tour
//!
//! ```
//! use coalition_core::game_core::{self, Partition, ValueKind, WeightVector};
//! use coalition_core::peer_worth::{self, WorthTableSpec};
//! use coalition_core::rat;
//!
//! // The two-provider / two-peer worth table from the worked example:
//! // worths of single-provider coalitions; multi-provider worths follow
//! // from the optimal peer-to-provider assignment.
//! let spec = WorthTableSpec::new(
//!     ["p1", "p2"],
//!     ["n1", "n2"],
//!     [
//!         ("p1 n1", rat(5, 1)),
//!         ("p1 n2", rat(4, 1)),
//!         ("p1 n1 n2", rat(1, 1)),
//!         ("p2 n1", rat(4, 1)),
//!         ("p2 n2", rat(1, 1)),
//!         ("p2 n1 n2", rat(9, 1)),
//!     ],
//! ).unwrap();
//! let v = peer_worth::build_worth_from_table(&spec).unwrap();
//! let phi = game_core::shapley(&v).unwrap();
//! assert_eq!(phi[0], rat(7, 6)); // provider p1
//! ```

pub mod dtn_app;
pub mod dynamics;
pub mod expr;
pub mod fluid_payoffs;
pub mod game_core;
pub mod peer_worth;

pub use expr::CostCurve;
pub use game_core::{
    Partition, PayoffVector, PlayerSet, Rational, Role, ValueKind, WeightVector, WorthFunction,
};

use num::BigRational;
use num_traits::FromPrimitive;

/// Shorthand rational constructor: `rat(7, 6)` is 7/6.
///
/// Panics if `den == 0`.
pub fn rat(num: i64, den: i64) -> Rational {
    assert!(den != 0, "rational with zero denominator");
    BigRational::new(num.into(), den.into())
}

/// Parse a rational from text: `"5"`, `"-7/6"`, or a decimal like `"1.25"`.
pub fn parse_rational(text: &str) -> Result<Rational, CoreError> {
    let t = text.trim();
    if t.is_empty() {
        return Err(CoreError::invalid("empty rational literal"));
    }
    if let Some((n, d)) = t.split_once('/') {
        let num: num::BigInt = n
            .trim()
            .parse()
            .map_err(|_| CoreError::invalid(format!("bad numerator in `{t}`")))?;
        let den: num::BigInt = d
            .trim()
            .parse()
            .map_err(|_| CoreError::invalid(format!("bad denominator in `{t}`")))?;
        if den == 0.into() {
            return Err(CoreError::invalid(format!("zero denominator in `{t}`")));
        }
        return Ok(BigRational::new(num, den));
    }
    if let Some(rest) = t.strip_prefix('-') {
        return Ok(-parse_rational(rest)?);
    }
    if let Some((int, frac)) = t.split_once('.') {
        let int = if int.is_empty() { "0" } else { int };
        let digits = format!("{int}{frac}");
        let num: num::BigInt = digits
            .parse()
            .map_err(|_| CoreError::invalid(format!("bad decimal `{t}`")))?;
        let den = num::BigInt::from(10u8).pow(frac.len() as u32);
        return Ok(BigRational::new(num, den));
    }
    let num: num::BigInt = t
        .parse()
        .map_err(|_| CoreError::invalid(format!("bad integer `{t}`")))?;
    Ok(BigRational::from(num))
}

/// Round a finite double to a rational with `sig` significant decimal digits.
///
/// Used when a cost curve cannot be evaluated exactly (e.g. it contains
/// `sqrt` or a fractional power) but a finite-game worth table needs a
/// rational value.
pub fn rational_from_f64_sig(value: f64, sig: u32) -> Result<Rational, CoreError> {
    if !value.is_finite() {
        return Err(CoreError::numerical(format!(
            "cannot convert non-finite value {value} to a rational"
        )));
    }
    if value == 0.0 {
        return Ok(Rational::from_integer(0.into()));
    }
    let sig = sig.max(1) as i32;
    // value = m * 10^e with 1 <= |m| < 10; keep `sig` digits of m.
    let e = value.abs().log10().floor() as i32;
    let shift = sig - 1 - e;
    let scaled = value * 10f64.powi(shift);
    let mantissa = scaled.round();
    let m = BigRational::from_f64(mantissa)
        .ok_or_else(|| CoreError::numerical("mantissa conversion failed".to_string()))?;
    let ten = BigRational::from_integer(10.into());
    let factor = if shift >= 0 {
        ten.pow(shift)
    } else {
        ten.pow(-shift)
    };
    Ok(if shift >= 0 { m / factor } else { m * factor })
}

/// Error categories map onto the CLI exit codes: input errors (2),
/// capacity errors (3), numerical errors (4).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Malformed input: syntax, unknown names, structural violations,
    /// domain errors in curve evaluation.
    Input,
    /// A configured size limit was exceeded.
    Capacity,
    /// A numerical procedure failed to reach its tolerance.
    Numerical,
}

/// Crate-wide error type.
#[derive(Debug, Clone, thiserror::Error)]
pub enum CoreError {
    /// Expression syntax error, with a byte offset into the source.
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    /// An identifier that is neither `x` nor a bound parameter.
    #[error("unknown identifier `{name}`")]
    UnknownIdentifier { name: String },
    /// Evaluation outside a function's domain (ln of a non-positive value,
    /// fractional power of a negative base, division by zero, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// Structurally invalid input (bad partition, negative weight, ...).
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A size limit was exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// A numerical routine failed.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Adaptive quadrature hit its depth limit; carries the best estimate.
    #[error(
        "quadrature did not converge: estimate {estimate}, estimated error {error:e} > tolerance {tol:e}"
    )]
    Quadrature { estimate: f64, error: f64, tol: f64 },
}

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::Invalid(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        CoreError::Domain(msg.into())
    }
    pub fn capacity(msg: impl Into<String>) -> Self {
        CoreError::Capacity(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        CoreError::Numerical(msg.into())
    }

    /// Which CLI exit-code category this error belongs to.
    pub fn category(&self) -> ErrorCategory {
        match self {
            CoreError::Syntax { .. }
            | CoreError::UnknownIdentifier { .. }
            | CoreError::Domain(_)
            | CoreError::Invalid(_) => ErrorCategory::Input,
            CoreError::Capacity(_) => ErrorCategory::Capacity,
            CoreError::Numerical(_) | CoreError::Quadrature { .. } => ErrorCategory::Numerical,
        }
    }
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
