//! Minimax approximation of the Swish activation and its quantization to
//! polynomials with power-of-two coefficients.

mod base2;
mod remez;

use std::fmt;

use thiserror::Error;

pub use base2::{base2_round, base2_scan, base2_scan_with, Base2Poly, ScanConstraints, ScanResult};
pub use remez::{max_error, minimax_fit, minimax_fit_with, MinimaxFit, RemezOptions};

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error("Remez exchange did not converge after {iterations} iterations (levelled error {levelled:e}, max error {max:e})")]
    NoConvergence {
        iterations: usize,
        levelled: f64,
        max: f64,
    },
    #[error("singular interpolation system")]
    Singular,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no base-2 polynomial satisfies the constraints; increase the bound K (now {bound:e}) or the radius (now {radius})")]
    Infeasible { bound: f64, radius: i32 },
}

/// `x * sigmoid(x)`, evaluated without overflow for large `|x|`.
pub fn swish(x: f64) -> f64 {
    if x >= 0.0 {
        x / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        x * e / (1.0 + e)
    }
}

/// Derivative of [`swish`].
pub fn swish_prime(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s + x * s * (1.0 - s)
}

/// Real polynomial, coefficients in ascending degree order.
#[derive(Clone, Debug, PartialEq)]
pub struct RealPoly {
    pub coeffs: Vec<f64>,
}

impl RealPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| i as f64 * c)
                .collect(),
        )
    }

    /// Coefficients from the highest degree down.
    pub fn coeffs_desc(&self) -> Vec<f64> {
        self.coeffs.iter().rev().copied().collect()
    }
}

impl fmt::Display for RealPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .map(|(i, c)| match i {
                0 => format!("{c:.9}"),
                1 => format!("{c:.9}x"),
                _ => format!("{c:.9}x^{i}"),
            })
            .collect();
        f.write_str(&terms.join(" + "))
    }
}

/// Approximation problem on `[-a, a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ApproxConfig {
    pub half_width: f64,
    pub degree: usize,
    /// Points of the dense error grid.
    pub grid: usize,
    /// Constraint bound `K`; `None` uses the error of the rounded polynomial.
    pub bound: Option<f64>,
    pub radius: i32,
}

/// Interval half-width at which the degree-2 Swish fit matches the published
/// coefficients.
pub const CALIBRATED_HALF_WIDTH: f64 = 4.0;

impl Default for ApproxConfig {
    fn default() -> Self {
        Self {
            half_width: CALIBRATED_HALF_WIDTH,
            degree: 2,
            grid: 100_001,
            bound: None,
            radius: 3,
        }
    }
}

impl ApproxConfig {
    pub fn validate(&self) -> Result<(), ApproxError> {
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(ApproxError::Config(format!("half-width {} must be positive", self.half_width)));
        }
        if self.degree > 4 {
            return Err(ApproxError::Config(format!("degree {} above 4", self.degree)));
        }
        if self.grid < 100_000 {
            return Err(ApproxError::Config(format!("grid of {} points is below 1e5", self.grid)));
        }
        if self.radius < 0 {
            return Err(ApproxError::Config("negative search radius".into()));
        }
        Ok(())
    }
}

/// Published degree-2 fit, highest degree first.
pub const PUBLISHED_P: [f64; 3] = [0.12050344, 0.5, 0.153613744];
/// Published base-2 exponents, highest degree first.
pub const PUBLISHED_P_STAR: [i32; 3] = [-3, -1, -4];

/// Candidate half-widths `2.0, 2.5, ..., 6.0`.
pub fn calibration_grid() -> Vec<f64> {
    (0..=8).map(|i| 2.0 + 0.5 * i as f64).collect()
}

/// Fit the degree-2 Swish minimax on each candidate interval and return the
/// half-width whose quadratic and constant coefficients are closest (summed
/// relative distance) to `PUBLISHED_P`, together with all fits.
pub fn calibrate_interval(candidates: &[f64]) -> Result<(f64, Vec<(f64, RealPoly)>), ApproxError> {
    let mut fits = Vec::with_capacity(candidates.len());
    for &a in candidates {
        fits.push((a, minimax_fit(swish, 2, a)?.poly));
    }
    let dist = |p: &RealPoly| {
        ((p.coeffs[2] - PUBLISHED_P[0]) / PUBLISHED_P[0]).abs() + ((p.coeffs[0] - PUBLISHED_P[2]) / PUBLISHED_P[2]).abs()
    };
    let best = fits
        .iter()
        .min_by(|x, y| dist(&x.1).total_cmp(&dist(&y.1)))
        .map(|(a, _)| *a)
        .ok_or_else(|| ApproxError::Config("no candidate intervals".into()))?;
    Ok((best, fits))
}

/// Everything the `approx` report prints, including the comparison against
/// the published base-2 polynomial.
#[derive(Clone, Debug)]
pub struct ApproxReport {
    pub half_width: f64,
    pub fit: MinimaxFit,
    pub fit_error: f64,
    pub rounded: Base2Poly,
    pub rounded_error: f64,
    pub scan: ScanResult,
    pub published: Base2Poly,
    pub published_error: f64,
}

impl ApproxReport {
    pub fn run(config: &ApproxConfig) -> Result<Self, ApproxError> {
        config.validate()?;
        let a = config.half_width;
        let fit = minimax_fit(swish, config.degree, a)?;
        let fit_error = max_error(swish, |x| fit.poly.eval(x), a, config.grid);
        let rounded = base2_round(&fit.poly);
        let rounded_error = max_error(swish, |x| rounded.eval(x), a, config.grid);
        let scan = base2_scan_with(swish, &fit, a, config.bound, config.radius, config.grid)?;
        let published = Base2Poly::from_exponents_desc(&PUBLISHED_P_STAR);
        let published_error = max_error(swish, |x| published.eval(x), a, config.grid);
        Ok(Self {
            half_width: a,
            fit,
            fit_error,
            rounded,
            rounded_error,
            scan,
            published,
            published_error,
        })
    }

    /// Does the scan reproduce the published exponents?
    pub fn matches_published(&self) -> bool {
        self.scan.best == self.published
    }

    /// `delta(f, p) <= delta(f, p*) <= delta(f, p_hat)` for the scanned `p*`.
    pub fn chain_holds(&self) -> bool {
        self.fit_error <= self.scan.error + 1e-12 && self.scan.error <= self.rounded_error + 1e-12
    }
}

impl fmt::Display for ApproxReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "interval        [-{0}, {0}]", self.half_width)?;
        writeln!(f, "minimax p       {}", self.fit.poly)?;
        writeln!(f, "  error         {:.9}", self.fit_error)?;
        writeln!(f, "  iterations    {}", self.fit.iterations)?;
        writeln!(f, "rounded p_hat   {}  exponents {:?}", self.rounded, self.rounded.exponents_desc())?;
        writeln!(f, "  error         {:.9}", self.rounded_error)?;
        writeln!(f, "scanned p*      {}  exponents {:?}", self.scan.best, self.scan.best.exponents_desc())?;
        writeln!(f, "  error         {:.9}", self.scan.error)?;
        writeln!(
            f,
            "  searched      {} tuples, {} feasible, bound K = {:.9}",
            self.scan.enumerated, self.scan.feasible, self.scan.bound
        )?;
        writeln!(f, "published p*    {}  exponents {:?}", self.published, self.published.exponents_desc())?;
        writeln!(f, "  error         {:.9}", self.published_error)?;
        if self.matches_published() {
            writeln!(f, "scan agrees with the published exponents")?;
        } else {
            writeln!(
                f,
                "discrepancy: scan prefers {:?} (error {:.6}) over published {:?} (error {:.6})",
                self.scan.best.exponents_desc(),
                self.scan.error,
                self.published.exponents_desc(),
                self.published_error
            )?;
        }
        write!(
            f,
            "ordering delta(f,p) <= delta(f,p*) <= delta(f,p_hat): {}",
            if self.chain_holds() { "holds" } else { "VIOLATED" }
        )
    }
}
