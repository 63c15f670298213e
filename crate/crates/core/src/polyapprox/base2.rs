use std::fmt;

use super::remez::{max_error, minimax_fit, MinimaxFit};
use super::{ApproxError, RealPoly};

/// Coefficients at or below this magnitude are treated as exact zeros.
const ZERO_EPS: f64 = 1e-12;

/// Polynomial whose coefficients are `sign_i * 2^exponent_i`, ascending degree.
/// A zero sign marks an exactly zero coefficient (its exponent is ignored).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Base2Poly {
    pub exponents: Vec<i32>,
    pub signs: Vec<i8>,
}

impl Base2Poly {
    pub fn new(exponents: Vec<i32>, signs: Vec<i8>) -> Self {
        assert_eq!(exponents.len(), signs.len());
        let exponents = exponents
            .iter()
            .zip(&signs)
            .map(|(&e, &s)| if s == 0 { 0 } else { e })
            .collect();
        Self { exponents, signs }
    }

    /// All-positive coefficients given highest degree first, as printed in
    /// `2^-3 x^2 + 2^-1 x + 2^-4`.
    pub fn from_exponents_desc(exps: &[i32]) -> Self {
        let exponents: Vec<i32> = exps.iter().rev().copied().collect();
        let signs = vec![1; exponents.len()];
        Self::new(exponents, signs)
    }

    pub fn degree(&self) -> usize {
        self.exponents.len().saturating_sub(1)
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.signs[i] as f64 * 2f64.powi(self.exponents[i])
    }

    pub fn to_real(&self) -> RealPoly {
        RealPoly::new((0..self.exponents.len()).map(|i| self.coeff(i)).collect())
    }

    pub fn eval(&self, x: f64) -> f64 {
        (0..self.exponents.len()).rev().fold(0.0, |acc, i| acc * x + self.coeff(i))
    }

    pub fn exponents_desc(&self) -> Vec<i32> {
        self.exponents.iter().rev().copied().collect()
    }

    /// Sum of `|exponent|` over nonzero coefficients, the first tie-breaker.
    pub fn exponent_weight(&self) -> i64 {
        self.exponents
            .iter()
            .zip(&self.signs)
            .filter(|(_, &s)| s != 0)
            .map(|(&e, _)| e.unsigned_abs() as i64)
            .sum()
    }
}

impl fmt::Display for Base2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for i in (0..self.exponents.len()).rev() {
            let s = self.signs[i];
            if s == 0 {
                continue;
            }
            let sign = match (first, s < 0) {
                (true, true) => "-",
                (true, false) => "",
                (false, true) => " - ",
                (false, false) => " + ",
            };
            let var = match i {
                0 => String::new(),
                1 => "x".into(),
                _ => format!("x^{i}"),
            };
            write!(f, "{sign}2^{}{var}", self.exponents[i])?;
            first = false;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// Nearest signed power of two to each coefficient. Ties (exactly `1.5 * 2^k`)
/// go to the smaller power; zeros stay zero.
pub fn base2_round(p: &RealPoly) -> Base2Poly {
    let mut exps = Vec::with_capacity(p.coeffs.len());
    let mut signs = Vec::with_capacity(p.coeffs.len());
    for &c in &p.coeffs {
        if c.abs() <= ZERO_EPS {
            exps.push(0);
            signs.push(0);
            continue;
        }
        let k = c.abs().log2().floor() as i32;
        let (lo, hi) = (2f64.powi(k), 2f64.powi(k + 1));
        let e = if c.abs() - lo <= hi - c.abs() { k } else { k + 1 };
        exps.push(e);
        signs.push(if c < 0.0 { -1 } else { 1 });
    }
    Base2Poly::new(exps, signs)
}

/// Bounded polyhedron: `lower_i <= q(x_i) <= upper_i` for every point.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanConstraints {
    pub points: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ScanConstraints {
    /// `f(x_i) -/+ K` at the equioscillation points of the minimax fit.
    /// Every `q` with `max|f - q| <= K` lies inside, so the filter never
    /// removes a candidate at least as good as the rounded polynomial.
    pub fn from_fit(f: &impl Fn(f64) -> f64, fit: &MinimaxFit, bound: f64) -> Self {
        let points = fit.reference.clone();
        let lower = points.iter().map(|&x| f(x) - bound).collect();
        let upper = points.iter().map(|&x| f(x) + bound).collect();
        Self { points, lower, upper }
    }

    pub fn validate(&self) -> Result<(), ApproxError> {
        let mut xs = self.points.clone();
        xs.sort_by(f64::total_cmp);
        if xs.windows(2).any(|w| w[0] == w[1]) {
            return Err(ApproxError::Config("constraint points are not distinct".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| l > u) {
            return Err(ApproxError::Config("constraint with lower > upper".into()));
        }
        Ok(())
    }

    pub fn admits(&self, q: &Base2Poly) -> bool {
        self.points
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&x, (&l, &u))| {
                let v = q.eval(x);
                l <= v && v <= u
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub best: Base2Poly,
    pub error: f64,
    pub bound: f64,
    pub constraints: ScanConstraints,
    /// Exponent tuples enumerated and the number passing the constraints.
    pub enumerated: usize,
    pub feasible: usize,
}

/// Fit, then scan: see [`base2_scan_with`].
pub fn base2_scan(
    f: impl Fn(f64) -> f64,
    degree: usize,
    a: f64,
    bound: Option<f64>,
    radius: i32,
) -> Result<ScanResult, ApproxError> {
    let fit = minimax_fit(&f, degree, a)?;
    base2_scan_with(f, &fit, a, bound, radius, 100_001)
}

/// Exhaustive search over exponent tuples within `radius` of the rounded fit
/// (signs fixed, zeros kept zero), filtered by the constraint polyhedron and
/// ranked by `max_error`. Ties within a relative `1e-12` go to the smaller
/// exponent weight, then to the lexicographically smaller tuple (highest
/// degree first). `bound = None` uses `K = delta(f, p_hat)`.
pub fn base2_scan_with(
    f: impl Fn(f64) -> f64,
    fit: &MinimaxFit,
    a: f64,
    bound: Option<f64>,
    radius: i32,
    grid: usize,
) -> Result<ScanResult, ApproxError> {
    if radius < 0 {
        return Err(ApproxError::Config("negative search radius".into()));
    }
    let rounded = base2_round(&fit.poly);
    let bound = match bound {
        Some(k) => k,
        None => max_error(&f, |x| rounded.eval(x), a, grid),
    };
    let constraints = ScanConstraints::from_fit(&f, fit, bound);
    constraints.validate()?;

    let free: Vec<usize> = (0..rounded.signs.len()).filter(|&i| rounded.signs[i] != 0).collect();
    let width = (2 * radius + 1) as usize;
    let total = width.pow(free.len() as u32);
    let mut best: Option<(Base2Poly, f64)> = None;
    let mut feasible = 0;
    for idx in 0..total {
        let mut cand = rounded.clone();
        let mut rest = idx;
        for &i in &free {
            cand.exponents[i] += (rest % width) as i32 - radius;
            rest /= width;
        }
        if !constraints.admits(&cand) {
            continue;
        }
        feasible += 1;
        let err = max_error(&f, |x| cand.eval(x), a, grid);
        let better = match &best {
            None => true,
            Some((b, be)) => {
                let tol = 1e-12 * be.max(err).max(1e-300);
                if (err - be).abs() <= tol {
                    (cand.exponent_weight(), cand.exponents_desc()) < (b.exponent_weight(), b.exponents_desc())
                } else {
                    err < *be
                }
            }
        };
        if better {
            best = Some((cand, err));
        }
    }
    let (best, error) = best.ok_or(ApproxError::Infeasible { bound, radius })?;
    Ok(ScanResult {
        best,
        error,
        bound,
        constraints,
        enumerated: total,
        feasible,
    })
}
