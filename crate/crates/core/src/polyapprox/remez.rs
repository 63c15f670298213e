use super::{ApproxError, RealPoly};

/// Tuning knobs of the exchange iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RemezOptions {
    pub max_iterations: usize,
    /// Stop once `(max|e| - |E|) / max|e|` falls below this.
    pub tolerance: f64,
    /// Grid used to locate error extrema in each iteration.
    pub search_grid: usize,
}

impl Default for RemezOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-10,
            search_grid: 20_001,
        }
    }
}

/// Outcome of a Remez run.
#[derive(Clone, Debug, PartialEq)]
pub struct MinimaxFit {
    pub poly: RealPoly,
    /// Final reference: `degree + 2` points where the error alternates.
    pub reference: Vec<f64>,
    /// Signed error `f - p` at the reference points.
    pub reference_errors: Vec<f64>,
    /// `|E|` of the last levelled solve.
    pub levelled_error: f64,
    pub iterations: usize,
}

/// Degree-`degree` minimax approximation of `f` on `[-a, a]`.
pub fn minimax_fit(f: impl Fn(f64) -> f64, degree: usize, a: f64) -> Result<MinimaxFit, ApproxError> {
    minimax_fit_with(f, degree, -a, a, RemezOptions::default())
}

pub fn minimax_fit_with(
    f: impl Fn(f64) -> f64,
    degree: usize,
    lo: f64,
    hi: f64,
    opts: RemezOptions,
) -> Result<MinimaxFit, ApproxError> {
    if !(hi > lo) {
        return Err(ApproxError::Config(format!("empty interval [{lo}, {hi}]")));
    }
    let pts = degree + 2;
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    // First n + 2 of the n + 3 Chebyshev extrema: a symmetric start would pin
    // the levelled error to zero for even functions on symmetric intervals.
    let mut reference: Vec<f64> = (0..pts)
        .map(|i| mid - half * (std::f64::consts::PI * i as f64 / pts as f64).cos())
        .collect();
    let mut last = (0.0, 0.0);
    for iter in 1..=opts.max_iterations {
        let (poly, levelled) = levelled_solve(&f, &reference, degree, mid, half)?;
        let err = |x: f64| f(x) - poly.eval(x);
        let extrema = alternating_extrema(&err, lo, hi, opts.search_grid);
        let max = extrema.iter().map(|&(_, e)| e.abs()).fold(0.0, f64::max);
        last = (levelled.abs(), max);
        let scale = reference.iter().map(|&x| f(x).abs()).fold(1e-300, f64::max);
        let done = max <= 1e-14 * scale || (max - levelled.abs()) <= opts.tolerance * max;
        if done {
            let reference_errors = reference.iter().map(|&x| err(x)).collect();
            return Ok(MinimaxFit {
                poly,
                reference,
                reference_errors,
                levelled_error: levelled.abs(),
                iterations: iter,
            });
        }
        if extrema.len() < pts {
            break;
        }
        // n + 2 consecutive alternating extrema that include the global maximum
        let imax = extrema
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .1.abs().total_cmp(&y.1 .1.abs()))
            .map(|(i, _)| i)
            .unwrap();
        let start = imax.saturating_sub(pts - 1).min(extrema.len() - pts);
        reference = extrema[start..start + pts].iter().map(|&(x, _)| x).collect();
    }
    Err(ApproxError::NoConvergence {
        iterations: opts.max_iterations,
        levelled: last.0,
        max: last.1,
    })
}

/// Solve `p(x_i) + (-1)^i E = f(x_i)` in the normalized variable
/// `t = (x - mid) / half` and convert back to powers of `x`.
fn levelled_solve(
    f: &impl Fn(f64) -> f64,
    reference: &[f64],
    degree: usize,
    mid: f64,
    half: f64,
) -> Result<(RealPoly, f64), ApproxError> {
    let m = degree + 2;
    let mut a = vec![vec![0.0; m + 1]; m];
    for (i, &x) in reference.iter().enumerate() {
        let t = (x - mid) / half;
        let mut pw = 1.0;
        for j in 0..=degree {
            a[i][j] = pw;
            pw *= t;
        }
        a[i][degree + 1] = if i % 2 == 0 { 1.0 } else { -1.0 };
        a[i][m] = f(x);
    }
    let sol = gauss_solve(a)?;
    let in_t = &sol[..=degree];
    // p(x) = sum c_j ((x - mid)/half)^j, expanded by Horner in x
    let lin = [-mid / half, 1.0 / half];
    let mut coeffs = vec![0.0; degree + 1];
    for &c in in_t.iter().rev() {
        let mut next = vec![0.0; degree + 1];
        for (k, &v) in coeffs.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            next[k] += v * lin[0];
            if k < degree {
                next[k + 1] += v * lin[1];
            }
        }
        next[0] += c;
        coeffs = next;
    }
    Ok((RealPoly::new(coeffs), sol[degree + 1]))
}

fn gauss_solve(mut a: Vec<Vec<f64>>) -> Result<Vec<f64>, ApproxError> {
    let m = a.len();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-300 {
            return Err(ApproxError::Singular);
        }
        a.swap(col, piv);
        for r in col + 1..m {
            let factor = a[r][col] / a[col][col];
            for c in col..=m {
                a[r][c] -= factor * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][m] - s) / a[r][r];
    }
    Ok(x)
}

fn golden_max(g: &impl Fn(f64) -> f64, mut l: f64, mut r: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = r - INV_PHI * (r - l);
    let mut x2 = l + INV_PHI * (r - l);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..200 {
        if (r - l) <= 1e-15 * (1.0 + l.abs().max(r.abs())) {
            break;
        }
        if g1 < g2 {
            l = x1;
            x1 = x2;
            g1 = g2;
            x2 = l + INV_PHI * (r - l);
            g2 = g(x2);
        } else {
            r = x2;
            x2 = x1;
            g2 = g1;
            x1 = r - INV_PHI * (r - l);
            g1 = g(x1);
        }
    }
    if g1 >= g2 {
        (x1, g1)
    } else {
        (x2, g2)
    }
}

/// Local extrema of `e` on `[lo, hi]` (endpoints included), refined and then
/// merged so that consecutive signs alternate.
fn alternating_extrema(e: &impl Fn(f64) -> f64, lo: f64, hi: f64, grid: usize) -> Vec<(f64, f64)> {
    let step = (hi - lo) / (grid - 1) as f64;
    let xs: Vec<f64> = (0..grid).map(|i| if i == grid - 1 { hi } else { lo + step * i as f64 }).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| e(x)).collect();
    let mut found = Vec::new();
    found.push((lo, vs[0]));
    for k in 1..grid - 1 {
        let (p, c, n) = (vs[k - 1], vs[k], vs[k + 1]);
        let is_max = c >= p && c >= n && c > 0.0;
        let is_min = c <= p && c <= n && c < 0.0;
        if is_max || is_min {
            let s = if is_max { 1.0 } else { -1.0 };
            let (x, v) = golden_max(&|x| s * e(x), xs[k - 1], xs[k + 1]);
            found.push((x, s * v));
        }
    }
    found.push((hi, vs[grid - 1]));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(found.len());
    for (x, v) in found {
        if v == 0.0 {
            continue;
        }
        match merged.last_mut() {
            Some(last) if last.1.signum() == v.signum() => {
                if v.abs() > last.1.abs() {
                    *last = (x, v);
                }
            }
            _ => merged.push((x, v)),
        }
    }
    merged
}

/// `max |f - p|` on `[-a, a]`: dense grid of `grid` points, then golden-section
/// refinement around every grid-local maximum within 10% of the largest.
pub fn max_error(f: impl Fn(f64) -> f64, p: impl Fn(f64) -> f64, a: f64, grid: usize) -> f64 {
    let grid = grid.max(3);
    let d = |x: f64| (f(x) - p(x)).abs();
    let step = 2.0 * a / (grid - 1) as f64;
    let xs: Vec<f64> = (0..grid).map(|i| if i == grid - 1 { a } else { -a + step * i as f64 }).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| d(x)).collect();
    let top = vs.iter().copied().fold(0.0, f64::max);
    let mut best = top;
    for k in 1..grid - 1 {
        if vs[k] >= vs[k - 1] && vs[k] >= vs[k + 1] && vs[k] >= 0.9 * top && vs[k] > 0.0 {
            best = best.max(golden_max(&d, xs[k - 1], xs[k + 1]).1);
        }
    }
    best
}
