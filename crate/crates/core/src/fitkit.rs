//! Weighted Gaussian dip and anti-dip fitting.
//!
//! The model is `y = b + d * exp(-4 ln2 (x - c)^2 / w^2)` with `w` the FWHM.
//! A negative `d` is a dip, a positive one an anti-dip. Parameters are found
//! by Levenberg-Marquardt iteration on an internally rescaled problem
//! (delays centered and scaled to order one, values divided by their
//! largest magnitude) so that the same tolerances work for probabilities and
//! for raw counts, and for picosecond features expressed in seconds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Minimum number of samples accepted by the fitter.
pub const MIN_POINTS: usize = 8;
/// Relative cost change that ends the iteration.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 200;

/// `4 ln 2`, the FWHM form of the Gaussian exponent.
fn four_ln2<T: Scalar>() -> T {
    T::lit(4.0) * T::LN_2()
}

/// Parameters of one Gaussian feature on a constant baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianParams<T> {
    pub baseline: T,
    pub depth: T,
    pub center: T,
    pub fwhm: T,
}

impl<T: Scalar> GaussianParams<T> {
    fn to_array(self) -> [T; 4] {
        [self.baseline, self.depth, self.center, self.fwhm]
    }

    fn from_array(p: [T; 4]) -> Self {
        Self {
            baseline: p[0],
            depth: p[1],
            center: p[2],
            fwhm: p[3],
        }
    }

    pub fn visibility(&self) -> T {
        self.depth.abs() / self.baseline
    }
}

/// Model value at `x`.
pub fn gaussian_feature<T: Scalar>(x: T, p: &GaussianParams<T>) -> T {
    let u = (x - p.center) / p.fwhm;
    p.baseline + p.depth * (-four_ln2::<T>() * u * u).exp()
}

/// Analytic partial derivatives with respect to
/// `(baseline, depth, center, fwhm)`.
pub fn gaussian_feature_gradient<T: Scalar>(x: T, p: &GaussianParams<T>) -> [T; 4] {
    let k = four_ln2::<T>();
    let dx = x - p.center;
    let u = dx / p.fwhm;
    let g = (-k * u * u).exp();
    let two = T::lit(2.0);
    [
        T::one(),
        g,
        p.depth * g * two * k * dx / (p.fwhm * p.fwhm),
        p.depth * g * two * k * dx * dx / (p.fwhm * p.fwhm * p.fwhm),
    ]
}

/// Per-point weights applied to squared residuals.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Weights<T> {
    /// Equal weights; the natural choice for model probabilities.
    #[default]
    Uniform,
    /// `1/max(y, 1)` for count data.
    Poisson,
    Custom(Vec<T>),
}

impl<T: Scalar> Weights<T> {
    fn resolve(&self, ys: &[T]) -> Result<Vec<T>> {
        match self {
            Weights::Uniform => Ok(vec![T::one(); ys.len()]),
            Weights::Poisson => Ok(ys.iter().map(|&y| T::one() / y.max(T::one())).collect()),
            Weights::Custom(w) => {
                if w.len() != ys.len() {
                    return Err(Error::usage(format!("{} weights for {} samples", w.len(), ys.len())));
                }
                if w.iter().any(|&x| !(x >= T::zero() && x.is_finite())) {
                    return Err(Error::domain("weights must be finite and non-negative"));
                }
                Ok(w.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

/// One-sigma parameter uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FitSigma<T> {
    pub baseline: T,
    pub depth: T,
    #[serde(rename = "center_s")]
    pub center: T,
    #[serde(rename = "fwhm_s")]
    pub fwhm: T,
    pub visibility: T,
}

/// Result of [`fit_gaussian_feature`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianDipFit<T> {
    pub baseline: T,
    pub depth: T,
    #[serde(rename = "center_s")]
    pub center: T,
    #[serde(rename = "fwhm_s")]
    pub fwhm: T,
    pub visibility: T,
    pub sigma: FitSigma<T>,
    pub converged: bool,
    pub iterations: usize,
    /// Weighted sum of squared residuals in the units of the input values.
    pub residual: T,
    /// Set when noise pushes the visibility above one.
    pub overshoot: bool,
}

impl<T: Scalar> GaussianDipFit<T> {
    pub fn params(&self) -> GaussianParams<T> {
        GaussianParams {
            baseline: self.baseline,
            depth: self.depth,
            center: self.center,
            fwhm: self.fwhm,
        }
    }

    pub fn is_dip(&self) -> bool {
        self.depth < T::zero()
    }
}

impl<T: Scalar + Serialize> GaussianDipFit<T> {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}

fn check_inputs<T: Scalar>(xs: &[T], ys: &[T]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::usage("delay and value arrays differ in length"));
    }
    if xs.len() < MIN_POINTS {
        return Err(Error::usage(format!(
            "need at least {MIN_POINTS} points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite sample"));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::usage("delays must be strictly increasing"));
    }
    Ok(())
}

fn median<T: Scalar>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::lit(2.0)
    }
}

/// Starting point for the fit, read directly off the data.
///
/// Flat or monotone data (no interior extremum) is rejected as degenerate.
pub fn initial_guess<T: Scalar>(xs: &[T], ys: &[T]) -> Result<GaussianParams<T>> {
    check_inputs(xs, ys)?;
    let n = ys.len();
    let k = ((n as f64 * 0.1).round() as usize).max(1);
    let baseline = median(ys[..k].iter().chain(&ys[n - k..]).copied().collect());

    let (idx, _) = ys
        .iter()
        .map(|&y| (y - baseline).abs())
        .enumerate()
        .fold(
            (0, T::neg_infinity()),
            |best, (i, d)| if d > best.1 { (i, d) } else { best },
        );
    let extremum = ys[idx];
    let depth = extremum - baseline;
    let scale = ys.iter().fold(T::zero(), |m, y| m.max(y.abs()));
    if !(depth.abs() > T::lit(1e-12) * scale) {
        return Err(Error::fit("flat data has no feature to fit", 0.0));
    }
    if idx == 0 || idx == n - 1 {
        return Err(Error::fit(
            "extremum at the scan edge; data is monotone or the feature is not covered",
            0.0,
        ));
    }

    let level = baseline + depth / T::lit(2.0);
    let beyond = |y: T| (y - level) * depth.signum() < T::zero();
    let cross = |a: usize, b: usize| xs[a] + (level - ys[a]) / (ys[b] - ys[a]) * (xs[b] - xs[a]);
    let right = (idx + 1..n).find(|&j| beyond(ys[j])).map(|j| cross(j - 1, j));
    let left = (0..idx).rev().find(|&j| beyond(ys[j])).map(|j| cross(j + 1, j));
    let fwhm = match (left, right) {
        (Some(l), Some(r)) if r > l => r - l,
        _ => (xs[n - 1] - xs[0]) / T::lit(4.0),
    };

    Ok(GaussianParams {
        baseline,
        depth,
        center: xs[idx],
        fwhm,
    })
}

/// Solves `a x = b` for a 4x4 system by Gaussian elimination with partial
/// pivoting; `None` when singular.
fn solve4<T: Scalar>(mut a: [[T; 4]; 4], mut b: [T; 4]) -> Option<[T; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if !(a[piv][col].abs() > T::zero()) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for c in col..4 {
                let v = a[col][c];
                a[row][c] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [T::zero(); 4];
    for row in (0..4).rev() {
        let mut s = b[row];
        for c in row + 1..4 {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn invert4<T: Scalar>(a: [[T; 4]; 4]) -> Option<[[T; 4]; 4]> {
    let mut inv = [[T::zero(); 4]; 4];
    for j in 0..4 {
        let mut e = [T::zero(); 4];
        e[j] = T::one();
        let col = solve4(a, e)?;
        for i in 0..4 {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

struct Problem<'a, T> {
    us: &'a [T],
    vs: &'a [T],
    ws: &'a [T],
}

impl<T: Scalar> Problem<'_, T> {
    fn cost(&self, p: &GaussianParams<T>) -> T {
        self.us
            .iter()
            .zip(self.vs)
            .zip(self.ws)
            .fold(T::zero(), |acc, ((&u, &v), &w)| {
                let r = v - gaussian_feature(u, p);
                acc + w * r * r
            })
    }

    /// Normal matrix `J^T W J` and gradient `J^T W r`.
    fn normal_equations(&self, p: &GaussianParams<T>) -> ([[T; 4]; 4], [T; 4]) {
        let mut a = [[T::zero(); 4]; 4];
        let mut g = [T::zero(); 4];
        for ((&u, &v), &w) in self.us.iter().zip(self.vs).zip(self.ws) {
            let jac = gaussian_feature_gradient(u, p);
            let r = v - gaussian_feature(u, p);
            for i in 0..4 {
                g[i] += w * jac[i] * r;
                for j in 0..4 {
                    a[i][j] += w * jac[i] * jac[j];
                }
            }
        }
        (a, g)
    }
}

/// Fits with default options.
pub fn fit_gaussian_feature<T: Scalar>(xs: &[T], ys: &[T], weights: &Weights<T>) -> Result<GaussianDipFit<T>> {
    fit_gaussian_feature_with(xs, ys, weights, &FitOptions::default())
}

pub fn fit_gaussian_feature_with<T: Scalar>(
    xs: &[T],
    ys: &[T],
    weights: &Weights<T>,
    options: &FitOptions,
) -> Result<GaussianDipFit<T>> {
    let ws = weights.resolve(ys)?;
    let guess = initial_guess(xs, ys)?;
    let n = xs.len();

    // rescale: u = (x - x0)/sx, v = y/sy
    let x0 = (xs[0] + xs[n - 1]) / T::lit(2.0);
    let sx = (xs[n - 1] - xs[0]) / T::lit(2.0);
    let sy = ys.iter().fold(T::zero(), |m, y| m.max(y.abs()));
    let us: Vec<T> = xs.iter().map(|&x| (x - x0) / sx).collect();
    let vs: Vec<T> = ys.iter().map(|&y| y / sy).collect();
    let wmax = ws.iter().fold(T::zero(), |m, w| m.max(*w));
    if !(wmax > T::zero()) {
        return Err(Error::domain("all weights are zero"));
    }
    let wn: Vec<T> = ws.iter().map(|&w| w / wmax).collect();
    let prob = Problem {
        us: &us,
        vs: &vs,
        ws: &wn,
    };

    let mut p = GaussianParams {
        baseline: guess.baseline / sy,
        depth: guess.depth / sy,
        center: (guess.center - x0) / sx,
        fwhm: guess.fwhm / sx,
    };
    let mut cost = prob.cost(&p);
    let mut lambda = T::lit(1e-3);
    let tol = T::lit(options.tolerance);
    let floor = T::epsilon() * T::epsilon() * wn.iter().zip(&vs).fold(T::zero(), |a, (&w, &v)| a + w * v * v);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        if cost <= floor {
            converged = true;
            break;
        }
        let (a, g) = prob.normal_equations(&p);
        let mut accepted = false;
        while lambda < T::lit(1e20) {
            let mut damped = a;
            for i in 0..4 {
                damped[i][i] += lambda * a[i][i].max(T::lit(1e-30));
            }
            let trial = solve4(damped, g).map(|d| {
                let q = p.to_array();
                GaussianParams::from_array([q[0] + d[0], q[1] + d[1], q[2] + d[2], q[3] + d[3]])
            });
            if let Some(trial) = trial.filter(|t| t.fwhm > T::zero()) {
                let c = prob.cost(&trial);
                if c < cost {
                    let change = (cost - c) / cost;
                    p = trial;
                    cost = c;
                    lambda = (lambda / T::lit(10.0)).max(T::lit(1e-12));
                    accepted = true;
                    if change < tol {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= T::lit(10.0);
        }
        if !accepted {
            // no downhill step at any damping: stationary point
            converged = true;
        }
        if converged {
            break;
        }
    }

    let residual = cost * sy * sy * wmax;
    if !converged {
        return Err(Error::fit(
            format!("no convergence after {iterations} iterations"),
            residual.to_f64_lossy(),
        ));
    }
    if !(p.baseline > T::zero()) {
        return Err(Error::fit("fitted baseline is not positive", residual.to_f64_lossy()));
    }

    // covariance in rescaled units, scaled by the reduced chi-square
    let (a, _) = prob.normal_equations(&p);
    let dof = T::from_usize_lossy(n - 4);
    let cov = invert4(a).ok_or_else(|| Error::fit("singular normal matrix at solution", residual.to_f64_lossy()))?;
    let s2 = cost / dof;
    let scales = [sy, sy, sx, sx];
    let var = |i: usize, j: usize| cov[i][j] * s2 * scales[i] * scales[j];

    let out = GaussianParams {
        baseline: p.baseline * sy,
        depth: p.depth * sy,
        center: p.center * sx + x0,
        fwhm: p.fwhm * sx,
    };
    let visibility = out.visibility();
    // dV/db = -|d|/b^2, dV/dd = sign(d)/b
    let jb = -out.depth.abs() / (out.baseline * out.baseline);
    let jd = out.depth.signum() / out.baseline;
    let var_v = jb * jb * var(0, 0) + T::lit(2.0) * jb * jd * var(0, 1) + jd * jd * var(1, 1);
    let sd = |v: T| v.max(T::zero()).sqrt();

    Ok(GaussianDipFit {
        baseline: out.baseline,
        depth: out.depth,
        center: out.center,
        fwhm: out.fwhm,
        visibility,
        sigma: FitSigma {
            baseline: sd(var(0, 0)),
            depth: sd(var(1, 1)),
            center: sd(var(2, 2)),
            fwhm: sd(var(3, 3)),
            visibility: sd(var_v),
        },
        converged,
        iterations,
        residual,
        overshoot: visibility > T::one(),
    })
}
