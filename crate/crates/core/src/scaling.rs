//! Finite-size scaling: renormalized singular observables, fidelity
//! susceptibility peak searches, log2-log2 power-law fits and data collapse.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::mf_observables;
use crate::model::{canonicalize, ModelParams};
use crate::spectrum::ExactSolver;

/// Universality exponent of the critical window, `N^{-nu}`.
pub const NU: f64 = 2.0 / 3.0;

/// Fewest grid points used before golden-section refinement.
pub const MIN_GRID_POINTS: usize = 64;
/// Abscissa tolerance of the peak refinement.
pub const PEAK_TOL: f64 = 1e-8;
const PEAK_BUDGET: usize = 200;

/// A singular observable `N^beta |gamma - gamma_c|^{-alpha}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingExponents {
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    /// `beta + alpha nu`, the power of `N` after renormalization.
    pub combined: f64,
}

impl ScalingExponents {
    pub fn new(alpha: f64, beta: f64, nu: f64) -> Self {
        ScalingExponents {
            alpha,
            beta,
            nu,
            combined: beta + alpha * nu,
        }
    }
}

/// Truncated susceptibility on the normal side, `(gamma - gamma_c)^{-2}`.
pub fn normal_side_exponents(nu: f64) -> ScalingExponents {
    ScalingExponents::new(2.0, 0.0, nu)
}

/// Truncated susceptibility on the deformed side, `N (gamma_c - gamma)^{-1/2}`.
pub fn deformed_side_exponents(nu: f64) -> ScalingExponents {
    ScalingExponents::new(0.5, 1.0, nu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Universality {
    pub nu: f64,
    /// Implied divergence of the susceptibility peak, `N^{2 nu}`.
    pub peak_exponent: f64,
}

/// Matches the renormalized powers of the two sides,
/// `beta_n + alpha_n nu = beta_d + alpha_d nu`.
pub fn solve_universality_exponent() -> Universality {
    let n = normal_side_exponents(0.0);
    let d = deformed_side_exponents(0.0);
    let nu = (d.beta - n.beta) / (n.alpha - d.alpha);
    Universality {
        nu,
        peak_exponent: normal_side_exponents(nu).combined,
    }
}

/// `value |N^nu (gamma - gamma_c)|^alpha`.
pub fn renormalize(value: f64, gamma: f64, gamma_c: f64, n_atoms: usize, alpha: f64, nu: f64) -> Result<f64> {
    if alpha == 0.0 {
        return Ok(value);
    }
    if gamma == gamma_c {
        return Err(Error::ScalingDomain { alpha });
    }
    let bracket = ((n_atoms as f64).powf(nu) * (gamma - gamma_c)).abs();
    Ok(value * bracket.powf(alpha))
}

/// Exact energy per atom minus the normal-phase regular part
/// `gamma_c / 2 + gamma_c / (2N)`.
pub fn singular_energy(p: &ModelParams, exact_e_gs: f64) -> f64 {
    let gc = p.gamma_c();
    exact_e_gs - (0.5 * gc + 0.5 * gc / p.n())
}

/// Exact excited fraction minus the mean-field branch value.
pub fn singular_ne(p: &ModelParams, exact_ne: f64) -> Result<f64> {
    let (c, _) = canonicalize(p)?;
    Ok(exact_ne - mf_observables(&c)?.n_e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    /// The upper end is approached but never evaluated.
    pub open_hi: bool,
}

impl Window {
    pub fn closed(lo: f64, hi: f64) -> Result<Self> {
        Self::check(Window {
            lo,
            hi,
            open_hi: false,
        })
    }

    pub fn open_above(lo: f64, hi: f64) -> Result<Self> {
        Self::check(Window {
            lo,
            hi,
            open_hi: true,
        })
    }

    fn check(w: Window) -> Result<Self> {
        if !(w.lo.is_finite() && w.hi.is_finite() && w.lo < w.hi) {
            return Err(Error::EmptyWindow { lo: w.lo, hi: w.hi });
        }
        Ok(w)
    }

    /// `[gamma_c - 0.5, gamma_c + 0.5]`, or `[gamma_c - 0.5, gamma_c)` on the
    /// special line where the peak is approached from below.
    pub fn default_for(p: &ModelParams, special_line: bool) -> Self {
        let gc = p.gamma_c();
        Window {
            lo: gc - 0.5,
            hi: if special_line { gc } else { gc + 0.5 },
            open_hi: special_line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub gamma_star: f64,
    pub value: f64,
    /// Set when the coarse maximum sits on a window edge.
    pub edge: Option<Edge>,
}

/// Maximum of `f` over the window: coarse grid of at least
/// [`MIN_GRID_POINTS`] points, then golden-section refinement between the
/// neighbours of the best grid point.
pub fn maximize_on_window<F>(f: F, window: Window, grid_points: usize) -> Result<Peak>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let n = grid_points.max(MIN_GRID_POINTS);
    let h = if window.open_hi {
        (window.hi - window.lo) / n as f64
    } else {
        (window.hi - window.lo) / (n - 1) as f64
    };
    let grid: Vec<f64> = (0..n).map(|i| window.lo + h * i as f64).collect();
    let values = grid.iter().map(|&g| f(g)).collect::<Result<Vec<f64>>>()?;

    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let edge = if best == 0 {
        Some(Edge::Lower)
    } else if best == n - 1 && !window.open_hi {
        Some(Edge::Upper)
    } else {
        None
    };
    let a = grid[best.saturating_sub(1)];
    let b = if best + 1 < n { grid[best + 1] } else { window.hi };
    let (gamma_star, value) = golden_max(&f, a, b, (grid[best], values[best]))?;
    if edge.is_none() && window.open_hi && window.hi - gamma_star <= PEAK_TOL {
        return Ok(Peak {
            gamma_star,
            value,
            edge: Some(Edge::Upper),
        });
    }
    Ok(Peak {
        gamma_star,
        value,
        edge,
    })
}

/// Golden-section maximization on `(a, b)` evaluating interior points only;
/// `seed` is a known point that the result must not fall below.
fn golden_max<F: Fn(f64) -> Result<f64>>(f: &F, mut a: f64, mut b: f64, seed: (f64, f64)) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..PEAK_BUDGET {
        if b - a <= PEAK_TOL {
            let mut best = seed;
            for (x, fx) in [(c, fc), (d, fd)] {
                if fx > best.1 {
                    best = (x, fx);
                }
            }
            return Ok(best);
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Err(Error::NoConvergence { iterations: PEAK_BUDGET })
}

/// Location and height of the exact susceptibility peak in `gamma_x`,
/// using the resolvent evaluator. `base` supplies everything but `gamma_x`.
pub fn find_chi_max(solver: &ExactSolver, base: &ModelParams, window: Window) -> Result<Peak> {
    maximize_on_window(
        |g| solver.chi_f_resolvent(&base.with_gamma_x(g)),
        window,
        MIN_GRID_POINTS,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept_log2: f64,
    /// `2^intercept_log2`.
    pub prefactor: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Unweighted least squares of `log2 value` against `log2 N`.
/// With `drop_smallest` the point with the smallest `N` is discarded first.
pub fn fit_power_law(points: &[(f64, f64)], drop_smallest: bool) -> Result<FitResult> {
    for &(n, value) in points {
        if !(n > 0.0 && value > 0.0) {
            return Err(Error::NonPositive { n, value });
        }
    }
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    if drop_smallest && !pts.is_empty() {
        let smallest = pts
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        pts.remove(smallest);
    }
    if pts.len() < 3 {
        return Err(Error::TooFewPoints(pts.len()));
    }

    let xy: Vec<(f64, f64)> = pts.iter().map(|&(n, v)| (n.log2(), v.log2())).collect();
    let m = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xy
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(FitResult {
        slope,
        intercept_log2: intercept,
        prefactor: intercept.exp2(),
        r_squared,
        n_points: xy.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignPoint {
    pub n_atoms: usize,
    pub gamma_x: f64,
    pub chi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapsedPoint {
    pub x: f64,
    pub y: f64,
    pub n_atoms: usize,
}

/// `(N^x_exp (gamma_x - gamma_c), chi / N^y_exp, N)` for every point.
pub fn collapse_data(campaign: &[CampaignPoint], x_exp: f64, y_exp: f64, gamma_c: f64) -> Vec<CollapsedPoint> {
    campaign
        .iter()
        .map(|c| {
            let n = c.n_atoms as f64;
            CollapsedPoint {
                x: n.powf(x_exp) * (c.gamma_x - gamma_c),
                y: c.chi / n.powf(y_exp),
                n_atoms: c.n_atoms,
            }
        })
        .collect()
}

/// Runs `f` on a worker pool of `jobs` threads (all cores when `None`).
pub fn with_pool<R, F>(jobs: Option<usize>, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParams(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Evaluates `f` over `items` in parallel; results keep the input order.
pub fn par_map<T, R, F>(jobs: Option<usize>, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    with_pool(jobs, || items.par_iter().map(&f).collect::<Result<Vec<R>>>())?
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakRow {
    pub n_atoms: usize,
    pub peak: Peak,
}

/// Peak search for every `N`. On the special line `gamma_y` is pinned to
/// `gamma_c` and the default window is open at `gamma_c`.
pub fn peak_campaign(
    solver: &ExactSolver,
    base: &ModelParams,
    n_list: &[usize],
    window: Option<Window>,
    special_line: bool,
    jobs: Option<usize>,
) -> Result<Vec<PeakRow>> {
    let mut base = *base;
    if special_line {
        base.gamma_y = base.gamma_c();
    }
    let window = window.unwrap_or_else(|| Window::default_for(&base, special_line));
    par_map(jobs, n_list, |&n| {
        let q = base.with_n_atoms(n);
        Ok(PeakRow {
            n_atoms: n,
            peak: find_chi_max(solver, &q, window)?,
        })
    })
}

/// Fit of the peak heights against `N`.
pub fn fit_peaks(rows: &[PeakRow], drop_smallest: bool) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n_atoms as f64, r.peak.value)).collect();
    fit_power_law(&pts, drop_smallest)
}
