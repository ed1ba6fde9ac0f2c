//! Coherent-state energy surface and its minima.
//!
//! The trial state is the boson coherent state `|alpha>` with
//! `alpha = rho e^{i phi}`; the surface below uses the square-root
//! approximation that becomes exact for `N -> infinity`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{classify_phase, ModelParams, PhaseRegion};

/// Phases at which the surface attains its minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiSet {
    /// `rho_c = 0` (or a `phi`-independent surface): the phase carries no information.
    Undetermined,
    /// The two degenerate minima `phi = 0` and `phi = pi`.
    ZeroAndPi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub rho_c: f64,
    pub phi_c_set: PhiSet,
}

impl CriticalPoint {
    pub fn degenerate(&self) -> bool {
        self.phi_c_set == PhiSet::ZeroAndPi
    }

    pub fn rho_c_sq(&self) -> f64 {
        self.rho_c * self.rho_c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldObservables {
    /// Ground-state energy per atom.
    pub e_gs: f64,
    /// Fraction of excited atoms.
    pub n_e: f64,
}

/// `<alpha|H|alpha>` as a function of the polar coordinates of `alpha`.
pub fn energy_surface(p: &ModelParams, rho: f64, phi: f64) -> Result<f64> {
    p.validate()?;
    let n = p.n();
    let rho_sq = rho * rho;
    if !(rho >= 0.0 && rho_sq <= n) {
        return Err(Error::SurfaceDomain {
            rho,
            n_atoms: p.n_atoms,
        });
    }
    Ok(surface_unchecked(p, rho_sq, phi))
}

#[inline]
fn surface_unchecked(p: &ModelParams, rho_sq: f64, phi: f64) -> f64 {
    let n = p.n();
    let depletion = 1.0 - rho_sq / n;
    p.epsilon * (rho_sq - 0.5 * n)
        + 0.25 * (p.gamma_x + p.gamma_y) * depletion * (1.0 + 2.0 * rho_sq)
        + 0.5 * (p.gamma_x - p.gamma_y) * depletion * rho_sq * (2.0 * phi).cos()
}

/// `surface(rho) - surface(0)`, written as `rho^2 * g(rho^2, phi)` so the
/// large `-eps N / 2` constant does not swamp the landscape near `rho = 0`.
#[inline]
fn surface_shift(p: &ModelParams, rho_sq: f64, phi: f64) -> f64 {
    let n = p.n();
    let g = p.epsilon
        + 0.25 * (p.gamma_x + p.gamma_y) * (2.0 - 1.0 / n - 2.0 * rho_sq / n)
        + 0.5 * (p.gamma_x - p.gamma_y) * (1.0 - rho_sq / n) * (2.0 * phi).cos();
    rho_sq * g
}

fn require_canonical(p: &ModelParams) -> Result<PhaseRegion> {
    let region = classify_phase(p)?;
    if region.is_region_three() {
        return Err(Error::RegionIII);
    }
    Ok(region)
}

/// Closed-form minimum of the energy surface for regions I and II.
pub fn critical_point(p: &ModelParams) -> Result<CriticalPoint> {
    let region = require_canonical(p)?;
    if region.is_normal_like() {
        return Ok(CriticalPoint {
            rho_c: 0.0,
            phi_c_set: PhiSet::Undetermined,
        });
    }
    let rho_sq = 0.5 * p.n() * (1.0 - p.gamma_c() / p.gamma_x);
    Ok(CriticalPoint {
        rho_c: rho_sq.sqrt(),
        phi_c_set: PhiSet::ZeroAndPi,
    })
}

/// Energy per atom and excited fraction at the mean-field minimum,
/// including the `1/N` pieces.
pub fn mf_observables(p: &ModelParams) -> Result<MeanFieldObservables> {
    let region = require_canonical(p)?;
    let (gx, gy, gc, n) = (p.gamma_x, p.gamma_y, p.gamma_c(), p.n());
    if region.is_normal_like() {
        Ok(MeanFieldObservables {
            e_gs: 0.5 * gc + (gx + gy) / (4.0 * n),
            n_e: 0.0,
        })
    } else {
        Ok(MeanFieldObservables {
            e_gs: (gc * gc + gx * gx) / (4.0 * gx) + (gx + gc) * (gy + gx) / (8.0 * n * gx),
            n_e: 1.0 - gc / gx,
        })
    }
}

/// Result of the brute-force minimization of the energy surface.
/// Minimizing `rho` of the surface as written, 1/N piece included.
///
/// Along the softer axis `g_a = min(gamma_x, gamma_y)` (partner `g_b`),
/// `rho^2 = N/2 (1 - gamma_c/g_a) - (g_a + g_b) / (8 g_a)` while the origin
/// is unstable, 0 otherwise. [`critical_point`] keeps only the first term, so
/// the two differ by `O(N^{-1/2})` in `rho`.
pub fn stationary_rho(p: &ModelParams) -> Result<f64> {
    p.validate()?;
    let (ga, gb) = if p.gamma_x <= p.gamma_y {
        (p.gamma_x, p.gamma_y)
    } else {
        (p.gamma_y, p.gamma_x)
    };
    let (gc, n) = (p.gamma_c(), p.n());
    // curvature of the surface at the origin along the soft axis
    if p.epsilon + ga - (ga + gb) / (4.0 * n) >= 0.0 {
        return Ok(0.0);
    }
    Ok((0.5 * n * (1.0 - gc / ga) - (ga + gb) / (8.0 * ga)).clamp(0.0, n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericMinimum {
    pub rho_c: f64,
    pub energy: f64,
    /// Refined phases of all minima found; empty when `phi` is undetermined.
    pub phi_minima: Vec<f64>,
}

impl NumericMinimum {
    pub fn to_critical_point(&self) -> CriticalPoint {
        CriticalPoint {
            rho_c: self.rho_c,
            phi_c_set: if self.phi_minima.is_empty() {
                PhiSet::Undetermined
            } else {
                PhiSet::ZeroAndPi
            },
        }
    }
}

const RHO_STEPS: usize = 200;
const PHI_STEPS: usize = 64;
const REFINE_TOL: f64 = 1e-8;
const GOLDEN_BUDGET: usize = 200;
const SWEEP_BUDGET: usize = 100;

/// Grid search over `[0, sqrt(N)] x [0, 2 pi)` followed by alternating
/// golden-section refinement in `rho` and `phi`.
///
/// Ties are broken toward smaller `rho`, then smaller `phi`.
pub fn minimize_surface_numeric(p: &ModelParams) -> Result<NumericMinimum> {
    p.validate()?;
    let n = p.n();
    let rho_max = n.sqrt();
    let d_rho = rho_max / RHO_STEPS as f64;
    let d_phi = 2.0 * PI / PHI_STEPS as f64;
    let f = |rho: f64, phi: f64| surface_shift(p, rho * rho, phi);

    let mut best = (f64::INFINITY, 0usize, 0usize);
    for i in 0..=RHO_STEPS {
        let rho = i as f64 * d_rho;
        for k in 0..PHI_STEPS {
            let e = f(rho, k as f64 * d_phi);
            if e < best.0 {
                best = (e, i, k);
            }
        }
    }

    let (_, i0, k0) = best;
    let (mut rho, mut phi) = (i0 as f64 * d_rho, k0 as f64 * d_phi);
    let (rho, phi) = refine(&f, &mut rho, &mut phi, d_rho, d_phi, rho_max)?;
    let energy = surface_unchecked(p, rho * rho, phi);

    // scale of the energy landscape, for the phi-flatness and tie tests
    let scale = n * (p.epsilon + p.gamma_x.abs() + p.gamma_y.abs());
    let flat_tol = 1e-12 * scale;

    let along_circle: Vec<f64> = (0..PHI_STEPS).map(|k| f(rho, k as f64 * d_phi)).collect();
    let spread = along_circle.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - along_circle.iter().cloned().fold(f64::INFINITY, f64::min);

    let undetermined = rho <= 1e-6 * rho_max.max(1.0) || spread <= flat_tol;
    let phi_minima = if undetermined {
        Vec::new()
    } else {
        // every grid-local minimum in phi along the circle, refined
        let mut minima = Vec::new();
        for k in 0..PHI_STEPS {
            let prev = along_circle[(k + PHI_STEPS - 1) % PHI_STEPS];
            let next = along_circle[(k + 1) % PHI_STEPS];
            let here = along_circle[k];
            if here <= prev && here < next {
                let (ph, e) = golden_min(
                    |x| f(rho, x),
                    k as f64 * d_phi - d_phi,
                    k as f64 * d_phi + d_phi,
                )?;
                if e <= f(rho, phi) + 1e-9 * scale.max(1.0) {
                    let wrapped = ph.rem_euclid(2.0 * PI);
                    minima.push(if 2.0 * PI - wrapped < 1e-6 { 0.0 } else { wrapped });
                }
            }
        }
        minima.sort_by(|a, b| a.partial_cmp(b).unwrap());
        minima.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        minima
    };

    Ok(NumericMinimum {
        rho_c: rho,
        energy,
        phi_minima,
    })
}

fn refine<F: Fn(f64, f64) -> f64>(
    f: &F,
    rho: &mut f64,
    phi: &mut f64,
    d_rho: f64,
    d_phi: f64,
    rho_max: f64,
) -> Result<(f64, f64)> {
    for _ in 0..SWEEP_BUDGET {
        let lo = (*rho - d_rho).max(0.0);
        let hi = (*rho + d_rho).min(rho_max);
        let (r_new, _) = golden_min(|r| f(r, *phi), lo, hi)?;
        let (candidate, e_candidate) = golden_min(|x| f(r_new, x), *phi - d_phi, *phi + d_phi)?;
        // a flat phi direction would otherwise drift toward the bracket edge
        let p_new = if e_candidate < f(r_new, *phi) {
            candidate
        } else {
            *phi
        };
        let moved = (r_new - *rho).abs().max((p_new - *phi).abs());
        let improvement = f(*rho, *phi) - f(r_new, p_new);
        if improvement < 0.0 {
            // rounding noise at the bottom of the well
            return Ok((*rho, phi.rem_euclid(2.0 * PI)));
        }
        *rho = r_new;
        *phi = p_new;
        if moved <= REFINE_TOL || improvement == 0.0 {
            return Ok((*rho, phi.rem_euclid(2.0 * PI)));
        }
    }
    Err(Error::NoConvergence {
        iterations: SWEEP_BUDGET,
    })
}

/// Golden-section search for the minimum of `f` on `[lo, hi]`.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<(f64, f64)> {
    golden_search(f, lo, hi, REFINE_TOL, GOLDEN_BUDGET)
}

pub(crate) fn golden_search<F: Fn(f64) -> f64>(
    f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    budget: usize,
) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..budget {
        if (b - a).abs() <= tol {
            // endpoints are candidates too; prefer the smaller abscissa on ties
            let mut best = (a, f(a));
            for x in [c, d, b] {
                let fx = f(x);
                if fx < best.1 {
                    best = (x, fx);
                }
            }
            return Ok(best);
        }
        // `<=` keeps the left bracket on ties
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    Err(Error::NoConvergence { iterations: budget })
}
