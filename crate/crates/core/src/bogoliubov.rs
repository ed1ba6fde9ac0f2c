//! Truncated quadratic Hamiltonian `H_t = A + B c^dag c + C (c^dag^2 + c^2)`
//! in the displaced bosons, its Bogoliubov diagonalization, and the analytic
//! beyond-mean-field observables.
//!
//! Several printed deformed-phase expressions contain square roots of
//! negative numbers whose imaginary units cancel in pairs. Everything here is
//! evaluated from real building blocks (`rho_c^2`, `B`, `C`, `Delta`); the
//! printed forms are kept as `printed_*` functions with the branch
//! cancellation spelled out, and are only used as cross-checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::critical_point;
use crate::model::{classify_phase, ModelParams, PhaseRegion};

/// Default half-width of the excluded band around `gamma_c`.
pub const DEFAULT_SINGULAR_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl TruncatedCoefficients {
    /// `sqrt(B^2 - 4 C^2)`.
    pub fn gap(&self) -> f64 {
        (self.b * self.b - 4.0 * self.c * self.c).max(0.0).sqrt()
    }
}

/// Which expression to use for the quasiparticle gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapForm {
    /// Two-branch closed form in the couplings.
    #[default]
    ClosedForm,
    /// `sqrt(B^2 - 4 C^2)` from the coefficients at the given `N`.
    Coefficients,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BogoliubovOptions {
    pub singular_guard: f64,
    pub gap_form: GapForm,
}

impl Default for BogoliubovOptions {
    fn default() -> Self {
        BogoliubovOptions {
            singular_guard: DEFAULT_SINGULAR_GUARD,
            gap_form: GapForm::ClosedForm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSolution {
    pub a_coef: f64,
    pub b_coef: f64,
    pub c_coef: f64,
    /// Bogoliubov angle, `tanh(theta) = -2 C / B`.
    pub theta: f64,
    pub gap: f64,
    pub e_gs_t: f64,
    pub n_e_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedObservables {
    /// Energy per atom, two-branch closed form.
    pub e_gs_t: f64,
    pub n_e_t: f64,
    /// `[A + (Delta - B) / 2] / N`, the constant term of the diagonal form.
    pub e_gs_identity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiCoefficients {
    /// Square of the `(a^dag + a)` coefficient of `J_x^2`.
    pub j3_sq: f64,
    /// Coefficient of `(a^dag^2 + a^2)` in `J_x^2`.
    pub j4: f64,
    pub one_boson_energy: f64,
    pub two_boson_energy: f64,
}

fn canonical_region(p: &ModelParams) -> Result<PhaseRegion> {
    let region = classify_phase(p)?;
    if region.is_region_three() {
        return Err(Error::RegionIII);
    }
    Ok(region)
}

/// Constant, number and pairing coefficients of the truncated Hamiltonian.
pub fn truncated_coefficients(p: &ModelParams) -> Result<TruncatedCoefficients> {
    canonical_region(p)?;
    let rho_sq = critical_point(p)?.rho_c_sq();
    Ok(coefficients_at(p, rho_sq))
}

fn coefficients_at(p: &ModelParams, rho_sq: f64) -> TruncatedCoefficients {
    let (gx, gy, gc, n) = (p.gamma_x, p.gamma_y, p.gamma_c(), p.n());
    let a = -gc * (rho_sq - 0.5 * n)
        + gx / (4.0 * n) * (n - 3.0 * rho_sq + 4.0 * rho_sq * (n - rho_sq))
        + gy / (4.0 * n) * (n - rho_sq);
    let b = -gc + (n - 7.0 * rho_sq) * gx / (2.0 * n) + (n - rho_sq) * gy / (2.0 * n);
    let c = (n - 5.0 * rho_sq) * gx / (4.0 * n) - (n - rho_sq) * gy / (4.0 * n);
    TruncatedCoefficients { a, b, c }
}

/// Coefficient of `(c^dag + c)` at order `N^{1/2}` for a displacement `rho`
/// along `phi = 0`.
///
/// It equals half the `rho`-derivative of the leading-order energy surface
/// and vanishes at the mean-field minimum.
pub fn linear_coefficient_at(p: &ModelParams, rho: f64) -> f64 {
    rho * (p.epsilon + p.gamma_x * (1.0 - 2.0 * rho * rho / p.n()))
}

/// [`linear_coefficient_at`] evaluated at the closed-form `rho_c`.
pub fn linear_coefficient(p: &ModelParams) -> Result<f64> {
    canonical_region(p)?;
    Ok(linear_coefficient_at(p, critical_point(p)?.rho_c))
}

/// Quasiparticle gap in its closed two-branch form.
pub fn gap(p: &ModelParams) -> Result<f64> {
    let region = canonical_region(p)?;
    let (gx, gy, gc) = (p.gamma_x, p.gamma_y, p.gamma_c());
    let sq = if region.is_normal_like() {
        (gx - gc) * (gy - gc)
    } else {
        // every factor has a definite sign in region II
        (gx * gx - gc * gc) * ((gx - gy) / gx)
    };
    Ok(sq.max(0.0).sqrt())
}

pub fn gap_with(p: &ModelParams, form: GapForm) -> Result<f64> {
    match form {
        GapForm::ClosedForm => gap(p),
        GapForm::Coefficients => Ok(truncated_coefficients(p)?.gap()),
    }
}

/// Distance to the nearest singular set of the truncated solution.
fn check_singular(p: &ModelParams, region: PhaseRegion, guard: f64) -> Result<()> {
    let gc = p.gamma_c();
    let dx = (p.gamma_x - gc).abs();
    if dx <= guard {
        return Err(Error::SingularAtTransition { distance: dx });
    }
    if region.is_normal_like() {
        let dy = (p.gamma_y - gc).abs();
        if dy <= guard {
            return Err(Error::SingularAtTransition { distance: dy });
        }
    }
    Ok(())
}

/// Full truncated solution with default options.
pub fn truncated_solution(p: &ModelParams) -> Result<TruncatedSolution> {
    truncated_solution_with(p, &BogoliubovOptions::default())
}

pub fn truncated_solution_with(
    p: &ModelParams,
    opts: &BogoliubovOptions,
) -> Result<TruncatedSolution> {
    let region = canonical_region(p)?;
    check_singular(p, region, opts.singular_guard)?;
    let coef = truncated_coefficients(p)?;
    let obs = truncated_observables_with(p, opts)?;
    let gap = gap_with(p, opts.gap_form)?;
    Ok(TruncatedSolution {
        a_coef: coef.a,
        b_coef: coef.b,
        c_coef: coef.c,
        theta: (-2.0 * coef.c / coef.b).atanh(),
        gap,
        e_gs_t: obs.e_gs_t,
        n_e_t: obs.n_e_t,
    })
}

pub fn truncated_observables(p: &ModelParams) -> Result<TruncatedObservables> {
    truncated_observables_with(p, &BogoliubovOptions::default())
}

/// Energy per atom and excited fraction in the Bogoliubov vacuum.
///
/// `n_e_t = (2/N) (rho_c^2 + sinh^2(theta/2))` with `cosh(theta) = |B| / Delta`.
pub fn truncated_observables_with(
    p: &ModelParams,
    opts: &BogoliubovOptions,
) -> Result<TruncatedObservables> {
    let region = canonical_region(p)?;
    check_singular(p, region, opts.singular_guard)?;
    let (gx, gc, n) = (p.gamma_x, p.gamma_c(), p.n());
    let rho_sq = critical_point(p)?.rho_c_sq();
    let coef = coefficients_at(p, rho_sq);
    let delta = gap_with(p, opts.gap_form)?;

    let e_gs_t = if region.is_normal_like() {
        0.5 * gc + gc / (2.0 * n) + delta / (2.0 * n)
    } else {
        (gc * gc + gx * gx) / (4.0 * gx) + gx / (2.0 * n) + delta / (2.0 * n)
    };
    let cosh_theta = coef.b.abs() / delta;
    let sinh_half_sq = 0.5 * (cosh_theta - 1.0);
    let n_e_t = 2.0 / n * (rho_sq + sinh_half_sq);
    let e_gs_identity = (coef.a + 0.5 * (delta - coef.b)) / n;

    Ok(TruncatedObservables {
        e_gs_t,
        n_e_t,
        e_gs_identity,
    })
}

/// `sqrt(a) * sqrt(b)` with the principal branch: `i * i = -1` when both are
/// negative. Mixed signs give an imaginary result and return NaN.
fn principal_sqrt_product(a: f64, b: f64) -> f64 {
    if a >= 0.0 && b >= 0.0 {
        a.sqrt() * b.sqrt()
    } else if a < 0.0 && b < 0.0 {
        -((-a).sqrt() * (-b).sqrt())
    } else {
        f64::NAN
    }
}

/// Excited fraction exactly as printed, with the deformed-phase branch
/// cancellation made explicit.
pub fn printed_n_e(p: &ModelParams) -> Result<f64> {
    let region = canonical_region(p)?;
    let (gx, gy, gc, n) = (p.gamma_x, p.gamma_y, p.gamma_c(), p.n());
    if region.is_normal_like() {
        Ok((gx + gy - 2.0 * gc) / (2.0 * n * ((gx - gc) * (gy - gc)).sqrt()) - 1.0 / n)
    } else {
        let root = principal_sqrt_product(gx - gc, gx * (gc + gx) * (gx - gy));
        let numerator = gc * gy + gx * (3.0 * gc - 5.0 * gx + gy);
        Ok((gx - gc) / gx + numerator / (4.0 * n * root) - 1.0 / n)
    }
}

/// Coefficients of `J_x^2` in the quasiparticle bosons that feed the
/// fidelity susceptibility.
pub fn chi_coefficients(p: &ModelParams) -> Result<ChiCoefficients> {
    chi_coefficients_with(p, DEFAULT_SINGULAR_GUARD)
}

pub fn chi_coefficients_with(p: &ModelParams, guard: f64) -> Result<ChiCoefficients> {
    let region = canonical_region(p)?;
    check_singular(p, region, guard)?;
    let (gx, gy, gc, n) = (p.gamma_x, p.gamma_y, p.gamma_c(), p.n());
    let delta = gap(p)?;

    let (j3_sq, j4) = if region.is_normal_like() {
        (0.0, 0.25 * n * ((gy - gc) / (gx - gc)).sqrt())
    } else {
        if (gx - gy).abs() <= guard {
            return Err(Error::DegenerateCouplings { gamma: gx });
        }
        let j3_sq = -n.powi(3) * gc * gc / (4.0 * gx.powi(3)) * delta;
        // positive in region II: gx < 0, gx^2 > gc^2, gx - gy < 0
        let root = (gx * (gx * gx - gc * gc) * (gx - gy)).sqrt();
        let poly = gc * gc * (5.0 * gx - 3.0 * gy) - gc * gx * (gy + 3.0 * gx) + 2.0 * gx * gx * gy;
        (j3_sq, -n * poly / (8.0 * gx * root))
    };

    Ok(ChiCoefficients {
        j3_sq,
        j4,
        one_boson_energy: delta,
        two_boson_energy: 2.0 * delta,
    })
}

/// Fidelity susceptibility of the truncated ground state with respect to
/// `gamma_x` (perturbation `J_x^2 / N`).
///
/// One-boson term at energy `Delta`, two-boson term at `2 Delta` with
/// `<2|a^dag^2|0> = sqrt(2)`.
pub fn chi_f_truncated(p: &ModelParams) -> Result<f64> {
    let k = chi_coefficients(p)?;
    let n_sq = p.n() * p.n();
    let one = k.j3_sq / (n_sq * k.one_boson_energy.powi(2));
    let two = 2.0 * k.j4 * k.j4 / (n_sq * k.two_boson_energy.powi(2));
    Ok(one + two)
}

/// Printed two-term susceptibility. Region I returns `1 / (32 (gx - gc)^2)`.
///
/// In region II the first term contains `1 / sqrt(gx - gc)` times
/// `sqrt(gx / ((gc + gx)(gx - gy)))`, both imaginary; their quotient is taken
/// as the real positive ratio.
pub fn printed_chi_f(p: &ModelParams) -> Result<f64> {
    let region = canonical_region(p)?;
    check_singular(p, region, DEFAULT_SINGULAR_GUARD)?;
    let (gx, gy, gc, n) = (p.gamma_x, p.gamma_y, p.gamma_c(), p.n());
    if region.is_normal_like() {
        return Ok(1.0 / (32.0 * (gx - gc).powi(2)));
    }
    let inner = gx / ((gc + gx) * (gx - gy));
    let ratio = if (gx - gc) < 0.0 && inner < 0.0 {
        ((-inner) / (gc - gx)).sqrt()
    } else {
        (inner / (gx - gc)).sqrt()
    };
    let first = -n * gc * gc / (4.0 * gx.powi(3)) * ratio;
    let bracket = gc * gx * (-5.0 * gc + 3.0 * gx) + (3.0 * gc - 2.0 * gx) * (gc + gx) * gy;
    let second = bracket * bracket
        / ((gc - gx).powi(2) * 128.0 * gx * gx * (gc + gx).powi(2) * (gx - gy).powi(2));
    Ok(first + second)
}

fn require_special_line(p: &ModelParams) -> Result<()> {
    p.validate()?;
    let gc = p.gamma_c();
    if p.gamma_y != gc {
        return Err(Error::NotSpecialLine {
            gamma_y: p.gamma_y,
            gamma_c: gc,
        });
    }
    if !(p.gamma_x < gc) {
        return Err(Error::NotDeformed {
            gamma_x: p.gamma_x,
            gamma_c: gc,
        });
    }
    Ok(())
}

/// Leading `O(N)` susceptibility on the line `gamma_y = gamma_c`, `gamma_x < gamma_c`,
/// from the positive-definite one-boson term.
pub fn chi_f_special_line(p: &ModelParams) -> Result<f64> {
    require_special_line(p)?;
    let (gx, gc, n) = (p.gamma_x, p.gamma_c(), p.n());
    let delta = ((gx * gx - gc * gc) * ((gx - gc) / gx)).sqrt();
    Ok(-n * gc * gc / (4.0 * gx.powi(3) * delta))
}

/// The special-line expression evaluated literally in real arithmetic.
/// Equal in magnitude to [`chi_f_special_line`] but of opposite sign.
pub fn printed_chi_f_special_line(p: &ModelParams) -> Result<f64> {
    require_special_line(p)?;
    let (gx, gc, n) = (p.gamma_x, p.gamma_c(), p.n());
    Ok(-n / (gx - gc) * gc * gc / (4.0 * gx.powi(3)) * (gx / (gx + gc)).sqrt())
}
