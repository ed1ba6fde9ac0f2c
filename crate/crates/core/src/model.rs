//! Hamiltonian parameters, phase classification and the `J_x <-> J_y` reduction.
//!
//! The Hamiltonian is `H = eps J_z + (gamma_x / N) J_x^2 + (gamma_y / N) J_y^2`
//! with the critical coupling `gamma_c = -eps`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Couplings and atom count of the Lipkin Hamiltonian.
///
/// `gamma_c` is never stored; it is always `-epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub epsilon: f64,
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub n_atoms: usize,
}

impl ModelParams {
    pub fn new(epsilon: f64, gamma_x: f64, gamma_y: f64, n_atoms: usize) -> Result<Self> {
        let p = ModelParams {
            epsilon,
            gamma_x,
            gamma_y,
            n_atoms,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unit level splitting, the working units of all figures.
    pub fn with_unit_epsilon(gamma_x: f64, gamma_y: f64, n_atoms: usize) -> Result<Self> {
        Self::new(1.0, gamma_x, gamma_y, n_atoms)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::InvalidParams("n_atoms must be at least 1".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidParams(format!(
                "epsilon must be finite and > 0, got {}",
                self.epsilon
            )));
        }
        if !self.gamma_x.is_finite() || !self.gamma_y.is_finite() {
            return Err(Error::InvalidParams(format!(
                "couplings must be finite, got gamma_x = {}, gamma_y = {}",
                self.gamma_x, self.gamma_y
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn gamma_c(&self) -> f64 {
        -self.epsilon
    }

    #[inline]
    pub fn n(&self) -> f64 {
        self.n_atoms as f64
    }

    /// Spin of the maximal sector, `j = N / 2`.
    #[inline]
    pub fn spin(&self) -> f64 {
        0.5 * self.n()
    }

    pub fn with_gamma_x(self, gamma_x: f64) -> Self {
        ModelParams { gamma_x, ..self }
    }

    pub fn with_n_atoms(self, n_atoms: usize) -> Self {
        ModelParams { n_atoms, ..self }
    }

    pub fn swapped(self) -> Self {
        ModelParams {
            gamma_x: self.gamma_y,
            gamma_y: self.gamma_x,
            ..self
        }
    }
}

#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseRegion {
    NormalI,
    DeformedII,
    DeformedIII,
    BoundaryI_II,
    BoundaryI_III,
    TriplePoint,
}

impl PhaseRegion {
    pub fn label(self) -> &'static str {
        match self {
            PhaseRegion::NormalI => "NormalI",
            PhaseRegion::DeformedII => "DeformedII",
            PhaseRegion::DeformedIII => "DeformedIII",
            PhaseRegion::BoundaryI_II => "BoundaryI_II",
            PhaseRegion::BoundaryI_III => "BoundaryI_III",
            PhaseRegion::TriplePoint => "TriplePoint",
        }
    }

    /// Regions whose mean-field minimum sits at `rho_c = 0`.
    pub fn is_normal_like(self) -> bool {
        matches!(
            self,
            PhaseRegion::NormalI
                | PhaseRegion::BoundaryI_II
                | PhaseRegion::BoundaryI_III
                | PhaseRegion::TriplePoint
        )
    }

    pub fn is_region_three(self) -> bool {
        self == PhaseRegion::DeformedIII
    }

    /// Tag obtained after exchanging `gamma_x` and `gamma_y`.
    pub fn mirrored(self) -> Self {
        match self {
            PhaseRegion::DeformedII => PhaseRegion::DeformedIII,
            PhaseRegion::DeformedIII => PhaseRegion::DeformedII,
            PhaseRegion::BoundaryI_II => PhaseRegion::BoundaryI_III,
            PhaseRegion::BoundaryI_III => PhaseRegion::BoundaryI_II,
            other => other,
        }
    }
}

impl std::fmt::Display for PhaseRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Phase classification with exact comparisons at the boundaries.
pub fn classify_phase(p: &ModelParams) -> Result<PhaseRegion> {
    classify_phase_with_tolerance(p, 0.0)
}

/// Phase classification where couplings within `tol` of `gamma_c` count as
/// sitting on the boundary.
pub fn classify_phase_with_tolerance(p: &ModelParams, tol: f64) -> Result<PhaseRegion> {
    p.validate()?;
    let gc = p.gamma_c();
    let (gx, gy) = (p.gamma_x, p.gamma_y);
    let x_on = (gx - gc).abs() <= tol;
    let y_on = (gy - gc).abs() <= tol;

    let region = if x_on && y_on {
        PhaseRegion::TriplePoint
    } else if x_on && gy > gc {
        PhaseRegion::BoundaryI_II
    } else if y_on && gx > gc {
        PhaseRegion::BoundaryI_III
    } else if gx > gc && gy > gc {
        PhaseRegion::NormalI
    } else if gx < gc && gx <= gy {
        PhaseRegion::DeformedII
    } else {
        // remaining case: gy < gc and gx > gy
        PhaseRegion::DeformedIII
    };
    Ok(region)
}

/// Maps region III onto region II by exchanging the couplings.
///
/// Returns the (possibly swapped) parameters and whether a swap happened.
pub fn canonicalize(p: &ModelParams) -> Result<(ModelParams, bool)> {
    if classify_phase(p)?.is_region_three() {
        Ok((p.swapped(), true))
    } else {
        Ok((*p, false))
    }
}
