//! Closed-form potential, mobility, their derivatives, the regularized
//! family and the entropy density.
//!
//! The single-well potential of Lennard-Jones type is
//!
//! ```text
//!   psi(n) = -(1-n*) ln(1-n) - n^3/3 - (1-n*) n^2/2 - (1-n*) n + k
//! ```
//!
//! split into a convex part `psi_+` (treated implicitly by the schemes) and
//! a concave part `psi_-` (treated explicitly). The concave part is
//! extended to all of `R` keeping `psi_-'` linear. The regularized family
//! clamps `psi_+''` and the mobility outside `[eps, 1-eps]` so that both
//! become globally defined and non-degenerate.

/// Model parameters of the RDCH system.
///
/// `epsilon == 0` selects the unregularized problem; `epsilon > 0` selects
/// the regularized one (clamped potential curvature and mobility).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Surface-tension parameter, `gamma > 0`.
    pub gamma: f64,
    /// Relaxation parameter, `0 < sigma < gamma`.
    pub sigma: f64,
    /// Equilibrium density, `n_star` in (0, 1).
    pub n_star: f64,
    /// Additive potential constant; cancels in all dynamics.
    pub k_offset: f64,
    /// Regularization parameter in `[0, 1/2)`; 0 means unregularized.
    pub epsilon: f64,
}

/// Parameter validation failure.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamError(pub String);

impl std::fmt::Display for ParamError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid model parameters: {}", self.0)
    }
}

impl std::error::Error for ParamError {}

impl ModelParams {
    pub fn new(
        gamma: f64,
        sigma: f64,
        n_star: f64,
        k_offset: f64,
        epsilon: f64,
    ) -> Result<Self, ParamError> {
        if !(gamma > 0.0) {
            return Err(ParamError(format!("gamma must be > 0, got {gamma}")));
        }
        if !(sigma > 0.0 && sigma < gamma) {
            return Err(ParamError(format!(
                "sigma must satisfy 0 < sigma < gamma, got sigma={sigma}, gamma={gamma}"
            )));
        }
        if !(n_star > 0.0 && n_star < 1.0) {
            return Err(ParamError(format!("n_star must be in (0,1), got {n_star}")));
        }
        if !(0.0..0.5).contains(&epsilon) {
            return Err(ParamError(format!(
                "epsilon must be in [0, 1/2), got {epsilon}"
            )));
        }
        if !(sigma * (1.0 - n_star) / gamma < 1.0) {
            return Err(ParamError(format!(
                "sigma(1-n_star)/gamma must be < 1 for the phi0 system, got {}",
                sigma * (1.0 - n_star) / gamma
            )));
        }
        Ok(Self {
            gamma,
            sigma,
            n_star,
            k_offset,
            epsilon,
        })
    }

    /// `psi_+` loses convexity for `n_star > 1 - (2/3)^3`; callers may want
    /// to surface this to the user (the schemes clamp negative curvature).
    pub fn convexity_warning(&self) -> Option<String> {
        let threshold = 1.0 - (2.0f64 / 3.0).powi(3);
        if self.n_star > threshold {
            Some(format!(
                "n_star = {} exceeds 1-(2/3)^3 = {threshold:.6}; psi_+ is not convex and \
                 negative curvature values will be clamped to zero in the weighted stiffness",
                self.n_star
            ))
        } else {
            None
        }
    }

    pub fn is_regularized(&self) -> bool {
        self.epsilon > 0.0
    }

    // ---- unregularized convex part (singular at n = 1) ----

    /// `psi_+(n) = -(1-n*) ln(1-n) - n^3/3`.
    ///
    /// Returns `+inf` at `n = 1` and NaN beyond; callers on the
    /// unregularized path keep `n < 1`.
    pub fn psi_plus_exact(&self, n: f64) -> f64 {
        -(1.0 - self.n_star) * (1.0 - n).ln() - n * n * n / 3.0
    }

    /// `psi_+'(n) = (1-n*)/(1-n) - n^2`.
    pub fn dpsi_plus_exact(&self, n: f64) -> f64 {
        (1.0 - self.n_star) / (1.0 - n) - n * n
    }

    /// `psi_+''(n) = (1-n*)/(1-n)^2 - 2n`.
    pub fn d2psi_plus_exact(&self, n: f64) -> f64 {
        let om = 1.0 - n;
        (1.0 - self.n_star) / (om * om) - 2.0 * n
    }

    // ---- concave part, linear-derivative extension on all of R ----

    /// `psi_-(s) = -(1-n*)(s^2/2 + s)` on all of `R`.
    pub fn psi_minus_ext(&self, s: f64) -> f64 {
        -(1.0 - self.n_star) * (0.5 * s * s + s)
    }

    /// `psi_-'(s) = -(1-n*)(s + 1)`, linear on all of `R`.
    pub fn dpsi_minus_ext(&self, s: f64) -> f64 {
        -(1.0 - self.n_star) * (s + 1.0)
    }

    /// Full potential `psi = psi_+ + psi_- + k` on `[0, 1)`.
    pub fn psi(&self, n: f64) -> f64 {
        self.psi_plus_exact(n) + self.psi_minus_ext(n) + self.k_offset
    }

    // ---- regularized convex part (requires epsilon > 0) ----
    //
    // psi_+'' is clamped outside [eps, 1-eps]; the lower-order functions are
    // obtained by integrating once and twice with value and first-derivative
    // matching at the clamp points, the unique choice that keeps
    // psi_{+,eps} == psi_+ on [eps, 1-eps] and psi_{+,eps} in C^2(R).

    pub fn d2psi_plus_eps(&self, n: f64) -> f64 {
        debug_assert!(self.epsilon > 0.0);
        self.d2psi_plus_exact(n.clamp(self.epsilon, 1.0 - self.epsilon))
    }

    pub fn dpsi_plus_eps(&self, n: f64) -> f64 {
        debug_assert!(self.epsilon > 0.0);
        let (lo, hi) = (self.epsilon, 1.0 - self.epsilon);
        if n < lo {
            self.dpsi_plus_exact(lo) + self.d2psi_plus_exact(lo) * (n - lo)
        } else if n > hi {
            self.dpsi_plus_exact(hi) + self.d2psi_plus_exact(hi) * (n - hi)
        } else {
            self.dpsi_plus_exact(n)
        }
    }

    pub fn psi_plus_eps(&self, n: f64) -> f64 {
        debug_assert!(self.epsilon > 0.0);
        let (lo, hi) = (self.epsilon, 1.0 - self.epsilon);
        if n < lo {
            let d = n - lo;
            self.psi_plus_exact(lo)
                + self.dpsi_plus_exact(lo) * d
                + 0.5 * self.d2psi_plus_exact(lo) * d * d
        } else if n > hi {
            let d = n - hi;
            self.psi_plus_exact(hi)
                + self.dpsi_plus_exact(hi) * d
                + 0.5 * self.d2psi_plus_exact(hi) * d * d
        } else {
            self.psi_plus_exact(n)
        }
    }

    // ---- epsilon dispatch: what the schemes evaluate ----

    /// Convex part used by the schemes: regularized when `epsilon > 0`.
    pub fn psi_plus(&self, n: f64) -> f64 {
        if self.is_regularized() {
            self.psi_plus_eps(n)
        } else {
            self.psi_plus_exact(n)
        }
    }

    pub fn dpsi_plus(&self, n: f64) -> f64 {
        if self.is_regularized() {
            self.dpsi_plus_eps(n)
        } else {
            self.dpsi_plus_exact(n)
        }
    }

    pub fn d2psi_plus(&self, n: f64) -> f64 {
        if self.is_regularized() {
            self.d2psi_plus_eps(n)
        } else {
            self.d2psi_plus_exact(n)
        }
    }

    /// Mobility model matching `epsilon`.
    pub fn mobility_model(&self) -> MobilityModel {
        if self.is_regularized() {
            MobilityModel::Regularized {
                epsilon: self.epsilon,
            }
        } else {
            MobilityModel::Exact
        }
    }
}

/// Degenerate mobility `b(n) = n (1-n)^2`, evaluated as a polynomial on all
/// of `R`; callers maintain `n` in `[0, 1]` on the unregularized path.
pub fn mobility(n: f64) -> f64 {
    let om = 1.0 - n;
    n * om * om
}

/// Regularized mobility `b_eps(n) = b(clamp(n, eps, 1-eps))`.
pub fn mobility_eps(n: f64, epsilon: f64) -> f64 {
    mobility(n.clamp(epsilon, 1.0 - epsilon))
}

/// Mobility evaluation rule shared by the upwind assembly and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MobilityModel {
    /// `b(n) = n (1-n)^2`, degenerate at 0 and 1.
    Exact,
    /// Density arguments clamped to `[epsilon, 1-epsilon]` before applying
    /// the two-point upwind formula, so every coefficient is positive.
    Regularized { epsilon: f64 },
}

impl MobilityModel {
    fn clamp_density(&self, n: f64) -> f64 {
        match self {
            MobilityModel::Exact => n,
            MobilityModel::Regularized { epsilon } => n.clamp(*epsilon, 1.0 - *epsilon),
        }
    }

    /// Scalar mobility `b` resp. `b_eps`.
    pub fn value(&self, n: f64) -> f64 {
        mobility(self.clamp_density(n))
    }

    /// Edge-wise upwind coefficient `n_up (1 - n_down)^2`, where `n_up` is
    /// the density on the node with the larger chemical potential.
    pub fn upwind_coefficient(&self, n_upstream: f64, n_downstream: f64) -> f64 {
        let a = self.clamp_density(n_upstream);
        let b = self.clamp_density(n_downstream);
        let om = 1.0 - b;
        a * om * om
    }
}

// ---- entropy density (requires epsilon > 0) ----
//
// phi_eps is the convex double antiderivative of 1/b_eps normalized by
// phi_eps(1/2) = phi_eps'(1/2) = 0. On [eps, 1-eps] partial fractions give
// 1/(s(1-s)^2) = 1/s + 1/(1-s) + 1/(1-s)^2, whose double antiderivative
// with the chosen normalization is
//     phi(s) = s ln s + (1-s) ln(1-s) - ln(1-s) - 2s + 1.
// Outside the interval the continuation is quadratic with curvature
// 1/b(eps) resp. 1/b(1-eps), matched to first order at the clamp points.

fn entropy_core(s: f64) -> f64 {
    s * s.ln() + (1.0 - s) * (1.0 - s).ln() - (1.0 - s).ln() - 2.0 * s + 1.0
}

fn dentropy_core(s: f64) -> f64 {
    (s / (1.0 - s)).ln() + 1.0 / (1.0 - s) - 2.0
}

/// Entropy density `phi_eps(n)`, convex, nonnegative, minimized at `n = 1/2`.
pub fn entropy_phi_eps(n: f64, epsilon: f64) -> f64 {
    assert!(epsilon > 0.0 && epsilon < 0.5);
    let (lo, hi) = (epsilon, 1.0 - epsilon);
    if n < lo {
        let d = n - lo;
        entropy_core(lo) + dentropy_core(lo) * d + 0.5 * d * d / mobility(lo)
    } else if n > hi {
        let d = n - hi;
        entropy_core(hi) + dentropy_core(hi) * d + 0.5 * d * d / mobility(hi)
    } else {
        entropy_core(n)
    }
}

/// First derivative of the entropy density.
pub fn dentropy_phi_eps(n: f64, epsilon: f64) -> f64 {
    assert!(epsilon > 0.0 && epsilon < 0.5);
    let (lo, hi) = (epsilon, 1.0 - epsilon);
    if n < lo {
        dentropy_core(lo) + (n - lo) / mobility(lo)
    } else if n > hi {
        dentropy_core(hi) + (n - hi) / mobility(hi)
    } else {
        dentropy_core(n)
    }
}

/// Second derivative `phi_eps'' = 1/b_eps`.
pub fn d2entropy_phi_eps(n: f64, epsilon: f64) -> f64 {
    assert!(epsilon > 0.0 && epsilon < 0.5);
    1.0 / mobility_eps(n, epsilon)
}
