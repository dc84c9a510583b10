//! Shared stencil planning for the lattice kernel and the finite-difference
//! scheme.
//!
//! Both discretizations move mass (or difference weights) to axis neighbors
//! and, for correlated diffusions, to diagonal corners. The plan splits each
//! axis drift into a central part (up to the capacity the diffusion budget
//! allows) and an upwinded excess, and reports the total move mass per unit
//! time -- the reciprocal of the largest admissible dt.

use crate::linalg::SymMat;

/// How first-order terms are differenced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftMode {
    /// Central differencing up to the diffusion capacity, upwind the excess.
    /// Keeps the kernel's covariance error at O(dt^2) wherever capacity
    /// suffices while preserving positivity.
    CentralWithCapacity,
    /// Fully upwinded first-order terms (classic monotone FD scheme).
    FullUpwind,
}

#[derive(Debug, Clone, Copy)]
pub struct AxisPlan {
    /// Diagonal diffusion entry a_kk of sigma^2.
    pub a: f64,
    /// Diffusion remainder after the correlation splitting took its share.
    pub r: f64,
    /// Effective drift component.
    pub mu: f64,
    /// Centrally-differenced drift part, |mu_central| <= r / dx.
    pub mu_central: f64,
    /// Upwinded drift excess, mu = mu_central + mu_upwind.
    pub mu_upwind: f64,
    pub dx: f64,
}

#[derive(Debug, Clone)]
pub struct StencilPlan {
    pub dim: usize,
    pub axes: Vec<AxisPlan>,
    /// Positive part of the off-diagonal entry a_12 (d = 2 only).
    pub corner_pos: f64,
    /// Negative part of a_12 (stored >= 0).
    pub corner_neg: f64,
    /// True when a_12 = 0 and the kernel factors as a product of per-axis
    /// trinomials.
    pub product_form: bool,
}

impl StencilPlan {
    /// Build the plan for one (t, u, v) sample. Fails with a description
    /// when the correlation exceeds the diagonal budget.
    pub fn build(
        a: &SymMat,
        drift: &[f64],
        dxs: &[f64],
        mode: DriftMode,
    ) -> Result<StencilPlan, String> {
        let dim = a.dim;
        let a12 = if dim == 2 { a.a12 } else { 0.0 };
        let mut axes = Vec::with_capacity(dim);
        for k in 0..dim {
            let akk = a.diag_entry(k);
            let dx = dxs[k];
            let r = if dim == 2 {
                let dx_other = dxs[1 - k];
                akk - a12.abs() * dx / dx_other
            } else {
                akk
            };
            if r < 0.0 {
                return Err(format!(
                    "off-diagonal sigma^2 entry {a12:.6} exceeds the axis-{k} diagonal budget \
                     (a_kk = {akk:.6}, dx ratio {:.6}); refine dx on axis {k} or reduce the correlation",
                    dx / dxs[if dim == 2 { 1 - k } else { k }]
                ));
            }
            let mu = drift[k];
            let (mu_central, mu_upwind) = match mode {
                DriftMode::FullUpwind => (0.0, mu),
                DriftMode::CentralWithCapacity => {
                    let capacity = r / dx;
                    let c = mu.clamp(-capacity, capacity);
                    (c, mu - c)
                }
            };
            axes.push(AxisPlan { a: akk, r, mu, mu_central, mu_upwind, dx });
        }
        Ok(StencilPlan {
            dim,
            axes,
            corner_pos: a12.max(0.0),
            corner_neg: (-a12).max(0.0),
            product_form: a12 == 0.0,
        })
    }

    fn axis_rate(ax: &AxisPlan) -> f64 {
        (ax.r + ax.mu_upwind.abs() * ax.dx) / (ax.dx * ax.dx)
    }

    /// Move mass per unit time when each axis carries its own stay budget
    /// (product-of-trinomials kernels): the binding axis decides.
    pub fn mass_rate_per_axis(&self) -> f64 {
        self.axes.iter().map(Self::axis_rate).fold(0.0_f64, f64::max)
    }

    /// Move mass per unit time when all moves share one stay weight
    /// (superposition kernels and the FD scheme): axes sum, plus corners.
    pub fn mass_rate_total(&self) -> f64 {
        let corners = if self.dim == 2 {
            (self.corner_pos + self.corner_neg) / (self.axes[0].dx * self.axes[1].dx)
        } else {
            0.0
        };
        self.axes.iter().map(Self::axis_rate).sum::<f64>() + corners
    }

    /// dt * rate <= 1 keeps every kernel probability nonnegative.
    pub fn kernel_mass_rate(&self) -> f64 {
        if self.product_form {
            self.mass_rate_per_axis()
        } else {
            self.mass_rate_total()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn driftless_unit_diffusion_rate() {
        let plan = StencilPlan::build(
            &SymMat::scalar(1.0),
            &[0.0],
            &[0.1],
            DriftMode::CentralWithCapacity,
        )
        .unwrap();
        assert!((plan.kernel_mass_rate() - 100.0).abs() < 1e-9);
        assert!((plan.mass_rate_total() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn central_capacity_split() {
        // a = 0.09, dx = 0.12: capacity 0.75; drift 2 splits 0.75 + 1.25.
        let plan = StencilPlan::build(
            &SymMat::scalar(0.09),
            &[2.0],
            &[0.12],
            DriftMode::CentralWithCapacity,
        )
        .unwrap();
        assert!((plan.axes[0].mu_central - 0.75).abs() < 1e-12);
        assert!((plan.axes[0].mu_upwind - 1.25).abs() < 1e-12);
    }

    #[test]
    fn correlation_beyond_budget_fails() {
        let a = SymMat::new2(1.0, 1.5, 1.0);
        let err = StencilPlan::build(&a, &[0.0, 0.0], &[0.1, 0.1], DriftMode::FullUpwind);
        assert!(err.is_err());
    }

    #[test]
    fn correlated_plan_reserves_corners() {
        let a = SymMat::new2(1.0, 0.5, 1.0);
        let plan =
            StencilPlan::build(&a, &[0.0, 0.0], &[0.1, 0.1], DriftMode::FullUpwind).unwrap();
        assert!(!plan.product_form);
        assert!((plan.axes[0].r - 0.5).abs() < 1e-12);
        assert!((plan.corner_pos - 0.5).abs() < 1e-12);
        assert_eq!(plan.corner_neg, 0.0);
    }
}
