use std::sync::Arc;

use crate::linalg::SymMat;

pub type SigmaFn = dyn Fn(f64, &[f64], &[f64]) -> SymMat + Send + Sync;
pub type VectorFn = dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync;
/// Driver signature: (t, state, y, z·sigma, u, v) -> scalar.
pub type DriverFn = dyn Fn(f64, &[f64], f64, &[f64], &[f64], &[f64]) -> f64 + Send + Sync;
pub type TerminalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Modulus-of-continuity descriptor for the terminal payoff and the driver
/// in the state variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modulus {
    Lipschitz { constant: f64 },
}

impl Modulus {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Modulus::Lipschitz { constant } => constant * r,
        }
    }

    pub fn lipschitz(constant: f64) -> Self {
        Modulus::Lipschitz { constant }
    }
}

/// Scenario coefficients: diffusion sigma, bare drift factor b, the effective
/// drift that enters the state dynamics, driver f, and terminal payoff xi,
/// together with the declared bound constants.
///
/// The effective drift is sigma*b under the standard construction; the
/// dynamics never use bare b. A family may instead supply the effective
/// drift directly (then b is stored equal to it for the bound checks).
#[derive(Clone)]
pub struct Coefficients {
    pub dim: usize,
    sigma: Arc<SigmaFn>,
    b: Arc<VectorFn>,
    drift: Arc<VectorFn>,
    f: Arc<DriverFn>,
    xi: Arc<TerminalFn>,
    /// Uniform bound on sigma, b, f(.,0,0,.,.), xi (max-abs-component norms).
    pub c0: f64,
    /// Lipschitz constant of f in (y, z).
    pub l0: f64,
    /// State modulus of continuity for xi and f.
    pub rho0: Modulus,
    pub f_uses_state: bool,
    pub f_uses_y: bool,
    pub f_uses_z: bool,
}

impl std::fmt::Debug for Coefficients {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("Coefficients")
            .field("dim", &self.dim)
            .field("c0", &self.c0)
            .field("l0", &self.l0)
            .field("rho0", &self.rho0)
            .finish_non_exhaustive()
    }
}

pub struct CoefficientBuilder {
    dim: usize,
    sigma: Arc<SigmaFn>,
    b: Arc<VectorFn>,
    drift: Option<Arc<VectorFn>>,
    f: Arc<DriverFn>,
    xi: Arc<TerminalFn>,
    c0: f64,
    l0: f64,
    rho0: Modulus,
    f_uses_state: bool,
    f_uses_y: bool,
    f_uses_z: bool,
}

impl CoefficientBuilder {
    pub fn new(dim: usize, sigma: Arc<SigmaFn>, b: Arc<VectorFn>) -> Self {
        CoefficientBuilder {
            dim,
            sigma,
            b,
            drift: None,
            f: Arc::new(|_, _, _, _, _, _| 0.0),
            xi: Arc::new(|_| 0.0),
            c0: 1.0,
            l0: 0.0,
            rho0: Modulus::lipschitz(0.0),
            f_uses_state: false,
            f_uses_y: false,
            f_uses_z: false,
        }
    }

    /// Standard construction: the effective drift is derived as sigma*b.
    pub fn derive_drift(mut self) -> Self {
        let sigma = Arc::clone(&self.sigma);
        let b = Arc::clone(&self.b);
        self.drift = Some(Arc::new(move |t, u, v| {
            let s = sigma(t, u, v);
            let bv = b(t, u, v);
            s.mul_vec(&bv)
        }));
        self
    }

    /// Direct construction: the given closure IS the effective drift and b
    /// is stored equal to it for the bound checks.
    pub fn direct_drift(mut self, drift: Arc<VectorFn>) -> Self {
        self.b = Arc::clone(&drift);
        self.drift = Some(drift);
        self
    }

    pub fn driver(mut self, f: Arc<DriverFn>, uses_state: bool, uses_y: bool, uses_z: bool) -> Self {
        self.f = f;
        self.f_uses_state = uses_state;
        self.f_uses_y = uses_y;
        self.f_uses_z = uses_z;
        self
    }

    pub fn terminal(mut self, xi: Arc<TerminalFn>) -> Self {
        self.xi = xi;
        self
    }

    pub fn bounds(mut self, c0: f64, l0: f64, rho0: Modulus) -> Self {
        self.c0 = c0;
        self.l0 = l0;
        self.rho0 = rho0;
        self
    }

    pub fn build(self) -> Coefficients {
        let drift = self.drift.unwrap_or_else(|| {
            let sigma = Arc::clone(&self.sigma);
            let b = Arc::clone(&self.b);
            Arc::new(move |t, u, v| sigma(t, u, v).mul_vec(&b(t, u, v)))
        });
        Coefficients {
            dim: self.dim,
            sigma: self.sigma,
            b: self.b,
            drift,
            f: self.f,
            xi: self.xi,
            c0: self.c0,
            l0: self.l0,
            rho0: self.rho0,
            f_uses_state: self.f_uses_state,
            f_uses_y: self.f_uses_y,
            f_uses_z: self.f_uses_z,
        }
    }
}

impl Coefficients {
    pub fn sigma(&self, t: f64, u: &[f64], v: &[f64]) -> SymMat {
        (self.sigma)(t, u, v)
    }

    pub fn b(&self, t: f64, u: &[f64], v: &[f64]) -> Vec<f64> {
        (self.b)(t, u, v)
    }

    /// Effective drift entering the state dynamics and the Hamiltonian
    /// first-order term.
    pub fn drift(&self, t: f64, u: &[f64], v: &[f64]) -> Vec<f64> {
        (self.drift)(t, u, v)
    }

    /// Driver evaluated at (t, x, y, z*sigma, u, v).
    pub fn f(&self, t: f64, x: &[f64], y: f64, z_sigma: &[f64], u: &[f64], v: &[f64]) -> f64 {
        (self.f)(t, x, y, z_sigma, u, v)
    }

    pub fn xi(&self, x: &[f64]) -> f64 {
        (self.xi)(x)
    }

    pub fn f_uses_yz(&self) -> bool {
        self.f_uses_y || self.f_uses_z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_drift_is_sigma_times_b() {
        let coeffs = CoefficientBuilder::new(
            2,
            Arc::new(|_, _, _| SymMat::diag2(2.0, 3.0)),
            Arc::new(|_, _, _| vec![1.0, -1.0]),
        )
        .derive_drift()
        .build();
        let d = coeffs.drift(0.0, &[0.0], &[0.0]);
        assert_eq!(d, vec![2.0, -3.0]);
    }

    #[test]
    fn direct_drift_sets_b() {
        let coeffs = CoefficientBuilder::new(
            2,
            Arc::new(|_, _, _| SymMat::diag2(0.0, 0.0)),
            Arc::new(|_, _, _| vec![0.0, 0.0]),
        )
        .direct_drift(Arc::new(|_, u, v| vec![u[0], v[0]]))
        .build();
        assert_eq!(coeffs.drift(0.0, &[1.0], &[-2.0]), vec![1.0, -2.0]);
        assert_eq!(coeffs.b(0.0, &[1.0], &[-2.0]), vec![1.0, -2.0]);
    }
}
