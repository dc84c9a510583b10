//! Lower and upper Hamiltonians by exhaustive enumeration over the finite
//! control sets, the Isaacs-condition checker, and the shared minimax
//! machinery (lowest-index tie-breaking everywhere).

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::linalg::{dot, SymMat};
use crate::model::{Coefficients, GameSpec};
use crate::tolerances::GAMMA_SYMMETRY_TOL;

/// Arguments of the Hamiltonian: time, state (spatial plus the optional
/// statistic), value, gradient, and symmetric Hessian.
#[derive(Debug, Clone)]
pub struct HamiltonianInput {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: f64,
    pub z: Vec<f64>,
    pub gamma: SymMat,
}

impl HamiltonianInput {
    pub fn new(t: f64, x: Vec<f64>, y: f64, z: Vec<f64>, gamma: SymMat) -> Self {
        HamiltonianInput { t, x, y, z, gamma }
    }

    /// Builds the Hessian from full row-major entries, checking symmetry.
    pub fn with_gamma_rows(
        t: f64,
        x: Vec<f64>,
        y: f64,
        z: Vec<f64>,
        rows: &[&[f64]],
    ) -> Result<Self> {
        let dim = rows.len();
        let gamma = match dim {
            1 => SymMat::scalar(rows[0][0]),
            2 => {
                if (rows[0][1] - rows[1][0]).abs() > GAMMA_SYMMETRY_TOL {
                    return Err(LabError::InvalidScenario(format!(
                        "gamma is not symmetric: a12 = {}, a21 = {}",
                        rows[0][1], rows[1][0]
                    )));
                }
                SymMat::new2(rows[0][0], rows[0][1], rows[1][1])
            }
            d => {
                return Err(LabError::InvalidScenario(format!(
                    "unsupported Hessian dimension {d}"
                )))
            }
        };
        Ok(HamiltonianInput { t, x, y, z, gamma })
    }
}

/// One control pair's contribution:
/// 1/2 sigma^2 : gamma + (sigma b) . z + f(t, x, y, z sigma, u, v).
pub fn payoff(input: &HamiltonianInput, u: &[f64], v: &[f64], coeffs: &Coefficients) -> f64 {
    let sigma = coeffs.sigma(input.t, u, v);
    let second_order = 0.5 * sigma.square().trace_product(&input.gamma);
    let drift = coeffs.drift(input.t, u, v);
    let z_sigma = sigma.mul_vec(&input.z);
    second_order
        + dot(&drift, &input.z)
        + coeffs.f(input.t, &input.x, input.y, &z_sigma, u, v)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HamiltonianResult {
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    /// Outer maximizer of the sup-inf problem.
    pub lower_argmax_u: usize,
    /// Inner minimizer at that maximizer.
    pub lower_argmin_v: usize,
    /// Outer minimizer of the inf-sup problem.
    pub upper_argmin_v: usize,
    /// Inner maximizer at that minimizer.
    pub upper_argmax_u: usize,
}

/// Max over u of min over v on a u-major payoff matrix. Lowest index wins
/// ties on both layers.
pub fn sup_inf(matrix: &[f64], nu: usize, nv: usize) -> (f64, usize, usize) {
    debug_assert_eq!(matrix.len(), nu * nv);
    let mut best = f64::NEG_INFINITY;
    let mut best_u = 0;
    let mut best_v = 0;
    for ui in 0..nu {
        let row = &matrix[ui * nv..(ui + 1) * nv];
        let mut inner = f64::INFINITY;
        let mut inner_v = 0;
        for (vi, &p) in row.iter().enumerate() {
            if p < inner {
                inner = p;
                inner_v = vi;
            }
        }
        if inner > best {
            best = inner;
            best_u = ui;
            best_v = inner_v;
        }
    }
    (best, best_u, best_v)
}

/// Min over v of max over u on a u-major payoff matrix.
pub fn inf_sup(matrix: &[f64], nu: usize, nv: usize) -> (f64, usize, usize) {
    debug_assert_eq!(matrix.len(), nu * nv);
    let mut best = f64::INFINITY;
    let mut best_u = 0;
    let mut best_v = 0;
    for vi in 0..nv {
        let mut inner = f64::NEG_INFINITY;
        let mut inner_u = 0;
        for ui in 0..nu {
            let p = matrix[ui * nv + vi];
            if p > inner {
                inner = p;
                inner_u = ui;
            }
        }
        if inner < best {
            best = inner;
            best_v = vi;
            best_u = inner_u;
        }
    }
    (best, best_u, best_v)
}

pub fn minimax_matrix(matrix: &[f64], nu: usize, nv: usize) -> HamiltonianResult {
    let (lower, lu, lv) = sup_inf(matrix, nu, nv);
    let (upper, uu, uv) = inf_sup(matrix, nu, nv);
    HamiltonianResult {
        lower,
        upper,
        gap: upper - lower,
        lower_argmax_u: lu,
        lower_argmin_v: lv,
        upper_argmin_v: uv,
        upper_argmax_u: uu,
    }
}

/// Exhaustive sup-inf / inf-sup of the Hamiltonian: |U| * |V| payoff
/// evaluations shared by both sides.
pub fn lower_upper(input: &HamiltonianInput, spec: &GameSpec) -> HamiltonianResult {
    let nu = spec.u_set.len();
    let nv = spec.v_set.len();
    let mut matrix = vec![0.0; nu * nv];
    for ui in 0..nu {
        for vi in 0..nv {
            matrix[ui * nv + vi] = payoff(
                input,
                spec.u_set.point(ui),
                spec.v_set.point(vi),
                &spec.coeffs,
            );
        }
    }
    minimax_matrix(&matrix, nu, nv)
}

#[derive(Debug, Clone, Serialize)]
pub struct IsaacsWitness {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: f64,
    pub z: Vec<f64>,
    pub gamma: SymMat,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsaacsReport {
    pub scenario: String,
    pub samples: usize,
    pub tolerance: f64,
    pub max_gap: f64,
    pub witness: Option<IsaacsWitness>,
    pub passed: bool,
}

/// Samples Hamiltonian arguments from the regime the solvers visit
/// (|x| <= 3 C0 sqrt(T), |y| <= value bound, |z| <= 10, Hessian
/// eigenvalues in [-10, 10]) and reports the largest sup-inf vs inf-sup
/// gap against the tolerance.
pub fn isaacs_check(
    spec: &GameSpec,
    sample_count: usize,
    tolerance: f64,
    seed: u64,
) -> Result<IsaacsReport> {
    if sample_count == 0 {
        return Err(LabError::Config("sample_count must be >= 1".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let x_radius = 3.0 * spec.coeffs.c0 * spec.horizon.sqrt();
    let y_bound = spec.value_bound();
    let mut max_gap = f64::NEG_INFINITY;
    let mut witness = None;
    for _ in 0..sample_count {
        let t = rng.random_range(0.0..=spec.horizon);
        let mut x = vec![0.0; spec.state_dim()];
        for c in x.iter_mut().take(spec.dim) {
            *c = rng.random_range(-x_radius..=x_radius);
        }
        if let Some(aug) = &spec.augmentation {
            x[spec.dim] = rng.random_range(aug.lo..=aug.hi);
        }
        let y = rng.random_range(-y_bound..=y_bound);
        let z: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(-10.0..=10.0)).collect();
        let gamma = random_gamma(spec.dim, &mut rng);
        let input = HamiltonianInput::new(t, x, y, z, gamma);
        let result = lower_upper(&input, spec);
        if result.gap > max_gap {
            max_gap = result.gap;
            witness = Some(IsaacsWitness {
                t: input.t,
                x: input.x,
                y: input.y,
                z: input.z,
                gamma: input.gamma,
                lower: result.lower,
                upper: result.upper,
            });
        }
    }
    Ok(IsaacsReport {
        scenario: spec.name.clone(),
        samples: sample_count,
        tolerance,
        max_gap,
        witness,
        passed: max_gap <= tolerance,
    })
}

/// Random symmetric matrix with eigenvalues uniform in [-10, 10].
fn random_gamma(dim: usize, rng: &mut StdRng) -> SymMat {
    if dim == 1 {
        SymMat::scalar(rng.random_range(-10.0..=10.0))
    } else {
        let l1: f64 = rng.random_range(-10.0..=10.0);
        let l2: f64 = rng.random_range(-10.0..=10.0);
        let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let (s, c) = theta.sin_cos();
        SymMat::new2(
            l1 * c * c + l2 * s * s,
            (l1 - l2) * s * c,
            l1 * s * s + l2 * c * c,
        )
    }
}
