//! Camera and disruption-statistics domain types, plus construction of the
//! first- and second-moment quantities the optimizer consumes: expected
//! delivered resolution per camera and the covariance of delivered
//! resolution between camera pairs.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("camera {id}: resolution must be positive, got {value}")]
    NonPositiveResolution { id: usize, value: f64 },
    #[error("camera {id}: beta shape parameters must be positive, got ({a}, {b})")]
    InvalidBetaShape { id: usize, a: f64, b: f64 },
    #[error("camera ids must be unique and contiguous from 0; camera at position {position} has id {id}")]
    BadCameraId { position: usize, id: usize },
    #[error("correlation matrix must be {expected}x{expected} to match {expected} cameras, got {actual}x{actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("correlation[{i}][{j}] = {value} is outside [-1, 1]")]
    CorrelationOutOfRange { i: usize, j: usize, value: f64 },
    #[error("correlation matrix is not symmetric at ({i}, {j}): {a} vs {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("correlation matrix diagonal entry {i} is {value}, expected exactly 1")]
    NonUnitDiagonal { i: usize, value: f64 },
    #[error("correlation matrix is not positive semidefinite: most negative eigenvalue {most_negative:.6e} (floor {floor:.6e})")]
    NotPositiveSemidefinite { most_negative: f64, floor: f64 },
    #[error("theta must be nonnegative, got {0}")]
    NegativeTheta(f64),
    #[error("psi must be at least 1, got {0}")]
    PsiTooSmall(f64),
}

/// Beta-distributed availability probability of one camera.
///
/// The probability that a camera delivers a usable frame is itself random
/// (it moves with interference, load, occlusion); this type holds the shape
/// parameters of its Beta law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvailabilityDist {
    alpha_shape: f64,
    beta_shape: f64,
}

impl AvailabilityDist {
    pub fn new(alpha_shape: f64, beta_shape: f64) -> Result<Self, ModelError> {
        // NaN shapes must fail alongside nonpositive ones.
        if alpha_shape <= 0.0 || beta_shape <= 0.0 || alpha_shape.is_nan() || beta_shape.is_nan() {
            return Err(ModelError::InvalidBetaShape {
                id: usize::MAX,
                a: alpha_shape,
                b: beta_shape,
            });
        }
        Ok(Self {
            alpha_shape,
            beta_shape,
        })
    }

    pub fn alpha_shape(&self) -> f64 {
        self.alpha_shape
    }

    pub fn beta_shape(&self) -> f64 {
        self.beta_shape
    }
}

impl Default for AvailabilityDist {
    /// Symmetric, moderate-variance default used when a scenario omits the
    /// shape parameters.
    fn default() -> Self {
        Self {
            alpha_shape: 2.0,
            beta_shape: 2.0,
        }
    }
}

/// Mean of the availability probability: a / (a + b).
pub fn beta_mean(d: AvailabilityDist) -> f64 {
    d.alpha_shape / (d.alpha_shape + d.beta_shape)
}

/// Standard deviation of the availability probability:
/// sqrt(ab / ((a+b)^2 (a+b+1))).
pub fn beta_std(d: AvailabilityDist) -> f64 {
    let (a, b) = (d.alpha_shape, d.beta_shape);
    let s = a + b;
    (a * b / (s * s * (s + 1.0))).sqrt()
}

/// One camera: its native resolution and its availability distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraSpec {
    pub id: usize,
    pub resolution: f64,
    pub avail: AvailabilityDist,
}

impl CameraSpec {
    pub fn new(id: usize, resolution: f64, avail: AvailabilityDist) -> Result<Self, ModelError> {
        // NaN resolutions must fail alongside nonpositive ones.
        if resolution <= 0.0 || resolution.is_nan() {
            return Err(ModelError::NonPositiveResolution {
                id,
                value: resolution,
            });
        }
        Ok(Self {
            id,
            resolution,
            avail,
        })
    }
}

/// Expected delivered resolution of one camera: R * E[p].
pub fn expected_resolution(c: &CameraSpec) -> f64 {
    c.resolution * beta_mean(c.avail)
}

/// Covariance of delivered resolution between two cameras:
/// R_i R_j sigma_i sigma_j rho_ij.
///
/// With i = j and rho = 1 this reduces to R^2 Var(p): the variance carried
/// by the availability probability alone, not the full on/off outcome
/// variance. The optimizer deliberately sees only this component.
pub fn resolution_covariance(
    ci: &CameraSpec,
    cj: &CameraSpec,
    rho_ij: f64,
) -> Result<f64, ModelError> {
    if !(-1.0..=1.0).contains(&rho_ij) {
        return Err(ModelError::CorrelationOutOfRange {
            i: ci.id,
            j: cj.id,
            value: rho_ij,
        });
    }
    Ok(ci.resolution * cj.resolution * beta_std(ci.avail) * beta_std(cj.avail) * rho_ij)
}

/// Validated correlation matrix of the availability probabilities.
///
/// Construction enforces symmetry, unit diagonal, entries in [-1, 1], and
/// positive semidefiniteness with an eigenvalue floor of -1e-9 times the
/// largest eigenvalue. A failing matrix is a user input error and is
/// rejected rather than repaired, since silent repair would change the
/// optimization problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    rho: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            rho: DMatrix::identity(n, n),
        }
    }

    pub fn new(rho: DMatrix<f64>) -> Result<Self, ModelError> {
        let n = rho.nrows();
        if rho.ncols() != n {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                actual: rho.ncols(),
            });
        }
        for i in 0..n {
            let d = rho[(i, i)];
            if d != 1.0 {
                return Err(ModelError::NonUnitDiagonal { i, value: d });
            }
            for j in (i + 1)..n {
                let (a, b) = (rho[(i, j)], rho[(j, i)]);
                if a != b {
                    return Err(ModelError::NotSymmetric { i, j, a, b });
                }
                if !(-1.0..=1.0).contains(&a) {
                    return Err(ModelError::CorrelationOutOfRange { i, j, value: a });
                }
            }
        }
        let eigen = rho.clone().symmetric_eigen();
        let max_eig = eigen.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let min_eig = eigen
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let floor = -1e-9 * max_eig;
        if min_eig < floor {
            return Err(ModelError::NotPositiveSemidefinite {
                most_negative: min_eig,
                floor,
            });
        }
        Ok(Self { rho })
    }

    pub fn n(&self) -> usize {
        self.rho.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rho[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.rho
    }
}

/// Everything the optimizer needs: expected resolutions, the resolution
/// covariance matrix, and the two thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioInputs {
    pub expected_res: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Minimum acceptable expected total delivered resolution.
    pub theta: f64,
    /// Camera budget: cap on the total selection mass.
    pub psi: f64,
}

impl PortfolioInputs {
    pub fn n(&self) -> usize {
        self.expected_res.len()
    }

    /// Largest expected quality reachable under the budget: greedily fill
    /// selection mass onto the highest-expectation cameras.
    pub fn max_achievable_quality(&self) -> f64 {
        let mut er: Vec<f64> = self.expected_res.iter().cloned().collect();
        er.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut remaining = self.psi;
        let mut total = 0.0;
        for e in er {
            if remaining <= 0.0 {
                break;
            }
            let take = remaining.min(1.0);
            total += take * e;
            remaining -= take;
        }
        total
    }
}

/// Assembles [`PortfolioInputs`] from cameras and their correlation matrix.
///
/// cov[i][j] = R_i R_j sigma_i sigma_j rho[i][j], equal to D rho D with
/// D = diag(R_i sigma_i); symmetry is exact by construction, and the result
/// is PSD whenever rho is. Theta above the budget-achievable quality makes
/// the instance infeasible; the optimizer handles that downstream
/// (best-effort solution, feasible = false), so it is not an error here.
pub fn build_portfolio_inputs(
    cameras: &[CameraSpec],
    rho: &CorrelationMatrix,
    theta: f64,
    psi: f64,
) -> Result<PortfolioInputs, ModelError> {
    validate_camera_ids(cameras)?;
    let n = cameras.len();
    if rho.n() != n {
        return Err(ModelError::DimensionMismatch {
            expected: n,
            actual: rho.n(),
        });
    }
    if theta < 0.0 {
        return Err(ModelError::NegativeTheta(theta));
    }
    if psi < 1.0 {
        return Err(ModelError::PsiTooSmall(psi));
    }
    let expected_res = DVector::from_iterator(n, cameras.iter().map(expected_resolution));
    let scale: Vec<f64> = cameras
        .iter()
        .map(|c| c.resolution * beta_std(c.avail))
        .collect();
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        cov[(i, i)] = scale[i] * scale[i];
        for j in (i + 1)..n {
            let v = scale[i] * scale[j] * rho.entry(i, j);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(PortfolioInputs {
        expected_res,
        cov,
        theta,
        psi,
    })
}

pub fn validate_camera_ids(cameras: &[CameraSpec]) -> Result<(), ModelError> {
    for (position, c) in cameras.iter().enumerate() {
        if c.id != position {
            return Err(ModelError::BadCameraId { position, id: c.id });
        }
    }
    Ok(())
}
