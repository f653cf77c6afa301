//! Basis-function spaces over the interaction phase, the per-DoF latent
//! decomposition, and the observation map `h(phase, weights)` together with
//! its analytic Jacobian.
//!
//! Phases outside [0, 1] are evaluated as-is: polynomials extrapolate and
//! RBF/sigmoid atoms decay through their natural tails. Nothing is clamped,
//! so the observation map stays differentiable wherever the filter wanders.

mod fit;

pub use fit::{
    default_candidates, fit_demonstration, fit_weights, sample_phases, select_basis, CandidateSet,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::core::{LatentState, ModalityLayout, PHASE, PHASE_VELOCITY, WEIGHT_OFFSET};
use crate::error::{Error, Result};

/// Relative phase of tick `t` in an interaction lasting `total` ticks:
/// `t / total`, so phase 0 at the start and 1 at the final tick.
pub fn compute_phase(tick: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(Error::Config("interaction duration must be at least 1 tick".into()));
    }
    Ok(tick as f64 / total as f64)
}

/// One family of scalar basis functions over the phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisFamily {
    /// `exp(-(phase - c_i)^2 / (2 width^2))` with a shared width.
    GaussianRbf { centers: Vec<f64>, width: f64 },
    /// `phase^i` for `i = 0..=degree`.
    Polynomial { degree: usize },
    /// `1 / (1 + exp(-(phase - c_i) / slope))`.
    Sigmoid { centers: Vec<f64>, slope: f64 },
}

impl BasisFamily {
    /// RBF atoms with centers uniformly spaced on [0, 1] and the default
    /// width `1 / (count - 1)` (0.5 for a single atom).
    pub fn uniform_rbf(count: usize) -> Self {
        let centers = uniform_centers(count);
        let width = if count > 1 { 1.0 / (count as f64 - 1.0) } else { 0.5 };
        BasisFamily::GaussianRbf { centers, width }
    }

    /// Sigmoid atoms with centers uniformly spaced on [0, 1].
    pub fn uniform_sigmoid(count: usize, slope: f64) -> Self {
        BasisFamily::Sigmoid { centers: uniform_centers(count), slope }
    }

    /// Number of basis functions contributed by this family.
    pub fn count(&self) -> usize {
        match self {
            BasisFamily::GaussianRbf { centers, .. } => centers.len(),
            BasisFamily::Polynomial { degree } => degree + 1,
            BasisFamily::Sigmoid { centers, .. } => centers.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BasisFamily::GaussianRbf { centers, width } => {
                if centers.is_empty() {
                    return Err(Error::Config("RBF family needs at least one center".into()));
                }
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::Config(format!("RBF width must be positive, got {width}")));
                }
                for pair in centers.windows(2) {
                    if pair[1] <= pair[0] {
                        return Err(Error::Config(
                            "RBF centers must be strictly increasing".into(),
                        ));
                    }
                }
                if centers.iter().any(|c| !(0.0..=1.0).contains(c)) {
                    return Err(Error::Config("RBF centers must lie in [0, 1]".into()));
                }
            }
            BasisFamily::Polynomial { .. } => {}
            BasisFamily::Sigmoid { centers, slope } => {
                if centers.is_empty() {
                    return Err(Error::Config("sigmoid family needs at least one center".into()));
                }
                if !(slope.is_finite() && *slope > 0.0) {
                    return Err(Error::Config(format!(
                        "sigmoid slope must be positive, got {slope}"
                    )));
                }
                if centers.iter().any(|c| !(0.0..=1.0).contains(c)) {
                    return Err(Error::Config("sigmoid centers must lie in [0, 1]".into()));
                }
            }
        }
        Ok(())
    }

    /// Row of basis values at `phase`, written into `out`.
    pub fn evaluate_into(&self, phase: f64, out: &mut [f64]) {
        match self {
            BasisFamily::GaussianRbf { centers, width } => {
                let inv = 1.0 / (2.0 * width * width);
                for (o, c) in out.iter_mut().zip(centers) {
                    let d = phase - c;
                    *o = (-d * d * inv).exp();
                }
            }
            BasisFamily::Polynomial { degree } => {
                let mut p = 1.0;
                for o in out.iter_mut().take(degree + 1) {
                    *o = p;
                    p *= phase;
                }
            }
            BasisFamily::Sigmoid { centers, slope } => {
                for (o, c) in out.iter_mut().zip(centers) {
                    *o = sigmoid((phase - c) / slope);
                }
            }
        }
    }

    /// Elementwise derivatives with respect to the phase, written into `out`.
    pub fn derivative_into(&self, phase: f64, out: &mut [f64]) {
        match self {
            BasisFamily::GaussianRbf { centers, width } => {
                let inv2 = 1.0 / (width * width);
                for (o, c) in out.iter_mut().zip(centers) {
                    let d = phase - c;
                    *o = -d * inv2 * (-d * d * 0.5 * inv2).exp();
                }
            }
            BasisFamily::Polynomial { degree } => {
                out[0] = 0.0;
                let mut p = 1.0;
                for i in 1..=*degree {
                    out[i] = i as f64 * p;
                    p *= phase;
                }
            }
            BasisFamily::Sigmoid { centers, slope } => {
                for (o, c) in out.iter_mut().zip(centers) {
                    let s = sigmoid((phase - c) / slope);
                    *o = s * (1.0 - s) / slope;
                }
            }
        }
    }

    pub fn evaluate(&self, phase: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.count());
        self.evaluate_into(phase, out.as_mut_slice());
        out
    }

    pub fn derivative(&self, phase: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.count());
        self.derivative_into(phase, out.as_mut_slice());
        out
    }
}

fn uniform_centers(count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5];
    }
    (0..count).map(|i| i as f64 / (count as f64 - 1.0)).collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One basis family per degree of freedom, with the per-DoF weight blocks
/// stored contiguously in layout order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBasisModel")]
pub struct BasisModel {
    families: Vec<BasisFamily>,
    /// Block start offsets into the weight vector; length `D + 1`, last entry
    /// equals the total weight count B.
    offsets: Vec<usize>,
}

#[derive(Deserialize)]
struct RawBasisModel {
    families: Vec<BasisFamily>,
    offsets: Vec<usize>,
}

impl TryFrom<RawBasisModel> for BasisModel {
    type Error = Error;

    fn try_from(raw: RawBasisModel) -> Result<Self> {
        let model = BasisModel::new(raw.families)?;
        if model.offsets != raw.offsets {
            return Err(Error::Data("basis model offsets do not match its families".into()));
        }
        Ok(model)
    }
}

impl BasisModel {
    pub fn new(families: Vec<BasisFamily>) -> Result<Self> {
        if families.is_empty() {
            return Err(Error::Config("basis model needs at least one DoF".into()));
        }
        let mut offsets = Vec::with_capacity(families.len() + 1);
        let mut total = 0usize;
        for f in &families {
            f.validate()?;
            offsets.push(total);
            total += f.count();
        }
        offsets.push(total);
        Ok(BasisModel { families, offsets })
    }

    /// A model using the same family for every DoF of the layout.
    pub fn uniform(layout: &ModalityLayout, family: BasisFamily) -> Result<Self> {
        BasisModel::new(vec![family; layout.total_dofs()])
    }

    pub fn dof_count(&self) -> usize {
        self.families.len()
    }

    /// Total weight count B.
    pub fn total_weights(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Augmented state dimension 2 + B.
    pub fn state_dim(&self) -> usize {
        WEIGHT_OFFSET + self.total_weights()
    }

    pub fn family(&self, dof: usize) -> &BasisFamily {
        &self.families[dof]
    }

    pub fn families(&self) -> &[BasisFamily] {
        &self.families
    }

    /// Weight-vector range owned by `dof`.
    pub fn block(&self, dof: usize) -> std::ops::Range<usize> {
        self.offsets[dof]..self.offsets[dof + 1]
    }

    /// The observation map: `y_d = basis_d(phase) . weights_d` per DoF.
    /// `weights` must have length B.
    pub fn observe(&self, phase: f64, weights: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dof_count());
        let mut scratch = vec![0.0; self.max_block()];
        for (d, family) in self.families.iter().enumerate() {
            let block = self.block(d);
            let row = &mut scratch[..family.count()];
            family.evaluate_into(phase, row);
            out[d] = dot(row, &weights[block]);
        }
        out
    }

    /// The observation map restricted to a subset of dimensions.
    pub fn observe_dims(&self, phase: f64, weights: &[f64], dims: &[usize]) -> DVector<f64> {
        let mut out = DVector::zeros(dims.len());
        self.observe_dims_into(phase, weights, dims, out.as_mut_slice());
        out
    }

    pub(crate) fn observe_dims_into(
        &self,
        phase: f64,
        weights: &[f64],
        dims: &[usize],
        out: &mut [f64],
    ) {
        let mut scratch = [0.0; 64];
        let mut heap: Vec<f64>;
        for (k, &d) in dims.iter().enumerate() {
            let family = &self.families[d];
            let row: &mut [f64] = if family.count() <= 64 {
                &mut scratch[..family.count()]
            } else {
                heap = vec![0.0; family.count()];
                &mut heap[..]
            };
            family.evaluate_into(phase, row);
            out[k] = dot(row, &weights[self.block(d)]);
        }
    }

    /// Convenience wrapper over a full latent state.
    pub fn observe_state(&self, state: &LatentState) -> DVector<f64> {
        self.observe(state.phase, state.weights.as_slice())
    }

    /// Observation map applied to a flattened state vector
    /// `[phase, phase_velocity, weights...]`.
    pub fn observe_vector(&self, state: &[f64]) -> DVector<f64> {
        self.observe(state[PHASE], &state[WEIGHT_OFFSET..])
    }

    /// Jacobian of the observation map with respect to the augmented state,
    /// restricted to the dimensions in `dims` (rows) in the given order.
    ///
    /// Column 0 holds the per-DoF phase derivative `d(basis_d . w_d)/dphase`,
    /// column 1 (phase velocity) is zero, and the weight columns carry the
    /// basis row of each DoF in its own block, zero elsewhere.
    pub fn jacobian_dims(&self, phase: f64, weights: &[f64], dims: &[usize]) -> DMatrix<f64> {
        let n = self.state_dim();
        let mut jac = DMatrix::zeros(dims.len(), n);
        let mut scratch = vec![0.0; self.max_block()];
        for (k, &d) in dims.iter().enumerate() {
            let family = &self.families[d];
            let block = self.block(d);
            let row = &mut scratch[..family.count()];

            family.derivative_into(phase, row);
            jac[(k, PHASE)] = dot(row, &weights[block.clone()]);
            jac[(k, PHASE_VELOCITY)] = 0.0;

            family.evaluate_into(phase, row);
            for (i, offset) in block.enumerate() {
                jac[(k, WEIGHT_OFFSET + offset)] = row[i];
            }
        }
        jac
    }

    /// Full D-by-(2+B) observation Jacobian.
    pub fn jacobian(&self, phase: f64, weights: &[f64]) -> DMatrix<f64> {
        let dims: Vec<usize> = (0..self.dof_count()).collect();
        self.jacobian_dims(phase, weights, &dims)
    }

    fn max_block(&self) -> usize {
        self.families.iter().map(BasisFamily::count).max().unwrap_or(0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
