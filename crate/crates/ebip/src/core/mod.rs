//! Domain types shared by every other module: modality layouts, recorded
//! demonstrations, live observations, and the phase-augmented latent state in
//! scalar, Gaussian, and ensemble form.
//!
//! All types here are immutable values and safe to share across threads.

pub mod io;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the phase component in a flattened latent state vector.
pub const PHASE: usize = 0;
/// Index of the phase-velocity component in a flattened latent state vector.
pub const PHASE_VELOCITY: usize = 1;
/// Offset of the first weight component in a flattened latent state vector.
pub const WEIGHT_OFFSET: usize = 2;

/// Whether a degree of freedom is measured from the environment or inferred
/// and executed by the controlled agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DofRole {
    Observed,
    Controlled,
}

/// One named sensor or actuator group contributing `dof_count` dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Modality {
    pub name: String,
    pub dof_count: usize,
    pub role: DofRole,
}

impl Modality {
    pub fn observed(name: &str, dof_count: usize) -> Self {
        Modality { name: name.to_string(), dof_count, role: DofRole::Observed }
    }

    pub fn controlled(name: &str, dof_count: usize) -> Self {
        Modality { name: name.to_string(), dof_count, role: DofRole::Controlled }
    }
}

/// Ordered list of modalities fixing the dimension order of every vector and
/// matrix in the pipeline. The layout is the single source of truth for
/// per-DoF indexing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLayout")]
pub struct ModalityLayout {
    modalities: Vec<Modality>,
}

#[derive(Deserialize)]
struct RawLayout {
    modalities: Vec<Modality>,
}

impl TryFrom<RawLayout> for ModalityLayout {
    type Error = Error;

    fn try_from(raw: RawLayout) -> Result<Self> {
        ModalityLayout::new(raw.modalities)
    }
}

impl ModalityLayout {
    /// Validates uniqueness of names, positive DoF counts, and the presence of
    /// at least one observed and one controlled degree of freedom.
    pub fn new(modalities: Vec<Modality>) -> Result<Self> {
        if modalities.is_empty() {
            return Err(Error::Config("layout must contain at least one modality".into()));
        }
        for m in &modalities {
            if m.dof_count == 0 {
                return Err(Error::Config(format!("modality '{}' has zero DoFs", m.name)));
            }
        }
        for (i, m) in modalities.iter().enumerate() {
            if modalities[..i].iter().any(|other| other.name == m.name) {
                return Err(Error::Config(format!("duplicate modality name '{}'", m.name)));
            }
        }
        let has_observed = modalities.iter().any(|m| m.role == DofRole::Observed);
        let has_controlled = modalities.iter().any(|m| m.role == DofRole::Controlled);
        if !has_observed || !has_controlled {
            return Err(Error::Config(
                "layout needs at least one observed and one controlled degree of freedom".into(),
            ));
        }
        Ok(ModalityLayout { modalities })
    }

    pub fn modalities(&self) -> &[Modality] {
        &self.modalities
    }

    /// Total number of degrees of freedom D.
    pub fn total_dofs(&self) -> usize {
        self.modalities.iter().map(|m| m.dof_count).sum()
    }

    pub fn observed_dofs(&self) -> usize {
        self.modalities
            .iter()
            .filter(|m| m.role == DofRole::Observed)
            .map(|m| m.dof_count)
            .sum()
    }

    pub fn controlled_dofs(&self) -> usize {
        self.total_dofs() - self.observed_dofs()
    }

    /// Dimension range occupied by modality `index` in layout order.
    pub fn dof_range(&self, index: usize) -> std::ops::Range<usize> {
        let start: usize = self.modalities[..index].iter().map(|m| m.dof_count).sum();
        start..start + self.modalities[index].dof_count
    }

    pub fn modality_index(&self, name: &str) -> Option<usize> {
        self.modalities.iter().position(|m| m.name == name)
    }

    /// Role of each degree of freedom, flattened in layout order.
    pub fn dof_roles(&self) -> Vec<DofRole> {
        let mut roles = Vec::with_capacity(self.total_dofs());
        for m in &self.modalities {
            roles.extend(std::iter::repeat(m.role).take(m.dof_count));
        }
        roles
    }

    pub fn controlled_indices(&self) -> Vec<usize> {
        self.dof_roles()
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == DofRole::Controlled)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn observed_indices(&self) -> Vec<usize> {
        self.dof_roles()
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == DofRole::Observed)
            .map(|(i, _)| i)
            .collect()
    }

    /// Stable FNV-1a hash of the canonical JSON encoding, used to detect
    /// layout mismatches between files produced at different times.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("layout serialization cannot fail");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in json.as_bytes() {
            h ^= u64::from(*byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// A complete recorded interaction: D rows (layout order) by T columns.
///
/// Column `t` holds the sample taken at the end of tick `t + 1`, i.e. at
/// phase `(t + 1) / T`. Training data must be complete; NaN and infinite
/// values are rejected (occlusion exists only at inference time).
#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    layout: ModalityLayout,
    samples: DMatrix<f64>,
    sample_rate: f64,
}

impl Demonstration {
    pub fn new(layout: ModalityLayout, samples: DMatrix<f64>, sample_rate: f64) -> Result<Self> {
        if samples.nrows() != layout.total_dofs() {
            return Err(Error::Data(format!(
                "demonstration has {} rows but layout declares {} DoFs",
                samples.nrows(),
                layout.total_dofs()
            )));
        }
        if samples.ncols() < 2 {
            return Err(Error::Data(format!(
                "demonstration needs at least 2 ticks, got {}",
                samples.ncols()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("demonstration contains NaN or infinite samples".into()));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Data(format!("invalid sample rate {sample_rate}")));
        }
        Ok(Demonstration { layout, samples, sample_rate })
    }

    pub fn layout(&self) -> &ModalityLayout {
        &self.layout
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Duration T in ticks.
    pub fn duration(&self) -> usize {
        self.samples.ncols()
    }

    pub fn dof_count(&self) -> usize {
        self.samples.nrows()
    }

    /// Time series of a single degree of freedom.
    pub fn dof_series(&self, dof: usize) -> Vec<f64> {
        self.samples.row(dof).iter().copied().collect()
    }
}

/// A single multimodal measurement with a per-dimension validity mask.
/// Entries whose mask is false are ignored by every consumer.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub values: DVector<f64>,
    pub mask: Vec<bool>,
}

impl Observation {
    pub fn new(values: DVector<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(Error::Data(format!(
                "observation has {} values but {} mask entries",
                values.len(),
                mask.len()
            )));
        }
        for (i, (&v, &m)) in values.iter().zip(mask.iter()).enumerate() {
            if m && !v.is_finite() {
                return Err(Error::Data(format!("masked-in observation entry {i} is not finite")));
            }
        }
        Ok(Observation { values, mask })
    }

    /// Indices of dimensions observed this tick.
    pub fn active_dims(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| i)
            .collect()
    }

    /// True when live inference could legally produce this observation:
    /// controlled DoFs must never be masked in.
    pub fn respects_roles(&self, layout: &ModalityLayout) -> bool {
        self.mask.len() == layout.total_dofs()
            && layout
                .controlled_indices()
                .iter()
                .all(|&d| !self.mask[d])
    }
}

/// The augmented latent state: phase, phase velocity, and the per-DoF basis
/// weight blocks laid out contiguously in modality order.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentState {
    pub phase: f64,
    pub phase_velocity: f64,
    pub weights: DVector<f64>,
}

impl LatentState {
    pub fn new(phase: f64, phase_velocity: f64, weights: DVector<f64>) -> Result<Self> {
        if !phase.is_finite() || !phase_velocity.is_finite() {
            return Err(Error::Data("latent state phase components must be finite".into()));
        }
        if phase_velocity <= 0.0 {
            return Err(Error::Data(format!(
                "phase velocity must be positive, got {phase_velocity}"
            )));
        }
        Ok(LatentState { phase, phase_velocity, weights })
    }

    pub fn dim(&self) -> usize {
        WEIGHT_OFFSET + self.weights.len()
    }

    /// Flattened vector `[phase, phase_velocity, weights...]`.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v[PHASE] = self.phase;
        v[PHASE_VELOCITY] = self.phase_velocity;
        v.rows_mut(WEIGHT_OFFSET, self.weights.len()).copy_from(&self.weights);
        v
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        LatentState {
            phase: v[PHASE],
            phase_velocity: v[PHASE_VELOCITY],
            weights: DVector::from_iterator(
                v.len() - WEIGHT_OFFSET,
                v.rows(WEIGHT_OFFSET, v.len() - WEIGHT_OFFSET).iter().copied(),
            ),
        }
    }
}

/// A set of latent-state samples representing the filtering belief
/// non-parametrically. Stored with one member per column so that member
/// slices are contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    members: DMatrix<f64>,
}

impl Ensemble {
    /// Builds an ensemble from a state-dim-by-members matrix.
    pub fn from_columns(members: DMatrix<f64>) -> Result<Self> {
        if members.ncols() == 0 {
            return Err(Error::Data("ensemble must contain at least one member".into()));
        }
        if members.nrows() < WEIGHT_OFFSET {
            return Err(Error::Data("ensemble state dimension must be at least 2".into()));
        }
        if members.row(PHASE).iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("ensemble member phases must be finite".into()));
        }
        Ok(Ensemble { members })
    }

    pub fn from_states(states: &[LatentState]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Data("ensemble must contain at least one member".into()));
        }
        let dim = states[0].dim();
        if states.iter().any(|s| s.dim() != dim) {
            return Err(Error::Data("ensemble members must share one state dimension".into()));
        }
        let mut m = DMatrix::zeros(dim, states.len());
        for (j, s) in states.iter().enumerate() {
            m.set_column(j, &s.to_vector());
        }
        Ensemble::from_columns(m)
    }

    /// Number of members E.
    pub fn len(&self) -> usize {
        self.members.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.members.ncols() == 0
    }

    /// Augmented state dimension 2 + B.
    pub fn state_dim(&self) -> usize {
        self.members.nrows()
    }

    pub fn members(&self) -> &DMatrix<f64> {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.members
    }

    pub fn member(&self, j: usize) -> DVector<f64> {
        self.members.column(j).into_owned()
    }

    /// Mean member.
    pub fn mean(&self) -> DVector<f64> {
        self.members.column_mean()
    }
}

/// A Gaussian belief over the augmented state.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianBelief {
    /// Validates symmetry (relative tolerance 1e-9) and a non-negative
    /// diagonal.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::Data(format!(
                "covariance is {}x{} but the mean has {} entries",
                covariance.nrows(),
                covariance.ncols(),
                n
            )));
        }
        let scale = covariance.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
        for i in 0..n {
            if covariance[(i, i)] < -1e-9 * scale {
                return Err(Error::Data(format!(
                    "covariance diagonal entry {i} is negative: {}",
                    covariance[(i, i)]
                )));
            }
            for j in (i + 1)..n {
                let asym = (covariance[(i, j)] - covariance[(j, i)]).abs();
                if asym > 1e-9 * scale {
                    return Err(Error::Data(format!(
                        "covariance is asymmetric at ({i},{j}): |delta| = {asym}"
                    )));
                }
            }
        }
        Ok(GaussianBelief { mean, covariance })
    }

    /// Constructor for filter-internal results: symmetrizes and clamps
    /// round-off negatives on the diagonal instead of rejecting them.
    pub(crate) fn from_filter(mean: DVector<f64>, covariance: DMatrix<f64>) -> Self {
        let mut sym = 0.5 * (&covariance + covariance.transpose());
        for i in 0..sym.nrows() {
            if sym[(i, i)] < 0.0 {
                sym[(i, i)] = 0.0;
            }
        }
        GaussianBelief { mean, covariance: sym }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn phase_mean(&self) -> f64 {
        self.mean[PHASE]
    }

    pub fn phase_variance(&self) -> f64 {
        self.covariance[(PHASE, PHASE)]
    }
}

/// Sample mean and unbiased sample covariance of an ensemble.
///
/// The covariance is `A Aᵀ / (E − 1)` where `A` holds member deviations from
/// the mean. Requires at least two members.
pub fn ensemble_moments(ensemble: &Ensemble) -> Result<GaussianBelief> {
    let e = ensemble.len();
    if e < 2 {
        return Err(Error::CovarianceUndefined { members: e });
    }
    let mean = ensemble.mean();
    let mut deviations = ensemble.members().clone();
    for mut col in deviations.column_iter_mut() {
        col -= &mean;
    }
    let covariance = (&deviations * deviations.transpose()) / (e as f64 - 1.0);
    Ok(GaussianBelief::from_filter(mean, covariance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toy_layout() -> ModalityLayout {
        ModalityLayout::new(vec![
            Modality::observed("hand", 2),
            Modality::controlled("arm", 1),
        ])
        .unwrap()
    }

    #[test]
    fn layout_rejects_duplicates_and_zero_dofs() {
        let dup = ModalityLayout::new(vec![
            Modality::observed("a", 1),
            Modality::controlled("a", 1),
        ]);
        assert!(dup.is_err());

        let zero = ModalityLayout::new(vec![
            Modality::observed("a", 0),
            Modality::controlled("b", 1),
        ]);
        assert!(zero.is_err());

        let all_observed =
            ModalityLayout::new(vec![Modality::observed("a", 1), Modality::observed("b", 1)]);
        assert!(all_observed.is_err());
    }

    #[test]
    fn layout_indexing() {
        let layout = toy_layout();
        assert_eq!(layout.total_dofs(), 3);
        assert_eq!(layout.observed_dofs(), 2);
        assert_eq!(layout.controlled_dofs(), 1);
        assert_eq!(layout.dof_range(0), 0..2);
        assert_eq!(layout.dof_range(1), 2..3);
        assert_eq!(layout.controlled_indices(), vec![2]);
        assert_eq!(layout.modality_index("arm"), Some(1));
        assert_eq!(layout.modality_index("leg"), None);
    }

    #[test]
    fn layout_hash_is_stable_and_discriminating() {
        let a = toy_layout();
        let b = toy_layout();
        assert_eq!(a.hash(), b.hash());
        let c = ModalityLayout::new(vec![
            Modality::observed("hand", 3),
            Modality::controlled("arm", 1),
        ])
        .unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn demonstration_rejects_nan_and_short_series() {
        let layout = toy_layout();
        let mut m = DMatrix::zeros(3, 4);
        m[(1, 2)] = f64::NAN;
        assert!(Demonstration::new(layout.clone(), m, 60.0).is_err());

        let short = DMatrix::zeros(3, 1);
        assert!(Demonstration::new(layout.clone(), short, 60.0).is_err());

        let wrong_rows = DMatrix::zeros(2, 4);
        assert!(Demonstration::new(layout, wrong_rows, 60.0).is_err());
    }

    #[test]
    fn observation_role_check() {
        let layout = toy_layout();
        let ok = Observation::new(DVector::zeros(3), vec![true, true, false]).unwrap();
        assert!(ok.respects_roles(&layout));
        let bad = Observation::new(DVector::zeros(3), vec![true, true, true]).unwrap();
        assert!(!bad.respects_roles(&layout));
        assert_eq!(ok.active_dims(), vec![0, 1]);
    }

    #[test]
    fn latent_state_round_trip() {
        let s = LatentState::new(0.25, 0.01, DVector::from_vec(vec![1.0, -2.0])).unwrap();
        let v = s.to_vector();
        assert_eq!(v.as_slice(), &[0.25, 0.01, 1.0, -2.0]);
        assert_eq!(LatentState::from_vector(&v), s);
        assert!(LatentState::new(0.0, 0.0, DVector::zeros(1)).is_err());
    }

    #[test]
    fn moments_of_identical_members_have_zero_covariance() {
        let member = LatentState::new(0.3, 0.02, DVector::from_vec(vec![1.5])).unwrap();
        let ensemble = Ensemble::from_states(&vec![member; 5]).unwrap();
        let belief = ensemble_moments(&ensemble).unwrap();
        assert_eq!(belief.mean.as_slice(), &[0.3, 0.02, 1.5]);
        assert!(belief.covariance.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn moments_match_hand_computed_two_member_case() {
        // Members (0, 1, [0]) and (1, 1, [0]): mean phase 0.5, Var(phase) =
        // ((0-0.5)^2 + (1-0.5)^2) / (2-1) = 0.5. Frozen from the sample
        // covariance formula evaluated by hand.
        let a = LatentState::new(0.0, 1.0, DVector::zeros(1)).unwrap();
        let b = LatentState::new(1.0, 1.0, DVector::zeros(1)).unwrap();
        let ensemble = Ensemble::from_states(&[a, b]).unwrap();
        let belief = ensemble_moments(&ensemble).unwrap();
        assert_abs_diff_eq!(belief.phase_mean(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(belief.phase_variance(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn moments_reject_single_member() {
        let s = LatentState::new(0.0, 1.0, DVector::zeros(1)).unwrap();
        let ensemble = Ensemble::from_states(&[s]).unwrap();
        match ensemble_moments(&ensemble) {
            Err(Error::CovarianceUndefined { members: 1 }) => {}
            other => panic!("expected CovarianceUndefined, got {other:?}"),
        }
    }

    #[test]
    fn moments_are_permutation_invariant() {
        let states: Vec<LatentState> = (0..6)
            .map(|i| {
                LatentState::new(
                    0.1 * i as f64,
                    0.01 + 0.001 * i as f64,
                    DVector::from_vec(vec![i as f64, -(i as f64) * 0.5]),
                )
                .unwrap()
            })
            .collect();
        let forward = Ensemble::from_states(&states).unwrap();
        let mut reversed = states;
        reversed.reverse();
        let backward = Ensemble::from_states(&reversed).unwrap();

        let a = ensemble_moments(&forward).unwrap();
        let b = ensemble_moments(&backward).unwrap();
        assert_abs_diff_eq!(a.mean.as_slice(), b.mean.as_slice(), epsilon = 1e-12);
        for (x, y) in a.covariance.iter().zip(b.covariance.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn moments_covariance_is_positive_semidefinite() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let states: Vec<LatentState> = (0..12)
            .map(|_| {
                LatentState::new(
                    rng.random::<f64>(),
                    0.01 + rng.random::<f64>() * 0.01,
                    DVector::from_fn(4, |_, _| rng.random::<f64>() * 2.0 - 1.0),
                )
                .unwrap()
            })
            .collect();
        let ensemble = Ensemble::from_states(&states).unwrap();
        let belief = ensemble_moments(&ensemble).unwrap();
        let eigen = belief.covariance.clone().symmetric_eigenvalues();
        let scale = eigen.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        assert!(eigen.iter().all(|&l| l >= -1e-9 * scale), "eigenvalues {eigen:?}");
    }

    #[test]
    fn belief_validation_catches_asymmetry() {
        let mut cov = DMatrix::identity(3, 3);
        cov[(0, 1)] = 0.5;
        assert!(GaussianBelief::new(DVector::zeros(3), cov).is_err());
    }
}
