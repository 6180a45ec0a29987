//! HMM data model: HTK topology with a non-emitting entry state 1, emitting
//! states `2..=N-1`, and an absorbing exit state `N`.
//!
//! State numbers in the public API are 1-based, as in HTK model files.
//! There is no separate initial-state vector: the model always starts in the
//! entry state, so row 1 of the transition matrix is the initial distribution
//! over emitting states.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result, Violation};
use crate::logmath::safe_ln;

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1.0e-2;

/// Allowed deviation of a transition row sum from one.
pub const ROW_SUM_TOLERANCE: f64 = 1.0e-9;

const GCONST_TOLERANCE: f64 = 1.0e-12;

/// `D·ln(2π) + Σ ln σ²ᵢ`, the data-independent part of a diagonal Gaussian's
/// log density (times -2).
pub fn gconst(variance: &[f64]) -> Result<f64> {
    if let Some((dim_index, &value)) = variance
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v <= 0.0)
    {
        return Err(Error::InvalidVariance { dim_index, value });
    }
    Ok(unchecked_gconst(variance))
}

fn unchecked_gconst(variance: &[f64]) -> f64 {
    variance.len() as f64 * (2.0 * PI).ln() + variance.iter().map(|v| v.ln()).sum::<f64>()
}

/// Diagonal-covariance Gaussian attached to one emitting state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: Vec<f64>,
    variance: Vec<f64>,
    gconst: f64,
}

impl GaussianState {
    /// Builds a state and caches its gconst. Non-positive variances are not
    /// rejected here (the gconst becomes NaN); [`HmmModel::validate`] reports them.
    pub fn new(mean: Vec<f64>, variance: Vec<f64>) -> Self {
        let gconst = unchecked_gconst(&variance);
        Self { mean, variance, gconst }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn gconst(&self) -> f64 {
        self.gconst
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn set_mean(&mut self, mean: Vec<f64>) {
        self.mean = mean;
    }

    pub fn set_variance(&mut self, variance: Vec<f64>) {
        self.gconst = unchecked_gconst(&variance);
        self.variance = variance;
    }

    /// Raises every variance component to at least `floor`.
    pub fn apply_floor(&mut self, floor: f64) {
        let floored = self.variance.iter().map(|&v| v.max(floor)).collect();
        self.set_variance(floored);
    }

    /// `-½ (G + Σ (xᵢ - μᵢ)² / σ²ᵢ)`. `x` must have length `dim()`.
    #[inline]
    pub fn log_density(&self, x: ArrayView1<'_, f64>) -> f64 {
        debug_assert_eq!(x.len(), self.mean.len());
        let mahalanobis: f64 = x
            .iter()
            .zip(&self.mean)
            .zip(&self.variance)
            .map(|((xi, mu), var)| {
                let d = xi - mu;
                d * d / var
            })
            .sum();
        -0.5 * (self.gconst + mahalanobis)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    num_states: usize,
    dim: usize,
    trans: Array2<f64>,
    log_trans: Array2<f64>,
    states: Vec<GaussianState>,
}

impl HmmModel {
    /// Builds a model and validates it.
    pub fn new(trans: Array2<f64>, states: Vec<GaussianState>) -> Result<Self> {
        let model = Self::new_unchecked(trans, states);
        model.validate().map_err(Error::InvalidModel)?;
        Ok(model)
    }

    /// Builds a model without checking invariants. The dimension is taken from
    /// the first emitting state (0 if there is none).
    pub fn new_unchecked(trans: Array2<f64>, states: Vec<GaussianState>) -> Self {
        let num_states = trans.nrows();
        let dim = states.first().map_or(0, GaussianState::dim);
        let log_trans = trans.mapv(safe_ln);
        Self { num_states, dim, trans, log_trans, states }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_emitting(&self) -> usize {
        self.num_states.saturating_sub(2)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Exit state number, `N`.
    pub fn exit_state(&self) -> usize {
        self.num_states
    }

    /// Emitting state numbers `2..=N-1`.
    pub fn emitting_states(&self) -> std::ops::RangeInclusive<usize> {
        2..=self.num_states.saturating_sub(1)
    }

    /// Linear transition probabilities, 0-based indices.
    pub fn transitions(&self) -> &Array2<f64> {
        &self.trans
    }

    pub fn states(&self) -> &[GaussianState] {
        &self.states
    }

    /// Gaussian of emitting state `j` (1-based, `2..=N-1`).
    pub fn state(&self, j: usize) -> Result<&GaussianState> {
        self.check_emitting(j)?;
        Ok(&self.states[j - 2])
    }

    pub fn with_transitions(&self, trans: Array2<f64>) -> Self {
        Self::new_unchecked(trans, self.states.clone())
    }

    pub fn with_states(&self, states: Vec<GaussianState>) -> Self {
        Self::new_unchecked(self.trans.clone(), states)
    }

    /// `a_ij` for 1-based states.
    pub fn transition(&self, i: usize, j: usize) -> f64 {
        self.trans[[i - 1, j - 1]]
    }

    /// `ln a_ij` for 1-based states, [`LOG_ZERO`](crate::LOG_ZERO) when `a_ij = 0`.
    pub fn log_transition(&self, i: usize, j: usize) -> f64 {
        self.log_trans[[i - 1, j - 1]]
    }

    /// Log emission density of emitting state `j` (1-based) for observation `x`.
    pub fn log_emission(&self, j: usize, x: &[f64]) -> Result<f64> {
        self.check_emitting(j)?;
        if x.len() != self.dim {
            return Err(Error::Shape { expected: self.dim, actual: x.len() });
        }
        Ok(self.states[j - 2].log_density(ArrayView1::from(x)))
    }

    fn check_emitting(&self, j: usize) -> Result<()> {
        if j < 2 || j + 1 > self.num_states {
            return Err(Error::NotEmitting { state: j, num_states: self.num_states });
        }
        Ok(())
    }

    /// Checks every topology and parameter invariant, returning all violations.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        self.collect_violations(None, &mut out);
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    /// Like [`validate`](Self::validate), additionally requiring every
    /// variance to be at least `floor`.
    pub fn validate_with_floor(&self, floor: f64) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        self.collect_violations(Some(floor), &mut out);
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    fn collect_violations(&self, floor: Option<f64>, out: &mut Vec<Violation>) {
        let n = self.num_states;
        if n < 3 {
            out.push(Violation::TooFewStates { num_states: n });
        }
        if self.trans.ncols() != n {
            out.push(Violation::TransitionShape {
                rows: self.trans.nrows(),
                cols: self.trans.ncols(),
                expected: n,
            });
            return;
        }
        if self.dim == 0 {
            out.push(Violation::ZeroDimension);
        }

        for ((r, c), &a) in self.trans.indexed_iter() {
            if !(0.0..=1.0).contains(&a) {
                out.push(Violation::ProbabilityOutOfRange { row: r + 1, col: c + 1, value: a });
            }
        }
        for r in 0..n.saturating_sub(1) {
            let sum: f64 = self.trans.row(r).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                out.push(Violation::RowSum { row: r + 1, sum });
            }
        }
        if n >= 1 {
            for (c, &a) in self.trans.row(n - 1).iter().enumerate() {
                if a != 0.0 {
                    out.push(Violation::ExitRowNonZero { col: c + 1, value: a });
                }
            }
            for (r, &a) in self.trans.column(0).iter().enumerate() {
                if a != 0.0 {
                    out.push(Violation::EntryColumnNonZero { row: r + 1, value: a });
                }
            }
        }
        if n >= 2 && self.trans[[0, n - 1]] != 0.0 {
            out.push(Violation::EntryToExit { value: self.trans[[0, n - 1]] });
        }

        if self.states.len() != self.num_emitting() {
            out.push(Violation::StateCount {
                found: self.states.len(),
                expected: self.num_emitting(),
            });
        }
        for (k, g) in self.states.iter().enumerate() {
            let state = k + 2;
            if g.mean.len() != self.dim {
                out.push(Violation::MeanLength { state, len: g.mean.len(), dim: self.dim });
            }
            if g.variance.len() != self.dim {
                out.push(Violation::VarianceLength { state, len: g.variance.len(), dim: self.dim });
            }
            for (i, m) in g.mean.iter().enumerate() {
                if !m.is_finite() {
                    out.push(Violation::NonFiniteMean { state, dim_index: i });
                }
            }
            let mut positive = true;
            for (i, &v) in g.variance.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 {
                    positive = false;
                    out.push(Violation::VarianceNotPositive { state, dim_index: i, value: v });
                } else if let Some(floor) = floor.filter(|&f| v < f) {
                    out.push(Violation::VarianceBelowFloor { state, dim_index: i, value: v, floor });
                }
            }
            if positive {
                let recomputed = unchecked_gconst(&g.variance);
                if (recomputed - g.gconst).abs() > GCONST_TOLERANCE {
                    out.push(Violation::StaleGconst { state, cached: g.gconst, recomputed });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::logmath::LOG_ZERO;

    const X1: [f64; 3] = [-1.115696192, -1.014122963, -0.244220227];

    fn bootstrap_states() -> Vec<GaussianState> {
        vec![
            GaussianState::new(vec![0.0650, -0.1583, -0.5923], vec![0.8717, 0.4701, 0.0295]),
            GaussianState::new(vec![-0.1823, 0.0432, -0.3820], vec![0.1322, 1.0758, 0.1880]),
        ]
    }

    fn proto_trans() -> Array2<f64> {
        array![
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.1, 0.4, 0.5],
            [0.0, 0.8, 0.1, 0.1],
            [0.0, 0.0, 0.0, 0.0]
        ]
    }

    fn example_model() -> HmmModel {
        HmmModel::new(proto_trans(), bootstrap_states()).unwrap()
    }

    #[test]
    fn gconst_unit_variance() {
        assert!((gconst(&[1.0]).unwrap() - 1.8378770664).abs() < 1e-10);
        assert!((gconst(&[1.0, 1.0, 1.0]).unwrap() - 5.5136311991).abs() < 1e-9);
    }

    #[test]
    fn gconst_bootstrap_state2() {
        // scalar evaluation of 3 ln 2π + Σ ln σ², computed outside this crate
        let g = gconst(&[0.8717, 0.4701, 0.0295]).unwrap();
        assert!((g - 1.098146391675014).abs() < 1e-12);
    }

    #[test]
    fn gconst_rejects_nonpositive() {
        assert!(matches!(
            gconst(&[1.0, 0.0]),
            Err(Error::InvalidVariance { dim_index: 1, .. })
        ));
        assert!(gconst(&[-0.5]).is_err());
    }

    #[test]
    fn emission_first_frame() {
        let m = example_model();
        let b2 = m.log_emission(2, &X1).unwrap();
        assert!((b2 - -4.1817).abs() < 5e-4);
        // per-dimension normal log-pdf sum, computed outside this crate
        let b3 = m.log_emission(3, &X1).unwrap();
        assert!((b3 - -4.811155767491251).abs() < 1e-10);
    }

    #[test]
    fn emission_standard_normal_mode() {
        let g = GaussianState::new(vec![0.0], vec![1.0]);
        let v = g.log_density(ArrayView1::from(&[0.0][..]));
        assert!((v - -0.9189385332).abs() < 1e-10);
    }

    #[test]
    fn emission_errors() {
        let m = example_model();
        assert!(matches!(m.log_emission(2, &[0.0, 0.0]), Err(Error::Shape { expected: 3, actual: 2 })));
        assert!(matches!(m.log_emission(1, &X1), Err(Error::NotEmitting { .. })));
        assert!(matches!(m.log_emission(4, &X1), Err(Error::NotEmitting { .. })));
    }

    #[test]
    fn log_transitions() {
        let m = example_model();
        assert_eq!(m.log_transition(1, 2), 0.0);
        assert!((m.log_transition(3, 4) + std::f64::consts::LN_10).abs() < 1e-9);
        assert_eq!(m.log_transition(1, 3), LOG_ZERO);
        assert_eq!(m.log_transition(4, 4), LOG_ZERO);
    }

    #[test]
    fn example_model_is_valid() {
        assert_eq!(example_model().validate(), Ok(()));
        assert_eq!(example_model().validate_with_floor(DEFAULT_VARIANCE_FLOOR), Ok(()));
    }

    #[test]
    fn row_sum_violation_names_row() {
        let mut t = proto_trans();
        t[[1, 3]] = 0.4;
        let v = HmmModel::new_unchecked(t, bootstrap_states()).validate().unwrap_err();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::RowSum { row: 2, sum } if (sum - 0.9).abs() < 1e-12));
    }

    #[test]
    fn negative_variance_names_state_and_dim() {
        let mut s = bootstrap_states();
        s[1] = GaussianState::new(vec![-0.1823, 0.0432, -0.3820], vec![-0.1516, 1.0758, 0.1880]);
        let v = HmmModel::new_unchecked(proto_trans(), s).validate().unwrap_err();
        assert_eq!(
            v,
            vec![Violation::VarianceNotPositive { state: 3, dim_index: 0, value: -0.1516 }]
        );
        assert!(matches!(
            HmmModel::new(proto_trans(), bootstrap_states()[..1].to_vec()),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn topology_violations() {
        let mut t = proto_trans();
        t[[0, 1]] = 0.5;
        t[[0, 3]] = 0.5;
        t[[3, 3]] = 1.0;
        t[[2, 0]] = 0.1;
        t[[2, 1]] = 0.7;
        let v = HmmModel::new_unchecked(t, bootstrap_states()).validate().unwrap_err();
        assert!(v.contains(&Violation::EntryToExit { value: 0.5 }));
        assert!(v.contains(&Violation::ExitRowNonZero { col: 4, value: 1.0 }));
        assert!(v.contains(&Violation::EntryColumnNonZero { row: 3, value: 0.1 }));
    }

    #[test]
    fn floor_violation() {
        let v = example_model().validate_with_floor(0.05).unwrap_err();
        assert_eq!(
            v,
            vec![Violation::VarianceBelowFloor { state: 2, dim_index: 2, value: 0.0295, floor: 0.05 }]
        );
    }

    #[test]
    fn mutation_refreshes_gconst() {
        let mut g = bootstrap_states().remove(0);
        g.set_variance(vec![1e-6, 2.0, 3.0]);
        g.apply_floor(1e-4);
        assert_eq!(g.variance(), &[1e-4, 2.0, 3.0]);
        assert!((g.gconst() - gconst(g.variance()).unwrap()).abs() < 1e-12);
    }
}
