//! Brute-force reference implementations for testing the dynamic program and
//! the estimators. Deliberately naive: nothing here touches the trellis code.
//!
//! Tie-breaking: among equally scored paths the oracle returns the one that is
//! smallest when compared from the last frame backwards. The Viterbi
//! traceback picks the lowest end state, then the lowest backpointer at each
//! earlier frame given the suffix already fixed, which selects that same path.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::logmath::{is_log_zero, LOG_ZERO};
use crate::model::HmmModel;
use crate::observation::ObservationSequence;
use crate::trainer::Segmentation;
use crate::viterbi::AlignmentResult;

/// Largest number of candidate paths [`brute_force_align`] will enumerate.
pub const MAX_CANDIDATES: usize = 1_000_000;

/// Sum of independent scalar normal log densities.
pub fn scalar_log_emission(mean: &[f64], variance: &[f64], x: &[f64]) -> f64 {
    mean.iter()
        .zip(variance)
        .zip(x)
        .map(|((m, v), xi)| -0.5 * (2.0 * PI * v).ln() - (xi - m) * (xi - m) / (2.0 * v))
        .sum()
}

/// Log score of a complete path `1, q₁ … q_T, N`, summed term by term.
/// Returns [`LOG_ZERO`] if the path uses a zero-probability transition.
pub fn score_path(model: &HmmModel, obs: &ObservationSequence, path: &[usize]) -> f64 {
    assert_eq!(path.len(), obs.len() + 2);
    let mut total = 0.0;
    for pair in path.windows(2) {
        let a = model.transition(pair[0], pair[1]);
        if a <= 0.0 {
            return LOG_ZERO;
        }
        total += a.ln();
    }
    for (t, &q) in path[1..path.len() - 1].iter().enumerate() {
        let g = &model.states()[q - 2];
        let x = obs.frame(t).to_vec();
        total += scalar_log_emission(g.mean(), g.variance(), &x);
    }
    total
}

/// Exhaustive best path over all `N_e^T` emitting-state sequences.
pub fn brute_force_align(model: &HmmModel, obs: &ObservationSequence) -> Result<AlignmentResult> {
    let ne = model.num_emitting();
    let frames = obs.len();
    let candidates = (ne as f64).powi(frames as i32);
    if candidates > MAX_CANDIDATES as f64 {
        return Err(Error::TooLarge { candidates, limit: MAX_CANDIDATES });
    }
    if model.dim() != obs.dim() {
        return Err(Error::Shape { expected: model.dim(), actual: obs.dim() });
    }

    // digit 0 varies fastest, so enumeration runs in ascending
    // last-frame-first order and the first strict maximum wins ties
    let mut digits = vec![0usize; frames];
    let mut path = vec![0usize; frames + 2];
    path[0] = 1;
    path[frames + 1] = model.exit_state();
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        for (t, d) in digits.iter().enumerate() {
            path[t + 1] = d + 2;
        }
        let score = score_path(model, obs, &path);
        if !is_log_zero(score) && best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, path.clone()));
        }

        let mut pos = 0;
        loop {
            if pos == frames {
                return best
                    .map(|(log_score, path)| AlignmentResult { path, log_score })
                    .ok_or(Error::DeadTrellis { t: frames });
            }
            digits[pos] += 1;
            if digits[pos] < ne {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// Per-state mean and biased variance computed in two passes. `None` for
/// states with no frames. Not floored.
pub fn naive_gaussian_stats(
    obs: &ObservationSequence,
    seg: &Segmentation,
    emitting: usize,
) -> Vec<Option<(Vec<f64>, Vec<f64>)>> {
    let dim = obs.dim();
    (2..emitting + 2)
        .map(|state| {
            let frames: Vec<usize> = (0..obs.len()).filter(|&t| seg.assign[t] == state).collect();
            if frames.is_empty() {
                return None;
            }
            let n = frames.len() as f64;
            let mean: Vec<f64> = (0..dim)
                .map(|i| frames.iter().map(|&t| obs.frame(t)[i]).sum::<f64>() / n)
                .collect();
            let variance: Vec<f64> = (0..dim)
                .map(|i| {
                    frames.iter().map(|&t| (obs.frame(t)[i] - mean[i]).powi(2)).sum::<f64>() / n
                })
                .collect();
            Some((mean, variance))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::model::GaussianState;

    #[test]
    fn single_frame_is_definitional() {
        let m = HmmModel::new(
            array![
                [0.0, 0.5, 0.5, 0.0],
                [0.0, 0.5, 0.25, 0.25],
                [0.0, 0.0, 0.5, 0.5],
                [0.0, 0.0, 0.0, 0.0]
            ],
            vec![
                GaussianState::new(vec![0.0], vec![1.0]),
                GaussianState::new(vec![2.0], vec![0.5]),
            ],
        )
        .unwrap();
        let o = ObservationSequence::from_rows(&[vec![1.2]]).unwrap();
        let r = brute_force_align(&m, &o).unwrap();
        let s2 = 0.5f64.ln() + m.log_emission(2, &[1.2]).unwrap() + 0.25f64.ln();
        let s3 = 0.5f64.ln() + m.log_emission(3, &[1.2]).unwrap() + 0.5f64.ln();
        assert!((r.log_score - s2.max(s3)).abs() < 1e-12);
        assert_eq!(r.path[1], if s2 >= s3 { 2 } else { 3 });
    }

    #[test]
    fn ties_prefer_smaller_late_states() {
        let g = GaussianState::new(vec![0.0], vec![1.0]);
        let m = HmmModel::new(
            array![
                [0.0, 0.5, 0.5, 0.0],
                [0.0, 0.5, 0.5, 0.0],
                [0.0, 0.0, 0.5, 0.5],
                [0.0, 0.0, 0.0, 0.0]
            ],
            vec![g.clone(), g],
        )
        .unwrap();
        let o = ObservationSequence::from_rows(&[vec![0.1], vec![0.2]]).unwrap();
        // [2,3] and [3,3] tie; both end in 3, and 2 < 3 at frame 1
        assert_eq!(brute_force_align(&m, &o).unwrap().path, vec![1, 2, 3, 4]);
    }

    #[test]
    fn guard() {
        let g = GaussianState::new(vec![0.0], vec![1.0]);
        let m = HmmModel::new(
            array![
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.5, 0.25, 0.25],
                [0.0, 0.0, 0.5, 0.5],
                [0.0, 0.0, 0.0, 0.0]
            ],
            vec![g.clone(), g],
        )
        .unwrap();
        let o = ObservationSequence::from_rows(&vec![vec![0.0]; 20]).unwrap();
        assert!(matches!(brute_force_align(&m, &o), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn constant_observations_have_zero_variance() {
        let o = ObservationSequence::from_rows(&vec![vec![1.5, -2.0]; 4]).unwrap();
        let seg = Segmentation { assign: vec![2, 2, 3, 3] };
        for s in naive_gaussian_stats(&o, &seg, 2) {
            let (m, v) = s.unwrap();
            assert_eq!(m, vec![1.5, -2.0]);
            assert_eq!(v, vec![0.0, 0.0]);
        }
    }
}
