//! Log-domain Viterbi alignment over the entry/emitting/exit topology.
//!
//! Frames `t` and states `j` are 1-based in every public accessor, so
//! `trellis.delta(1, 2)` is the score of being in state 2 after the first frame.
//! Ties in every argmax go to the lowest state number.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::logmath::{is_log_zero, log_mul, LOG_ZERO};
use crate::model::HmmModel;
use crate::observation::ObservationSequence;

/// Partial best-path scores `δ` and backpointers `ψ` for the emitting states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trellis {
    delta: Array2<f64>,
    psi: Array2<Option<usize>>,
    filled: usize,
}

impl Trellis {
    fn new(frames: usize, emitting: usize) -> Self {
        Self {
            delta: Array2::from_elem((frames, emitting), LOG_ZERO),
            psi: Array2::from_elem((frames, emitting), None),
            filled: 0,
        }
    }

    pub fn frames(&self) -> usize {
        self.delta.nrows()
    }

    pub fn num_emitting(&self) -> usize {
        self.delta.ncols()
    }

    /// Number of columns computed so far.
    pub fn filled(&self) -> usize {
        self.filled
    }

    /// `δ_t(j)`.
    pub fn delta(&self, t: usize, j: usize) -> f64 {
        self.delta[[t - 1, j - 2]]
    }

    /// `ψ_t(j)`: the state the best path into `(t, j)` came from. `Some(1)`
    /// on the first frame means "from the entry state".
    pub fn psi(&self, t: usize, j: usize) -> Option<usize> {
        self.psi[[t - 1, j - 2]]
    }

    pub fn deltas(&self) -> &Array2<f64> {
        &self.delta
    }

    pub fn backpointers(&self) -> &Array2<Option<usize>> {
        &self.psi
    }
}

/// Best state sequence including entry and exit, and its log score.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    /// `1, q₁, …, q_T, N`.
    pub path: Vec<usize>,
    pub log_score: f64,
}

impl AlignmentResult {
    /// `q₁ … q_T`, without the entry and exit states.
    pub fn emitting_path(&self) -> &[usize] {
        &self.path[1..self.path.len() - 1]
    }
}

fn check_shapes(model: &HmmModel, obs: &ObservationSequence) -> Result<()> {
    if model.dim() != obs.dim() {
        return Err(Error::Shape { expected: model.dim(), actual: obs.dim() });
    }
    Ok(())
}

/// `ln b_j(x_t)` for every frame and emitting state, `T × (N-2)`.
pub fn log_emissions(model: &HmmModel, obs: &ObservationSequence) -> Result<Array2<f64>> {
    check_shapes(model, obs)?;
    let mut out = Array2::zeros((obs.len(), model.num_emitting()));
    for (t, mut row) in out.rows_mut().into_iter().enumerate() {
        let x = obs.frame(t);
        for (cell, state) in row.iter_mut().zip(model.states()) {
            *cell = state.log_density(x);
        }
    }
    Ok(out)
}

fn emission_column(model: &HmmModel, obs: &ObservationSequence, t: usize) -> Vec<f64> {
    let x = obs.frame(t - 1);
    model.states().iter().map(|s| s.log_density(x)).collect()
}

fn fill_first(model: &HmmModel, trellis: &mut Trellis, log_b: &[f64]) -> Result<()> {
    for (e, &b) in log_b.iter().enumerate() {
        let enter = model.log_transition(1, e + 2);
        if is_log_zero(enter) {
            continue;
        }
        trellis.delta[[0, e]] = log_mul(enter, b);
        trellis.psi[[0, e]] = Some(1);
    }
    trellis.filled = 1;
    if trellis.delta.row(0).iter().all(|&d| is_log_zero(d)) {
        return Err(Error::DeadTrellis { t: 1 });
    }
    Ok(())
}

fn fill_column(model: &HmmModel, trellis: &mut Trellis, t: usize, log_b: &[f64]) -> Result<()> {
    assert!(
        t >= 2 && t == trellis.filled + 1 && t <= trellis.frames(),
        "column {t} cannot be filled after {} columns",
        trellis.filled
    );
    let ne = trellis.num_emitting();
    let mut any_alive = false;
    for (j, &lb) in log_b.iter().enumerate().take(ne) {
        let mut best = LOG_ZERO;
        let mut arg = None;
        for i in 0..ne {
            let cand = log_mul(trellis.delta[[t - 2, i]], model.log_transition(i + 2, j + 2));
            if !is_log_zero(cand) && cand > best {
                best = cand;
                arg = Some(i + 2);
            }
        }
        if arg.is_some() {
            let score = log_mul(best, lb);
            if !is_log_zero(score) {
                trellis.delta[[t - 1, j]] = score;
                trellis.psi[[t - 1, j]] = arg;
                any_alive = true;
            }
        }
    }
    trellis.filled = t;
    if any_alive {
        Ok(())
    } else {
        Err(Error::DeadTrellis { t })
    }
}

/// First trellis column: `δ₁(j) = ln a_1j + ln b_j(x₁)`.
pub fn init_trellis(model: &HmmModel, obs: &ObservationSequence) -> Result<Trellis> {
    check_shapes(model, obs)?;
    let mut trellis = Trellis::new(obs.len(), model.num_emitting());
    fill_first(model, &mut trellis, &emission_column(model, obs, 1))?;
    Ok(trellis)
}

/// Fills column `t` (1-based, `2..=T`) from column `t - 1`:
/// `δ_t(j) = max_i [δ_{t-1}(i) + ln a_ij] + ln b_j(x_t)`.
pub fn recurse_step(
    model: &HmmModel,
    obs: &ObservationSequence,
    trellis: &mut Trellis,
    t: usize,
) -> Result<()> {
    fill_column(model, trellis, t, &emission_column(model, obs, t))
}

/// Best final score through the exit transition, and the state it leaves from.
pub fn terminate(model: &HmmModel, trellis: &Trellis) -> Result<(f64, usize)> {
    let frames = trellis.frames();
    assert_eq!(trellis.filled, frames, "trellis is incomplete");
    let exit = model.exit_state();
    let mut best = LOG_ZERO;
    let mut end = None;
    for i in 0..model.num_emitting() {
        let cand = log_mul(trellis.delta[[frames - 1, i]], model.log_transition(i + 2, exit));
        if !is_log_zero(cand) && cand > best {
            best = cand;
            end = Some(i + 2);
        }
    }
    end.map(|state| (best, state)).ok_or(Error::DeadTrellis { t: frames })
}

/// Follows backpointers from `end_state` at the last frame, returning `q₁ … q_T`.
pub fn backtrack(trellis: &Trellis, end_state: usize) -> Result<Vec<usize>> {
    let frames = trellis.frames();
    let mut path = vec![0; frames];
    path[frames - 1] = end_state;
    for t in (1..frames).rev() {
        let next = path[t];
        path[t - 1] = trellis.psi[[t, next - 2]]
            .ok_or(Error::CorruptTrellis { t: t + 1, state: next })?;
    }
    // the first frame's pointer must lead back to the entry state
    if trellis.psi[[0, path[0] - 2]] != Some(1) {
        return Err(Error::CorruptTrellis { t: 1, state: path[0] });
    }
    Ok(path)
}

/// Full alignment, also returning the trellis for inspection.
pub fn align_with_trellis(
    model: &HmmModel,
    obs: &ObservationSequence,
) -> Result<(AlignmentResult, Trellis)> {
    model.validate().map_err(Error::InvalidModel)?;
    let log_b = log_emissions(model, obs)?;
    align_emissions(model, &log_b)
}

/// Alignment over precomputed log emissions (`T × (N-2)`, as from
/// [`log_emissions`]). The model supplies transitions only.
pub fn align_emissions(model: &HmmModel, log_b: &Array2<f64>) -> Result<(AlignmentResult, Trellis)> {
    let (frames, ne) = log_b.dim();
    if ne != model.num_emitting() {
        return Err(Error::Shape { expected: model.num_emitting(), actual: ne });
    }
    if frames == 0 {
        return Err(Error::InvalidObservations("no frames".into()));
    }
    let mut trellis = Trellis::new(frames, ne);
    let column = |t: usize| log_b.row(t - 1).to_vec();
    fill_first(model, &mut trellis, &column(1))?;
    for t in 2..=frames {
        fill_column(model, &mut trellis, t, &column(t))?;
    }
    let (log_score, end) = terminate(model, &trellis)?;
    let emitting = backtrack(&trellis, end)?;
    let mut path = Vec::with_capacity(emitting.len() + 2);
    path.push(1);
    path.extend(emitting);
    path.push(model.exit_state());
    Ok((AlignmentResult { path, log_score }, trellis))
}

pub fn align(model: &HmmModel, obs: &ObservationSequence) -> Result<AlignmentResult> {
    align_with_trellis(model, obs).map(|(result, _)| result)
}
