//! Viterbi training: bootstrap Gaussians from a uniform segmentation, then
//! repeatedly align, re-estimate from the hard alignment, and stop once the
//! best-path score stops changing.

use log::{debug, warn};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{GaussianState, HmmModel, DEFAULT_VARIANCE_FLOOR};
use crate::observation::ObservationSequence;
use crate::viterbi::{align_with_trellis, AlignmentResult, Trellis};

/// Frame-to-state assignment, one emitting state number (`2..=N-1`) per frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub assign: Vec<usize>,
}

impl Segmentation {
    /// Builds a segmentation from an alignment's emitting path.
    pub fn from_alignment(alignment: &AlignmentResult) -> Self {
        Self { assign: alignment.emitting_path().to_vec() }
    }

    pub fn len(&self) -> usize {
        self.assign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assign.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    /// Convergence threshold on `|P*ₖ - P*ₖ₋₁|`.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub variance_floor: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { epsilon: 1.0e-4, max_iterations: 20, variance_floor: DEFAULT_VARIANCE_FLOOR }
    }
}

impl TrainingConfig {
    pub fn check(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !self.variance_floor.is_finite() || self.variance_floor <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "variance floor must be positive, got {}",
                self.variance_floor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    /// `P*ₖ` for `k = 1..=iterations_run`.
    pub scores: Vec<f64>,
    /// `|P*ₖ - P*ₖ₋₁|`, aligned with `scores`; the first entry is always `None`.
    pub deltas: Vec<Option<f64>>,
    pub converged: bool,
    pub iterations_run: usize,
}

/// Per-iteration view handed to a trace sink.
#[derive(Debug)]
pub struct IterationTrace<'a> {
    pub iteration: usize,
    pub alignment: &'a AlignmentResult,
    pub trellis: &'a Trellis,
    pub delta: Option<f64>,
}

/// Splits `frames` contiguously over `emitting` states: state `k + 1` gets
/// frames `⌊(k-1)T/S⌋ + 1 ..= ⌊kT/S⌋`.
pub fn uniform_segment(frames: usize, emitting: usize) -> Result<Segmentation> {
    if emitting == 0 || frames < emitting {
        return Err(Error::TooFewFrames { frames, states: emitting });
    }
    let assign = (1..=frames).map(|t| (t * emitting).div_ceil(frames) + 1).collect();
    Ok(Segmentation { assign })
}

/// Running mean and sum of squared deviations (Welford).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianAccumulator {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl GaussianAccumulator {
    pub fn new(dim: usize) -> Self {
        Self { count: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn push<'a>(&mut self, x: impl IntoIterator<Item = &'a f64>) {
        self.count += 1;
        let n = self.count as f64;
        for ((xi, mean), m2) in x.into_iter().zip(&mut self.mean).zip(&mut self.m2) {
            let d = xi - *mean;
            *mean += d / n;
            *m2 += d * (xi - *mean);
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Maximum-likelihood (divide-by-count) variance, not floored.
    pub fn variance(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.m2.iter().map(|m2| m2 / n).collect()
    }
}

fn check_segmentation(obs: &ObservationSequence, seg: &Segmentation, emitting: usize) -> Result<()> {
    if seg.len() != obs.len() {
        return Err(Error::Shape { expected: obs.len(), actual: seg.len() });
    }
    if let Some(&state) = seg.assign.iter().find(|&&s| s < 2 || s > emitting + 1) {
        return Err(Error::NotEmitting { state, num_states: emitting + 2 });
    }
    Ok(())
}

/// Accumulates per-state statistics of the frames assigned by `seg`.
pub fn accumulate(
    obs: &ObservationSequence,
    seg: &Segmentation,
    emitting: usize,
) -> Result<Vec<GaussianAccumulator>> {
    check_segmentation(obs, seg, emitting)?;
    let mut acc = vec![GaussianAccumulator::new(obs.dim()); emitting];
    for (t, &state) in seg.assign.iter().enumerate() {
        acc[state - 2].push(obs.frame(t));
    }
    Ok(acc)
}

/// Re-estimates one Gaussian per emitting state from the frames assigned to
/// it. Entry `k` is `None` when state `k + 2` received no frames.
pub fn estimate_gaussians(
    obs: &ObservationSequence,
    seg: &Segmentation,
    emitting: usize,
    floor: f64,
) -> Result<Vec<Option<GaussianState>>> {
    let acc = accumulate(obs, seg, emitting)?;
    Ok(acc
        .into_iter()
        .map(|a| {
            (a.count() > 0).then(|| {
                let mut g = GaussianState::new(a.mean().to_vec(), a.variance());
                g.apply_floor(floor);
                g
            })
        })
        .collect())
}

/// Transition matrix counted from one alignment path.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionEstimate {
    pub matrix: Array2<f64>,
    pub counts: Array2<usize>,
    /// Non-exit states that never appear as a transition source. Their rows
    /// in `matrix` are zero and should be replaced by the caller.
    pub empty_rows: Vec<usize>,
}

/// Counts `i → j` transitions along a full path `1, q₁ … q_T, N` and
/// normalizes each row.
pub fn estimate_transitions(path: &[usize], num_states: usize) -> Result<TransitionEstimate> {
    if path.len() < 3 || path[0] != 1 || path[path.len() - 1] != num_states {
        return Err(Error::InvalidPath(format!(
            "must run from 1 to {num_states} through at least one emitting state"
        )));
    }
    if let Some(&state) = path[1..path.len() - 1].iter().find(|&&s| s < 2 || s >= num_states) {
        return Err(Error::NotEmitting { state, num_states });
    }
    let mut counts = Array2::<usize>::zeros((num_states, num_states));
    for pair in path.windows(2) {
        counts[[pair[0] - 1, pair[1] - 1]] += 1;
    }
    let mut matrix = Array2::<f64>::zeros((num_states, num_states));
    let mut empty_rows = Vec::new();
    for i in 0..num_states - 1 {
        let total: usize = counts.row(i).sum();
        if total == 0 {
            empty_rows.push(i + 1);
            continue;
        }
        for j in 0..num_states {
            matrix[[i, j]] = counts[[i, j]] as f64 / total as f64;
        }
    }
    Ok(TransitionEstimate { matrix, counts, empty_rows })
}

/// Replaces the prototype's Gaussians with estimates from a uniform
/// segmentation of `obs`. The prototype's transitions are kept.
pub fn initialize(
    obs: &ObservationSequence,
    proto: &HmmModel,
    config: &TrainingConfig,
) -> Result<HmmModel> {
    config.check()?;
    proto.validate().map_err(Error::InvalidModel)?;
    if proto.dim() != obs.dim() {
        return Err(Error::Shape { expected: proto.dim(), actual: obs.dim() });
    }
    let emitting = proto.num_emitting();
    let seg = uniform_segment(obs.len(), emitting)?;
    let states = estimate_gaussians(obs, &seg, emitting, config.variance_floor)?
        .into_iter()
        .map(|g| g.expect("uniform segmentation leaves no state empty"))
        .collect();
    Ok(proto.with_states(states))
}

/// Re-estimates transitions and Gaussians from one alignment. Rows and
/// states the path never visits keep their previous values.
pub fn reestimate(
    obs: &ObservationSequence,
    model: &HmmModel,
    alignment: &AlignmentResult,
    floor: f64,
) -> Result<HmmModel> {
    let n = model.num_states();
    let est = estimate_transitions(&alignment.path, n)?;
    let mut trans = est.matrix;
    for &row in &est.empty_rows {
        warn!("state {row} has no outgoing transitions in the alignment; keeping previous row");
        trans.row_mut(row - 1).assign(&model.transitions().row(row - 1));
    }

    let seg = Segmentation::from_alignment(alignment);
    let states = estimate_gaussians(obs, &seg, model.num_emitting(), floor)?
        .into_iter()
        .zip(model.states())
        .enumerate()
        .map(|(k, (new, old))| {
            new.unwrap_or_else(|| {
                warn!("state {} received no frames; keeping previous Gaussian", k + 2);
                old.clone()
            })
        })
        .collect();
    Ok(HmmModel::new_unchecked(trans, states))
}

/// Runs the align / re-estimate loop starting from `model` as is.
pub fn refine(
    obs: &ObservationSequence,
    model: &HmmModel,
    config: &TrainingConfig,
    sink: &mut dyn FnMut(&IterationTrace<'_>),
) -> Result<(HmmModel, TrainingReport)> {
    config.check()?;
    let mut model = model.clone();
    let mut scores: Vec<f64> = Vec::new();
    let mut deltas = Vec::new();
    let mut converged = false;

    for iteration in 1..=config.max_iterations {
        let (alignment, trellis) = align_with_trellis(&model, obs)
            .map_err(|e| Error::TrainingAborted { iteration, source: Box::new(e) })?;
        let delta = scores.last().map(|prev| (alignment.log_score - prev).abs());
        debug!("iteration {iteration}: P* = {}", alignment.log_score);
        sink(&IterationTrace { iteration, alignment: &alignment, trellis: &trellis, delta });

        scores.push(alignment.log_score);
        deltas.push(delta);
        model = reestimate(obs, &model, &alignment, config.variance_floor)
            .map_err(|e| Error::TrainingAborted { iteration, source: Box::new(e) })?;

        if iteration >= 2 && delta.is_some_and(|d| d <= config.epsilon) {
            converged = true;
            break;
        }
    }

    let iterations_run = scores.len();
    Ok((model, TrainingReport { scores, deltas, converged, iterations_run }))
}

/// [`initialize`] followed by [`refine`], reporting each iteration to `sink`.
pub fn train_with_trace(
    obs: &ObservationSequence,
    proto: &HmmModel,
    config: &TrainingConfig,
    sink: &mut dyn FnMut(&IterationTrace<'_>),
) -> Result<(HmmModel, TrainingReport)> {
    let model = initialize(obs, proto, config)?;
    refine(obs, &model, config, sink)
}

pub fn train(
    obs: &ObservationSequence,
    proto: &HmmModel,
    config: &TrainingConfig,
) -> Result<(HmmModel, TrainingReport)> {
    train_with_trace(obs, proto, config, &mut |_| {})
}
