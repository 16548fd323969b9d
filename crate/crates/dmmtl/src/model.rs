//! Model architecture: stage topology, parameters, and the forward pass.
//!
//! The model is a chain of per-stage blocks. Stage `k` turns the previous
//! hidden state and its own inputs into a new hidden state (transition
//! network, `transition_depth` sigmoid layers) and maps that hidden state to
//! the stage's predicted outputs (emission network, `emission_depth` layers
//! with a linear head). Every stage owns its own weights; only the hidden
//! state crosses stage boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sigmoid_in_place, Matrix};
use crate::rng::{Rng, Stream};

/// Shape of the stage chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTopology {
    /// Number of stages, `>= 1`.
    pub stage_count: usize,
    /// Input sensors per stage.
    pub input_widths: Vec<usize>,
    /// Output sensors per stage.
    pub output_widths: Vec<usize>,
    /// Hidden state width, shared by every stage.
    pub hidden_width: usize,
    /// Transition network depth (layers), `>= 1`.
    pub transition_depth: usize,
    /// Emission network depth (layers), `>= 1`; the last layer is linear.
    pub emission_depth: usize,
    /// When set, stage k's effective input is `x_k` concatenated with the
    /// previous stage's outputs (actual outputs during training, the model's
    /// own predictions at prediction time).
    pub feed_prev_outputs: bool,
}

impl StageTopology {
    pub fn new(
        input_widths: Vec<usize>,
        output_widths: Vec<usize>,
        hidden_width: usize,
        transition_depth: usize,
        emission_depth: usize,
        feed_prev_outputs: bool,
    ) -> Result<Self> {
        let topo = StageTopology {
            stage_count: input_widths.len(),
            input_widths,
            output_widths,
            hidden_width,
            transition_depth,
            emission_depth,
            feed_prev_outputs,
        };
        topo.validate()?;
        Ok(topo)
    }

    /// Uniform widths across stages.
    pub fn uniform(
        stages: usize,
        inputs_per_stage: usize,
        outputs_per_stage: usize,
        hidden_width: usize,
    ) -> Result<Self> {
        StageTopology::new(
            vec![inputs_per_stage; stages],
            vec![outputs_per_stage; stages],
            hidden_width,
            1,
            1,
            false,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage_count == 0 {
            return Err(Error::Argument("topology needs at least one stage".into()));
        }
        if self.input_widths.len() != self.stage_count || self.output_widths.len() != self.stage_count {
            return Err(Error::Shape("per-stage width lists must match the stage count".into()));
        }
        if self.hidden_width == 0 {
            return Err(Error::Argument("hidden width must be positive".into()));
        }
        if self.transition_depth == 0 || self.emission_depth == 0 {
            return Err(Error::Argument("network depths must be at least 1".into()));
        }
        if !self.output_widths.iter().any(|&w| w > 0) {
            return Err(Error::Argument("at least one stage must have outputs".into()));
        }
        Ok(())
    }

    /// Width of stage k's effective input (its own sensors plus, when
    /// configured, the previous stage's outputs).
    pub fn effective_input_width(&self, stage: usize) -> usize {
        let mut w = self.input_widths[stage];
        if self.feed_prev_outputs && stage > 0 {
            w += self.output_widths[stage - 1];
        }
        w
    }

    pub fn total_outputs(&self) -> usize {
        self.output_widths.iter().sum()
    }
}

/// One dense layer: `weight * input + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Per-stage weights.
///
/// `input_weights` maps the effective input into the first transition layer;
/// its i-th column is the group of weights attached to input sensor i, which
/// is what the group penalty and the global importance scores act on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageParams {
    pub input_weights: Matrix,
    /// `transition_depth` layers; layer 0's weight is the recurrent map
    /// applied to the previous stage's hidden state.
    pub transition: Vec<DenseLayer>,
    /// `emission_depth` layers; all but the last are sigmoid, the last is a
    /// linear head onto the stage's outputs.
    pub emission: Vec<DenseLayer>,
}

/// All model parameters plus the topology they were built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    topology: StageTopology,
    stages: Vec<StageParams>,
}

/// Activation selector for the internal forward/backward paths. The public
/// model is always sigmoid; the identity variant exists so tests can compare
/// against closed-form linear chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Act {
    Sigmoid,
    #[allow(dead_code)] // constructed by tests that compare against linear chains
    Identity,
}

impl Act {
    fn apply(self, v: &mut [f64]) {
        match self {
            Act::Sigmoid => sigmoid_in_place(v),
            Act::Identity => {}
        }
    }

    /// Derivative at a post-activation value.
    pub(crate) fn derivative_at_output(self, a: f64) -> f64 {
        match self {
            Act::Sigmoid => a * (1.0 - a),
            Act::Identity => 1.0,
        }
    }
}

/// Deterministic initialization: weight entries drawn i.i.d. normal with
/// standard deviation `1/sqrt(fan_in)`, biases zero.
pub fn init_params(topology: &StageTopology, seed: u64) -> ParameterSet {
    init_params_stream(topology, Rng::substream(seed, Stream::Init))
}

pub(crate) fn init_params_stream(topology: &StageTopology, mut rng: Rng) -> ParameterSet {
    let nh = topology.hidden_width;
    let mut init_matrix = |rows: usize, cols: usize| {
        let std = 1.0 / (cols.max(1) as f64).sqrt();
        Matrix::from_fn(rows, cols, |_, _| rng.next_normal_scaled(std))
    };
    let mut stages = Vec::with_capacity(topology.stage_count);
    for k in 0..topology.stage_count {
        let nx_eff = topology.effective_input_width(k);
        let ny = topology.output_widths[k];
        let input_weights = init_matrix(nh, nx_eff);
        let mut transition = Vec::with_capacity(topology.transition_depth);
        for _ in 0..topology.transition_depth {
            transition.push(DenseLayer { weight: init_matrix(nh, nh), bias: vec![0.0; nh] });
        }
        let mut emission = Vec::with_capacity(topology.emission_depth);
        for _ in 0..topology.emission_depth - 1 {
            emission.push(DenseLayer { weight: init_matrix(nh, nh), bias: vec![0.0; nh] });
        }
        emission.push(DenseLayer { weight: init_matrix(ny, nh), bias: vec![0.0; ny] });
        stages.push(StageParams { input_weights, transition, emission });
    }
    ParameterSet { topology: topology.clone(), stages }
}

impl ParameterSet {
    /// All-zero parameters with the same shapes as `like`. Used for gradient
    /// accumulators.
    pub fn zeros_like(like: &ParameterSet) -> ParameterSet {
        let mut out = like.clone();
        out.for_each_value_mut(|v| *v = 0.0);
        out
    }

    pub fn zeros(topology: &StageTopology) -> ParameterSet {
        let mut out = init_params(topology, 0);
        out.for_each_value_mut(|v| *v = 0.0);
        out
    }

    pub fn topology(&self) -> &StageTopology {
        &self.topology
    }

    pub fn stages(&self) -> &[StageParams] {
        &self.stages
    }

    pub fn stages_mut(&mut self) -> &mut [StageParams] {
        &mut self.stages
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_value(|v| ok &= v.is_finite());
        ok
    }

    /// Sum of squares over every parameter.
    pub fn l2_norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        self.for_each_value(|v| acc += v * v);
        acc
    }

    /// Visit every parameter value in declared order: per stage, the input
    /// weights, then transition layers (weight then bias), then emission
    /// layers. The same order backs flat indexing and checkpoints.
    pub fn for_each_value(&self, mut f: impl FnMut(f64)) {
        for stage in &self.stages {
            for &v in stage.input_weights.data() {
                f(v);
            }
            for layer in stage.transition.iter().chain(&stage.emission) {
                for &v in layer.weight.data() {
                    f(v);
                }
                for &v in &layer.bias {
                    f(v);
                }
            }
        }
    }

    pub fn for_each_value_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for stage in &mut self.stages {
            for v in stage.input_weights.data_mut() {
                f(v);
            }
            for layer in stage.transition.iter_mut().chain(&mut stage.emission) {
                for v in layer.weight.data_mut() {
                    f(v);
                }
                for v in &mut layer.bias {
                    f(v);
                }
            }
        }
    }

    /// Visit `(self, other)` value pairs in declared order. Shapes must match.
    pub fn zip_values_mut(&mut self, other: &ParameterSet, mut f: impl FnMut(&mut f64, f64)) {
        for (stage, ostage) in self.stages.iter_mut().zip(&other.stages) {
            for (v, &o) in stage.input_weights.data_mut().iter_mut().zip(ostage.input_weights.data()) {
                f(v, o);
            }
            let layers = stage.transition.iter_mut().chain(&mut stage.emission);
            let olayers = ostage.transition.iter().chain(&ostage.emission);
            for (layer, olayer) in layers.zip(olayers) {
                for (v, &o) in layer.weight.data_mut().iter_mut().zip(olayer.weight.data()) {
                    f(v, o);
                }
                for (v, &o) in layer.bias.iter_mut().zip(&olayer.bias) {
                    f(v, o);
                }
            }
        }
    }

    /// Like [`ParameterSet::zip_values_mut`] but skipping the per-stage input
    /// weight matrices, which the proximal update owns.
    pub fn zip_values_mut_except_input_weights(
        &mut self,
        other: &ParameterSet,
        mut f: impl FnMut(&mut f64, f64),
    ) {
        for (stage, ostage) in self.stages.iter_mut().zip(&other.stages) {
            let layers = stage.transition.iter_mut().chain(&mut stage.emission);
            let olayers = ostage.transition.iter().chain(&ostage.emission);
            for (layer, olayer) in layers.zip(olayers) {
                for (v, &o) in layer.weight.data_mut().iter_mut().zip(olayer.weight.data()) {
                    f(v, o);
                }
                for (v, &o) in layer.bias.iter_mut().zip(&olayer.bias) {
                    f(v, o);
                }
            }
        }
    }

    pub fn value_count(&self) -> usize {
        let mut n = 0;
        self.for_each_value(|_| n += 1);
        n
    }

    /// Read the parameter at `index` in declared order. O(total parameters);
    /// only used by finite-difference checks on small models.
    pub fn flat_get(&self, index: usize) -> f64 {
        let mut i = 0;
        let mut out = f64::NAN;
        self.for_each_value(|v| {
            if i == index {
                out = v;
            }
            i += 1;
        });
        out
    }

    pub fn flat_set(&mut self, index: usize, value: f64) {
        let mut i = 0;
        self.for_each_value_mut(|v| {
            if i == index {
                *v = value;
            }
            i += 1;
        });
    }
}

/// Per-stage activations retained from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct StageTrace {
    /// Effective input vector fed to the stage.
    pub input: Vec<f64>,
    /// Hidden state handed over from the previous stage (zeros for stage 0).
    pub prev_hidden: Vec<f64>,
    /// Post-activation outputs of each transition layer; the last entry is
    /// the stage's hidden state.
    pub transition_acts: Vec<Vec<f64>>,
    /// Post-activation outputs of the hidden emission layers (empty when the
    /// emission network is a single linear layer).
    pub emission_acts: Vec<Vec<f64>>,
    /// Predicted outputs for the stage.
    pub prediction: Vec<f64>,
}

/// Activations of a full forward pass over one sample.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub stages: Vec<StageTrace>,
}

impl ForwardTrace {
    pub fn hidden(&self, stage: usize) -> &[f64] {
        self.stages[stage].transition_acts.last().expect("transition depth >= 1")
    }

    pub fn predictions(&self) -> Vec<Vec<f64>> {
        self.stages.iter().map(|s| s.prediction.clone()).collect()
    }
}

fn check_input_shapes(params: &ParameterSet, inputs: &[Vec<f64>]) -> Result<()> {
    let topo = &params.topology;
    if inputs.len() != topo.stage_count {
        return Err(Error::Shape(format!(
            "expected {} per-stage input vectors, got {}",
            topo.stage_count,
            inputs.len()
        )));
    }
    for (k, x) in inputs.iter().enumerate() {
        if x.len() != topo.input_widths[k] {
            return Err(Error::Shape(format!(
                "stage {k}: expected {} inputs, got {}",
                topo.input_widths[k],
                x.len()
            )));
        }
    }
    Ok(())
}

/// Forward pass retaining activations. When the topology feeds previous
/// outputs forward, the model's own predictions are used (see
/// [`forward_teacher`] for the training-time variant).
pub fn forward(params: &ParameterSet, inputs: &[Vec<f64>]) -> Result<ForwardTrace> {
    check_input_shapes(params, inputs)?;
    Ok(forward_with(params, inputs, None, Act::Sigmoid))
}

/// Forward pass that feeds the *actual* previous-stage outputs into the next
/// stage when the topology asks for them. Equivalent to [`forward`] when
/// `feed_prev_outputs` is off.
pub fn forward_teacher(
    params: &ParameterSet,
    inputs: &[Vec<f64>],
    outputs: &[Vec<f64>],
) -> Result<ForwardTrace> {
    check_input_shapes(params, inputs)?;
    let topo = &params.topology;
    if outputs.len() != topo.stage_count {
        return Err(Error::Shape(format!(
            "expected {} per-stage output vectors, got {}",
            topo.stage_count,
            outputs.len()
        )));
    }
    for (k, y) in outputs.iter().enumerate() {
        if y.len() != topo.output_widths[k] {
            return Err(Error::Shape(format!(
                "stage {k}: expected {} outputs, got {}",
                topo.output_widths[k],
                y.len()
            )));
        }
    }
    Ok(forward_with(params, inputs, Some(outputs), Act::Sigmoid))
}

/// Predictions only.
pub fn predict(params: &ParameterSet, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    Ok(forward(params, inputs)?.predictions())
}

pub(crate) fn forward_with(
    params: &ParameterSet,
    inputs: &[Vec<f64>],
    teacher_outputs: Option<&[Vec<f64>]>,
    act: Act,
) -> ForwardTrace {
    let topo = &params.topology;
    let nh = topo.hidden_width;
    let mut stages = Vec::with_capacity(topo.stage_count);
    let mut hidden = vec![0.0; nh];
    for (k, stage) in params.stages.iter().enumerate() {
        let input = if topo.feed_prev_outputs && k > 0 {
            let fed: &[f64] = match teacher_outputs {
                Some(ys) => &ys[k - 1],
                None => {
                    let prev: &StageTrace = &stages[k - 1];
                    &prev.prediction
                }
            };
            let mut v = Vec::with_capacity(inputs[k].len() + fed.len());
            v.extend_from_slice(&inputs[k]);
            v.extend_from_slice(fed);
            v
        } else {
            inputs[k].clone()
        };
        let prev_hidden = hidden.clone();

        let mut transition_acts = Vec::with_capacity(stage.transition.len());
        let mut carry = prev_hidden.clone();
        for (d, layer) in stage.transition.iter().enumerate() {
            let mut z = layer.bias.clone();
            layer.weight.matvec_add(&carry, &mut z);
            if d == 0 {
                stage.input_weights.matvec_add(&input, &mut z);
            }
            act.apply(&mut z);
            carry = z.clone();
            transition_acts.push(z);
        }
        hidden = carry.clone();

        let mut emission_acts = Vec::with_capacity(stage.emission.len().saturating_sub(1));
        let mut u = carry;
        for layer in &stage.emission[..stage.emission.len() - 1] {
            let mut z = layer.bias.clone();
            layer.weight.matvec_add(&u, &mut z);
            act.apply(&mut z);
            u = z.clone();
            emission_acts.push(z);
        }
        let head = stage.emission.last().expect("emission depth >= 1");
        let mut prediction = head.bias.clone();
        head.weight.matvec_add(&u, &mut prediction);

        stages.push(StageTrace { input, prev_hidden, transition_acts, emission_acts, prediction });
    }
    ForwardTrace { stages }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sigmoid_scalar;

    fn small_topology() -> StageTopology {
        StageTopology::new(vec![4, 4, 4], vec![2, 2, 2], 3, 1, 1, false).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let topo = small_topology();
        let a = init_params(&topo, 9);
        let b = init_params(&topo, 9);
        assert_eq!(a, b);
        let c = init_params(&topo, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn init_shapes_match_topology() {
        let p = init_params(&small_topology(), 1);
        for stage in p.stages() {
            assert_eq!((stage.input_weights.rows(), stage.input_weights.cols()), (3, 4));
            assert_eq!(stage.transition.len(), 1);
            assert_eq!((stage.transition[0].weight.rows(), stage.transition[0].weight.cols()), (3, 3));
            assert_eq!(stage.transition[0].bias.len(), 3);
            let head = stage.emission.last().unwrap();
            assert_eq!((head.weight.rows(), head.weight.cols()), (2, 3));
        }
    }

    #[test]
    fn init_entry_statistics() {
        // Entries use std 1/sqrt(fan_in); check the sample mean of a large
        // weight block against its standard error.
        let topo = StageTopology::new(vec![100], vec![1], 100, 1, 1, false).unwrap();
        let p = init_params(&topo, 123);
        let data = p.stages()[0].input_weights.data();
        assert_eq!(data.len(), 10_000);
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        let std_entry = 0.1;
        let tol = 3.0 * std_entry / (data.len() as f64).sqrt();
        assert!(mean.abs() < tol, "mean {mean} tol {tol}");
    }

    #[test]
    fn forward_all_zero_params() {
        let topo = small_topology();
        let p = ParameterSet::zeros(&topo);
        let xs = vec![vec![1.0; 4], vec![-2.0; 4], vec![0.5; 4]];
        let trace = forward(&p, &xs).unwrap();
        for stage in &trace.stages {
            for &h in stage.transition_acts.last().unwrap() {
                assert_eq!(h, 0.5);
            }
            for &y in &stage.prediction {
                assert_eq!(y, 0.0);
            }
        }
    }

    #[test]
    fn forward_scalar_hand_computation() {
        let topo = StageTopology::new(vec![1], vec![1], 1, 1, 1, false).unwrap();
        let mut p = ParameterSet::zeros(&topo);
        p.stages_mut()[0].input_weights.set(0, 0, 1.0);
        p.stages_mut()[0].emission[0].weight.set(0, 0, 2.0);
        let trace = forward(&p, &[vec![0.0]]).unwrap();
        assert_eq!(trace.hidden(0), &[0.5]);
        assert_eq!(trace.stages[0].prediction, vec![1.0]);
    }

    #[test]
    fn forward_matches_direct_transcription_single_layer() {
        let topo = small_topology();
        let p = init_params(&topo, 77);
        let mut rng = crate::rng::Rng::substream(5, crate::rng::Stream::Sample(1));
        let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rng.next_normal()).collect()).collect();
        let trace = forward(&p, &xs).unwrap();

        // Independent transcription of the one-layer recursion.
        let mut h = vec![0.0; 3];
        for k in 0..3 {
            let st = &p.stages()[k];
            let mut z = st.transition[0].bias.clone();
            for r in 0..3 {
                for c in 0..3 {
                    z[r] += st.transition[0].weight.get(r, c) * h[c];
                }
                for c in 0..4 {
                    z[r] += st.input_weights.get(r, c) * xs[k][c];
                }
            }
            h = z.iter().map(|&v| sigmoid_scalar(v)).collect();
            let head = &st.emission[0];
            let mut y = head.bias.clone();
            for r in 0..2 {
                for c in 0..3 {
                    y[r] += head.weight.get(r, c) * h[c];
                }
            }
            for (a, b) in h.iter().zip(trace.hidden(k)) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in y.iter().zip(&trace.stages[k].prediction) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn causality_under_input_perturbation() {
        let topo = small_topology();
        let p = init_params(&topo, 3);
        let xs = vec![vec![0.3, -0.2, 0.8, 0.1]; 3];
        let base = predict(&p, &xs).unwrap();
        let mut bumped = xs.clone();
        bumped[2][0] += 10.0;
        let after = predict(&p, &bumped).unwrap();
        assert_eq!(base[0], after[0]);
        assert_eq!(base[1], after[1]);
        assert_ne!(base[2], after[2]);
    }

    #[test]
    fn predict_agrees_with_forward() {
        let topo = StageTopology::new(vec![2, 3], vec![1, 2], 4, 2, 2, false).unwrap();
        let p = init_params(&topo, 21);
        let xs = vec![vec![0.1, -0.5], vec![1.0, 0.0, -1.0]];
        let trace = forward(&p, &xs).unwrap();
        assert_eq!(predict(&p, &xs).unwrap(), trace.predictions());
    }

    #[test]
    fn teacher_forcing_matches_self_feed_when_predictions_equal_targets() {
        let topo = StageTopology::new(vec![2, 2], vec![1, 1], 2, 1, 1, true).unwrap();
        let p = init_params(&topo, 4);
        let xs = vec![vec![0.2, -0.1], vec![0.4, 0.9]];
        let self_fed = forward(&p, &xs).unwrap();
        let ys = self_fed.predictions();
        let forced = forward_teacher(&p, &xs, &ys).unwrap();
        assert_eq!(self_fed.predictions(), forced.predictions());
    }

    #[test]
    fn shape_errors_are_reported() {
        let topo = small_topology();
        let p = init_params(&topo, 0);
        let bad = vec![vec![0.0; 4], vec![0.0; 3], vec![0.0; 4]];
        assert!(matches!(forward(&p, &bad), Err(Error::Shape(_))));
        assert!(matches!(forward(&p, &[vec![0.0; 4]]), Err(Error::Shape(_))));
    }

    #[test]
    fn flat_indexing_round_trips() {
        let topo = small_topology();
        let mut p = init_params(&topo, 8);
        let n = p.value_count();
        let before = p.flat_get(n / 2);
        p.flat_set(n / 2, before + 1.0);
        assert_eq!(p.flat_get(n / 2), before + 1.0);
    }

    #[test]
    fn topology_validation() {
        assert!(StageTopology::new(vec![], vec![], 1, 1, 1, false).is_err());
        assert!(StageTopology::new(vec![2], vec![0], 3, 1, 1, false).is_err());
        assert!(StageTopology::new(vec![2], vec![1], 0, 1, 1, false).is_err());
        assert!(StageTopology::new(vec![2], vec![1], 3, 0, 1, false).is_err());
    }
}
