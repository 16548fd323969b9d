//! Exact reverse-mode differentiation through the stage chain.
//!
//! One engine walks the chain once from the last stage to the first, carrying
//! the hidden-state adjoint across stage boundaries. It produces parameter
//! gradients and input sensitivities in the same pass, so the two public
//! surfaces ([`backward`] and [`input_gradient`]) cannot drift apart.

use crate::error::{Error, Result};
use crate::model::{Act, ForwardTrace, ParameterSet};

/// Gradients with the same shape-for-shape structure as [`ParameterSet`].
#[derive(Debug, Clone)]
pub struct ParamGrads(ParameterSet);

impl ParamGrads {
    pub fn zeros_like(params: &ParameterSet) -> Self {
        ParamGrads(ParameterSet::zeros_like(params))
    }

    /// Shape-for-shape view of the gradient values.
    pub fn values(&self) -> &ParameterSet {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut ParameterSet {
        &mut self.0
    }

    /// Accumulate `other` into `self`, in fixed declared order.
    pub fn add_assign(&mut self, other: &ParamGrads) {
        self.0.zip_values_mut(&other.0, |a, b| *a += b);
    }

    pub fn scale(&mut self, s: f64) {
        self.0.for_each_value_mut(|v| *v *= s);
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        self.0.for_each_value(|v| m = m.max(v.abs()));
        m
    }
}

fn check_trace(params: &ParameterSet, trace: &ForwardTrace, loss_grads: &[Vec<f64>]) -> Result<()> {
    let topo = params.topology();
    if trace.stages.len() != topo.stage_count {
        return Err(Error::Shape(format!(
            "trace has {} stages, parameters expect {}",
            trace.stages.len(),
            topo.stage_count
        )));
    }
    if loss_grads.len() != topo.stage_count {
        return Err(Error::Shape(format!(
            "loss gradients cover {} stages, parameters expect {}",
            loss_grads.len(),
            topo.stage_count
        )));
    }
    for k in 0..topo.stage_count {
        let st = &trace.stages[k];
        if st.input.len() != topo.effective_input_width(k)
            || st.transition_acts.len() != topo.transition_depth
            || st.prediction.len() != topo.output_widths[k]
            || loss_grads[k].len() != topo.output_widths[k]
        {
            return Err(Error::Shape(format!("stage {k}: trace does not match parameter shapes")));
        }
    }
    Ok(())
}

/// Gradients of the smooth data term with respect to every parameter, given
/// `loss_grads[k][j] = dL/d prediction_{k,j}`.
pub fn backward(
    params: &ParameterSet,
    trace: &ForwardTrace,
    loss_grads: &[Vec<f64>],
) -> Result<ParamGrads> {
    check_trace(params, trace, loss_grads)?;
    Ok(backprop(params, trace, loss_grads, Act::Sigmoid).0)
}

/// Sensitivity of one predicted output with respect to every input sensor:
/// entry `(k, i)` is `d prediction_{target} / d x_{k,i}`. Entries for stages
/// after the target stage are exactly zero.
pub fn input_gradient(
    params: &ParameterSet,
    trace: &ForwardTrace,
    target: (usize, usize),
) -> Result<Vec<Vec<f64>>> {
    input_gradient_with(params, trace, target, Act::Sigmoid)
}

pub(crate) fn input_gradient_with(
    params: &ParameterSet,
    trace: &ForwardTrace,
    (stage, output): (usize, usize),
    act: Act,
) -> Result<Vec<Vec<f64>>> {
    let topo = params.topology();
    if stage >= topo.stage_count || output >= topo.output_widths[stage] {
        return Err(Error::Argument(format!(
            "target ({stage}, {output}) outside topology with {} stages",
            topo.stage_count
        )));
    }
    let mut loss_grads: Vec<Vec<f64>> =
        topo.output_widths.iter().map(|&w| vec![0.0; w]).collect();
    loss_grads[stage][output] = 1.0;
    check_trace(params, trace, &loss_grads)?;
    let (_, inputs) = backprop(params, trace, &loss_grads, act);
    // Report sensitivities for the stage's own sensors, dropping any
    // fed-forward output slots.
    Ok(inputs
        .into_iter()
        .enumerate()
        .map(|(k, mut g)| {
            g.truncate(topo.input_widths[k]);
            g
        })
        .collect())
}

/// Core reverse pass. Returns parameter gradients and the gradient with
/// respect to each stage's effective input.
pub(crate) fn backprop(
    params: &ParameterSet,
    trace: &ForwardTrace,
    loss_grads: &[Vec<f64>],
    act: Act,
) -> (ParamGrads, Vec<Vec<f64>>) {
    let mut grads = ParamGrads::zeros_like(params);
    let inputs = backprop_into(params, trace, loss_grads, act, &mut grads);
    (grads, inputs)
}

/// Like [`backprop`] but accumulating into an existing gradient buffer, so a
/// batch loop allocates one accumulator instead of one per sample.
pub(crate) fn backprop_into(
    params: &ParameterSet,
    trace: &ForwardTrace,
    loss_grads: &[Vec<f64>],
    act: Act,
    grads: &mut ParamGrads,
) -> Vec<Vec<f64>> {
    let topo = params.topology();
    let mut input_grads: Vec<Vec<f64>> = Vec::with_capacity(topo.stage_count);
    input_grads.resize(topo.stage_count, Vec::new());

    // Adjoint of the hidden state flowing out of the stage currently being
    // processed (i.e. into stage k from stage k+1).
    let mut hidden_adj = vec![0.0; topo.hidden_width];

    for k in (0..topo.stage_count).rev() {
        let stage = &params.stages()[k];
        let st = &trace.stages[k];
        let gstage = &mut grads.0.stages_mut()[k];
        debug_assert_eq!(st.prediction.len(), loss_grads[k].len());

        // Emission: from the prediction adjoint back to the hidden state.
        let depth_e = stage.emission.len();
        let mut upstream = loss_grads[k].clone();
        for d in (0..depth_e).rev() {
            let layer_input: &[f64] = if d == 0 {
                st.transition_acts.last().expect("transition depth >= 1")
            } else {
                &st.emission_acts[d - 1]
            };
            // The head is linear; hidden emission layers carry the activation.
            let dz: Vec<f64> = if d == depth_e - 1 {
                upstream.clone()
            } else {
                upstream
                    .iter()
                    .zip(&st.emission_acts[d])
                    .map(|(&u, &a)| u * act.derivative_at_output(a))
                    .collect()
            };
            gstage.emission[d].weight.add_outer(&dz, layer_input, 1.0);
            for (b, &g) in gstage.emission[d].bias.iter_mut().zip(&dz) {
                *b += g;
            }
            upstream = stage.emission[d].weight.matvec_transpose(&dz);
        }

        // Total adjoint at the stage's hidden state: its own emission plus
        // everything carried back from later stages.
        let mut dh: Vec<f64> = upstream.iter().zip(&hidden_adj).map(|(a, b)| a + b).collect();

        // Transition: from the hidden state back to the previous hidden
        // state and the stage inputs.
        let depth_t = stage.transition.len();
        for d in (0..depth_t).rev() {
            let acts = &st.transition_acts[d];
            let dz: Vec<f64> =
                dh.iter().zip(acts).map(|(&u, &a)| u * act.derivative_at_output(a)).collect();
            let layer_input: &[f64] =
                if d == 0 { &st.prev_hidden } else { &st.transition_acts[d - 1] };
            gstage.transition[d].weight.add_outer(&dz, layer_input, 1.0);
            for (b, &g) in gstage.transition[d].bias.iter_mut().zip(&dz) {
                *b += g;
            }
            if d == 0 {
                gstage.input_weights.add_outer(&dz, &st.input, 1.0);
                input_grads[k] = stage.input_weights.matvec_transpose(&dz);
            }
            dh = stage.transition[d].weight.matvec_transpose(&dz);
        }
        hidden_adj = dh;
    }
    input_grads
}

/// Compare [`backward`] against central finite differences of the summed
/// squared error over every parameter. Returns the maximum relative error
/// `|analytic - numeric| / (|analytic| + 1e-8)`.
pub fn finite_diff_check(
    params: &ParameterSet,
    inputs: &[Vec<f64>],
    outputs: &[Vec<f64>],
    eps: f64,
) -> Result<f64> {
    if eps <= 0.0 {
        return Err(Error::Argument("finite difference step must be positive".into()));
    }
    let sse = |p: &ParameterSet| -> Result<f64> {
        let trace = crate::model::forward_teacher(p, inputs, outputs)?;
        let mut total = 0.0;
        for (k, st) in trace.stages.iter().enumerate() {
            for (j, &pred) in st.prediction.iter().enumerate() {
                total += (outputs[k][j] - pred).powi(2);
            }
        }
        Ok(total)
    };

    let trace = crate::model::forward_teacher(params, inputs, outputs)?;
    let loss_grads: Vec<Vec<f64>> = trace
        .stages
        .iter()
        .enumerate()
        .map(|(k, st)| {
            st.prediction.iter().enumerate().map(|(j, &pred)| 2.0 * (pred - outputs[k][j])).collect()
        })
        .collect();
    let analytic = backward(params, &trace, &loss_grads)?;

    let mut probe = params.clone();
    let mut max_rel = 0.0f64;
    let n = params.value_count();
    for idx in 0..n {
        let theta = params.flat_get(idx);
        probe.flat_set(idx, theta + eps);
        let hi = sse(&probe)?;
        probe.flat_set(idx, theta - eps);
        let lo = sse(&probe)?;
        probe.flat_set(idx, theta);
        let numeric = (hi - lo) / (2.0 * eps);
        let a = analytic.values().flat_get(idx);
        let rel = (a - numeric).abs() / (a.abs() + 1e-8);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}
