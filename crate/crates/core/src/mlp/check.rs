//! Finite-difference reference gradients.
//!
//! Subtracting two nearly equal losses loses most significant digits when
//! the gradient is small. Instead, both perturbed forward passes run
//! normally and the difference between them is carried forward layer by
//! layer, so `L(p + h) - L(p - h)` keeps close to full relative precision.

use super::network::{forward, Activation, Gradients, MlpWeights};
use super::MlpError;

#[derive(Clone, Copy)]
enum Param {
    Weight { o: usize, i: usize },
    Bias { o: usize },
}

/// `a(p) - a(m)` where `d = p - m` is known more precisely than `p - m`.
fn activation_difference(act: Activation, p: f64, m: f64, d: f64) -> f64 {
    match act {
        Activation::Relu => match (p > 0.0, m > 0.0) {
            (true, true) => d,
            (false, false) => 0.0,
            _ => p.max(0.0) - m.max(0.0),
        },
        // s(p) - s(m) = (e^-m - e^-p) s(p) s(m) = -e^-m expm1(-d) s(p) s(m)
        Activation::Sigmoid => -(-m).exp() * (-d).exp_m1() * act.apply(p) * act.apply(m),
    }
}

fn param_mut(net: &mut MlpWeights, layer: usize, param: Param) -> &mut f64 {
    let l = &mut net.layers_mut()[layer];
    match param {
        Param::Weight { o, i } => &mut l.weights[o * l.inputs + i],
        Param::Bias { o } => &mut l.biases[o],
    }
}

fn central_difference(net: &MlpWeights, x: &[f64], target: &[f64], layer: usize, param: Param, h: f64) -> Result<f64, MlpError> {
    let mut plus = net.clone();
    let mut minus = net.clone();
    *param_mut(&mut plus, layer, param) += h;
    *param_mut(&mut minus, layer, param) -= h;
    let (p_val, m_val) = (*param_mut(&mut plus, layer, param), *param_mut(&mut minus, layer, param));
    let step = p_val - m_val;
    let (cp, cm) = (forward(&plus, x)?, forward(&minus, x)?);

    let layers = net.layers();
    let input = if layer == 0 { &cp.input } else { &cp.post[layer - 1] };
    let mut delta_pre = vec![0.0; layers[layer].outputs];
    match param {
        Param::Weight { o, i } => delta_pre[o] = step * input[i],
        Param::Bias { o } => delta_pre[o] = step,
    }
    let mut delta_post = Vec::new();
    for j in layer..layers.len() {
        if j > layer {
            let l = &layers[j];
            delta_pre = (0..l.outputs).map(|o| l.row(o).iter().zip(&delta_post).map(|(w, d)| w * d).sum()).collect();
        }
        delta_post = (0..layers[j].outputs)
            .map(|o| activation_difference(layers[j].activation, cp.pre[j][o], cm.pre[j][o], delta_pre[o]))
            .collect();
    }
    let (yp, ym) = (cp.output(), cm.output());
    let loss_diff: f64 =
        (0..yp.len()).map(|k| delta_post[k] * (yp[k] + ym[k] - 2.0 * target[k])).sum::<f64>() / yp.len() as f64;
    Ok(loss_diff / step)
}

/// Central finite differences `(L(p + h) - L(p - h)) / 2h` of the
/// single-example loss for every parameter.
pub fn numeric_gradients(net: &MlpWeights, x: &[f64], target: &[f64], h: f64) -> Result<Gradients, MlpError> {
    if target.len() != net.output_dim() {
        return Err(MlpError::InputLength { expected: net.output_dim(), found: target.len() });
    }
    let mut grads = Gradients::zeros_like(net);
    for (l, layer) in net.layers().iter().enumerate() {
        for o in 0..layer.outputs {
            for i in 0..layer.inputs {
                grads.weights[l][o * layer.inputs + i] = central_difference(net, x, target, l, Param::Weight { o, i }, h)?;
            }
            grads.biases[l][o] = central_difference(net, x, target, l, Param::Bias { o }, h)?;
        }
    }
    Ok(grads)
}

/// `|a - b| / max(|a|, |b|)`, zero when both are zero.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
