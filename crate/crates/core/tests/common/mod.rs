//! Shared oracles for integration tests.
#![allow(dead_code)]

use sharpcontour::training::{FocalSettings, TrainingSample};
use sharpcontour::IpcParams;

/// Central-difference quotient `(L(theta + h e_i) - L(theta - h e_i)) / 2h`
/// of the mean focal loss, for every coordinate `i`.
///
/// Evaluating the two losses separately in f64 loses most digits to
/// cancellation when the gradient is small. Instead the exact difference
/// between the two perturbed evaluations is carried through the network:
/// on a fixed ReLU activation pattern the network is affine in each
/// parameter, so the difference of pre-activations propagates linearly, and
/// the differences of sigmoid, log and power are taken with `expm1`/`ln1p`.
/// Coordinates whose stencil changes an activation or the probability clamp
/// are returned as `None`.
pub fn central_difference(params: &IpcParams, batch: &[TrainingSample], fs: FocalSettings, h: f64) -> Vec<Option<f64>> {
    let net = params.network();
    let layers = net.layers();
    let inputs: Vec<Vec<f64>> = batch.iter().map(TrainingSample::input).collect();
    // Unperturbed pre-activations and activations per sample.
    let mut pre: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut act: Vec<Vec<Vec<f64>>> = Vec::new();
    for x in &inputs {
        let mut a = vec![x.clone()];
        let mut z = Vec::new();
        for (k, l) in layers.iter().enumerate() {
            let zk: Vec<f64> = l.w.iter().zip(&l.b).map(|(row, b)| row.iter().zip(a.last().unwrap()).fold(*b, |s, (w, v)| s + w * v)).collect();
            let ak = if k + 1 < layers.len() { zk.iter().map(|v| v.max(0.0)).collect() } else { zk.clone() };
            z.push(zk);
            a.push(ak);
        }
        pre.push(z);
        act.push(a);
    }
    let mut out = Vec::with_capacity(net.param_count());
    for (k, l) in layers.iter().enumerate() {
        let (ins, outs) = (l.inputs(), l.outputs());
        for idx in 0..outs * (ins + 1) {
            let (o, j) = if idx < outs * ins { (idx / ins, Some(idx % ins)) } else { (idx - outs * ins, None) };
            let mut total = 0.0;
            let mut valid = true;
            for s in 0..batch.len() {
                // Half-difference of layer-k pre-activations: only unit o moves.
                let dz_o = match j {
                    Some(j) => h * act[s][k][j],
                    None => h,
                };
                let mut d = vec![0.0; outs];
                d[o] = dz_o;
                let mut layer = k;
                let mut final_dz = None;
                loop {
                    if layer + 1 == layers.len() {
                        final_dz = Some(d[0]);
                        break;
                    }
                    // ReLU: the stencil must stay on one side of zero.
                    for (u, du) in d.iter_mut().enumerate() {
                        let zc = pre[s][layer][u];
                        if *du != 0.0 && (zc - du.abs() <= 0.0) != (zc + du.abs() <= 0.0) {
                            valid = false;
                        }
                        if zc <= 0.0 {
                            *du = 0.0;
                        }
                    }
                    if !valid {
                        break;
                    }
                    layer += 1;
                    let next = &layers[layer];
                    d = next.w.iter().map(|row| row.iter().zip(&d).map(|(w, v)| w * v).sum()).collect();
                }
                if !valid {
                    break;
                }
                let zc = pre[s][layers.len() - 1][0];
                match loss_difference(zc, final_dz.unwrap(), batch[s].label, fs) {
                    Some(v) => total += v,
                    None => {
                        valid = false;
                        break;
                    }
                }
            }
            out.push(valid.then(|| total / batch.len() as f64 / (2.0 * h)));
        }
    }
    out
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `(a^g - b^g)` from `b` and `a - b`.
fn pow_diff(b: f64, diff: f64, g: f64) -> f64 {
    b.powf(g) * (g * (diff / b).ln_1p()).exp_m1()
}

/// `loss(zc + dz) - loss(zc - dz)` without cancellation, or `None` when the
/// clamp is active at either end.
fn loss_difference(zc: f64, dz: f64, y: u8, fs: FocalSettings) -> Option<f64> {
    let (zu, zd) = (zc + dz, zc - dz);
    let (pu, pd) = (sigmoid(zu), sigmoid(zd));
    let (qu, qd) = (sigmoid(-zu), sigmoid(-zd));
    let lo = fs.eps;
    let hi = 1.0 - fs.eps;
    if !(lo..=hi).contains(&pu) || !(lo..=hi).contains(&pd) {
        return None;
    }
    // p_up - p_down = p_down * q_up * expm1(z_up - z_down).
    let dp = pd * qu * (2.0 * dz).exp_m1();
    let dq = -dp;
    if y == 1 {
        // -alpha * q^g * ln p
        let u_up = qu.powf(fs.gamma);
        let du = pow_diff(qd, dq, fs.gamma);
        let v_dn = pd.ln();
        let dv = (dp / pd).ln_1p();
        Some(-fs.alpha * (u_up * dv + v_dn * du))
    } else {
        // -(1 - alpha) * p^g * ln q
        let u_up = pu.powf(fs.gamma);
        let du = pow_diff(pd, dp, fs.gamma);
        let v_dn = qd.ln();
        let dv = (dq / qd).ln_1p();
        Some(-(1.0 - fs.alpha) * (u_up * dv + v_dn * du))
    }
}

/// Compares an analytic gradient with the oracle; returns the worst
/// relative error over coordinates with `|g| > 1e-8` and the number of
/// coordinates compared.
pub fn worst_relative_error(analytic: &[f64], oracle: &[Option<f64>]) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for (g, fd) in analytic.iter().zip(oracle) {
        if let Some(fd) = fd {
            if g.abs() > 1e-8 {
                worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()));
                n += 1;
            }
        }
    }
    (worst, n)
}
