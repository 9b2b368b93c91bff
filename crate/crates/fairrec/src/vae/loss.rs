//! Objective and hand-derived backward pass.
//!
//! The minimized batch objective is
//!   (1/B) sum_c [ -recon_c + beta * KL_c ]  +  gamma * F(recon)
//! i.e. the negated ELBO plus the fairness penalty, where `recon_c` is the
//! multinomial reconstruction log-likelihood of row `c` and F is the mean
//! absolute deviation of per-group mean reconstruction from the batch mean.

use rand::Rng;
use rand_distr::StandardNormal;

use super::model::{VaeModel, VaeParams};
use crate::numerics::{dropout_mask, log_softmax};
#[cfg(test)]
use crate::numerics::stream_rng;
use crate::{exec, Error, Result};

// Chunk size for batch-row parallelism. Fixed so reduction order (and thus
// every bit of the result) is independent of thread count.
const ROW_CHUNK: usize = 8;

pub(crate) struct EncodeCache {
    pub x_drop: Vec<f64>,
    pub h: Vec<f64>,
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

pub(crate) fn forward_encoder(
    params: &VaeParams,
    x: &[f64],
    mask: Option<&[f64]>,
) -> EncodeCache {
    let dims = params.dims;
    let x_drop: Vec<f64> = match mask {
        Some(m) => x.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => x.to_vec(),
    };
    let mut h = params.enc_b1.clone();
    for i in 0..dims.input {
        let xi = x_drop[i];
        if xi == 0.0 {
            continue;
        }
        let w = params.enc_w1.row(i);
        for j in 0..dims.hidden {
            h[j] += xi * w[j];
        }
    }
    for v in &mut h {
        *v = v.tanh();
    }
    let mut mu = params.b_mu.clone();
    let mut logvar = params.b_logvar.clone();
    for j in 0..dims.hidden {
        let hj = h[j];
        let wm = params.w_mu.row(j);
        let wl = params.w_logvar.row(j);
        for l in 0..dims.latent {
            mu[l] += hj * wm[l];
            logvar[l] += hj * wl[l];
        }
    }
    EncodeCache {
        x_drop,
        h,
        mu,
        logvar,
    }
}

/// z = mu + exp(logvar/2) * noise
pub fn reparameterize(mu: &[f64], logvar: &[f64], noise: &[f64]) -> Vec<f64> {
    debug_assert_eq!(mu.len(), logvar.len());
    debug_assert_eq!(mu.len(), noise.len());
    mu.iter()
        .zip(logvar)
        .zip(noise)
        .map(|((&m, &lv), &n)| m + (0.5 * lv).exp() * n)
        .collect()
}

/// sum_i x_i * log pi_i with log-probabilities from a log-softmax.
pub fn multinomial_log_likelihood(x: &[f64], log_probs: &[f64]) -> f64 {
    x.iter()
        .zip(log_probs)
        .filter(|(&xi, _)| xi != 0.0)
        .map(|(&xi, &lp)| xi * lp)
        .sum()
}

/// Closed-form KL(N(mu, diag sigma^2) || N(0, I)) =
/// 0.5 * sum (mu^2 + sigma^2 - log sigma^2 - 1).
pub fn kl_to_standard_normal(mu: &[f64], logvar: &[f64]) -> f64 {
    mu.iter()
        .zip(logvar)
        .map(|(&m, &lv)| 0.5 * (m * m + lv.exp() - lv - 1.0))
        .sum()
}

struct RowCache {
    enc: EncodeCache,
    z: Vec<f64>,
    hd: Vec<f64>,
    probs: Vec<f64>,
    x_sum: f64,
    recon: f64,
    kl: f64,
}

fn forward_row(params: &VaeParams, x: &[f64], noise: &[f64], mask: Option<&[f64]>) -> RowCache {
    let dims = params.dims;
    let enc = forward_encoder(params, x, mask);
    let z = reparameterize(&enc.mu, &enc.logvar, noise);
    let mut hd = params.dec_b1.clone();
    for l in 0..dims.latent {
        let zl = z[l];
        let w = params.dec_w1.row(l);
        for j in 0..dims.hidden {
            hd[j] += zl * w[j];
        }
    }
    for v in &mut hd {
        *v = v.tanh();
    }
    let mut logits = params.dec_b2.clone();
    for j in 0..dims.hidden {
        let hj = hd[j];
        let w = params.dec_w2.row(j);
        for i in 0..dims.input {
            logits[i] += hj * w[i];
        }
    }
    let log_probs = log_softmax(&logits);
    let recon = multinomial_log_likelihood(x, &log_probs);
    let kl = kl_to_standard_normal(&enc.mu, &enc.logvar);
    RowCache {
        z,
        hd,
        probs: log_probs.iter().map(|v| v.exp()).collect(),
        x_sum: x.iter().sum(),
        recon,
        kl,
        enc,
    }
}

/// Accumulates the gradient of `wr * recon + wk * KL` for one row.
fn backward_row(
    params: &VaeParams,
    x: &[f64],
    noise: &[f64],
    cache: &RowCache,
    wr: f64,
    wk: f64,
    grads: &mut VaeParams,
) {
    let dims = params.dims;
    // decoder output: d recon / d logits = x - sum(x) * softmax
    let dlogits: Vec<f64> = x
        .iter()
        .zip(&cache.probs)
        .map(|(&xi, &pi)| wr * (xi - cache.x_sum * pi))
        .collect();
    let mut dhd = vec![0.0; dims.hidden];
    for j in 0..dims.hidden {
        let hj = cache.hd[j];
        let w = params.dec_w2.row(j);
        let gw = grads.dec_w2.row_mut(j);
        let mut acc = 0.0;
        for i in 0..dims.input {
            gw[i] += hj * dlogits[i];
            acc += dlogits[i] * w[i];
        }
        dhd[j] = acc;
    }
    for (g, d) in grads.dec_b2.iter_mut().zip(&dlogits) {
        *g += d;
    }
    let dhd_pre: Vec<f64> = dhd
        .iter()
        .zip(&cache.hd)
        .map(|(&d, &h)| d * (1.0 - h * h))
        .collect();
    let mut dz = vec![0.0; dims.latent];
    for l in 0..dims.latent {
        let zl = cache.z[l];
        let w = params.dec_w1.row(l);
        let gw = grads.dec_w1.row_mut(l);
        let mut acc = 0.0;
        for j in 0..dims.hidden {
            gw[j] += zl * dhd_pre[j];
            acc += dhd_pre[j] * w[j];
        }
        dz[l] = acc;
    }
    for (g, d) in grads.dec_b1.iter_mut().zip(&dhd_pre) {
        *g += d;
    }
    // reparameterization + KL terms
    let mut dmu = vec![0.0; dims.latent];
    let mut dlogvar = vec![0.0; dims.latent];
    for l in 0..dims.latent {
        let lv = cache.enc.logvar[l];
        dmu[l] = dz[l] + wk * cache.enc.mu[l];
        dlogvar[l] = dz[l] * noise[l] * 0.5 * (0.5 * lv).exp() + wk * 0.5 * (lv.exp() - 1.0);
    }
    // encoder heads
    let mut dh = vec![0.0; dims.hidden];
    for j in 0..dims.hidden {
        let hj = cache.enc.h[j];
        let wm = params.w_mu.row(j);
        let wl = params.w_logvar.row(j);
        let gm = grads.w_mu.row_mut(j);
        let mut acc = 0.0;
        for l in 0..dims.latent {
            gm[l] += hj * dmu[l];
            acc += dmu[l] * wm[l] + dlogvar[l] * wl[l];
        }
        let gl = grads.w_logvar.row_mut(j);
        for l in 0..dims.latent {
            gl[l] += hj * dlogvar[l];
        }
        dh[j] = acc;
    }
    for (g, d) in grads.b_mu.iter_mut().zip(&dmu) {
        *g += d;
    }
    for (g, d) in grads.b_logvar.iter_mut().zip(&dlogvar) {
        *g += d;
    }
    let dh_pre: Vec<f64> = dh
        .iter()
        .zip(&cache.enc.h)
        .map(|(&d, &h)| d * (1.0 - h * h))
        .collect();
    for i in 0..dims.input {
        let xi = cache.enc.x_drop[i];
        if xi != 0.0 {
            let gw = grads.enc_w1.row_mut(i);
            for j in 0..dims.hidden {
                gw[j] += xi * dh_pre[j];
            }
        }
    }
    for (g, d) in grads.enc_b1.iter_mut().zip(&dh_pre) {
        *g += d;
    }
}

/// F = mean over groups present of |group mean recon - batch mean recon|,
/// with its subgradient w.r.t. the per-row reconstruction terms
/// (sign(0) taken as 0).
pub fn fairness_penalty(per_row_recon: &[f64], row_groups: &[usize]) -> (f64, Vec<f64>) {
    assert_eq!(per_row_recon.len(), row_groups.len());
    assert!(!per_row_recon.is_empty());
    let b = per_row_recon.len() as f64;
    let batch_mean = per_row_recon.iter().sum::<f64>() / b;
    let n_groups = row_groups.iter().max().unwrap() + 1;
    let mut sums = vec![0.0; n_groups];
    let mut sizes = vec![0usize; n_groups];
    for (&r, &g) in per_row_recon.iter().zip(row_groups) {
        sums[g] += r;
        sizes[g] += 1;
    }
    let present: Vec<usize> = (0..n_groups).filter(|&g| sizes[g] > 0).collect();
    let gp = present.len() as f64;
    let mut f = 0.0;
    let mut signs = vec![0.0; n_groups];
    let mut sign_sum = 0.0;
    for &g in &present {
        let dev = sums[g] / sizes[g] as f64 - batch_mean;
        f += dev.abs();
        signs[g] = if dev > 0.0 {
            1.0
        } else if dev < 0.0 {
            -1.0
        } else {
            0.0
        };
        sign_sum += signs[g];
    }
    f /= gp;
    let grads = row_groups
        .iter()
        .map(|&g| (signs[g] / sizes[g] as f64 - sign_sum / b) / gp)
        .collect();
    (f, grads)
}

pub struct BatchLoss {
    pub loss: f64,
    pub grads: VaeParams,
    pub per_row_recon: Vec<f64>,
    pub mean_kl: f64,
    pub fairness: f64,
}

/// Frozen-noise core of the objective: everything stochastic (noise rows,
/// dropout masks) is passed in, so the function is pure and checkable by
/// finite differences.
pub fn batch_loss(
    params: &VaeParams,
    rows: &[Vec<f64>],
    noise: &[Vec<f64>],
    masks: Option<&[Vec<f64>]>,
    beta: f64,
    gamma: f64,
    row_groups: Option<&[usize]>,
) -> Result<BatchLoss> {
    if rows.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    if noise.len() != rows.len() {
        return Err(Error::Shape("noise rows != batch rows".into()));
    }
    let b = rows.len() as f64;

    let caches: Vec<RowCache> = exec::map_chunks(rows.len(), ROW_CHUNK, |range| {
        range
            .map(|c| forward_row(params, &rows[c], &noise[c], masks.map(|m| &m[c][..])))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();

    let per_row_recon: Vec<f64> = caches.iter().map(|c| c.recon).collect();
    let mean_kl = caches.iter().map(|c| c.kl).sum::<f64>() / b;
    let mean_recon = per_row_recon.iter().sum::<f64>() / b;

    let (fairness, fair_grads) = match (gamma != 0.0, row_groups) {
        (true, Some(groups)) => fairness_penalty(&per_row_recon, groups),
        _ => (0.0, vec![0.0; rows.len()]),
    };

    let loss = -mean_recon + beta * mean_kl + gamma * fairness;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!(
            "batch loss (mean recon {mean_recon}, mean KL {mean_kl}, F {fairness})"
        )));
    }

    let wk = beta / b;
    let partials = exec::map_chunks(rows.len(), ROW_CHUNK, |range| {
        let mut g = VaeParams::zeros(params.dims);
        for c in range {
            let wr = -1.0 / b + gamma * fair_grads[c];
            backward_row(params, &rows[c], &noise[c], &caches[c], wr, wk, &mut g);
        }
        g
    });
    let mut grads = VaeParams::zeros(params.dims);
    for p in &partials {
        grads.add(p);
    }

    Ok(BatchLoss {
        loss,
        grads,
        per_row_recon,
        mean_kl,
        fairness,
    })
}

fn draw_noise(latent: usize, n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..latent).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

/// Negated-ELBO loss with sampled noise and dropout.
pub fn elbo_loss(model: &VaeModel, rows: &[Vec<f64>], rng: &mut impl Rng) -> Result<BatchLoss> {
    let noise = draw_noise(model.params.dims.latent, rows.len(), rng);
    let masks = if model.dropout > 0.0 {
        Some(
            rows.iter()
                .map(|r| dropout_mask(r.len(), model.dropout, rng))
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    batch_loss(
        &model.params,
        rows,
        &noise,
        masks.as_deref(),
        model.beta,
        0.0,
        None,
    )
}

/// Negated-ELBO plus gamma-weighted fairness penalty over `row_groups`.
pub fn regularized_loss(
    model: &VaeModel,
    rows: &[Vec<f64>],
    row_groups: &[usize],
    rng: &mut impl Rng,
) -> Result<BatchLoss> {
    let noise = draw_noise(model.params.dims.latent, rows.len(), rng);
    let masks = if model.dropout > 0.0 {
        Some(
            rows.iter()
                .map(|r| dropout_mask(r.len(), model.dropout, rng))
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    batch_loss(
        &model.params,
        rows,
        &noise,
        masks.as_deref(),
        model.beta,
        model.gamma,
        Some(row_groups),
    )
}

#[cfg(test)]
pub(crate) fn random_batch(input: usize, n_rows: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, "loss-batch", 0);
    (0..n_rows)
        .map(|_| {
            let mut r: Vec<f64> = (0..input)
                .map(|_| if rng.gen::<f64>() < 0.4 { 1.0 } else { 0.0 })
                .collect();
            if r.iter().all(|&v| v == 0.0) {
                r[rng.gen_range(0..input)] = 1.0;
            }
            r
        })
        .collect()
}
