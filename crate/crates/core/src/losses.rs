//! The loss family: quantization loss, Proxy-Anchor, Proxy-NCA, and
//! DHN-style pairwise likelihood, each in a baseline form and a
//! hinge-clamped form, plus the combined objective.
//!
//! The hinge-clamped variants replace the linear dependence on cosine
//! similarity with H(x, y) = max(0, x + y): negative pairs are punished
//! only while cos > zeta + delta, positive pairs only while cos < 1 -
//! delta. A clamped pair is fully inert; it contributes nothing to the
//! value and nothing to the gradient, so once the metric objective is
//! satisfied only the quantization term keeps acting.

use crate::error::{HhfError, Result};
use crate::num::{
    logsumexp_shifted, logsumexp_shifted_backward, row_cosine, row_cosine_backward, sgn, Matrix,
    Parameter,
};

/// A mini-batch of continuous codes with per-row label sets.
#[derive(Debug, Clone)]
pub struct LatentBatch {
    h: Matrix,
    labels: Vec<Vec<u32>>,
}

impl LatentBatch {
    /// Labels are deduplicated and sorted per row. Every row needs at
    /// least one label.
    pub fn new(h: Matrix, labels: Vec<Vec<u32>>) -> Result<Self> {
        if h.rows() == 0 {
            return Err(HhfError::InvalidArgument("empty batch".into()));
        }
        if labels.len() != h.rows() {
            return Err(HhfError::InvalidArgument(format!(
                "{} label sets for {} rows",
                labels.len(),
                h.rows()
            )));
        }
        let labels: Vec<Vec<u32>> = labels
            .into_iter()
            .map(|mut set| {
                set.sort_unstable();
                set.dedup();
                set
            })
            .collect();
        if let Some(row) = labels.iter().position(|set| set.is_empty()) {
            return Err(HhfError::InvalidArgument(format!(
                "row {row} carries no label"
            )));
        }
        Ok(LatentBatch { h, labels })
    }

    pub fn latents(&self) -> &Matrix {
        &self.h
    }

    pub fn labels(&self) -> &[Vec<u32>] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.h.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bits(&self) -> usize {
        self.h.cols()
    }

    fn has_label(&self, row: usize, class: u32) -> bool {
        self.labels[row].binary_search(&class).is_ok()
    }

    fn share_label(&self, a: usize, b: usize) -> bool {
        self.labels[a]
            .iter()
            .any(|l| self.labels[b].binary_search(l).is_ok())
    }

    fn max_label(&self) -> u32 {
        self.labels
            .iter()
            .map(|set| *set.last().unwrap())
            .max()
            .unwrap()
    }
}

/// Learnable per-class proxies, one row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyBank {
    pub param: Parameter,
}

impl ProxyBank {
    pub fn new(value: Matrix) -> Result<Self> {
        if value.rows() == 0 {
            return Err(HhfError::InvalidArgument("proxy bank needs at least one class".into()));
        }
        Ok(ProxyBank {
            param: Parameter::new(value),
        })
    }

    pub fn classes(&self) -> usize {
        self.param.value.rows()
    }

    pub fn bits(&self) -> usize {
        self.param.value.cols()
    }
}

/// Shape of the hinge-clamped losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HHFParams {
    pub zeta: f64,
    pub delta: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl HHFParams {
    pub fn new(zeta: f64, delta: f64, alpha: f64, gamma: f64) -> Result<Self> {
        if !(-1.0..1.0).contains(&zeta) {
            return Err(HhfError::InvalidArgument(format!(
                "zeta {zeta} outside [-1, 1)"
            )));
        }
        if delta < 0.0 {
            return Err(HhfError::InvalidArgument(format!("delta {delta} < 0")));
        }
        if zeta + delta >= 1.0 {
            return Err(HhfError::InvalidArgument(format!(
                "zeta + delta = {} >= 1; the negative hinge could never release",
                zeta + delta
            )));
        }
        if alpha <= 0.0 {
            return Err(HhfError::InvalidArgument(format!("alpha {alpha} <= 0")));
        }
        if gamma < 0.0 {
            return Err(HhfError::InvalidArgument(format!("gamma {gamma} < 0")));
        }
        Ok(HHFParams {
            zeta,
            delta,
            alpha,
            gamma,
        })
    }
}

/// Paper-default shape: delta 0.2, alpha 32, gamma 0.1.
pub const DEFAULT_DELTA: f64 = 0.2;
pub const DEFAULT_ALPHA: f64 = 32.0;
pub const DEFAULT_GAMMA: f64 = 0.1;

/// Scalar loss with analytic gradients. `grad_p` is `None` for losses that
/// involve no proxies (quantization, pairwise).
#[derive(Debug, Clone)]
pub struct LossResult {
    pub value: f64,
    pub grad_h: Matrix,
    pub grad_p: Option<Matrix>,
}

/// H(x, y) = max(0, x + y). The subgradient at the kink is taken as zero:
/// a pair sitting exactly on its threshold is already inert.
#[inline]
pub fn hinge(x: f64, y: f64) -> f64 {
    (x + y).max(0.0)
}

#[inline]
fn hinge_active(x: f64, y: f64) -> bool {
    x + y > 0.0
}

/// log(1 + sum_i (exp(a_i) - 1)) for a_i >= 0, shift-stabilized.
fn log1p_sum_expm1(terms: &[f64]) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    let m = terms.iter().fold(0.0_f64, |acc, &a| acc.max(a));
    let shifted: f64 = terms.iter().map(|&a| (a - m).exp()).sum();
    m + ((1.0 - terms.len() as f64) * (-m).exp() + shifted).ln()
}

/// d/da_i of [`log1p_sum_expm1`]: exp(a_i) / (1 + sum (exp(a) - 1)).
fn log1p_sum_expm1_backward(terms: &[f64], upstream: f64) -> Vec<f64> {
    if terms.is_empty() {
        return Vec::new();
    }
    let m = terms.iter().fold(0.0_f64, |acc, &a| acc.max(a));
    let shifted: f64 = terms.iter().map(|&a| (a - m).exp()).sum();
    let denom = (1.0 - terms.len() as f64) * (-m).exp() + shifted;
    terms
        .iter()
        .map(|&a| upstream * (a - m).exp() / denom)
        .collect()
}

/// Plain stabilized log(sum_i exp(x_i)).
fn logsumexp(terms: &[f64]) -> f64 {
    let m = terms.iter().fold(f64::NEG_INFINITY, |acc, &x| acc.max(x));
    m + terms.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

fn check_labels(batch: &LatentBatch, classes: usize) -> Result<()> {
    let max = batch.max_label();
    if max as usize >= classes {
        return Err(HhfError::LabelRange {
            label: max,
            classes,
        });
    }
    Ok(())
}

fn check_bits(batch: &LatentBatch, proxies: &ProxyBank) -> Result<()> {
    if batch.bits() != proxies.bits() {
        return Err(HhfError::InvalidArgument(format!(
            "latent width {} does not match proxy width {}",
            batch.bits(),
            proxies.bits()
        )));
    }
    Ok(())
}

/// Quantization penalty sum_rows ||h - sgn(h)||_n with n in {1, 2}
/// (absolute-value sum for n=1, squared sum for n=2). The sign target is
/// treated as a constant: no gradient flows through sgn.
pub fn quantization_loss(batch: &LatentBatch, norm: u8) -> Result<LossResult> {
    if norm != 1 && norm != 2 {
        return Err(HhfError::InvalidArgument(format!(
            "quantization norm must be 1 or 2, got {norm}"
        )));
    }
    let h = &batch.h;
    let mut grad = Matrix::zeros(h.rows(), h.cols());
    let mut value = 0.0;
    for (g, &v) in grad.data_mut().iter_mut().zip(h.data()) {
        let r = v - sgn(v);
        match norm {
            2 => {
                value += r * r;
                *g = 2.0 * r;
            }
            _ => {
                value += r.abs();
                // Subgradient 0 at the kink, matching the hinge convention.
                *g = if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            }
        }
    }
    Ok(LossResult {
        value,
        grad_h: grad,
        grad_p: None,
    })
}

/// Proxy-Anchor: LogSumExp over negatives per proxy plus LogSumExp over
/// positives per positive proxy, normalized by the proxy counts.
pub fn proxy_anchor_loss(
    batch: &LatentBatch,
    proxies: &ProxyBank,
    params: &HHFParams,
) -> Result<LossResult> {
    check_bits(batch, proxies)?;
    check_labels(batch, proxies.classes())?;
    let s = row_cosine(&batch.h, &proxies.param.value)?;
    let (b, c) = s.shape();
    let alpha = params.alpha;
    let gamma = params.gamma;

    let pos_proxies: Vec<usize> = (0..c)
        .filter(|&j| (0..b).any(|i| batch.has_label(i, j as u32)))
        .collect();
    let mut upstream = Matrix::zeros(b, c);
    let mut value = 0.0;

    let inv_all = 1.0 / c as f64;
    for j in 0..c {
        let rows: Vec<usize> = (0..b).filter(|&i| !batch.has_label(i, j as u32)).collect();
        let xs: Vec<f64> = rows.iter().map(|&i| alpha * (s.at(i, j) + gamma)).collect();
        value += inv_all * logsumexp_shifted(&xs);
        for (&i, g) in rows
            .iter()
            .zip(logsumexp_shifted_backward(&xs, inv_all))
        {
            upstream.set(i, j, upstream.at(i, j) + g * alpha);
        }
    }

    if !pos_proxies.is_empty() {
        let inv_pos = 1.0 / pos_proxies.len() as f64;
        for &j in &pos_proxies {
            let rows: Vec<usize> =
                (0..b).filter(|&i| batch.has_label(i, j as u32)).collect();
            let xs: Vec<f64> = rows
                .iter()
                .map(|&i| -alpha * (s.at(i, j) - gamma))
                .collect();
            value += inv_pos * logsumexp_shifted(&xs);
            for (&i, g) in rows
                .iter()
                .zip(logsumexp_shifted_backward(&xs, inv_pos))
            {
                upstream.set(i, j, upstream.at(i, j) - g * alpha);
            }
        }
    }

    let (grad_h, grad_p) = row_cosine_backward(&upstream, &batch.h, &proxies.param.value)?;
    Ok(LossResult {
        value,
        grad_h,
        grad_p: Some(grad_p),
    })
}

/// Proxy-Anchor with the hinge clamp: negatives enter as
/// exp(alpha H(cos, -zeta-delta)) - 1, positives as
/// exp(alpha H(-cos, 1-delta)) - 1. A clamped pair contributes exactly
/// zero to value and gradient.
pub fn hhf_proxy_anchor_loss(
    batch: &LatentBatch,
    proxies: &ProxyBank,
    params: &HHFParams,
) -> Result<LossResult> {
    check_bits(batch, proxies)?;
    check_labels(batch, proxies.classes())?;
    let s = row_cosine(&batch.h, &proxies.param.value)?;
    let (b, c) = s.shape();
    let alpha = params.alpha;
    let neg_shift = -params.zeta - params.delta;
    let pos_shift = 1.0 - params.delta;

    let pos_proxies: Vec<usize> = (0..c)
        .filter(|&j| (0..b).any(|i| batch.has_label(i, j as u32)))
        .collect();
    let mut upstream = Matrix::zeros(b, c);
    let mut value = 0.0;

    let inv_all = 1.0 / c as f64;
    for j in 0..c {
        // Only pairs with an active hinge take part; the rest contribute
        // exp(0) - 1 = 0 and must stay bit-exactly absent.
        let active: Vec<usize> = (0..b)
            .filter(|&i| {
                !batch.has_label(i, j as u32) && hinge_active(s.at(i, j), neg_shift)
            })
            .collect();
        let xs: Vec<f64> = active
            .iter()
            .map(|&i| alpha * hinge(s.at(i, j), neg_shift))
            .collect();
        value += inv_all * log1p_sum_expm1(&xs);
        for (&i, g) in active
            .iter()
            .zip(log1p_sum_expm1_backward(&xs, inv_all))
        {
            upstream.set(i, j, upstream.at(i, j) + g * alpha);
        }
    }

    if !pos_proxies.is_empty() {
        let inv_pos = 1.0 / pos_proxies.len() as f64;
        for &j in &pos_proxies {
            let active: Vec<usize> = (0..b)
                .filter(|&i| {
                    batch.has_label(i, j as u32) && hinge_active(-s.at(i, j), pos_shift)
                })
                .collect();
            let xs: Vec<f64> = active
                .iter()
                .map(|&i| alpha * hinge(-s.at(i, j), pos_shift))
                .collect();
            value += inv_pos * log1p_sum_expm1(&xs);
            for (&i, g) in active
                .iter()
                .zip(log1p_sum_expm1_backward(&xs, inv_pos))
            {
                upstream.set(i, j, upstream.at(i, j) - g * alpha);
            }
        }
    }

    let (grad_h, grad_p) = row_cosine_backward(&upstream, &batch.h, &proxies.param.value)?;
    Ok(LossResult {
        value,
        grad_h,
        grad_p: Some(grad_p),
    })
}

/// Proxy-NCA: mean over (sample, own-label) pairs of the negative
/// log-softmax of cosine similarities over all proxies, at the given
/// temperature.
pub fn proxy_nca_loss(
    batch: &LatentBatch,
    proxies: &ProxyBank,
    temperature: f64,
) -> Result<LossResult> {
    if temperature <= 0.0 {
        return Err(HhfError::InvalidArgument(format!(
            "temperature {temperature} must be positive"
        )));
    }
    check_bits(batch, proxies)?;
    check_labels(batch, proxies.classes())?;
    let s = row_cosine(&batch.h, &proxies.param.value)?;
    let (b, c) = s.shape();
    let pairs: usize = batch.labels.iter().map(Vec::len).sum();
    let inv = 1.0 / pairs as f64;

    let mut upstream = Matrix::zeros(b, c);
    let mut value = 0.0;
    for i in 0..b {
        let logits: Vec<f64> = (0..c).map(|j| s.at(i, j) / temperature).collect();
        let lse = logsumexp(&logits);
        let m = logits.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x));
        let denom: f64 = logits.iter().map(|&x| (x - m).exp()).sum();
        for &y in &batch.labels[i] {
            value += inv * (lse - logits[y as usize]);
            for j in 0..c {
                let softmax = (logits[j] - m).exp() / denom;
                let indicator = if j == y as usize { 1.0 } else { 0.0 };
                upstream.set(
                    i,
                    j,
                    upstream.at(i, j) + inv * (softmax - indicator) / temperature,
                );
            }
        }
    }

    let (grad_h, grad_p) = row_cosine_backward(&upstream, &batch.h, &proxies.param.value)?;
    Ok(LossResult {
        value,
        grad_h,
        grad_p: Some(grad_p),
    })
}

/// Proxy-NCA with the hinge clamp: the clamped similarities replace the
/// raw cosines inside the softmax-style aggregation,
/// log(1 + sum_{c not own} exp((H(cos_c, -zeta-delta) + H(-cos_y, 1-delta)) / temperature)).
///
/// Unlike the Proxy-Anchor variant, every non-own class stays in the
/// aggregation (that is the softmax structure); a clamped pair receives
/// exactly zero gradient but still occupies its slot in the denominator.
pub fn hhf_proxy_nca_loss(
    batch: &LatentBatch,
    proxies: &ProxyBank,
    temperature: f64,
    params: &HHFParams,
) -> Result<LossResult> {
    if temperature <= 0.0 {
        return Err(HhfError::InvalidArgument(format!(
            "temperature {temperature} must be positive"
        )));
    }
    check_bits(batch, proxies)?;
    check_labels(batch, proxies.classes())?;
    let s = row_cosine(&batch.h, &proxies.param.value)?;
    let (b, c) = s.shape();
    let pairs: usize = batch.labels.iter().map(Vec::len).sum();
    let inv = 1.0 / pairs as f64;
    let neg_shift = -params.zeta - params.delta;
    let pos_shift = 1.0 - params.delta;

    let mut upstream = Matrix::zeros(b, c);
    let mut value = 0.0;
    for i in 0..b {
        for &y in &batch.labels[i] {
            let hp = hinge(-s.at(i, y as usize), pos_shift);
            let others: Vec<usize> = (0..c)
                .filter(|&j| !batch.has_label(i, j as u32))
                .collect();
            let xs: Vec<f64> = others
                .iter()
                .map(|&j| (hinge(s.at(i, j), neg_shift) + hp) / temperature)
                .collect();
            value += inv * logsumexp_shifted(&xs);
            let gs = logsumexp_shifted_backward(&xs, inv);
            let mut pos_accum = 0.0;
            for (&j, g) in others.iter().zip(&gs) {
                if hinge_active(s.at(i, j), neg_shift) {
                    upstream.set(i, j, upstream.at(i, j) + g / temperature);
                }
                pos_accum += g;
            }
            if hinge_active(-s.at(i, y as usize), pos_shift) {
                upstream.set(
                    i,
                    y as usize,
                    upstream.at(i, y as usize) - pos_accum / temperature,
                );
            }
        }
    }

    let (grad_h, grad_p) = row_cosine_backward(&upstream, &batch.h, &proxies.param.value)?;
    Ok(LossResult {
        value,
        grad_h,
        grad_p: Some(grad_p),
    })
}

/// Pairwise likelihood loss over all in-batch pairs, on cosine similarity:
/// log(1 + exp(alpha cos)) - 1[similar] alpha cos, averaged over pairs.
/// Two rows are similar when their label sets intersect.
pub fn dhn_pairwise_loss(batch: &LatentBatch, params: &HHFParams) -> Result<LossResult> {
    let b = batch.len();
    if b < 2 {
        return Err(HhfError::EmptyPairs);
    }
    let s = row_cosine(&batch.h, &batch.h)?;
    let alpha = params.alpha;
    let pairs = (b * (b - 1) / 2) as f64;
    let inv = 1.0 / pairs;

    let mut upstream = Matrix::zeros(b, b);
    let mut value = 0.0;
    for i in 0..b {
        for j in (i + 1)..b {
            let x = alpha * s.at(i, j);
            let softplus = x.max(0.0) + (-x.abs()).exp().ln_1p();
            let sigmoid = 1.0 / (1.0 + (-x).exp());
            if batch.share_label(i, j) {
                value += inv * (softplus - x);
                upstream.set(i, j, inv * alpha * (sigmoid - 1.0));
            } else {
                value += inv * softplus;
                upstream.set(i, j, inv * alpha * sigmoid);
            }
        }
    }

    let (grad_a, grad_b) = row_cosine_backward(&upstream, &batch.h, &batch.h)?;
    let mut grad_h = grad_a;
    grad_h.add_scaled(&grad_b, 1.0)?;
    Ok(LossResult {
        value,
        grad_h,
        grad_p: None,
    })
}

/// Pairwise loss with the hinge clamp. Per pair the Eq-7-style substitution
/// log(1 + (exp(alpha H) - 1)) collapses to alpha H, so dissimilar pairs
/// cost alpha H(cos, -zeta-delta) and similar pairs alpha H(-cos, 1-delta),
/// averaged over pairs.
pub fn hhf_dhn_pairwise_loss(batch: &LatentBatch, params: &HHFParams) -> Result<LossResult> {
    let b = batch.len();
    if b < 2 {
        return Err(HhfError::EmptyPairs);
    }
    let s = row_cosine(&batch.h, &batch.h)?;
    let alpha = params.alpha;
    let neg_shift = -params.zeta - params.delta;
    let pos_shift = 1.0 - params.delta;
    let pairs = (b * (b - 1) / 2) as f64;
    let inv = 1.0 / pairs;

    let mut upstream = Matrix::zeros(b, b);
    let mut value = 0.0;
    for i in 0..b {
        for j in (i + 1)..b {
            let cos = s.at(i, j);
            if batch.share_label(i, j) {
                value += inv * alpha * hinge(-cos, pos_shift);
                if hinge_active(-cos, pos_shift) {
                    upstream.set(i, j, -inv * alpha);
                }
            } else {
                value += inv * alpha * hinge(cos, neg_shift);
                if hinge_active(cos, neg_shift) {
                    upstream.set(i, j, inv * alpha);
                }
            }
        }
    }

    let (grad_a, grad_b) = row_cosine_backward(&upstream, &batch.h, &batch.h)?;
    let mut grad_h = grad_a;
    grad_h.add_scaled(&grad_b, 1.0)?;
    Ok(LossResult {
        value,
        grad_h,
        grad_p: None,
    })
}

/// Combined objective: metric + beta * quantization. Proxy gradients pass
/// through from the metric term; the quantization term has none.
pub fn total_loss(metric: &LossResult, quan: &LossResult, beta: f64) -> Result<LossResult> {
    if beta < 0.0 {
        return Err(HhfError::InvalidArgument(format!("beta {beta} < 0")));
    }
    let mut grad_h = metric.grad_h.clone();
    grad_h.add_scaled(&quan.grad_h, beta)?;
    Ok(LossResult {
        value: metric.value + beta * quan.value,
        grad_h,
        grad_p: metric.grad_p.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::gradcheck::{central_diff, max_rel_error};
    use crate::rng::Rng;

    fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.normal()).collect(),
        )
        .unwrap()
    }

    fn single_label_batch(h: Matrix, labels: &[u32]) -> LatentBatch {
        let sets = labels.iter().map(|&l| vec![l]).collect();
        LatentBatch::new(h, sets).unwrap()
    }

    fn default_params(zeta: f64) -> HHFParams {
        HHFParams::new(zeta, DEFAULT_DELTA, DEFAULT_ALPHA, DEFAULT_GAMMA).unwrap()
    }

    #[test]
    fn hinge_examples() {
        assert_eq!(hinge(0.5, -0.2), 0.3_f64.max(0.0));
        assert!((hinge(0.5, -0.2) - 0.3).abs() < 1e-15);
        assert_eq!(hinge(-1.0, 0.5), 0.0);
        assert_eq!(hinge(0.3, -0.3), 0.0);
        assert!(!hinge_active(0.3, -0.3));
    }

    #[test]
    fn hhf_params_validation() {
        assert!(HHFParams::new(0.5, 0.2, 32.0, 0.1).is_ok());
        assert!(HHFParams::new(0.9, 0.2, 32.0, 0.1).is_err()); // zeta+delta >= 1
        assert!(HHFParams::new(1.0, 0.0, 32.0, 0.1).is_err());
        assert!(HHFParams::new(0.0, -0.1, 32.0, 0.1).is_err());
        assert!(HHFParams::new(0.0, 0.2, 0.0, 0.1).is_err());
    }

    #[test]
    fn batch_validation() {
        let h = Matrix::zeros(2, 4);
        assert!(LatentBatch::new(h.clone(), vec![vec![0], vec![]]).is_err());
        assert!(LatentBatch::new(h.clone(), vec![vec![0]]).is_err());
        let b = LatentBatch::new(h, vec![vec![2, 0, 2], vec![1]]).unwrap();
        assert_eq!(b.labels()[0], vec![0, 2]);
    }

    #[test]
    fn quantization_zero_on_binary_codes() {
        let h = Matrix::from_vec(2, 3, vec![1.0, -1.0, 1.0, -1.0, -1.0, 1.0]).unwrap();
        let batch = single_label_batch(h, &[0, 1]);
        for norm in [1, 2] {
            let r = quantization_loss(&batch, norm).unwrap();
            assert_eq!(r.value, 0.0);
            assert!(r.grad_h.data().iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn quantization_hand_values() {
        let h = Matrix::from_vec(1, 2, vec![0.5, -0.5]).unwrap();
        let batch = single_label_batch(h, &[0]);
        let r2 = quantization_loss(&batch, 2).unwrap();
        assert!((r2.value - 0.5).abs() < 1e-15);
        assert!((r2.grad_h.at(0, 0) - (-1.0)).abs() < 1e-15);
        assert!((r2.grad_h.at(0, 1) - 1.0).abs() < 1e-15);
        let r1 = quantization_loss(&batch, 1).unwrap();
        assert!((r1.value - 1.0).abs() < 1e-15);
        assert_eq!(r1.grad_h.data(), &[-1.0, 1.0]);
        assert!(quantization_loss(&batch, 3).is_err());
    }

    #[test]
    fn quantization_gradient_matches_finite_differences() {
        let mut rng = Rng::seed_from_u64(20);
        for norm in [1u8, 2] {
            for _ in 0..20 {
                let mut h = random_matrix(&mut rng, 3, 5);
                // Keep clear of the kinks at 0 (both norms) and +-1 (n=1).
                for v in h.data_mut() {
                    while v.abs() < 1e-2 || (v.abs() - 1.0).abs() < 1e-2 {
                        *v += 0.05;
                    }
                }
                let labels = vec![0, 1, 0];
                let batch = single_label_batch(h.clone(), &labels);
                let r = quantization_loss(&batch, norm).unwrap();
                let fd = central_diff(
                    |m| {
                        let b = single_label_batch(m.clone(), &labels);
                        quantization_loss(&b, norm).unwrap().value
                    },
                    &h,
                    1e-4,
                );
                assert!(max_rel_error(&r.grad_h, &fd) < 1e-6, "norm {norm}");
            }
        }
    }

    #[test]
    fn proxy_anchor_single_positive_at_margin() {
        // One sample, one proxy of its own class, cos = gamma: the
        // positive LogSumExp is log(1 + e^0) = log 2, the negative term
        // vanishes.
        let gamma = DEFAULT_GAMMA;
        let h = Matrix::from_vec(1, 2, vec![gamma, (1.0 - gamma * gamma).sqrt()]).unwrap();
        let proxies = ProxyBank::new(Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap()).unwrap();
        let batch = single_label_batch(h, &[0]);
        let params = default_params(0.0);
        let r = proxy_anchor_loss(&batch, &proxies, &params).unwrap();
        assert!((r.value - 2.0_f64.ln()).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn proxy_anchor_vanishes_for_large_alpha() {
        let h = Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let proxies = ProxyBank::new(Matrix::from_vec(1, 2, vec![2.0, 0.0]).unwrap()).unwrap();
        let batch = single_label_batch(h, &[0]);
        let params = HHFParams::new(0.0, 0.2, 4000.0, 0.1).unwrap();
        let r = proxy_anchor_loss(&batch, &proxies, &params).unwrap();
        assert!(r.value < 1e-12, "{}", r.value);
    }

    #[test]
    fn proxy_losses_reject_out_of_range_labels() {
        let h = Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let proxies = ProxyBank::new(Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap())
            .unwrap();
        let batch = single_label_batch(h, &[5]);
        let params = default_params(0.0);
        match proxy_anchor_loss(&batch, &proxies, &params) {
            Err(HhfError::LabelRange { label: 5, classes: 2 }) => {}
            other => panic!("expected label-range error, got {other:?}"),
        }
        assert!(hhf_proxy_anchor_loss(&batch, &proxies, &params).is_err());
        assert!(proxy_nca_loss(&batch, &proxies, 1.0).is_err());
    }

    #[test]
    fn hhf_proxy_anchor_fully_clamped_is_zero() {
        // Samples on their proxies (cos = 1 > 1 - delta), negatives at
        // cos = -1 < zeta + delta: both hinges clamp everywhere.
        let h = Matrix::from_vec(2, 2, vec![2.0, 0.0, -3.0, 0.0]).unwrap();
        let proxies =
            ProxyBank::new(Matrix::from_vec(2, 2, vec![1.0, 0.0, -1.0, 0.0]).unwrap()).unwrap();
        let batch = single_label_batch(h, &[0, 1]);
        let params = default_params(0.0);
        let r = hhf_proxy_anchor_loss(&batch, &proxies, &params).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.grad_h.data().iter().all(|&g| g == 0.0));
        assert!(r
            .grad_p
            .as_ref()
            .unwrap()
            .data()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn hhf_proxy_anchor_single_negative_pair_value() {
        // One negative pair at cos = zeta + delta + 0.1 with alpha = 1:
        // the negative term is log(1 + (e^0.1 - 1)) = 0.1 exactly.
        let zeta = 0.0;
        let delta = 0.2;
        let cos = zeta + delta + 0.1;
        let h = Matrix::from_vec(1, 2, vec![cos, (1.0 - cos * cos).sqrt()]).unwrap();
        // Proxy 0 is the negative (sample labeled 1); proxy 1 sits on the
        // sample so the positive hinge clamps.
        let proxies = ProxyBank::new(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![cos, (1.0 - cos * cos).sqrt()]]).unwrap(),
        )
        .unwrap();
        let batch = single_label_batch(h, &[1]);
        let params = HHFParams::new(zeta, delta, 1.0, DEFAULT_GAMMA).unwrap();
        let r = hhf_proxy_anchor_loss(&batch, &proxies, &params).unwrap();
        // Negative term carries 1/|P| = 1/2.
        assert!((r.value - 0.05).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn hhf_dead_zone_is_bit_exact() {
        // A clamped negative pair must contribute nothing: gradients with
        // the pair present equal gradients with the pair's row removed,
        // for the entries that remain.
        let mut rng = Rng::seed_from_u64(21);
        let params = default_params(0.1);
        for _ in 0..20 {
            let h = random_matrix(&mut rng, 4, 6);
            let proxies = ProxyBank::new(random_matrix(&mut rng, 3, 6)).unwrap();
            let labels = vec![0u32, 1, 2, 0];
            let batch = single_label_batch(h.clone(), &labels);
            let s = row_cosine(&h, &proxies.param.value).unwrap();
            // Find a clamped negative pair.
            let mut found = None;
            'outer: for i in 0..4 {
                for j in 0..3 {
                    if labels[i] != j as u32
                        && s.at(i, j) < params.zeta + params.delta - 1e-9
                    {
                        found = Some((i, j));
                        break 'outer;
                    }
                }
            }
            let Some((row, _)) = found else { continue };
            let full = hhf_proxy_anchor_loss(&batch, &proxies, &params).unwrap();

            // Remove the sample row entirely and recompute.
            let rows_kept: Vec<usize> = (0..4).filter(|&r| r != row).collect();
            let h_rows: Vec<Vec<f64>> =
                rows_kept.iter().map(|&r| h.row(r).to_vec()).collect();
            let kept_labels: Vec<u32> = rows_kept.iter().map(|&r| labels[r]).collect();
            let reduced_batch =
                single_label_batch(Matrix::from_rows(&h_rows).unwrap(), &kept_labels);
            let reduced = hhf_proxy_anchor_loss(&reduced_batch, &proxies, &params).unwrap();

            // If the removed row was clamped against every proxy, the
            // remaining gradients must agree bit-for-bit.
            let row_clamped = (0..3).all(|j| {
                let cos = s.at(row, j);
                if labels[row] == j as u32 {
                    !hinge_active(-cos, 1.0 - params.delta)
                } else {
                    !hinge_active(cos, -params.zeta - params.delta)
                }
            });
            if !row_clamped {
                continue;
            }
            for (new_r, &old_r) in rows_kept.iter().enumerate() {
                for t in 0..6 {
                    assert_eq!(
                        full.grad_h.at(old_r, t).to_bits(),
                        reduced.grad_h.at(new_r, t).to_bits()
                    );
                }
            }
            for (full_p, red_p) in full
                .grad_p
                .as_ref()
                .unwrap()
                .data()
                .iter()
                .zip(reduced.grad_p.as_ref().unwrap().data())
            {
                assert_eq!(full_p.to_bits(), red_p.to_bits());
            }
        }
    }

    #[test]
    fn nca_hand_values() {
        // C=2, cos to true proxy 1, to the other -1, temperature 1.
        let h = Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let proxies = ProxyBank::new(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let batch = single_label_batch(h, &[0]);
        let r = proxy_nca_loss(&batch, &proxies, 1.0).unwrap();
        let expected = -(1.0_f64.exp() / (1.0_f64.exp() + (-1.0_f64).exp())).ln();
        assert!((r.value - expected).abs() < 1e-12);
        assert!((r.value - 0.126928).abs() < 1e-6);
    }

    #[test]
    fn nca_uniform_similarities_give_log_c() {
        // Equal cosine to every proxy: -log softmax = log C.
        let h = Matrix::from_vec(1, 3, vec![0.0, 0.0, 1.0]).unwrap();
        let mut p = Matrix::zeros(4, 3);
        for j in 0..4 {
            p.set(j, 0, [1.0, -1.0, 1.0, -1.0][j]);
            p.set(j, 1, [1.0, 1.0, -1.0, -1.0][j]);
        }
        let proxies = ProxyBank::new(p).unwrap();
        let batch = single_label_batch(h, &[0]);
        let r = proxy_nca_loss(&batch, &proxies, 1.0).unwrap();
        assert!((r.value - 4.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hhf_nca_fully_clamped_has_zero_gradient() {
        let h = Matrix::from_vec(2, 2, vec![2.0, 0.0, -3.0, 0.0]).unwrap();
        let proxies =
            ProxyBank::new(Matrix::from_vec(2, 2, vec![1.0, 0.0, -1.0, 0.0]).unwrap()).unwrap();
        let batch = single_label_batch(h, &[0, 1]);
        let params = default_params(0.0);
        let r = hhf_proxy_nca_loss(&batch, &proxies, 0.5, &params).unwrap();
        // Value settles at log C per sample; the gradient must vanish.
        assert!((r.value - 2.0_f64.ln()).abs() < 1e-12);
        assert!(r.grad_h.data().iter().all(|&g| g == 0.0));
        assert!(r
            .grad_p
            .as_ref()
            .unwrap()
            .data()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn dhn_identical_similar_pair_vanishes_for_large_alpha() {
        let h = Matrix::from_vec(2, 2, vec![1.0, 0.5, 1.0, 0.5]).unwrap();
        let batch = single_label_batch(h, &[0, 0]);
        let params = HHFParams::new(0.0, 0.2, 500.0, 0.1).unwrap();
        let r = dhn_pairwise_loss(&batch, &params).unwrap();
        assert!(r.value < 1e-12, "{}", r.value);
        assert!(r.grad_p.is_none());
    }

    #[test]
    fn dhn_requires_two_rows() {
        let h = Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let batch = single_label_batch(h, &[0]);
        let params = default_params(0.0);
        match dhn_pairwise_loss(&batch, &params) {
            Err(HhfError::EmptyPairs) => {}
            other => panic!("expected empty-pair error, got {other:?}"),
        }
        assert!(hhf_dhn_pairwise_loss(&batch, &params).is_err());
    }

    #[test]
    fn hhf_dhn_orthogonal_dissimilar_pair_is_inert() {
        // zeta = 0, delta = 0: the hinge sits exactly at cos = 0.
        let h = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let batch = single_label_batch(h, &[0, 1]);
        let params = HHFParams::new(0.0, 0.0, DEFAULT_ALPHA, DEFAULT_GAMMA).unwrap();
        let r = hhf_dhn_pairwise_loss(&batch, &params).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.grad_h.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn total_loss_combines_linearly() {
        let mut rng = Rng::seed_from_u64(22);
        let h = random_matrix(&mut rng, 3, 4);
        let proxies = ProxyBank::new(random_matrix(&mut rng, 2, 4)).unwrap();
        let batch = single_label_batch(h, &[0, 1, 0]);
        let params = default_params(0.0);
        let metric = proxy_anchor_loss(&batch, &proxies, &params).unwrap();
        let quan = quantization_loss(&batch, 2).unwrap();

        let zero_beta = total_loss(&metric, &quan, 0.0).unwrap();
        assert_eq!(zero_beta.value, metric.value);
        assert_eq!(zero_beta.grad_h, metric.grad_h);

        let two = total_loss(&metric, &quan, 2.0).unwrap();
        assert!((two.value - (metric.value + 2.0 * quan.value)).abs() < 1e-15);
        for i in 0..3 {
            for t in 0..4 {
                let expected = metric.grad_h.at(i, t) + 2.0 * quan.grad_h.at(i, t);
                assert_eq!(two.grad_h.at(i, t), expected);
            }
        }
        assert_eq!(
            two.grad_p.as_ref().unwrap(),
            metric.grad_p.as_ref().unwrap()
        );
    }

    #[test]
    fn total_loss_hand_arithmetic() {
        let metric = LossResult {
            value: 1.0,
            grad_h: Matrix::zeros(1, 2),
            grad_p: None,
        };
        let quan = LossResult {
            value: 0.5,
            grad_h: Matrix::zeros(1, 2),
            grad_p: None,
        };
        let total = total_loss(&metric, &quan, 2.0).unwrap();
        assert_eq!(total.value, 2.0);
        let mismatched = LossResult {
            value: 0.0,
            grad_h: Matrix::zeros(2, 2),
            grad_p: None,
        };
        assert!(total_loss(&metric, &mismatched, 1.0).is_err());
    }

    /// Finite-difference check for every loss with proxies, w.r.t. both
    /// the latents and the proxies.
    fn check_proxy_loss_gradients(
        name: &str,
        rng: &mut Rng,
        loss: impl Fn(&LatentBatch, &ProxyBank) -> Result<LossResult>,
        kinks: &dyn Fn(f64, bool) -> bool,
        trials: usize,
    ) {
        let mut done = 0;
        while done < trials {
            let b = 2 + rng.below(4);
            let c = 2 + rng.below(3);
            let k = 4 + rng.below(6);
            let h = random_matrix(rng, b, k);
            let p = random_matrix(rng, c, k);
            let labels: Vec<u32> = (0..b).map(|_| rng.below(c) as u32).collect();
            let batch = single_label_batch(h.clone(), &labels);
            let proxies = ProxyBank::new(p.clone()).unwrap();

            // Resample when any pair sits near a hinge kink.
            let s = row_cosine(&h, &p).unwrap();
            let near_kink = (0..b).any(|i| {
                (0..c).any(|j| kinks(s.at(i, j), labels[i] == j as u32))
            });
            if near_kink {
                continue;
            }
            done += 1;

            let r = loss(&batch, &proxies).unwrap();
            assert!(r.value >= 0.0, "{name}: negative value {}", r.value);
            assert!(r.value.is_finite());

            let fd_h = central_diff(
                |m| {
                    let batch = single_label_batch(m.clone(), &labels);
                    loss(&batch, &proxies).unwrap().value
                },
                &h,
                1e-4,
            );
            assert!(
                max_rel_error(&r.grad_h, &fd_h) < 1e-4,
                "{name}: gradH mismatch {}",
                max_rel_error(&r.grad_h, &fd_h)
            );

            let fd_p = central_diff(
                |m| {
                    let batch = single_label_batch(h.clone(), &labels);
                    let proxies = ProxyBank::new(m.clone()).unwrap();
                    loss(&batch, &proxies).unwrap().value
                },
                &p,
                1e-4,
            );
            assert!(
                max_rel_error(r.grad_p.as_ref().unwrap(), &fd_p) < 1e-4,
                "{name}: gradP mismatch"
            );
        }
    }

    // Gradient checks run at alpha = 8: central differences at the pinned
    // step 1e-4 lose two digits to truncation once alpha reaches 32.
    fn fd_params(zeta: f64) -> HHFParams {
        HHFParams::new(zeta, DEFAULT_DELTA, 8.0, DEFAULT_GAMMA).unwrap()
    }

    #[test]
    fn proxy_anchor_gradients_match_finite_differences() {
        let mut rng = Rng::seed_from_u64(23);
        let params = fd_params(0.0);
        check_proxy_loss_gradients(
            "proxy_anchor",
            &mut rng,
            |b, p| proxy_anchor_loss(b, p, &params),
            &|_, _| false,
            20,
        );
    }

    #[test]
    fn hhf_proxy_anchor_gradients_match_finite_differences() {
        let mut rng = Rng::seed_from_u64(24);
        let params = fd_params(0.1);
        let kink = params.zeta + params.delta;
        let pos_kink = 1.0 - params.delta;
        check_proxy_loss_gradients(
            "hhf_proxy_anchor",
            &mut rng,
            |b, p| hhf_proxy_anchor_loss(b, p, &params),
            &move |cos, positive| {
                if positive {
                    (cos - pos_kink).abs() < 1e-3
                } else {
                    (cos - kink).abs() < 1e-3
                }
            },
            20,
        );
    }

    #[test]
    fn nca_gradients_match_finite_differences() {
        let mut rng = Rng::seed_from_u64(25);
        check_proxy_loss_gradients(
            "proxy_nca",
            &mut rng,
            |b, p| proxy_nca_loss(b, p, 0.5),
            &|_, _| false,
            20,
        );
    }

    #[test]
    fn hhf_nca_gradients_match_finite_differences() {
        let mut rng = Rng::seed_from_u64(26);
        let params = fd_params(0.1);
        let kink = params.zeta + params.delta;
        let pos_kink = 1.0 - params.delta;
        check_proxy_loss_gradients(
            "hhf_proxy_nca",
            &mut rng,
            |b, p| hhf_proxy_nca_loss(b, p, 0.5, &params),
            &move |cos, positive| {
                if positive {
                    (cos - pos_kink).abs() < 1e-3
                } else {
                    (cos - kink).abs() < 1e-3
                }
            },
            20,
        );
    }

    #[test]
    fn dhn_gradients_match_finite_differences() {
        let mut rng = Rng::seed_from_u64(27);
        let params = HHFParams::new(0.0, 0.2, 4.0, 0.1).unwrap();
        for hhf in [false, true] {
            let mut done = 0;
            while done < 20 {
                let b = 2 + rng.below(4);
                let k = 4 + rng.below(6);
                let h = random_matrix(&mut rng, b, k);
                let labels: Vec<u32> = (0..b).map(|_| rng.below(3) as u32).collect();
                let batch = single_label_batch(h.clone(), &labels);
                if hhf {
                    let s = row_cosine(&h, &h).unwrap();
                    let near = (0..b).any(|i| {
                        ((i + 1)..b).any(|j| {
                            let cos = s.at(i, j);
                            (cos - (params.zeta + params.delta)).abs() < 1e-3
                                || (cos - (1.0 - params.delta)).abs() < 1e-3
                        })
                    });
                    if near {
                        continue;
                    }
                }
                done += 1;
                let loss = |batch: &LatentBatch| {
                    if hhf {
                        hhf_dhn_pairwise_loss(batch, &params)
                    } else {
                        dhn_pairwise_loss(batch, &params)
                    }
                };
                let r = loss(&batch).unwrap();
                assert!(r.value >= 0.0 && r.value.is_finite());
                let fd = central_diff(
                    |m| {
                        let b = single_label_batch(m.clone(), &labels);
                        loss(&b).unwrap().value
                    },
                    &h,
                    1e-4,
                );
                assert!(
                    max_rel_error(&r.grad_h, &fd) < 1e-4,
                    "hhf={hhf}: {}",
                    max_rel_error(&r.grad_h, &fd)
                );
            }
        }
    }

    #[test]
    fn metric_losses_are_scale_invariant() {
        let mut rng = Rng::seed_from_u64(28);
        let h = random_matrix(&mut rng, 4, 8);
        let p = random_matrix(&mut rng, 3, 8);
        let labels = vec![0u32, 1, 2, 1];
        let proxies = ProxyBank::new(p).unwrap();
        let params = default_params(0.1);
        let batch = single_label_batch(h.clone(), &labels);

        let mut scaled = h.clone();
        for v in scaled.row_mut(1) {
            *v *= 3.0;
        }
        let scaled_batch = single_label_batch(scaled, &labels);

        let cases: Vec<(f64, f64)> = vec![
            (
                proxy_anchor_loss(&batch, &proxies, &params).unwrap().value,
                proxy_anchor_loss(&scaled_batch, &proxies, &params)
                    .unwrap()
                    .value,
            ),
            (
                hhf_proxy_anchor_loss(&batch, &proxies, &params).unwrap().value,
                hhf_proxy_anchor_loss(&scaled_batch, &proxies, &params)
                    .unwrap()
                    .value,
            ),
            (
                proxy_nca_loss(&batch, &proxies, 0.5).unwrap().value,
                proxy_nca_loss(&scaled_batch, &proxies, 0.5).unwrap().value,
            ),
            (
                dhn_pairwise_loss(&batch, &params).unwrap().value,
                dhn_pairwise_loss(&scaled_batch, &params).unwrap().value,
            ),
        ];
        for (base, scaled) in cases {
            assert!((base - scaled).abs() < 1e-10, "{base} vs {scaled}");
        }

        // The quantization loss does change under scaling.
        let q0 = quantization_loss(&batch, 2).unwrap().value;
        let q1 = quantization_loss(&scaled_batch, 2).unwrap().value;
        assert!((q0 - q1).abs() > 1e-6);
    }

    #[test]
    fn conflict_resolution_total_gradient_is_pure_quantization() {
        // All negative cosines below zeta + delta, positive above
        // 1 - delta: the metric gradient clamps to zero and the total
        // gradient equals beta times the quantization gradient.
        let params = default_params(-0.2);
        let h = Matrix::from_rows(&[vec![0.7, 0.6, -0.4], vec![-0.5, -0.8, 0.3]]).unwrap();
        let p = Matrix::from_rows(&[vec![0.7, 0.6, -0.4], vec![-0.5, -0.8, 0.3]]).unwrap();
        let proxies = ProxyBank::new(p).unwrap();
        let batch = single_label_batch(h.clone(), &[0, 1]);

        let s = row_cosine(&h, &proxies.param.value).unwrap();
        assert!(s.at(0, 0) > 1.0 - params.delta && s.at(1, 1) > 1.0 - params.delta);
        assert!(s.at(0, 1) < params.zeta + params.delta);
        assert!(s.at(1, 0) < params.zeta + params.delta);

        let metric = hhf_proxy_anchor_loss(&batch, &proxies, &params).unwrap();
        let quan = quantization_loss(&batch, 2).unwrap();
        for beta in [0.5, 1.0, 2.0] {
            let total = total_loss(&metric, &quan, beta).unwrap();
            for (t, q) in total.grad_h.data().iter().zip(quan.grad_h.data()) {
                assert!((t - beta * q).abs() <= 1e-12);
                assert_eq!(*t, beta * q); // metric part is exactly zero
            }
        }
    }

    #[test]
    fn losses_stay_finite_at_alpha_64() {
        let mut rng = Rng::seed_from_u64(29);
        let params = HHFParams::new(0.0, 0.2, 64.0, 0.1).unwrap();
        for _ in 0..20 {
            let h = random_matrix(&mut rng, 5, 8);
            let p = random_matrix(&mut rng, 4, 8);
            let labels: Vec<u32> = (0..5).map(|_| rng.below(4) as u32).collect();
            let batch = single_label_batch(h, &labels);
            let proxies = ProxyBank::new(p).unwrap();
            for r in [
                proxy_anchor_loss(&batch, &proxies, &params).unwrap(),
                hhf_proxy_anchor_loss(&batch, &proxies, &params).unwrap(),
                proxy_nca_loss(&batch, &proxies, 1.0 / 64.0).unwrap(),
                hhf_proxy_nca_loss(&batch, &proxies, 1.0 / 64.0, &params).unwrap(),
                dhn_pairwise_loss(&batch, &params).unwrap(),
                hhf_dhn_pairwise_loss(&batch, &params).unwrap(),
            ] {
                assert!(r.value.is_finite() && r.value >= 0.0);
                assert!(r.grad_h.is_finite());
            }
        }
    }

    #[test]
    fn multi_label_positive_for_every_carried_label() {
        // A sample with labels {0, 1} must act as a positive for both
        // proxies and as a negative for proxy 2 only.
        let h = Matrix::from_vec(1, 3, vec![1.0, 0.2, -0.1]).unwrap();
        let p = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let proxies = ProxyBank::new(p).unwrap();
        let batch = LatentBatch::new(h, vec![vec![0, 1]]).unwrap();
        let params = default_params(0.0);
        let r = proxy_anchor_loss(&batch, &proxies, &params).unwrap();
        // Positive LSE terms exist for proxies 0 and 1; negative only for 2.
        // Cross-check against the scalar formula.
        let s = row_cosine(batch.latents(), &proxies.param.value).unwrap();
        let alpha = params.alpha;
        let gamma = params.gamma;
        let neg = (1.0 / 3.0) * (1.0 + (alpha * (s.at(0, 2) + gamma)).exp()).ln();
        let pos = (1.0 / 2.0)
            * ((1.0 + (-alpha * (s.at(0, 0) - gamma)).exp()).ln()
                + (1.0 + (-alpha * (s.at(0, 1) - gamma)).exp()).ln());
        assert!((r.value - (neg + pos)).abs() < 1e-10);
    }

    #[test]
    fn multi_label_pairwise_similarity_is_shared_label() {
        let h = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.9, 0.1],
            vec![-1.0, 0.3],
        ])
        .unwrap();
        let batch = LatentBatch::new(
            h,
            vec![vec![0, 1], vec![1, 2], vec![3]],
        )
        .unwrap();
        assert!(batch.share_label(0, 1));
        assert!(!batch.share_label(0, 2));
        assert!(!batch.share_label(1, 2));
    }
}
