//! Forward operations and their analytic gradients.
//!
//! Every `*_backward` takes the upstream gradient (dL/d output) and returns
//! dL/d input by the chain rule. There is no graph; callers wire the calls
//! by hand and check them against `gradcheck`.

use super::matrix::{shape_err, Matrix};
use crate::error::{HhfError, Result};

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.rows() {
        return Err(shape_err("matmul", a, b));
    }
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let mut out = Matrix::zeros(n, m);
    for i in 0..n {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (p, &a_ip) in a_row.iter().enumerate().take(k) {
            let b_row = b.row(p);
            for j in 0..m {
                out_row[j] += a_ip * b_row[j];
            }
        }
    }
    Ok(out)
}

/// Chain rule for C = A*B: dA = U * B^T, dB = A^T * U.
pub fn matmul_backward(upstream: &Matrix, a: &Matrix, b: &Matrix) -> Result<(Matrix, Matrix)> {
    if upstream.rows() != a.rows() || upstream.cols() != b.cols() {
        return Err(shape_err("matmul_backward", upstream, a));
    }
    let grad_a = matmul(upstream, &b.transpose())?;
    let grad_b = matmul(&a.transpose(), upstream)?;
    Ok((grad_a, grad_b))
}

/// Pairwise cosine similarity between the rows of `h` (BxK) and the rows of
/// `p` (CxK). Output is BxC with entries in [-1, 1].
pub fn row_cosine(h: &Matrix, p: &Matrix) -> Result<Matrix> {
    if h.cols() != p.cols() {
        return Err(shape_err("row_cosine", h, p));
    }
    let h_norms = row_norms(h)?;
    let p_norms = row_norms(p)?;
    let mut out = Matrix::zeros(h.rows(), p.rows());
    for i in 0..h.rows() {
        for j in 0..p.rows() {
            let dot: f64 = h.row(i).iter().zip(p.row(j)).map(|(a, b)| a * b).sum();
            out.set(i, j, dot / (h_norms[i] * p_norms[j]));
        }
    }
    Ok(out)
}

/// Gradients of the cosine matrix w.r.t. both inputs.
///
/// d cos(h,p)/dh = p/(|h||p|) - cos(h,p) * h/|h|^2, and symmetrically for p.
pub fn row_cosine_backward(
    upstream: &Matrix,
    h: &Matrix,
    p: &Matrix,
) -> Result<(Matrix, Matrix)> {
    if h.cols() != p.cols() {
        return Err(shape_err("row_cosine_backward", h, p));
    }
    if upstream.rows() != h.rows() || upstream.cols() != p.rows() {
        return Err(shape_err("row_cosine_backward", upstream, h));
    }
    let h_norms = row_norms(h)?;
    let p_norms = row_norms(p)?;
    let k = h.cols();
    let mut grad_h = Matrix::zeros(h.rows(), k);
    let mut grad_p = Matrix::zeros(p.rows(), k);
    for i in 0..h.rows() {
        for j in 0..p.rows() {
            let u = upstream.at(i, j);
            if u == 0.0 {
                continue;
            }
            let hn = h_norms[i];
            let pn = p_norms[j];
            let dot: f64 = h.row(i).iter().zip(p.row(j)).map(|(a, b)| a * b).sum();
            let cos = dot / (hn * pn);
            for t in 0..k {
                grad_h.row_mut(i)[t] +=
                    u * (p.at(j, t) / (hn * pn) - cos * h.at(i, t) / (hn * hn));
                grad_p.row_mut(j)[t] +=
                    u * (h.at(i, t) / (hn * pn) - cos * p.at(j, t) / (pn * pn));
            }
        }
    }
    Ok((grad_h, grad_p))
}

fn row_norms(m: &Matrix) -> Result<Vec<f64>> {
    (0..m.rows())
        .map(|r| {
            let n = m.squared_row_norm(r).sqrt();
            if n == 0.0 {
                Err(HhfError::ZeroNormRow { row: r })
            } else {
                Ok(n)
            }
        })
        .collect()
}

/// log(1 + sum_i exp(x_i)), stabilized by shifting with max(0, max_i x_i).
///
/// The implicit +1 is treated as an exp(0) term, so the shift never loses it.
pub fn logsumexp_shifted(terms: &[f64]) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    let m = terms.iter().fold(0.0_f64, |acc, &x| acc.max(x));
    let sum: f64 = (-m).exp() + terms.iter().map(|&x| (x - m).exp()).sum::<f64>();
    m + sum.ln()
}

/// d/dx_i log(1 + sum exp(x)) = exp(x_i) / (1 + sum exp(x)), times upstream.
pub fn logsumexp_shifted_backward(terms: &[f64], upstream: f64) -> Vec<f64> {
    if terms.is_empty() {
        return Vec::new();
    }
    let m = terms.iter().fold(0.0_f64, |acc, &x| acc.max(x));
    let denom: f64 = (-m).exp() + terms.iter().map(|&x| (x - m).exp()).sum::<f64>();
    terms
        .iter()
        .map(|&x| upstream * (x - m).exp() / denom)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn forward(&self, input: &Matrix) -> Matrix {
        match self {
            Activation::Tanh => input.map(f64::tanh),
            Activation::Relu => input.map(|v| v.max(0.0)),
        }
    }

    /// Elementwise chain rule; `input` is the pre-activation value.
    pub fn backward(&self, upstream: &Matrix, input: &Matrix) -> Result<Matrix> {
        if !upstream.same_shape(input) {
            return Err(shape_err("activation_backward", upstream, input));
        }
        let mut out = upstream.clone();
        match self {
            Activation::Tanh => {
                for (g, &x) in out.data_mut().iter_mut().zip(input.data()) {
                    let t = x.tanh();
                    *g *= 1.0 - t * t;
                }
            }
            Activation::Relu => {
                for (g, &x) in out.data_mut().iter_mut().zip(input.data()) {
                    if x <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
        }
        Ok(out)
    }
}

impl std::str::FromStr for Activation {
    type Err = HhfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(HhfError::InvalidArgument(format!(
                "unknown activation {other:?} (expected tanh or relu)"
            ))),
        }
    }
}

/// Sign with the fixed convention sgn(0) = +1, used consistently by the
/// quantization loss and the bit packer.
#[inline]
pub fn sgn(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}
