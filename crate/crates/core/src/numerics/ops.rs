//! Differentiable primitives and the slice kernels the model layers share.
//!
//! Matrices are row-major `rows × cols` slices. The `*_acc` kernels add into
//! their output so backward passes can accumulate across time steps.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Probability floor applied before taking a logarithm in [`cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four independent partial sums; the combination order is fixed
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out = W x`
pub fn matvec(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(w.len(), cols * out.len());
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o = dot(row, x);
    }
}

/// `out += W x`
pub fn matvec_acc(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), cols * out.len());
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `dx += Wᵀ dy`
pub fn matvec_t_acc(w: &[f64], cols: usize, dy: &[f64], dx: &mut [f64]) {
    debug_assert_eq!(dx.len(), cols);
    debug_assert_eq!(w.len(), cols * dy.len());
    for (&g, row) in dy.iter().zip(w.chunks_exact(cols)) {
        if g != 0.0 {
            axpy(g, row, dx);
        }
    }
}

/// `dW += dy xᵀ`
pub fn outer_acc(dw: &mut [f64], dy: &[f64], x: &[f64]) {
    debug_assert_eq!(dw.len(), dy.len() * x.len());
    for (&g, row) in dy.iter().zip(dw.chunks_exact_mut(x.len())) {
        if g != 0.0 {
            axpy(g, x, row);
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of a slice into `out`.
pub fn softmax_into(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        sum += *o;
    }
    let inv = 1.0 / sum;
    out.iter_mut().for_each(|o| *o *= inv);
}

/// `dz = p ⊙ (dp − ⟨p, dp⟩)`, the Jacobian-vector product of softmax.
pub fn softmax_backward(p: &[f64], dp: &[f64], dz: &mut [f64]) {
    let inner = dot(p, dp);
    for ((d, &pi), &gi) in dz.iter_mut().zip(p).zip(dp) {
        *d = pi * (gi - inner);
    }
}

/// Gradients of [`affine`] with respect to each of its arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineGrads {
    pub dw: Tensor,
    pub dx: Tensor,
    pub db: Tensor,
}

fn check_affine(w: &Tensor, x: &Tensor, b: &Tensor) -> Result<()> {
    if w.shape().len() != 2 || w.cols() != x.len() || x.shape().len() != 1 {
        return Err(Error::ShapeMismatch {
            op: "affine",
            left: w.shape().to_vec(),
            right: x.shape().to_vec(),
        });
    }
    if b.shape() != [w.rows()] {
        return Err(Error::ShapeMismatch {
            op: "affine",
            left: w.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// `W x + b` for `W: m×n`, `x: n`, `b: m`.
pub fn affine(w: &Tensor, x: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_affine(w, x, b)?;
    let mut out = b.data().to_vec();
    matvec_acc(w.data(), w.cols(), x.data(), &mut out);
    Ok(Tensor::vector(out))
}

/// Backward pass of [`affine`] for upstream gradient `dy`.
pub fn affine_backward(w: &Tensor, x: &Tensor, dy: &Tensor) -> Result<AffineGrads> {
    if dy.shape() != [w.rows()] {
        return Err(Error::ShapeMismatch {
            op: "affine_backward",
            left: w.shape().to_vec(),
            right: dy.shape().to_vec(),
        });
    }
    check_affine(w, x, dy)?;
    let mut dw = w.zeros_like();
    outer_acc(dw.data_mut(), dy.data(), x.data());
    let mut dx = x.zeros_like();
    matvec_t_acc(w.data(), w.cols(), dy.data(), dx.data_mut());
    Ok(AffineGrads {
        dw,
        dx,
        db: dy.clone(),
    })
}

/// Softmax over a rank-1 tensor, using max-subtraction.
pub fn softmax(z: &Tensor) -> Result<Tensor> {
    if z.is_empty() {
        return Err(Error::EmptyInput("softmax"));
    }
    if !z.is_finite() {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let mut out = vec![0.0; z.len()];
    softmax_into(z.data(), &mut out);
    Ok(Tensor::vector(out))
}

/// Result of [`cross_entropy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    /// The target probability fell below [`PROB_FLOOR`] and was clamped.
    pub clamped: bool,
}

/// `−ln pred[target]` with the probability floored at [`PROB_FLOOR`].
pub fn cross_entropy(pred: &Tensor, target: usize) -> Result<CrossEntropy> {
    if target >= pred.len() {
        return Err(Error::Precondition(format!(
            "cross_entropy target {target} out of range for {} classes",
            pred.len()
        )));
    }
    let p = pred.data()[target];
    let clamped = p < PROB_FLOOR;
    Ok(CrossEntropy {
        loss: -p.max(PROB_FLOOR).ln(),
        clamped,
    })
}

/// Gradient of `cross_entropy(softmax(z), target)` with respect to `z`,
/// given `pred = softmax(z)`: `pred − onehot(target)`.
pub fn cross_entropy_logit_grad(pred: &Tensor, target: usize) -> Result<Tensor> {
    if target >= pred.len() {
        return Err(Error::Precondition(format!(
            "cross_entropy target {target} out of range for {} classes",
            pred.len()
        )));
    }
    let mut g = pred.clone();
    g.data_mut()[target] -= 1.0;
    Ok(g)
}
