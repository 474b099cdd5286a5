use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::ops::{matvec_acc, matvec_t_acc, outer_acc, sigmoid};
use crate::numerics::Tensor;

/// Weights of one GRU layer with input size `n` and hidden size `H`.
///
/// `z = σ(W_z x + U_z h + b_z)`, `r = σ(W_r x + U_r h + b_r)`,
/// `h̃ = tanh(W_h x + U_h (r ⊙ h) + b_h)`, `h' = z ⊙ h + (1 − z) ⊙ h̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Tensor,
    pub u_z: Tensor,
    pub b_z: Tensor,
    pub w_r: Tensor,
    pub u_r: Tensor,
    pub b_r: Tensor,
    pub w_h: Tensor,
    pub u_h: Tensor,
    pub b_h: Tensor,
}

/// Everything the backward pass of one GRU step needs.
#[derive(Debug, Clone)]
pub(crate) struct GruStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub cand: Vec<f64>,
    pub rh: Vec<f64>,
    pub h: Vec<f64>,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(&[hidden, input]);
        let u = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        Self {
            w_z: w(),
            u_z: u(),
            b_z: b(),
            w_r: w(),
            u_r: u(),
            b_r: b(),
            w_h: w(),
            u_h: u(),
            b_h: b(),
        }
    }

    pub fn uniform<R: Rng + ?Sized>(input: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(input, hidden);
        p.for_each_mut(|_, t| *t = Tensor::uniform(t.shape(), scale, rng));
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.rows()
    }

    pub(crate) fn for_each(&self, mut f: impl FnMut(&'static str, &Tensor)) {
        f("w_z", &self.w_z);
        f("u_z", &self.u_z);
        f("b_z", &self.b_z);
        f("w_r", &self.w_r);
        f("u_r", &self.u_r);
        f("b_r", &self.b_r);
        f("w_h", &self.w_h);
        f("u_h", &self.u_h);
        f("b_h", &self.b_h);
    }

    pub(crate) fn for_each_mut(&mut self, mut f: impl FnMut(&'static str, &mut Tensor)) {
        f("w_z", &mut self.w_z);
        f("u_z", &mut self.u_z);
        f("b_z", &mut self.b_z);
        f("w_r", &mut self.w_r);
        f("u_r", &mut self.u_r);
        f("b_r", &mut self.b_r);
        f("w_h", &mut self.w_h);
        f("u_h", &mut self.u_h);
        f("b_h", &mut self.b_h);
    }

    pub(crate) fn forward(&self, x: &[f64], h_prev: &[f64]) -> GruStep {
        let n = self.input_dim();
        let hd = self.hidden_dim();
        let gate = |w: &Tensor, u: &Tensor, b: &Tensor, hin: &[f64]| {
            let mut a = b.data().to_vec();
            matvec_acc(w.data(), n, x, &mut a);
            matvec_acc(u.data(), hd, hin, &mut a);
            a
        };
        let z: Vec<f64> = gate(&self.w_z, &self.u_z, &self.b_z, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let r: Vec<f64> = gate(&self.w_r, &self.u_r, &self.b_r, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        let cand: Vec<f64> = gate(&self.w_h, &self.u_h, &self.b_h, &rh)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let h = (0..hd)
            .map(|i| z[i] * h_prev[i] + (1.0 - z[i]) * cand[i])
            .collect();
        GruStep {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            z,
            r,
            cand,
            rh,
            h,
        }
    }

    /// Accumulates parameter gradients into `grads` and adds the input and
    /// previous-state gradients into `dx` / `dh_prev`.
    pub(crate) fn backward(
        &self,
        step: &GruStep,
        dh: &[f64],
        grads: &mut GruParams,
        dx: &mut [f64],
        dh_prev: &mut [f64],
    ) {
        let n = self.input_dim();
        let hd = self.hidden_dim();
        let mut da_z = vec![0.0; hd];
        let mut da_r = vec![0.0; hd];
        let mut da_h = vec![0.0; hd];
        for i in 0..hd {
            let z = step.z[i];
            let c = step.cand[i];
            dh_prev[i] += dh[i] * z;
            da_z[i] = dh[i] * (step.h_prev[i] - c) * z * (1.0 - z);
            da_h[i] = dh[i] * (1.0 - z) * (1.0 - c * c);
        }

        // candidate path
        outer_acc(grads.w_h.data_mut(), &da_h, &step.x);
        outer_acc(grads.u_h.data_mut(), &da_h, &step.rh);
        axpy_into(grads.b_h.data_mut(), &da_h);
        matvec_t_acc(self.w_h.data(), n, &da_h, dx);
        let mut drh = vec![0.0; hd];
        matvec_t_acc(self.u_h.data(), hd, &da_h, &mut drh);
        for i in 0..hd {
            let r = step.r[i];
            dh_prev[i] += drh[i] * r;
            da_r[i] = drh[i] * step.h_prev[i] * r * (1.0 - r);
        }

        for (da, w, u, gw, gu, gb) in [
            (&da_z, &self.w_z, &self.u_z, &mut grads.w_z, &mut grads.u_z, &mut grads.b_z),
            (&da_r, &self.w_r, &self.u_r, &mut grads.w_r, &mut grads.u_r, &mut grads.b_r),
        ] {
            outer_acc(gw.data_mut(), da, &step.x);
            outer_acc(gu.data_mut(), da, &step.h_prev);
            axpy_into(gb.data_mut(), da);
            matvec_t_acc(w.data(), n, da, dx);
            matvec_t_acc(u.data(), hd, da, dh_prev);
        }
    }
}

fn axpy_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// One GRU step on tensors.
pub fn gru_cell(x: &Tensor, h_prev: &Tensor, p: &GruParams) -> Result<Tensor> {
    if x.shape() != [p.input_dim()] {
        return Err(Error::ShapeMismatch {
            op: "gru_cell",
            left: p.w_z.shape().to_vec(),
            right: x.shape().to_vec(),
        });
    }
    if h_prev.shape() != [p.hidden_dim()] {
        return Err(Error::ShapeMismatch {
            op: "gru_cell",
            left: p.u_z.shape().to_vec(),
            right: h_prev.shape().to_vec(),
        });
    }
    Ok(Tensor::vector(p.forward(x.data(), h_prev.data()).h))
}


/// Gradients of one GRU step.
#[derive(Debug, Clone, PartialEq)]
pub struct GruGrads {
    pub dx: Tensor,
    pub dh_prev: Tensor,
    pub params: GruParams,
}

/// Backward pass of [`gru_cell`] for upstream gradient `dh`.
pub fn gru_cell_backward(x: &Tensor, h_prev: &Tensor, p: &GruParams, dh: &Tensor) -> Result<GruGrads> {
    gru_cell(x, h_prev, p)?;
    if dh.shape() != [p.hidden_dim()] {
        return Err(Error::ShapeMismatch {
            op: "gru_cell_backward",
            left: p.u_z.shape().to_vec(),
            right: dh.shape().to_vec(),
        });
    }
    let step = p.forward(x.data(), h_prev.data());
    let mut params = GruParams::zeros(p.input_dim(), p.hidden_dim());
    let mut dx = vec![0.0; p.input_dim()];
    let mut dh_prev = vec![0.0; p.hidden_dim()];
    p.backward(&step, dh.data(), &mut params, &mut dx, &mut dh_prev);
    Ok(GruGrads {
        dx: Tensor::vector(dx),
        dh_prev: Tensor::vector(dh_prev),
        params,
    })
}
