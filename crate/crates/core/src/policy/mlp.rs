//! Fully connected tanh networks over a flat parameter vector.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floating-point element type of a network: `f32` for training, `f64` for
/// gradient checks.
pub trait Real: Float + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static {
    /// `c = alpha * a * b + beta * c` on strided row/column layouts.
    ///
    /// # Safety
    /// Every index reached through the given shapes and strides must lie
    /// inside the corresponding pointer's allocation.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("representable")
    }
}

impl Real for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Dense row-major or transposed operand.
#[derive(Clone, Copy)]
struct Mat<'a, T> {
    data: &'a [T],
    rows: usize,
    cols: usize,
    transposed: bool,
}

impl<'a, T> Mat<'a, T> {
    /// `rows x cols` stored row-major.
    fn n(data: &'a [T], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        Mat { data, rows, cols, transposed: false }
    }

    /// Transpose of a `cols x rows` row-major matrix.
    fn t(data: &'a [T], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        Mat { data, rows, cols, transposed: true }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.rows as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `c (m x n, row-major) = a * b + beta * c`.
fn gemm<T: Real>(a: Mat<'_, T>, b: Mat<'_, T>, beta: T, c: &mut [T]) {
    assert_eq!(a.cols, b.rows);
    assert!(c.len() >= a.rows * b.cols);
    assert!(a.data.len() >= a.rows * a.cols && b.data.len() >= b.rows * b.cols);
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: the asserts above bound every index by the slice lengths.
    unsafe {
        T::gemm_raw(
            a.rows,
            a.cols,
            b.cols,
            T::one(),
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            b.cols as isize,
            1,
        )
    }
}

/// Layer sizes of a network, input first. Hidden layers use tanh, the output
/// layer is linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub sizes: Vec<usize>,
}

impl MlpShape {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("network needs >= 2 non-empty layers, got {sizes:?}")));
        }
        Ok(MlpShape { sizes })
    }

    pub fn input(&self) -> usize {
        self.sizes[0]
    }

    pub fn output(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// `(weight offset, bias offset, inputs, outputs)` of layer `l`. Weights
    /// are `outputs x inputs` row-major, followed by the bias.
    pub fn layer(&self, l: usize) -> (usize, usize, usize, usize) {
        let offset: usize = (0..l).map(|j| (self.sizes[j] + 1) * self.sizes[j + 1]).sum();
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        (offset, offset + i * o, i, o)
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    /// Output rows for `batch` inputs.
    pub fn forward<T: Real>(&self, params: &[T], x: &[T], batch: usize) -> Result<Vec<T>> {
        Ok(self.forward_cached(params, x, batch)?.pop().expect("at least one layer"))
    }

    /// Activations of every layer, input included.
    pub fn forward_cached<T: Real>(&self, params: &[T], x: &[T], batch: usize) -> Result<Vec<Vec<T>>> {
        if params.len() != self.n_params() {
            return Err(Error::Shape(format!("expected {} parameters, got {}", self.n_params(), params.len())));
        }
        if x.len() != batch * self.input() {
            return Err(Error::Shape(format!(
                "expected {batch} x {} inputs, got {} values",
                self.input(),
                x.len()
            )));
        }
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        for l in 0..self.layers() {
            let (w, b, i, o) = self.layer(l);
            let mut z = Vec::with_capacity(batch * o);
            for _ in 0..batch {
                z.extend_from_slice(&params[b..b + o]);
            }
            gemm(Mat::n(&acts[l], batch, i), Mat::t(&params[w..b], i, o), T::one(), &mut z);
            if l + 1 < self.layers() {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        Ok(acts)
    }

    /// Accumulates into `grad` the parameter gradient for output gradient
    /// `d_out`, given the activations from [`MlpShape::forward_cached`].
    pub fn backward<T: Real>(&self, params: &[T], acts: &[Vec<T>], d_out: &[T], batch: usize, grad: &mut [T]) {
        let mut delta = d_out.to_vec();
        for l in (0..self.layers()).rev() {
            let (w, b, i, o) = self.layer(l);
            if l + 1 < self.layers() {
                for (d, a) in delta.iter_mut().zip(&acts[l + 1]) {
                    *d = *d * (T::one() - *a * *a);
                }
            }
            gemm(Mat::t(&delta, o, batch), Mat::n(&acts[l], batch, i), T::one(), &mut grad[w..b]);
            let ones = vec![T::one(); batch];
            gemm(Mat::n(&ones, 1, batch), Mat::n(&delta, batch, o), T::one(), &mut grad[b..b + o]);
            if l > 0 {
                let mut prev = vec![T::zero(); batch * i];
                gemm(Mat::n(&delta, batch, o), Mat::n(&params[w..b], o, i), T::zero(), &mut prev);
                delta = prev;
            }
        }
    }

    /// Orthogonal weights scaled by `hidden_gain` for hidden layers and
    /// `output_gain` for the last layer; zero biases.
    pub fn init<T: Real, R: Rng + ?Sized>(&self, rng: &mut R, hidden_gain: f64, output_gain: f64) -> Vec<T> {
        let mut params = vec![T::zero(); self.n_params()];
        for l in 0..self.layers() {
            let (w, _, i, o) = self.layer(l);
            let gain = if l + 1 == self.layers() { output_gain } else { hidden_gain };
            for (dst, v) in params[w..w + i * o].iter_mut().zip(orthogonal(rng, o, i)) {
                *dst = T::of(gain * v);
            }
        }
        params
    }
}

/// A `rows x cols` matrix with orthonormal rows (or columns, whichever is
/// fewer), via Gram-Schmidt on Gaussian vectors.
pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Vec<f64> {
    let (n, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        for q in &basis {
            let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = if rows <= cols { basis[r][c] } else { basis[c][r] };
        }
    }
    out
}
