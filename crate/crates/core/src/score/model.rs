//! Point-cloud encoder and pose denoiser with hand-written backward passes,
//! generic over the float type.

use std::fmt::Debug;
use std::ops::AddAssign;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, LinalgScalar, ScalarOperand, Zip};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::cloud::Observation;

pub trait Scalar: LinalgScalar + AddAssign + Float + FromPrimitive + ToPrimitive + ScalarOperand + Send + Sync + Debug + 'static {}

impl<T> Scalar for T where T: LinalgScalar + AddAssign + Float + FromPrimitive + ToPrimitive + ScalarOperand + Send + Sync + Debug + 'static {}

#[inline]
fn c<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("representable constant")
}

#[inline]
fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

#[inline]
fn silu<S: Scalar>(x: S) -> S {
    x * sigmoid(x)
}

#[inline]
fn silu_grad<S: Scalar>(x: S) -> S {
    let s = sigmoid(x);
    s * (S::one() + x * (S::one() - s))
}

/// `x W` as a sum of weight rows; row-major weights make this a sequence
/// of contiguous axpy updates.
fn vec_mat<S: Scalar>(x: ArrayView1<S>, w: &Array2<S>) -> Array1<S> {
    let mut out = Array1::zeros(w.ncols());
    for (xi, row) in x.iter().zip(w.rows()) {
        if *xi != S::zero() {
            out.scaled_add(*xi, &row);
        }
    }
    out
}

/// `W y`.
fn mat_vec<S: Scalar>(w: &Array2<S>, y: ArrayView1<S>) -> Array1<S> {
    w.rows().into_iter().map(|row| row.dot(&y)).collect()
}

/// `G += x y^T`.
fn add_outer<S: Scalar>(g: &mut Array2<S>, x: ArrayView1<S>, y: ArrayView1<S>) {
    for (xi, mut row) in x.iter().zip(g.rows_mut()) {
        if *xi != S::zero() {
            row.scaled_add(*xi, &y);
        }
    }
}

/// Sinusoidal embedding of a diffusion step.
pub fn time_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let freq = (-(10_000f64).ln() * i as f64 / half as f64).exp();
        out[i] = (t as f64 * freq).sin();
        out[half + i] = (t as f64 * freq).cos();
    }
    out
}

/// Layer widths of the encoder and denoiser.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    /// Per-point input: position and one-hot segmentation.
    pub point_dim: usize,
    pub encoder_widths: Vec<usize>,
    pub latent_dim: usize,
    pub time_dim: usize,
    pub denoiser_widths: Vec<usize>,
    pub pose_dim: usize,
    /// Diffusion steps the skip coefficient is taken from.
    pub t_train: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            point_dim: 5,
            encoder_widths: vec![64, 128, 256],
            latent_dim: 1024,
            time_dim: 64,
            denoiser_widths: vec![512, 256, 512],
            pose_dim: 9,
            t_train: 100,
        }
    }
}

impl Architecture {
    pub fn denoiser_input(&self) -> usize {
        self.pose_dim + self.time_dim + self.latent_dim
    }

    /// `(fan_in, fan_out)` of every layer: encoder first, then denoiser.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        let mut prev = self.point_dim;
        for &w in &self.encoder_widths {
            shapes.push((prev, w));
            prev = w;
        }
        shapes.push((prev, self.latent_dim));
        let mut prev = self.denoiser_input();
        for &w in &self.denoiser_widths {
            shapes.push((prev, w));
            prev = w;
        }
        shapes.push((prev, self.pose_dim));
        shapes
    }

    pub fn encoder_layers(&self) -> usize {
        self.encoder_widths.len() + 1
    }

    /// Earlier hidden stage whose output is added to stage `j`, mirroring
    /// the stage order when the widths agree.
    fn skip_source(&self, j: usize) -> Option<usize> {
        let n = self.denoiser_widths.len();
        let i = n - 1 - j;
        (i < j && self.denoiser_widths[i] == self.denoiser_widths[j]).then_some(i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<S> {
    /// `fan_in x fan_out`.
    pub w: Array2<S>,
    pub b: Array1<S>,
}

impl<S: Scalar> Linear<S> {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { w: Array2::zeros((fan_in, fan_out)), b: Array1::zeros(fan_out) }
    }
}

/// Encoder and denoiser parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreModel<S> {
    pub arch: Architecture,
    pub layers: Vec<Linear<S>>,
}

struct EncoderTrace<S> {
    input: Array2<S>,
    z: Vec<Array2<S>>,
    h: Vec<Array2<S>>,
    argmax: Vec<usize>,
    pooled: Array1<S>,
}

struct DenoiserTrace<S> {
    input: Array1<S>,
    z: Vec<Array1<S>>,
    h: Vec<Array1<S>>,
}

impl<S: Scalar> ScoreModel<S> {
    pub fn zeros(arch: &Architecture) -> Self {
        let layers = arch.layer_shapes().into_iter().map(|(i, o)| Linear::zeros(i, o)).collect();
        Self { arch: arch.clone(), layers }
    }

    /// Uniform `±1/sqrt(fan_in)` weights and zero biases.
    pub fn init(arch: &Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Self::zeros(arch);
        for layer in &mut model.layers {
            let bound = 1.0 / (layer.w.nrows() as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("valid bounds");
            layer.w.mapv_inplace(|_| c(dist.sample(&mut rng)));
        }
        model
    }

    pub fn cast<T: Scalar>(&self) -> ScoreModel<T> {
        let conv = |x: &S| T::from_f64(x.to_f64().expect("finite")).expect("representable");
        ScoreModel {
            arch: self.arch.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Linear { w: l.w.map(conv), b: l.b.map(conv) })
                .collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    /// `self += other * scale`.
    pub fn add_scaled(&mut self, other: &Self, scale: S) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w.scaled_add(scale, &b.w);
            a.b.scaled_add(scale, &b.b);
        }
    }

    pub fn scale(&mut self, s: S) {
        for l in &mut self.layers {
            l.w.mapv_inplace(|v| v * s);
            l.b.mapv_inplace(|v| v * s);
        }
    }

    /// Encoder input rows: context points `(x, y, z, 1, 0)` followed by object
    /// points `(x, y, z, 0, 1)`.
    pub fn encoder_input(obs: &Observation) -> Array2<S> {
        let n = obs.scene.len() + obs.object.len();
        let mut x = Array2::zeros((n, 5));
        for (i, p) in obs.scene.iter().enumerate() {
            for k in 0..3 {
                x[(i, k)] = c(p.position[k]);
            }
            x[(i, 3)] = S::one();
        }
        let off = obs.scene.len();
        for (i, p) in obs.object.iter().enumerate() {
            for k in 0..3 {
                x[(off + i, k)] = c(p.position[k]);
            }
            x[(off + i, 4)] = S::one();
        }
        x
    }

    fn encode_traced(&self, x: ArrayView2<S>) -> (Array1<S>, EncoderTrace<S>) {
        let n_hidden = self.arch.encoder_widths.len();
        let mut z = Vec::with_capacity(n_hidden);
        let mut h: Vec<Array2<S>> = Vec::with_capacity(n_hidden);
        for l in 0..n_hidden {
            let layer = &self.layers[l];
            let prev = if l == 0 { x } else { h[l - 1].view() };
            let zl = prev.dot(&layer.w) + &layer.b;
            h.push(zl.mapv(silu));
            z.push(zl);
        }
        let last = &h[n_hidden - 1];
        let width = last.ncols();
        let mut argmax = vec![0usize; width];
        let mut pooled = Array1::from_elem(width, S::neg_infinity());
        for (r, row) in last.outer_iter().enumerate() {
            for (col, &v) in row.iter().enumerate() {
                if v > pooled[col] {
                    pooled[col] = v;
                    argmax[col] = r;
                }
            }
        }
        if last.nrows() == 0 {
            pooled.fill(S::zero());
        }
        let head = &self.layers[n_hidden];
        let latent = vec_mat(pooled.view(), &head.w) + &head.b;
        (latent, EncoderTrace { input: x.to_owned(), z, h, argmax, pooled })
    }

    /// Permutation-invariant latent of a point set.
    pub fn encode(&self, x: ArrayView2<S>) -> Array1<S> {
        self.encode_traced(x).0
    }

    fn encoder_backward(&self, trace: &EncoderTrace<S>, d_latent: ArrayView1<S>, grads: &mut Self) {
        let n_hidden = self.arch.encoder_widths.len();
        let head = &self.layers[n_hidden];
        {
            let g = &mut grads.layers[n_hidden];
            add_outer(&mut g.w, trace.pooled.view(), d_latent);
            g.b += &d_latent;
        }
        let d_pooled = mat_vec(&head.w, d_latent);
        // gradient only reaches the rows that won the max
        let mut rows: Vec<usize> = trace.argmax.clone();
        rows.sort_unstable();
        rows.dedup();
        if rows.is_empty() {
            return;
        }
        let width = d_pooled.len();
        let mut dh = Array2::zeros((rows.len(), width));
        for (col, &r) in trace.argmax.iter().enumerate() {
            let idx = rows.binary_search(&r).expect("row present");
            dh[(idx, col)] += d_pooled[col];
        }
        for l in (0..n_hidden).rev() {
            let zl = trace.z[l].select(Axis(0), &rows);
            let mut dz = dh;
            Zip::from(&mut dz).and(&zl).for_each(|d, &z| *d = *d * silu_grad(z));
            let prev = if l == 0 {
                trace.input.select(Axis(0), &rows)
            } else {
                trace.h[l - 1].select(Axis(0), &rows)
            };
            let g = &mut grads.layers[l];
            g.w += &prev.t().dot(&dz);
            g.b += &dz.sum_axis(Axis(0));
            if l > 0 {
                dh = dz.dot(&self.layers[l].w.t());
            } else {
                break;
            }
        }
    }

    fn denoiser_input(&self, pose: &[f64; 9], t: usize, latent: ArrayView1<S>) -> Array1<S> {
        let mut input = Array1::zeros(self.arch.denoiser_input());
        for (i, v) in pose.iter().enumerate() {
            input[i] = c(*v);
        }
        let off = self.arch.pose_dim;
        for (i, v) in time_embedding(t, self.arch.time_dim).iter().enumerate() {
            input[off + i] = c(*v);
        }
        input.slice_mut(s![off + self.arch.time_dim..]).assign(&latent);
        input
    }

    fn denoise_traced(&self, input: Array1<S>) -> (Array1<S>, DenoiserTrace<S>) {
        let e = self.arch.encoder_layers();
        let n_hidden = self.arch.denoiser_widths.len();
        let mut z = Vec::with_capacity(n_hidden);
        let mut h: Vec<Array1<S>> = Vec::with_capacity(n_hidden);
        for j in 0..n_hidden {
            let layer = &self.layers[e + j];
            let prev = if j == 0 { input.view() } else { h[j - 1].view() };
            let zj = vec_mat(prev, &layer.w) + &layer.b;
            let mut hj = zj.mapv(silu);
            if let Some(i) = self.arch.skip_source(j) {
                hj += &h[i];
            }
            h.push(hj);
            z.push(zj);
        }
        let head = &self.layers[e + n_hidden];
        let out = vec_mat(h[n_hidden - 1].view(), &head.w) + &head.b;
        (out, DenoiserTrace { input, z, h })
    }

    /// Returns the gradient with respect to the denoiser input.
    fn denoiser_backward(&self, trace: &DenoiserTrace<S>, d_out: ArrayView1<S>, grads: &mut Self) -> Array1<S> {
        let e = self.arch.encoder_layers();
        let n_hidden = self.arch.denoiser_widths.len();
        let head = &self.layers[e + n_hidden];
        {
            let g = &mut grads.layers[e + n_hidden];
            add_outer(&mut g.w, trace.h[n_hidden - 1].view(), d_out);
            g.b += &d_out;
        }
        let mut dh: Vec<Array1<S>> = trace.h.iter().map(|x| Array1::zeros(x.len())).collect();
        dh[n_hidden - 1] = mat_vec(&head.w, d_out);
        let mut d_input = Array1::zeros(trace.input.len());
        for j in (0..n_hidden).rev() {
            let dhj = std::mem::replace(&mut dh[j], Array1::zeros(0));
            if let Some(i) = self.arch.skip_source(j) {
                dh[i] += &dhj;
            }
            let mut dz = dhj;
            Zip::from(&mut dz).and(&trace.z[j]).for_each(|d, &z| *d = *d * silu_grad(z));
            let prev = if j == 0 { trace.input.view() } else { trace.h[j - 1].view() };
            let layer = &self.layers[e + j];
            let g = &mut grads.layers[e + j];
            add_outer(&mut g.w, prev, dz.view());
            g.b += &dz;
            let back = mat_vec(&layer.w, dz.view());
            if j == 0 {
                d_input = back;
            } else {
                dh[j - 1] += &back;
            }
        }
        d_input
    }

    /// x0-prediction for the noisy pose `x_t` (world frame) conditioned on
    /// `obs`. Translation enters and leaves relative to the context centroid.
    pub fn predict_x0(&self, obs: &Observation, x_t: &[f64; 9], t: usize) -> [f64; 9] {
        let input = Self::encoder_input(obs);
        let latent = self.encode(input.view());
        let mut centred = *x_t;
        for k in 0..3 {
            centred[k] -= obs.centroid[k];
        }
        let (out, _) = self.denoise_traced(self.denoiser_input(&centred, t, latent.view()));
        std::array::from_fn(|i| out[i].to_f64().expect("finite") + if i < 3 { obs.centroid[i] } else { 0.0 })
    }

    /// Squared error `(1/9) |x0_hat - x0|^2` of one example; adds its
    /// parameter gradient to `grads`.
    pub fn loss_and_grad(&self, obs: &Observation, x_t: &[f64; 9], t: usize, x0: &[f64; 9], grads: &mut Self) -> S {
        let input = Self::encoder_input(obs);
        let (latent, enc) = self.encode_traced(input.view());
        let mut centred = *x_t;
        let mut target = *x0;
        for k in 0..3 {
            centred[k] -= obs.centroid[k];
            target[k] -= obs.centroid[k];
        }
        let (out, den) = self.denoise_traced(self.denoiser_input(&centred, t, latent.view()));
        let dim = c::<S>(self.arch.pose_dim as f64);
        let mut loss = S::zero();
        let mut d_out = Array1::zeros(out.len());
        for i in 0..out.len() {
            let diff = out[i] - c(target[i]);
            loss = loss + diff * diff / dim;
            d_out[i] = c::<S>(2.0) * diff / dim;
        }
        let d_input = self.denoiser_backward(&den, d_out.view(), grads);
        let off = self.arch.pose_dim + self.arch.time_dim;
        self.encoder_backward(&enc, d_input.slice(s![off..]), grads);
        loss
    }

    /// Loss only, for finite-difference checks.
    pub fn loss(&self, obs: &Observation, x_t: &[f64; 9], t: usize, x0: &[f64; 9]) -> S {
        let mut scratch = Self::zeros(&self.arch);
        self.loss_and_grad(obs, x_t, t, x0, &mut scratch)
    }
}
