//! Multi-window 1-D convolutions over token vectors followed by masked
//! mean-over-time pooling, with the matching backward pass.
//!
//! Every window size `k` is odd and the input is zero-padded by `(k - 1) / 2`
//! on each side, so position `i` sees tokens `i - (k-1)/2 ..= i + (k-1)/2`
//! and the output has the same length as the input. The local representation
//! of a token is the concatenation of the ReLU outputs of all windows.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::par;
use crate::real::{axpy, dot, relu, Real};
use crate::rng;
use crate::tensor::{Matrix, Tensor3};

pub const DEFAULT_WINDOWS: [usize; 3] = [1, 3, 5];
pub const DEFAULT_FILTERS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderConfig {
    pub window_sizes: Vec<usize>,
    pub filters_per_window: usize,
    pub d_in: usize,
}

impl EncoderConfig {
    pub fn new(window_sizes: Vec<usize>, filters_per_window: usize, d_in: usize) -> Result<Self> {
        let cfg = Self { window_sizes, filters_per_window, d_in };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_sizes.is_empty() {
            return Err(Error::InvalidConfig("at least one window size is required".into()));
        }
        if let Some(k) = self.window_sizes.iter().find(|&&k| k == 0 || k % 2 == 0) {
            return Err(Error::InvalidConfig(format!("window size {k} must be odd and positive")));
        }
        if self.filters_per_window == 0 || self.d_in == 0 {
            return Err(Error::InvalidConfig("filters and input width must be positive".into()));
        }
        Ok(())
    }

    /// Width `d` of local and global representations.
    pub fn output_dim(&self) -> usize {
        self.window_sizes.len() * self.filters_per_window
    }
}

/// One convolution: `weight` is `d_f x (k * d_in)`, window positions laid out
/// left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub window: usize,
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    pub layers: Vec<ConvLayer<T>>,
}

impl<T: Real> EncoderParams<T> {
    /// Weights uniform in `±sqrt(6 / (k * d_in + d_f))`, biases zero.
    pub fn init(cfg: &EncoderConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng::seeded(seed, rng::stream::ENCODER);
        let d_f = cfg.filters_per_window;
        let layers = cfg
            .window_sizes
            .iter()
            .map(|&k| {
                let fan = k * cfg.d_in;
                let bound = libm::sqrt(6.0 / (fan + d_f) as f64);
                let data = (0..d_f * fan).map(|_| rng::uniform::<T>(&mut rng, bound)).collect();
                Ok(ConvLayer { window: k, weight: Matrix::from_vec(d_f, fan, data)?, bias: vec![T::zero(); d_f] })
            })
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn zeros(cfg: &EncoderConfig) -> Self {
        let d_f = cfg.filters_per_window;
        let layers = cfg
            .window_sizes
            .iter()
            .map(|&k| ConvLayer { window: k, weight: Matrix::zeros(d_f, k * cfg.d_in), bias: vec![T::zero(); d_f] })
            .collect();
        Self { layers }
    }

    pub fn check(&self, cfg: &EncoderConfig) -> Result<()> {
        let ok = self.layers.len() == cfg.window_sizes.len()
            && self.layers.iter().zip(&cfg.window_sizes).all(|(l, &k)| {
                l.window == k
                    && l.weight.shape() == [cfg.filters_per_window, k * cfg.d_in]
                    && l.bias.len() == cfg.filters_per_window
            });
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("encoder parameters do not match configuration".into()))
        }
    }

    pub fn cast<U: Real>(&self) -> EncoderParams<U> {
        EncoderParams {
            layers: self
                .layers
                .iter()
                .map(|l| ConvLayer {
                    window: l.window,
                    weight: l.weight.map(|x| U::lit(x.as_f64())),
                    bias: l.bias.iter().map(|&x| U::lit(x.as_f64())).collect(),
                })
                .collect(),
        }
    }
}

/// What the backward pass needs from the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderCache<T> {
    input: Tensor3<T>,
    /// Pre-activations per window, `B x l_max x d_f`.
    pre: Vec<Tensor3<T>>,
    lengths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch<T> {
    /// `B x l_max x d`, zero at padded positions.
    pub local: Tensor3<T>,
    /// `B x d` masked means of `local`.
    pub global: Matrix<T>,
    pub lengths: Vec<usize>,
    pub cache: EncoderCache<T>,
}

impl<T: Real> EncodedBatch<T> {
    pub fn batch_size(&self) -> usize {
        self.lengths.len()
    }
}

/// Receptive field of position `i` clipped to `[0, len)`, and the offset of
/// its first real token inside the window.
#[inline]
fn window_span(i: usize, half: usize, len: usize) -> (usize, usize, usize) {
    let lo = i.saturating_sub(half);
    let hi = (i + half + 1).min(len);
    (lo, hi, lo + half - i)
}

fn check_input<T: Real>(h: &Tensor3<T>, lengths: &[usize], cfg: &EncoderConfig) -> Result<()> {
    let [b, l_max, d_in] = h.dims();
    if b != lengths.len() || d_in != cfg.d_in || lengths.iter().any(|&l| l > l_max) {
        return Err(Error::ShapeMismatch(format!(
            "input {b}x{l_max}x{d_in} with {} lengths, encoder expects width {}",
            lengths.len(),
            cfg.d_in
        )));
    }
    Ok(())
}

/// Local representations for a padded batch.
pub fn conv_forward<T: Real>(
    h: &Tensor3<T>,
    lengths: &[usize],
    params: &EncoderParams<T>,
    cfg: &EncoderConfig,
) -> Result<(Tensor3<T>, EncoderCache<T>)> {
    check_input(h, lengths, cfg)?;
    params.check(cfg)?;
    let [b, l_max, d_in] = h.dims();
    let d_f = cfg.filters_per_window;
    let d = cfg.output_dim();

    let per_sentence = par::map_indexed(b, |s| {
        let len = lengths[s];
        let mut local = vec![T::zero(); l_max * d];
        let mut pre: Vec<Vec<T>> = params.layers.iter().map(|_| vec![T::zero(); l_max * d_f]).collect();
        for (li, layer) in params.layers.iter().enumerate() {
            let half = (layer.window - 1) / 2;
            for i in 0..len {
                let (lo, hi, first) = window_span(i, half, len);
                let x = h.span(s, lo, hi);
                let woff = first * d_in;
                for f in 0..d_f {
                    let w = &layer.weight.row(f)[woff..woff + x.len()];
                    let z = layer.bias[f] + dot(w, x);
                    pre[li][i * d_f + f] = z;
                    local[i * d + li * d_f + f] = relu(z);
                }
            }
        }
        (local, pre)
    });

    let mut local = Tensor3::zeros(b, l_max, d);
    let mut pre: Vec<Tensor3<T>> = params.layers.iter().map(|_| Tensor3::zeros(b, l_max, d_f)).collect();
    for (s, (loc, pr)) in per_sentence.into_iter().enumerate() {
        local.sentence_mut(s).copy_from_slice(&loc);
        for (dst, src) in pre.iter_mut().zip(pr) {
            dst.sentence_mut(s).copy_from_slice(&src);
        }
    }
    Ok((local, EncoderCache { input: h.clone(), pre, lengths: lengths.to_vec() }))
}

/// Masked mean over positions.
pub fn pool_forward<T: Real>(local: &Tensor3<T>, lengths: &[usize]) -> Result<Matrix<T>> {
    let [b, l_max, d] = local.dims();
    if lengths.len() != b || lengths.iter().any(|&l| l > l_max) {
        return Err(Error::ShapeMismatch(format!("{} lengths for batch of {b}", lengths.len())));
    }
    let mut global = Matrix::zeros(b, d);
    for (s, &len) in lengths.iter().enumerate() {
        if len == 0 {
            return Err(Error::EmptyMask(s));
        }
        let row = global.row_mut(s);
        for i in 0..len {
            axpy(T::one(), local.at(s, i), row);
        }
        let n = T::lit(len as f64);
        row.iter_mut().for_each(|x| *x = *x / n);
    }
    Ok(global)
}

pub fn encode<T: Real>(
    h: &Tensor3<T>,
    lengths: &[usize],
    params: &EncoderParams<T>,
    cfg: &EncoderConfig,
) -> Result<EncodedBatch<T>> {
    let (local, cache) = conv_forward(h, lengths, params, cfg)?;
    let global = pool_forward(&local, lengths)?;
    Ok(EncodedBatch { local, global, lengths: lengths.to_vec(), cache })
}

/// Gradients of a scalar loss with respect to the encoder parameters and the
/// input tensor, given its gradients with respect to the local and global
/// representations. The ReLU derivative at 0 is taken as 0.
pub fn encoder_backward<T: Real>(
    grad_local: Option<&Tensor3<T>>,
    grad_global: &Matrix<T>,
    encoded: &EncodedBatch<T>,
    params: &EncoderParams<T>,
    cfg: &EncoderConfig,
) -> Result<(EncoderParams<T>, Tensor3<T>)> {
    let cache = &encoded.cache;
    let [b, l_max, d_in] = cache.input.dims();
    let d_f = cfg.filters_per_window;
    let d = cfg.output_dim();
    let stale = grad_global.shape() != [b, d]
        || encoded.local.dims() != [b, l_max, d]
        || grad_local.is_some_and(|g| g.dims() != [b, l_max, d])
        || cache.pre.len() != params.layers.len()
        || cache.pre.iter().any(|p| p.dims() != [b, l_max, d_f])
        || d_in != cfg.d_in;
    if stale {
        return Err(Error::StaleCache);
    }
    params.check(cfg)?;
    let lengths = &cache.lengths;

    // Gradient reaching each local output, including the pooling share.
    let mut g_out = Tensor3::zeros(b, l_max, d);
    for (s, &len) in lengths.iter().enumerate() {
        let share = T::one() / T::lit(len.max(1) as f64);
        for i in 0..len {
            let dst = g_out.at_mut(s, i);
            if let Some(g) = grad_local {
                dst.copy_from_slice(g.at(s, i));
            }
            axpy(share, grad_global.row(s), dst);
        }
    }

    // Pre-activation gradient for (sentence, position, layer, filter).
    let g_pre = |s: usize, i: usize, li: usize, f: usize| -> T {
        if cache.pre[li].at(s, i)[f] > T::zero() {
            g_out.at(s, i)[li * d_f + f]
        } else {
            T::zero()
        }
    };

    let n_layers = params.layers.len();
    let filter_grads = par::map_indexed(n_layers * d_f, |job| {
        let (li, f) = (job / d_f, job % d_f);
        let layer = &params.layers[li];
        let half = (layer.window - 1) / 2;
        let mut dw = vec![T::zero(); layer.window * d_in];
        let mut db = T::zero();
        for (s, &len) in lengths.iter().enumerate() {
            for i in 0..len {
                let g = g_pre(s, i, li, f);
                if g == T::zero() {
                    continue;
                }
                let (lo, hi, first) = window_span(i, half, len);
                let x = cache.input.span(s, lo, hi);
                let woff = first * d_in;
                axpy(g, x, &mut dw[woff..woff + x.len()]);
                db = db + g;
            }
        }
        (dw, db)
    });

    let mut grads = EncoderParams::zeros(cfg);
    for (job, (dw, db)) in filter_grads.into_iter().enumerate() {
        let (li, f) = (job / d_f, job % d_f);
        grads.layers[li].weight.row_mut(f).copy_from_slice(&dw);
        grads.layers[li].bias[f] = db;
    }

    let input_grads = par::map_indexed(b, |s| {
        let len = lengths[s];
        let mut dh = vec![T::zero(); l_max * d_in];
        for (li, layer) in params.layers.iter().enumerate() {
            let half = (layer.window - 1) / 2;
            for i in 0..len {
                let (lo, hi, first) = window_span(i, half, len);
                let woff = first * d_in;
                let span = (hi - lo) * d_in;
                for f in 0..d_f {
                    let g = g_pre(s, i, li, f);
                    if g != T::zero() {
                        axpy(g, &layer.weight.row(f)[woff..woff + span], &mut dh[lo * d_in..hi * d_in]);
                    }
                }
            }
        }
        dh
    });
    let mut grad_input = Tensor3::zeros(b, l_max, d_in);
    for (s, dh) in input_grads.into_iter().enumerate() {
        grad_input.sentence_mut(s).copy_from_slice(&dh);
    }
    Ok((grads, grad_input))
}
