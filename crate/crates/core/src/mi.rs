//! Discriminator over (local, global) pairs and the Jensen-Shannon mutual
//! information bound estimated with in-batch negatives.
//!
//! For sentence `x` with global vector `g_x` and `l_x` tokens, every one of its
//! own tokens forms a positive pair with `g_x`; every token of every *other*
//! sentence in the batch forms a negative pair. The per-sentence value is
//!
//! ```text
//! mean_{i in x} -sp(-T(f_i, g_x))  -  mean_{j not in x} sp(T(f_j, g_x))
//! ```
//!
//! where `sp` is softplus. Without length normalization it is multiplied by
//! `l_x`, i.e. summed over the sentence's positions. The batch objective is
//! the mean over sentences and is always negative; training minimizes its
//! negation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::encoder::EncodedBatch;
use crate::error::{Error, Result};
use crate::par;
use crate::real::{axpy, dot, relu, Real};
use crate::rng;
use crate::tensor::{Matrix, Tensor3};

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus<T: Real>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp_libm().ln_1p_libm()
}

#[inline]
pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp_libm())
    } else {
        let e = z.exp_libm();
        e / (T::one() + e)
    }
}

/// `T(f, g) = u · ReLU(W1 [f; g] + b1) + b0`, with `W1` of shape `d_h x 2d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorParams<T> {
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    pub u: Vec<T>,
    pub b0: T,
}

impl<T: Real> DiscriminatorParams<T> {
    pub fn init(d: usize, d_h: usize, seed: u64) -> Result<Self> {
        if d == 0 || d_h == 0 {
            return Err(Error::InvalidConfig("discriminator widths must be positive".into()));
        }
        let mut rng = rng::seeded(seed, rng::stream::DISCRIMINATOR);
        let wb = libm::sqrt(6.0 / (2 * d + d_h) as f64);
        let w1 = (0..d_h * 2 * d).map(|_| rng::uniform::<T>(&mut rng, wb)).collect();
        let ub = libm::sqrt(6.0 / (d_h + 1) as f64);
        let u = (0..d_h).map(|_| rng::uniform::<T>(&mut rng, ub)).collect();
        Ok(Self { w1: Matrix::from_vec(d_h, 2 * d, w1)?, b1: vec![T::zero(); d_h], u, b0: T::zero() })
    }

    pub fn zeros(d: usize, d_h: usize) -> Self {
        Self { w1: Matrix::zeros(d_h, 2 * d), b1: vec![T::zero(); d_h], u: vec![T::zero(); d_h], b0: T::zero() }
    }

    /// Width of the representations it scores.
    pub fn rep_dim(&self) -> usize {
        self.w1.cols() / 2
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn check(&self, d: usize) -> Result<()> {
        let h = self.hidden();
        if self.w1.cols() != 2 * d || self.b1.len() != h || self.u.len() != h {
            return Err(Error::ShapeMismatch(format!(
                "discriminator {}x{} does not score width {d}",
                h,
                self.w1.cols()
            )));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> DiscriminatorParams<U> {
        let c = |v: &[T]| v.iter().map(|&x| U::lit(x.as_f64())).collect();
        DiscriminatorParams {
            w1: self.w1.map(|x| U::lit(x.as_f64())),
            b1: c(&self.b1),
            u: c(&self.u),
            b0: U::lit(self.b0.as_f64()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCache<T> {
    pub hidden_pre: Vec<T>,
}

/// Scores one pair.
pub fn discriminator_score<T: Real>(
    local: &[T],
    global: &[T],
    params: &DiscriminatorParams<T>,
) -> Result<(T, ScoreCache<T>)> {
    let d = params.rep_dim();
    if local.len() != d || global.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "pair widths {} and {}, discriminator expects {d}",
            local.len(),
            global.len()
        )));
    }
    params.check(d)?;
    let hidden_pre: Vec<T> = (0..params.hidden())
        .map(|r| {
            let w = params.w1.row(r);
            params.b1[r] + dot(&w[..d], local) + dot(&w[d..], global)
        })
        .collect();
    let score = params.b0 + hidden_pre.iter().zip(&params.u).map(|(&z, &u)| u * relu(z)).sum::<T>();
    Ok((score, ScoreCache { hidden_pre }))
}

/// Scores of every (global, token) pair in a batch plus the projections
/// needed to differentiate them.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScores<T> {
    /// `B x N` where `N` counts real tokens in the batch.
    pub scores: Matrix<T>,
    /// Sentence owning each token column.
    pub owner: Vec<usize>,
    /// `(sentence, position)` of each token column.
    pub positions: Vec<(usize, usize)>,
    /// `W1[:, :d] f_j`, `N x d_h`.
    proj_local: Matrix<T>,
    /// `W1[:, d:] g_x + b1`, `B x d_h`.
    proj_global: Matrix<T>,
    lengths: Vec<usize>,
    length_norm: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiBatchResult<T> {
    pub objective: T,
    pub per_sentence: Vec<T>,
    pub cache: PairScores<T>,
}

/// Token positions in batch order, owner sentence for each, and `N_x` (the
/// number of tokens belonging to other sentences).
fn token_columns(lengths: &[usize]) -> (Vec<(usize, usize)>, Vec<usize>) {
    let positions: Vec<(usize, usize)> =
        lengths.iter().enumerate().flat_map(|(s, &l)| (0..l).map(move |i| (s, i))).collect();
    let owner = positions.iter().map(|&(s, _)| s).collect();
    (positions, owner)
}

pub fn jsd_batch<T: Real>(
    encoded: &EncodedBatch<T>,
    params: &DiscriminatorParams<T>,
    length_norm: bool,
) -> Result<MiBatchResult<T>> {
    let b = encoded.batch_size();
    if b < 2 {
        return Err(Error::BatchTooSmall(b));
    }
    if let Some(s) = encoded.lengths.iter().position(|&l| l == 0) {
        return Err(Error::EmptyMask(s));
    }
    let d = encoded.global.cols();
    params.check(d)?;
    let d_h = params.hidden();
    let (positions, owner) = token_columns(&encoded.lengths);
    let n = positions.len();

    let proj_local = par::map_indexed(n, |j| {
        let (s, i) = positions[j];
        let f = encoded.local.at(s, i);
        (0..d_h).map(|r| dot(&params.w1.row(r)[..d], f)).collect::<Vec<T>>()
    });
    let proj_local = Matrix::from_rows(&proj_local)?;
    let proj_global = par::map_indexed(b, |x| {
        let g = encoded.global.row(x);
        (0..d_h).map(|r| params.b1[r] + dot(&params.w1.row(r)[d..], g)).collect::<Vec<T>>()
    });
    let proj_global = Matrix::from_rows(&proj_global)?;

    let rows = par::map_indexed(b, |x| {
        let c = proj_global.row(x);
        (0..n)
            .map(|j| {
                let a = proj_local.row(j);
                let mut t = params.b0;
                for r in 0..d_h {
                    t = t + params.u[r] * relu(a[r] + c[r]);
                }
                t
            })
            .collect::<Vec<T>>()
    });
    let scores = Matrix::from_rows(&rows)?;

    let per_sentence: Vec<T> = (0..b)
        .map(|x| {
            let (pos, neg) = sentence_terms(scores.row(x), &owner, x);
            let l_x = encoded.lengths[x];
            let n_x = n - l_x;
            let v = pos / T::lit(l_x as f64) - neg / T::lit(n_x as f64);
            if length_norm {
                v
            } else {
                v * T::lit(l_x as f64)
            }
        })
        .collect();
    let objective = per_sentence.iter().copied().sum::<T>() / T::lit(b as f64);
    Ok(MiBatchResult {
        objective,
        per_sentence,
        cache: PairScores {
            scores,
            owner,
            positions,
            proj_local,
            proj_global,
            lengths: encoded.lengths.clone(),
            length_norm,
        },
    })
}

/// `(sum of -sp(-T) over own tokens, sum of sp(T) over other tokens)`.
fn sentence_terms<T: Real>(row: &[T], owner: &[usize], x: usize) -> (T, T) {
    let mut pos = T::zero();
    let mut neg = T::zero();
    for (&t, &o) in row.iter().zip(owner) {
        if o == x {
            pos = pos - softplus(-t);
        } else {
            neg = neg + softplus(t);
        }
    }
    (pos, neg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiGradients<T> {
    pub discriminator: DiscriminatorParams<T>,
    pub grad_local: Tensor3<T>,
    pub grad_global: Matrix<T>,
}

/// Gradients of `loss = -objective`.
pub fn jsd_backward<T: Real>(
    result: &MiBatchResult<T>,
    encoded: &EncodedBatch<T>,
    params: &DiscriminatorParams<T>,
) -> Result<MiGradients<T>> {
    let cache = &result.cache;
    let b = encoded.batch_size();
    let d = encoded.global.cols();
    let d_h = params.hidden();
    let n = cache.owner.len();
    if cache.lengths != encoded.lengths
        || cache.scores.shape() != [b, n]
        || cache.proj_local.shape() != [n, d_h]
        || cache.proj_global.shape() != [b, d_h]
        || params.rep_dim() != d
    {
        return Err(Error::StaleCache);
    }

    // dLoss/dT for every pair.
    let inv_b = T::one() / T::lit(b as f64);
    let mut d_scores = Matrix::zeros(b, n);
    for x in 0..b {
        let l_x = cache.lengths[x];
        let weight = if cache.length_norm { inv_b } else { inv_b * T::lit(l_x as f64) };
        let pos_w = weight / T::lit(l_x as f64);
        let neg_w = weight / T::lit((n - l_x) as f64);
        let row = cache.scores.row(x);
        for (j, dt) in d_scores.row_mut(x).iter_mut().enumerate() {
            let t = row[j];
            *dt = if cache.owner[j] == x { -pos_w * sigmoid(-t) } else { neg_w * sigmoid(t) };
        }
    }

    // Per global row: hidden-layer gradient, and partial u / b0 gradients.
    let row_parts = par::map_indexed(b, |x| {
        let c = cache.proj_global.row(x);
        let mut g_c = vec![T::zero(); d_h];
        let mut du = vec![T::zero(); d_h];
        let mut db0 = T::zero();
        for j in 0..n {
            let dt = d_scores.get(x, j);
            let a = cache.proj_local.row(j);
            db0 = db0 + dt;
            for r in 0..d_h {
                let z = a[r] + c[r];
                if z > T::zero() {
                    du[r] = du[r] + dt * z;
                    g_c[r] = g_c[r] + dt * params.u[r];
                }
            }
        }
        (g_c, du, db0)
    });
    // Per token column: hidden-layer gradient.
    let g_a = par::map_indexed(n, |j| {
        let a = cache.proj_local.row(j);
        let mut g = vec![T::zero(); d_h];
        for x in 0..b {
            let dt = d_scores.get(x, j);
            let c = cache.proj_global.row(x);
            for r in 0..d_h {
                if a[r] + c[r] > T::zero() {
                    g[r] = g[r] + dt * params.u[r];
                }
            }
        }
        g
    });

    let mut grads = DiscriminatorParams::zeros(d, d_h);
    let mut g_c = Vec::with_capacity(b);
    for (gc, du, db0) in row_parts {
        axpy(T::one(), &du, &mut grads.u);
        axpy(T::one(), &gc, &mut grads.b1);
        grads.b0 = grads.b0 + db0;
        g_c.push(gc);
    }

    let w1_rows = par::map_indexed(d_h, |r| {
        let mut row = vec![T::zero(); 2 * d];
        let (left, right) = row.split_at_mut(d);
        for (j, &(s, i)) in cache.positions.iter().enumerate() {
            let g = g_a[j][r];
            if g != T::zero() {
                axpy(g, encoded.local.at(s, i), left);
            }
        }
        for (x, gc) in g_c.iter().enumerate() {
            if gc[r] != T::zero() {
                axpy(gc[r], encoded.global.row(x), right);
            }
        }
        row
    });
    for (r, row) in w1_rows.into_iter().enumerate() {
        grads.w1.row_mut(r).copy_from_slice(&row);
    }

    let local_rows = par::map_indexed(n, |j| {
        let mut out = vec![T::zero(); d];
        for (r, &g) in g_a[j].iter().enumerate() {
            if g != T::zero() {
                axpy(g, &params.w1.row(r)[..d], &mut out);
            }
        }
        out
    });
    let mut grad_local = Tensor3::zeros(b, encoded.local.dims()[1], d);
    for (&(s, i), row) in cache.positions.iter().zip(local_rows) {
        grad_local.at_mut(s, i).copy_from_slice(&row);
    }
    let mut grad_global = Matrix::zeros(b, d);
    for (x, gc) in g_c.iter().enumerate() {
        let out = grad_global.row_mut(x);
        for (r, &g) in gc.iter().enumerate() {
            if g != T::zero() {
                axpy(g, &params.w1.row(r)[d..], out);
            }
        }
    }
    Ok(MiGradients { discriminator: grads, grad_local, grad_global })
}
