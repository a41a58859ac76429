use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const ADAPTER_HIDDEN: usize = 256;

/// Two affine layers with `tanh` between them, mapping semantic vectors to
/// tangent coordinates at the origin.
///
/// Parameters live in one flat buffer laid out as `W1 (hidden × in)`, `b1`,
/// `W2 (out × hidden)`, `b2`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Adapter {
    input: usize,
    hidden: usize,
    output: usize,
    params: Vec<f64>,
}

/// Hidden activations saved by [`Adapter::forward`].
#[derive(Debug, Clone)]
pub struct AdapterCache {
    hidden: Vec<f64>,
}

impl Adapter {
    pub fn param_count(input: usize, hidden: usize, output: usize) -> usize {
        hidden * input + hidden + output * hidden + output
    }

    /// Xavier-uniform weights, zero biases.
    pub fn new(input: usize, hidden: usize, output: usize, seed: u64) -> Result<Self> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(Error::InvalidParameter(format!(
                "adapter shape {input}x{hidden}x{output} has an empty layer"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; Self::param_count(input, hidden, output)];
        let a1 = (6.0 / (input + hidden) as f64).sqrt();
        for w in &mut params[..hidden * input] {
            *w = rng.random_range(-a1..a1);
        }
        let a2 = (6.0 / (hidden + output) as f64).sqrt();
        let off = hidden * input + hidden;
        for w in &mut params[off..off + output * hidden] {
            *w = rng.random_range(-a2..a2);
        }
        Ok(Self {
            input,
            hidden,
            output,
            params,
        })
    }

    pub fn from_params(input: usize, hidden: usize, output: usize, params: Vec<f64>) -> Result<Self> {
        Error::check_dim(Self::param_count(input, hidden, output), params.len())?;
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite adapter parameter".into()));
        }
        Ok(Self {
            input,
            hidden,
            output,
            params,
        })
    }

    pub fn input(&self) -> usize {
        self.input
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn output(&self) -> usize {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let (w1, rest) = self.params.split_at(self.hidden * self.input);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.output * self.hidden);
        (w1, b1, w2, b2)
    }

    pub fn forward(&self, e: &[f64], out: &mut [f64]) -> AdapterCache {
        debug_assert_eq!(e.len(), self.input);
        let (w1, b1, w2, b2) = self.split();
        let hidden: Vec<f64> = w1
            .chunks(self.input)
            .zip(b1)
            .map(|(row, b)| (row.iter().zip(e).map(|(w, x)| w * x).sum::<f64>() + b).tanh())
            .collect();
        for ((o, row), b) in out.iter_mut().zip(w2.chunks(self.hidden)).zip(b2) {
            *o = row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + b;
        }
        AdapterCache { hidden }
    }

    /// Accumulate the parameter gradient for output cotangent `g_out`.
    pub fn backward(&self, e: &[f64], cache: &AdapterCache, g_out: &[f64], g_params: &mut [f64]) {
        let (_, _, w2, _) = self.split();
        let (n_in, n_h) = (self.input, self.hidden);
        let (g_w1, rest) = g_params.split_at_mut(n_h * n_in);
        let (g_b1, rest) = rest.split_at_mut(n_h);
        let (g_w2, g_b2) = rest.split_at_mut(self.output * n_h);
        let mut g_hidden = vec![0.0; n_h];
        for (o, &go) in g_out.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            g_b2[o] += go;
            let row = &w2[o * n_h..(o + 1) * n_h];
            let g_row = &mut g_w2[o * n_h..(o + 1) * n_h];
            for k in 0..n_h {
                g_row[k] += go * cache.hidden[k];
                g_hidden[k] += go * row[k];
            }
        }
        for k in 0..n_h {
            let g_pre = g_hidden[k] * (1.0 - cache.hidden[k] * cache.hidden[k]);
            if g_pre == 0.0 {
                continue;
            }
            g_b1[k] += g_pre;
            for (g, x) in g_w1[k * n_in..(k + 1) * n_in].iter_mut().zip(e) {
                *g += g_pre * x;
            }
        }
    }
}
