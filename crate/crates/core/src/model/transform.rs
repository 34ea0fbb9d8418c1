use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// `out = A u + W2 tanh(W1 u + b1) + b2`: a two-layer tanh network with a
/// linear skip path.
///
/// The output layer and skip start at zero, so a fresh module is the zero
/// map.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformModule {
    input: usize,
    hidden: usize,
    output: usize,
    params: Vec<f64>,
}

/// Hidden activations kept from a forward pass for [`TransformModule::backward`].
pub struct ForwardCache {
    act: Vec<f64>,
}

impl TransformModule {
    pub fn param_count(input: usize, hidden: usize, output: usize) -> usize {
        hidden * input + hidden + output * hidden + output + output * input
    }

    pub fn new(input: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Self {
        let mut params = vec![0.0; Self::param_count(input, hidden, output)];
        let scale = 1.0 / (input as f64).sqrt();
        for w in &mut params[..hidden * input] {
            *w = scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
        }
        TransformModule { input, hidden, output, params }
    }

    pub fn from_params(input: usize, hidden: usize, output: usize, params: Vec<f64>) -> Option<Self> {
        (params.len() == Self::param_count(input, hidden, output)).then_some(TransformModule { input, hidden, output, params })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> [usize; 5] {
        let (i, h, o) = (self.input, self.hidden, self.output);
        let w1 = 0;
        let b1 = w1 + h * i;
        let w2 = b1 + h;
        let b2 = w2 + o * h;
        let a = b2 + o;
        [w1, b1, w2, b2, a]
    }

    /// Sets the skip matrix and output bias, e.g. from a least-squares fit.
    pub fn set_linear(&mut self, skip: &[f64], bias: &[f64]) {
        let [_, _, _, b2, a] = self.offsets();
        self.params[a..a + self.output * self.input].copy_from_slice(skip);
        self.params[b2..b2 + self.output].copy_from_slice(bias);
    }

    /// Overwrites hidden unit `j`: its input row, bias and output column.
    pub fn set_hidden_unit(&mut self, j: usize, w_in: &[f64], bias: f64, w_out: &[f64]) {
        let [w1, b1, w2, _, _] = self.offsets();
        self.params[w1 + j * self.input..w1 + (j + 1) * self.input].copy_from_slice(w_in);
        self.params[b1 + j] = bias;
        for (k, &w) in w_out.iter().enumerate() {
            self.params[w2 + k * self.hidden + j] = w;
        }
    }

    /// Multiplies the output by `s` (second layer, output bias and skip).
    pub fn scale_output(&mut self, s: f64) {
        let [_, _, w2, _, _] = self.offsets();
        self.params[w2..].iter_mut().for_each(|p| *p *= s);
    }

    pub fn forward(&self, u: &[f64]) -> (Vec<f64>, ForwardCache) {
        debug_assert_eq!(u.len(), self.input);
        let [w1, b1, w2, b2, a] = self.offsets();
        let p = &self.params;
        let act: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &p[w1 + j * self.input..w1 + (j + 1) * self.input];
                (dot(row, u) + p[b1 + j]).tanh()
            })
            .collect();
        let out = (0..self.output)
            .map(|k| {
                let w2row = &p[w2 + k * self.hidden..w2 + (k + 1) * self.hidden];
                let arow = &p[a + k * self.input..a + (k + 1) * self.input];
                dot(w2row, &act) + p[b2 + k] + dot(arow, u)
            })
            .collect();
        (out, ForwardCache { act })
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.forward(u).0
    }

    /// Accumulates `d loss / d params` into `grad` and returns
    /// `d loss / d u`, given `gout = d loss / d out`.
    pub fn backward(&self, u: &[f64], cache: &ForwardCache, gout: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let [w1, b1, w2, b2, a] = self.offsets();
        let p = &self.params;
        let (i_n, h_n) = (self.input, self.hidden);
        let mut gu = vec![0.0; i_n];
        let mut gact = vec![0.0; h_n];
        for (k, &g) in gout.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[b2 + k] += g;
            for j in 0..h_n {
                grad[w2 + k * h_n + j] += g * cache.act[j];
                gact[j] += g * p[w2 + k * h_n + j];
            }
            for i in 0..i_n {
                grad[a + k * i_n + i] += g * u[i];
                gu[i] += g * p[a + k * i_n + i];
            }
        }
        for j in 0..h_n {
            let gpre = gact[j] * (1.0 - cache.act[j] * cache.act[j]);
            if gpre == 0.0 {
                continue;
            }
            grad[b1 + j] += gpre;
            for i in 0..i_n {
                grad[w1 + j * i_n + i] += gpre * u[i];
                gu[i] += gpre * p[w1 + j * i_n + i];
            }
        }
        gu
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
