//! Feed-forward encoder: linear layers with ReLU in between, unit-norm output,
//! hand-written backward pass.

use std::io::{Cursor, Read};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{dot, norm, FeatureMatrix, Matrix, Seed, ZERO_NORM};

const BLOB_MAGIC: &[u8; 8] = b"MGCEENC\0";
const BLOB_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    /// `[d_in, h_1, …, d_out]`.
    pub layer_sizes: Vec<usize>,
    /// Skip every layer; output is the normalized (jittered) input.
    #[serde(default)]
    pub identity_mode: bool,
}

impl EncoderConfig {
    pub fn mlp(layer_sizes: Vec<usize>) -> Self {
        EncoderConfig {
            layer_sizes,
            identity_mode: false,
        }
    }

    pub fn identity(dim: usize) -> Self {
        EncoderConfig {
            layer_sizes: vec![dim, dim],
            identity_mode: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::config("layer_sizes needs at least an input and an output size"));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::config("layer sizes must be positive"));
        }
        if self.identity_mode && self.d_in() != self.d_out() {
            return Err(Error::config(format!(
                "identity mode needs d_in == d_out, got {} and {}",
                self.d_in(),
                self.d_out()
            )));
        }
        Ok(())
    }

    pub fn d_in(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn d_out(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }
}

/// `y = x·Wᵀ + b` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    fn zeros_like(&self) -> Linear {
        Linear {
            weight: Matrix::zeros(self.weight.rows(), self.weight.cols()),
            bias: vec![0.0; self.bias.len()],
        }
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.weight.rows());
        for r in 0..x.rows() {
            let xr = x.row(r);
            for (o, slot) in out.row_mut(r).iter_mut().enumerate() {
                *slot = dot(self.weight.row(o), xr) + self.bias[o];
            }
        }
        out
    }
}

/// Parameter gradients, laid out like [`Encoder::layers`].
pub type Gradients = Vec<Linear>;

#[derive(Debug, Clone)]
struct ForwardCache {
    /// Input to each layer (post-ReLU output of the previous one).
    inputs: Vec<Matrix>,
    /// Pre-activation output of each hidden layer.
    hidden_pre: Vec<Matrix>,
    /// Final pre-normalization output and its row norms.
    raw_out: Matrix,
    out_norms: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    config: EncoderConfig,
    layers: Vec<Linear>,
    cache: Option<ForwardCache>,
}

impl PartialEq for Encoder {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.layers == other.layers
    }
}

impl Encoder {
    /// He-uniform weights, zero biases.
    pub fn new(config: EncoderConfig, seed: Seed) -> Result<Self> {
        config.validate()?;
        let mut rng = seed.rng();
        let layers = if config.identity_mode {
            Vec::new()
        } else {
            config
                .layer_sizes
                .windows(2)
                .map(|w| {
                    let (fan_in, fan_out) = (w[0], w[1]);
                    let bound = (6.0 / fan_in as f64).sqrt();
                    let dist = Uniform::new(-bound, bound).expect("finite bound");
                    let data = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
                    Linear {
                        weight: Matrix::from_vec(fan_out, fan_in, data).expect("sized"),
                        bias: vec![0.0; fan_out],
                    }
                })
                .collect()
        };
        Ok(Encoder {
            config,
            layers,
            cache: None,
        })
    }

    pub fn from_layers(config: EncoderConfig, layers: Vec<Linear>) -> Result<Self> {
        config.validate()?;
        let expected = if config.identity_mode { 0 } else { config.layer_sizes.len() - 1 };
        if layers.len() != expected {
            return Err(Error::ShapeMismatch(format!("expected {expected} layers, got {}", layers.len())));
        }
        for (l, w) in layers.iter().zip(config.layer_sizes.windows(2)) {
            if l.weight.rows() != w[1] || l.weight.cols() != w[0] || l.bias.len() != w[1] {
                return Err(Error::ShapeMismatch(format!(
                    "layer {}x{} does not match sizes {}→{}",
                    l.weight.rows(),
                    l.weight.cols(),
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(Encoder {
            config,
            layers,
            cache: None,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.as_slice().len() + l.bias.len()).sum()
    }

    /// Parameter slices in a fixed order: per layer, weight then bias.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(l.weight.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    /// Inference without jitter or caching.
    pub fn encode(&self, raw: &FeatureMatrix) -> Result<FeatureMatrix> {
        let (out, _) = self.run(raw.as_matrix().clone())?;
        Ok(out)
    }

    /// Jitters the input with `N(0, σ²)`, runs the stack, normalizes rows and
    /// caches what [`Encoder::backward`] needs.
    pub fn forward<R: Rng + ?Sized>(&mut self, raw: &FeatureMatrix, jitter_sigma: f64, rng: &mut R) -> Result<FeatureMatrix> {
        let mut x = raw.as_matrix().clone();
        if jitter_sigma > 0.0 {
            let noise = Normal::new(0.0, jitter_sigma).map_err(|e| Error::config(e.to_string()))?;
            for v in x.as_mut_slice() {
                *v += noise.sample(rng);
            }
        } else if jitter_sigma < 0.0 {
            return Err(Error::config(format!("jitter sigma must be >= 0, got {jitter_sigma}")));
        }
        let (out, cache) = self.run(x)?;
        self.cache = Some(cache);
        Ok(out)
    }

    fn run(&self, x: Matrix) -> Result<(FeatureMatrix, ForwardCache)> {
        if x.cols() != self.config.d_in() {
            return Err(Error::DimMismatch {
                expected: self.config.d_in(),
                got: x.cols(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut hidden_pre = Vec::with_capacity(self.layers.len().saturating_sub(1));
        let mut h = x;
        for (li, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&h);
            inputs.push(h);
            if li + 1 < self.layers.len() {
                let mut a = z.clone();
                a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
                hidden_pre.push(z);
                h = a;
            } else {
                h = z;
            }
        }
        let raw_out = h;
        let mut out = raw_out.clone();
        let mut out_norms = Vec::with_capacity(out.rows());
        let mut all_unit = true;
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            // Zero rows stay zero instead of failing the whole batch.
            let raw_norm = norm(row);
            all_unit &= raw_norm >= ZERO_NORM;
            let n = raw_norm.max(ZERO_NORM);
            row.iter_mut().for_each(|v| *v /= n);
            out_norms.push(n);
        }
        let (rows, cols) = (out.rows(), out.cols());
        let features = FeatureMatrix::new(rows, cols, out.into_vec())?.with_unit_flag(all_unit);
        Ok((
            features,
            ForwardCache {
                inputs,
                hidden_pre,
                raw_out,
                out_norms,
            },
        ))
    }

    /// Gradients of every weight and bias given `∂L/∂y` for the normalized
    /// output rows of the last [`Encoder::forward`].
    pub fn backward(&self, upstream: &Matrix) -> Result<Gradients> {
        let cache = self.cache.as_ref().ok_or(Error::NoCachedForward)?;
        let (rows, d_out) = (cache.raw_out.rows(), cache.raw_out.cols());
        if upstream.rows() != rows || upstream.cols() != d_out {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient is {}x{}, expected {rows}x{d_out}",
                upstream.rows(),
                upstream.cols()
            )));
        }

        // Through y = z/‖z‖: g_z = (g − (g·y) y) / ‖z‖
        let mut g = Matrix::zeros(rows, d_out);
        for r in 0..rows {
            let n = cache.out_norms[r];
            let z = cache.raw_out.row(r);
            let up = upstream.row(r);
            let gy = dot(up, z) / n;
            for ((dst, &u), &zv) in g.row_mut(r).iter_mut().zip(up).zip(z) {
                *dst = (u - gy * zv / n) / n;
            }
        }

        let mut grads: Gradients = self.layers.iter().map(Linear::zeros_like).collect();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &cache.inputs[li];
            let grad = &mut grads[li];
            for r in 0..rows {
                let gr = g.row(r);
                let xr = input.row(r);
                for (o, &go) in gr.iter().enumerate() {
                    if go == 0.0 {
                        continue;
                    }
                    grad.bias[o] += go;
                    for (w, &x) in grad.weight.row_mut(o).iter_mut().zip(xr) {
                        *w += go * x;
                    }
                }
            }
            if li == 0 {
                break;
            }
            let pre = &cache.hidden_pre[li - 1];
            let mut next = Matrix::zeros(rows, layer.weight.cols());
            for r in 0..rows {
                let gr = g.row(r);
                let dst = next.row_mut(r);
                for (o, &go) in gr.iter().enumerate() {
                    if go == 0.0 {
                        continue;
                    }
                    for (d, &w) in dst.iter_mut().zip(layer.weight.row(o)) {
                        *d += go * w;
                    }
                }
                for (d, &p) in dst.iter_mut().zip(pre.row(r)) {
                    if p <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            g = next;
        }
        Ok(grads)
    }

    /// Little-endian blob: magic, version, identity flag, layer sizes, then per
    /// layer the row-major weights followed by the biases, all `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.num_params());
        out.extend_from_slice(BLOB_MAGIC);
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        out.push(u8::from(self.config.identity_mode));
        out.extend_from_slice(&(self.config.layer_sizes.len() as u32).to_le_bytes());
        for &s in &self.config.layer_sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for l in &self.layers {
            for v in l.weight.as_slice().iter().chain(&l.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 8];
        read_exact(&mut cur, &mut magic)?;
        if &magic != BLOB_MAGIC {
            return Err(Error::format(0, "bad encoder magic, expected MGCEENC"));
        }
        let version = read_u32(&mut cur)?;
        if version != BLOB_VERSION {
            return Err(Error::format(8, format!("unsupported encoder blob version {version}")));
        }
        let mut flag = [0u8; 1];
        read_exact(&mut cur, &mut flag)?;
        let identity_mode = match flag[0] {
            0 => false,
            1 => true,
            other => return Err(Error::format(12, format!("identity flag must be 0 or 1, got {other}"))),
        };
        let count = read_u32(&mut cur)? as usize;
        if count > 1024 {
            return Err(Error::format(13, format!("implausible layer count {count}")));
        }
        let sizes = (0..count).map(|_| read_u32(&mut cur).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let config = EncoderConfig {
            layer_sizes: sizes,
            identity_mode,
        };
        config.validate().map_err(|e| Error::format(17, e.to_string()))?;
        let mut layers = Vec::new();
        if !identity_mode {
            for w in config.layer_sizes.windows(2) {
                let weight = (0..w[0] * w[1]).map(|_| read_f64(&mut cur)).collect::<Result<Vec<_>>>()?;
                let bias = (0..w[1]).map(|_| read_f64(&mut cur)).collect::<Result<Vec<_>>>()?;
                layers.push(Linear {
                    weight: Matrix::from_vec(w[1], w[0], weight)?,
                    bias,
                });
            }
        }
        if (cur.position() as usize) != bytes.len() {
            return Err(Error::format(cur.position(), "trailing bytes after encoder parameters"));
        }
        Encoder::from_layers(config, layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn read_exact(cur: &mut Cursor<&[u8]>, buf: &mut [u8]) -> Result<()> {
    let at = cur.position();
    cur.read_exact(buf)
        .map_err(|_| Error::format(at, format!("truncated: needed {} more bytes", buf.len())))
}

fn read_u32(cur: &mut Cursor<&[u8]>) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(cur, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(cur: &mut Cursor<&[u8]>) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(cur, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::l2_normalize;

    fn raw(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    fn sample_input(seed: u64, n: usize, d: usize) -> FeatureMatrix {
        let mut rng = Seed(seed).rng();
        let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        FeatureMatrix::new(n, d, data).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(EncoderConfig::mlp(vec![4]).validate().is_err());
        assert!(EncoderConfig::mlp(vec![4, 0, 2]).validate().is_err());
        let mut id = EncoderConfig::identity(3);
        assert!(id.validate().is_ok());
        id.layer_sizes = vec![3, 4];
        assert!(id.validate().is_err());
    }

    #[test]
    fn identity_forward_normalizes() {
        let mut enc = Encoder::new(EncoderConfig::identity(2), Seed(0)).unwrap();
        let x = raw(&[vec![3.0, 4.0], vec![-1.0, 0.0]]);
        let y = enc.forward(&x, 0.0, &mut Seed(1).rng()).unwrap();
        assert_eq!(y, l2_normalize(&x).unwrap());
        assert!(enc.backward(&Matrix::zeros(2, 2)).unwrap().is_empty());
    }

    #[test]
    fn forward_without_jitter_is_deterministic() {
        let mut enc = Encoder::new(EncoderConfig::mlp(vec![5, 7, 3]), Seed(4)).unwrap();
        let x = sample_input(9, 6, 5);
        let a = enc.forward(&x, 0.0, &mut Seed(1).rng()).unwrap();
        let b = enc.forward(&x, 0.0, &mut Seed(2).rng()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, enc.encode(&x).unwrap());
        let c = enc.forward(&x, 0.1, &mut Seed(2).rng()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn positive_scaling_cancels_in_normalization() {
        let mut w = Matrix::zeros(3, 3);
        for i in 0..3 {
            w.set(i, i, 2.0);
        }
        let cfg = EncoderConfig::mlp(vec![3, 3]);
        let enc = Encoder::from_layers(
            cfg,
            vec![Linear {
                weight: w,
                bias: vec![0.0; 3],
            }],
        )
        .unwrap();
        let x = raw(&[vec![1.0, -2.0, 0.5], vec![0.1, 0.2, 0.3]]);
        let y = enc.encode(&x).unwrap();
        let expect = l2_normalize(&x).unwrap();
        for (a, b) in y.as_slice().iter().zip(expect.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn backward_edge_cases() {
        let mut enc = Encoder::new(EncoderConfig::mlp(vec![4, 6, 3]), Seed(2)).unwrap();
        assert!(matches!(enc.backward(&Matrix::zeros(2, 3)), Err(Error::NoCachedForward)));
        let x = sample_input(1, 2, 4);
        let y = enc.forward(&x, 0.0, &mut Seed(0).rng()).unwrap();

        let zero = enc.backward(&Matrix::zeros(2, 3)).unwrap();
        assert!(zero.iter().all(|l| l.weight.max_abs() == 0.0 && l.bias.iter().all(|&b| b == 0.0)));

        // radial upstream gradient is projected away
        let radial = Matrix::from_vec(2, 3, y.as_slice().iter().map(|v| 2.5 * v).collect()).unwrap();
        let g = enc.backward(&radial).unwrap();
        assert!(g.iter().all(|l| l.weight.max_abs() < 1e-12 && l.bias.iter().all(|b| b.abs() < 1e-12)));

        assert!(matches!(enc.backward(&Matrix::zeros(3, 3)), Err(Error::ShapeMismatch(_))));
        assert!(matches!(
            enc.forward(&sample_input(1, 2, 5), 0.0, &mut Seed(0).rng()),
            Err(Error::DimMismatch { expected: 4, got: 5 })
        ));
    }

    /// Central differences of `Σ c ⊙ y` against backward.
    #[test]
    fn backward_matches_finite_differences() {
        let cfg = EncoderConfig::mlp(vec![8, 8, 8]);
        let mut enc = Encoder::new(cfg, Seed(11)).unwrap();
        for l in enc.layers_mut() {
            for (k, b) in l.bias.iter_mut().enumerate() {
                *b = 0.05 * (k as f64 - 3.0);
            }
        }
        let x = sample_input(5, 5, 8);
        let mut rng = Seed(6).rng();
        let coef = Matrix::from_vec(5, 8, (0..40).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let objective = |e: &Encoder| -> f64 {
            let y = e.encode(&x).unwrap();
            y.as_slice().iter().zip(coef.as_slice()).map(|(a, b)| a * b).sum()
        };
        enc.forward(&x, 0.0, &mut rng).unwrap();
        let grads = enc.backward(&coef).unwrap();
        let h = 1e-6;
        let mut worst = 0.0f64;
        for li in 0..enc.layers().len() {
            let nw = enc.layers()[li].weight.as_slice().len();
            for k in 0..nw + enc.layers()[li].bias.len() {
                let analytic = if k < nw {
                    grads[li].weight.as_slice()[k]
                } else {
                    grads[li].bias[k - nw]
                };
                let probe = |delta: f64| {
                    let mut e = enc.clone();
                    let l = &mut e.layers_mut()[li];
                    if k < nw {
                        l.weight.as_mut_slice()[k] += delta;
                    } else {
                        l.bias[k - nw] += delta;
                    }
                    objective(&e)
                };
                let numeric = (probe(h) - probe(-h)) / (2.0 * h);
                if analytic.abs() > 1e-6 {
                    worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()));
                }
            }
        }
        assert!(worst <= 1e-4, "max relative error {worst}");
    }

    #[test]
    fn blob_round_trip_and_errors() {
        let enc = Encoder::new(EncoderConfig::mlp(vec![3, 5, 2]), Seed(8)).unwrap();
        let bytes = enc.to_bytes();
        assert_eq!(Encoder::from_bytes(&bytes).unwrap(), enc);
        assert!(matches!(Encoder::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Format { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Encoder::from_bytes(&bad), Err(Error::Format { offset: 0, .. })));
        let mut long = bytes;
        long.push(0);
        assert!(Encoder::from_bytes(&long).is_err());
        let id = Encoder::new(EncoderConfig::identity(4), Seed(0)).unwrap();
        assert_eq!(Encoder::from_bytes(&id.to_bytes()).unwrap(), id);
    }
}
