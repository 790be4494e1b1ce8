use std::fs;
use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Template, DEFAULT_MAX_SEQUENCE_LENGTH};
use crate::error::{Error, Result};

/// Layer sizes of the toy scorer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Width of the embedding table and of the pooled feature vector.
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    /// Number of rows of the hashed embedding table.
    pub buckets: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self { embedding_dim: 32, hidden_dim: 32, buckets: 4096 }
    }
}

impl Dims {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.hidden_dim == 0 || self.buckets == 0 {
            return Err(Error::InvalidInput(format!("zero dimension in {self:?}")));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let (d, h) = (self.embedding_dim, self.hidden_dim);
        self.buckets * d + d * h + h + h + 1
    }

    fn ranges(&self) -> [Range<usize>; 5] {
        let (d, h) = (self.embedding_dim, self.hidden_dim);
        let e = self.buckets * d;
        let w = e + d * h;
        let b = w + h;
        let o = b + h;
        [0..e, e..w, w..b, b..o, o..o + 1]
    }
}

/// Every trainable number of the toy scorer in one flat buffer.
///
/// Layout: embedding table (`buckets × d`, row-major), hidden weights
/// (`d × h`, row-major, row = input unit), hidden bias (`h`), output weights
/// (`h`), output bias (1). Gradients and optimizer moments use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    dims: Dims,
    data: Vec<f64>,
}

/// Mutable views of the five parameter groups.
pub struct WeightsMut<'a> {
    pub embedding: &'a mut [f64],
    pub hidden_weights: &'a mut [f64],
    pub hidden_bias: &'a mut [f64],
    pub output_weights: &'a mut [f64],
    pub output_bias: &'a mut f64,
}

impl Weights {
    pub fn zeros(dims: Dims) -> Self {
        Self { dims, data: vec![0.0; dims.param_count()] }
    }

    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.param_count() {
            return Err(Error::Shape(format!(
                "{} values for dims {dims:?} (expected {})",
                data.len(),
                dims.param_count()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn group(&self, i: usize) -> &[f64] {
        &self.data[self.dims.ranges()[i].clone()]
    }

    pub fn embedding(&self) -> &[f64] {
        self.group(0)
    }

    pub fn embedding_row(&self, bucket: usize) -> &[f64] {
        let d = self.dims.embedding_dim;
        &self.embedding()[bucket * d..(bucket + 1) * d]
    }

    pub fn hidden_weights(&self) -> &[f64] {
        self.group(1)
    }

    pub fn hidden_bias(&self) -> &[f64] {
        self.group(2)
    }

    pub fn output_weights(&self) -> &[f64] {
        self.group(3)
    }

    pub fn output_bias(&self) -> f64 {
        self.group(4)[0]
    }

    pub fn parts_mut(&mut self) -> WeightsMut<'_> {
        let [e, w, b, o, _] = self.dims.ranges();
        let (embedding, rest) = self.data.split_at_mut(e.end);
        let (hidden_weights, rest) = rest.split_at_mut(w.len());
        let (hidden_bias, rest) = rest.split_at_mut(b.len());
        let (output_weights, rest) = rest.split_at_mut(o.len());
        WeightsMut { embedding, hidden_weights, hidden_bias, output_weights, output_bias: &mut rest[0] }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A toy scorer: weights plus the preprocessing needed to score raw samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyScorerParams {
    pub weights: Weights,
    pub max_sequence_length: usize,
    pub template: Template,
    /// Seed the weights were initialised from.
    pub seed: u64,
}

impl ToyScorerParams {
    pub fn dims(&self) -> Dims {
        self.weights.dims()
    }

    /// All-zero parameters with the default preprocessing.
    pub fn zeros(dims: Dims) -> Self {
        Self {
            weights: Weights::zeros(dims),
            max_sequence_length: DEFAULT_MAX_SEQUENCE_LENGTH,
            template: Template::default(),
            seed: 0,
        }
    }
}

/// Fresh parameters. Weight matrices are uniform in `±1/√fan_in` (the
/// embedding table counts as fan-in 1), biases are zero.
pub fn init_params(dims: Dims, seed: u64) -> Result<ToyScorerParams> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ToyScorerParams::zeros(dims);
    params.seed = seed;
    let parts = params.weights.parts_mut();
    fill_uniform(&mut rng, parts.embedding, 1.0);
    fill_uniform(&mut rng, parts.hidden_weights, 1.0 / (dims.embedding_dim as f64).sqrt());
    fill_uniform(&mut rng, parts.output_weights, 1.0 / (dims.hidden_dim as f64).sqrt());
    Ok(params)
}

fn fill_uniform(rng: &mut impl Rng, values: &mut [f64], bound: f64) {
    for v in values {
        *v = rng.gen_range(-bound..bound);
    }
}

const PARAMS_FORMAT: &str = "sensemble-toy-params";
const PARAMS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamsFile<'a> {
    format: String,
    version: u32,
    dims: Dims,
    max_sequence_length: usize,
    template: Template,
    seed: u64,
    /// Whatever produced the weights (training config, CLI flags).
    #[serde(default)]
    provenance: serde_json::Value,
    embedding: std::borrow::Cow<'a, [f64]>,
    hidden_weights: std::borrow::Cow<'a, [f64]>,
    hidden_bias: std::borrow::Cow<'a, [f64]>,
    output_weights: std::borrow::Cow<'a, [f64]>,
    output_bias: f64,
}

impl ToyScorerParams {
    /// Writes a versioned JSON params file. `provenance` is stored verbatim.
    pub fn save(&self, path: impl AsRef<Path>, provenance: serde_json::Value) -> Result<()> {
        let w = &self.weights;
        let file = ParamsFile {
            format: PARAMS_FORMAT.into(),
            version: PARAMS_VERSION,
            dims: self.dims(),
            max_sequence_length: self.max_sequence_length,
            template: self.template.clone(),
            seed: self.seed,
            provenance,
            embedding: w.embedding().into(),
            hidden_weights: w.hidden_weights().into(),
            hidden_bias: w.hidden_bias().into(),
            output_weights: w.output_weights().into(),
            output_bias: w.output_bias(),
        };
        let text = serde_json::to_string(&file).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path.as_ref(), text).map_err(|e| Error::io(path.as_ref(), e))
    }

    /// Reads a params file, checking layer sizes against the stored dims.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, serde_json::Value)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ParamsFile =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if file.format != PARAMS_FORMAT || file.version != PARAMS_VERSION {
            return Err(Error::Format(format!(
                "{}: unsupported params file {} v{}",
                path.display(),
                file.format,
                file.version
            )));
        }
        file.dims.validate()?;
        let [e, w, b, o, _] = file.dims.ranges();
        let groups = [
            ("embedding", &file.embedding, e.len()),
            ("hidden_weights", &file.hidden_weights, w.len()),
            ("hidden_bias", &file.hidden_bias, b.len()),
            ("output_weights", &file.output_weights, o.len()),
        ];
        let mut data = Vec::with_capacity(file.dims.param_count());
        for (name, values, expected) in groups {
            if values.len() != expected {
                return Err(Error::Shape(format!(
                    "{name} has {} values, dims {:?} need {expected}",
                    values.len(),
                    file.dims
                )));
            }
            data.extend_from_slice(values);
        }
        data.push(file.output_bias);
        let weights = Weights::from_vec(file.dims, data)?;
        if !weights.is_finite() {
            return Err(Error::Numeric(format!("{}: non-finite parameter", path.display())));
        }
        let params = ToyScorerParams {
            weights,
            max_sequence_length: file.max_sequence_length,
            template: file.template,
            seed: file.seed,
        };
        Ok((params, file.provenance))
    }
}
