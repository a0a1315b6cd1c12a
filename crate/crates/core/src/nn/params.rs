use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Architecture, BankSpec, Variant};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Filters of one height, one row per filter holding the flattened
/// `height × width` kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank<T> {
    pub height: usize,
    pub width: usize,
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> FilterBank<T> {
    pub fn zeros(spec: BankSpec, width: usize) -> Self {
        FilterBank {
            height: spec.height,
            width,
            weights: Array2::zeros((spec.filters, spec.height * width)),
            bias: Array1::zeros(spec.filters),
        }
    }

    pub fn filters(&self) -> usize {
        self.weights.nrows()
    }
}

/// Every trainable tensor of the network. Also used, zero-filled, as the
/// gradient and optimizer-moment containers.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub variant: Variant,
    pub arch: Architecture,
    /// Vocabulary × n; empty for the knowledge-only variant.
    pub embedding: Array2<T>,
    pub text_banks: Vec<FilterBank<T>>,
    pub knowledge_bank: Option<FilterBank<T>>,
    /// hidden × pooled features.
    pub dense_w: Array2<T>,
    pub dense_b: Array1<T>,
    pub out_w: Array1<T>,
    pub out_b: Array1<T>,
}

/// Borrowed view of one parameter tensor.
pub struct ParamGroup<'a, T> {
    pub name: String,
    pub values: &'a [T],
}

pub struct ParamGroupMut<'a, T> {
    pub name: String,
    pub values: &'a mut [T],
}

fn uniform<T: Scalar>(rng: &mut ChaCha8Rng, shape: (usize, usize), limit: f64) -> Array2<T> {
    Array2::from_shape_simple_fn(shape, || T::lit(rng.random_range(-limit..=limit)))
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(arch: &Architecture, variant: Variant, vocab_size: usize) -> Result<Self> {
        arch.validate(variant)?;
        let (embedding, text_banks) = if variant.uses_text() {
            (
                Array2::zeros((vocab_size, arch.embedding_dim)),
                arch.text_banks.iter().map(|&b| FilterBank::zeros(b, arch.embedding_dim)).collect(),
            )
        } else {
            (Array2::zeros((0, 0)), Vec::new())
        };
        let knowledge_bank =
            variant.uses_knowledge().then(|| FilterBank::zeros(arch.knowledge_bank, crate::centrality::EIK_COLUMNS));
        let pooled = arch.pooled_features(variant);
        Ok(ModelParams {
            variant,
            arch: arch.clone(),
            embedding,
            text_banks,
            knowledge_bank,
            dense_w: Array2::zeros((arch.hidden, pooled)),
            dense_b: Array1::zeros(arch.hidden),
            out_w: Array1::zeros(arch.hidden),
            out_b: Array1::zeros(1),
        })
    }

    /// Seeded Glorot-uniform initialization with zero biases. Filters span
    /// the full input width, so a bank counts as a 1-D convolution:
    /// fan-in `h·width`, fan-out `h·filters`. `embedding` supplies the
    /// word table (ignored by the knowledge-only variant).
    pub fn init(arch: &Architecture, variant: Variant, embedding: Option<Array2<T>>, seed: u64) -> Result<Self> {
        let vocab_size = embedding.as_ref().map_or(0, |e| e.nrows());
        let mut p = Self::zeros(arch, variant, vocab_size)?;
        if variant.uses_text() {
            let e = embedding.ok_or_else(|| Error::Config("text branch needs an embedding table".into()))?;
            if e.ncols() != arch.embedding_dim {
                return Err(Error::Shape(format!(
                    "embedding table has {} columns, architecture expects {}",
                    e.ncols(),
                    arch.embedding_dim
                )));
            }
            p.embedding = e;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for bank in p.text_banks.iter_mut().chain(p.knowledge_bank.as_mut()) {
            let fan_in = bank.height * bank.width;
            let fan_out = bank.height * bank.filters();
            bank.weights = uniform(&mut rng, bank.weights.dim(), (6.0 / (fan_in + fan_out) as f64).sqrt());
        }
        let (hidden, pooled) = p.dense_w.dim();
        p.dense_w = uniform(&mut rng, p.dense_w.dim(), (6.0 / (pooled + hidden) as f64).sqrt());
        let limit = (6.0 / (arch.hidden as f64 + 1.0)).sqrt();
        p.out_w = Array1::from_shape_simple_fn(arch.hidden, || T::lit(rng.random_range(-limit..=limit)));
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for g in z.groups_mut() {
            g.values.fill(T::zero());
        }
        z
    }

    /// Every tensor as a flat mutable slice, in a fixed order.
    pub fn groups_mut(&mut self) -> Vec<ParamGroupMut<'_, T>> {
        fn g<'a, T>(name: String, values: &'a mut [T]) -> ParamGroupMut<'a, T> {
            ParamGroupMut { name, values }
        }
        const LAYOUT: &str = "parameters are kept in standard layout";
        let mut out = vec![g("embedding".into(), self.embedding.as_slice_mut().expect(LAYOUT))];
        for (i, b) in self.text_banks.iter_mut().enumerate() {
            out.push(g(format!("text{i}.weights"), b.weights.as_slice_mut().expect(LAYOUT)));
            out.push(g(format!("text{i}.bias"), b.bias.as_slice_mut().expect(LAYOUT)));
        }
        if let Some(b) = self.knowledge_bank.as_mut() {
            out.push(g("knowledge.weights".into(), b.weights.as_slice_mut().expect(LAYOUT)));
            out.push(g("knowledge.bias".into(), b.bias.as_slice_mut().expect(LAYOUT)));
        }
        out.push(g("dense.weights".into(), self.dense_w.as_slice_mut().expect(LAYOUT)));
        out.push(g("dense.bias".into(), self.dense_b.as_slice_mut().expect(LAYOUT)));
        out.push(g("out.weights".into(), self.out_w.as_slice_mut().expect(LAYOUT)));
        out.push(g("out.bias".into(), self.out_b.as_slice_mut().expect(LAYOUT)));
        out
    }

    /// Every tensor as a flat slice, in the same order as [`groups_mut`](Self::groups_mut).
    pub fn groups(&self) -> Vec<ParamGroup<'_, T>> {
        fn g<'a, T>(name: String, values: &'a [T]) -> ParamGroup<'a, T> {
            ParamGroup { name, values }
        }
        const LAYOUT: &str = "parameters are kept in standard layout";
        let mut out = vec![g("embedding".into(), self.embedding.as_slice().expect(LAYOUT))];
        for (i, b) in self.text_banks.iter().enumerate() {
            out.push(g(format!("text{i}.weights"), b.weights.as_slice().expect(LAYOUT)));
            out.push(g(format!("text{i}.bias"), b.bias.as_slice().expect(LAYOUT)));
        }
        if let Some(b) = &self.knowledge_bank {
            out.push(g("knowledge.weights".into(), b.weights.as_slice().expect(LAYOUT)));
            out.push(g("knowledge.bias".into(), b.bias.as_slice().expect(LAYOUT)));
        }
        out.push(g("dense.weights".into(), self.dense_w.as_slice().expect(LAYOUT)));
        out.push(g("dense.bias".into(), self.dense_b.as_slice().expect(LAYOUT)));
        out.push(g("out.weights".into(), self.out_w.as_slice().expect(LAYOUT)));
        out.push(g("out.bias".into(), self.out_b.as_slice().expect(LAYOUT)));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.groups().iter().map(|g| g.values.len()).sum()
    }

    /// Group sizes in visiting order; two parameter sets are congruent iff
    /// these agree.
    pub fn layout(&self) -> Vec<usize> {
        self.groups().iter().map(|g| g.values.len()).collect()
    }

    pub fn check_congruent(&self, other: &Self) -> Result<()> {
        if self.variant != other.variant || self.layout() != other.layout() {
            return Err(Error::Shape("parameter sets are not congruent".into()));
        }
        Ok(())
    }

    /// Accumulates `other` into `self` elementwise.
    pub fn add_assign(&mut self, other: &Self) {
        for (dst, src) in self.groups_mut().into_iter().zip(other.groups()) {
            for (a, &b) in dst.values.iter_mut().zip(src.values) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for g in self.groups_mut() {
            g.values.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Replaces all values from a flat iterator in [`groups`](Self::groups) order.
    pub fn load_flat(&mut self, mut values: impl Iterator<Item = T>) -> Result<()> {
        for g in self.groups_mut() {
            for d in g.values.iter_mut() {
                *d = values
                    .next()
                    .ok_or_else(|| Error::Shape("flat parameter count does not match the architecture".into()))?;
            }
        }
        if values.next().is_some() {
            return Err(Error::Shape("flat parameter count does not match the architecture".into()));
        }
        Ok(())
    }
}
