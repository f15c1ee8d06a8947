use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, NnError, Tensor, Var};
use crate::neighborhood::{GroupIndex, GroupedBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
    Sigmoid,
}

/// Layer widths including the input width, with one activation per affine layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self, NnError> {
        let s = Self {
            widths,
            activations,
        };
        s.validate()?;
        Ok(s)
    }

    /// Hidden layers use ReLU, the output layer `last`.
    pub fn chain(widths: &[usize], last: Activation) -> Result<Self, NnError> {
        let n = widths.len().saturating_sub(1);
        let mut acts = vec![Activation::Relu; n];
        if let Some(a) = acts.last_mut() {
            *a = last;
        }
        Self::new(widths.to_vec(), acts)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.widths.len() < 2 {
            return Err(NnError::InvalidSpec(
                "an MLP needs at least one layer".into(),
            ));
        }
        if self.widths.contains(&0) {
            return Err(NnError::InvalidSpec(format!(
                "widths must be positive: {:?}",
                self.widths
            )));
        }
        if self.activations.len() != self.widths.len() - 1 {
            return Err(NnError::InvalidSpec(format!(
                "{} activations for {} layers",
                self.activations.len(),
                self.widths.len() - 1
            )));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    /// `(weight in x out, bias 1 x out)` per layer.
    pub layers: Vec<(ParamId, ParamId)>,
}

impl Mlp {
    /// He-uniform weights before ReLU, Xavier-uniform otherwise, zero biases.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        spec: MlpSpec,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NnError> {
        spec.validate()?;
        let mut layers = Vec::new();
        for (l, w) in spec.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = match spec.activations[l] {
                Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            };
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            let wid = store.add(
                format!("{name}.{l}.weight"),
                Tensor::new(fan_in, fan_out, data)?,
            );
            let bid = store.add(format!("{name}.{l}.bias"), Tensor::zeros(1, fan_out));
            layers.push((wid, bid));
        }
        Ok(Self { spec, layers })
    }

    /// Zeroes the output layer so the network initially emits zeros.
    pub fn zero_last(&self, store: &mut ParamStore) {
        if let Some(&(w, b)) = self.layers.last() {
            store.value_mut(w).data_mut().fill(0.0);
            store.value_mut(b).data_mut().fill(0.0);
        }
    }
}

pub fn forward_mlp(
    g: &mut Graph,
    store: &ParamStore,
    mlp: &Mlp,
    input: Var,
) -> Result<Var, NnError> {
    let width = g.value(input).cols();
    if width != mlp.spec.input_width() {
        return Err(NnError::shape(
            "mlp input",
            mlp.spec.input_width().to_string(),
            width.to_string(),
        ));
    }
    let mut x = input;
    for (&(w, b), act) in mlp.layers.iter().zip(&mlp.spec.activations) {
        let wv = g.param(store, w);
        let bv = g.param(store, b);
        x = g.matmul(x, wv)?;
        x = g.add_bias(x, bv)?;
        x = match act {
            Activation::Relu => g.relu(x),
            Activation::Sigmoid => g.sigmoid(x),
            Activation::None => x,
        };
    }
    Ok(x)
}

/// One shared MLP per grouping scale plus an optional MLP after concatenation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaSpec {
    pub scales: Vec<MlpSpec>,
    pub post: Option<MlpSpec>,
}

impl SaSpec {
    pub fn output_width(&self) -> usize {
        match &self.post {
            Some(p) => p.output_width(),
            None => self.scales.iter().map(MlpSpec::output_width).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaModule {
    pub spec: SaSpec,
    pub scales: Vec<Mlp>,
    pub post: Option<Mlp>,
}

impl SaModule {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        spec: SaSpec,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NnError> {
        let concat: usize = spec.scales.iter().map(MlpSpec::output_width).sum();
        if let Some(p) = &spec.post {
            if p.input_width() != concat {
                return Err(NnError::InvalidSpec(format!(
                    "post MLP takes {} but scales give {concat}",
                    p.input_width()
                )));
            }
        }
        let scales = spec
            .scales
            .iter()
            .enumerate()
            .map(|(i, s)| Mlp::new(store, &format!("{name}.scale{i}"), s.clone(), rng))
            .collect::<Result<_, _>>()?;
        let post = spec
            .post
            .clone()
            .map(|p| Mlp::new(store, &format!("{name}.post"), p, rng))
            .transpose()?;
        Ok(Self { spec, scales, post })
    }
}

/// Grouped input for one scale: relative coordinates `(m * nquery) x 3` and
/// the neighbor lists used to gather point features.
#[derive(Debug, Clone)]
pub struct ScaleInput<'a> {
    pub rel: Tensor,
    pub groups: &'a GroupIndex,
}

fn pool_scales(
    g: &mut Graph,
    store: &ParamStore,
    module: &SaModule,
    inputs: Vec<(Var, usize)>,
) -> Result<Var, NnError> {
    if inputs.len() != module.scales.len() {
        return Err(NnError::shape(
            "sa_layer scales",
            module.scales.len().to_string(),
            inputs.len().to_string(),
        ));
    }
    let mut pooled = Vec::with_capacity(inputs.len());
    for ((x, nquery), mlp) in inputs.into_iter().zip(&module.scales) {
        let h = forward_mlp(g, store, mlp, x)?;
        pooled.push(g.max_pool(h, nquery)?);
    }
    let cat = g.concat_cols(&pooled)?;
    match &module.post {
        Some(p) => forward_mlp(g, store, p, cat),
        None => Ok(cat),
    }
}

/// Set abstraction on precomputed blocks: shared MLP per neighbor, max-pool per
/// center, concatenation over scales, then the post MLP.
pub fn sa_layer(
    g: &mut Graph,
    store: &ParamStore,
    module: &SaModule,
    blocks: &[GroupedBlock],
) -> Result<Var, NnError> {
    let inputs = blocks
        .iter()
        .map(|b| {
            Ok((
                g.constant(Tensor::new(b.m * b.nquery, b.width, b.data.clone())?),
                b.nquery,
            ))
        })
        .collect::<Result<Vec<_>, NnError>>()?;
    pool_scales(g, store, module, inputs)
}

/// Set abstraction whose neighbor features come from a recorded tensor, so
/// gradients reach the layers that produced them.
pub fn sa_layer_graph(
    g: &mut Graph,
    store: &ParamStore,
    module: &SaModule,
    scales: &[ScaleInput<'_>],
    features: Option<Var>,
) -> Result<Var, NnError> {
    let mut inputs = Vec::with_capacity(scales.len());
    for s in scales {
        let rel = g.constant(s.rel.clone());
        let x = match features {
            Some(f) => {
                let nf = g.gather_rows(f, s.groups.indices())?;
                g.concat_cols(&[rel, nf])?
            }
            None => rel,
        };
        inputs.push((x, s.groups.nquery()));
    }
    pool_scales(g, store, module, inputs)
}
