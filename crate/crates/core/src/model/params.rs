use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Scalar;

/// Location of one named array inside a [`ParameterStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId {
    pub offset: usize,
    pub len: usize,
}

impl ParamId {
    #[inline]
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub id: ParamId,
}

/// Every learnable weight in one flat buffer, addressed by stable names in
/// registration order. Gradients and optimizer moments use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore<T> {
    entries: Vec<ParamEntry>,
    values: Vec<T>,
}

impl<T: Scalar> Default for ParameterStore<T> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
            values: Vec::new(),
        }
    }
}

impl<T: Scalar> ParameterStore<T> {
    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&[T]> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| &self.values[e.id.range()])
    }

    pub fn entry(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn zeros_like(&self) -> Vec<T> {
        vec![T::zero(); self.values.len()]
    }

    pub(crate) fn push(&mut self, name: String, shape: Vec<usize>, data: Vec<T>) -> ParamId {
        assert!(
            self.entries.iter().all(|e| e.name != name),
            "duplicate parameter name {name}"
        );
        assert_eq!(shape.iter().product::<usize>(), data.len());
        let id = ParamId {
            offset: self.values.len(),
            len: data.len(),
        };
        self.values.extend(data);
        self.entries.push(ParamEntry { name, shape, id });
        id
    }

    /// Rebuilds a store from raw entries; layout must be contiguous and in order.
    pub(crate) fn from_parts(entries: Vec<ParamEntry>, values: Vec<T>) -> Self {
        Self { entries, values }
    }
}

/// Registers parameters under a name prefix and draws their initial values.
pub struct ParamBuilder<'a, T> {
    store: &'a mut ParameterStore<T>,
    rng: &'a mut ChaCha8Rng,
    prefix: String,
}

impl<'a, T: Scalar> ParamBuilder<'a, T> {
    pub fn new(store: &'a mut ParameterStore<T>, rng: &'a mut ChaCha8Rng) -> Self {
        Self {
            store,
            rng,
            prefix: String::new(),
        }
    }

    pub fn scope(&mut self, name: &str) -> ParamBuilder<'_, T> {
        let prefix = if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{}", self.prefix, name)
        };
        ParamBuilder {
            store: self.store,
            rng: self.rng,
            prefix,
        }
    }

    fn full_name(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{}", self.prefix, name)
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn uniform(&mut self, name: &str, shape: Vec<usize>, fan_in: usize) -> ParamId {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| T::lit(self.rng.gen_range(-bound..bound)))
            .collect();
        let name = self.full_name(name);
        self.store.push(name, shape, data)
    }

    pub fn constant(&mut self, name: &str, shape: Vec<usize>, value: f64) -> ParamId {
        let n = shape.iter().product();
        let name = self.full_name(name);
        self.store.push(name, shape, vec![T::lit(value); n])
    }
}
