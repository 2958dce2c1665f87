use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Gradients, Tape, Var};
use crate::ctensor::ComplexTensor;
use crate::error::{Error, Result};

/// Index of a tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Updated by the optimizer.
    Trainable,
    /// Running statistics; checkpointed but never differentiated.
    Buffer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub kind: ParamKind,
    pub value: ComplexTensor,
}

/// Named registry of every parameter and buffer of a model, in build order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: IndexMap<String, ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, kind: ParamKind, value: ComplexTensor) -> Result<ParamId> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        let (idx, _) = self.entries.insert_full(name, ParamEntry { kind, value });
        Ok(ParamId(idx))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &ComplexTensor {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ComplexTensor {
        &mut self.entries[id.0].value
    }

    pub fn kind(&self, id: ParamId) -> ParamKind {
        self.entries[id.0].kind
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.entries.get_index(id.0).map(|(k, _)| k.as_str()).expect("valid id")
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.entries.get_index_of(name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn trainable(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.ids().filter(|&id| self.kind(id) == ParamKind::Trainable)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Number of real scalars in trainable tensors (two per complex entry).
    pub fn trainable_scalars(&self) -> usize {
        self.trainable().map(|id| 2 * self.get(id).len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// State threaded through one forward pass: the tape, the parameters,
/// the dropout stream and the running-statistic updates it produces.
pub struct Forward<'a> {
    pub tape: &'a Tape,
    store: &'a ParamStore,
    mode: Mode,
    track_params: bool,
    rng: RefCell<ChaCha8Rng>,
    bound: RefCell<HashMap<ParamId, Var>>,
    updates: RefCell<Vec<(ParamId, ComplexTensor)>>,
}

impl<'a> Forward<'a> {
    pub fn new(tape: &'a Tape, store: &'a ParamStore, mode: Mode) -> Self {
        Self {
            tape,
            store,
            mode,
            track_params: true,
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(0)),
            bound: RefCell::new(HashMap::new()),
            updates: RefCell::new(Vec::new()),
        }
    }

    /// Dropout randomness for this pass.
    pub fn with_rng(mut self, rng: ChaCha8Rng) -> Self {
        self.rng = RefCell::new(rng);
        self
    }

    /// Do not record parameters as requiring gradients (pure inference).
    pub fn frozen(mut self) -> Self {
        self.track_params = false;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn training(&self) -> bool {
        self.mode == Mode::Train
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    pub(crate) fn rng(&self) -> std::cell::RefMut<'_, ChaCha8Rng> {
        self.rng.borrow_mut()
    }

    /// Tape node for a parameter; created on first use.
    pub fn param(&self, id: ParamId) -> Var {
        if let Some(&v) = self.bound.borrow().get(&id) {
            return v;
        }
        let requires = self.track_params && self.store.kind(id) == ParamKind::Trainable;
        let v = self.tape.leaf(self.store.get(id).clone(), requires);
        self.bound.borrow_mut().insert(id, v);
        v
    }

    /// Use an externally created node in place of a parameter.
    pub fn bind(&self, id: ParamId, var: Var) {
        self.bound.borrow_mut().insert(id, var);
    }

    pub(crate) fn push_update(&self, id: ParamId, value: ComplexTensor) {
        self.updates.borrow_mut().push((id, value));
    }

    /// Translate tape gradients into a parameter-keyed map.
    pub fn param_grads(&self, grads: &Gradients) -> BTreeMap<ParamId, ComplexTensor> {
        self.bound
            .borrow()
            .iter()
            .filter_map(|(&id, var)| grads.get(var).map(|g| (id, g.clone())))
            .collect()
    }

    /// Buffer updates (running statistics) collected during the pass.
    pub fn take_updates(&self) -> Vec<(ParamId, ComplexTensor)> {
        std::mem::take(&mut self.updates.borrow_mut())
    }
}

impl ParamStore {
    pub fn apply_updates(&mut self, updates: Vec<(ParamId, ComplexTensor)>) {
        for (id, v) in updates {
            *self.get_mut(id) = v;
        }
    }
}
