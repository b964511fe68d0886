use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use super::gate::{Gate, ResolvedGate};
use super::{decode_pair, encode_pair, Layout, RegisterRole, StateError, PRUNE_EPS};
use crate::relations::Oracle;

/// A (possibly sub-normalized) pure state over a [`Layout`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    layout: Arc<Layout>,
    amps: BTreeMap<Vec<u32>, Complex64>,
}

impl QuantumState {
    /// `|0…0⟩`.
    pub fn zero(layout: Arc<Layout>) -> Self {
        let key = vec![0; layout.len()];
        QuantumState {
            layout,
            amps: BTreeMap::from([(key, Complex64::new(1.0, 0.0))]),
        }
    }

    pub fn basis(layout: Arc<Layout>, values: &[u32]) -> Result<Self, StateError> {
        Self::from_amplitudes(layout, [(values.to_vec(), Complex64::new(1.0, 0.0))])
    }

    pub fn from_amplitudes(
        layout: Arc<Layout>,
        amps: impl IntoIterator<Item = (Vec<u32>, Complex64)>,
    ) -> Result<Self, StateError> {
        let mut out = BTreeMap::new();
        for (key, a) in amps {
            if key.len() != layout.len() {
                return Err(StateError::LayoutMismatch(format!(
                    "label has {} entries, layout has {} registers",
                    key.len(),
                    layout.len()
                )));
            }
            for (i, &v) in key.iter().enumerate() {
                if v >= layout.dim(i) {
                    return Err(StateError::LayoutMismatch(format!(
                        "value {v} outside register {}",
                        layout.register(i).name
                    )));
                }
            }
            *out.entry(key).or_insert(Complex64::new(0.0, 0.0)) += a;
        }
        Ok(QuantumState { layout, amps: out }.pruned())
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn amplitudes(&self) -> impl Iterator<Item = (&Vec<u32>, &Complex64)> {
        self.amps.iter()
    }

    pub fn amplitude(&self, key: &[u32]) -> Complex64 {
        self.amps.get(key).copied().unwrap_or_default()
    }

    pub fn support_len(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn check_cap(&self, cap: usize) -> Result<(), StateError> {
        if self.amps.len() > cap {
            return Err(StateError::MemoryCapExceeded {
                size: self.amps.len(),
                cap,
            });
        }
        Ok(())
    }

    fn pruned(mut self) -> Self {
        self.amps.retain(|_, a| a.norm_sqr() >= PRUNE_EPS);
        self
    }

    fn rebuild(&self, f: impl Fn(&[u32], Complex64, &mut dyn FnMut(Vec<u32>, Complex64))) -> Self {
        let mut out: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
        for (key, &a) in &self.amps {
            f(key, a, &mut |k, v| *out.entry(k).or_default() += v);
        }
        QuantumState {
            layout: self.layout.clone(),
            amps: out,
        }
        .pruned()
    }

    /// Relabels basis states; `f` must be a bijection on the support.
    pub fn permute(&self, f: impl Fn(&[u32]) -> Vec<u32>) -> Self {
        let amps = self.amps.iter().map(|(k, &a)| (f(k), a)).collect();
        QuantumState {
            layout: self.layout.clone(),
            amps,
        }
    }

    pub fn apply(&self, gate: &ResolvedGate) -> Self {
        self.rebuild(|key, a, emit| gate.emit(key, a, emit))
    }

    pub fn apply_gate(&self, gate: &Gate) -> Result<Self, StateError> {
        Ok(self.apply(&gate.resolve(&self.layout)?))
    }

    /// `|x⟩|y⟩ ↦ |x⟩|y + answer(x)⟩`, where `answer` may read the whole label.
    pub fn quantum_query(
        &self,
        input: usize,
        output: usize,
        answer: &(dyn Fn(&[u32], u32) -> u32 + Sync),
    ) -> Self {
        let n = self.layout.dim(output);
        self.permute(|key| {
            let mut k = key.to_vec();
            k[output] = (k[output] + answer(key, key[input])) % n;
            k
        })
    }

    /// Quantum query to a plain oracle, by register name.
    pub fn query_oracle(&self, input: &str, output: &str, oracle: &dyn Oracle) -> Result<Self, StateError> {
        let (i, o) = (self.layout.index(input)?, self.layout.index(output)?);
        self.check_oracle_shape(i, o, oracle)?;
        Ok(self.quantum_query(i, o, &|_, x| oracle.lookup(x)))
    }

    pub(crate) fn check_oracle_shape(&self, input: usize, output: usize, oracle: &dyn Oracle) -> Result<(), StateError> {
        if self.layout.dim(input) != oracle.domain_size() || self.layout.dim(output) != oracle.codomain_size() {
            return Err(StateError::LayoutMismatch(format!(
                "query registers are {}×{}, oracle is {}→{}",
                self.layout.dim(input),
                self.layout.dim(output),
                oracle.domain_size(),
                oracle.codomain_size()
            )));
        }
        Ok(())
    }

    /// Purified classical query: answers like [`Self::quantum_query`] and
    /// writes `(x, answer)` into the empty history `slot`.
    pub fn classical_query(
        &self,
        input: usize,
        output: usize,
        slot: usize,
        check_duplicates: bool,
        answer: &(dyn Fn(&[u32], u32) -> u32 + Sync),
    ) -> Result<Self, StateError> {
        let RegisterRole::History { n } = self.layout.register(slot).role else {
            return Err(StateError::LayoutMismatch(format!(
                "{} is not a history slot",
                self.layout.register(slot).name
            )));
        };
        let history = self.layout.with_role(|r| matches!(r, RegisterRole::History { .. }));
        let out_dim = self.layout.dim(output);
        let mut amps = BTreeMap::new();
        for (key, &a) in &self.amps {
            if key[slot] != 0 {
                return Err(StateError::SlotOccupied {
                    slot: self.layout.register(slot).name.clone(),
                });
            }
            let x = key[input];
            if check_duplicates
                && history
                    .iter()
                    .any(|&h| decode_pair(key[h], n).is_some_and(|(hx, _)| hx == x))
            {
                return Err(StateError::DuplicateClassicalQuery { x });
            }
            let y = answer(key, x);
            let mut k = key.clone();
            k[output] = (k[output] + y) % out_dim;
            k[slot] = encode_pair(x, y, n);
            amps.insert(k, a);
        }
        Ok(QuantumState {
            layout: self.layout.clone(),
            amps,
        })
    }

    /// Splits off the components satisfying `keep`; returns them together
    /// with the squared norm of everything removed.
    pub fn project(&self, keep: impl Fn(&[u32]) -> bool) -> (Self, f64) {
        let mut removed = 0.0;
        let mut amps = BTreeMap::new();
        for (k, &a) in &self.amps {
            if keep(k) {
                amps.insert(k.clone(), a);
            } else {
                removed += a.norm_sqr();
            }
        }
        (
            QuantumState {
                layout: self.layout.clone(),
                amps,
            },
            removed,
        )
    }

    /// Rescales to unit norm, returning the old squared norm. The zero state
    /// is returned unchanged.
    pub fn normalized(&self) -> (Self, f64) {
        let n = self.norm_sqr();
        if n == 0.0 {
            return (self.clone(), 0.0);
        }
        let s = 1.0 / n.sqrt();
        let amps = self.amps.iter().map(|(k, &a)| (k.clone(), a * s)).collect();
        (
            QuantumState {
                layout: self.layout.clone(),
                amps,
            },
            n,
        )
    }

    /// Projective measurement of one register: `(value, probability,
    /// post-measurement state)` for every outcome of nonzero probability.
    pub fn measure(&self, reg: usize) -> Vec<(u32, f64, Self)> {
        let mut parts: BTreeMap<u32, BTreeMap<Vec<u32>, Complex64>> = BTreeMap::new();
        for (k, &a) in &self.amps {
            parts.entry(k[reg]).or_default().insert(k.clone(), a);
        }
        let total = self.norm_sqr();
        parts
            .into_iter()
            .map(|(v, amps)| {
                let part = QuantumState {
                    layout: self.layout.clone(),
                    amps,
                };
                let (state, w) = part.normalized();
                (v, w / total, state)
            })
            .collect()
    }

    /// Full computational-basis measurement.
    pub fn dephase(&self) -> Vec<(f64, Self)> {
        let total = self.norm_sqr();
        self.amps
            .iter()
            .map(|(k, a)| {
                let state = QuantumState {
                    layout: self.layout.clone(),
                    amps: BTreeMap::from([(k.clone(), Complex64::new(1.0, 0.0))]),
                };
                (a.norm_sqr() / total, state)
            })
            .collect()
    }

    /// Born-rule marginal over `regs`, unnormalized.
    pub fn marginal(&self, regs: &[usize]) -> BTreeMap<Vec<u32>, f64> {
        let mut out = BTreeMap::new();
        for (k, a) in &self.amps {
            let label: Vec<u32> = regs.iter().map(|&r| k[r]).collect();
            *out.entry(label).or_insert(0.0) += a.norm_sqr();
        }
        out
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amps
            .iter()
            .map(|(k, a)| a.conj() * other.amplitude(k))
            .sum()
    }
}
