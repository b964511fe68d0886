//! Sparse statevector simulation of hybrid query algorithms.
//!
//! A state is a map from basis labels (one value per register) to complex
//! amplitudes. Classical queries are purified into history slots, noisy and
//! depth-bounded runs split into weighted branches.

mod circuit;
mod exec;
mod gate;
mod state;

pub use circuit::{Circuit, OutputRegisters, QueryKind, QueryRegisters, RegisterSpec};
pub use exec::{
    execute, run_circuit, AnswerFn, Backend, Branch, ClassicalSemantics, CustomOp, Distribution,
    Execution, Mode, Op, Program, QueryNoise, QueryOp, RunOptions, RunStats, Trajectory,
};
pub use gate::{ControlSpec, Gate, ResolvedGate};
pub use state::QuantumState;

use std::sync::OnceLock;

use thiserror::Error;

/// Default cap on the number of stored amplitudes (and branches).
pub const DEFAULT_MEMORY_CAP: usize = 1 << 22;

/// Amplitudes with squared modulus below this are dropped after each step.
pub(crate) const PRUNE_EPS: f64 = 1e-30;

/// The memory cap, overridable through `QLIFT_MEMORY_CAP`.
pub fn memory_cap() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("QLIFT_MEMORY_CAP")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_MEMORY_CAP)
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("unknown register {0:?}")]
    UnknownRegister(String),
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("history slot {slot} is already occupied")]
    SlotOccupied { slot: String },
    #[error("classical query repeats input {x}")]
    DuplicateClassicalQuery { x: u32 },
    #[error("control register has no empty slot")]
    ControlFull,
    #[error("{size} amplitudes or branches exceed the memory cap {cap}")]
    MemoryCapExceeded { size: usize, cap: usize },
}

/// What a register stores, which decides how queries treat it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegisterRole {
    Work,
    /// Purified record of one classical query over a codomain of size `n`.
    History { n: u32 },
    /// One slot of the reprogramming control list over a codomain of size `n`.
    Control { n: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub dim: u32,
    pub role: RegisterRole,
}

/// Ordered registers; basis labels list one value per register in this order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Layout {
    registers: Vec<Register>,
}

impl Layout {
    pub fn new() -> Self {
        Layout::default()
    }

    pub fn push(&mut self, name: &str, dim: u32, role: RegisterRole) -> Result<usize, StateError> {
        if dim == 0 {
            return Err(StateError::LayoutMismatch(format!("register {name} has dimension 0")));
        }
        if self.registers.iter().any(|r| r.name == name) {
            return Err(StateError::LayoutMismatch(format!("register {name} declared twice")));
        }
        self.registers.push(Register {
            name: name.into(),
            dim,
            role,
        });
        Ok(self.registers.len() - 1)
    }

    pub fn index(&self, name: &str) -> Result<usize, StateError> {
        self.registers
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| StateError::UnknownRegister(name.into()))
    }

    pub fn register(&self, i: usize) -> &Register {
        &self.registers[i]
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn dim(&self, i: usize) -> u32 {
        self.registers[i].dim
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    /// Product of all register dimensions, `None` on overflow.
    pub fn total_dim(&self) -> Option<u128> {
        self.registers
            .iter()
            .try_fold(1u128, |acc, r| acc.checked_mul(r.dim as u128))
    }

    pub fn with_role(&self, pred: impl Fn(RegisterRole) -> bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| pred(self.registers[i].role)).collect()
    }
}

/// Slot symbol for the pair `(x, y)` over codomain size `n`; 0 means empty.
pub fn encode_pair(x: u32, y: u32, n: u32) -> u32 {
    1 + x * n + y
}

pub fn decode_pair(symbol: u32, n: u32) -> Option<(u32, u32)> {
    (symbol != 0).then(|| ((symbol - 1) / n, (symbol - 1) % n))
}

/// Slot dimension `M·N + 1`.
pub fn slot_dim(m: u32, n: u32) -> u32 {
    m * n + 1
}
