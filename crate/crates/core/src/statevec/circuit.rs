use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::exec::{ClassicalSemantics, Mode, Op, Program, QueryNoise, QueryOp};
use super::gate::{Gate, ResolvedGate};
use super::{slot_dim, Layout, RegisterRole, StateError};
use crate::relations::{Oracle, OracleTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueryKind {
    #[serde(rename = "Q")]
    Quantum,
    #[serde(rename = "C")]
    Classical,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterSpec {
    pub name: String,
    pub dim: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRegisters {
    pub input: String,
    pub output: String,
}

/// Registers read out at the end: `x⃗` (one register per coordinate) and an
/// optional auxiliary `z`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRegisters {
    pub x: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<String>,
}

/// A static hybrid query algorithm: `U_{q+c+1} O U_{q+c} ⋯ O U_1 |0⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circuit {
    pub registers: Vec<RegisterSpec>,
    pub pattern: Vec<QueryKind>,
    /// One entry shared by every query, or one per query.
    #[serde(default)]
    pub query_registers: Vec<QueryRegisters>,
    /// Gate lists before each query and one after the last.
    pub unitaries: Vec<Vec<Gate>>,
    pub output_registers: OutputRegisters,
}

impl Circuit {
    pub fn from_json(text: &str) -> Result<Self, StateError> {
        let c: Circuit =
            serde_json::from_str(text).map_err(|e| StateError::InvalidCircuit(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty()
    }

    pub fn quantum_queries(&self) -> usize {
        self.pattern.iter().filter(|&&p| p == QueryKind::Quantum).count()
    }

    pub fn classical_queries(&self) -> usize {
        self.pattern.iter().filter(|&&p| p == QueryKind::Classical).count()
    }

    /// Number of output coordinates `k`.
    pub fn arity(&self) -> usize {
        self.output_registers.x.len()
    }

    pub fn query_registers_at(&self, i: usize) -> &QueryRegisters {
        if self.query_registers.len() == 1 {
            &self.query_registers[0]
        } else {
            &self.query_registers[i]
        }
    }

    /// Structural checks that do not need an oracle.
    pub fn validate(&self) -> Result<(), StateError> {
        let bad = |m: String| Err(StateError::InvalidCircuit(m));
        let mut layout = Layout::new();
        for r in &self.registers {
            if r.name.starts_with('_') {
                return bad(format!("register names starting with '_' are reserved ({})", r.name));
            }
            layout.push(&r.name, r.dim, RegisterRole::Work)?;
        }
        if self.unitaries.len() != self.pattern.len() + 1 {
            return bad(format!(
                "{} gate lists for {} queries; expected {}",
                self.unitaries.len(),
                self.pattern.len(),
                self.pattern.len() + 1
            ));
        }
        let n_regs = self.query_registers.len();
        if !self.pattern.is_empty() && n_regs != 1 && n_regs != self.pattern.len() {
            return bad(format!("query_registers must have 1 or {} entries", self.pattern.len()));
        }
        for i in 0..self.pattern.len() {
            let qr = self.query_registers_at(i);
            let (a, b) = (layout.index(&qr.input)?, layout.index(&qr.output)?);
            if a == b {
                return bad("query input and output must differ".into());
            }
        }
        for name in self.output_registers.x.iter().chain(&self.output_registers.z) {
            layout.index(name)?;
        }
        for gates in &self.unitaries {
            for g in gates {
                g.resolve(&layout)?;
            }
        }
        Ok(())
    }

    /// Checks register dimensions against an `M → N` oracle.
    pub fn check_shape(&self, m: u32, n: u32) -> Result<(), StateError> {
        let dim = |name: &str| {
            self.registers
                .iter()
                .find(|r| r.name == name)
                .map(|r| r.dim)
                .ok_or_else(|| StateError::UnknownRegister(name.into()))
        };
        for i in 0..self.pattern.len() {
            let qr = self.query_registers_at(i);
            if dim(&qr.input)? != m || dim(&qr.output)? != n {
                return Err(StateError::LayoutMismatch(format!(
                    "query {i} uses registers {}×{}, oracle is {m}→{n}",
                    dim(&qr.input)?,
                    dim(&qr.output)?
                )));
            }
        }
        for x in &self.output_registers.x {
            if dim(x)? != m {
                return Err(StateError::LayoutMismatch(format!("output register {x} must have dimension {m}")));
            }
        }
        Ok(())
    }

    /// Circuit registers followed by `classical_queries() + extra_history`
    /// history slots named `_h0, _h1, …`.
    pub fn layout(&self, m: u32, n: u32, extra_history: usize) -> Result<Layout, StateError> {
        let mut layout = Layout::new();
        for r in &self.registers {
            layout.push(&r.name, r.dim, RegisterRole::Work)?;
        }
        for j in 0..self.classical_queries() + extra_history {
            layout.push(&format!("_h{j}"), slot_dim(m, n), RegisterRole::History { n })?;
        }
        Ok(layout)
    }

    pub fn gates_at(&self, layout: &Layout, i: usize) -> Result<Vec<ResolvedGate>, StateError> {
        self.unitaries[i].iter().map(|g| g.resolve(layout)).collect()
    }

    /// Indices of the `x⃗` registers followed by `z`, if present.
    pub fn output_indices(&self, layout: &Layout) -> Result<Vec<usize>, StateError> {
        self.output_registers
            .x
            .iter()
            .chain(&self.output_registers.z)
            .map(|name| layout.index(name))
            .collect()
    }

    /// Compiles the plain run against `oracle`.
    pub fn program(
        &self,
        oracle: &OracleTable,
        mode: Mode,
        classical: ClassicalSemantics,
    ) -> Result<Program, StateError> {
        self.validate()?;
        let (m, n) = (oracle.domain_size(), oracle.codomain_size());
        self.check_shape(m, n)?;
        let layout = Arc::new(self.layout(m, n, 0)?);
        let table = oracle.clone();
        let answer: Arc<super::AnswerFn> = Arc::new(move |_, x| table.lookup(x));
        let mut ops = Vec::new();
        let mut slot = 0;
        for (i, kind) in self.pattern.iter().enumerate() {
            ops.extend(self.gates_at(&layout, i)?.into_iter().map(Op::Unitary));
            let qr = self.query_registers_at(i);
            let (input, output) = (layout.index(&qr.input)?, layout.index(&qr.output)?);
            let mut q = QueryOp {
                position: i,
                input,
                output,
                history: None,
                check_duplicates: true,
                noise: QueryNoise::Coherent,
                answer: answer.clone(),
            };
            match (kind, classical) {
                (QueryKind::Classical, ClassicalSemantics::Purified) => {
                    q.history = Some(layout.index(&format!("_h{slot}"))?);
                    slot += 1;
                }
                (QueryKind::Classical, ClassicalSemantics::MeasureThenForward) => {
                    q.noise = QueryNoise::MeasureFirst;
                }
                (QueryKind::Quantum, _) => {
                    if let Mode::Noisy { p } = mode {
                        q.noise = QueryNoise::Noisy(p);
                    }
                }
            }
            ops.push(Op::Query(q));
            if let Mode::Depth { d } = mode {
                if d == 0 {
                    return Err(StateError::InvalidCircuit("depth must be at least 1".into()));
                }
                if (i + 1) % d == 0 {
                    ops.push(Op::Dephase);
                }
            }
        }
        ops.extend(self.gates_at(&layout, self.pattern.len())?.into_iter().map(Op::Unitary));
        let outputs = self.output_indices(&layout)?;
        Ok(Program { layout, ops, outputs })
    }
}
