use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Layout, StateError};

/// A gate by register name, as it appears in circuit files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Gate {
    /// `r ↦ r + by mod dim`.
    Shift { reg: String, by: u32 },
    /// `r ↦ −r mod dim`.
    Negate { reg: String },
    /// `target ↦ target + source mod dim(target)`.
    AddFrom { target: String, source: String },
    Swap { a: String, b: String },
    /// Explicit unitary; `matrix[row][col]` holds `[re, im]`.
    Matrix { reg: String, matrix: Vec<Vec<[f64; 2]>> },
    /// Householder reflection exchanging `|0⟩` with the uniform
    /// superposition over `support`.
    Prepare { reg: String, support: Vec<u32> },
    /// `2|s⟩⟨s| − I` on the span of `support`, identity elsewhere.
    Diffusion { reg: String, support: Vec<u32> },
    /// Phase −1 on the listed values.
    PhaseFlip { reg: String, marked: Vec<u32> },
    /// `target ↦ target + table[i] mod dim(target)` where `i` reads the
    /// inputs in mixed radix, first input least significant.
    Lookup { inputs: Vec<String>, target: String, table: Vec<u32> },
    /// Applies `gate` on components where every control holds one of its values.
    Controlled { controls: Vec<ControlSpec>, gate: Box<Gate> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub reg: String,
    pub values: Vec<u32>,
}

/// A gate bound to register indices.
#[derive(Clone, Debug, PartialEq)]
pub enum ResolvedGate {
    Shift { reg: usize, by: u32, dim: u32 },
    Negate { reg: usize, dim: u32 },
    AddFrom { target: usize, source: usize, dim: u32 },
    Swap { a: usize, b: usize },
    Dense { reg: usize, matrix: Vec<Vec<Complex64>> },
    PhaseFlip { reg: usize, marked: Vec<bool> },
    Lookup { inputs: Vec<(usize, u32)>, target: usize, dim: u32, table: Vec<u32> },
    Controlled { controls: Vec<(usize, Vec<bool>)>, gate: Box<ResolvedGate> },
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn value_mask(dim: u32, values: &[u32], what: &str) -> Result<Vec<bool>, StateError> {
    let mut mask = vec![false; dim as usize];
    for &v in values {
        if v >= dim {
            return Err(StateError::InvalidGate(format!("{what}: value {v} outside dimension {dim}")));
        }
        mask[v as usize] = true;
    }
    Ok(mask)
}

fn uniform(dim: u32, support: &[u32]) -> Result<Vec<f64>, StateError> {
    let mask = value_mask(dim, support, "support")?;
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(StateError::InvalidGate("empty support".into()));
    }
    let a = 1.0 / (count as f64).sqrt();
    Ok(mask.iter().map(|&m| if m { a } else { 0.0 }).collect())
}

/// `I − 2|w⟩⟨w|` with `w ∝ |0⟩ − |s⟩`.
fn prepare_matrix(dim: u32, support: &[u32]) -> Result<Vec<Vec<Complex64>>, StateError> {
    let s = uniform(dim, support)?;
    let d = dim as usize;
    let mut w: Vec<f64> = s.iter().map(|v| -v).collect();
    w[0] += 1.0;
    let norm2: f64 = w.iter().map(|v| v * v).sum();
    let mut m = vec![vec![c(0.0); d]; d];
    for i in 0..d {
        for j in 0..d {
            let id = if i == j { 1.0 } else { 0.0 };
            let refl = if norm2 < 1e-24 { 0.0 } else { 2.0 * w[i] * w[j] / norm2 };
            m[i][j] = c(id - refl);
        }
    }
    Ok(m)
}

fn diffusion_matrix(dim: u32, support: &[u32]) -> Result<Vec<Vec<Complex64>>, StateError> {
    let s = uniform(dim, support)?;
    let d = dim as usize;
    let mut m = vec![vec![c(0.0); d]; d];
    for i in 0..d {
        for j in 0..d {
            let inside = s[i] != 0.0 && s[j] != 0.0;
            let id = if i == j { 1.0 } else { 0.0 };
            m[i][j] = c(if inside { 2.0 * s[i] * s[j] - id } else { id });
        }
    }
    Ok(m)
}

fn check_unitary(m: &[Vec<Complex64>]) -> Result<(), StateError> {
    let d = m.len();
    for i in 0..d {
        for j in 0..d {
            let dot: Complex64 = (0..d).map(|r| m[r][i].conj() * m[r][j]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            if (dot - c(want)).norm() > 1e-10 {
                return Err(StateError::InvalidGate("matrix is not unitary".into()));
            }
        }
    }
    Ok(())
}

impl Gate {
    pub fn resolve(&self, layout: &Layout) -> Result<ResolvedGate, StateError> {
        Ok(match self {
            Gate::Shift { reg, by } => {
                let reg = layout.index(reg)?;
                let dim = layout.dim(reg);
                ResolvedGate::Shift { reg, by: by % dim, dim }
            }
            Gate::Negate { reg } => {
                let reg = layout.index(reg)?;
                ResolvedGate::Negate { reg, dim: layout.dim(reg) }
            }
            Gate::AddFrom { target, source } => {
                let (target, source) = (layout.index(target)?, layout.index(source)?);
                if target == source {
                    return Err(StateError::InvalidGate("add-from needs two registers".into()));
                }
                ResolvedGate::AddFrom {
                    target,
                    source,
                    dim: layout.dim(target),
                }
            }
            Gate::Swap { a, b } => {
                let (a, b) = (layout.index(a)?, layout.index(b)?);
                if layout.dim(a) != layout.dim(b) {
                    return Err(StateError::InvalidGate("swap needs equal dimensions".into()));
                }
                ResolvedGate::Swap { a, b }
            }
            Gate::Matrix { reg, matrix } => {
                let reg = layout.index(reg)?;
                let d = layout.dim(reg) as usize;
                if matrix.len() != d || matrix.iter().any(|row| row.len() != d) {
                    return Err(StateError::InvalidGate(format!("matrix must be {d}×{d}")));
                }
                let m: Vec<Vec<Complex64>> = matrix
                    .iter()
                    .map(|row| row.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
                    .collect();
                check_unitary(&m)?;
                ResolvedGate::Dense { reg, matrix: m }
            }
            Gate::Prepare { reg, support } => {
                let reg = layout.index(reg)?;
                ResolvedGate::Dense {
                    reg,
                    matrix: prepare_matrix(layout.dim(reg), support)?,
                }
            }
            Gate::Diffusion { reg, support } => {
                let reg = layout.index(reg)?;
                ResolvedGate::Dense {
                    reg,
                    matrix: diffusion_matrix(layout.dim(reg), support)?,
                }
            }
            Gate::PhaseFlip { reg, marked } => {
                let reg = layout.index(reg)?;
                ResolvedGate::PhaseFlip {
                    reg,
                    marked: value_mask(layout.dim(reg), marked, "phase flip")?,
                }
            }
            Gate::Lookup { inputs, target, table } => {
                let inputs = inputs
                    .iter()
                    .map(|name| layout.index(name).map(|i| (i, layout.dim(i))))
                    .collect::<Result<Vec<_>, _>>()?;
                let target = layout.index(target)?;
                if inputs.iter().any(|&(i, _)| i == target) {
                    return Err(StateError::InvalidGate("lookup target is also an input".into()));
                }
                let size = inputs.iter().map(|&(_, d)| d as usize).product::<usize>();
                if table.len() != size {
                    return Err(StateError::InvalidGate(format!(
                        "lookup table has {} entries, inputs span {size}",
                        table.len()
                    )));
                }
                ResolvedGate::Lookup {
                    inputs,
                    target,
                    dim: layout.dim(target),
                    table: table.clone(),
                }
            }
            Gate::Controlled { controls, gate } => {
                let inner = gate.resolve(layout)?;
                let touched = inner.touched();
                let controls = controls
                    .iter()
                    .map(|cs| {
                        let i = layout.index(&cs.reg)?;
                        if touched.contains(&i) {
                            return Err(StateError::InvalidGate(format!(
                                "control {} is also a target",
                                cs.reg
                            )));
                        }
                        Ok((i, value_mask(layout.dim(i), &cs.values, "control")?))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                ResolvedGate::Controlled {
                    controls,
                    gate: Box::new(inner),
                }
            }
        })
    }
}

impl ResolvedGate {
    /// Registers whose values the gate may change.
    pub fn touched(&self) -> Vec<usize> {
        match self {
            ResolvedGate::Shift { reg, .. }
            | ResolvedGate::Negate { reg, .. }
            | ResolvedGate::Dense { reg, .. }
            | ResolvedGate::PhaseFlip { reg, .. } => vec![*reg],
            ResolvedGate::AddFrom { target, .. } | ResolvedGate::Lookup { target, .. } => vec![*target],
            ResolvedGate::Swap { a, b } => vec![*a, *b],
            ResolvedGate::Controlled { gate, .. } => gate.touched(),
        }
    }

    /// Pushes the image of `a·|key⟩` into `emit`.
    pub fn emit(&self, key: &[u32], a: Complex64, emit: &mut dyn FnMut(Vec<u32>, Complex64)) {
        let with = |reg: usize, v: u32| {
            let mut k = key.to_vec();
            k[reg] = v;
            k
        };
        match self {
            ResolvedGate::Shift { reg, by, dim } => emit(with(*reg, (key[*reg] + by) % dim), a),
            ResolvedGate::Negate { reg, dim } => emit(with(*reg, (dim - key[*reg]) % dim), a),
            ResolvedGate::AddFrom { target, source, dim } => {
                emit(with(*target, (key[*target] + key[*source] % dim) % dim), a)
            }
            ResolvedGate::Swap { a: ra, b: rb } => {
                let mut k = key.to_vec();
                k.swap(*ra, *rb);
                emit(k, a)
            }
            ResolvedGate::Dense { reg, matrix } => {
                let col = key[*reg] as usize;
                for (row, entries) in matrix.iter().enumerate() {
                    let m = entries[col];
                    if m != Complex64::new(0.0, 0.0) {
                        emit(with(*reg, row as u32), a * m);
                    }
                }
            }
            ResolvedGate::PhaseFlip { reg, marked } => {
                emit(key.to_vec(), if marked[key[*reg] as usize] { -a } else { a })
            }
            ResolvedGate::Lookup { inputs, target, dim, table } => {
                let mut index = 0usize;
                for &(i, d) in inputs.iter().rev() {
                    index = index * d as usize + key[i] as usize;
                }
                emit(with(*target, (key[*target] + table[index]) % dim), a)
            }
            ResolvedGate::Controlled { controls, gate } => {
                if controls.iter().all(|(i, mask)| mask[key[*i] as usize]) {
                    gate.emit(key, a, emit)
                } else {
                    emit(key.to_vec(), a)
                }
            }
        }
    }
}
