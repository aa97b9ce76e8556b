//! Node systems: the sequences {b_i} (nodes) and {x_i} (parameters) feeding
//! the difference operator and the inversion matrices, given as closed-form
//! generators with pairwise-distinctness checking.

use crate::dd::DdC;
use crate::error::{FgError, Result};
use crate::kernel::FGPair;
use num_complex::Complex64;

/// Closed-form index-to-value generator.
#[derive(Clone, Debug)]
pub enum Generator {
    /// b_i = start · ratio^i.
    Geometric { start: Complex64, ratio: Complex64 },
    /// b_i = start + i · step.
    Affine { start: Complex64, step: Complex64 },
    /// Explicit finite list.
    List(Vec<Complex64>),
}

impl Generator {
    /// Value in extended precision (the authoritative evaluation; the f64
    /// view below is its rounding, so both precisions see identical nodes).
    pub(crate) fn value_dd(&self, i: usize) -> Result<DdC> {
        match self {
            Generator::Geometric { start, ratio } => {
                Ok(DdC::from_c64(*start) * DdC::from_c64(*ratio).powu(i as u32))
            }
            Generator::Affine { start, step } => {
                Ok(DdC::from_c64(*start) + DdC::from_c64(*step) * (i as f64))
            }
            Generator::List(values) => values.get(i).map(|&v| DdC::from_c64(v)).ok_or_else(|| {
                FgError::OutOfRange(format!(
                    "list generator has {} entries; index {} requested",
                    values.len(),
                    i
                ))
            }),
        }
    }

    pub fn value(&self, i: usize) -> Result<Complex64> {
        Ok(self.value_dd(i)?.to_c64())
    }
}

/// Nodes, parameters, and the pair they feed.
#[derive(Clone, Debug)]
pub struct NodeSystem {
    pair: FGPair,
    b: Generator,
    x: Generator,
}

impl NodeSystem {
    pub fn new(pair: FGPair, b: Generator, x: Generator) -> NodeSystem {
        NodeSystem { pair, b, x }
    }

    pub fn pair(&self) -> &FGPair {
        &self.pair
    }

    /// Node b_i.
    pub fn node(&self, i: usize) -> Result<Complex64> {
        self.b.value(i)
    }

    /// Parameter x_i.
    pub fn param(&self, i: usize) -> Result<Complex64> {
        self.x.value(i)
    }

    pub(crate) fn node_dd(&self, i: usize) -> Result<DdC> {
        self.b.value_dd(i)
    }

    pub(crate) fn param_dd(&self, i: usize) -> Result<DdC> {
        self.x.value_dd(i)
    }

    /// Verify b_0..b_n are pairwise distinct under the relative tolerance
    /// |b_i - b_j| > 1e-12 · max(1, |b_i|, |b_j|).
    pub fn check_distinct(&self, n: usize) -> Result<()> {
        let mut nodes = Vec::with_capacity(n + 1);
        for i in 0..=n {
            nodes.push(self.node(i)?);
        }
        for i in 0..=n {
            for j in (i + 1)..=n {
                let sep = (nodes[i] - nodes[j]).norm();
                let scale = nodes[i].norm().max(nodes[j].norm()).max(1.0);
                if sep <= 1e-12 * scale {
                    return Err(FgError::CoincidentNodes {
                        i,
                        j,
                        separation: sep,
                    });
                }
            }
        }
        Ok(())
    }
}
