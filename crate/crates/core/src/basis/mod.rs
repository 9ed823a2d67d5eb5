//! STO-6G minimal basis and Gaussian integrals.

pub mod boys;
mod integrals;

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::molecule::{atomic_number, Molecule, MAX_SUPPORTED_Z};

pub use integrals::{
    eri_tensor, kinetic_matrix, nuclear_attraction_matrix, overlap_matrix, EriTensor,
};

pub const PRIMITIVES_PER_SHELL: usize = 6;

const STO6G_TABLE: &str = include_str!("../data/sto6g.txt");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveGaussian {
    pub exponent: f64,
    /// Contraction weight with primitive and contracted normalization folded in.
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractedShell {
    pub center_atom_index: usize,
    pub center: [f64; 3],
    pub angular_momentum: u32,
    pub primitives: Vec<PrimitiveGaussian>,
}

/// A single Cartesian contracted function x^l y^m z^n Σ c exp(−a r²).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisFunction {
    pub atom: usize,
    pub shell: usize,
    pub center: [f64; 3],
    pub powers: [u32; 3],
    pub primitives: Vec<PrimitiveGaussian>,
}

impl BasisFunction {
    pub fn angular_momentum(&self) -> u32 {
        self.powers.iter().sum()
    }

    /// χ(r).
    pub fn value(&self, r: &[f64; 3]) -> f64 {
        let d = [
            r[0] - self.center[0],
            r[1] - self.center[1],
            r[2] - self.center[2],
        ];
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        let angular: f64 = (0..3).map(|k| d[k].powi(self.powers[k] as i32)).product();
        let radial: f64 = self
            .primitives
            .iter()
            .map(|p| p.coefficient * (-p.exponent * r2).exp())
            .sum();
        angular * radial
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub shells: Vec<ContractedShell>,
    pub functions: Vec<BasisFunction>,
}

impl BasisSet {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn function_to_atom(&self) -> Vec<usize> {
        self.functions.iter().map(|f| f.atom).collect()
    }

    /// Values of every basis function at `r`.
    pub fn values_at(&self, r: &[f64; 3]) -> Vec<f64> {
        self.functions.iter().map(|f| f.value(r)).collect()
    }
}

/// Raw (exponent, coefficient) rows for one shell of one element.
#[derive(Debug, Clone)]
pub struct ShellData {
    pub angular_momentum: u32,
    pub primitives: Vec<(f64, f64)>,
}

fn table() -> &'static Vec<Vec<ShellData>> {
    static TABLE: OnceLock<Vec<Vec<ShellData>>> = OnceLock::new();
    TABLE.get_or_init(|| parse_table(STO6G_TABLE).expect("embedded STO-6G table is well formed"))
}

fn parse_table(text: &str) -> Result<Vec<Vec<ShellData>>> {
    let mut by_element: Vec<Vec<ShellData>> = vec![Vec::new(); MAX_SUPPORTED_Z as usize];
    let mut rows: Vec<(u32, u32, f64, f64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| Error::MalformedLine {
            line: i + 1,
            reason: reason.to_string(),
        };
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 4 {
            return Err(bad("expected `element l exponent coefficient`"));
        }
        let z = atomic_number(t[0])?;
        let l: u32 = t[1].parse().map_err(|_| bad("bad angular momentum"))?;
        let a: f64 = t[2].parse().map_err(|_| bad("bad exponent"))?;
        let c: f64 = t[3].parse().map_err(|_| bad("bad coefficient"))?;
        rows.push((z, l, a, c));
    }
    for chunk in rows.chunks(PRIMITIVES_PER_SHELL) {
        let (z, l) = (chunk[0].0, chunk[0].1);
        if chunk.len() != PRIMITIVES_PER_SHELL || chunk.iter().any(|r| r.0 != z || r.1 != l) {
            return Err(Error::MalformedLine {
                line: 0,
                reason: "shells must have exactly 6 rows".into(),
            });
        }
        by_element[(z - 1) as usize].push(ShellData {
            angular_momentum: l,
            primitives: chunk.iter().map(|r| (r.2, r.3)).collect(),
        });
    }
    Ok(by_element)
}

/// Raw shell data for element `z` as stored in the embedded table.
pub fn sto6g_shells(z: u32) -> Result<&'static [ShellData]> {
    if z == 0 || z > MAX_SUPPORTED_Z {
        return Err(Error::UnsupportedElement {
            symbol: crate::molecule::element_symbol(z)
                .unwrap_or("?")
                .to_string(),
            z,
        });
    }
    Ok(&table()[(z - 1) as usize])
}

/// Norm of a primitive Cartesian Gaussian with total angular momentum ≤ 1.
fn primitive_norm(exponent: f64, l: u32) -> f64 {
    (2.0 * exponent / PI).powf(0.75) * (4.0 * exponent).powf(l as f64 / 2.0)
}

/// Self-overlap of a contraction along one Cartesian power pattern with
/// primitive norms already applied.
fn contracted_self_overlap(prims: &[PrimitiveGaussian], l: u32) -> f64 {
    let mut s = 0.0;
    for p in prims {
        for q in prims {
            let g = p.exponent + q.exponent;
            // ∫ x^{2l} exp(−g r²) d³r for l ≤ 1
            let radial = (PI / g).powf(1.5) * if l == 1 { 0.5 / g } else { 1.0 };
            s += p.coefficient * q.coefficient * radial;
        }
    }
    s
}

/// STO-6G basis for `mol`: atom order, s before p, p ordered x, y, z.
pub fn build_basis(mol: &Molecule) -> Result<BasisSet> {
    let mut shells = Vec::new();
    let mut functions = Vec::new();
    for (atom_idx, atom) in mol.atoms().iter().enumerate() {
        for data in sto6g_shells(atom.atomic_number)? {
            let l = data.angular_momentum;
            let mut prims: Vec<PrimitiveGaussian> = data
                .primitives
                .iter()
                .map(|&(a, c)| PrimitiveGaussian {
                    exponent: a,
                    coefficient: c * primitive_norm(a, l),
                })
                .collect();
            let scale = contracted_self_overlap(&prims, l).sqrt().recip();
            for p in &mut prims {
                p.coefficient *= scale;
            }
            let shell_idx = shells.len();
            shells.push(ContractedShell {
                center_atom_index: atom_idx,
                center: atom.position,
                angular_momentum: l,
                primitives: prims.clone(),
            });
            let patterns: &[[u32; 3]] = match l {
                0 => &[[0, 0, 0]],
                1 => &[[1, 0, 0], [0, 1, 0], [0, 0, 1]],
                _ => unreachable!("table only holds s and p shells"),
            };
            for &powers in patterns {
                functions.push(BasisFunction {
                    atom: atom_idx,
                    shell: shell_idx,
                    center: atom.position,
                    powers,
                    primitives: prims.clone(),
                });
            }
        }
    }
    Ok(BasisSet { shells, functions })
}
