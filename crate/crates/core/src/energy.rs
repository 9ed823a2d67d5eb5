//! Local energy per walker and its batch average.

use rayon::prelude::*;

use crate::ansatz::Wavefunction;
use crate::error::{Error, Result};
use crate::molecule::{distance, Molecule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEnergyBreakdown {
    pub kinetic: f64,
    pub el_el: f64,
    pub nuc_el: f64,
    pub nuc_nuc: f64,
    pub total: f64,
}

impl LocalEnergyBreakdown {
    /// Samples with any non-finite term are excluded from averages.
    pub fn is_flagged(&self) -> bool {
        !(self.kinetic.is_finite()
            && self.el_el.is_finite()
            && self.nuc_el.is_finite()
            && self.nuc_nuc.is_finite()
            && self.total.is_finite())
    }
}

/// −½ Σ_x [(∂_x log|ψ|)² + ∂²_x log|ψ|] over all 3N coordinates.
pub fn kinetic_energy<W: Wavefunction + ?Sized>(wf: &W, positions: &[f64]) -> f64 {
    let (_, grad, lap) = wf.derivatives(positions);
    let g2: f64 = grad.iter().map(|g| g * g).sum();
    -0.5 * (g2 + lap)
}

fn electron(positions: &[f64], i: usize) -> [f64; 3] {
    [positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]]
}

/// (el_el, nuc_el, nuc_nuc). Coincident particles give infinities.
pub fn potential_energies(positions: &[f64], mol: &Molecule) -> (f64, f64, f64) {
    let n = positions.len() / 3;
    let mut el_el = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            el_el += 1.0 / distance(&electron(positions, i), &electron(positions, j));
        }
    }
    let mut nuc_el = 0.0;
    for i in 0..n {
        let r = electron(positions, i);
        for atom in mol.atoms() {
            nuc_el -= atom.atomic_number as f64 / distance(&r, &atom.position);
        }
    }
    let nuc_nuc = mol.nuclear_repulsion().unwrap_or(f64::INFINITY);
    (el_el, nuc_el, nuc_nuc)
}

pub fn local_energy<W: Wavefunction + ?Sized>(
    wf: &W,
    positions: &[f64],
    mol: &Molecule,
) -> LocalEnergyBreakdown {
    let kinetic = kinetic_energy(wf, positions);
    let (el_el, nuc_el, nuc_nuc) = potential_energies(positions, mol);
    LocalEnergyBreakdown {
        kinetic,
        el_el,
        nuc_el,
        nuc_nuc,
        total: kinetic + el_el + nuc_el + nuc_nuc,
    }
}

/// Local energies for every walker in a flattened batch, in walker order.
pub fn batch_local_energies<W: Wavefunction>(
    wf: &W,
    positions: &[f64],
    mol: &Molecule,
) -> Vec<LocalEnergyBreakdown> {
    let stride = 3 * wf.n_electrons();
    positions
        .par_chunks(stride)
        .map(|x| local_energy(wf, x, mol))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub n_flagged: usize,
}

/// Mean and i.i.d. standard error of the unflagged totals.
pub fn expected_energy(samples: &[LocalEnergyBreakdown]) -> Result<EnergyEstimate> {
    let totals: Vec<f64> = samples
        .iter()
        .filter(|s| !s.is_flagged())
        .map(|s| s.total)
        .collect();
    let mut est = estimate(&totals)?;
    est.n_flagged = samples.len() - totals.len();
    Ok(est)
}

/// Mean and standard error of plain values. Non-finite values are counted as
/// flagged and skipped.
pub fn estimate(values: &[f64]) -> Result<EnergyEstimate> {
    let good: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let n = good.len();
    if n == 0 {
        return Err(Error::AllSamplesFlagged);
    }
    let mean = good.iter().sum::<f64>() / n as f64;
    let std_error = if n > 1 {
        let var = good.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(EnergyEstimate {
        mean,
        std_error,
        n_samples: n,
        n_flagged: values.len() - n,
    })
}

/// Standard error from the means of `n_blocks` contiguous blocks, for
/// serially correlated series such as a training trace. A trailing remainder
/// shorter than a block is dropped.
pub fn blocked_estimate(values: &[f64], n_blocks: usize) -> Result<EnergyEstimate> {
    let plain = estimate(values)?;
    let good: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if n_blocks < 2 || good.len() < 2 * n_blocks {
        return Err(Error::TooFewSamples {
            needed: 2 * n_blocks.max(2),
            got: good.len(),
        });
    }
    let len = good.len() / n_blocks;
    let means: Vec<f64> = good
        .chunks_exact(len)
        .take(n_blocks)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect();
    let blocks = estimate(&means)?;
    Ok(EnergyEstimate {
        std_error: blocks.std_error,
        ..plain
    })
}
