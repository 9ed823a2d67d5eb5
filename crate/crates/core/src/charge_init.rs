//! Per-nucleus electron placement for ions from Mulliken partial charges.
//!
//! Starting from the neutral-atom electron counts, each unit of ionic charge
//! moves one electron: a cation loses an electron from the atom carrying the
//! most positive partial charge, an anion gains one on the atom carrying the
//! most negative partial charge. The partial charge of the chosen atom is
//! shifted by one after each move so repeated moves spread across atoms.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectronAssignment {
    pub per_atom_electrons: Vec<usize>,
    pub per_atom_up: Vec<usize>,
    pub per_atom_down: Vec<usize>,
}

impl ElectronAssignment {
    pub fn n_up(&self) -> usize {
        self.per_atom_up.iter().sum()
    }

    pub fn n_down(&self) -> usize {
        self.per_atom_down.iter().sum()
    }
}

/// First index of the extreme value; ties go to the lowest index.
fn arg_extreme(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if better(v, values[best]) {
            best = i;
        }
    }
    best
}

fn assign_counted(
    partial_charges: &[f64],
    atomic_numbers: &[u32],
    ionic_charge: i32,
) -> Result<(Vec<usize>, usize)> {
    if partial_charges.len() != atomic_numbers.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} partial charges for {} atoms",
            partial_charges.len(),
            atomic_numbers.len()
        )));
    }
    if partial_charges.is_empty() {
        return Err(Error::ChargeInit("no atoms".into()));
    }
    let mut charge = partial_charges.to_vec();
    let mut electrons: Vec<usize> = atomic_numbers.iter().map(|&z| z as usize).collect();
    let mut t = ionic_charge;
    let mut steps = 0;
    while t != 0 {
        if t < 0 {
            let idx = arg_extreme(&charge, |a, b| a < b);
            electrons[idx] += 1;
            t += 1;
            charge[idx] += 1.0;
        } else {
            let idx = arg_extreme(&charge, |a, b| a > b);
            if electrons[idx] == 0 {
                return Err(Error::ChargeInit(format!(
                    "cannot remove an electron from atom {idx}, which has none left"
                )));
            }
            electrons[idx] -= 1;
            t -= 1;
            charge[idx] -= 1.0;
        }
        steps += 1;
    }
    Ok((electrons, steps))
}

/// Electron count per atom for a system with net `ionic_charge`
/// (positive = electrons removed).
pub fn assign_electrons(
    partial_charges: &[f64],
    atomic_numbers: &[u32],
    ionic_charge: i32,
) -> Result<Vec<usize>> {
    assign_counted(partial_charges, atomic_numbers, ionic_charge).map(|(e, _)| e)
}

/// Split per-atom counts into spins: ⌈e/2⌉ up and ⌊e/2⌋ down per atom, then
/// flip single spins in atom-index order until the global totals match.
pub fn split_spins(
    per_atom_electrons: &[usize],
    n_up: usize,
    n_down: usize,
) -> Result<ElectronAssignment> {
    let total: usize = per_atom_electrons.iter().sum();
    if total != n_up + n_down {
        return Err(Error::InfeasibleSpin(format!(
            "{total} assigned electrons cannot be split into {n_up} up and {n_down} down"
        )));
    }
    let mut up: Vec<usize> = per_atom_electrons.iter().map(|e| e.div_ceil(2)).collect();
    let mut down: Vec<usize> = per_atom_electrons.iter().map(|e| e / 2).collect();
    let mut excess = up.iter().sum::<usize>() as i64 - n_up as i64;
    let mut i = 0;
    while excess != 0 {
        // Each atom is visited at most once per pass; two passes always suffice
        // because a full pass can flip every electron of the surplus spin.
        if i >= 2 * up.len() {
            return Err(Error::InfeasibleSpin(
                "spin repair did not terminate".into(),
            ));
        }
        let a = i % up.len();
        if excess > 0 && up[a] > 0 {
            up[a] -= 1;
            down[a] += 1;
            excess -= 1;
        } else if excess < 0 && down[a] > 0 {
            down[a] -= 1;
            up[a] += 1;
            excess += 1;
        } else {
            i += 1;
        }
    }
    Ok(ElectronAssignment {
        per_atom_electrons: per_atom_electrons.to_vec(),
        per_atom_up: up,
        per_atom_down: down,
    })
}
