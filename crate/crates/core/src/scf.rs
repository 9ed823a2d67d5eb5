//! Unrestricted Hartree–Fock and Mulliken population analysis.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::basis::{
    eri_tensor, kinetic_matrix, nuclear_attraction_matrix, overlap_matrix, BasisSet, EriTensor,
};
use crate::error::{Error, Result};
use crate::molecule::Molecule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScfOptions {
    pub max_iterations: usize,
    /// Converged once the largest density element change falls below this...
    pub density_tolerance: f64,
    /// ...and the total energy change falls below this.
    pub energy_tolerance: f64,
    /// Weight of the new density during the damped iterations.
    pub damping: f64,
    pub damped_iterations: usize,
}

impl Default for ScfOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            density_tolerance: 1e-8,
            energy_tolerance: 1e-10,
            damping: 0.5,
            damped_iterations: 5,
        }
    }
}

/// Converged UHF state. Index 0 is spin up, 1 is spin down.
#[derive(Debug, Clone)]
pub struct ScfSolution {
    pub mo_coefficients: [DMatrix<f64>; 2],
    pub orbital_energies: [DVector<f64>; 2],
    pub density_matrices: [DMatrix<f64>; 2],
    pub overlap: DMatrix<f64>,
    pub n_occupied: [usize; 2],
    pub total_energy: f64,
    pub nuclear_repulsion: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl ScfSolution {
    pub fn total_density(&self) -> DMatrix<f64> {
        &self.density_matrices[0] + &self.density_matrices[1]
    }

    /// Occupied block of the coefficient matrix for one spin.
    pub fn occupied(&self, spin: usize) -> DMatrix<f64> {
        self.mo_coefficients[spin]
            .columns(0, self.n_occupied[spin])
            .into_owned()
    }
}

/// S^{-1/2} by symmetric orthogonalization.
fn inverse_sqrt(s: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = s.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| e.sqrt().recip()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Eigenpairs of the symmetric `f`, sorted by ascending eigenvalue.
fn sorted_eigen(f: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = f.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i))
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

fn density(c: &DMatrix<f64>, n_occ: usize) -> DMatrix<f64> {
    let occ = c.columns(0, n_occ);
    occ * occ.transpose()
}

/// Coulomb J(P) and exchange K(P).
fn coulomb_exchange(eri: &EriTensor, p: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = eri.dim();
    let mut j = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    for mu in 0..n {
        for nu in 0..n {
            let mut jv = 0.0;
            let mut kv = 0.0;
            for la in 0..n {
                for si in 0..n {
                    let pv = p[(la, si)];
                    jv += pv * eri.get(mu, nu, la, si);
                    kv += pv * eri.get(mu, la, nu, si);
                }
            }
            j[(mu, nu)] = jv;
            k[(mu, nu)] = kv;
        }
    }
    (j, k)
}

/// Unrestricted Hartree–Fock from a core-Hamiltonian guess.
pub fn run_uhf(
    mol: &Molecule,
    basis: &BasisSet,
    n_up: usize,
    n_down: usize,
    opts: &ScfOptions,
) -> Result<ScfSolution> {
    let nbf = basis.len();
    if n_up + n_down == 0 {
        return Err(Error::InvalidMolecule("no electrons".into()));
    }
    for n in [n_up, n_down] {
        if n > nbf {
            return Err(Error::TooManyElectrons {
                electrons: n,
                functions: nbf,
            });
        }
    }
    let e_nuc = mol.nuclear_repulsion()?;
    let s = overlap_matrix(basis);
    let h = kinetic_matrix(basis) + nuclear_attraction_matrix(basis, mol);
    let eri = eri_tensor(basis);
    let x = inverse_sqrt(&s);
    let n_occ = [n_up, n_down];

    let mut p = [DMatrix::zeros(nbf, nbf), DMatrix::zeros(nbf, nbf)];
    let mut e_prev = f64::NAN;
    let mut delta_e = f64::INFINITY;
    let mut delta_p = f64::INFINITY;

    for iter in 1..=opts.max_iterations {
        let (j, _) = coulomb_exchange(&eri, &(&p[0] + &p[1]));
        let mut fock = [h.clone(), h.clone()];
        for spin in 0..2 {
            let (_, k) = coulomb_exchange(&eri, &p[spin]);
            fock[spin] += &j - k;
        }
        let e_elec: f64 = (0..2)
            .map(|spin| 0.5 * (&h + &fock[spin]).component_mul(&p[spin]).sum())
            .sum();
        let e_total = e_elec + e_nuc;

        let mut energies: [DVector<f64>; 2] = [DVector::zeros(nbf), DVector::zeros(nbf)];
        let mut coeffs: [DMatrix<f64>; 2] = [DMatrix::zeros(nbf, nbf), DMatrix::zeros(nbf, nbf)];
        let mut p_new = p.clone();
        for spin in 0..2 {
            let (eps, c_ortho) = sorted_eigen(&(x.transpose() * &fock[spin] * &x));
            coeffs[spin] = &x * c_ortho;
            energies[spin] = eps;
            p_new[spin] = density(&coeffs[spin], n_occ[spin]);
        }

        let damped = iter > 1 && iter <= opts.damped_iterations;
        delta_p = (0..2)
            .map(|s| (&p_new[s] - &p[s]).amax())
            .fold(0.0, f64::max);
        delta_e = (e_total - e_prev).abs();
        e_prev = e_total;

        if !damped && delta_p < opts.density_tolerance && delta_e < opts.energy_tolerance {
            return Ok(ScfSolution {
                mo_coefficients: coeffs,
                orbital_energies: energies,
                density_matrices: p_new,
                overlap: s,
                n_occupied: n_occ,
                total_energy: e_total,
                nuclear_repulsion: e_nuc,
                converged: true,
                iterations: iter,
            });
        }
        for spin in 0..2 {
            p[spin] = if damped {
                opts.damping * &p_new[spin] + (1.0 - opts.damping) * &p[spin]
            } else {
                p_new[spin].clone()
            };
        }
    }
    Err(Error::ScfNotConverged {
        iterations: opts.max_iterations,
        delta_energy: delta_e,
        delta_density: delta_p,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MullikenReport {
    pub populations: Vec<f64>,
    pub partial_charges: Vec<f64>,
}

/// Mulliken populations from diag(P_total · S) grouped by atom.
pub fn mulliken(scf: &ScfSolution, basis: &BasisSet, mol: &Molecule) -> Result<MullikenReport> {
    if !scf.converged {
        return Err(Error::UnconvergedInput);
    }
    Ok(mulliken_from_density(
        &scf.total_density(),
        &scf.overlap,
        basis,
        mol,
    ))
}

pub fn mulliken_from_density(
    p: &DMatrix<f64>,
    s: &DMatrix<f64>,
    basis: &BasisSet,
    mol: &Molecule,
) -> MullikenReport {
    let ps = p * s;
    let mut populations = vec![0.0; mol.n_atoms()];
    for (mu, f) in basis.functions.iter().enumerate() {
        populations[f.atom] += ps[(mu, mu)];
    }
    let partial_charges = mol
        .atoms()
        .iter()
        .zip(&populations)
        .map(|(a, pop)| a.atomic_number as f64 - pop)
        .collect();
    MullikenReport {
        populations,
        partial_charges,
    }
}

/// Occupied HF orbitals evaluated at electron positions.
///
/// Electrons are ordered up block first, then down block. The returned
/// matrices have entry (i, j) = φ_i(r_j) for orbital i and electron j of the
/// matching spin.
pub fn hf_orbital_values(
    scf: &ScfSolution,
    basis: &BasisSet,
    positions: &[[f64; 3]],
) -> Result<[DMatrix<f64>; 2]> {
    if !scf.converged {
        return Err(Error::UnconvergedInput);
    }
    let [n_up, n_down] = scf.n_occupied;
    if positions.len() != n_up + n_down {
        return Err(Error::ShapeMismatch(format!(
            "{} positions for {} electrons",
            positions.len(),
            n_up + n_down
        )));
    }
    let chi: Vec<Vec<f64>> = positions.iter().map(|r| basis.values_at(r)).collect();
    let block = |spin: usize, offset: usize| {
        let n = scf.n_occupied[spin];
        let c = &scf.mo_coefficients[spin];
        DMatrix::from_fn(n, n, |i, j| {
            chi[offset + j]
                .iter()
                .enumerate()
                .map(|(mu, v)| c[(mu, i)] * v)
                .sum()
        })
    };
    Ok([block(0, 0), block(1, n_up)])
}

fn dump_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{name} {} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

/// Plain-text dump of S and per-spin C, P and orbital energies.
/// Each block is a `name rows cols` header followed by row-major values.
pub fn dump_solution(scf: &ScfSolution) -> String {
    let mut out = String::new();
    dump_matrix(&mut out, "S", &scf.overlap);
    for (spin, label) in ["up", "down"].iter().enumerate() {
        dump_matrix(&mut out, &format!("C_{label}"), &scf.mo_coefficients[spin]);
        dump_matrix(&mut out, &format!("P_{label}"), &scf.density_matrices[spin]);
        let eps = &scf.orbital_energies[spin];
        dump_matrix(
            &mut out,
            &format!("eps_{label}"),
            &DMatrix::from_row_slice(1, eps.len(), eps.as_slice()),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;

    // PySCF UHF/STO-6G total energies (conv_tol 1e-12, unit Bohr).
    const E_H: f64 = -0.47103905418349024;
    const E_HE: f64 = -2.846292094842575;
    const E_H2_14: f64 = -1.1253243671827482;
    // Full CI for H2/STO-6G at 1.4 Bohr from the same package.
    const E_H2_FCI: f64 = -1.1459292449765135;
    // LiH+ at 3.723 Bohr: Mulliken charges from the same package.
    const LIH_CATION_CHARGES: [f64; 2] = [0.82773832, 0.17226168];

    fn solve(text: &str, charge: i32) -> (Molecule, BasisSet, ScfSolution) {
        let m = Molecule::from_geometry_str(text, charge, None).unwrap();
        let b = build_basis(&m).unwrap();
        let (u, d) = m.electron_count();
        let s = run_uhf(&m, &b, u, d, &ScfOptions::default()).unwrap();
        (m, b, s)
    }

    #[test]
    fn reference_energies() {
        assert!((solve("H 0 0 0", 0).2.total_energy - E_H).abs() < 1e-6);
        assert!((solve("He 0 0 0", 0).2.total_energy - E_HE).abs() < 1e-6);
        let h2 = solve("H 0 0 0\nH 0 0 1.4", 0).2;
        assert!((h2.total_energy - E_H2_14).abs() < 1e-6);
        assert!(h2.total_energy >= E_H2_FCI);
    }

    #[test]
    fn closed_shell_helium_is_restricted() {
        let s = solve("He 0 0 0", 0).2;
        let diff = (&s.mo_coefficients[0] - &s.mo_coefficients[1]).amax();
        assert!(diff < 1e-8);
    }

    #[test]
    fn orthonormal_orbitals_and_projector_density() {
        let (_, _, s) = solve("Li 0 0 0\nH 0 0 3.015", 1);
        for spin in 0..2 {
            let c = &s.mo_coefficients[spin];
            let ctsc = c.transpose() * &s.overlap * c;
            assert!((ctsc - DMatrix::identity(c.ncols(), c.ncols())).amax() < 1e-8);
            let p = &s.density_matrices[spin];
            assert!(((p * &s.overlap).trace() - s.n_occupied[spin] as f64).abs() < 1e-8);
            assert!((p * &s.overlap * p - p).amax() < 1e-6);
        }
    }

    #[test]
    fn too_many_electrons() {
        let m = Molecule::from_geometry_str("H 0 0 0\nH 0 0 1.4", 0, Some(3)).unwrap();
        let b = build_basis(&m).unwrap();
        assert!(run_uhf(&m, &b, 3, 0, &ScfOptions::default()).is_err());
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let m = Molecule::from_geometry_str("Li 0 0 0\nH 0 0 3.015", 0, None).unwrap();
        let b = build_basis(&m).unwrap();
        let opts = ScfOptions {
            max_iterations: 2,
            ..Default::default()
        };
        assert!(matches!(
            run_uhf(&m, &b, 2, 2, &opts),
            Err(Error::ScfNotConverged { iterations: 2, .. })
        ));
    }

    #[test]
    fn mulliken_sums_and_symmetry() {
        let (m, b, s) = solve("H 0 0 0\nH 0 0 1.4", 0);
        let r = mulliken(&s, &b, &m).unwrap();
        assert!(r.partial_charges.iter().all(|q| q.abs() < 1e-10));

        let (m, b, s) = solve("Li 0 0 0\nH 0 0 3.723", 1);
        let r = mulliken(&s, &b, &m).unwrap();
        assert!((r.populations.iter().sum::<f64>() - 3.0).abs() < 1e-8);
        assert!((r.partial_charges.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        for (q, expected) in r.partial_charges.iter().zip(LIH_CATION_CHARGES) {
            assert!((q - expected).abs() < 1e-6, "{q} vs {expected}");
        }
    }

    #[test]
    fn closed_shell_spin_populations_double() {
        let (m, b, s) = solve("Li 0 0 0\nH 0 0 3.015", 0);
        let up = mulliken_from_density(&s.density_matrices[0], &s.overlap, &b, &m);
        let total = mulliken(&s, &b, &m).unwrap();
        for (t, u) in total.populations.iter().zip(&up.populations) {
            assert!((t - 2.0 * u).abs() < 1e-8);
        }
    }

    #[test]
    fn unconverged_rejected() {
        let (m, b, mut s) = solve("H 0 0 0", 0);
        s.converged = false;
        assert!(matches!(mulliken(&s, &b, &m), Err(Error::UnconvergedInput)));
    }

    #[test]
    fn orbital_values_decay_and_match_brute_force() {
        let (_, b, s) = solve("H 0 0 0", 0);
        let at = |r: f64| hf_orbital_values(&s, &b, &[[0.0, 0.0, r]]).unwrap()[0][(0, 0)].abs();
        assert!(at(0.0) > at(5.0) && at(5.0) > at(50.0) && at(50.0) > 0.0);

        let (_, b, s) = solve("H 0 0 0\nH 0 0 1.4", 0);
        let mid = [0.0, 0.0, 0.7];
        let vals = hf_orbital_values(&s, &b, &[mid, mid]).unwrap();
        // Independent evaluation straight from the raw table rows.
        let raw = crate::basis::sto6g_shells(1).unwrap()[0].primitives.clone();
        let chi = |center: f64| {
            let r2 = (0.7f64 - center).powi(2);
            let unnorm: f64 = raw
                .iter()
                .map(|&(a, c)| c * (2.0 * a / std::f64::consts::PI).powf(0.75) * (-a * r2).exp())
                .sum();
            let mut s = 0.0;
            for &(a, c) in &raw {
                for &(bb, d) in &raw {
                    let na = (2.0 * a / std::f64::consts::PI).powf(0.75);
                    let nb = (2.0 * bb / std::f64::consts::PI).powf(0.75);
                    s += c * d * na * nb * (std::f64::consts::PI / (a + bb)).powf(1.5);
                }
            }
            unnorm / s.sqrt()
        };
        let c = &s.mo_coefficients[0];
        let expected = c[(0, 0)] * chi(0.0) + c[(1, 0)] * chi(1.4);
        assert!((vals[0][(0, 0)] - expected).abs() < 1e-12);
    }

    #[test]
    fn identical_positions_give_identical_columns() {
        let (_, b, s) = solve("Li 0 0 0\nH 0 0 3.015", 0);
        let r = [0.3, -0.2, 1.1];
        let v = hf_orbital_values(&s, &b, &[r, r, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(v[0].column(0), v[0].column(1));
    }

    #[test]
    fn dump_has_headers() {
        let (_, _, s) = solve("H 0 0 0\nH 0 0 1.4", 0);
        let text = dump_solution(&s);
        assert!(text.starts_with("S 2 2\n"));
        assert!(text.contains("C_down 2 2"));
        assert!(text.contains("eps_up 1 2"));
    }
}
