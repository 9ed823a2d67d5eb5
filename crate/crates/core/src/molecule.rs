//! Molecular geometry, nuclear charges and purely nuclear quantities.

use crate::error::{Error, Result};

/// Bohr per Angstrom.
pub const BOHR_PER_ANGSTROM: f64 = 1.0 / 0.52917721067;

/// Element symbols up to Kr; anything past Ne parses but is rejected as unsupported.
const ELEMENTS: [&str; 36] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr",
];

pub const MAX_SUPPORTED_Z: u32 = 10;

/// Atomic number for a (case-insensitive) element symbol.
pub fn atomic_number(symbol: &str) -> Result<u32> {
    ELEMENTS
        .iter()
        .position(|s| s.eq_ignore_ascii_case(symbol))
        .map(|i| i as u32 + 1)
        .ok_or_else(|| Error::UnknownElement(symbol.to_string()))
}

pub fn element_symbol(z: u32) -> Option<&'static str> {
    ELEMENTS.get((z as usize).checked_sub(1)?).copied()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub symbol: String,
    pub atomic_number: u32,
    /// Bohr.
    pub position: [f64; 3],
}

impl Atom {
    pub fn new(symbol: &str, position: [f64; 3]) -> Result<Self> {
        let z = atomic_number(symbol)?;
        if z > MAX_SUPPORTED_Z {
            return Err(Error::UnsupportedElement {
                symbol: symbol.to_string(),
                z,
            });
        }
        if position.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMolecule(format!(
                "non-finite coordinate for {symbol}"
            )));
        }
        Ok(Self {
            symbol: element_symbol(z).unwrap().to_string(),
            atomic_number: z,
            position,
        })
    }
}

/// Nuclear framework plus net charge and optional spin multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    ionic_charge: i32,
    spin_multiplicity: Option<u32>,
    n_up: usize,
    n_down: usize,
}

impl Molecule {
    pub fn new(
        atoms: Vec<Atom>,
        ionic_charge: i32,
        spin_multiplicity: Option<u32>,
    ) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMolecule("no atoms".into()));
        }
        let total_z: i64 = atoms.iter().map(|a| a.atomic_number as i64).sum();
        let n_elec = total_z - ionic_charge as i64;
        if n_elec < 1 {
            return Err(Error::InvalidMolecule(format!(
                "charge {ionic_charge} leaves {n_elec} electrons"
            )));
        }
        let n_elec = n_elec as usize;
        let unpaired = match spin_multiplicity {
            Some(0) => {
                return Err(Error::InfeasibleSpin(
                    "multiplicity must be positive".into(),
                ))
            }
            Some(m) => {
                let unpaired = (m - 1) as usize;
                if unpaired > n_elec || !(n_elec - unpaired).is_multiple_of(2) {
                    return Err(Error::InfeasibleSpin(format!(
                        "multiplicity {m} is incompatible with {n_elec} electrons"
                    )));
                }
                unpaired
            }
            None => n_elec % 2,
        };
        let n_down = (n_elec - unpaired) / 2;
        Ok(Self {
            atoms,
            ionic_charge,
            spin_multiplicity,
            n_up: n_down + unpaired,
            n_down,
        })
    }

    /// Parse a geometry file and attach charge and multiplicity.
    pub fn from_geometry_str(
        text: &str,
        ionic_charge: i32,
        spin_multiplicity: Option<u32>,
    ) -> Result<Self> {
        Self::new(parse_geometry(text)?, ionic_charge, spin_multiplicity)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn ionic_charge(&self) -> i32 {
        self.ionic_charge
    }

    pub fn spin_multiplicity(&self) -> Option<u32> {
        self.spin_multiplicity
    }

    pub fn atomic_numbers(&self) -> Vec<u32> {
        self.atoms.iter().map(|a| a.atomic_number).collect()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.atoms.iter().map(|a| a.position).collect()
    }

    pub fn n_electrons(&self) -> usize {
        self.n_up + self.n_down
    }

    /// `(n_up, n_down)`; lowest multiplicity consistent with parity unless
    /// a multiplicity was given.
    pub fn electron_count(&self) -> (usize, usize) {
        (self.n_up, self.n_down)
    }

    /// Σ_{m<n} Z_m Z_n / |R_m − R_n|.
    pub fn nuclear_repulsion(&self) -> Result<f64> {
        let mut e = 0.0;
        for (m, a) in self.atoms.iter().enumerate() {
            for (n, b) in self.atoms.iter().enumerate().skip(m + 1) {
                let r = distance(&a.position, &b.position);
                if r == 0.0 {
                    return Err(Error::CoincidentNuclei(m, n));
                }
                e += (a.atomic_number * b.atomic_number) as f64 / r;
            }
        }
        Ok(e)
    }

    /// Copy with every nucleus moved by `shift`.
    pub fn translated(&self, shift: [f64; 3]) -> Self {
        let mut out = self.clone();
        for a in &mut out.atoms {
            for d in 0..3 {
                a.position[d] += shift[d];
            }
        }
        out
    }

    /// Copy with nuclear positions replaced.
    pub fn with_positions(&self, positions: &[[f64; 3]]) -> Result<Self> {
        if positions.len() != self.atoms.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} positions for {} atoms",
                positions.len(),
                self.atoms.len()
            )));
        }
        let atoms = self
            .atoms
            .iter()
            .zip(positions)
            .map(|(a, p)| Atom::new(&a.symbol, *p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(atoms, self.ionic_charge, self.spin_multiplicity)
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Parse `SYMBOL x y z` lines with an optional `units bohr|angstrom` header.
/// Blank lines and `#` comments are skipped. Positions come back in Bohr.
pub fn parse_geometry(text: &str) -> Result<Vec<Atom>> {
    let mut scale = 1.0;
    let mut atoms = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens[0].eq_ignore_ascii_case("units") {
            if !atoms.is_empty() {
                return Err(Error::MalformedLine {
                    line: lineno + 1,
                    reason: "units header must precede atoms".into(),
                });
            }
            scale = match tokens.get(1).map(|s| s.to_ascii_lowercase()).as_deref() {
                Some("bohr") if tokens.len() == 2 => 1.0,
                Some("angstrom") if tokens.len() == 2 => BOHR_PER_ANGSTROM,
                _ => {
                    return Err(Error::MalformedLine {
                        line: lineno + 1,
                        reason: "expected `units bohr` or `units angstrom`".into(),
                    })
                }
            };
            continue;
        }
        if tokens.len() != 4 {
            return Err(Error::MalformedLine {
                line: lineno + 1,
                reason: format!("expected `SYMBOL x y z`, found {} fields", tokens.len()),
            });
        }
        let mut pos = [0.0; 3];
        for (d, tok) in tokens[1..].iter().enumerate() {
            pos[d] = tok.parse::<f64>().map_err(|_| Error::MalformedLine {
                line: lineno + 1,
                reason: format!("bad coordinate `{tok}`"),
            })? * scale;
        }
        atoms.push(Atom::new(tokens[0], pos)?);
    }
    Ok(atoms)
}

/// Render atoms back into the geometry file format (Bohr).
pub fn format_geometry(atoms: &[Atom]) -> String {
    let mut out = String::from("units bohr\n");
    for a in atoms {
        out.push_str(&format!(
            "{} {:?} {:?} {:?}\n",
            a.symbol, a.position[0], a.position[1], a.position[2]
        ));
    }
    out
}
