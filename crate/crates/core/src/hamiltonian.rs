//! Matrix-free Rydberg Hamiltonian.
//!
//! ```text
//! H = Ω/2 Σ_j (e^{iφ}|g_j⟩⟨r_j| + h.c.) − Δ Σ_j n_j + Σ_{j<k} V_jk n_j n_k
//! ```
//!
//! The interaction part is diagonal in the computational basis and does not
//! depend on the drive, so it is tabulated once per register in a
//! [`DiagonalCache`]. Detuning and drive are applied on the fly.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::register::AtomRegister;
use crate::state::QuantumState;

/// Largest register the dense state vector supports by default.
pub const DEFAULT_MAX_ATOMS: usize = 24;

/// `R_b = (C6 / sqrt(Ω² + Δ²))^(1/6)`, in μm.
pub fn blockade_radius(omega: f64, delta: f64, c6: f64) -> Result<f64> {
    let drive = omega.hypot(delta);
    if drive == 0.0 {
        return Err(Error::ZeroDrive);
    }
    Ok((c6 / drive).powf(1.0 / 6.0))
}

/// Pairwise van der Waals energies `V_jk = C6 / |x_j − x_k|⁶`, rad/μs.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionTable {
    n: usize,
    v: Vec<f64>,
}

impl InteractionTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.v[j * self.n + k]
    }

    /// Builds the table, dropping pairs farther apart than `cutoff` μm.
    pub fn with_cutoff(register: &AtomRegister, c6: f64, cutoff: Option<f64>) -> Result<Self> {
        let n = register.len();
        let mut v = vec![0.0; n * n];
        for j in 0..n {
            for k in j + 1..n {
                let d = register.distance(j, k);
                if d == 0.0 {
                    return Err(Error::CoincidentAtoms(j, k));
                }
                if cutoff.is_some_and(|c| d > c) {
                    continue;
                }
                let e = c6 / d.powi(6);
                v[j * n + k] = e;
                v[k * n + j] = e;
            }
        }
        Ok(Self { n, v })
    }
}

pub fn interaction_table(register: &AtomRegister, c6: f64) -> Result<InteractionTable> {
    InteractionTable::with_cutoff(register, c6, None)
}

/// Interaction energy of every basis state.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalCache {
    n: usize,
    energies: Vec<f64>,
}

impl DiagonalCache {
    pub fn with_limit(table: &InteractionTable, max_atoms: usize) -> Result<Self> {
        let n = table.n();
        if n > max_atoms || n >= usize::BITS as usize {
            return Err(Error::TooManyAtoms { n, max: max_atoms });
        }
        let dim = 1usize << n;
        let mut energies = vec![0.0; dim];
        // Peel the lowest set bit: E(b) = E(b') + Σ_{k ∈ b'} V(low, k).
        for b in 1..dim {
            let low = b.trailing_zeros() as usize;
            let rest = b & (b - 1);
            let mut e = energies[rest];
            let mut bits = rest;
            while bits != 0 {
                let k = bits.trailing_zeros() as usize;
                e += table.get(low, k);
                bits &= bits - 1;
            }
            energies[b] = e;
        }
        Ok(Self { n, energies })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Cache with every interaction energy multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            energies: self.energies.iter().map(|e| e * factor).collect(),
        }
    }
}

pub fn diagonal_energies(table: &InteractionTable) -> Result<DiagonalCache> {
    DiagonalCache::with_limit(table, DEFAULT_MAX_ATOMS)
}

/// Drive matrix element `⟨…g_j…|H|…r_j…⟩ = Ω/2 · e^{iφ}`.
#[inline]
pub(crate) fn drive_coupling(omega: f64, phi: f64) -> Complex64 {
    Complex64::from_polar(0.5 * omega, phi)
}

/// `out += X ψ` where `X` flips one atom at a time with amplitude `coupling`
/// for r→g and its conjugate for g→r.
pub(crate) fn add_drive(psi: &[Complex64], out: &mut [Complex64], n: usize, coupling: Complex64) {
    if coupling == Complex64::new(0.0, 0.0) {
        return;
    }
    let lowering = coupling;
    let raising = coupling.conj();
    for j in 0..n {
        let half = 1usize << j;
        for (o, p) in out.chunks_exact_mut(2 * half).zip(psi.chunks_exact(2 * half)) {
            let (o0, o1) = o.split_at_mut(half);
            let (p0, p1) = p.split_at(half);
            for i in 0..half {
                o0[i] += lowering * p1[i];
                o1[i] += raising * p0[i];
            }
        }
    }
}

/// `H ψ` for the given instantaneous controls.
pub fn apply_hamiltonian(
    state: &QuantumState,
    cache: &DiagonalCache,
    omega: f64,
    delta: f64,
    phi: f64,
) -> Result<QuantumState> {
    if state.dim() != cache.dim() {
        return Err(Error::DimensionMismatch {
            expected: cache.dim(),
            found: state.dim(),
        });
    }
    let psi = state.amplitudes();
    let mut out: Vec<Complex64> = psi
        .iter()
        .zip(cache.energies())
        .enumerate()
        .map(|(b, (a, e))| a * (e - delta * b.count_ones() as f64))
        .collect();
    add_drive(psi, &mut out, cache.n(), drive_coupling(omega, phi));
    QuantumState::from_amplitudes(cache.n(), out)
}
