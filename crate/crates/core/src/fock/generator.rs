//! Assembly of the tilted Lindblad generator on a truncated Fock space.
//!
//! Density operators are vectorised by column stacking, so ρ_{mn} sits at
//! index `m + n (N_f + 1)` and the superoperator ρ ↦ AρB is `Bᵀ ⊗ A`.

use std::collections::BTreeMap;
use std::io::{self, Write};

use num_complex::Complex64;

use super::FockError;
use crate::model::{CountingMode, SystemModel};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    /// Builds from unsorted triplets; duplicates are summed and exact zeros
    /// dropped.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, Complex64)>) -> Self {
        let mut acc: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            *acc.entry((r, c)).or_default() += v;
        }
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(acc.len());
        let mut values = Vec::with_capacity(acc.len());
        for ((r, c), v) in acc {
            if v == Complex64::new(0.0, 0.0) {
                continue;
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { dim, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `y = (A + shift·I) x`.
    pub fn matvec_shifted(&self, x: &[Complex64], shift: f64, y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = x[r] * shift;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Submatrix on `indices` (rows and columns), in the given order.
    pub fn restrict(&self, indices: &[usize]) -> CsrMatrix {
        let mut position = vec![usize::MAX; self.dim];
        for (i, &g) in indices.iter().enumerate() {
            position[g] = i;
        }
        let triplets = indices.iter().enumerate().flat_map(|(i, &g)| {
            let position = &position;
            self.row(g).filter(|&(c, _)| position[c] != usize::MAX).map(move |(c, v)| (i, position[c], v))
        });
        CsrMatrix::from_triplets(indices.len(), triplets.collect::<Vec<_>>())
    }

    /// Osborne balancing started from the scaling `initial`: returns D⁻¹AD
    /// with diagonal D chosen so that the off-diagonal row and column norms
    /// of every index agree, and D itself. Eigenvalues are unchanged; an
    /// eigenvector v of the result maps back to Dv.
    pub fn balanced(&self, initial: Vec<f64>, sweeps: usize) -> (CsrMatrix, Vec<f64>) {
        let n = self.dim;
        assert_eq!(initial.len(), n);
        let mut by_column: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, c, v) in self.triplets() {
            if r != c {
                by_column[c].push((r, v.norm()));
            }
        }
        let mut d = initial;
        for _ in 0..sweeps {
            let mut changed = false;
            for i in 0..n {
                let row: f64 = self.row(i).filter(|&(c, _)| c != i).map(|(c, v)| v.norm() * d[c]).sum::<f64>() / d[i];
                let col: f64 = by_column[i].iter().map(|&(r, v)| v / d[r]).sum::<f64>() * d[i];
                if row == 0.0 || col == 0.0 {
                    continue;
                }
                let f = (row / col).sqrt();
                if (f - 1.0).abs() > 1e-3 {
                    changed = true;
                }
                d[i] *= f;
            }
            if !changed {
                break;
            }
        }
        let scaled = self.triplets().map(|(r, c, v)| (r, c, v * (d[c] / d[r]))).collect::<Vec<_>>();
        (CsrMatrix::from_triplets(n, scaled), d)
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim).map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }
}

/// Sparse d×d operator on the truncated Fock space.
#[derive(Debug, Clone, Default)]
struct FockOp(Vec<(usize, usize, f64)>);

impl FockOp {
    fn identity(d: usize) -> Self {
        FockOp((0..d).map(|n| (n, n, 1.0)).collect())
    }
    fn annihilation(d: usize) -> Self {
        FockOp((1..d).map(|n| (n - 1, n, (n as f64).sqrt())).collect())
    }
    fn creation(d: usize) -> Self {
        FockOp((1..d).map(|n| (n, n - 1, (n as f64).sqrt())).collect())
    }
    fn diagonal(values: impl IntoIterator<Item = f64>) -> Self {
        FockOp(values.into_iter().enumerate().filter(|(_, v)| *v != 0.0).map(|(n, v)| (n, n, v)).collect())
    }
}

/// Tilted generator W + L_s on a Fock space truncated at occupation `cutoff`.
#[derive(Debug, Clone)]
pub struct TruncatedGenerator {
    pub cutoff: usize,
    pub matrix: CsrMatrix,
    pub mode: CountingMode,
    pub s: f64,
    pub model: SystemModel,
}

impl TruncatedGenerator {
    pub fn levels(&self) -> usize {
        self.cutoff + 1
    }

    pub fn dimension(&self) -> usize {
        self.matrix.dim()
    }

    /// Column-stacked position of ρ_{mn}.
    pub fn index(&self, m: usize, n: usize) -> usize {
        m + n * self.levels()
    }

    /// Diagonal similarity r^{(m+n)/2} that symmetrises the population
    /// chain of the undriven generator, with r² the ratio of total tilted
    /// absorption to emission weight.
    pub fn symmetrising_scale(&self) -> Vec<f64> {
        let (mut emission, mut absorption) = (0.0, 0.0);
        for (index, bath) in self.model.baths().iter().enumerate() {
            let reference = index == 0;
            emission += bath.gamma_to() * if reference { (-self.s).exp() } else { 1.0 };
            let net = reference && self.mode == CountingMode::NetExchange;
            absorption += bath.gamma_from() * if net { self.s.exp() } else { 1.0 };
        }
        let log_r = if emission > 0.0 && absorption > 0.0 { 0.5 * (absorption / emission).ln() } else { 0.0 };
        let d = self.levels();
        (0..d * d).map(|i| (0.5 * ((i % d) + (i / d)) as f64 * log_r).clamp(-600.0, 600.0).exp()).collect()
    }

    /// Applies the generator to a d×d operator stored row-major as `rho[m][n]`.
    pub fn apply(&self, rho: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let d = self.levels();
        let mut v = vec![Complex64::new(0.0, 0.0); d * d];
        for m in 0..d {
            for n in 0..d {
                v[self.index(m, n)] = rho[m][n];
            }
        }
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        self.matrix.matvec_shifted(&v, 0.0, &mut out);
        (0..d).map(|m| (0..d).map(|n| out[self.index(m, n)]).collect()).collect()
    }

    /// Coordinate dump, one `row col re im` line per stored entry, 0-indexed,
    /// rows ascending then columns ascending. Values use 17 significant
    /// digits.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# dim {} cutoff {} s {:.16e} mode {}", self.dimension(), self.cutoff, self.s, self.mode)?;
        for (r, c, v) in self.matrix.triplets() {
            writeln!(w, "{r} {c} {:.16e} {:.16e}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Assembles the tilted generator. The reference bath's emission recycling
/// term carries e^{−s}; for net counting its absorption recycling term
/// carries e^{s}. The Hamiltonian is ω a†a + 2ωF (a† + a) for a constant
/// force F.
pub fn build_generator(
    model: &SystemModel,
    mode: CountingMode,
    s: f64,
    cutoff: usize,
) -> Result<TruncatedGenerator, FockError> {
    if cutoff < 1 {
        return Err(FockError::CutoffTooSmall { cutoff, minimum: 1 });
    }
    let omega = model.omega();
    if !model.drive().is_stationary(omega) {
        return Err(FockError::PeriodicDriveUnsupported);
    }
    let d = cutoff + 1;
    let a = FockOp::annihilation(d);
    let ad = FockOp::creation(d);
    let id = FockOp::identity(d);
    let num = FockOp::diagonal((0..d).map(|n| n as f64));
    // a a† on the truncated space: the top level has no partner above it.
    let anti = FockOp::diagonal((0..d).map(|n| if n + 1 < d { (n + 1) as f64 } else { 0.0 }));

    let drive = model.hamiltonian_drive(0.0);
    let mut hamiltonian = FockOp::diagonal((0..d).map(|n| omega * n as f64));
    if drive != 0.0 {
        hamiltonian.0.extend(a.0.iter().chain(ad.0.iter()).map(|&(i, j, v)| (i, j, drive * v)));
    }

    let mut triplets = Vec::new();
    let mut term = |left: &FockOp, right: &FockOp, coeff: Complex64| {
        for &(i, k, av) in &left.0 {
            for &(l, j, bv) in &right.0 {
                triplets.push((i + j * d, k + l * d, coeff * av * bv));
            }
        }
    };
    let i_unit = Complex64::new(0.0, 1.0);
    term(&hamiltonian, &id, -i_unit);
    term(&id, &hamiltonian, i_unit);
    for (index, bath) in model.baths().iter().enumerate() {
        let reference = index == 0;
        let emit_weight = if reference { (-s).exp() } else { 1.0 };
        let absorb_weight = if reference && mode == CountingMode::NetExchange { s.exp() } else { 1.0 };
        let (g, gb) = (bath.gamma_to(), bath.gamma_from());
        if g != 0.0 {
            term(&a, &ad, Complex64::from(2.0 * g * emit_weight));
            term(&num, &id, Complex64::from(-g));
            term(&id, &num, Complex64::from(-g));
        }
        if gb != 0.0 {
            term(&ad, &a, Complex64::from(2.0 * gb * absorb_weight));
            term(&anti, &id, Complex64::from(-gb));
            term(&id, &anti, Complex64::from(-gb));
        }
    }
    let matrix = CsrMatrix::from_triplets(d * d, triplets);
    Ok(TruncatedGenerator { cutoff, matrix, mode, s, model: model.clone() })
}
