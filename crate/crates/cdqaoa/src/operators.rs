//! Dense operators for the target/mixer Hamiltonians, their commutator
//! generators, and unitaries via Hermitian eigendecomposition.
//!
//! Everything is dense: dimensions stay at or below 2^10, and the ansatz
//! evaluates thousands of costs per instance, so generators and their
//! eigendecompositions are built once per instance and shared read-only.

use faer::{Mat, Side};
use num_complex::Complex64;
use serde_json::json;

use crate::spin_model::{diagonal_energies, SpinInstance};
use crate::{Error, Result};

/// Verified symmetry class of a dense operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryTag {
    Hermitian,
    AntiHermitian,
    DiagonalReal,
    Unitary,
}

impl SymmetryTag {
    pub fn label(self) -> &'static str {
        match self {
            SymmetryTag::Hermitian => "hermitian",
            SymmetryTag::AntiHermitian => "anti_hermitian",
            SymmetryTag::DiagonalReal => "diagonal_real",
            SymmetryTag::Unitary => "unitary",
        }
    }
}

/// A dense complex matrix with a verified symmetry tag.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub entries: Mat<Complex64>,
    pub tag: SymmetryTag,
}

pub(crate) fn max_abs(m: &Mat<Complex64>) -> f64 {
    let mut mx = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            mx = mx.max(m[(i, j)].norm());
        }
    }
    mx
}

fn identity(dim: usize) -> Mat<Complex64> {
    Mat::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::ZERO
        }
    })
}

impl DenseOperator {
    /// Wraps a matrix after verifying it satisfies the claimed tag.
    pub fn new(entries: Mat<Complex64>, tag: SymmetryTag) -> Result<Self> {
        let scale = max_abs(&entries);
        let deviation = match tag {
            SymmetryTag::Hermitian => max_abs(&(&entries - entries.adjoint())),
            SymmetryTag::AntiHermitian => max_abs(&(&entries + entries.adjoint())),
            SymmetryTag::DiagonalReal => {
                let mut dev = 0.0f64;
                for j in 0..entries.ncols() {
                    for i in 0..entries.nrows() {
                        let v = entries[(i, j)];
                        if i == j {
                            dev = dev.max(v.im.abs());
                        } else {
                            dev = dev.max(v.norm());
                        }
                    }
                }
                // off-diagonal and imaginary parts must vanish exactly
                return if dev == 0.0 {
                    Ok(Self { entries, tag })
                } else {
                    Err(Error::TagViolation {
                        tag: tag.label(),
                        deviation: dev,
                    })
                };
            }
            SymmetryTag::Unitary => max_abs(&(entries.adjoint() * &entries - identity(entries.nrows()))),
        };
        let bound = match tag {
            SymmetryTag::Unitary => 1e-10,
            _ => 1e-12 * scale.max(f64::MIN_POSITIVE),
        };
        if deviation <= bound {
            Ok(Self { entries, tag })
        } else {
            Err(Error::TagViolation {
                tag: tag.label(),
                deviation,
            })
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// JSON dump (real/imag matrices) for cross-implementation comparison.
    pub fn to_json(&self) -> serde_json::Value {
        let dim = self.dim();
        let re: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| self.entries[(i, j)].re).collect())
            .collect();
        let im: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| self.entries[(i, j)].im).collect())
            .collect();
        json!({ "dim": dim, "tag": self.tag.label(), "re": re, "im": im })
    }
}

/// Transverse-field mixer `H_X = sum_i sigma_i^X` as a 0/1 matrix.
pub fn build_mixer(n_spins: usize) -> DenseOperator {
    assert!(n_spins >= 1, "mixer needs at least one spin");
    let dim = 1usize << n_spins;
    let mut m = Mat::<Complex64>::zeros(dim, dim);
    for b in 0..dim {
        for k in 0..n_spins {
            m[(b, b ^ (1 << k))] = Complex64::new(1.0, 0.0);
        }
    }
    DenseOperator {
        entries: m,
        tag: SymmetryTag::Hermitian,
    }
}

/// Diagonal target Hamiltonian of an instance.
pub fn build_target(instance: &SpinInstance) -> DenseOperator {
    let energies = diagonal_energies(instance);
    let dim = energies.len();
    let mut m = Mat::<Complex64>::zeros(dim, dim);
    for (b, &e) in energies.iter().enumerate() {
        m[(b, b)] = Complex64::new(e, 0.0);
    }
    DenseOperator {
        entries: m,
        tag: SymmetryTag::DiagonalReal,
    }
}

fn commutator_tag(a: SymmetryTag, b: SymmetryTag) -> Result<SymmetryTag> {
    use SymmetryTag::*;
    let h = |t| matches!(t, Hermitian | DiagonalReal);
    match (a, b) {
        (x, y) if h(x) && h(y) => Ok(AntiHermitian),
        (x, AntiHermitian) if h(x) => Ok(Hermitian),
        (AntiHermitian, y) if h(y) => Ok(Hermitian),
        (AntiHermitian, AntiHermitian) => Ok(AntiHermitian),
        _ => Err(Error::TagAlgebra(a.label(), b.label())),
    }
}

/// `[A, B] = AB - BA`, with the symmetry tag derived from the inputs.
pub fn commutator(a: &DenseOperator, b: &DenseOperator) -> Result<DenseOperator> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let tag = commutator_tag(a.tag, b.tag)?;
    let entries = &a.entries * &b.entries - &b.entries * &a.entries;
    Ok(DenseOperator { entries, tag })
}

/// First-order counterdiabatic generator.
///
/// `a = [H_X, H_T]` is anti-Hermitian; `m` is its Hermitian form with
/// `a = i m`, so the layer unitary `e^{-alpha a}` equals `e^{-i alpha m}`.
#[derive(Debug, Clone)]
pub struct CdGenerator {
    pub a: DenseOperator,
    pub m: DenseOperator,
}

pub fn cd_generator(instance: &SpinInstance) -> Result<CdGenerator> {
    let a = commutator(&build_mixer(instance.n_spins), &build_target(instance))?;
    let m_entries = Mat::from_fn(a.dim(), a.dim(), |i, j| {
        Complex64::new(0.0, -1.0) * a.entries[(i, j)]
    });
    let m = DenseOperator::new(m_entries, SymmetryTag::Hermitian)?;
    Ok(CdGenerator { a, m })
}

/// Second-order generators `K1 = [H_X, [H_X, H_T]]` and `K2 = [H_T, [H_X, H_T]]`.
pub fn second_order_generators(instance: &SpinInstance) -> Result<(DenseOperator, DenseOperator)> {
    let mixer = build_mixer(instance.n_spins);
    let target = build_target(instance);
    let inner = commutator(&mixer, &target)?;
    let k1 = commutator(&mixer, &inner)?;
    let k2 = commutator(&target, &inner)?;
    Ok((k1, k2))
}

/// Cached eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Eigenvalues in nondecreasing order.
    pub values: Vec<f64>,
    /// Unitary of eigenvectors, one per column.
    pub vectors: Mat<Complex64>,
}

impl HermitianEig {
    pub fn decompose(m: &Mat<Complex64>) -> Result<Self> {
        let eig = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::EigenFailure { dim: m.nrows() })?;
        let values = eig
            .S()
            .column_vector()
            .iter()
            .map(|v| v.re)
            .collect();
        Ok(Self {
            values,
            vectors: eig.U().to_owned(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Applies `e^{-i angle H}` to a state through the eigenbasis.
    pub fn apply_exp(&self, angle: f64, state: &mut [Complex64]) {
        let mut coords = adjoint_matvec(&self.vectors, state);
        for (c, &l) in coords.iter_mut().zip(&self.values) {
            *c *= Complex64::from_polar(1.0, -angle * l);
        }
        matvec_into(&self.vectors, &coords, state);
    }

    /// Dense matrix of `e^{-i angle H}`.
    pub fn exp_matrix(&self, angle: f64) -> Mat<Complex64> {
        let dim = self.dim();
        let mut phased = Mat::<Complex64>::zeros(dim, dim);
        for j in 0..dim {
            let phase = Complex64::from_polar(1.0, -angle * self.values[j]);
            for i in 0..dim {
                phased[(i, j)] = self.vectors[(i, j)] * phase;
            }
        }
        phased * self.vectors.adjoint()
    }
}

/// `y = M x` for a column-major dense matrix.
pub(crate) fn matvec(m: &Mat<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    let mut y = vec![Complex64::ZERO; m.nrows()];
    matvec_into(m, x, &mut y);
    y
}

pub(crate) fn matvec_into(m: &Mat<Complex64>, x: &[Complex64], y: &mut [Complex64]) {
    y.fill(Complex64::ZERO);
    for (j, &xj) in x.iter().enumerate() {
        if xj == Complex64::ZERO {
            continue;
        }
        for i in 0..m.nrows() {
            y[i] += m[(i, j)] * xj;
        }
    }
}

/// `y = M^dagger x`.
pub(crate) fn adjoint_matvec(m: &Mat<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    (0..m.ncols())
        .map(|j| {
            let mut acc = Complex64::ZERO;
            for (i, &xi) in x.iter().enumerate() {
                acc += m[(i, j)].conj() * xi;
            }
            acc
        })
        .collect()
}

/// `e^{-i angle m}` via eigendecomposition; the result is verified unitary.
pub fn unitary_from_hermitian(m: &DenseOperator, angle: f64) -> Result<DenseOperator> {
    if !matches!(m.tag, SymmetryTag::Hermitian | SymmetryTag::DiagonalReal) {
        return Err(Error::NotHermitian);
    }
    let eig = HermitianEig::decompose(&m.entries)?;
    DenseOperator::new(eig.exp_matrix(angle), SymmetryTag::Unitary)
}

/// Per-instance operator cache shared by every cost evaluation.
#[derive(Debug, Clone)]
pub struct OperatorCache {
    pub energies: Vec<f64>,
    pub cd: Option<CdCache>,
    pub second: Option<SecondCache>,
}

#[derive(Debug, Clone)]
pub struct CdCache {
    /// Hermitian form of `[H_X, H_T]`.
    pub m: Mat<Complex64>,
    pub eig: HermitianEig,
}

#[derive(Debug, Clone)]
pub struct SecondCache {
    pub k1: Mat<Complex64>,
    pub k2: Mat<Complex64>,
}

impl OperatorCache {
    pub fn build(instance: &SpinInstance, with_cd: bool, with_second: bool) -> Result<Self> {
        let energies = diagonal_energies(instance);
        let cd = if with_cd || with_second {
            let gen = cd_generator(instance)?;
            let eig = HermitianEig::decompose(&gen.m.entries)?;
            Some(CdCache {
                m: gen.m.entries,
                eig,
            })
        } else {
            None
        };
        let second = if with_second {
            let (k1, k2) = second_order_generators(instance)?;
            Some(SecondCache {
                k1: k1.entries,
                k2: k2.entries,
            })
        } else {
            None
        };
        Ok(Self {
            energies,
            cd,
            second,
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }
}
