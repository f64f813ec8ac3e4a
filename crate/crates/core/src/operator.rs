//! Model data and the algebraic primitives of the formal generator
//! `ℒ(x) = φ(x) − G*x − xG` on a finite truncation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, CVec};
use crate::tolerance::Tolerances;

/// Serde adapter: matrices as nested arrays of `[re, im]` pairs, row-major.
pub mod cmat_serde {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserializer, Serializer};

    pub fn to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> std::result::Result<CMat, String> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err("ragged matrix rows".into());
        }
        Ok(CMat::from_fn(r, c, |i, j| c64(rows[i][j][0], rows[i][j][1])))
    }

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }

    pub mod list {
        use super::*;

        pub fn serialize<S: Serializer>(ms: &[CMat], s: S) -> std::result::Result<S::Ok, S::Error> {
            ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CMat>, D::Error> {
            let all = Vec::<Vec<Vec<[f64; 2]>>>::deserialize(d)?;
            all.iter().map(|rows| from_rows(rows).map_err(D::Error::custom)).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSpace {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_labels: Option<Vec<String>>,
}

impl TruncatedSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("truncation dimension must be at least 1".into()));
        }
        Ok(TruncatedSpace { dim, basis_labels: None })
    }

    pub fn with_labels(dim: usize, labels: Vec<String>) -> Result<Self> {
        if labels.len() != dim {
            return Err(Error::Dimension(format!("{} labels for dimension {dim}", labels.len())));
        }
        Ok(TruncatedSpace { dim, basis_labels: Some(labels) })
    }
}

/// The distinguished subspace `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Domain {
    /// Span of the listed standard basis vectors.
    Indices(Vec<usize>),
    /// Span of the (orthonormal) columns.
    Basis(#[serde(with = "cmat_serde")] CMat),
}

impl Domain {
    pub fn full(dim: usize) -> Self {
        Domain::Indices((0..dim).collect())
    }

    /// Orthonormal basis as columns of a `dim × d` matrix.
    pub fn basis(&self, dim: usize) -> CMat {
        match self {
            Domain::Indices(ix) => {
                let mut b = CMat::zeros(dim, ix.len());
                for (col, &i) in ix.iter().enumerate() {
                    b[(i, col)] = c64(1.0, 0.0);
                }
                b
            }
            Domain::Basis(b) => b.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Domain::Indices(ix) => ix.len(),
            Domain::Basis(b) => b.ncols(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Norm of the component of `u` orthogonal to `D`.
    pub fn distance(&self, dim: usize, u: &CVec) -> f64 {
        let b = self.basis(dim);
        let proj = &b * (b.adjoint() * u);
        (u - proj).norm()
    }
}

/// A truncated model: `G`, Kraus operators of `φ(x) = Σ L_k* x L_k`, and `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub space: TruncatedSpace,
    #[serde(with = "cmat_serde")]
    pub g: CMat,
    #[serde(with = "cmat_serde::list", default)]
    pub kraus_ops: Vec<CMat>,
    pub domain: Domain,
    /// Built from a grid discretization; condition (iv) is then reported as
    /// grid-approximate instead of failing.
    #[serde(default)]
    pub discretized: bool,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, g: CMat, kraus_ops: Vec<CMat>, domain: Domain) -> Result<Self> {
        let spec = ModelSpec {
            name: name.into(),
            space: TruncatedSpace::new(g.nrows())?,
            g,
            kraus_ops,
            domain,
            discretized: false,
        };
        spec.check_structure()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn check_structure(&self) -> Result<()> {
        let n = self.space.dim;
        if n == 0 {
            return Err(Error::Dimension("empty truncation".into()));
        }
        if let Some(labels) = &self.space.basis_labels {
            if labels.len() != n {
                return Err(Error::Dimension(format!("{} basis labels for dimension {n}", labels.len())));
            }
        }
        if self.g.shape() != (n, n) {
            return Err(Error::Dimension(format!("G is {:?}, space has dimension {n}", self.g.shape())));
        }
        for (k, l) in self.kraus_ops.iter().enumerate() {
            if l.shape() != (n, n) {
                return Err(Error::Dimension(format!("L_{k} is {:?}, expected {n}x{n}", l.shape())));
            }
        }
        match &self.domain {
            Domain::Indices(ix) => {
                if let Some(bad) = ix.iter().find(|&&i| i >= n) {
                    return Err(Error::Dimension(format!("domain index {bad} out of range for dimension {n}")));
                }
                let mut sorted = ix.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != ix.len() {
                    return Err(Error::Dimension("repeated domain index".into()));
                }
            }
            Domain::Basis(b) => {
                if b.nrows() != n {
                    return Err(Error::Dimension(format!("domain basis has {} rows, expected {n}", b.nrows())));
                }
                if linalg::orthonormality_defect(b) > 1e-8 {
                    return Err(Error::Dimension("domain basis columns are not orthonormal".into()));
                }
            }
        }
        Ok(())
    }

    /// `φ(x) = Σ L_k* x L_k`.
    pub fn phi(&self, x: &CMat) -> CMat {
        let n = self.dim();
        let mut out = CMat::zeros(n, n);
        for l in &self.kraus_ops {
            out += l.adjoint() * x * l;
        }
        out
    }

    /// `φ†(ρ) = Σ L_k ρ L_k*`.
    pub fn phi_dual(&self, rho: &CMat) -> CMat {
        let n = self.dim();
        let mut out = CMat::zeros(n, n);
        for l in &self.kraus_ops {
            out += l * rho * l.adjoint();
        }
        out
    }

    /// `ℒ(x) = φ(x) − G*x − xG`.
    pub fn generator(&self, x: &CMat) -> CMat {
        self.phi(x) - self.g.adjoint() * x - x * &self.g
    }

    /// `ℒ†(ρ) = φ†(ρ) − Gρ − ρG*`.
    pub fn generator_dual(&self, rho: &CMat) -> CMat {
        self.phi_dual(rho) - &self.g * rho - rho * self.g.adjoint()
    }

    /// `ℒ(I) = φ(I) − (G + G*)`.
    pub fn generator_at_identity(&self) -> CMat {
        let n = self.dim();
        let mut out = self.phi(&linalg::identity(n)) - (&self.g + self.g.adjoint());
        linalg::symmetrize_in_place(&mut out);
        out
    }

    pub fn domain_basis(&self) -> CMat {
        self.domain.basis(self.dim())
    }

    /// Whether `D` is all of the truncated space.
    pub fn domain_is_full(&self) -> bool {
        self.domain.len() == self.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormTag {
    Observable,
    Explosion,
    ResolventMapValue,
    LaplaceForm,
}

/// A Hermitian matrix standing for a bounded form or observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitianForm {
    #[serde(with = "cmat_serde")]
    pub matrix: CMat,
    pub tag: FormTag,
}

impl HermitianForm {
    pub fn new(matrix: CMat, tag: FormTag, tol: &Tolerances) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!("form matrix is {:?}", matrix.shape())));
        }
        let defect = linalg::hermitian_defect(&matrix);
        if defect > tol.hermitian_tol * matrix.norm().max(1.0) {
            return Err(Error::InvalidArgument(format!("matrix is not Hermitian (defect {defect:.3e})")));
        }
        let mut matrix = matrix;
        linalg::symmetrize_in_place(&mut matrix);
        if tag == FormTag::Explosion {
            let ev = linalg::eigvalsh(&matrix);
            let lo = ev.first().copied().unwrap_or(0.0);
            let hi = ev.last().copied().unwrap_or(0.0);
            if lo < -tol.psd_tol || hi > 1.0 + tol.psd_tol {
                return Err(Error::InvalidArgument(format!(
                    "explosion form must satisfy 0 ≤ E ≤ I (spectrum [{lo:.3e}, {hi:.3e}])"
                )));
            }
        }
        Ok(HermitianForm { matrix, tag })
    }

    /// Wrap a matrix already known to be Hermitian (symmetrizes away rounding).
    pub(crate) fn trusted(mut matrix: CMat, tag: FormTag) -> Self {
        linalg::symmetrize_in_place(&mut matrix);
        HermitianForm { matrix, tag }
    }

    pub fn observable(matrix: CMat) -> Result<Self> {
        Self::new(matrix, FormTag::Observable, &Tolerances::default())
    }

    pub fn identity(n: usize) -> Self {
        HermitianForm { matrix: linalg::identity(n), tag: FormTag::Observable }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `⟨u, x v⟩`.
    pub fn eval(&self, u: &CVec, v: &CVec) -> Complex64 {
        linalg::form(&self.matrix, u, v)
    }

    pub fn min_eig(&self) -> f64 {
        linalg::min_eig(&self.matrix)
    }

    pub fn max_eig(&self) -> f64 {
        linalg::max_eig(&self.matrix)
    }

    pub fn norm(&self) -> f64 {
        linalg::herm_norm(&self.matrix)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionVerdict {
    Pass,
    Fail,
    GridApproximate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Most negative eigenvalue of `G + G*`, as a nonnegative deficit.
    pub dissipativity_residual: f64,
    /// Largest positive eigenvalue of `ℒ(I)`.
    pub condition_iii_residual: f64,
    /// `‖ℒ(I)‖`.
    pub condition_iii_prime_residual: f64,
    /// Largest `|ℒ(I)[u, v]|` over an orthonormal basis of `D`.
    pub condition_iv_residual: f64,
    pub dissipativity: ConditionVerdict,
    pub condition_iii: ConditionVerdict,
    /// Informational: failure here is what allows explosion.
    pub condition_iii_prime: ConditionVerdict,
    pub condition_iv: ConditionVerdict,
    pub validation_eps: f64,
    pub condition_iv_tol: f64,
}

impl ValidationReport {
    /// Conditions (i)–(iii) hold and (iv) holds at least up to the grid.
    pub fn is_valid(&self) -> bool {
        self.dissipativity == ConditionVerdict::Pass
            && self.condition_iii == ConditionVerdict::Pass
            && self.condition_iv != ConditionVerdict::Fail
    }
}

fn pass_if(ok: bool) -> ConditionVerdict {
    if ok {
        ConditionVerdict::Pass
    } else {
        ConditionVerdict::Fail
    }
}

pub fn validate_model(spec: &ModelSpec, tol: &Tolerances) -> Result<ValidationReport> {
    spec.check_structure()?;
    let sym = &spec.g + spec.g.adjoint();
    let dissipativity_residual = (-linalg::min_eig(&sym)).max(0.0);
    let loss = spec.generator_at_identity();
    let ev = linalg::eigvalsh(&loss);
    let condition_iii_residual = ev.last().copied().unwrap_or(0.0).max(0.0);
    let condition_iii_prime_residual = ev.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    let b = spec.domain_basis();
    let compressed = linalg::congruence(&loss, &b);
    let condition_iv_residual = linalg::max_abs(&compressed);

    let condition_iv = if condition_iv_residual <= tol.condition_iv_tol {
        ConditionVerdict::Pass
    } else if spec.discretized {
        ConditionVerdict::GridApproximate
    } else {
        ConditionVerdict::Fail
    };
    Ok(ValidationReport {
        dissipativity_residual,
        condition_iii_residual,
        condition_iii_prime_residual,
        condition_iv_residual,
        dissipativity: pass_if(dissipativity_residual <= tol.validation_eps),
        condition_iii: pass_if(condition_iii_residual <= tol.validation_eps),
        condition_iii_prime: pass_if(condition_iii_prime_residual <= tol.validation_eps),
        condition_iv,
        validation_eps: tol.validation_eps,
        condition_iv_tol: tol.condition_iv_tol,
    })
}

fn check_form_dim(spec: &ModelSpec, x: &HermitianForm) -> Result<()> {
    if x.dim() != spec.dim() {
        return Err(Error::Dimension(format!("form has dimension {}, model has {}", x.dim(), spec.dim())));
    }
    Ok(())
}

pub fn apply_phi(spec: &ModelSpec, x: &HermitianForm) -> Result<HermitianForm> {
    check_form_dim(spec, x)?;
    Ok(HermitianForm::trusted(spec.phi(&x.matrix), FormTag::Observable))
}

pub fn apply_generator(spec: &ModelSpec, x: &HermitianForm) -> Result<HermitianForm> {
    check_form_dim(spec, x)?;
    Ok(HermitianForm::trusted(spec.generator(&x.matrix), FormTag::Observable))
}

/// `ℒ†(|v⟩⟨u|) = Σ L_k|v⟩⟨u|L_k* − |v⟩⟨Gu| − |Gv⟩⟨u|` for `u, v ∈ D`.
pub fn predual_generator(spec: &ModelSpec, u: &CVec, v: &CVec, tol: &Tolerances) -> Result<CMat> {
    let n = spec.dim();
    if u.len() != n || v.len() != n {
        return Err(Error::Dimension(format!("vectors of length {} and {}, model has {n}", u.len(), v.len())));
    }
    for w in [u, v] {
        let residual = spec.domain.distance(n, w);
        if residual > tol.duality_tol * w.norm().max(1.0) {
            return Err(Error::OutsideDomain { residual });
        }
    }
    let rank_one = linalg::outer(v, u);
    let gu = &spec.g * u;
    let gv = &spec.g * v;
    Ok(spec.phi_dual(&rank_one) - linalg::outer(v, &gu) - linalg::outer(&gv, u))
}

/// Choi matrix `Σ_ij E_ij ⊗ φ(E_ij)`; positive semidefinite iff `φ` is CP.
pub fn choi_matrix(spec: &ModelSpec) -> CMat {
    let n = spec.dim();
    let mut choi = CMat::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let mut e = CMat::zeros(n, n);
            e[(i, j)] = c64(1.0, 0.0);
            let block = spec.phi(&e);
            choi.view_mut((i * n, j * n), (n, n)).copy_from(&block);
        }
    }
    choi
}
