//! Dense solver for `λY + G*Y + YG = C` (Bartels–Stewart on a complex Schur form).
//!
//! The Schur factorization `G = U T U*` is computed once and reused for every
//! right-hand side and every `λ`, which is what the resolvent diagnostics need:
//! power iteration of `Q_λ` and the explosion series each perform one solve per
//! term.

use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};

#[derive(Debug, Clone)]
pub struct LyapunovSolver {
    u: CMat,
    t: CMat,
}

impl LyapunovSolver {
    pub fn new(g: &CMat) -> Result<Self> {
        if !g.is_square() {
            return Err(Error::Dimension(format!("G is {}x{}", g.nrows(), g.ncols())));
        }
        let n = g.nrows();
        if n == 0 {
            return Ok(LyapunovSolver { u: CMat::zeros(0, 0), t: CMat::zeros(0, 0) });
        }
        let schur = g
            .clone()
            .try_schur(1e-15, 10_000 * n.max(1))
            .ok_or_else(|| Error::SingularSylvester { pivot: f64::NAN })?;
        let (u, mut t) = schur.unpack();
        // The complex Schur form is upper triangular; clear residual noise.
        for j in 0..n {
            for i in (j + 1)..n {
                t[(i, j)] = c64(0.0, 0.0);
            }
        }
        Ok(LyapunovSolver { u, t })
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// Solve `λY + G*Y + YG = C`.
    pub fn solve(&self, lambda: f64, c: &CMat) -> Result<CMat> {
        let n = self.dim();
        if c.shape() != (n, n) {
            return Err(Error::Dimension(format!("right-hand side is {:?}, expected {n}x{n}", c.shape())));
        }
        let ct = self.u.adjoint() * c * &self.u;
        let t = &self.t;
        let mut y = CMat::zeros(n, n);
        // (T*Ỹ)_ij = Σ_{k≤i} conj(T_ki) Ỹ_kj, (ỸT)_ij = Σ_{k≤j} Ỹ_ik T_kj.
        for i in 0..n {
            for j in 0..n {
                let mut acc = ct[(i, j)];
                for k in 0..i {
                    acc -= t[(k, i)].conj() * y[(k, j)];
                }
                for k in 0..j {
                    acc -= y[(i, k)] * t[(k, j)];
                }
                let pivot = c64(lambda, 0.0) + t[(i, i)].conj() + t[(j, j)];
                if pivot.norm() < 1e-300 {
                    return Err(Error::SingularSylvester { pivot: pivot.norm() });
                }
                y[(i, j)] = acc / pivot;
            }
        }
        let mut out = &self.u * y * self.u.adjoint();
        crate::linalg::symmetrize_in_place_if_hermitian(&mut out, c);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, identity};

    fn residual(g: &CMat, lambda: f64, y: &CMat, c: &CMat) -> f64 {
        (y * c64(lambda, 0.0) + g.adjoint() * y + y * g - c).norm()
    }

    #[test]
    fn diagonal_generator() {
        let g = diag(&[0.5, 1.0]);
        let s = LyapunovSolver::new(&g).unwrap();
        let y = s.solve(1.0, &identity(2)).unwrap();
        assert!((y[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!((y[(1, 1)].re - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn non_normal_generator() {
        let n = 12;
        let h = 0.1;
        let mut g = CMat::zeros(n, n);
        for j in 0..n - 1 {
            g[(j, j + 1)] = c64(-1.0 / (2.0 * h), 0.0);
            g[(j + 1, j)] = c64(1.0 / (2.0 * h), 0.0);
        }
        g[(0, 0)] = c64(1.0 / (2.0 * h), 0.0);
        g[(3, 5)] += c64(0.0, 0.3);
        g[(5, 3)] += c64(0.0, 0.3);
        let c = CMat::from_fn(n, n, |i, j| c64(1.0 / (1.0 + i as f64 + j as f64), 0.0));
        let s = LyapunovSolver::new(&g).unwrap();
        for lambda in [0.5, 1.0, 2.0] {
            let y = s.solve(lambda, &c).unwrap();
            assert!(residual(&g, lambda, &y, &c) < 1e-10, "λ = {lambda}");
        }
    }
}
