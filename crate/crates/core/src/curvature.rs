//! Bakry-Émery curvature as a per-state generalized eigenvalue problem.
//!
//! At each state `x`, `Γ(f)(x) = fᵀBₓf` and `Γ₂(f)(x) = fᵀAₓf` are quadratic
//! forms supported on the 1-ball and 2-ball of `x`. The best constant in
//! `Γ₂(f)(x) ≥ K Γ(f)(x)` is the smallest generalized eigenvalue of the pencil
//! `(Aₓ, Bₓ)` after the kernel of `Bₓ` is eliminated by a Schur complement.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::triple::MarkovTriple;

/// Relative threshold splitting the Γ-form into range and kernel.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-10;

/// A kernel eigenvalue of the Γ₂-form below `−KERNEL_NEG_TOL·max(1, ‖Aₓ‖)` means `K(x) = −∞`.
pub const KERNEL_NEG_TOL: f64 = 1e-9;

const EIGEN_MAX_ITER: usize = 100_000;

/// A quadratic form restricted to a neighborhood: `matrix` acts on the values at `states`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalForm {
    pub states: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

impl LocalForm {
    /// The form as an `n × n` matrix.
    pub fn dense(&self, n: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n, n);
        for (a, &sa) in self.states.iter().enumerate() {
            for (b, &sb) in self.states.iter().enumerate() {
                out[(sa, sb)] = self.matrix[(a, b)];
            }
        }
        out
    }

    /// `fᵀMf` using the entries of `f` at `states`.
    pub fn evaluate(&self, f: &ScalarField) -> f64 {
        let local = DVector::from_iterator(self.states.len(), self.states.iter().map(|&s| f[s]));
        local.dot(&(&self.matrix * &local))
    }
}

/// Extended-real curvature value; `−∞` is a flag, never a large negative float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurvatureValue {
    Finite(f64),
    NegInfinity,
}

impl CurvatureValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            CurvatureValue::Finite(k) => Some(k),
            CurvatureValue::NegInfinity => None,
        }
    }

    /// The value as an `f64`, `−∞` included.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn min(self, other: Self) -> Self {
        match (self, other) {
            (CurvatureValue::Finite(a), CurvatureValue::Finite(b)) => CurvatureValue::Finite(a.min(b)),
            _ => CurvatureValue::NegInfinity,
        }
    }
}

impl std::fmt::Display for CurvatureValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CurvatureValue::Finite(k) => write!(f, "{k}"),
            CurvatureValue::NegInfinity => f.write_str("NEG_INF"),
        }
    }
}

/// Minimizer of the local Rayleigh quotient, stored on the 2-ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub states: Vec<usize>,
    pub values: Vec<f64>,
}

impl Witness {
    pub fn to_field(&self, n: usize) -> ScalarField {
        let mut v = vec![0.0; n];
        for (&s, &val) in self.states.iter().zip(&self.values) {
            v[s] = val;
        }
        ScalarField::from_vec(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateCurvature {
    pub state: usize,
    pub value: CurvatureValue,
    /// `None` when the curvature is `−∞`.
    pub witness: Option<Witness>,
    /// Rank of the Γ-form at this state.
    pub gamma_rank: usize,
    /// Smallest eigenvalue of the Γ₂-form on the Γ-kernel (`+∞` if the kernel is empty).
    pub kernel_min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReport {
    pub states: Vec<StateCurvature>,
    pub global: CurvatureValue,
    pub argmin: usize,
    /// Singular part of the Γ₂ measure; identically zero on a finite space.
    pub singular_part: f64,
}

impl CurvatureReport {
    pub fn per_state(&self) -> Vec<CurvatureValue> {
        self.states.iter().map(|s| s.value).collect()
    }
}

/// Local matrix of `f ↦ Γ(f)(x)` on the 1-ball of `x`.
pub fn gamma_form_at(triple: &MarkovTriple, x: usize) -> Result<LocalForm> {
    triple.check_state(x)?;
    let states = triple.ball(x, 1);
    let matrix = gamma_block(triple, x, &states);
    Ok(LocalForm { states, matrix })
}

/// Local matrix of `f ↦ Γ₂(f)(x)` on the 2-ball of `x`.
pub fn gamma2_form_at(triple: &MarkovTriple, x: usize) -> Result<LocalForm> {
    triple.check_state(x)?;
    let states = triple.ball(x, 2);
    let matrix = gamma2_block(triple, x, &states);
    Ok(LocalForm { states, matrix })
}

fn local_index(states: &[usize]) -> impl Fn(usize) -> usize + '_ {
    // `states` is `[x, ascending…]`
    move |s| {
        if s == states[0] {
            0
        } else {
            1 + states[1..].binary_search(&s).expect("state outside local ball")
        }
    }
}

/// `Γ(·)(z)` as a matrix over `states`, which must contain the 1-ball of `z`.
fn gamma_block(triple: &MarkovTriple, z: usize, states: &[usize]) -> DMatrix<f64> {
    let idx = local_index(states);
    let k = states.len();
    let mut b = DMatrix::zeros(k, k);
    let iz = idx(z);
    for nb in triple.neighbors(z) {
        let iy = idx(nb.state);
        let w = 0.5 * nb.rate;
        b[(iz, iz)] += w;
        b[(iy, iy)] += w;
        b[(iz, iy)] -= w;
        b[(iy, iz)] -= w;
    }
    b
}

fn gamma2_block(triple: &MarkovTriple, x: usize, states: &[usize]) -> DMatrix<f64> {
    let idx = local_index(states);
    let k = states.len();
    // ½ΔΓ(f)(x) = ½ Σ_z L(x,z) (Γ(f)(z) − Γ(f)(x))
    let bx = gamma_block(triple, x, states);
    let mut a = DMatrix::zeros(k, k);
    for nb in triple.neighbors(x) {
        let bz = gamma_block(triple, nb.state, states);
        a += (bz - &bx) * (0.5 * nb.rate);
    }
    // Γ(f, Δf)(x) = fᵀ Bₓ L f, symmetrized; only rows of L on the 1-ball matter.
    let mut lmat = DMatrix::zeros(k, k);
    for nb in triple.neighbors(x).iter().map(|nb| nb.state).chain(std::iter::once(x)) {
        let r = idx(nb);
        for inner in triple.neighbors(nb) {
            let c = idx(inner.state);
            lmat[(r, c)] += inner.rate;
            lmat[(r, r)] -= inner.rate;
        }
    }
    let bl = &bx * lmat;
    a -= (&bl + bl.transpose()) * 0.5;
    a
}

fn eigen(m: DMatrix<f64>, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    SymmetricEigen::try_new(m, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::EigenNonConvergence(format!("{what} of size {n}")))
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Best constant `K(x)` with `Γ₂(f)(x) ≥ K(x) Γ(f)(x)` for all `f`, and a minimizing `f`.
pub fn curvature_at(triple: &MarkovTriple, x: usize, kernel_tol: f64) -> Result<StateCurvature> {
    let form2 = gamma2_form_at(triple, x)?;
    let states = form2.states;
    let a = form2.matrix;
    let b = gamma_block(triple, x, &states);
    let k = states.len();

    let eb = eigen(b, "Γ-form")?;
    let lmax = eb.eigenvalues.max();
    let range: Vec<usize> = (0..k).filter(|&i| eb.eigenvalues[i] > kernel_tol * lmax).collect();
    let kernel: Vec<usize> = (0..k).filter(|&i| eb.eigenvalues[i] <= kernel_tol * lmax).collect();
    let vr = eb.eigenvectors.select_columns(&range);
    let vn = eb.eigenvectors.select_columns(&kernel);
    let w: Vec<f64> = range.iter().map(|&i| eb.eigenvalues[i]).collect();

    let a_rr = vr.transpose() * &a * &vr;
    let a_rn = vr.transpose() * &a * &vn;
    let a_nn = vn.transpose() * &a * &vn;

    let scale = max_abs(&a).max(1.0);
    let (kernel_min, a_nn_pinv) = if kernel.is_empty() {
        (f64::INFINITY, DMatrix::zeros(0, 0))
    } else {
        let en = eigen(a_nn, "Γ₂-form on the Γ-kernel")?;
        let emin = en.eigenvalues.min();
        let emax = en.eigenvalues.amax();
        let mut inv = DMatrix::zeros(kernel.len(), kernel.len());
        for (i, &l) in en.eigenvalues.iter().enumerate() {
            if l > kernel_tol * emax {
                let v = en.eigenvectors.column(i);
                inv += (v * v.transpose()) / l;
            }
        }
        (emin, inv)
    };
    if kernel_min < -KERNEL_NEG_TOL * scale {
        return Ok(StateCurvature {
            state: x,
            value: CurvatureValue::NegInfinity,
            witness: None,
            gamma_rank: range.len(),
            kernel_min_eigenvalue: kernel_min,
        });
    }

    let schur = if kernel.is_empty() { a_rr } else { &a_rr - &a_rn * &a_nn_pinv * a_rn.transpose() };
    let inv_sqrt = DVector::from_iterator(w.len(), w.iter().map(|l| 1.0 / l.sqrt()));
    let mut pencil = DMatrix::from_fn(w.len(), w.len(), |i, j| schur[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    pencil = (&pencil + pencil.transpose()) * 0.5;
    let ep = eigen(pencil, "reduced pencil")?;
    let imin = ep.eigenvalues.imin();
    let kx = ep.eigenvalues[imin];

    let f_r = ep.eigenvectors.column(imin).component_mul(&inv_sqrt);
    let mut local = &vr * &f_r;
    if !kernel.is_empty() {
        let f_n = -(&a_nn_pinv * a_rn.transpose() * &f_r);
        local += &vn * f_n;
    }
    // Fix the witness at 0 on x and normalize the sign of its first nonzero entry.
    let base = local[0];
    local.apply(|v| *v -= base);
    let norm = local.amax();
    if let Some(first) = local.iter().find(|v| v.abs() > 1e-12 * norm) {
        if *first < 0.0 {
            local.neg_mut();
        }
    }
    if norm > 0.0 {
        local /= norm;
    }

    Ok(StateCurvature {
        state: x,
        value: CurvatureValue::Finite(kx),
        witness: Some(Witness { states, values: local.iter().copied().collect() }),
        gamma_rank: range.len(),
        kernel_min_eigenvalue: kernel_min,
    })
}

/// Curvature at every state; states are solved in parallel and merged in order.
pub fn curvature_global(triple: &MarkovTriple) -> Result<CurvatureReport> {
    curvature_global_with(triple, DEFAULT_KERNEL_TOL)
}

pub fn curvature_global_with(triple: &MarkovTriple, kernel_tol: f64) -> Result<CurvatureReport> {
    let states: Vec<StateCurvature> =
        (0..triple.n()).into_par_iter().map(|x| curvature_at(triple, x, kernel_tol)).collect::<Result<_>>()?;
    let global = states.iter().fold(CurvatureValue::Finite(f64::INFINITY), |g, s| g.min(s.value));
    let argmin = states
        .iter()
        .min_by(|a, b| a.value.as_f64().total_cmp(&b.value.as_f64()))
        .map_or(0, |s| s.state);
    Ok(CurvatureReport { states, global, argmin, singular_part: 0.0 })
}

/// Diagnostics around the self-improvement of the curvature condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeDiagnostics {
    /// `Ch(Γ(f)) + ∫(2KΓ(f)² + 2Γ(f)Γ(f,Δf)) dm`.
    pub g3_margin: f64,
    /// `|∫(Γ₂(f) − KΓ(f)) dm − ∫((Δf)² − KΓ(f)) dm|`.
    pub mass_identity_residual: f64,
    /// `maxₓ [Γ(Γ(f)) − 4(Γ₂(f) − KΓ(f))Γ(f)](x)`.
    pub self_improvement_margin: f64,
    /// Singular part of `Γ₂ − KΓ`; zero on finite spaces.
    pub singular_part: f64,
}

pub fn be_diagnostics(triple: &MarkovTriple, f: &ScalarField, k: f64) -> Result<BeDiagnostics> {
    crate::semigroup::check_curvature(k)?;
    let g = triple.carre_du_champ(f)?;
    let g2 = triple.gamma2(f)?;
    let lf = triple.laplacian(f)?;
    let g_lf = triple.gamma(f, &lf)?;
    let gg = triple.carre_du_champ(&g)?;

    let tail = triple.integrate(&g.zip_map(&g_lf, |a, b| 2.0 * k * a * a + 2.0 * a * b))?;
    let g3_margin = triple.cheeger_energy(&g)? + tail;

    let gamma2k = g2.zip_map(&g, |a, b| a - k * b);
    let lhs = triple.integrate(&gamma2k)?;
    let rhs = triple.integrate(&lf.zip_map(&g, |l, b| l * l - k * b))?;

    let self_improvement_margin = (0..triple.n()).map(|x| gg[x] - 4.0 * gamma2k[x] * g[x]).fold(f64::NEG_INFINITY, f64::max);

    Ok(BeDiagnostics {
        g3_margin,
        mass_identity_residual: (lhs - rhs).abs(),
        self_improvement_margin,
        singular_part: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rng: &mut ChaCha8Rng, n: usize) -> ScalarField {
        ScalarField::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn two_point_forms() {
        let t = spaces::two_point(1.0).unwrap();
        let b = gamma_form_at(&t, 0).unwrap().dense(2);
        assert_eq!(b, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
        let a = gamma2_form_at(&t, 0).unwrap().dense(2);
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        assert!(gamma_form_at(&t, 2).is_err());
    }

    #[test]
    fn forms_reproduce_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for t in [spaces::cycle(5).unwrap(), spaces::hypercube(3, 1.0).unwrap(), spaces::ou_chain(30, 4.0).unwrap()] {
            for _ in 0..20 {
                let f = random_field(&mut rng, t.n());
                let g = t.carre_du_champ(&f).unwrap();
                let g2 = t.gamma2(&f).unwrap();
                for x in 0..t.n() {
                    let bx = gamma_form_at(&t, x).unwrap();
                    let ax = gamma2_form_at(&t, x).unwrap();
                    assert!((bx.evaluate(&f) - g[x]).abs() <= 1e-12 * g[x].abs().max(1.0));
                    assert!((ax.evaluate(&f) - g2[x]).abs() <= 1e-10 * g2[x].abs().max(1.0));
                    assert_eq!(ax.matrix, ax.matrix.transpose());
                }
            }
        }
    }

    #[test]
    fn two_point_curvature() {
        for rho in [0.5, 1.0, 2.0] {
            let t = spaces::two_point(rho).unwrap();
            let r = curvature_global(&t).unwrap();
            let k = r.global.finite().unwrap();
            assert!((k - 2.0 * rho).abs() <= 1e-12, "{k}");
        }
    }

    #[test]
    fn witness_attains_quotient() {
        for t in [spaces::cycle(5).unwrap(), spaces::complete(4).unwrap(), spaces::ou_chain(40, 5.0).unwrap()] {
            let r = curvature_global(&t).unwrap();
            for s in &r.states {
                let k = s.value.finite().unwrap();
                let w = s.witness.as_ref().unwrap().to_field(t.n());
                let q = t.gamma2(&w).unwrap()[s.state] / t.carre_du_champ(&w).unwrap()[s.state];
                assert!((q - k).abs() <= 1e-9 * k.abs().max(1.0), "{q} vs {k}");
            }
        }
    }

    #[test]
    fn complete_graph_curvature() {
        let t = spaces::complete(4).unwrap();
        let k = curvature_global(&t).unwrap().global.finite().unwrap();
        assert!((k - 3.0).abs() < 1e-10, "{k}");
    }

    #[test]
    fn mass_identity_and_two_point_self_improvement() {
        let t = spaces::two_point(1.0).unwrap();
        let f = ScalarField::new(vec![0.0, 1.0]).unwrap();
        let d = be_diagnostics(&t, &f, 2.0).unwrap();
        assert!(d.mass_identity_residual <= 1e-12);
        assert!(d.self_improvement_margin <= 0.0);
        assert_eq!(d.singular_part, 0.0);
        assert!(be_diagnostics(&t, &f, f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn neg_inf_renders_as_token() {
        assert_eq!(CurvatureValue::NegInfinity.to_string(), "NEG_INF");
        assert_eq!(CurvatureValue::Finite(1.0).min(CurvatureValue::NegInfinity), CurvatureValue::NegInfinity);
    }
}
