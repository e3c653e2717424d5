//! First- and second-order Γ-calculus on a triple.
//!
//! With `L` the generator (the Laplacian `Δ`):
//!
//! ```text
//! Γ(f, g)(x)  = ½ Σ_y L(x,y) (f(y) − f(x)) (g(y) − g(x))
//! Γ₂(f)(x)    = ½ ΔΓ(f)(x) − Γ(f, Δf)(x)
//! Ch(f)       = ½ ∫ Γ(f) dm
//! ```
//!
//! Every operation is a pure function of the triple and its inputs.

use crate::error::Result;
use crate::field::ScalarField;
use crate::triple::MarkovTriple;

impl MarkovTriple {
    /// `∫ f dm`.
    pub fn integrate(&self, f: &ScalarField) -> Result<f64> {
        self.check(f)?;
        Ok(self.measure().iter().zip(f.iter()).map(|(m, v)| m * v).sum())
    }

    /// `L²(m)` inner product.
    pub fn inner(&self, f: &ScalarField, g: &ScalarField) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        Ok(self.measure().iter().zip(f.iter().zip(g.iter())).map(|(m, (a, b))| m * a * b).sum())
    }

    pub fn l2_norm(&self, f: &ScalarField) -> Result<f64> {
        Ok(self.inner(f, f)?.sqrt())
    }

    /// Carré du champ `Γ(f, g)`.
    pub fn gamma(&self, f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        self.check(g)?;
        let out = (0..self.n())
            .map(|x| {
                0.5 * self
                    .neighbors(x)
                    .iter()
                    .map(|nb| nb.rate * (f[nb.state] - f[x]) * (g[nb.state] - g[x]))
                    .sum::<f64>()
            })
            .collect();
        Ok(ScalarField::from_vec(out))
    }

    /// `Γ(f) = Γ(f, f)`.
    pub fn carre_du_champ(&self, f: &ScalarField) -> Result<ScalarField> {
        self.gamma(f, f)
    }

    /// `Δf = Lf`, evaluated through differences so constants map to exactly zero.
    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        let out = (0..self.n())
            .map(|x| self.neighbors(x).iter().map(|nb| nb.rate * (f[nb.state] - f[x])).sum())
            .collect();
        Ok(ScalarField::from_vec(out))
    }

    /// Pointwise `Γ₂(f)`.
    pub fn gamma2(&self, f: &ScalarField) -> Result<ScalarField> {
        self.gamma2_bilinear(f, f)
    }

    /// Pointwise `Γ₂(f, g) = ½ΔΓ(f,g) − ½(Γ(f,Δg) + Γ(g,Δf))`.
    pub fn gamma2_bilinear(&self, f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
        let lap_gamma = self.laplacian(&self.gamma(f, g)?)?;
        let lf = self.laplacian(f)?;
        let lg = self.laplacian(g)?;
        let a = self.gamma(f, &lg)?;
        let b = self.gamma(g, &lf)?;
        let out = (0..self.n()).map(|x| 0.5 * lap_gamma[x] - 0.5 * (a[x] + b[x])).collect();
        Ok(ScalarField::from_vec(out))
    }

    /// Weak trilinear form `Γ₂[f,g;φ] = ½∫[Γ(f,g)Δφ − (Γ(f,Δg) + Γ(g,Δf))φ] dm`.
    pub fn gamma2_weak_form(&self, f: &ScalarField, g: &ScalarField, phi: &ScalarField) -> Result<f64> {
        let gfg = self.gamma(f, g)?;
        let lphi = self.laplacian(phi)?;
        let lf = self.laplacian(f)?;
        let lg = self.laplacian(g)?;
        let a = self.gamma(f, &lg)?;
        let b = self.gamma(g, &lf)?;
        Ok(0.5
            * (0..self.n())
                .map(|x| self.measure()[x] * (gfg[x] * lphi[x] - (a[x] + b[x]) * phi[x]))
                .sum::<f64>())
    }

    /// Cheeger energy `½∫Γ(f) dm`.
    pub fn cheeger_energy(&self, f: &ScalarField) -> Result<f64> {
        Ok(0.5 * self.integrate(&self.carre_du_champ(f)?)?)
    }

    /// `‖f‖_V = √(‖f‖²_{L²(m)} + 2Ch(f))`.
    pub fn v_norm(&self, f: &ScalarField) -> Result<f64> {
        Ok((self.inner(f, f)? + 2.0 * self.cheeger_energy(f)?).sqrt())
    }

    /// Discrete slope: the largest difference quotient over the support neighbors.
    pub fn lip_slope(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        let out = (0..self.n())
            .map(|x| {
                self.neighbors(x)
                    .iter()
                    .map(|nb| (f[nb.state] - f[x]).abs() / nb.distance)
                    .fold(0.0, f64::max)
            })
            .collect();
        Ok(ScalarField::from_vec(out))
    }

    /// Pointwise comparison of `√Γ(f)` with `lip f`, reported as `(√Γ(f), lip f)`.
    ///
    /// No inequality between the two holds on a general graph; this is a
    /// diagnostic only.
    pub fn slope_comparison(&self, f: &ScalarField) -> Result<(ScalarField, ScalarField)> {
        Ok((self.carre_du_champ(f)?.map(f64::sqrt), self.lip_slope(f)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces;
    use crate::Error;

    fn field(v: &[f64]) -> ScalarField {
        ScalarField::new(v.to_vec()).unwrap()
    }

    #[test]
    fn two_point_gamma_values() {
        let t = spaces::two_point(1.0).unwrap();
        let f = field(&[0.0, 1.0]);
        let g = field(&[1.0, 0.0]);
        assert_eq!(t.carre_du_champ(&f).unwrap().values(), &[0.5, 0.5]);
        assert_eq!(t.gamma(&f, &g).unwrap().values(), &[-0.5, -0.5]);
        assert_eq!(t.laplacian(&f).unwrap().values(), &[1.0, -1.0]);
        assert_eq!(t.gamma2(&f).unwrap().values(), &[1.0, 1.0]);
        assert_eq!(t.cheeger_energy(&f).unwrap(), 0.25);
        assert_eq!(t.lip_slope(&f).unwrap().values(), &[1.0, 1.0]);
        // ∫Γ₂(f) dm = ∫(Δf)² dm = 1
        assert_eq!(t.integrate(&t.gamma2(&f).unwrap()).unwrap(), 1.0);
        let one = ScalarField::constant(2, 1.0);
        assert_eq!(t.gamma2_weak_form(&f, &f, &one).unwrap(), 1.0);
    }

    #[test]
    fn constants_are_annihilated() {
        let t = spaces::cycle(5).unwrap();
        let c = ScalarField::constant(5, 3.7);
        let f = field(&[0.1, 0.5, -0.2, 0.9, 0.3]);
        assert!(t.carre_du_champ(&c).unwrap().iter().all(|&v| v == 0.0));
        assert!(t.laplacian(&c).unwrap().iter().all(|&v| v == 0.0));
        assert!(t.gamma2(&c).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(t.cheeger_energy(&c).unwrap(), 0.0);
        assert!(t.lip_slope(&c).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(t.gamma2_weak_form(&c, &f, &f).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let t = spaces::two_point(1.0).unwrap();
        let f = field(&[0.0, 1.0, 2.0]);
        assert!(matches!(t.laplacian(&f), Err(Error::DimensionMismatch { expected: 2, found: 3 })));
        assert!(t.gamma(&f, &f).is_err());
        assert!(t.gamma2(&f).is_err());
        assert!(t.cheeger_energy(&f).is_err());
        assert!(t.lip_slope(&f).is_err());
    }

    #[test]
    fn ou_identity_has_unit_slope() {
        let t = spaces::ou_chain(200, 6.0).unwrap();
        let x = ScalarField::new(spaces::coordinates(&t)).unwrap();
        let lip = t.lip_slope(&x).unwrap();
        for v in lip.iter() {
            assert!((v - 1.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn v_norm_of_two_point() {
        let t = spaces::two_point(1.0).unwrap();
        let f = field(&[0.0, 1.0]);
        // ‖f‖² = ½, 2Ch = ½
        assert!((t.v_norm(&f).unwrap() - 1.0).abs() < 1e-15);
    }
}
