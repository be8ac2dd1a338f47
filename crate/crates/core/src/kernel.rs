//! Covariance kernels: the Matérn family (ν = 1/2, 3/2, 5/2, ∞), a
//! periodic Gaussian, and products over coordinate slices.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::basis::DENSE_GUARD;
use crate::cluster_tree::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Half,
    ThreeHalves,
    FiveHalves,
    Infinite,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Matern {
        nu: Smoothness,
        l: f64,
    },
    /// `exp(-s sin^2(pi r / l))`.
    Periodic {
        s: f64,
        l: f64,
    },
    Product(Vec<(KernelSpec, Range<usize>)>),
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

impl KernelSpec {
    pub fn matern(nu: Smoothness, l: f64) -> Result<Self> {
        check_positive("lengthscale", l)?;
        Ok(Self::Matern { nu, l })
    }

    pub fn exponential(l: f64) -> Result<Self> {
        Self::matern(Smoothness::Half, l)
    }

    pub fn gaussian(l: f64) -> Result<Self> {
        Self::matern(Smoothness::Infinite, l)
    }

    pub fn periodic(s: f64, l: f64) -> Result<Self> {
        check_positive("lengthscale", l)?;
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be nonnegative, got {s}")));
        }
        Ok(Self::Periodic { s, l })
    }

    /// Product of factors acting on disjoint coordinate slices.
    pub fn product(factors: Vec<(KernelSpec, Range<usize>)>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter("empty kernel product".into()));
        }
        let mut slices: Vec<_> = factors.iter().map(|(_, r)| r.clone()).collect();
        slices.sort_by_key(|r| r.start);
        for r in &slices {
            if r.start >= r.end {
                return Err(Error::InvalidParameter(format!("empty slice {r:?}")));
            }
        }
        for w in slices.windows(2) {
            if w[0].end > w[1].start {
                return Err(Error::InvalidParameter(format!(
                    "overlapping slices {:?} and {:?}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self::Product(factors))
    }

    /// Checks that the kernel accepts points of dimension `dim`.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if let Self::Product(factors) = self {
            let mut slices: Vec<_> = factors.iter().map(|(_, r)| r.clone()).collect();
            slices.sort_by_key(|r| r.start);
            let mut at = 0;
            for r in &slices {
                if r.start != at {
                    break;
                }
                at = r.end;
            }
            if at != dim {
                return Err(Error::InvalidParameter(format!(
                    "product slices do not cover dimension {dim}"
                )));
            }
            for (k, r) in factors {
                k.check_dim(r.len())?;
            }
        }
        Ok(())
    }

    /// Kernel as a function of the distance, for the isotropic families.
    pub fn radial(&self, r: f64) -> Option<f64> {
        match *self {
            Self::Matern { nu, l } => {
                let t = r / l;
                Some(match nu {
                    Smoothness::Half => (-t).exp(),
                    Smoothness::ThreeHalves => {
                        let a = 3f64.sqrt() * t;
                        (1.0 + a) * (-a).exp()
                    }
                    Smoothness::FiveHalves => {
                        let a = 5f64.sqrt() * t;
                        (1.0 + a + a * a / 3.0) * (-a).exp()
                    }
                    Smoothness::Infinite => (-0.5 * t * t).exp(),
                })
            }
            Self::Periodic { s, l } => {
                let v = (std::f64::consts::PI * r / l).sin();
                Some((-s * v * v).exp())
            }
            Self::Product(_) => None,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Self::Product(factors) => factors
                .iter()
                .map(|(k, r)| k.eval(&x[r.clone()], &y[r.clone()]))
                .product(),
            radial => {
                let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                radial.radial(r2.sqrt()).unwrap_or(f64::NAN)
            }
        }
    }
}

/// Dense `[k(x_i, x_j)]` in original point order.
pub fn dense_kernel_matrix(spec: &KernelSpec, cloud: &PointCloud) -> Result<DMatrix<f64>> {
    let n = cloud.len();
    if n > DENSE_GUARD {
        return Err(Error::SizeGuard { n, limit: DENSE_GUARD });
    }
    spec.check_dim(cloud.dim())?;
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = spec.eval(cloud.point(i), cloud.point(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Matern {
                nu: Smoothness::Infinite,
                l,
            } => write!(f, "gauss(l={l})"),
            Self::Matern { nu, l } => {
                let nu = match nu {
                    Smoothness::Half => "1/2",
                    Smoothness::ThreeHalves => "3/2",
                    _ => "5/2",
                };
                write!(f, "matern(nu={nu},l={l})")
            }
            Self::Periodic { s, l } => write!(f, "periodic(s={s},l={l})"),
            Self::Product(factors) => {
                write!(f, "prod(")?;
                for (i, (k, r)) in factors.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}|slice={}..{}", r.start, r.end)?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser { src: s, pos: 0 };
        let spec = p.spec()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.error("trailing input"));
        }
        Ok(spec)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::KernelParse(format!("{msg} at offset {} in {:?}", self.pos, self.src))
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn word(&mut self) -> &str {
        self.skip_ws();
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| matches!(c, ',' | ')' | '(' | '|' | '=') || c.is_whitespace())
            .unwrap_or(self.rest().len());
        self.pos += len;
        &self.src[start..self.pos]
    }

    fn args(&mut self) -> Result<Vec<(String, String)>> {
        self.expect('(')?;
        let mut out = Vec::new();
        if self.eat(')') {
            return Ok(out);
        }
        loop {
            let key = self.word().to_string();
            self.expect('=')?;
            let value = self.word().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(self.error("expected key=value"));
            }
            out.push((key, value));
            if self.eat(')') {
                return Ok(out);
            }
            self.expect(',')?;
        }
    }

    fn spec(&mut self) -> Result<KernelSpec> {
        let name = self.word().to_string();
        match name.as_str() {
            "prod" => self.product(),
            "matern" | "gauss" | "periodic" => {
                let args = self.args()?;
                build(&name, &args).map_err(|e| match e {
                    Error::KernelParse(_) => e,
                    other => Error::KernelParse(other.to_string()),
                })
            }
            _ => Err(self.error(&format!("unknown kernel {name:?}"))),
        }
    }

    fn product(&mut self) -> Result<KernelSpec> {
        self.expect('(')?;
        let mut factors = Vec::new();
        loop {
            let k = self.spec()?;
            self.expect('|')?;
            if self.word() != "slice" {
                return Err(self.error("expected slice"));
            }
            self.expect('=')?;
            let range = self.word().to_string();
            let (a, b) = range
                .split_once("..")
                .ok_or_else(|| self.error("expected slice a..b"))?;
            let a: usize = a.trim().parse().map_err(|_| self.error("bad slice start"))?;
            let b: usize = b.trim().parse().map_err(|_| self.error("bad slice end"))?;
            factors.push((k, a..b));
            if self.eat(')') {
                break;
            }
            self.expect(',')?;
        }
        KernelSpec::product(factors).map_err(|e| Error::KernelParse(e.to_string()))
    }
}

fn number(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::KernelParse(format!("invalid value {v:?} for {key}")))
}

fn build(name: &str, args: &[(String, String)]) -> Result<KernelSpec> {
    let allowed: &[&str] = match name {
        "matern" => &["nu", "l"],
        "gauss" => &["l"],
        _ => &["s", "l"],
    };
    for (k, _) in args {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::KernelParse(format!("unknown parameter {k:?} for {name}")));
        }
    }
    let get = |key: &str| args.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let required = |key: &str| get(key).ok_or_else(|| Error::KernelParse(format!("{name} requires {key}")));
    match name {
        "matern" => {
            let nu = match required("nu")? {
                "1/2" | "0.5" => Smoothness::Half,
                "3/2" | "1.5" => Smoothness::ThreeHalves,
                "5/2" | "2.5" => Smoothness::FiveHalves,
                "inf" => Smoothness::Infinite,
                other => {
                    return Err(Error::KernelParse(format!(
                        "unsupported smoothness {other:?}; use 1/2, 3/2, 5/2 or inf"
                    )))
                }
            };
            KernelSpec::matern(nu, number("l", required("l")?)?)
        }
        "gauss" => KernelSpec::gaussian(number("l", required("l")?)?),
        _ => {
            let l = get("l").map_or(Ok(1.0), |v| number("l", v))?;
            KernelSpec::periodic(number("s", required("s")?)?, l)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::function::gamma::gamma;

    /// `K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt` by the trapezoid
    /// rule, which converges geometrically for this integrand.
    fn bessel_k(nu: f64, x: f64) -> f64 {
        let h: f64 = 1e-3;
        let mut sum = 0.5 * (-x).exp();
        let mut t = h;
        loop {
            let v = (-x * t.cosh()).exp() * (nu * t).cosh();
            sum += v;
            if v < 1e-300 || (v < 1e-18 * sum && x * t.cosh() > 50.0) {
                break;
            }
            t += h;
        }
        sum * h
    }

    fn matern_bessel(nu: f64, l: f64, r: f64) -> f64 {
        let z = (2.0 * nu).sqrt() * r / l;
        2f64.powf(1.0 - nu) / gamma(nu) * z.powf(nu) * bessel_k(nu, z)
    }

    #[test]
    fn closed_forms_match_bessel_expression() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for (nu, s) in [
            (0.5, Smoothness::Half),
            (1.5, Smoothness::ThreeHalves),
            (2.5, Smoothness::FiveHalves),
        ] {
            let k = KernelSpec::matern(s, 0.7).unwrap();
            for _ in 0..100 {
                let r: f64 = rng.gen_range(0.01..5.0);
                let exact = matern_bessel(nu, 0.7, r);
                let closed = k.radial(r).unwrap();
                assert!((exact - closed).abs() <= 1e-10, "nu {nu} r {r}: {exact} vs {closed}");
            }
        }
    }

    #[test]
    fn examples() {
        let e = KernelSpec::exponential(0.1).unwrap();
        assert_eq!(e.radial(0.0), Some(1.0));
        assert!((e.radial(0.1).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!((e.radial(0.1).unwrap() - 0.367879).abs() < 1e-6);
        let p = KernelSpec::periodic(50.0, 1.0).unwrap();
        assert!((p.eval(&[0.0], &[1.0]) - 1.0).abs() < 1e-12);
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::exponential(-1.0).is_err());
    }

    #[test]
    fn parse_grammar() {
        let k: KernelSpec = "matern(nu=1/2,l=0.1)".parse().unwrap();
        assert_eq!(k, KernelSpec::exponential(0.1).unwrap());
        let k: KernelSpec = "gauss(l=0.5)".parse().unwrap();
        assert_eq!(k, KernelSpec::gaussian(0.5).unwrap());
        let k: KernelSpec = "periodic(s=50,l=1)".parse().unwrap();
        assert_eq!(k, KernelSpec::periodic(50.0, 1.0).unwrap());
        let k: KernelSpec = "prod(matern(nu=3/2, l=0.2)|slice=0..2, periodic(s=50,l=1)|slice=2..3)"
            .parse()
            .unwrap();
        assert!(k.check_dim(3).is_ok());
        assert!(k.check_dim(4).is_err());
        let x = [0.1, 0.2, 0.3];
        let y = [0.4, -0.1, 1.3];
        let expect = KernelSpec::matern(Smoothness::ThreeHalves, 0.2)
            .unwrap()
            .eval(&x[..2], &y[..2]);
        assert!((k.eval(&x, &y) - expect).abs() < 1e-14);
        let again: KernelSpec = k.to_string().parse().unwrap();
        assert_eq!(again, k);

        for bad in [
            "matern(nu=1/3,l=1)",
            "matern(l=1)",
            "gauss(l=-1)",
            "gauss(l=1,nu=2)",
            "foo(l=1)",
            "gauss(l=1",
            "gauss(l=1) x",
            "prod(gauss(l=1)|slice=0..2, gauss(l=1)|slice=1..3)",
        ] {
            assert!(matches!(bad.parse::<KernelSpec>(), Err(Error::KernelParse(_))), "{bad}");
        }
    }

    #[test]
    fn dense_matrix_examples() {
        let k = KernelSpec::exponential(0.3).unwrap();
        let one = PointCloud::new(2, vec![0.2, 0.4]).unwrap();
        assert_eq!(dense_kernel_matrix(&k, &one).unwrap(), DMatrix::from_element(1, 1, 1.0));
        let twin = PointCloud::new(2, vec![0.2, 0.4, 0.2, 0.4]).unwrap();
        let m = dense_kernel_matrix(&k, &twin).unwrap();
        assert_eq!(m, DMatrix::from_element(2, 2, 1.0));
        let ev = m.symmetric_eigenvalues();
        let (lo, hi) = (ev.min(), ev.max());
        assert!(lo.abs() < 1e-14 && (hi - 2.0).abs() < 1e-14);
    }

    #[test]
    fn dense_matrix_is_psd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let cloud = PointCloud::new(2, (0..128).map(|_| rng.gen::<f64>()).collect()).unwrap();
        for spec in ["matern(nu=1/2,l=0.2)", "matern(nu=5/2,l=0.2)", "gauss(l=0.3)"] {
            let k = dense_kernel_matrix(&spec.parse().unwrap(), &cloud).unwrap();
            assert_eq!(k.clone(), k.transpose());
            assert!(k.diagonal().iter().all(|d| *d == 1.0));
            assert!(k.symmetric_eigenvalues().min() >= -1e-8 * 64.0);
            let jittered = &k + DMatrix::identity(64, 64) * 1e-10;
            assert!(jittered.cholesky().is_some());
        }
    }

    proptest! {
        #[test]
        fn symmetric_and_stationary(
            x in prop::collection::vec(-2.0f64..2.0, 3),
            y in prop::collection::vec(-2.0f64..2.0, 3),
            shift in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            for spec in ["matern(nu=1/2,l=0.4)", "matern(nu=3/2,l=1)", "gauss(l=0.5)",
                         "prod(gauss(l=1)|slice=0..2, periodic(s=5,l=1)|slice=2..3)"] {
                let k: KernelSpec = spec.parse().unwrap();
                let xs: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
                let ys: Vec<f64> = y.iter().zip(&shift).map(|(a, b)| a + b).collect();
                prop_assert_eq!(k.eval(&x, &y), k.eval(&y, &x));
                prop_assert!((k.eval(&x, &y) - k.eval(&xs, &ys)).abs() < 1e-14);
                prop_assert!((k.eval(&x, &x) - 1.0).abs() < 1e-15);
            }
        }

        #[test]
        fn matern_decays(l in 0.05f64..3.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            for nu in [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves, Smoothness::Infinite] {
                let k = KernelSpec::matern(nu, l).unwrap();
                prop_assert!(k.radial(10.0 * l * lo).unwrap() >= k.radial(10.0 * l * hi).unwrap());
            }
        }
    }
}
