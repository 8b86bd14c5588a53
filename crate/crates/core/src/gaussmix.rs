//! Zero-mean Gaussian mixtures and the importance-sampled evaluation of
//! integrals of the form `∫ w(x)·(c₀ + xᵀQx)·[p₁(x) − p₂(x)] dx`, the shape
//! every sufficient condition in this crate reduces to. For scaled-tilt
//! weights the integral has a closed form through the Gaussian moment
//! generating function; otherwise it is estimated against the
//! equal-weight mixture of the densities involved, which keeps the
//! importance ratios bounded wherever either density dominates.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::mc::{expect_sampled, Estimate, SampleSpec};
use crate::pd::PdMatrix;
use crate::scalar::Scalar;
use crate::weights::Weight;
use rand::Rng;

/// Zero-mean Gaussian component.
#[derive(Clone, Debug)]
pub struct ZGauss<T> {
    cov: PdMatrix<T>,
}

impl<T: Scalar> ZGauss<T> {
    pub fn new(cov: PdMatrix<T>) -> Self {
        Self { cov }
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn cov(&self) -> &PdMatrix<T> {
        &self.cov
    }

    pub fn pdf(&self, x: &[T]) -> T {
        self.cov.pdf(x)
    }
}

/// Convex combination of zero-mean Gaussians.
#[derive(Clone, Debug)]
pub struct GaussMix<T> {
    comps: Vec<(T, ZGauss<T>)>,
}

impl<T: Scalar> GaussMix<T> {
    pub fn single(cov: PdMatrix<T>) -> Self {
        Self {
            comps: vec![(T::one(), ZGauss::new(cov))],
        }
    }

    pub fn mixture(comps: Vec<(T, PdMatrix<T>)>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::InvalidScenario("empty mixture".into()));
        }
        let dim = comps[0].1.dim();
        let mut total = T::zero();
        for (w, c) in &comps {
            if *w < T::zero() {
                return Err(Error::InvalidScenario("negative mixture weight".into()));
            }
            if c.dim() != dim {
                return Err(Error::DimensionMismatch(
                    "mixture component dimensions differ".into(),
                ));
            }
            total += *w;
        }
        if (total - T::one()).abs() > T::c(1e-9) {
            return Err(Error::InvalidScenario(
                "mixture weights must sum to one".into(),
            ));
        }
        Ok(Self {
            comps: comps
                .into_iter()
                .map(|(w, c)| (w, ZGauss::new(c)))
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.comps[0].1.dim()
    }

    pub fn components(&self) -> &[(T, ZGauss<T>)] {
        &self.comps
    }

    pub fn pdf(&self, x: &[T]) -> T {
        let mut p = T::zero();
        for (w, g) in &self.comps {
            if *w > T::zero() {
                p += *w * g.pdf(x);
            }
        }
        p
    }
}

/// Polynomial factor `x ↦ c₀ + xᵀQx` multiplying the weight inside a
/// condition integral.
#[derive(Clone, Debug)]
pub struct PolyFactor<T> {
    pub c0: T,
    pub quad: Option<Mat<T>>,
}

impl<T: Scalar> PolyFactor<T> {
    pub fn constant(c0: T) -> Self {
        Self { c0, quad: None }
    }

    pub fn eval(&self, x: &[T]) -> T {
        match &self.quad {
            None => self.c0,
            Some(q) => self.c0 + q.quad(x),
        }
    }
}

/// Closed-form `∫ c·e^{tᵀx}·(c₀ + xᵀQx)·N(0, cov)(x) dx`: the tilted measure
/// is `N(cov·t, cov)` with mass `c·exp(½ tᵀ·cov·t)`, under which the
/// quadratic has mean `tr(Q·cov) + mᵀQm`.
fn tilt_expectation<T: Scalar>(
    scale: T,
    tilt: &[T],
    cov: &PdMatrix<T>,
    factor: Option<&PolyFactor<T>>,
) -> T {
    let half = T::c(0.5);
    let ct = cov.entries().matvec(tilt);
    let alpha = scale * (half * crate::mat::dot(tilt, &ct)).exp();
    match factor {
        None => alpha,
        Some(f) => {
            let poly = match &f.quad {
                None => f.c0,
                Some(q) => f.c0 + q.trace_product(cov.entries()) + q.quad(&ct),
            };
            alpha * poly
        }
    }
}

/// One part of a sufficient condition:
/// `∫ w(x)·factor(x)·[p₁(x) − p₂(x)] dx`.
///
/// Closed form when the weight is a scaled tilt; otherwise importance
/// sampling with the equal-weight mixture of `p₁` and `p₂` as the proposal.
pub fn density_diff_part<T: Scalar>(
    w: &Weight<T>,
    factor: Option<&PolyFactor<T>>,
    p1: &GaussMix<T>,
    p2: &GaussMix<T>,
    spec: &SampleSpec,
) -> Result<Estimate<T>> {
    let dim = p1.dim();
    if p2.dim() != dim || w.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "densities on {} and {} coordinates, weight on {}",
            dim,
            p2.dim(),
            w.dim()
        )));
    }
    if let Some((scale, tilt)) = w.as_tilt() {
        if tilt.iter().all(|t| *t == T::zero()) {
            // Constant weight: the masses cancel first and the quadratic
            // factor acts on the difference of the mixture covariances, so
            // a genuine equality of densities comes out as an exact zero.
            let mass = |p: &GaussMix<T>| p.components().iter().fold(T::zero(), |s, (w, _)| s + *w);
            let mean_cov = |p: &GaussMix<T>| {
                let mut m = Mat::zeros(dim, dim);
                for (w, g) in p.components() {
                    m = m.add(&g.cov().entries().scaled(*w));
                }
                m
            };
            let mass_diff = mass(p1) - mass(p2);
            let value = match factor {
                None => scale * mass_diff,
                Some(f) => {
                    let quad_term = match &f.quad {
                        None => T::zero(),
                        Some(q) => q.trace_product(&mean_cov(p1).sub(&mean_cov(p2))),
                    };
                    scale * (f.c0 * mass_diff + quad_term)
                }
            };
            return Ok(Estimate::exact(value));
        }
        let mut value = T::zero();
        for (wt, g) in p1.components() {
            value += *wt * tilt_expectation(scale, tilt, g.cov(), factor);
        }
        for (wt, g) in p2.components() {
            value -= *wt * tilt_expectation(scale, tilt, g.cov(), factor);
        }
        return Ok(Estimate::exact(value));
    }

    // Proposal: pick a side uniformly, then a component by its weight.
    let half = T::c(0.5);
    let sides = [p1, p2];
    let mut gauss = vec![T::zero(); dim];
    expect_sampled(
        spec,
        dim,
        move |rng, buf| {
            let side = sides[usize::from(rng.gen::<bool>())];
            let mut u: T = T::c(rng.gen::<f64>());
            let comps = side.components();
            let mut chosen = &comps[comps.len() - 1].1;
            for (wt, g) in comps {
                if u < *wt {
                    chosen = g;
                    break;
                }
                u -= *wt;
            }
            for gi in gauss.iter_mut() {
                *gi = T::standard_normal(rng);
            }
            chosen.cov().correlate(&gauss, buf);
        },
        |x| {
            let q = half * (p1.pdf(x) + p2.pdf(x));
            if q <= T::zero() {
                return Ok(T::zero());
            }
            let diff = p1.pdf(x) - p2.pdf(x);
            let f = factor.map(|f| f.eval(x)).unwrap_or(T::one());
            Ok(w.eval(x)? * f * diff / q)
        },
    )
}
