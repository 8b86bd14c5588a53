//! Weight-function families and the derived weights built from them:
//! reductions onto sub-strings, the pair weights for sums of independent
//! Gaussian vectors, and the triple used by the superadditivity bound.
//!
//! The scaled exponential tilt `c·exp(tᵀx)` is closed under every derivation
//! in this module (conditioning and convolution against Gaussian laws map
//! tilts to tilts), so any weight built from constants, tilts and products
//! of one-dimensional factors stays in closed form. Host-supplied routines
//! evaluate through seeded Monte Carlo over the relevant conditional law.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::mc::{derive_seed, point_tag, SampleSpec};
use crate::pd::{psd_factor, IndexSet, PdMatrix};
use crate::scalar::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Externally supplied evaluation routine. Must be pure: the same input has
/// to produce the same output, or seeded estimates lose reproducibility.
pub type HostFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// One coordinate factor of a product-form weight.
#[derive(Clone, Debug, PartialEq)]
pub enum Factor<T> {
    Constant { c: T },
    ExpTilt { t: T },
}

/// User-facing weight-function family.
#[derive(Clone)]
pub enum WeightFunction<T> {
    /// φ(x) ≡ c with c ≥ 0.
    Constant { c: T },
    /// φ(x) = exp(tᵀx).
    ExpTilt { t: Vec<T> },
    /// φ(x) = Π φᵢ(xᵢ) with one-dimensional constant or tilt factors.
    Product { factors: Vec<Factor<T>> },
    /// Arbitrary nonnegative routine on a fixed dimension.
    Host { dim: usize, f: HostFn<T> },
}

impl<T: Scalar> WeightFunction<T> {
    pub fn one() -> Self {
        WeightFunction::Constant { c: T::one() }
    }

    /// Fixed dimension, when the family pins one down (constants are
    /// dimension-polymorphic).
    pub fn dim(&self) -> Option<usize> {
        match self {
            WeightFunction::Constant { .. } => None,
            WeightFunction::ExpTilt { t } => Some(t.len()),
            WeightFunction::Product { factors } => Some(factors.len()),
            WeightFunction::Host { dim, .. } => Some(*dim),
        }
    }

    /// Evaluate at a point. Dimension mismatches and negative host outputs
    /// are errors.
    pub fn eval(&self, x: &[T]) -> Result<T> {
        if let Some(d) = self.dim() {
            if d != x.len() {
                return Err(Error::DimensionMismatch(format!(
                    "weight on {} coordinates probed with {}",
                    d,
                    x.len()
                )));
            }
        }
        match self {
            WeightFunction::Constant { c } => Ok(*c),
            WeightFunction::ExpTilt { t } => Ok(crate::mat::dot(t, x).exp()),
            WeightFunction::Product { factors } => {
                let mut v = T::one();
                for (f, xi) in factors.iter().zip(x) {
                    v *= match f {
                        Factor::Constant { c } => *c,
                        Factor::ExpTilt { t } => (*t * *xi).exp(),
                    };
                }
                Ok(v)
            }
            WeightFunction::Host { f, .. } => {
                let v = f(x);
                if !v.is_finite() {
                    return Err(Error::NonFiniteIntegrand);
                }
                if v < T::zero() {
                    return Err(Error::NegativeWeight);
                }
                Ok(v)
            }
        }
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for WeightFunction<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightFunction::Constant { c } => write!(f, "Constant({c:?})"),
            WeightFunction::ExpTilt { t } => write!(f, "ExpTilt({t:?})"),
            WeightFunction::Product { factors } => write!(f, "Product({factors:?})"),
            WeightFunction::Host { dim, .. } => write!(f, "Host(dim={dim})"),
        }
    }
}

/// Evaluable weight on a fixed dimension; either a closed-form scaled tilt,
/// a host routine, or a Monte Carlo-backed conditional expectation of
/// another weight.
#[derive(Clone)]
pub struct Weight<T> {
    dim: usize,
    node: Node<T>,
}

#[derive(Clone)]
enum Node<T> {
    Tilt { scale: T, tilt: Vec<T> },
    Host { f: HostFn<T> },
    Affine(Arc<AffineExpect<T>>),
}

/// `w(x) = E[ base(Px·x + Pz·Z) ]` with `Z ~ N(mean_map·x, cov)`.
/// Covers reductions (conditional expectation over the complement),
/// sum-conditioned weights, and convolutions against a Gaussian law.
struct AffineExpect<T> {
    base: Weight<T>,
    px: Mat<T>,
    pz: Mat<T>,
    mean_map: Mat<T>,
    cov_factor: Mat<T>,
    spec: SampleSpec,
}

impl<T: Scalar> Weight<T> {
    pub fn constant(dim: usize, c: T) -> Self {
        Self {
            dim,
            node: Node::Tilt {
                scale: c,
                tilt: vec![T::zero(); dim],
            },
        }
    }

    pub fn tilt(scale: T, tilt: Vec<T>) -> Self {
        Self {
            dim: tilt.len(),
            node: Node::Tilt { scale, tilt },
        }
    }

    /// Adapt a user weight function to a fixed ambient dimension.
    pub fn from_wf(wf: &WeightFunction<T>, dim: usize) -> Result<Self> {
        if let Some(d) = wf.dim() {
            if d != dim {
                return Err(Error::DimensionMismatch(format!(
                    "weight on {d} coordinates used in dimension {dim}"
                )));
            }
        }
        Ok(match wf {
            WeightFunction::Constant { c } => Weight::constant(dim, *c),
            WeightFunction::ExpTilt { t } => Weight::tilt(T::one(), t.clone()),
            WeightFunction::Product { factors } => {
                let mut scale = T::one();
                let mut tilt = vec![T::zero(); dim];
                for (i, f) in factors.iter().enumerate() {
                    match f {
                        Factor::Constant { c } => scale *= *c,
                        Factor::ExpTilt { t } => tilt[i] = *t,
                    }
                }
                Weight::tilt(scale, tilt)
            }
            WeightFunction::Host { f, .. } => Weight {
                dim,
                node: Node::Host { f: Arc::clone(f) },
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The `(scale, tilt)` pair when this weight is a closed-form scaled
    /// exponential tilt.
    pub fn as_tilt(&self) -> Option<(T, &[T])> {
        match &self.node {
            Node::Tilt { scale, tilt } => Some((*scale, tilt)),
            _ => None,
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.node, Node::Tilt { .. })
    }

    pub fn scaled(&self, c: T) -> Self {
        match &self.node {
            Node::Tilt { scale, tilt } => Weight {
                dim: self.dim,
                node: Node::Tilt {
                    scale: *scale * c,
                    tilt: tilt.clone(),
                },
            },
            _ => {
                // Evaluation errors funnel through NaN and resurface as
                // non-finite-integrand errors at the sampling driver.
                let inner = self.clone();
                Weight {
                    dim: self.dim,
                    node: Node::Host {
                        f: Arc::new(move |x: &[T]| c * inner.eval(x).unwrap_or(T::nan())),
                    },
                }
            }
        }
    }

    /// Conditional-expectation derivation: the weight
    /// `x ↦ E[ base(Px·x + Pz·Z) ]`, `Z ~ N(mean_map·x, cov)`. Collapses to
    /// a scaled tilt whenever the base is one; otherwise evaluation is
    /// seeded Monte Carlo (per-call seed from the probe point).
    pub fn derive_affine(
        base: Weight<T>,
        px: Mat<T>,
        pz: Mat<T>,
        mean_map: Mat<T>,
        cov: &Mat<T>,
        spec: &SampleSpec,
    ) -> Result<Self> {
        let dim = px.ncols();
        let z_dim = pz.ncols();
        assert_eq!(px.nrows(), base.dim());
        assert_eq!(pz.nrows(), base.dim());
        assert_eq!(mean_map.nrows(), z_dim);
        assert_eq!(mean_map.ncols(), dim);
        assert_eq!(cov.nrows(), z_dim);
        if let Some((scale, tilt)) = base.as_tilt() {
            let u = pz.vecmat(tilt);
            let mut new_tilt = px.vecmat(tilt);
            let pull_back = mean_map.vecmat(&u);
            for (a, b) in new_tilt.iter_mut().zip(&pull_back) {
                *a += *b;
            }
            let half = T::c(0.5);
            let new_scale = scale * (half * cov.quad(&u)).exp();
            return Ok(Weight::tilt(new_scale, new_tilt));
        }
        let cov_factor = psd_factor(&cov.symmetrized())?;
        Ok(Weight {
            dim,
            node: Node::Affine(Arc::new(AffineExpect {
                base,
                px,
                pz,
                mean_map,
                cov_factor,
                spec: *spec,
            })),
        })
    }

    pub fn eval(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "weight on {} coordinates probed with {}",
                self.dim,
                x.len()
            )));
        }
        match &self.node {
            Node::Tilt { scale, tilt } => Ok(*scale * crate::mat::dot(tilt, x).exp()),
            Node::Host { f } => {
                let v = f(x);
                if !v.is_finite() {
                    return Err(Error::NonFiniteIntegrand);
                }
                if v < T::zero() {
                    return Err(Error::NegativeWeight);
                }
                Ok(v)
            }
            Node::Affine(a) => a.eval(x),
        }
    }
}

impl<T: Scalar> AffineExpect<T> {
    fn eval(&self, x: &[T]) -> Result<T> {
        let seed = derive_seed(self.spec.seed, point_tag(x));
        let z_dim = self.mean_map.nrows();
        let mean = self.mean_map.matvec(x);
        let base_from_x = self.px.matvec(x);
        let n = self.spec.n_samples;
        let mut sum = T::zero();
        let mut done = 0u64;
        let mut chunk_index = 0u64;
        let mut gauss = vec![T::zero(); z_dim];
        let mut z = vec![T::zero(); z_dim];
        let mut arg = vec![T::zero(); self.base.dim()];
        while done < n {
            let take = self.spec.chunk_size.min(n - done);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk_index.wrapping_add(1));
            for _ in 0..take {
                for gi in gauss.iter_mut() {
                    *gi = T::standard_normal(&mut rng);
                }
                for i in 0..z_dim {
                    let mut s = mean[i];
                    for j in 0..=i {
                        s += self.cov_factor[(i, j)] * gauss[j];
                    }
                    z[i] = s;
                }
                for (i, a) in arg.iter_mut().enumerate() {
                    let mut s = base_from_x[i];
                    for j in 0..z_dim {
                        s += self.pz[(i, j)] * z[j];
                    }
                    *a = s;
                }
                sum += self.base.eval(&arg)?;
            }
            done += take;
            chunk_index += 1;
        }
        Ok(sum / T::from_u64(n).unwrap())
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for Weight<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.node {
            Node::Tilt { scale, tilt } => write!(f, "Tilt(scale={scale:?}, t={tilt:?})"),
            Node::Host { .. } => write!(f, "Host(dim={})", self.dim),
            Node::Affine(_) => write!(f, "Derived(dim={})", self.dim),
        }
    }
}

/// Evaluation route of a derived quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Method {
    ClosedForm,
    MonteCarlo,
}

/// Weight induced on the coordinates in `subset` by averaging the base
/// weight over the conditional law of the complement under `model`.
#[derive(Clone, Debug)]
pub struct ReducedWf<T> {
    pub base: WeightFunction<T>,
    pub model: PdMatrix<T>,
    pub subset: IndexSet,
    pub method: Method,
    weight: Weight<T>,
}

impl<T: Scalar> ReducedWf<T> {
    pub fn weight(&self) -> &Weight<T> {
        &self.weight
    }

    pub fn eval(&self, x_s: &[T]) -> Result<T> {
        self.weight.eval(x_s)
    }
}

/// Reduce an evaluable weight on the model `c` onto the coordinates in `s`.
/// For the full set this is the identity.
pub fn reduce_weight<T: Scalar>(
    base: &Weight<T>,
    c: &PdMatrix<T>,
    s: &IndexSet,
    spec: &SampleSpec,
) -> Result<Weight<T>> {
    if base.dim() != c.dim() || s.dim() != c.dim() {
        return Err(Error::DimensionMismatch(format!(
            "weight dim {}, model dim {}, subset over {}",
            base.dim(),
            c.dim(),
            s.dim()
        )));
    }
    if s.is_full() {
        return Ok(base.clone());
    }
    let comp = s.complement_members();
    let (reg, k) = c.cond_given(s)?;
    let px = Mat::embedding(c.dim(), s.members());
    let pz = Mat::embedding(c.dim(), &comp);
    Weight::derive_affine(base.clone(), px, pz, reg, k.entries(), spec)
}

/// Reduce a user weight function; records the route taken.
pub fn reduce_wf<T: Scalar>(
    wf: &WeightFunction<T>,
    c: &PdMatrix<T>,
    s: &IndexSet,
    spec: &SampleSpec,
) -> Result<ReducedWf<T>> {
    let base = Weight::from_wf(wf, c.dim())?;
    let weight = reduce_weight(&base, c, s, spec)?;
    let method = if weight.is_closed_form() {
        Method::ClosedForm
    } else {
        Method::MonteCarlo
    };
    Ok(ReducedWf {
        base: wf.clone(),
        model: c.clone(),
        subset: s.clone(),
        method,
        weight,
    })
}

/// The pair of weights attached to a sum of independent zero-mean Gaussian
/// vectors `X ~ N(0, c1)`, `Y ~ N(0, c2)`, for a base weight on the paired
/// argument `(sum-side, y)` of dimension `2d`:
///
/// * `theta(v)   = E[ φ(v, Y) | X + Y = v ]` — the weight the sum carries;
/// * `theta_star(x) = E[ φ(x + Y, Y) ]` — the weight the first summand
///   carries.
///
/// The conditioned form keeps the sum variable in the first slot; this is
/// the convention under which the second moments of the pair split exactly
/// (the sum-side matrix equals the star matrix plus the cross matrix), which
/// the rank-one update bound relies on.
pub fn theta_pair<T: Scalar>(
    base: &Weight<T>,
    c1: &PdMatrix<T>,
    c2_cov: &Mat<T>,
    spec: &SampleSpec,
) -> Result<(Weight<T>, Weight<T>)> {
    let d = c1.dim();
    if base.dim() != 2 * d || c2_cov.nrows() != d || c2_cov.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "pair weight dim {} with summand dimension {}",
            base.dim(),
            d
        )));
    }
    let sum_cov = PdMatrix::try_new(c1.entries().add(c2_cov))?;
    let sum_inv = sum_cov.inverse();
    // Y | X+Y = v  ~  N(M·v, c2 − M·c2) with M = c2·(c1+c2)⁻¹.
    let m = c2_cov.matmul(&sum_inv);
    let cond_cov = c2_cov.sub(&m.matmul(c2_cov)).symmetrized();

    let top = Mat::embedding(2 * d, &(0..d).collect::<Vec<_>>());
    let bottom = Mat::embedding(2 * d, &(d..2 * d).collect::<Vec<_>>());

    // theta: argument (v, z) with z ~ N(M·v, cond_cov).
    let theta = Weight::derive_affine(
        base.clone(),
        top.clone(),
        bottom.clone(),
        m,
        &cond_cov,
        &spec.reseeded("theta"),
    )?;
    // theta_star: argument (x + z, z) with z ~ N(0, c2); z feeds both halves.
    let theta_star = Weight::derive_affine(
        base.clone(),
        top.clone(),
        top.add(&bottom),
        Mat::zeros(d, d),
        c2_cov,
        &spec.reseeded("theta_star"),
    )?;
    Ok((theta, theta_star))
}

/// The weight triple used by the superadditivity bound, for independent
/// `X ~ N(0, a)` and `Y ~ N(0, b)` with sum `Z`:
///
/// * `psi(z)  = E[ φ(z_d, z' − Y', Y') | Z = z ]` with `z' = z_1^{d−1}`;
/// * `chi(x)  = E[ psi(x + Y) ]`;
/// * `gamma(x) = E[ psi(x + X) ]`.
///
/// The base weight lives on `(last coordinate of the sum, first block,
/// second block)`, dimension `2d − 1`.
pub fn sum_split_weights<T: Scalar>(
    base: &Weight<T>,
    a: &PdMatrix<T>,
    b: &PdMatrix<T>,
    spec: &SampleSpec,
) -> Result<(Weight<T>, Weight<T>, Weight<T>)> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch("summand dimensions differ".into()));
    }
    if base.dim() != 2 * d - 1 {
        return Err(Error::DimensionMismatch(format!(
            "weight dim {} but the construction needs {}",
            base.dim(),
            2 * d - 1
        )));
    }
    let sum_cov = PdMatrix::try_new(a.entries().add(b.entries()))?;
    let m = b.entries().matmul(&sum_cov.inverse());
    let cond_cov = b.entries().sub(&m.matmul(b.entries())).symmetrized();

    // Argument layout: slot 0 = z_d; slots 1..d = z' − y'; slots d..2d−1 = y'.
    let mut px = Mat::zeros(2 * d - 1, d);
    px[(0, d - 1)] = T::one();
    for i in 0..d - 1 {
        px[(1 + i, i)] = T::one();
    }
    let mut pz = Mat::zeros(2 * d - 1, d);
    for i in 0..d - 1 {
        pz[(1 + i, i)] = -T::one();
        pz[(d + i, i)] = T::one();
    }
    let psi = Weight::derive_affine(
        base.clone(),
        px,
        pz,
        m,
        &cond_cov,
        &spec.reseeded("split/psi"),
    )?;

    let conv = |inner: &Weight<T>, cov: &PdMatrix<T>, label: &str| {
        Weight::derive_affine(
            inner.clone(),
            Mat::identity(d),
            Mat::identity(d),
            Mat::zeros(d, d),
            cov.entries(),
            &spec.reseeded(label),
        )
    };
    let chi = conv(&psi, b, "split/chi")?;
    let gamma = conv(&psi, a, "split/gamma")?;
    Ok((psi, chi, gamma))
}
