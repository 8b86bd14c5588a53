//! Weighted Gaussian moments, weighted entropies (joint, conditional,
//! mutual), and the k-indexed subset sequences built from them.
//!
//! Everything here reduces to two objects for a covariance `C` and weight
//! `w`: the weighted mass `alpha = E[w(X)]` and the weighted second-moment
//! matrix `Phi = E[w(X)·X·Xᵀ]` under `X ~ N(0, C)`. By the tower property
//! the mass is the same for every sub-string, and the second-moment matrix
//! of a sub-string under its reduced weight is the corresponding principal
//! sub-matrix of `Phi`; the subset sequences exploit both.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::mc::{expect, expect_many, Estimate, SampleSpec};
use crate::pd::{is_toeplitz, subsets_of_size, IndexSet, PdMatrix};
use crate::scalar::{symmetry_tol, Scalar};
use crate::weights::{reduce_weight, Method, Weight, WeightFunction};
use serde::Serialize;

/// Entrywise estimate of a symmetric matrix quantity.
#[derive(Clone, Debug, Serialize)]
pub struct MatrixEstimate<T> {
    pub values: Mat<T>,
    pub stderrs: Mat<T>,
    pub n: u64,
}

impl<T: Scalar> MatrixEstimate<T> {
    pub fn exact(values: Mat<T>) -> Self {
        let z = Mat::zeros(values.nrows(), values.ncols());
        Self {
            values,
            stderrs: z,
            n: 0,
        }
    }
}

/// The `(alpha, Phi)` pair for one `(covariance, weight)` model.
#[derive(Clone, Debug, Serialize)]
pub struct WeightedMoments<T> {
    pub alpha: Estimate<T>,
    pub phi: MatrixEstimate<T>,
    pub method: Method,
}

/// Weighted moments, closed form for scaled tilts and Monte Carlo
/// otherwise: `alpha = c·exp(½tᵀCt)`, `Phi = alpha·(C + C·t·tᵀ·C)`.
pub fn weighted_moments<T: Scalar>(
    c: &PdMatrix<T>,
    w: &Weight<T>,
    spec: &SampleSpec,
) -> Result<WeightedMoments<T>> {
    check_dim(c, w)?;
    if let Some((scale, tilt)) = w.as_tilt() {
        let half = T::c(0.5);
        let ct = c.entries().matvec(tilt);
        let alpha = scale * (half * crate::mat::dot(tilt, &ct)).exp();
        let phi = c.entries().add(&Mat::outer(&ct, &ct)).scaled(alpha);
        return Ok(WeightedMoments {
            alpha: Estimate::exact(alpha),
            phi: MatrixEstimate::exact(phi),
            method: Method::ClosedForm,
        });
    }
    weighted_moments_mc(c, w, spec)
}

/// Monte Carlo weighted moments regardless of the weight's structure.
pub fn weighted_moments_mc<T: Scalar>(
    c: &PdMatrix<T>,
    w: &Weight<T>,
    spec: &SampleSpec,
) -> Result<WeightedMoments<T>> {
    check_dim(c, w)?;
    let d = c.dim();
    let m = 1 + d * (d + 1) / 2;
    let ests = expect_many(c, spec, m, |x, out| {
        let wv = w.eval(x)?;
        out[0] = wv;
        let mut k = 1;
        for i in 0..d {
            for j in i..d {
                out[k] = wv * x[i] * x[j];
                k += 1;
            }
        }
        Ok(())
    })?;
    let alpha = ests[0];
    let mut values = Mat::zeros(d, d);
    let mut stderrs = Mat::zeros(d, d);
    let mut k = 1;
    for i in 0..d {
        for j in i..d {
            values[(i, j)] = ests[k].value;
            values[(j, i)] = ests[k].value;
            stderrs[(i, j)] = ests[k].stderr;
            stderrs[(j, i)] = ests[k].stderr;
            k += 1;
        }
    }
    Ok(WeightedMoments {
        alpha,
        phi: MatrixEstimate {
            values,
            stderrs,
            n: spec.n_samples,
        },
        method: Method::MonteCarlo,
    })
}

/// Weighted entropy of the zero-mean normal with covariance `c`:
/// `(alpha/2)·ln[(2π)^d·det C] + ½·tr(C⁻¹·Phi)`, in nats.
pub fn gaussian_we<T: Scalar>(
    c: &PdMatrix<T>,
    w: &Weight<T>,
    spec: &SampleSpec,
) -> Result<Estimate<T>> {
    check_dim(c, w)?;
    if let Some((scale, tilt)) = w.as_tilt() {
        return Ok(Estimate::exact(gaussian_we_tilt(c, scale, tilt)));
    }
    gaussian_we_mc(c, w, spec)
}

fn gaussian_we_tilt<T: Scalar>(c: &PdMatrix<T>, scale: T, tilt: &[T]) -> T {
    let half = T::c(0.5);
    let d = T::from_usize(c.dim()).unwrap();
    let ct = c.entries().matvec(tilt);
    let tct = crate::mat::dot(tilt, &ct);
    let alpha = scale * (half * tct).exp();
    let log_norm = d * T::c(std::f64::consts::TAU).ln() + c.log_det();
    alpha * half * (log_norm + d + tct)
}

/// Monte Carlo weighted entropy: one expectation of `−w(x)·ln f_C(x)`.
pub fn gaussian_we_mc<T: Scalar>(
    c: &PdMatrix<T>,
    w: &Weight<T>,
    spec: &SampleSpec,
) -> Result<Estimate<T>> {
    check_dim(c, w)?;
    expect(|x| Ok(-w.eval(x)? * c.log_pdf(x)), c, spec)
}

/// Conditional weighted entropy of the trailing block given the first `p`
/// coordinates: the joint entropy minus the entropy of the leading block
/// under the reduced weight.
pub fn conditional_we<T: Scalar>(
    c: &PdMatrix<T>,
    p: usize,
    w: &Weight<T>,
    spec: &SampleSpec,
) -> Result<Estimate<T>> {
    check_dim(c, w)?;
    let d = c.dim();
    if p == 0 || p >= d {
        return Err(Error::IndexOutOfRange);
    }
    let head = IndexSet::new(d, (0..p).collect())?;
    let reduced = reduce_weight(w, c, &head, &spec.reseeded("cond/reduce").nested())?;
    let full = gaussian_we(c, w, &spec.reseeded("cond/full"))?;
    let marg = gaussian_we(&c.leading(p)?, &reduced, &spec.reseeded("cond/marginal"))?;
    Ok(full.sub(&marg))
}

/// Mutual weighted entropy between the coordinates in `s` and their
/// complement. The closed form carries the full-model mass on the
/// determinant ratio; the Monte Carlo route integrates the single
/// log-ratio integrand.
pub fn mutual_we<T: Scalar>(
    c: &PdMatrix<T>,
    s: &IndexSet,
    w: &Weight<T>,
    spec: &SampleSpec,
) -> Result<Estimate<T>> {
    check_dim(c, w)?;
    if s.dim() != c.dim() {
        return Err(Error::DimensionMismatch(
            "index set over a different dimension".into(),
        ));
    }
    if s.is_full() {
        return Err(Error::InvalidScenario(
            "mutual entropy needs a proper subset".into(),
        ));
    }
    if w.as_tilt().is_some() {
        let m = weighted_moments(c, w, spec)?;
        return Ok(Estimate::exact(mutual_we_closed(
            c,
            s,
            m.alpha.value,
            &m.phi.values,
        )));
    }
    let comp = s.complement()?;
    let c_s = c.submatrix(s)?;
    let c_sc = c.submatrix(&comp)?;
    let members = s.members().to_vec();
    let comp_members = comp.members().to_vec();
    expect(
        move |x| {
            let xs: Vec<T> = members.iter().map(|&i| x[i]).collect();
            let xc: Vec<T> = comp_members.iter().map(|&i| x[i]).collect();
            Ok(w.eval(x)? * (c.log_pdf(x) - c_s.log_pdf(&xs) - c_sc.log_pdf(&xc)))
        },
        c,
        &spec.reseeded_u64(s.bitmask()),
    )
}

fn mutual_we_closed<T: Scalar>(c: &PdMatrix<T>, s: &IndexSet, alpha: T, phi: &Mat<T>) -> T {
    let half = T::c(0.5);
    let comp = s.complement_members();
    let c_s = PdMatrix::try_new(c.entries().select(s.members(), s.members())).unwrap();
    let c_sc = PdMatrix::try_new(c.entries().select(&comp, &comp)).unwrap();
    let tr = |sub: &PdMatrix<T>, idx: &[usize]| sub.inverse().trace_product(&phi.select(idx, idx));
    let log_ratio = c_s.log_det() + c_sc.log_det() - c.log_det();
    let traces = tr(&c_s, s.members()) + tr(&c_sc, &comp) - c.inverse().trace_product(phi);
    half * (alpha * log_ratio + traces)
}

fn check_dim<T: Scalar>(c: &PdMatrix<T>, w: &Weight<T>) -> Result<()> {
    if w.dim() != c.dim() {
        return Err(Error::DimensionMismatch(format!(
            "weight on {} coordinates, model on {}",
            w.dim(),
            c.dim()
        )));
    }
    Ok(())
}

/// Subset-sequence labels. Single letters follow the quantity each sequence
/// averages: per-element sub-string entropies (`h`, and `m` for the
/// determinant-flavored statement), their exponentials (`g`, `s`),
/// conditional entropies (`p`, `w`), per-element mutual entropies (`q`,
/// `u`), plain mutual entropies (`i`, `z`) and the leading-principal
/// Toeplitz sequence (`a`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainLabel {
    H,
    G,
    P,
    Q,
    I,
    M,
    S,
    A,
    W,
    U,
    Z,
}

impl ChainLabel {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "h" => ChainLabel::H,
            "g" => ChainLabel::G,
            "p" => ChainLabel::P,
            "q" => ChainLabel::Q,
            "I" | "i" => ChainLabel::I,
            "m" => ChainLabel::M,
            "s" => ChainLabel::S,
            "a" => ChainLabel::A,
            "w" => ChainLabel::W,
            "u" => ChainLabel::U,
            "z" => ChainLabel::Z,
            other => return Err(Error::UnknownId(other.into())),
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ChainLabel::H => "h",
            ChainLabel::G => "g",
            ChainLabel::P => "p",
            ChainLabel::Q => "q",
            ChainLabel::I => "i",
            ChainLabel::M => "m",
            ChainLabel::S => "s",
            ChainLabel::A => "a",
            ChainLabel::W => "w",
            ChainLabel::U => "u",
            ChainLabel::Z => "z",
        }
    }

    /// Number of entries: `1..=d`, except the plain-mutual `z` sequence
    /// which is defined up to `⌊d/2⌋`.
    pub fn k_max(&self, d: usize) -> usize {
        match self {
            ChainLabel::Z => (d / 2).max(1),
            _ => d,
        }
    }

    /// Largest `k` included in the monotonicity claim (the mutual-entropy
    /// sequences are symmetric around `d/2`).
    pub fn monotone_k_max(&self, d: usize) -> usize {
        match self {
            ChainLabel::I | ChainLabel::Z => (d / 2).max(1),
            _ => d,
        }
    }

    /// Whether the sequence increases with `k`. Conditional entropies and
    /// the averaged mutual entropy rise as blocks grow; the per-element
    /// sequences fall.
    pub fn increasing(&self) -> bool {
        matches!(
            self,
            ChainLabel::P | ChainLabel::W | ChainLabel::I | ChainLabel::Z
        )
    }

    pub fn needs_r(&self) -> bool {
        matches!(self, ChainLabel::G | ChainLabel::S)
    }
}

/// One subset sequence with per-entry uncertainty.
#[derive(Clone, Debug, Serialize)]
pub struct ChainValues<T> {
    pub label: ChainLabel,
    pub d: usize,
    pub values: Vec<Estimate<T>>,
    pub method: Method,
}

/// Row form used for emission: `{label, d, k, value, stderr}`.
#[derive(Clone, Debug, Serialize)]
pub struct ChainRow {
    pub label: String,
    pub d: usize,
    pub k: usize,
    pub value: f64,
    pub stderr: f64,
}

impl<T: Scalar> ChainValues<T> {
    pub fn rows(&self) -> Vec<ChainRow> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, e)| ChainRow {
                label: self.label.as_str().to_string(),
                d: self.d,
                k: i + 1,
                value: e.value.as_f64(),
                stderr: e.stderr.as_f64(),
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,d,k,value,stderr\n");
        for r in self.rows() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.label, r.d, r.k, r.value, r.stderr
            ));
        }
        out
    }
}

const SUBSET_ENUMERATION_CAP: usize = 16;

/// Compute a subset sequence. Enumerates all size-k subsets for each k,
/// forms the per-subset term from the reduced-weight entropies, and
/// averages with the binomial normalization. Per-subset Monte Carlo terms
/// draw independent seeds from the subset bitmask, and entry uncertainties
/// combine in quadrature under the binomial average.
pub fn chain<T: Scalar>(
    label: ChainLabel,
    c: &PdMatrix<T>,
    wf: &WeightFunction<T>,
    spec: &SampleSpec,
    r: Option<T>,
) -> Result<ChainValues<T>> {
    let d = c.dim();
    if d > SUBSET_ENUMERATION_CAP {
        return Err(Error::SubsetCapExceeded);
    }
    let w = Weight::from_wf(wf, d)?;
    if label.needs_r() {
        match r {
            Some(r) if r > T::zero() => {}
            _ => return Err(Error::MissingScenarioField("r".into())),
        }
    }
    if label == ChainLabel::A {
        let scale = c.entries().max_abs().max(T::one());
        if !is_toeplitz(c.entries(), symmetry_tol::<T>() * T::c(1e3) * scale) {
            return Err(Error::NotToeplitz);
        }
        if matches!(wf, WeightFunction::Host { .. }) {
            return Err(Error::InvalidScenario(
                "the leading-principal sequence needs a product-form weight".into(),
            ));
        }
    }

    let closed = w.as_tilt().is_some();
    let moments = if closed {
        Some(weighted_moments(c, &w, spec)?)
    } else {
        None
    };

    // Per-subset weighted entropy of the sub-string, closed or seeded by
    // the subset bitmask.
    let entropy_of = |mask: u64| -> Result<Estimate<T>> {
        let s = IndexSet::from_bitmask(d, mask)?;
        if let Some(m) = &moments {
            let sub = c.submatrix(&s)?;
            let phi_ss = m.phi.values.select(s.members(), s.members());
            let k_t = T::from_usize(s.len()).unwrap();
            let half = T::c(0.5);
            let log_norm = k_t * T::c(std::f64::consts::TAU).ln() + sub.log_det();
            let v = half * (m.alpha.value * log_norm + sub.inverse().trace_product(&phi_ss));
            return Ok(Estimate::exact(v));
        }
        let sub = c.submatrix(&s)?;
        let members = s.members().to_vec();
        expect(
            |x| {
                let xs: Vec<T> = members.iter().map(|&i| x[i]).collect();
                Ok(-w.eval(x)? * sub.log_pdf(&xs))
            },
            c,
            &spec.reseeded_u64(mask),
        )
    };
    let full_mask = (1u64 << d) - 1;

    let mut values = Vec::new();
    for k in 1..=label.k_max(d) {
        let k_t = T::from_usize(k).unwrap();
        if label == ChainLabel::A {
            // a(k) = 2·h(leading k)/k, no subset average.
            let mask = (1u64 << k) - 1;
            let h = entropy_of(mask)?;
            let two = T::c(2.0);
            values.push(h.scaled(two / k_t));
            continue;
        }
        let masks = subsets_of_size(d, k);
        let norm = T::one() / T::from_usize(masks.len()).unwrap();
        let mut total = T::zero();
        let mut var = T::zero();
        let mut n = 0u64;
        for mask in masks {
            let term: Estimate<T> = match label {
                ChainLabel::H | ChainLabel::M => entropy_of(mask)?.scaled(T::one() / k_t),
                ChainLabel::G | ChainLabel::S => {
                    let h = entropy_of(mask)?;
                    let r = r.unwrap();
                    let v = (r * h.value / k_t).exp();
                    Estimate {
                        value: v,
                        stderr: v * (r / k_t) * h.stderr,
                        n: h.n,
                        seed: h.seed,
                    }
                }
                ChainLabel::P | ChainLabel::W => {
                    conditional_term(c, &w, mask, full_mask, spec, &entropy_of)?
                        .scaled(T::one() / k_t)
                }
                ChainLabel::Q | ChainLabel::U => {
                    mutual_term(c, &w, mask, full_mask, spec)?.scaled(T::one() / k_t)
                }
                ChainLabel::I | ChainLabel::Z => mutual_term(c, &w, mask, full_mask, spec)?,
                ChainLabel::A => unreachable!(),
            };
            total += term.value;
            var += term.stderr * term.stderr;
            n = n.max(term.n);
        }
        values.push(Estimate {
            value: total * norm,
            stderr: var.sqrt() * norm,
            n,
            seed: spec.seed,
        });
    }
    Ok(ChainValues {
        label,
        d,
        values,
        method: if closed {
            Method::ClosedForm
        } else {
            Method::MonteCarlo
        },
    })
}

/// `h(X(S) | X(S^c))` as one term: the full entropy minus the complement's
/// reduced entropy, estimated as a single integrand on the Monte Carlo
/// path. The complement of the full set contributes nothing.
fn conditional_term<T: Scalar>(
    c: &PdMatrix<T>,
    w: &Weight<T>,
    mask: u64,
    full_mask: u64,
    spec: &SampleSpec,
    entropy_of: &impl Fn(u64) -> Result<Estimate<T>>,
) -> Result<Estimate<T>> {
    let comp_mask = full_mask & !mask;
    if comp_mask == 0 {
        return entropy_of(mask);
    }
    if w.as_tilt().is_some() {
        return Ok(entropy_of(full_mask)?.sub(&entropy_of(comp_mask)?));
    }
    let d = c.dim();
    let comp = IndexSet::from_bitmask(d, comp_mask)?;
    let c_sc = c.submatrix(&comp)?;
    let comp_members = comp.members().to_vec();
    expect(
        |x| {
            let xc: Vec<T> = comp_members.iter().map(|&i| x[i]).collect();
            Ok(w.eval(x)? * (c_sc.log_pdf(&xc) - c.log_pdf(x)))
        },
        c,
        &spec.reseeded_u64(mask),
    )
}

/// `i(X(S) : X(S^c))` as one term; zero when the complement is empty.
fn mutual_term<T: Scalar>(
    c: &PdMatrix<T>,
    w: &Weight<T>,
    mask: u64,
    full_mask: u64,
    spec: &SampleSpec,
) -> Result<Estimate<T>> {
    if full_mask & !mask == 0 {
        return Ok(Estimate::exact(T::zero()));
    }
    let s = IndexSet::from_bitmask(c.dim(), mask)?;
    mutual_we(c, &s, w, spec)
}

/// The concavity functional: twice the conditional weighted entropy of the
/// trailing block given the first `p` coordinates; zero at `p = d`.
pub fn mu<T: Scalar>(
    c: &PdMatrix<T>,
    p: usize,
    w: &Weight<T>,
    spec: &SampleSpec,
) -> Result<Estimate<T>> {
    check_dim(c, w)?;
    if p == 0 || p > c.dim() {
        return Err(Error::IndexOutOfRange);
    }
    if p == c.dim() {
        return Ok(Estimate::exact(T::zero()));
    }
    Ok(conditional_we(c, p, w, spec)?.scaled(T::c(2.0)))
}

/// The last-coordinate conditional functional: the conditional weighted
/// entropy of coordinate `d` given the rest.
pub fn varpi<T: Scalar>(c: &PdMatrix<T>, w: &Weight<T>, spec: &SampleSpec) -> Result<Estimate<T>> {
    if c.dim() < 2 {
        return Err(Error::IndexOutOfRange);
    }
    conditional_we(c, c.dim() - 1, w, spec)
}
