//! Both sides of every weighted determinant inequality, with margins,
//! prerequisite-condition evaluation, and grid sweeps. Margins are oriented
//! so that a nonnegative margin means the inequality holds as stated; all
//! determinant-scale expressions carry the doubled (trace-plus-log) form so
//! constant-weight margins reduce to the classical determinant statements.

use crate::conditions::{check, ConditionId, ConditionReport};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::mc::{expect, judge, Direction, Estimate, SampleSpec, Verdict};
use crate::moments::{chain, gaussian_we, varpi, weighted_moments, ChainLabel, ChainValues};
use crate::pd::{
    is_cyclic_toeplitz, is_toeplitz, psd_factor, rank_one_decompose, sherman_morrison_inverse,
    IndexSet, PdMatrix,
};
use crate::scalar::{symmetry_tol, Scalar};
use crate::scenario::Scenario;
use crate::weights::{sum_split_weights, theta_pair, Weight, WeightFunction};
use serde::Serialize;

/// Inequality identifiers; the strings are the stable CLI names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum InequalityId {
    KyFanW,
    KyFanStd,
    Thm51,
    Thm51Alt,
    Rank1,
    SzaszM,
    SzaszS,
    ToeplitzA,
    WChain,
    UChain,
    ZChain,
    Whi,
    Wshi,
    Identity67,
    Concavity,
    Superadd,
    Sandwich,
    Chain29,
    Chain213,
    Chain216,
    Chain219,
    Chain222,
}

pub const ALL_INEQUALITIES: [InequalityId; 22] = [
    InequalityId::KyFanW,
    InequalityId::KyFanStd,
    InequalityId::Thm51,
    InequalityId::Thm51Alt,
    InequalityId::Rank1,
    InequalityId::SzaszM,
    InequalityId::SzaszS,
    InequalityId::ToeplitzA,
    InequalityId::WChain,
    InequalityId::UChain,
    InequalityId::ZChain,
    InequalityId::Whi,
    InequalityId::Wshi,
    InequalityId::Identity67,
    InequalityId::Concavity,
    InequalityId::Superadd,
    InequalityId::Sandwich,
    InequalityId::Chain29,
    InequalityId::Chain213,
    InequalityId::Chain216,
    InequalityId::Chain219,
    InequalityId::Chain222,
];

impl InequalityId {
    pub fn as_str(&self) -> &'static str {
        match self {
            InequalityId::KyFanW => "KyFanW",
            InequalityId::KyFanStd => "KyFanStd",
            InequalityId::Thm51 => "Thm5.1",
            InequalityId::Thm51Alt => "Thm5.1alt",
            InequalityId::Rank1 => "Rank1",
            InequalityId::SzaszM => "SzaszM",
            InequalityId::SzaszS => "SzaszS",
            InequalityId::ToeplitzA => "ToeplitzA",
            InequalityId::WChain => "WChain",
            InequalityId::UChain => "UChain",
            InequalityId::ZChain => "ZChain",
            InequalityId::Whi => "WHI",
            InequalityId::Wshi => "WSHI",
            InequalityId::Identity67 => "Identity6.7",
            InequalityId::Concavity => "Concavity",
            InequalityId::Superadd => "Superadd",
            InequalityId::Sandwich => "Sandwich",
            InequalityId::Chain29 => "Chain2.9",
            InequalityId::Chain213 => "Chain2.13",
            InequalityId::Chain216 => "Chain2.16",
            InequalityId::Chain219 => "Chain2.19",
            InequalityId::Chain222 => "Chain2.22",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ALL_INEQUALITIES
            .iter()
            .copied()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownId(s.into()))
    }

    /// Prerequisite conditions attached to the report.
    pub fn prerequisites(&self) -> &'static [ConditionId] {
        match self {
            InequalityId::KyFanW => &[ConditionId::C1_6],
            InequalityId::KyFanStd => &[],
            InequalityId::Thm51 | InequalityId::Thm51Alt | InequalityId::Rank1 => {
                &[ConditionId::C5_3]
            }
            InequalityId::SzaszM | InequalityId::SzaszS | InequalityId::ToeplitzA => {
                &[ConditionId::C5_12]
            }
            InequalityId::WChain | InequalityId::Whi | InequalityId::Sandwich => {
                &[ConditionId::C5_20]
            }
            InequalityId::UChain | InequalityId::ZChain => &[ConditionId::C5_24],
            InequalityId::Wshi => &[ConditionId::C6_3],
            InequalityId::Identity67 => &[],
            InequalityId::Concavity => &[ConditionId::C6_11, ConditionId::C6_12],
            InequalityId::Superadd => &[ConditionId::C6_17],
            InequalityId::Chain29 | InequalityId::Chain213 | InequalityId::Chain219 => {
                &[ConditionId::C2_8]
            }
            InequalityId::Chain216 => &[ConditionId::C2_15],
            InequalityId::Chain222 => &[ConditionId::C2_20],
        }
    }

    /// Scenario fields the verifier reads, for fail-fast validation.
    pub fn required_fields(&self) -> &'static [&'static str] {
        match self {
            InequalityId::KyFanW | InequalityId::KyFanStd => {
                &["matrices.C1", "matrices.C2", "lambda"]
            }
            InequalityId::Thm51 | InequalityId::Thm51Alt => &["matrices.C1", "matrices.C2", "wf"],
            InequalityId::Rank1 => &["matrices.C1", "matrices.E", "wf"],
            InequalityId::SzaszS | InequalityId::Chain213 => &["matrices.C", "wf", "r"],
            InequalityId::Wshi => &["matrices.C", "p", "wf"],
            InequalityId::Concavity => &["matrices.C1", "matrices.C2", "lambda", "p", "wf"],
            InequalityId::Superadd => &["matrices.A", "matrices.B", "wf"],
            _ => &["matrices.C", "wf"],
        }
    }

    fn chain_label(&self) -> Option<ChainLabel> {
        Some(match self {
            InequalityId::SzaszM => ChainLabel::M,
            InequalityId::SzaszS => ChainLabel::S,
            InequalityId::ToeplitzA => ChainLabel::A,
            InequalityId::WChain => ChainLabel::W,
            InequalityId::UChain => ChainLabel::U,
            InequalityId::ZChain => ChainLabel::Z,
            InequalityId::Chain29 => ChainLabel::H,
            InequalityId::Chain213 => ChainLabel::G,
            InequalityId::Chain216 => ChainLabel::P,
            InequalityId::Chain219 => ChainLabel::Q,
            InequalityId::Chain222 => ChainLabel::I,
            _ => return None,
        })
    }
}

/// One consecutive-difference margin of a chain, or one side of a
/// multi-part bound.
#[derive(Clone, Debug, Serialize)]
pub struct StepMargin<T> {
    pub label: String,
    pub margin: Estimate<T>,
    pub verdict: Verdict,
}

/// Full report for one inequality.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport<T> {
    pub id: String,
    pub lhs: Estimate<T>,
    pub rhs: Estimate<T>,
    /// Oriented so that a nonnegative margin means the inequality holds;
    /// for chains, the weakest consecutive difference.
    pub margin: Estimate<T>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<StepMargin<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<Vec<crate::moments::ChainRow>>,
    pub prerequisites: Vec<ConditionReport<T>>,
    pub verdict: Verdict,
    pub note: String,
}

/// Evaluate an inequality and its prerequisite conditions.
///
/// A failed prerequisite never short-circuits: the inequality is still
/// evaluated and the note records the failure.
pub fn verify<T: Scalar>(id: InequalityId, sc: &Scenario<T>) -> Result<InequalityReport<T>> {
    let mut report = match id {
        InequalityId::KyFanStd => kyfan_std(sc)?,
        InequalityId::KyFanW => kyfan_weighted(sc)?,
        InequalityId::Thm51 => sum_bound(sc, SumBoundForm::Direct)?,
        InequalityId::Thm51Alt => sum_bound(sc, SumBoundForm::Split)?,
        InequalityId::Rank1 => sum_bound(sc, SumBoundForm::RankOne)?,
        InequalityId::Whi => hadamard(sc)?,
        InequalityId::Wshi => strong_hadamard(sc)?,
        InequalityId::Identity67 => last_pivot_identity(sc)?,
        InequalityId::Concavity => concavity(sc)?,
        InequalityId::Superadd => superadditivity(sc)?,
        InequalityId::Sandwich => sandwich(sc)?,
        _ => chain_report(id, sc)?,
    };
    report.id = id.as_str().into();

    // The rank-one bound's condition reads the second summand as C2.
    let prereq_sc = if id == InequalityId::Rank1 {
        let mut adapted = sc.clone();
        let e = sc.sym("E")?;
        adapted.matrices.insert("C2".into(), e);
        adapted
    } else {
        sc.clone()
    };
    for cid in id.prerequisites() {
        let prereq = check(*cid, &prereq_sc)?;
        if prereq.verdict == Verdict::Fails {
            if !report.note.is_empty() {
                report.note.push_str("; ");
            }
            report.note.push_str(&format!(
                "prerequisite {} failed; inequality evaluated anyway",
                prereq.id
            ));
        }
        report.prerequisites.push(prereq);
    }
    Ok(report)
}

fn blank_report<T: Scalar>(
    lhs: Estimate<T>,
    rhs: Estimate<T>,
    margin: Estimate<T>,
    verdict: Verdict,
) -> InequalityReport<T> {
    InequalityReport {
        id: String::new(),
        lhs,
        rhs,
        margin,
        steps: Vec::new(),
        chain: None,
        prerequisites: Vec::new(),
        verdict,
        note: String::new(),
    }
}

fn simple_report<T: Scalar>(
    sc: &Scenario<T>,
    lhs: Estimate<T>,
    rhs: Estimate<T>,
    direction: Direction,
) -> InequalityReport<T> {
    let margin = lhs.sub(&rhs);
    let verdict = judge(
        margin.value,
        margin.stderr,
        direction,
        sc.zcrit,
        sc.tolerance,
    );
    blank_report(lhs, rhs, margin, verdict)
}

/// Log-determinant concavity at constant weight: the classical form on the
/// determinant scale.
fn kyfan_std<T: Scalar>(sc: &Scenario<T>) -> Result<InequalityReport<T>> {
    let c1 = sc.pd("C1")?;
    let c2 = sc.pd("C2")?;
    let lambda = sc.need_lambda()?;
    let mixed = PdMatrix::try_new(
        c1.entries()
            .scaled(lambda)
            .add(&c2.entries().scaled(T::one() - lambda)),
    )?;
    let lhs = Estimate::exact(mixed.log_det());
    let rhs = Estimate::exact(lambda * c1.log_det() + (T::one() - lambda) * c2.log_det());
    Ok(simple_report(sc, lhs, rhs, Direction::NonNegative))
}

/// Weighted concavity on the determinant scale: twice the weighted-entropy
/// difference, which reduces to the constant-weight form exactly.
fn kyfan_weighted<T: Scalar>(sc: &Scenario<T>) -> Result<InequalityReport<T>> {
    let c1 = sc.pd("C1")?;
    let c2 = sc.pd("C2")?;
    let lambda = sc.need_lambda()?;
    let d = c1.dim();
    if c2.dim() != d {
        return Err(Error::DimensionMismatch("C1 and C2 sizes differ".into()));
    }
    let w = sc.weight(d)?;
    let mixed = PdMatrix::try_new(
        c1.entries()
            .scaled(lambda)
            .add(&c2.entries().scaled(T::one() - lambda)),
    )?;
    let two = T::c(2.0);
    let s_mix = gaussian_we(&mixed, &w, &sc.spec.reseeded("kyfan/mixed"))?.scaled(two);
    let s1 = gaussian_we(&c1, &w, &sc.spec.reseeded("kyfan/c1"))?.scaled(two * lambda);
    let s2 = gaussian_we(&c2, &w, &sc.spec.reseeded("kyfan/c2"))?.scaled(two * (T::one() - lambda));
    let rhs = s1.add(&s2);
    Ok(simple_report(sc, s_mix, rhs, Direction::NonNegative))
}

enum SumBoundForm {
    Direct,
    Split,
    RankOne,
}

/// The sum bound and its two algebraically equivalent restatements. All
/// three share: `beta·ln[det(C1+C2)/det C1] + tr[(C1+C2)⁻¹·T_sum] −
/// tr[C1⁻¹·T_star] ≥ 0`, where for the split form `T_sum = T_star + T_cross`
/// and for the rank-one form the inverse of the updated matrix is produced
/// by the Sherman–Morrison step.
fn sum_bound<T: Scalar>(sc: &Scenario<T>, form: SumBoundForm) -> Result<InequalityReport<T>> {
    let c1 = sc.pd("C1")?;
    let c2_cov = match form {
        SumBoundForm::RankOne => sc.sym("E")?,
        _ => sc.sym("C2")?,
    };
    let d = c1.dim();
    if c2_cov.nrows() != d {
        return Err(Error::DimensionMismatch("summand sizes differ".into()));
    }
    if let SumBoundForm::RankOne = form {
        rank_one_decompose(&c2_cov)?;
    }
    let w = sc.weight(2 * d)?;
    let sum_pd = PdMatrix::try_new(c1.entries().add(&c2_cov))?;
    let sum_inv = sum_pd.inverse();
    let c1_inv = c1.inverse();
    let log_ratio = sum_pd.log_det() - c1.log_det();

    let closed = w.as_tilt().is_some();
    // The mass and the star trace, each over the joint law of the
    // independent pair; closed forms go through the derived weights'
    // moments.
    let (beta, tr_star_c1) = if closed {
        let (theta, theta_star) = theta_pair(&w, &c1, &c2_cov, &sc.spec)?;
        let m_sum = weighted_moments(&sum_pd, &theta, &sc.spec)?;
        let m_star = weighted_moments(&c1, &theta_star, &sc.spec)?;
        (
            m_sum.alpha,
            Estimate::exact(c1_inv.trace_product(&m_star.phi.values)),
        )
    } else {
        let beta = pair_expect(
            &c1,
            &c2_cov,
            &w,
            &sc.spec.reseeded("sum-bound/beta"),
            |_, _, _| T::one(),
        )?;
        let c1_inv_q = c1_inv.clone();
        let tr_star = pair_expect(
            &c1,
            &c2_cov,
            &w,
            &sc.spec.reseeded("sum-bound/tr-star"),
            move |x, _, _| c1_inv_q.quad(x),
        )?;
        (beta, tr_star)
    };

    let (lhs, rhs) = match form {
        SumBoundForm::Direct => {
            let tr_sum = if closed {
                let (theta, _) = theta_pair(&w, &c1, &c2_cov, &sc.spec)?;
                let m_sum = weighted_moments(&sum_pd, &theta, &sc.spec)?;
                Estimate::exact(sum_inv.trace_product(&m_sum.phi.values))
            } else {
                let sum_inv_q = sum_inv.clone();
                pair_expect(
                    &c1,
                    &c2_cov,
                    &w,
                    &sc.spec.reseeded("sum-bound/tr-sum"),
                    move |x, y, _| {
                        let v: Vec<T> = x.iter().zip(y).map(|(a, b)| *a + *b).collect();
                        sum_inv_q.quad(&v)
                    },
                )?
            };
            (beta.scaled(log_ratio).add(&tr_sum), tr_star_c1)
        }
        SumBoundForm::Split => {
            // tr[(C1+C2)⁻¹·(T_star + T_cross)] with the cross matrix over
            // the independent pair.
            let tr_star_sum = trace_star(&c1, &c2_cov, &w, &sum_inv, sc, closed, "star-sum")?;
            let tr_cross = trace_cross(&c1, &c2_cov, &w, &sum_inv, sc, closed, "cross-sum")?;
            (
                beta.scaled(log_ratio).add(&tr_star_sum).add(&tr_cross),
                tr_star_c1,
            )
        }
        SumBoundForm::RankOne => {
            let sm_inv = sherman_morrison_inverse(&c1, &c2_cov)?;
            let correction = sm_inv.sub(&c1_inv);
            let tr_corr = trace_star(&c1, &c2_cov, &w, &correction, sc, closed, "star-corr")?;
            let tr_cross = trace_cross(&c1, &c2_cov, &w, &sm_inv, sc, closed, "cross-sm")?;
            (
                beta.scaled(log_ratio).add(&tr_corr).add(&tr_cross),
                Estimate::exact(T::zero()),
            )
        }
    };
    Ok(simple_report(sc, lhs, rhs, Direction::NonNegative))
}

/// `tr[M · E[X·Xᵀ·w(X+Y, Y)]]` over the independent pair.
fn trace_star<T: Scalar>(
    c1: &PdMatrix<T>,
    c2_cov: &Mat<T>,
    w: &Weight<T>,
    m: &Mat<T>,
    sc: &Scenario<T>,
    closed: bool,
    tag: &str,
) -> Result<Estimate<T>> {
    if closed {
        let (scale, tilt) = w.as_tilt().unwrap();
        let d = c1.dim();
        let s = &tilt[..d];
        let sum_t: Vec<T> = tilt[..d]
            .iter()
            .zip(&tilt[d..])
            .map(|(a, b)| *a + *b)
            .collect();
        let half = T::c(0.5);
        let e1 = (half * c1.entries().quad(s)).exp();
        let e2 = (half * c2_cov.quad(&sum_t)).exp();
        let m1 = c1.entries().matvec(s);
        // E[X Xᵀ e^{sᵀX}] = e1·(C1 + m1 m1ᵀ).
        let star = c1
            .entries()
            .add(&Mat::outer(&m1, &m1))
            .scaled(scale * e1 * e2);
        return Ok(Estimate::exact(m.trace_product(&star)));
    }
    let m = m.clone();
    pair_expect(
        c1,
        c2_cov,
        w,
        &sc.spec.reseeded(&format!("sum-bound/{tag}")),
        move |x, _, _| m.quad(x),
    )
}

/// `tr[M · E[(X·Yᵀ + Y·Xᵀ + Y·Yᵀ)·w(X+Y, Y)]]` over the independent pair.
fn trace_cross<T: Scalar>(
    c1: &PdMatrix<T>,
    c2_cov: &Mat<T>,
    w: &Weight<T>,
    m: &Mat<T>,
    sc: &Scenario<T>,
    closed: bool,
    tag: &str,
) -> Result<Estimate<T>> {
    if closed {
        let (scale, tilt) = w.as_tilt().unwrap();
        let d = c1.dim();
        let s = &tilt[..d];
        let sum_t: Vec<T> = tilt[..d]
            .iter()
            .zip(&tilt[d..])
            .map(|(a, b)| *a + *b)
            .collect();
        let half = T::c(0.5);
        let e1 = (half * c1.entries().quad(s)).exp();
        let e2 = (half * c2_cov.quad(&sum_t)).exp();
        let m1 = c1.entries().matvec(s);
        let m2 = c2_cov.matvec(&sum_t);
        let cross = Mat::outer(&m1, &m2)
            .add(&Mat::outer(&m2, &m1))
            .add(c2_cov)
            .add(&Mat::outer(&m2, &m2))
            .scaled(scale * e1 * e2);
        return Ok(Estimate::exact(m.trace_product(&cross)));
    }
    let m = m.clone();
    pair_expect(
        c1,
        c2_cov,
        w,
        &sc.spec.reseeded(&format!("sum-bound/{tag}")),
        move |x, y, _| {
            let two = T::c(2.0);
            let my = m.matvec(y);
            two * crate::mat::dot(x, &my) + crate::mat::dot(y, &my)
        },
    )
}

/// Expectation of `g(x, y)·w(x+y, y)` over `X ~ N(0,C1) ⊥ Y ~ N(0,C2)`,
/// with a possibly singular second covariance.
fn pair_expect<T: Scalar, G>(
    c1: &PdMatrix<T>,
    c2_cov: &Mat<T>,
    w: &Weight<T>,
    spec: &SampleSpec,
    g: G,
) -> Result<Estimate<T>>
where
    G: Fn(&[T], &[T], &[T]) -> T,
{
    let d = c1.dim();
    let l2 = psd_factor(&c2_cov.symmetrized())?;
    let mut gauss = vec![T::zero(); 2 * d];
    crate::mc::expect_sampled(
        spec,
        2 * d,
        move |rng, buf| {
            for gi in gauss.iter_mut() {
                *gi = T::standard_normal(rng);
            }
            c1.correlate(&gauss[..d], &mut buf[..d]);
            for i in 0..d {
                let mut s = T::zero();
                for j in 0..=i {
                    s += l2[(i, j)] * gauss[d + j];
                }
                buf[d + i] = s;
            }
        },
        move |xy| {
            let (x, y) = xy.split_at(d);
            let mut arg = vec![T::zero(); 2 * d];
            for i in 0..d {
                arg[i] = x[i] + y[i];
                arg[d + i] = y[i];
            }
            Ok(w.eval(&arg)? * g(x, y, &arg))
        },
    )
}

/// Hadamard comparison; equality with diagonal models, which are judged on
/// the two-sided band.
fn hadamard<T: Scalar>(sc: &Scenario<T>) -> Result<InequalityReport<T>> {
    let c = sc.pd("C")?;
    let d = c.dim();
    let w = sc.weight(d)?;
    let diag_idx: Vec<T> = (0..d).map(|i| c.entries()[(i, i)]).collect();
    let log_diag = diag_idx.iter().fold(T::zero(), |s, &x| s + x.ln());
    let diagonal = is_diagonal(&c);

    let (lhs, rhs) = if w.as_tilt().is_some() {
        let m = weighted_moments(&c, &w, &sc.spec)?;
        let alpha = m.alpha.value;
        let mut diag_trace = T::zero();
        for i in 0..d {
            diag_trace += m.phi.values[(i, i)] / diag_idx[i];
        }
        let lhs = Estimate::exact(alpha * log_diag + diag_trace);
        let rhs = Estimate::exact(alpha * c.log_det() + c.inverse().trace_product(&m.phi.values));
        (lhs, rhs)
    } else {
        // Single integrand for the margin's two sides, estimated jointly is
        // avoided: separate seeds keep the sides independent.
        let c_inv = c.inverse();
        let diag2 = diag_idx.clone();
        let lhs = expect(
            {
                let w = w.clone();
                move |x: &[T]| {
                    let mut s = T::zero();
                    for i in 0..d {
                        s += x[i] * x[i] / diag2[i];
                    }
                    Ok(w.eval(x)? * (log_diag + s))
                }
            },
            &c,
            &sc.spec.reseeded("whi/lhs"),
        )?;
        let log_det = c.log_det();
        let rhs = expect(
            move |x: &[T]| Ok(w.eval(x)? * (log_det + c_inv.quad(x))),
            &c,
            &sc.spec.reseeded("whi/rhs"),
        )?;
        (lhs, rhs)
    };
    let direction = if diagonal {
        Direction::Zero
    } else {
        Direction::NonNegative
    };
    let mut report = simple_report(sc, lhs, rhs, direction);
    if diagonal {
        report.note = "diagonal model: equality case, judged on the two-sided band".into();
    }
    Ok(report)
}

fn is_diagonal<T: Scalar>(c: &PdMatrix<T>) -> bool {
    let d = c.dim();
    let tol = symmetry_tol::<T>() * c.entries().max_abs().max(T::one());
    for i in 0..d {
        for j in 0..d {
            if i != j && c.entries()[(i, j)].abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Strong Hadamard comparison at split `p`: the sum of head-extended tail
/// blocks against the joint plus the repeated tail.
fn strong_hadamard<T: Scalar>(sc: &Scenario<T>) -> Result<InequalityReport<T>> {
    let c = sc.pd("C")?;
    let d = c.dim();
    let p = sc.need_p()?;
    if p == 0 || p >= d {
        return Err(Error::IndexOutOfRange);
    }
    let w = sc.weight(d)?;
    let tau = T::c(std::f64::consts::TAU).ln();

    let blocks: Vec<IndexSet> = (0..p)
        .map(|i| IndexSet::new(d, std::iter::once(i).chain(p..d).collect()).unwrap())
        .collect();
    let tail = IndexSet::new(d, (p..d).collect())?;
    let c_tail = c.submatrix(&tail)?;
    let block_pds: Vec<PdMatrix<T>> = blocks
        .iter()
        .map(|s| c.submatrix(s))
        .collect::<Result<_>>()?;

    if w.as_tilt().is_some() {
        let m = weighted_moments(&c, &w, &sc.spec)?;
        let alpha = m.alpha.value;
        let term = |sub: &PdMatrix<T>, members: &[usize]| {
            let k = T::from_usize(sub.dim()).unwrap();
            alpha * (k * tau + sub.log_det())
                + sub
                    .inverse()
                    .trace_product(&m.phi.values.select(members, members))
        };
        let mut lhs_v = T::zero();
        for (s, sub) in blocks.iter().zip(&block_pds) {
            lhs_v += term(sub, s.members());
        }
        let full_members: Vec<usize> = (0..d).collect();
        let rhs_v =
            term(&c, &full_members) + T::from_usize(p - 1).unwrap() * term(&c_tail, tail.members());
        return Ok(simple_report(
            sc,
            Estimate::exact(lhs_v),
            Estimate::exact(rhs_v),
            Direction::NonNegative,
        ));
    }

    // One integrand for each side.
    let p_minus = T::from_usize(p - 1).unwrap();
    let members: Vec<Vec<usize>> = blocks.iter().map(|s| s.members().to_vec()).collect();
    let tail_members = tail.members().to_vec();
    let lhs = expect(
        {
            let w = w.clone();
            let block_pds = block_pds.clone();
            let members = members.clone();
            move |x: &[T]| {
                let mut s = T::zero();
                for (sub, mem) in block_pds.iter().zip(&members) {
                    let k = T::from_usize(sub.dim()).unwrap();
                    let xs: Vec<T> = mem.iter().map(|&i| x[i]).collect();
                    s += k * tau + sub.log_det() + sub.quad_inv(&xs);
                }
                Ok(w.eval(x)? * s)
            }
        },
        &c,
        &sc.spec.reseeded("wshi/lhs"),
    )?;
    let c_for_rhs = c.clone();
    let rhs = expect(
        move |x: &[T]| {
            let d_t = T::from_usize(d).unwrap();
            let k_t = T::from_usize(d - p).unwrap();
            let xt: Vec<T> = tail_members.iter().map(|&i| x[i]).collect();
            let full = d_t * tau + c_for_rhs.log_det() + c_for_rhs.quad_inv(x);
            let tail_v = k_t * tau + c_tail.log_det() + c_tail.quad_inv(&xt);
            Ok(w.eval(x)? * (full + p_minus * tail_v))
        },
        &c,
        &sc.spec.reseeded("wshi/rhs"),
    )?;
    Ok(simple_report(sc, lhs, rhs, Direction::NonNegative))
}

/// The exact pivot identity: the conditional variance of the last
/// coordinate balances the trace terms; the margin is zero up to noise.
fn last_pivot_identity<T: Scalar>(sc: &Scenario<T>) -> Result<InequalityReport<T>> {
    let c = sc.pd("C")?;
    let d = c.dim();
    if d < 2 {
        return Err(Error::IndexOutOfRange);
    }
    let w = sc.weight(d)?;
    let head: Vec<usize> = (0..d - 1).collect();
    let c_head = c.leading(d - 1)?;
    let cond_var = (c.log_det() - c_head.log_det()).exp();
    // Residual direction: x_d − regression(head).
    let (reg, _) = c.regression_onto(&[d - 1], &head)?;
    let mut resid = vec![T::zero(); d];
    for i in 0..d - 1 {
        resid[i] = -reg[(0, i)];
    }
    resid[d - 1] = T::one();

    let tau = T::c(std::f64::consts::TAU).ln();
    let d_t = T::from_usize(d).unwrap();
    let log_combo = (tau + cond_var.ln())
        + (T::from_usize(d - 1).unwrap() * tau + c_head.log_det())
        - (d_t * tau + c.log_det());

    let (alpha, tr_full, tr_head, quad_resid) = if w.as_tilt().is_some() {
        let m = weighted_moments(&c, &w, &sc.spec)?;
        let tr_full = c.inverse().trace_product(&m.phi.values);
        let tr_head = c_head
            .inverse()
            .trace_product(&m.phi.values.select(&head, &head));
        let (_, tilt) = w.as_tilt().unwrap();
        let ct = c.entries().matvec(tilt);
        let shift = crate::mat::dot(&resid, &ct);
        let quad = m.alpha.value * (cond_var + shift * shift);
        (
            m.alpha,
            Estimate::exact(tr_full),
            Estimate::exact(tr_head),
            Estimate::exact(quad),
        )
    } else {
        let alpha = expect(
            {
                let w = w.clone();
                move |x: &[T]| w.eval(x)
            },
            &c,
            &sc.spec.reseeded("pivot/alpha"),
        )?;
        let c_inv = c.inverse();
        let tr_full = expect(
            {
                let w = w.clone();
                move |x: &[T]| Ok(w.eval(x)? * c_inv.quad(x))
            },
            &c,
            &sc.spec.reseeded("pivot/full"),
        )?;
        let head2 = head.clone();
        let c_head2 = c_head.clone();
        let tr_head = expect(
            {
                let w = w.clone();
                move |x: &[T]| {
                    let xh: Vec<T> = head2.iter().map(|&i| x[i]).collect();
                    Ok(w.eval(x)? * c_head2.quad_inv(&xh))
                }
            },
            &c,
            &sc.spec.reseeded("pivot/head"),
        )?;
        let resid2 = resid.clone();
        let quad = expect(
            move |x: &[T]| {
                let r = crate::mat::dot(&resid2, x);
                Ok(w.eval(x)? * r * r)
            },
            &c,
            &sc.spec.reseeded("pivot/resid"),
        )?;
        (alpha, tr_full, tr_head, quad)
    };

    let lhs = alpha.scaled(log_combo);
    let rhs = tr_full
        .sub(&tr_head)
        .sub(&quad_resid.scaled(T::one() / cond_var));
    Ok(simple_report(sc, lhs, rhs, Direction::Zero))
}

/// Concavity of the conditional functional over a convex combination.
fn concavity<T: Scalar>(sc: &Scenario<T>) -> Result<InequalityReport<T>> {
    let c1 = sc.pd("C1")?;
    let c2 = sc.pd("C2")?;
    let lambda = sc.need_lambda()?;
    let p = sc.need_p()?;
    let d = c1.dim();
    if c2.dim() != d {
        return Err(Error::DimensionMismatch("C1 and C2 sizes differ".into()));
    }
    let w = sc.weight(d)?;
    let mixed = PdMatrix::try_new(
        c1.entries()
            .scaled(lambda)
            .add(&c2.entries().scaled(T::one() - lambda)),
    )?;
    let m_mix = crate::moments::mu(&mixed, p, &w, &sc.spec.reseeded("concavity/mixed"))?;
    let m1 = crate::moments::mu(&c1, p, &w, &sc.spec.reseeded("concavity/c1"))?.scaled(lambda);
    let m2 = crate::moments::mu(&c2, p, &w, &sc.spec.reseeded("concavity/c2"))?
        .scaled(T::one() - lambda);
    Ok(simple_report(
        sc,
        m_mix,
        m1.add(&m2),
        Direction::NonNegative,
    ))
}

/// Superadditivity of the last-coordinate conditional functional over a sum
/// of independent models, in the proof's split form: the right side carries
/// the two convolved weights. When the unsplit form differs numerically the
/// note records both values.
fn superadditivity<T: Scalar>(sc: &Scenario<T>) -> Result<InequalityReport<T>> {
    let a = sc.pd("A")?;
    let b = sc.pd("B")?;
    let d = a.dim();
    if b.dim() != d || d < 2 {
        return Err(Error::DimensionMismatch(
            "superadditivity needs two models of equal dimension at least two".into(),
        ));
    }
    let w = sc.weight(2 * d - 1)?;
    let (psi, chi, gamma) = sum_split_weights(&w, &a, &b, &sc.spec.nested())?;
    let sum_pd = PdMatrix::try_new(a.entries().add(b.entries()))?;
    let lhs = varpi(&sum_pd, &psi, &sc.spec.reseeded("superadd/sum"))?;
    let rhs_chi = varpi(&a, &chi, &sc.spec.reseeded("superadd/a"))?;
    let rhs_gamma = varpi(&b, &gamma, &sc.spec.reseeded("superadd/b"))?;
    let rhs = rhs_chi.add(&rhs_gamma);
    let mut report = simple_report(sc, lhs, rhs, Direction::NonNegative);

    // Unsplit form: the sum-conditioned weight on all three terms.
    let alt_a = varpi(&a, &psi, &sc.spec.reseeded("superadd/alt-a"))?;
    let alt_b = varpi(&b, &psi, &sc.spec.reseeded("superadd/alt-b"))?;
    let alt_rhs = alt_a.add(&alt_b);
    let delta = rhs.sub(&alt_rhs);
    let band = sc.zcrit * delta.stderr + sc.tolerance;
    if delta.value.abs() > band {
        report.note = format!(
            "split right side {} differs from unsplit right side {}",
            rhs.value, alt_rhs.value
        );
    }
    Ok(report)
}

/// Two-sided comparison: the per-coordinate conditional terms below the
/// joint term below the diagonal terms sandwich.
fn sandwich<T: Scalar>(sc: &Scenario<T>) -> Result<InequalityReport<T>> {
    let c = sc.pd("C")?;
    let d = c.dim();
    let w = sc.weight(d)?;
    let tau = T::c(std::f64::consts::TAU).ln();
    let d_t = T::from_usize(d).unwrap();

    let drop_one: Vec<Option<PdMatrix<T>>> = (0..d)
        .map(|i| {
            if d == 1 {
                Ok(None)
            } else {
                let members: Vec<usize> = (0..d).filter(|&j| j != i).collect();
                c.submatrix(&IndexSet::new(d, members)?).map(Some)
            }
        })
        .collect::<Result<_>>()?;

    let (left, mid, right) = if w.as_tilt().is_some() {
        let m = weighted_moments(&c, &w, &sc.spec)?;
        let alpha = m.alpha.value;
        let tr_full = c.inverse().trace_product(&m.phi.values);
        let mut left_v = T::zero();
        for (i, sub) in drop_one.iter().enumerate() {
            let (logdet_sub, tr_sub) = match sub {
                Some(s) => {
                    let members: Vec<usize> = (0..d).filter(|&j| j != i).collect();
                    (
                        s.log_det(),
                        s.inverse()
                            .trace_product(&m.phi.values.select(&members, &members)),
                    )
                }
                None => (T::zero(), T::zero()),
            };
            left_v += alpha * (tau + c.log_det() - logdet_sub) + (tr_full - tr_sub);
        }
        let mid_v = alpha * (d_t * tau + c.log_det()) + tr_full;
        let mut right_v = T::zero();
        for i in 0..d {
            right_v += alpha * (tau + c.entries()[(i, i)].ln())
                + m.phi.values[(i, i)] / c.entries()[(i, i)];
        }
        (
            Estimate::exact(left_v),
            Estimate::exact(mid_v),
            Estimate::exact(right_v),
        )
    } else {
        let left = expect(
            {
                let w = w.clone();
                let c = c.clone();
                let drop_one = drop_one.clone();
                move |x: &[T]| {
                    let mut s = T::zero();
                    for (i, sub) in drop_one.iter().enumerate() {
                        let sub_part = match sub {
                            Some(m) => {
                                let xs: Vec<T> = (0..d).filter(|&j| j != i).map(|j| x[j]).collect();
                                m.log_det() + m.quad_inv(&xs)
                            }
                            None => T::zero(),
                        };
                        s += tau + c.log_det() + c.quad_inv(x) - sub_part;
                    }
                    Ok(w.eval(x)? * s)
                }
            },
            &c,
            &sc.spec.reseeded("sandwich/left"),
        )?;
        let mid = expect(
            {
                let w = w.clone();
                let c = c.clone();
                move |x: &[T]| Ok(w.eval(x)? * (d_t * tau + c.log_det() + c.quad_inv(x)))
            },
            &c,
            &sc.spec.reseeded("sandwich/mid"),
        )?;
        let right = expect(
            {
                let w = w.clone();
                let c = c.clone();
                move |x: &[T]| {
                    let mut s = T::zero();
                    for i in 0..d {
                        let cii = c.entries()[(i, i)];
                        s += tau + cii.ln() + x[i] * x[i] / cii;
                    }
                    Ok(w.eval(x)? * s)
                }
            },
            &c,
            &sc.spec.reseeded("sandwich/right"),
        )?;
        (left, mid, right)
    };

    let lower = mid.sub(&left);
    let upper = right.sub(&mid);
    let steps = vec![
        StepMargin {
            label: "lower".into(),
            margin: lower,
            verdict: judge(
                lower.value,
                lower.stderr,
                Direction::NonNegative,
                sc.zcrit,
                sc.tolerance,
            ),
        },
        StepMargin {
            label: "upper".into(),
            margin: upper,
            verdict: judge(
                upper.value,
                upper.stderr,
                Direction::NonNegative,
                sc.zcrit,
                sc.tolerance,
            ),
        },
    ];
    let margin = if lower.value <= upper.value {
        lower
    } else {
        upper
    };
    let verdict = Verdict::combine(steps.iter().map(|s| s.verdict));
    let mut report = blank_report(left, right, margin, verdict);
    report.steps = steps;
    Ok(report)
}

/// Chain verifiers: compute the sequence, then judge every consecutive
/// difference in the claimed direction.
fn chain_report<T: Scalar>(id: InequalityId, sc: &Scenario<T>) -> Result<InequalityReport<T>> {
    let label = id
        .chain_label()
        .expect("non-chain id routed to chain_report");
    let c = sc.pd("C")?;
    if id == InequalityId::ToeplitzA {
        let scale = c.entries().max_abs().max(T::one());
        let tol = symmetry_tol::<T>() * T::c(1e3) * scale;
        let constant_weight = matches!(sc.wf, WeightFunction::Constant { .. });
        let ok = if constant_weight {
            is_toeplitz(c.entries(), tol)
        } else {
            // Shift-invariance of the reduced weights needs the cyclic
            // structure once the weight is non-constant.
            is_cyclic_toeplitz(c.entries(), tol)
        };
        if !ok {
            return Err(Error::NotToeplitz);
        }
    }
    let r = if label.needs_r() {
        Some(sc.need_r()?)
    } else {
        None
    };
    let values = chain(label, &c, &sc.wf, &sc.spec, r)?;
    let report = chain_monotonicity_report(sc, &values, label);
    Ok(report)
}

fn chain_monotonicity_report<T: Scalar>(
    sc: &Scenario<T>,
    values: &ChainValues<T>,
    label: ChainLabel,
) -> InequalityReport<T> {
    let k_max = label.monotone_k_max(values.d).min(values.values.len());
    let mut steps = Vec::new();
    for k in 1..k_max {
        let (a, b) = (&values.values[k - 1], &values.values[k]);
        let margin = if label.increasing() {
            b.sub(a)
        } else {
            a.sub(b)
        };
        let verdict = judge(
            margin.value,
            margin.stderr,
            Direction::NonNegative,
            sc.zcrit,
            sc.tolerance,
        );
        steps.push(StepMargin {
            label: format!("k={k} vs k={}", k + 1),
            margin,
            verdict,
        });
    }
    let (margin, verdict, note) = if steps.is_empty() {
        (
            Estimate::exact(T::zero()),
            Verdict::Holds,
            "single-entry sequence: monotonicity is vacuous".to_string(),
        )
    } else {
        let weakest = steps
            .iter()
            .map(|s| s.margin)
            .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
            .unwrap();
        (
            weakest,
            Verdict::combine(steps.iter().map(|s| s.verdict)),
            String::new(),
        )
    };
    let lhs = values.values[0];
    let rhs = values.values[k_max - 1];
    let mut report = blank_report(lhs, rhs, margin, verdict);
    report.steps = steps;
    report.chain = Some(values.rows());
    report.note = note;
    report
}

/// One grid point of a sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub grid_value: f64,
    pub margin: f64,
    pub margin_stderr: f64,
    pub condition_verdict: Verdict,
    pub inequality_verdict: Verdict,
}

/// Sweep result: per-point rows plus the four-way classification counts.
#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub id: String,
    pub axis: String,
    pub points: Vec<SweepPoint>,
    pub classification: std::collections::BTreeMap<String, usize>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("grid_value,margin,margin_stderr,condition_verdict,inequality_verdict\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{:?},{:?}\n",
                p.grid_value, p.margin, p.margin_stderr, p.condition_verdict, p.inequality_verdict
            ));
        }
        out
    }
}

/// Apply a named scalar axis to a scenario.
pub fn apply_axis<T: Scalar>(sc: &Scenario<T>, axis: &str, value: f64) -> Result<Scenario<T>> {
    let mut out = sc.clone();
    match axis {
        "lambda" => {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidScenario("lambda must lie in [0, 1]".into()));
            }
            out.lambda = Some(T::c(value));
        }
        "r" => out.r = Some(T::c(value)),
        "t" => {
            // Tilt magnitude along the scenario's tilt direction (uniform
            // direction when the base tilt vanishes).
            let t0 = match &sc.wf {
                WeightFunction::ExpTilt { t } => t.clone(),
                _ => {
                    return Err(Error::InvalidScenario(
                        "axis t needs an exp_tilt weight function".into(),
                    ))
                }
            };
            let norm = t0.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
            let dim = t0.len();
            let dir: Vec<T> = if norm > T::zero() {
                t0.iter().map(|&x| x / norm).collect()
            } else {
                let u = T::one() / T::from_usize(dim).unwrap().sqrt();
                vec![u; dim]
            };
            out.wf = WeightFunction::ExpTilt {
                t: dir.iter().map(|&x| x * T::c(value)).collect(),
            };
        }
        other => {
            return Err(Error::InvalidScenario(format!(
                "unknown sweep axis: {other}"
            )));
        }
    }
    Ok(out)
}

/// Evaluate an inequality across a grid; each point re-keys the sampling
/// seed from the point index.
pub fn sweep<T: Scalar>(
    id: InequalityId,
    sc: &Scenario<T>,
    axis: &str,
    grid: &[f64],
) -> Result<SweepReport> {
    let mut points = Vec::new();
    let mut classification = std::collections::BTreeMap::new();
    for (idx, &g) in grid.iter().enumerate() {
        let mut point_sc = apply_axis(sc, axis, g)?;
        point_sc.spec = point_sc.spec.reseeded_u64(idx as u64);
        let report = verify(id, &point_sc)?;
        let condition_verdict = Verdict::combine(report.prerequisites.iter().map(|p| p.verdict));
        let key = format!(
            "condition={condition_verdict:?},inequality={:?}",
            report.verdict
        );
        *classification.entry(key).or_insert(0) += 1;
        points.push(SweepPoint {
            grid_value: g,
            margin: report.margin.value.as_f64(),
            margin_stderr: report.margin.stderr.as_f64(),
            condition_verdict,
            inequality_verdict: report.verdict,
        });
    }
    Ok(SweepReport {
        id: id.as_str().into(),
        axis: axis.into(),
        points,
        classification,
    })
}

/// Parse `start:stop:step` (inclusive of the endpoint within a half step)
/// or a comma-separated list of values.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidScenario(format!(
                "grid must be start:stop:step, got {s}"
            )));
        }
        let bad = |p: &str| Error::InvalidScenario(format!("bad grid number: {p}"));
        let start: f64 = parts[0].parse().map_err(|_| bad(parts[0]))?;
        let stop: f64 = parts[1].parse().map_err(|_| bad(parts[1]))?;
        let step: f64 = parts[2].parse().map_err(|_| bad(parts[2]))?;
        if step <= 0.0 || stop < start {
            return Err(Error::InvalidScenario(
                "grid needs step > 0 and stop >= start".into(),
            ));
        }
        let mut out = Vec::new();
        let mut v = start;
        while v <= stop + step * 0.5 {
            out.push(v);
            v += step;
        }
        Ok(out)
    } else {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidScenario(format!("bad grid number: {p}")))
            })
            .collect()
    }
}
