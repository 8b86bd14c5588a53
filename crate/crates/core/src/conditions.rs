//! Numerical evaluation of the sufficient conditions: each condition is one
//! or more signed integrals of a (possibly reduced) weight against the
//! difference of two Gaussian-mixture densities, sometimes with a
//! log-plus-quadratic factor. Quantified conditions enumerate every
//! `(subset, coordinate)` instance.

use crate::error::{Error, Result};
use crate::gaussmix::{density_diff_part, GaussMix, PolyFactor};
use crate::mat::Mat;
use crate::mc::{judge, Direction, Estimate, Verdict};
use crate::pd::{broken_cov, IndexSet, PdMatrix};
use crate::scalar::Scalar;
use crate::scenario::Scenario;
use crate::weights::{reduce_weight, Method};
use serde::Serialize;

/// Condition identifiers. The numeric tags are the stable public names used
/// by the CLI (`check C2.8 ...`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ConditionId {
    C1_6,
    C2_8,
    C2_15,
    C2_20,
    C3_1,
    C3_5,
    C5_3,
    C5_12,
    C5_20,
    C5_24,
    C6_3,
    C6_11,
    C6_12,
    C6_17,
}

pub const ALL_CONDITIONS: [ConditionId; 14] = [
    ConditionId::C1_6,
    ConditionId::C2_8,
    ConditionId::C2_15,
    ConditionId::C2_20,
    ConditionId::C3_1,
    ConditionId::C3_5,
    ConditionId::C5_3,
    ConditionId::C5_12,
    ConditionId::C5_20,
    ConditionId::C5_24,
    ConditionId::C6_3,
    ConditionId::C6_11,
    ConditionId::C6_12,
    ConditionId::C6_17,
];

impl ConditionId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionId::C1_6 => "C1.6",
            ConditionId::C2_8 => "C2.8",
            ConditionId::C2_15 => "C2.15",
            ConditionId::C2_20 => "C2.20",
            ConditionId::C3_1 => "C3.1",
            ConditionId::C3_5 => "C3.5",
            ConditionId::C5_3 => "C5.3",
            ConditionId::C5_12 => "C5.12",
            ConditionId::C5_20 => "C5.20",
            ConditionId::C5_24 => "C5.24",
            ConditionId::C6_3 => "C6.3",
            ConditionId::C6_11 => "C6.11",
            ConditionId::C6_12 => "C6.12",
            ConditionId::C6_17 => "C6.17",
        }
    }

    /// Numeric part of the identifier, e.g. `2.8`.
    pub fn eq_tag(&self) -> &'static str {
        &self.as_str()[1..]
    }

    pub fn parse(s: &str) -> Result<Self> {
        ALL_CONDITIONS
            .iter()
            .copied()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownId(s.into()))
    }
}

/// Registry entry: what a condition checks and which scenario fields it
/// consumes.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionInfo {
    pub id: &'static str,
    pub eq_tag: &'static str,
    pub summary: &'static str,
    pub required: &'static [&'static str],
}

/// The complete condition registry.
pub fn list_conditions() -> Vec<ConditionInfo> {
    ALL_CONDITIONS
        .iter()
        .map(|id| ConditionInfo {
            id: id.as_str(),
            eq_tag: id.eq_tag(),
            summary: match id {
                ConditionId::C1_6 => {
                    "two-sided mass/trace balance of the weight across a convex combination"
                }
                ConditionId::C2_8 | ConditionId::C5_12 => {
                    "reduced weight correlates at least as positively with each sub-model as \
                     with its chain-broken product (all subsets, all split points)"
                }
                ConditionId::C2_15 | ConditionId::C5_20 => {
                    "weight correlates at least as positively with the joint model as with \
                     the product of its marginals"
                }
                ConditionId::C2_20 | ConditionId::C5_24 => {
                    "reduced weight correlates at least as positively with each sub-model as \
                     with its pairwise conditionally-independent version"
                }
                ConditionId::C3_1 => {
                    "two-sided comparison of a host density against the matched Gaussian"
                }
                ConditionId::C3_5 | ConditionId::C6_11 => {
                    "conditional-block comparison of a host density against the matched \
                     Gaussian conditional"
                }
                ConditionId::C6_12 => {
                    "trace-weighted conditional comparison of a host density against the \
                     matched Gaussian"
                }
                ConditionId::C5_3 => {
                    "pair weight favors the independent summands over the reassembled sum"
                }
                ConditionId::C6_3 => {
                    "reduced weight favors each head-extension of the tail block over its \
                     conditionally-broken version"
                }
                ConditionId::C6_17 => {
                    "weight favors the summand-conditioned law of the last sum coordinate \
                     over its sum-conditioned law"
                }
            },
            required: match id {
                ConditionId::C1_6 => &["matrices.C1", "matrices.C2", "lambda", "wf"],
                ConditionId::C2_8
                | ConditionId::C2_15
                | ConditionId::C2_20
                | ConditionId::C5_12
                | ConditionId::C5_20
                | ConditionId::C5_24 => &["matrices.C", "wf"],
                ConditionId::C3_1 => &["matrices.C", "matrices.C1", "matrices.C2", "lambda", "wf"],
                ConditionId::C3_5 => &[
                    "matrices.C",
                    "matrices.C1",
                    "matrices.C2",
                    "lambda",
                    "p",
                    "wf",
                ],
                ConditionId::C5_3 => &["matrices.C1", "matrices.C2", "wf"],
                ConditionId::C6_3 => &["matrices.C", "p", "wf"],
                ConditionId::C6_11 | ConditionId::C6_12 => {
                    &["matrices.C1", "matrices.C2", "lambda", "p", "wf"]
                }
                ConditionId::C6_17 => &["matrices.A", "matrices.B", "wf"],
            },
        })
        .collect()
}

/// One evaluated inequality inside a condition.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionPart<T> {
    pub label: String,
    pub value: T,
    pub stderr: T,
    pub direction: Direction,
    pub verdict: Verdict,
}

/// Full evaluation of one condition: all parts (for quantified conditions,
/// all instances) with the combined verdict. The verdict is `Holds` only
/// when every part holds.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport<T> {
    pub id: String,
    pub parts: Vec<ConditionPart<T>>,
    pub verdict: Verdict,
    pub method: Method,
}

impl<T: Scalar> ConditionReport<T> {
    fn assemble(id: ConditionId, parts: Vec<ConditionPart<T>>) -> Self {
        let verdict = Verdict::combine(parts.iter().map(|p| p.verdict));
        let method = if parts.iter().all(|p| p.stderr == T::zero()) {
            Method::ClosedForm
        } else {
            Method::MonteCarlo
        };
        Self {
            id: id.as_str().into(),
            parts,
            verdict,
            method,
        }
    }
}

const QUANTIFIER_DIM_CAP: usize = 8;

/// Evaluate one condition against a scenario.
pub fn check<T: Scalar>(id: ConditionId, sc: &Scenario<T>) -> Result<ConditionReport<T>> {
    let mut parts = Vec::new();
    match id {
        ConditionId::C1_6 => c1_6(sc, &mut parts)?,
        ConditionId::C2_8 | ConditionId::C5_12 => chain_break_condition(sc, &mut parts)?,
        ConditionId::C2_15 | ConditionId::C5_20 => product_condition(sc, &mut parts)?,
        ConditionId::C2_20 | ConditionId::C5_24 => pair_break_condition(sc, &mut parts)?,
        ConditionId::C3_1 => gibbs_condition(sc, &mut parts)?,
        ConditionId::C3_5 | ConditionId::C6_11 | ConditionId::C6_12 => {
            let both = matches!(id, ConditionId::C3_5);
            let derive_c = !matches!(id, ConditionId::C3_5);
            conditional_gibbs_condition(
                sc,
                &mut parts,
                derive_c,
                both || matches!(id, ConditionId::C6_11),
                both || matches!(id, ConditionId::C6_12),
            )?
        }
        ConditionId::C5_3 => sum_condition(sc, &mut parts)?,
        ConditionId::C6_3 => head_extension_condition(sc, &mut parts)?,
        ConditionId::C6_17 => last_coordinate_condition(sc, &mut parts)?,
    }
    Ok(ConditionReport::assemble(id, parts))
}

fn push_part<T: Scalar>(
    parts: &mut Vec<ConditionPart<T>>,
    sc: &Scenario<T>,
    label: impl Into<String>,
    e: Estimate<T>,
    direction: Direction,
) {
    let verdict = judge(e.value, e.stderr, direction, sc.zcrit, sc.tolerance);
    parts.push(ConditionPart {
        label: label.into(),
        value: e.value,
        stderr: e.stderr,
        direction,
        verdict,
    });
}

fn one_based(members: &[usize]) -> Vec<usize> {
    members.iter().map(|&i| i + 1).collect()
}

/// Mass and trace balance across a convex combination of two models.
fn c1_6<T: Scalar>(sc: &Scenario<T>, parts: &mut Vec<ConditionPart<T>>) -> Result<()> {
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
    let p1 = GaussMix::mixture(vec![(lambda, c1), (T::one() - lambda, c2)])?;
    let p2 = GaussMix::single(mixed.clone());

    let mass = density_diff_part(&w, None, &p1, &p2, &sc.spec.reseeded("c1.6/mass"))?;
    push_part(parts, sc, "mass", mass, Direction::NonNegative);

    let d_t = T::from_usize(d).unwrap();
    let c0 = d_t * T::c(std::f64::consts::TAU).ln() + mixed.log_det();
    let factor = PolyFactor {
        c0,
        quad: Some(mixed.inverse()),
    };
    let trace = density_diff_part(&w, Some(&factor), &p1, &p2, &sc.spec.reseeded("c1.6/trace"))?;
    push_part(parts, sc, "trace", trace, Direction::NonPositive);
    Ok(())
}

/// Quantified condition: for every subset `S` and every `i ∈ S`, the reduced
/// weight integrates at least as much against the sub-model as against the
/// version in which `i` is decoupled from its successors given its
/// predecessors within `S`.
fn chain_break_condition<T: Scalar>(
    sc: &Scenario<T>,
    parts: &mut Vec<ConditionPart<T>>,
) -> Result<()> {
    let c = sc.pd("C")?;
    let d = c.dim();
    if d > QUANTIFIER_DIM_CAP {
        return Err(Error::SubsetCapExceeded);
    }
    let w = sc.weight(d)?;
    for mask in 1u64..(1 << d) {
        let s = IndexSet::from_bitmask(d, mask)?;
        let members = s.members().to_vec();
        for (pos, &i) in members.iter().enumerate() {
            let label = format!("S={:?}, i={}", one_based(&members), i + 1);
            if pos + 1 == members.len() {
                // No successors: both densities coincide.
                push_part(
                    parts,
                    sc,
                    label,
                    Estimate::exact(T::zero()),
                    Direction::NonNegative,
                );
                continue;
            }
            let spec = sc
                .spec
                .reseeded_u64(mask.wrapping_mul(64).wrapping_add(i as u64));
            let w_s = reduce_weight(&w, &c, &s, &spec.nested())?;
            let c_s = c.submatrix(&s)?;
            let before: Vec<usize> = (0..pos).collect();
            let after: Vec<usize> = (pos + 1..members.len()).collect();
            let broken = PdMatrix::try_new(broken_cov(c_s.entries(), &before, &[pos], &after)?)?;
            let e = density_diff_part(
                &w_s,
                None,
                &GaussMix::single(c_s),
                &GaussMix::single(broken),
                &spec,
            )?;
            push_part(parts, sc, label, e, Direction::NonNegative);
        }
    }
    Ok(())
}

/// Joint model versus the product of its one-dimensional marginals.
fn product_condition<T: Scalar>(sc: &Scenario<T>, parts: &mut Vec<ConditionPart<T>>) -> Result<()> {
    let c = sc.pd("C")?;
    let d = c.dim();
    let w = sc.weight(d)?;
    let diag_entries: Vec<T> = (0..d).map(|i| c.entries()[(i, i)]).collect();
    let diag = PdMatrix::try_new(Mat::diag(&diag_entries))?;
    let e = density_diff_part(
        &w,
        None,
        &GaussMix::single(c),
        &GaussMix::single(diag),
        &sc.spec.reseeded("product"),
    )?;
    push_part(parts, sc, "joint vs product", e, Direction::NonNegative);
    Ok(())
}

/// Quantified condition: for every subset of size at least two and every
/// unordered coordinate pair inside it, the reduced weight favors the
/// sub-model over the version in which the pair is conditionally decoupled
/// given the rest of the subset.
fn pair_break_condition<T: Scalar>(
    sc: &Scenario<T>,
    parts: &mut Vec<ConditionPart<T>>,
) -> Result<()> {
    let c = sc.pd("C")?;
    let d = c.dim();
    if d > QUANTIFIER_DIM_CAP {
        return Err(Error::SubsetCapExceeded);
    }
    let w = sc.weight(d)?;
    for mask in 1u64..(1 << d) {
        if mask.count_ones() < 2 {
            continue;
        }
        let s = IndexSet::from_bitmask(d, mask)?;
        let members = s.members().to_vec();
        for pi in 0..members.len() {
            for pj in pi + 1..members.len() {
                let label = format!(
                    "S={:?}, i={}, j={}",
                    one_based(&members),
                    members[pi] + 1,
                    members[pj] + 1
                );
                let spec = sc.spec.reseeded_u64(
                    mask.wrapping_mul(4096)
                        .wrapping_add((members[pi] * 64 + members[pj]) as u64),
                );
                let w_s = reduce_weight(&w, &c, &s, &spec.nested())?;
                let c_s = c.submatrix(&s)?;
                let rest: Vec<usize> = (0..members.len()).filter(|&p| p != pi && p != pj).collect();
                let broken = PdMatrix::try_new(broken_cov(c_s.entries(), &rest, &[pi], &[pj])?)?;
                let e = density_diff_part(
                    &w_s,
                    None,
                    &GaussMix::single(c_s),
                    &GaussMix::single(broken),
                    &spec,
                )?;
                push_part(parts, sc, label, e, Direction::NonNegative);
            }
        }
    }
    Ok(())
}

/// The two-component mixture `λ·N(0,C1) + (1−λ)·N(0,C2)` used as the host
/// comparison density.
fn scenario_mixture<T: Scalar>(sc: &Scenario<T>) -> Result<(GaussMix<T>, PdMatrix<T>)> {
    let c1 = sc.pd("C1")?;
    let c2 = sc.pd("C2")?;
    let lambda = sc.need_lambda()?;
    if c1.dim() != c2.dim() {
        return Err(Error::DimensionMismatch("C1 and C2 sizes differ".into()));
    }
    let mean_cov = PdMatrix::try_new(
        c1.entries()
            .scaled(lambda)
            .add(&c2.entries().scaled(T::one() - lambda)),
    )?;
    Ok((
        GaussMix::mixture(vec![(lambda, c1), (T::one() - lambda, c2)])?,
        mean_cov,
    ))
}

/// Two-sided comparison of the mixture density against the Gaussian `C`.
fn gibbs_condition<T: Scalar>(sc: &Scenario<T>, parts: &mut Vec<ConditionPart<T>>) -> Result<()> {
    let c = sc.pd("C")?;
    let (f, _) = scenario_mixture(sc)?;
    if f.dim() != c.dim() {
        return Err(Error::DimensionMismatch(
            "mixture and C sizes differ".into(),
        ));
    }
    let w = sc.weight(c.dim())?;
    let gauss = GaussMix::single(c.clone());

    let mass = density_diff_part(&w, None, &f, &gauss, &sc.spec.reseeded("gibbs/mass"))?;
    push_part(parts, sc, "mass", mass, Direction::NonNegative);

    let d_t = T::from_usize(c.dim()).unwrap();
    let c0 = d_t * T::c(std::f64::consts::TAU).ln() + c.log_det();
    // Factor c0 − xᵀC⁻¹x: the trace part enters with the Gaussian-weighted
    // moment minus the host-weighted moment.
    let factor = PolyFactor {
        c0,
        quad: Some(c.inverse().scaled(-T::one())),
    };
    let trace = density_diff_part(
        &w,
        Some(&factor),
        &f,
        &gauss,
        &sc.spec.reseeded("gibbs/trace"),
    )?;
    push_part(parts, sc, "trace", trace, Direction::NonPositive);
    Ok(())
}

/// Conditional-block comparison: the host (mixture) density against the
/// product of its leading-block marginal with the Gaussian conditional of
/// the trailing block (first part), and the trace-weighted comparison
/// against the full Gaussian (second part). When `derive_c` is set the
/// reference covariance is the mixture covariance itself.
fn conditional_gibbs_condition<T: Scalar>(
    sc: &Scenario<T>,
    parts: &mut Vec<ConditionPart<T>>,
    derive_c: bool,
    with_block_part: bool,
    with_trace_part: bool,
) -> Result<()> {
    let (f, mean_cov) = scenario_mixture(sc)?;
    let c = if derive_c { mean_cov } else { sc.pd("C")? };
    let d = c.dim();
    if f.dim() != d {
        return Err(Error::DimensionMismatch(
            "mixture and C sizes differ".into(),
        ));
    }
    let p = sc.need_p()?;
    if p == 0 || p >= d {
        return Err(Error::IndexOutOfRange);
    }
    let w = sc.weight(d)?;

    if with_block_part {
        // Right-hand density: leading block from each mixture component,
        // trailing block from the Gaussian conditional of `C`.
        let head: Vec<usize> = (0..p).collect();
        let tail: Vec<usize> = (p..d).collect();
        let (g_reg, k_tail) = c.regression_onto(&tail, &head)?;
        let mut comps = Vec::new();
        for (wt, comp) in f.components() {
            let ch = comp.cov().entries().select(&head, &head);
            let cross = ch.matmul(&g_reg.transpose());
            let tail_cov = k_tail.entries().add(&g_reg.matmul(&cross));
            let mut joint = Mat::zeros(d, d);
            for i in 0..p {
                for j in 0..p {
                    joint[(i, j)] = ch[(i, j)];
                }
                for j in 0..d - p {
                    joint[(i, p + j)] = cross[(i, j)];
                    joint[(p + j, i)] = cross[(i, j)];
                }
            }
            for i in 0..d - p {
                for j in 0..d - p {
                    joint[(p + i, p + j)] = tail_cov[(i, j)];
                }
            }
            comps.push((*wt, PdMatrix::try_new(joint)?));
        }
        let p2 = GaussMix::mixture(comps)?;
        let e = density_diff_part(&w, None, &f, &p2, &sc.spec.reseeded("cond-gibbs/block"))?;
        push_part(parts, sc, "conditional block", e, Direction::NonNegative);
    }

    if with_trace_part {
        let (reg_d, k_head) = c.conditional_params(p)?;
        let p_t = T::from_usize(p).unwrap();
        let c0 = p_t * T::c(std::f64::consts::TAU).ln() - k_head.log_det();
        // Quadratic (x_head − D·x_tail)ᵀ·K⁻¹·(x_head − D·x_tail) as xᵀQx.
        let mut sel = Mat::zeros(p, d);
        for i in 0..p {
            sel[(i, i)] = T::one();
            for j in 0..d - p {
                sel[(i, p + j)] = -reg_d[(i, j)];
            }
        }
        let q = sel
            .transpose()
            .matmul(&k_head.inverse())
            .matmul(&sel)
            .symmetrized();
        let factor = PolyFactor { c0, quad: Some(q) };
        let e = density_diff_part(
            &w,
            Some(&factor),
            &f,
            &GaussMix::single(c.clone()),
            &sc.spec.reseeded("cond-gibbs/trace"),
        )?;
        push_part(parts, sc, "conditional trace", e, Direction::NonPositive);
    }
    Ok(())
}

/// Pair weight on `(x, y)`: independent summands `N(0,C1)⊗N(0,C2)` against
/// the law of `(V−Y, Y)` with `V ~ N(0, C1+C2)` independent of `Y`.
fn sum_condition<T: Scalar>(sc: &Scenario<T>, parts: &mut Vec<ConditionPart<T>>) -> Result<()> {
    let c1 = sc.pd("C1")?;
    let c2_mat = sc.sym("C2")?;
    let d = c1.dim();
    if c2_mat.nrows() != d {
        return Err(Error::DimensionMismatch("C1 and C2 sizes differ".into()));
    }
    let w = sc.weight(2 * d)?;

    if let Some((scale, tilt)) = w.as_tilt() {
        // Closed form needs only quadratic forms in C2, so a singular
        // (rank-one) second summand is fine.
        let half = T::c(0.5);
        let s = &tilt[..d];
        let u = &tilt[d..];
        let sum_cov = PdMatrix::try_new(c1.entries().add(&c2_mat))?;
        let term1 = scale * (half * (c1.entries().quad(s) + c2_mat.quad(u))).exp();
        let diff: Vec<T> = u.iter().zip(s).map(|(a, b)| *a - *b).collect();
        let term2 = scale * (half * (sum_cov.entries().quad(s) + c2_mat.quad(&diff))).exp();
        push_part(
            parts,
            sc,
            "sum",
            Estimate::exact(term1 - term2),
            Direction::NonNegative,
        );
        return Ok(());
    }

    let c2 = PdMatrix::try_new(c2_mat.clone())?;
    let sum_cov = PdMatrix::try_new(c1.entries().add(&c2_mat))?;
    // Block covariance of independent (x, y).
    let mut indep = Mat::zeros(2 * d, 2 * d);
    let mut reassembled = Mat::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            indep[(i, j)] = c1.entries()[(i, j)];
            indep[(d + i, d + j)] = c2.entries()[(i, j)];
            // (V−Y, Y): Cov(x) = (C1+C2)+C2, Cov(x,y) = −C2, Cov(y) = C2.
            reassembled[(i, j)] = sum_cov.entries()[(i, j)] + c2.entries()[(i, j)];
            reassembled[(i, d + j)] = -c2.entries()[(i, j)];
            reassembled[(d + i, j)] = -c2.entries()[(i, j)];
            reassembled[(d + i, d + j)] = c2.entries()[(i, j)];
        }
    }
    let e = density_diff_part(
        &w,
        None,
        &GaussMix::single(PdMatrix::try_new(indep)?),
        &GaussMix::single(PdMatrix::try_new(reassembled)?),
        &sc.spec.reseeded("sum"),
    )?;
    push_part(parts, sc, "sum", e, Direction::NonNegative);
    Ok(())
}

/// Quantified over the head coordinates: each extension of the tail block
/// by coordinates `1..=i` against the version in which coordinate `i` is
/// decoupled from its predecessors given the tail block.
fn head_extension_condition<T: Scalar>(
    sc: &Scenario<T>,
    parts: &mut Vec<ConditionPart<T>>,
) -> Result<()> {
    let c = sc.pd("C")?;
    let d = c.dim();
    let p = sc.need_p()?;
    if p == 0 || p >= d {
        return Err(Error::IndexOutOfRange);
    }
    let w = sc.weight(d)?;
    for i in 1..=p {
        let label = format!("i={i}");
        if i == 1 {
            push_part(
                parts,
                sc,
                label,
                Estimate::exact(T::zero()),
                Direction::NonNegative,
            );
            continue;
        }
        let members: Vec<usize> = (0..i).chain(p..d).collect();
        let s = IndexSet::new(d, members)?;
        let spec = sc.spec.reseeded_u64(i as u64);
        let w_s = reduce_weight(&w, &c, &s, &spec.nested())?;
        let c_s = c.submatrix(&s)?;
        // Local positions: head 0..i, tail i..i+(d−p).
        let tail_local: Vec<usize> = (i..i + (d - p)).collect();
        let before_local: Vec<usize> = (0..i - 1).collect();
        let broken = PdMatrix::try_new(broken_cov(
            c_s.entries(),
            &tail_local,
            &[i - 1],
            &before_local,
        )?)?;
        let e = density_diff_part(
            &w_s,
            None,
            &GaussMix::single(c_s),
            &GaussMix::single(broken),
            &spec,
        )?;
        push_part(parts, sc, label, e, Direction::NonNegative);
    }
    Ok(())
}

/// Weight on `(z_d, x', y')`: the law in which the last sum coordinate is
/// conditioned on both summand heads against the law in which it is
/// conditioned on their sum only.
fn last_coordinate_condition<T: Scalar>(
    sc: &Scenario<T>,
    parts: &mut Vec<ConditionPart<T>>,
) -> Result<()> {
    let a = sc.pd("A")?;
    let b = sc.pd("B")?;
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch("A and B sizes differ".into()));
    }
    let w = sc.weight(2 * d - 1)?;
    let m = 2 * d - 1;

    // Layout (z, x', y'). Both covariances share all blocks except the
    // z-cross row.
    let build = |z_cross_a: &[T], z_cross_b: &[T]| -> Result<PdMatrix<T>> {
        let mut s = Mat::zeros(m, m);
        s[(0, 0)] = a.entries()[(d - 1, d - 1)] + b.entries()[(d - 1, d - 1)];
        for i in 0..d - 1 {
            s[(0, 1 + i)] = z_cross_a[i];
            s[(1 + i, 0)] = z_cross_a[i];
            s[(0, d + i)] = z_cross_b[i];
            s[(d + i, 0)] = z_cross_b[i];
            for j in 0..d - 1 {
                s[(1 + i, 1 + j)] = a.entries()[(i, j)];
                s[(d + i, d + j)] = b.entries()[(i, j)];
            }
        }
        PdMatrix::try_new(s)
    };

    // Summand-conditioned law: Cov(Z_d, X'_i) = A[i,d], Cov(Z_d, Y'_i) = B[i,d].
    let za: Vec<T> = (0..d - 1).map(|i| a.entries()[(i, d - 1)]).collect();
    let zb: Vec<T> = (0..d - 1).map(|i| b.entries()[(i, d - 1)]).collect();
    let p1 = build(&za, &zb)?;

    // Sum-conditioned law: the z row regresses through the sum model only.
    let (p2, label) = if d == 1 {
        (build(&[], &[])?, "last coordinate (degenerate)".to_string())
    } else {
        let sum_cov = PdMatrix::try_new(a.entries().add(b.entries()))?;
        let head: Vec<usize> = (0..d - 1).collect();
        let (w_reg, _) = sum_cov.regression_onto(&[d - 1], &head)?;
        let w_vec: Vec<T> = (0..d - 1).map(|i| w_reg[(0, i)]).collect();
        let a_head = a.entries().select(&head, &head);
        let b_head = b.entries().select(&head, &head);
        (
            build(&a_head.matvec(&w_vec), &b_head.matvec(&w_vec))?,
            "last coordinate".to_string(),
        )
    };
    let e = density_diff_part(
        &w,
        None,
        &GaussMix::single(p1),
        &GaussMix::single(p2),
        &sc.spec.reseeded("last-coord"),
    )?;
    push_part(parts, sc, label, e, Direction::NonNegative);
    Ok(())
}
