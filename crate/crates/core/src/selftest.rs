//! Built-in verification batteries: the constant-weight reduction of the
//! weighted entropy against the standard differential entropy, and the
//! closed-form tilt moments against forced Monte Carlo estimates. The
//! report is deterministic for a fixed configuration.

use crate::mc::SampleSpec;
use crate::moments::{gaussian_we, weighted_moments, weighted_moments_mc};
use crate::pd::random_pd;
use crate::scalar::Scalar;
use crate::weights::Weight;
use rand::{Rng, SeedableRng};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct BatteryReport {
    pub name: String,
    pub cases: usize,
    pub passed: usize,
    pub required: usize,
    pub pass: bool,
    pub worst: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub samples: u64,
    pub chunk_size: u64,
    pub zcrit: f64,
    pub batteries: Vec<BatteryReport>,
    pub pass: bool,
}

/// Run both batteries at the given sampling configuration.
pub fn selftest<T: Scalar>(spec: &SampleSpec, zcrit: T) -> SelftestReport {
    let reduction = constant_reduction_battery::<T>(spec);
    let agreement = tilt_agreement_battery::<T>(spec, zcrit);
    let pass = reduction.pass && agreement.pass;
    SelftestReport {
        seed: spec.seed,
        samples: spec.n_samples,
        chunk_size: spec.chunk_size,
        zcrit: zcrit.as_f64(),
        batteries: vec![reduction, agreement],
        pass,
    }
}

/// 100 seeded random models, dimensions cycling 1..=8: the constant-weight
/// entropy must match ½·ln[(2πe)^d·det C] to 1e-9.
fn constant_reduction_battery<T: Scalar>(spec: &SampleSpec) -> BatteryReport {
    let cases = 100;
    let mut passed = 0;
    let mut worst = 0.0f64;
    for case in 0..cases {
        let d = (case % 8) + 1;
        let c = random_pd::<T>(d, spec.seed.wrapping_add(case as u64));
        let w = Weight::constant(d, T::one());
        let got = gaussian_we(&c, &w, spec).unwrap().value;
        let d_t = T::from_usize(d).unwrap();
        let want = T::c(0.5)
            * (d_t * (T::c(std::f64::consts::TAU) * T::c(std::f64::consts::E)).ln() + c.log_det());
        let err = (got - want).abs().as_f64();
        worst = worst.max(err);
        if err <= 1e-9 {
            passed += 1;
        }
    }
    BatteryReport {
        name: "constant-weight entropy reduction".into(),
        cases,
        passed,
        required: cases,
        pass: passed == cases,
        worst,
    }
}

/// 100 seeded tilt configurations, dimensions cycling 1..=6: closed-form
/// mass and second-moment matrix must agree with forced Monte Carlo within
/// `zcrit` standard errors, in at least 95 cases.
fn tilt_agreement_battery<T: Scalar>(spec: &SampleSpec, zcrit: T) -> BatteryReport {
    let cases = 100;
    let required = 95;
    let mut passed = 0;
    let mut worst = 0.0f64;
    for case in 0..cases {
        let d = (case % 6) + 1;
        let seed = spec.seed.wrapping_add(1000 + case as u64);
        let c = random_pd::<T>(d, seed);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let scale = T::c(0.5) / T::from_usize(d).unwrap().sqrt();
        let tilt: Vec<T> = (0..d)
            .map(|_| T::c(rng.gen_range(-1.0..1.0)) * scale)
            .collect();
        let w = Weight::tilt(T::one(), tilt);
        let exact = weighted_moments(&c, &w, spec).unwrap();
        let mc = weighted_moments_mc(&c, &w, &spec.with_seed(seed ^ 0x55aa)).unwrap();
        let mut ok = true;
        let mut case_worst = 0.0f64;
        let z_alpha = ((mc.alpha.value - exact.alpha.value).abs()
            / mc.alpha.stderr.max(T::epsilon()))
        .as_f64();
        case_worst = case_worst.max(z_alpha);
        if z_alpha > zcrit.as_f64() {
            ok = false;
        }
        for i in 0..d {
            for j in 0..d {
                let se = mc.phi.stderrs[(i, j)].max(T::epsilon());
                let z = ((mc.phi.values[(i, j)] - exact.phi.values[(i, j)]).abs() / se).as_f64();
                case_worst = case_worst.max(z);
                if z > zcrit.as_f64() {
                    ok = false;
                }
            }
        }
        worst = worst.max(case_worst);
        if ok {
            passed += 1;
        }
    }
    BatteryReport {
        name: "tilt closed form vs Monte Carlo".into(),
        cases,
        passed,
        required,
        pass: passed >= required,
        worst,
    }
}
