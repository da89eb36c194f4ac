//! Monte Carlo estimators of entropy, horizontal Dirichlet energy and
//! log-Sobolev ratios over endpoint clouds, plus the group/quotient
//! transfer comparison.
//!
//! For a test function `f` and an empirical measure μ:
//!
//! ```text
//! Ent_μ(f²) = ∫ f² log f² dμ − (∫ f² dμ) log(∫ f² dμ)
//! E_μ(f)    = ∫ Σᵢ (X̃ᵢ f)² dμ
//! ```
//!
//! Standard errors use the delta method over the joint per-sample moments.
//! Per-sample terms are computed in parallel and reduced sequentially in
//! path order, which makes every estimate independent of the worker count.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::diffusion::{path_rng, CloudPoints, EndpointCloud, SpaceModel};
use crate::error::{Error, Result};
use crate::groups::{directional_derivative, GroupModel, DEFAULT_EPS};
use crate::quotients::{intrinsic_derivative, project_unchecked, quotient_horizontal_derivative, QuotientModel};
use crate::stats::{covariance, mean, EstimateCI};
use crate::testfn::{Domain, EvalFn, GradFn, TestFunction};

/// How horizontal derivatives are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode {
    /// Analytic gradient when the function has one, else central differences
    /// with [`DEFAULT_EPS`].
    Auto,
    /// Central differences with the given step, ignoring analytic gradients.
    FiniteDifference(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LsiReport {
    pub entropy: EstimateCI,
    pub energy: EstimateCI,
    pub ratio: EstimateCI,
    /// `Ent(f²/∫f²)`, the entropy of the normalized density.
    pub entropy_normalized: f64,
    /// `Ent(f²/∫f²) / (E(f)/∫f²)`; invariant under `f ↦ c·f`.
    pub ratio_normalized: f64,
    pub constant: Option<f64>,
    /// `Ent ≤ C·E + 3·SE` for the supplied constant `C`.
    pub constant_bound_satisfied: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransferReport {
    pub entropy_group: EstimateCI,
    pub entropy_quotient: EstimateCI,
    pub energy_group: EstimateCI,
    pub energy_quotient: EstimateCI,
    pub entropy_diff: f64,
    pub entropy_se: f64,
    pub energy_diff: f64,
    pub energy_se: f64,
    pub pass: bool,
}

fn cloud_domain(cloud: &EndpointCloud) -> Domain {
    match &cloud.config.model {
        SpaceModel::Group(g) => g.domain(),
        SpaceModel::Quotient(q) => q.domain(),
    }
}

fn values(f: &TestFunction, cloud: &EndpointCloud) -> Result<Vec<f64>> {
    f.expect_domain(cloud_domain(cloud))?;
    let vals: Vec<f64> = match &cloud.points {
        CloudPoints::Group(v) => v.par_iter().map(|g| f.eval(&g.coords())).collect(),
        CloudPoints::Quotient(v) => v.par_iter().map(|m| f.eval(&m.coords)).collect(),
    };
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalDomain(format!("`{}` is not finite on the cloud", f.id())));
    }
    Ok(vals)
}

#[inline]
fn xlogx(b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        b * b.ln()
    }
}

struct EntropyParts {
    value: f64,
    b_mean: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Two passes: `B̄ = mean(f²)`, then `mean(f² log(f²/B̄))`.
fn entropy_parts(vals: &[f64], id: &str) -> Result<EntropyParts> {
    let b: Vec<f64> = vals.iter().map(|v| v * v).collect();
    let b_mean = mean(&b);
    if !(b_mean > 0.0) {
        return Err(Error::DegenerateFunction(format!("mean of `{id}`² vanishes on the cloud")));
    }
    let terms: Vec<f64> = b
        .iter()
        .map(|&bi| if bi == 0.0 { 0.0 } else { bi * (bi / b_mean).ln() })
        .collect();
    let value = mean(&terms);
    let a = b.iter().map(|&bi| xlogx(bi)).collect();
    Ok(EntropyParts { value, b_mean, a, b })
}

fn entropy_se(p: &EntropyParts) -> f64 {
    let n = p.b.len() as f64;
    let k = p.b_mean.ln() + 1.0;
    let var = covariance(&p.a, &p.a) - 2.0 * k * covariance(&p.a, &p.b) + k * k * covariance(&p.b, &p.b);
    (var.max(0.0) / n).sqrt()
}

/// Plug-in entropy of `f²` with its delta-method standard error.
pub fn estimate_entropy(f: &TestFunction, cloud: &EndpointCloud) -> Result<EstimateCI> {
    let vals = values(f, cloud)?;
    let parts = entropy_parts(&vals, f.id())?;
    Ok(EstimateCI::from_se(parts.value, entropy_se(&parts), vals.len()))
}

/// `Ent(f²/∫f²) = mean(w log w)`, `w = f²/B̄`.
pub fn estimate_entropy_normalized(f: &TestFunction, cloud: &EndpointCloud) -> Result<f64> {
    let vals = values(f, cloud)?;
    normalized_entropy(&vals, f.id())
}

fn normalized_entropy(vals: &[f64], id: &str) -> Result<f64> {
    let b: Vec<f64> = vals.iter().map(|v| v * v).collect();
    let b_mean = mean(&b);
    if !(b_mean > 0.0) {
        return Err(Error::DegenerateFunction(format!("mean of `{id}`² vanishes on the cloud")));
    }
    let w: Vec<f64> = b.iter().map(|bi| xlogx(bi / b_mean)).collect();
    Ok(mean(&w))
}

/// `Σᵢ (X̃ᵢ f)²` at every endpoint.
pub fn energy_density(f: &TestFunction, cloud: &EndpointCloud, mode: DerivativeMode) -> Result<Vec<f64>> {
    f.expect_domain(cloud_domain(cloud))?;
    let (f, eps) = match mode {
        DerivativeMode::Auto => (f.clone(), DEFAULT_EPS),
        DerivativeMode::FiniteDifference(eps) => (f.without_grad(), eps),
    };
    let f = &f;
    let sum_sq = |n: usize, d: &dyn Fn(usize) -> Result<f64>| -> Result<f64> {
        let mut s = 0.0;
        for i in 0..n {
            let v = d(i)?;
            s += v * v;
        }
        Ok(s)
    };
    match (&cloud.config.model, &cloud.points) {
        (SpaceModel::Group(model), CloudPoints::Group(points)) => points
            .par_iter()
            .map(|g| sum_sq(model.frame_size(), &|i| directional_derivative(model, f, g, i, eps)))
            .collect(),
        (SpaceModel::Quotient(qm), CloudPoints::Quotient(points)) => {
            let n = qm.base().frame_size();
            if let Some(source) = &cloud.source {
                source
                    .par_iter()
                    .map(|g| sum_sq(n, &|i| quotient_horizontal_derivative(qm, f, g, i, eps)))
                    .collect()
            } else {
                points
                    .par_iter()
                    .map(|m| sum_sq(n, &|i| intrinsic_derivative(qm, f, &m.coords, i, eps)))
                    .collect()
            }
        }
        _ => Err(Error::KindMismatch("cloud points do not match its model".into())),
    }
}

/// Mean horizontal Dirichlet energy.
pub fn estimate_energy(f: &TestFunction, cloud: &EndpointCloud) -> Result<EstimateCI> {
    estimate_energy_with(f, cloud, DerivativeMode::Auto)
}

pub fn estimate_energy_with(f: &TestFunction, cloud: &EndpointCloud, mode: DerivativeMode) -> Result<EstimateCI> {
    let c = energy_density(f, cloud, mode)?;
    let n = c.len();
    Ok(EstimateCI::from_se(mean(&c), (covariance(&c, &c) / n as f64).sqrt(), n))
}

fn ratio_from_parts(parts: &EntropyParts, c: &[f64]) -> Result<(EstimateCI, EstimateCI, EstimateCI)> {
    let n = c.len();
    let entropy = EstimateCI::from_se(parts.value, entropy_se(parts), n);
    let c_mean = mean(c);
    let energy = EstimateCI::from_se(c_mean, (covariance(c, c) / n as f64).sqrt(), n);
    if !(energy.value > 3.0 * energy.std_error) || energy.value <= 0.0 {
        return Err(Error::IndeterminateRatio(format!(
            "energy {} is not resolved above 3 standard errors ({})",
            energy.value, energy.std_error
        )));
    }
    let r = entropy.value / c_mean;
    // Gradient of (Ā − B̄ log B̄)/C̄ with respect to (Ā, B̄, C̄).
    let g = [1.0 / c_mean, -(parts.b_mean.ln() + 1.0) / c_mean, -r / c_mean];
    let cols: [&[f64]; 3] = [&parts.a, &parts.b, c];
    let mut var = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            var += g[i] * g[j] * covariance(cols[i], cols[j]);
        }
    }
    let ratio = EstimateCI::from_se(r, (var.max(0.0) / n as f64).sqrt(), n);
    Ok((entropy, energy, ratio))
}

/// Entropy-to-energy ratio with a joint delta-method interval.
pub fn lsi_ratio(f: &TestFunction, cloud: &EndpointCloud, constant: Option<f64>) -> Result<LsiReport> {
    lsi_ratio_with(f, cloud, constant, DerivativeMode::Auto)
}

pub fn lsi_ratio_with(
    f: &TestFunction,
    cloud: &EndpointCloud,
    constant: Option<f64>,
    mode: DerivativeMode,
) -> Result<LsiReport> {
    let vals = values(f, cloud)?;
    let parts = entropy_parts(&vals, f.id())?;
    let c = energy_density(f, cloud, mode)?;
    let (entropy, energy, ratio) = ratio_from_parts(&parts, &c)?;
    let entropy_normalized = normalized_entropy(&vals, f.id())?;
    let ratio_normalized = entropy_normalized / (energy.value / parts.b_mean);
    let constant_bound_satisfied = constant.map(|k| {
        let se = (entropy.std_error.powi(2) + (k * energy.std_error).powi(2)).sqrt();
        entropy.value <= k * energy.value + 3.0 * se
    });
    Ok(LsiReport {
        entropy,
        energy,
        ratio,
        entropy_normalized,
        ratio_normalized,
        constant,
        constant_bound_satisfied,
    })
}

/// Percentile bootstrap interval for the entropy/energy ratio. `value` is
/// the plug-in ratio and `std_error` the bootstrap standard deviation.
pub fn bootstrap_ratio_ci(f: &TestFunction, cloud: &EndpointCloud, resamples: usize, seed: u64) -> Result<EstimateCI> {
    if resamples < 2 {
        return Err(Error::InvalidInput("bootstrap needs at least 2 resamples".into()));
    }
    let vals = values(f, cloud)?;
    let c = energy_density(f, cloud, DerivativeMode::Auto)?;
    let parts = entropy_parts(&vals, f.id())?;
    let (_, _, point) = ratio_from_parts(&parts, &c)?;
    let n = vals.len();
    let mut ratios: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = path_rng(seed, r);
            let (mut sb, mut sa, mut sc) = (0.0, 0.0, 0.0);
            for _ in 0..n {
                let i = rng.random_range(0..n);
                sb += parts.b[i];
                sa += parts.a[i];
                sc += c[i];
            }
            let nb = n as f64;
            let (bm, am, cm) = (sb / nb, sa / nb, sc / nb);
            (am - xlogx(bm)) / cm
        })
        .collect();
    ratios.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| ratios[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    let m = mean(&ratios);
    let sd = (ratios.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (resamples - 1) as f64).sqrt();
    Ok(EstimateCI {
        value: point.value,
        std_error: sd,
        ci_low: q(0.025).min(point.value),
        ci_high: q(0.975).max(point.value),
        n,
    })
}

/// `f∘π` as a test function on the base group. Its analytic gradient, when
/// `f` has one, is `f`'s gradient evaluated at `π(g)`.
pub fn lift(f: &TestFunction, qm: &QuotientModel) -> Result<TestFunction> {
    f.expect_domain(qm.domain())?;
    let base: GroupModel = qm.base().clone();
    let eval: EvalFn = {
        let (qm, base, fe) = (qm.clone(), base.clone(), f.eval_fn());
        std::sync::Arc::new(move |coords: &[f64]| {
            let g = base.point_from_coords_raw(coords);
            fe(&project_unchecked(&qm, &g))
        })
    };
    let grad: Option<GradFn> = f.grad_fn().map(|fg| -> GradFn {
        let (qm, base) = (qm.clone(), base.clone());
        std::sync::Arc::new(move |coords: &[f64]| {
            let g = base.point_from_coords_raw(coords);
            fg(&project_unchecked(&qm, &g))
        })
    });
    Ok(TestFunction::from_parts(
        format!("{}∘π", f.id()),
        base.domain(),
        eval,
        grad,
        None,
    ))
}

/// Compares entropy and energy of `f` on the quotient with those of `f∘π` on
/// the group. Passes when both differences are below 3 combined standard
/// errors (or exactly zero).
pub fn verify_transfer(
    f: &TestFunction,
    group_cloud: &EndpointCloud,
    quotient_cloud: &EndpointCloud,
    qm: &QuotientModel,
) -> Result<TransferReport> {
    let (tg, tq) = (group_cloud.config.t, quotient_cloud.config.t);
    if (tg - tq).abs() > 1e-12 * tg.max(tq) {
        return Err(Error::InvalidComparison(format!("clouds at different times t={tg} and t={tq}")));
    }
    match (&group_cloud.config.model, &quotient_cloud.config.model) {
        (SpaceModel::Group(g), SpaceModel::Quotient(q)) if g == qm.base() && q == qm => {}
        _ => {
            return Err(Error::InvalidComparison(
                "expected a base-group cloud and a quotient cloud of the same model".into(),
            ))
        }
    }
    let lifted = lift(f, qm)?;
    let entropy_group = estimate_entropy(&lifted, group_cloud)?;
    let entropy_quotient = estimate_entropy(f, quotient_cloud)?;
    let energy_group = estimate_energy(&lifted, group_cloud)?;
    let energy_quotient = estimate_energy(f, quotient_cloud)?;
    let entropy_diff = (entropy_group.value - entropy_quotient.value).abs();
    let energy_diff = (energy_group.value - energy_quotient.value).abs();
    let entropy_se = entropy_group.std_error.hypot(entropy_quotient.std_error);
    let energy_se = energy_group.std_error.hypot(energy_quotient.std_error);
    let close = |d: f64, se: f64| d == 0.0 || d < 3.0 * se;
    Ok(TransferReport {
        entropy_group,
        entropy_quotient,
        energy_group,
        energy_quotient,
        entropy_diff,
        entropy_se,
        energy_diff,
        energy_se,
        pass: close(entropy_diff, entropy_se) && close(energy_diff, energy_se),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{simulate_group_endpoints, simulate_quotient_endpoints, QuotientMode, SimConfig};

    fn real_line_cloud(t: f64, n: usize, seed: u64) -> EndpointCloud {
        let cfg = SimConfig::new(QuotientModel::real_line(), t, t, n, seed).unwrap();
        simulate_quotient_endpoints(&cfg, QuotientMode::Intrinsic).unwrap()
    }

    #[test]
    fn constant_has_zero_entropy_and_energy() {
        let cloud = real_line_cloud(1.0, 500, 1);
        let q = QuotientModel::real_line();
        for c in [0.1, 1.0, 3.7] {
            let f = TestFunction::new("c", q.domain(), move |_| c);
            let e = estimate_entropy(&f, &cloud).unwrap();
            assert_eq!(e.value, 0.0);
            assert_eq!(e.std_error, 0.0);
            assert_eq!(estimate_energy(&f, &cloud).unwrap().value, 0.0);
            assert!(matches!(lsi_ratio(&f, &cloud, None), Err(Error::IndeterminateRatio(_))));
        }
    }

    #[test]
    fn zero_function_is_degenerate() {
        let cloud = real_line_cloud(1.0, 100, 1);
        let f = TestFunction::new("zero", QuotientModel::real_line().domain(), |_| 0.0);
        assert!(matches!(estimate_entropy(&f, &cloud), Err(Error::DegenerateFunction(_))));
    }

    #[test]
    fn domain_mismatch_rejected() {
        let cloud = real_line_cloud(1.0, 100, 1);
        let f = TestFunction::new("g", QuotientModel::grushin().domain(), |_| 1.0);
        assert!(matches!(estimate_entropy(&f, &cloud), Err(Error::KindMismatch(_))));
    }

    #[test]
    fn entropy_matches_two_pass_loop_bitwise() {
        let cloud = real_line_cloud(1.0, 2000, 7);
        let f = TestFunction::new("e", QuotientModel::real_line().domain(), |m| (0.5 * m[0]).exp() * m[0].cos());
        let est = estimate_entropy(&f, &cloud).unwrap();
        // Independent loop: shifted mean of f², then shifted mean of f² log(f²/B̄).
        let pts = cloud.quotient_points().unwrap();
        let sq: Vec<f64> = pts.iter().map(|p| f.eval(&p.coords).powi(2)).collect();
        let mut acc = 0.0;
        for s in &sq {
            acc += s - sq[0];
        }
        let b = sq[0] + acc / sq.len() as f64;
        let terms: Vec<f64> = sq.iter().map(|&s| if s == 0.0 { 0.0 } else { s * (s / b).ln() }).collect();
        let mut acc = 0.0;
        for t in &terms {
            acc += t - terms[0];
        }
        let brute = terms[0] + acc / terms.len() as f64;
        assert_eq!(est.value.to_bits(), brute.to_bits());
    }

    #[test]
    fn normalized_ratio_invariant_under_scaling() {
        let cloud = real_line_cloud(1.0, 3000, 9);
        let q = QuotientModel::real_line();
        let f = TestFunction::new("f", q.domain(), |m| (0.5 * m[0]).exp()).with_grad(|m| vec![0.0, 0.5 * (0.5 * m[0]).exp()]);
        let base = lsi_ratio(&f, &cloud, None).unwrap();
        for c in [2.0, 0.25, 8.0] {
            let r = lsi_ratio(&f.scaled(c), &cloud, None).unwrap();
            assert_eq!(r.ratio_normalized.to_bits(), base.ratio_normalized.to_bits(), "c={c}");
        }
        for c in [3.0, -0.7, 1e3] {
            let r = lsi_ratio(&f.scaled(c), &cloud, None).unwrap();
            assert!((r.ratio_normalized / base.ratio_normalized - 1.0).abs() < 1e-12);
            assert!((r.ratio.value / base.ratio.value - 1.0).abs() < 1e-10);
            // Ent(c²f²) = c²·Ent(f²).
            assert!((r.entropy.value / (c * c * base.entropy.value) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn transfer_rejects_mismatched_times() {
        let q = QuotientModel::real_line();
        let g = simulate_group_endpoints(&SimConfig::new(q.base().clone(), 1.0, 0.5, 40, 1).unwrap()).unwrap();
        let m = real_line_cloud(0.5, 40, 2);
        let f = TestFunction::new("c", q.domain(), |_| 1.0);
        assert!(matches!(verify_transfer(&f, &g, &m, &q), Err(Error::InvalidComparison(_))));
    }

    #[test]
    fn constant_transfer_passes_trivially() {
        let q = QuotientModel::grushin();
        let g = simulate_group_endpoints(&SimConfig::new(q.base().clone(), 1.0, 0.1, 200, 1).unwrap()).unwrap();
        let m = simulate_quotient_endpoints(&SimConfig::new(q.clone(), 1.0, 0.1, 200, 2).unwrap(), QuotientMode::Intrinsic).unwrap();
        let f = TestFunction::new("c", q.domain(), |_| 2.0);
        let r = verify_transfer(&f, &g, &m, &q).unwrap();
        assert!(r.pass);
        assert_eq!(r.entropy_diff, 0.0);
        assert_eq!(r.energy_diff, 0.0);
    }

    #[test]
    fn bootstrap_interval_brackets_estimate() {
        let cloud = real_line_cloud(1.0, 2000, 4);
        let q = QuotientModel::real_line();
        let f = TestFunction::new("f", q.domain(), |m| (0.25 * m[0]).exp());
        let b = bootstrap_ratio_ci(&f, &cloud, 200, 3).unwrap();
        assert!(b.ci_low <= b.value && b.value <= b.ci_high);
        assert!(b.std_error > 0.0);
        let again = bootstrap_ratio_ci(&f, &cloud, 200, 3).unwrap();
        assert_eq!(b, again);
    }
}
