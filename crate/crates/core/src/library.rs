//! Built-in test functions, addressable by id per space.
//!
//! Heisenberg, real_line, grushin and compact_heis entries carry analytic
//! horizontal gradients. Everything else falls back to finite differences.

use std::f64::consts::TAU;

use crate::diffusion::SpaceModel;
use crate::error::{Error, Result};
use crate::groups::GroupKind;
use crate::quotients::QuotientKind;
use crate::testfn::TestFunction;

/// `ψ(s) = e^{−1/s}` for `s > 0`, else 0.
fn psi(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

fn dpsi(s: f64) -> f64 {
    if s > 0.0 {
        psi(s) / (s * s)
    } else {
        0.0
    }
}

/// Smooth cutoff equal to 1 on `|u| ≤ 8` and 0 on `|u| ≥ 10`.
pub fn cutoff(u: f64) -> f64 {
    let (a, b) = (psi(10.0 - u.abs()), psi(u.abs() - 8.0));
    a / (a + b)
}

pub fn cutoff_derivative(u: f64) -> f64 {
    let s = u.signum();
    let (ra, rb) = (10.0 - u.abs(), u.abs() - 8.0);
    let (a, b) = (psi(ra), psi(rb));
    let den = a + b;
    -s * (dpsi(ra) * b + a * dpsi(rb)) / (den * den)
}

/// `e^{λu/2}·χ(u)` on the real line; `f²` integrates `e^{λu}` against the
/// heat kernel, which gives the exact Gaussian log-Sobolev ratio `2t`.
pub fn truncated_exponential(id: &str, lambda: f64) -> TestFunction {
    let q = SpaceModel::Quotient(crate::quotients::QuotientModel::real_line());
    let domain = space_domain(&q);
    TestFunction::new(id, domain, move |m| (0.5 * lambda * m[0]).exp() * cutoff(m[0]))
        .with_grad(move |m| {
            let e = (0.5 * lambda * m[0]).exp();
            vec![0.0, e * (0.5 * lambda * cutoff(m[0]) + cutoff_derivative(m[0]))]
        })
        .with_support_radius(10.0)
}

fn space_domain(space: &SpaceModel) -> crate::testfn::Domain {
    match space {
        SpaceModel::Group(g) => g.domain(),
        SpaceModel::Quotient(q) => q.domain(),
    }
}

fn heisenberg(space: &SpaceModel) -> Vec<TestFunction> {
    let d = space_domain(space);
    // X̃F = F_x − (y/2)F_z, ỸF = F_y + (x/2)F_z.
    let frame = |c: &[f64], fx: f64, fy: f64, fz: f64| vec![fx - 0.5 * c[1] * fz, fy + 0.5 * c[0] * fz];
    vec![
        TestFunction::new("const", d, |_| 1.0).with_grad(|_| vec![0.0, 0.0]),
        TestFunction::new("x", d, |c| c[0]).with_grad(|_| vec![1.0, 0.0]),
        TestFunction::new("z", d, |c| c[2]).with_grad(move |c| frame(c, 0.0, 0.0, 1.0)),
        TestFunction::new("gauss", d, |c| (-(c[0] * c[0] + c[1] * c[1] + c[2] * c[2])).exp()).with_grad(move |c| {
            let f = (-(c[0] * c[0] + c[1] * c[1] + c[2] * c[2])).exp();
            frame(c, -2.0 * c[0] * f, -2.0 * c[1] * f, -2.0 * c[2] * f)
        }),
        TestFunction::new("osc", d, |c| 2.0 + c[0].sin() * c[2].cos())
            .with_grad(move |c| frame(c, c[0].cos() * c[2].cos(), 0.0, -c[0].sin() * c[2].sin())),
        TestFunction::new("exp_y", d, |c| (0.5 * c[1]).exp()).with_grad(|c| vec![0.0, 0.5 * (0.5 * c[1]).exp()]),
    ]
}

fn real_line(space: &SpaceModel) -> Vec<TestFunction> {
    let d = space_domain(space);
    vec![
        TestFunction::new("const", d, |_| 1.0).with_grad(|_| vec![0.0, 0.0]),
        TestFunction::new("coord", d, |m| m[0]).with_grad(|_| vec![0.0, 1.0]),
        truncated_exponential("exp_quarter", 0.5),
        truncated_exponential("exp_half", 1.0),
        truncated_exponential("exp_unit", 2.0),
        TestFunction::new("gauss_bump", d, |m| (-m[0] * m[0]).exp())
            .with_grad(|m| vec![0.0, -2.0 * m[0] * (-m[0] * m[0]).exp()]),
        TestFunction::new("osc_bump", d, |m| 2.0 + m[0].sin()).with_grad(|m| vec![0.0, m[0].cos()]),
    ]
}

fn grushin(space: &SpaceModel) -> Vec<TestFunction> {
    let d = space_domain(space);
    // Pushed-forward frame {∂u, u∂v}.
    vec![
        TestFunction::new("const", d, |_| 1.0).with_grad(|_| vec![0.0, 0.0]),
        TestFunction::new("coord_v", d, |m| m[1]).with_grad(|m| vec![0.0, m[0]]),
        TestFunction::new("gauss_bump", d, |m| (-(m[0] * m[0] + m[1] * m[1])).exp()).with_grad(|m| {
            let f = (-(m[0] * m[0] + m[1] * m[1])).exp();
            vec![-2.0 * m[0] * f, m[0] * (-2.0 * m[1] * f)]
        }),
        TestFunction::new("osc_bump", d, |m| 2.0 + m[0].sin() * m[1].cos())
            .with_grad(|m| vec![m[0].cos() * m[1].cos(), -m[0] * m[0].sin() * m[1].sin()]),
        TestFunction::new("mixed", d, |m| (0.5 * m[0]).exp() / (1.0 + m[1] * m[1])).with_grad(|m| {
            let f = (0.5 * m[0]).exp() / (1.0 + m[1] * m[1]);
            vec![0.5 * f, m[0] * (-2.0 * m[1] * f / (1.0 + m[1] * m[1]))]
        }),
    ]
}

/// Functions of `(x, y)` with period `r`; they do not see the central
/// coordinate, so `X̃ ↦ ∂x` and `Ỹ ↦ ∂y`.
fn compact_heis(space: &SpaceModel, r: f64) -> Vec<TestFunction> {
    let d = space_domain(space);
    let k = TAU / r;
    vec![
        TestFunction::new("const", d, |_| 1.0).with_grad(|_| vec![0.0, 0.0]),
        TestFunction::new("cos_x", d, move |m| 2.0 + (k * m[0]).cos()).with_grad(move |m| vec![-k * (k * m[0]).sin(), 0.0]),
        TestFunction::new("sin_y", d, move |m| 2.0 + (k * m[1]).sin()).with_grad(move |m| vec![0.0, k * (k * m[1]).cos()]),
        TestFunction::new("mixed", d, move |m| ((k * m[0]).cos() * (k * m[1]).sin()).exp()).with_grad(move |m| {
            let f = ((k * m[0]).cos() * (k * m[1]).sin()).exp();
            vec![-k * (k * m[0]).sin() * (k * m[1]).sin() * f, k * (k * m[0]).cos() * (k * m[1]).cos() * f]
        }),
        TestFunction::new("diagonal", d, move |m| 3.0 + (k * (m[0] + m[1])).cos()).with_grad(move |m| {
            let s = -k * (k * (m[0] + m[1])).sin();
            vec![s, s]
        }),
    ]
}

/// Coordinate-generic functions; derivatives by finite differences.
fn generic(space: &SpaceModel) -> Vec<TestFunction> {
    let d = space_domain(space);
    vec![
        TestFunction::new("const", d, |_| 1.0),
        // Uses two coordinates only: on the compact quotients the full norm is constant.
        TestFunction::new("bump", d, |c| (-(c[0] * c[0] + c[1] * c[1])).exp()),
        TestFunction::new("shift_c0", d, |c| 2.0 + c[0]),
        TestFunction::new("osc", d, |c| 2.0 + c[0].cos() * c[c.len() - 1].sin()),
        TestFunction::new("quad", d, |c| {
            1.0 + c.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum::<f64>() / c.len() as f64
        }),
    ]
}

/// Every built-in function for `space`.
pub fn catalog(space: &SpaceModel) -> Vec<TestFunction> {
    let d = space_domain(space);
    match space {
        SpaceModel::Group(g) => match g.kind() {
            GroupKind::Heisenberg => heisenberg(space),
            GroupKind::Su2 => {
                let mut v = generic(space);
                v.push(TestFunction::new("trace", d, |c| 2.0 + 2.0 * c[0]));
                v
            }
            _ => generic(space),
        },
        SpaceModel::Quotient(q) => match q.kind() {
            QuotientKind::RealLine => real_line(space),
            QuotientKind::Grushin => grushin(space),
            QuotientKind::CompactHeis { r } => compact_heis(space, *r),
            QuotientKind::Hopf => {
                let mut v = generic(space);
                v.push(TestFunction::new("height", d, |c| 2.0 + c[2]));
                v
            }
            QuotientKind::Nonisotropic(_) | QuotientKind::HeisLike(_) => {
                let mut v = generic(space);
                v.push(TestFunction::new("central", d, |c| c[c.len() - 1]));
                v
            }
            _ => generic(space),
        },
    }
}

/// Ids available on `space`, in catalog order.
pub fn ids(space: &SpaceModel) -> Vec<String> {
    catalog(space).iter().map(|f| f.id().to_string()).collect()
}

pub fn lookup(space: &SpaceModel, id: &str) -> Result<TestFunction> {
    let all = catalog(space);
    let known: Vec<String> = all.iter().map(|f| f.id().to_string()).collect();
    all.into_iter().find(|f| f.id() == id).ok_or_else(|| {
        Error::InvalidInput(format!("unknown function `{id}` on {}; available: {}", space.name(), known.join(", ")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{simulate_group_endpoints, SimConfig};
    use crate::groups::{directional_derivative, GroupModel};
    use crate::quotients::{quotient_horizontal_derivative, QuotientModel};

    fn spaces() -> Vec<SpaceModel> {
        vec![
            GroupModel::heisenberg().into(),
            GroupModel::su2().into(),
            GroupModel::heisenberg_product(2).unwrap().into(),
            GroupModel::su2_product(2).unwrap().into(),
            QuotientModel::real_line().into(),
            QuotientModel::grushin().into(),
            QuotientModel::nonisotropic(vec![1.0, 2.0]).unwrap().into(),
            QuotientModel::heis_like(vec![vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap().into(),
            QuotientModel::compact_heis(1.5).unwrap().into(),
            QuotientModel::hopf().into(),
            QuotientModel::so3().into(),
            QuotientModel::so4().into(),
        ]
    }

    #[test]
    fn at_least_five_functions_per_space_with_unique_ids() {
        for s in spaces() {
            let mut v = ids(&s);
            assert!(v.len() >= 5, "{}", s.name());
            v.sort();
            v.dedup();
            assert_eq!(v.len(), ids(&s).len());
        }
    }

    #[test]
    fn unknown_id_lists_available() {
        let err = lookup(&QuotientModel::real_line().into(), "nope").unwrap_err();
        assert!(err.to_string().contains("exp_half"));
    }

    #[test]
    fn cutoff_is_smooth_step() {
        assert_eq!(cutoff(0.0), 1.0);
        assert_eq!(cutoff(7.9), 1.0);
        assert_eq!(cutoff(-10.5), 0.0);
        assert!((cutoff(9.0) - 0.5).abs() < 1e-15);
        for u in [-9.7, -8.4, 8.3, 9.1, 9.9] {
            let e = 1e-6;
            let fd = (cutoff(u + e) - cutoff(u - e)) / (2.0 * e);
            assert!((fd - cutoff_derivative(u)).abs() < 1e-6, "u={u}");
        }
    }

    /// Analytic gradients agree with central differences of `f∘π` along
    /// the group flow.
    #[test]
    fn analytic_gradients_match_finite_differences() {
        let check = |space: SpaceModel| {
            let (base, qm) = match &space {
                SpaceModel::Group(g) => (g.clone(), None),
                SpaceModel::Quotient(q) => (q.base().clone(), Some(q.clone())),
            };
            let cloud = simulate_group_endpoints(&SimConfig::new(base.clone(), 1.0, 0.05, 40, 5).unwrap()).unwrap();
            for f in catalog(&space).into_iter().filter(|f| f.has_analytic_grad()) {
                let fd = f.without_grad();
                for g in cloud.group_points().unwrap() {
                    for i in 0..base.frame_size() {
                        let (a, b) = match &qm {
                            None => (
                                directional_derivative(&base, &f, g, i, 1e-5).unwrap(),
                                directional_derivative(&base, &fd, g, i, 1e-5).unwrap(),
                            ),
                            Some(q) => (
                                quotient_horizontal_derivative(q, &f, g, i, 1e-5).unwrap(),
                                quotient_horizontal_derivative(q, &fd, g, i, 1e-5).unwrap(),
                            ),
                        };
                        assert!((a - b).abs() < 1e-5 * (1.0 + a.abs()), "{} {i}: {a} vs {b}", f.id());
                    }
                }
            }
        };
        check(GroupModel::heisenberg().into());
        check(QuotientModel::real_line().into());
        check(QuotientModel::grushin().into());
        check(QuotientModel::compact_heis(1.5).unwrap().into());
    }
}
