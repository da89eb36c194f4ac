use srlb_core::functionals::{estimate_energy_with, lift, lsi_ratio, DerivativeMode};
use srlb_core::{
    estimate_energy, estimate_entropy, library, simulate_group_endpoints, simulate_quotient_endpoints, EndpointCloud,
    Error, GroupModel, QuotientMode, QuotientModel, SimConfig, SpaceModel,
};

fn projected(q: &QuotientModel, t: f64, n: usize, seed: u64) -> EndpointCloud {
    let cfg = SimConfig::new(q.clone(), t, 0.01, n, seed).unwrap();
    simulate_quotient_endpoints(&cfg, QuotientMode::Projected).unwrap()
}

fn group_cloud(g: &GroupModel, n: usize, seed: u64) -> EndpointCloud {
    simulate_group_endpoints(&SimConfig::new(g.clone(), 1.0, 0.01, n, seed).unwrap()).unwrap()
}

#[test]
fn grushin_energy_of_v_is_t() {
    let q = QuotientModel::grushin();
    let cfg = SimConfig::new(q.clone(), 1.0, 0.01, 40_000, 3).unwrap();
    let cloud = simulate_quotient_endpoints(&cfg, QuotientMode::Intrinsic).unwrap();
    let f = library::lookup(&q.into(), "coord_v").unwrap();
    let e = estimate_energy(&f, &cloud).unwrap();
    assert!(e.within(1.0, 3.0, 0.0), "{e:?}");
}

/// Analytic and finite-difference energies agree to 1e-3 relative for every
/// shipped function, on every space.
#[test]
fn analytic_and_finite_difference_energy_agree() {
    let spaces: Vec<(SpaceModel, EndpointCloud)> = vec![
        (GroupModel::heisenberg().into(), group_cloud(&GroupModel::heisenberg(), 2000, 1)),
        (GroupModel::su2().into(), group_cloud(&GroupModel::su2(), 2000, 2)),
        (QuotientModel::real_line().into(), projected(&QuotientModel::real_line(), 1.0, 2000, 3)),
        (QuotientModel::grushin().into(), projected(&QuotientModel::grushin(), 1.0, 2000, 4)),
        (
            QuotientModel::compact_heis(1.0).unwrap().into(),
            projected(&QuotientModel::compact_heis(1.0).unwrap(), 1.0, 2000, 5),
        ),
    ];
    for (space, cloud) in spaces {
        for f in library::catalog(&space) {
            let a = estimate_energy_with(&f, &cloud, DerivativeMode::Auto).unwrap().value;
            let b = estimate_energy_with(&f, &cloud, DerivativeMode::FiniteDifference(1e-5)).unwrap().value;
            assert!((a - b).abs() <= 1e-3 * a.abs().max(1e-12), "{} {}: {a} vs {b}", space.name(), f.id());
        }
    }
}

#[test]
fn entropy_nonnegative_up_to_noise() {
    let qs = [
        QuotientModel::real_line(),
        QuotientModel::grushin(),
        QuotientModel::hopf(),
        QuotientModel::so3(),
        QuotientModel::so4(),
        QuotientModel::nonisotropic(vec![1.0, 3.0]).unwrap(),
        QuotientModel::compact_heis(2.0).unwrap(),
    ];
    for q in qs {
        let cloud = projected(&q, 0.5, 1000, 9);
        for f in library::catalog(&q.clone().into()) {
            let e = estimate_entropy(&f, &cloud).unwrap();
            assert!(e.value >= -3.0 * e.std_error - 1e-12, "{} {}: {e:?}", q.name(), f.id());
        }
    }
}

/// Each quotient function satisfies the bound with the largest ratio seen on
/// the lifted family over the group.
#[test]
fn quotient_bound_by_group_family_ratio() {
    for q in [QuotientModel::real_line(), QuotientModel::grushin(), QuotientModel::hopf()] {
        let space: SpaceModel = q.clone().into();
        for t in [0.5, 1.0] {
            let g = simulate_group_endpoints(&SimConfig::new(q.base().clone(), t, 0.01, 5000, 21).unwrap()).unwrap();
            let m = projected(&q, t, 5000, 22);
            let family: Vec<_> = library::catalog(&space).into_iter().filter(|f| f.id() != "const").collect();
            // Largest observed ratio on G and its standard error.
            let (mut c_g, mut c_se) = (0.0f64, 0.0f64);
            for f in &family {
                match lsi_ratio(&lift(f, &q).unwrap(), &g, None) {
                    Ok(r) if r.ratio.value > c_g => (c_g, c_se) = (r.ratio.value, r.ratio.std_error),
                    Ok(_) => {}
                    Err(Error::IndeterminateRatio(_)) => {}
                    Err(e) => panic!("{e}"),
                }
            }
            assert!(c_g > 0.0);
            for f in &family {
                let ent = estimate_entropy(f, &m).unwrap();
                let en = estimate_energy(f, &m).unwrap();
                let se = ent.std_error.hypot(c_g * en.std_error).hypot(en.value * c_se);
                assert!(ent.value <= c_g * en.value + 3.0 * se, "{} {} t={t}: cg={c_g} ent={ent:?} en={en:?} r={}", q.name(), f.id(), ent.value / en.value);
            }
        }
    }
}

