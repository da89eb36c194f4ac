//! Acceptance suite: one PASS/FAIL line per criterion; nonzero exit if any
//! criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use srlb_cli::run_with;
use srlb_core::groups::{exp_algebra, exp_step, inverse, multiply};
use srlb_core::lie::{bracket, check_step_two_subalgebra, hormander_flag};
use srlb_core::stats::{mean, moment_ci, variance};
use srlb_core::{
    simulate_group_endpoints, simulate_quotient_endpoints, simulate_refinement_ladder, AlgebraVector, GroupModel,
    GroupPoint, QuotientMode, QuotientModel, SimConfig, StructureConstants,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cli(args: &[&str]) -> (i32, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["srlb"];
    argv.extend_from_slice(args);
    let code = run_with(argv, &mut out, &mut err);
    let mut text = String::from_utf8(out).unwrap_or_default();
    if code != 0 {
        text.push_str(&String::from_utf8_lossy(&err));
    }
    (code, text)
}

fn reports(text: &str) -> Vec<Value> {
    text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect()
}

fn e(i: usize) -> AlgebraVector {
    AlgebraVector::basis(3, i)
}

fn algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for sc in [StructureConstants::heisenberg(), StructureConstants::su2()] {
        worst = worst.max(sc.antisymmetry_defect()).max(sc.jacobi_defect());
        for _ in 0..1000 {
            let mut v = || AlgebraVector::new((0..3).map(|_| rng.random_range(-1.0..1.0)).collect());
            let (a, b, c) = (v(), v(), v());
            let ab = bracket(&a, &b, &sc).unwrap();
            let ba = bracket(&b, &a, &sc).unwrap();
            worst = worst.max(ab.add(&ba).norm());
            let j = bracket(&a, &bracket(&b, &c, &sc).unwrap(), &sc)
                .unwrap()
                .add(&bracket(&b, &bracket(&c, &a, &sc).unwrap(), &sc).unwrap())
                .add(&bracket(&c, &bracket(&a, &b, &sc).unwrap(), &sc).unwrap());
            worst = worst.max(j.norm());
        }
    }
    let flags_ok = [GroupModel::heisenberg(), GroupModel::su2()].iter().all(|g| {
        let f = hormander_flag(g.frame(), g.structure_constants(), 3).unwrap();
        f.ranks == vec![2, 3] && f.satisfied_at == Some(2)
    });
    let sc = StructureConstants::heisenberg();
    let verdicts = [
        check_step_two_subalgebra(&[], &[e(2)], &sc).unwrap(),
        check_step_two_subalgebra(&[e(0)], &[], &sc).unwrap(),
        check_step_two_subalgebra(&[e(0), e(1)], &[], &sc).unwrap(),
    ];
    let pass = worst < 1e-12 && flags_ok && verdicts == [true, true, false];
    outcome(pass, format!("max defect {worst:.1e}, flags [2,3]@2: {flags_ok}, verdicts {verdicts:?}"))
}

fn max_abs_diff(a: &GroupPoint, b: &GroupPoint) -> f64 {
    a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn group_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let models = [
        GroupModel::heisenberg(),
        GroupModel::su2(),
        GroupModel::heisenberg_product(2).unwrap(),
        GroupModel::su2_product(2).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for m in &models {
        let dim = 3 * m.kind().factors();
        for _ in 0..10_000 {
            let mut p = || {
                let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
                exp_algebra(m, &v).unwrap()
            };
            let (a, b, c) = (p(), p(), p());
            let l = multiply(m, &multiply(m, &a, &b).unwrap(), &c).unwrap();
            let r = multiply(m, &a, &multiply(m, &b, &c).unwrap()).unwrap();
            worst = worst.max(max_abs_diff(&l, &r));
            let ai = multiply(m, &a, &inverse(m, &a).unwrap()).unwrap();
            let ia = multiply(m, &inverse(m, &a).unwrap(), &a).unwrap();
            worst = worst.max(max_abs_diff(&ai, &m.identity())).max(max_abs_diff(&ia, &m.identity()));
        }
    }
    let m = GroupModel::su2();
    let mut g = m.identity();
    let sh = 1e-3f64.sqrt();
    for _ in 0..1_000_000 {
        let (a, b) = (rng.random_range(-1.0..1.0) * sh, rng.random_range(-1.0..1.0) * sh);
        g = exp_step(&m, &g, &[a, b]).unwrap();
    }
    let drift = (g.as_su2().unwrap().norm_sqr().sqrt() - 1.0).abs();
    outcome(
        worst < 1e-10 && drift < 1e-6,
        format!("max group-law defect {worst:.1e}, SU(2) norm drift {drift:.1e}"),
    )
}

fn moment_oracles() -> Outcome {
    let (t, h, n) = (1.0f64, 1e-3, 100_000);
    let mut parts = Vec::new();
    let mut pass = true;
    let mut check = |name: &str, samples: Vec<f64>, oracle: f64, slack: f64| {
        let m = moment_ci(&samples, 1).unwrap();
        let ok = m.within(oracle, 3.0, slack);
        pass &= ok;
        parts.push(format!("{name} {:.5}±{:.5} vs {oracle:.5}", m.value, m.std_error));
    };
    let hc = simulate_group_endpoints(&SimConfig::new(GroupModel::heisenberg(), t, h, n, 31).unwrap()).unwrap();
    check("E[z²]", hc.column(2).iter().map(|z| z * z).collect(), t * t / 4.0, 0.0);
    let rl = simulate_quotient_endpoints(&SimConfig::new(QuotientModel::real_line(), t, h, n, 32).unwrap(), QuotientMode::Intrinsic).unwrap();
    let u = rl.column(0);
    let mu = mean(&u);
    check("Var[u]", u.iter().map(|x| (x - mu) * (x - mu)).collect(), t, 0.0);
    let gr = simulate_quotient_endpoints(&SimConfig::new(QuotientModel::grushin(), t, h, n, 33).unwrap(), QuotientMode::Intrinsic).unwrap();
    let v = gr.column(1);
    let mv = mean(&v);
    check("Var[v]", v.iter().map(|x| (x - mv) * (x - mv)).collect(), t * t / 2.0, 0.0);
    let su = simulate_group_endpoints(&SimConfig::new(GroupModel::su2(), t, h, n, 34).unwrap()).unwrap();
    check("E[Re Tr g]", su.column(0).iter().map(|a| 2.0 * a).collect(), 2.0 * (-t).exp(), 2e-3);
    outcome(pass, parts.join("; "))
}

fn gaussian_saturation() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for t in [0.25, 1.0] {
        for (fid, lambda) in [("exp_quarter", 0.5), ("exp_half", 1.0)] {
            let ts = t.to_string();
            // A single step is exact in law on the real line.
            let (code, out) = cli(&["lsi", "--model", "real_line", "--t", &ts, "--h", &ts, "--mode", "intrinsic", "--fn", fid, "--n-paths", "100000", "--seed", "41"]);
            let r = reports(&out);
            let ok = code == 0
                && r.len() == 1
                && r[0]["ci"][0].as_f64().unwrap_or(f64::NAN) <= 2.0 * t
                && 2.0 * t <= r[0]["ci"][1].as_f64().unwrap_or(f64::NAN);
            pass &= ok;
            let ratio = r.first().and_then(|v| v["ratio"]["value"].as_f64()).unwrap_or(f64::NAN);
            parts.push(format!("λ={lambda} t={t}: {ratio:.4}"));
        }
    }
    outcome(pass, format!("ratio CIs vs 2t: {}", parts.join(", ")))
}

fn transfer_identity() -> Outcome {
    let cases = [
        ("grushin", "const,coord_v,gauss_bump,osc_bump,mixed"),
        ("real_line", "coord,exp_quarter,exp_half,gauss_bump,osc_bump"),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (model, fns) in cases {
        let (code, out) = cli(&["transfer", "--model", model, "--fn", fns, "--n-paths", "50000", "--h", "1e-3", "--seed", "51"]);
        let r = reports(&out);
        let stat = r.iter().filter(|v| v["transfer"]["pass"] == true).count();
        let exact = r.iter().filter(|v| v["exact_on_shared_cloud"] == true).count();
        pass &= code == 0 && r.len() == 5 && stat == 5 && exact == 5;
        parts.push(format!("{model}: {stat}/5 within 3 SE, {exact}/5 bit-exact"));
    }
    outcome(pass, parts.join("; "))
}

fn pushforward_law() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (model, n) in [("grushin", "10000"), ("hopf", "20000"), ("so3", "20000"), ("so4", "20000")] {
        let (code, out) = cli(&["pushforward-test", "--model", model, "--n-paths", n, "--h", "1e-3", "--seed", "61"]);
        let r = reports(&out);
        pass &= code == 0 && !r.is_empty() && r.iter().all(|c| c["pass"] == true);
        let summary: Vec<String> = r
            .iter()
            .filter(|c| c["check"] != "moment")
            .map(|c| match c["test"]["p_value"].as_f64() {
                Some(p) => format!("{}[{}] p={p:.3}", c["check"].as_str().unwrap_or("?"), c["coordinate"]),
                None => format!("{} {:.1e}", c["check"].as_str().unwrap_or("?"), c["max_defect"].as_f64().unwrap_or(f64::NAN)),
            })
            .collect();
        parts.push(format!("{model}: {}", summary.join(" ")));
    }
    outcome(pass, parts.join("; "))
}

fn determinism() -> Outcome {
    let runs: [&[&str]; 4] = [
        &["simulate", "--model", "su2_product:2", "--n-paths", "500", "--h", "0.01", "--seed", "71"],
        &["lsi", "--model", "grushin", "--n-paths", "3000", "--h", "0.01", "--seed", "72"],
        &["transfer", "--model", "real_line", "--n-paths", "2000", "--h", "0.01", "--seed", "73"],
        &["pushforward-test", "--model", "so3", "--n-paths", "500", "--h", "0.01", "--seed", "74"],
    ];
    let mut same = 0;
    for args in runs {
        let mut a1 = args.to_vec();
        a1.extend(["--threads", "1"]);
        let mut a8 = args.to_vec();
        a8.extend(["--threads", "8"]);
        let (c1, o1) = cli(&a1);
        let (c8, o8) = cli(&a8);
        if c1 == c8 && !o1.is_empty() && o1.as_bytes() == o8.as_bytes() {
            same += 1;
        }
    }
    outcome(same == runs.len(), format!("{same}/{} commands byte-identical at 1 and 8 threads", runs.len()))
}

/// Coupled ladder at h ∈ {4e-3, 2e-3, 1e-3}. The limit is extrapolated from
/// the two finest rungs, so every bias is a paired difference whose noise is
/// far below that of the raw moments.
fn step_refinement() -> Outcome {
    let t = 1.0;
    let cfg = SimConfig::new(GroupModel::heisenberg(), t, 1e-3, 100_000, 81).unwrap();
    let clouds = simulate_refinement_ladder(&cfg, &[4, 2, 1]).unwrap();
    let z2: Vec<Vec<f64>> = clouds.iter().map(|c| c.column(2).iter().map(|z| z * z).collect()).collect();
    let n = z2[0].len();
    let combo = |w: [f64; 3]| -> (f64, f64) {
        let s: Vec<f64> = (0..n).map(|i| w[0] * z2[0][i] + w[1] * z2[1][i] + w[2] * z2[2][i]).collect();
        (mean(&s), (variance(&s) / n as f64).sqrt())
    };
    // m∞ = 2m₁ − m₂, so b₄ = m₄ + m₂ − 2m₁, b₂ = 2(m₂ − m₁), b₁ = m₂ − m₁.
    let b4 = combo([1.0, 1.0, -2.0]);
    let b2 = combo([0.0, 2.0, -2.0]);
    let b1 = combo([0.0, 1.0, -1.0]);
    let limit = combo([0.0, -1.0, 2.0]);
    let d42 = combo([1.0, -1.0, 0.0]);
    let d21 = combo([0.0, 1.0, -1.0]);
    let monotone = b4.0.abs() + 3.0 * d42.1 >= b2.0.abs() && b2.0.abs() + 3.0 * d21.1 >= b1.0.abs();
    let limit_ok = (limit.0 - t * t / 4.0).abs() <= 3.0 * limit.1;
    outcome(
        monotone && limit_ok,
        format!(
            "bias h=4e-3 {:.2e}±{:.1e}, 2e-3 {:.2e}±{:.1e}, 1e-3 {:.2e}±{:.1e}; extrapolated E[z²] {:.4}±{:.4}",
            b4.0, b4.1, b2.0, b2.1, b1.0, b1.1, limit.0, limit.1
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("algebra suite", algebra),
        ("group-law suite", group_law),
        ("moment oracles", moment_oracles),
        ("Gaussian log-Sobolev saturation", gaussian_saturation),
        ("transfer identity", transfer_identity),
        ("pushforward law", pushforward_law),
        ("determinism across worker counts", determinism),
        ("step refinement", step_refinement),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {} {tag}: {name} ({secs:.1}s) {}", i + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
