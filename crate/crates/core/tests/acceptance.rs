//! One PASS/FAIL line per acceptance criterion.
//!
//! Exits 0 regardless of the outcome so that the workspace test run stays
//! green; set `RDMIX_ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.

use std::time::Instant;

use num_rational::Rational64;

use rdmix::diagnostics::{mass_balance_residual, max_normal_jump, FieldView};
use rdmix::driver::{
    convergence_study, presets, run_with, Config, Event, MeshConfig, ModelConfig, Record, Setup, StudyMode, StudyRow,
};
use rdmix::imex::{scheme_coefficients, shift, Scheme};
use rdmix::models::{
    integrate_homogeneous, potential_map, segregation_matrix, time_from_ms, time_map, ManufacturedCase, Model, Profile,
    TimeProfile,
};
use rdmix::adaptivity::AdaptParams;
use rdmix::mesh::Diagonal;
use rdmix::problem::{BoundaryCondition, BoundaryValue};

type Outcome = (bool, String);

fn observe(cfg: &Config, mut f: impl FnMut(Event<'_, '_>)) -> Result<Vec<Record>, String> {
    let setup = Setup::new(cfg).map_err(|e| e.to_string())?;
    let mut records = Vec::new();
    run_with(cfg, &setup, |e| {
        if let Event::Record(_, r) = &e {
            records.push((*r).clone());
        }
        f(e);
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    Ok(records)
}

fn records(cfg: &Config) -> Result<Vec<Record>, String> {
    observe(cfg, |_| {})
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn patch_test() -> Result<Outcome, String> {
    let mut worst: f64 = 0.0;
    for nx in [1, 2] {
        for k in 1..=3 {
            let mut c = presets::smooth(nx, k);
            c.mesh = MeshConfig::Structured {
                nx,
                ny: nx,
                bbox: [-0.5, -0.25, 0.75, 1.0],
                diagonal: Diagonal::Right,
            };
            c.model = ModelConfig::Manufactured {
                case: ManufacturedCase {
                    profile: Profile::Polynomial { degree: k },
                    time: TimeProfile::Steady,
                    d: 0.7,
                },
            };
            c.time.t_end = 0.3;
            c.output.estimate = false;
            for r in records(&c)? {
                worst = worst.max(r.mass_l2.unwrap());
            }
        }
    }
    Ok((worst <= 1e-9, format!("max mass L2 error {worst:.2e} over k = 1..3, 2 and 8 elements (tol 1e-9)")))
}

fn spatial_rows() -> Result<Vec<Vec<StudyRow>>, String> {
    (1..=3)
        .map(|k| convergence_study(&presets::smooth(5, k), 4, StudyMode::Mesh).map_err(|e| e.to_string()))
        .collect()
}

fn spatial(rows: &[Vec<StudyRow>]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let k = (i + 1) as f64;
        let last = r.last().unwrap();
        let (sm, sc) = (last.slope_mass.unwrap(), last.slope_combined.unwrap());
        ok &= (sm - (k + 1.0)).abs() <= 0.2 && (sc - (k + 1.0)).abs() <= 0.3;
        parts.push(format!("k={k}: mass {sm:.2}, combined {sc:.2}"));
    }
    (ok, format!("{} (targets k+1 +- 0.2 / 0.3)", parts.join("; ")))
}

fn temporal() -> Result<Outcome, String> {
    let mut ok = true;
    let mut parts = Vec::new();
    for s in Scheme::ALL {
        let mut c = presets::smooth(2, 2);
        c.model = ModelConfig::Manufactured {
            case: ManufacturedCase {
                profile: Profile::Polynomial { degree: 2 },
                time: TimeProfile::Oscillating { omega: 2.0 },
                d: 0.01,
            },
        };
        c.boundary.default = Some(BoundaryCondition::Natural(BoundaryValue::Exact));
        c.time.scheme = s;
        c.time.dt = 0.2;
        c.time.t_end = 2.0;
        let rows = convergence_study(&c, 5, StudyMode::Dt).map_err(|e| e.to_string())?;
        let p = rows.last().unwrap().slope_mass.unwrap();
        let (target, tol) = if s == Scheme::Bdf3 { (3.0, 0.25) } else { (2.0, 0.1) };
        ok &= (p - target).abs() <= tol;
        parts.push(format!("{s} {p:.3}"));
    }
    Ok((ok, format!("mass L2 slopes {}", parts.join(", "))))
}

fn conservation() -> Result<Outcome, String> {
    let mut c = presets::checkerboard(20);
    c.output.cadence = 1;
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    observe(&c, |e| {
        if let Event::Record(sim, r) = e {
            if r.step > 0 {
                worst = worst.max(mass_balance_residual(sim).unwrap());
                steps += 1;
            }
        }
    })?;
    c.model = ModelConfig::Zero { species: 1 };
    let rec = records(&c)?;
    let m0 = rec[0].mass_total;
    let drift = rec.iter().map(|r| rel(r.mass_total, m0)).fold(0.0, f64::max);
    Ok((
        worst <= 1e-8 && drift <= 1e-8,
        format!("element balance {worst:.2e} over {steps} steps, drift with f = 0 {drift:.2e} (tol 1e-8)"),
    ))
}

#[derive(Clone)]
struct BumpRuns {
    uniform: Vec<Record>,
    adaptive: Vec<Record>,
    invariants: Vec<bool>,
    jump: f64,
    orders: (usize, usize),
}

fn bump_runs() -> Result<BumpRuns, String> {
    let mut u = presets::bump(8, 4, None);
    u.output.cadence = 5;
    let uniform = records(&u)?;
    let mut c = presets::bump(
        8,
        1,
        Some(AdaptParams {
            theta_max: 0.8,
            theta_min: 0.02,
            ..AdaptParams::default()
        }),
    );
    c.output.cadence = 5;
    let mut invariants = Vec::new();
    let mut jump: f64 = 0.0;
    let mut orders = (usize::MAX, 0);
    let mut check = |sim: &rdmix::imex::Simulation<'_>| {
        let d = sim.discretization();
        for h in &sim.current().h {
            jump = jump.max(max_normal_jump(&sim.problem().mesh, &d.orders, &d.dofs, h).unwrap());
        }
    };
    let adaptive = observe(&c, |e| match e {
        Event::Record(sim, r) => {
            check(sim);
            orders = (orders.0.min(r.k_min), orders.1.max(r.k_max));
        }
        Event::Adapted(sim, a) => {
            check(sim);
            invariants.push(a.invariants_ok);
        }
    })?;
    Ok(BumpRuns {
        uniform,
        adaptive,
        invariants,
        jump,
        orders,
    })
}

fn conformity(b: &BumpRuns) -> Outcome {
    (
        b.jump <= 1e-10 && b.orders.0 == 1 && b.orders.1 >= 6,
        format!(
            "max normal-trace jump {:.2e} (tol 1e-10), orders {}..{} on the adaptive bump run",
            b.jump, b.orders.0, b.orders.1
        ),
    )
}

fn estimator(rows: &[Vec<StudyRow>]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let eff: Vec<f64> = r.iter().map(|x| x.eta / x.energy).collect();
        let lo = eff.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eff.iter().copied().fold(0.0, f64::max);
        let monotone = r.windows(2).all(|w| w[1].eta < w[0].eta);
        ok &= hi / lo <= 10.0 && monotone;
        parts.push(format!("k={}: [{lo:.3}, {hi:.3}] ratio {:.1}{}", i + 1, hi / lo, if monotone { "" } else { " eta not monotone" }));
    }
    let saturated = rows.windows(2).all(|p| p[0].iter().zip(&p[1]).all(|(a, b)| b.energy < a.energy && b.mass_l2 < a.mass_l2));
    ok &= saturated;
    (
        ok,
        format!("effectivity {}; order k+1 beats order k on every mesh: {saturated}", parts.join("; ")),
    )
}

fn adaptivity(b: &BumpRuns) -> Outcome {
    let u = b.uniform.last().unwrap();
    let (ue, um) = (u.energy.unwrap(), u.mass_l2.unwrap());
    let hit = b.adaptive.iter().filter(|r| r.step > 0).find(|r| {
        b.uniform.iter().find(|x| x.step == r.step).is_some_and(|x| {
            r.n_dofs < x.n_dofs && r.mass_l2.unwrap() <= x.mass_l2.unwrap() && r.energy.unwrap() <= x.energy.unwrap()
        })
    });
    let inv = !b.invariants.is_empty() && b.invariants.iter().all(|&x| x);
    let detail = match hit {
        Some(r) => format!(
            "adaptive step {} with {} dofs: mass {:.3e}, energy {:.3e} (uniform at the same step)",
            r.step,
            r.n_dofs,
            r.mass_l2.unwrap(),
            r.energy.unwrap()
        ),
        None => "adaptive run never reaches the uniform errors".to_string(),
    };
    (
        hit.is_some() && inv,
        format!(
            "uniform order 4: {} dofs, final mass {um:.3e}, energy {ue:.3e}; {detail}; invariants hold at {} of {} adaptations",
            u.n_dofs,
            b.invariants.iter().filter(|&&x| x).count(),
            b.invariants.len()
        ),
    )
}

fn corner_jumps(nx: usize) -> Result<[f64; 2], String> {
    let c = presets::checkerboard(nx);
    let end = (c.time.t_end / c.time.dt).round() as usize;
    let mut out = [f64::NAN; 2];
    observe(&c, |e| {
        if let Event::Record(sim, r) = e {
            if r.step == end {
                let f = FieldView::of(sim, 0);
                let d = 1e-7;
                for (i, p) in [0.2, 0.6].into_iter().enumerate() {
                    out[i] = f.value([p - d, p - d]).unwrap() - f.value([p + d, p + d]).unwrap();
                }
            }
        }
    })?;
    Ok(out)
}

fn discontinuity() -> Result<Outcome, String> {
    let a = corner_jumps(20)?;
    let b = corner_jumps(40)?;
    let d = [rel(a[0], b[0]), rel(a[1], b[1])];
    Ok((
        d[0] <= 0.05 && d[1] <= 0.05,
        format!(
            "jump at (0.2,0.2): {:.4} vs {:.4} ({:.1}%), at (0.6,0.6): {:.4} vs {:.4} ({:.1}%) for h = 1/10, 1/20 (tol 5%)",
            a[0],
            b[0],
            100.0 * d[0],
            a[1],
            b[1],
            100.0 * d[1]
        ),
    ))
}

/// Least-squares slope of position against time over the second half of the run.
fn fit_speed(w: &[(f64, f64)]) -> f64 {
    let half = w.last().unwrap().0 / 2.0;
    let p: Vec<_> = w.iter().filter(|p| p.0 >= half && p.1.is_finite()).collect();
    let n = p.len() as f64;
    let (mt, mx) = (p.iter().map(|p| p.0).sum::<f64>() / n, p.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = p.iter().map(|p| (p.0 - mt) * (p.1 - mx)).sum();
    let sxx: f64 = p.iter().map(|p| (p.0 - mt).powi(2)).sum();
    sxy / sxx
}

fn wave() -> Result<Outcome, String> {
    let mut fronts = Vec::new();
    for level in 0..3 {
        let rec = records(&presets::wave(level))?;
        let w: Vec<(f64, f64)> = rec.iter().map(|r| (r.time, r.wavefront.unwrap_or(f64::NAN))).collect();
        fronts.push(w);
    }
    let at = |w: &[(f64, f64)], t: f64| w.iter().find(|p| (p.0 - t).abs() < 1e-9).map(|p| p.1).unwrap_or(f64::NAN);
    let times = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
    let diff = times.iter().map(|&t| rel(at(&fronts[1], t), at(&fronts[2], t))).fold(0.0, f64::max);
    let monotone = fronts
        .iter()
        .all(|w| w.iter().filter(|p| p.0 >= 1.0).collect::<Vec<_>>().windows(2).all(|p| p[1].1 >= p[0].1));
    let speed: Vec<f64> = fronts.iter().map(|w| fit_speed(w)).collect();
    let stable = rel(speed[0], speed[1]) <= 0.02 && rel(speed[1], speed[2]) <= 0.02;
    Ok((
        diff <= 0.02 && monotone && stable,
        format!(
            "max front difference {:.2}% at t = 2..7 (tol 2%), monotone after t = 1: {monotone}, speeds over the second half {:.4} {:.4} {:.4} (successive tol 2%)",
            100.0 * diff,
            speed[0],
            speed[1],
            speed[2]
        ),
    ))
}

fn fixed_points() -> Result<Outcome, String> {
    let model = Model::competition(segregation_matrix()).map_err(|e| e.to_string())?;
    let m = integrate_homogeneous(&model, &[0.9, 0.05, 0.05], 0.01, 3000).map_err(|e| e.to_string())?;
    let err = (m[0] - 1.0).abs().max(m[1].abs()).max(m[2].abs());
    let maps = potential_map(0.0) == -80.0 && potential_map(1.0) == 20.0;
    Ok((
        err <= 1e-6 && maps,
        format!("distance to (1,0,0) at t = 30: {err:.2e} (tol 1e-6); E(0) = {}, E(1) = {}", potential_map(0.0), potential_map(1.0)),
    ))
}

fn tables() -> Outcome {
    let q = |n: i64, d: i64| Rational64::new(n, d);
    let expected: [(Scheme, Vec<Rational64>, Vec<Rational64>, Vec<Rational64>); 4] = [
        (
            Scheme::Bdf2,
            vec![q(1, 2), q(-2, 1), q(3, 2)],
            vec![q(0, 1), q(0, 1), q(1, 1)],
            vec![q(-1, 1), q(2, 1)],
        ),
        (
            Scheme::Bdf3,
            vec![q(1, 24), q(-1, 8), q(-7, 8), q(23, 24)],
            vec![q(1, 16), q(-5, 16), q(15, 16), q(5, 16)],
            vec![q(3, 8), q(-5, 4), q(15, 8)],
        ),
        (
            Scheme::Cnab,
            vec![q(0, 1), q(-1, 1), q(1, 1)],
            vec![q(0, 1), q(1, 2), q(1, 2)],
            vec![q(-1, 2), q(3, 2)],
        ),
        (
            Scheme::Ark2,
            vec![q(-1, 1), q(0, 1), q(1, 1)],
            vec![q(1, 1), q(0, 1), q(1, 1)],
            vec![q(0, 1), q(2, 1)],
        ),
    ];
    let mismatched: Vec<&str> = expected
        .iter()
        .filter(|(s, a, b, g)| {
            let c = scheme_coefficients(*s);
            c.alpha != *a || c.beta != *b || c.gamma != *g
        })
        .map(|(s, ..)| s.name())
        .collect();
    let sigma = shift(&scheme_coefficients(Scheme::Bdf2), 0.1);
    (
        mismatched.is_empty() && (sigma - 15.0).abs() <= 1e-12,
        format!("mismatched tables: {mismatched:?}; sigma(bdf2, 0.1) = {sigma}"),
    )
}

fn cyclic() -> Result<String, String> {
    let c = presets::cyclic();
    let end = (c.time.t_end / c.time.dt).round() as usize;
    let mut var = Vec::new();
    let rec = observe(&c, |e| {
        if let Event::Record(sim, r) = e {
            if r.step == end {
                for sp in 0..3 {
                    let f = FieldView::of(sim, sp);
                    let v: Vec<f64> = (0..41 * 41)
                        .map(|i| f.value([-1.0 + 0.05 * (i % 41) as f64, -1.0 + 0.05 * (i / 41) as f64]).unwrap())
                        .collect();
                    let mean = v.iter().sum::<f64>() / v.len() as f64;
                    var.push(v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64);
                }
            }
        }
    })?;
    let last = rec.last().unwrap();
    let lo = rec.iter().map(|r| r.m_min).fold(f64::INFINITY, f64::min);
    let hi = rec.iter().map(|r| r.m_max).fold(f64::NEG_INFINITY, f64::max);
    let vmin = var.iter().copied().fold(f64::INFINITY, f64::min);
    if last.step == end && lo > -0.5 && hi < 1.5 && vmin > 1e-4 {
        Ok(format!("cyclic: {end} steps, m in [{lo:.3}, {hi:.3}], min species variance {vmin:.2e}"))
    } else {
        Err(format!(
            "cyclic: {} of {end} steps, m in [{lo:.3}, {hi:.3}], min species variance {vmin:.2e}",
            last.step
        ))
    }
}

fn activity(stimulus: bool) -> Result<(f64, f64), String> {
    let mut c = presets::aliev_panfilov(presets::AP_DIFFUSIVITY);
    if !stimulus {
        if let ModelConfig::AlievPanfilov { stimuli, .. } = &mut c.model {
            stimuli.clear();
        }
    }
    let after = time_from_ms(presets::AP_STIMULUS_MS[1] + 300.0);
    let rec = records(&c)?;
    let late = rec.iter().filter(|r| r.time >= after - 1e-9).map(|r| r.m_max).fold(f64::INFINITY, f64::min);
    Ok((late, time_map(rec.last().unwrap().time)))
}

fn qualitative() -> Result<Outcome, String> {
    let cyc = cyclic();
    let (with, t_end) = activity(true)?;
    let (without, _) = activity(false)?;
    let reentry = with > 0.5 && without < 0.05;
    let ap = format!(
        "Aliev-Panfilov: min over t >= 875 ms of max m = {with:.3} with stimulus, {without:.3} without (run to {t_end:.0} ms)"
    );
    Ok(match cyc {
        Ok(s) => (reentry, format!("{s}; {ap}")),
        Err(s) => (false, format!("{s}; {ap}")),
    })
}

fn main() {
    let strict = std::env::var("RDMIX_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let only: Option<Vec<usize>> = std::env::var("RDMIX_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let want = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let (mut run, mut failed) = (0, 0);
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Result<Outcome, String>| {
        if !want(n) {
            return;
        }
        let t = Instant::now();
        let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        run += 1;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    };

    let mut rows = None;
    let mut spatial_cached = || rows.get_or_insert_with(spatial_rows).clone();
    report(1, "exactness patch test", &mut patch_test);
    report(2, "spatial convergence", &mut || spatial_cached().map(|r| spatial(&r)));
    report(3, "temporal convergence", &mut temporal);
    report(4, "local conservation", &mut conservation);
    let mut bump = None;
    let mut bump_cached = || bump.get_or_insert_with(bump_runs).clone();
    report(5, "H(div) conformity", &mut || bump_cached().map(|b| conformity(&b)));
    report(6, "estimator sanity", &mut || spatial_cached().map(|r| estimator(&r)));
    report(7, "adaptivity beats uniform", &mut || bump_cached().map(|b| adaptivity(&b)));
    report(8, "discontinuity capture", &mut discontinuity);
    report(9, "travelling-wave speed", &mut wave);
    report(10, "kinetics fixed points", &mut fixed_points);
    report(11, "scheme tables", &mut || Ok(tables()));
    report(12, "qualitative dynamics", &mut qualitative);

    println!("{} of {run} criteria pass", run - failed);
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
