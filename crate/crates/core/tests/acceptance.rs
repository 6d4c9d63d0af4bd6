//! End-to-end acceptance checks. Runs as a plain binary so that each
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use elastinet::flow::{run, step, FlowState, SchemeConfig, Termination};
use elastinet::geometry::{CurveSample, EnergyParams, GridFunction, Vec2};
use elastinet::linear::ls::{ls_verify, symbol_roots, LS_THRESHOLD};
use elastinet::network::{
    build_reparametrization, image_distance, parametric_admissibility, End, Flavor, NetworkState, GRID_TOLERANCE,
};
use elastinet::scenario::{theta_degenerate, theta_warped, triod_perturbed, triod_straight, DEFAULT_AMPLITUDE};
use elastinet::velocity::{first_variation_oracle, motion_rhs};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn theta(n: usize) -> NetworkState {
    theta_warped(n, [0.0; 3]).unwrap()
}

fn params(mu: f64) -> EnergyParams {
    EnergyParams::new(mu).unwrap()
}

fn max_node_distance(a: &NetworkState, b: &NetworkState) -> f64 {
    a.curves()
        .iter()
        .zip(b.curves())
        .flat_map(|(c, d)| c.points().iter().zip(d.points()).map(|(p, q)| (p - q).norm()))
        .fold(0.0, f64::max)
}

fn advance(
    net: &NetworkState,
    p: &EnergyParams,
    flavor: Flavor,
    dt: f64,
    steps: usize,
) -> Result<NetworkState, String> {
    let mut state = FlowState::new(net.clone(), p).map_err(|e| e.to_string())?;
    for k in 0..steps {
        state = step(&state, dt, p, flavor).map_err(|e| format!("step {k}: {e}"))?.state;
    }
    Ok(state.net)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Every accepted step satisfies `E₁ ≤ E₀ + 1e-8 dt E(0)`.
fn energy_monotone() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    let cases = [
        ("theta-symmetric", theta(128), Flavor::C0, 2e-3, 1e-5),
        (
            "triod-perturbed",
            triod_perturbed(128, DEFAULT_AMPLITUDE).unwrap(),
            Flavor::C1,
            2e-2,
            1e-4,
        ),
    ];
    for (name, net, flavor, t_final, dt) in cases {
        let config = SchemeConfig {
            n: 128,
            dt_init: dt,
            t_final,
            ..SchemeConfig::default()
        };
        let p = params(1.0);
        let trace = run(&net, &config, &p, flavor).map_err(|e| format!("{name}: {e}"))?;
        let e0 = trace.initial_energy();
        let worst = trace
            .entries
            .windows(2)
            .map(|w| (w[1].energy - w[0].energy) / (w[1].dt * e0))
            .fold(f64::NEG_INFINITY, f64::max);
        let reached = trace.termination == Termination::TFinal;
        ok &= reached && worst <= 1e-8;
        parts.push(format!(
            "{name}: {} steps, max (E1-E0)/(dt E(0)) = {worst:.2e}, E {e0:.6} -> {:.6}",
            trace.entries.len() - 1,
            trace.final_energy()
        ));
        if !reached {
            parts.push(format!("{name} stopped early: {}", trace.termination.label()));
        }
    }
    check(ok, parts.join("; "))
}

/// The symmetric straight triod does not move.
fn stationary_triod() -> Outcome {
    let net = triod_straight(32).unwrap();
    let p = params(1.0);
    let mut worst_a = 0.0_f64;
    let mut worst_t = 0.0_f64;
    for c in net.curves() {
        let v = motion_rhs(c, &p).map_err(|e| e.to_string())?;
        worst_a = worst_a.max(v.a.max_norm());
        worst_t = worst_t.max(v.t.max_norm());
    }
    let config = SchemeConfig {
        n: 32,
        dt_init: 1e-2,
        t_final: 0.5,
        snapshot_every: 1,
        ..SchemeConfig::default()
    };
    let trace = run(&net, &config, &p, Flavor::C1).map_err(|e| e.to_string())?;
    let moved = trace
        .snapshots
        .iter()
        .chain(std::iter::once(&trace.final_state))
        .map(|s| max_node_distance(s, &net))
        .fold(0.0, f64::max);
    check(
        trace.termination == Termination::TFinal && moved <= 1e-8 && worst_a <= 1e-8 && worst_t <= 1e-8,
        format!("displacement {moved:.2e} over [0, 0.5], |A| {worst_a:.2e}, |T| {worst_t:.2e}"),
    )
}

/// Random perturbation that matches at the junctions and vanishes at fixed
/// triod endpoints.
fn random_psi(rng: &mut ChaCha8Rng, n: usize, fixed_one: bool) -> [GridFunction<Vec2>; 3] {
    let mut v = || Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let p0 = v();
    let p1 = if fixed_one { Vec2::zeros() } else { v() };
    let modes: [[Vec2; 4]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| v()));
    modes.map(|m| {
        GridFunction::sample(n, |x| {
            let mut s = p0 * (1.0 - x) + p1 * x;
            for (k, c) in m.iter().enumerate() {
                s += c * ((k + 1) as f64 * PI * x).sin();
            }
            s
        })
        .unwrap()
    })
}

/// Analytic first variation agrees with a central difference of the energy.
fn first_variation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 256;
    let cases = [(theta(n), false, 1.0), (triod_perturbed(n, 0.1).unwrap(), true, 0.5)];
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (net, fixed, mu) in &cases {
        for _ in 0..10 {
            let psi = random_psi(&mut rng, n, *fixed);
            let r = first_variation_oracle(net, &params(*mu), &psi, 1e-5).map_err(|e| e.to_string())?;
            worst = worst.max(r.relative_error());
            count += 1;
        }
    }
    check(
        worst <= 1e-4,
        format!("{count} perturbations at N={n}, max relative error {worst:.2e}"),
    )
}

/// `-Aν - Tτ` equals the parametric assembly node by node.
fn velocity_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let c: [f64; 6] = std::array::from_fn(|_| rng.random_range(-0.3..0.3));
        let mu = rng.random_range(0.0..2.0);
        let curve = CurveSample::sample(128, |x| {
            Vec2::new(
                x + c[0] * (PI * x).sin() + c[1] * (2.0 * PI * x).sin() + c[2] * x * x,
                c[3] * (PI * x).sin() + c[4] * (3.0 * PI * x).cos() + c[5] * x * x * x,
            )
        })
        .unwrap();
        let v = motion_rhs(&curve, &params(mu)).map_err(|e| e.to_string())?;
        let scale = v.lead.max_norm().max(v.remainder.max_norm()).max(1.0);
        for j in 0..=curve.n() {
            let d = (v.rhs[j] - (v.remainder[j] - v.lead[j])).norm() / scale;
            worst = worst.max(d);
        }
    }
    check(
        worst <= 1e-10,
        format!("20 random curves, max relative mismatch {worst:.2e}"),
    )
}

/// Complementing condition on admissible and degenerate networks, plus the
/// root count of the symbol.
fn lopatinskii_shapiro() -> Outcome {
    let p = params(1.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, net, flavor) in [
        ("theta-symmetric", theta(64), Flavor::C0),
        ("triod-straight", triod_straight(32).unwrap(), Flavor::C1),
        (
            "triod-perturbed",
            triod_perturbed(32, DEFAULT_AMPLITUDE).unwrap(),
            Flavor::C1,
        ),
    ] {
        let r = ls_verify(&net, &p, flavor).map_err(|e| e.to_string())?;
        ok &= r.pass && r.min_ratio > LS_THRESHOLD;
        parts.push(format!("{name} min ratio {:.2e}", r.min_ratio));
    }
    let degenerate = theta_degenerate(64, DEFAULT_AMPLITUDE).unwrap();
    let r = ls_verify(&degenerate, &p, Flavor::C0).map_err(|e| e.to_string())?;
    let deg = r.min_ratio_at(End::Zero).max(r.min_ratio_at(End::One));
    ok &= !r.pass && deg < 1e-10;
    parts.push(format!("theta-degenerate ratio {deg:.2e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = 0;
    for _ in 0..1000 {
        let modulus = 10f64.powf(rng.random_range(-4.0..4.0));
        let arg = rng.random_range(-0.5 * PI + 1e-9..0.5 * PI - 1e-9);
        let speed = rng.random_range(0.1..10.0);
        let roots = symbol_roots(Complex64::from_polar(modulus, arg), speed).map_err(|e| e.to_string())?;
        if roots.decaying_roots().len() != 2 {
            bad += 1;
        }
    }
    ok &= bad == 0;
    parts.push(format!("{bad}/1000 symbols without exactly two decaying roots"));
    check(ok, parts.join("; "))
}

/// Imposed rows hold to 1e-8; the nonlinear junction residuals at a fixed
/// time shrink under refinement.
fn residual_control() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let cases = [
        ("theta-symmetric", Flavor::C0, 64usize, 1e-4, 1e-2),
        ("triod-perturbed", Flavor::C1, 32usize, 1e-3, 0.05),
    ];
    for (name, flavor, n0, dt0, t) in cases {
        let mut imposed = 0.0_f64;
        let mut res = Vec::new();
        for level in 0..2 {
            let n = n0 << level;
            let dt = dt0 / (1 << level) as f64;
            let steps = (t / dt).round() as usize;
            let net = match flavor {
                Flavor::C0 => theta(n),
                Flavor::C1 => triod_perturbed(n, DEFAULT_AMPLITUDE).unwrap(),
            };
            let p = params(1.0);
            let mut state = FlowState::new(net, &p).map_err(|e| e.to_string())?;
            for k in 0..steps {
                let r = step(&state, dt, &p, flavor).map_err(|e| format!("{name} N={n} step {k}: {e}"))?;
                imposed = imposed.max(r.imposed_residual);
                state = r.state;
            }
            let c = state.monitor.csv_residuals();
            res.push((c[2], c[4]));
        }
        let ratio_k = res[0].0 / res[1].0;
        let ratio_3 = res[0].1 / res[1].1;
        let shrink = |r: f64, coarse: f64| r >= 3.0 || coarse <= 1e-12;
        ok &= imposed <= 1e-8 && shrink(ratio_k, res[0].0) && shrink(ratio_3, res[0].1);
        let describe = |label: &str, coarse: f64, fine: f64, ratio: f64| {
            if coarse <= 1e-12 {
                format!("{label} {coarse:.1e}->{fine:.1e} (held to roundoff)")
            } else {
                format!("{label} {coarse:.1e}->{fine:.1e} (x{ratio:.1})")
            }
        };
        parts.push(format!(
            "{name}: imposed {imposed:.1e}, {}, {}",
            describe("curvature", res[0].0, res[1].0, ratio_k),
            describe("third order", res[0].1, res[1].1, ratio_3)
        ));
    }
    check(ok, parts.join("; "))
}

/// Self-convergence in space at a fixed small step.
fn spatial_order() -> Outcome {
    let t = 0.1_f64;
    let dt = 1e-4;
    let steps = (t / dt).round() as usize;
    let p = params(1.0);
    let grids = [32usize, 64, 128];
    let mut finals = Vec::new();
    for n in grids {
        let net = triod_perturbed(n, DEFAULT_AMPLITUDE).unwrap();
        finals.push(advance(&net, &p, Flavor::C1, dt, steps)?);
    }
    // compare on the coarse nodes
    let diff = |a: &NetworkState, b: &NetworkState| {
        let stride = b.n() / a.n();
        a.curves()
            .iter()
            .zip(b.curves())
            .flat_map(|(c, d)| (0..=a.n()).map(move |j| (c.points()[j] - d.points()[j * stride]).norm()))
            .fold(0.0, f64::max)
    };
    let e1 = diff(&finals[0], &finals[1]);
    let e2 = diff(&finals[1], &finals[2]);
    let order = (e1 / e2).log2();
    check(
        order >= 1.7,
        format!("triod-perturbed at t={t}, dt={dt}: differences {e1:.2e}, {e2:.2e}, order {order:.2}"),
    )
}

/// Warped Thetas are reparametrized into admissible initial data with the
/// same image.
fn reparametrization() -> Outcome {
    let n = 128;
    let p = params(1.0);
    let warps = [
        [0.2, -0.1, 0.15],
        [0.05, 0.0, 0.0],
        [-0.2, 0.2, 0.1],
        [0.1, 0.1, 0.1],
        [0.0, -0.15, -0.2],
        [-0.1, 0.05, 0.2],
    ];
    let mut ok = true;
    let mut worst_res = 0.0_f64;
    let mut min_deriv = f64::INFINITY;
    let mut worst_dist = 0.0_f64;
    let h = 1.0 / n as f64;
    for eps in warps {
        let net = theta_warped(n, eps).unwrap();
        let map = build_reparametrization(&net, &p).map_err(|e| format!("{eps:?}: {e}"))?;
        let out = map.apply(&net).map_err(|e| e.to_string())?;
        let report = parametric_admissibility(&out, &p, Flavor::C0).with_tolerance(GRID_TOLERANCE);
        let res = report
            .residuals()
            .iter()
            .filter(|r| !r.name.starts_with("span") && r.name != "regularity")
            .map(|r| r.value)
            .fold(0.0, f64::max);
        let dist = (0..3)
            .map(|i| image_distance(net.curve(i), out.curve(i), 8))
            .fold(0.0, f64::max);
        ok &= report.pass() && map.min_derivative() > 0.0 && dist <= 10.0 * h * h;
        worst_res = worst_res.max(res);
        min_deriv = min_deriv.min(map.min_derivative());
        worst_dist = worst_dist.max(dist);
    }
    check(
        ok,
        format!(
            "{} warps at N={n}: max residual {worst_res:.2e}, min θ_x {min_deriv:.3}, max image distance {worst_dist:.2e} (10h² = {:.2e})",
            warps.len(),
            10.0 * h * h
        ),
    )
}

/// Steps commute with rigid motions and preserve the reflection symmetry.
fn equivariance() -> Outcome {
    let p = params(1.0);
    let angle = 0.7;
    let center = Vec2::new(0.3, -0.2);
    let shift = Vec2::new(1.5, 0.25);
    let mut worst = 0.0_f64;
    for (net, flavor, dt) in [
        (theta(64), Flavor::C0, 1e-5),
        (triod_perturbed(32, DEFAULT_AMPLITUDE).unwrap(), Flavor::C1, 1e-3),
    ] {
        let moved = net.rotate(angle, center).unwrap().translate(shift).unwrap();
        let a = advance(&net, &p, flavor, dt, 5)?
            .rotate(angle, center)
            .unwrap()
            .translate(shift)
            .unwrap();
        let b = advance(&moved, &p, flavor, dt, 5)?;
        worst = worst.max(max_node_distance(&a, &b));
    }
    let sym = advance(&theta(64), &p, Flavor::C0, 1e-5, 100)?;
    let mut asym = sym.curve(1).points().iter().map(|q| q.y.abs()).fold(0.0, f64::max);
    for (a, b) in sym.curve(0).points().iter().zip(sym.curve(2).points()) {
        asym = asym.max((a - Vec2::new(b.x, -b.y)).norm());
    }
    check(
        worst <= 1e-8 && asym <= 1e-8,
        format!("rigid-motion mismatch {worst:.2e}, reflection asymmetry after 100 steps {asym:.2e}"),
    )
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Identical invocations produce identical bytes.
fn cli_determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_elastinet");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let invocations: [&[&str]; 5] = [
        &["scenario", "theta-symmetric", "--grid", "64"],
        &["check", "triod-perturbed", "--grid", "32"],
        &["ls", "theta-symmetric", "--grid", "64"],
        &["reparam", "theta-symmetric", "--grid", "64", "--seed", "5"],
        &[
            "simulate",
            "theta-symmetric",
            "--grid",
            "64",
            "--t-final",
            "2e-4",
            "--dt",
            "2e-5",
            "--frames-every",
            "5",
        ],
    ];
    let mut files = 0;
    for (k, args) in invocations.iter().enumerate() {
        let mut results = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{k}-{rep}"));
            std::fs::create_dir_all(&out).unwrap();
            let mut cmd = Command::new(exe);
            cmd.args(*args);
            if args[0] == "simulate" {
                cmd.arg("--out").arg(&out);
            }
            let o = cmd.output().map_err(|e| e.to_string())?;
            if !o.status.success() {
                return Err(format!(
                    "{} exited with {:?}: {}",
                    args.join(" "),
                    o.status.code(),
                    String::from_utf8_lossy(&o.stderr)
                ));
            }
            results.push((o.stdout, read_tree(&out)));
        }
        if results[0] != results[1] {
            return Err(format!("output of `{}` differs between runs", args.join(" ")));
        }
        files += results[0].1.len();
    }
    Ok(format!(
        "{} commands run twice, stdout and {files} output files byte-identical",
        invocations.len()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("energy monotonicity", energy_monotone),
        ("stationary triod", stationary_triod),
        ("first variation", first_variation),
        ("velocity identity", velocity_identity),
        ("lopatinskii-shapiro", lopatinskii_shapiro),
        ("boundary residuals", residual_control),
        ("spatial convergence", spatial_order),
        ("reparametrization", reparametrization),
        ("equivariance", equivariance),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name} ({secs:.1}s): {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
