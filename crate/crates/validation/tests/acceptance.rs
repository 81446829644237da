//! Acceptance run: one PASS/FAIL line per criterion, with the measurements
//! behind it. Runs as a plain binary so the lines are never captured.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relspin::algebra::{anticommutator, dirac, Matrix4, Spinor4};
use relspin::app;
use relspin::dynamics::{
    default_ladder, pryce_zeeman_identity_residual, refinement_study, rhs, sample_states, source_breakdown, standard_battery,
    term_parities, total_j_identity, verify, zeeman_identity_residual, zero_field_reduction, Equation,
};
use relspin::fields::{Envelope, FieldModel};
use relspin::grid::{apply, gaussian_packet, Expr, GridSpec, LeafParity, PacketSpec, Projection, Space, SpinorField};
use relspin::hamiltonian::{build, build_free_dirac, HamiltonianId, NamedHamiltonian};
use relspin::operators::{energy_ep, operator_suite, Momentum3, PhysParams, SpinKind};
use relspin::propagate::{ehrenfest_residual, run, step, KrylovOptions, Method, RunSpec};
use relspin::scenario;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Prints an indented sub-line and returns `pass`.
fn sub(pass: bool, line: impl AsRef<str>) -> bool {
    println!("    [{}] {}", if pass { "ok" } else { "FAIL" }, line.as_ref());
    pass
}

fn params() -> PhysParams {
    PhysParams::electron_scaled()
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

fn b_model() -> FieldModel {
    FieldModel::UniformB { b0: [0.1, -0.2, 0.3], envelope: Envelope::Sinusoid { offset: 1.0, amplitude: 0.3, omega: 0.7, phase: 0.1 } }
}

fn pulsed_b() -> FieldModel {
    FieldModel::UniformB { b0: [0.05, 0.1, 0.2], envelope: Envelope::Sinusoid { offset: 1.0, amplitude: 0.3, omega: 0.7, phase: 0.1 } }
}

fn static_b(b: [f64; 3]) -> FieldModel {
    FieldModel::UniformB { b0: b, envelope: Envelope::Constant }
}

fn packet(grid: &GridSpec, k0: f64, width: f64, pol: [f64; 4], projection: Projection) -> SpinorField {
    let spec = PacketSpec { center: [0.0; 3], width: [width; 3], k0: [k0, 0.0, 0.0], polarization: Spinor4::from_re(pol), projection };
    gaussian_packet(grid, &spec, &params()).unwrap()
}

fn propagate(h: &NamedHamiltonian, method: &Method, mut psi: SpinorField, t0: f64, dt: f64, steps: usize) -> SpinorField {
    for n in 0..steps {
        psi = step(h, method, psi, t0 + n as f64 * dt, dt).unwrap();
    }
    psi
}

fn distance(a: &SpinorField, b: &SpinorField) -> f64 {
    a.to_space(Space::Momentum).sub(&b.to_space(Space::Momentum)).norm()
}

fn krylov() -> Method {
    Method::Krylov(KrylovOptions::default())
}

fn criterion_1() -> Outcome {
    let d = dirac();
    let one = Matrix4::identity();
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        worst = worst.max(anticommutator(&d.alpha[i], &d.beta).max_abs());
        for j in 0..3 {
            let want = if i == j { one * 2.0 } else { Matrix4::zero() };
            worst = worst.max((anticommutator(&d.alpha[i], &d.alpha[j]) - want).max_abs());
        }
    }
    worst = worst.max((d.beta * d.beta - one).max_abs());
    check(worst <= 1e-15, format!("max Clifford deviation {worst:.2e} (tol 1e-15)"))
}

fn criterion_2() -> Outcome {
    let mut pass = true;
    for (label, p, pmax) in [
        ("scaled electron, |p| ≤ 10", params(), 10.0),
        ("scaled electron, |p| ≤ 1000", params(), 1000.0),
        ("m0=1.3 c=2.1 e=0.7, |p| ≤ 10", PhysParams::new(1.3, 2.1, 0.7).unwrap(), 10.0),
    ] {
        let suite = operator_suite(1000, pmax, 0x0DD5, &p).unwrap();
        for k in &suite.kinds {
            let extra = k.prediction_error.map(|e| format!(", prediction error {e:.2e}")).unwrap_or_default();
            pass &= sub(
                k.passed,
                format!(
                    "{label}: {:<5} su2 {:.2e} spectrum {:.2e} [S,H] {:.2e}{extra}",
                    k.kind.name(),
                    k.su2,
                    k.spectrum,
                    k.free_commutation
                ),
            );
        }
    }
    check(pass, "1000 momenta per set; FW/Pryce ≤ 1e-12, Dirac commutator matches 2c·|p_⊥| within 1e-10")
}

fn criterion_3() -> Outcome {
    let p = params();
    let battery = standard_battery();
    let ladder = default_ladder();
    let mut pass = true;
    for kind in [SpinKind::Fw, SpinKind::Pryce] {
        let mut levels = Vec::new();
        for grid in &ladder {
            let states = sample_states(grid, &battery, &p).unwrap();
            levels.push(max_of(total_j_identity(kind, &p, &states).unwrap().into_iter().flatten()));
        }
        let within = levels.iter().all(|&r| r <= 1e-6);
        let decreasing = levels.windows(2).all(|w| w[1] <= w[0] * 1.01 || w[1] <= 1e-12);
        let table: Vec<String> = levels.iter().zip(&ladder).map(|(r, g)| format!("{}³: {r:.2e}", g.n[0])).collect();
        pass &= sub(within && decreasing, format!("{:<5} ‖(J − L − Σ/2)ψ‖/‖ψ‖  {}", kind.name(), table.join("  ")));
    }
    check(pass, "total angular momentum identity ≤ 1e-6 and non-increasing under refinement")
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0B);
    let mut fields: Vec<[f64; 3]> = vec![[0.0, 0.0, 1.0], [1e-3, -2e-3, 5e-4], [3.0, -4.0, 12.0]];
    fields.extend((0..200).map(|_| [0; 3].map(|_| rng.gen_range(-10.0..10.0))));
    let mut pass = true;
    for (label, p) in [("scaled electron", params()), ("m0=1.3 c=2.1 e=0.7", PhysParams::new(1.3, 2.1, 0.7).unwrap())] {
        let z = max_of(fields.iter().map(|b| zeeman_identity_residual(*b, &p)));
        let y = max_of(fields.iter().map(|b| pryce_zeeman_identity_residual(*b, &p)));
        pass &= sub(z <= 1e-13 && y <= 1e-13, format!("{label}: Σ/2 Zeeman {z:.2e}, Pryce leading term {y:.2e}"));
    }
    check(pass, format!("{} fields with |B_i| ≤ 10, tol 1e-13", fields.len()))
}

fn criterion_5() -> Outcome {
    let p = params();
    let battery = standard_battery();
    let grid = GridSpec::cube(32, 32.0).unwrap();
    let states = sample_states(&grid, &battery, &p).unwrap();
    let free = build_free_dirac(&p);
    let mut pass = true;
    for kind in SpinKind::ALL {
        let r = verify(kind, &free, &battery, &states, 0.0).unwrap();
        pass &= sub(r.max_residual <= 1e-8, format!("{:<5} free equation, max residual {:.2e}", kind.name(), r.max_residual));
    }
    check(pass, "battery of 6 packets on 32³, tol 1e-8")
}

fn criterion_6() -> Outcome {
    let p = params();
    let battery = standard_battery();
    let ladder = default_ladder();
    let coarse = ladder[0];
    let coarse_states = sample_states(&coarse, &battery, &p).unwrap();
    let model = b_model();
    let t = 0.4;
    let equations = [Equation::FwEm, Equation::PryceEm, Equation::FwDirect, Equation::PryceDirect];
    let (mut reduce_ok, mut study_ok) = (true, true);
    for eq in equations {
        let (kind, id) = (eq.kind(), eq.hamiltonian());
        println!("  {eq}:");

        let z = zero_field_reduction(kind, id, &p, &coarse_states).unwrap();
        reduce_ok &= sub(
            z.reduces(1e-8),
            format!(
                "(a) zero field: printed-equation consistency {:.2e}, deviation from free Dirac {:.2e}; vanishing {} terms, surviving {:?}",
                z.consistency,
                z.free_deviation,
                z.vanishing_terms.len(),
                z.surviving_terms
            ),
        );

        let h = build(id, &model, &p, None, false).unwrap();
        let started = Instant::now();
        let study = refinement_study(kind, &h, &battery, &ladder, t).unwrap();
        println!("        refinement ({:.0} s):", started.elapsed().as_secs_f64());
        let names: Vec<&String> = study.rows[0].groups.keys().collect();
        println!("          {:<12} {:>10}  {}", "grid", "total", names.iter().map(|n| format!("{n:>26}")).collect::<String>());
        for row in &study.rows {
            let cells: String = names.iter().map(|n| format!("{:>15.3e} ({:>8.2e})", row.groups[*n], row.field_groups[*n])).collect();
            println!("          {:<12} {:>10.3e}  {cells}", format!("{}³/L={}", row.n[0], row.l[0]), row.total);
        }
        println!("          (group residual, field-induced part in parentheses)");
        for (g, c) in &study.groups {
            println!("          group {g:<16} {c:<15} field part {}", study.field_groups[g]);
        }
        for term in &study.terms {
            println!("          term  {:<28} {:<15} ‖term ψ‖ {:.3e}", term.name, term.classification.name(), term.norm);
        }

        // Reproducibility: the coarse level recomputed twice must match the
        // study bit for bit, so the classification is a function of the input.
        let again = verify(kind, &h, &battery, &coarse_states, t).unwrap();
        let twice = verify(kind, &h, &battery, &coarse_states, t).unwrap();
        let same = serde_json::to_string(&again).unwrap() == serde_json::to_string(&twice).unwrap()
            && again.max_residual.to_bits() == study.rows[0].total.to_bits()
            && again.groups.iter().all(|g| g.max_residual.to_bits() == study.rows[0].groups[&g.name].to_bits());
        let classified = study.terms.len() == rhs(kind, id, &model, &p).unwrap().terms.len();
        study_ok &= sub(
            same && classified,
            format!(
                "(b) classification {} over {} levels; {} terms classified; coarse level reproduced bit-exactly: {same}; offending terms {:?}",
                study.classification,
                study.rows.len(),
                study.terms.len(),
                study.offending_terms()
            ),
        );

        if id == HamiltonianId::Direct {
            println!("        per-source breakdown on {}³:", coarse.n[0]);
            for s in source_breakdown(kind, &h, &battery, &coarse_states, t).unwrap() {
                if s.lhs_norm > 0.0 || s.residual > 1e-8 {
                    println!(
                        "          {:<14} × {:<12} residual {:>9.3e}  (‖lhs‖ {:.3e})  {:?}",
                        s.source, s.group, s.residual, s.lhs_norm, s.terms
                    );
                }
            }
        }
    }
    check(
        reduce_ok && study_ok,
        format!("(a) zero-field reduction ≤ 1e-8: {}; (b) reproducible per-term classification: {}", verdict(reduce_ok), verdict(study_ok)),
    )
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

fn criterion_7() -> Outcome {
    let p = params();
    let model = b_model();
    let d = dirac();
    let one = Matrix4::identity();
    let upper = Expr::constant((one + d.beta) * 0.5);
    let lower = Expr::constant((one - d.beta) * 0.5);
    let grid = GridSpec::cube(32, 32.0).unwrap();
    let states = sample_states(&grid, &standard_battery(), &p).unwrap();
    let mut pass = true;
    for (eq, want) in [(Equation::PryceEm, LeafParity::Odd), (Equation::PryceDirect, LeafParity::Even)] {
        let r = rhs(eq.kind(), eq.hamiltonian(), &model, &p).unwrap();
        let parities = term_parities(&r, 1e-12);
        let wrong: Vec<&(String, LeafParity)> = parities.iter().filter(|(_, q)| *q != want && *q != LeafParity::Zero).collect();
        // Numerical block projection of the whole right-hand side.
        let total = r.total();
        let mut leak: f64 = 0.0;
        for psi in &states {
            for e in &total {
                let full = apply(e, psi, 0.4).unwrap().norm();
                let blocks = |a: &Expr, b: &Expr| apply(&(a.clone() * e.clone() * b.clone()), psi, 0.4).unwrap().norm();
                let forbidden = if want == LeafParity::Odd {
                    blocks(&upper, &upper).hypot(blocks(&lower, &lower))
                } else {
                    blocks(&upper, &lower).hypot(blocks(&lower, &upper))
                };
                leak = leak.max(forbidden / full.max(f64::MIN_POSITIVE));
            }
        }
        pass &= sub(
            wrong.is_empty() && leak <= 1e-12,
            format!("{eq}: all {} terms {want:?} (violations {:?}); projected leakage {leak:.2e}", parities.len(), wrong),
        );
    }
    check(pass, "Pryce right-hand sides: block-odd with the Dirac Hamiltonian, block-even with the direct one (tol 1e-12)")
}

fn criterion_8() -> Outcome {
    let p = params();
    let line = GridSpec::line(512, 160.0).unwrap();
    let mut pass = true;

    let psi = packet(&line, 0.4, 8.0, [0.6, 0.0, 0.0, 0.8], Projection::None);
    let h = build(HamiltonianId::DiracEm, &pulsed_b(), &p, None, false).unwrap();
    let n1 = (propagate(&h, &Method::Strang, psi.clone(), 0.0, 0.02, 1000).norm() - 1.0).abs();
    let hd = build(HamiltonianId::Direct, &pulsed_b(), &p, None, true).unwrap();
    let n2 = (propagate(&hd, &krylov(), psi, 0.0, 0.05, 100).norm() - 1.0).abs();
    pass &= sub(n1 < 1e-9 && n2 < 1e-9, format!("unitarity: Strang 1000 steps {n1:.2e}, Krylov hermitized direct {n2:.2e} (tol 1e-9)"));

    let psi = packet(&line, 0.4, 8.0, [1.0, 0.2, 0.0, 0.5], Projection::None);
    let free = build_free_dirac(&p);
    let a =
        distance(&propagate(&free, &Method::Strang, psi.clone(), 0.0, 0.1, 10), &propagate(&free, &krylov(), psi.clone(), 0.0, 0.1, 10));
    let hb = build(HamiltonianId::DiracEm, &static_b([0.0, 0.0, 0.1]), &p, None, false).unwrap();
    let b = distance(&propagate(&hb, &Method::Strang, psi.clone(), 0.0, 0.001, 10), &propagate(&hb, &krylov(), psi, 0.0, 0.001, 10));
    pass &= sub(a < 1e-8 && b < 1e-8, format!("Strang vs Krylov: free {a:.2e}, static B {b:.2e} (tol 1e-8)"));

    let psi = packet(&line, 0.4, 8.0, [1.0, 0.0, 0.0, 0.0], Projection::None);
    let he = build(HamiltonianId::DiracEm, &FieldModel::UniformE { e0: [0.02, 0.0, 0.0], envelope: Envelope::Constant }, &p, None, false)
        .unwrap();
    let run_n = |n: usize| propagate(&he, &Method::Strang, psi.clone(), 0.0, 2.0 / n as f64, n);
    let reference = run_n(640);
    let e: Vec<f64> = [20, 40, 80].iter().map(|&n| distance(&run_n(n), &reference)).collect();
    let ratios = [e[0] / e[1], e[1] / e[2]];
    pass &= sub(
        ratios.iter().all(|r| (r - 4.0).abs() < 0.3),
        format!("Strang order: error ratios {:.3}, {:.3} (4 ± 0.3)", ratios[0], ratios[1]),
    );

    let psi = packet(&line, 0.4, 8.0, [1.0, 0.0, 0.5, 0.0], Projection::None);
    let mut back: f64 = 0.0;
    for (h, method) in [
        (build(HamiltonianId::DiracEm, &pulsed_b(), &p, None, false).unwrap(), Method::Strang),
        (build(HamiltonianId::DiracEm, &pulsed_b(), &p, None, false).unwrap(), krylov()),
        (build(HamiltonianId::Direct, &pulsed_b(), &p, None, true).unwrap(), krylov()),
    ] {
        let fwd = propagate(&h, &method, psi.clone(), 0.0, 0.05, 40);
        back = back.max(distance(&propagate(&h, &method, fwd, 2.0, -0.05, 40), &psi));
    }
    pass &= sub(back < 1e-9, format!("time reversal: max ‖ψ(0) − U(−T)U(T)ψ(0)‖ {back:.2e} (tol 1e-9)"));

    let grid = GridSpec::line(256, 128.0).unwrap();
    let b0 = 0.5;
    let psi = packet(&grid, 1.0, 6.0, [1.0, 1.0, 0.0, 0.0], Projection::None);
    let hz = build(HamiltonianId::Direct, &static_b([0.0, 0.0, b0]), &p, None, false).unwrap().restricted(&["zeeman"]).unwrap();
    let (traj, _) = run(&RunSpec { hamiltonian: hz, method: krylov(), dt: 0.05, steps: 1000, stride: 1, t0: 0.0 }, psi).unwrap();
    let ts = traj.column("t").unwrap();
    let expected = 2.0 * std::f64::consts::PI * p.m0 / (p.e.abs() * b0);
    let worst = max_of(
        ["S_D_x", "S_FW_x", "S_Py_x"]
            .iter()
            .map(|c| (mean_period(&upward_crossings(&ts, &traj.column(c).unwrap())) / expected - 1.0).abs()),
    );
    pass &= sub(worst < 1e-3, format!("Larmor period: worst relative error {worst:.2e} over the three spins (tol 1e-3)"));

    let grid = GridSpec::line(128, 64.0).unwrap();
    let psi = packet(&grid, 1.5, 4.0, [1.0, 0.3, 0.0, 0.4], Projection::None);
    let mut ehrenfest = true;
    let mut worst_fine: f64 = 0.0;
    let mut worst_order = f64::INFINITY;
    for h in [
        build_free_dirac(&p),
        build(HamiltonianId::DiracEm, &pulsed_b(), &p, None, false).unwrap(),
        build(HamiltonianId::FwFull, &pulsed_b(), &p, None, false).unwrap(),
        build(HamiltonianId::Direct, &pulsed_b(), &p, None, false).unwrap(),
        build(HamiltonianId::Direct, &pulsed_b(), &p, None, true).unwrap(),
    ] {
        let method = match Method::default_for(h.id) {
            Method::Krylov(_) => Method::Krylov(KrylovOptions { subspace: 64, tol: 1e-12 }),
            m => m,
        };
        for kind in SpinKind::ALL {
            let worst =
                |dt: f64| max_of(ehrenfest_residual(&h, kind, &method, psi.clone(), dt, 4).unwrap().iter().flat_map(|s| s.residual));
            let (coarse, fine) = (worst(0.02), worst(0.01));
            worst_fine = worst_fine.max(fine);
            if fine >= 1e-10 {
                worst_order = worst_order.min(coarse / fine);
            }
            ehrenfest &= fine < 1e-3 && (fine < 1e-10 || coarse / fine > 3.0);
        }
    }
    pass &= sub(
        ehrenfest,
        format!("Ehrenfest closure, 5 Hamiltonians × 3 spins: worst residual {worst_fine:.2e}, smallest dt-halving ratio {worst_order:.2}"),
    );

    let psi = packet(&line, 0.6, 8.0, [0.8, 0.0, 0.0, 0.6], Projection::None);
    let (traj, _) =
        run(&RunSpec { hamiltonian: build_free_dirac(&p), method: Method::Strang, dt: 0.1, steps: 200, stride: 10, t0: 0.0 }, psi).unwrap();
    let drift = |cols: &[&str]| {
        max_of(cols.iter().map(|c| {
            let xs = traj.column(c).unwrap();
            max_of(xs.iter().map(|x| (x - xs[0]).abs()))
        }))
    };
    let constant = drift(&["S_FW_x", "S_FW_y", "S_FW_z", "S_Py_x", "S_Py_y", "S_Py_z"]);
    let moved = drift(&["S_D_x", "S_D_y", "S_D_z"]);
    pass &= sub(
        constant < 1e-8 && moved > 1e-4,
        format!("free constants: FW/Pryce drift {constant:.2e} (tol 1e-8), Dirac spin moves {moved:.2e}"),
    );

    let grid = GridSpec::line(2048, 400.0).unwrap();
    let k0 = 0.3;
    let psi = packet(&grid, k0, 16.0, [1.0, 0.0, 0.0, 1.0], Projection::None);
    let (traj, _) =
        run(&RunSpec { hamiltonian: build_free_dirac(&p), method: Method::Strang, dt: 0.05, steps: 600, stride: 1, t0: 0.0 }, psi).unwrap();
    let ts = traj.column("t").unwrap();
    let xs = traj.column("rx").unwrap();
    let n = ts.len() as f64;
    let (mt, mx) = (ts.iter().sum::<f64>() / n, xs.iter().sum::<f64>() / n);
    let slope = ts.iter().zip(&xs).map(|(t, x)| (t - mt) * (x - mx)).sum::<f64>() / ts.iter().map(|t| (t - mt).powi(2)).sum::<f64>();
    let wiggle: Vec<f64> = ts.iter().zip(&xs).map(|(t, x)| x - mx - slope * (t - mt)).collect();
    let amplitude = max_of(wiggle.iter().map(|w| w.abs()));
    let omega = 2.0 * std::f64::consts::PI / mean_period(&upward_crossings(&ts, &wiggle));
    let two_e = 2.0 * energy_ep(Momentum3([k0, 0.0, 0.0]), &p);
    let rel = (omega / two_e - 1.0).abs();
    pass &= sub(
        rel < 0.02 && amplitude >= 1e-3,
        format!("Zitterbewegung: ω = {omega:.4} vs 2E = {two_e:.4} ({rel:.2e}, tol 2%), amplitude {amplitude:.2e}"),
    );

    let grid = GridSpec::line(256, 160.0).unwrap();
    let psi = packet(&grid, 0.4, 8.0, [1.0, 0.0, 0.2, 0.0], Projection::None);
    let field = FieldModel::UniformE { e0: [-0.01, 0.0, 0.0], envelope: Envelope::Constant };
    for id in [HamiltonianId::DiracEm, HamiltonianId::FwFull] {
        let h = build(id, &field, &p, None, false).unwrap();
        let method = Method::Krylov(KrylovOptions { subspace: 48, tol: 1e-12 });
        let (traj, _) = run(&RunSpec { hamiltonian: h, method, dt: 0.1, steps: 200, stride: 1, t0: 0.0 }, psi.clone()).unwrap();
        let norms = traj.column("norm").unwrap();
        let per_step = max_of(norms.windows(2).map(|w| (w[1] - w[0]).abs()));
        let energies = traj.column("energy").unwrap();
        let e_drift = max_of(energies.iter().map(|e| (e - energies[0]).abs()));
        pass &= sub(
            per_step <= 1e-11 && e_drift <= 1e-8,
            format!("static E, {id}: norm drift per step {per_step:.2e} (tol 1e-11), energy drift {e_drift:.2e} (tol 1e-8)"),
        );
    }
    check(pass, "propagation suite")
}

fn upward_crossings(ts: &[f64], xs: &[f64]) -> Vec<f64> {
    (1..xs.len())
        .filter(|&i| xs[i - 1] < 0.0 && xs[i] >= 0.0)
        .map(|i| ts[i - 1] + (ts[i] - ts[i - 1]) * xs[i - 1] / (xs[i - 1] - xs[i]))
        .collect()
}

fn mean_period(crossings: &[f64]) -> f64 {
    (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64
}

fn criterion_9() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/sweep.json");
    let r = scenario::load(&path).unwrap();
    let strengths = [0.0, 0.01, 0.02, 0.05];
    let rows = app::sweep(&r, &strengths).unwrap();
    let mut out = Vec::new();
    app::write_sweep_csv(&rows, &mut out).unwrap();
    let lines = String::from_utf8(out).unwrap().lines().count();
    let mut pass = true;
    let covered = strengths.iter().all(|b| rows.iter().any(|row| row.b0 == *b));
    pass &= sub(covered && lines == rows.len() + 1, format!("{} rows over {} strengths on {}³", rows.len(), strengths.len(), r.grid.n[0]));
    let zero = max_of(rows.iter().filter(|row| row.b0 == 0.0).flat_map(|row| [row.d_py, row.d_fw]));
    pass &= sub(zero <= 1e-8, format!("zero field: max divergence {zero:.2e} (tol 1e-8)"));
    let peaks: Vec<(f64, f64, f64)> = strengths
        .iter()
        .map(|&b| {
            let sel = rows.iter().filter(|row| row.b0 == b);
            (b, max_of(sel.clone().map(|row| row.d_py)), max_of(sel.map(|row| row.d_fw)))
        })
        .collect();
    for (b, dpy, dfw) in &peaks {
        println!("    B0 = {b:<5} max d_py {dpy:.3e}  max d_fw {dfw:.3e}");
    }
    let monotone = peaks.windows(2).all(|w| w[1].2 >= w[0].2);
    println!("    (informational) d_fw non-decreasing in B0: {monotone}");
    check(pass, "field-strength sweep emitted; divergences vanish at zero field")
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("Dirac algebra", criterion_1),
        ("spin-operator conditions", criterion_2),
        ("total angular momentum", criterion_3),
        ("Zeeman sub-identities", criterion_4),
        ("free-particle equations", criterion_5),
        ("field equations: zero-field reduction and refinement", criterion_6),
        ("Pryce block structure", criterion_7),
        ("propagation", criterion_8),
        ("field-strength sweep", criterion_9),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let o = f();
        println!(
            "criterion {}: {} — {name}: {} [{:.1} s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            started.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 9 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
