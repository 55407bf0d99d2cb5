//! Acceptance criteria 1-10. Each test prints one PASS/FAIL line.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use edgescatter::channels::gram_matrix;
use edgescatter::observables::{FieldRef, GaussianPacket};
use edgescatter::potential::{Bump, Component};
use edgescatter::scattering::{prepare, scatter, solve_all, ScatteringSetup};
use edgescatter::transverse::{build_basis_with, BasisTolerances};
use edgescatter::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, pass: bool, elapsed: Duration, budget: Duration, detail: &str) -> bool {
    let ok = pass && elapsed <= budget;
    println!(
        "criterion {n:>2}: {} | {detail} | {:.2}s (budget {:.0}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    ok
}

fn linear_basis() -> TransverseBasis {
    build_basis(&WallSpec::linear(), 30, 0).unwrap()
}

fn random_potential(rng: &mut ChaCha8Rng, max_amplitude: f64) -> Potential {
    let comps = [Component::Q0, Component::Q1, Component::Q2, Component::Q3];
    let count = rng.gen_range(1..=3);
    let bumps = (0..count)
        .map(|_| Bump {
            component: comps[rng.gen_range(0..4)],
            amplitude: rng.gen_range(-max_amplitude..=max_amplitude),
            x0: rng.gen_range(-1.0..1.0),
            y0: rng.gen_range(-1.0..1.0),
            sx: rng.gen_range(0.5..1.5),
            sy: if rng.gen_bool(0.2) { None } else { Some(rng.gen_range(0.5..2.0)) },
        })
        .collect();
    build_potential(&PotentialSpec { bumps, table: None }, Frame::Rotated).unwrap()
}

fn generic_spec(scale: f64) -> PotentialSpec {
    PotentialSpec {
        bumps: vec![
            Bump {
                component: Component::Q0,
                amplitude: scale,
                x0: 0.3,
                y0: 0.2,
                sx: 1.0,
                sy: Some(1.2),
            },
            Bump {
                component: Component::Q1,
                amplitude: 0.7 * scale,
                x0: -0.5,
                y0: -0.4,
                sx: 0.8,
                sy: Some(0.9),
            },
            Bump {
                component: Component::Q2,
                amplitude: -0.6 * scale,
                x0: 0.0,
                y0: 0.5,
                sx: 1.1,
                sy: Some(1.5),
            },
        ],
        table: None,
    }
}

#[test]
fn criterion_01_channel_census() {
    let t = Instant::now();
    let b = linear_basis();
    let hi = channels_at(&b, 2.2, 8, 1e-3).unwrap();
    let lo = channels_at(&b, 1.2, 8, 1e-3).unwrap();
    let pass = (hi.m(), hi.n_plus, hi.n_minus) == (5, 2, 3) && (lo.m(), lo.n_minus) == (1, 1);
    let detail = format!(
        "E=2.2: M={} n+={} n-={}; E=1.2: M={} n-={}",
        hi.m(),
        hi.n_plus,
        hi.n_minus,
        lo.m(),
        lo.n_minus
    );
    assert!(report(1, pass, t.elapsed(), Duration::from_secs(1), &detail));
}

#[test]
fn criterion_02_linear_wall_spectrum() {
    let t = Instant::now();
    let exact = build_basis(&WallSpec::linear(), 20, 0).unwrap();
    let exact_ok = (0..=20).all(|n| exact.rho[n] == 2.0 * n as f64);
    let general = build_basis_with(&WallSpec::linear_plus(BoundedPart::Zero), 20, 0, "galerkin", BasisTolerances::default()).unwrap();
    let worst = (1..=20)
        .map(|n| (general.rho[n] - 2.0 * n as f64).abs() / (2.0 * n as f64))
        .fold(0.0, f64::max);
    let pass = exact_ok && worst < 1e-6 && general.rho[0] == 0.0;
    let detail = format!("analytic exact={exact_ok}; galerkin max rel err {worst:.2e} (tol 1e-6)");
    assert!(report(2, pass, t.elapsed(), Duration::from_secs(10), &detail));
}

#[test]
fn criterion_03_unperturbed_current_lemma() {
    let t = Instant::now();
    let b = linear_basis();
    let set = channels_at(&b, 2.2, 8, 1e-3).unwrap();
    let mats: Vec<_> = [0.5, 1.0, 2.5]
        .iter()
        .map(|&w| unperturbed_current_matrix(&set, &SwitchProfile::spatial(0.0, w)).unwrap())
        .collect();
    let mut off = 0.0f64;
    let mut diag = 0.0f64;
    for m in &mats {
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    let c = &set.propagating[i];
                    let target = if c.level == 0 { -1.0 } else { c.xi.re / 2.2 };
                    diag = diag.max((m[(i, i)] - C64::new(target, 0.0)).norm());
                } else {
                    off = off.max(m[(i, j)].norm());
                }
            }
        }
    }
    let width = (&mats[0] - &mats[2]).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pass = off < 1e-8 && diag < 1e-8 && width < 1e-8;
    let values: Vec<String> = (0..5).map(|i| format!("{:.5}", mats[1][(i, i)].re)).collect();
    let detail = format!(
        "diag ({}); off-diag {off:.1e}; diag err {diag:.1e}; width change {width:.1e}",
        values.join(", ")
    );
    assert!(report(3, pass, t.elapsed(), Duration::from_secs(5), &detail));
}

fn criterion_4_runs() -> Vec<(f64, ScatteringMatrix)> {
    let b = linear_basis();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pots: Vec<Potential> = (0..10).map(|_| random_potential(&mut rng, 3.0)).collect();
    let mut out = Vec::new();
    for p in &pots {
        for &e in &[1.2, 1.8, 2.2] {
            out.push((e, scatter(&b, p, e, &SolverParams::default(), "mode-matching").unwrap()));
        }
    }
    out
}

#[test]
fn criterion_04_unitarity() {
    let t = Instant::now();
    let runs = criterion_4_runs();
    let worst = runs.iter().map(|(_, s)| s.unitarity_defect).fold(0.0, f64::max);
    let pass = runs.len() == 30 && worst < 1e-6;
    let detail = format!("{} runs; max ||S*S - I||_F = {worst:.2e} (tol 1e-6)", runs.len());
    assert!(report(4, pass, t.elapsed(), Duration::from_secs(120), &detail));
}

#[test]
fn criterion_05_conductivity_quantization() {
    let t = Instant::now();
    let runs = criterion_4_runs();
    let worst_trace = runs.iter().map(|(_, s)| (s.trace_difference() + 1.0).abs()).fold(0.0, f64::max);
    let b = linear_basis();
    let window = SwitchProfile::energy_window(0.5, 1.2);
    let params = SolverParams::default();
    let free = conductivity(&b, &Potential::zero(), &window, 21, &params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut perturbed = Vec::new();
    for _ in 0..3 {
        let mut spec_pot = random_potential(&mut rng, 2.0);
        // Rescale so the largest amplitude is exactly 2.
        let mut bumps = spec_pot.bumps().to_vec();
        let peak = bumps.iter().map(|b| b.amplitude.abs()).fold(0.0, f64::max);
        bumps.iter_mut().for_each(|b| b.amplitude *= 2.0 / peak);
        spec_pot = build_potential(&PotentialSpec { bumps, table: None }, Frame::Rotated).unwrap();
        perturbed.push(conductivity(&b, &spec_pot, &window, 21, &params).unwrap().integrated);
    }
    let worst_sigma = perturbed
        .iter()
        .chain(std::iter::once(&free.integrated))
        .map(|v| (v + 1.0).abs())
        .fold(0.0, f64::max);
    let pass = worst_trace < 1e-5 && worst_sigma < 1e-4;
    let detail = format!(
        "max |trace + 1| = {worst_trace:.2e} (tol 1e-5); 2pi sigma_I: Q=0 {:.12}, A=2 {:?}; max dev {worst_sigma:.2e} (tol 1e-4)",
        free.integrated,
        perturbed.iter().map(|v| format!("{v:.10}")).collect::<Vec<_>>()
    );
    assert!(report(5, pass, t.elapsed(), Duration::from_secs(180), &detail));
}

#[test]
fn criterion_06_single_channel_phase() {
    let t = Instant::now();
    let b = linear_basis();
    let spec = PotentialSpec {
        bumps: vec![Bump {
            component: Component::Q0,
            amplitude: 0.5,
            x0: 0.0,
            y0: 0.0,
            sx: 1.0,
            sy: None,
        }],
        table: None,
    };
    let p = build_potential(&spec, Frame::Rotated).unwrap();
    let s = scatter(&b, &p, 1.2, &SolverParams::default(), "mode-matching").unwrap();
    let tm = s.t_minus[(0, 0)];
    let phi = 0.5 * (2.0 * PI).sqrt();
    // Closed-form oracle of v' = -i(E - q)v for a wave entering from +inf:
    // the amplitude at -inf is exp(-i int q dx).
    let oracle = -phi;
    let phase_err = (tm.arg() - oracle).abs();
    let mod_err = (tm.norm() - 1.0).abs();
    let pass = s.m() == 1 && mod_err < 1e-8 && phase_err < 1e-6;
    let detail = format!(
        "T = {:.12}{:+.12}i, |T|-1 = {mod_err:.1e}, arg T = {:.9} vs oracle -Phi = {oracle:.9} (err {phase_err:.1e})",
        tm.re,
        tm.im,
        tm.arg()
    );
    assert!(report(6, pass, t.elapsed(), Duration::from_secs(5), &detail));
}

#[test]
fn criterion_07_born_consistency() {
    let t = Instant::now();
    let b = linear_basis();
    let params = SolverParams::default();
    let discrepancy = |eps: f64| {
        let p = build_potential(&generic_spec(eps), Frame::Rotated).unwrap();
        let exact = scatter(&b, &p, 2.2, &params, "mode-matching").unwrap();
        let born = scatter(&b, &p, 2.2, &params, "born").unwrap();
        (exact.full() - born.full()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    };
    let d1 = discrepancy(0.01);
    let d2 = discrepancy(0.005);
    let ratio = d1 / d2;
    let pass = (3.5..=4.5).contains(&ratio);
    let detail = format!("discrepancy {d1:.4e} at 0.01, {d2:.4e} at 0.005, ratio {ratio:.4} (want [3.5, 4.5])");
    assert!(report(7, pass, t.elapsed(), Duration::from_secs(60), &detail));
}

#[test]
fn criterion_08_current_conservation() {
    let t = Instant::now();
    let b = linear_basis();
    let p = build_potential(&generic_spec(1.0), Frame::Rotated).unwrap();
    let params = SolverParams::default();
    let ScatteringSetup { set, grid, field } = prepare(&b, &p, 2.2, &params).unwrap();
    let waves = solve_all(&set, &field, &grid, &params).unwrap();
    let positions = [-6.0, -2.0, 0.0, 2.0, 6.0];
    let profile = SwitchProfile::spatial(0.0, 1.0);
    let mut worst = 0.0f64;
    for w in &waves {
        worst = worst.max(conservation_scan(w, &profile, &positions).unwrap());
    }
    let j0 = current_correlation(FieldRef::Wave(&waves[0]), FieldRef::Wave(&waves[0]), 0.0, &profile).unwrap();
    let pass = worst < 1e-7;
    let detail = format!(
        "{} incident channels, x0 in {positions:?}; max variation {worst:.2e} (tol 1e-7); J_00 = {:.10}",
        waves.len(),
        j0.re
    );
    assert!(report(8, pass, t.elapsed(), Duration::from_secs(10), &detail));
}

#[test]
fn criterion_09_gram_bound() {
    let t = Instant::now();
    let b = linear_basis();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let zd = critical_set(&b, 3.5);
    let mut energies = Vec::new();
    while energies.len() < 100 {
        let e: f64 = rng.gen_range(0.0..3.0);
        if zd.iter().all(|z| (e - z).abs() > 1e-3) {
            energies.push(e);
        }
    }
    let mut worst = (0.0f64, 0.0f64);
    for &e in &energies {
        let set = channels_at(&b, e, 0, 1e-3).unwrap();
        let g = gram_matrix(&b, &set);
        for i in 0..set.m() {
            for j in 0..set.m() {
                if i != j && g[(i, j)].norm() > worst.0 {
                    worst = (g[(i, j)].norm(), e);
                }
            }
        }
    }
    let set = channels_at(&b, 2.2, 0, 1e-3).unwrap();
    let g = gram_matrix(&b, &set);
    let pair = g[(set.find(1, true).unwrap(), set.find(1, false).unwrap())].norm();
    let target = 2.0 / 9.68;
    let pass = worst.0 < 0.5 && (pair - target).abs() < 1e-10;
    let detail = format!(
        "max off-diagonal |overlap| {:.5} at E={:.4} (bound 0.5); E=2.2 pair overlap {pair:.5} vs {target:.5} (closed form sqrt(2)/2.2 = {:.5})",
        worst.0,
        worst.1,
        2f64.sqrt() / 2.2
    );
    assert!(report(9, pass, t.elapsed(), Duration::from_secs(5), &detail));
}

#[test]
fn criterion_10_unperturbed_parseval() {
    let t = Instant::now();
    let b = linear_basis();
    let set = channels_at(&b, 2.2, 0, 1e-3).unwrap();
    let chan = &set.propagating[set.find(1, true).unwrap()];
    let f = GaussianPacket::windowed_mode(chan, 5.0);
    let counts = [25usize, 50, 100, 200, 400];
    let defects: Vec<f64> = counts.iter().map(|&n| parseval_check(&b, &f, n).unwrap().defect).collect();
    let decreasing = defects
        .windows(2)
        .all(|w| w[1] < w[0] || w[1] < edgescatter::observables::PARSEVAL_FLOOR);
    let pass = defects[4] < 1e-4 && decreasing;
    let detail = format!(
        "defects over {counts:?} xi-nodes: {:?}",
        defects.iter().map(|d| format!("{d:.1e}")).collect::<Vec<_>>()
    );
    assert!(report(10, pass, t.elapsed(), Duration::from_secs(30), &detail));
}
