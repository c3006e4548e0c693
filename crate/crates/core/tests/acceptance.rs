//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use levlab::aharonov_bohm::{self as ab, to_cmat, AdmissiblePair, M2, TABLE_ROWS};
use levlab::boundary::{corner_mismatch, unitarity_defect, QuadrantBoundary};
use levlab::chern_pairing::{convergence_ladder, GridSpec3D, SphereManifold, XOrientation};
use levlab::point_models::{self as pm, PointModel, PointModelKind, COUPLING_GRID};
use levlab::schrodinger::{self as sc, Levinson3DOptions, Potential1D, RadialPotential, ZeroEnergyClass};
use levlab::specialfn::C64;
use levlab::winding::{
    det_p, det_p_direct, wind_phase, wind_regularized, PhiABLoop, QuadratureSpec, ZetaLoop, DEFAULT_MAX_DEPTH,
    DEFAULT_N0,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn total(qb: &QuadrantBoundary) -> Result<f64, String> {
    wind_phase(qb, DEFAULT_N0, DEFAULT_MAX_DEPTH).map(|r| r.total).map_err(|e| e.to_string())
}

fn baby_table() -> Check {
    let start = Instant::now();
    let table = [(-1.0, [0.0, 0.5, 0.5, 0.0], 1), (0.0, [-0.5, 0.0, 0.5, 0.0], 0), (1.0, [0.0, -0.5, 0.5, 0.0], 0)];
    for (a, want, n) in table {
        let m = PointModel { kind: PointModelKind::BabyHalfLine, coupling: a };
        let chk = pm::levinson_verify(m, 1e-6).map_err(|e| e.to_string())?;
        let seg = &chk.winding.per_segment;
        ensure(seg.iter().zip(want).all(|(x, y)| (x - y).abs() < 1e-6), || format!("α={a}: {seg:?}"))?;
        ensure(chk.winding.rounded() == n && chk.bound_states as i64 == n, || format!("α={a}: total"))?;
    }
    let t = start.elapsed().as_secs_f64();
    ensure(t < 1.0, || format!("took {t:.2} s"))?;
    Ok(format!("3 couplings in {t:.3} s"))
}

fn point_grid() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for kind in PointModelKind::ALL {
        for a in COUPLING_GRID {
            let m = PointModel { kind, coupling: a };
            let chk = pm::levinson_verify(m, 1e-3).map_err(|e| format!("{kind} α={a}: {e}"))?;
            ensure(chk.pass, || format!("{kind} α={a}: residual {}", chk.residual))?;
            if kind == PointModelKind::Point2D {
                ensure(chk.winding.rounded() == 1, || format!("2D α={a} winds {}", chk.winding.total))?;
            }
            worst = worst.max(chk.residual);
        }
    }
    let t = start.elapsed().as_secs_f64();
    ensure(t < 10.0, || format!("took {t:.2} s"))?;
    Ok(format!("35 cases, worst residual {worst:.1e}, {t:.2} s"))
}

fn ab_tables() -> Check {
    let start = Instant::now();
    let mut witnessed = vec![false; TABLE_ROWS.len()];
    let mut checked = 0;
    for alpha in [0.3, 0.5, 0.7] {
        for (name, pair) in ab::representative_pairs() {
            let row = ab::levinson_verify(&pair, alpha, 1e-3).map_err(|e| format!("{name} α={alpha}: {e}"))?;
            ensure(row.pass, || format!("{name} α={alpha}: {row:?}"))?;
            ensure(row.computed.rounded() == ab::bound_state_count(&pair) as i64, || format!("{name}: total"))?;
            let idx = TABLE_ROWS.iter().position(|r| *r == row.case.row).expect("row from the table");
            witnessed[idx] = true;
            checked += 1;
        }
    }
    let missing: Vec<String> = TABLE_ROWS
        .iter()
        .zip(&witnessed)
        .filter(|(_, w)| !**w)
        .map(|(r, _)| format!("table {} [{}]", r.table, r.condition))
        .collect();
    ensure(missing.is_empty(), || format!("unwitnessed rows: {missing:?}"))?;
    let t = start.elapsed().as_secs_f64();
    ensure(t < 120.0, || format!("took {t:.1} s"))?;
    Ok(format!("{} rows witnessed by {checked} runs, {t:.2} s", TABLE_ROWS.len()))
}

fn random_unitary(rng: &mut ChaCha8Rng) -> M2 {
    let theta = rng.gen_range(0.0..PI / 2.0);
    let [p1, p2, p3]: [f64; 3] = [rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)];
    let a = C64::from_polar(theta.cos(), p1);
    let b = C64::from_polar(theta.sin(), p2);
    M2::new(a, -b.conj(), b, a.conj()) * C64::from_polar(1.0, p3)
}

fn regularization() -> Check {
    let quad = QuadratureSpec { tol: 1e-6, ..QuadratureSpec::default() };
    let mut notes = Vec::new();
    for (a, b) in [(2.0, 1.0), (1.0, 2.0), (1.0, 3.0)] {
        let lp = PhiABLoop::new(a, b).expect("positive exponents");
        let p = lp.minimal_p();
        let w: Vec<f64> = [p, p + 1, p + 2]
            .iter()
            .map(|&q| wind_regularized(&lp, q, &quad))
            .collect::<Result<_, _>>()
            .map_err(|e| format!("φ_({a},{b}): {e}"))?;
        ensure((w[0] - 1.0).abs() < 1e-3, || format!("φ_({a},{b}) p={p}: {}", w[0]))?;
        ensure(w.iter().all(|v| (v - w[0]).abs() < 1e-3), || format!("φ_({a},{b}): {w:?}"))?;
        notes.push(format!("({a},{b}) p={p}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let g = to_cmat(&random_unitary(&mut rng));
        for p in 1..=4 {
            let (x, y) = (det_p(&g, p), det_p_direct(&g, p));
            let rel = (x - y).norm() / x.norm().max(y.norm());
            ensure(rel < 1e-12, || format!("unitary {i}, p={p}: relative gap {rel:.1e}"))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("{}; det_p worst relative gap {worst:.1e}", notes.join(", ")))
}

fn chern() -> Check {
    let start = Instant::now();
    let grid = GridSpec3D::new(8, 8, 32);
    let run = |x: &SphereManifold| {
        convergence_ladder(x, 0.5, grid, 3, 0.02, XOrientation::PhiRho).map_err(|e| e.to_string())
    };
    let first = run(&SphereManifold::standard())?;
    ensure((first.value - 1.0).abs() < 0.02, || format!("value {}", first.value))?;
    ensure((first.raw_rho_phi_xi - first.bundle_chern_rho_phi).abs() < 0.02, || {
        format!("three-form {} vs bundle Chern {}", first.raw_rho_phi_xi, first.bundle_chern_rho_phi)
    })?;
    let other = SphereManifold::new(C64::from_polar(1.0, -0.4), C64::from_polar(1.0, 2.0)).map_err(|e| e.to_string())?;
    let second = run(&other)?;
    ensure((second.value - first.value).abs() < 0.02, || format!("second pair {}", second.value))?;
    let t = start.elapsed().as_secs_f64();
    ensure(t < 600.0, || format!("took {t:.0} s"))?;
    Ok(format!("{:.4} and {:.4}, bundle Chern {:.4}, {t:.1} s", first.value, second.value, first.bundle_chern_rho_phi))
}

fn schrodinger_1d() -> Check {
    let pot = Potential1D::sech2(2.0);
    let mut refl: f64 = 0.0;
    for j in 0..=40 {
        let k = 0.05 * 400f64.powf(j as f64 / 40.0);
        let ch = sc::channels_1d(&pot, k).map_err(|e| e.to_string())?;
        ensure(unitarity_defect(&sc::even_odd(&ch)) < 1e-8, || format!("sech² not unitary at k={k}"))?;
        refl = refl.max(ch.r_left.norm()).max(ch.r_right.norm());
    }
    ensure(refl < 1e-6, || format!("sech² reflection {refl:.1e}"))?;
    let rep = sc::levinson_1d(&pot, 1e-2).map_err(|e| e.to_string())?;
    ensure(rep.class == ZeroEnergyClass::Exceptional, || "sech² not exceptional".into())?;
    ensure(rep.bound_states == 1 && (rep.wind_s - 1.0).abs() < 1e-2, || format!("sech²: {rep:?}"))?;
    let mut generic = 0;
    for depth in [1.0, 3.0, 5.0, 8.0, 12.0] {
        let pot = Potential1D::square_well(depth, 2.0).map_err(|e| e.to_string())?;
        let rep = sc::levinson_1d(&pot, 1e-2).map_err(|e| e.to_string())?;
        if rep.class != ZeroEnergyClass::Generic {
            continue;
        }
        let oracle = (depth.sqrt() * 2.0 / PI).ceil() as usize;
        ensure(rep.bound_states == oracle, || format!("well V0={depth}: {} bound states", rep.bound_states))?;
        ensure((rep.wind_s - (oracle as f64 - 0.5)).abs() < 1e-2, || format!("well V0={depth}: Wind(S)={}", rep.wind_s))?;
        generic += 1;
    }
    ensure(generic > 0, || "no generic well in the scan".into())?;
    Ok(format!("sech² Wind(S)={:.6}, reflection {refl:.1e}; {generic} generic wells", rep.wind_s))
}

fn schrodinger_3d() -> Check {
    let pot = RadialPotential::gaussian(10.0, 1.0).map_err(|e| e.to_string())?;
    let rep = sc::regularized_levinson_3d(&pot, &[2, 3], &Levinson3DOptions::default()).map_err(|e| e.to_string())?;
    let n = rep.bound_states;
    ensure((1..=3).contains(&n), || format!("N = {n}"))?;
    let (l2, l3) = (rep.lhs[0], rep.lhs[1]);
    ensure((l2 - n as f64).abs() < 5e-2, || format!("LHS(2) = {l2}, N = {n}"))?;
    ensure((l2 - l3).abs() < 1e-2, || format!("LHS(2) = {l2}, LHS(3) = {l3}"))?;
    Ok(format!("N={n}, LHS(2)={l2:.6}, LHS(3)={l3:.6}, L_max={}", rep.l_max))
}

fn properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut boundaries: Vec<(String, QuadrantBoundary)> = Vec::new();
    for kind in PointModelKind::ALL {
        for a in COUPLING_GRID {
            let m = PointModel { kind, coupling: a };
            for j in 0..=20 {
                let lam = 10f64.powf(-4.0 + 0.4 * j as f64);
                ensure(unitarity_defect(&pm::smatrix(m, lam)) < 1e-8, || format!("{kind} α={a} λ={lam}"))?;
            }
            boundaries.push((format!("{kind} α={a}"), pm::gamma_boundary(m)));
        }
    }
    for i in 0..20 {
        let pair = AdmissiblePair::from_unitary(&random_unitary(&mut rng)).map_err(|e| e.to_string())?;
        let alpha = rng.gen_range(0.05..0.95);
        for j in 0..=20 {
            let lam = 10f64.powf(-4.0 + 0.4 * j as f64);
            if let Ok(s) = ab::smatrix(&pair, alpha, lam) {
                ensure(unitarity_defect(&to_cmat(&s)) < 1e-8, || format!("AB pair {i} λ={lam}"))?;
            }
        }
        boundaries.push((format!("AB pair {i}"), ab::gamma_boundary(&pair, alpha).map_err(|e| e.to_string())?));
    }
    for (name, qb) in &boundaries {
        ensure(corner_mismatch(qb) < 1e-6, || format!("{name}: corners"))?;
        let (w, r) = (total(qb)?, total(&qb.reversed())?);
        ensure((w + r).abs() < 1e-6, || format!("{name}: reversal {w} vs {r}"))?;
    }
    for m in -3i64..=3 {
        let w = total(&ZetaLoop(m).boundary())?;
        ensure((w - m as f64).abs() < 1e-9, || format!("Wind(ζ_{m}) = {w}"))?;
    }
    Ok(format!("{} boundaries, sign anchor |m| ≤ 3", boundaries.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("baby-model table", baby_table),
        ("point-interaction grid", point_grid),
        ("Aharonov–Bohm tables", ab_tables),
        ("regularized winding and det_p", regularization),
        ("higher-degree pairing", chern),
        ("1D Schrödinger", schrodinger_1d),
        ("3D regularized Levinson", schrodinger_3d),
        ("property suites", properties),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
