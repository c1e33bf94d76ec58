//! The `selftest` subcommand: property suites over the projection
//! geometry, the augmented-channel algebra, and the hardware model, each
//! checked against an oracle built by an independent route. One line per
//! suite, PASS with the sample budget or FAIL with a witness input.
//!
//! The octagon suites deserve a note: the production projection routes
//! through a region classifier, so the oracle here is classifier-free.
//! It projects onto all eight edge segments of the convex hull and keeps
//! the nearest foot. A canary suite corrupts the classifier's steep
//! boundary line through a test hook and demands that the oracle catches
//! the damage; if the canary ever reports no difference, the suite has
//! lost its teeth and the run fails.

use cmprec::hwmodel::{
    cannon_matvec_schedule, fx_c3po_iteration, latency, matvec_in_schedule_order,
    FixedMacArith, FixedPointProfile, FloatArith, FxComplex, PeArrayConfig,
};
use cmprec::linalg::{gaussian_complex_vector, inner, norm_sq, Rng};
use cmprec::precoder::{build_augmented, FbsParams, ProblemInstance};
use cmprec::projection::PolytopeP;
use cmprec::sim::draw_channel;
use cmprec::C64;

use crate::options::{CliError, SelftestArgs};

/// Sample budgets, shrunk by `--quick` without skipping any suite.
struct Budget {
    octagon: usize,
    canary: usize,
    algebra: usize,
    schedule: usize,
    fx_iter: usize,
}

impl Budget {
    fn new(quick: bool) -> Self {
        if quick {
            Self {
                octagon: 5_000,
                canary: 5_000,
                algebra: 40,
                schedule: 5,
                fx_iter: 10,
            }
        } else {
            Self {
                octagon: 100_000,
                canary: 100_000,
                algebra: 200,
                schedule: 25,
                fx_iter: 50,
            }
        }
    }
}

fn fmt_z(z: C64) -> String {
    format!("({:.6}, {:.6})", z.re, z.im)
}

/// Uniform sample over the square [-3, 3] x [-3, 3].
fn sample_plane(rng: &mut Rng) -> C64 {
    C64::new(6.0 * rng.next_f64() - 3.0, 6.0 * rng.next_f64() - 3.0)
}

/// Classifier-free projection onto the octagon: nearest point among the
/// interior (when feasible) and the feet on all eight hull edges.
fn oracle_project_octagon(z: C64) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let verts = [
        C64::new(1.0, 0.0),
        C64::new(s, s),
        C64::new(0.0, 1.0),
        C64::new(-s, s),
        C64::new(-1.0, 0.0),
        C64::new(-s, -s),
        C64::new(0.0, -1.0),
        C64::new(s, -s),
    ];
    let mut inside = true;
    let mut best = verts[0];
    let mut best_d = f64::INFINITY;
    for k in 0..8 {
        let a = verts[k];
        let b = verts[(k + 1) % 8];
        let e = b - a;
        let w = z - a;
        // The hull winds counterclockwise, so interior points sit on the
        // left of every edge.
        if e.re * w.im - e.im * w.re < 0.0 {
            inside = false;
        }
        let t = ((w.re * e.re + w.im * e.im) / (e.re * e.re + e.im * e.im)).clamp(0.0, 1.0);
        let foot = C64::new(a.re + t * e.re, a.im + t * e.im);
        let d = (z - foot).norm_sqr();
        if d < best_d {
            best_d = d;
            best = foot;
        }
    }
    if inside {
        z
    } else {
        best
    }
}

fn octagon_projection_suite(seed: u64, n: usize) -> Result<String, String> {
    let poly = PolytopeP::octagon();
    let mut rng = Rng::new(seed);
    let mut max_dev: f64 = 0.0;
    let mut prev: Option<(C64, C64)> = None;
    for _ in 0..n {
        let z = sample_plane(&mut rng);
        let got = poly.project(z);
        let want = oracle_project_octagon(z);
        let dev = (got - want).norm();
        if dev > 1e-9 {
            return Err(format!(
                "witness z = {}: projection {} vs oracle {}",
                fmt_z(z),
                fmt_z(got),
                fmt_z(want)
            ));
        }
        max_dev = max_dev.max(dev);
        let again = poly.project(got);
        if (again - got).norm() > 1e-12 {
            return Err(format!("projection is not idempotent at z = {}", fmt_z(z)));
        }
        if let Some((zp, gp)) = prev {
            let lhs = (got - gp).norm();
            let rhs = (z - zp).norm();
            if lhs > rhs * (1.0 + 1e-12) + 1e-12 {
                return Err(format!(
                    "expansive pair z1 = {}, z2 = {}: image distance {lhs:.9} vs {rhs:.9}",
                    fmt_z(zp),
                    fmt_z(z)
                ));
            }
        }
        prev = Some((z, got));
    }
    Ok(format!("{n} samples, max deviation {max_dev:.2e}"))
}

fn octagon_canary_suite(seed: u64, n: usize) -> Result<String, String> {
    let corrupted = PolytopeP::octagon().with_l3_slope(3.0);
    let mut rng = Rng::new(seed ^ 0xD1B5_4A32_D192_ED03);
    for i in 0..n {
        let z = sample_plane(&mut rng);
        let got = corrupted.project(z);
        let want = oracle_project_octagon(z);
        if (got - want).norm() > 1e-6 {
            return Ok(format!(
                "wrong steep-line slope caught at witness z = {} after {} samples",
                fmt_z(z),
                i + 1
            ));
        }
    }
    Err(format!(
        "a corrupted steep-line slope survived {n} samples undetected"
    ))
}

fn algebra_suite(seed: u64, n: usize) -> Result<String, String> {
    let dims = [(4usize, 2usize), (8, 3), (16, 4), (32, 8)];
    let mut rng = Rng::new(seed ^ 0x94D0_49BB_1331_11EB);
    let mut worst_gram: f64 = 0.0;
    let mut worst_annihilation: f64 = 0.0;
    for i in 0..n {
        let (b, u) = dims[i % dims.len()];
        let h = draw_channel(&mut rng, u, b);
        let s = gaussian_complex_vector(&mut rng, u, 1.0);
        let inst = ProblemInstance::new(h.clone(), s.clone(), 1.0);
        let aug = build_augmented(&inst).map_err(|e| format!("instance {i}: {e}"))?;

        let stacked = aug.hbar_upsilon().mul(aug.hbar());
        let g = h.gram();
        let s_norm = norm_sq(&s).sqrt();
        let v: Vec<C64> = h
            .conj_transpose()
            .matvec(&s)
            .iter()
            .map(|&e| e / s_norm)
            .collect();
        let mut dev: f64 = 0.0;
        for r in 0..b {
            for c in 0..b {
                let want = g[(r, c)] - v[r] * v[c].conj();
                dev = dev.max((stacked[(r, c)] - want).norm());
            }
        }
        if dev > 1e-12 {
            return Err(format!(
                "instance {i} (B={b}, U={u}): stacked gram deviates by {dev:.3e}"
            ));
        }
        worst_gram = worst_gram.max(dev);

        let x = gaussian_complex_vector(&mut rng, b, 1.0);
        let hx = h.matvec(&x);
        let coef = inner(&s, &hx) / norm_sq(&s);
        let qhx: Vec<C64> = hx.iter().zip(&s).map(|(&w, &si)| w - coef * si).collect();
        let resid = inner(&s, &qhx).norm();
        let bound = 1e-9 * s_norm * norm_sq(&hx).sqrt();
        if resid > bound {
            return Err(format!(
                "instance {i} (B={b}, U={u}): symbol-direction residual {resid:.3e} above {bound:.3e}"
            ));
        }
        worst_annihilation = worst_annihilation.max(resid);
    }
    Ok(format!(
        "{n} instances, gram identity within {worst_gram:.2e}, residual within {worst_annihilation:.2e}"
    ))
}

fn latency_suite() -> Result<String, String> {
    let table = [(32usize, 42u64), (64, 43), (128, 44), (256, 45)];
    for (b, want) in table {
        let cfg = PeArrayConfig::new(b, 16).map_err(|e| format!("B={b}: {e}"))?;
        let got = latency(&cfg).map_err(|e| format!("B={b}: {e}"))?;
        if got != want {
            return Err(format!("B={b}, U=16: latency {got}, expected {want}"));
        }
    }
    let cfg = PeArrayConfig::new(64, 8).map_err(|e| e.to_string())?;
    let got = latency(&cfg).map_err(|e| e.to_string())?;
    if got != 28 {
        return Err(format!("B=64, U=8: latency {got}, expected 28"));
    }
    if PeArrayConfig::new(30, 16).is_ok() {
        return Err("B=30, U=16 must be rejected (B is not a multiple of U)".into());
    }
    let three_arrays = PeArrayConfig::new(48, 16).map_err(|e| e.to_string())?;
    if latency(&three_arrays).is_ok() {
        return Err("B=48, U=16 must have no latency (three arrays cannot fold)".into());
    }
    Ok("B in {32, 64, 128, 256} at U=16, plus a U=8 point and two rejected shapes".into())
}

fn schedule_suite(seed: u64, n: usize) -> Result<String, String> {
    let dims = [(32usize, 16usize), (64, 16)];
    let profile = FixedPointProfile::default();
    let arith_fx = FixedMacArith {
        m_frac: profile.h_fmt.frac_bits,
        v_frac: profile.taux_fmt.frac_bits,
        acc_fmt: profile.mac_w_fmt,
        tree_fmt: profile.adder_tree_fmt,
    };
    let mut rng = Rng::new(seed ^ 0x8664_23F0_13C6_74A1);
    for rep in 0..n {
        for &(b, u) in &dims {
            let cfg = PeArrayConfig::new(b, u).map_err(|e| e.to_string())?;
            let rows = u + 1;
            let m = gaussian_complex_vector(&mut rng, rows * b, 0.25);
            let v = gaussian_complex_vector(&mut rng, b, 0.01);

            let (got, cycles) =
                cannon_matvec_schedule(&cfg, &FloatArith, &m, rows, b, &v, None)
                    .map_err(|e| e.to_string())?;
            let want = matvec_in_schedule_order(&cfg, &FloatArith, &m, rows, b, &v)
                .map_err(|e| e.to_string())?;
            for (p, (g, w)) in got.iter().zip(want.iter()).enumerate() {
                if g.re.to_bits() != w.re.to_bits() || g.im.to_bits() != w.im.to_bits() {
                    return Err(format!(
                        "rep {rep}, B={b}: float replay differs at row {p}: {} vs {}",
                        fmt_z(*g),
                        fmt_z(*w)
                    ));
                }
            }
            let stages = (b / u).trailing_zeros() as u64;
            if cycles.rotate_steps != u as u64 || cycles.tree_stages != stages {
                return Err(format!(
                    "rep {rep}, B={b}: cycle split ({}, {}), expected ({u}, {stages})",
                    cycles.rotate_steps, cycles.tree_stages
                ));
            }

            let mfx: Vec<FxComplex> = m
                .iter()
                .map(|&z| FxComplex::encode(profile.h_fmt, z))
                .collect();
            let vfx: Vec<FxComplex> = v
                .iter()
                .map(|&z| FxComplex::encode(profile.taux_fmt, z))
                .collect();
            let (gfx, _) = cannon_matvec_schedule(&cfg, &arith_fx, &mfx, rows, b, &vfx, None)
                .map_err(|e| e.to_string())?;
            let wfx = matvec_in_schedule_order(&cfg, &arith_fx, &mfx, rows, b, &vfx)
                .map_err(|e| e.to_string())?;
            for (p, (g, w)) in gfx.iter().zip(wfx.iter()).enumerate() {
                if g != w {
                    return Err(format!(
                        "rep {rep}, B={b}: fixed replay differs at row {p}: \
                         ({}, {}) vs ({}, {}) raw",
                        g.re, g.im, w.re, w.im
                    ));
                }
            }
        }
    }
    Ok(format!(
        "{n} instances each at (B, U) = (32, 16) and (64, 16), float and fixed bit-identical"
    ))
}

fn fx_iteration_suite(seed: u64, n: usize) -> Result<String, String> {
    let profile = FixedPointProfile::default();
    let params = FbsParams::new(0.125, 1.6, 1).map_err(|e| e.to_string())?;
    let cfg = PeArrayConfig::new(4, 2).map_err(|e| e.to_string())?;
    let bound = 1.0 / 64.0;
    let mut rng = Rng::new(seed ^ 0x452B_CF9D_17E4_1A7B);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let h = draw_channel(&mut rng, 2, 4);
        let s = gaussian_complex_vector(&mut rng, 2, 1.0);
        let inst = ProblemInstance::new(h, s, 1.0);
        let aug = build_augmented(&inst).map_err(|e| format!("instance {i}: {e}"))?;
        let x: Vec<C64> = (0..4)
            .map(|_| C64::new(rng.next_f64() - 0.5, rng.next_f64() - 0.5))
            .collect();
        for phases in [4u32, 8] {
            let fx = fx_c3po_iteration(&cfg, &profile, &aug, &params, phases, &x)
                .map_err(|e| format!("instance {i}: {e}"))?;
            let g = aug.apply_gram(&x);
            let z: Vec<C64> = x
                .iter()
                .zip(&g)
                .map(|(&xi, &gi)| xi - params.tau * gi)
                .collect();
            let float = PolytopeP::new(phases).prox(&z, params.tau, params.delta);
            for (k, (f, d)) in fx.iter().zip(float.iter()).enumerate() {
                let dev = (f - d).norm();
                if dev > bound {
                    return Err(format!(
                        "instance {i}, P={phases}, entry {k}: datapath {} vs oracle {}, \
                         deviation {dev:.5} above {bound}",
                        fmt_z(*f),
                        fmt_z(*d)
                    ));
                }
                worst = worst.max(dev);
            }
        }
    }
    Ok(format!(
        "{n} instances at both phase counts, worst deviation {worst:.2e} under {bound}"
    ))
}

pub fn run(args: &SelftestArgs) -> Result<(), CliError> {
    let budget = Budget::new(args.quick);
    let seed = args.seed;
    let suites: Vec<(&str, Result<String, String>)> = vec![
        (
            "octagon projection",
            octagon_projection_suite(seed, budget.octagon),
        ),
        (
            "octagon mutation canary",
            octagon_canary_suite(seed, budget.canary),
        ),
        (
            "augmented-channel algebra",
            algebra_suite(seed, budget.algebra),
        ),
        ("iteration latency table", latency_suite()),
        ("schedule replay", schedule_suite(seed, budget.schedule)),
        (
            "fixed-point iteration",
            fx_iteration_suite(seed, budget.fx_iter),
        ),
    ];

    let mut failures = 0;
    for (name, outcome) in &suites {
        match outcome {
            Ok(detail) => println!("{name:<26} PASS  ({detail})"),
            Err(witness) => {
                failures += 1;
                println!("{name:<26} FAIL  ({witness})");
            }
        }
    }
    if failures > 0 {
        return Err(CliError::Runtime(format!(
            "{failures} of {} self-test suites failed",
            suites.len()
        )));
    }
    println!("all {} suites passed", suites.len());
    Ok(())
}
