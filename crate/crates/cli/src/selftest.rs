//! Built-in examples with known answers, exercised end to end in well under a
//! second. Every check states an exact fact (closed-form geometry, parsing
//! grammar, determinism contracts), except one deliberately loose Monte Carlo
//! smoke test that drives the full sampling and gauge stack.

use multinorm::balancing::min_signs_bruteforce;
use multinorm::bounds::TermCount;
use multinorm::norms::{density_at_zero, q_n_cube};
use multinorm::sampling::WeightVector;
use multinorm::{BodySpec, BodyTuple, Estimate, RngStream};
use rand::Rng;

type Check = (&'static str, fn() -> Result<(), String>);

pub fn run() -> i32 {
    let checks: &[Check] = &[
        ("euclidean gauge at (3, 4)", euclidean_gauge),
        ("support of the unit ball", ball_support),
        ("volume-one normalization", volume_one),
        ("cross-polytope volume", cross_volume),
        ("polar radius of the cube", cube_polar_radius),
        ("cube isotropic constant", cube_isotropic_constant),
        ("closed-form cube norm at e1", qn_at_e1),
        ("density of one and two weights", density_small),
        ("antipodal points balance to zero", antipodal_balance),
        ("weight pattern grammar", pattern_grammar),
        ("term count grammar", term_count_grammar),
        ("descriptor round trip", descriptor_round_trip),
        ("exact estimates carry zero error", exact_estimate),
        ("random streams replay", stream_replay),
        ("mean gauge smoke test", mean_gauge_smoke),
    ];
    let mut failed = 0usize;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("ok {name}"),
            Err(msg) => {
                failed += 1;
                println!("FAILED {name}: {msg}");
            }
        }
    }
    if failed == 0 {
        println!("selftest: {} checks passed", checks.len());
        0
    } else {
        eprintln!("selftest: {failed} checks failed");
        2
    }
}

fn expect_close(got: f64, want: f64, tol: f64, what: &str) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, want {want}"))
    }
}

fn euclidean_gauge() -> Result<(), String> {
    let ball = BodySpec::parse("lp:2:2").map_err(|e| e.to_string())?;
    expect_close(ball.gauge(&[3.0, 4.0]), 5.0, 1e-12, "gauge")
}

fn ball_support() -> Result<(), String> {
    let ball = BodySpec::parse("lp:2:2").map_err(|e| e.to_string())?;
    expect_close(ball.support(&[0.0, 3.0]), 3.0, 1e-12, "support")
}

fn volume_one() -> Result<(), String> {
    for desc in ["lp:inf:8:vol1", "lp:2:8:vol1", "lp:1:8:vol1", "lp:4:8:vol1"] {
        let body = BodySpec::parse(desc).map_err(|e| e.to_string())?;
        expect_close(body.log_volume(), 0.0, 1e-10, desc)?;
    }
    Ok(())
}

fn cross_volume() -> Result<(), String> {
    // unit cross-polytope in R^3: 2^3 / 3!
    let body = BodySpec::parse("lp:1:3").map_err(|e| e.to_string())?;
    expect_close(body.volume(), 4.0 / 3.0, 1e-12, "volume")
}

fn cube_polar_radius() -> Result<(), String> {
    // side-one cube: the gauge peaks at 2 on the unit sphere, any dimension
    for n in [2usize, 16] {
        let cube = BodySpec::parse(&format!("lp:inf:{n}:vol1")).map_err(|e| e.to_string())?;
        expect_close(cube.polar_radius(), 2.0, 1e-12, "polar radius")?;
    }
    Ok(())
}

fn cube_isotropic_constant() -> Result<(), String> {
    let cube = BodySpec::parse("lp:inf:6:vol1").map_err(|e| e.to_string())?;
    let l = cube.isotropic_constant().map_err(|e| e.to_string())?;
    expect_close(l, (1.0f64 / 12.0).sqrt(), 1e-9, "isotropic constant")
}

fn qn_at_e1() -> Result<(), String> {
    let e1 = WeightVector::new(vec![1.0, 0.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
    expect_close(q_n_cube(&e1, 16), 1.0, 1e-12, "q_16(e1)")
}

fn density_small() -> Result<(), String> {
    let single = WeightVector::new(vec![1.0]).map_err(|e| e.to_string())?;
    expect_close(density_at_zero(&single).map_err(|e| e.to_string())?, 1.0, 1e-12, "one weight")?;
    let pair = WeightVector::new(vec![std::f64::consts::FRAC_1_SQRT_2; 2])
        .map_err(|e| e.to_string())?;
    expect_close(
        density_at_zero(&pair).map_err(|e| e.to_string())?,
        std::f64::consts::SQRT_2,
        1e-12,
        "two flat weights",
    )
}

fn antipodal_balance() -> Result<(), String> {
    let ball = BodySpec::parse("lp:2:2").map_err(|e| e.to_string())?;
    let points = vec![vec![0.6, 0.8], vec![0.6, 0.8]];
    let best = min_signs_bruteforce(&points, &ball).map_err(|e| e.to_string())?;
    expect_close(best.achieved, 0.0, 1e-12, "achieved gauge")
}

fn pattern_grammar() -> Result<(), String> {
    let stream = RngStream::new(1);
    let (flat, label) = WeightVector::parse("pattern:uniform:4", stream).map_err(|e| e.to_string())?;
    if label != "flat" {
        return Err(format!("uniform alias labeled `{label}`"));
    }
    for &w in flat.entries() {
        expect_close(w, 0.5, 1e-12, "flat entry")?;
    }
    let (_, label) = WeightVector::parse("pattern:decay:3", stream).map_err(|e| e.to_string())?;
    if label != "geometric" {
        return Err(format!("decay alias labeled `{label}`"));
    }
    let (custom, label) = WeightVector::parse("0.5, -0.5", stream).map_err(|e| e.to_string())?;
    if label != "custom" || custom.len() != 2 {
        return Err("literal weight list mishandled".into());
    }
    Ok(())
}

fn term_count_grammar() -> Result<(), String> {
    if TermCount::parse("n").map_err(|e| e.to_string())? != TermCount::MatchDim {
        return Err("`n` should track the dimension".into());
    }
    if TermCount::parse("16").map_err(|e| e.to_string())? != TermCount::Fixed(16) {
        return Err("numeric term count mishandled".into());
    }
    if TermCount::parse("0").is_ok() {
        return Err("zero term count accepted".into());
    }
    Ok(())
}

fn descriptor_round_trip() -> Result<(), String> {
    for desc in ["lp:2:4", "lp:inf:16:vol1", "lp:1.5:8:vol1", "lp:1:4:vol1:rot=9"] {
        let body = BodySpec::parse(desc).map_err(|e| e.to_string())?;
        let reparsed = BodySpec::parse(&body.descriptor()).map_err(|e| e.to_string())?;
        if reparsed.descriptor() != body.descriptor() {
            return Err(format!(
                "`{desc}` re-parses to `{}`, expected `{}`",
                reparsed.descriptor(),
                body.descriptor()
            ));
        }
    }
    Ok(())
}

fn exact_estimate() -> Result<(), String> {
    let e = Estimate::exact(2.0);
    if e.stderr != 0.0 || e.ci95 != (2.0, 2.0) {
        return Err(format!("exact(2) gave stderr {} ci {:?}", e.stderr, e.ci95));
    }
    Ok(())
}

fn stream_replay() -> Result<(), String> {
    let draw = || RngStream::new(7).child_from_key("replay").rng().gen::<u64>();
    if draw() != draw() {
        return Err("same (seed, key) produced different draws".into());
    }
    if draw() == RngStream::new(8).child_from_key("replay").rng().gen::<u64>() {
        return Err("different seeds collided".into());
    }
    Ok(())
}

fn mean_gauge_smoke() -> Result<(), String> {
    // E gauge_K(x) = n/(n+1) for x uniform on K; n = 2, generous tolerance.
    let ball = BodySpec::parse("lp:2:2:vol1").map_err(|e| e.to_string())?;
    let t = WeightVector::new(vec![1.0]).map_err(|e| e.to_string())?;
    let est = multinorm::norms::estimate_norm(
        &BodyTuple::Common(ball.clone()),
        &t,
        &ball,
        4000,
        RngStream::new(42).child_from_key("selftest"),
    )
    .map_err(|e| e.to_string())?;
    expect_close(est.value, 2.0 / 3.0, 0.05, "mean gauge")
}
