use std::process::Command;
use std::time::{Duration, Instant};

use torickems::exact::{frac, to_q};
use torickems::fixture::fixture;
use torickems::flow::Growth;
use torickems::invariants::{futaki_exact, solve_soliton_vector};
use torickems::mis::{MISReport, Status};
use torickems::polytope::weyl_group;
use torickems::potentials::PotentialModel;
use torickems::quadrature::PolytopeIntegrator;
use torickems::selftest::route_agreement;
use torickems::summary::Analysis;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn torickems(args: &[&str]) -> Result<(String, i32), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_torickems")).args(args).output().map_err(|e| e.to_string())?;
    let code = out.status.code().unwrap_or(-1);
    if code != 0 {
        return Err(format!("exit {code}: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok((String::from_utf8(out.stdout).map_err(|e| e.to_string())?, code))
}

fn analysis(fixture: &str, mode: &str) -> Result<Analysis, String> {
    let (out, _) = torickems(&["analyze", "--fixture", fixture, "--mode", mode, "--format", "json"])?;
    let a = Analysis::from_json(&out).map_err(|e| e.to_string())?;
    ensure(a.to_json() + "\n" == out, || "JSON does not round-trip byte-identically".into())?;
    Ok(a)
}

fn flow(fixture: &str) -> Result<MISReport, String> {
    let (out, _) = torickems(&["flow", "--fixture", fixture, "--format", "json"])?;
    let r = MISReport::from_json(&out).map_err(|e| e.to_string())?;
    ensure(r.to_json() + "\n" == out, || "JSON does not round-trip byte-identically".into())?;
    Ok(r)
}

fn is_weyl_image(name: &str, v: &[i64], target: &[i64]) -> bool {
    let (p, _) = fixture(name).unwrap().build().unwrap();
    weyl_group(&p).iter().any(|g| g.apply_n(target) == v)
}

fn criterion_1() -> Check {
    let a = analysis("dp1", "ke")?;
    let r = &a.report;
    ensure(r.conclusion == "KE-MIS = E", || r.conclusion.clone())?;
    let plus = r.candidates.iter().find(|c| c.label.as_deref() == Some("(+1)-curve")).ok_or("no (+1)-curve candidate")?;
    ensure(plus.status == Status::Excluded, || "(+1)-curve not excluded".into())?;
    let cert = plus.certificate.clone().ok_or("no certificate")?;
    ensure(is_weyl_image("dp1", &cert, &[-1, -1]), || format!("certificate {cert:?}"))?;
    let surv = r.surviving();
    ensure(surv.len() == 1 && surv[0].label.as_deref() == Some("E"), || "E is not the unique survivor".into())?;
    Ok(format!("(+1)-curve excluded by ξ = {cert:?}; E survives"))
}

fn criterion_2() -> Check {
    let a = analysis("dp1", "krs")?;
    let r = &a.report;
    ensure(r.surviving().is_empty(), || r.conclusion.clone())?;
    let cert = |label: &str| {
        r.candidates.iter().find(|c| c.label.as_deref() == Some(label)).and_then(|c| c.certificate.clone())
    };
    let (e, plus) = (cert("E").ok_or("E not excluded")?, cert("(+1)-curve").ok_or("(+1)-curve not excluded")?);
    ensure(e == [1, 1] && plus == [-1, -1], || format!("certificates {e:?}, {plus:?}"))?;
    ensure(r.conclusion.contains("no admissible candidate survives"), || r.conclusion.clone())?;
    Ok(format!("E by η = {e:?}, (+1)-curve by η = {plus:?}"))
}

fn criterion_3() -> Check {
    let mut detail = Vec::new();
    for (name, xi, bary) in [("dp1", [-1, -1], frac(1, 12)), ("dp2", [1, 1], frac(-2, 21))] {
        let (p, fan) = fixture(name).unwrap().build().map_err(|e| e.to_string())?;
        let m = p.exact_moments(&fan);
        ensure(m.barycenter == [bary.clone(), bary.clone()], || format!("{name} barycenter {:?}", m.barycenter))?;
        let f = futaki_exact(&p, &fan, &to_q(&xi));
        ensure(f > frac(0, 1), || format!("{name}: F = {f}"))?;
        detail.push(format!("{name} F{xi:?} = {f}"));
    }
    for name in ["dp3", "cp2", "cp1xcp1"] {
        let (p, fan) = fixture(name).unwrap().build().map_err(|e| e.to_string())?;
        for xi in [[1, 0], [0, 1]] {
            let f = futaki_exact(&p, &fan, &to_q(&xi));
            ensure(f == frac(0, 1), || format!("{name}: F{xi:?} = {f}"))?;
        }
    }
    detail.push("F ≡ 0 on dp3, cp2, cp1xcp1".into());
    Ok(detail.join("; "))
}

fn criterion_4() -> Check {
    let (p, fan) = fixture("dp2").unwrap().build().map_err(|e| e.to_string())?;
    let integ = PolytopeIntegrator::new(&p, &fan);
    let sol = solve_soliton_vector(&p, &integ, 1e-12).map_err(|e| e.to_string())?;
    let beta = sol.xi_s[0];
    ensure(beta > 0.0, || format!("β = {beta}"))?;
    ensure((sol.xi_s[0] - sol.xi_s[1]).abs() <= 1e-10, || format!("ξ_s = {:?}", sol.xi_s))?;
    ensure(sol.grad_norm <= 1e-10, || format!("gradient norm {:e}", sol.grad_norm))?;
    ensure((sol.b - 3.0 * beta).abs() <= 1e-9, || format!("b = {}, 3β = {}", sol.b, 3.0 * beta))?;
    ensure((sol.threshold - (2.0 + sol.b) / (3.0 + sol.b)).abs() <= 1e-15, || "threshold".into())?;
    // derivative of t ↦ log I0(t(1,1)) is the diagonal weighted mean
    let slope = |t: f64| integ.integrals(&[t, t]).weighted_mean().iter().sum::<f64>();
    let (mut lo, mut hi) = (0.0, 2.0);
    ensure(slope(lo) < 0.0 && slope(hi) > 0.0, || "oracle bracket".into())?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let oracle = 0.5 * (lo + hi);
    ensure((oracle - beta).abs() <= 1e-9, || format!("bisection {oracle} vs Newton {beta}"))?;
    Ok(format!("β = {beta:.12}, bisection {oracle:.12}, b = {:.10}", sol.b))
}

fn criterion_5() -> Check {
    Ok(format!("dp1: {}; dp2: {}", route_agreement("dp1")?, route_agreement("dp2")?))
}

fn criterion_6() -> Check {
    let (p, _) = fixture("dp2").unwrap().build().map_err(|e| e.to_string())?;
    let model = PotentialModel::from_polytope(&p);
    let mut detail = Vec::new();
    for (x, limit) in [([0.0, 40.0], [-0.5, 1.0]), ([0.0, -40.0], [0.0, -1.0])] {
        let y = model.grad(&x);
        let d = (y[0] - limit[0]).abs().max((y[1] - limit[1]).abs());
        ensure(d <= 1e-6, || format!("μ{x:?} = {y:?}"))?;
        detail.push(format!("μ{x:?} = ({:.9}, {:.9})", y[0], y[1]));
    }
    Ok(detail.join(", "))
}

fn criterion_7() -> Check {
    let r = flow("dp2")?;
    let f = r.flow.as_ref().ok_or("no flow details")?;
    for alpha in [0.7, 0.8, 0.9] {
        let series = |facet: &str| f.series.iter().find(|s| s.facet == facet && s.alpha == alpha);
        for facet in ["F(0,1)", "F(1,0)", "F(1,1)"] {
            let s = series(facet).ok_or(format!("missing {facet}"))?;
            ensure(matches!(s.growth, Growth::Divergent { .. }), || format!("{facet} at α = {alpha}: {:?}", s.growth))?;
        }
        for facet in ["F(0,-1)", "F(-1,0)"] {
            let s = series(facet).ok_or(format!("missing {facet}"))?;
            ensure(matches!(s.growth, Growth::Bounded { .. }), || format!("{facet} at α = {alpha}: {:?}", s.growth))?;
        }
        let predicted = (2.0 * alpha - 1.0) * f.beta;
        let slope = series("F(0,1)").unwrap().growth.slope();
        ensure((slope - predicted).abs() <= 0.1 * predicted, || format!("α = {alpha}: slope {slope}, predicted {predicted}"))?;
    }
    let mut mis = f.mis.clone();
    mis.sort();
    ensure(mis == ["F(0,1)", "F(1,0)", "F(1,1)"], || format!("MIS {mis:?}"))?;
    Ok(format!("MIS = {}", f.mis.join(" ∪ ")))
}

fn criterion_8() -> Check {
    let r = flow("dp1")?;
    let f = r.flow.as_ref().ok_or("no flow details")?;
    ensure(f.mis == ["F(-1,-1)"], || format!("MIS {:?}", f.mis))?;
    Ok(format!("MIS = {} ({})", f.mis[0], r.conclusion))
}

fn criterion_9() -> Check {
    let (out, _) = torickems(&["selftest", "--format", "json"])?;
    let v: serde_json::Value = serde_json::from_str(&out).map_err(|e| e.to_string())?;
    let checks = v.as_array().ok_or("not an array")?;
    let failed: Vec<&str> = checks.iter().filter(|c| c["passed"] != true).filter_map(|c| c["name"].as_str()).collect();
    ensure(failed.is_empty(), || format!("failing: {failed:?}"))?;
    for needle in ["derivative", "second_moment_pd", "pick", "futaki_weyl", "soliton", "certificate_soundness", "translation_ordering", "ma_density_bounded"] {
        ensure(checks.iter().any(|c| c["name"].as_str().is_some_and(|n| n.starts_with(needle))), || format!("no {needle} check"))?;
    }
    Ok(format!("{} checks passed", checks.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check, Duration); 9] = [
        ("dP1 KE-MIS = E", criterion_1, Duration::from_secs(1)),
        ("dP1 KRS excludes both candidates", criterion_2, Duration::from_secs(1)),
        ("exact Futaki signs", criterion_3, Duration::from_secs(60)),
        ("dP2 soliton vector", criterion_4, Duration::from_secs(1)),
        ("Tian–Zhu route agreement", criterion_5, Duration::from_secs(30)),
        ("dP2 moment-map limits", criterion_6, Duration::from_secs(60)),
        ("dP2 flow MIS", criterion_7, Duration::from_secs(60)),
        ("dP1 flow MIS", criterion_8, Duration::from_secs(60)),
        ("property suites", criterion_9, Duration::from_secs(60)),
    ];
    let mut failures = 0;
    for (k, (title, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > *budget => Err(format!("{d}; took {elapsed:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(d) => println!("criterion {}: PASS {title} [{elapsed:.2?}] {d}", k + 1),
            Err(d) => {
                failures += 1;
                println!("criterion {}: FAIL {title} [{elapsed:.2?}] {d}", k + 1);
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
