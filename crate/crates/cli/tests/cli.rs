//! End-to-end runs of the `qekit` binary in scratch directories.

use std::path::Path;
use std::process::Command;

use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qekit(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_qekit"))
        .args(args)
        .current_dir(dir)
        .env("QEKIT_THREADS", "1")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn ok(dir: &Path, args: &[&str]) -> Run {
    let r = qekit(dir, args);
    assert_eq!(r.code, 0, "qekit {args:?} failed: {}", r.stderr);
    r
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// `data-y` values of the SVG series named `name`.
fn svg_series(svg: &str, name: &str) -> Vec<f64> {
    let tag = format!(r#"data-name="{name}""#);
    let start = svg.find(&tag).unwrap_or_else(|| panic!("series {name} missing"));
    let rest = &svg[start..];
    let y = &rest[rest.find(r#"data-y=""#).unwrap() + 8..];
    y[..y.find('"').unwrap()].split(',').map(|v| v.parse().unwrap()).collect()
}

#[test]
fn radlife_prints_75_ns() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(dir.path(), &["radlife", "--e-zpl", "1.62", "--mu", "0.59", "--n", "2.4"]);
    let tau: f64 = r.stdout.trim().trim_start_matches("tau_rad = ").trim_end_matches(" ns").parse().unwrap();
    assert!((tau / 75.0 - 1.0).abs() < 0.05, "{}", r.stdout);
}

#[test]
fn exit_code_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), "power,fwhm_ev,sigma\n1,2\n").unwrap();
    std::fs::write(d.join("wrong_header.csv"), "x,y,z\n1,2,3\n").unwrap();
    std::fs::write(d.join("extra.toml"), "bogus = 1\n").unwrap();

    let unknown = qekit(d, &["frobnicate"]);
    assert_eq!(unknown.code, 2);
    assert!(unknown.stderr.contains("Usage"), "{}", unknown.stderr);
    assert_eq!(qekit(d, &[]).code, 2);
    assert_eq!(qekit(d, &["power-fit", "-i", "missing.csv"]).code, 2);
    assert_eq!(qekit(d, &["power-fit", "-i", "bad.csv"]).code, 2);
    assert_eq!(qekit(d, &["power-fit", "-i", "wrong_header.csv"]).code, 2);
    assert_eq!(qekit(d, &["power-fit", "-i", "bad.csv", "--config", "extra.toml"]).code, 2);
    assert_eq!(qekit(d, &["radlife", "--e-zpl", "1.62", "--mu", "0.59"]).code, 2);
    assert_eq!(qekit(d, &["radlife", "--e-zpl", "1.62", "--mu", "0.59", "--n", "2.4", "--set", "nonsense=1"]).code, 2);
    assert_eq!(qekit(d, &["synth", "--kind", "nothing", "-o", "x.csv"]).code, 2);

    ok(d, &["synth", "-o", "vib.csv", "--s-hr", "0.72"]);
    let capped = qekit(d, &["vibronic-fit", "-i", "vib.csv", "-o", "capped.json", "--set", "fit.max_iterations=1"]);
    assert_eq!(capped.code, 1, "{}", capped.stderr);
    assert_eq!(json(&d.join("capped.json"))["converged"], Value::Bool(false));
    ok(d, &["vibronic-fit", "-i", "vib.csv", "-o", "fit.json"]);
}

#[test]
fn vibronic_fit_recovers_synth_truth() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "-o", "vib.csv", "--s-hr", "1.70", "--seed", "3"]);
    ok(d, &["vibronic-fit", "-i", "vib.csv", "-o", "fit.json", "--plot"]);
    let truth = json(&d.join("vib.report.json"))["truth"]["true_s_hr"].as_str().unwrap().parse::<f64>().unwrap();
    let r = json(&d.join("fit.json"));
    assert!((r["s_hr"].as_f64().unwrap() - truth).abs() <= 0.02, "S = {}", r["s_hr"]);
    assert_eq!(r["converged"], Value::Bool(true));
    assert!(r["chi2_reduced"].is_number());

    let closure = r["zpl_weight"].as_f64().unwrap()
        + r["n_phonon"].as_array().unwrap().iter().map(|c| c["weight"].as_f64().unwrap()).sum::<f64>();
    assert!((closure - 1.0).abs() <= 1e-6, "closure {closure}");

    let svg = std::fs::read_to_string(d.join("fit.svg")).unwrap();
    for name in ["data", "model", "ZPL", "n = 1", "n = 2"] {
        assert!(svg.contains(&format!(r#"data-name="{name}""#)), "{name}");
    }
}

#[test]
fn scalar_reports_carry_schema_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases = [
        ("power_broadening", "power-fit", "gamma0_ev", "true_gamma0_ev"),
        ("temperature_broadening", "temp-fit", "b_ev_per_k5", "true_b_ev_per_k5"),
        ("saturation", "sat-fit", "p_sat", "true_p_sat"),
        ("g2", "g2-fit", "g2_zero_raw", "true_alpha"),
        ("lifetime", "lifetime-fit", "tau_ns", "true_tau_ns"),
    ];
    for (kind, cmd, key, truth_key) in cases {
        let data = format!("{kind}.csv");
        let report = format!("{kind}.json");
        ok(d, &["synth", "--kind", kind, "-o", &data]);
        ok(d, &[cmd, "-i", &data, "-o", &report]);
        let r = json(&d.join(&report));
        assert_eq!(r["converged"], Value::Bool(true), "{cmd}");
        assert!(r["chi2_reduced"].is_number(), "{cmd}");
        assert_eq!(r["command"], Value::from(cmd));
        let fitted = r[key].as_f64().unwrap_or_else(|| panic!("{cmd}: no {key} in {r}"));
        let truth: f64 = json(&d.join(format!("{kind}.report.json")))["truth"][truth_key].as_str().unwrap().parse().unwrap();
        let expected = if key == "g2_zero_raw" { 1.0 - truth } else { truth };
        assert!((fitted / expected - 1.0).abs() < 1e-3, "{cmd}: {fitted} vs {expected}");
    }
}

#[test]
fn temp_fit_svg_components_sum_to_total() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--kind", "temperature_broadening", "--noise", "gaussian", "-o", "t.csv"]);
    ok(d, &["temp-fit", "-i", "t.csv", "-o", "t.json", "--plot"]);
    let svg = std::fs::read_to_string(d.join("t.svg")).unwrap();
    let parts = [svg_series(&svg, "Γ₀"), svg_series(&svg, "aT"), svg_series(&svg, "bT⁵")];
    let total = svg_series(&svg, "total");
    assert!(total.len() > 10);
    for (i, t) in total.iter().enumerate() {
        let sum: f64 = parts.iter().map(|p| p[i]).sum();
        assert!((sum - t).abs() <= 1e-9, "point {i}: {sum} vs {t}");
    }
}

#[test]
fn rerun_from_report_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--kind", "saturation", "--noise", "poisson", "--seed", "5", "-o", "sat.csv"]);
    ok(d, &["synth", "--kind", "cube", "--seed", "9", "-o", "cube.json"]);
    ok(d, &["synth", "--noise", "poisson", "--seed", "2", "-o", "vib.csv"]);
    let runs: [&[&str]; 4] = [
        &["sat-fit", "-i", "sat.csv", "--background", "true", "-o", "a.json", "--plot"],
        &["survey", "-i", "cube.json", "--min-snr", "6", "-o", "b.json"],
        &["vibronic-fit", "-i", "vib.csv", "--zpl-shape", "lorentzian", "-o", "c.json"],
        &["radlife", "--e-zpl", "1.48", "--mu", "0.51", "--n", "2.4", "-o", "d.json"],
    ];
    for args in runs {
        ok(d, args);
        let first = args[args.iter().position(|a| *a == "-o").unwrap() + 1];
        ok(d, &[args[0], "--config", first, "-o", "again.json"]);
        assert_eq!(
            std::fs::read(d.join(first)).unwrap(),
            std::fs::read(d.join("again.json")).unwrap(),
            "{} report differs on re-run",
            args[0]
        );
    }
    // the synth report re-runs to the same data file
    ok(d, &["synth", "--config", "vib.report.json", "-o", "vib2.csv"]);
    assert_eq!(std::fs::read(d.join("vib.csv")).unwrap(), std::fs::read(d.join("vib2.csv")).unwrap());
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (name, seed) in [("a", "17"), ("b", "17"), ("c", "18")] {
        ok(d, &["synth", "--noise", "poisson", "--seed", seed, "-o", &format!("{name}.csv")]);
        ok(d, &["synth", "--kind", "cube", "--seed", seed, "-o", &format!("{name}_cube.json")]);
    }
    let read = |f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
    assert_eq!(read("a_cube.f64le"), read("b_cube.f64le"));
    assert_ne!(read("a_cube.f64le"), read("c_cube.f64le"));
}

#[test]
fn convert_round_trips_through_energy() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "-o", "vib.csv"]);
    ok(d, &["convert", "-i", "vib.csv", "--to", "energy", "-o", "e.csv"]);
    ok(d, &["convert", "-i", "e.csv", "--to", "wavelength", "-o", "w.csv"]);
    let a = json(&d.join("e.report.json"))["integral"].as_f64().unwrap();
    let b = json(&d.join("w.report.json"))["integral"].as_f64().unwrap();
    assert!(a > 0.0 && b > 0.0);
    ok(d, &["convert", "-i", "vib.csv", "--to", "lineshape", "-o", "l.csv"]);
    assert_eq!(json(&d.join("l.report.json"))["e_zpl_hint_ev"], Value::from(1.567));
}

#[test]
fn temp_series_flags_constant_s() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::create_dir(d.join("series")).unwrap();
    for t in ["4", "12", "24", "40"] {
        ok(d, &["synth", "--temperature-k", t, "--noise", "poisson", "--seed", t, "-o", &format!("series/t{t}.csv")]);
    }
    ok(d, &["temp-series", "-i", "series", "-o", "ts.json"]);
    let r = json(&d.join("ts.json"));
    assert_eq!(r["temperature_independent"], Value::Bool(true));
    assert_eq!(r["points"].as_array().unwrap().len(), 4);
}

#[test]
fn config_file_and_flags_layer() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.toml"), "[params]\ne_zpl_ev = 1.62\nmu_e_angstrom = 0.59\nrefractive_index = 2.0\n").unwrap();
    ok(d, &["radlife", "--config", "run.toml", "--n", "2.4", "-o", "r.json"]);
    let r = json(&d.join("r.json"));
    assert_eq!(r["refractive_index"], Value::from(2.4));
    assert_eq!(r["resolved_config"]["params"]["e_zpl_ev"], Value::from(1.62));
}
