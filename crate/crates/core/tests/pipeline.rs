use qem_core::cer::CerReport;
use qem_core::circuit::build_w_state_circuit;
use qem_core::experiment::{run_experiment, ExperimentConfig};
use qem_core::metrics::variation_distance;
use qem_core::mitigation::{nox_exact, nox_plan_with_channels, pec_estimate, pec_plan, pec_plan_with_channels, Amplification};
use qem_core::noise::synthetic_noise_model;
use qem_core::simulator::{exact_run, Device};
use qem_core::{Observable, PauliChannel, PauliString};

#[test]
fn single_cycle_cost_and_sample_count() {
    let c = build_w_state_circuit(2).unwrap();
    let xi: PauliString = "XI".parse().unwrap();
    let ch = PauliChannel::from_error_rates(2, [(xi, 0.1)]).unwrap();
    let plan = pec_plan_with_channels(&c, vec![ch; c.m()], 0.05).unwrap();
    let want = 1.25f64.powi(c.m() as i32);
    assert!((plan.c_tot - want).abs() < 1e-12 * want);
    assert_eq!(plan.samples, ((want / 0.05).powi(2)).ceil() as u64);
}

#[test]
fn pec_on_w2_with_exact_reports_is_close_to_ideal() {
    let c = build_w_state_circuit(2).unwrap();
    let noise = synthetic_noise_model(&c, 0.02);
    let reports: Vec<CerReport> = c
        .distinct_hard_cycles()
        .iter()
        .map(|h| CerReport::exact(h, &noise.get(h).unwrap().as_pauli(2).unwrap()).unwrap())
        .collect();
    let plan = pec_plan(&c, &reports, 0.02).unwrap();
    let obs = vec![Observable::Projector("10".into()), Observable::Projector("01".into())];
    let ideal = exact_run::<f64>(&c, None, &obs).unwrap();
    let est = pec_estimate(&plan, &Device::new(noise), &obs, 17).unwrap();
    let bias_bound = 10.0 * c.m() as f64 * 0.02f64.powi(2);
    for o in &obs {
        let v = est.value(o).unwrap();
        let truth = ideal.value(o).unwrap();
        assert!((v.est - truth).abs() <= (3.0 * v.stderr).max(bias_bound), "{o:?}: {} vs {truth} ± {}", v.est, v.stderr);
    }
}

#[test]
fn nox_reduces_bias_on_w_states() {
    for n in 2..=4 {
        let c = build_w_state_circuit(n).unwrap();
        let noise = synthetic_noise_model(&c, 0.02);
        let ideal = exact_run::<f64>(&c, None, &[]).unwrap().distribution;
        let noisy = exact_run(&c, Some(&noise), &[]).unwrap().distribution;
        let plan = nox_plan_with_channels(&c, 3, Amplification::IdentityInsertion, None, 0.02).unwrap();
        let (nox, _) = nox_exact(&plan, &noise, &[]).unwrap().distribution.clip_renormalize();
        let before = variation_distance(&ideal, &noisy).unwrap();
        let after = variation_distance(&ideal, &nox).unwrap();
        assert!(after < 0.25 * before, "n = {n}: {after} vs {before}");
    }
}

#[test]
fn w2_report_has_an_improvement_per_mitigated_method() {
    let cfg = ExperimentConfig::from_json(
        r#"{"circuit": {"builder": "w_state", "n": 2}, "noise": {"synthetic": 0.02},
            "methods": ["none", "nox"], "repetitions": 5, "seed": 3}"#,
    )
    .unwrap();
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.results.len(), 2);
    assert!(report.results[0].improvement.is_none());
    assert!(report.results[1].improvement.unwrap().is_finite());
    assert!(report.results.iter().all(|s| s.runs.len() == 5));
}

#[test]
fn noiseless_runs_stay_at_the_sampling_floor() {
    let dir = tempfile::tempdir().unwrap();
    let noise = dir.path().join("noise.json");
    std::fs::write(&noise, r#"{"cycles": [], "default_noiseless": true}"#).unwrap();
    let cfg = load_config(
        &format!(
            r#"{{"circuit": {{"builder": "w_state", "n": 3}}, "noise": "noise.json",
                "methods": ["none", "pec", "nox"], "sigma": 0.05, "cer": {{"exact": true}},
                "repetitions": 2, "seed": 4, "output": "{}"}}"#,
            dir.path().join("out/report.json").display()
        ),
        dir.path(),
    );
    let report = run_experiment(&cfg).unwrap();
    for s in &report.results {
        for r in &s.runs {
            // every estimator targets a standard deviation of σ per outcome
            let floor = 8f64.sqrt() * 0.05;
            assert!(r.vd <= floor, "{}: {} > {floor}", s.method, r.vd);
        }
    }
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    for s in json["results"].as_array().unwrap() {
        for key in ["circuit", "method", "vd", "vd_stderr"] {
            assert!(s.get(key).is_some(), "missing {key}");
        }
    }
    let csv = std::fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    assert!(csv.starts_with("circuit,method,rep,obs,vd,est,stderr"));
}

fn load_config(s: &str, base: &std::path::Path) -> ExperimentConfig {
    let path = base.join("config.json");
    std::fs::write(&path, s).unwrap();
    ExperimentConfig::load(&path).unwrap()
}
