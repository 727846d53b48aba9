use implicit_vqa::experiments::{
    emit_results, run_hyperopt, run_susceptibility, Emit, HyperoptConfig, OutputFormat,
    SusceptibilityConfig, SCHEMA_VERSION,
};
use implicit_vqa::optim::GDConfig;
use implicit_vqa::Error;
use serde_json::Value;

fn small_susceptibility(grid: Vec<f64>) -> implicit_vqa::experiments::SusceptibilityResult {
    run_susceptibility(&SusceptibilityConfig {
        n: 2,
        layers: 1,
        a_grid: grid,
        inner: GDConfig::new(0.1, 2000, 1e-8, 0).unwrap(),
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn empty_grid_is_header_only_csv() {
    let r = small_susceptibility(vec![]);
    assert_eq!(
        r.to_csv(),
        "a,chi_var,chi_exact,energy_var,energy_exact,converged\n"
    );
}

#[test]
fn susceptibility_csv_rows() {
    let r = small_susceptibility(vec![-0.5, 0.5]);
    let csv = r.render(OutputFormat::Csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    for (line, p) in lines[1..].iter().zip(&r.points) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 6);
        assert_eq!(cols[0].parse::<f64>().unwrap(), p.a);
        assert_eq!(cols[2].parse::<f64>().unwrap(), p.chi_exact);
        assert_eq!(cols[5], p.converged.to_string());
    }
}

#[test]
fn json_envelope_carries_schema() {
    let r = small_susceptibility(vec![0.0]);
    let v: Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(v["schema"], "susceptibility");
    assert_eq!(v["schema_version"], SCHEMA_VERSION);
    assert_eq!(v["result"]["points"].as_array().unwrap().len(), 1);
    assert_eq!(v["result"]["metadata"]["n"], 2);
}

#[test]
fn hyperopt_json_has_per_step_arrays() {
    let r = run_hyperopt(&HyperoptConfig {
        layers: 2,
        n_train: 10,
        n_val: 5,
        outer_steps: 2,
        ..Default::default()
    })
    .unwrap();
    let v: Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(v["schema"], "hyperopt");
    let steps = v["result"]["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 3);
    for s in steps {
        assert_eq!(s["hyperparams"].as_array().unwrap().len(), 2);
        assert_eq!(s["hypergradient"].as_array().unwrap().len(), 2);
    }
    assert!(v["result"]["metadata"]["dataset"]
        .as_str()
        .unwrap()
        .contains("circles"));
    let csv = r.to_csv();
    assert!(csv.starts_with("step,validation_loss,train_loss,a_0,a_1\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn re_emission_is_bit_exact() {
    let r = small_susceptibility(vec![0.25]);
    let dir = tempfile::tempdir().unwrap();
    for format in [OutputFormat::Json, OutputFormat::Csv] {
        let p1 = dir.path().join("one");
        let p2 = dir.path().join("two");
        emit_results(&r, &p1, format).unwrap();
        emit_results(&r, &p2, format).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }
}

#[test]
fn io_failures_surface() {
    let r = small_susceptibility(vec![]);
    let dir = tempfile::tempdir().unwrap();
    let err = emit_results(&r, &dir.path().join("missing/out.csv"), OutputFormat::Csv).unwrap_err();
    assert!(matches!(err, Error::Io(_)));
}

#[test]
fn format_names() {
    assert_eq!("JSON".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
    assert_eq!("csv".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
    assert!("xml".parse::<OutputFormat>().is_err());
}
