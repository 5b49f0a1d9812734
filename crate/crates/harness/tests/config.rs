use scbf_mppi::config::{ExperimentConfig, Mode};

#[test]
fn default_config_round_trips() {
    let cfg = ExperimentConfig::default();
    cfg.validate().unwrap();
    let back = ExperimentConfig::from_json(&cfg.to_json_pretty()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn missing_keys_take_defaults() {
    let cfg = ExperimentConfig::from_json(r#"{"controller": {"samples": 64, "mode": "plain"}}"#).unwrap();
    assert_eq!(cfg.controller.samples, 64);
    assert_eq!(cfg.controller.mode, Mode::Plain);
    assert_eq!(cfg.environment, ExperimentConfig::default().environment);
    assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
}

#[test]
fn unknown_keys_are_rejected() {
    for text in [
        r#"{"plant": {}}"#,
        r#"{"controller": {"samples": 10, "sample": 10}}"#,
        r#"{"environment": {"noise": 0.1}}"#,
        r#"{"cost": {"state_weight": 1.0, "Q": 1.0}}"#,
        r#"{"safety": {"delta": 0.003}}"#,
        r#"{"complexity": {"eps": 0.1}}"#,
    ] {
        assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
    }
}

#[test]
fn invalid_values_are_rejected() {
    for text in [
        r#"{"controller": {"trials": 0}}"#,
        r#"{"controller": {"samples": 0}}"#,
        r#"{"controller": {"dt": -0.1}}"#,
        r#"{"controller": {"temperature": 0.0}}"#,
        r#"{"controller": {"mode": "mpc"}}"#,
        r#"{"environment": {"start": [0.0, 3.0, 0.0]}}"#,
        r#"{"environment": {"vicinity_radius": 0.0}}"#,
        r#"{"environment": {"process_noise_scale": -1.0}}"#,
        r#"{"safety": {"safety_probability": 1.0}}"#,
        r#"{"safety": {"alpha_form": "quadratic"}}"#,
        r#"{"complexity": {"rho1": 0.0}}"#,
        r#"{"complexity": {"step": 0}}"#,
        r#"{"cost": {"control_weight": [-1.0, 1.0]}}"#,
    ] {
        assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
    }
}

#[test]
fn mode_names_parse() {
    assert_eq!(Mode::parse("plain").unwrap(), Mode::Plain);
    assert_eq!(Mode::parse("scbf").unwrap(), Mode::Scbf);
    assert!(Mode::parse("SCBF-MPPI").is_err());
    assert_eq!(Mode::Scbf.name(), "scbf");
}
