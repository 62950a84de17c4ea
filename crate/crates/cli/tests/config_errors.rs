use std::path::Path;

use ifdelay_cli::{ConfigError, ExperimentConfig, Kind};

fn load(kind: Kind, text: &str) -> Result<ExperimentConfig, ConfigError> {
    ExperimentConfig::from_toml(kind, text, Path::new("exp.toml"))
}

#[test]
fn overrides_apply_on_top_of_the_preset() {
    let c = load(Kind::DelayVsRate, "seed = 5\n[analysis]\nrates = [0.3]\n[simulation]\nslots = 10\n").unwrap();
    let preset = ExperimentConfig::preset(Kind::DelayVsRate);
    assert_eq!(c.seed, 5);
    assert_eq!(c.analysis.rates, vec![0.3]);
    assert_eq!(c.simulation.slots, 10);
    assert_eq!(c.scenario, preset.scenario);
    assert_eq!(c.analysis.epsilons, preset.analysis.epsilons);
}

#[test]
fn unknown_key_is_named() {
    let e = load(Kind::Validate, "[scenario]\navg_snr = [3.0]\n").unwrap_err();
    let msg = e.to_string();
    assert!(matches!(e, ConfigError::Parse { .. }));
    assert!(msg.contains("exp.toml") && msg.contains("avg_snr"), "{msg}");
}

#[test]
fn wrong_type_is_a_parse_error() {
    let e = load(Kind::Validate, "[analysis]\nhops = \"two\"\n").unwrap_err();
    assert!(matches!(e, ConfigError::Parse { .. }), "{e}");
    assert!(e.to_string().contains("hops"));
}

#[test]
fn invalid_values_name_their_key() {
    let cases = [
        ("[analysis]\nepsilons = [0.0]\n", "analysis.epsilons"),
        ("[analysis]\nrates = [-1.0]\n", "analysis.rates"),
        ("[analysis]\nhops = 0\n", "analysis.hops"),
        ("[scenario]\navg_sinr_db = []\n", "scenario.avg_sinr_db"),
        ("[scenario]\nsymbols_per_slot = 0.0\n", "scenario.symbols_per_slot"),
        ("[scenario]\nperturbation = -0.5\n", "scenario.perturbation"),
        ("threads = 0\n", "threads"),
        ("[simulation]\nslots = 0\n", "simulation.slots"),
    ];
    for (text, key) in cases {
        match load(Kind::Validate, text) {
            Err(ConfigError::Invalid { key: k, .. }) => assert_eq!(k, key, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
}

#[test]
fn kind_mismatch_is_reported() {
    let e = load(Kind::Validate, "kind = \"delay-vs-rate\"\n").unwrap_err();
    assert!(matches!(
        e,
        ConfigError::KindMismatch {
            file: Kind::DelayVsRate,
            requested: Kind::Validate
        }
    ));
    let e = load(Kind::Validate, "kind = \"figure-9\"\n").unwrap_err();
    assert!(matches!(e, ConfigError::Parse { .. }));
}

#[test]
fn missing_file_reports_the_path() {
    let e = ExperimentConfig::from_file(Kind::Validate, Path::new("/nonexistent/exp.toml")).unwrap_err();
    assert!(matches!(e, ConfigError::Io { .. }));
    assert!(e.to_string().contains("/nonexistent/exp.toml"));
}
