use serde_json::Value;
use switchlearn::dynamics::BenchmarkName;
use switchlearn::experiment::ExperimentConfig;

fn schema() -> Value {
    let text = include_str!("../schema/experiment_config.schema.json");
    serde_json::from_str(text).unwrap()
}

/// Every object in `value` has exactly the keys its schema lists, and every
/// schema default equals the serialized default.
fn check(schema: &Value, value: &Value, path: &str) {
    let Some(props) = schema.get("properties").and_then(Value::as_object) else {
        return;
    };
    assert_eq!(schema["additionalProperties"], Value::Bool(false), "{path} must reject unknown keys");
    let obj = value.as_object().unwrap_or_else(|| panic!("{path} is not an object"));
    let mut want: Vec<&String> = props.keys().collect();
    let mut got: Vec<&String> = obj.keys().collect();
    want.sort();
    got.sort();
    assert_eq!(got, want, "keys of {path}");
    for (k, sub) in props {
        let v = &obj[k];
        if let Some(d) = sub.get("default") {
            match (d.as_f64(), v.as_f64()) {
                (Some(a), Some(b)) => assert_eq!(a, b, "default of {path}.{k}"),
                _ => assert_eq!(d, v, "default of {path}.{k}"),
            }
        }
        check(sub, v, &format!("{path}.{k}"));
    }
}

#[test]
fn schema_matches_serialized_config() {
    let s = schema();
    let mut cfg = ExperimentConfig::for_benchmark(BenchmarkName::Oscillator2);
    cfg.train.shuffle_seed = 0;
    let v: Value = serde_json::from_str(&cfg.canonical_json()).unwrap();
    check(&s, &v, "config");
}

#[test]
fn required_keys_suffice() {
    let s = schema();
    let cfg = ExperimentConfig::for_benchmark(BenchmarkName::Pendulum);
    let mut v: Value = serde_json::from_str(&cfg.canonical_json()).unwrap();
    for section in ["net", "train", "adaptive"] {
        let required: Vec<String> = s["properties"][section]
            .get("required")
            .and_then(Value::as_array)
            .map(|a| a.iter().map(|x| x.as_str().unwrap().to_string()).collect())
            .unwrap_or_default();
        v[section].as_object_mut().unwrap().retain(|k, _| required.contains(k));
    }
    let parsed = ExperimentConfig::from_json(&v.to_string()).unwrap();
    assert_eq!(parsed.net, cfg.net);
    assert_eq!(parsed.adaptive, cfg.adaptive);
    assert_eq!(parsed.train.epochs, cfg.train.epochs);
    assert_eq!(parsed.train.shuffle_seed, 0);
}
