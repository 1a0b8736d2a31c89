use arda::eval::{bundled_fixture_files, EvalError, Fixtures, Phase, Scenario};
use arda::symlang::{decompose, diff_plans, validate_plan, FrameworkSchema, SlotRole};

fn write_bundle(dir: &std::path::Path) {
    for (rel, bytes) in bundled_fixture_files() {
        let path = dir.join(rel);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, bytes).unwrap();
    }
}

#[test]
fn task_counts_follow_the_evaluation_design() {
    let f = Fixtures::bundled().unwrap();
    assert_eq!(f.tasks.len(), 40);
    assert_eq!(f.task_ids(Phase::Understanding, Scenario::Cold).len(), 10);
    assert_eq!(f.task_ids(Phase::ExploreExploit, Scenario::Warm).len(), 5);
    assert_eq!(f.task_ids(Phase::Grounding, Scenario::Cold).len(), 20);
    assert_eq!(f.task_ids(Phase::Transferability, Scenario::Warm).len(), 5);
    // Cold-start exploration is scored on the understanding tasks.
    let cold_ee = f.sheet_tasks(&f.ee_cold[0]);
    assert_eq!(cold_ee, f.task_ids(Phase::Understanding, Scenario::Cold));
}

#[test]
fn task_texts_are_verbatim() {
    let f = Fixtures::bundled().unwrap();
    assert_eq!(
        f.task("U1").unwrap().text,
        "I want to build an A-share stock market daily portfolio in quantitative investment and minimize the maximum drawdown while maintaining return."
    );
    assert_eq!(
        f.task("U2").unwrap().text,
        "I want to build an A-share stock market daily portfolio in quantitative investment and maximize the return."
    );
    assert!(f.task("T3").unwrap().text.contains("highest Sharpe ratio"));
    assert!(f.task("G1").unwrap().text.contains("Do not apply MinMaxNorm normalization on the data."));
    assert!(f.task("G11").unwrap().text.contains("parameters suitable for small GPU memory"));
}

#[test]
fn bundle_on_disk_loads_identically() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path());
    assert_eq!(Fixtures::load(dir.path()).unwrap(), Fixtures::bundled().unwrap());
}

#[test]
fn tampered_byte_fails_the_checksum() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path());
    let path = dir.path().join("sheets/grounding.toml");
    let mut bytes = std::fs::read(&path).unwrap();
    let i = bytes.iter().position(|b| *b == b'0').unwrap();
    bytes[i] = b'1';
    std::fs::write(&path, bytes).unwrap();
    match Fixtures::load(dir.path()) {
        Err(EvalError::Checksum { file, .. }) => assert_eq!(file, "sheets/grounding.toml"),
        other => panic!("expected a checksum error, got {other:?}"),
    }
}

#[test]
fn missing_fixture_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path());
    std::fs::remove_file(dir.path().join("plans/G7.toml")).unwrap();
    assert!(matches!(Fixtures::load(dir.path()), Err(EvalError::Io(_))));
}

#[test]
fn every_grounding_plan_validates_against_the_demo_schema() {
    let f = Fixtures::bundled().unwrap();
    let schema = FrameworkSchema::demo();
    assert_eq!(f.plans.len(), 20);
    for (id, plan) in &f.plans {
        let report = validate_plan(plan, &schema);
        assert!(report.valid, "{id}: {:?}", report.violations);
        let round = arda::symlang::ExperimentPlan::from_toml_str(&plan.to_toml_string()).unwrap();
        assert_eq!(&round, plan, "{id} round trip");
    }
}

#[test]
fn g1_and_g2_differ_only_in_the_datahandler() {
    let f = Fixtures::bundled().unwrap();
    let delta = diff_plans(&f.plans["G1"], &f.plans["G2"]).unwrap();
    let changed: Vec<&str> = delta.changed_slots.iter().map(|c| c.slot.as_str()).collect();
    assert_eq!(changed, ["datahandler"]);
    assert_eq!(delta.unchanged_slots, ["model", "evaluation"]);
    let change = &delta.changed_slots[0];
    assert_eq!(change.before.as_ref().unwrap().parameters["normalization"].render(), "none");
    assert_eq!(change.after.as_ref().unwrap().parameters["normalization"].render(), "MinMaxNorm");
}

#[test]
fn g11_model_subtask_carries_every_tabnet_parameter() {
    let f = Fixtures::bundled().unwrap();
    let schema = FrameworkSchema::demo();
    let subtasks = decompose(&f.plans["G11"], &schema).unwrap();
    assert_eq!(subtasks.len(), 3);
    let model = subtasks.iter().find(|s| s.slot == "model").unwrap();
    assert_eq!(model.role, SlotRole::Control);
    assert_eq!(model.slot_plan.template, "Tabnet");
    let expected = [
        ("n_d", "8"),
        ("n_a", "8"),
        ("n_steps", "3"),
        ("gamma", "1.3"),
        ("n_independent", "2"),
        ("n_shared", "2"),
        ("epsilon", "1e-15"),
        ("virtual_batch_size", "128"),
        ("momentum", "0.02"),
        ("mask_type", "sparsemax"),
    ];
    assert_eq!(model.slot_plan.parameters.len(), expected.len());
    for (name, value) in expected {
        let v = model.slot_plan.parameters.get(name).unwrap_or_else(|| panic!("missing {name}"));
        match value.parse::<f64>() {
            Ok(x) => assert_eq!(v.as_f64(), Some(x), "{name}"),
            Err(_) => assert_eq!(v.render(), value, "{name}"),
        }
    }
}

#[test]
fn plan_pairs_share_controls_where_the_tasks_say_so() {
    let f = Fixtures::bundled().unwrap();
    for (a, b, slot) in [
        ("G3", "G4", "datahandler"),
        ("G5", "G6", "datahandler"),
        ("G7", "G8", "datahandler"),
        ("G9", "G10", "model"),
        ("G11", "G12", "datahandler"),
        ("G13", "G14", "datahandler"),
        ("G15", "G16", "model"),
        ("G17", "G18", "datahandler"),
        ("G19", "G20", "datahandler"),
    ] {
        let delta = diff_plans(&f.plans[a], &f.plans[b]).unwrap();
        let changed: Vec<&str> = delta.changed_slots.iter().map(|c| c.slot.as_str()).collect();
        assert_eq!(changed, [slot], "{a}/{b}");
    }
}
