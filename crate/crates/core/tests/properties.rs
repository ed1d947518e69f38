use std::path::PathBuf;

use gsc_core::environment::{Environment, ScenarioConfig};
use gsc_core::simulator::{post_process, ActionTensor};
use gsc_core::topology::{load_topology, ActionMask, ParameterOverrides};
use proptest::prelude::*;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/topologies")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn post_processed_rows_are_distributions(
        nodes in 1usize..=12,
        values in prop::collection::vec(0.0f64..1.0, 3 * 12 * 12),
    ) {
        let mask = ActionMask::new(nodes, 3, 12);
        let raw = ActionTensor::from_vec(3, 12, values).unwrap();
        let x = post_process(&raw, &mask, 0.1).unwrap();
        for i in 0..3 {
            for j in 0..nodes {
                let row = x.row(i, j);
                let sum: f64 = row.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-6);
                prop_assert!(row.iter().all(|&p| p == 0.0 || p >= 0.1));
            }
        }
        let dense = x.to_dense();
        for (f, &p) in dense.iter().enumerate() {
            if !mask.is_valid_flat(f) {
                prop_assert_eq!(p, 0.0);
            }
        }
    }
}

#[test]
fn bundled_topologies_load_with_sidecars() {
    for (name, nodes, links) in [("Abilene", 11, 14), ("Claranet", 15, 18), ("Compuserve", 14, 17), ("BtEurope", 24, 37)] {
        let dir = data_dir();
        let overrides = ParameterOverrides::load(dir.join(format!("{name}.overrides.toml"))).unwrap();
        let t = load_topology(dir.join(format!("{name}.graphml")), &overrides).unwrap();
        assert_eq!((t.num_nodes(), t.num_links()), (nodes, links), "{name}");
        assert!(t.nodes().iter().any(|n| n.capacity > 0.0));
        assert!(t.links().iter().all(|l| l.delay > 0.0 && l.bandwidth > 0.0));
    }
}

#[test]
fn scenario_file_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    let topo = data_dir().join("Abilene.graphml");
    std::fs::write(
        &path,
        format!(
            r#"
name = "abilene"
episode_length = 3
rotation = "cycle"

[traffic]
process = {{ kind = "fixed", interval = 5.0 }}

[[topologies]]
path = {topo:?}
capacity_sets = [[4, 0, 0, 0, 0, 0, 4, 3, 5, 0, 2], [2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2]]
ingress_sets = [[0], [1, 2]]
"#
        ),
    )
    .unwrap();
    let scenario = ScenarioConfig::load(&path).unwrap();
    assert_eq!(scenario.variants.len(), 4);
    assert_eq!(scenario.variants[1].ingress_nodes(), vec![1, 2]);
    assert_eq!(scenario.variants[2].capacity(0), 2.0);
    let mut env = Environment::new(scenario, 3).unwrap();
    let obs = env.reset().unwrap();
    assert_eq!(obs.num_nodes(), 11);
    assert_eq!(obs.num_edges(), 28);
    let a = ActionTensor::filled(&obs.mask, 0.5);
    let mut done = false;
    while !done {
        done = env.step(&a).unwrap().done;
    }
    assert_eq!(env.steps_taken(), 3);
}

#[test]
fn malformed_scenario_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = 3").unwrap();
    assert!(ScenarioConfig::load(&path).is_err());
}
