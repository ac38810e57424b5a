use rdmix::driver::{
    presets, read_csv, run, run_with, vtk_string, write_csv, Config, Event, InitialConfig, MeshConfig, ModelConfig,
    Record, Setup, VtkFields,
};
use rdmix::mesh::MeshFormat;

fn small_zero() -> Config {
    let mut c = presets::segregation();
    c.mesh = MeshConfig::Structured {
        nx: 3,
        ny: 2,
        bbox: [0.0, 0.0, 1.0, 1.0],
        diagonal: rdmix::mesh::Diagonal::Crossed,
    };
    c.model = ModelConfig::Zero { species: 2 };
    c.initial = InitialConfig::Constant { values: vec![0.25, 1.5] };
    c.adapt = None;
    c.time.t_end = 0.5;
    c.output.cadence = 1;
    c
}

#[test]
fn every_preset_round_trips_through_toml() {
    for name in presets::NAMES {
        let c = presets::preset(name).unwrap();
        let text = c.to_toml().unwrap();
        assert_eq!(Config::from_toml(&text).unwrap(), c, "{name}");
    }
    assert!(presets::preset("nope").is_err());
}

#[test]
fn hand_written_config_parses() {
    let text = r#"
seed = 3

[mesh]
kind = "structured"
nx = 4
ny = 4
bbox = [0.0, 0.0, 1.0, 1.0]
diagonal = "left"

[model]
kind = "fisher"

[initial]
kind = "constant"
values = [0.2]

[time]
scheme = "cnab"
dt = 0.1
t_end = 0.3

[orders]
initial = 2

[adapt]
theta_min = 0.05
theta_max = 0.7
order_min = 1
order_max = 4
cadence = 2
"#;
    let c = Config::from_toml(text).unwrap();
    assert_eq!(c.orders.initial, 2);
    assert_eq!(c.adapt.unwrap().order_max, 4);
    assert!(Config::from_toml(&text.replace("t_end = 0.3", "t_end = -1.0")).is_err());
    assert!(Config::from_toml(&text.replace("seed = 3", "sed = 3")).is_err());
}

#[test]
fn zero_model_keeps_constant_fields_and_norms() {
    let rep = run(&small_zero()).unwrap();
    let steps: Vec<usize> = rep.records.iter().map(|r| r.step).collect();
    assert_eq!(steps, [0, 2, 3, 4, 5]);
    for r in &rep.records {
        assert!((r.time - 0.1 * r.step as f64).abs() < 1e-12);
    }
    let r0 = &rep.records[0];
    for r in &rep.records {
        assert!((r.mass_total - r0.mass_total).abs() < 1e-12);
        assert!((r.m_min - 0.25).abs() < 1e-12 && (r.m_max - 1.5).abs() < 1e-12);
        assert!(r.eta.unwrap() < 1e-12);
    }
    assert!((r0.mass_total - 1.75).abs() < 1e-12);
}

#[test]
fn records_round_trip_through_csv() {
    let rep = run(&small_zero()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    write_csv(&path, &rep.records).unwrap();
    let back: Vec<Record> = read_csv(&path).unwrap();
    assert_eq!(back, rep.records);
}

#[test]
fn output_directory_is_populated() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_zero();
    c.output.dir = Some(dir.path().to_path_buf());
    c.output.vtk_cadence = Some(5);
    run(&c).unwrap();
    for f in ["records.csv", "timings.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let vtk = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "vtk"))
        .count();
    assert_eq!(vtk, 2);
}

#[test]
fn random_runs_are_deterministic_per_seed() {
    let mut c = presets::segregation();
    c.time.t_end = 1.0;
    c.output.cadence = 2;
    let a = run(&c).unwrap();
    let b = run(&c).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.adaptations, b.adaptations);
    c.seed += 1;
    let d = run(&c).unwrap();
    assert_ne!(a.records[0].mass_total, d.records[0].mass_total);
}

#[test]
fn dofs_change_only_at_adaptations() {
    let mut c = presets::segregation();
    c.time.t_end = 2.0;
    c.output.cadence = 1;
    let rep = run(&c).unwrap();
    let adapted: Vec<usize> = rep.adaptations.iter().map(|a| a.step).collect();
    assert!(!adapted.is_empty());
    for w in rep.records.windows(2) {
        if w[0].n_dofs != w[1].n_dofs {
            assert!(adapted.contains(&w[0].step), "dofs changed after step {}", w[0].step);
        }
    }
    for a in &rep.adaptations {
        assert!(a.invariants_ok);
        assert_eq!(a.step % 5, 0);
    }
}

#[test]
fn vtk_of_a_single_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.mesh");
    std::fs::write(&path, "rdmix-mesh 1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2 7\n").unwrap();
    let mut c = small_zero();
    c.mesh = MeshConfig::File {
        path,
        format: MeshFormat::NativeText,
    };
    c.model = ModelConfig::Zero { species: 1 };
    c.initial = InitialConfig::Constant { values: vec![0.5] };
    let check = |k: usize, cells: usize, points: usize| {
        let mut c = c.clone();
        c.orders.initial = k;
        let setup = Setup::new(&c).unwrap();
        let mut text = String::new();
        run_with(&c, &setup, |e| {
            if let Event::Record(sim, r) = e {
                if r.step == 0 {
                    text = vtk_string(sim, &VtkFields { eta: None }).unwrap();
                }
            }
            Ok(())
        })
        .unwrap();
        assert!(text.contains(&format!("POINTS {points} double")), "{text}");
        assert!(text.contains(&format!("CELLS {cells} {}", 4 * cells)));
        let m0: Vec<f64> = text
            .lines()
            .skip_while(|l| !l.starts_with("SCALARS m0"))
            .skip(2)
            .take(points)
            .map(|l| l.parse().unwrap())
            .collect();
        assert_eq!(m0.len(), points);
        assert!(m0.iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert!(text.contains("SCALARS region int 1\nLOOKUP_TABLE default\n7\n"));
    };
    check(1, 1, 3);
    check(3, 9, 10);
}

#[test]
fn readme_config_example_parses() {
    let readme = include_str!("../../../README.md");
    let block = readme.split("```toml\n").nth(1).unwrap().split("```").next().unwrap();
    let c = Config::from_toml(block).unwrap();
    assert_eq!(c.output.vtk_cadence, Some(25));
    assert_eq!(c.adapt.unwrap().order_max, 6);
}
