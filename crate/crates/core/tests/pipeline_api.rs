use bifurcate_core::expr::MapSpec;
use bifurcate_core::kinds::Registry;
use bifurcate_core::pipeline::{run, Options, Stage, Status};

#[test]
fn library_example_runs() {
    let spec = MapSpec::parse_with("(1 + mu)*x*(1 - x)", &[]).unwrap();
    let report = run(&spec, Stage::Fit, &Options::default(), &Registry::builtin());
    assert_eq!(report.status, Status::Ok, "{:?}", report.errors);
    assert!(report.normal_form.is_some());
}
