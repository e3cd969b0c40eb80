//! Every example is compiled into this test and run once.

#[allow(dead_code)]
mod design_gains {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/design_gains.rs"));
}

#[allow(dead_code)]
mod steady_state_sweep {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/steady_state_sweep.rs"));
}

#[allow(dead_code)]
mod roa_levels {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/roa_levels.rs"));
}

#[allow(dead_code)]
mod simulate_scenario1 {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/simulate_scenario1.rs"));
}

#[allow(dead_code)]
mod falsify_certificates {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/falsify_certificates.rs"));
}

#[allow(dead_code)]
mod custom_plant {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/custom_plant.rs"));
}

#[allow(dead_code)]
mod tracking_reference {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/tracking_reference.rs"));
}

#[test]
fn design_gains_runs() {
    design_gains::run().expect("design_gains example");
}

#[test]
fn steady_state_sweep_runs() {
    steady_state_sweep::run().expect("steady_state_sweep example");
}

#[test]
fn roa_levels_runs() {
    roa_levels::run().expect("roa_levels example");
}

#[test]
fn simulate_scenario1_runs() {
    simulate_scenario1::run().expect("simulate_scenario1 example");
}

#[test]
fn falsify_certificates_runs() {
    falsify_certificates::run().expect("falsify_certificates example");
}

#[test]
fn custom_plant_runs() {
    custom_plant::run().expect("custom_plant example");
}

#[test]
fn tracking_reference_runs() {
    tracking_reference::run().expect("tracking_reference example");
}
