// Step responses of the four controllers towards y_d = 0.75 from rest,
// and MFC from two perturbed process states.

use mfc::simulate::{ControllerKind, ControllerSpec, Reference, metrics, model_tracking_time, simulate_closed_loop};
use mfc::{EquilibriumSet, GainSet, LoopKind, MsdParams, MsdPlant};

pub fn run() -> mfc::Result<()> {
    let params = MsdParams::table();
    let plant = MsdPlant::new(params);
    let gains = GainSet::new(vec![-4.0, -4.0], 0.1)?;
    let reference = Reference::SetPoint { y_d: 0.75 };

    println!("{:<6} {:>9} {:>10} {:>9} {:>8}", "ctrl", "u(0)", "peak |u|", "error %", "x1(10)");
    for kind in ControllerKind::ALL {
        let spec = ControllerSpec::new(kind, gains.clone(), reference).with_model_initial(vec![0.0, 0.0]);
        let traj = simulate_closed_loop(&plant, &spec, &[0.0, 0.0], 10.0, 1e-3, None)?;
        let lk = match kind {
            ControllerKind::Sl => LoopKind::Sl,
            _ => LoopKind::Slhg,
        };
        let x_s = EquilibriumSet::compute(lk, &params, &gains, 0.75)?.state();
        let m = metrics(&traj, &x_s, 0.75)?;
        println!(
            "{:<6} {:>9.2} {:>10.2} {:>9.3} {:>8.4}",
            kind.label(),
            m.u0,
            m.peak_abs_u,
            m.steady_state_error_pct,
            traj.final_state()[0]
        );
    }

    for x0 in [[0.1, -8.0], [-0.25, 6.0]] {
        let spec = ControllerSpec::new(ControllerKind::Mfc, gains.clone(), reference).with_model_initial(vec![0.0, 0.0]);
        let traj = simulate_closed_loop(&plant, &spec, &x0, 2.0, 1e-3, None)?;
        let back = model_tracking_time(&traj, 0.01).unwrap_or(f64::NAN);
        println!("MFC from {x0:?}: u(0) = {:.2}, ||x - x*|| < 0.01 after {back:.3} s", traj.u[0]);
    }
    Ok(())
}

fn main() -> mfc::Result<()> {
    run()
}
