// Tracking a sinusoid from rest. The feedback model loop starts at the
// process state and steers towards the reference with the low gain; the
// feedforward model loop starts on the reference, so the process loop has
// to close the initial gap with the high gain.

use mfc::simulate::{ControllerKind, ControllerSpec, ModelLaw, Reference, simulate_closed_loop};
use mfc::{GainSet, MsdParams, MsdPlant};

pub fn run() -> mfc::Result<()> {
    let plant = MsdPlant::new(MsdParams::table());
    let gains = GainSet::new(vec![-4.0, -4.0], 0.1)?;
    let reference = Reference::Sinusoid { offset: 0.5, amplitude: 0.4, omega: 2.0 };
    let x_d0 = reference.derivatives(0.0, 1);

    let cases = [
        ("SL", ControllerSpec::new(ControllerKind::Sl, gains.clone(), reference)),
        ("SLHG", ControllerSpec::new(ControllerKind::Slhg, gains.clone(), reference)),
        ("MFC", ControllerSpec::new(ControllerKind::Mfc, gains.clone(), reference).with_model_initial(vec![0.0, 0.0])),
        (
            "MFC-FF",
            ControllerSpec::new(ControllerKind::Mfc, gains.clone(), reference)
                .with_model_initial(x_d0)
                .with_model_law(ModelLaw::Feedforward),
        ),
    ];
    for (name, spec) in cases {
        let traj = simulate_closed_loop(&plant, &spec, &[0.0, 0.0], 10.0, 1e-3, None)?;
        // RMS tracking error over the second half of the run.
        let half = traj.len() / 2;
        let sq: f64 = (half..traj.len())
            .map(|k| (traj.x[k][0] - reference.derivatives(traj.t[k], 0)[0]).powi(2))
            .sum();
        let rms = (sq / (traj.len() - half) as f64).sqrt();
        let peak = traj.u.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        println!("{name:<7} rms error {rms:.2e}  |u| peak {peak:>8.2}");
    }
    Ok(())
}

fn main() -> mfc::Result<()> {
    run()
}
