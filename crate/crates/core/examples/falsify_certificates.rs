// Monte-Carlo check of every valid certificate, then the same check on a
// set blown up far past its certified level.

use mfc::falsify::{FailureMode, FalsifySettings, falsify_roa, inflate};
use mfc::{GainSet, LyapunovCertificate, MsdParams, MsdPlant, RoaKind, RoaSet};

pub fn run() -> mfc::Result<()> {
    let gains = GainSet::new(vec![-4.0, -4.0], 0.1)?;
    let cert = LyapunovCertificate::new(&gains, 1000.0)?;
    let plant = MsdPlant::new(MsdParams::table());
    let settings = FalsifySettings {
        samples: 100,
        lipschitz_pairs: 20_000,
        ..FalsifySettings::default()
    };

    for y_d in [0.75, 2.0] {
        let set = RoaSet::compute(&plant.params, &gains, &cert, y_d, &[0.0, 0.0])?;
        for est in set.estimates.iter().filter(|e| e.valid) {
            let r = falsify_roa(est, &plant, &gains, &settings)?;
            println!(
                "y_d = {y_d:<4} {:<5} level {:>9.3}: {}/{} converged, sampled gamma {:.3} <= {:.3}",
                est.kind,
                est.level.unwrap_or(f64::NAN),
                r.converged,
                r.samples,
                r.empirical_gamma,
                r.analytic_gamma
            );
        }
    }

    let set = RoaSet::compute(&plant.params, &gains, &cert, 0.75, &[0.0, 0.0])?;
    for factor in [10.0, 1e3, 1e5] {
        let wide = inflate(set.get(RoaKind::Slhg), factor);
        let r = falsify_roa(&wide, &plant, &gains, &settings)?;
        println!(
            "SLHG level x{factor:>6}: {} converged, {} diverged, {} wrong equilibrium, {} V-increase",
            r.converged,
            r.count(FailureMode::Diverged),
            r.count(FailureMode::WrongEquilibrium),
            r.count(FailureMode::VIncrease)
        );
    }
    Ok(())
}

fn main() -> mfc::Result<()> {
    run()
}
