// Equilibria of the single loop and of MFC as the set-point grows, and the
// set-point where the single loop drops from three equilibria to one.

use mfc::steady_state::multiplicity_loss;
use mfc::{EquilibriumSet, GainSet, LoopKind, MsdParams};

pub fn run() -> mfc::Result<()> {
    let params = MsdParams::table();
    let gains = GainSet::new(vec![-4.0, -4.0], 0.1)?;

    println!("{:>5}  {:<40} {:<40}", "y_d", "single loop x1 (stability)", "MFC error x~1 (stability)");
    for i in 0..=12 {
        let y_d = 0.25 * i as f64;
        let sl = EquilibriumSet::compute(LoopKind::Sl, &params, &gains, y_d)?;
        let mfc = EquilibriumSet::compute(LoopKind::Mfc, &params, &gains, y_d)?;
        let fmt = |s: &EquilibriumSet| {
            s.roots
                .iter()
                .zip(&s.stability)
                .map(|(r, st)| format!("{r:.3} ({st:?})"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        println!("{y_d:>5.2}  {:<40} {:<40}", fmt(&sl), fmt(&mfc));
    }

    let sl = EquilibriumSet::compute(LoopKind::Sl, &params, &gains, 0.75)?;
    println!("\nsingle-loop offset at y_d = 0.75: {:.2} %", sl.error_pct());
    if let Some(y) = multiplicity_loss(&params, gains.k_star[0], 0.5, 3.0)? {
        println!("single loop keeps one equilibrium above y_d = {y:.4}");
    }
    Ok(())
}

fn main() -> mfc::Result<()> {
    run()
}
