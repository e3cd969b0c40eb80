// Region-of-attraction estimates of all four certificates for both set-points,
// with the level of the process loop left over by the model-loop deviation.

use mfc::roa::{ellipse_area, estimate_boundary, polygon_area};
use mfc::{GainSet, LyapunovCertificate, MsdParams, RoaSet};

pub fn run() -> mfc::Result<()> {
    let gains = GainSet::new(vec![-4.0, -4.0], 0.1)?;
    let cert = LyapunovCertificate::new(&gains, 1000.0)?;
    for y_d in [0.75, 2.0] {
        let set = RoaSet::compute(&MsdParams::table(), &gains, &cert, y_d, &[0.0, 0.0])?;
        println!("y_d = {y_d}");
        for est in &set.estimates {
            match (est.valid, est.process_level()) {
                (true, Some(level)) => {
                    let area = ellipse_area(&est.process_shape(), level);
                    let poly = polygon_area(&estimate_boundary(est, 720)?);
                    println!(
                        "  {:<5} level {:>10.4}  center ({:.4}, {:.4})  area {:.4e} (polygon {:.4e})",
                        est.kind, level, est.center[0], est.center[1], area, poly
                    );
                }
                _ => println!("  {:<5} invalid: {}", est.kind, est.invalid_reason.map(|r| r.to_string()).unwrap_or_default()),
            }
        }
        if let (Some(cmax), Some(cmp)) = (set.c_star_max, set.comparison) {
            println!("  c*_max = {cmax:.3}; c~ of the combined approach {:.4} vs separated {:.4}", cmp.c_tilde_1, cmp.c_tilde_2);
        }
    }
    Ok(())
}

fn main() -> mfc::Result<()> {
    run()
}
