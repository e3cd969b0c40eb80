// Pole placement, high-gain scaling and the Lyapunov certificate for the
// benchmark design (double pole at -2, epsilon = 0.1, vartheta = 1000).

use mfc::synthesis::{closed_loop_matrix, default_vartheta};
use mfc::{GainSet, LyapunovCertificate};
use num_complex::Complex64;

pub fn run() -> mfc::Result<()> {
    let poles = [Complex64::new(-2.0, 0.0); 2];
    let gains = GainSet::from_poles(&poles, 0.1)?;
    println!("k*  = {:?}", gains.k_star);
    println!("k~  = {:?}", gains.k_tilde);
    println!("D   = diag{:?}", gains.d);
    println!("A + b k*^T = {}", closed_loop_matrix(&gains.k_star));

    let cert = LyapunovCertificate::new(&gains, 1000.0)?;
    println!("P = {}", cert.p);
    println!("residual  {:.1e}", cert.residual);
    println!("lambda_min(P) = {:.6}", cert.lambda_min);
    println!("||b^T P||     = {:.6}", cert.bp_norm);
    println!("Gamma_MFC  = {:.4}", cert.gamma_mfc);
    println!("Gamma_SL   = {:.4}", cert.gamma_sl);
    println!("Gamma_SLHG = {:.4}", cert.gamma_slhg);

    // The MFC bound grows with the model-loop weight towards Gamma_SLHG.
    for vartheta in [1.0, 10.0, default_vartheta(0.1), 1e4, 1e6] {
        let c = LyapunovCertificate::new(&gains, vartheta)?;
        let m = c.m_matrix(0.9 * c.gamma_mfc);
        println!("vartheta = {vartheta:>9}: Gamma_MFC = {:.4}, M positive at 0.9 Gamma: {}", c.gamma_mfc, m.positive);
    }
    Ok(())
}

fn main() -> mfc::Result<()> {
    run()
}
