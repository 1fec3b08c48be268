//! Kalman-filter maximum likelihood on the shipped synthetic futures panel.
//! The panel was generated at the reference parameters, so the fit should
//! recover them within the reported standard errors.
//!
//! Run with: `cargo run --release --example estimate_two_factor`
//! (a couple of minutes of optimizer time on one core)

use timberlease::kalman::{
    build_uncertainty_box, estimate_two_factor, reference_theta, FuturesPanel, MleConfig,
    TwoFactorTheta,
};

fn main() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/lumber_futures_synthetic.csv");
    let panel = match FuturesPanel::read_csv(&path, false) {
        Ok(panel) => panel,
        Err(e) => {
            eprintln!("{e}\nrun `cargo run --release --example make_synthetic_data` first");
            std::process::exit(2);
        }
    };
    println!("loaded {} weekly dates from {}", panel.len(), path.display());

    let init = TwoFactorTheta {
        sigma_p: 0.3,
        sigma_d: 0.4,
        kappa_d: 1.0,
        mu_d: 0.0,
        rho: 0.5,
        meas_noise: [0.03; 6],
    };
    let cfg = MleConfig { n_starts: 2, seed: 1, ..MleConfig::default() };
    let fit = estimate_two_factor(&panel, &init, &cfg).unwrap();

    let truth = reference_theta().to_vec();
    println!("{:<10} {:>10} {:>10} {:>10} {:>8}", "parameter", "estimate", "std_err", "generator", "z");
    for (k, (name, est, se, _, _)) in fit.rows().into_iter().enumerate() {
        println!(
            "{:<10} {:>10.4} {:>10.4} {:>10.4} {:>8.2}",
            name,
            est,
            se,
            truth[k],
            (est - truth[k]) / se
        );
    }
    println!("log-likelihood {:.1} after {} objective evaluations", fit.log_likelihood, fit.evals);

    let bounds = build_uncertainty_box(&fit, (-0.1020, 0.0090), (0.1255, 0.3528)).unwrap();
    println!(
        "uncertainty box: kappa [{:.4}, {:.4}] x mu [{:.4}, {:.4}] x lambda [{:.4}, {:.4}]",
        bounds.kappa_lo, bounds.kappa_hi, bounds.mu_lo, bounds.mu_hi, bounds.lambda_lo, bounds.lambda_hi
    );
}
