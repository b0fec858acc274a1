//! Prints reward coefficients for a target APR and the APR they imply
//! across validator counts.
//!
//! cargo run -p stakesim-core --example calibrate -- [target_apr] [at_n]

use stakesim_core::economics::{apr_estimate, EconParams, DEFAULT_CALIBRATION_N, DEFAULT_OPPORTUNITY_SHARE, DEFAULT_TARGET_APR};

fn main() {
    let mut args = std::env::args().skip(1);
    let target: f64 = args.next().map_or(DEFAULT_TARGET_APR, |a| a.parse().expect("target APR is a number"));
    let at_n: u64 = args.next().map_or(DEFAULT_CALIBRATION_N, |a| a.parse().expect("validator count is an integer"));
    let p = EconParams::calibrate(target, at_n, DEFAULT_OPPORTUNITY_SHARE);
    println!("{}", serde_json::to_string_pretty(&p).unwrap());
    println!("{:>10}  {:>8}", "n", "apr_%");
    for k in 0..=6 {
        let n = 10u64.pow(k / 2 + 3) * if k % 2 == 1 { 3 } else { 1 };
        println!("{n:>10}  {:>8.3}", 100.0 * apr_estimate(n, &p));
    }
}
