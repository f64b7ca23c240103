//! Tabulates the fast threshold for several exponents next to soft and
//! hard thresholding, as CSV on stdout.
//!
//! `cargo run --release --example threshold_curves > curves.csv`

use graphdenoise::admm::fast_threshold;

fn main() {
    let lambda = 1.0;
    let exponents = [1.0, 0.5, 0.1, 0.01];
    print!("x,soft,hard");
    for v in exponents {
        print!(",v{v}");
    }
    println!();
    for i in -40..=40 {
        let x = f64::from(i) * 0.1;
        let soft = x.signum() * (x.abs() - lambda).max(0.0);
        let hard = if x.abs() > lambda { x } else { 0.0 };
        print!("{x:.1},{soft:.6},{hard:.6}");
        for v in exponents {
            print!(",{:.6}", fast_threshold(x, lambda, v));
        }
        println!();
    }
}
