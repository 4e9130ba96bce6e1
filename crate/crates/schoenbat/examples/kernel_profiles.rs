//! Tour of the five admissible kernel profiles: series coefficients, closed
//! forms, truncated-series agreement, and how finite-radius kernels treat
//! their domain edge.
//!
//! Run with: cargo run --example kernel_profiles

use schoenbat::kernels::KERNELS;
use schoenbat::Result;

fn main() -> Result<()> {
    for kernel in KERNELS {
        match kernel.domain_radius() {
            Some(r) => println!("{kernel}  (domain |z| < {r})"),
            None => println!("{kernel}  (entire real line)"),
        }
        print!("  a_0..a_6:");
        for n in 0..=6 {
            print!(" {:.6}", kernel.coefficient(n));
        }
        println!();
        for z in [-0.9, -0.5, 0.0, 0.5, 0.9] {
            let closed = kernel.closed_form(z)?;
            let series = kernel.series(z, 60)?;
            println!(
                "  K({z:+.1}) = {closed:>12.9}   series(60 terms) differs by {:.3e}",
                (closed - series).abs()
            );
        }
        if kernel.domain_radius().is_some() {
            assert!(kernel.closed_form(1.0).is_err(), "the domain is an open interval");
            println!("  z = 1.0 is rejected: the domain is open");
        }
        println!();
    }
    Ok(())
}
