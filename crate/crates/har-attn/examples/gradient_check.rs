//! Verifying every analytic gradient against central finite differences.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use har_attn::training::gradcheck;

fn main() {
    let report = gradcheck(1e-4).unwrap();
    print!("{}", report.render());
    assert!(report.passed());
}
