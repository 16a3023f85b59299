//! Regenerates the bundled synthetic insurance table in `data/`.
//!
//! The file is committed, so this only needs to run when the generator
//! or its seed changes:
//!
//! ```text
//! cargo run -p kal --example regen_data
//! ```

use std::path::Path;

fn main() {
    let csv = kal::data::synthesize_insurance(kal::data::INSURANCE_ROWS, kal::data::INSURANCE_SEED);
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/insurance.csv");
    std::fs::write(&path, csv).expect("data/ directory is writable");
    println!("wrote {}", path.display());
}
