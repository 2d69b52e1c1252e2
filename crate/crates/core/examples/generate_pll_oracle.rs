//! Regenerates `data/pll_oracle.json` from the fixed generator seed.
//!
//! cargo run -p kbann-core --example generate_pll_oracle > crates/core/data/pll_oracle.json

use kbann::oracle::{PllOracle, GENERATOR_SEED};

fn main() {
    println!("{}", PllOracle::generate(GENERATOR_SEED).to_json_string());
}
