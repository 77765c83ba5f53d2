//! Regenerates `fixtures/game24_100.txt` and its solvability sidecar.
//!
//! cargo run -p rescale-core --example gen_game24_fixture -- fixtures

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::Rng;
use rescale_core::env::game24::{solvable, Game24State};
use rescale_core::rng;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    let mut r = rng::stream(24, &[rng::label::PROBLEM]);
    let mut problems = String::from("# 100 Game24 instances, values 1..=13, sampled with seed 24\n");
    let mut bits = String::from("# solvability of each line of game24_100.txt (1 = solvable)\n");
    for _ in 0..100 {
        let mut nums: Vec<i64> = (0..4).map(|_| r.random_range(1..=13)).collect();
        nums.sort_unstable();
        let ok = solvable(Game24State::from_ints(&nums).numbers());
        let line: Vec<String> = nums.iter().map(i64::to_string).collect();
        let _ = writeln!(problems, "{}", line.join(" "));
        let _ = writeln!(bits, "{}", u8::from(ok));
    }
    std::fs::write(dir.join("game24_100.txt"), problems)?;
    std::fs::write(dir.join("game24_100.solvable"), bits)?;
    Ok(())
}
