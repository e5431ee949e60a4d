// Write a field in the binary and CSV formats and read it back.

use std::f64::consts::TAU;

use tot::field_io::{read_binary, write_binary, write_csv};
use tot::PeriodicGrid;

/// Returns whether the binary round trip was bit-identical and the CSV line count.
pub fn run_example() -> tot::Result<(bool, usize)> {
    let grid = PeriodicGrid::new(16, 8)?;
    let field = grid
        .sample(|x, y| (TAU * x).sin() * (TAU * 2.0 * y).cos())
        .project_zero_mean();
    let dir = std::env::temp_dir().join(format!("tot-field-files-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let bin = dir.join("field.bin");
    let csv = dir.join("field.csv");
    write_binary(&bin, &field)?;
    write_csv(&csv, &field)?;
    let back = read_binary(&bin)?;
    let identical = back
        .values()
        .iter()
        .zip(field.values())
        .all(|(a, b)| a.to_bits() == b.to_bits())
        && back.is_zero_mean();
    let lines = std::fs::read_to_string(&csv)?.lines().count();
    std::fs::remove_dir_all(&dir)?;
    Ok((identical, lines))
}

fn main() -> tot::Result<()> {
    let (identical, lines) = run_example()?;
    println!("binary round trip bit-identical: {identical}");
    println!("CSV lines (header + nodes): {lines}");
    Ok(())
}
