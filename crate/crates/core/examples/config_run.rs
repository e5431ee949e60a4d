// Drive the `compare` command from the shipped standard-pair config.

use tot::commands::{execute, Command};
use tot::{load_config, Overrides};

pub fn run_example() -> tot::Result<Vec<String>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/standard_pair.toml");
    let mut cfg = load_config(path)?;
    Overrides {
        grid: Some(64),
        steps: Some(8),
        out: Some(std::env::temp_dir().join(format!("tot-config-run-{}", std::process::id()))),
        ..Default::default()
    }
    .apply(&mut cfg)?;
    let lines = execute(Command::Compare, &cfg)?;
    std::fs::remove_dir_all(&cfg.output.dir)?;
    Ok(lines)
}

fn main() -> tot::Result<()> {
    for line in run_example()? {
        println!("{line}");
    }
    Ok(())
}
