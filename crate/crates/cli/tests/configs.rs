use std::fs;
use std::path::Path;

use volctl_cli::{validate_config, Mode};

fn root() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
}

fn check(label: &str, text: &str, mode: Mode) {
    if let Err(errs) = validate_config(text, mode) {
        let list: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        panic!("{label} ({mode}):\n{}", list.join("\n"));
    }
}

#[test]
fn shipped_configs_validate() {
    let cases = [
        ("desk.toml", &[Mode::Solve, Mode::Value, Mode::Policy, Mode::Simulate, Mode::SweepEps][..]),
        ("custom_cost.toml", &[Mode::Simulate][..]),
        ("degenerate.toml", &[Mode::SweepDegenerate][..]),
        ("two_d.toml", &[Mode::Solve2d][..]),
    ];
    let on_disk = fs::read_dir(root().join("configs")).unwrap().count();
    assert_eq!(on_disk, cases.len(), "every file under configs/ needs a case here");
    for (file, modes) in cases {
        let text = fs::read_to_string(root().join("configs").join(file)).unwrap();
        for &mode in modes {
            check(file, &text, mode);
        }
    }
}

#[test]
fn guide_examples_validate() {
    let chapter = fs::read_to_string(root().join("book/src/cli.md")).unwrap();
    let mut blocks = Vec::new();
    let mut current: Option<String> = None;
    for line in chapter.lines() {
        match (&mut current, line) {
            (None, "```toml") => current = Some(String::new()),
            (Some(block), "```") => {
                blocks.push(std::mem::take(block));
                current = None;
            }
            (Some(block), l) => {
                block.push_str(l);
                block.push('\n');
            }
            _ => {}
        }
    }
    assert!(blocks.len() >= 5, "found {} toml blocks", blocks.len());
    for (i, block) in blocks.iter().enumerate() {
        let name = block
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("# mode: "))
            .unwrap_or_else(|| panic!("block {i} lacks a `# mode:` line"));
        let mode = Mode::from_name(name.trim()).unwrap_or_else(|| panic!("block {i}: unknown mode {name}"));
        check(&format!("cli.md block {i}"), block, mode);
    }
}
