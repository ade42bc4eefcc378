//! Shared fixtures for the CLI and acceptance suites.

#![allow(dead_code)]

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The `tsr` binary under test.
pub fn tsr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tsr"))
}

pub fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("failed to spawn tsr")
}

pub fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

pub fn write_ppm(path: &Path, w: usize, h: usize, pixels: &[u8]) {
    assert_eq!(pixels.len(), w * h * 3);
    let mut f = fs::File::create(path).unwrap();
    write!(f, "P6\n{w} {h}\n255\n").unwrap();
    f.write_all(pixels).unwrap();
}

/// Base colors for the synthetic classes; strongly separated hues.
const CLASS_COLORS: [(u8, u8, u8); 8] = [
    (200, 40, 40),
    (40, 200, 40),
    (40, 40, 200),
    (200, 200, 40),
    (40, 200, 200),
    (200, 40, 200),
    (120, 120, 120),
    (230, 140, 30),
];

/// One synthetic 30x30 RGB image: class hue, a class-keyed stripe pattern,
/// and pixel noise.
pub fn synth_pixels(class: usize, index: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed ^ (class as u64).wrapping_mul(0x9e37_79b9) ^ (index as u64).wrapping_mul(0x85eb_ca6b),
    );
    let (r, g, b) = CLASS_COLORS[class % CLASS_COLORS.len()];
    let mut pixels = Vec::with_capacity(30 * 30 * 3);
    for _y in 0..30 {
        for x in 0..30 {
            let stripe = if (x / 5) % 2 == class % 2 { 30 } else { 0 };
            for base in [r.saturating_add(stripe), g, b] {
                let noise: i16 = rng.random_range(-25..=25);
                pixels.push((base as i16 + noise).clamp(0, 255) as u8);
            }
        }
    }
    pixels
}

/// `root/<class>/img_<i>.ppm` tree of synthetic images.
pub fn write_fixture_dataset(root: &Path, classes: usize, per_class: usize, seed: u64) {
    for class in 0..classes {
        let dir = root.join(class.to_string());
        fs::create_dir_all(&dir).unwrap();
        for i in 0..per_class {
            write_ppm(
                &dir.join(format!("img_{i:03}.ppm")),
                30,
                30,
                &synth_pixels(class, i, seed),
            );
        }
    }
}
