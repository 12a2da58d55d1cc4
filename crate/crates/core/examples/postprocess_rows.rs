//! Shows the output clean-up on a generator output: the eight top rows and
//! six bottom rows are cleared, the 576 interior pixels are left alone, and
//! applying it twice changes nothing.

use ihqgan::image::SIDE;
use ihqgan::postprocess::{is_zeroed_row, post_process};
use ihqgan::qgen::{DecodeRule, Direction, GeneratorParams, QuantumGenerator, BLOCKS};
use ihqgan::ImageTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn row_mass(img: &ImageTensor, r: usize) -> f64 {
    img.row(r).iter().sum()
}

fn main() -> ihqgan::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let input = ImageTensor::from_fn(|r, c| if (10..22).contains(&r) && (12..20).contains(&c) { rng.gen() } else { 0.0 });
    let gen = QuantumGenerator::new(BLOCKS, DecodeRule::MaxNorm);
    let params = GeneratorParams::random(BLOCKS, 0.0, 1.0, &mut rng);
    let raw = gen.translate(&input, &params, Direction::Forward)?;
    let clean = post_process(&raw);

    for r in 0..SIDE {
        println!(
            "row {r:>2} {:<7} raw mass {:>6.2}  cleaned {:>6.2}",
            if is_zeroed_row(r) { "cleared" } else { "" },
            row_mass(&raw, r),
            row_mass(&clean, r)
        );
    }
    let kept = (0..SIDE).filter(|&r| !is_zeroed_row(r)).map(|r| raw.row(r).len()).sum::<usize>();
    println!("{kept} interior pixels kept; idempotent: {}", post_process(&clean) == clean);
    Ok(())
}
