//! Writes one image of each procedural family and reads it back.
//!
//! Run with `cargo run --example synth_images [out_dir]`.

use slads::synth::Family;
use slads::GroundTruthImage;

fn main() -> slads::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "synth_out".into());
    std::fs::create_dir_all(&dir).map_err(|e| slads::Error::Io {
        path: dir.clone().into(),
        source: e,
    })?;
    for family in Family::ALL {
        let img = family.generate(96, 64, 7);
        let path = format!("{dir}/{}.pgm", family.name());
        img.save(&path)?;
        let back = GroundTruthImage::load(&path)?;
        assert_eq!(back, img, "graymap round trip is lossless");
        let mean = img.values().iter().sum::<f64>() / img.dims().len() as f64;
        println!("{:<10} {}x{} mean {:6.1} -> {path}", family.name(), img.width(), img.height(), mean);
    }
    Ok(())
}
