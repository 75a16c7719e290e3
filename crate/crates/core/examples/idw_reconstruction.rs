//! Reconstructs an image from 10% random samples and shows that the
//! windowed update after one extra sample matches a full rebuild.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slads::synth::Family;
use slads::{psnr, reconstruct, reconstruct_incremental, IdwParams, MeasurementSet, PixelLocation};

fn main() -> slads::Result<()> {
    let img = Family::Blobs.generate(128, 128, 3);
    let dims = img.dims();
    let params = IdwParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let picks = sample(&mut rng, dims.len(), dims.len() / 10);

    let mut set = MeasurementSet::new(dims);
    for i in picks.iter() {
        let s = dims.location(i);
        set.add_measurement(s, img.get(s))?;
    }
    let recon = reconstruct(&set, &params)?;
    println!("{} samples ({:.1}%), psnr {:.2} dB", set.len(), 100.0 * set.density(), psnr(&img, &recon)?);

    for (i, &p) in [2.0, 1.0, 4.0].iter().enumerate() {
        let r = reconstruct(&set, &IdwParams { power: p, neighbors: 4 + 4 * i, ..params })?;
        println!("  power {p}, {} neighbors: psnr {:.2} dB", 4 + 4 * i, psnr(&img, &r)?);
    }

    let s = (0..dims.len()).map(|i| dims.location(i)).find(|&s| !set.is_measured(s)).unwrap();
    set.add_measurement(s, img.get(s))?;
    let updated = reconstruct_incremental(&recon, &set, s, &params)?;
    let rebuilt = reconstruct(&set, &params)?;
    assert_eq!(updated, rebuilt);
    println!("windowed update at {s} equals the full rebuild");

    assert_eq!(updated.get(s), img.get(s));
    assert!(updated.get(PixelLocation::new(0, 0)).is_finite());
    Ok(())
}
