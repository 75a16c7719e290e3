//! Computes the six local descriptors for a few unmeasured pixels and
//! standardizes them with statistics fitted over the whole image.

use slads::features::FeatureContext;
use slads::synth::Family;
use slads::{reconstruct, FeatureStats, IdwParams, MeasurementSet, PixelLocation};

const NAMES: [&str; 6] = ["grad_x", "grad_y", "nbr_std", "nbr_dev", "nearest", "density"];

fn main() -> slads::Result<()> {
    let img = Family::PiecewiseConstant.generate(64, 64, 5);
    let dims = img.dims();
    let params = IdwParams::default();
    let mut set = MeasurementSet::new(dims);
    for r in (0..64).step_by(6) {
        for c in (0..64).step_by(6) {
            let s = PixelLocation::new(r, c);
            set.add_measurement(s, img.get(s))?;
        }
    }
    let recon = reconstruct(&set, &params)?;
    let ctx = FeatureContext::new(&recon, &set, &params)?;

    let rows: Vec<[f64; 6]> = set
        .unmeasured()
        .map(|i| ctx.features(dims.location(i)).map(|f| f.values))
        .collect::<slads::Result<_>>()?;
    let stats = FeatureStats::fit(&rows)?;

    println!("{:>10} {:>10} {:>10}", "feature", "mean", "stddev");
    for j in 0..6 {
        println!("{:>10} {:>10.3} {:>10.3}", NAMES[j], stats.means[j], stats.stddevs[j]);
    }
    for s in [PixelLocation::new(3, 3), PixelLocation::new(31, 40), PixelLocation::new(63, 63)] {
        let raw = ctx.features(s)?;
        let z = stats.standardize(&raw);
        println!("{s}: raw {:?}", raw.values.map(|v| (v * 100.0).round() / 100.0));
        println!("{:>9} z {:?}", "", z.values.map(|v| (v * 100.0).round() / 100.0));
    }
    Ok(())
}
