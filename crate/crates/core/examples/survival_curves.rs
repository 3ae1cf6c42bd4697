//! Kaplan–Meier and Beran estimates on the retinopathy data.

use archgen::io::{load_csv, Schema};
use archgen::survival::{cv_bandwidth, default_bandwidth_grid, kaplan_meier, BeranEstimator, Coord, Kernel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = load_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/data/rds.csv"), &Schema::default())?;
    let y1: Vec<f64> = ds.records.iter().map(|r| r.y1).collect();
    let d1: Vec<bool> = ds.records.iter().map(|r| r.delta1).collect();
    let km = kaplan_meier(&y1, &d1)?;
    println!("treated eye: {} jumps, F(max) = {:.3}", km.len(), km.total());
    for t in [10.0, 20.0, 40.0, 60.0] {
        println!("  F({t}) = {:.3}", km.eval(t));
    }

    let h = cv_bandwidth(&ds.records, Coord::Second, &default_bandwidth_grid(&ds.records, Coord::Second))?;
    println!("cross-validated bandwidth for Y1 | Y2: {h:.2}");
    let beran = BeranEstimator::new(&ds.records, Coord::Second, Kernel::Epanechnikov);
    for at in [5.0, 20.0, 40.0] {
        let f = beran.conditional(at, h)?;
        println!("  F(30 | y2 = {at}) = {:.3}", f.eval(30.0));
    }
    Ok(())
}
