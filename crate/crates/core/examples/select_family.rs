//! Pseudo p-values of the four families against the retinopathy curves.

use archgen::io::{load_csv, Schema};
use archgen::pipeline::{run_pipeline, Mode, PipelineOptions};
use archgen::selector::{select_copula, SelectionConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = load_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/data/rds.csv"), &Schema::default())?;
    let opts = PipelineOptions::default();
    for conds in [vec![], vec!["age<=20".parse()?], vec!["age>20".parse()?]] {
        let r = run_pipeline(&ds, Mode::Param, &conds, &opts)?;
        let config = SelectionConfig { j: 1000, n: 197, seed: 3, ..SelectionConfig::default() };
        let report = select_copula(&r.generator, &r.kendall, &config)?;
        println!("conditions {:?}, tau {:.4}", r.conditions, r.tau);
        print!("{}", report.to_table());
        println!();
    }
    Ok(())
}
