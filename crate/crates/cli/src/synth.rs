use std::path::PathBuf;

use chanprune::data::{save_dataset, synth_generate, SynthConfig};
use clap::Args;

use crate::failure::CliResult;

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 400)]
    pub per_class: usize,
    /// Samples per segment.
    #[arg(long, default_value_t = 178)]
    pub length: usize,
    /// Standard deviation of the additive Gaussian noise.
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output Segment-CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(a: &SynthArgs) -> CliResult {
    let cfg = SynthConfig {
        n_per_class: a.per_class,
        len: a.length,
        classes: a.classes,
        noise_sigma: a.noise,
        seed: a.seed,
    };
    let ds = synth_generate(&cfg)?;
    save_dataset(&ds, &a.out)?;
    println!(
        "wrote {} segments of length {} ({} classes) to {}",
        ds.n(),
        ds.len(),
        ds.classes(),
        a.out.display()
    );
    Ok(())
}
