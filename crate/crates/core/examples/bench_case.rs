//! Runs benchmark cases with the default protocol and prints their metrics.
//!
//! cargo run --release -p ffdga --example bench_case -- [n_cases] [seed]

use ffdga::synth::{run_case, BenchConfig};

fn main() -> ffdga::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);
    let cfg = BenchConfig { seed, ..Default::default() };
    println!("case  rmse_pbo  rmse_base  rmse_id  div_pbo  div_base  t_pbo  t_base");
    for id in 0..n {
        let o = run_case(&cfg, id)?;
        let (dp, db) = o.midpoint_diversity();
        println!(
            "{id:4}  {:8.3}  {:9.3}  {:7.3}  {:7.3}  {:8.3}  {:5.1}  {:6.1}",
            o.rmse_pbo,
            o.rmse_baseline,
            o.rmse_identity,
            dp,
            db,
            o.runtime_pbo.as_secs_f64(),
            o.runtime_baseline.as_secs_f64()
        );
    }
    Ok(())
}
