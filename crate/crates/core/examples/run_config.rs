//! Run experiment configs and print their summaries.
//!
//! `cargo run --release --example run_config -- configs/lp_free2.toml`

use std::path::Path;

use soficdim::lab::config::ExperimentConfig;
use soficdim::lab::pipeline::run;

fn main() {
    for arg in std::env::args().skip(1) {
        let c = ExperimentConfig::load(Path::new(&arg)).expect("config");
        let t = std::time::Instant::now();
        let r = run(&c).expect("run");
        println!("{} {:?} {:.2}s", c.id, r.summary, t.elapsed().as_secs_f64());
        for l in &r.levels {
            let f = l.finest();
            println!("  d={} pass={:.3} {:?} {}", l.degree, f.pass_fraction, f.brackets.iter().map(|b| (b.bracket.lower, b.bracket.upper, b.normalized.lower, b.normalized.upper)).collect::<Vec<_>>(), l.details);
        }
        println!("  extra {}", r.extra);
    }
}
