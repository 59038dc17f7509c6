//! Drives the command-line front end in-process: writes a data file and a
//! configuration, then runs `fit` and `band` into a scratch directory.
//!
//! The same steps from a shell:
//!
//! ```text
//! seriesqr fit  --config examples/configs/run.json --data data.csv --out out
//! seriesqr band --config examples/configs/run.json --data data.csv --out out
//! ```

use std::ffi::OsString;

use seriesqr::cli::main_with_args;
use seriesqr::sim::{generate_dgp, DgpSpec};

fn main() {
    let out = std::env::temp_dir().join(format!("seriesqr-example-{}", std::process::id()));
    std::fs::create_dir_all(&out).expect("scratch directory");
    let sample = generate_dgp(&DgpSpec::calibrated(300), 9).expect("valid design");
    let mut csv = String::from("y,w\n");
    for (y, x) in sample.y.iter().zip(&sample.covariates) {
        csv.push_str(&format!("{y},{}\n", x[0]));
    }
    let data = out.join("data.csv");
    std::fs::write(&data, csv).expect("data file");
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/run.json");

    for cmd in ["fit", "band"] {
        let argv: Vec<OsString> = vec![
            "seriesqr".into(),
            cmd.into(),
            "--config".into(),
            config.into(),
            "--data".into(),
            data.clone().into(),
            "--out".into(),
            out.clone().into(),
        ];
        let code = main_with_args(argv);
        println!("{cmd}: exit {code}");
        if code != 0 {
            std::process::exit(code);
        }
    }
    println!("outputs in {}", out.display());
}
