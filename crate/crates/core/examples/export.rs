use polysep::corpus;
use polysep::formula::parse_problem;
use polysep::rat;
use polysep::sdp::export_sdpa;
use polysep::sos::{build_program, compile_to_sdp, Mode};
use std::path::Path;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args[1].as_str();
    let d: u32 = args[2].parse().unwrap();
    let s: u32 = args[3].parse().unwrap();
    let mode = match args[4].as_str() {
        "poly" => Mode::Polynomial,
        "semialg" => Mode::Semialgebraic,
        _ => Mode::Archimedean,
    };
    let out = &args[5];
    let margin: f64 = args.get(6).map(|v| v.parse().unwrap()).unwrap_or(1.0);
    let text = match which {
        "ovals" => corpus::OVALS,
        "curves" => corpus::CURVES,
        "torus" => corpus::TORUS,
        _ => panic!(),
    };
    let inst = parse_problem(text).unwrap();
    let prog = build_program(&inst, d, s, mode, rat::from_f64(margin), rat::zero()).unwrap();
    let sdp = compile_to_sdp(&prog);
    export_sdpa(&sdp, Path::new(out)).unwrap();
    eprintln!("m={} blocks={:?} nfree={}", sdp.equalities.len(), sdp.block_dims, sdp.nfree);
}
