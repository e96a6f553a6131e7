use polysep::corpus;
use polysep::formula::parse_problem;
use polysep::rat;
use polysep::sdp::{solve, SolverSettings};
use polysep::sos::{build_program, compile_to_sdp, Mode};

fn run(name: &str, text: &str, d: u32, s: u32, mode: Mode, margin: f64) {
    let inst = parse_problem(text).unwrap();
    let prog = match build_program(&inst, d, s, mode, rat::from_f64(margin), rat::zero()) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{name}: build error {e}");
            return;
        }
    };
    let sdp = compile_to_sdp(&prog);
    let t = std::time::Instant::now();
    let sol = solve(&sdp, &SolverSettings::default()).unwrap();
    eprintln!(
        "{name}: {:?} iters={} res={:.2e} |{}| in {:.2?}",
        sol.status,
        sol.metrics.iterations,
        sol.metrics.primal_residual,
        sol.metrics.termination,
        t.elapsed()
    );
}

fn main() {
    let m: f64 = std::env::args().nth(1).map(|v| v.parse().unwrap()).unwrap_or(0.01);
    run("torus   d2 s2 poly   ", corpus::TORUS, 2, 2, Mode::Polynomial, m);
    run("torus   d1 s2 poly   ", corpus::TORUS, 1, 2, Mode::Polynomial, m);
    run("halfline d1 s1 poly  ", corpus::HALFLINE, 1, 1, Mode::Polynomial, m);
    run("curves  d3 s3 poly   ", corpus::CURVES, 3, 3, Mode::Polynomial, m);
    run("curves  d3 s4 poly   ", corpus::CURVES, 3, 4, Mode::Polynomial, m);
    run("curves  d4 s3 poly   ", corpus::CURVES, 4, 3, Mode::Polynomial, m);
    run("curves  d3 s3 semialg", corpus::CURVES, 3, 3, Mode::Semialgebraic, m);
    run("ovals   d7 s4 poly   ", corpus::OVALS, 7, 4, Mode::Polynomial, m);
}
