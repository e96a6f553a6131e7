use polysep::corpus;
use polysep::formula::parse_problem;
use polysep::rat;
use polysep::sdp::{solve, SolverSettings};
use polysep::sos::{build_program, compile_to_sdp, Mode};

fn main() {
    let mut settings = SolverSettings::default();
    settings.verbose = true;
    let which = std::env::args().nth(1).unwrap_or_else(|| "ovals".into());
    match which.as_str() {
        "ovals" => {
            settings.max_iter = 400;
            let inst = parse_problem(corpus::OVALS).unwrap();
            let prog = build_program(&inst, 7, 4, Mode::Polynomial, rat::from_f64(0.01), rat::zero()).unwrap();
            let sdp = compile_to_sdp(&prog);
            let sol = solve(&sdp, &settings).unwrap();
            eprintln!("-> {:?} ({})", sol.status, sol.metrics.termination);
        }
        "curves-semialg" => {
            settings.max_iter = 120;
            let s: u32 = std::env::args().nth(2).map(|v| v.parse().unwrap()).unwrap_or(2);
            let inst = parse_problem(corpus::CURVES).unwrap();
            let prog = build_program(&inst, 3, s, Mode::Semialgebraic, rat::from_f64(0.01), rat::zero()).unwrap();
            let sdp = compile_to_sdp(&prog);
            let sol = solve(&sdp, &settings).unwrap();
            eprintln!("-> {:?} ({})", sol.status, sol.metrics.termination);
        }
        "motzkin4" => {
            settings.max_iter = 120;
            let sdp = polysep::sos::compile_to_sdp(&corpus::motzkin_homogenized_program(4));
            let sol = solve(&sdp, &settings).unwrap();
            eprintln!("-> {:?} ({}) res={:.2e}", sol.status, sol.metrics.termination, sol.metrics.primal_residual);
        }
        "curves-d3-s4" => {
            settings.max_iter = 120;
            let inst = parse_problem(corpus::CURVES).unwrap();
            let prog = build_program(&inst, 3, 4, Mode::Polynomial, rat::from_f64(0.01), rat::zero()).unwrap();
            let sdp = compile_to_sdp(&prog);
            let sol = solve(&sdp, &settings).unwrap();
            eprintln!("-> {:?} ({})", sol.status, sol.metrics.termination);
        }
        _ => panic!("unknown trace target"),
    }
}
