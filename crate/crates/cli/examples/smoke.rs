use bipde::config::Config;
use bipde::experiments;
use std::time::Instant;

fn run(kind: &str, extra: &[(&str, &str)]) {
    let mut cfg = Config::new();
    cfg.set("kind", kind);
    for (k, v) in extra {
        cfg.set(k, v);
    }
    let t0 = Instant::now();
    match experiments::run(&mut cfg) {
        Ok(out) => {
            for r in &out.reports {
                print!("{} [{}] loss={:.3e}", r.experiment, r.cell, r.final_loss);
                if let Some(m) = r.max_rel_err_d {
                    print!(" maxrelD={:.4}", m);
                }
                for p in &r.params {
                    match p.true_value {
                        Some(t) => print!(" {}={:.7}(true {:.7} std {:.2e})", p.name, p.mean, t, p.std),
                        None => print!(" {}={:.4}(r2={:?})", p.name, p.mean, p.r2.map(|r| (r*10000.0).round()/10000.0)),
                    }
                }
                println!();
            }
            println!("  -> {:.2?}", t0.elapsed());
        }
        Err(e) => println!("{kind} FAILED after {:.2?}: {e:#}", t0.elapsed()),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("all");
    match which {
        "burgers40" => run("burgers_sweep", &[("nx", "40")]),
        "burgers40nu" => run("burgers_sweep", &[("nx", "40"), ("unknowns", "nu")]),
        "burgers640" => run("burgers_sweep", &[("nx", "640")]),
        "burgers160nodes" => run("burgers_sweep", &[("nx", "160"), ("solver_spacing", "nodes")]),
        "case1" => run("poisson_case1", &[("n", "32")]),
        "case1small" => run("poisson_case1", &[("n", "16"), ("epochs", "300")]),
        "rbf" => run("rbf_recover", &[]),
        "rbfsmall" => run("rbf_recover", &[("data_nx", "80"), ("p", "3"), ("n_d", "40"), ("n_s", "10"), ("epochs", "5"), ("t_final", "0.05")]),
        "inv1dsmall" => run("poisson_inverse_1d", &[("nx", "40"), ("n_data", "60"), ("n_test", "30"), ("epochs", "40"), ("batch", "20")]),
        "inv1d" => run("poisson_inverse_1d", &[]),
        "inv2dsmall" => run("poisson_inverse_2d", &[("n", "12"), ("n_data", "40"), ("n_test", "20"), ("epochs", "30"), ("batch", "20")]),
        "rbfinvsmall" => run("rbf_inverse", &[("n_nu", "6"), ("nx", "40"), ("p", "5"), ("epochs", "10"), ("n_s", "8"), ("n_eval", "4"), ("dt", "0.001")]),
        other => println!("unknown case {other}"),
    }
}
