//! Load a LIBSVM file, split it, certify the regularized logistic-regression optimum and
//! read off the constants the bounds need.

use sgd_bands::problems::{
    estimate_constants, parse_libsvm_str, solve_optimum, LogRegProblem, Problem, SmoothnessRoute,
};

const DATA: &str = "\
+1 1:0.9 2:0.1 4:0.5
-1 1:-0.7 3:0.8
+1 2:1.2 3:-0.3 4:0.4
-1 1:-1.1 2:-0.4
+1 1:0.3 4:1.0
-1 3:0.6 4:-0.9
+1 1:0.8 2:0.7
-1 2:-0.2 3:1.1 4:-0.5
";

fn main() -> sgd_bands::Result<()> {
    let data = parse_libsvm_str(DATA)?;
    println!("{} rows, {} features", data.len(), data.dim);
    let (train, test) = data.split(0.75, 1)?;

    for route in [
        SmoothnessRoute::Conservative,
        SmoothnessRoute::ConvexComponents,
    ] {
        let mut lr = LogRegProblem::new(train.clone(), 0.01)?;
        lr.smoothness = route;
        lr.test = Some(test.clone());
        let p = Problem::LogReg(lr);
        let cert = solve_optimum(&p, 1e-10)?;
        let c = estimate_constants(&p, Some(&cert), 1.0)?;
        println!(
            "{route:?}: f* = {:.6}, |grad| = {:.1e}, mu = {}, L_f = {:.4}, sigma^2 = {:.4}, test acc {:?}",
            cert.f_star,
            cert.grad_norm,
            c.mu,
            c.l_f,
            c.sigma2,
            p.test_accuracy(&cert.x_star)
        );
    }
    print!("round trip:\n{}", data.to_libsvm());
    Ok(())
}
