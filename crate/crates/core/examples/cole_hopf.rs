//! One nonlinear substep `Φ_θ = ½pΦ_uu − ½βΦ_u²/Φ` through the power transform,
//! compared with a plain heat step.

use proxy_hedge::gauss::{heat_step_separable, KernelMethod};
use proxy_hedge::grid::{uniform_axis, GridField};
use proxy_hedge::solver::cole_hopf_substep;

fn main() {
    let (p0, beta, theta) = (0.09, 0.0225, 0.5);
    let field = GridField::from_log_fn(vec![uniform_axis(0.0, 2.0, 201)], 0.0, |u| {
        -2.0 * (1.0 + u[0].tanh())
    })
    .unwrap();
    let nonlinear = cole_hopf_substep(&field, p0, beta, theta, 1e-6, KernelMethod::Direct).unwrap();
    let linear = heat_step_separable(&field, &[p0], theta, &[0], KernelMethod::Direct).unwrap();
    println!("kappa = 1 - beta/p0 = {}", 1.0 - beta / p0);
    println!(
        "{:>6} {:>12} {:>12} {:>12}",
        "u", "Phi0", "heat", "nonlinear"
    );
    for i in (0..201).step_by(20) {
        println!(
            "{:>6.2} {:>12.6} {:>12.6} {:>12.6}",
            field.axes[0][i],
            field.log_value(i).exp(),
            linear.log_value(i).exp(),
            nonlinear.log_value(i).exp()
        );
    }
}
