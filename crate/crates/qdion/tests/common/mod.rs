//! Shared test oracles, independent of the library's implementation paths.

/// Brute-force steady state of the optical Bloch equations by RK4 time
/// integration in the real Bloch representation (Re ρ_eg, Im ρ_eg, ρ_ee),
/// using angular rates in rad/μs. Integrates until the RHS norm falls
/// below 1e-10 of the rate scale.
///
/// Inputs in MHz: gamma (radiative), s (drive), delta (ν_QD − ν_L),
/// gamma_d (pure dephasing). Returns (rho_ee, Re ρ_eg, Im ρ_eg).
pub fn bloch_steady_by_integration(
    gamma_mhz: f64,
    s: f64,
    delta_mhz: f64,
    gamma_d_mhz: f64,
) -> (f64, f64, f64) {
    let tau = std::f64::consts::TAU;
    let gamma = tau * gamma_mhz;
    let gamma2 = tau * (gamma_mhz / 2.0 + gamma_d_mhz);
    let delta = tau * delta_mhz;
    let omega = tau * gamma_mhz * (s / 2.0).sqrt();

    let rhs = |x: f64, y: f64, p: f64| -> (f64, f64, f64) {
        (
            -gamma2 * x + delta * y,
            -gamma2 * y - delta * x + 0.5 * omega * (2.0 * p - 1.0),
            -gamma * p - omega * y,
        )
    };

    let scale = gamma + gamma2 + delta.abs() + omega;
    let dt = 0.05 / scale;
    let (mut x, mut y, mut p) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..5_000_000u64 {
        let k1 = rhs(x, y, p);
        let k2 = rhs(
            x + 0.5 * dt * k1.0,
            y + 0.5 * dt * k1.1,
            p + 0.5 * dt * k1.2,
        );
        let k3 = rhs(
            x + 0.5 * dt * k2.0,
            y + 0.5 * dt * k2.1,
            p + 0.5 * dt * k2.2,
        );
        let k4 = rhs(x + dt * k3.0, y + dt * k3.1, p + dt * k3.2);
        x += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        y += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        p += dt / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2);
        let r = rhs(x, y, p);
        let residual = (r.0 * r.0 + r.1 * r.1 + r.2 * r.2).sqrt();
        if residual < 1e-10 * scale {
            return (p, x, y);
        }
    }
    panic!("Bloch integration did not reach steady state");
}

/// The (s, δ, γ_d-slope) grid used for cross-checking the closed form.
pub fn oracle_grid() -> Vec<(f64, f64, f64)> {
    let mut grid = Vec::new();
    for &s in &[0.1, 0.5, 1.0, 5.0, 11.0] {
        for &delta in &[0.0, 125.0, -125.0, 250.0, -250.0] {
            for &coeff in &[0.0, 9.3] {
                grid.push((s, delta, coeff * s));
            }
        }
    }
    grid
}
