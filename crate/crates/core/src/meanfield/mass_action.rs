use thiserror::Error;

use crate::crn::ReactionNetwork;

#[derive(Debug, Error, PartialEq)]
pub enum MassActionError {
    #[error("initial concentration {value} for species {species} is negative")]
    Negative { species: usize, value: f64 },
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("timestep must be finite and positive, got {0}")]
    Timestep(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassActionSeries {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl MassActionSeries {
    pub fn last(&self) -> (f64, &[f64]) {
        let i = self.times.len() - 1;
        (self.times[i], &self.values[i])
    }
}

/// Right-hand side of the well-mixed system for concentrations `y`.
pub fn mass_action_rhs(net: &ReactionNetwork, rates: &[f64], y: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (r, &lambda) in net.reactions().iter().zip(rates) {
        let (k, l) = r.input;
        let (k2, l2) = r.output;
        let flux = lambda * y[k] * y[l];
        out[k] -= flux;
        out[l] -= flux;
        out[k2] += flux;
        out[l2] += flux;
    }
}

/// Classical RK4 from `y0` to `t_final`, recording every step.
pub fn solve_mass_action(
    net: &ReactionNetwork,
    y0: &[f64],
    rates: &[f64],
    t_final: f64,
    dt: f64,
) -> Result<MassActionSeries, MassActionError> {
    let n = net.n_species();
    if y0.len() != n {
        return Err(MassActionError::Length { expected: n, got: y0.len() });
    }
    if rates.len() != net.n_reactions() {
        return Err(MassActionError::Length { expected: net.n_reactions(), got: rates.len() });
    }
    if let Some((species, &value)) = y0.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(MassActionError::Negative { species, value });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(MassActionError::Timestep(dt));
    }
    let eps = 1e-9 * dt;
    let n_steps = if t_final <= eps { 0 } else { ((t_final - eps) / dt).ceil() as usize };
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut y = y0.to_vec();
    times.push(0.0);
    values.push(y.clone());
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for step in 0..n_steps {
        let h = if step + 1 == n_steps { t_final - dt * step as f64 } else { dt };
        mass_action_rhs(net, rates, &y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        mass_action_rhs(net, rates, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        mass_action_rhs(net, rates, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        mass_action_rhs(net, rates, &tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        times.push(if step + 1 == n_steps { t_final } else { dt * (step + 1) as f64 });
        values.push(y.clone());
    }
    Ok(MassActionSeries { times, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crn::parse_network;

    fn special() -> ReactionNetwork {
        parse_network("kernel k = constant(rate=1)\nS1 + S2 -> S2 + S2 @ k").unwrap()
    }

    /// `u(t) = u0 e^{-t} / (1 - u0 + u0 e^{-t})` when `u + w = 1`, `lambda = 1`.
    fn logistic(u0: f64, t: f64) -> f64 {
        u0 * (-t).exp() / (1.0 - u0 + u0 * (-t).exp())
    }

    #[test]
    fn logistic_closed_form_at_ln2() {
        assert!((logistic(0.5, 2f64.ln()) - 1.0 / 3.0).abs() < 1e-15);
        let s = solve_mass_action(&special(), &[0.5, 0.5], &[1.0], 2f64.ln(), 1e-3).unwrap();
        let (t, y) = s.last();
        assert!((t - 2f64.ln()).abs() < 1e-15);
        assert!((y[0] - 1.0 / 3.0).abs() < 1e-8);
        for v in &s.values {
            assert!((v[0] + v[1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_rate_is_constant() {
        let s = solve_mass_action(&special(), &[0.2, 0.8], &[0.0], 1.0, 0.1).unwrap();
        assert!(s.values.iter().all(|v| v == &vec![0.2, 0.8]));
    }

    #[test]
    fn rejects_negative_input() {
        assert_eq!(
            solve_mass_action(&special(), &[-0.1, 1.1], &[1.0], 1.0, 0.1),
            Err(MassActionError::Negative { species: 0, value: -0.1 })
        );
    }
}
