use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
}

/// Least-squares slope of `ln(value)` against `t` over the second half of the series.
pub fn fit_decay(series: &[(f64, f64)]) -> Result<DecayFit> {
    if series.len() < 10 {
        return Err(Error::InvalidParameter(format!("decay fit needs at least 10 samples, got {}", series.len())));
    }
    if let Some((t, v)) = series.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Domain(format!("nonpositive value {v} at t = {t}")));
    }
    let tail = &series[series.len() / 2..];
    let n = tail.len() as f64;
    let mt = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let my = tail.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, v) in tail {
        let (dt, dy) = (t - mt, v.ln() - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::InvalidParameter("decay fit needs distinct times".into()));
    }
    let rate = sty / stt;
    let ss_res: f64 = tail.iter().map(|&(t, v)| (v.ln() - my - rate * (t - mt)).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(DecayFit { rate, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_constant_series() {
        let s: Vec<(f64, f64)> = (0..50).map(|i| (0.1 * i as f64, (-0.2 * i as f64).exp())).collect();
        let fit = fit_decay(&s).unwrap();
        assert!((fit.rate + 2.0).abs() < 1e-6 && fit.r_squared > 0.999999);
        let c: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 3.0)).collect();
        assert_eq!(fit_decay(&c).unwrap().rate, 0.0);
        assert!(fit_decay(&c[..5]).is_err());
        assert!(fit_decay(&[(0.0, 1.0); 12].iter().enumerate().map(|(i, p)| (i as f64, p.1 - 1.0)).collect::<Vec<_>>()).is_err());
    }
}
