//! Dormand–Prince 5(4) with local extrapolation, max-norm error control and
//! exact landing on requested output times.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum OdeError<E> {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
    #[error(transparent)]
    Rhs(E),
}

/// Absolute/relative error tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { abs: 1e-10, rel: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dopri5 {
    pub tol: Tolerances,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 { tol: Tolerances::default(), max_step: f64::INFINITY, min_step: 1e-14, max_steps: 50_000_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// An accepted point handed to the observer.
#[derive(Debug)]
pub struct Step<'a> {
    pub t: f64,
    pub y: &'a [f64],
    /// Derivative at `(t, y)`.
    pub dy: &'a [f64],
    /// Index into the requested stop times when this point is one of them.
    pub stop: Option<usize>,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
/// Fifth minus fourth order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl Dopri5 {
    pub fn new(tol: Tolerances) -> Self {
        Dopri5 { tol, ..Default::default() }
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }

    fn error_norm(&self, y: &[f64], y_new: &[f64], err: &[f64]) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..y.len() {
            let scale = self.tol.abs + self.tol.rel * y[i].abs().max(y_new[i].abs());
            m = m.max((err[i] / scale).abs());
        }
        m
    }

    /// Integrates `y' = rhs(t, y)` from `t0` to `t_end` (either direction).
    ///
    /// `stops` must be ordered in the direction of integration and lie in
    /// `[t0, t_end]`; the integrator lands on each of them exactly. The
    /// observer sees the initial point and every accepted step.
    pub fn solve<E, F, O>(
        &self,
        mut rhs: F,
        t0: f64,
        y0: &[f64],
        t_end: f64,
        stops: &[f64],
        mut observe: O,
    ) -> Result<(Vec<f64>, SolveStats), OdeError<E>>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
        O: FnMut(&Step<'_>) -> Result<(), E>,
    {
        let n = y0.len();
        let dir = if t_end >= t0 { 1.0 } else { -1.0 };
        let mut stats = SolveStats::default();
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
        rhs(t, &y, &mut k[0]).map_err(OdeError::Rhs)?;
        stats.evaluations += 1;

        let mut next_stop = 0;
        while next_stop < stops.len() && stops[next_stop] == t0 {
            next_stop += 1;
        }
        let first_stop = (next_stop > 0).then(|| next_stop - 1);
        observe(&Step { t, y: &y, dy: &k[0], stop: first_stop }).map_err(OdeError::Rhs)?;
        if t_end == t0 {
            return Ok((y, stats));
        }

        let mut h = dir * self.initial_step(&mut rhs, t0, &y, &k[0], &mut stats)?.min((t_end - t0).abs());
        let mut tmp = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        let mut err = vec![0.0; n];
        let mut last_rejected = false;

        loop {
            let target = if next_stop < stops.len() { stops[next_stop] } else { t_end };
            let unclipped = h;
            let landing = (target - t) * dir <= h.abs() * (1.0 + 1e-12);
            let h_step = if landing { target - t } else { h };
            if h_step.abs() < self.min_step && !landing {
                return Err(OdeError::StepSizeUnderflow { t, h: h_step });
            }
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(OdeError::TooManySteps { t });
            }

            let rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
            for (s, row) in rows.iter().enumerate() {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, a) in row.iter().enumerate() {
                        acc += a * k[j][i];
                    }
                    tmp[i] = y[i] + h_step * acc;
                }
                rhs(t + C[s + 1] * h_step, &tmp, &mut k[s + 1]).map_err(OdeError::Rhs)?;
            }
            for i in 0..n {
                let mut acc = 0.0;
                for (j, b) in B.iter().enumerate() {
                    acc += b * k[j][i];
                }
                y_new[i] = y[i] + h_step * acc;
            }
            rhs(t + h_step, &y_new, &mut k[6]).map_err(OdeError::Rhs)?;
            stats.evaluations += 6;
            for i in 0..n {
                let mut acc = 0.0;
                for (j, e) in E.iter().enumerate() {
                    acc += e * k[j][i];
                }
                err[i] = h_step * acc;
            }
            let en = self.error_norm(&y, &y_new, &err);
            if !en.is_finite() {
                stats.rejected += 1;
                h = 0.2 * h_step;
                last_rejected = true;
                if h.abs() < self.min_step {
                    return Err(OdeError::StepSizeUnderflow { t, h });
                }
                continue;
            }

            let mut factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            if en <= 1.0 {
                if last_rejected {
                    factor = factor.min(1.0);
                }
                stats.accepted += 1;
                t = if landing { target } else { t + h_step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                let stop = if landing && next_stop < stops.len() {
                    next_stop += 1;
                    Some(next_stop - 1)
                } else {
                    None
                };
                observe(&Step { t, y: &y, dy: &k[0], stop }).map_err(OdeError::Rhs)?;
                if landing && stop.is_none() {
                    return Ok((y, stats));
                }
                let proposed = (h_step * factor).abs().min(self.max_step);
                let keep = if landing { unclipped.abs().max(proposed).min(self.max_step) } else { proposed };
                h = dir * keep;
                last_rejected = false;
                if stop.is_some() && next_stop >= stops.len() && t == t_end {
                    return Ok((y, stats));
                }
            } else {
                stats.rejected += 1;
                last_rejected = true;
                h = h_step * factor.min(1.0);
                if h.abs() < self.min_step {
                    return Err(OdeError::StepSizeUnderflow { t, h });
                }
            }
        }
    }

    fn initial_step<E, F>(&self, rhs: &mut F, t0: f64, y0: &[f64], f0: &[f64], stats: &mut SolveStats) -> Result<f64, OdeError<E>>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    {
        let n = y0.len();
        let sc: Vec<f64> = y0.iter().map(|v| self.tol.abs + self.tol.rel * v.abs()).collect();
        let rms = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
        let d0 = rms(y0);
        let d1 = rms(f0);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.max_step);
        let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
        let mut f1 = vec![0.0; n];
        rhs(t0 + h0, &y1, &mut f1).map_err(OdeError::Rhs)?;
        stats.evaluations += 1;
        let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| (a - b) / h0).collect();
        let d2 = rms(&diff);
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        // Starting points a few ulps off zero can suggest steps below the floor.
        Ok((100.0 * h0).min(h1).max(100.0 * self.min_step).min(self.max_step))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type NoErr = std::convert::Infallible;

    #[test]
    fn starts_near_zero_without_underflow() {
        let solver = Dopri5::new(Tolerances { abs: 1e-13, rel: 1e-13 });
        let (y, _) = solver
            .solve(
                |_, y: &[f64], dy: &mut [f64]| -> Result<(), NoErr> {
                    dy[0] = 1.0 + y[0] * y[0];
                    Ok(())
                },
                0.0,
                &[2.7755575615628907e-17],
                0.04,
                &[],
                |_| Ok(()),
            )
            .unwrap();
        assert!((y[0] - 0.04f64.tan()).abs() < 1e-12);
    }

    #[test]
    fn exponential_decay() {
        let solver = Dopri5::new(Tolerances { abs: 1e-12, rel: 1e-12 });
        let (y, stats) = solver
            .solve(
                |_, y: &[f64], dy: &mut [f64]| -> Result<(), NoErr> {
                    dy[0] = -y[0];
                    Ok(())
                },
                0.0,
                &[1.0],
                2.0,
                &[],
                |_| Ok(()),
            )
            .unwrap();
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-11, "{}", y[0]);
        assert!(stats.accepted > 5);
    }

    #[test]
    fn lands_on_stops_backwards() {
        let solver = Dopri5::new(Tolerances { abs: 1e-12, rel: 1e-12 }).with_max_step(0.05);
        let stops = [0.0, -0.25, -0.5, -1.0];
        let mut seen = Vec::new();
        let (y, _) = solver
            .solve(
                |_, y: &[f64], dy: &mut [f64]| -> Result<(), NoErr> {
                    dy[0] = y[1];
                    dy[1] = -y[0];
                    Ok(())
                },
                0.0,
                &[0.0, 1.0],
                -1.0,
                &stops,
                |s| {
                    if let Some(i) = s.stop {
                        seen.push((i, s.t, s.y[0]));
                    }
                    Ok(())
                },
            )
            .unwrap();
        assert_eq!(seen.len(), 4);
        for (i, t, x) in seen {
            assert_eq!(t, stops[i]);
            assert!((x - t.sin()).abs() < 1e-11);
        }
        assert!((y[0] - (-1.0f64).sin()).abs() < 1e-11);
    }

    #[test]
    fn rhs_errors_propagate() {
        let solver = Dopri5::default();
        let r = solver.solve(
            |t, _: &[f64], dy: &mut [f64]| {
                dy[0] = 1.0;
                if t > 0.5 {
                    Err("boom")
                } else {
                    Ok(())
                }
            },
            0.0,
            &[0.0],
            1.0,
            &[],
            |_| Ok(()),
        );
        assert!(matches!(r, Err(OdeError::Rhs("boom"))));
    }

    #[test]
    fn fifth_order_convergence() {
        // Fixed-step runs through the max-step cap with loose tolerances.
        let run = |h: f64| {
            let solver = Dopri5 { tol: Tolerances { abs: 1.0, rel: 1.0 }, max_step: h, ..Default::default() };
            let (y, _) = solver
                .solve(
                    |_, y: &[f64], dy: &mut [f64]| -> Result<(), NoErr> {
                        dy[0] = y[1];
                        dy[1] = -y[0];
                        Ok(())
                    },
                    0.0,
                    &[0.0, 1.0],
                    1.0,
                    &[],
                    |_| Ok(()),
                )
                .unwrap();
            (y[0] - 1.0f64.sin()).abs()
        };
        let e1 = run(0.1);
        let e2 = run(0.05);
        let slope = (e1 / e2).log2();
        assert!(slope > 4.5, "slope {slope}");
    }
}
