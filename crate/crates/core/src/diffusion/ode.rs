use serde::{Deserialize, Serialize};

use super::{check_signal, BoundarySpec, ClampMode, HeatField};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Dormand–Prince 5(4) with embedded error control.
    #[default]
    Dopri5,
    /// Classical fourth-order Runge–Kutta, fixed step.
    Rk4,
    /// Forward Euler, fixed step.
    Euler,
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dopri5" => Ok(Scheme::Dopri5),
            "rk4" | "rk4-fixed" => Ok(Scheme::Rk4),
            "euler" | "euler-fixed" => Ok(Scheme::Euler),
            other => Err(format!("unknown scheme {other:?} (expected dopri5, rk4 or euler)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub t_final: f64,
    pub rtol: f64,
    pub atol: f64,
    pub scheme: Scheme,
    /// Step length for the fixed-step schemes; the horizon is split into
    /// `ceil(t_final / fixed_step)` equal steps.
    pub fixed_step: f64,
    /// Upper bound on attempted adaptive steps.
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            rtol: 1e-6,
            atol: 1e-6,
            scheme: Scheme::Dopri5,
            fixed_step: 0.025,
            max_steps: 100_000,
        }
    }
}

impl SolverConfig {
    pub fn dopri5(t_final: f64) -> Self {
        Self {
            t_final,
            ..Self::default()
        }
    }

    /// Fixed-step scheme taking exactly `steps` equal steps over `[0, t_final]`.
    pub fn fixed(scheme: Scheme, t_final: f64, steps: usize) -> Self {
        let fixed_step = if t_final > 0.0 && steps > 0 {
            t_final / steps as f64
        } else {
            1.0
        };
        Self {
            t_final,
            scheme,
            fixed_step,
            ..Self::default()
        }
    }

    pub fn with_t_final(mut self, t_final: f64) -> Self {
        if self.scheme != Scheme::Dopri5 && self.t_final > 0.0 {
            let steps = self.step_count();
            self.fixed_step = if t_final > 0.0 { t_final / steps as f64 } else { 1.0 };
        }
        self.t_final = t_final;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSolverConfig(msg));
        if !self.t_final.is_finite() || self.t_final < 0.0 {
            return bad(format!("t_final must be finite and >= 0, got {}", self.t_final));
        }
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return bad(format!("tolerances must be > 0, got rtol={} atol={}", self.rtol, self.atol));
        }
        if self.scheme != Scheme::Dopri5 && !(self.fixed_step > 0.0 && self.fixed_step.is_finite()) {
            return bad(format!("fixed_step must be > 0, got {}", self.fixed_step));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be >= 1".into());
        }
        Ok(())
    }

    /// Number of steps a fixed-step scheme takes.
    pub fn step_count(&self) -> usize {
        if self.t_final <= 0.0 {
            return 0;
        }
        let ratio = self.t_final / self.fixed_step;
        // absorb rounding in t / (t / n)
        ((ratio - 1e-9 * ratio.max(1.0)).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

pub fn integrate(
    g: &Graph,
    psi0: &NodeSignal,
    boundary: &BoundarySpec,
    mode: ClampMode,
    cfg: &SolverConfig,
) -> Result<NodeSignal> {
    integrate_with_stats(g, psi0, boundary, mode, cfg).map(|(f, _)| f)
}

/// Evolves `psi0` to `cfg.t_final`. In clamped mode the labeled rows are set
/// to `g` at the start and the derivative there is zero, so they are exactly
/// `g` at the end.
pub fn integrate_with_stats(
    g: &Graph,
    psi0: &NodeSignal,
    boundary: &BoundarySpec,
    mode: ClampMode,
    cfg: &SolverConfig,
) -> Result<(NodeSignal, IntegrationStats)> {
    check_signal(g, psi0, boundary)?;
    cfg.validate()?;
    if cfg.t_final == 0.0 {
        return Ok((psi0.clone(), IntegrationStats::default()));
    }
    let k = psi0.num_classes();
    let mut state = psi0.as_slice().to_vec();
    if mode == ClampMode::Clamped {
        boundary.write_rows(k, &mut state);
    }
    let field = HeatField::new(g, k, boundary, mode);
    let stats = run(|x, out| field.eval(x, out), &mut state, cfg)?;
    if mode == ClampMode::Clamped {
        boundary.write_rows(k, &mut state);
    }
    Ok((NodeSignal::from_flat(g.num_nodes(), k, state), stats))
}

/// States at each of the nondecreasing `times`, continuing one trajectory.
pub fn integrate_samples(
    g: &Graph,
    psi0: &NodeSignal,
    boundary: &BoundarySpec,
    mode: ClampMode,
    cfg: &SolverConfig,
    times: &[f64],
) -> Result<Vec<NodeSignal>> {
    let mut out = Vec::with_capacity(times.len());
    let mut current = psi0.clone();
    let mut t = 0.0;
    for &ti in times {
        if !(ti >= t) {
            return Err(Error::InvalidSolverConfig(format!(
                "sample times must be nondecreasing and >= 0, got {ti} after {t}"
            )));
        }
        let seg = cfg.with_t_final(ti - t);
        current = integrate(g, &current, boundary, mode, &seg)?;
        out.push(current.clone());
        t = ti;
    }
    Ok(out)
}

fn run<F>(field: F, y: &mut [f64], cfg: &SolverConfig) -> Result<IntegrationStats>
where
    F: FnMut(&[f64], &mut [f64]),
{
    match cfg.scheme {
        Scheme::Dopri5 => dopri5(field, y, cfg.t_final, cfg.rtol, cfg.atol, cfg.max_steps),
        scheme => fixed_step(field, y, cfg.t_final, scheme, cfg.step_count()),
    }
}

// Dormand–Prince 5(4) tableau. The field is autonomous, so the nodes c_i
// are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

fn rms_scaled(v: &[f64], y: &[f64], atol: f64, rtol: f64) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let s: f64 = v
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = a / (atol + rtol * b.abs());
            r * r
        })
        .sum();
    (s / v.len() as f64).sqrt()
}

/// Hairer–Nørsett–Wanner starting-step heuristic.
fn initial_step<F>(field: &mut F, y: &[f64], f0: &[f64], t_final: f64, rtol: f64, atol: f64) -> f64
where
    F: FnMut(&[f64], &mut [f64]),
{
    let d0 = rms_scaled(y, y, atol, rtol);
    let d1 = rms_scaled(f0, y, atol, rtol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(t_final);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    field(&y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms_scaled(&diff, y, atol, rtol) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_final)
}

pub(crate) fn dopri5<F>(
    mut field: F,
    y: &mut [f64],
    t_final: f64,
    rtol: f64,
    atol: f64,
    max_steps: usize,
) -> Result<IntegrationStats>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = y.len();
    let mut stats = IntegrationStats::default();
    if t_final <= 0.0 || n == 0 {
        return Ok(stats);
    }
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    field(y, &mut k1);
    let mut h = initial_step(&mut field, y, &k1, t_final, rtol, atol);
    stats.evaluations += 2;
    let mut t = 0.0;
    let mut last_rejected = false;

    while t < t_final {
        if stats.accepted + stats.rejected >= max_steps {
            return Err(Error::MaxStepsExceeded {
                t_final,
                reached: t,
                max_steps,
            });
        }
        let last = t + h >= t_final * (1.0 - 1e-14);
        if last {
            h = t_final - t;
        }

        for i in 0..n {
            stage[i] = y[i] + h * A21 * k1[i];
        }
        field(&stage, &mut k2);
        for i in 0..n {
            stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        field(&stage, &mut k3);
        for i in 0..n {
            stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        field(&stage, &mut k4);
        for i in 0..n {
            stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        field(&stage, &mut k5);
        for i in 0..n {
            stage[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        field(&stage, &mut k6);
        for i in 0..n {
            y_new[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        field(&y_new, &mut k7);
        stats.evaluations += 6;

        let mut acc = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            let r = e / sc;
            acc += r * r;
        }
        let err = (acc / n as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::NonFiniteState(t + h));
        }

        if err <= 1.0 {
            t = if last { t_final } else { t + h };
            y.copy_from_slice(&y_new);
            std::mem::swap(&mut k1, &mut k7);
            stats.accepted += 1;
            let mut fac = if err == 0.0 { FAC_MAX } else { SAFETY * err.powf(-0.2) };
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
            h *= fac;
            last_rejected = true;
            if h < f64::EPSILON * t.max(1.0) {
                return Err(Error::StepSizeUnderflow(t));
            }
        }
    }
    Ok(stats)
}

pub(crate) fn fixed_step<F>(
    mut field: F,
    y: &mut [f64],
    t_final: f64,
    scheme: Scheme,
    steps: usize,
) -> Result<IntegrationStats>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = y.len();
    let mut stats = IntegrationStats::default();
    if t_final <= 0.0 || steps == 0 {
        return Ok(stats);
    }
    let h = t_final / steps as f64;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    for step in 0..steps {
        match scheme {
            Scheme::Euler => {
                field(y, &mut k1);
                for i in 0..n {
                    y[i] += h * k1[i];
                }
                stats.evaluations += 1;
            }
            Scheme::Rk4 | Scheme::Dopri5 => {
                field(y, &mut k1);
                for i in 0..n {
                    stage[i] = y[i] + 0.5 * h * k1[i];
                }
                field(&stage, &mut k2);
                for i in 0..n {
                    stage[i] = y[i] + 0.5 * h * k2[i];
                }
                field(&stage, &mut k3);
                for i in 0..n {
                    stage[i] = y[i] + h * k3[i];
                }
                field(&stage, &mut k4);
                for i in 0..n {
                    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                stats.evaluations += 4;
            }
        }
        stats.accepted += 1;
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState((step + 1) as f64 * h));
        }
    }
    Ok(stats)
}
