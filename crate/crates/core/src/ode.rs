//! Simulation of model ODEs: an adaptive Dormand-Prince pair with a
//! Rosenbrock fallback for stiff stretches, timed events, and a local
//! stability check from the Jacobian spectrum.

use nalgebra::{DMatrix, DVector};

use crate::expr::{Env, Expr, VarRef};
use crate::model::{Assignment, Model};
use crate::trace::{Trace, TraceEvent};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("derivative of `{state}` is not finite")]
    NonFinite { state: String },
    #[error("no value for `{0}`")]
    Missing(String),
    #[error("step size underflow at t = {time:e} (h = {step:e}) even with the implicit method")]
    Stiff { time: f64, step: f64 },
    #[error("invalid initial state: {0}")]
    BadInit(String),
    #[error("Jacobian is not finite")]
    Jacobian,
}

#[derive(Clone, Debug)]
pub struct SimOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Explicit steps allowed per interval before switching to the implicit method.
    pub explicit_steps: usize,
    /// Implicit steps allowed per interval before reporting stiffness.
    pub max_steps: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            rtol: 1e-7,
            atol: 1e-15,
            explicit_steps: 200_000,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub trace: Trace,
    /// Clamped negative concentrations and method switches.
    pub warnings: Vec<String>,
    pub implicit_steps: usize,
}

struct Env2<'a> {
    params: &'a [f64],
    states: &'a [f64],
}

impl Env for Env2<'_> {
    fn value(&self, v: VarRef) -> Option<f64> {
        let x = match v {
            VarRef::Unknown(i) => *self.params.get(i)?,
            VarRef::State(i) => *self.states.get(i)?,
        };
        (!x.is_nan()).then_some(x)
    }
}

/// Right-hand side with parameter values held in a dense vector (NaN = unset).
struct System<'a> {
    odes: &'a [Expr],
    states: &'a [String],
    names: &'a [String],
    params: Vec<f64>,
    evals: usize,
}

impl System<'_> {
    fn f(&mut self, y: &[f64], out: &mut [f64]) -> Result<(), OdeError> {
        self.evals += 1;
        let env = Env2 {
            params: &self.params,
            states: y,
        };
        for (k, e) in self.odes.iter().enumerate() {
            let v = e.eval(&env).map_err(|err| match err {
                crate::expr::EvalError::Missing(VarRef::Unknown(i)) => OdeError::Missing(self.names[i].clone()),
                crate::expr::EvalError::Missing(VarRef::State(i)) => OdeError::Missing(self.states[i].clone()),
                _ => OdeError::NonFinite {
                    state: self.states[k].clone(),
                },
            })?;
            if !v.is_finite() {
                return Err(OdeError::NonFinite {
                    state: self.states[k].clone(),
                });
            }
            out[k] = v;
        }
        Ok(())
    }

    fn jacobian(&mut self, y: &[f64]) -> Result<DMatrix<f64>, OdeError> {
        let n = y.len();
        let mut j = DMatrix::zeros(n, n);
        let mut yp = y.to_vec();
        let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
        for c in 0..n {
            let h = (1e-6 * y[c].abs()).max(1e-18);
            yp[c] = y[c] + h;
            self.f(&yp, &mut fp)?;
            yp[c] = y[c] - h;
            self.f(&yp, &mut fm)?;
            yp[c] = y[c];
            for r in 0..n {
                j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        if j.iter().all(|x| x.is_finite()) {
            Ok(j)
        } else {
            Err(OdeError::Jacobian)
        }
    }
}

fn params_of(a: &Assignment) -> Vec<f64> {
    a.to_vec()
}

/// Evaluates every ODE right-hand side at `state`.
pub fn rhs(m: &Model, state: &[f64], params: &Assignment) -> Result<Vec<f64>, OdeError> {
    let mut sys = System {
        odes: m.odes(),
        states: m.states(),
        names: m.unknown_names(),
        params: params_of(params),
        evals: 0,
    };
    let mut out = vec![0.0; state.len()];
    sys.f(state, &mut out)?;
    Ok(out)
}

/// Steady-state vector read from the `<state>_eq` unknowns of an assignment.
pub fn steady_state_vector(m: &Model, a: &Assignment) -> Result<Vec<f64>, OdeError> {
    (0..m.states().len())
        .map(|s| {
            m.steady_unknown(s)
                .and_then(|i| a.get(i))
                .ok_or_else(|| OdeError::Missing(format!("{}_eq", m.states()[s])))
        })
        .collect()
}

fn err_norm(err: &[f64], y0: &[f64], y1: &[f64], o: &SimOptions) -> f64 {
    let n = err.len().max(1) as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = o.atol + o.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

// Dormand-Prince 5(4) coefficients; the right-hand sides are autonomous
// between events, so the stage times are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Integrator<'a, 'b> {
    sys: &'b mut System<'a>,
    opts: &'b SimOptions,
    trace: &'b mut Trace,
    warnings: &'b mut Vec<String>,
    implicit_steps: usize,
    h: f64,
}

impl Integrator<'_, '_> {
    fn record(&mut self, t: f64, y: &mut [f64]) {
        for (k, v) in y.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v < -1e-30 {
                    self.warnings.push(format!(
                        "{} = {:e} clamped to 0 at t = {:e}",
                        self.trace.names[k], *v, t
                    ));
                }
                *v = 0.0;
            }
        }
        self.trace.push(t, y.to_vec());
    }

    fn initial_step(&mut self, t0: f64, t1: f64, y: &[f64], f0: &[f64]) -> f64 {
        let o = self.opts;
        let d0 = err_norm(y, y, y, o);
        let d1 = err_norm(f0, y, y, o);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(t1 - t0).max(1e-12 * (t1 - t0))
    }

    /// Integrates from `t0` to `t1`, recording every accepted step.
    fn run(&mut self, t0: f64, t1: f64, y: &mut Vec<f64>) -> Result<(), OdeError> {
        let n = y.len();
        let mut t = t0;
        let mut k = vec![vec![0.0; n]; 7];
        let mut ytmp = vec![0.0; n];
        let mut ynew = vec![0.0; n];
        let mut err = vec![0.0; n];
        self.sys.f(y, &mut k[0])?;
        if self.h <= 0.0 {
            let f0 = k[0].clone();
            self.h = self.initial_step(t0, t1, y, &f0);
        }
        let mut steps = 0usize;
        while t < t1 {
            let span = t1 - t;
            let h = self.h.min(span);
            let hmin = 1e-14 * t.abs().max(t1.abs()).max(1.0);
            if h < hmin || steps >= self.opts.explicit_steps {
                self.warnings
                    .push(format!("switching to the implicit method at t = {t:e}"));
                return self.run_implicit(t, t1, y);
            }
            steps += 1;
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    ytmp[i] = y[i] + h * acc;
                }
                if s == 6 {
                    ynew.copy_from_slice(&ytmp);
                }
                self.sys.f(&ytmp, &mut k[s])?;
            }
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc += E[j] * kj[i];
                }
                err[i] = h * acc;
            }
            let en = err_norm(&err, y, &ynew, self.opts);
            if en <= 1.0 {
                t = if h == span { t1 } else { t + h };
                y.copy_from_slice(&ynew);
                let mut rec = y.clone();
                self.record(t, &mut rec);
                // Clamp negatives before continuing; FSAL stage is recomputed if so.
                if rec != *y {
                    y.copy_from_slice(&rec);
                    self.sys.f(y, &mut k[0])?;
                } else {
                    k.swap(0, 6);
                }
                let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
                self.h = h * fac;
            } else {
                self.h = h * (0.9 * en.powf(-0.2)).clamp(0.1, 1.0);
            }
        }
        Ok(())
    }

    /// Two-stage Rosenbrock method (L-stable, order 2) with an embedded
    /// first-order estimate; used when explicit steps become too small.
    fn run_implicit(&mut self, t0: f64, t1: f64, y: &mut Vec<f64>) -> Result<(), OdeError> {
        let n = y.len();
        let gamma = 1.0 + std::f64::consts::FRAC_1_SQRT_2;
        let mut t = t0;
        let mut h = self.h.max(1e-6 * (t1 - t0));
        let (mut f0, mut f1) = (vec![0.0; n], vec![0.0; n]);
        let mut steps = 0usize;
        while t < t1 {
            let span = t1 - t;
            h = h.min(span);
            let hmin = 1e-15 * t.abs().max(t1.abs()).max(1.0);
            if h < hmin || steps >= self.opts.max_steps {
                return Err(OdeError::Stiff { time: t, step: h });
            }
            steps += 1;
            let j = self.sys.jacobian(y)?;
            let w = DMatrix::identity(n, n) - j * (gamma * h);
            let Some(lu) = Some(w.lu()).filter(|lu| lu.is_invertible()) else {
                h *= 0.25;
                continue;
            };
            self.sys.f(y, &mut f0)?;
            let k1 = lu.solve(&DVector::from_column_slice(&f0)).ok_or(OdeError::Jacobian)?;
            let y1: Vec<f64> = (0..n).map(|i| y[i] + h * k1[i]).collect();
            self.sys.f(&y1, &mut f1)?;
            let rhs2 = DVector::from_iterator(n, (0..n).map(|i| f1[i] - 2.0 * k1[i]));
            let k2 = lu.solve(&rhs2).ok_or(OdeError::Jacobian)?;
            let ynew: Vec<f64> = (0..n).map(|i| y[i] + h * (1.5 * k1[i] + 0.5 * k2[i])).collect();
            let err: Vec<f64> = (0..n).map(|i| 0.5 * h * (k1[i] + k2[i])).collect();
            let en = err_norm(&err, y, &ynew, self.opts);
            if en <= 1.0 && ynew.iter().all(|v| v.is_finite()) {
                t = if h == span { t1 } else { t + h };
                y.copy_from_slice(&ynew);
                let mut rec = y.clone();
                self.record(t, &mut rec);
                y.copy_from_slice(&rec);
                self.implicit_steps += 1;
                h *= (0.9 * en.max(1e-10).powf(-0.5)).clamp(0.2, 4.0);
            } else {
                h *= (0.9 * en.max(1e-10).powf(-0.5)).clamp(0.1, 0.9);
            }
        }
        self.h = h;
        Ok(())
    }
}

/// Integrates the model ODEs from `init` over `[0, t_end]`, applying the
/// model's events at their times. Parameters come from `params`.
pub fn simulate(m: &Model, params: &Assignment, init: &[f64], t_end: f64, opts: &SimOptions) -> Result<Simulation, OdeError> {
    if init.len() != m.states().len() {
        return Err(OdeError::BadInit(format!(
            "expected {} values, got {}",
            m.states().len(),
            init.len()
        )));
    }
    if let Some((k, v)) = init.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(OdeError::BadInit(format!("{} = {v}", m.states()[k])));
    }
    if !(t_end >= 0.0) {
        return Err(OdeError::BadInit(format!("t_end = {t_end}")));
    }
    let mut sys = System {
        odes: m.odes(),
        states: m.states(),
        names: m.unknown_names(),
        params: params_of(params),
        evals: 0,
    };
    let mut events: Vec<(f64, usize)> = Vec::new();
    for (k, ev) in m.events().iter().enumerate() {
        let env = Env2 {
            params: &sys.params,
            states: init,
        };
        let t = ev.time.eval(&env).map_err(|_| OdeError::Missing(format!("time of event `{}`", ev.label)))?;
        if t >= 0.0 && t <= t_end {
            events.push((t, k));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut trace = Trace::new(m.states().to_vec());
    let mut warnings = Vec::new();
    let mut y = init.to_vec();
    trace.push(0.0, y.clone());
    let mut integ = Integrator {
        sys: &mut sys,
        opts,
        trace: &mut trace,
        warnings: &mut warnings,
        implicit_steps: 0,
        h: 0.0,
    };
    let mut t = 0.0;
    for (te, k) in events {
        if te > t {
            integ.run(t, te, &mut y)?;
            t = te;
        }
        let ev = &m.events()[k];
        let changes: Vec<(VarRef, f64)> = {
            let env = Env2 {
                params: &integ.sys.params,
                states: &y,
            };
            ev.assignments
                .iter()
                .map(|(v, e)| {
                    e.eval(&env)
                        .map(|x| (*v, x))
                        .map_err(|_| OdeError::Missing(format!("assignment of event `{}`", ev.label)))
                })
                .collect::<Result<_, _>>()?
        };
        let mut state_changed = false;
        for (v, x) in changes {
            match v {
                VarRef::Unknown(i) => integ.sys.params[i] = x,
                VarRef::State(i) => {
                    y[i] = x;
                    state_changed = true;
                }
            }
        }
        integ.trace.events.push(TraceEvent {
            time: te,
            label: ev.label.clone(),
        });
        if state_changed {
            let mut rec = y.clone();
            integ.record(te, &mut rec);
            y = rec;
        }
        integ.h = 0.0;
    }
    if t_end > t {
        integ.run(t, t_end, &mut y)?;
    }
    let implicit_steps = integ.implicit_steps;
    Ok(Simulation {
        trace,
        warnings,
        implicit_steps,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub class: Stability,
    pub max_real: f64,
    /// Eigenvalues as (real, imaginary) pairs.
    pub eigenvalues: Vec<(f64, f64)>,
}

/// Threshold on the largest eigenvalue real part separating the classes.
pub const MARGINAL_BAND: f64 = 1e-12;

/// Classifies a steady state from the eigenvalues of the central-difference
/// Jacobian of the right-hand side.
pub fn stability_check(m: &Model, params: &Assignment, steady: &[f64]) -> Result<StabilityReport, OdeError> {
    let mut sys = System {
        odes: m.odes(),
        states: m.states(),
        names: m.unknown_names(),
        params: params_of(params),
        evals: 0,
    };
    let j = sys.jacobian(steady)?;
    Ok(classify(j))
}

fn classify(j: DMatrix<f64>) -> StabilityReport {
    let ev = j.complex_eigenvalues();
    let eigenvalues: Vec<(f64, f64)> = ev.iter().map(|c| (c.re, c.im)).collect();
    let max_real = eigenvalues.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let class = if max_real < -MARGINAL_BAND {
        Stability::Stable
    } else if max_real <= MARGINAL_BAND {
        Stability::Marginal
    } else {
        Stability::Unstable
    };
    StabilityReport {
        class,
        max_real,
        eigenvalues,
    }
}
