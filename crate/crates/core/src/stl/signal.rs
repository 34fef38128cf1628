//! Continuous piecewise-linear signals and the exact operations the monitor needs.

/// Breakpoints `(t[k], v[k])`, times strictly increasing, linear in between.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    t: Vec<f64>,
    v: Vec<f64>,
}

/// Relative gap under which two breakpoint times are merged.
const TIME_EPS: f64 = 1e-13;

fn lerp(t0: f64, v0: f64, t1: f64, v1: f64, t: f64) -> f64 {
    if t1 == t0 {
        return v1;
    }
    let s = (t - t0) / (t1 - t0);
    v0 + (v1 - v0) * s
}

/// A line `v(t) = v0 + slope * (t - t0)` restricted to one segment.
#[derive(Clone, Copy, Debug)]
struct Line {
    t0: f64,
    v0: f64,
    slope: f64,
}

impl Line {
    fn through(t0: f64, v0: f64, t1: f64, v1: f64) -> Line {
        let slope = if t1 > t0 { (v1 - v0) / (t1 - t0) } else { 0.0 };
        Line { t0, v0, slope }
    }

    fn constant(v: f64) -> Line {
        Line {
            t0: 0.0,
            v0: v,
            slope: 0.0,
        }
    }

    fn at(&self, t: f64) -> f64 {
        self.v0 + self.slope * (t - self.t0)
    }
}

/// Samples `h` (a min/max composition of `lines`) exactly on `[u, v]`:
/// `h` is linear between consecutive pairwise crossings.
fn sample_segment(u: f64, v: f64, lines: &[Line], h: impl Fn(f64) -> f64, out: &mut Vec<(f64, f64)>) {
    let mut ts = vec![u, v];
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let (a, b) = (lines[i], lines[j]);
            let ds = a.slope - b.slope;
            if ds == 0.0 {
                continue;
            }
            let d0 = a.at(u) - b.at(u);
            let t = u - d0 / ds;
            if t > u && t < v {
                ts.push(t);
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    for t in ts {
        push_point(out, t, h(t));
    }
}

fn push_point(out: &mut Vec<(f64, f64)>, t: f64, v: f64) {
    if let Some(&(tl, _)) = out.last() {
        if t <= tl {
            // Same instant reached from two segments; the value agrees up to rounding.
            return;
        }
    }
    out.push((t, v));
}

/// Range-maximum table over breakpoint values.
struct SparseMax {
    levels: Vec<Vec<f64>>,
}

impl SparseMax {
    fn new(v: &[f64]) -> SparseMax {
        let mut levels = vec![v.to_vec()];
        let mut w = 1;
        while 2 * w <= v.len() {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..=v.len() - 2 * w).map(|i| prev[i].max(prev[i + w])).collect();
            levels.push(next);
            w *= 2;
        }
        SparseMax { levels }
    }

    /// Max over indices `lo..=hi`; `-inf` when empty.
    fn query(&self, lo: usize, hi: usize) -> f64 {
        if lo > hi {
            return f64::NEG_INFINITY;
        }
        let len = hi - lo + 1;
        let k = usize::BITS as usize - 1 - len.leading_zeros() as usize;
        self.levels[k][lo].max(self.levels[k][hi + 1 - (1 << k)])
    }
}

impl Signal {
    /// Builds a signal from samples; equal consecutive times keep the later value.
    pub fn new(t: Vec<f64>, v: Vec<f64>) -> Signal {
        assert_eq!(t.len(), v.len());
        assert!(!t.is_empty(), "signal needs at least one sample");
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(t.len());
        for (t, v) in t.into_iter().zip(v) {
            match out.last_mut() {
                Some(last) if t <= last.0 => last.1 = v,
                _ => out.push((t, v)),
            }
        }
        Signal::from_points(out)
    }

    fn from_points(p: Vec<(f64, f64)>) -> Signal {
        let (t, v) = p.into_iter().unzip();
        Signal { t, v }
    }

    pub fn constant(t0: f64, t1: f64, c: f64) -> Signal {
        if t1 > t0 {
            Signal {
                t: vec![t0, t1],
                v: vec![c, c],
            }
        } else {
            Signal { t: vec![t0], v: vec![c] }
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    /// Value at `t`, clamped to the signal's span.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.t.partition_point(|&s| s <= t);
        if k == 0 {
            return self.v[0];
        }
        if k == self.t.len() {
            return self.v[k - 1];
        }
        lerp(self.t[k - 1], self.v[k - 1], self.t[k], self.v[k], t)
    }

    pub fn max_abs(&self) -> f64 {
        self.v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn neg(&self) -> Signal {
        Signal {
            t: self.t.clone(),
            v: self.v.iter().map(|x| -x).collect(),
        }
    }

    fn eps(&self) -> f64 {
        TIME_EPS * self.start().abs().max(self.end().abs()).max(1.0)
    }

    /// Pointwise min (or max) on the common span, with crossings inserted.
    pub fn combine(&self, other: &Signal, take_max: bool) -> Signal {
        let s = self.start().max(other.start());
        let e = self.end().min(other.end());
        let eps = self.eps().max(other.eps());
        let mut ts: Vec<f64> = self
            .t
            .iter()
            .chain(&other.t)
            .copied()
            .filter(|&t| t >= s && t <= e)
            .collect();
        ts.push(s);
        ts.push(e);
        ts.sort_by(f64::total_cmp);
        let ts = dedup_times(ts, eps);
        let pick = |a: f64, b: f64| if take_max { a.max(b) } else { a.min(b) };
        let mut out = Vec::with_capacity(ts.len() * 2);
        for w in 0..ts.len() {
            let t = ts[w];
            let (a, b) = (self.at(t), other.at(t));
            if w > 0 {
                let t0 = ts[w - 1];
                let (a0, b0) = (self.at(t0), other.at(t0));
                let (d0, d1) = (a0 - b0, a - b);
                if (d0 < 0.0 && d1 > 0.0) || (d0 > 0.0 && d1 < 0.0) {
                    let tc = t0 + (t - t0) * d0 / (d0 - d1);
                    if tc > t0 && tc < t {
                        let vc = lerp(t0, a0, t, a, tc);
                        push_point(&mut out, tc, vc);
                    }
                }
            }
            push_point(&mut out, t, pick(a, b));
        }
        Signal::from_points(out)
    }

    /// `g(t) = sup { f(s) : s in [t + a, t + b] }`, exact on the piecewise-linear
    /// signal. With `b = inf` the window runs to the end of the signal. Returns
    /// `None` when the window never fits inside the signal's span.
    pub fn window_max(&self, a: f64, b: f64) -> Option<Signal> {
        let (s, e) = (self.start(), self.end());
        let unbounded = b.is_infinite();
        let last = if unbounded { e - a } else { e - b };
        if last < s - self.eps() {
            return None;
        }
        let last = last.max(s);
        let eps = self.eps();
        let mut cand = vec![s, last];
        for &tau in &self.t {
            for shift in [a, b] {
                if shift.is_finite() {
                    let c = tau - shift;
                    if c > s && c < last {
                        cand.push(c);
                    }
                }
            }
        }
        cand.sort_by(f64::total_cmp);
        let cand = dedup_times(cand, eps);
        if cand.len() == 1 {
            let t = cand[0];
            let hi = if unbounded { e } else { t + b };
            return Some(Signal {
                t: vec![t],
                v: vec![self.sup_on(t + a, hi, eps)],
            });
        }
        let table = SparseMax::new(&self.v);
        let mut out = Vec::with_capacity(cand.len() * 2);
        for w in cand.windows(2) {
            let (u, v) = (w[0], w[1]);
            let l1 = Line::through(u, self.at(u + a), v, self.at(v + a));
            let l2 = if unbounded {
                Line::constant(self.v[self.v.len() - 1])
            } else {
                Line::through(u, self.at(u + b), v, self.at(v + b))
            };
            let lo_t = v + a - eps;
            let hi_t = if unbounded { e } else { u + b + eps };
            let lo = self.t.partition_point(|&x| x < lo_t);
            let hi = self.t.partition_point(|&x| x <= hi_t);
            let c = if hi == 0 { f64::NEG_INFINITY } else { table.query(lo, hi - 1) };
            let mut lines = vec![l1, l2];
            if c.is_finite() {
                lines.push(Line::constant(c));
            }
            sample_segment(u, v, &lines, |t| l1.at(t).max(l2.at(t)).max(c), &mut out);
        }
        Some(Signal::from_points(out))
    }

    pub fn window_min(&self, a: f64, b: f64) -> Option<Signal> {
        self.neg().window_max(a, b).map(|s| s.neg())
    }

    fn sup_on(&self, lo: f64, hi: f64, eps: f64) -> f64 {
        let mut m = self.at(lo).max(self.at(hi));
        for (&t, &v) in self.t.iter().zip(&self.v) {
            if t >= lo - eps && t <= hi + eps {
                m = m.max(v);
            }
        }
        m
    }

    /// Untimed until on the finite span:
    /// `g(t) = sup_{t' in [t, end]} min(psi(t'), inf_{[t, t']} phi)`.
    pub fn until(phi: &Signal, psi: &Signal) -> Signal {
        // Common breakpoints with phi/psi crossings, so both are linear per segment.
        let merged = phi.combine(psi, false);
        let ts = merged.t;
        let n = ts.len();
        let mut out = vec![(0.0, 0.0); 0];
        let mut r = phi.at(ts[n - 1]).min(psi.at(ts[n - 1]));
        let mut rev: Vec<Vec<(f64, f64)>> = Vec::with_capacity(n);
        for k in (0..n.saturating_sub(1)).rev() {
            let (u, v) = (ts[k], ts[k + 1]);
            let lp = Line::through(u, phi.at(u), v, phi.at(v));
            let ls = Line::through(u, psi.at(u), v, psi.at(v));
            let (pv, sv) = (lp.at(v), ls.at(v));
            let mut seg = Vec::new();
            if lp.slope >= 0.0 {
                let h = |t: f64| lp.at(t).min(ls.at(t).max(sv).max(r));
                let lines = [lp, ls, Line::constant(sv), Line::constant(r)];
                sample_segment(u, v, &lines, h, &mut seg);
            } else {
                let gv = pv.min(sv);
                let tail = pv.min(r);
                let h = |t: f64| lp.at(t).min(ls.at(t)).max(gv).max(tail);
                let lines = [lp, ls, Line::constant(gv), Line::constant(tail)];
                sample_segment(u, v, &lines, h, &mut seg);
            }
            r = seg[0].1;
            rev.push(seg);
        }
        for seg in rev.into_iter().rev() {
            for (t, v) in seg {
                push_point(&mut out, t, v);
            }
        }
        if out.is_empty() {
            out.push((ts[0], r));
        }
        Signal::from_points(out)
    }

    /// Restricts to `[start, end]` (assumed inside the current span).
    pub fn truncate(&self, end: f64) -> Signal {
        if end >= self.end() {
            return self.clone();
        }
        let mut out: Vec<(f64, f64)> = self
            .t
            .iter()
            .zip(&self.v)
            .take_while(|(t, _)| **t < end)
            .map(|(t, v)| (*t, *v))
            .collect();
        push_point(&mut out, end, self.at(end));
        Signal::from_points(out)
    }
}

fn dedup_times(ts: Vec<f64>, eps: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(ts.len());
    for t in ts {
        match out.last() {
            Some(&l) if t - l <= eps => {}
            _ => out.push(t),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(p: &[(f64, f64)]) -> Signal {
        Signal::new(p.iter().map(|x| x.0).collect(), p.iter().map(|x| x.1).collect())
    }

    #[test]
    fn min_inserts_crossing() {
        let a = sig(&[(0.0, 0.0), (2.0, 2.0)]);
        let b = sig(&[(0.0, 2.0), (2.0, 0.0)]);
        let m = a.combine(&b, false);
        assert_eq!(m.times(), &[0.0, 1.0, 2.0]);
        assert_eq!(m.values(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn window_max_on_a_peak() {
        let f = sig(&[(0.0, 0.0), (5.0, 5.0), (10.0, 0.0)]);
        let g = f.window_max(0.0, 2.0).unwrap();
        assert_eq!(g.end(), 8.0);
        assert!((g.at(0.0) - 2.0).abs() < 1e-12);
        assert!((g.at(4.0) - 5.0).abs() < 1e-12);
        assert!((g.at(7.0) - 3.0).abs() < 1e-12);
        let g = f.window_max(1.0, f64::INFINITY).unwrap();
        assert!((g.at(0.0) - 5.0).abs() < 1e-12);
        assert!((g.at(8.0) - 1.0).abs() < 1e-12);
        assert!(f.window_max(0.0, 11.0).is_none());
    }

    #[test]
    fn window_matches_brute_force() {
        let f = sig(&[(0.0, 1.0), (1.0, -2.0), (2.5, 3.0), (3.0, 0.5), (6.0, 4.0), (7.0, -1.0)]);
        for &(a, b) in &[(0.0, 1.0), (0.5, 2.0), (1.5, 1.5), (0.0, 6.5)] {
            let g = f.window_max(a, b).unwrap();
            let mut t = 0.0;
            while t <= 7.0 - b {
                let mut brute = f64::NEG_INFINITY;
                for k in 0..=20000 {
                    let s = t + a + (b - a) * k as f64 / 20000.0;
                    brute = brute.max(f.at(s));
                }
                assert!((g.at(t) - brute).abs() < 1e-3, "a={a} b={b} t={t}: {} vs {brute}", g.at(t));
                t += 0.05;
            }
        }
    }

    #[test]
    fn until_matches_brute_force() {
        let phi = sig(&[(0.0, 2.0), (2.0, -1.0), (4.0, 3.0), (6.0, 1.0)]);
        let psi = sig(&[(0.0, -1.0), (3.0, 2.0), (6.0, -2.0)]);
        let g = Signal::until(&phi, &psi);
        let n = 3000;
        for i in 0..=60 {
            let t = 6.0 * i as f64 / 60.0;
            let mut best = f64::NEG_INFINITY;
            let mut inf_phi = f64::INFINITY;
            for k in 0..=n {
                let s = t + (6.0 - t) * k as f64 / n as f64;
                inf_phi = inf_phi.min(phi.at(s));
                best = best.max(psi.at(s).min(inf_phi));
            }
            assert!((g.at(t) - best).abs() < 1e-2, "t={t}: {} vs {best}", g.at(t));
        }
    }
}
