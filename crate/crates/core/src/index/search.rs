//! One-dimensional extremum search over a logarithmic bracket.
//!
//! The objective is scanned on `brackets + 1` log-spaced points, then the best
//! bracket pair is refined by golden-section search in `log10` coordinates.

/// Default search range `log10 t in [-12, 12]`.
pub const LOG10_LO: f64 = -12.0;
pub const LOG10_HI: f64 = 12.0;
pub const BRACKETS: usize = 200;

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const LOG_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy)]
pub struct Extremum {
    pub argument: f64,
    pub value: f64,
    /// The scan put the extremum on the first (lower) or last (upper) grid
    /// point, so the true optimum may lie outside the searched interval.
    pub at_lower: bool,
    pub at_upper: bool,
}

impl Extremum {
    pub fn at_boundary(&self) -> bool {
        self.at_lower || self.at_upper
    }
}

/// Searches `f` on `[lo, hi]` (both positive) with the default bracket count.
pub fn log_search(f: impl Fn(f64) -> f64, lo: f64, hi: f64, goal: Goal) -> Extremum {
    log_search_with(f, lo, hi, BRACKETS, goal)
}

pub fn log_search_with(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    brackets: usize,
    goal: Goal,
) -> Extremum {
    debug_assert!(lo > 0.0 && hi > lo && brackets >= 2);
    // fold minimization into maximization; NaN never wins
    let score = |u: f64| {
        let v = f(10f64.powf(u));
        let s = match goal {
            Goal::Maximize => v,
            Goal::Minimize => -v,
        };
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    };
    let (a, b) = (lo.log10(), hi.log10());
    let step = (b - a) / brackets as f64;
    let grid = |i: usize| if i == brackets { b } else { a + step * i as f64 };

    let mut best_i = 0;
    let mut best_s = f64::NEG_INFINITY;
    for i in 0..=brackets {
        let s = score(grid(i));
        if s > best_s {
            best_s = s;
            best_i = i;
        }
    }
    let (at_lower, at_upper) = (best_i == 0, best_i == brackets);

    let mut best_u = grid(best_i);
    let (mut l, mut r) = (grid(best_i.saturating_sub(1)), grid((best_i + 1).min(brackets)));
    let mut x1 = r - INV_PHI * (r - l);
    let mut x2 = l + INV_PHI * (r - l);
    let (mut s1, mut s2) = (score(x1), score(x2));
    while r - l > LOG_TOL {
        if s1 >= s2 {
            r = x2;
            x2 = x1;
            s2 = s1;
            x1 = r - INV_PHI * (r - l);
            s1 = score(x1);
        } else {
            l = x1;
            x1 = x2;
            s1 = s2;
            x2 = l + INV_PHI * (r - l);
            s2 = score(x2);
        }
    }
    for (u, s) in [(x1, s1), (x2, s2)] {
        if s > best_s {
            best_s = s;
            best_u = u;
        }
    }
    let value = match goal {
        Goal::Maximize => best_s,
        Goal::Minimize => -best_s,
    };
    Extremum { argument: 10f64.powf(best_u), value, at_lower, at_upper }
}

/// `count` log-spaced points covering `[lo, hi]` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 1);
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == count - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}
