//! Quadrature rules shared by the functionals and the homogeneous fields.

use std::f64::consts::{FRAC_PI_2, PI};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrates `f` over `[lo, hi]`.
    pub fn integrate(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `∫_lo^hi y^p dy` for `0 <= lo <= hi` and `p > -1`.
pub fn power_integral(p: f64, lo: f64, hi: f64) -> f64 {
    (hi.powf(p + 1.0) - lo.powf(p + 1.0)) / (p + 1.0)
}

/// `∫_lo^hi sin(θ)^p dθ` for `[lo, hi] ⊂ [0, π]` and `p > -1`.
pub fn sin_power_integral(p: f64, lo: f64, hi: f64) -> f64 {
    sin_power_weighted(p, lo, hi, &|_| 1.0)
}

/// `∫_lo^hi sin(θ)^p g(θ) dθ` for smooth `g`.
///
/// The endpoint singularities are removed by the substitution `v = θ^(1+p)`
/// near each endpoint, so panels touching `0` or `π` are integrated to near
/// machine precision.
pub fn sin_power_weighted(p: f64, lo: f64, hi: f64, g: &dyn Fn(f64) -> f64) -> f64 {
    debug_assert!(lo <= hi);
    let mut total = 0.0;
    if lo < FRAC_PI_2 {
        total += sin_power_from_zero(p, lo, hi.min(FRAC_PI_2), g);
    }
    if hi > FRAC_PI_2 {
        // sin(θ) = sin(π - θ) maps the right half onto the left one.
        let a = PI - hi;
        let b = PI - lo.max(FRAC_PI_2);
        total += sin_power_from_zero(p, a.max(0.0), b, &|t| g(PI - t));
    }
    total
}

fn sin_power_from_zero(p: f64, lo: f64, hi: f64, w: &dyn Fn(f64) -> f64) -> f64 {
    thread_local! {
        static GL: GaussLegendre = GaussLegendre::new(16);
    }
    // Beyond this point sin^p is smooth enough for plain composite panels.
    const SPLIT: f64 = 0.25;
    if hi <= lo {
        return 0.0;
    }
    if lo >= SPLIT {
        return GL.with(|gl| {
            let panels = 4;
            let h = (hi - lo) / panels as f64;
            (0..panels)
                .map(|k| {
                    let a = lo + k as f64 * h;
                    gl.integrate(a, a + h, |t| t.sin().powf(p) * w(t))
                })
                .sum()
        });
    }
    if hi > SPLIT {
        return sin_power_from_zero(p, lo, SPLIT, w) + sin_power_from_zero(p, SPLIT, hi, w);
    }
    let e = 1.0 + p;
    let vlo = lo.powf(e);
    let vhi = hi.powf(e);
    // After the substitution the integrand behaves like 1 + c v^(2/e), which
    // is not smooth at v = 0 when p > 0; geometric panels keep GL accurate.
    let g = |v: f64| {
        let t = v.powf(1.0 / e);
        if t == 0.0 {
            w(0.0)
        } else {
            (t.sin() / t).powf(p) * w(t)
        }
    };
    GL.with(|gl| {
        let mut total = 0.0;
        let mut b = vhi;
        loop {
            let a = if vlo * 4.0 >= b { vlo } else { 0.25 * b };
            total += gl.integrate(a, b, g);
            if a == vlo || b < vhi * 1e-40 {
                break;
            }
            b = a;
        }
        total
    }) / e
}

const ENDPOINT_LEVELS: usize = 12;

/// Composite product rule on the half circle `θ ∈ [0, π]`.
///
/// Samples sit at Gauss points of each panel, so the singular endpoints are
/// never evaluated. The plain weights are Gauss-Legendre and sum to `π`; the
/// weighted ones integrate `sin^{±a} θ` times the quadratic interpolant of
/// the samples exactly (linear on the two panels touching the endpoints).
#[derive(Debug, Clone)]
pub struct HalfCircleRule {
    pub a: f64,
    pub theta: Vec<f64>,
    pub plain: Vec<f64>,
    pub weighted: Vec<f64>,
    pub inverse_weighted: Vec<f64>,
}

impl HalfCircleRule {
    pub fn new(a: f64, panels: usize) -> Self {
        assert!(panels >= 1);
        let h = PI / panels as f64;
        // Uniform panels, with the two end panels split geometrically so the
        // weight singularity does not limit the order.
        let mut edges = vec![0.0];
        edges.extend((0..ENDPOINT_LEVELS).rev().map(|k| h * 0.5f64.powi(k as i32 + 1)));
        edges.extend((1..panels).map(|j| j as f64 * h));
        let tail: Vec<f64> = edges[1..=ENDPOINT_LEVELS].iter().rev().map(|e| PI - e).collect();
        edges.extend(tail);
        edges.push(PI);

        let n = 3 * (edges.len() - 1);
        let mut rule = HalfCircleRule {
            a,
            theta: Vec::with_capacity(n),
            plain: Vec::with_capacity(n),
            weighted: Vec::with_capacity(n),
            inverse_weighted: Vec::with_capacity(n),
        };
        let last = edges.len() - 2;
        for (j, w) in edges.windows(2).enumerate() {
            let (lo, hi) = (w[0], w[1]);
            let m = 0.5 * (lo + hi);
            let hw = 0.5 * (hi - lo);
            // Moments of the weight against t = (θ - m) / hw.
            let moments = |p: f64| {
                [
                    sin_power_integral(p, lo, hi),
                    sin_power_weighted(p, lo, hi, &|th| (th - m) / hw),
                    sin_power_weighted(p, lo, hi, &|th| ((th - m) / hw).powi(2)),
                ]
            };
            if j == 0 || j == last {
                // Two Gauss points: weights stay positive however strong the singularity.
                let c = 1.0 / 3f64.sqrt();
                rule.theta.extend([m - c * hw, m + c * hw]);
                rule.plain.extend([hw, hw]);
                for (p, out) in [(a, &mut rule.weighted), (-a, &mut rule.inverse_weighted)] {
                    let [m0, m1, _] = moments(p);
                    out.extend([0.5 * (m0 - m1 / c), 0.5 * (m0 + m1 / c)]);
                }
            } else {
                let c = 0.6f64.sqrt();
                rule.theta.extend([m - c * hw, m, m + c * hw]);
                rule.plain.extend([hw * 5.0 / 9.0, hw * 8.0 / 9.0, hw * 5.0 / 9.0]);
                for (p, out) in [(a, &mut rule.weighted), (-a, &mut rule.inverse_weighted)] {
                    let [m0, m1, m2] = moments(p);
                    let c2 = c * c;
                    out.extend([(m2 - c * m1) / (2.0 * c2), m0 - m2 / c2, (m2 + c * m1) / (2.0 * c2)]);
                }
            }
        }
        rule
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// `∫_0^π sin^p θ dθ = √π Γ((p+1)/2) / Γ(p/2 + 1)`, via the Lanczos gamma.
pub fn sin_power_total(p: f64) -> f64 {
    PI.sqrt() * gamma((p + 1.0) / 2.0) / gamma(p / 2.0 + 1.0)
}

/// Lanczos approximation (g = 7, n = 9), accurate to ~1e-15 for positive arguments.
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = C[0];
        for (i, &c) in C.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + G + 0.5;
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let gl = GaussLegendre::new(8);
        assert!((gl.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let v = gl.integrate(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
    }

    #[test]
    fn gamma_known_values() {
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(5.0) - 24.0).abs() < 1e-12);
        assert!((gamma(0.75) - 1.225_416_702_465_178).abs() < 1e-13);
    }

    #[test]
    fn sin_power_closed_form() {
        // sqrt(pi) Γ(3/4) / Γ(5/4) for the exponent 1/2.
        assert!((sin_power_total(0.5) - 2.396_280_469_471_184).abs() < 1e-12);
        for &a in &[-0.5, 0.0, 0.5, 0.9, -0.9] {
            let direct = sin_power_integral(a, 0.0, PI);
            assert!(
                (direct - sin_power_total(a)).abs() < 1e-12,
                "a = {a}: {direct} vs {}",
                sin_power_total(a)
            );
        }
    }

    #[test]
    fn half_circle_rule_weights() {
        for &a in &[-0.5, 0.5] {
            let rule = HalfCircleRule::new(a, 64);
            assert!((rule.plain.iter().sum::<f64>() - PI).abs() < 1e-13);
            assert!(rule.weighted.iter().chain(&rule.inverse_weighted).all(|w| *w > 0.0));
            assert!((rule.weighted.iter().sum::<f64>() - sin_power_total(a)).abs() < 1e-12);
            assert!((rule.inverse_weighted.iter().sum::<f64>() - sin_power_total(-a)).abs() < 1e-12);
        }
    }

    #[test]
    fn product_rule_is_high_order() {
        // ∫ sin^a cos² = ∫ sin^a / (a + 2), since ∫ sin^(a+2) = (a+1)/(a+2) ∫ sin^a.
        for &a in &[-0.5, 0.5] {
            let exact = sin_power_total(a) / (a + 2.0);
            let err = |n: usize| {
                let rule = HalfCircleRule::new(a, n);
                let v: f64 = rule
                    .theta
                    .iter()
                    .zip(&rule.weighted)
                    .map(|(t, w)| w * t.cos().powi(2))
                    .sum();
                (v - exact).abs()
            };
            assert!(err(64) < 1e-9, "a = {a}: {}", err(64));
            assert!(err(256) < 1e-12, "a = {a}: {}", err(256));
        }
    }

    #[test]
    fn plain_sampling_converges_slowly_near_singular_weight() {
        // Evaluating sin^a at the samples with plain weights loses accuracy for a < 0;
        // the product weights above do not.
        let a = -0.5;
        let exact = sin_power_total(a);
        let rule = HalfCircleRule::new(a, 256);
        let naive: f64 = rule
            .theta
            .iter()
            .zip(&rule.plain)
            .map(|(t, w)| w * t.sin().powf(a))
            .sum();
        assert!((naive - exact).abs() > 1e-3);
    }
}
