//! Goodness of fit of the samplers against CDFs built independently in the
//! test (Simpson integration of the pdf, or the gamma CDF by series).

use gkde::densities::TestDensity;
use gkde::kernel::KernelPoint;
use gkde::rng::stream;

/// Kolmogorov–Smirnov statistic of `xs` against `cdf`.
fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

// 0.1% critical value
fn ks_crit(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

/// Lower regularized gamma by its power series; only used for moderate `z`.
fn gamma_cdf(a: f64, scale: f64, t: f64) -> f64 {
    let z = t / scale;
    if z <= 0.0 {
        return 0.0;
    }
    let mut term = 1.0 / a;
    let mut sum = term;
    for k in 1..10_000 {
        term *= z / (a + k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    let ln_gamma_a = ln_gamma(a);
    (a * z.ln() - z - ln_gamma_a).exp() * sum
}

// Lanczos, g = 7 — enough digits for a CDF oracle
fn ln_gamma(x: f64) -> f64 {
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
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Cumulative Simpson table of `pdf` on `[0, 1]`.
fn simpson_cdf(pdf: impl Fn(f64) -> f64, cells: usize) -> impl Fn(f64) -> f64 {
    let h = 1.0 / cells as f64;
    let mut table = vec![0.0];
    for i in 0..cells {
        let a = i as f64 * h;
        let s = h / 6.0 * (pdf(a) + 4.0 * pdf(a + h / 2.0) + pdf(a + h));
        table.push(table[i] + s);
    }
    let total = *table.last().unwrap();
    move |x: f64| {
        let x = x.clamp(0.0, 1.0);
        let i = ((x / h) as usize).min(cells - 1);
        // linear within a cell; cells are fine enough for a KS test
        let w = (x - i as f64 * h) / h;
        (table[i] + w * (table[i + 1] - table[i])) / total
    }
}

#[test]
fn kernel_sampler_is_gamma() {
    for (k, &(x, b)) in [(0.5, 0.1), (0.0, 0.05), (0.02, 0.01), (2.0, 0.3)].iter().enumerate() {
        let kp = KernelPoint::new(x, b).unwrap();
        let mut rng = stream(5, &[k as u64]);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| kp.sample(&mut rng)).collect();
        let d = ks(xs, |t| gamma_cdf(x / b + 1.0, b, t));
        assert!(d < ks_crit(n), "x={x} b={b}: D = {d}");
    }
}

#[test]
fn density_samplers_match_their_pdfs() {
    let cases = [
        TestDensity::mirrored_gamma(3.0, 0.2).unwrap(),
        TestDensity::mirrored_gamma(1.5, 2.0).unwrap(),
        TestDensity::molli_uniform(),
        TestDensity::molli_linear(2.0).unwrap(),
        TestDensity::raw_linear(2.0).unwrap(),
        TestDensity::bump(1.0, 0.002, 2.0).unwrap(),
    ];
    for (k, d) in cases.iter().enumerate() {
        let n = 20_000;
        let xs = d.sample(n, &mut stream(9, &[k as u64])).unwrap();
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
        let cdf = simpson_cdf(|x| d.pdf(x), 40_000);
        let stat = ks(xs, cdf);
        assert!(stat < ks_crit(n), "{:?}: D = {stat}", d.kind());
    }
}

#[test]
fn mirrored_gamma_cdf_closed_form() {
    // 1 - X ~ Gamma(alpha, theta) truncated to [0, 1]
    let (alpha, theta) = (3.0, 0.2);
    let d = TestDensity::mirrored_gamma(alpha, theta).unwrap();
    let n = 20_000;
    let xs = d.sample(n, &mut stream(21, &[])).unwrap();
    let mass = gamma_cdf(alpha, theta, 1.0);
    let stat = ks(xs, |x| 1.0 - gamma_cdf(alpha, theta, 1.0 - x) / mass);
    assert!(stat < ks_crit(n), "D = {stat}");
}
