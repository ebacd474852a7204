//! Discrete fundamental solutions of `∂ₜw = c·Δʰw` on the lattice.
//!
//! In one dimension the solution from `w(0) = δ/h` is
//!
//! ```text
//! w_j(t) = (1/h) Σ_{k ≥ max(0, j)} z^{k−j}/(k−j)! · z^k/k! · e^{−2z},   z = c·t/h²
//! ```
//!
//! which for `c = 1` equals `e^{−2z} I_j(2z)/h`. The d-dimensional kernel is
//! the tensor product of 1-D factors.
//!
//! Each factor `zᵐe^{−z}/m!` is a Poisson weight and is evaluated in log
//! space with Loader's saddle-point split, so `t/h²` up to `10⁶` neither
//! overflows nor loses digits to `lnΓ`. For complex `c` the sum cancels
//! catastrophically once `e^{2(|z| − Re z)}` is large. There the series is
//! evaluated at `t/2ⁿ` and the kernel is doubled `n` times through the
//! semigroup property `w(2s) = w(s) ∗ w(s)`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{invalid, LatticeError, Result};
use crate::grid::{laplacian, Boundary, ComplexField, Field, GridSpec, LatticeValue, ScalarField};

/// Largest admissible truncation radius.
pub const J_MAX: usize = 1_000_000;
/// Series evaluation is used while `e^{2(|z| − Re z)}` stays below this.
const MAX_CANCELLATION: f64 = 1e4;
/// Offsets whose magnitude falls below this fraction of the peak are dropped.
const TRIM: f64 = 1e-20;

/// `lnΓ(n+1) − (n+½)ln n + n − ½ln 2π` for `n = 0..=15`; entry 0 is unused.
const STIRLERR: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_26,
    0.041_340_695_955_409_29,
    0.027_677_925_684_998_34,
    0.020_790_672_103_765_09,
    0.016_644_691_189_821_19,
    0.013_876_128_823_070_75,
    0.011_896_709_945_891_77,
    0.010_411_265_261_972_1,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_871,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_53,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

fn stirlerr(n: usize) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15 {
        return STIRLERR[n];
    }
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/np) + np − x`, accurate when `x ≈ np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `ln(xᵐe^{−x}/m!)` for `x > 0`.
pub fn ln_poisson(m: usize, x: f64) -> f64 {
    if m == 0 {
        return -x;
    }
    let mf = m as f64;
    -stirlerr(m) - bd0(mf, x) - 0.5 * (2.0 * PI * mf).ln()
}

/// One-dimensional kernel table over offsets `−J..=J`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel1D {
    h: f64,
    t: f64,
    coeff: Complex64,
    radius: usize,
    values: Vec<Complex64>,
}

impl Kernel1D {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn coeff(&self) -> Complex64 {
        self.coeff
    }

    /// Truncation radius `J`.
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Values for offsets `−J..=J`.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, j: isize) -> Complex64 {
        let idx = j + self.radius as isize;
        if idx < 0 || idx as usize >= self.values.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[idx as usize]
        }
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// `Σ_j h·w_j`.
    pub fn mass(&self) -> Complex64 {
        let re: Vec<f64> = self.values.iter().map(|v| v.re).collect();
        let im: Vec<f64> = self.values.iter().map(|v| v.im).collect();
        Complex64::new(crate::grid::pairwise_sum(&re), crate::grid::pairwise_sum(&im)) * self.h
    }

    /// `(h Σ_j |w_j|ᵖ)^{1/p}`; max for `p = ∞`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_1d(&self.values, self.h, p)
    }

    /// `D₊w_j = (w_{j+1} − w_j)/h` over offsets `−J−1..=J`, stored with the
    /// same centering convention (radius `J + 1`).
    pub fn forward_difference(&self) -> Kernel1D {
        self.difference(true)
    }

    pub fn backward_difference(&self) -> Kernel1D {
        self.difference(false)
    }

    fn difference(&self, forward: bool) -> Kernel1D {
        let r = self.radius as isize + 1;
        let inv_h = 1.0 / self.h;
        let values = (-r..=r)
            .map(|j| {
                if forward {
                    (self.value(j + 1) - self.value(j)) * inv_h
                } else {
                    (self.value(j) - self.value(j - 1)) * inv_h
                }
            })
            .collect();
        Kernel1D {
            radius: r as usize,
            values,
            ..*self
        }
    }

    /// `(a ∗ b)_j = h Σ_l a_l b_{j−l}`.
    fn convolve(&self, other: &Kernel1D) -> Kernel1D {
        let (ra, rb) = (self.radius, other.radius);
        let r = ra + rb;
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * r + 1];
        for (i, a) in self.values.iter().enumerate() {
            if *a == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (k, b) in other.values.iter().enumerate() {
                out[i + k] += a * b;
            }
        }
        for v in &mut out {
            *v *= self.h;
        }
        let mut kernel = Kernel1D {
            h: self.h,
            t: self.t + other.t,
            coeff: self.coeff,
            radius: r,
            values: out,
        };
        kernel.trim();
        kernel
    }

    fn trim(&mut self) {
        let peak = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let keep = self
            .values
            .iter()
            .position(|v| v.norm() > TRIM * peak)
            .unwrap_or(self.radius);
        let cut = keep.min(self.radius);
        if cut > 0 {
            let n = self.values.len();
            self.values = self.values[cut..n - cut].to_vec();
            self.radius -= cut;
        }
    }
}

fn lp_1d(values: &[Complex64], h: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    let terms: Vec<f64> = values.iter().map(|v| v.norm().powf(p)).collect();
    (h * crate::grid::pairwise_sum(&terms)).powf(1.0 / p)
}

fn check_kernel_args(t: f64, h: f64, coeff: Complex64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(invalid("h", format!("must be positive, got {h}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("must be ≥ 0, got {t}")));
    }
    if !(coeff.is_finite() && coeff.re >= 0.0 && coeff.norm() > 0.0) {
        return Err(invalid("coeff", format!("need Re ≥ 0 and coeff ≠ 0, got {coeff}")));
    }
    Ok(())
}

/// Kernel table at time `t` for `∂ₜw = coeff·Δʰw` in one dimension.
pub fn kernel_1d(t: f64, h: f64, coeff: Complex64) -> Result<Kernel1D> {
    check_kernel_args(t, h, coeff)?;
    if t == 0.0 {
        return Ok(Kernel1D {
            h,
            t,
            coeff,
            radius: 0,
            values: vec![Complex64::new(1.0 / h, 0.0)],
        });
    }
    let x = t / (h * h);
    let excess = 2.0 * (coeff.norm() - coeff.re);
    let mut doublings = 0u32;
    while excess * x / 2f64.powi(doublings as i32) > MAX_CANCELLATION.ln() {
        doublings += 1;
    }
    let base_t = t / 2f64.powi(doublings as i32);
    let mut kernel = series_kernel(base_t, h, coeff)?;
    for _ in 0..doublings {
        kernel = kernel.convolve(&kernel);
        if kernel.radius > J_MAX {
            return Err(LatticeError::KernelTruncation { limit: J_MAX });
        }
    }
    kernel.t = t;
    Ok(kernel)
}

/// Direct evaluation of the defining series.
fn series_kernel(t: f64, h: f64, coeff: Complex64) -> Result<Kernel1D> {
    let z = coeff * (t / (h * h));
    let r = z.norm();
    let theta = z.arg();
    let spread = 12.0 * r.sqrt();
    let lo = (r - spread - 10.0).floor().max(0.0) as usize;
    let hi = (r + spread + 40.0).ceil() as usize;
    let radius = hi - lo;
    if radius > J_MAX {
        return Err(LatticeError::KernelTruncation { limit: J_MAX });
    }
    let shift = r - z.re;
    // weights c_m = zᵐe^{−z}/m! for m in lo..=hi
    let weights: Vec<Complex64> = (lo..=hi)
        .map(|m| {
            let ln_mag = ln_poisson(m, r) + shift;
            let phase = m as f64 * theta - z.im;
            Complex64::from_polar(ln_mag.exp(), phase)
        })
        .collect();
    let inv_h = 1.0 / h;
    let mut half = Vec::with_capacity(radius + 1);
    for j in 0..=radius {
        let mut re = Vec::with_capacity(weights.len() - j);
        let mut im = Vec::with_capacity(weights.len() - j);
        for m in 0..weights.len() - j {
            let p = weights[m] * weights[m + j];
            re.push(p.re);
            im.push(p.im);
        }
        half.push(
            Complex64::new(crate::grid::pairwise_sum(&re), crate::grid::pairwise_sum(&im)) * inv_h,
        );
    }
    let mut values: Vec<Complex64> = half.iter().rev().copied().collect();
    values.extend_from_slice(&half[1..]);
    let mut kernel = Kernel1D {
        h,
        t,
        coeff,
        radius,
        values,
    };
    kernel.trim();
    Ok(kernel)
}

/// Tensor-product kernel in `d ∈ {1, 2}` dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelD {
    factors: Vec<Kernel1D>,
}

impl KernelD {
    pub fn new(t: f64, h: f64, coeff: Complex64, d: usize) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(LatticeError::Unsupported(format!("kernel dimension {d}")));
        }
        let k = kernel_1d(t, h, coeff)?;
        Ok(Self { factors: vec![k; d] })
    }

    pub fn heat(t: f64, h: f64) -> Result<Self> {
        Self::new(t, h, Complex64::new(1.0, 0.0), 2)
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Kernel1D] {
        &self.factors
    }

    pub fn h(&self) -> f64 {
        self.factors[0].h
    }

    pub fn t(&self) -> f64 {
        self.factors[0].t
    }

    pub fn mass(&self) -> Complex64 {
        self.factors.iter().map(|f| f.mass()).product()
    }

    /// `‖K(t)‖_{Lᵖ_h}` in `d` dimensions.
    pub fn lp_norm(&self, p: f64) -> f64 {
        self.factors.iter().map(|f| f.lp_norm(p)).product()
    }

    /// `Σ_{|α|=1} ‖D^α K(t)‖_{Lᵖ_h}`: forward and backward differences along
    /// every axis.
    pub fn gradient_lp_norm(&self, p: f64) -> f64 {
        let base: Vec<f64> = self.factors.iter().map(|f| f.lp_norm(p)).collect();
        let mut total = 0.0;
        for (i, f) in self.factors.iter().enumerate() {
            let others: f64 = base.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, v)| v).product();
            total += f.forward_difference().lp_norm(p) * others;
            total += f.backward_difference().lp_norm(p) * others;
        }
        total
    }
}

/// Separable convolution `h Σ_l w_{j−l} f_l` along one axis.
fn convolve_axis(
    values: &[Complex64],
    spec: &GridSpec,
    far: Complex64,
    kernel: &Kernel1D,
    along_x: bool,
) -> Vec<Complex64> {
    let (n, lines) = if along_x { (spec.nx(), spec.ny()) } else { (spec.ny(), spec.nx()) };
    let idx = |line: usize, i: usize| if along_x { spec.index(i, line) } else { spec.index(line, i) };
    let r = kernel.radius as isize;
    let periodic = spec.boundary() == Boundary::Periodic;
    let h = kernel.h;
    let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
    for line in 0..lines {
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for o in -r..=r {
                let w = kernel.values[(o + r) as usize];
                let src = i as isize - o;
                let v = if src >= 0 && (src as usize) < n {
                    values[idx(line, src as usize)]
                } else if periodic {
                    values[idx(line, src.rem_euclid(n as isize) as usize)]
                } else {
                    far
                };
                acc += w * v;
            }
            out[idx(line, i)] = acc * h;
        }
    }
    out
}

/// `Φʰ(t)f`, the lattice convolution of `f` with a 2-D kernel.
pub fn apply_kernel(kernel: &KernelD, f: &ComplexField) -> Result<ComplexField> {
    let spec = *f.spec();
    if kernel.dim() != 2 {
        return Err(LatticeError::Unsupported("fields are two-dimensional".into()));
    }
    if (kernel.h() - spec.h()).abs() > 1e-15 * spec.h() {
        return Err(LatticeError::IncompatibleGrids(format!(
            "kernel h = {} but field h = {}",
            kernel.h(),
            spec.h()
        )));
    }
    let far = f.far_value();
    let pass1 = convolve_axis(f.values(), &spec, far, &kernel.factors[0], true);
    let far1 = far * kernel.factors[0].mass();
    let pass2 = convolve_axis(&pass1, &spec, far1, &kernel.factors[1], false);
    let out = Field::new(spec, pass2)?;
    Ok(out.with_far_value(far * kernel.mass()))
}

/// Real-valued convenience for real kernels (the heat kernel).
pub fn apply_kernel_real(kernel: &KernelD, f: &ScalarField) -> Result<ScalarField> {
    if !kernel.factors.iter().all(|k| k.is_real()) {
        return Err(LatticeError::Unsupported("complex kernel applied to a real field".into()));
    }
    let out = apply_kernel(kernel, &to_complex(f))?;
    Ok(out.map(|v| v.re))
}

pub fn to_complex(f: &ScalarField) -> ComplexField {
    f.map(|v| Complex64::new(v, 0.0))
}

/// `Φ(t)f + Σ_k Δs·Φ(t − s_k)F_k` with `s_k = (k + ½)Δs` and `Δs = t/m` for
/// `m` forcing samples.
pub fn duhamel_solve(
    f: &ComplexField,
    forcing: &[ComplexField],
    coeff: Complex64,
    t: f64,
) -> Result<ComplexField> {
    let spec = *f.spec();
    let mut out = apply_kernel(&KernelD::new(t, spec.h(), coeff, 2)?, f)?;
    if forcing.is_empty() {
        return Ok(out);
    }
    let ds = t / forcing.len() as f64;
    for (k, g) in forcing.iter().enumerate() {
        spec.ensure_same(g.spec()).map_err(|_| {
            LatticeError::IncompatibleGrids(format!("forcing sample {k} is on a different grid"))
        })?;
        let s = (k as f64 + 0.5) * ds;
        let term = apply_kernel(&KernelD::new(t - s, spec.h(), coeff, 2)?, g)?;
        out = out.axpy(ds, &term)?;
    }
    Ok(out)
}

/// Geometric time samples `t_min·(t_max/t_min)^{k/(n−1)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeRange {
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
}

impl TimeRange {
    /// `[10h², 10⁴h²]` with 11 samples.
    pub fn standard(h: f64) -> Self {
        Self {
            t_min: 10.0 * h * h,
            t_max: 1e4 * h * h,
            samples: 11,
        }
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        if self.samples < 10 {
            return Err(LatticeError::InsufficientSampling(format!(
                "{} time samples, need at least 10",
                self.samples
            )));
        }
        if !(self.t_min > 0.0 && self.t_max > self.t_min && self.t_max.is_finite()) {
            return Err(invalid(
                "time_range",
                format!("need 0 < t_min < t_max, got [{}, {}]", self.t_min, self.t_max),
            ));
        }
        let ratio = self.t_max / self.t_min;
        let n = self.samples - 1;
        Ok((0..=n).map(|k| self.t_min * ratio.powf(k as f64 / n as f64)).collect())
    }
}

/// Log-log decay fit of a kernel norm.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub coeff: Complex64,
    pub d: usize,
    pub p: f64,
    pub q: f64,
    /// Exponent `r` with `1 + 1/p = 1/r + 1/q`.
    pub r: f64,
    pub order: usize,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub target: f64,
}

impl EstimateReport {
    pub const TOLERANCE: f64 = 0.05;

    pub fn deviation(&self) -> f64 {
        (self.slope - self.target).abs()
    }

    pub fn passes(&self) -> bool {
        self.deviation() <= Self::TOLERANCE
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{{\"coeff_re\": {}, \"coeff_im\": {}, \"d\": {}, \"p\": {}, \"q\": {}, \"order\": {}, \"slope\": {}, \"intercept\": {}, \"target\": {}, \"pass\": {}}}",
            self.coeff.re,
            self.coeff.im,
            self.d,
            fmt_exponent(self.p),
            fmt_exponent(self.q),
            self.order,
            self.slope,
            self.intercept,
            self.target,
            self.passes()
        )
    }

    /// Rows `t,norm` followed by a `# {…}` summary line.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,norm")?;
        for (t, n) in self.times.iter().zip(&self.norms) {
            writeln!(w, "{t},{n}")?;
        }
        writeln!(w, "# {}", self.summary_line())?;
        Ok(())
    }
}

fn fmt_exponent(p: f64) -> String {
    if p.is_infinite() {
        "\"inf\"".into()
    } else {
        p.to_string()
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Measures `‖D^{order}K(t)‖_{Lʳ_h}` over geometric times and fits the decay
/// exponent, to be compared with `−(d/2)(1/q − 1/p) − order/2`.
pub fn verify_lplq(
    coeff: Complex64,
    h: f64,
    p: f64,
    q: f64,
    order: usize,
    d: usize,
    range: TimeRange,
) -> Result<EstimateReport> {
    if coeff.re <= 0.0 {
        return Err(invalid("coeff", format!("estimates need damping Re(coeff) > 0, got {coeff}")));
    }
    if !(q >= 1.0 && p >= q) {
        return Err(invalid("p, q", format!("need 1 ≤ q ≤ p ≤ ∞, got p = {p}, q = {q}")));
    }
    if order > 1 {
        return Err(LatticeError::Unsupported(format!("derivative order {order}")));
    }
    let inv_r = 1.0 + 1.0 / p - 1.0 / q;
    let r = 1.0 / inv_r;
    let times = range.times()?;
    let mut norms = Vec::with_capacity(times.len());
    for &t in &times {
        let k = KernelD::new(t, h, coeff, d)?;
        norms.push(if order == 0 { k.lp_norm(r) } else { k.gradient_lp_norm(r) });
    }
    let lx: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
    let (slope, intercept) = fit_line(&lx, &ly);
    let target = -(d as f64 / 2.0) * (1.0 / q - 1.0 / p) - order as f64 / 2.0;
    Ok(EstimateReport {
        coeff,
        d,
        p,
        q,
        r,
        order,
        times,
        norms,
        slope,
        intercept,
        target,
    })
}

/// `max_j |(w(t+dt) − w(t))/dt − c·Δʰw(t + dt/2)|` for a 1-D kernel.
pub fn evolution_residual(t: f64, dt: f64, h: f64, coeff: Complex64) -> Result<f64> {
    let a = kernel_1d(t, h, coeff)?;
    let b = kernel_1d(t + dt, h, coeff)?;
    let m = kernel_1d(t + 0.5 * dt, h, coeff)?;
    let r = a.radius.max(b.radius).max(m.radius) as isize + 1;
    let inv_h2 = 1.0 / (h * h);
    let mut worst = 0.0_f64;
    for j in -r..=r {
        let lap = (m.value(j + 1) + m.value(j - 1) - m.value(j) * 2.0) * inv_h2;
        let res = (b.value(j) - a.value(j)) / dt - coeff * lap;
        worst = worst.max(res.norm());
    }
    Ok(worst)
}

/// `e^{−2x}I₀(2x)`, the value `h·K_0` of the 1-D heat kernel at `x = t/h²`,
/// from the power series of `I₀`.
pub fn scaled_bessel_i0(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= x * x / (k * k);
        sum += term;
        if term < 1e-18 * sum && k > x {
            break;
        }
        k += 1.0;
    }
    (-2.0 * x).exp() * sum
}

/// `steps` explicit Euler steps of `∂ₜw = c·Δʰw` up to time `t`.
pub fn euler_oracle(f: &ComplexField, coeff: Complex64, t: f64, steps: usize) -> Result<ComplexField> {
    if steps == 0 {
        return Err(invalid("steps", "must be ≥ 1"));
    }
    let dt = t / steps as f64;
    let mut w = f.clone();
    for _ in 0..steps {
        let lap = laplacian(&w).map(|v| v * coeff);
        w = w.axpy(dt, &lap)?;
    }
    Ok(w)
}

pub fn real_part(f: &ComplexField) -> ScalarField {
    f.map(|v| v.re)
}
