//! Pricing kernels on a spot grid with an optional slope coordinate.
//!
//! Payoffs are coordinate vectors: values at the grid nodes, then (when
//! enabled) the coefficient `lim f(S)/S`. The slope coordinate stands in for
//! the part of the payoff living at `S = ∞`. Generators discretize
//! `H = -r + r S ∂_S + ½ σ² S² ∂²_S`; steps are θ-schemes
//! `(I - θΔt H) f_t = (I + (1-θ)Δt H) f_{t+Δt}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::payoff_space::{Coefficient, GrowthDirection, Payoff};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("grid needs at least 3 finite, non-negative, strictly increasing nodes")]
    BadGrid,
    #[error("volatility must be finite and non-negative")]
    BadVolatility,
    #[error("negative off-diagonal {value:.3e} in row {row} (S={spot}); reduce the spacing or allow upwinding")]
    NegativeOffDiagonal { row: usize, spot: f64, value: f64 },
    #[error("singular linear system at pivot {0}")]
    Singular(usize),
    #[error("payoff has a {0} component, which this state space cannot represent")]
    UnsupportedDirection(GrowthDirection),
    #[error("payoff is not finite at grid node S={0}")]
    NonFinitePayoff(f64),
    #[error("time labels do not chain: {0} then {1}")]
    TimeLabelMismatch(f64, f64),
    #[error("dimension mismatch: {0} vs {1}")]
    ShapeMismatch(usize, usize),
    #[error("f* coordinate {0} is not positive")]
    NonPositiveFstar(usize),
    #[error("time step must be positive and θ in [0, 1]")]
    BadStep,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, KernelError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(KernelError::ShapeMismatch(bad.len(), c));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows, "matrix product shape");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `I + s·self`.
    fn shifted_identity(&self, s: T) -> Matrix<T> {
        let mut m = self.clone();
        for v in m.data.iter_mut() {
            *v *= s;
        }
        for i in 0..m.rows {
            m[(i, i)] += T::one();
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Matrix<T>) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting.
struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    fn factor(mut a: Matrix<T>) -> Result<Self, KernelError> {
        let n = a.rows;
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a
            .data
            .iter()
            .fold(T::zero(), |m, v| m.max(v.abs()))
            .max(T::min_positive_value());
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[(x, k)].abs().partial_cmp(&a[(y, k)].abs()).expect("finite entries"))
                .expect("non-empty range");
            if a[(p, k)].abs() <= T::epsilon() * scale {
                return Err(KernelError::Singular(k));
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(p * n + j, k * n + j);
                }
                perm.swap(p, k);
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                if f == T::zero() {
                    continue;
                }
                a[(i, k)] = f;
                for j in k + 1..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: T = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: T = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }
}

/// Spot grid, optionally followed by the `lim f/S` coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpace<T> {
    pub grid: Vec<T>,
    pub slope: bool,
}

impl<T: Scalar> KernelSpace<T> {
    pub fn new(grid: Vec<T>, slope: bool) -> Result<Self, KernelError> {
        if grid.len() < 3
            || grid.iter().any(|s| !(s.is_finite() && *s >= T::zero()))
            || grid.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(KernelError::BadGrid);
        }
        Ok(Self { grid, slope })
    }

    pub fn uniform(lo: T, hi: T, nodes: usize, slope: bool) -> Result<Self, KernelError> {
        if nodes < 3 {
            return Err(KernelError::BadGrid);
        }
        let h = (hi - lo) / T::from_usize(nodes - 1).unwrap();
        Self::new((0..nodes).map(|i| lo + h * T::from_usize(i).unwrap()).collect(), slope)
    }

    /// Log-uniform nodes on `[S0/64, 8 S0]`.
    pub fn log_uniform(spot: T, nodes: usize, slope: bool) -> Result<Self, KernelError> {
        Self::log_uniform_between(spot / T::lit(64.0), spot * T::lit(8.0), nodes, slope)
    }

    pub fn log_uniform_between(lo: T, hi: T, nodes: usize, slope: bool) -> Result<Self, KernelError> {
        if nodes < 3 || !(lo > T::zero()) {
            return Err(KernelError::BadGrid);
        }
        let (a, b) = (lo.ln(), hi.ln());
        let step = (b - a) / T::from_usize(nodes - 1).unwrap();
        let mut grid: Vec<T> = (0..nodes)
            .map(|i| (a + step * T::from_usize(i).unwrap()).exp())
            .collect();
        grid[0] = lo;
        grid[nodes - 1] = hi;
        Self::new(grid, slope)
    }

    pub fn dim(&self) -> usize {
        self.grid.len() + usize::from(self.slope)
    }

    pub fn labels(&self) -> Vec<String> {
        let mut v: Vec<String> = self.grid.iter().map(|s| format!("S={s}")).collect();
        if self.slope {
            v.push(GrowthDirection::LinearAtInfinity.label().to_string());
        }
        v
    }

    /// Coordinates of a payoff. Quadratic or log components cannot be
    /// carried and are rejected.
    pub fn vector_of(&self, f: &Payoff<T>) -> Result<Vec<T>, KernelError> {
        for d in [GrowthDirection::QuadraticAtInfinity, GrowthDirection::LogAtZero] {
            if !f.asym(d).is_zero() {
                return Err(KernelError::UnsupportedDirection(d));
            }
        }
        let mut v = Vec::with_capacity(self.dim());
        for &s in &self.grid {
            let x = f.eval(s);
            if !x.is_finite() {
                return Err(KernelError::NonFinitePayoff(s.as_f64()));
            }
            v.push(x);
        }
        if self.slope {
            match f.asym(GrowthDirection::LinearAtInfinity) {
                Coefficient::Finite(c) => v.push(c),
                Coefficient::Divergent => {
                    return Err(KernelError::UnsupportedDirection(GrowthDirection::QuadraticAtInfinity))
                }
            }
        }
        Ok(v)
    }

    /// Grid values of `f(S) = a + b S` with slope `b`.
    pub fn affine(&self, a: T, b: T) -> Vec<T> {
        let mut v: Vec<T> = self.grid.iter().map(|&s| a + b * s).collect();
        if self.slope {
            v.push(b);
        }
        v
    }

    /// `f* = 1 + S`.
    pub fn fstar(&self) -> Vec<T> {
        self.affine(T::one(), T::one())
    }

    /// Quadratic Lagrange interpolation of grid values at `s`.
    pub fn interpolate(&self, values: &[T], s: T) -> T {
        let g = &self.grid;
        let n = g.len();
        let j = g.partition_point(|&x| x < s).clamp(1, n - 2);
        let (x0, x1, x2) = (g[j - 1], g[j], g[j + 1]);
        let (y0, y1, y2) = (values[j - 1], values[j], values[j + 1]);
        let l0 = (s - x1) * (s - x2) / ((x0 - x1) * (x0 - x2));
        let l1 = (s - x0) * (s - x2) / ((x1 - x0) * (x1 - x2));
        let l2 = (s - x0) * (s - x1) / ((x2 - x0) * (x2 - x1));
        y0 * l0 + y1 * l1 + y2 * l2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftScheme {
    /// Central drift differences; negative off-diagonals are an error.
    Central,
    /// Central where that keeps off-diagonals nonnegative, one-sided otherwise.
    #[default]
    Auto,
}

/// Discrete generator `H` over the kernel space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator<T> {
    pub space: KernelSpace<T>,
    pub matrix: Matrix<T>,
    pub sigma: Option<T>,
    pub rates: Option<Vec<T>>,
}

/// Lognormal generator with constant short rate.
pub fn bs_generator<T: Scalar>(r: T, sigma: T, space: &KernelSpace<T>) -> Result<Generator<T>, KernelError> {
    bs_generator_with(&vec![r; space.grid.len()], sigma, space, DriftScheme::Auto)
}

/// `H = -r(S) + r(S) S ∂ + ½σ²S²∂²` with a rate per grid node.
pub fn bs_generator_with<T: Scalar>(
    rates: &[T],
    sigma: T,
    space: &KernelSpace<T>,
    scheme: DriftScheme,
) -> Result<Generator<T>, KernelError> {
    if !(sigma.is_finite() && sigma >= T::zero()) {
        return Err(KernelError::BadVolatility);
    }
    let g = &space.grid;
    let m = g.len();
    if rates.len() != m {
        return Err(KernelError::ShapeMismatch(rates.len(), m));
    }
    let n = space.dim();
    let mut h = Matrix::zeros(n, n);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let neg = |row: usize, value: T| KernelError::NegativeOffDiagonal {
        row,
        spot: g[row].as_f64(),
        value: value.as_f64(),
    };
    let offdiag_floor = -T::tol(1e-12, 10.0);

    // bottom row: one-sided drift, no diffusion
    let r0 = rates[0];
    if g[0] == T::zero() {
        h[(0, 0)] = -r0;
    } else {
        let b = r0 * g[0];
        let dx = g[1] - g[0];
        if b >= T::zero() {
            h[(0, 1)] = b / dx;
            h[(0, 0)] = -b / dx - r0;
        } else {
            return Err(neg(0, b / dx));
        }
    }

    for i in 1..m - 1 {
        let s = g[i];
        let a = half * sigma * sigma * s * s;
        let b = rates[i] * s;
        let hl = g[i] - g[i - 1];
        let hr = g[i + 1] - g[i];
        let dl = two * a / (hl * (hl + hr));
        let dr = two * a / (hr * (hl + hr));
        let mut lower = dl - b * hr / (hl * (hl + hr));
        let mut upper = dr + b * hl / (hr * (hl + hr));
        let mut diag = -dl - dr + b * (hr - hl) / (hl * hr);
        if lower < offdiag_floor || upper < offdiag_floor {
            if scheme == DriftScheme::Central {
                return Err(neg(i, lower.min(upper)));
            }
            // one-sided in the upwind direction
            if b >= T::zero() {
                lower = dl;
                upper = dr + b / hr;
                diag = -dl - dr - b / hr;
            } else {
                lower = dl - b / hl;
                upper = dr;
                diag = -dl - dr + b / hl;
            }
        }
        h[(i, i - 1)] = lower;
        h[(i, i + 1)] = upper;
        h[(i, i)] = diag - rates[i];
    }

    // top row: ghost node f_m = f_{m-1} + c·Δ (c = slope coordinate, zero when
    // the coordinate is absent)
    {
        let i = m - 1;
        let s = g[i];
        let a = half * sigma * sigma * s * s;
        let b = rates[i] * s;
        let dx = g[i] - g[i - 1];
        let mut lower = a / (dx * dx) - b / (two * dx);
        let mut diag = -a / (dx * dx) + b / (two * dx);
        let mut ghost = a / dx + b / two;
        if lower < offdiag_floor {
            if scheme == DriftScheme::Central {
                return Err(neg(i, lower));
            }
            lower = a / (dx * dx);
            diag = -a / (dx * dx);
            ghost = a / dx + b;
        }
        h[(i, i - 1)] = lower;
        h[(i, i)] = diag - rates[i];
        if space.slope {
            h[(i, m)] = ghost;
        }
    }
    // slope row stays zero: the forward S is repriced exactly

    Ok(Generator {
        space: space.clone(),
        matrix: h,
        sigma: Some(sigma),
        rates: Some(rates.to_vec()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffDiagonalViolation<T> {
    pub row: usize,
    pub col: usize,
    pub value: T,
    /// Nonnegative payoff vanishing at `row` whose generator image is negative there.
    pub witness: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorVerdict<T> {
    pub ok: bool,
    pub violations: Vec<OffDiagonalViolation<T>>,
}

impl<T: Scalar> Generator<T> {
    pub fn from_matrix(space: KernelSpace<T>, matrix: Matrix<T>) -> Result<Self, KernelError> {
        if matrix.rows != space.dim() || matrix.cols != space.dim() {
            return Err(KernelError::ShapeMismatch(matrix.rows, space.dim()));
        }
        Ok(Self {
            space,
            matrix,
            sigma: None,
            rates: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// `r = -H·1` on the grid rows (unit payoff with zero slope).
    pub fn implied_short_rate(&self) -> Vec<T> {
        let ones = self.space.affine(T::one(), T::zero());
        self.matrix
            .matvec(&ones)
            .into_iter()
            .take(self.space.grid.len())
            .map(|v| -v)
            .collect()
    }

    /// Positivity at contact: every off-diagonal entry `≥ -1e-12`.
    pub fn arbitrage_check(&self) -> GeneratorVerdict<T> {
        let n = self.dim();
        let tol = T::lit(1e-12);
        let mut violations = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = self.matrix[(i, j)];
                if i != j && v < -tol {
                    let mut witness = vec![T::zero(); n];
                    witness[j] = T::one();
                    violations.push(OffDiagonalViolation {
                        row: i,
                        col: j,
                        value: v,
                        witness,
                    });
                }
            }
        }
        GeneratorVerdict {
            ok: violations.is_empty(),
            violations,
        }
    }

    /// Largest Δt for which the explicit part `I + (1-θ)Δt H` keeps a
    /// nonnegative diagonal (the implicit part is an M-matrix for any Δt).
    pub fn positivity_dt_bound(&self, theta: T) -> T {
        let worst = (0..self.dim()).fold(T::zero(), |m, i| m.max(-self.matrix[(i, i)]));
        let explicit = T::one() - theta;
        if explicit <= T::zero() || worst == T::zero() {
            T::infinity()
        } else {
            T::one() / (explicit * worst)
        }
    }
}

pub fn generator_arbitrage_check<T: Scalar>(h: &Generator<T>) -> GeneratorVerdict<T> {
    h.arbitrage_check()
}

pub fn implied_short_rate<T: Scalar>(h: &Generator<T>) -> Vec<T> {
    h.implied_short_rate()
}

/// One θ-step solver: factors `I - θΔt H` once.
pub struct ThetaStep<T> {
    lu: Lu<T>,
    explicit: Matrix<T>,
}

impl<T: Scalar> ThetaStep<T> {
    pub fn new(h: &Generator<T>, dt: T, theta: T) -> Result<Self, KernelError> {
        if !(dt > T::zero() && dt.is_finite() && theta >= T::zero() && theta <= T::one()) {
            return Err(KernelError::BadStep);
        }
        let implicit = h.matrix.shifted_identity(-theta * dt);
        let explicit = h.matrix.shifted_identity((T::one() - theta) * dt);
        Ok(Self {
            lu: Lu::factor(implicit)?,
            explicit,
        })
    }

    pub fn apply(&self, f: &[T]) -> Vec<T> {
        self.lu.solve(&self.explicit.matvec(f))
    }

    /// `(I - θΔt H)⁻¹ (I + (1-θ)Δt H)` as a dense matrix.
    pub fn matrix(&self) -> Matrix<T> {
        let n = self.explicit.rows;
        let mut out = Matrix::zeros(n, n);
        let mut col = vec![T::zero(); n];
        for j in 0..n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.explicit[(i, j)];
            }
            let x = self.lu.solve(&col);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }
}

/// `f_t` from `f_{t+Δt}`.
pub fn backward_step<T: Scalar>(f: &[T], h: &Generator<T>, dt: T, theta: T) -> Result<Vec<T>, KernelError> {
    if f.len() != h.dim() {
        return Err(KernelError::ShapeMismatch(f.len(), h.dim()));
    }
    Ok(ThetaStep::new(h, dt, theta)?.apply(f))
}

/// Time stepping plan: `steps` equal steps with scheme θ; the first step can
/// be replaced by two fully implicit half-steps (Rannacher start).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepping<T> {
    pub horizon: T,
    pub steps: usize,
    pub theta: T,
    pub rannacher: bool,
}

impl<T: Scalar> Stepping<T> {
    pub fn crank_nicolson(horizon: T, steps: usize) -> Self {
        Self {
            horizon,
            steps,
            theta: T::lit(0.5),
            rannacher: true,
        }
    }

    fn dt(&self) -> T {
        self.horizon / T::from_usize(self.steps).unwrap()
    }
}

/// Propagates payoff coordinates back over `plan.horizon`.
pub fn propagate<T: Scalar>(f: &[T], h: &Generator<T>, plan: &Stepping<T>) -> Result<Vec<T>, KernelError> {
    if f.len() != h.dim() {
        return Err(KernelError::ShapeMismatch(f.len(), h.dim()));
    }
    if plan.steps == 0 {
        return Err(KernelError::BadStep);
    }
    let dt = plan.dt();
    let mut v = f.to_vec();
    let mut remaining = plan.steps;
    if plan.rannacher && plan.theta < T::one() {
        let half = ThetaStep::new(h, dt / T::lit(2.0), T::one())?;
        v = half.apply(&half.apply(&v));
        remaining -= 1;
    }
    if remaining > 0 {
        let step = ThetaStep::new(h, dt, plan.theta)?;
        for _ in 0..remaining {
            v = step.apply(&v);
        }
    }
    Ok(v)
}

/// `U_{t1,t2}`: rows index states at `t1`, columns coordinates at `t2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingKernelOperator<T> {
    pub space: KernelSpace<T>,
    pub matrix: Matrix<T>,
    pub t1: T,
    pub t2: T,
}

impl<T: Scalar> PricingKernelOperator<T> {
    pub fn identity(space: &KernelSpace<T>, t: T) -> Self {
        Self {
            space: space.clone(),
            matrix: Matrix::identity(space.dim()),
            t1: t,
            t2: t,
        }
    }

    /// Single θ-step from `t2` back to `t1`.
    pub fn step(h: &Generator<T>, t1: T, t2: T, theta: T) -> Result<Self, KernelError> {
        let m = ThetaStep::new(h, t2 - t1, theta)?.matrix();
        Ok(Self {
            space: h.space.clone(),
            matrix: m,
            t1,
            t2,
        })
    }

    /// Product of the steps in `plan` over `[t1, t1 + horizon]`.
    pub fn propagator(h: &Generator<T>, t1: T, plan: &Stepping<T>) -> Result<Self, KernelError> {
        if plan.steps == 0 {
            return Err(KernelError::BadStep);
        }
        let dt = plan.dt();
        let mut ops: Vec<Matrix<T>> = Vec::new();
        let mut remaining = plan.steps;
        if plan.rannacher && plan.theta < T::one() {
            let half = ThetaStep::new(h, dt / T::lit(2.0), T::one())?.matrix();
            ops.push(half.matmul(&half));
            remaining -= 1;
        }
        if remaining > 0 {
            let step = ThetaStep::new(h, dt, plan.theta)?.matrix();
            ops.push(matrix_power(&step, remaining));
        }
        // the Rannacher step sits at the payoff end, i.e. rightmost
        let mut total = Matrix::identity(h.dim());
        for m in ops.iter().rev() {
            total = total.matmul(m);
        }
        Ok(Self {
            space: h.space.clone(),
            matrix: total,
            t1,
            t2: t1 + plan.horizon,
        })
    }

    pub fn apply(&self, f: &[T]) -> Vec<T> {
        self.matrix.matvec(f)
    }

    /// `U_{t1,t3} = U_{t1,t2} U_{t2,t3}`.
    pub fn compose(&self, later: &PricingKernelOperator<T>) -> Result<Self, KernelError> {
        let tol = T::epsilon() * T::lit(64.0) * (T::one() + self.t2.abs());
        if (self.t2 - later.t1).abs() > tol {
            return Err(KernelError::TimeLabelMismatch(self.t2.as_f64(), later.t1.as_f64()));
        }
        if self.space != later.space {
            return Err(KernelError::ShapeMismatch(self.space.dim(), later.space.dim()));
        }
        Ok(Self {
            space: self.space.clone(),
            matrix: self.matrix.matmul(&later.matrix),
            t1: self.t1,
            t2: later.t2,
        })
    }

    pub fn min_entry(&self) -> T {
        self.matrix.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn is_positive(&self, tol: T) -> bool {
        self.min_entry() >= -tol
    }

    /// `sup_i Σ_j |U_ij| f*_2(j) / f*_1(i)` with `f*_1 = U f*_2`.
    pub fn operator_norm(&self, fstar_t2: &[T]) -> Result<T, KernelError> {
        if fstar_t2.len() != self.matrix.cols {
            return Err(KernelError::ShapeMismatch(fstar_t2.len(), self.matrix.cols));
        }
        if let Some(j) = fstar_t2.iter().position(|&v| !(v > T::zero())) {
            return Err(KernelError::NonPositiveFstar(j));
        }
        let fstar_t1 = self.apply(fstar_t2);
        let mut norm = T::zero();
        for (i, &d) in fstar_t1.iter().enumerate() {
            if !(d > T::zero()) {
                return Err(KernelError::NonPositiveFstar(i));
            }
            let num: T = self
                .matrix
                .row(i)
                .iter()
                .zip(fstar_t2)
                .map(|(&a, &f)| a.abs() * f)
                .sum();
            norm = norm.max(num / d);
        }
        Ok(norm)
    }

    pub fn dump(&self) -> OperatorDump<T> {
        OperatorDump {
            t1: self.t1,
            t2: self.t2,
            labels: self.space.labels(),
            matrix: self.matrix.to_rows(),
        }
    }
}

pub fn compose<T: Scalar>(
    u12: &PricingKernelOperator<T>,
    u23: &PricingKernelOperator<T>,
) -> Result<PricingKernelOperator<T>, KernelError> {
    u12.compose(u23)
}

pub fn operator_norm<T: Scalar>(u: &PricingKernelOperator<T>, fstar_t2: &[T]) -> Result<T, KernelError> {
    u.operator_norm(fstar_t2)
}

fn matrix_power<T: Scalar>(m: &Matrix<T>, mut k: usize) -> Matrix<T> {
    let mut result = Matrix::identity(m.rows);
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = result.matmul(&base);
        }
        k >>= 1;
        if k > 0 {
            base = base.matmul(&base);
        }
    }
    result
}

/// Labeled matrix for JSON/CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorDump<T> {
    pub t1: T,
    pub t2: T,
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<T>>,
}

impl<T: Scalar> OperatorDump<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("coordinate");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.matrix) {
            out.push_str(l);
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

impl<T: Scalar> Generator<T> {
    pub fn dump(&self) -> OperatorDump<T> {
        OperatorDump {
            t1: T::zero(),
            t2: T::zero(),
            labels: self.space.labels(),
            matrix: self.matrix.to_rows(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Black–Scholes call: Gauss–Legendre over the normal variable above the kink.
    fn lognormal_call(s0: f64, k: f64, sigma: f64, t: f64) -> f64 {
        use crate::quadrature::{gauss_legendre, integrate_panels};
        use crate::scalar::norm_pdf;
        let sd = sigma * t.sqrt();
        let kink = ((k / s0).ln() + 0.5 * sd * sd) / sd;
        let rule = gauss_legendre::<f64>(20);
        integrate_panels(
            |z: f64| (s0 * (sd * z - 0.5 * sd * sd).exp() - k) * norm_pdf(z),
            kink,
            kink.max(0.0) + 12.0,
            &[],
            60,
            &rule,
        )
    }

    fn bs_space() -> KernelSpace<f64> {
        KernelSpace::uniform(0.0, 800.0, 400, true).unwrap()
    }

    #[test]
    fn crank_nicolson_call_matches_oracle() {
        let space = bs_space();
        let h = bs_generator(0.0, 0.2, &space).unwrap();
        let f = space.vector_of(&Payoff::call(100.0).unwrap()).unwrap();
        let v = propagate(&f, &h, &Stepping::crank_nicolson(1.0, 64)).unwrap();
        let price = space.interpolate(&v, 100.0);
        let oracle = lognormal_call(100.0, 100.0, 0.2, 1.0);
        assert!((oracle - 7.9656).abs() < 1e-4);
        assert!((price - oracle).abs() < 0.05, "{price} vs {oracle}");
    }

    #[test]
    fn bond_discounts() {
        let space = bs_space();
        let h = bs_generator(0.03, 0.2, &space).unwrap();
        let v = propagate(&space.affine(1.0, 0.0), &h, &Stepping::crank_nicolson(1.0, 64)).unwrap();
        let exact = (-0.03f64).exp();
        assert!(v[..400].iter().all(|x| (x - exact).abs() < 1e-6));
    }

    #[test]
    fn short_rate_recovered() {
        let space = KernelSpace::log_uniform(100.0, 200, true).unwrap();
        for r in [0.0f64, 0.03] {
            let h = bs_generator(r, 0.2, &space).unwrap();
            assert!(h.implied_short_rate().iter().all(|&x| (x - r).abs() < 1e-10));
        }
        let rates: Vec<f64> = space
            .grid
            .iter()
            .map(|s: &f64| 0.02 + 0.01 * (s / 100.0).ln().tanh())
            .collect();
        let h = bs_generator_with(&rates, 0.2, &space, DriftScheme::Auto).unwrap();
        for (a, b) in h.implied_short_rate().iter().zip(&rates) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn transport_matches_characteristics() {
        // σ = 0: forward S - K is exact in space; K discounts by the scheme's
        // amplification factor.
        let space = KernelSpace::new(vec![90.0, 100.0, 110.0], true).unwrap();
        let r = 0.05f64;
        let h = bs_generator(r, 0.0, &space).unwrap();
        let f = space.vector_of(&Payoff::forward(100.0).unwrap()).unwrap();
        let steps = 50;
        let plan = Stepping {
            horizon: 1.0,
            steps,
            theta: 0.5,
            rannacher: false,
        };
        let v = propagate(&f, &h, &plan).unwrap();
        for (i, &s) in space.grid.iter().enumerate() {
            let exact = s - 100.0 * (-r).exp();
            assert!((v[i] - exact).abs() < 1e-4, "S={s}: {} vs {exact}", v[i]);
        }
        assert_eq!(v[3], 1.0);
    }

    #[test]
    fn central_scheme_reports_negative_offdiagonal() {
        let space = KernelSpace::new(vec![90.0, 100.0, 110.0], false).unwrap();
        let err = bs_generator_with(&[0.05; 3], 0.0, &space, DriftScheme::Central).unwrap_err();
        assert!(matches!(err, KernelError::NegativeOffDiagonal { row: 1, .. }));
    }

    #[test]
    fn arbitrage_check_examples() {
        let space = KernelSpace::log_uniform(100.0, 100, true).unwrap();
        assert!(bs_generator(0.0, 0.2, &space).unwrap().arbitrage_check().ok);
        let n = space.dim();
        let mut m = Matrix::identity(n);
        for v in m.data.iter_mut() {
            *v *= -0.03;
        }
        assert!(
            Generator::from_matrix(space.clone(), m.clone())
                .unwrap()
                .arbitrage_check()
                .ok
        );
        m[(3, 4)] = -0.5;
        let h = Generator::from_matrix(space.clone(), m).unwrap();
        let verdict = h.arbitrage_check();
        assert!(!verdict.ok);
        let w = &verdict.violations[0].witness;
        assert_eq!(w[3], 0.0);
        assert!(h.matrix.matvec(w)[3] < 0.0);
    }

    #[test]
    fn implicit_steps_are_positive_with_unit_norm() {
        let space = KernelSpace::log_uniform(100.0, 120, true).unwrap();
        let h = bs_generator(0.02, 0.3, &space).unwrap();
        for dt in [0.01f64, 0.1, 1.0] {
            let u = PricingKernelOperator::step(&h, 0.0, dt, 1.0).unwrap();
            assert!(u.is_positive(1e-14));
            let norm: f64 = u.operator_norm(&space.fstar()).unwrap();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        let cn_dt = h.positivity_dt_bound(0.5);
        let u = PricingKernelOperator::step(&h, 0.0, cn_dt, 0.5).unwrap();
        assert!(u.is_positive(1e-14));
        let mut bad = u.clone();
        bad.matrix[(10, 11)] = -bad.matrix[(10, 11)];
        assert!(bad.operator_norm(&space.fstar()).unwrap() > 1.0);
        assert_eq!(
            PricingKernelOperator::identity(&space, 0.0)
                .operator_norm(&space.fstar())
                .unwrap(),
            1.0
        );
    }

    #[test]
    fn compose_labels_and_identity() {
        let space = KernelSpace::log_uniform(100.0, 40, true).unwrap();
        let h = bs_generator(0.0, 0.2, &space).unwrap();
        let u = PricingKernelOperator::step(&h, 0.0, 0.25, 1.0).unwrap();
        let i = PricingKernelOperator::identity(&space, 0.0);
        assert_eq!(compose(&i, &u).unwrap().matrix, u.matrix);
        assert!(matches!(compose(&u, &u), Err(KernelError::TimeLabelMismatch(..))));
    }

    #[test]
    fn forward_martingality_needs_slope() {
        for slope in [true, false] {
            let space = KernelSpace::<f64>::uniform(0.0, 800.0, 400, slope).unwrap();
            let h = bs_generator(0.0, 0.2, &space).unwrap();
            let f = space.affine(0.0, 1.0);
            let v = propagate(&f, &h, &Stepping::crank_nicolson(1.0, 64)).unwrap();
            let top = space.grid.len() * 9 / 10;
            let err = (top..space.grid.len())
                .map(|i| (v[i] - space.grid[i]).abs())
                .fold(0.0, f64::max);
            if slope {
                assert!(err < 1e-6, "err {err}");
            } else {
                assert!(err > 1e-3, "err {err}");
            }
        }
    }

    #[test]
    fn unsupported_directions() {
        let space = bs_space();
        assert_eq!(
            space.vector_of(&Payoff::power_call(100.0).unwrap()),
            Err(KernelError::UnsupportedDirection(GrowthDirection::QuadraticAtInfinity))
        );
        assert_eq!(
            space.vector_of(&Payoff::log_contract(100.0).unwrap()),
            Err(KernelError::UnsupportedDirection(GrowthDirection::LogAtZero))
        );
    }

    #[test]
    fn dump_csv_shape() {
        let space = KernelSpace::new(vec![1.0, 2.0, 3.0], true).unwrap();
        let h = bs_generator(0.0, 0.2, &space).unwrap();
        let csv = h.dump().to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("coordinate,S=1,S=2,S=3,linear_inf"));
    }
}
