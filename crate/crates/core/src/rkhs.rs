//! Interpolation and operator projection in reproducing-kernel spaces on `[0, 1]`.
//!
//! Functions in `ℍₙ = span{R(uᵢ, ·)}` are stored through their node values; the inner product is
//! `⟨g, h⟩ = v_gᵀ Rₙ⁻¹ v̄_h`. Operators on `ℍₙ` are stored as `Vᵢⱼ = ⟨A R(uⱼ, ·), R(uᵢ, ·)⟩`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::operator::OperatorRep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RkhsFamily {
    /// `R(u, v) = u ∧ v`, functions pinned at 0.
    Brownian,
    /// `R(u, v) = 1 + u ∧ v`.
    Sobolev1,
}

impl RkhsFamily {
    pub fn kernel(self, u: f64, v: f64) -> f64 {
        match self {
            RkhsFamily::Brownian => u.min(v),
            RkhsFamily::Sobolev1 => 1.0 + u.min(v),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RkhsFamily::Brownian => "brownian",
            RkhsFamily::Sobolev1 => "sobolev1",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RkhsSpec {
    family: RkhsFamily,
    nodes: Vec<f64>,
    gram: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    condition: f64,
}

impl RkhsSpec {
    /// Nodes must be strictly increasing in `(0, 1]`.
    pub fn new(family: RkhsFamily, nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(invalid("no nodes"));
        }
        if nodes[0] <= 0.0 || *nodes.last().expect("non-empty") > 1.0 {
            return Err(invalid("nodes must lie in (0, 1]"));
        }
        if let Some(w) = nodes.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::SingularGram(format!("nodes not strictly increasing near {}", w[0])));
        }
        let m = nodes.len();
        let gram = DMatrix::from_fn(m, m, |i, j| family.kernel(nodes[i], nodes[j]));
        let factor = Cholesky::new(gram.clone()).ok_or_else(|| Error::SingularGram("Gram matrix is not positive definite".into()))?;
        let eig = gram.clone().symmetric_eigen();
        let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        Ok(Self { family, nodes, gram, factor, condition: hi / lo })
    }

    /// Nodes `i/m`, `i = 1..=m`.
    pub fn uniform(family: RkhsFamily, m: usize) -> Result<Self> {
        Self::new(family, (1..=m).map(|i| i as f64 / m as f64).collect())
    }

    pub fn family(&self) -> RkhsFamily {
        self.family
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Lower-triangular factor `L` with `Rₙ = L Lᵀ`.
    pub fn gram_factor(&self) -> DMatrix<f64> {
        self.factor.l()
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// `Rₙ⁻¹ x`. The Brownian case uses `Rₙ⁻¹ = Dᵀ H⁻¹ D` with `D` the first difference and
    /// `H = diag(uᵢ − uᵢ₋₁)`.
    pub fn solve(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.family {
            RkhsFamily::Brownian => {
                let m = self.m();
                let mut y = DVector::zeros(m);
                let mut prev_u = 0.0;
                let mut prev_x = 0.0;
                for i in 0..m {
                    y[i] = (x[i] - prev_x) / (self.nodes[i] - prev_u);
                    prev_u = self.nodes[i];
                    prev_x = x[i];
                }
                // Dᵀ y: (Dᵀy)_i = y_i − y_{i+1}
                let mut out = DVector::zeros(m);
                for i in 0..m {
                    out[i] = y[i] - if i + 1 < m { y[i + 1] } else { 0.0 };
                }
                out
            }
            RkhsFamily::Sobolev1 => self.factor.solve(x),
        }
    }

    fn solve_complex(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        let re = self.solve(&x.map(|c| c.re));
        let im = self.solve(&x.map(|c| c.im));
        re.zip_map(&im, Complex64::new)
    }

    fn solve_matrix_complex(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::from_element(x.nrows(), x.ncols(), Complex64::new(0.0, 0.0));
        for j in 0..x.ncols() {
            out.set_column(j, &self.solve_complex(&x.column(j).into_owned()));
        }
        out
    }

    /// Minimum-norm interpolant of node values `g(uᵢ)`.
    pub fn interpolate(&self, values: &[f64]) -> Result<Interpolant> {
        if values.len() != self.m() {
            return Err(Error::DimensionMismatch { expected: self.m(), actual: values.len() });
        }
        let g = DVector::from_column_slice(values);
        let coeffs = self.solve(&g);
        let norm_sq = g.dot(&coeffs);
        Ok(Interpolant { family: self.family, nodes: self.nodes.clone(), coeffs, norm_sq })
    }

    /// `⟨g, h⟩_ℍ` for the interpolants of two node-value vectors.
    pub fn inner(&self, g: &DVector<f64>, h: &DVector<f64>) -> f64 {
        g.dot(&self.solve(h))
    }

    /// `Πₙ A Πₙ` for an operator known through its kernel `k_A(u, v) = ⟨A R(v, ·), R(u, ·)⟩`.
    pub fn project_operator<F: Fn(f64, f64) -> Complex64>(&self, kernel: F) -> NodeOperator {
        let m = self.m();
        NodeOperator { values: DMatrix::from_fn(m, m, |i, j| kernel(self.nodes[i], self.nodes[j])) }
    }

    /// Wraps a `p = m` coordinate operator whose coordinates are node values (e.g. a spectral
    /// estimate computed from node observations) as an operator on `ℍₙ`.
    pub fn node_operator(&self, op: &OperatorRep) -> Result<NodeOperator> {
        if op.p() != self.m() {
            return Err(Error::DimensionMismatch { expected: self.m(), actual: op.p() });
        }
        Ok(NodeOperator { values: op.matrix().clone() })
    }

    /// Matrix of the operator in an `ℍ`-orthonormal basis of `ℍₙ`: `L⁻¹ V L⁻ᵀ`.
    pub fn orthonormal_matrix(&self, op: &NodeOperator) -> DMatrix<Complex64> {
        let l = self.factor.l().map(|x| Complex64::new(x, 0.0));
        let left = l.solve_lower_triangular(&op.values).expect("positive diagonal");
        let right = l.solve_lower_triangular(&left.transpose()).expect("positive diagonal");
        right.transpose()
    }

    /// `‖A‖_HS = tr(Rₙ⁻¹ V Rₙ⁻¹ Vᴴ)^{1/2}`.
    pub fn hs_norm_gram(&self, op: &NodeOperator) -> f64 {
        let a = self.solve_matrix_complex(&op.values);
        let b = self.solve_matrix_complex(&op.values.adjoint());
        (a * b).trace().re.max(0.0).sqrt()
    }

    pub fn trace_norm_gram(&self, op: &NodeOperator) -> f64 {
        self.orthonormal_matrix(op).singular_values().iter().sum()
    }

    /// Kernel of the operator, `(u, v) ↦ Σᵢⱼ R(u, uᵢ) (Rₙ⁻¹ V Rₙ⁻¹)ᵢⱼ R(uⱼ, v)`.
    pub fn operator_kernel(&self, op: &NodeOperator) -> impl Fn(f64, f64) -> Complex64 + '_ {
        let a = self.solve_matrix_complex(&op.values);
        let core = self.solve_matrix_complex(&a.adjoint()).adjoint();
        move |u, v| {
            let ru = DVector::from_fn(self.m(), |i, _| Complex64::new(self.family.kernel(u, self.nodes[i]), 0.0));
            let rv = DVector::from_fn(self.m(), |i, _| Complex64::new(self.family.kernel(self.nodes[i], v), 0.0));
            (ru.transpose() * &core * rv)[(0, 0)]
        }
    }

    /// `‖Πₙ f Πₙ − f‖_HS` for `f = Σ νⱼ ψⱼ ⊗ ψⱼ` with `ℍ`-orthonormal real `ψⱼ`.
    pub fn projected_bias(&self, eig: &EigenExpansion) -> f64 {
        let g: Vec<DVector<f64>> = eig.funcs.iter().map(|f| DVector::from_fn(self.m(), |i, _| f(self.nodes[i]))).collect();
        let solved: Vec<DVector<f64>> = g.iter().map(|v| self.solve(v)).collect();
        let total: f64 = eig.nu.iter().map(|v| v * v).sum();
        let mut kept = 0.0;
        for j in 0..g.len() {
            for k in 0..g.len() {
                let ip = g[j].dot(&solved[k]);
                kept += eig.nu[j] * eig.nu[k] * ip * ip;
            }
        }
        (total - kept).max(0.0).sqrt()
    }
}

/// `Rₙ` at nodes `i/m` against `m⁻¹ L Lᵀ` with `L` the all-ones lower-triangular matrix (max-abs residual).
pub fn brownian_cholesky_check(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(invalid("m must be positive"));
    }
    let spec = RkhsSpec::uniform(RkhsFamily::Brownian, m)?;
    let l = DMatrix::from_fn(m, m, |i, j| if j <= i { 1.0 } else { 0.0 });
    let rebuilt = (&l * l.transpose()) / m as f64;
    Ok((spec.gram() - rebuilt).amax())
}

#[derive(Debug, Clone)]
pub struct Interpolant {
    family: RkhsFamily,
    nodes: Vec<f64>,
    coeffs: DVector<f64>,
    norm_sq: f64,
}

impl Interpolant {
    /// `c = Rₙ⁻¹ g`.
    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.nodes.iter().zip(self.coeffs.iter()).map(|(&ui, c)| c * self.family.kernel(ui, u)).sum()
    }

    /// `‖g̃‖²_ℍ = gᵀ Rₙ⁻¹ g`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }
}

/// Operator on `ℍₙ` in node-value form.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeOperator {
    pub values: DMatrix<Complex64>,
}

/// `f = Σⱼ νⱼ ψⱼ ⊗ ψⱼ` with `ℍ`-orthonormal eigenfunctions.
pub struct EigenExpansion {
    pub nu: Vec<f64>,
    pub funcs: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    /// `Σ_{j>J} νⱼ²`, the omitted contribution to the squared norm.
    pub tail: f64,
}

impl EigenExpansion {
    /// `ψⱼ(t) = √2 sin(aⱼ t)/aⱼ`, `aⱼ = (j − ½)π`, orthonormal in the Brownian space, with `νⱼ = j^{−power}`.
    pub fn brownian_sines(power: f64, terms: usize) -> Self {
        let nu: Vec<f64> = (1..=terms).map(|j| (j as f64).powf(-power)).collect();
        let funcs = (1..=terms)
            .map(|j| {
                let a = (j as f64 - 0.5) * std::f64::consts::PI;
                Box::new(move |t: f64| std::f64::consts::SQRT_2 * (a * t).sin() / a) as Box<dyn Fn(f64) -> f64 + Send + Sync>
            })
            .collect();
        // Σ_{j>J} j^{−2s} ≤ ∫_J^∞ x^{−2s} dx
        let tail = (terms as f64).powf(1.0 - 2.0 * power) / (2.0 * power - 1.0);
        Self { nu, funcs, tail }
    }

    pub fn single<F: Fn(f64) -> f64 + Send + Sync + 'static>(nu: f64, f: F) -> Self {
        Self { nu: vec![nu], funcs: vec![Box::new(f)], tail: 0.0 }
    }

    /// `k_f(u, v) = Σ νⱼ ψⱼ(u) ψⱼ(v)`.
    pub fn kernel(&self, u: f64, v: f64) -> Complex64 {
        Complex64::new(self.nu.iter().zip(&self.funcs).map(|(n, f)| n * f(u) * f(v)).sum(), 0.0)
    }
}
