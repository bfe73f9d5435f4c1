//! Stability certificate checkers for the triggering strategies.
//!
//! Each checker takes a candidate certificate (a Lyapunov-like matrix P
//! plus scalar multipliers) and verifies that the required block matrices
//! are positive definite. Finding certificates is out of scope here: the
//! multipliers come from an external search, and the tests use brute-force
//! grid oracles on low-dimensional toys to cross-check the verdicts.
//!
//! The three certificate families:
//! - centralized quadratic trigger: two block LMIs over the doubled state
//!   (state stacked with held state);
//! - decentralized synchronous trigger: three block LMIs of the same
//!   shape, splitting the trigger outcome over both refresh maps;
//! - asynchronous trigger: one bilinear matrix inequality per subset of
//!   triggering nodes, built from the flow of a Hamiltonian matrix over
//!   one sample period.

use std::collections::BTreeMap;

use smallmat::{expm, inverse, is_positive_definite, psd_factor, MatError, Matrix};
use thiserror::Error;

/// Pivot tolerance for all definiteness verdicts.
pub const PD_TOL: f64 = 1e-9;

/// Candidate certificate: the matrix P plus every scalar any of the three
/// checkers may need. Unused fields are ignored by the other checkers.
#[derive(Debug, Clone)]
pub struct CertificateBundle {
    /// Symmetric candidate matrix on the doubled state (2n x 2n).
    pub p: Matrix,
    /// Required decay rate (1/s).
    pub rho: f64,
    /// Sample period T in seconds.
    pub period: f64,
    /// Multipliers of the two-LMI certificate; the first also serves as
    /// the first multiplier of the three-LMI certificate.
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    /// Disturbance attenuation level, > 1.
    pub gamma: f64,
    /// Scalars of the bilinear certificate.
    pub beta1: f64,
    pub beta2: f64,
    pub varrho: f64,
    /// Per-(subset, node) multipliers, keyed by subset bitmask over nodes
    /// 0..n and node index.
    pub epsilon: BTreeMap<(u32, usize), f64>,
    /// Per-node trigger weights with unit Euclidean norm.
    pub omega: Vec<f64>,
}

impl CertificateBundle {
    /// Bundle with the given P, decay rate, and period; multipliers zeroed
    /// and γ at its default 2.0.
    pub fn new(p: Matrix, rho: f64, period: f64) -> Self {
        CertificateBundle {
            p,
            rho,
            period,
            mu1: 0.0,
            mu2: 0.0,
            mu3: 0.0,
            gamma: 2.0,
            beta1: 1.0,
            beta2: 1.0,
            varrho: 1.0,
            epsilon: BTreeMap::new(),
            omega: Vec::new(),
        }
    }

    /// Sets every (subset, node) multiplier to the same value.
    pub fn set_uniform_epsilon(&mut self, n: usize, value: f64) {
        for mask in 0u32..(1 << n) {
            for i in 0..n {
                self.epsilon.insert((mask, i), value);
            }
        }
    }

    fn epsilon_for(&self, mask: u32, i: usize) -> f64 {
        *self
            .epsilon
            .get(&(mask, i))
            .unwrap_or_else(|| panic!("missing epsilon multiplier for subset {mask:#b}, node {i}"))
    }
}

/// Closed-loop block matrices shared by the certificate checkers.
#[derive(Debug, Clone)]
pub struct ClosedLoopMatrices {
    /// State dimension n.
    pub n: usize,
    /// Flow matrix [[A, BK], [0, 0]] on the doubled state.
    pub a_bar: Matrix,
    /// Held-state refresh map: both halves take the state block.
    pub j1: Matrix,
    /// Identity map: the held state is kept.
    pub j2: Matrix,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("closed-loop dimension mismatch: A is {a_rows}x{a_cols}, B is {b_rows}x{b_cols}, K is {k_rows}x{k_cols}")]
    DimensionMismatch {
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
        b_cols: usize,
        k_rows: usize,
        k_cols: usize,
    },
    #[error("gamma must exceed 1, got {0}")]
    InvalidGamma(f64),
    #[error("F11(tau) is singular at tau = {tau}; the flow-invertibility assumption fails")]
    FlowNotInvertible { tau: f64 },
    #[error("-F11^-1(T) F12(T) is not positive semidefinite: {0}")]
    HoldFactorNotPsd(MatError),
}

/// Assembles the closed-loop blocks for one mode of the plant.
pub fn build_closed_loop(a: &Matrix, b: &Matrix, k: &Matrix) -> Result<ClosedLoopMatrices, CertifyError> {
    let n = a.rows();
    let square = a.is_square() && b.rows() == n && k.cols() == n && k.rows() == b.cols();
    if !square {
        return Err(CertifyError::DimensionMismatch {
            a_rows: a.rows(),
            a_cols: a.cols(),
            b_rows: b.rows(),
            b_cols: b.cols(),
            k_rows: k.rows(),
            k_cols: k.cols(),
        });
    }
    let bk = b * k;
    let zero = Matrix::zeros(n, n);
    let a_bar = Matrix::from_blocks(&[&[a, &bk], &[&zero, &zero]]);
    let eye = Matrix::identity(n);
    let j1 = Matrix::from_blocks(&[&[&eye, &zero], &[&eye, &zero]]);
    let j2 = Matrix::identity(2 * n);
    Ok(ClosedLoopMatrices { n, a_bar, j1, j2 })
}

impl ClosedLoopMatrices {
    /// e^{Ā t}; exact for the water network since Ā is nilpotent there.
    pub fn exp_a_bar(&self, t: f64) -> Matrix {
        expm(&self.a_bar, t).expect("a_bar is square by construction")
    }

    /// Trigger quadratic form [[(1−σ)I, −I], [−I, I]] on the doubled state.
    pub fn q_sigma(&self, sigma: f64) -> Matrix {
        let n = self.n;
        let mut q = Matrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            q[(i, i)] = 1.0 - sigma;
            q[(i, i + n)] = -1.0;
            q[(i + n, i)] = -1.0;
            q[(i + n, i + n)] = 1.0;
        }
        q
    }

    /// Diagonal selector of a node subset given as a bitmask.
    pub fn gamma_subset(&self, mask: u32) -> Matrix {
        let mut g = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            if mask & (1 << i) != 0 {
                g[(i, i)] = 1.0;
            }
        }
        g
    }

    /// Per-node quadratic form [[Γᵢ, −Γᵢ], [−Γᵢ, Γᵢ]]; x'·Qᵢ·x equals the
    /// squared holding error of node i.
    pub fn q_single(&self, i: usize) -> Matrix {
        assert!(i < self.n, "node index out of range");
        let g = self.gamma_subset(1 << i);
        let ng = -&g;
        Matrix::from_blocks(&[&[&g, &ng], &[&ng, &g]])
    }

    /// Refresh map of a subset: triggered components take the state, the
    /// rest keep the held value.
    pub fn j_subset(&self, mask: u32) -> Matrix {
        let n = self.n;
        let eye = Matrix::identity(n);
        let zero = Matrix::zeros(n, n);
        let g = self.gamma_subset(mask);
        let keep = &eye - &g;
        Matrix::from_blocks(&[&[&eye, &zero], &[&g, &keep]])
    }

    /// Hamiltonian [[Ā+ρI, 0], [−(γ²−1)⁻¹I, −(Ā+ρI)ᵀ]] steering the
    /// inter-sample growth bound.
    pub fn hamiltonian(&self, rho: f64, gamma: f64) -> Result<Matrix, CertifyError> {
        if gamma <= 1.0 {
            return Err(CertifyError::InvalidGamma(gamma));
        }
        let two_n = 2 * self.n;
        let mut shifted = self.a_bar.clone();
        for i in 0..two_n {
            shifted[(i, i)] += rho;
        }
        let h21 = Matrix::identity(two_n).scale(-1.0 / (gamma * gamma - 1.0));
        let h22 = -&shifted.transpose();
        let zero = Matrix::zeros(two_n, two_n);
        Ok(Matrix::from_blocks(&[&[&shifted, &zero], &[&h21, &h22]]))
    }

    /// Flow F(τ) = e^{−Hτ} of the Hamiltonian, partitioned 2x2 by callers.
    pub fn flow(&self, tau: f64, rho: f64, gamma: f64) -> Result<Matrix, CertifyError> {
        let h = self.hamiltonian(rho, gamma)?;
        Ok(expm(&h, -tau).expect("hamiltonian is square by construction"))
    }
}

/// Shared shape of the sampled-data LMIs: [[e^{−2ρT}P + w·Q, JᵀE P], [⋆, P]]
/// with E = e^{ĀᵀT} and w the signed multiplier.
fn sampled_lmi(
    cl: &ClosedLoopMatrices,
    p: &Matrix,
    rho: f64,
    period: f64,
    weighted_q: &Matrix,
    j: &Matrix,
) -> Matrix {
    let decay = (-2.0 * rho * period).exp();
    let top_left = &p.scale(decay) + weighted_q;
    let e_t = cl.exp_a_bar(period).transpose();
    let top_right = &(&j.transpose() * &e_t) * p;
    let bottom_left = top_right.transpose();
    Matrix::from_blocks(&[&[&top_left, &top_right], &[&bottom_left, p]])
}

/// The two block matrices of the centralized-trigger certificate.
pub fn petc_certificate_matrices(
    bundle: &CertificateBundle,
    sigma: f64,
    cl: &ClosedLoopMatrices,
) -> [Matrix; 2] {
    let q = cl.q_sigma(sigma);
    [
        sampled_lmi(cl, &bundle.p, bundle.rho, bundle.period, &q.scale(-bundle.mu1), &cl.j1),
        sampled_lmi(cl, &bundle.p, bundle.rho, bundle.period, &q.scale(bundle.mu2), &cl.j2),
    ]
}

/// Verifies the centralized-trigger certificate: true iff P is positive
/// definite and both block matrices are positive definite. Rejections are
/// results, not errors.
pub fn check_petc_certificate(
    bundle: &CertificateBundle,
    sigma: f64,
    cl: &ClosedLoopMatrices,
) -> bool {
    if bundle.mu1 < 0.0 || bundle.mu2 < 0.0 || !is_positive_definite(&bundle.p, PD_TOL) {
        return false;
    }
    petc_certificate_matrices(bundle, sigma, cl)
        .iter()
        .all(|m| is_positive_definite(m, PD_TOL))
}

/// The three block matrices of the decentralized synchronous certificate.
/// The first two coincide with the centralized pair; the third reuses the
/// refresh map of the first with its own multiplier.
pub fn psdetc_certificate_matrices(
    bundle: &CertificateBundle,
    sigma: f64,
    cl: &ClosedLoopMatrices,
) -> [Matrix; 3] {
    let q = cl.q_sigma(sigma);
    [
        sampled_lmi(cl, &bundle.p, bundle.rho, bundle.period, &q.scale(-bundle.mu1), &cl.j1),
        sampled_lmi(cl, &bundle.p, bundle.rho, bundle.period, &q.scale(bundle.mu2), &cl.j2),
        sampled_lmi(cl, &bundle.p, bundle.rho, bundle.period, &q.scale(bundle.mu3), &cl.j1),
    ]
}

/// Verifies the decentralized synchronous certificate (three LMIs).
pub fn check_psdetc_certificate(
    bundle: &CertificateBundle,
    sigma: f64,
    cl: &ClosedLoopMatrices,
) -> bool {
    if bundle.mu1 < 0.0
        || bundle.mu2 < 0.0
        || bundle.mu3 < 0.0
        || !is_positive_definite(&bundle.p, PD_TOL)
    {
        return false;
    }
    psdetc_certificate_matrices(bundle, sigma, cl)
        .iter()
        .all(|m| is_positive_definite(m, PD_TOL))
}

/// Pieces of the asynchronous certificate that do not depend on the node
/// subset: the partitioned flow at T and the factor S̄ with
/// S̄S̄ᵀ = −F₁₁⁻¹(T)F₁₂(T).
struct FlowPieces {
    f11_inv: Matrix,
    f21_f11_inv: Matrix,
    s_bar: Matrix,
}

fn flow_pieces(
    bundle: &CertificateBundle,
    cl: &ClosedLoopMatrices,
) -> Result<FlowPieces, CertifyError> {
    let two_n = 2 * cl.n;
    // The certificate assumes F11 invertible on all of [0, T]; probe a
    // fixed grid and surface the violation as an error, not a verdict.
    let grid_steps = 100;
    for k in 0..=grid_steps {
        let tau = bundle.period * k as f64 / grid_steps as f64;
        let f = cl.flow(tau, bundle.rho, bundle.gamma)?;
        let f11 = f.submatrix(0, 0, two_n, two_n);
        if inverse(&f11).is_err() {
            return Err(CertifyError::FlowNotInvertible { tau });
        }
    }
    let f = cl.flow(bundle.period, bundle.rho, bundle.gamma)?;
    let f11 = f.submatrix(0, 0, two_n, two_n);
    let f12 = f.submatrix(0, two_n, two_n, two_n);
    let f21 = f.submatrix(two_n, 0, two_n, two_n);
    let f11_inv = inverse(&f11).expect("grid check covered tau = T");
    let hold_gram = -&(&f11_inv * &f12);
    let psd_tol = 1e-8 * (1.0 + hold_gram.norm_fro());
    let s_bar = psd_factor(&hold_gram, psd_tol).map_err(CertifyError::HoldFactorNotPsd)?;
    Ok(FlowPieces { f21_f11_inv: &f21 * &f11_inv, f11_inv, s_bar })
}

/// Assembles the bilinear certificate matrix for one subset mask.
fn padetc_subset_matrix(
    bundle: &CertificateBundle,
    cl: &ClosedLoopMatrices,
    pieces: &FlowPieces,
    mask: u32,
) -> Matrix {
    let n = cl.n;
    let two_n = 2 * n;
    let p = &bundle.p;
    let f11_inv_t = pieces.f11_inv.transpose();
    let f_tilde = &(&(&f11_inv_t * p) * &pieces.f11_inv) + &pieces.f21_f11_inv;

    let j_j = cl.j_subset(mask);
    let gamma_j = cl.gamma_subset(mask);
    let theta = Matrix::column(&bundle.omega);
    let delta_bar = Matrix::from_blocks(&[&[&Matrix::zeros(n, 1)], &[&(&gamma_j * &theta)]]);

    // H̃₁ = −β₁I + β₂JᵀJ − Σ_{i∈J} εᵢQᵢ + Σ_{i∉J} εᵢQᵢ
    let mut h1 = &Matrix::identity(two_n).scale(-bundle.beta1)
        + &(&j_j.transpose() * &j_j).scale(bundle.beta2);
    // H̃₂ = β₁ϱ² − β₂·Δ̄ᵀΔ̄ + Σ_{i∈J} εᵢωᵢ² − Σ_{i∉J} εᵢωᵢ²
    let delta_sq: f64 = delta_bar.as_slice().iter().map(|x| x * x).sum();
    let mut h2 = bundle.beta1 * bundle.varrho * bundle.varrho - bundle.beta2 * delta_sq;
    for i in 0..n {
        let eps = bundle.epsilon_for(mask, i);
        let in_subset = mask & (1 << i) != 0;
        let signed = if in_subset { -eps } else { eps };
        h1 = &h1 + &cl.q_single(i).scale(signed);
        let w2 = bundle.omega[i] * bundle.omega[i];
        h2 += if in_subset { eps * w2 } else { -eps * w2 };
    }

    let b11 = Matrix::identity(two_n).scale(bundle.beta2);
    let b12 = &(&f11_inv_t * p) * &pieces.s_bar;
    let b14 = j_j.scale(-bundle.beta2);
    let b22 = &Matrix::identity(two_n) - &(&(&pieces.s_bar.transpose() * p) * &pieces.s_bar);
    let b44 = p + &h1;
    let b55 = Matrix::from_rows(&[&[h2]]);

    let z = Matrix::zeros(two_n, two_n);
    let zc = Matrix::zeros(two_n, 1);
    let zc_t = zc.transpose();
    let b12_t = b12.transpose();
    let f_tilde_t = f_tilde.transpose();
    let b14_t = b14.transpose();

    Matrix::from_blocks(&[
        &[&b11, &b12, &f_tilde, &b14, &zc],
        &[&b12_t, &b22, &z, &z, &zc],
        &[&f_tilde_t, &z, &f_tilde, &z, &zc],
        &[&b14_t, &z, &z, &b44, &zc],
        &[&zc_t, &zc_t, &zc_t, &zc_t, &b55],
    ])
}

/// The per-subset matrices of the asynchronous certificate, in mask order.
pub fn padetc_certificate_matrices(
    bundle: &CertificateBundle,
    cl: &ClosedLoopMatrices,
    n: usize,
) -> Result<Vec<Matrix>, CertifyError> {
    assert_eq!(n, cl.n, "subset count must match the closed-loop dimension");
    assert_eq!(bundle.omega.len(), n, "omega must have one weight per node");
    let pieces = flow_pieces(bundle, cl)?;
    Ok((0u32..(1 << n)).map(|mask| padetc_subset_matrix(bundle, cl, &pieces, mask)).collect())
}

/// Verifies the asynchronous certificate: the block matrix must be
/// positive definite for every one of the 2ⁿ node subsets.
///
/// Errors signal violated assumptions (singular flow block, factor not
/// PSD), not certificate rejection.
pub fn check_padetc_certificate(
    bundle: &CertificateBundle,
    cl: &ClosedLoopMatrices,
    n: usize,
) -> Result<bool, CertifyError> {
    if bundle.beta1 <= 0.0
        || bundle.beta2 <= 0.0
        || bundle.varrho <= 0.0
        || !is_positive_definite(&bundle.p, PD_TOL)
    {
        return Ok(false);
    }
    let matrices = padetc_certificate_matrices(bundle, cl, n)?;
    Ok(matrices.iter().all(|m| is_positive_definite(m, PD_TOL)))
}
