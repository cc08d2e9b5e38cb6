//! Dense state-vector and density-matrix kernel.
//!
//! Position 0 is the most significant bit of an amplitude index, so the
//! tensor order `q_0 ⊗ q_1 ⊗ …` reads left to right. Operators are applied by
//! strided iteration over the amplitudes; no 2ⁿ×2ⁿ matrix is ever built.

use num_complex::Complex;
use thiserror::Error;

use crate::ir::{Angle, Basis};
use crate::scalar::Real;

/// A single-qubit ket or bra as two components.
pub type Ket<T> = [Complex<T>; 2];

/// Row-major 2×2 complex matrix.
pub type Mat2<T> = [[Complex<T>; 2]; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("position {position} out of range for a {n}-qubit state")]
    PositionOutOfRange { position: usize, n: usize },
    #[error("two-qubit operator needs distinct positions, got {0} twice")]
    SamePosition(usize),
    #[error("projection bra is not unit norm (norm² = {0})")]
    NonUnitBra(f64),
    #[error("basis vectors are not orthonormal")]
    NotOrthonormal,
    #[error("amplitude count {0} is not a power of two")]
    InvalidLength(usize),
    #[error("state contains a non-finite amplitude")]
    NonFinite,
    #[error("cannot remove a qubit from a 0-qubit state")]
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Z,
}

fn c<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::from_f64_lossy(re), T::from_f64_lossy(im))
}

pub fn hadamard<T: Real>() -> Mat2<T> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]
}

/// `diag(1, e^{iθ})`.
pub fn rz<T: Real>(theta: f64) -> Mat2<T> {
    [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(theta.cos(), theta.sin())]]
}

/// `[[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]`.
pub fn ry<T: Real>(theta: f64) -> Mat2<T> {
    let (s, co) = (theta / 2.0).sin_cos();
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}

pub fn pauli_matrix<T: Real>(p: Pauli) -> Mat2<T> {
    match p {
        Pauli::X => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        Pauli::Z => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
    }
}

pub fn mat_mul<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    let mut out = [[Complex::new(T::zero(), T::zero()); 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (col, cell) in row.iter_mut().enumerate() {
            *cell = a[r][0] * b[0][col] + a[r][1] * b[1][col];
        }
    }
    out
}

pub fn ket_zero<T: Real>() -> Ket<T> {
    [c(1.0, 0.0), c(0.0, 0.0)]
}

pub fn ket_one<T: Real>() -> Ket<T> {
    [c(0.0, 0.0), c(1.0, 0.0)]
}

pub fn ket_plus<T: Real>() -> Ket<T> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [c(h, 0.0), c(h, 0.0)]
}

pub fn ket_minus<T: Real>() -> Ket<T> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [c(h, 0.0), c(-h, 0.0)]
}

/// `|±_α⟩ = (|0⟩ ± e^{iα}|1⟩)/√2`.
pub fn plane_kets<T: Real>(alpha: Angle) -> (Ket<T>, Ket<T>) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (s, co) = alpha.radians().sin_cos();
    ([c(h, 0.0), c(h * co, h * s)], [c(h, 0.0), c(-h * co, -h * s)])
}

/// Conjugate transpose of a ket.
pub fn bra<T: Real>(ket: &Ket<T>) -> Ket<T> {
    [ket[0].conj(), ket[1].conj()]
}

/// Bras of `|+_α⟩` and `|-_α⟩`, outcome 0 first.
pub fn measurement_bras<T: Real>(alpha: Angle) -> (Ket<T>, Ket<T>) {
    let (p, m) = plane_kets(alpha);
    (bra(&p), bra(&m))
}

/// Kets of a read-out basis, outcome 0 first.
pub fn basis_vectors<T: Real>(basis: &Basis) -> Result<(Ket<T>, Ket<T>), KernelError> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Ok(match basis {
        Basis::X => (ket_plus(), ket_minus()),
        Basis::Y => ([c(h, 0.0), c(0.0, h)], [c(h, 0.0), c(0.0, -h)]),
        Basis::Z => (ket_zero(), ket_one()),
        Basis::FromAngle(a) => plane_kets(*a),
        Basis::FromTuples(a, b) => {
            if !basis.is_orthonormal() {
                return Err(KernelError::NotOrthonormal);
            }
            let conv = |z: num_complex::Complex64| c::<T>(z.re, z.im);
            ([conv(a[0]), conv(a[1])], [conv(b[0]), conv(b[1])])
        }
    })
}

#[inline]
fn insert_bit(k: usize, low_bits: usize, bit: usize) -> usize {
    let low = k & ((1usize << low_bits) - 1);
    let high = k >> low_bits;
    (high << (low_bits + 1)) | (bit << low_bits) | low
}

/// Pure state over `n` qubits, `2ⁿ` amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T> {
    n: usize,
    amps: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    /// The 0-qubit state `[1]`.
    pub fn unit() -> Self {
        StateVector {
            n: 0,
            amps: vec![Complex::new(T::one(), T::zero())],
        }
    }

    /// `|0…0⟩` on `n` qubits.
    pub fn zeros(n: usize) -> Self {
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << n];
        amps[0] = Complex::new(T::one(), T::zero());
        StateVector { n, amps }
    }

    /// Tensor product of single-qubit kets; `kets[0]` is position 0.
    pub fn product(kets: &[Ket<T>]) -> Self {
        kets.iter().fold(Self::unit(), |acc, k| acc.push_qubit(k))
    }

    pub fn from_amplitudes(amps: Vec<Complex<T>>) -> Result<Self, KernelError> {
        if !amps.len().is_power_of_two() {
            return Err(KernelError::InvalidLength(amps.len()));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(KernelError::NonFinite);
        }
        Ok(StateVector {
            n: amps.len().trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    /// Appends a qubit at the last position.
    pub fn push_qubit(&self, ket: &Ket<T>) -> Self {
        let mut amps = Vec::with_capacity(self.amps.len() * 2);
        for a in &self.amps {
            amps.push(*a * ket[0]);
            amps.push(*a * ket[1]);
        }
        StateVector { n: self.n + 1, amps }
    }

    pub fn kron(&self, other: &StateVector<T>) -> Self {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(*a * *b);
            }
        }
        StateVector {
            n: self.n + other.n,
            amps,
        }
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    /// Scales to unit norm; a zero vector is left untouched.
    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > T::zero() {
            let inv = T::one() / n;
            for a in &mut self.amps {
                *a = *a * inv;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for a in &mut self.amps {
            *a = *a * factor;
        }
    }

    fn check(&self, position: usize) -> Result<usize, KernelError> {
        if position >= self.n {
            return Err(KernelError::PositionOutOfRange { position, n: self.n });
        }
        Ok(1usize << (self.n - 1 - position))
    }

    /// Controlled-Z: negates every amplitude whose bits at `i` and `j` are both 1.
    pub fn apply_cz(&mut self, i: usize, j: usize) -> Result<(), KernelError> {
        let mi = self.check(i)?;
        let mj = self.check(j)?;
        if i == j {
            return Err(KernelError::SamePosition(i));
        }
        let both = mi | mj;
        for (idx, a) in self.amps.iter_mut().enumerate() {
            if idx & both == both {
                *a = -*a;
            }
        }
        Ok(())
    }

    /// Controlled-X with control `c` and target `t`.
    pub fn apply_cx(&mut self, control: usize, target: usize) -> Result<(), KernelError> {
        let mc = self.check(control)?;
        let mt = self.check(target)?;
        if control == target {
            return Err(KernelError::SamePosition(control));
        }
        for idx in 0..self.amps.len() {
            if idx & mc != 0 && idx & mt == 0 {
                self.amps.swap(idx, idx | mt);
            }
        }
        Ok(())
    }

    pub fn apply_pauli(&mut self, p: Pauli, i: usize) -> Result<(), KernelError> {
        let m = self.check(i)?;
        match p {
            Pauli::X => {
                for idx in 0..self.amps.len() {
                    if idx & m == 0 {
                        self.amps.swap(idx, idx | m);
                    }
                }
            }
            Pauli::Z => {
                for (idx, a) in self.amps.iter_mut().enumerate() {
                    if idx & m != 0 {
                        *a = -*a;
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies an arbitrary 2×2 operator at position `i`.
    pub fn apply_single(&mut self, u: &Mat2<T>, i: usize) -> Result<(), KernelError> {
        let m = self.check(i)?;
        for idx in 0..self.amps.len() {
            if idx & m == 0 {
                let a0 = self.amps[idx];
                let a1 = self.amps[idx | m];
                self.amps[idx] = u[0][0] * a0 + u[0][1] * a1;
                self.amps[idx | m] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
        Ok(())
    }

    /// Applies `⟨bra|` at position `i`, removing that qubit. Returns the
    /// unnormalized `(n-1)`-qubit remainder and its squared norm.
    pub fn project_and_remove(&self, bra: &Ket<T>, i: usize) -> Result<(StateVector<T>, T), KernelError> {
        check_bra(bra)?;
        self.project_unchecked(bra, i)
    }

    pub(crate) fn project_unchecked(&self, bra: &Ket<T>, i: usize) -> Result<(StateVector<T>, T), KernelError> {
        if self.n == 0 {
            return Err(KernelError::Empty);
        }
        self.check(i)?;
        let low_bits = self.n - 1 - i;
        let half = self.amps.len() / 2;
        let mut amps = Vec::with_capacity(half);
        let mut weight = T::zero();
        for k in 0..half {
            let a = bra[0] * self.amps[insert_bit(k, low_bits, 0)] + bra[1] * self.amps[insert_bit(k, low_bits, 1)];
            weight = weight + a.norm_sqr();
            amps.push(a);
        }
        Ok((StateVector { n: self.n - 1, amps }, weight))
    }

    /// Non-destructive computational-basis projection: zeroes the half
    /// inconsistent with `bit` and returns the retained squared norm.
    pub fn collapse(&mut self, i: usize, bit: u8) -> Result<T, KernelError> {
        let m = self.check(i)?;
        let mut weight = T::zero();
        for (idx, a) in self.amps.iter_mut().enumerate() {
            if ((idx & m != 0) as u8) == bit {
                weight = weight + a.norm_sqr();
            } else {
                *a = Complex::new(T::zero(), T::zero());
            }
        }
        Ok(weight)
    }

    /// Probability mass on bit value 1 at position `i`.
    pub fn prob_one(&self, i: usize) -> Result<T, KernelError> {
        let m = self.check(i)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(idx, _)| idx & m != 0)
            .fold(T::zero(), |acc, (_, a)| acc + a.norm_sqr()))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector<T>) -> Complex<T> {
        self.amps
            .iter()
            .zip(&other.amps)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * *b)
    }

    /// `|⟨a|b⟩|² / (‖a‖²‖b‖²)`: 1 iff equal up to a global phase and scale.
    pub fn fidelity(&self, other: &StateVector<T>) -> T {
        if self.n != other.n {
            return T::zero();
        }
        let d = self.norm_sqr() * other.norm_sqr();
        if d == T::zero() {
            return T::zero();
        }
        self.inner(other).norm_sqr() / d
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

fn check_bra<T: Real>(bra: &Ket<T>) -> Result<(), KernelError> {
    let n = (bra[0].norm_sqr() + bra[1].norm_sqr()).to_f64_lossy();
    if (n - 1.0).abs() > 1e-9 {
        return Err(KernelError::NonUnitBra(n));
    }
    Ok(())
}

/// Density operator over `n` qubits, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        let dim = 1usize << n;
        DensityMatrix {
            n,
            data: vec![Complex::new(T::zero(), T::zero()); dim * dim],
        }
    }

    pub fn from_pure(psi: &StateVector<T>) -> Self {
        let mut rho = Self::zeros(psi.n_qubits());
        rho.accumulate(psi);
        rho
    }

    /// Adds `|ψ⟩⟨ψ|` for an unnormalized `ψ` (its norm² is the weight).
    pub fn accumulate(&mut self, psi: &StateVector<T>) {
        assert_eq!(psi.n_qubits(), self.n, "accumulate: qubit count mismatch");
        let dim = self.dim();
        let a = psi.amplitudes();
        for (row, ar) in self.data.chunks_mut(dim).zip(a) {
            for (x, ac) in row.iter_mut().zip(a) {
                *x = *x + *ar * ac.conj();
            }
        }
    }

    pub fn add(&mut self, other: &DensityMatrix<T>) {
        assert_eq!(self.n, other.n, "add: qubit count mismatch");
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x = *x + *y;
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn get(&self, r: usize, col: usize) -> Complex<T> {
        self.data[r * self.dim() + col]
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).fold(T::zero(), |acc, i| acc + self.get(i, i).re)
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        let dim = self.dim();
        (0..dim).all(|r| (0..dim).all(|col| (self.get(r, col) - self.get(col, r).conj()).norm() <= tol))
    }

    /// `⟨v|ρ|v⟩` for an arbitrary vector `v`.
    pub fn quadratic_form(&self, v: &StateVector<T>) -> Complex<T> {
        let dim = self.dim();
        let a = v.amplitudes();
        let mut acc = Complex::new(T::zero(), T::zero());
        for r in 0..dim {
            for col in 0..dim {
                acc = acc + a[r].conj() * self.get(r, col) * a[col];
            }
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix<T>) -> T {
        if self.n != other.n {
            return T::infinity();
        }
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm()))
    }

    /// `ρ ↦ K ρ K†` with `K = ⟨bra|` at position `i`; returns the reduced
    /// operator and its trace.
    #[allow(clippy::needless_range_loop)]
    pub fn project_and_remove(&self, bra: &Ket<T>, i: usize) -> Result<(DensityMatrix<T>, T), KernelError> {
        check_bra(bra)?;
        if self.n == 0 {
            return Err(KernelError::Empty);
        }
        if i >= self.n {
            return Err(KernelError::PositionOutOfRange { position: i, n: self.n });
        }
        let low_bits = self.n - 1 - i;
        let mut out = DensityMatrix::zeros(self.n - 1);
        let dim = out.dim();
        let bconj = [bra[0].conj(), bra[1].conj()];
        for r in 0..dim {
            for col in 0..dim {
                let mut acc = Complex::new(T::zero(), T::zero());
                for a in 0..2 {
                    for b in 0..2 {
                        acc = acc
                            + bra[a] * self.get(insert_bit(r, low_bits, a), insert_bit(col, low_bits, b)) * bconj[b];
                    }
                }
                out.data[r * dim + col] = acc;
            }
        }
        let tr = out.trace();
        Ok((out, tr))
    }

    /// Non-destructive measurement in the basis `(k0, k1)` at position `i`:
    /// `Σ_k |k⟩⟨k| ρ |k⟩⟨k|`.
    pub fn dephase(&self, kets: (&Ket<T>, &Ket<T>), i: usize) -> Result<DensityMatrix<T>, KernelError> {
        if i >= self.n {
            return Err(KernelError::PositionOutOfRange { position: i, n: self.n });
        }
        let mut out = DensityMatrix::zeros(self.n);
        for k in [kets.0, kets.1] {
            let mut proj = [[Complex::new(T::zero(), T::zero()); 2]; 2];
            for (r, row) in proj.iter_mut().enumerate() {
                for (col, cell) in row.iter_mut().enumerate() {
                    *cell = k[r] * k[col].conj();
                }
            }
            let term = self.sandwich(&proj, i);
            out.add(&term);
        }
        Ok(out)
    }

    /// `P ρ P†` with a single-site operator `P` at position `i`.
    fn sandwich(&self, p: &Mat2<T>, i: usize) -> DensityMatrix<T> {
        let dim = self.dim();
        let m = 1usize << (self.n - 1 - i);
        let bit = |x: usize| usize::from(x & m != 0);
        let mut out = DensityMatrix::zeros(self.n);
        for r in 0..dim {
            for col in 0..dim {
                let mut acc = Complex::new(T::zero(), T::zero());
                for a in 0..2 {
                    for b in 0..2 {
                        let rr = (r & !m) | (a * m);
                        let cc = (col & !m) | (b * m);
                        acc = acc + p[bit(r)][a] * self.get(rr, cc) * p[bit(col)][b].conj();
                    }
                }
                out.data[r * dim + col] = acc;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    type Sv = StateVector<f64>;

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> Sv {
        let amps = (0..1 << n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let mut s = Sv::from_amplitudes(amps).unwrap();
        s.normalize();
        s
    }

    fn close(a: &Sv, b: &Sv, tol: f64) -> bool {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn cz_on_plus_plus() {
        let mut s = Sv::product(&[ket_plus(), ket_plus()]);
        s.apply_cz(0, 1).unwrap();
        let want: Vec<Complex64> = [0.5, 0.5, 0.5, -0.5].iter().map(|&x| Complex64::new(x, 0.0)).collect();
        assert!(close(&s, &Sv::from_amplitudes(want).unwrap(), 1e-12));
        let mut z = Sv::zeros(2);
        z.apply_cz(0, 1).unwrap();
        assert_eq!(z, Sv::zeros(2));
    }

    #[test]
    fn cz_is_symmetric_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s = random_state(3, &mut rng);
            let mut a = s.clone();
            a.apply_cz(0, 2).unwrap();
            let mut b = s.clone();
            b.apply_cz(2, 0).unwrap();
            assert_eq!(a, b);
            a.apply_cz(0, 2).unwrap();
            assert!(close(&a, &s, 1e-12));
        }
    }

    #[test]
    fn pauli_actions() {
        let mut s = Sv::product(&[ket_zero()]);
        s.apply_pauli(Pauli::X, 0).unwrap();
        assert_eq!(s, Sv::product(&[ket_one()]));
        let mut p = Sv::product(&[ket_plus()]);
        p.apply_pauli(Pauli::Z, 0).unwrap();
        assert!(close(&p, &Sv::product(&[ket_minus()]), 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let s = random_state(3, &mut rng);
            let mut t = s.clone();
            t.apply_pauli(Pauli::X, 1).unwrap();
            t.apply_pauli(Pauli::X, 1).unwrap();
            assert!(close(&t, &s, 1e-15));
        }
    }

    #[test]
    fn bit_convention_position_zero_is_msb() {
        let s = Sv::product(&[ket_one(), ket_zero()]);
        assert_eq!(s.amplitudes()[2], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn gates_preserve_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut s = random_state(4, &mut rng);
            s.apply_cz(1, 3).unwrap();
            s.apply_pauli(Pauli::X, 2).unwrap();
            s.apply_single(&hadamard(), 0).unwrap();
            s.apply_single(&ry(rng.random_range(0.0..6.0)), 1).unwrap();
            s.apply_single(&rz(rng.random_range(0.0..6.0)), 2).unwrap();
            s.apply_cx(3, 0).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_factorizes_product_states() {
        let (a, b) = (Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
        let phi = [Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(0.0, -FRAC_1_SQRT_2)];
        let s = Sv::product(&[[a, b], phi]);
        let (r, w) = s.project_and_remove(&bra(&ket_zero()), 0).unwrap();
        assert!((w - 0.36).abs() < 1e-12);
        let want = Sv::product(&[[phi[0] * a, phi[1] * a]]);
        assert!(close(&r, &want, 1e-12));

        let (r, w) = Sv::product(&[ket_plus()])
            .project_and_remove(&bra(&ket_plus()), 0)
            .unwrap();
        assert_eq!(r.n_qubits(), 0);
        assert!((w - 1.0).abs() < 1e-12);
        assert!((r.amplitudes()[0].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_weights_are_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let s = random_state(3, &mut rng);
            let alpha = Angle::new(rng.random_range(0.0..7.0));
            let (p, m) = measurement_bras::<f64>(alpha);
            let pos = rng.random_range(0..3);
            let (_, w0) = s.project_and_remove(&p, pos).unwrap();
            let (_, w1) = s.project_and_remove(&m, pos).unwrap();
            assert!((w0 + w1 - s.norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_rejects_bad_input() {
        let s = Sv::zeros(2);
        let bad = [Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!(matches!(s.project_and_remove(&bad, 0), Err(KernelError::NonUnitBra(_))));
        assert!(matches!(
            s.project_and_remove(&bra(&ket_zero()), 2),
            Err(KernelError::PositionOutOfRange { .. })
        ));
        assert!(matches!(
            Sv::zeros(2).clone().apply_cz(0, 0),
            Err(KernelError::SamePosition(0))
        ));
    }

    #[test]
    fn measurement_bras_basic_cases() {
        let (p, m) = measurement_bras::<f64>(Angle::ZERO);
        assert!((p[0] - ket_plus::<f64>()[0]).norm() < 1e-15 && (p[1] - ket_plus::<f64>()[1]).norm() < 1e-15);
        assert!((m[1] - ket_minus::<f64>()[1]).norm() < 1e-15);
        // |+_π⟩ = |−⟩
        let (p, _) = measurement_bras::<f64>(Angle::PI);
        assert!((p[1] - ket_minus::<f64>()[1]).norm() < 1e-15);
    }

    #[test]
    fn measurement_bras_resolve_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let (p, m) = plane_kets::<f64>(Angle::new(rng.random_range(0.0..2.0 * PI)));
            let ip = p[0].conj() * m[0] + p[1].conj() * m[1];
            assert!(ip.norm() < 1e-12);
            for r in 0..2 {
                for col in 0..2 {
                    let v = p[r] * p[col].conj() + m[r] * m[col].conj();
                    let want = if r == col { 1.0 } else { 0.0 };
                    assert!((v - Complex64::new(want, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn named_basis_vectors() {
        let (k0, k1) = basis_vectors::<f64>(&Basis::Z).unwrap();
        assert_eq!((k0, k1), (ket_zero(), ket_one()));
        let (k0, _) = basis_vectors::<f64>(&Basis::FromAngle(Angle::ZERO)).unwrap();
        assert!((k0[1] - ket_plus::<f64>()[1]).norm() < 1e-15);
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let (k0, k1) = basis_vectors::<f64>(&Basis::FromTuples([one, zero], [zero, one])).unwrap();
        assert_eq!((k0, k1), (ket_zero(), ket_one()));
        assert_eq!(
            basis_vectors::<f64>(&Basis::FromTuples([one, one], [one, one])),
            Err(KernelError::NotOrthonormal)
        );
    }

    #[test]
    fn density_projection_matches_pure_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let s = random_state(3, &mut rng);
            let (p, _) = measurement_bras::<f64>(Angle::new(rng.random_range(0.0..6.0)));
            let (r, w) = s.project_and_remove(&p, 1).unwrap();
            let (rho, tr) = DensityMatrix::from_pure(&s).project_and_remove(&p, 1).unwrap();
            assert!((w - tr).abs() < 1e-12);
            assert!(rho.max_abs_diff(&DensityMatrix::from_pure(&r)) < 1e-12);
        }
    }

    #[test]
    fn dephasing_plus_gives_half_identity() {
        let rho = DensityMatrix::from_pure(&Sv::product(&[ket_plus()]));
        let (k0, k1) = (ket_zero(), ket_one());
        let mixed = rho.dephase((&k0, &k1), 0).unwrap();
        assert!((mixed.get(0, 0).re - 0.5).abs() < 1e-12);
        assert!((mixed.get(1, 1).re - 0.5).abs() < 1e-12);
        assert!(mixed.get(0, 1).norm() < 1e-12);
        assert!(mixed.is_hermitian(1e-12));
    }

    #[test]
    fn runs_in_single_precision() {
        let mut s = StateVector::<f32>::product(&[ket_plus(), ket_plus()]);
        s.apply_cz(0, 1).unwrap();
        s.apply_single(&hadamard(), 1).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-6);
    }
}
