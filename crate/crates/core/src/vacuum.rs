//! Vacuum perturbations Q = P - P^- of the free Dirac sea on the lattice
//! spinor space: block structure, the operator constraint, charge and
//! current densities, the relative trace and the reduced BDF energy.
//!
//! Basis ordering: index 4 * mode + spinor component.

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};
use crate::lattice::{coulomb_inner, ChargeDensity, CurrentDensity, FourierField, MomentumLattice};
use crate::linalg;
use crate::spinor::{dirac_matrices, free_negative_projector, free_positive_projector, free_symbol, Mat4};

/// Per-mode free symbol data: |D(k)| and the two spectral projectors.
#[derive(Clone, Debug)]
pub struct FreeModes {
    pub energies: Vec<f64>,
    pub symbols: Vec<Mat4>,
    pub negative: Vec<Mat4>,
    pub positive: Vec<Mat4>,
}

impl FreeModes {
    pub fn new(lat: &MomentumLattice, mass: f64) -> Self {
        let mut out = FreeModes {
            energies: Vec::with_capacity(lat.num_modes()),
            symbols: Vec::with_capacity(lat.num_modes()),
            negative: Vec::with_capacity(lat.num_modes()),
            positive: Vec::with_capacity(lat.num_modes()),
        };
        for i in 0..lat.num_modes() {
            let sym = free_symbol(lat.momentum(i), mass);
            out.energies.push(sym.energy());
            out.symbols.push(sym.matrix);
            out.negative.push(free_negative_projector(&sym));
            out.positive.push(free_positive_projector(&sym));
        }
        out
    }
}

fn block_diagonal(blocks: &[Mat4]) -> Mat<c64> {
    let dim = 4 * blocks.len();
    let mut m = Mat::<c64>::zeros(dim, dim);
    for (a, b) in blocks.iter().enumerate() {
        for s in 0..4 {
            for t in 0..4 {
                m[(4 * a + s, 4 * a + t)] = b.0[s][t];
            }
        }
    }
    m
}

#[inline]
pub(crate) fn read_block(m: MatRef<'_, c64>, a: usize, b: usize) -> Mat4 {
    let mut blk = Mat4::zero();
    for s in 0..4 {
        for t in 0..4 {
            blk.0[s][t] = m[(4 * a + s, 4 * b + t)];
        }
    }
    blk
}

#[inline]
fn write_block(m: &mut Mat<c64>, a: usize, b: usize, blk: &Mat4) {
    for s in 0..4 {
        for t in 0..4 {
            m[(4 * a + s, 4 * b + t)] = blk.0[s][t];
        }
    }
}

/// Assembled free Dirac operator alpha.k + m beta on the lattice.
pub fn free_dirac_full(lat: &MomentumLattice, mass: f64) -> Mat<c64> {
    block_diagonal(&FreeModes::new(lat, mass).symbols)
}

/// Negative spectral projector P^- of the free Dirac operator on the lattice.
pub fn free_projector_full(lat: &MomentumLattice, mass: f64) -> Mat<c64> {
    block_diagonal(&FreeModes::new(lat, mass).negative)
}

pub fn free_positive_projector_full(lat: &MomentumLattice, mass: f64) -> Mat<c64> {
    block_diagonal(&FreeModes::new(lat, mass).positive)
}

/// Hermitian perturbation Q of the free vacuum at mass `mass`.
#[derive(Clone, Debug)]
pub struct VacuumState {
    q: Mat<c64>,
    mass: f64,
    lattice: MomentumLattice,
}

impl VacuumState {
    /// Wraps `q`, which must be Hermitian up to rounding; the stored matrix is
    /// the Hermitian part.
    pub fn new(q: Mat<c64>, lattice: MomentumLattice, mass: f64) -> Result<Self> {
        if q.nrows() != lattice.dim() || q.ncols() != lattice.dim() {
            return Err(Error::InvalidArgument(format!(
                "state is {}x{}, lattice dimension is {}",
                q.nrows(),
                q.ncols(),
                lattice.dim()
            )));
        }
        if !(mass > 0.0) {
            return Err(Error::InvalidArgument(format!("mass must be positive, got {mass}")));
        }
        let scale = linalg::max_abs(q.as_ref()).max(1.0);
        if linalg::hermitian_defect(q.as_ref()) > 1e-10 * scale {
            return Err(Error::InvalidArgument("state is not Hermitian".into()));
        }
        Ok(Self {
            q: linalg::hermitize(q.as_ref()),
            mass,
            lattice,
        })
    }

    pub fn zero(lattice: MomentumLattice, mass: f64) -> Self {
        let d = lattice.dim();
        Self {
            q: Mat::zeros(d, d),
            mass,
            lattice,
        }
    }

    /// Q = P - P^- for an orthogonal projector P.
    pub fn from_projector(p: &Mat<c64>, lattice: MomentumLattice, mass: f64) -> Result<Self> {
        let q = p - free_projector_full(&lattice, mass);
        Self::new(q, lattice, mass)
    }

    #[inline]
    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.q.as_ref()
    }

    #[inline]
    pub fn mass(&self) -> f64 {
        self.mass
    }

    #[inline]
    pub fn lattice(&self) -> &MomentumLattice {
        &self.lattice
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.q
    }

    /// Tr Q = Tr(Q^{++} + Q^{--}) on the lattice.
    pub fn charge(&self) -> f64 {
        linalg::trace(self.q.as_ref()).re
    }
}

/// The four blocks of Q relative to the free spectral projectors.
#[derive(Clone, Debug)]
pub struct BlockDecomposition {
    pub pp: Mat<c64>,
    pub mm: Mat<c64>,
    pub pm: Mat<c64>,
    pub mp: Mat<c64>,
}

impl BlockDecomposition {
    pub fn reassemble(&self) -> Mat<c64> {
        &(&self.pp + &self.mm) + &(&self.pm + &self.mp)
    }
}

/// Q^{++} = P^+ Q P^+, Q^{--} = P^- Q P^-, Q^{+-} = P^+ Q P^-, Q^{-+} = P^- Q P^+.
pub fn block_decompose(s: &VacuumState) -> BlockDecomposition {
    let lat = &s.lattice;
    let free = FreeModes::new(lat, s.mass);
    let d = lat.dim();
    let mut out = BlockDecomposition {
        pp: Mat::zeros(d, d),
        mm: Mat::zeros(d, d),
        pm: Mat::zeros(d, d),
        mp: Mat::zeros(d, d),
    };
    for a in 0..lat.num_modes() {
        for b in 0..lat.num_modes() {
            let blk = read_block(s.q.as_ref(), a, b);
            if blk.max_abs() == 0.0 {
                continue;
            }
            let (pa, ma) = (free.positive[a], free.negative[a]);
            let (pb, mb) = (free.positive[b], free.negative[b]);
            write_block(&mut out.pp, a, b, &(pa * blk * pb));
            write_block(&mut out.mm, a, b, &(ma * blk * mb));
            write_block(&mut out.pm, a, b, &(pa * blk * mb));
            write_block(&mut out.mp, a, b, &(ma * blk * pb));
        }
    }
    out
}

/// Smallest eigenvalue of Q^{++} - Q^{--} - Q^2; nonnegative exactly when
/// -P^- <= Q <= P^+.
pub fn constraint_margin(s: &VacuumState) -> Result<f64> {
    let blocks = block_decompose(s);
    let q2 = &s.q * &s.q;
    let m = &(&blocks.pp - &blocks.mm) - &q2;
    let ev = linalg::eigvalsh(linalg::hermitize(m.as_ref()).as_ref())?;
    Ok(ev.first().copied().unwrap_or(0.0))
}

pub fn check_constraint(s: &VacuumState, tol: f64) -> bool {
    constraint_margin(s).map(|m| m >= -tol).unwrap_or(false)
}

/// rho_q = L^-3 sum_k Tr_{C^4} M_{(k+q), k} for any operator M on the lattice.
pub fn operator_density(m: MatRef<'_, c64>, lat: &MomentumLattice) -> ChargeDensity {
    let params = lat.params();
    let mut rho = FourierField::zeros(params);
    let inv_vol = 1.0 / params.volume();
    for a in 0..lat.num_modes() {
        let na = lat.mode(a);
        for b in 0..lat.num_modes() {
            let nb = lat.mode(b);
            let q = [na[0] - nb[0], na[1] - nb[1], na[2] - nb[2]];
            let mut tr = c64::new(0.0, 0.0);
            for s in 0..4 {
                tr += m[(4 * a + s, 4 * b + s)];
            }
            if tr.re == 0.0 && tr.im == 0.0 {
                continue;
            }
            let i = rho.index(q).expect("difference momentum on grid");
            rho.coeffs_mut()[i] += tr * inv_vol;
        }
    }
    rho
}

/// j_q = L^-3 sum_k Tr_{C^4} alpha M_{(k+q), k}.
pub fn operator_current(m: MatRef<'_, c64>, lat: &MomentumLattice) -> CurrentDensity {
    let params = lat.params();
    let alpha = dirac_matrices().alpha;
    let mut j = CurrentDensity::zeros(params);
    let inv_vol = 1.0 / params.volume();
    for a in 0..lat.num_modes() {
        let na = lat.mode(a);
        for b in 0..lat.num_modes() {
            let nb = lat.mode(b);
            let blk = read_block(m, a, b);
            if blk.max_abs() == 0.0 {
                continue;
            }
            let q = [na[0] - nb[0], na[1] - nb[1], na[2] - nb[2]];
            for (c, al) in alpha.iter().enumerate() {
                let tr = (*al * blk).trace();
                let field = &mut j.components[c];
                let i = field.index(q).expect("difference momentum on grid");
                field.coeffs_mut()[i] += tr * inv_vol;
            }
        }
    }
    j
}

pub fn density(s: &VacuumState) -> ChargeDensity {
    operator_density(s.q.as_ref(), &s.lattice)
}

pub fn current(s: &VacuumState) -> CurrentDensity {
    operator_current(s.q.as_ref(), &s.lattice)
}

/// Tr |D_0| (Q^{++} - Q^{--}). Only the mode-diagonal blocks contribute
/// because |D_0| and P^{+-} are block diagonal.
pub fn relative_trace(s: &VacuumState) -> f64 {
    let free = FreeModes::new(&s.lattice, s.mass);
    let mut acc = 0.0;
    for a in 0..s.lattice.num_modes() {
        let blk = read_block(s.q.as_ref(), a, a);
        let pp = free.positive[a] * blk * free.positive[a];
        let mm = free.negative[a] * blk * free.negative[a];
        acc += free.energies[a] * (pp.trace() - mm.trace()).re;
    }
    acc
}

/// Reduced BDF energy Tr|D_0|(Q^{++} - Q^{--}) - alpha D(rho_Q, nu) + alpha/2 D(rho_Q, rho_Q).
pub fn bdf_energy(s: &VacuumState, nu: &ChargeDensity, alpha: f64) -> f64 {
    let rho = density(s);
    bdf_energy_with_density(s, &rho, nu, alpha)
}

pub(crate) fn bdf_energy_with_density(s: &VacuumState, rho: &ChargeDensity, nu: &ChargeDensity, alpha: f64) -> f64 {
    relative_trace(s) - alpha * coulomb_inner(rho, nu) + 0.5 * alpha * coulomb_inner(rho, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use faer::Side;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn small() -> MomentumLattice {
        build_lattice(2.0 * PI, 1, 1.2).unwrap()
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> Mat<c64> {
        let a = Mat::from_fn(n, n, |_, _| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        linalg::hermitize(a.as_ref())
    }

    fn random_projector(n: usize, rng: &mut ChaCha8Rng) -> Mat<c64> {
        let h = random_hermitian(n, rng);
        let evd = h.self_adjoint_eigen(Side::Lower).unwrap();
        let rank = rng.gen_range(0..=n);
        linalg::column_projector(evd.U(), 0, rank)
    }

    #[test]
    fn rest_frame_projector() {
        let lat = build_lattice(2.0 * PI, 1, 0.5).unwrap();
        let p = free_projector_full(&lat, 1.0);
        let expect = Mat::from_fn(4, 4, |i, j| c64::new(if i == j && i >= 2 { 1.0 } else { 0.0 }, 0.0));
        assert_eq!(p, expect);
    }

    #[test]
    fn full_projector_is_idempotent_and_commutes() {
        let lat = small();
        let p = free_projector_full(&lat, 1.0);
        let d = free_dirac_full(&lat, 1.0);
        assert!(linalg::max_abs((&p * &p - &p).as_ref()) < 1e-14);
        assert!((linalg::trace(p.as_ref()).re - 2.0 * lat.num_modes() as f64).abs() < 1e-12);
        assert!(linalg::max_abs((&p * &d - &d * &p).as_ref()) < 1e-14);
    }

    #[test]
    fn blocks_of_zero_and_positive_projector() {
        let lat = small();
        let z = block_decompose(&VacuumState::zero(lat.clone(), 1.0));
        assert_eq!(linalg::max_abs(z.reassemble().as_ref()), 0.0);
        let pp = free_positive_projector_full(&lat, 1.0);
        let s = VacuumState::new(pp.clone(), lat, 1.0).unwrap();
        let b = block_decompose(&s);
        assert!(linalg::max_abs((&b.pp - &pp).as_ref()) < 1e-14);
        assert!(linalg::max_abs(b.mm.as_ref()) < 1e-14);
        assert!(linalg::max_abs(b.pm.as_ref()) < 1e-14);
        assert!(linalg::max_abs(b.mp.as_ref()) < 1e-14);
    }

    #[test]
    fn random_reassembly() {
        let lat = small();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_hermitian(lat.dim(), &mut rng);
        let s = VacuumState::new(q.clone(), lat, 1.0).unwrap();
        let b = block_decompose(&s);
        assert!(linalg::max_abs((b.reassemble() - q).as_ref()) < 1e-13);
        assert!(linalg::max_abs((b.pm.adjoint().to_owned() - &b.mp).as_ref()) < 1e-13);
    }

    #[test]
    fn constraint_cases() {
        let lat = small();
        assert!(check_constraint(&VacuumState::zero(lat.clone(), 1.0), 1e-12));
        let pp = free_positive_projector_full(&lat, 1.0);
        let twice = VacuumState::new(faer::Scale(c64::new(2.0, 0.0)) * &pp, lat.clone(), 1.0).unwrap();
        assert!(!check_constraint(&twice, 1e-8));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let p = random_projector(lat.dim(), &mut rng);
            let s = VacuumState::from_projector(&p, lat.clone(), 1.0).unwrap();
            assert!(check_constraint(&s, 1e-10));
        }
    }

    #[test]
    fn densities_of_zero_vanish() {
        let lat = small();
        let s = VacuumState::zero(lat, 1.0);
        assert!(density(&s).is_zero());
        assert_eq!(current(&s).max_abs(), 0.0);
    }

    #[test]
    fn half_filled_reference_has_no_charge_or_current() {
        let lat = build_lattice(2.0 * PI, 2, 2.3).unwrap();
        let d = lat.dim();
        let half = Mat::<c64>::from_fn(d, d, |i, j| c64::new(if i == j { 0.5 } else { 0.0 }, 0.0));
        let m = free_projector_full(&lat, 1.0) - half;
        let free = FreeModes::new(&lat, 1.0);
        let alpha = dirac_matrices().alpha;
        for a in 0..lat.num_modes() {
            let blk = free.negative[a] - Mat4::identity().scale_re(0.5);
            assert!(blk.trace().norm() < 1e-15);
            // the alpha trace at a single mode is -2 k_j / E_k; only the sum
            // over the symmetric mode set cancels
            let k = lat.momentum(a);
            for c in 0..3 {
                let t = (alpha[c] * blk).trace();
                assert!((t.re + 2.0 * k[c] / free.energies[a]).abs() < 1e-14);
            }
        }
        assert!(operator_density(m.as_ref(), &lat).max_abs() < 1e-15);
        assert!(operator_current(m.as_ref(), &lat).max_abs() < 1e-15);
    }

    #[test]
    fn rank_one_density_and_current() {
        let lat = small();
        let l3 = lat.params().volume();
        let origin = lat.mode_index([0, 0, 0]).unwrap();
        let d = lat.dim();
        let mut q = Mat::<c64>::zeros(d, d);
        q[(4 * origin + 1, 4 * origin + 1)] = c64::new(1.0, 0.0);
        let s = VacuumState::new(q, lat.clone(), 1.0).unwrap();
        let rho = density(&s);
        assert!((rho.get([0, 0, 0]).re - 1.0 / l3).abs() < 1e-16);
        assert!((rho.total().re - 1.0).abs() < 1e-13);
        assert!((s.charge() - 1.0).abs() < 1e-15);

        // +1 eigenvector of alpha_3: (1, 0, 1, 0) / sqrt 2
        let mut q = Mat::<c64>::zeros(d, d);
        let h = c64::new(0.5, 0.0);
        for s1 in [0, 2] {
            for s2 in [0, 2] {
                q[(4 * origin + s1, 4 * origin + s2)] = h;
            }
        }
        let s = VacuumState::new(q, lat, 1.0).unwrap();
        let j = current(&s);
        assert!((j.components[2].get([0, 0, 0]).re - 1.0 / l3).abs() < 1e-16);
        assert!(j.components[0].max_abs() < 1e-16);
    }

    #[test]
    fn relative_trace_cases() {
        let lat = small();
        assert_eq!(relative_trace(&VacuumState::zero(lat.clone(), 1.0)), 0.0);
        let pp = free_positive_projector_full(&lat, 1.0);
        let s = VacuumState::new(pp, lat.clone(), 1.0).unwrap();
        let expect: f64 = (0..lat.num_modes())
            .map(|i| 2.0 * (crate::spinor::norm_sq(lat.momentum(i)) + 1.0).sqrt())
            .sum();
        assert!((relative_trace(&s) - expect).abs() < 1e-12);
        // equals Tr(D_0 Q) on a finite lattice
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_hermitian(lat.dim(), &mut rng);
        let s = VacuumState::new(q.clone(), lat.clone(), 1.0).unwrap();
        let tr = linalg::trace((free_dirac_full(&lat, 1.0) * q).as_ref()).re;
        assert!((relative_trace(&s) - tr).abs() < 1e-12);
    }

    #[test]
    fn energy_of_zero_state() {
        let lat = small();
        let nu = FourierField::from_fn(lat.params(), |_, q| {
            c64::new((-crate::spinor::norm_sq(q)).exp(), 0.0)
        });
        assert_eq!(bdf_energy(&VacuumState::zero(lat, 1.0), &nu, 0.3), 0.0);
    }

    #[test]
    fn non_hermitian_rejected() {
        let lat = small();
        let d = lat.dim();
        let mut q = Mat::<c64>::zeros(d, d);
        q[(0, 1)] = c64::new(1.0, 0.0);
        assert!(VacuumState::new(q, lat.clone(), 1.0).is_err());
        assert!(VacuumState::new(Mat::zeros(3, 3), lat, 1.0).is_err());
    }
}
