//! Deterministic generators and independent oracles for tests.
//!
//! Everything here is test support: random networks and stacks drawn from
//! seeded streams, a global wave-variable solver used to cross-check the
//! cascade formulas, and a spectral-norm oracle built on a separate
//! real-symmetric eigensolver. None of it is used by the library itself.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::matrix::{solve, ComplexMatrix};
use crate::model::{LayerArchitecture, PropagationStage, SimLayer, SimStack};
use crate::network::PartitionedScattering;

/// Seeded, reproducible RNG for tests.
pub fn seeded_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn standard_complex(rng: &mut ChaCha12Rng) -> Complex64 {
    // Box-Muller; circularly symmetric with unit variance.
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    let r = (-u1.ln()).sqrt();
    Complex64::from_polar(r, std::f64::consts::TAU * u2)
}

/// Matrix with i.i.d. circularly symmetric complex Gaussian entries.
pub fn random_gaussian_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| standard_complex(rng))
}

/// Random complex vector on the unit sphere.
pub fn random_unit_vector(rng: &mut ChaCha12Rng, n: usize) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..n).map(|_| standard_complex(rng)).collect();
    let norm = crate::matrix::norm2(&v);
    for z in v.iter_mut() {
        *z /= norm;
    }
    v
}

/// Rescales a matrix to the requested spectral norm.
pub fn scaled_to_norm(m: &ComplexMatrix, target: f64) -> ComplexMatrix {
    let norm = m.spectral_norm();
    if norm == 0.0 {
        return m.clone();
    }
    m.scale(Complex64::new(target / norm, 0.0))
}

/// Random partitioned network: complex Gaussian draw, optionally symmetrized
/// for reciprocity, rescaled to the target spectral norm. Sub-unit targets
/// keep interconnection loops contractive.
pub fn random_scattering(
    rng: &mut ChaCha12Rng,
    n1: usize,
    n2: usize,
    target_norm: f64,
    reciprocal: bool,
) -> PartitionedScattering {
    let n = n1 + n2;
    let mut full = random_gaussian_matrix(rng, n, n);
    if reciprocal {
        full = full.add(&full.transpose()).scale(Complex64::new(0.5, 0.0));
    }
    let full = scaled_to_norm(&full, target_norm);
    PartitionedScattering::from_full(&full, n1, n2).expect("consistent by construction")
}

/// Random unitary matrix via modified Gram-Schmidt with reorthogonalization.
#[allow(clippy::needless_range_loop)]
pub fn random_unitary(rng: &mut ChaCha12Rng, n: usize) -> ComplexMatrix {
    let a = random_gaussian_matrix(rng, n, n);
    let mut cols: Vec<Vec<Complex64>> = (0..n)
        .map(|j| (0..n).map(|i| a.get(i, j)).collect())
        .collect();
    for j in 0..n {
        for _pass in 0..2 {
            for k in 0..j {
                let proj: Complex64 = (0..n).map(|i| cols[k][i].conj() * cols[j][i]).sum();
                for i in 0..n {
                    let update = proj * cols[k][i];
                    cols[j][i] -= update;
                }
            }
        }
        let norm = crate::matrix::norm2(&cols[j]);
        for i in 0..n {
            cols[j][i] /= norm;
        }
    }
    ComplexMatrix::from_fn(n, n, |i, j| cols[j][i])
}

/// Random symmetric unitary matrix: `Q Q^T` for unitary `Q`.
pub fn random_symmetric_unitary(rng: &mut ChaCha12Rng, n: usize) -> ComplexMatrix {
    let q = random_unitary(rng, n);
    q.mul(&q.transpose())
}

/// Random valid layer: either a diagonal phase layer or a symmetric-unitary
/// layer, with equal probability.
pub fn random_layer(rng: &mut ChaCha12Rng, n: usize) -> SimLayer {
    if rng.gen_bool(0.5) {
        let phases: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect();
        SimLayer::dris(phases)
    } else {
        let theta = random_symmetric_unitary(rng, 2 * n);
        SimLayer::symmetric_unitary(
            LayerArchitecture::BdRisUnitary,
            PartitionedScattering::from_full(&theta, n, n).expect("square split"),
        )
        .expect("construction satisfies the constraint")
    }
}

/// Stack in the simplified-model regime: every stage transmission-only with
/// sub-unit spectral norm, random valid layers.
pub fn random_coupling_free_stack(
    rng: &mut ChaCha12Rng,
    m: usize,
    k: usize,
    n: usize,
    l: usize,
) -> SimStack {
    let mut stages = Vec::with_capacity(l);
    for idx in 0..l {
        let n_in = if idx == 0 { m } else { n };
        let h21 = scaled_to_norm(
            &random_gaussian_matrix(rng, n, n_in),
            rng.gen_range(0.3..0.9),
        );
        stages.push(PropagationStage::transmission_only(h21));
    }
    let layers = (0..l).map(|_| random_layer(rng, n)).collect();
    let receiver = PropagationStage::transmission_only(scaled_to_norm(
        &random_gaussian_matrix(rng, k, n),
        rng.gen_range(0.3..0.9),
    ));
    SimStack::new(m, k, layers, stages, receiver).expect("consistent by construction")
}

/// Stack with nonzero coupling and reverse-transmission blocks: symmetric
/// coupling scaled to spectral norm at most 0.3, which keeps every
/// interconnection loop comfortably invertible.
pub fn random_general_stack(
    rng: &mut ChaCha12Rng,
    m: usize,
    k: usize,
    n: usize,
    l: usize,
) -> SimStack {
    let coupling = |rng: &mut ChaCha12Rng, dim: usize| {
        let a = random_gaussian_matrix(rng, dim, dim);
        let sym = a.add(&a.transpose()).scale(Complex64::new(0.5, 0.0));
        scaled_to_norm(&sym, rng.gen_range(0.1..0.3))
    };
    let mut stages = Vec::with_capacity(l);
    for idx in 0..l {
        let n_in = if idx == 0 { m } else { n };
        let h21 = scaled_to_norm(
            &random_gaussian_matrix(rng, n, n_in),
            rng.gen_range(0.3..0.6),
        );
        let h11 = coupling(rng, n_in);
        let h22 = coupling(rng, n);
        let h12 = scaled_to_norm(
            &random_gaussian_matrix(rng, n_in, n),
            rng.gen_range(0.05..0.3),
        );
        stages.push(PropagationStage::with_coupling(h21, h11, h22, h12).expect("shapes agree"));
    }
    let layers = (0..l).map(|_| random_layer(rng, n)).collect();
    let receiver = {
        let h21 = scaled_to_norm(
            &random_gaussian_matrix(rng, k, n),
            rng.gen_range(0.3..0.6),
        );
        let h11 = coupling(rng, n);
        let h22 = coupling(rng, k);
        let h12 = scaled_to_norm(
            &random_gaussian_matrix(rng, n, k),
            rng.gen_range(0.05..0.3),
        );
        PropagationStage::with_coupling(h21, h11, h22, h12).expect("shapes agree")
    };
    SimStack::new(m, k, layers, stages, receiver).expect("consistent by construction")
}

/// Composes a whole chain of partitioned networks by solving one global
/// linear system in all wave variables at once.
///
/// This is the brute-force grounding for every composition routine in the
/// crate: no block elimination, no recursion, just the raw port equations of
/// each network plus the interconnection identities.
///
/// Panics if shapes are incompatible or the global system is singular;
/// intended for test use on well-posed chains.
pub fn solve_chain_oracle(networks: &[PartitionedScattering]) -> PartitionedScattering {
    assert!(!networks.is_empty());
    let m = networks.len();
    for w in networks.windows(2) {
        assert_eq!(w[0].n2, w[1].n1, "chain ports must match");
    }
    let lead = networks[0].n1;
    let trail = networks[m - 1].n2;

    // Unknowns: reflected wave at the external leading ports, the pair of
    // counter-propagating waves at each internal interface, and the outgoing
    // wave at the external trailing ports.
    let mut offset = 0usize;
    let off_b = offset;
    offset += lead;
    let mut off_x = Vec::new(); // right-traveling at internal interface i
    let mut off_y = Vec::new(); // left-traveling at internal interface i
    for net in networks.iter().take(m - 1) {
        off_x.push(offset);
        offset += net.n2;
        off_y.push(offset);
        offset += net.n2;
    }
    let off_g = offset;
    offset += trail;
    let dim = offset;

    let mut sys = ComplexMatrix::zeros(dim, dim);
    let mut rhs = ComplexMatrix::zeros(dim, lead + trail);
    let mut row = 0usize;

    for (i, net) in networks.iter().enumerate() {
        // lead_out = S11 lead_in + S12 trail_in
        // trail_out = S21 lead_in + S22 trail_in
        let lead_in_col = if i == 0 { None } else { Some(off_x[i - 1]) };
        let lead_out_col = if i == 0 { off_b } else { off_y[i - 1] };
        let trail_in_col = if i == m - 1 { None } else { Some(off_y[i]) };
        let trail_out_col = if i == m - 1 { off_g } else { off_x[i] };

        for r in 0..net.n1 {
            sys.set(row, lead_out_col + r, Complex64::new(1.0, 0.0));
            match lead_in_col {
                Some(col) => {
                    for j in 0..net.n1 {
                        sys.set(row, col + j, -net.s11.get(r, j));
                    }
                }
                None => {
                    for j in 0..lead {
                        rhs.set(row, j, net.s11.get(r, j));
                    }
                }
            }
            match trail_in_col {
                Some(col) => {
                    for j in 0..net.n2 {
                        sys.set(row, col + j, -net.s12.get(r, j));
                    }
                }
                None => {
                    for j in 0..trail {
                        rhs.set(row, lead + j, net.s12.get(r, j));
                    }
                }
            }
            row += 1;
        }
        for r in 0..net.n2 {
            sys.set(row, trail_out_col + r, Complex64::new(1.0, 0.0));
            match lead_in_col {
                Some(col) => {
                    for j in 0..net.n1 {
                        sys.set(row, col + j, -net.s21.get(r, j));
                    }
                }
                None => {
                    for j in 0..lead {
                        rhs.set(row, j, net.s21.get(r, j));
                    }
                }
            }
            match trail_in_col {
                Some(col) => {
                    for j in 0..net.n2 {
                        sys.set(row, col + j, -net.s22.get(r, j));
                    }
                }
                None => {
                    for j in 0..trail {
                        rhs.set(row, lead + j, net.s22.get(r, j));
                    }
                }
            }
            row += 1;
        }
    }
    assert_eq!(row, dim, "system must be square");

    let sol = solve(&sys, &rhs).expect("chain system is well posed");
    PartitionedScattering::new(
        sol.block(off_b, 0, lead, lead),
        sol.block(off_b, lead, lead, trail),
        sol.block(off_g, 0, trail, lead),
        sol.block(off_g, lead, trail, trail),
    )
    .expect("blocks consistent")
}

/// Spectral-norm oracle: embeds the complex matrix into a real one, forms the
/// real Gram matrix and diagonalizes it with a self-contained real Jacobi
/// sweep. Independent of [`ComplexMatrix::spectral_norm`] by construction.
pub fn spectral_norm_oracle(m: &ComplexMatrix) -> f64 {
    let (rows, cols) = (m.rows(), m.cols());
    // E = [[Re, -Im], [Im, Re]] has the singular values of m, doubled.
    let mut e = vec![vec![0.0f64; 2 * cols]; 2 * rows];
    for i in 0..rows {
        for j in 0..cols {
            let z = m.get(i, j);
            e[i][j] = z.re;
            e[i][j + cols] = -z.im;
            e[i + rows][j] = z.im;
            e[i + rows][j + cols] = z.re;
        }
    }
    let n = 2 * cols;
    let mut gram = vec![vec![0.0f64; n]; n];
    for (i, gram_row) in gram.iter_mut().enumerate() {
        for (j, cell) in gram_row.iter_mut().enumerate() {
            *cell = e.iter().map(|e_row| e_row[i] * e_row[j]).sum();
        }
    }
    let eigs = real_symmetric_eigenvalues(gram);
    eigs.into_iter().fold(0.0f64, f64::max).max(0.0).sqrt()
}

/// Plain real Jacobi eigensolver for symmetric matrices.
#[allow(clippy::needless_range_loop)]
fn real_symmetric_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    let scale: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    let stop = (1e-15 * scale) * (1e-15 * scale);
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[p][j];
                    let aqj = a[q][j];
                    a[p][j] = c * apj - s * aqj;
                    a[q][j] = s * apj + c * aqj;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}
