use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{pair_index, BseInput, Tei};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Parameters of the seeded synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_basis: usize,
    pub n_occ: usize,
    /// Homo-lumo gap in hartree.
    pub gap: f64,
    /// Decay exponent `z` of the TEI spectrum, `σ_k = exp(−z·k/N_b)`.
    pub decay_z: f64,
    /// Number of rank-one terms in the TEI matrix (0 gives `B = 0`).
    pub n_terms: usize,
    pub seed: u64,
    /// Overall amplitude of the TEI matrix.
    #[serde(default = "unit_scale")]
    pub tei_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams { n_basis: 8, n_occ: 3, gap: 0.5, decay_z: 2.0, n_terms: 16, seed: 0, tei_scale: 1.0 }
    }
}

// Independent ChaCha streams so each component can be regenerated alone.
const STREAM_ENERGIES: u64 = 1;
const STREAM_COEFFS: u64 = 2;
const STREAM_TEI: u64 = 3;

impl SynthParams {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.n_basis < 2 {
            return bad(format!("n_basis must be >= 2, got {}", self.n_basis));
        }
        if self.n_occ == 0 || self.n_occ >= self.n_basis {
            return bad(format!("need 1 <= n_occ < n_basis, got n_occ={}", self.n_occ));
        }
        if !(self.gap > 0.0 && self.gap.is_finite()) {
            return bad(format!("gap must be > 0, got {}", self.gap));
        }
        if !(self.decay_z > 0.0 && self.decay_z.is_finite()) {
            return bad(format!("decay_z must be > 0, got {}", self.decay_z));
        }
        if !(self.tei_scale > 0.0 && self.tei_scale.is_finite()) {
            return bad(format!("tei_scale must be > 0, got {}", self.tei_scale));
        }
        if self.n_terms > self.n_basis * self.n_basis {
            return bad(format!("n_terms must be <= n_basis^2, got {}", self.n_terms));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// `σ_k = s·exp(−z·k/N_b)` for `k = 1..=n_terms`, `s` the TEI scale.
    pub fn sigmas(&self) -> Vec<f64> {
        (1..=self.n_terms).map(|k| self.tei_scale * (-self.decay_z * k as f64 / self.n_basis as f64).exp()).collect()
    }
}

/// The generator terms `(σ_k, G_k)` with `G_k` symmetric, unit Frobenius norm.
pub fn tei_terms(p: &SynthParams) -> Result<Vec<(f64, DMatrix<f64>)>> {
    p.check()?;
    let nb = p.n_basis;
    let mut rng = p.rng(STREAM_TEI);
    Ok(p.sigmas()
        .into_iter()
        .map(|s| {
            let mut g = DMatrix::zeros(nb, nb);
            for i in 0..nb {
                for j in i..nb {
                    let v: f64 = rng.sample(StandardNormal);
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
            let norm = g.norm();
            (s, g / norm)
        })
        .collect())
}

fn energies(p: &SynthParams) -> Vec<f64> {
    let mut rng = p.rng(STREAM_ENERGIES);
    let mut occ: Vec<f64> = (0..p.n_occ).map(|_| rng.random_range(-2.0..-0.5)).collect();
    occ.sort_by(f64::total_cmp);
    let lumo = occ[p.n_occ - 1] + p.gap;
    let mut virt = vec![lumo];
    virt.extend((1..p.n_basis - p.n_occ).map(|_| rng.random_range(lumo..lumo + 2.0)));
    virt.sort_by(f64::total_cmp);
    occ.extend(virt);
    occ
}

fn orthogonal(p: &SynthParams) -> DMatrix<f64> {
    let nb = p.n_basis;
    let mut rng = p.rng(STREAM_COEFFS);
    let g = DMatrix::from_fn(nb, nb, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..nb {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Deterministic synthetic problem with a PSD TEI matrix
/// `B = Σ_k σ_k vec(G_k) vec(G_k)ᵀ`, random orthogonal coefficients and
/// energies whose homo-lumo gap equals `p.gap`.
pub fn synth_generate(p: &SynthParams) -> Result<BseInput> {
    p.check()?;
    let nb = p.n_basis;
    let terms = tei_terms(p)?;

    // Work on the unordered pairs μ ≤ ν and scatter, so every symmetry of the
    // tensor holds bit-for-bit.
    let pairs: Vec<(usize, usize)> = (0..nb).flat_map(|m| (m..nb).map(move |n| (m, n))).collect();
    let np = pairs.len();
    let gp = DMatrix::from_fn(np, terms.len(), |r, k| {
        let (m, n) = pairs[r];
        terms[k].1[(m, n)] * terms[k].0.sqrt()
    });
    let reduced = &gp * gp.transpose();
    let mut b = DMatrix::zeros(nb * nb, nb * nb);
    for (r, &(m, n)) in pairs.iter().enumerate() {
        for (c, &(l, s)) in pairs.iter().enumerate().skip(r) {
            let v = reduced[(r, c)];
            for row in [pair_index(nb, m, n), pair_index(nb, n, m)] {
                for col in [pair_index(nb, l, s), pair_index(nb, s, l)] {
                    b[(row, col)] = v;
                    b[(col, row)] = v;
                }
            }
        }
    }

    Ok(BseInput {
        n_basis: nb,
        n_occ: p.n_occ,
        energies: energies(p),
        coeffs: orthogonal(p),
        tei: Tei::Dense(SymMatrix::from_upper(b)),
    })
}
