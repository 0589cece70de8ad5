//! Variational states of QAOA, QAOA-CD and QAOA-2CD, their energy cost and
//! its analytic gradient.
//!
//! Within each step the layers act in the order written in the ansatz
//! products, rightmost operator first: the second-order correction (2CD),
//! then the first-order correction (CD), then the phase layer, then the
//! mixer. Phase and mixer layers use structure-exploiting kernels (O(2^N)
//! and O(N 2^N)); the correction layers go through Hermitian
//! eigendecompositions.

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::operators::{matvec, adjoint_matvec, HermitianEig, OperatorCache, SecondCache};
use crate::spin_model::SpinInstance;
use crate::{Error, Result};

/// Ansatz variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    Qaoa,
    QaoaCd,
    Qaoa2Cd,
}

/// One of the five angle families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamFamily {
    Beta,
    Gamma,
    Alpha,
    Delta,
    Zeta,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Qaoa => "QAOA",
            Variant::QaoaCd => "QAOA-CD",
            Variant::Qaoa2Cd => "QAOA-2CD",
        }
    }

    pub fn parse(label: &str) -> Result<Self> {
        match label.trim().to_ascii_uppercase().as_str() {
            "QAOA" => Ok(Variant::Qaoa),
            "QAOA-CD" | "QAOA_CD" | "CD" => Ok(Variant::QaoaCd),
            "QAOA-2CD" | "QAOA_2CD" | "2CD" => Ok(Variant::Qaoa2Cd),
            other => Err(Error::UnknownVariant(other.to_string())),
        }
    }

    pub fn families(self) -> &'static [ParamFamily] {
        use ParamFamily::*;
        match self {
            Variant::Qaoa => &[Beta, Gamma],
            Variant::QaoaCd => &[Beta, Gamma, Alpha],
            Variant::Qaoa2Cd => &[Beta, Gamma, Alpha, Delta, Zeta],
        }
    }

    /// 2p, 3p or 5p parameters at depth p.
    pub fn param_count(self, depth: usize) -> usize {
        self.families().len() * depth
    }

    pub fn uses_cd(self) -> bool {
        !matches!(self, Variant::Qaoa)
    }

    pub fn uses_second_order(self) -> bool {
        matches!(self, Variant::Qaoa2Cd)
    }

    /// The next-lower variant in the nesting chain, if any.
    pub fn predecessor(self) -> Option<Variant> {
        match self {
            Variant::Qaoa => None,
            Variant::QaoaCd => Some(Variant::Qaoa),
            Variant::Qaoa2Cd => Some(Variant::QaoaCd),
        }
    }
}

/// Angle vectors of one variational point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalParams {
    pub variant: Variant,
    pub depth: usize,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl VariationalParams {
    pub fn zeros(variant: Variant, depth: usize) -> Self {
        let used = |f: ParamFamily| {
            if variant.families().contains(&f) {
                vec![0.0; depth]
            } else {
                Vec::new()
            }
        };
        Self {
            variant,
            depth,
            beta: used(ParamFamily::Beta),
            gamma: used(ParamFamily::Gamma),
            alpha: used(ParamFamily::Alpha),
            delta: used(ParamFamily::Delta),
            zeta: used(ParamFamily::Zeta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::BadDepth);
        }
        let shape_err = || Error::ParamShape {
            variant: self.variant.label(),
            depth: self.depth,
        };
        let expect = |v: &Vec<f64>, f: ParamFamily| {
            let want = if self.variant.families().contains(&f) {
                self.depth
            } else {
                0
            };
            if v.len() == want {
                Ok(())
            } else {
                Err(shape_err())
            }
        };
        expect(&self.beta, ParamFamily::Beta)?;
        expect(&self.gamma, ParamFamily::Gamma)?;
        expect(&self.alpha, ParamFamily::Alpha)?;
        expect(&self.delta, ParamFamily::Delta)?;
        expect(&self.zeta, ParamFamily::Zeta)?;
        Ok(())
    }

    /// Flat layout `[beta | gamma | alpha | delta | zeta]`, families in the
    /// variant's order, each of length `depth`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.variant.param_count(self.depth));
        for f in self.variant.families() {
            out.extend_from_slice(self.family(*f));
        }
        out
    }

    pub fn from_flat(variant: Variant, depth: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != variant.param_count(depth) || depth == 0 {
            return Err(Error::ParamShape {
                variant: variant.label(),
                depth,
            });
        }
        let mut params = Self::zeros(variant, depth);
        for (i, f) in variant.families().iter().enumerate() {
            params
                .family_mut(*f)
                .copy_from_slice(&flat[i * depth..(i + 1) * depth]);
        }
        Ok(params)
    }

    pub fn family(&self, f: ParamFamily) -> &[f64] {
        match f {
            ParamFamily::Beta => &self.beta,
            ParamFamily::Gamma => &self.gamma,
            ParamFamily::Alpha => &self.alpha,
            ParamFamily::Delta => &self.delta,
            ParamFamily::Zeta => &self.zeta,
        }
    }

    fn family_mut(&mut self, f: ParamFamily) -> &mut [f64] {
        match f {
            ParamFamily::Beta => &mut self.beta,
            ParamFamily::Gamma => &mut self.gamma,
            ParamFamily::Alpha => &mut self.alpha,
            ParamFamily::Delta => &mut self.delta,
            ParamFamily::Zeta => &mut self.zeta,
        }
    }

    /// Embeds into the next variant with the new angle family set to zero.
    pub fn embed_into(&self, child: Variant) -> Result<Self> {
        if child.predecessor() != Some(self.variant) {
            return Err(Error::EmbeddingMismatch {
                parent: self.variant.label(),
                child: child.label(),
            });
        }
        let mut out = Self::zeros(child, self.depth);
        for f in self.variant.families() {
            out.family_mut(*f).copy_from_slice(self.family(*f));
        }
        Ok(out)
    }
}

/// Normalized state over the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        dotc(&self.amplitudes, &other.amplitudes)
    }
}

fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Ground state of the mixer: uniform magnitudes with sign
/// `(-1)^popcount(b)`, eigenvalue `-N`.
pub fn initial_state(n_spins: usize) -> StateVector {
    assert!(n_spins >= 1);
    let dim = 1usize << n_spins;
    let amp = 1.0 / (dim as f64).sqrt();
    let amplitudes = (0..dim)
        .map(|b: usize| {
            let sign = if b.count_ones() % 2 == 0 { amp } else { -amp };
            Complex64::new(sign, 0.0)
        })
        .collect();
    StateVector { amplitudes }
}

/// `amp(b) <- e^{-i gamma E_b} amp(b)`.
pub fn apply_phase_layer(state: &mut [Complex64], gamma: f64, energies: &[f64]) {
    for (a, &e) in state.iter_mut().zip(energies) {
        *a *= Complex64::from_polar(1.0, -gamma * e);
    }
}

/// `e^{-i beta sigma^X}` on every qubit via paired-amplitude rotations.
pub fn apply_mixer_layer(state: &mut [Complex64], beta: f64, n_spins: usize) {
    let (c, s) = (beta.cos(), beta.sin());
    let ms = Complex64::new(0.0, -s);
    for k in 0..n_spins {
        let bit = 1usize << k;
        let mut b = 0usize;
        while b < state.len() {
            if b & bit == 0 {
                let (a0, a1) = (state[b], state[b | bit]);
                state[b] = c * a0 + ms * a1;
                state[b | bit] = ms * a0 + c * a1;
            }
            b += 1;
        }
    }
}

/// First-order correction layer `e^{-alpha [H_X, H_T]} = e^{-i alpha M}`
/// through the cached eigendecomposition of `M`.
pub fn apply_cd_layer(state: &mut [Complex64], alpha: f64, cd_eig: &HermitianEig) {
    cd_eig.apply_exp(alpha, state);
}

/// Builds the joint Hermitian generator of the second-order layer,
/// `G = -delta K1 + zeta K2`, so that the layer is `e^{-i G}`.
fn second_order_generator(second: &SecondCache, delta: f64, zeta: f64) -> Mat<Complex64> {
    let d = Complex64::new(-delta, 0.0);
    let z = Complex64::new(zeta, 0.0);
    Mat::from_fn(second.k1.nrows(), second.k1.ncols(), |i, j| {
        d * second.k1[(i, j)] + z * second.k2[(i, j)]
    })
}

/// Second-order layer `e^{i delta K1 - i zeta K2}`. `K1` and `K2` do not
/// commute in general, so the two terms form one joint exponential whose
/// eigendecomposition is computed per call and returned for reuse.
pub fn apply_2cd_layer(
    state: &mut [Complex64],
    delta: f64,
    zeta: f64,
    second: &SecondCache,
) -> Result<HermitianEig> {
    let g = second_order_generator(second, delta, zeta);
    let eig = HermitianEig::decompose(&g)?;
    eig.apply_exp(1.0, state);
    Ok(eig)
}

/// Per-instance evaluation context holding the operator cache for a variant.
pub struct AnsatzContext {
    pub instance: SpinInstance,
    pub variant: Variant,
    pub cache: OperatorCache,
}

impl AnsatzContext {
    pub fn new(instance: &SpinInstance, variant: Variant) -> Result<Self> {
        instance.validate()?;
        let cache = OperatorCache::build(instance, variant.uses_cd(), variant.uses_second_order())?;
        Ok(Self {
            instance: instance.clone(),
            variant,
            cache,
        })
    }

    pub fn n_spins(&self) -> usize {
        self.instance.n_spins
    }

    fn check_params(&self, params: &VariationalParams) -> Result<()> {
        params.validate()?;
        if params.variant != self.variant {
            return Err(Error::ParamShape {
                variant: params.variant.label(),
                depth: params.depth,
            });
        }
        Ok(())
    }

    /// Runs the layered circuit and returns the final state.
    pub fn prepare_state(&self, params: &VariationalParams) -> Result<StateVector> {
        self.check_params(params)?;
        let mut state = initial_state(self.n_spins());
        for k in 0..params.depth {
            self.apply_step(&mut state.amplitudes, params, k, None)?;
        }
        Ok(state)
    }

    fn apply_step(
        &self,
        state: &mut [Complex64],
        params: &VariationalParams,
        k: usize,
        mut store_eig: Option<&mut Vec<HermitianEig>>,
    ) -> Result<()> {
        if self.variant.uses_second_order() {
            let second = self.cache.second.as_ref().expect("cache built for 2CD");
            let eig = apply_2cd_layer(state, params.delta[k], params.zeta[k], second)?;
            if let Some(store) = store_eig.as_mut() {
                store.push(eig);
            }
        }
        if self.variant.uses_cd() {
            let cd = self.cache.cd.as_ref().expect("cache built for CD");
            apply_cd_layer(state, params.alpha[k], &cd.eig);
        }
        apply_phase_layer(state, params.gamma[k], &self.cache.energies);
        apply_mixer_layer(state, params.beta[k], self.n_spins());
        Ok(())
    }

    /// `<psi|H_T|psi>` for the prepared state.
    pub fn cost(&self, params: &VariationalParams) -> Result<f64> {
        let state = self.prepare_state(params)?;
        Ok(self.expectation(&state.amplitudes))
    }

    pub fn expectation(&self, state: &[Complex64]) -> f64 {
        state
            .iter()
            .zip(&self.cache.energies)
            .map(|(a, &e)| e * a.norm_sqr())
            .sum()
    }

    /// Exact analytic gradient via one forward sweep and one adjoint sweep.
    ///
    /// Single-parameter layers contribute `2 Im <phi|G|psi>` with `G` the
    /// layer generator. The two parameters of the second-order layer share
    /// one exponential, so their partials use the divided-difference
    /// (Daleckii-Krein) form of the exponential's directional derivative in
    /// the generator's eigenbasis.
    pub fn cost_and_gradient(&self, params: &VariationalParams) -> Result<(f64, Vec<f64>)> {
        self.check_params(params)?;
        let p = params.depth;
        let n = self.n_spins();

        let mut psi = initial_state(n).amplitudes;
        let mut eigs_2cd: Vec<HermitianEig> = Vec::new();
        for k in 0..p {
            self.apply_step(&mut psi, params, k, Some(&mut eigs_2cd))?;
        }
        let energy = self.expectation(&psi);

        // adjoint state phi = H_T |psi_final>
        let mut phi: Vec<Complex64> = psi
            .iter()
            .zip(&self.cache.energies)
            .map(|(a, &e)| a * e)
            .collect();

        let mut g_beta = vec![0.0; p];
        let mut g_gamma = vec![0.0; p];
        let mut g_alpha = vec![0.0; if self.variant.uses_cd() { p } else { 0 }];
        let mut g_delta = vec![0.0; if self.variant.uses_second_order() { p } else { 0 }];
        let mut g_zeta = g_delta.clone();

        let mut hx_psi = vec![Complex64::ZERO; psi.len()];
        for k in (0..p).rev() {
            // mixer
            apply_hx(&psi, n, &mut hx_psi);
            g_beta[k] = 2.0 * dotc(&phi, &hx_psi).im;
            apply_mixer_layer(&mut psi, -params.beta[k], n);
            apply_mixer_layer(&mut phi, -params.beta[k], n);
            // phase
            g_gamma[k] = 2.0
                * phi
                    .iter()
                    .zip(&psi)
                    .zip(&self.cache.energies)
                    .map(|((f, s), &e)| (f.conj() * s * e).im)
                    .sum::<f64>();
            apply_phase_layer(&mut psi, -params.gamma[k], &self.cache.energies);
            apply_phase_layer(&mut phi, -params.gamma[k], &self.cache.energies);
            // first-order correction
            if self.variant.uses_cd() {
                let cd = self.cache.cd.as_ref().expect("cache built for CD");
                let m_psi = matvec(&cd.m, &psi);
                g_alpha[k] = 2.0 * dotc(&phi, &m_psi).im;
                apply_cd_layer(&mut psi, -params.alpha[k], &cd.eig);
                apply_cd_layer(&mut phi, -params.alpha[k], &cd.eig);
            }
            // second-order correction
            if self.variant.uses_second_order() {
                let second = self.cache.second.as_ref().expect("cache built for 2CD");
                let eig = &eigs_2cd[k];
                let (gd, gz) = second_order_partials(eig, second, &psi, &phi);
                g_delta[k] = gd;
                g_zeta[k] = gz;
                // undo the layer on both states
                eig.apply_exp(-1.0, &mut psi);
                eig.apply_exp(-1.0, &mut phi);
            }
        }

        let mut grad = Vec::with_capacity(self.variant.param_count(p));
        for f in self.variant.families() {
            match f {
                ParamFamily::Beta => grad.extend_from_slice(&g_beta),
                ParamFamily::Gamma => grad.extend_from_slice(&g_gamma),
                ParamFamily::Alpha => grad.extend_from_slice(&g_alpha),
                ParamFamily::Delta => grad.extend_from_slice(&g_delta),
                ParamFamily::Zeta => grad.extend_from_slice(&g_zeta),
            }
        }
        Ok((energy, grad))
    }

    /// Gradient only; same layout as [`VariationalParams::to_flat`].
    pub fn cost_gradient(&self, params: &VariationalParams) -> Result<Vec<f64>> {
        Ok(self.cost_and_gradient(params)?.1)
    }
}

/// `out = H_X |state>`: sum of single-bit flips.
pub fn apply_hx(state: &[Complex64], n_spins: usize, out: &mut [Complex64]) {
    for (b, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::ZERO;
        for k in 0..n_spins {
            acc += state[b ^ (1 << k)];
        }
        *o = acc;
    }
}

/// Divided difference of `x -> e^{-ix}` at a pair of eigenvalues.
fn exp_divided_difference(lm: f64, ln: f64) -> Complex64 {
    if (lm - ln).abs() < 1e-7 {
        let mid = 0.5 * (lm + ln);
        Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, -mid)
    } else {
        (Complex64::from_polar(1.0, -lm) - Complex64::from_polar(1.0, -ln))
            / Complex64::new(lm - ln, 0.0)
    }
}

/// Partials of the energy through the joint second-order exponential.
///
/// `psi` is the state just after the layer, `phi` the adjoint state at the
/// same position. Returns `(dE/d delta, dE/d zeta)`.
fn second_order_partials(
    eig: &HermitianEig,
    second: &SecondCache,
    psi: &[Complex64],
    phi: &[Complex64],
) -> (f64, f64) {
    let dim = eig.dim();
    let t = adjoint_matvec(&eig.vectors, psi);
    // coordinates of the layer input state: undo the phases
    let u: Vec<Complex64> = t
        .iter()
        .zip(&eig.values)
        .map(|(c, &l)| c * Complex64::from_polar(1.0, l))
        .collect();
    let w = adjoint_matvec(&eig.vectors, phi);

    let c = Mat::from_fn(dim, dim, |m, n| {
        w[m].conj() * u[n] * exp_divided_difference(eig.values[m], eig.values[n])
    });
    let v_conj = Mat::from_fn(dim, dim, |i, j| eig.vectors[(i, j)].conj());
    let v_t = eig.vectors.transpose().to_owned();
    let t_mat = &v_conj * &c * &v_t;

    // dG/d delta = -K1, dG/d zeta = +K2
    let mut acc_k1 = Complex64::ZERO;
    let mut acc_k2 = Complex64::ZERO;
    for j in 0..dim {
        for i in 0..dim {
            acc_k1 += second.k1[(i, j)] * t_mat[(i, j)];
            acc_k2 += second.k2[(i, j)] * t_mat[(i, j)];
        }
    }
    ((-acc_k1).re * 2.0, acc_k2.re * 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_mixer, build_target, unitary_from_hermitian, DenseOperator, SymmetryTag};
    use crate::spin_model::{diagonal_energies, generate_instance};
    use crate::testutil::{expm_series, single_edge};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_state(dim: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        v
    }

    fn random_params(variant: Variant, depth: usize, seed: u64) -> VariationalParams {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let flat: Vec<f64> = (0..variant.param_count(depth))
            .map(|_| 2.0 * rng.random::<f64>() - 1.0)
            .collect();
        VariationalParams::from_flat(variant, depth, &flat).unwrap()
    }

    #[test]
    fn initial_state_single_spin() {
        let s = initial_state(1);
        let r = 1.0 / 2.0f64.sqrt();
        assert!((s.amplitudes[0] - Complex64::new(r, 0.0)).norm() < 1e-15);
        assert!((s.amplitudes[1] - Complex64::new(-r, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn initial_state_is_mixer_ground_state() {
        let n = 5;
        let s = initial_state(n);
        let mut hx = vec![Complex64::ZERO; s.dim()];
        apply_hx(&s.amplitudes, n, &mut hx);
        for (h, a) in hx.iter().zip(&s.amplitudes) {
            assert!((h + Complex64::new(n as f64, 0.0) * a).norm() < 1e-12);
        }
    }

    #[test]
    fn initial_state_has_zero_target_energy() {
        for seed in 0..5 {
            let inst = generate_instance(5, seed).unwrap();
            let ctx = AnsatzContext::new(&inst, Variant::Qaoa).unwrap();
            let e = ctx.expectation(&initial_state(5).amplitudes);
            assert!(e.abs() < 1e-12);
        }
    }

    #[test]
    fn phase_layer_noop_cases() {
        let inst = generate_instance(4, 3).unwrap();
        let energies = diagonal_energies(&inst);
        let mut s = random_state(16, 1);
        let orig = s.clone();
        apply_phase_layer(&mut s, 0.0, &energies);
        assert_eq!(s, orig);
        let zero_energies = vec![0.0; 16];
        apply_phase_layer(&mut s, 1.3, &zero_energies);
        assert_eq!(s, orig);
    }

    #[test]
    fn phase_layer_matches_dense_oracle() {
        let inst = generate_instance(4, 11).unwrap();
        let energies = diagonal_energies(&inst);
        let gamma = 0.7;
        let mut s = random_state(16, 2);
        let dense = unitary_from_hermitian(&build_target(&inst), gamma).unwrap();
        let expected = matvec(&dense.entries, &s);
        apply_phase_layer(&mut s, gamma, &energies);
        for (a, b) in s.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn mixer_layer_basics() {
        let mut s = vec![Complex64::new(1.0, 0.0), Complex64::ZERO];
        apply_mixer_layer(&mut s, 0.0, 1);
        assert_eq!(s[0], Complex64::new(1.0, 0.0));
        // beta = pi/2 sends |0> to -i|1>
        let mut s = vec![Complex64::new(1.0, 0.0), Complex64::ZERO];
        apply_mixer_layer(&mut s, std::f64::consts::FRAC_PI_2, 1);
        assert!(s[0].norm() < 1e-15);
        assert!((s[1] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn mixer_layer_matches_dense_oracle() {
        let beta = -0.45;
        let mut s = random_state(16, 3);
        let dense = unitary_from_hermitian(&build_mixer(4), beta).unwrap();
        let expected = matvec(&dense.entries, &s);
        apply_mixer_layer(&mut s, beta, 4);
        for (a, b) in s.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn cd_layer_matches_series_oracle() {
        let inst = generate_instance(4, 17).unwrap();
        let ctx = AnsatzContext::new(&inst, Variant::QaoaCd).unwrap();
        let cd = ctx.cache.cd.as_ref().unwrap();
        let alpha = 0.6;
        let mut s = random_state(16, 4);
        // independent route: series exponential of -alpha [H_X, H_T] = -i alpha M
        let scaled = Mat::from_fn(16, 16, |i, j| Complex64::new(0.0, -alpha) * cd.m[(i, j)]);
        let expected = matvec(&expm_series(&scaled), &s);
        apply_cd_layer(&mut s, alpha, &cd.eig);
        let norm: f64 = s.iter().map(|a| a.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-10);
        for (a, b) in s.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn cd_layer_identity_cases() {
        let inst = generate_instance(4, 18).unwrap();
        let ctx = AnsatzContext::new(&inst, Variant::QaoaCd).unwrap();
        let mut s = random_state(16, 5);
        let orig = s.clone();
        apply_cd_layer(&mut s, 0.0, &ctx.cache.cd.as_ref().unwrap().eig);
        for (a, b) in s.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn twocd_layer_matches_series_oracle() {
        let inst = single_edge(0.7);
        let ctx = AnsatzContext::new(&inst, Variant::Qaoa2Cd).unwrap();
        let second = ctx.cache.second.as_ref().unwrap();
        let (delta, zeta) = (0.31, -0.52);
        let mut s = random_state(4, 6);
        // brute-force dense exponential of i delta K1 - i zeta K2
        let exponent = Mat::from_fn(4, 4, |i, j| {
            Complex64::new(0.0, delta) * second.k1[(i, j)]
                - Complex64::new(0.0, zeta) * second.k2[(i, j)]
        });
        let expected = matvec(&expm_series(&exponent), &s);
        apply_2cd_layer(&mut s, delta, zeta, second).unwrap();
        for (a, b) in s.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn twocd_layer_identity_at_zero() {
        let inst = generate_instance(3, 21).unwrap();
        let ctx = AnsatzContext::new(&inst, Variant::Qaoa2Cd).unwrap();
        let mut s = random_state(8, 7);
        let orig = s.clone();
        apply_2cd_layer(&mut s, 0.0, 0.0, ctx.cache.second.as_ref().unwrap()).unwrap();
        for (a, b) in s.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn prepare_state_zero_angles_is_initial() {
        let inst = generate_instance(4, 23).unwrap();
        for variant in [Variant::Qaoa, Variant::QaoaCd, Variant::Qaoa2Cd] {
            let ctx = AnsatzContext::new(&inst, variant).unwrap();
            let s = ctx
                .prepare_state(&VariationalParams::zeros(variant, 3))
                .unwrap();
            let init = initial_state(4);
            for (a, b) in s.amplitudes.iter().zip(&init.amplitudes) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn variant_nesting_is_exact() {
        let inst = generate_instance(4, 29).unwrap();
        let qaoa = AnsatzContext::new(&inst, Variant::Qaoa).unwrap();
        let cd = AnsatzContext::new(&inst, Variant::QaoaCd).unwrap();
        let twocd = AnsatzContext::new(&inst, Variant::Qaoa2Cd).unwrap();
        let base = random_params(Variant::Qaoa, 2, 31);
        let cd_params = base.embed_into(Variant::QaoaCd).unwrap();
        let twocd_params = cd_params.embed_into(Variant::Qaoa2Cd).unwrap();
        let e0 = qaoa.cost(&base).unwrap();
        let e1 = cd.cost(&cd_params).unwrap();
        let e2 = twocd.cost(&twocd_params).unwrap();
        assert!((e0 - e1).abs() < 1e-12);
        assert!((e0 - e2).abs() < 1e-12);
    }

    #[test]
    fn two_qubit_hand_rolled_oracle() {
        // N=2, p=1, (gamma, beta) = (0.4, 0.3): amplitudes computed by hand
        // from the 4-dimensional circuit.
        let j = 1.0;
        let inst = single_edge(j);
        let ctx = AnsatzContext::new(&inst, Variant::Qaoa).unwrap();
        let (gamma, beta) = (0.4, 0.3);
        let mut params = VariationalParams::zeros(Variant::Qaoa, 1);
        params.gamma[0] = gamma;
        params.beta[0] = beta;
        let got = ctx.prepare_state(&params).unwrap();

        let energies = [j, -j, -j, j];
        let mut amps: Vec<Complex64> = (0..4)
            .map(|b: usize| {
                let sign = if b.count_ones() % 2 == 0 { 0.5 } else { -0.5 };
                Complex64::new(sign, 0.0) * Complex64::from_polar(1.0, -gamma * energies[b])
            })
            .collect();
        // single-qubit rotation on qubit 0 then qubit 1
        let (c, s) = (beta.cos(), beta.sin());
        let ms = Complex64::new(0.0, -s);
        let rot = |a0: Complex64, a1: Complex64| (c * a0 + ms * a1, ms * a0 + c * a1);
        let (a0, a1) = rot(amps[0], amps[1]);
        let (a2, a3) = rot(amps[2], amps[3]);
        amps = vec![a0, a1, a2, a3];
        let (b0, b2) = rot(amps[0], amps[2]);
        let (b1, b3) = rot(amps[1], amps[3]);
        let expected = [b0, b1, b2, b3];
        for (a, b) in got.amplitudes.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn prepare_state_matches_dense_unitary_product() {
        // naive oracle: multiply explicitly built dense unitaries
        let inst = generate_instance(4, 37).unwrap();
        for variant in [Variant::Qaoa, Variant::QaoaCd, Variant::Qaoa2Cd] {
            let ctx = AnsatzContext::new(&inst, variant).unwrap();
            let params = random_params(variant, 2, 41);
            let got = ctx.prepare_state(&params).unwrap();

            let target = build_target(&inst);
            let mixer = build_mixer(4);
            let mut state = initial_state(4).amplitudes;
            for k in 0..params.depth {
                if variant.uses_second_order() {
                    let second = ctx.cache.second.as_ref().unwrap();
                    let exponent = Mat::from_fn(16, 16, |i, jj| {
                        Complex64::new(0.0, params.delta[k]) * second.k1[(i, jj)]
                            - Complex64::new(0.0, params.zeta[k]) * second.k2[(i, jj)]
                    });
                    state = matvec(&expm_series(&exponent), &state);
                }
                if variant.uses_cd() {
                    let cd = ctx.cache.cd.as_ref().unwrap();
                    let m_op =
                        DenseOperator::new(cd.m.clone(), SymmetryTag::Hermitian).unwrap();
                    let u = unitary_from_hermitian(&m_op, params.alpha[k]).unwrap();
                    state = matvec(&u.entries, &state);
                }
                let up = unitary_from_hermitian(&target, params.gamma[k]).unwrap();
                state = matvec(&up.entries, &state);
                let um = unitary_from_hermitian(&mixer, params.beta[k]).unwrap();
                state = matvec(&um.entries, &state);
            }
            for (a, b) in got.amplitudes.iter().zip(&state) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cost_stays_within_spectrum_bounds() {
        let inst = generate_instance(5, 43).unwrap();
        let spec = crate::spin_model::spectrum(&inst, 1e-9).unwrap();
        let ctx = AnsatzContext::new(&inst, Variant::Qaoa2Cd).unwrap();
        for seed in 0..10 {
            let params = random_params(Variant::Qaoa2Cd, 3, seed);
            let e = ctx.cost(&params).unwrap();
            assert!(e >= spec.e_min - 1e-10 && e <= spec.e_max + 1e-10);
        }
    }

    #[test]
    fn cost_is_periodic_in_beta() {
        let inst = generate_instance(4, 47).unwrap();
        let ctx = AnsatzContext::new(&inst, Variant::Qaoa).unwrap();
        let mut params = random_params(Variant::Qaoa, 2, 53);
        let e0 = ctx.cost(&params).unwrap();
        params.beta[0] += 2.0 * std::f64::consts::PI;
        let e1 = ctx.cost(&params).unwrap();
        assert!((e0 - e1).abs() < 1e-10);
    }

    #[test]
    fn norm_preserved_across_many_layers() {
        let inst = generate_instance(4, 59).unwrap();
        let ctx = AnsatzContext::new(&inst, Variant::Qaoa2Cd).unwrap();
        // 50 layers: depth 10 of the five-layer variant step
        let params = random_params(Variant::Qaoa2Cd, 10, 61);
        let s = ctx.prepare_state(&params).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gradient_zero_at_zero_angles() {
        let inst = generate_instance(5, 67).unwrap();
        let ctx = AnsatzContext::new(&inst, Variant::Qaoa).unwrap();
        let (_, grad) = ctx
            .cost_and_gradient(&VariationalParams::zeros(Variant::Qaoa, 1))
            .unwrap();
        assert!(grad.iter().all(|g| g.abs() < 1e-10), "{grad:?}");
    }

    fn finite_difference(
        ctx: &AnsatzContext,
        variant: Variant,
        depth: usize,
        flat: &[f64],
    ) -> Vec<f64> {
        let h = 1e-6;
        (0..flat.len())
            .map(|i| {
                let mut plus = flat.to_vec();
                plus[i] += h;
                let mut minus = flat.to_vec();
                minus[i] -= h;
                let ep = ctx
                    .cost(&VariationalParams::from_flat(variant, depth, &plus).unwrap())
                    .unwrap();
                let em = ctx
                    .cost(&VariationalParams::from_flat(variant, depth, &minus).unwrap())
                    .unwrap();
                (ep - em) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let inst = generate_instance(4, 71).unwrap();
        for variant in [Variant::Qaoa, Variant::QaoaCd, Variant::Qaoa2Cd] {
            let ctx = AnsatzContext::new(&inst, variant).unwrap();
            for seed in 0..4 {
                let params = random_params(variant, 2, 100 + seed);
                let flat = params.to_flat();
                assert_eq!(flat.len(), variant.param_count(2));
                let (_, analytic) = ctx.cost_and_gradient(&params).unwrap();
                let fd = finite_difference(&ctx, variant, 2, &flat);
                for (a, f) in analytic.iter().zip(&fd) {
                    let scale = a.abs().max(f.abs()).max(1e-3);
                    assert!(
                        (a - f).abs() / scale < 1e-5,
                        "{variant:?}: analytic {a} vs fd {f}"
                    );
                }
            }
        }
    }

    #[test]
    fn param_shape_validation() {
        let mut p = VariationalParams::zeros(Variant::Qaoa, 2);
        p.beta.pop();
        assert!(p.validate().is_err());
        let p2 = VariationalParams::zeros(Variant::QaoaCd, 2);
        let inst = generate_instance(3, 73).unwrap();
        let ctx = AnsatzContext::new(&inst, Variant::Qaoa).unwrap();
        assert!(ctx.cost(&p2).is_err());
    }
}
