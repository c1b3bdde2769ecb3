use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specdens::estimator::{estimate_clt_d1, estimate_grid, fundamental_thetas, EstimatorConfig, Variant};
use specdens::geometry::{voronoi, Domain, SamplingDesign};
use specdens::kernels::{KernelFamily, KernelSpec};
use specdens::models::{CovarianceModel, RhoFamily};
use specdens::moments::{cum4, extra_isserlis, isserlis_complex, GaussianBlocks, JointGaussianSpec, ProcessVar, SampleMoments};
use specdens::operator::{ElementVector, OperatorRep};
use specdens::rkhs::{EigenExpansion, RkhsFamily, RkhsSpec};
use specdens::simulate::{sample_gaussian_exact, FftSampler, ProcessSample, RngConfig};
use specdens::Complex64;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(p: usize, g: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(p, p, |_, _| c(g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)))
}

fn random_vector(p: usize, g: &mut ChaCha8Rng) -> ElementVector {
    ElementVector::new((0..p).map(|_| c(g.random_range(-2.0..2.0), g.random_range(-2.0..2.0))).collect()).unwrap()
}

fn random_real_sample(design: SamplingDesign, p: usize, g: &mut ChaCha8Rng) -> ProcessSample {
    let n = design.n();
    let v = DMatrix::from_fn(n, p, |_, _| g.random_range(-1.0..1.0));
    ProcessSample::from_real(Arc::new(design), &v).unwrap()
}

fn kernel_family() -> impl Strategy<Value = KernelFamily> {
    prop_oneof![
        (1u32..6).prop_map(|lambda| KernelFamily::TruncatedPower { lambda }),
        (0.05f64..0.95).prop_map(|epsilon| KernelFamily::TrapezoidFlatTop { epsilon }),
        Just(KernelFamily::Bartlett),
        Just(KernelFamily::Parzen),
    ]
}

// operators

proptest! {
    #![proptest_config(cfg(48))]

    #[test]
    fn outer_product_trace_norm(seed in any::<u64>(), p in 1usize..8) {
        let mut g = rng(seed);
        let (x, y) = (random_vector(p, &mut g), random_vector(p, &mut g));
        let t = OperatorRep::outer(&x, &y).unwrap().trace_norm();
        let want = x.norm() * y.norm();
        prop_assert!((t - want).abs() <= 1e-12 * want.max(1e-300));
    }

    #[test]
    fn hs_inner_is_conjugate_symmetric(seed in any::<u64>(), p in 1usize..8) {
        let mut g = rng(seed);
        let a = OperatorRep::from_matrix(random_matrix(p, &mut g)).unwrap();
        let b = OperatorRep::from_matrix(random_matrix(p, &mut g)).unwrap();
        let ab = a.hs_inner(&b).unwrap();
        let ba = b.hs_inner(&a).unwrap();
        prop_assert!((ab - ba.conj()).norm() <= 1e-12 * (1.0 + ab.norm()));
    }

    #[test]
    fn trace_norm_is_unitarily_invariant(seed in any::<u64>(), p in 1usize..7) {
        let mut g = rng(seed);
        let a = OperatorRep::from_matrix(random_matrix(p, &mut g)).unwrap();
        let q = random_matrix(p, &mut g).qr().q();
        let conj = OperatorRep::from_matrix(&q * a.matrix() * q.adjoint()).unwrap();
        prop_assert!((conj.trace_norm() - a.trace_norm()).abs() <= 1e-10 * a.trace_norm());
    }

    #[test]
    fn trace_bounded_by_trace_norm(seed in any::<u64>(), p in 1usize..8) {
        let a = OperatorRep::from_matrix(random_matrix(p, &mut rng(seed))).unwrap();
        prop_assert!(a.trace().norm() <= a.trace_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn conjugation_is_antilinear_involution(seed in any::<u64>(), p in 1usize..8, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let a = OperatorRep::from_matrix(random_matrix(p, &mut rng(seed))).unwrap();
        let alpha = c(re, im);
        prop_assert_eq!(a.conj().conj(), a.clone());
        prop_assert!(a.scale(alpha).conj().max_abs_diff(&a.conj().scale(alpha.conj())) <= 1e-15);
    }
}

// kernels

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn kernels_are_symmetric_and_radially_nonincreasing(fam in kernel_family(), d in 1usize..4, u in prop::collection::vec(-1.5f64..1.5, 3), s in 0.0f64..1.0) {
        let k = KernelSpec::new(fam, d).unwrap();
        let u = &u[..d];
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        prop_assert_eq!(k.eval(u), k.eval(&neg));
        let shrunk: Vec<f64> = u.iter().map(|x| x * s).collect();
        prop_assert!(k.eval(&shrunk) >= k.eval(u) - 1e-15);
    }

    #[test]
    fn truncated_power_is_lipschitz(lambda in 1u32..6, r in 0.0f64..1.0, dr in 1e-6f64..1e-2) {
        let k = KernelSpec::truncated_power(lambda, 1).unwrap();
        let slope = (k.profile(r) - k.profile(r + dr)).abs() / dr;
        prop_assert!(slope <= (lambda + 1) as f64 + 1e-9);
    }
}

// geometry

proptest! {
    #![proptest_config(cfg(48))]

    #[test]
    fn overlap_is_symmetric_and_full_at_zero(w in 0.5f64..10.0, h in 0.5f64..10.0, hx in -12.0f64..12.0, hy in -12.0f64..12.0) {
        let dom = Domain::rectangle([0.0, 0.0], [w, h]).unwrap();
        prop_assert!((dom.overlap_volume(&[hx, hy]) - dom.overlap_volume(&[-hx, -hy])).abs() <= 1e-12 * w * h);
        prop_assert!((dom.overlap_volume(&[0.0, 0.0]) - w * h).abs() <= 1e-12 * w * h);
        let int = Domain::interval(-1.0, w).unwrap();
        prop_assert!((int.overlap_volume(&[hx]) - int.overlap_volume(&[-hx])).abs() <= 1e-12 * (w + 1.0));
    }

    #[test]
    fn scaled_translate_bound_on_squares(side in 0.5f64..20.0, frac in 0.0f64..1.0, angle in 0.0f64..(2.0 * PI)) {
        let dom = Domain::rectangle([0.0, 0.0], [side, side]).unwrap();
        let r = frac * side;
        let h = [r * angle.cos(), r * angle.sin()];
        let vol = side * side;
        let lhs = (vol - dom.overlap_volume(&h)) / vol;
        prop_assert!(lhs <= 2.0 * 2f64.sqrt() * r / side + 1e-12);
    }

    #[test]
    fn voronoi_volumes_sum_to_domain(seed in any::<u64>(), n in 1usize..150, two_d in any::<bool>()) {
        let mut g = rng(seed);
        let (design, dom) = if two_d {
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![g.random_range(0.0..3.0), g.random_range(0.0..2.0)]).collect();
            (SamplingDesign::from_points(&pts), Domain::rectangle([0.0, 0.0], [3.0, 2.0]).unwrap())
        } else {
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![g.random_range(0.0..5.0)]).collect();
            (SamplingDesign::from_points(&pts), Domain::interval(0.0, 5.0).unwrap())
        };
        let Ok(design) = design else { return Ok(()) };
        let tess = voronoi(&design, &dom).unwrap();
        let total: f64 = tess.volumes().iter().sum();
        prop_assert!((total - dom.volume()).abs() <= 1e-9 * dom.volume());
    }

    #[test]
    fn refinement_does_not_grow_cells(seed in any::<u64>(), n in 2usize..60, extra in 1usize..40) {
        let mut g = rng(seed);
        let pts: Vec<Vec<f64>> = (0..n + extra).map(|_| vec![g.random_range(0.0..4.0), g.random_range(0.0..4.0)]).collect();
        let dom = Domain::rectangle([0.0, 0.0], [4.0, 4.0]).unwrap();
        let (Ok(small), Ok(big)) = (SamplingDesign::from_points(&pts[..n]), SamplingDesign::from_points(&pts)) else { return Ok(()) };
        let a = voronoi(&small, &dom).unwrap();
        let b = voronoi(&big, &dom).unwrap();
        prop_assert!(b.diameter() <= a.diameter() + 1e-12);
    }
}

// models

proptest! {
    #![proptest_config(cfg(32))]

    #[test]
    fn folding_identity_for_gaussian_correlation(a in 0.3f64..2.0, delta in 0.4f64..1.5, t in -1.0f64..1.0) {
        let model = CovarianceModel::separable(1, RhoFamily::Gaussian { a }, OperatorRep::identity(2)).unwrap();
        let theta = t * PI / delta;
        let folded = model.folded_density(&[theta], delta).unwrap();
        let mut sum = OperatorRep::zeros(2);
        for k in -30i32..=30 {
            sum += &model.spectral_density(&[theta + 2.0 * PI * k as f64 / delta]).unwrap();
        }
        prop_assert!(folded.max_abs_diff(&sum) <= 1e-8);
    }

    #[test]
    fn spectral_density_is_positive(seed in any::<u64>(), t in -20.0f64..20.0, fam in 0usize..3) {
        let mut g = rng(seed);
        let b = DMatrix::from_fn(3, 3, |_, _| g.random_range(-1.0..1.0));
        let sigma = OperatorRep::from_real(&(&b * b.transpose() + DMatrix::identity(3, 3) * 0.1)).unwrap();
        let rho = [RhoFamily::Exponential { a: 0.7 }, RhoFamily::Gaussian { a: 0.7 }, RhoFamily::PowerLaw { beta: 1.5 }][fam];
        let f = CovarianceModel::separable(1, rho, sigma).unwrap().spectral_density(&[t]).unwrap();
        prop_assert!(f.self_adjoint_defect() <= 1e-12);
        prop_assert!(f.eig_self_adjoint(1e-9).unwrap().values.iter().all(|&v| v >= -1e-10));
    }
}

// simulation

proptest! {
    #![proptest_config(cfg(12))]

    #[test]
    fn samples_reproducible_across_thread_counts(seed in any::<u64>(), n in 8usize..200) {
        let model = CovarianceModel::separable(1, RhoFamily::Exponential { a: 0.4 }, OperatorRep::diag(&[1.0, 0.5, 0.2])).unwrap();
        let sampler = FftSampler::new(&model, n, 0.5).unwrap();
        let rc = RngConfig::new(seed);
        let draw = || -> Vec<ProcessSample> { (0..4u64).map(|r| sampler.sample(&mut rc.stream(&[r])).unwrap()).collect() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(draw);
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(draw);
        for (a, b) in one.iter().zip(&many) {
            prop_assert_eq!(a.values(), b.values());
            prop_assert!(a.is_real());
        }
        let exact = sample_gaussian_exact(&model, sampler.design(), &mut rc.stream(&[9])).unwrap();
        prop_assert!(exact.is_real());
        prop_assert!(exact.values().iter().all(|v| v.im == 0.0));
    }
}

// estimators

proptest! {
    #![proptest_config(cfg(24))]

    #[test]
    fn grid_estimates_hermitian_and_reversal_conjugates(seed in any::<u64>(), n in 8usize..80, p in 1usize..4, fam in kernel_family(), bw_frac in 0.05f64..1.0) {
        let mut g = rng(seed);
        let delta = 0.5;
        let sample = random_real_sample(SamplingDesign::grid_1d(delta, n).unwrap(), p, &mut g);
        let bw = bw_frac * n as f64 * delta;
        let cfg = EstimatorConfig::new(bw, KernelSpec::new(fam, 1).unwrap(), fundamental_thetas(1, delta, 9), Variant::Grid).unwrap();
        let a = estimate_grid(&sample, &cfg).unwrap();
        let b = estimate_grid(&sample.time_reversed().unwrap(), &cfg).unwrap();
        let naive = estimate_grid(&sample, &cfg.clone().with_fast_path(false)).unwrap();
        let fast = estimate_grid(&sample, &cfg.clone().with_fast_path(true)).unwrap();
        for i in 0..a.values.len() {
            prop_assert!(a.values[i].self_adjoint_defect() <= 1e-10);
            prop_assert!(a.values[i].conj().max_abs_diff(&b.values[i]) <= 1e-10);
            prop_assert!((&fast.values[i] - &naive.values[i]).hs_norm() <= 1e-9);
        }
    }

    #[test]
    fn bartlett_zero_frequency_nonnegative(seed in any::<u64>(), n in 2usize..120, bw_frac in 0.01f64..1.0) {
        let sample = random_real_sample(SamplingDesign::grid_1d(1.0, n).unwrap(), 1, &mut rng(seed));
        let cfg = EstimatorConfig::new(bw_frac * n as f64, KernelSpec::new(KernelFamily::Bartlett, 1).unwrap(), vec![vec![0.0]], Variant::CltD1).unwrap();
        prop_assert!(estimate_clt_d1(&sample, &cfg).unwrap().get(0).get(0, 0).re >= -1e-10);
    }
}

// moments

proptest! {
    #![proptest_config(cfg(32))]

    #[test]
    fn isserlis_is_permutation_invariant(seed in any::<u64>(), half in 1usize..4, perm_seed in any::<u64>()) {
        let m = 2 * half;
        let mut g = rng(seed);
        let a = random_matrix(m, &mut g);
        let r = &a * a.transpose();
        let mut perm: Vec<usize> = (0..m).collect();
        let mut pg = rng(perm_seed);
        for i in (1..m).rev() {
            perm.swap(i, pg.random_range(0..=i));
        }
        let rp = DMatrix::from_fn(m, m, |i, j| r[(perm[i], perm[j])]);
        let x = isserlis_complex(&JointGaussianSpec::new(r).unwrap()).unwrap();
        let y = isserlis_complex(&JointGaussianSpec::new(rp).unwrap()).unwrap();
        prop_assert!((x - y).norm() <= 1e-10 * (1.0 + x.norm()));
    }

    #[test]
    fn cum4_is_linear_in_first_argument(seed in any::<u64>(), p in 1usize..4, re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let mut g = rng(seed);
        let draws: Vec<[DVector<Complex64>; 4]> = (0..50)
            .map(|_| std::array::from_fn(|_| DVector::from_fn(p, |_, _| c(g.random_range(-1.0f64..1.0).powi(3), g.random_range(-1.0..1.0)))))
            .collect();
        let alpha = c(re, im);
        let scaled: Vec<[DVector<Complex64>; 4]> = draws.iter().map(|d| {
            let mut d = d.clone();
            d[0] *= alpha;
            d
        }).collect();
        let a = cum4(&SampleMoments::new(draws).unwrap());
        let b = cum4(&SampleMoments::new(scaled).unwrap());
        prop_assert!((b - alpha * a).norm() <= 1e-10 * (1.0 + b.norm()));
    }

    #[test]
    fn independent_gaussian_quadruple_has_zero_cumulant(seed in any::<u64>(), p in 1usize..4) {
        let mut g = rng(seed);
        // independent blocks: only the diagonal blocks are nonzero
        let mut cov = vec![DMatrix::from_element(p, p, c(0.0, 0.0)); 16];
        let mut pseudo = cov.clone();
        for a in 0..4 {
            let b = random_matrix(p, &mut g);
            cov[5 * a] = &b * b.adjoint();
            let s = random_matrix(p, &mut g);
            pseudo[5 * a] = (&s + s.transpose()) * c(0.1, 0.0);
        }
        let y = GaussianBlocks::new(cov, pseudo).unwrap();
        prop_assert!(cum4(&y).norm() <= 1e-10);
    }

    #[test]
    fn extra_isserlis_without_centring_is_plain_isserlis(seed in any::<u64>(), k in 1usize..4) {
        let mut g = rng(seed);
        let model = CovarianceModel::separable(1, RhoFamily::Exponential { a: 0.6 }, OperatorRep::identity(1)).unwrap();
        let ts: Vec<Vec<f64>> = (0..k).map(|_| vec![g.random_range(0.0..3.0)]).collect();
        let ss: Vec<Vec<f64>> = (0..k).map(|_| vec![g.random_range(0.0..3.0)]).collect();
        let vars: Vec<ProcessVar> = (0..k).flat_map(|i| [ProcessVar::new(ts[i].clone(), 0, false), ProcessVar::new(ss[i].clone(), 0, true)]).collect();
        let want = isserlis_complex(&JointGaussianSpec::from_process(&model, &vars).unwrap()).unwrap();
        let got = extra_isserlis(&model, &ts, &ss, k, 0).unwrap();
        prop_assert!((got - want).norm() <= 1e-12 * (1.0 + want.norm()));
    }
}

// reproducing-kernel spaces

proptest! {
    #![proptest_config(cfg(32))]

    #[test]
    fn interpolation_exact_and_minimum_norm(seed in any::<u64>(), m in 1usize..30, sobolev in any::<bool>(), amp in -1.0f64..1.0) {
        let mut g = rng(seed);
        let mut nodes: Vec<f64> = (0..m).map(|_| g.random_range(0.01..1.0)).collect();
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let family = if sobolev { RkhsFamily::Sobolev1 } else { RkhsFamily::Brownian };
        let spec = RkhsSpec::new(family, nodes.clone()).unwrap();
        let vals: Vec<f64> = nodes.iter().map(|&u| (3.0 * u).sin() + u * u).collect();
        let it = spec.interpolate(&vals).unwrap();
        for (&u, &v) in nodes.iter().zip(&vals) {
            prop_assert!((it.eval(u) - v).abs() <= 1e-12 * (1.0 + it.coeffs().amax()));
        }
        // competitor g̃ + amp·(R_x − Π R_x) agrees with g̃ on the nodes; it lies in the span over nodes ∪ {x}
        let x = g.random_range(0.0..1.0);
        prop_assume!(nodes.iter().all(|&u| (u - x).abs() > 1e-3));
        let h_interp = spec.interpolate(&nodes.iter().map(|&u| family.kernel(x, u)).collect::<Vec<_>>()).unwrap();
        let competitor = |u: f64| it.eval(u) + amp * (family.kernel(x, u) - h_interp.eval(u));
        let mut wide = nodes.clone();
        wide.push(x);
        wide.sort_by(f64::total_cmp);
        let wide_spec = RkhsSpec::new(family, wide.clone()).unwrap();
        let wide_it = wide_spec.interpolate(&wide.iter().map(|&u| competitor(u)).collect::<Vec<_>>()).unwrap();
        prop_assert!(wide_it.norm_sq() >= it.norm_sq() * (1.0 - 1e-9) - 1e-12);
    }

    #[test]
    fn projection_contracts_trace_norm(m in 1usize..40, power in 2.0f64..4.0) {
        let spec = RkhsSpec::uniform(RkhsFamily::Brownian, m).unwrap();
        let eig = EigenExpansion::brownian_sines(power, 15);
        let proj = spec.project_operator(|u, v| eig.kernel(u, v));
        let full: f64 = eig.nu.iter().sum();
        prop_assert!(spec.trace_norm_gram(&proj) <= full * (1.0 + 1e-10));
    }
}
