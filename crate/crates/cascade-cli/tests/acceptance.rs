//! Acceptance gates for the whole engine: twelve end-to-end criteria, one
//! test each, covering kernel identities, sampler goodness of fit, coupled
//! pathwise inequalities, Monte Carlo vs deterministic-oracle agreement,
//! explosion structure, non-uniqueness, iterate ordering, shell norms, and
//! reproducibility.  Each test prints one `acceptance NN ...: PASS` line
//! with its measured margins; a failing assert is the corresponding FAIL.
//!
//! Statistical gates run on pinned seeds, so outcomes are deterministic;
//! the z/p thresholds below are the advertised operating points, not
//! flaky confidence intervals.

use cascade_core::cascade::{Equation, Mode, SimConfig};
use cascade_core::data::{InitialDataSpec, Profile, ScalarMap};
use cascade_core::estimators;
use cascade_core::freq::Frequency;
use cascade_core::herz::{self, HerzParams, RadialFn};
use cascade_core::kernels::{KernelFamily, KernelSpec, QuadSpec};
use cascade_core::picard::{self, PicardGridSpec, PicardRun, PICARD_QUAD_TOL};
use cascade_core::rng::TreeRandomness;
use std::sync::OnceLock;
use std::time::Instant;

/// Base seed for every stochastic criterion; streams separate experiments.
const SEED: u64 = 20260815;

/// Grid-discretization error budget of the standard fixed-point grid,
/// measured against a 512×256 refinement at the comparison nodes (see
/// `grid_refinement_probe` below; worst observed 2.3e-4, at the outer
/// radii where the solution is small and steep; 1e-3 leaves headroom for
/// the refined grid's own residual error).
const PICARD_GRID_TOL: f64 = 1e-3;

/// Converged minimal-solution value at r = 1, t = 4 (r²t = 4) for unit
/// constant data under the dilation-invariant kernel on the standard grid.
/// Produced by the oracle itself and archived as a regression number
/// (the 512×256 refinement of `grid_refinement_probe` moves it by 1.4e-4,
/// so the archived digits are grid-specific by design).
const PSI_ONE_LIMIT_RHO2_4: f64 = 0.2443695527022843;

/// Comparison nodes spanning r²t ∈ [0.1, 10].
const NODES: [(f64, f64); 6] = [
    (0.5, 0.4),
    (0.7, 1.0),
    (1.0, 1.0),
    (1.0, 2.0),
    (1.5, 2.0),
    (2.0, 2.5),
];

fn si() -> KernelSpec {
    KernelSpec::new(KernelFamily::ScaleInvariant, 3).unwrap()
}

fn bessel() -> KernelSpec {
    KernelSpec::new(KernelFamily::Bessel, 3).unwrap()
}

fn unit_xi() -> Frequency {
    Frequency::new([1.0, 0.0, 0.0]).unwrap()
}

fn scalar_cfg(kernel: KernelSpec, t: f64, depth_cap: u32) -> SimConfig {
    SimConfig {
        kernel,
        root: unit_xi(),
        horizon: t,
        depth_cap,
        mode: Mode::Minimal,
        equation: Equation::Fms,
    }
}

fn data(profile: Profile) -> InitialDataSpec {
    InitialDataSpec::along_first_axis(profile, 3).unwrap()
}

/// The expensive shared oracle: unit constant data, dilation-invariant
/// kernel, standard grid, full 64 iterations (this one never early-stops).
fn psi_one_run() -> &'static PicardRun {
    static RUN: OnceLock<PicardRun> = OnceLock::new();
    RUN.get_or_init(|| {
        picard::run_picard(
            &si(),
            &Profile::Constant { kappa: 1.0 },
            &PicardGridSpec::standard(),
            64,
        )
        .expect("standard iteration stays bounded for unit data")
    })
}

#[test]
fn criterion_01_convolution_identity() {
    let t0 = Instant::now();
    let quad = QuadSpec::default();
    let mut worst = [(0.0f64, "bessel"), (0.0f64, "scale-invariant")];
    for &r in &[0.5, 1.0, 2.0] {
        worst[0].0 = worst[0].0.max(bessel().check_convolution_identity(r, &quad).rel_err);
        worst[1].0 = worst[1].0.max(si().check_convolution_identity(r, &quad).rel_err);
    }
    assert!(
        worst[0].0 < 1e-6,
        "acceptance 01 kernel-identity: FAIL — bessel rel err {:.3e} ≥ 1e-6",
        worst[0].0
    );
    assert!(
        worst[1].0 < 1e-4,
        "acceptance 01 kernel-identity: FAIL — scale-invariant rel err {:.3e} ≥ 1e-4",
        worst[1].0
    );
    println!(
        "acceptance 01 kernel-identity: PASS — bessel {:.2e} (< 1e-6), \
         scale-invariant {:.2e} (< 1e-4), {:.1}s",
        worst[0].0,
        worst[1].0,
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_02_sampler_goodness_of_fit() {
    let t0 = Instant::now();
    let mut min_p = 1.0f64;
    let mut cell = 0u64;
    for kernel in [si(), bessel()] {
        for &r in &[0.5, 1.0, 4.0] {
            let xi = Frequency::new([r, 0.0, 0.0]).unwrap();
            // A fresh seed per cell: reusing one seed would replay the same
            // uniform stream through every quantile layout and collapse the
            // six checks into two.
            let gof = kernel
                .validate_sampler(&xi, 1_000_000, 200, SEED + cell, false)
                .unwrap();
            cell += 1;
            assert!(
                gof.pvalue > 1e-3,
                "acceptance 02 sampler: FAIL — {} at r={r} has p={:.3e} ≤ 1e-3 (χ²={:.1})",
                kernel.family().name(),
                gof.pvalue,
                gof.chi2
            );
            min_p = min_p.min(gof.pvalue);
        }
    }
    for kernel in [si(), bessel()] {
        let gof = kernel
            .validate_sampler(&unit_xi(), 1_000_000, 200, SEED, true)
            .unwrap();
        assert!(
            gof.pvalue <= 1e-3,
            "acceptance 02 sampler: FAIL — biased control for {} slipped through (p={:.3e})",
            kernel.family().name(),
            gof.pvalue
        );
    }
    println!(
        "acceptance 02 sampler: PASS — min p {:.3} over both kernels × r ∈ {{0.5, 1, 4}}, \
         biased controls rejected, {:.1}s",
        min_p,
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_03_pathwise_majorization() {
    let t0 = Instant::now();
    let half = data(Profile::Constant { kappa: 0.5 });
    let mut worst = f64::NEG_INFINITY;
    for (stream, kernel) in [(30u64, si()), (31, bessel())] {
        let mut cfg = scalar_cfg(kernel, 1.0, 64);
        cfg.equation = Equation::Fns;
        let rep = estimators::majorize_audit(
            &cfg,
            &half,
            100_000,
            &TreeRandomness::new(SEED, stream),
        )
        .unwrap();
        assert_eq!(
            rep.violations, 0,
            "acceptance 03 majorization: FAIL — {} kernel broke |X| ≤ Y on {} of {} trees \
             (worst excess 2^{:.2})",
            rep.kernel, rep.violations, rep.n, rep.worst_excess_log2
        );
        worst = worst.max(rep.worst_excess_log2);
    }
    println!(
        "acceptance 03 majorization: PASS — |X| ≤ Y on 100% of 2 × 10⁵ coupled trees, \
         worst log₂ ratio {:.2}, {:.1}s",
        worst,
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_04_generalized_majorization() {
    let t0 = Instant::now();
    let maps = [
        ScalarMap::Power { alpha: 2.0 },
        ScalarMap::Power { alpha: 3.0 },
        ScalarMap::PowerLog,
        ScalarMap::Power { alpha: 1.5 },
    ];
    let cfg = scalar_cfg(si(), 1.0, 64);
    let rep = estimators::jensen_order_check(
        &cfg,
        &Profile::Constant { kappa: 0.5 },
        &maps,
        100_000,
        &TreeRandomness::new(SEED, 40),
    )
    .unwrap();
    for e in &rep.entries {
        assert_eq!(
            e.pathwise_violations, 0,
            "acceptance 04 transform ordering: FAIL — f = {} exceeded its transformed \
             cascade on {} trees (worst 2^{:.2})",
            e.map, e.pathwise_violations, e.worst_excess_log2
        );
        if e.multiplicative {
            assert!(
                e.max_mult_rel_err < 1e-10,
                "acceptance 04 transform ordering: FAIL — power-map identity Z = Y^α \
                 off by {:.3e} for f = {}",
                e.max_mult_rel_err,
                e.map
            );
        }
    }
    let worst_id = rep
        .entries
        .iter()
        .filter(|e| e.multiplicative)
        .map(|e| e.max_mult_rel_err)
        .fold(0.0f64, f64::max);
    println!(
        "acceptance 04 transform ordering: PASS — f(Y) ≤ Z on 100% of 10⁵ trees for \
         {{x², x³, x²ln(x²+e²), x^1.5}}, power identity within {:.1e}, {:.1}s",
        worst_id,
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_05_interpolation_inequality() {
    let t0 = Instant::now();
    let cfg = scalar_cfg(si(), 1.0, 64);
    let alphas = [0.5, 0.5];

    // 0.5 = 0.25^{1/2} · 1^{1/2} at every radius, so the base cascade
    // factorizes exactly and the inequality collapses to an identity.
    let exact = estimators::holder_audit(
        &cfg,
        &Profile::Constant { kappa: 0.5 },
        &[
            Profile::Constant { kappa: 0.25 },
            Profile::Constant { kappa: 1.0 },
        ],
        &alphas,
        100_000,
        &TreeRandomness::new(SEED, 50),
    )
    .unwrap();
    assert_eq!(exact.pathwise_violations, 0);
    let rel_gap = exact.max_abs_gap_log2 * std::f64::consts::LN_2;
    assert!(
        rel_gap < 1e-10,
        "acceptance 05 interpolation: FAIL — exact factorization off by relative {:.3e}",
        rel_gap
    );

    // 0.9·e^{-0.6r} ≤ (e^{-r})^{1/2} · 1^{1/2} strictly, so the generic
    // inequality must hold pathwise without being an identity.
    let generic = estimators::holder_audit(
        &cfg,
        &Profile::RadialExp { kappa: 0.9, a: 0.6 },
        &[
            Profile::RadialExp { kappa: 1.0, a: 1.0 },
            Profile::Constant { kappa: 1.0 },
        ],
        &alphas,
        100_000,
        &TreeRandomness::new(SEED, 51),
    )
    .unwrap();
    assert_eq!(
        generic.pathwise_violations, 0,
        "acceptance 05 interpolation: FAIL — generic data broke Y ≤ X₁^½X₂^½ on {} of {} \
         trees (worst 2^{:.2})",
        generic.pathwise_violations,
        generic.n,
        generic.worst_excess_log2
    );
    println!(
        "acceptance 05 interpolation: PASS — exact factorization within relative {:.1e}, \
         generic inequality on 100% of 10⁵ trees, {:.1}s",
        rel_gap,
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_06_thinned_equals_minimal() {
    let t0 = Instant::now();
    let half = data(Profile::Constant { kappa: 0.5 });
    let mut worst = 0.0f64;
    // Depth cap 256 keeps the shared truncation bias far below the Monte
    // Carlo resolution at N = 10⁵ so the z-test compares like with like.
    for (stream, equation) in [(60u64, Equation::Fms), (61, Equation::Fns)] {
        let mut cfg = scalar_cfg(si(), 1.0, 256);
        cfg.equation = equation;
        let cmp = estimators::compare_thinned_minimal(
            &cfg,
            0.5,
            &half,
            100_000,
            &TreeRandomness::new(SEED, stream),
        )
        .unwrap();
        assert!(
            cmp.max_abs_z < 4.0,
            "acceptance 06 thinned≡minimal: FAIL — {} estimators disagree, per-component \
             z = {:?}",
            equation.name(),
            cmp.z
        );
        worst = worst.max(cmp.max_abs_z);
    }
    println!(
        "acceptance 06 thinned≡minimal: PASS — max per-component |z| = {:.2} (< 4) over \
         fms and fns at N = 10⁵ per mode, {:.1}s",
        worst,
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_07_monte_carlo_matches_oracle() {
    let t0 = Instant::now();
    let spec = PicardGridSpec::standard();
    let profiles = [
        Profile::Constant { kappa: 1.0 },
        Profile::Constant { kappa: 0.5 },
        Profile::RadialExp { kappa: 1.0, a: 1.0 },
    ];
    let mut worst_sigma = 0.0f64;
    for (pi, profile) in profiles.iter().enumerate() {
        let owned;
        let run = if pi == 0 {
            psi_one_run()
        } else {
            owned = picard::run_picard(&si(), profile, &spec, 64).unwrap();
            &owned
        };
        let field = run.final_grid();
        let spec_data = data(profile.clone());
        for (ni, &(r, t)) in NODES.iter().enumerate() {
            let mut cfg = scalar_cfg(si(), t, 64);
            cfg.root = Frequency::new([r, 0.0, 0.0]).unwrap();
            let est = estimators::estimate_solution(
                &cfg,
                &spec_data,
                100_000,
                &TreeRandomness::new(SEED, 70 + (pi * 6 + ni) as u64),
            )
            .unwrap();
            let oracle = field.value_at(r, t);
            let gap = (est.mean[0] - oracle).abs();
            let allowed = 3.0 * est.stderr[0] + 2.0 * PICARD_GRID_TOL;
            assert!(
                gap < allowed,
                "acceptance 07 mc-vs-oracle: FAIL — {} at (r={r}, t={t}): MC {:.6} vs \
                 oracle {:.6}, gap {:.2e} ≥ {:.2e}",
                profile.describe(),
                est.mean[0],
                oracle,
                gap,
                allowed
            );
            worst_sigma = worst_sigma.max(gap / allowed);
        }
    }
    println!(
        "acceptance 07 mc-vs-oracle: PASS — 18 node comparisons (3 data profiles × 6 \
         nodes, r²t ∈ [0.1, 10]) within 3·se + 2·{PICARD_GRID_TOL:.0e}, worst at {:.0}% \
         of allowance, {:.1}s",
        100.0 * worst_sigma,
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_08_explosion_structure() {
    let t0 = Instant::now();
    let horizons = [0.5, 1.0, 2.0];
    let caps = [8u32, 16, 64];
    let rand = TreeRandomness::new(SEED, 80);
    let mut grid = Vec::new();
    for &cap in &caps {
        for &t in &horizons {
            let rep =
                estimators::explosion_probability(&scalar_cfg(si(), t, cap), 20_000, &rand)
                    .unwrap();
            grid.push(rep.survival);
        }
    }
    for ci in 0..caps.len() {
        for ti in 0..horizons.len() {
            let cur = grid[ci * horizons.len() + ti];
            if ti > 0 {
                assert!(
                    cur <= grid[ci * horizons.len() + ti - 1],
                    "acceptance 08 explosion: FAIL — survival rose with t at cap {}",
                    caps[ci]
                );
            }
            if ci > 0 {
                assert!(
                    cur >= grid[(ci - 1) * horizons.len() + ti],
                    "acceptance 08 explosion: FAIL — survival fell as the cap grew at t {}",
                    horizons[ti]
                );
            }
        }
    }

    let collapse = estimators::scaling_check(
        &scalar_cfg(si(), 1.0, 64),
        2.0,
        20_000,
        &TreeRandomness::new(SEED, 81),
    )
    .unwrap();
    assert!(
        collapse.z.abs() < 4.0,
        "acceptance 08 explosion: FAIL — dilation-invariant collapse broke: z = {:.2}",
        collapse.z
    );
    let mut bessel_cfg = scalar_cfg(bessel(), 2.0, 64);
    bessel_cfg.root = Frequency::new([2.0, 0.0, 0.0]).unwrap();
    let control = estimators::scaling_check(
        &bessel_cfg,
        2.0,
        10_000,
        &TreeRandomness::new(SEED, 82),
    )
    .unwrap();
    assert!(
        control.z.abs() > 6.0,
        "acceptance 08 explosion: FAIL — bessel negative control collapsed anyway \
         (z = {:.2}, survivals {:.4} vs {:.4})",
        control.z,
        control.scaled_root.survival,
        control.scaled_horizon.survival
    );
    println!(
        "acceptance 08 explosion: PASS — survival exactly monotone over a 3×3 (t, cap) \
         grid, collapse z = {:.2} (< 4), bessel control z = {:.1} (> 6), {:.1}s",
        collapse.z,
        control.z,
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_09_non_uniqueness() {
    let t0 = Instant::now();
    let run = psi_one_run();
    let limit = run.final_grid().value_at(1.0, 4.0);
    assert!(
        limit < 0.99,
        "acceptance 09 non-uniqueness: FAIL — minimal solution at r²t = 4 is {limit:.6}, \
         not strictly below the constant fixed point"
    );
    assert!(
        (limit - PSI_ONE_LIMIT_RHO2_4).abs() < 1e-7,
        "acceptance 09 non-uniqueness: FAIL — archived limit drifted: {limit:.12} vs \
         {PSI_ONE_LIMIT_RHO2_4:.12}"
    );
    let spec = PicardGridSpec::standard();
    let ones = picard::RadialGrid::constant(spec.radii(), spec.times(), 1.0);
    let res = picard::residual(&si(), &ones, &Profile::Constant { kappa: 1.0 }, spec.tail)
        .unwrap();
    assert!(
        res < 2.0 * PICARD_QUAD_TOL,
        "acceptance 09 non-uniqueness: FAIL — ψ ≡ 1 is not a fixed point within \
         quadrature tolerance (residual {res:.3e})"
    );
    println!(
        "acceptance 09 non-uniqueness: PASS — minimal limit {limit:.6} < 0.99 at r²t = 4 \
         while ψ ≡ 1 has residual {res:.1e} (< {:.0e}); two distinct solutions, {:.1}s",
        2.0 * PICARD_QUAD_TOL,
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_10_iterate_ordering() {
    let t0 = Instant::now();
    let rep = picard::jensen_iterate_check(
        &si(),
        &Profile::Constant { kappa: 0.5 },
        &ScalarMap::Power { alpha: 2.0 },
        &PicardGridSpec::standard(),
        12,
    )
    .unwrap();
    assert!(
        rep.passed(),
        "acceptance 10 iterate ordering: FAIL — {} of {} nodes broke f(ψ⁽ⁿ⁾) ≤ φ⁽ⁿ⁾ \
         (worst gap {:.3e} at {:?})",
        rep.violations,
        rep.nodes_checked,
        rep.worst_gap,
        rep.worst_node
    );
    println!(
        "acceptance 10 iterate ordering: PASS — f = x², ψ₀ = ½: 0 of {} grid nodes \
         violated through 12 iterates, {:.1}s",
        rep.nodes_checked,
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_11_shell_norm_suite() {
    let t0 = Instant::now();

    // Closed form: the unit annulus on [1, 2) at α = -1, p = q = 1 occupies
    // one shell and integrates to exactly 4π ∫₁² r dr = 6π.
    let annulus = RadialFn::from_profile(&Profile::Annulus {
        kappa: 1.0,
        r0: 1.0,
        r1: 2.0,
    });
    let rep = herz::herz_norm(&annulus, &HerzParams::new(-1.0, 1.0, 1.0)).unwrap();
    let err = (rep.norm - 6.0 * std::f64::consts::PI).abs();
    assert!(
        err < 1e-8,
        "acceptance 11 shell norms: FAIL — annulus closed form off by {err:.3e}"
    );

    // Amplitude homogeneity ‖λf‖ = λ‖f‖.
    let mut worst_hom = 0.0f64;
    for (profile, params) in [
        (
            Profile::RadialExp { kappa: 1.0, a: 2.0 },
            HerzParams::new(0.5, 2.0, 2.0),
        ),
        (
            Profile::Annulus { kappa: 3.0, r0: 0.5, r1: 4.0 },
            HerzParams::new(-1.0, 1.0, 4.0),
        ),
        (
            Profile::PowerCap { kappa: 1.0, beta: 4.0, r0: 1.0 },
            HerzParams::new(0.25, f64::INFINITY, f64::INFINITY),
        ),
    ] {
        let lam = 7.0;
        let base = herz::herz_norm(&RadialFn::from_profile(&profile), &params).unwrap();
        let scaled = herz::herz_norm(
            &RadialFn::from_profile(&profile.with_kappa(profile.kappa() * lam)),
            &params,
        )
        .unwrap();
        let rel = (scaled.norm - lam * base.norm).abs() / (lam * base.norm);
        assert!(
            rel < 1e-12,
            "acceptance 11 shell norms: FAIL — homogeneity off by {rel:.3e} for {}",
            profile.describe()
        );
        worst_hom = worst_hom.max(rel);
    }

    // ℓ^q nesting: the aggregate can only shrink as q grows.
    for (profile, alpha) in [
        (Profile::Annulus { kappa: 1.0, r0: 1.0, r1: 2.0 }, -0.5),
        (Profile::Annulus { kappa: 2.0, r0: 0.25, r1: 16.0 }, -0.5),
        (Profile::RadialExp { kappa: 1.0, a: 1.0 }, 0.5),
        (Profile::PowerCap { kappa: 1.0, beta: 4.0, r0: 1.0 }, 0.5),
    ] {
        let f = RadialFn::from_profile(&profile);
        let mut prev = f64::INFINITY;
        for q in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            let norm = herz::herz_norm(&f, &HerzParams::new(alpha, 2.0, q))
                .unwrap()
                .norm;
            assert!(
                norm <= prev * (1.0 + 1e-12),
                "acceptance 11 shell norms: FAIL — q-nesting broke for {} at q={q}",
                profile.describe()
            );
            prev = norm;
        }
    }

    // Normalized-power identity: take the kernel-normalized data
    // χ₀ = c₀v₀/h, raise it to the p-th power, and measure h·χ₀^p/c₀ in
    // the (α, p, q) = (−1, 1, 1) shell norm.  That route must equal
    // (c₀/c_d)^{p−1} times the p-th power of the plain scale-critical
    // norm of v₀ — both reduce to the same radial integral.
    let c0 = herz::fourier_amplitude_constant(3).unwrap();
    let cd = si().constant();
    let mut worst_id = 0.0f64;
    for profile in [
        Profile::Annulus { kappa: 0.8, r0: 0.5, r1: 3.0 },
        Profile::RadialExp { kappa: 1.2, a: 1.5 },
    ] {
        for p in [1.0, 2.0, 3.0] {
            let chi0 = herz::normalize_data(&si(), &profile).unwrap();
            let weighted = chi0.powf(p).scale(cd / c0, -2.0, 0.0);
            let route_a = herz::herz_norm(&weighted, &HerzParams::new(-1.0, 1.0, 1.0))
                .unwrap()
                .norm;
            let critical = herz::herz_norm(
                &RadialFn::from_profile(&profile),
                &HerzParams::scale_critical(p),
            )
            .unwrap()
            .norm;
            let route_b = (c0 / cd).powf(p - 1.0) * critical.powf(p);
            let gap = (route_a - route_b).abs() / route_b.abs().max(1e-300);
            assert!(
                gap < 1e-8,
                "acceptance 11 shell norms: FAIL — normalized-power identity off by \
                 {gap:.3e} at p={p} for {}",
                profile.describe()
            );
            worst_id = worst_id.max(gap);
        }
    }

    println!(
        "acceptance 11 shell norms: PASS — 6π closed form within {err:.1e}, homogeneity \
         within {worst_hom:.1e}, q-nesting over 4 profiles, power identity within \
         {worst_id:.1e} for p ∈ {{1,2,3}}, {:.1}s",
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_12_reproducibility() {
    let t0 = Instant::now();

    // Clause 1: the CLI is byte-stable under identical seed/config with one
    // worker (and, by substream design, any worker count).
    let mut outputs = Vec::new();
    for (tag, workers) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let mut path = std::env::temp_dir();
        path.push(format!("cascade-acceptance-{}-{tag}.csv", std::process::id()));
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_cascade-ns"))
            .args([
                "estimate", "--N", "20000", "--seed", "99", "--t", "1.5",
                "--workers", workers, "--output",
            ])
            .arg(&path)
            .output()
            .expect("binary runs");
        assert!(out.status.success());
        outputs.push(std::fs::read(&path).unwrap());
        let _ = std::fs::remove_file(path);
    }
    assert_eq!(
        outputs[0], outputs[1],
        "acceptance 12 reproducibility: FAIL — identical reruns differ"
    );
    assert_eq!(
        outputs[0], outputs[2],
        "acceptance 12 reproducibility: FAIL — worker count changed the artifact"
    );

    // Clause 2: per-tree values are identical under 1 vs 8 worker threads,
    // not merely their aggregates.
    let cfg = scalar_cfg(si(), 1.0, 64);
    let half = data(Profile::Constant { kappa: 0.5 });
    let rand = TreeRandomness::new(SEED, 120);
    let pools: Vec<_> = [1usize, 8]
        .iter()
        .map(|&threads| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| estimators::per_tree_components(&cfg, &half, 4_000, &rand))
        })
        .collect();
    assert_eq!(
        pools[0], pools[1],
        "acceptance 12 reproducibility: FAIL — per-tree values depend on the worker count"
    );
    println!(
        "acceptance 12 reproducibility: PASS — byte-identical CLI artifacts across reruns \
         and worker counts, per-tree values identical under 1 vs 8 threads, {:.1}s",
        t0.elapsed().as_secs_f64()
    );
}

/// One-off measurement behind `PICARD_GRID_TOL` and the archived limit:
/// compares the standard grid against a 512×256 refinement at the
/// comparison nodes for all three acceptance data profiles, and prints the
/// converged unit-data value at r²t = 4 plus the ψ ≡ 1 residual.
/// Run with `--ignored --nocapture`; takes tens of minutes.
#[test]
#[ignore]
fn grid_refinement_probe() {
    let standard = PicardGridSpec::standard();
    let refined = PicardGridSpec {
        r_count: 512,
        t_count: 256,
        ..PicardGridSpec::standard()
    };
    let profiles = [
        Profile::Constant { kappa: 1.0 },
        Profile::Constant { kappa: 0.5 },
        Profile::RadialExp { kappa: 1.0, a: 1.0 },
    ];
    let mut worst = 0.0f64;
    for profile in &profiles {
        let t0 = Instant::now();
        let coarse = picard::run_picard(&si(), profile, &standard, 64).unwrap();
        let fine = picard::run_picard(&si(), profile, &refined, 64).unwrap();
        println!(
            "{}: standard {} iters, refined {} iters, {:.0}s",
            profile.describe(),
            coarse.iterations(),
            fine.iterations(),
            t0.elapsed().as_secs_f64()
        );
        for &(r, t) in &NODES {
            let a = coarse.final_grid().value_at(r, t);
            let b = fine.final_grid().value_at(r, t);
            println!("  (r={r}, t={t}): standard {a:.9} refined {b:.9} diff {:.3e}", (a - b).abs());
            worst = worst.max((a - b).abs());
        }
        if matches!(profile, Profile::Constant { kappa } if *kappa == 1.0) {
            println!(
                "  unit-data limit at (1, 4): standard {:.16} refined {:.16}",
                coarse.final_grid().value_at(1.0, 4.0),
                fine.final_grid().value_at(1.0, 4.0)
            );
        }
    }
    let ones = picard::RadialGrid::constant(standard.radii(), standard.times(), 1.0);
    let res =
        picard::residual(&si(), &ones, &Profile::Constant { kappa: 1.0 }, standard.tail)
            .unwrap();
    println!("worst node difference {worst:.3e}; ψ ≡ 1 residual {res:.3e}");
}
