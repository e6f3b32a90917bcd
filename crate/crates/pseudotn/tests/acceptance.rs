//! End-to-end acceptance checks, one test per shipped guarantee. Each test
//! prints a single `criterion N: PASS/FAIL` line with the measured numbers,
//! then asserts, so a red criterion still reports its evidence.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::process::Command;
use std::sync::Mutex;

use pseudotn::ensembles::EnsembleSpec;
use pseudotn::spinmodel::purity_partition;
use pseudotn::statesim::{
    build_state, entropy_profile, family_regions, interior_segments, page_reference, CutFamily,
    EntropyKind,
};
use pseudotn::tngraph::{build_hyperbolic_64, build_staircase, min_cut};
use pseudotn::xcli::{
    cross_check_suite, ensemble_moment_exact, ensemble_moment_sampled, least_squares_slope,
    lemma1_check, lemma2_sweep, partition_oracle_rows, rt_verify, sampled_purity_mean,
    weingarten_check,
};
use pseudotn::replica::trace_norm_distance;
use pseudotn::ensembles::SeedTree;

static GATE: Mutex<()> = Mutex::new(());

fn serialize() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints directly to the process stdout so the line survives libtest's
/// output capture.
fn report(n: usize, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {n}: {verdict} {name}: {detail}").expect("stdout write");
}

fn complexify(
    op: &pseudotn::replica::MomentOperator<f64>,
) -> pseudotn::replica::MomentOperator<num_complex::Complex64> {
    pseudotn::replica::MomentOperator::from_matrix(
        op.layout().clone(),
        op.matrix().mapv(|x| num_complex::Complex64::new(x, 0.0)),
    )
    .expect("complexification preserves shape")
}

#[test]
fn weingarten_identities_hold_on_the_grid() {
    let _g = serialize();
    let dims: Vec<usize> = (3..=16).chain([32, 64]).collect();
    let rows = weingarten_check(&[2, 3, 4], &dims).expect("grid within caps");
    let find = |m: usize, d: usize| {
        rows.iter()
            .find(|r| r.m == m && r.d == d)
            .expect("row present")
    };
    let mut worst_s2 = 0.0f64;
    let mut s1_ok = true;
    for m in [2usize, 3, 4] {
        for d in (m + 1)..=16 {
            let r = find(m, d);
            assert!(r.accepted, "({m},{d}) must be in regime");
            s1_ok &= r.s1_residual == 0.0;
            worst_s2 = worst_s2.max(r.s2_residual);
        }
    }
    let mut s4_ok = true;
    for m in [2usize, 3] {
        let res: Vec<f64> = [8usize, 16, 32, 64]
            .iter()
            .map(|&d| find(m, d).s4_residual)
            .collect();
        s4_ok &= res.windows(2).all(|w| w[1] < w[0]);
    }
    let pass = s1_ok && worst_s2 < 1e-10 && s4_ok;
    report(
        1,
        "weingarten sum identities",
        pass,
        &format!(
            "gram sums exact: {s1_ok}, worst signed-sum residual {worst_s2:.3e}, \
             abs-sum residual decays in d: {s4_ok}"
        ),
    );
    assert!(pass);
}

#[test]
fn exact_moment_pipelines_agree_entrywise() {
    let _g = serialize();
    let rows = partition_oracle_rows().expect("suite within caps");
    let worst = rows
        .iter()
        .map(|r| r.max_abs_diff)
        .fold(0.0f64, f64::max);
    let pass = rows.iter().all(|r| r.pass);
    report(
        2,
        "sequential twirl vs partition sum",
        pass,
        &format!("{} graphs, worst entrywise gap {worst:.3e}", rows.len()),
    );
    assert!(pass, "oracle disagreement {worst:.3e}");
}

#[test]
fn staircase_distance_decays_inversely_with_bond_dimension() {
    let _g = serialize();
    let records = lemma2_sweep(3, &[1, 2, 3, 4], 2).expect("within caps");
    let decreasing = records.windows(2).all(|w| w[1].distance < w[0].distance);
    let xs: Vec<f64> = records.iter().map(|r| r.nu as f64).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.distance.log2()).collect();
    let slope = least_squares_slope(&xs, &ys);
    let pass = decreasing && (-1.4..=-0.6).contains(&slope);
    report(
        3,
        "two-copy distance vs bond dimension",
        pass,
        &format!(
            "distances {:?}, log2 slope {slope:.4}",
            records.iter().map(|r| r.distance).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

#[test]
fn pfc_moment_matches_haar_at_two_copies() {
    let _g = serialize();
    let rec = lemma1_check(2, 1, 2, 20_000, 41).expect("two-copy gate holds");
    let stderr = rec.stderr.expect("sampled record");
    let pass = rec.distance < 5.0 * stderr;
    report(
        4,
        "pfc gates are a two-copy match for haar",
        pass,
        &format!(
            "distance {:.4e} vs 5 x stderr {:.4e} at {} samples",
            rec.distance,
            5.0 * stderr,
            rec.samples
        ),
    );
    assert!(pass);
}

#[test]
fn pfc_three_copy_distance_decreases_with_bond_dimension() {
    let _g = serialize();
    let samples = 2000u64;
    let mut results = Vec::new();
    for nu in [1usize, 2] {
        let g = build_staircase(2, nu).expect("graph");
        let exact = complexify(&ensemble_moment_exact(&g, 3).expect("within caps"));
        let sampled = ensemble_moment_sampled(&g, EnsembleSpec::Pfc { keyed: false }, 3, samples, 43)
            .expect("sampling");
        let dist = trace_norm_distance(&sampled.op, &exact).expect("same layout");
        results.push((dist, sampled.stderr));
    }
    let (d1, se1) = results[0];
    let (d2, se2) = results[1];
    let combined = (se1 * se1 + se2 * se2).sqrt();
    // the clifford factor makes the gates an exact three-copy match for
    // haar, so both distances are pure sampling noise and the wider register
    // carries more of it; the expected decay direction does not appear
    let pass = d1 - d2 > 3.0 * combined;
    report(
        5,
        "three-copy distance direction",
        pass,
        &format!(
            "distance(nu=1) {d1:.4e}, distance(nu=2) {d2:.4e}, combined 3 sigma {:.4e}",
            3.0 * combined
        ),
    );
    assert!(pass, "noise-dominated distances do not order by bond dimension");
}

#[test]
fn sampled_entropy_never_exceeds_min_cut() {
    let _g = serialize();
    let samples = 200u64;
    let mut worst = f64::NEG_INFINITY;
    for nu in [2usize, 3] {
        let g = build_staircase(12 - nu, nu).expect("graph");
        let ids = g.output_ids();
        let n = ids.len();
        let mut regions: Vec<Vec<usize>> = family_regions(CutFamily::PrefixCuts, &ids)
            .into_iter()
            .map(|(_, r)| r)
            .collect();
        for (start, width) in interior_segments(n) {
            regions.push(ids[start..start + width].to_vec());
        }
        let cuts: Vec<f64> = regions
            .iter()
            .map(|r| min_cut(&g, r).expect("cut").weight_bits as f64)
            .collect();
        let tree = SeedTree::new(47);
        for s in 0..samples {
            let state = build_state(&g, EnsembleSpec::Haar, &tree, s).expect("state");
            for (region, &cut) in regions.iter().zip(cuts.iter()) {
                let set: BTreeSet<usize> = region.iter().copied().collect();
                let ent = state.entropy(&set, EntropyKind::VonNeumann).expect("entropy");
                worst = worst.max(ent - cut);
            }
        }
    }
    let pass = worst <= 1e-9;
    report(
        6,
        "sample-wise entropy under the min cut",
        pass,
        &format!("worst S(A) - mincut over all prefixes and segments: {worst:.3e} bits"),
    );
    assert!(pass);
}

#[test]
fn prefix_entropy_shows_plateau_and_haar_like_rise() {
    let _g = serialize();
    let samples = 50usize;
    let g = build_staircase(10, 3).expect("graph");
    let prof = entropy_profile(
        &g,
        EnsembleSpec::Haar,
        53,
        CutFamily::PrefixCuts,
        samples,
        EntropyKind::VonNeumann,
    )
    .expect("profile");
    let cuts: Vec<usize> = prof.points.iter().map(|p| p.cut).collect();
    let page = page_reference(13, &cuts, samples, 59).expect("reference");
    let plateau_ok = prof
        .points
        .iter()
        .filter(|p| (4..=9).contains(&p.cut))
        .all(|p| (2.0..=3.0).contains(&p.mean));
    let mut rising_ok = true;
    let mut rise_detail = String::new();
    for l in [1usize, 2] {
        let a = prof.points.iter().find(|p| p.cut == l).expect("cut");
        let b = page.points.iter().find(|p| p.cut == l).expect("cut");
        let sigma = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
        let z = (a.mean - b.mean).abs() / sigma;
        // the finite-bond ensemble sits measurably below the haar reference
        // already at one qubit, so this gap is expected to stay many sigma
        rising_ok &= z <= 3.0;
        rise_detail.push_str(&format!("cut {l}: z = {z:.1}; "));
    }
    let pass = plateau_ok && rising_ok;
    report(
        7,
        "plateau and rising profile",
        pass,
        &format!("plateau in [2,3] bits: {plateau_ok}, rise within 3 sigma of reference: {rise_detail}"),
    );
    assert!(pass);
}

#[test]
fn hyperbolic_region_entropy_saturates_min_cut() {
    let _g = serialize();
    let g = build_hyperbolic_64(1, 16).expect("graph");
    let region: BTreeSet<usize> = [5usize, 6].into_iter().collect();
    let rep = rt_verify(&g, &region, EnsembleSpec::Haar, 3, 61).expect("within caps");
    let pass = rep.mincut_bits == 8
        && rep.cut_cardinality == 2
        && rep.sandwich_ok
        && rep.mean_entropy_bits >= 6.4
        && rep.mean_entropy_bits <= 8.0 + 1e-9
        && rep.rt_lower_bound_bits <= rep.mincut_bits as f64 + 1e-9;
    report(
        8,
        "min-cut entropy sandwich on the hyperbolic patch",
        pass,
        &format!(
            "mincut {} bits ({} edges), lower bound {:.6} bits, mean {:.6} +/- {:.1e} bits",
            rep.mincut_bits,
            rep.cut_cardinality,
            rep.rt_lower_bound_bits,
            rep.mean_entropy_bits,
            rep.stderr_bits
        ),
    );
    assert!(pass);
}

#[test]
fn partition_purity_matches_monte_carlo() {
    let _g = serialize();
    let samples = 20_000u64;
    let mut pass = true;
    let mut seed = 67u64;
    let mut detail = String::new();
    for case in cross_check_suite().expect("suite") {
        let ids = case.graph.output_ids();
        let region: BTreeSet<usize> = ids[..ids.len().div_ceil(2)].iter().copied().collect();
        let exact = purity_partition(&case.graph, &region).expect("within caps");
        for spec in [EnsembleSpec::Haar, EnsembleSpec::Pfc { keyed: false }] {
            seed += 1;
            let (mean, se) = sampled_purity_mean(&case.graph, spec, &region, samples, seed)
                .expect("sampling");
            let gap = (mean - exact).abs();
            pass &= gap <= 5.0 * se + 1e-12;
            let z = if se > 0.0 { gap / se } else { 0.0 };
            detail.push_str(&format!("{}/{spec}: z = {z:.2}; ", case.name));
        }
    }
    report(9, "partition purity vs monte carlo", pass, detail.trim_end());
    assert!(pass);
}

#[test]
fn identical_configs_produce_identical_csv() {
    let _g = serialize();
    let bin = env!("CARGO_BIN_EXE_pseudotn");
    let configs: Vec<Vec<&str>> = vec![
        vec!["weingarten-check", "--copies", "2,3", "--dims", "4,8"],
        vec!["moment-distance", "--staircase", "2,1-3"],
        vec!["pfc-distance", "--staircase", "2,1", "--samples", "300", "--seed", "42"],
        vec!["area-law", "--staircase", "3,1", "--ensemble", "pfc", "--samples", "25", "--seed", "7"],
        vec!["rt-verify", "--staircase", "4,2", "--region", "3,6", "--ensemble", "clifford", "--samples", "25", "--seed", "9"],
        vec!["partition-oracle"],
        vec!["graph-validate", "--staircase", "3,2", "--region", "3,6"],
    ];
    let mut pass = true;
    for args in &configs {
        let run = |_: usize| {
            let out = Command::new(bin).args(args).output().expect("binary runs");
            assert!(
                out.status.success(),
                "{:?} failed: {}",
                args,
                String::from_utf8_lossy(&out.stderr)
            );
            out.stdout
        };
        let a = run(0);
        let b = run(1);
        pass &= !a.is_empty() && a == b;
    }
    report(
        10,
        "byte-identical csv under identical config",
        pass,
        &format!("{} subcommand configs run twice each", configs.len()),
    );
    assert!(pass);
}
